//! Compiler from property graphs to the applied-pi email infrastructure
//! model, and the graph-independent over-approximation.

use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::graph::{EdgeKind, NodeId, NodeLabel, PropertyGraph};
use crate::picalc::{parse_process, parse_templates, Name, ParseError, Process, Template, Term};
use crate::planner::{Predicate, Symbol};
use crate::transforms::{
    generalize_family, instantiate_generalized, push_all, ParallelFamily, TransformError,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EmailError {
    #[error("role templates: {0}")]
    Templates(ParseError),
    #[error("no resolver instance queries domain `{0}`")]
    UnknownDomain(String),
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("template `{template}` expects {expected} arguments, got {got}")]
    Arity {
        template: String,
        expected: usize,
        got: usize,
    },
}

pub const ON: &str = "on";
pub const OFF: &str = "off";

/// Family order, also the order of the over-approximation's components.
pub const FAMILIES: [&str; 8] = [
    "country",
    "claim",
    "route",
    "smtp_client",
    "smtp_server",
    "resolver",
    "nameserver",
    "root_nameserver",
];

pub fn templates() -> &'static [Template] {
    static CELL: OnceLock<Vec<Template>> = OnceLock::new();
    CELL.get_or_init(|| {
        parse_templates(include_str!("../data/roles.pi")).expect("shipped role templates parse")
    })
}

pub fn template(name: &str) -> Result<&'static Template, EmailError> {
    templates()
        .iter()
        .find(|t| &*t.name == name)
        .ok_or_else(|| EmailError::UnknownTemplate(name.to_string()))
}

/// Instantiates a template with public names.
pub fn instantiate(t: &Template, args: &[String]) -> Result<Process, EmailError> {
    if args.len() != t.params.len() {
        return Err(EmailError::Arity {
            template: t.name.to_string(),
            expected: t.params.len(),
            got: args.len(),
        });
    }
    let vars = t
        .params
        .iter()
        .cloned()
        .zip(args.iter().map(|a| Term::public(a)))
        .collect();
    Ok(t.body.subst(&vars, &BTreeMap::new()))
}

/// One uniform parallel family: a template and its parameter tuples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleFamily {
    pub template: &'static Template,
    pub instances: BTreeSet<Vec<String>>,
}

impl RoleFamily {
    pub fn name(&self) -> &str {
        &self.template.name
    }

    pub fn process(&self) -> Process {
        Process::par_all(
            self.instances
                .iter()
                .map(|i| instantiate(self.template, i).expect("arity checked")),
        )
    }
}

/// Attacker and defender choices the compiled model depends on.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EmailConfig {
    pub attacker: BTreeSet<NodeId>,
    pub defender: BTreeSet<Predicate>,
}

impl EmailConfig {
    fn flag(&self, symbol: Symbol, args: &[&str]) -> String {
        let p = Predicate::new(symbol, args);
        if self.defender.contains(&p) { OFF } else { ON }.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Compiled {
    pub families: Vec<RoleFamily>,
    /// Providers without a complete MX chain, skipped.
    pub missing: Vec<NodeId>,
}

impl Compiled {
    pub fn family(&self, name: &str) -> Option<&RoleFamily> {
        self.families.iter().find(|f| f.name() == name)
    }

    pub fn process(&self) -> Process {
        Process::par_all(
            self.families
                .iter()
                .filter(|f| !f.instances.is_empty())
                .map(RoleFamily::process),
        )
    }

    pub fn instance_count(&self) -> usize {
        self.families.iter().map(|f| f.instances.len()).sum()
    }
}

fn orig<'g>(g: &'g PropertyGraph, ip: &str) -> Vec<&'g NodeId> {
    g.succ(ip, EdgeKind::Orig)
}

/// Whether packets can travel between two addresses: same AS or an RTE
/// edge between their ASes. Addresses without an AS are unconstrained.
fn connected(g: &PropertyGraph, i: &str, j: &str) -> bool {
    let (ai, aj) = (orig(g, i), orig(g, j));
    if ai.is_empty() || aj.is_empty() {
        return true;
    }
    ai.iter().any(|a| {
        aj.iter()
            .any(|c| a == c || g.has_edge(a, EdgeKind::Rte, c) || g.has_edge(c, EdgeKind::Rte, a))
    })
}

/// `(mx, ip)` pairs of a provider.
fn mail_hosts<'g>(g: &'g PropertyGraph, v: &str) -> Vec<(&'g NodeId, &'g NodeId)> {
    let mut out = Vec::new();
    for mx in g.succ(v, EdgeKind::Mx) {
        for ip in g.succ(mx, EdgeKind::A) {
            out.push((mx, ip));
        }
    }
    out
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Corruption claims `(parent, x)`: the owner of `ckey(parent)` may take `x`.
fn claim_edges(g: &PropertyGraph) -> BTreeSet<(NodeId, NodeId)> {
    let mut out = BTreeSet::new();
    let ok = |x: &str| !g.is_root_server(x);
    for e in g.edges_of(EdgeKind::Loc) {
        if g.label(&e.src) != Some(NodeLabel::Cntry) && ok(&e.src) {
            out.insert((e.dst.clone(), e.src.clone()));
        }
    }
    for e in g.edges_of(EdgeKind::Orig) {
        if ok(&e.src) {
            out.insert((e.dst.clone(), e.src.clone()));
        }
    }
    for e in g.edges_of(EdgeKind::A) {
        if ok(&e.src) {
            out.insert((e.dst.clone(), e.src.clone()));
        }
        if ok(&e.dst) {
            out.insert((e.src.clone(), e.dst.clone()));
        }
    }
    out
}

pub fn compile_families(g: &PropertyGraph, cfg: &EmailConfig) -> Result<Compiled, EmailError> {
    let mut fam: BTreeMap<&str, BTreeSet<Vec<String>>> =
        FAMILIES.iter().map(|f| (*f, BTreeSet::new())).collect();
    let providers = g.nodes_with(|l| l == NodeLabel::Provider);
    let mut missing = Vec::new();
    let roots: Vec<(&NodeId, &NodeId)> = g
        .nodes_with(NodeLabel::is_domain)
        .into_iter()
        .filter(|d| g.is_root_server(d))
        .flat_map(|d| g.succ(d, EdgeKind::A).into_iter().map(move |i| (d, i)))
        .collect();
    let mut connections: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();

    for v in &providers {
        let hosts = mail_hosts(g, v);
        if hosts.is_empty() {
            missing.push(v.to_string());
            continue;
        }
        for (dc, ic) in &hosts {
            for r in g.succ(dc, EdgeKind::Res) {
                if !connected(g, ic, r) {
                    continue;
                }
                for v2 in providers.iter().filter(|v2| *v2 != v) {
                    for (es, js) in mail_hosts(g, v2) {
                        if !connected(g, ic, js) {
                            continue;
                        }
                        let tls = cfg.flag(Symbol::NTlsSnd, &[v]);
                        let rfc = cfg.flag(Symbol::NRfc7817, &[v]);
                        let dane = cfg.flag(Symbol::NDaneRcv, &[v2]);
                        fam.get_mut("smtp_client").unwrap().insert(
                            strings(&[v, dc, ic, r, v2, es, js])
                                .into_iter()
                                .chain([tls, rfc, dane])
                                .collect(),
                        );
                        fam.get_mut("smtp_server")
                            .unwrap()
                            .insert(strings(&[v2, es, js, v, dc, ic]));
                        connections.insert((ic.to_string(), r.to_string()));
                        connections.insert((ic.to_string(), js.to_string()));
                        for (q, a) in [(v2.as_str(), es.as_str()), (es.as_str(), js.as_str())] {
                            for n in g.succ(q, EdgeKind::Dns) {
                                for ni in g.succ(n, EdgeKind::A) {
                                    if !connected(g, r, ni) {
                                        continue;
                                    }
                                    for (rt, rti) in &roots {
                                        if !connected(g, r, rti) {
                                            continue;
                                        }
                                        let sec = cfg.flag(Symbol::NDnssec, &[q]);
                                        fam.get_mut("resolver").unwrap().insert(
                                            strings(&[r, dc, ic, q, n, ni, rt, rti, a])
                                                .into_iter()
                                                .chain([sec])
                                                .collect(),
                                        );
                                        fam.get_mut("root_nameserver")
                                            .unwrap()
                                            .insert(strings(&[rt, rti, r, q, n]));
                                    }
                                    fam.get_mut("nameserver")
                                        .unwrap()
                                        .insert(strings(&[n, ni, r, q, a]));
                                    connections.insert((r.to_string(), ni.to_string()));
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    // corruption claims reachable from the attacker countries
    let edges = claim_edges(g);
    let mut owned: BTreeSet<NodeId> = cfg.attacker.clone();
    loop {
        let before = owned.len();
        for (p, x) in &edges {
            if owned.contains(p) {
                owned.insert(x.clone());
            }
        }
        if owned.len() == before {
            break;
        }
    }
    for rte in g.edges_of(EdgeKind::Rte) {
        let b = rte.transit.as_ref().expect("validated RTE edge");
        let vpn = Predicate::new(Symbol::NVpn, &[&rte.src, &rte.dst]);
        if !owned.contains(b) || !cfg.defender.contains(&vpn) {
            continue;
        }
        for (i, j) in &connections {
            if orig(g, i).contains(&&rte.src) && orig(g, j).contains(&&rte.dst) {
                fam.get_mut("route")
                    .unwrap()
                    .insert(strings(&[b, &rte.src, &rte.dst, i, j]));
            }
        }
    }
    // keys that open a gate of some role instance
    let mut useful: BTreeSet<NodeId> = BTreeSet::new();
    for (f, pos) in [
        ("smtp_client", 2),
        ("smtp_server", 2),
        ("resolver", 0),
        ("nameserver", 1),
        ("route", 0),
    ] {
        useful.extend(fam[f].iter().map(|i| i[pos].clone()));
    }
    loop {
        let before = useful.len();
        for (p, x) in &edges {
            if useful.contains(x) {
                useful.insert(p.clone());
            }
        }
        if useful.len() == before {
            break;
        }
    }
    for cn in &cfg.attacker {
        fam.get_mut("country").unwrap().insert(vec![cn.clone()]);
    }
    for (p, x) in &edges {
        if owned.contains(p) && useful.contains(x) && !cfg.attacker.contains(x) {
            fam.get_mut("claim")
                .unwrap()
                .insert(vec![p.clone(), x.clone()]);
        }
    }

    let families = FAMILIES
        .iter()
        .map(|f| {
            Ok(RoleFamily {
                template: template(f)?,
                instances: fam.remove(f).unwrap_or_default(),
            })
        })
        .collect::<Result<Vec<_>, EmailError>>()?;
    Ok(Compiled { families, missing })
}

/// `F(G)` for the given attacker and defender configuration.
pub fn compile(g: &PropertyGraph, cfg: &EmailConfig) -> Result<Process, EmailError> {
    Ok(compile_families(g, cfg)?.process())
}

/// The fixed process whose traces include those of every compiled model.
pub fn over_approximation() -> Process {
    static CELL: OnceLock<Process> = OnceLock::new();
    CELL.get_or_init(|| {
        parse_process(include_str!("../data/over_approx.pi"))
            .expect("shipped over-approximation parses")
    })
    .clone()
}

/// Generalizes every role family and pushes all inputs inward.
pub fn derived_over_approximation() -> Process {
    Process::par_all(FAMILIES.iter().map(|f| {
        let t = template(f).expect("shipped family");
        let fam = ParallelFamily::new(t.body.clone(), t.params.clone(), Vec::new());
        push_all(&generalize_family(&fam).expect("templates are closed"))
    }))
}

/// Recovers the compiled model from the over-approximation by unrolling
/// each replicated family once per instance and feeding it the instance's
/// parameters.
pub fn instantiate_over_approximation(
    p: &Process,
    compiled: &Compiled,
) -> Result<Process, TransformError> {
    let parts = p.par_components();
    let mut out = Vec::new();
    for (k, fam) in compiled.families.iter().enumerate() {
        if fam.instances.is_empty() {
            continue;
        }
        let part = parts
            .get(k)
            .ok_or_else(|| TransformError::UnreachableParameter(fam.name().to_string()))?;
        let instances: Vec<Vec<String>> = fam.instances.iter().cloned().collect();
        out.push(instantiate_generalized(
            part,
            &fam.template.params,
            &instances,
        )?);
    }
    Ok(Process::par_all(out))
}

/// Switches DNSSEC validation for `domain` in every resolver instance that
/// queries it: disabled means forged answers are accepted and `nDNSSEC`
/// is raised.
pub fn dnssec_mode(p: &Process, domain: &str, enabled: bool) -> Result<Process, EmailError> {
    let target = Term::app(Symbol::NDnssec.as_str(), vec![Term::public(domain)]);
    let hits = Cell::new(0usize);
    fn walk(p: &Process, target: &Term, flag: &Term, hits: &Cell<usize>) -> Process {
        if let Process::If(_, n, then, els) = p {
            if let Process::Event(e, _) = &**then {
                if e == target && *n == Term::public(OFF) {
                    hits.set(hits.get() + 1);
                    return Process::If(
                        flag.clone(),
                        n.clone(),
                        then.clone(),
                        Arc::new(walk(els, target, flag, hits)),
                    );
                }
            }
        }
        p.map_children(|c| walk(c, target, flag, hits))
    }
    let flag = Term::public(if enabled { ON } else { OFF });
    let out = walk(p, &target, &flag, &hits);
    if hits.get() == 0 {
        return Err(EmailError::UnknownDomain(domain.to_string()));
    }
    Ok(out)
}

/// Event symbols and arities the compiled model may emit.
pub struct EventAlphabet;

impl EventAlphabet {
    pub const SYMBOLS: [(&'static str, usize); 19] = [
        ("Unconf", 2),
        ("Received", 3),
        ("Register_MX", 2),
        ("Register_A", 2),
        ("A_record", 2),
        ("isMailserver", 2),
        ("queries_prov", 2),
        ("Resolver", 2),
        ("UsedDomServer", 2),
        ("C_ip", 1),
        ("C_routing", 2),
        ("nDNSSEC", 1),
        ("I_DNS", 1),
        ("I_DNS2", 2),
        ("nTLS_snd", 1),
        ("nDANE_rcv", 1),
        ("nRFC7817", 1),
        ("nVPN", 2),
        ("Leak", 1),
    ];

    /// Registration and resolver-choice events, which are emitted once per
    /// role instance before any communication.
    pub const BOOKKEEPING: [&'static str; 7] = [
        "Register_MX",
        "Register_A",
        "A_record",
        "isMailserver",
        "queries_prov",
        "Resolver",
        "UsedDomServer",
    ];

    pub fn arity(name: &str) -> Option<usize> {
        Self::SYMBOLS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, a)| *a)
    }

    /// Events of `p` outside the alphabet.
    pub fn violations(p: &Process) -> Vec<String> {
        p.events()
            .into_iter()
            .filter(|e| match e {
                Term::App(f, args) => Self::arity(f) != Some(args.len()),
                _ => true,
            })
            .map(|e| e.to_string())
            .collect()
    }
}

/// Parameter names of a template, for reporting.
pub fn params(t: &Template) -> Vec<&Name> {
    t.params.iter().collect()
}
