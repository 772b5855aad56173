//! Delete-relaxed STRIPS attacker model grounded from a property graph.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::graph::{EdgeKind, NodeId, NodeLabel, PropertyGraph};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("attacker node `{0}` is not in the graph")]
    UnknownAttackerNode(String),
    #[error("attacker node `{0}` is not a country")]
    NonCountryAttacker(String),
    #[error("malformed defender predicate `{0}`")]
    MalformedDefenderPredicate(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("cannot parse predicate `{0}`")]
    PredicateSyntax(String),
    #[error("action `{0}` has {1} postconditions; split them first")]
    CS1Violated(String, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    C,
    IR,
    IDns1,
    IDns2,
    Unconf,
    NDnssec,
    NTlsSnd,
    NDaneRcv,
    NRfc7817,
    NVpn,
}

impl Symbol {
    pub const ALL: [Symbol; 10] = [
        Symbol::C,
        Symbol::IR,
        Symbol::IDns1,
        Symbol::IDns2,
        Symbol::Unconf,
        Symbol::NDnssec,
        Symbol::NTlsSnd,
        Symbol::NDaneRcv,
        Symbol::NRfc7817,
        Symbol::NVpn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Symbol::C => "C",
            Symbol::IR => "I_R",
            Symbol::IDns1 => "I_DNS1",
            Symbol::IDns2 => "I_DNS2",
            Symbol::Unconf => "unconf",
            Symbol::NDnssec => "nDNSSEC",
            Symbol::NTlsSnd => "nTLS_snd",
            Symbol::NDaneRcv => "nDANE_rcv",
            Symbol::NRfc7817 => "nRFC7817",
            Symbol::NVpn => "nVPN",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Symbol::IR | Symbol::IDns2 | Symbol::Unconf | Symbol::NVpn => 2,
            _ => 1,
        }
    }

    /// Configuration choices of the defender rather than attacker achievements.
    pub fn is_defender(self) -> bool {
        matches!(
            self,
            Symbol::NDnssec | Symbol::NTlsSnd | Symbol::NDaneRcv | Symbol::NRfc7817 | Symbol::NVpn
        )
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Symbol {
    type Err = PlanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Symbol::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| PlanError::PredicateSyntax(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Predicate {
    pub symbol: Symbol,
    pub args: Vec<NodeId>,
}

impl Predicate {
    pub fn new(symbol: Symbol, args: &[&str]) -> Self {
        assert_eq!(args.len(), symbol.arity(), "arity of {symbol}");
        Predicate {
            symbol,
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn c(x: &str) -> Self {
        Predicate::new(Symbol::C, &[x])
    }

    pub fn unconf(d: &str, e: &str) -> Self {
        Predicate::new(Symbol::Unconf, &[d, e])
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.symbol, self.args.join(","))
    }
}

impl FromStr for Predicate {
    type Err = PlanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PlanError::PredicateSyntax(s.to_string());
        let s = s.trim();
        let open = s.find('(').ok_or_else(bad)?;
        let inner = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let symbol: Symbol = s[..open].trim().parse().map_err(|_| bad())?;
        let args: Vec<NodeId> = inner.split(',').map(|a| a.trim().to_string()).collect();
        if args.len() != symbol.arity() || args.iter().any(String::is_empty) {
            return Err(bad());
        }
        Ok(Predicate { symbol, args })
    }
}

impl Serialize for Predicate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Predicate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub id: String,
    pub pre: BTreeSet<Predicate>,
    pub post: BTreeSet<Predicate>,
    #[serde(default)]
    pub reward: f64,
}

impl Action {
    pub fn new(
        id: impl Into<String>,
        pre: impl IntoIterator<Item = Predicate>,
        post: Predicate,
    ) -> Self {
        Action {
            id: id.into(),
            pre: pre.into_iter().collect(),
            post: BTreeSet::from([post]),
            reward: 0.0,
        }
    }

    /// Rule schema the action was grounded from.
    pub fn schema(&self) -> &str {
        self.id.split('(').next().unwrap_or(&self.id)
    }

    pub fn single_post(&self) -> Result<&Predicate, PlanError> {
        match self.post.len() {
            1 => Ok(self.post.iter().next().expect("one element")),
            n => Err(PlanError::CS1Violated(self.id.clone(), n)),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanningTask {
    pub predicates: BTreeSet<Predicate>,
    pub initial: BTreeSet<Predicate>,
    pub actions: Vec<Action>,
    #[serde(default)]
    pub goals: BTreeSet<Predicate>,
}

pub type Plan = Vec<String>;
pub type PlanningTrace = Vec<Predicate>;

/// Prefix of the action ids that make the initial state reproducible.
pub const INIT_STATE: &str = "r_init-state";

impl PlanningTask {
    /// Builds a task, taking `P` to be every predicate mentioned.
    pub fn from_parts(initial: BTreeSet<Predicate>, actions: Vec<Action>) -> Self {
        let mut predicates = initial.clone();
        for a in &actions {
            predicates.extend(a.pre.iter().cloned());
            predicates.extend(a.post.iter().cloned());
        }
        let goals = predicates
            .iter()
            .filter(|p| p.symbol == Symbol::Unconf)
            .cloned()
            .collect();
        PlanningTask {
            predicates,
            initial,
            actions,
            goals,
        }
    }

    pub fn action(&self, id: &str) -> Option<&Action> {
        self.actions.iter().find(|a| a.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("task serialization is infallible")
    }

    /// Drops actions that can never fire because some precondition is
    /// produced by no action and absent from the initial state; `P` becomes
    /// the initial state plus the remaining postconditions.
    pub fn prune_unproducible(&self) -> PlanningTask {
        let mut actions = self.actions.clone();
        loop {
            let producible: BTreeSet<Predicate> = self
                .initial
                .iter()
                .chain(actions.iter().flat_map(|a| a.post.iter()))
                .cloned()
                .collect();
            let before = actions.len();
            actions.retain(|a| a.pre.is_subset(&producible));
            if actions.len() == before {
                break;
            }
        }
        let mut predicates = self.initial.clone();
        for a in &actions {
            predicates.extend(a.post.iter().cloned());
        }
        let goals = self
            .goals
            .iter()
            .filter(|g| predicates.contains(*g))
            .cloned()
            .collect();
        PlanningTask {
            predicates,
            initial: self.initial.clone(),
            actions,
            goals,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleSet {
    #[default]
    Corrected,
    /// Without `r_init-ip` and with `nDNSSEC` kept in `r_dns-route-res`.
    Legacy,
}

impl FromStr for RuleSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "corrected" => Ok(RuleSet::Corrected),
            "legacy" => Ok(RuleSet::Legacy),
            other => Err(format!("unknown rule set `{other}`")),
        }
    }
}

/// Reward for making the pair `(d, e)` unconfidential, read from the
/// `reward:<e>` attribute of provider `d`.
pub fn pair_reward(g: &PropertyGraph, d: &str, e: &str) -> f64 {
    g.attr(d, &format!("reward:{e}"))
        .and_then(|v| v.parse().ok())
        .unwrap_or(0.0)
}

struct Grounder<'g> {
    g: &'g PropertyGraph,
    actions: Vec<Action>,
}

impl Grounder<'_> {
    fn add(&mut self, schema: &str, args: &[&str], pre: Vec<Predicate>, post: Predicate) {
        let id = format!("{schema}({})", args.join(","));
        self.actions.push(Action::new(id, pre, post));
    }

    fn rns(&self, x: &str) -> bool {
        self.g.is_root_server(x)
    }
}

/// Pairs `(mx, ip)` with `provider -MX-> mx -A-> ip`.
fn mx_hosts<'g>(g: &'g PropertyGraph, provider: &str) -> Vec<(&'g NodeId, &'g NodeId)> {
    let mut out = Vec::new();
    for mx in g.succ(provider, EdgeKind::Mx) {
        for ip in g.succ(mx, EdgeKind::A) {
            out.push((mx, ip));
        }
    }
    out
}

pub fn ground(
    g: &PropertyGraph,
    attacker: &BTreeSet<NodeId>,
    defender: &BTreeSet<Predicate>,
    rules: RuleSet,
) -> Result<PlanningTask, PlanError> {
    for cn in attacker {
        match g.label(cn) {
            None => return Err(PlanError::UnknownAttackerNode(cn.clone())),
            Some(NodeLabel::Cntry) => {}
            Some(_) => return Err(PlanError::NonCountryAttacker(cn.clone())),
        }
    }
    for p in defender {
        if !p.symbol.is_defender()
            || p.args.len() != p.symbol.arity()
            || p.args.iter().any(|a| !g.contains(a))
        {
            return Err(PlanError::MalformedDefenderPredicate(p.to_string()));
        }
    }
    let mut gr = Grounder {
        g,
        actions: Vec::new(),
    };
    let domains = g.nodes_with(NodeLabel::is_domain);
    let providers = g.nodes_with(|l| l == NodeLabel::Provider);

    let initial: BTreeSet<Predicate> = attacker
        .iter()
        .map(|cn| Predicate::c(cn))
        .chain(defender.iter().cloned())
        .collect();
    for p in &initial {
        gr.add(INIT_STATE, &[&p.to_string()], vec![], p.clone());
    }

    for e in g.edges_of(EdgeKind::Loc) {
        let x = &e.src;
        if g.label(x) != Some(NodeLabel::Cntry) && !gr.rns(x) {
            gr.add(
                "r_init-loc",
                &[x, &e.dst],
                vec![Predicate::c(&e.dst)],
                Predicate::c(x),
            );
        }
    }
    for e in g.edges_of(EdgeKind::Orig) {
        if !gr.rns(&e.src) {
            gr.add(
                "r_init-as",
                &[&e.src, &e.dst],
                vec![Predicate::c(&e.dst)],
                Predicate::c(&e.src),
            );
        }
    }
    for e in g.edges_of(EdgeKind::A) {
        let (d, i) = (&e.src, &e.dst);
        if !gr.rns(d) {
            gr.add(
                "r_init-dom",
                &[d, i],
                vec![Predicate::c(i)],
                Predicate::c(d),
            );
        }
        if rules == RuleSet::Corrected && !gr.rns(i) {
            gr.add("r_init-ip", &[d, i], vec![Predicate::c(d)], Predicate::c(i));
        }
    }
    for rte in g.edges_of(EdgeKind::Rte) {
        let (a, c) = (&rte.src, &rte.dst);
        let b = rte.transit.as_ref().expect("validated RTE edge");
        for i in g.pred(a, EdgeKind::Orig) {
            for j in g.pred(c, EdgeKind::Orig) {
                if gr.rns(i) || gr.rns(j) {
                    continue;
                }
                gr.add(
                    "r_injection",
                    &[i, j, a, b, c],
                    vec![Predicate::c(b), Predicate::new(Symbol::NVpn, &[a, c])],
                    Predicate::new(Symbol::IR, &[i, j]),
                );
            }
        }
    }
    for dns in g.edges_of(EdgeKind::Dns) {
        let (d, e) = (&dns.src, &dns.dst);
        for i in g.succ(e, EdgeKind::A) {
            gr.add(
                "r_dns-ns",
                &[d, e, i],
                vec![Predicate::c(i)],
                Predicate::new(Symbol::IDns1, &[d]),
            );
        }
    }
    for res in g.edges_of(EdgeKind::Res) {
        let (d, r) = (&res.src, &res.dst);
        for e in &domains {
            gr.add(
                "r_dns-res",
                &[d, e, r],
                vec![Predicate::c(r)],
                Predicate::new(Symbol::IDns2, &[d, e]),
            );
        }
        for i in g.succ(d, EdgeKind::A) {
            for e in &domains {
                let mut pre = vec![Predicate::new(Symbol::IR, &[i, r])];
                if rules == RuleSet::Legacy {
                    pre.push(Predicate::new(Symbol::NDnssec, &[e]));
                }
                gr.add(
                    "r_dns-route-res",
                    &[d, e, r, i],
                    pre,
                    Predicate::new(Symbol::IDns2, &[d, e]),
                );
            }
        }
        for dns in g.edges_of(EdgeKind::Dns) {
            let (e, f) = (&dns.src, &dns.dst);
            for i in g.succ(f, EdgeKind::A) {
                gr.add(
                    "r_dns-route-ns",
                    &[d, e, f, r, i],
                    vec![
                        Predicate::new(Symbol::IR, &[r, i]),
                        Predicate::new(Symbol::NDnssec, &[e]),
                    ],
                    Predicate::new(Symbol::IDns2, &[d, e]),
                );
            }
        }
    }
    for d in &providers {
        for e in &providers {
            if d == e {
                continue;
            }
            let goal = Predicate::unconf(d, e);
            let d_hosts = mx_hosts(g, d);
            let e_hosts = mx_hosts(g, e);
            for (d1, d2) in &d_hosts {
                for (e1, e2) in &e_hosts {
                    let args = [d.as_str(), e, d1, e1, d2, e2];
                    for (k, victim) in [e2, d2].into_iter().enumerate() {
                        let id = format!("r_compromise/{}", k + 1);
                        gr.add(&id, &args, vec![Predicate::c(victim)], goal.clone());
                    }
                    gr.add(
                        "r_intercept",
                        &args,
                        vec![
                            Predicate::new(Symbol::IR, &[d2, e2]),
                            Predicate::new(Symbol::NTlsSnd, &[d]),
                            Predicate::new(Symbol::NDaneRcv, &[e]),
                        ],
                        goal.clone(),
                    );
                }
            }
            for d1 in g.succ(d, EdgeKind::Mx) {
                let integrity = [
                    Predicate::new(Symbol::IDns1, &[e]),
                    Predicate::new(Symbol::IDns2, &[d1, e]),
                ];
                for (k, via) in integrity.iter().enumerate() {
                    gr.add(
                        &format!("r_fake-mx/{}", k + 1),
                        &[d, e, d1],
                        vec![via.clone(), Predicate::new(Symbol::NTlsSnd, &[d])],
                        goal.clone(),
                    );
                    gr.add(
                        &format!("r_fake-mx-strict/{}", k + 1),
                        &[d, e, d1],
                        vec![via.clone(), Predicate::new(Symbol::NRfc7817, &[d])],
                        goal.clone(),
                    );
                }
                for e1 in g.succ(e, EdgeKind::Mx) {
                    let integrity = [
                        Predicate::new(Symbol::IDns1, &[e1]),
                        Predicate::new(Symbol::IDns2, &[d1, e1]),
                    ];
                    for (k, via) in integrity.iter().enumerate() {
                        gr.add(
                            &format!("r_fake-ip/{}", k + 1),
                            &[d, e, d1, e1],
                            vec![via.clone(), Predicate::new(Symbol::NTlsSnd, &[d])],
                            goal.clone(),
                        );
                    }
                }
            }
        }
    }
    let mut actions = gr.actions;
    for a in &mut actions {
        if let Some(p) = a.post.iter().find(|p| p.symbol == Symbol::Unconf) {
            a.reward = pair_reward(g, &p.args[0], &p.args[1]);
        }
    }
    actions.sort_by(|a, b| a.id.cmp(&b.id));
    actions.dedup_by(|a, b| a.id == b.id);
    Ok(PlanningTask::from_parts(initial, actions))
}

/// Fixpoint layers: `layers[k]` holds the predicates first reached after `k` rounds.
pub fn fixpoint_layers(t: &PlanningTask) -> Vec<BTreeSet<Predicate>> {
    let mut state: BTreeSet<Predicate> = t.initial.clone();
    let mut layers = vec![state.clone()];
    loop {
        let mut next = BTreeSet::new();
        for a in &t.actions {
            if a.pre.is_subset(&state) {
                next.extend(a.post.iter().filter(|p| !state.contains(*p)).cloned());
            }
        }
        if next.is_empty() {
            return layers;
        }
        state.extend(next.iter().cloned());
        layers.push(next);
    }
}

pub fn reachable_fixpoint(t: &PlanningTask) -> BTreeSet<Predicate> {
    fixpoint_layers(t).into_iter().flatten().collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanOutcome {
    Plan(Plan),
    Unreachable,
}

pub fn extract_plan(t: &PlanningTask, goal: &Predicate) -> Result<PlanOutcome, PlanError> {
    if !t.predicates.contains(goal) && !t.initial.contains(goal) {
        return Err(PlanError::UnknownPredicate(goal.to_string()));
    }
    let layers = fixpoint_layers(t);
    let mut layer_of: BTreeMap<&Predicate, usize> = BTreeMap::new();
    for (k, l) in layers.iter().enumerate() {
        for p in l {
            layer_of.insert(p, k);
        }
    }
    if !layer_of.contains_key(goal) {
        return Ok(PlanOutcome::Unreachable);
    }
    // best achiever per predicate: lowest applicability layer, then id
    let mut achiever: BTreeMap<&Predicate, (usize, &Action)> = BTreeMap::new();
    for a in &t.actions {
        let Some(level) = a
            .pre
            .iter()
            .map(|p| layer_of.get(p).copied())
            .try_fold(0usize, |m, l| l.map(|l| m.max(l)))
        else {
            continue;
        };
        for p in &a.post {
            let better = match achiever.get(p) {
                None => true,
                Some((l, b)) => (level, &a.id) < (*l, &b.id),
            };
            if better && layer_of.get(p).is_some_and(|lp| level < *lp) {
                achiever.insert(p, (level, a));
            }
        }
    }
    let mut plan = Vec::new();
    let mut done: BTreeSet<&Predicate> = t.initial.iter().collect();
    fn achieve<'a>(
        p: &'a Predicate,
        achiever: &BTreeMap<&'a Predicate, (usize, &'a Action)>,
        done: &mut BTreeSet<&'a Predicate>,
        plan: &mut Plan,
    ) {
        if done.contains(p) {
            return;
        }
        let (_, a) = achiever[p];
        for q in &a.pre {
            achieve(q, achiever, done, plan);
        }
        plan.push(a.id.clone());
        done.extend(a.post.iter());
    }
    achieve(goal, &achiever, &mut done, &mut plan);
    Ok(PlanOutcome::Plan(plan))
}

/// Replays a plan, returning the final state, or the first inapplicable step.
pub fn replay(t: &PlanningTask, plan: &[String]) -> Result<BTreeSet<Predicate>, String> {
    let mut state = t.initial.clone();
    for id in plan {
        let a = t.action(id).ok_or_else(|| id.clone())?;
        if !a.pre.is_subset(&state) {
            return Err(id.clone());
        }
        state.extend(a.post.iter().cloned());
    }
    Ok(state)
}

/// All `postseq(π)` for plans of length at most `max_len`.
pub fn planning_traces(
    t: &PlanningTask,
    max_len: usize,
) -> Result<BTreeSet<PlanningTrace>, PlanError> {
    for a in &t.actions {
        a.single_post()?;
    }
    let mut out = BTreeSet::new();
    fn walk(
        t: &PlanningTask,
        state: &BTreeSet<Predicate>,
        prefix: &mut PlanningTrace,
        left: usize,
        out: &mut BTreeSet<PlanningTrace>,
    ) {
        if !out.insert(prefix.clone()) && prefix.is_empty() {
            return;
        }
        if left == 0 {
            return;
        }
        let mut seen = BTreeSet::new();
        for a in &t.actions {
            if !a.pre.is_subset(state) {
                continue;
            }
            let p = a.post.iter().next().expect("singleton");
            if !seen.insert(p) {
                continue;
            }
            let mut next = state.clone();
            next.insert(p.clone());
            prefix.push(p.clone());
            walk(t, &next, prefix, left - 1, out);
            prefix.pop();
        }
    }
    walk(t, &t.initial, &mut Vec::new(), max_len, &mut out);
    Ok(out)
}

pub fn total_reward(t: &PlanningTask, fixpoint: &BTreeSet<Predicate>) -> f64 {
    let mut per_atom: BTreeMap<&Predicate, f64> = BTreeMap::new();
    for a in &t.actions {
        for p in &a.post {
            if p.symbol == Symbol::Unconf && fixpoint.contains(p) {
                let r = per_atom.entry(p).or_insert(0.0);
                *r = r.max(a.reward);
            }
        }
    }
    per_atom.values().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Predicate {
        s.parse().unwrap()
    }

    #[test]
    fn predicate_round_trip() {
        for s in [
            "C(US)",
            "I_R(1.2.3.4,5.6.7.8)",
            "unconf(gmail.com,t-online.de)",
            "nVPN(AS1,AS2)",
        ] {
            assert_eq!(p(s).to_string(), s);
        }
        assert!("C(a,b)".parse::<Predicate>().is_err());
        assert!("Q(a)".parse::<Predicate>().is_err());
    }

    #[test]
    fn empty_graph_empty_task() {
        let t = ground(
            &PropertyGraph::new(),
            &BTreeSet::new(),
            &BTreeSet::new(),
            RuleSet::Corrected,
        )
        .unwrap();
        assert!(t.actions.is_empty());
        assert!(t.initial.is_empty());
    }

    #[test]
    fn fixpoint_without_actions_is_initial() {
        let t = PlanningTask::from_parts(BTreeSet::from([p("C(a)")]), vec![]);
        assert_eq!(reachable_fixpoint(&t), t.initial);
    }

    #[test]
    fn inapplicable_action_not_fired() {
        let t = PlanningTask::from_parts(
            BTreeSet::new(),
            vec![Action::new("x", [p("C(a)")], p("C(b)"))],
        );
        assert!(!reachable_fixpoint(&t).contains(&p("C(b)")));
        assert_eq!(
            extract_plan(&t, &p("C(b)")).unwrap(),
            PlanOutcome::Unreachable
        );
    }

    #[test]
    fn goal_in_initial_state_has_empty_plan() {
        let t = PlanningTask::from_parts(BTreeSet::from([p("C(a)")]), vec![]);
        assert_eq!(
            extract_plan(&t, &p("C(a)")).unwrap(),
            PlanOutcome::Plan(vec![])
        );
        assert!(matches!(
            extract_plan(&t, &p("C(z)")),
            Err(PlanError::UnknownPredicate(_))
        ));
    }

    #[test]
    fn planning_traces_small() {
        let t = PlanningTask::from_parts(BTreeSet::new(), vec![Action::new("a", [], p("C(p)"))]);
        let tr = planning_traces(&t, 1).unwrap();
        assert_eq!(tr, BTreeSet::from([vec![], vec![p("C(p)")]]));
        assert_eq!(planning_traces(&t, 0).unwrap(), BTreeSet::from([vec![]]));
    }

    #[test]
    fn planning_traces_require_singletons() {
        let mut a = Action::new("a", [], p("C(p)"));
        a.post.insert(p("C(q)"));
        let t = PlanningTask::from_parts(BTreeSet::new(), vec![a]);
        assert!(matches!(
            planning_traces(&t, 1),
            Err(PlanError::CS1Violated(..))
        ));
    }

    #[test]
    fn reward_counts_each_atom_once() {
        let mut a1 = Action::new("a1", [], p("unconf(x,y)"));
        a1.reward = 3.0;
        let mut a2 = Action::new("a2", [p("C(z)")], p("unconf(x,y)"));
        a2.reward = 3.0;
        let mut b = Action::new("b", [], p("unconf(y,x)"));
        b.reward = 5.0;
        let t = PlanningTask::from_parts(BTreeSet::new(), vec![a1, a2, b]);
        assert_eq!(total_reward(&t, &reachable_fixpoint(&t)), 8.0);
        assert_eq!(total_reward(&t, &BTreeSet::new()), 0.0);
    }

    #[test]
    fn prune_removes_never_applicable() {
        let t = PlanningTask::from_parts(
            BTreeSet::from([p("C(a)")]),
            vec![
                Action::new("ok", [p("C(a)")], p("C(b)")),
                Action::new("dead", [p("nVPN(x,y)")], p("I_R(i,j)")),
                Action::new("dead2", [p("I_R(i,j)")], p("C(c)")),
            ],
        );
        let q = t.prune_unproducible();
        assert_eq!(q.actions.len(), 1);
        assert_eq!(reachable_fixpoint(&q), reachable_fixpoint(&t));
        assert!(!q.predicates.contains(&p("nVPN(x,y)")));
    }
}
