//! Correspondence and weak-secrecy queries in verifier syntax, one per
//! postcondition class of the grounded attacker model.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::conditions::{EventMap, SigmaCap};
use crate::graph::{NodeLabel, PropertyGraph};
use crate::planner::{Action, PlanError, PlanningTask, Predicate, Symbol, INIT_STATE};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("query syntax at byte {at}: {msg}")]
    Syntax { at: usize, msg: String },
}

pub type Partition = BTreeMap<Predicate, Vec<Action>>;

/// Classes of actions by their single postcondition, restricted to `s`.
pub fn partition_actions(t: &PlanningTask, s: &SigmaCap) -> Result<Partition, QueryError> {
    let mut out = Partition::new();
    for a in &t.actions {
        let post = a.single_post()?;
        if s.contains(post) {
            out.entry(post.clone()).or_default().push(a.clone());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct EventPat {
    pub name: String,
    pub args: Vec<String>,
}

impl fmt::Display for EventPat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "event({}({}))", self.name, self.args.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    Event(EventPat),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl Formula {
    /// Event names in left-to-right order.
    pub fn event_names(&self) -> Vec<&str> {
        match self {
            Formula::Event(e) => vec![e.name.as_str()],
            Formula::And(fs) | Formula::Or(fs) => {
                fs.iter().flat_map(Formula::event_names).collect()
            }
        }
    }

    fn args(&self) -> Vec<String> {
        match self {
            Formula::Event(e) => e.args.clone(),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().flat_map(Formula::args).collect(),
        }
    }

    fn disjuncts(&self) -> Vec<&Formula> {
        match self {
            Formula::Or(fs) => fs.iter().collect(),
            other => vec![other],
        }
    }

    fn write(&self, out: &mut String, nested: bool) {
        match self {
            Formula::Event(e) => write!(out, "{e}").expect("string write"),
            Formula::And(fs) | Formula::Or(fs) => {
                let sep = if matches!(self, Formula::And(_)) {
                    " && "
                } else {
                    " || "
                };
                if nested {
                    out.push('(');
                }
                for (k, f) in fs.iter().enumerate() {
                    if k > 0 {
                        out.push_str(sep);
                    }
                    f.write(out, true);
                }
                if nested {
                    out.push(')');
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryKind {
    Correspondence,
    WeakSecrecy,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuerySpec {
    pub kind: QueryKind,
    pub vars: Vec<(String, String)>,
    pub conclusion: EventPat,
    /// Top-level disjuncts; empty for weak secrecy.
    pub disjuncts: Vec<Formula>,
}

impl fmt::Display for QuerySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("query ")?;
        if !self.vars.is_empty() {
            let decls: Vec<String> = self.vars.iter().map(|(v, t)| format!("{v}:{t}")).collect();
            writeln!(f, "{};", decls.join(", "))?;
        }
        write!(f, "{}", self.conclusion)?;
        for (k, d) in self.disjuncts.iter().enumerate() {
            let mut s = String::new();
            d.write(&mut s, true);
            let lead = if k == 0 { "\n    ==> " } else { "\n     || " };
            write!(f, "{lead}{s}")?;
        }
        f.write_str(".\n")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Schema,
    Ground,
}

impl std::str::FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "schema" => Ok(Level::Schema),
            "ground" => Ok(Level::Ground),
            other => Err(format!(
                "unknown query level `{other}` (expected schema or ground)"
            )),
        }
    }
}

/// Parameter names and types of each rule schema.
const SCHEMA_PARAMS: &[(&str, &[(&str, &str)])] = &[
    ("r_init-loc", &[("x", "bitstring"), ("cn", "country")]),
    ("r_init-as", &[("i", "ip"), ("a", "as")]),
    ("r_init-dom", &[("d", "dom"), ("i", "ip")]),
    ("r_init-ip", &[("d", "dom"), ("i", "ip")]),
    (
        "r_injection",
        &[
            ("i", "ip"),
            ("j", "ip"),
            ("a", "as"),
            ("b", "as"),
            ("c", "as"),
        ],
    ),
    ("r_dns-ns", &[("d", "dom"), ("e", "dom"), ("i", "ip")]),
    ("r_dns-res", &[("d", "dom"), ("e", "dom"), ("r", "ip")]),
    (
        "r_dns-route-res",
        &[("d", "dom"), ("e", "dom"), ("r", "ip"), ("i", "ip")],
    ),
    (
        "r_dns-route-ns",
        &[
            ("d", "dom"),
            ("e", "dom"),
            ("f", "dom"),
            ("r", "ip"),
            ("i", "ip"),
        ],
    ),
    ("r_compromise/1", MAIL_PATH),
    ("r_compromise/2", MAIL_PATH),
    ("r_intercept", MAIL_PATH),
    ("r_fake-mx/1", FAKE_MX),
    ("r_fake-mx/2", FAKE_MX),
    ("r_fake-mx-strict/1", FAKE_MX),
    ("r_fake-mx-strict/2", FAKE_MX),
    ("r_fake-ip/1", FAKE_IP),
    ("r_fake-ip/2", FAKE_IP),
];
const MAIL_PATH: &[(&str, &str)] = &[
    ("d", "provider"),
    ("e", "provider"),
    ("d1", "dom"),
    ("e1", "dom"),
    ("d2", "ip"),
    ("e2", "ip"),
];
const FAKE_MX: &[(&str, &str)] = &[("d", "provider"), ("e", "provider"), ("d1", "dom")];
const FAKE_IP: &[(&str, &str)] = &[
    ("d", "provider"),
    ("e", "provider"),
    ("d1", "dom"),
    ("e1", "dom"),
];

/// Mail-level queries written against the protocol's bookkeeping events.
struct MailTemplate {
    class: Symbol,
    vars: &'static str,
    conclusion: &'static str,
    disjuncts: &'static [&'static str],
}

const MAIL_TEMPLATES: &[MailTemplate] = &[
    MailTemplate {
        class: Symbol::Unconf,
        vars: "m:provider, n:provider, m':dom, n':dom, e:ip, d:dom, g:ip, r:ip, i:ip, j:ip",
        conclusion: "Unconf(m,n)",
        disjuncts: &[
            "event(isMailserver(m',m)) && event(A_record(i,m')) && event(C_ip(i))",
            "event(isMailserver(n',n)) && event(A_record(i,n')) && event(C_ip(i))",
            "event(isMailserver(m',m)) && event(A_record(i,m')) && event(Received(n,d,r)) && \
                 ((event(queries_prov(i,n)) && event(Resolver(i,g)) && event(C_ip(g))) \
                 || (event(queries_prov(i,n)) && event(Resolver(i,g)) && event(UsedDomServer(g,e)) && event(C_ip(e))) \
                 || (event(queries_prov(i,n)) && event(Resolver(i,g)) && event(C_routing(i,g))) \
                 || (event(queries_prov(i,n)) && event(Resolver(i,g)) && event(UsedDomServer(g,e)) \
                     && event(C_routing(g,e)) && event(nDNSSEC(n))))",
            "event(isMailserver(m',m)) && event(A_record(i,m')) && event(queries_prov(i,n)) \
                 && event(Received(n,d,j)) && event(C_routing(i,j))",
        ],
    },
    MailTemplate {
        class: Symbol::Unconf,
        vars: "x:provider, d:dom, m:ip, e:ip, f:ip, g:ip",
        conclusion: "Received(x,d,m)",
        disjuncts: &[
            "event(Register_MX(x,d)) && event(Register_A(d,m))",
            "event(queries_prov(f,x)) && event(C_ip(f))",
            "event(queries_prov(f,x)) && event(Resolver(f,g)) && event(C_ip(g))",
            "event(queries_prov(f,x)) && event(Resolver(f,g)) && event(C_routing(f,g))",
            "event(queries_prov(f,x)) && event(Resolver(f,g)) && event(UsedDomServer(g,e)) \
                 && event(C_routing(g,e)) && event(nDNSSEC(x))",
            "event(queries_prov(f,x)) && event(Resolver(f,g)) && event(UsedDomServer(g,e)) && event(C_ip(e))",
        ],
    },
];

fn schema_params(schema: &str) -> Option<&'static [(&'static str, &'static str)]> {
    SCHEMA_PARAMS
        .iter()
        .find(|(s, _)| *s == schema)
        .map(|(_, p)| *p)
}

/// Argument values of a ground action id `schema(a,b,…)`.
fn action_args(a: &Action) -> Vec<String> {
    let id = a.id.split('#').next().unwrap_or(&a.id);
    match (id.find('('), id.rfind(')')) {
        (Some(l), Some(r)) if l < r => id[l + 1..r].split(',').map(str::to_string).collect(),
        _ => Vec::new(),
    }
}

fn merge_type(a: &str, b: &str) -> String {
    match (a, b) {
        _ if a == b => a.to_string(),
        ("provider", "dom") | ("dom", "provider") => "dom".into(),
        _ => "bitstring".into(),
    }
}

fn label_type(g: &PropertyGraph, v: &str) -> &'static str {
    match g.label(v) {
        Some(NodeLabel::Provider) => "provider",
        Some(NodeLabel::Dom) => "dom",
        Some(NodeLabel::Ip) => "ip",
        Some(NodeLabel::As) => "as",
        Some(NodeLabel::Cntry) => "country",
        None => "bitstring",
    }
}

/// Identifier for a node name in emitted text.
pub fn constant(v: &str) -> String {
    let mut s: String = v
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    if !s.starts_with(|c: char| c.is_ascii_alphabetic()) {
        s.insert(0, 'n');
    }
    s
}

fn event_of(p: &Predicate, map: &EventMap, arg: impl Fn(&str) -> String) -> EventPat {
    EventPat {
        name: map.event_name(p.symbol),
        args: p.args.iter().map(|a| arg(a)).collect(),
    }
}

fn conj(events: Vec<EventPat>) -> Formula {
    let mut fs: Vec<Formula> = events.into_iter().map(Formula::Event).collect();
    if fs.len() == 1 {
        fs.pop().expect("one element")
    } else {
        Formula::And(fs)
    }
}

const CONCLUSION_VARS: [&str; 2] = ["x", "y"];

fn schema_query(symbol: Symbol, actions: &[&Action], map: &EventMap) -> Option<QuerySpec> {
    // one representative per schema, preferring pairwise distinct arguments
    let mut reps: BTreeMap<&str, &Action> = BTreeMap::new();
    for a in actions {
        let schema = a.schema();
        if schema == INIT_STATE || schema_params(schema).is_none() {
            continue;
        }
        let distinct = {
            let args = action_args(a);
            args.iter().collect::<BTreeSet<_>>().len() == args.len()
        };
        match reps.get(schema) {
            Some(prev)
                if !distinct || {
                    let args = action_args(prev);
                    args.iter().collect::<BTreeSet<_>>().len() == args.len()
                } => {}
            _ => {
                reps.insert(schema, a);
            }
        }
    }
    if reps.is_empty() {
        return None;
    }
    let mut types: BTreeMap<String, String> = BTreeMap::new();
    let mut declare = |v: &str, t: &str| {
        let merged = types
            .get(v)
            .map(|old| merge_type(old, t))
            .unwrap_or_else(|| t.to_string());
        types.insert(v.to_string(), merged);
    };
    let mut disjuncts = Vec::new();
    for (schema, a) in &reps {
        let params = schema_params(schema).expect("filtered");
        let values = action_args(a);
        let post = a.single_post().ok()?;
        let name_of = |v: &str| -> String {
            if let Some(k) = post.args.iter().position(|p| p == v) {
                return CONCLUSION_VARS[k].to_string();
            }
            match values.iter().position(|x| x == v) {
                Some(k) => params[k].0.to_string(),
                None => constant(v),
            }
        };
        for (k, v) in values.iter().enumerate() {
            if k < params.len() {
                declare(&name_of(v), params[k].1);
            }
        }
        disjuncts.push(conj(
            a.pre.iter().map(|p| event_of(p, map, name_of)).collect(),
        ));
    }
    let conclusion = EventPat {
        name: map.event_name(symbol),
        args: CONCLUSION_VARS[..symbol.arity()]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    };
    let mut vars: Vec<(String, String)> = Vec::new();
    for v in CONCLUSION_VARS[..symbol.arity()].iter() {
        if let Some(t) = types.remove(*v) {
            vars.push((v.to_string(), t));
        }
    }
    let used: BTreeSet<String> = disjuncts.iter().flat_map(Formula::args).collect();
    vars.extend(types.into_iter().filter(|(v, _)| used.contains(v)));
    Some(QuerySpec {
        kind: QueryKind::Correspondence,
        vars,
        conclusion,
        disjuncts,
    })
}

fn mail_queries(symbol: Symbol) -> Vec<QuerySpec> {
    let mut out = Vec::new();
    for t in MAIL_TEMPLATES.iter().filter(|t| t.class == symbol) {
        let disjuncts: Vec<Formula> = t
            .disjuncts
            .iter()
            .map(|f| parse_formula(f).expect("shipped query template parses"))
            .collect();
        if disjuncts.is_empty() {
            continue;
        }
        let vars = t
            .vars
            .split(',')
            .map(|d| {
                let (v, ty) = d.trim().split_once(':').expect("typed declaration");
                (v.to_string(), ty.to_string())
            })
            .collect();
        let conclusion = match parse_formula(&format!("event({})", t.conclusion))
            .expect("template conclusion")
        {
            Formula::Event(e) => e,
            _ => unreachable!("single event"),
        };
        out.push(QuerySpec {
            kind: QueryKind::Correspondence,
            vars,
            conclusion,
            disjuncts,
        });
    }
    out
}

fn secrecy_schema(map: &EventMap) -> QuerySpec {
    QuerySpec {
        kind: QueryKind::WeakSecrecy,
        vars: vec![
            ("m".into(), "provider".into()),
            ("n".into(), "provider".into()),
        ],
        conclusion: EventPat {
            name: map.event_name(Symbol::Unconf),
            args: vec!["m".into(), "n".into()],
        },
        disjuncts: Vec::new(),
    }
}

/// The queries for a partition. Schema level quantifies over the rule
/// parameters and is graph-independent; ground level has one query per
/// class with node names as constants.
pub fn build_queries(
    partition: &Partition,
    level: Level,
    g: &PropertyGraph,
    map: &EventMap,
) -> Vec<QuerySpec> {
    let mut out = Vec::new();
    match level {
        Level::Schema => {
            let mut by_symbol: BTreeMap<Symbol, Vec<&Action>> = BTreeMap::new();
            for (p, acts) in partition {
                by_symbol.entry(p.symbol).or_default().extend(acts.iter());
            }
            for (symbol, acts) in &by_symbol {
                let mail = mail_queries(*symbol);
                if mail.is_empty() {
                    out.extend(schema_query(*symbol, acts, map));
                } else {
                    out.extend(mail);
                }
            }
            if by_symbol.contains_key(&Symbol::Unconf) {
                out.push(secrecy_schema(map));
            }
        }
        Level::Ground => {
            for (p, acts) in partition {
                if acts.iter().any(|a| a.pre.is_empty()) {
                    continue;
                }
                let disjuncts = acts
                    .iter()
                    .map(|a| conj(a.pre.iter().map(|q| event_of(q, map, constant)).collect()))
                    .collect();
                out.push(QuerySpec {
                    kind: QueryKind::Correspondence,
                    vars: Vec::new(),
                    conclusion: event_of(p, map, constant),
                    disjuncts,
                });
            }
            for p in partition.keys().filter(|p| p.symbol == Symbol::Unconf) {
                out.push(QuerySpec {
                    kind: QueryKind::WeakSecrecy,
                    vars: Vec::new(),
                    conclusion: event_of(p, map, constant),
                    disjuncts: Vec::new(),
                });
            }
            let _ = g;
        }
    }
    out
}

/// Query text. Ground level is preceded by declarations of the constants.
pub fn emit_queries(
    partition: &Partition,
    level: Level,
    g: &PropertyGraph,
    map: &EventMap,
) -> String {
    let queries = build_queries(partition, level, g, map);
    let mut out = String::new();
    if level == Level::Ground {
        let mut consts: BTreeMap<String, &'static str> = BTreeMap::new();
        for (p, acts) in partition {
            for q in std::iter::once(p).chain(acts.iter().flat_map(|a| a.pre.iter())) {
                for v in &q.args {
                    consts.insert(constant(v), label_type(g, v));
                }
            }
        }
        for (c, t) in &consts {
            writeln!(out, "free {c}:{t}.").expect("string write");
        }
        if !consts.is_empty() {
            out.push('\n');
        }
    }
    for (k, q) in queries.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        write!(out, "{q}").expect("string write");
    }
    out
}

/// Structural summary used to compare query files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryShape {
    pub conclusion: String,
    pub disjunct_events: Vec<Vec<String>>,
}

impl QuerySpec {
    pub fn shape(&self) -> QueryShape {
        QueryShape {
            conclusion: self.conclusion.name.clone(),
            disjunct_events: self
                .disjuncts
                .iter()
                .map(|d| d.event_names().into_iter().map(str::to_string).collect())
                .collect(),
        }
    }
}

/// Differences between our correspondence queries and each reference query,
/// matched by conclusion event: missing conclusions, disjunct count, and the
/// event names (as multisets) of each disjunct. Extra queries are ignored.
pub fn structural_diff(ours: &[QuerySpec], reference: &[QuerySpec]) -> Vec<String> {
    let index = |qs: &[QuerySpec]| -> BTreeMap<String, QueryShape> {
        qs.iter()
            .filter(|q| q.kind == QueryKind::Correspondence)
            .map(|q| (q.conclusion.name.clone(), q.shape()))
            .collect()
    };
    let (a, b) = (index(ours), index(reference));
    let mut diffs = Vec::new();
    for (c, rs) in &b {
        let Some(os) = a.get(c) else {
            diffs.push(format!("missing query for {c}"));
            continue;
        };
        if os.disjunct_events.len() != rs.disjunct_events.len() {
            diffs.push(format!(
                "{c}: {} disjuncts, expected {}",
                os.disjunct_events.len(),
                rs.disjunct_events.len()
            ));
            continue;
        }
        for (k, (o, r)) in os
            .disjunct_events
            .iter()
            .zip(&rs.disjunct_events)
            .enumerate()
        {
            let (mut o, mut r) = (o.clone(), r.clone());
            o.sort();
            r.sort();
            if o != r {
                diffs.push(format!(
                    "{c}: disjunct {} events {o:?}, expected {r:?}",
                    k + 1
                ));
            }
        }
    }
    diffs
}

// ---- reader for the emitted subset of the query language ----

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Punct(&'static str),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, QueryError> {
    const PUNCT: [&str; 9] = ["==>", "&&", "||", "(", ")", ",", ";", ":", "."];
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let rest = &src[i..];
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
        } else if rest.starts_with("(*") {
            let end = rest.find("*)").ok_or(QueryError::Syntax {
                at: i,
                msg: "unterminated comment".into(),
            })?;
            i += end + 2;
        } else if c.is_ascii_alphanumeric() || c == '_' {
            let len = rest
                .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_' || ch == '\''))
                .unwrap_or(rest.len());
            out.push((i, Tok::Ident(rest[..len].to_string())));
            i += len;
        } else if let Some(p) = PUNCT.iter().find(|p| rest.starts_with(**p)) {
            out.push((i, Tok::Punct(p)));
            i += p.len();
        } else {
            return Err(QueryError::Syntax {
                at: i,
                msg: format!("unexpected `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Reader {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Reader {
    fn at(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.0).unwrap_or(self.end)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, QueryError> {
        Err(QueryError::Syntax {
            at: self.at(),
            msg: msg.into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn punct(&mut self, p: &str) -> Result<(), QueryError> {
        match self.peek() {
            Some(Tok::Punct(q)) if *q == p => {
                self.pos += 1;
                Ok(())
            }
            _ => self.err(format!("expected `{p}`")),
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Tok::Punct(q)) if *q == p)
    }

    fn ident(&mut self) -> Result<String, QueryError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn keyword(&mut self, k: &str) -> Result<(), QueryError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == k => {
                self.pos += 1;
                Ok(())
            }
            _ => self.err(format!("expected `{k}`")),
        }
    }

    fn event(&mut self) -> Result<EventPat, QueryError> {
        self.keyword("event")?;
        self.punct("(")?;
        let name = self.ident()?;
        self.punct("(")?;
        let mut args = Vec::new();
        if !self.is_punct(")") {
            args.push(self.ident()?);
            while self.is_punct(",") {
                self.pos += 1;
                args.push(self.ident()?);
            }
        }
        self.punct(")")?;
        self.punct(")")?;
        Ok(EventPat { name, args })
    }

    fn atom(&mut self) -> Result<Formula, QueryError> {
        if self.is_punct("(") {
            self.pos += 1;
            let f = self.disj()?;
            self.punct(")")?;
            Ok(f)
        } else {
            Ok(Formula::Event(self.event()?))
        }
    }

    fn conj(&mut self) -> Result<Formula, QueryError> {
        let mut fs = vec![self.atom()?];
        while self.is_punct("&&") {
            self.pos += 1;
            fs.push(self.atom()?);
        }
        Ok(if fs.len() == 1 {
            fs.pop().expect("one")
        } else {
            Formula::And(fs)
        })
    }

    fn disj(&mut self) -> Result<Formula, QueryError> {
        let mut fs = vec![self.conj()?];
        while self.is_punct("||") {
            self.pos += 1;
            fs.push(self.conj()?);
        }
        Ok(if fs.len() == 1 {
            fs.pop().expect("one")
        } else {
            Formula::Or(fs)
        })
    }

    fn decl(&mut self) -> Result<(String, String), QueryError> {
        let v = self.ident()?;
        self.punct(":")?;
        Ok((v, self.ident()?))
    }

    fn query(&mut self) -> Result<QuerySpec, QueryError> {
        self.keyword("query")?;
        let mut vars = Vec::new();
        if matches!(self.toks.get(self.pos + 1), Some((_, Tok::Punct(":")))) {
            vars.push(self.decl()?);
            while self.is_punct(",") {
                self.pos += 1;
                vars.push(self.decl()?);
            }
            self.punct(";")?;
        }
        let conclusion = self.event()?;
        let (kind, disjuncts) = if self.is_punct("==>") {
            self.pos += 1;
            let d = self.disj()?;
            (
                QueryKind::Correspondence,
                d.disjuncts().into_iter().cloned().collect(),
            )
        } else {
            (QueryKind::WeakSecrecy, Vec::new())
        };
        self.punct(".")?;
        Ok(QuerySpec {
            kind,
            vars,
            conclusion,
            disjuncts,
        })
    }
}

fn parse_formula(src: &str) -> Result<Formula, QueryError> {
    let mut r = Reader {
        toks: lex(src)?,
        pos: 0,
        end: src.len(),
    };
    let f = r.disj()?;
    if r.peek().is_some() {
        return r.err("trailing input");
    }
    Ok(f)
}

/// Reads `query` and `free` declarations; comments are skipped.
pub fn parse_queries(src: &str) -> Result<Vec<QuerySpec>, QueryError> {
    let mut r = Reader {
        toks: lex(src)?,
        pos: 0,
        end: src.len(),
    };
    let mut out = Vec::new();
    while let Some(t) = r.peek() {
        match t {
            Tok::Ident(k) if k == "query" => out.push(r.query()?),
            Tok::Ident(k) if k == "free" => {
                r.pos += 1;
                r.decl()?;
                r.punct(".")?;
            }
            _ => return r.err("expected `query` or `free`"),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::Predicate;

    fn p(s: &str) -> Predicate {
        s.parse().unwrap()
    }

    fn task(actions: Vec<Action>) -> PlanningTask {
        PlanningTask::from_parts(BTreeSet::new(), actions)
    }

    #[test]
    fn shared_post_forms_one_class() {
        let t = task(vec![
            Action::new("r_init-as(i,a)", [p("C(a)")], p("C(i)")),
            Action::new("r_init-dom(d,i)", [p("C(d)")], p("C(i)")),
        ]);
        let part = partition_actions(&t, &SigmaCap::default()).unwrap();
        assert_eq!(part.len(), 1);
        assert_eq!(part[&p("C(i)")].len(), 2);
    }

    #[test]
    fn classes_outside_sigma_dropped() {
        let t = task(vec![Action::new("r_init-as(i,a)", [p("C(a)")], p("C(i)"))]);
        assert!(partition_actions(&t, &SigmaCap::empty())
            .unwrap()
            .is_empty());
        let part = Partition::new();
        assert_eq!(
            emit_queries(
                &part,
                Level::Schema,
                &PropertyGraph::new(),
                &EventMap::shipped()
            ),
            ""
        );
    }

    #[test]
    fn multi_post_rejected() {
        let mut a = Action::new("x", [], p("C(a)"));
        a.post.insert(p("C(b)"));
        assert!(matches!(
            partition_actions(&task(vec![a]), &SigmaCap::default()),
            Err(QueryError::Plan(_))
        ));
    }

    #[test]
    fn round_trip() {
        let t = task(vec![
            Action::new("r_init-as(1.1.1.1,AS1)", [p("C(AS1)")], p("C(1.1.1.1)")),
            Action::new(
                "r_init-dom(a.com,1.1.1.1)",
                [p("C(a.com)")],
                p("C(1.1.1.1)"),
            ),
            Action::new(
                "r_injection(1.1.1.1,2.2.2.2,AS1,AS3,AS2)",
                [p("C(AS3)"), p("nVPN(AS1,AS2)")],
                p("I_R(1.1.1.1,2.2.2.2)"),
            ),
        ]);
        let part = partition_actions(&t, &SigmaCap::default()).unwrap();
        let map = EventMap::shipped();
        for level in [Level::Schema, Level::Ground] {
            let text = emit_queries(&part, level, &PropertyGraph::new(), &map);
            let back = parse_queries(&text).unwrap();
            assert_eq!(
                back,
                build_queries(&part, level, &PropertyGraph::new(), &map),
                "{text}"
            );
            assert_eq!(back.len(), 2);
        }
        let text = emit_queries(&part, Level::Schema, &PropertyGraph::new(), &map);
        assert!(
            text.contains("event(C_ip(x))\n    ==> event(C_ip(a))\n     || event(C_ip(d))"),
            "{text}"
        );
        assert!(
            text.contains("event(C_routing(x,y))\n    ==> (event(C_ip(b)) && event(nVPN(a,c)))"),
            "{text}"
        );
    }

    #[test]
    fn schema_level_ignores_instances() {
        let map = EventMap::shipped();
        let one = task(vec![Action::new(
            "r_init-as(1.1.1.1,AS1)",
            [p("C(AS1)")],
            p("C(1.1.1.1)"),
        )]);
        let two = task(vec![
            Action::new("r_init-as(9.9.9.9,AS7)", [p("C(AS7)")], p("C(9.9.9.9)")),
            Action::new("r_init-as(8.8.8.8,AS7)", [p("C(AS7)")], p("C(8.8.8.8)")),
        ]);
        let emit = |t: &PlanningTask| {
            emit_queries(
                &partition_actions(t, &SigmaCap::default()).unwrap(),
                Level::Schema,
                &PropertyGraph::new(),
                &map,
            )
        };
        assert_eq!(emit(&one), emit(&two));
    }

    #[test]
    fn syntax_errors_located() {
        let e = parse_queries("query event(A(x)) ==> event(B(x))").unwrap_err();
        assert!(matches!(e, QueryError::Syntax { .. }));
        assert!(parse_queries(
            "query x:t; event(A(x)) ==> (event(B(x)) && event(C(x))) || event(D(x))."
        )
        .is_ok());
    }
}
