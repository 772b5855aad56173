//! Soundness and completeness conditions relating planning traces to
//! protocol traces over the shared corruption alphabet.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::picalc::{Bounds, Term, TraceSet};
use crate::planner::{
    planning_traces, Action, PlanError, PlanningTask, PlanningTrace, Predicate, Symbol,
};

const MAX_WITNESSES: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConditionError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("planning trace bound {bound} is shorter than a projected protocol trace of length {needed}")]
    BoundTooSmall { bound: usize, needed: usize },
    #[error("bad sigma pattern `{0}`")]
    Pattern(String),
    #[error("event map: {0}")]
    EventMap(String),
}

/// A predicate pattern: a symbol, optionally with fixed arguments.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pattern {
    pub symbol: Symbol,
    pub args: Option<Vec<Option<String>>>,
}

impl Pattern {
    pub fn matches(&self, p: &Predicate) -> bool {
        if p.symbol != self.symbol {
            return false;
        }
        match &self.args {
            None => true,
            Some(args) => args
                .iter()
                .zip(&p.args)
                .all(|(want, got)| want.as_ref().is_none_or(|w| w == got)),
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol)?;
        if let Some(args) = &self.args {
            let shown: Vec<&str> = args.iter().map(|a| a.as_deref().unwrap_or("_")).collect();
            write!(f, "({})", shown.join(","))?;
        }
        Ok(())
    }
}

impl FromStr for Pattern {
    type Err = ConditionError;

    /// `C`, `C(US)` or `I_R(_,1.2.3.4)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ConditionError::Pattern(s.to_string());
        let s = s.trim();
        let Some(open) = s.find('(') else {
            return Ok(Pattern {
                symbol: s.parse().map_err(|_| bad())?,
                args: None,
            });
        };
        let symbol: Symbol = s[..open].parse().map_err(|_| bad())?;
        let inner = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let args: Vec<Option<String>> = inner
            .split(',')
            .map(|a| match a.trim() {
                "_" => None,
                x => Some(x.to_string()),
            })
            .collect();
        if args.len() != symbol.arity() {
            return Err(bad());
        }
        Ok(Pattern {
            symbol,
            args: Some(args),
        })
    }
}

/// The shared alphabet of planning predicates and protocol events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SigmaCap {
    pub members: BTreeSet<Pattern>,
}

impl Default for SigmaCap {
    fn default() -> Self {
        SigmaCap::of_symbols(&Symbol::ALL)
    }
}

impl SigmaCap {
    pub fn of_symbols(symbols: &[Symbol]) -> Self {
        SigmaCap {
            members: symbols
                .iter()
                .map(|&symbol| Pattern { symbol, args: None })
                .collect(),
        }
    }

    pub fn empty() -> Self {
        SigmaCap {
            members: BTreeSet::new(),
        }
    }

    pub fn without(mut self, symbol: Symbol) -> Self {
        self.members.retain(|m| m.symbol != symbol);
        self
    }

    /// Comma- or whitespace-separated patterns.
    pub fn parse(s: &str) -> Result<Self, ConditionError> {
        let mut members = BTreeSet::new();
        let mut depth = 0usize;
        let mut cur = String::new();
        for ch in s.chars() {
            match ch {
                '(' => depth += 1,
                ')' => depth = depth.saturating_sub(1),
                _ => {}
            }
            if depth == 0 && (ch == ',' || ch.is_whitespace()) {
                if !cur.trim().is_empty() {
                    members.insert(cur.parse()?);
                }
                cur.clear();
            } else {
                cur.push(ch);
            }
        }
        if !cur.trim().is_empty() {
            members.insert(cur.parse()?);
        }
        Ok(SigmaCap { members })
    }

    pub fn contains(&self, p: &Predicate) -> bool {
        self.members.iter().any(|m| m.matches(p))
    }
}

impl fmt::Display for SigmaCap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.members.iter().map(|m| m.to_string()).collect();
        f.write_str(&items.join(","))
    }
}

#[derive(Deserialize)]
struct EventMapFile {
    version: u32,
    events: BTreeMap<String, String>,
    #[serde(default)]
    query_events: BTreeMap<String, String>,
}

/// Versioned table from protocol event names to planning symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventMap {
    pub version: u32,
    table: BTreeMap<String, Symbol>,
    names: BTreeMap<Symbol, String>,
}

impl EventMap {
    pub fn from_json(src: &str) -> Result<Self, ConditionError> {
        let file: EventMapFile =
            serde_json::from_str(src).map_err(|e| ConditionError::EventMap(e.to_string()))?;
        let mut table = BTreeMap::new();
        for (event, sym) in file.events {
            let sym: Symbol = sym
                .parse()
                .map_err(|_| ConditionError::EventMap(format!("unknown symbol `{sym}`")))?;
            table.insert(event, sym);
        }
        let mut names = BTreeMap::new();
        for (sym, event) in file.query_events {
            let sym: Symbol = sym
                .parse()
                .map_err(|_| ConditionError::EventMap(format!("unknown symbol `{sym}`")))?;
            if table.get(&event) != Some(&sym) {
                return Err(ConditionError::EventMap(format!(
                    "query event `{event}` does not map back to `{sym}`"
                )));
            }
            names.insert(sym, event);
        }
        Ok(EventMap {
            version: file.version,
            table,
            names,
        })
    }

    pub fn shipped() -> Self {
        Self::from_json(include_str!("../data/event_map.json")).expect("shipped event map is valid")
    }

    /// The predicate an event stands for, if any.
    pub fn predicate(&self, event: &Term) -> Option<Predicate> {
        let Term::App(f, args) = event else {
            return None;
        };
        let symbol = *self.table.get(&**f)?;
        if args.len() != symbol.arity() {
            return None;
        }
        let mut names = Vec::with_capacity(args.len());
        for a in args.iter() {
            match a {
                Term::Pub(n) => names.push(n.to_string()),
                _ => return None,
            }
        }
        Some(Predicate {
            symbol,
            args: names,
        })
    }

    pub fn lift(&self, trace: &[Term]) -> Vec<TraceElem> {
        trace
            .iter()
            .map(|e| match self.predicate(e) {
                Some(p) => TraceElem::Pred(p),
                None => TraceElem::Other(e.to_string()),
            })
            .collect()
    }

    /// Event name used for `symbol` in emitted queries.
    pub fn event_name(&self, symbol: Symbol) -> String {
        self.names
            .get(&symbol)
            .cloned()
            .unwrap_or_else(|| symbol.as_str().to_string())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, Symbol)> {
        self.table.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// An element of either kind of trace.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum TraceElem {
    Pred(Predicate),
    Other(String),
}

pub fn lift_planning(t: &[Predicate]) -> Vec<TraceElem> {
    t.iter().cloned().map(TraceElem::Pred).collect()
}

pub fn project(t: &[TraceElem], s: &SigmaCap) -> Vec<Predicate> {
    t.iter()
        .filter_map(|e| match e {
            TraceElem::Pred(p) if s.contains(p) => Some(p.clone()),
            _ => None,
        })
        .collect()
}

pub fn equiv(a: &[TraceElem], b: &[TraceElem], s: &SigmaCap) -> bool {
    project(a, s) == project(b, s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    CS1,
    CS2,
    CS3,
    CS4,
    CS5,
    CC1,
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "CS1" => Ok(Condition::CS1),
            "CS2" => Ok(Condition::CS2),
            "CS3" => Ok(Condition::CS3),
            "CS4" => Ok(Condition::CS4),
            "CS5" => Ok(Condition::CS5),
            "CC1" => Ok(Condition::CC1),
            _ => Err(format!("unknown condition `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    BoundedPass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub verdict: Verdict,
    pub witnesses: Vec<String>,
    pub bound: Option<Bounds>,
}

impl ConditionReport {
    fn new(condition: Condition, witnesses: Vec<String>, ok: Verdict) -> Self {
        let verdict = if witnesses.is_empty() {
            ok
        } else {
            Verdict::Fail
        };
        ConditionReport {
            condition,
            verdict,
            witnesses,
            bound: None,
        }
    }

    pub fn with_bound(mut self, b: Bounds) -> Self {
        self.bound = Some(b);
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }
}

fn show_trace<T: fmt::Display>(t: &[T]) -> String {
    let items: Vec<String> = t.iter().map(|e| e.to_string()).collect();
    format!("({})", items.join(", "))
}

pub fn check_cs1(t: &PlanningTask) -> ConditionReport {
    let w = t
        .actions
        .iter()
        .filter(|a| a.post.len() != 1)
        .map(|a| a.id.clone())
        .collect();
    ConditionReport::new(Condition::CS1, w, Verdict::Pass)
}

/// Splits every action into one action per postcondition.
pub fn normalize_cs1(t: &PlanningTask) -> PlanningTask {
    let mut actions = Vec::new();
    for a in &t.actions {
        if a.post.len() <= 1 {
            actions.push(a.clone());
            continue;
        }
        for (k, p) in a.post.iter().enumerate() {
            actions.push(Action {
                id: format!("{}#{}", a.id, k + 1),
                pre: a.pre.clone(),
                post: BTreeSet::from([p.clone()]),
                reward: a.reward,
            });
        }
    }
    PlanningTask {
        actions,
        ..t.clone()
    }
}

fn require_cs1(t: &PlanningTask) -> Result<(), PlanError> {
    t.actions
        .iter()
        .try_for_each(|a| a.single_post().map(|_| ()))
}

pub fn check_cs2(t: &PlanningTask, s: &SigmaCap) -> Result<ConditionReport, ConditionError> {
    require_cs1(t)?;
    let produced: HashSet<&Predicate> = t.actions.iter().flat_map(|a| a.post.iter()).collect();
    let w = t
        .predicates
        .iter()
        .filter(|p| s.contains(p) && !produced.contains(p))
        .map(|p| p.to_string())
        .collect();
    Ok(ConditionReport::new(Condition::CS2, w, Verdict::Pass))
}

pub fn check_cs3(traces: &BTreeSet<Vec<Term>>) -> ConditionReport {
    let mut w = Vec::new();
    for t in traces {
        for k in 0..t.len() {
            if !traces.contains(&t[..k]) {
                w.push(format!(
                    "{} lacks prefix {}",
                    show_trace(t),
                    show_trace(&t[..k])
                ));
                break;
            }
        }
        if w.len() >= MAX_WITNESSES {
            break;
        }
    }
    let ok = if traces.is_empty() || traces.iter().all(Vec::is_empty) {
        Verdict::Pass
    } else {
        Verdict::BoundedPass
    };
    ConditionReport::new(Condition::CS3, w, ok)
}

/// CS3 on an enumerated trie, which is prefix-closed by construction;
/// the check re-reads every trace and its prefixes through the public API.
pub fn check_cs3_set(traces: &TraceSet) -> ConditionReport {
    let mut w = Vec::new();
    traces.for_each(|t| {
        if w.len() < MAX_WITNESSES {
            if let Some(k) = (0..t.len()).find(|&k| !traces.contains(&t[..k])) {
                w.push(format!(
                    "{} lacks prefix {}",
                    show_trace(t),
                    show_trace(&t[..k])
                ));
            }
        }
    });
    ConditionReport::new(Condition::CS3, w, Verdict::BoundedPass)
}

pub fn check_cs4(t: &PlanningTask, s: &SigmaCap) -> ConditionReport {
    let mut w = Vec::new();
    for a in &t.actions {
        if a.post.iter().any(|p| s.contains(p)) {
            for q in a.pre.iter().filter(|q| !s.contains(q)) {
                w.push(format!("{}: {}", a.id, q));
            }
        }
    }
    ConditionReport::new(Condition::CS4, w, Verdict::Pass)
}

/// Actions indexed by their single postcondition.
fn producers(t: &PlanningTask) -> HashMap<&Predicate, Vec<&Action>> {
    let mut out: HashMap<&Predicate, Vec<&Action>> = HashMap::new();
    for a in &t.actions {
        for p in &a.post {
            out.entry(p).or_default().push(a);
        }
    }
    out
}

/// Depth-first walk over a trace trie carrying a state that only changes
/// at mapped events; `(node, state)` pairs are visited once.
type Visitor<'v, S> = dyn FnMut(&[Term], &S, &Term, Option<&Predicate>) -> Option<S> + 'v;

fn walk_trie<S, F>(traces: &TraceSet, map: &EventMap, init: S, mut visit: F)
where
    S: Clone + Eq + std::hash::Hash,
    F: FnMut(&[Term], &S, &Term, Option<&Predicate>) -> Option<S>,
{
    let mut seen: HashSet<(usize, S)> = HashSet::new();
    let mut path = Vec::new();
    fn go<S: Clone + Eq + std::hash::Hash>(
        node: &TraceSet,
        state: &S,
        map: &EventMap,
        path: &mut Vec<Term>,
        seen: &mut HashSet<(usize, S)>,
        visit: &mut Visitor<'_, S>,
    ) {
        if !seen.insert((node.node_id(), state.clone())) {
            return;
        }
        for (e, child) in node.branches() {
            let p = map.predicate(e);
            let Some(next) = visit(path, state, e, p.as_ref()) else {
                continue;
            };
            path.push(e.clone());
            go(&child, &next, map, path, seen, visit);
            path.pop();
        }
    }
    go(traces, &init, map, &mut path, &mut seen, &mut visit);
}

type PredSet = BTreeSet<Predicate>;

pub fn check_cs5(
    t: &PlanningTask,
    traces: &TraceSet,
    s: &SigmaCap,
    map: &EventMap,
) -> Result<ConditionReport, ConditionError> {
    require_cs1(t)?;
    let prod = producers(t);
    let mut w = Vec::new();
    walk_trie(traces, map, PredSet::new(), |path, seen, e, p| {
        let Some(c) = p.filter(|c| s.contains(c)) else {
            return Some(seen.clone());
        };
        let matched = prod
            .get(c)
            .is_some_and(|acts| acts.iter().any(|a| a.pre.is_subset(seen)));
        if !matched {
            if w.len() < MAX_WITNESSES {
                let mut tr = path.to_vec();
                tr.push(e.clone());
                w.push(format!("{} unmatched {}", show_trace(&tr), c));
            }
            return None;
        }
        let mut next = seen.clone();
        next.insert(c.clone());
        Some(next)
    });
    Ok(ConditionReport::new(
        Condition::CS5,
        w,
        Verdict::BoundedPass,
    ))
}

/// Σ∩ predicates emitted next from a node, possibly after unmapped events.
fn next_sigma(
    node: &TraceSet,
    s: &SigmaCap,
    map: &EventMap,
    memo: &mut HashMap<usize, PredSet>,
) -> PredSet {
    if let Some(r) = memo.get(&node.node_id()) {
        return r.clone();
    }
    let mut out = PredSet::new();
    for (e, child) in node.branches() {
        match map.predicate(e).filter(|p| s.contains(p)) {
            Some(p) => {
                out.insert(p);
            }
            None => out.extend(next_sigma(&child, s, map, memo)),
        }
    }
    memo.insert(node.node_id(), out.clone());
    out
}

/// Bounded CC1: traces shorter than `depth` must be extendable by the
/// postcondition of every action enabled by their events. Postconditions
/// already present in the trace are not required again. Initial predicates
/// that some action reproduces count only once the trace emits them.
pub fn check_cc1(
    t: &PlanningTask,
    traces: &TraceSet,
    depth: usize,
    s: &SigmaCap,
    map: &EventMap,
) -> ConditionReport {
    let mut w = Vec::new();
    let mut memo = HashMap::new();
    fn go(
        node: &TraceSet,
        path: &mut Vec<Term>,
        seen: &PredSet,
        ctx: &mut (
            &PlanningTask,
            &SigmaCap,
            &EventMap,
            usize,
            &mut HashMap<usize, PredSet>,
            &mut Vec<String>,
        ),
    ) {
        let (t, s, map, depth, _, _) = *ctx;
        if ctx.5.len() >= MAX_WITNESSES {
            return;
        }
        if path.len() < depth {
            let next = next_sigma(node, s, map, ctx.4);
            for a in &t.actions {
                for c in a
                    .post
                    .iter()
                    .filter(|c| s.contains(c) && !seen.contains(*c))
                {
                    if a.pre.is_subset(seen) && !next.contains(c) {
                        ctx.5.push(format!(
                            "{} cannot be extended by {} ({})",
                            show_trace(path),
                            c,
                            a.id
                        ));
                    }
                }
            }
        }
        for (e, child) in node.branches() {
            let mut seen2 = seen.clone();
            if let Some(p) = map.predicate(e).filter(|p| s.contains(p)) {
                seen2.insert(p);
            }
            path.push(e.clone());
            go(&child, path, &seen2, ctx);
            path.pop();
        }
    }
    let mut ctx = (t, s, map, depth, &mut memo, &mut w);
    let produced: PredSet = t
        .actions
        .iter()
        .flat_map(|a| a.post.iter().cloned())
        .collect();
    let start = t
        .initial
        .iter()
        .filter(|p| s.contains(p) && !produced.contains(*p))
        .cloned()
        .collect();
    go(traces, &mut Vec::new(), &start, &mut ctx);
    ConditionReport::new(Condition::CC1, w, Verdict::BoundedPass)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictKind {
    Sound,
    Unsound,
    Complete,
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoundnessVerdict {
    pub kind: VerdictKind,
    pub bound: Option<Bounds>,
    pub counterexample: Option<Vec<String>>,
}

impl SoundnessVerdict {
    pub fn with_bound(mut self, b: Bounds) -> Self {
        self.bound = Some(b);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serialization is infallible")
    }
}

/// Closes `state` under actions whose postcondition is outside Σ∩. Those
/// steps are invisible after projection and, the task being monotone,
/// only ever enable more.
fn close_hidden(t: &PlanningTask, s: &SigmaCap, state: &mut PredSet) {
    loop {
        let mut grew = false;
        for a in &t.actions {
            if a.pre.is_subset(state) {
                for p in &a.post {
                    if !s.contains(p) && state.insert(p.clone()) {
                        grew = true;
                    }
                }
            }
        }
        if !grew {
            return;
        }
    }
}

/// Symbolic soundness at the enumeration bound: every protocol trace has a
/// planning trace with the same Σ∩ projection. The planning trace is built
/// step by step: each projected event must be the postcondition of an
/// action applicable in the current state, with hidden actions applied
/// eagerly in between.
pub fn check_soundness(
    t: &PlanningTask,
    traces: &TraceSet,
    s: &SigmaCap,
    map: &EventMap,
    plan_bound: Option<usize>,
) -> Result<SoundnessVerdict, ConditionError> {
    require_cs1(t)?;
    if let Some(bound) = plan_bound {
        let needed = longest_projection(traces, s, map);
        if bound < needed {
            return Err(ConditionError::BoundTooSmall { bound, needed });
        }
    }
    let prod = producers(t);
    let mut start = t.initial.clone();
    close_hidden(t, s, &mut start);
    let mut cex: Option<Vec<String>> = None;
    walk_trie(traces, map, start, |path, state, e, p| {
        if cex.is_some() {
            return None;
        }
        let Some(c) = p.filter(|c| s.contains(c)) else {
            return Some(state.clone());
        };
        let ok = prod
            .get(c)
            .is_some_and(|acts| acts.iter().any(|a| a.pre.is_subset(state)));
        if !ok {
            let mut tr: Vec<String> = path.iter().map(|x| x.to_string()).collect();
            tr.push(e.to_string());
            cex = Some(tr);
            return None;
        }
        let mut next = state.clone();
        if next.insert(c.clone()) {
            close_hidden(t, s, &mut next);
        }
        Some(next)
    });
    let kind = if cex.is_some() {
        VerdictKind::Unsound
    } else {
        VerdictKind::Sound
    };
    Ok(SoundnessVerdict {
        kind,
        bound: None,
        counterexample: cex,
    })
}

fn longest_projection(traces: &TraceSet, s: &SigmaCap, map: &EventMap) -> usize {
    let mut best = 0;
    traces.for_each(|tr| {
        let n = tr
            .iter()
            .filter(|e| map.predicate(e).is_some_and(|p| s.contains(&p)))
            .count();
        best = best.max(n);
    });
    best
}

/// All Σ∩ projections of the protocol traces.
pub fn protocol_projections(
    traces: &TraceSet,
    s: &SigmaCap,
    map: &EventMap,
) -> BTreeSet<Vec<Predicate>> {
    let mut out = BTreeSet::new();
    traces.for_each(|tr| {
        out.insert(project(&map.lift(tr), s));
    });
    out
}

/// Symbolic completeness at bound: every planning trace of length at most
/// `max_len` has a protocol trace with the same Σ∩ projection.
pub fn check_completeness(
    t: &PlanningTask,
    traces: &TraceSet,
    s: &SigmaCap,
    map: &EventMap,
    max_len: usize,
) -> Result<SoundnessVerdict, ConditionError> {
    let pts = planning_traces(t, max_len)?;
    let have = protocol_projections(traces, s, map);
    let missing: Option<&PlanningTrace> = pts
        .iter()
        .find(|pt| !have.contains(&project(&lift_planning(pt), s)));
    Ok(SoundnessVerdict {
        kind: if missing.is_some() {
            VerdictKind::Incomplete
        } else {
            VerdictKind::Complete
        },
        bound: None,
        counterexample: missing.map(|pt| pt.iter().map(|p| p.to_string()).collect()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::ExecMode;
    use crate::picalc::{enumerate_traces, parse_process, Theory};

    fn p(s: &str) -> Predicate {
        s.parse().unwrap()
    }

    fn traces_of(src: &str, depth: usize) -> TraceSet {
        enumerate_traces(
            &parse_process(src).unwrap(),
            &Theory::shipped(),
            Bounds::new(depth, 2, 2),
            ExecMode::Sequential,
        )
    }

    #[test]
    fn projection_basics() {
        let t = vec![
            TraceElem::Pred(p("C(a)")),
            TraceElem::Other("aux(b)".into()),
            TraceElem::Pred(p("C(c)")),
        ];
        let s = SigmaCap::of_symbols(&[Symbol::C]);
        assert_eq!(project(&t, &s), vec![p("C(a)"), p("C(c)")]);
        assert!(project(&[], &s).is_empty());
        let a = lift_planning(&[p("C(a)"), p("C(b)")]);
        let b = lift_planning(&[p("C(b)"), p("C(a)")]);
        assert!(!equiv(&a, &b, &s));
    }

    #[test]
    fn sigma_parse() {
        let s = SigmaCap::parse("C(US), I_R(_,x) unconf").unwrap();
        assert_eq!(s.members.len(), 3);
        assert!(s.contains(&p("C(US)")));
        assert!(!s.contains(&p("C(DE)")));
        assert!(s.contains(&p("I_R(y,x)")));
        assert!(s.contains(&p("unconf(a,b)")));
        assert!(SigmaCap::parse("Bogus").is_err());
    }

    #[test]
    fn cs1_split() {
        let mut a = Action::new("a", [], p("C(a)"));
        a.post.insert(p("C(b)"));
        let t = PlanningTask::from_parts(BTreeSet::new(), vec![a]);
        let r = check_cs1(&t);
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.witnesses, vec!["a".to_string()]);
        let n = normalize_cs1(&t);
        assert_eq!(n.actions.len(), 2);
        assert_eq!(check_cs1(&n).verdict, Verdict::Pass);
        assert_eq!(check_cs1(&PlanningTask::default()).verdict, Verdict::Pass);
    }

    #[test]
    fn cs2_and_cs4() {
        let t = PlanningTask::from_parts(
            BTreeSet::new(),
            vec![Action::new("a", [p("nVPN(x,y)")], p("C(a)"))],
        );
        let r = check_cs2(&t, &SigmaCap::default()).unwrap();
        assert_eq!(r.witnesses, vec!["nVPN(x,y)".to_string()]);
        assert!(check_cs2(&t, &SigmaCap::empty()).unwrap().passed());
        assert!(check_cs4(&t, &SigmaCap::default()).passed());
        let r = check_cs4(&t, &SigmaCap::default().without(Symbol::NVpn));
        assert_eq!(r.witnesses, vec!["a: nVPN(x,y)".to_string()]);
    }

    #[test]
    fn cs3_sets() {
        let a = Term::app("A", vec![]);
        let b = Term::app("B", vec![]);
        let bad = BTreeSet::from([vec![], vec![a.clone(), b]]);
        assert_eq!(check_cs3(&bad).verdict, Verdict::Fail);
        assert_eq!(check_cs3(&BTreeSet::from([vec![]])).verdict, Verdict::Pass);
        assert_eq!(
            check_cs3_set(&traces_of("event C(a); event C(b)", 3)).verdict,
            Verdict::BoundedPass
        );
    }

    #[test]
    fn cs5_and_soundness_agree_on_toy() {
        let t = PlanningTask::from_parts(
            BTreeSet::new(),
            vec![
                Action::new("x", [], p("C(a)")),
                Action::new("y", [p("C(a)")], p("C(b)")),
            ],
        );
        let s = SigmaCap::default();
        let m = EventMap::shipped();
        let good = traces_of("event C(a); event C(b)", 3);
        assert_eq!(
            check_cs5(&t, &good, &s, &m).unwrap().verdict,
            Verdict::BoundedPass
        );
        assert_eq!(
            check_soundness(&t, &good, &s, &m, None).unwrap().kind,
            VerdictKind::Sound
        );
        let bad = traces_of("event C(b)", 3);
        assert_eq!(check_cs5(&t, &bad, &s, &m).unwrap().verdict, Verdict::Fail);
        let v = check_soundness(&t, &bad, &s, &m, None).unwrap();
        assert_eq!(v.kind, VerdictKind::Unsound);
        assert_eq!(v.counterexample, Some(vec!["C(b)".to_string()]));
        assert!(matches!(
            check_soundness(&t, &good, &s, &m, Some(1)),
            Err(ConditionError::BoundTooSmall {
                bound: 1,
                needed: 2
            })
        ));
        let none = traces_of("event Other(a)", 3);
        assert_eq!(
            check_cs5(&t, &none, &s, &m).unwrap().verdict,
            Verdict::BoundedPass
        );
    }

    #[test]
    fn hidden_predicates_bridge_soundness() {
        let t = PlanningTask::from_parts(
            BTreeSet::new(),
            vec![
                Action::new("h", [], p("I_R(i,j)")),
                Action::new("y", [p("I_R(i,j)")], p("C(b)")),
            ],
        );
        let s = SigmaCap::of_symbols(&[Symbol::C]);
        let tr = traces_of("event C(b)", 2);
        let v = check_soundness(&t, &tr, &s, &EventMap::shipped(), None).unwrap();
        assert_eq!(v.kind, VerdictKind::Sound);
    }

    #[test]
    fn cc1_toy() {
        let t = PlanningTask::from_parts(BTreeSet::new(), vec![Action::new("x", [], p("C(a)"))]);
        let s = SigmaCap::default();
        let m = EventMap::shipped();
        assert_eq!(
            check_cc1(&t, &traces_of("!event C(a)", 3), 3, &s, &m).verdict,
            Verdict::BoundedPass
        );
        assert_eq!(
            check_cc1(&t, &traces_of("event Other(a)", 3), 3, &s, &m).verdict,
            Verdict::Fail
        );
        let c = check_completeness(&t, &traces_of("!event C(a)", 3), &s, &m, 1).unwrap();
        assert_eq!(c.kind, VerdictKind::Complete);
        let c = check_completeness(&t, &traces_of("event Other(a)", 3), &s, &m, 1).unwrap();
        assert_eq!(c.kind, VerdictKind::Incomplete);
    }
}
