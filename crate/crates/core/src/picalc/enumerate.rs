use std::collections::{BTreeMap, BTreeSet};

use rustc_hash::{FxHashMap, FxHashSet as HashSet, FxHasher};
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex};

use super::process::Process;
use super::semantics::{Bounds, Configuration, Semantics};
use super::term::{Name, Term};
use super::theory::Theory;
use crate::exec::{self, ExecMode};

pub type ProtocolTrace = Vec<Term>;

type Shard = FxHashMap<(Configuration, usize), Arc<TraceTrie>>;

/// Prefix tree of event sequences. Every node is a trace, so the set it
/// denotes is prefix-closed by construction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceTrie {
    children: BTreeMap<Term, Arc<TraceTrie>>,
}

impl TraceTrie {
    fn merge(a: &Arc<TraceTrie>, b: &Arc<TraceTrie>) -> Arc<TraceTrie> {
        if Arc::ptr_eq(a, b) || b.children.is_empty() {
            return a.clone();
        }
        if a.children.is_empty() {
            return b.clone();
        }
        let mut children = a.children.clone();
        for (e, sub) in &b.children {
            let merged = match children.get(e) {
                Some(mine) => TraceTrie::merge(mine, sub),
                None => sub.clone(),
            };
            children.insert(e.clone(), merged);
        }
        Arc::new(TraceTrie { children })
    }
}

/// Partial bijection between generated names of two traces.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Renaming {
    fwd: BTreeMap<Name, Name>,
    back: BTreeMap<Name, Name>,
}

impl Renaming {
    fn unify(&mut self, a: &Term, b: &Term) -> bool {
        match (a, b) {
            (Term::Fresh(x), Term::Fresh(y)) => match (self.fwd.get(x), self.back.get(y)) {
                (Some(y2), _) => y2 == y,
                (None, Some(_)) => false,
                (None, None) => {
                    self.fwd.insert(x.clone(), y.clone());
                    self.back.insert(y.clone(), x.clone());
                    true
                }
            },
            (Term::App(f, xs), Term::App(g, ys)) => {
                f == g
                    && xs.len() == ys.len()
                    && xs.iter().zip(ys.iter()).all(|(x, y)| self.unify(x, y))
            }
            _ => a == b,
        }
    }

    fn is_identity(&self) -> bool {
        self.fwd.iter().all(|(x, y)| x == y)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceSet {
    root: Arc<TraceTrie>,
}

impl TraceSet {
    pub fn empty_trace_only() -> Self {
        Self::default()
    }

    pub fn from_traces<'a>(traces: impl IntoIterator<Item = &'a ProtocolTrace>) -> Self {
        let mut root = TraceTrie::default();
        for t in traces {
            let mut node = &mut root;
            for e in t {
                node = Arc::make_mut(node.children.entry(e.clone()).or_default());
            }
        }
        TraceSet {
            root: Arc::new(root),
        }
    }

    pub fn contains(&self, t: &[Term]) -> bool {
        let mut node = &self.root;
        for e in t {
            match node.children.get(e) {
                Some(n) => node = n,
                None => return false,
            }
        }
        true
    }

    /// Number of distinct traces, the empty one included.
    pub fn len(&self) -> usize {
        fn count(n: &TraceTrie) -> usize {
            1 + n.children.values().map(|c| count(c)).sum::<usize>()
        }
        count(&self.root)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn max_len(&self) -> usize {
        fn depth(n: &TraceTrie) -> usize {
            n.children.values().map(|c| 1 + depth(c)).max().unwrap_or(0)
        }
        depth(&self.root)
    }

    /// Visits every trace in lexicographic order.
    pub fn for_each(&self, mut f: impl FnMut(&[Term])) {
        fn walk(n: &TraceTrie, prefix: &mut Vec<Term>, f: &mut impl FnMut(&[Term])) {
            f(prefix);
            for (e, c) in &n.children {
                prefix.push(e.clone());
                walk(c, prefix, f);
                prefix.pop();
            }
        }
        walk(&self.root, &mut Vec::new(), &mut f);
    }

    pub fn to_set(&self) -> BTreeSet<ProtocolTrace> {
        let mut out = BTreeSet::new();
        self.for_each(|t| {
            out.insert(t.to_vec());
        });
        out
    }

    /// Traces with no extension in the set.
    pub fn maximal(&self) -> Vec<ProtocolTrace> {
        let mut out = Vec::new();
        fn walk(n: &TraceTrie, prefix: &mut Vec<Term>, out: &mut Vec<ProtocolTrace>) {
            if n.children.is_empty() {
                out.push(prefix.clone());
            }
            for (e, c) in &n.children {
                prefix.push(e.clone());
                walk(c, prefix, out);
                prefix.pop();
            }
        }
        walk(&self.root, &mut Vec::new(), &mut out);
        out
    }

    /// First trace of `self`, in lexicographic order, with no counterpart in
    /// `other` up to a bijective renaming of generated names.
    pub fn first_missing_from(&self, other: &TraceSet) -> Option<ProtocolTrace> {
        type Cands<'t> = Vec<(&'t Arc<TraceTrie>, Renaming)>;
        fn walk(a: &TraceTrie, cands: &Cands<'_>, prefix: &mut Vec<Term>) -> Option<ProtocolTrace> {
            for (e, ca) in &a.children {
                prefix.push(e.clone());
                let mut next: Cands<'_> = Vec::new();
                for (b, ren) in cands {
                    for (e2, cb) in &b.children {
                        let mut r = ren.clone();
                        if r.unify(e, e2)
                            && !next.iter().any(|(n, m)| Arc::ptr_eq(n, cb) && *m == r)
                        {
                            next.push((cb, r));
                        }
                    }
                }
                if next.is_empty() {
                    return Some(prefix.clone());
                }
                let covered = next
                    .iter()
                    .any(|(cb, r)| Arc::ptr_eq(ca, cb) && r.is_identity());
                if !covered {
                    if let Some(t) = walk(ca, &next, prefix) {
                        return Some(t);
                    }
                }
                prefix.pop();
            }
            None
        }
        walk(
            &self.root,
            &vec![(&other.root, Renaming::default())],
            &mut Vec::new(),
        )
    }

    /// One-event extensions, each with the set of its continuations.
    pub fn branches(&self) -> impl Iterator<Item = (&Term, TraceSet)> {
        self.root
            .children
            .iter()
            .map(|(e, c)| (e, TraceSet { root: c.clone() }))
    }

    /// Identity of the shared subtree, for memoized walks.
    pub fn node_id(&self) -> usize {
        Arc::as_ptr(&self.root) as usize
    }

    pub fn union(&self, other: &TraceSet) -> TraceSet {
        TraceSet {
            root: TraceTrie::merge(&self.root, &other.root),
        }
    }
}

const SHARDS: usize = 64;

struct Memo {
    shards: Vec<Mutex<Shard>>,
}

impl Memo {
    fn new() -> Self {
        Memo {
            shards: (0..SHARDS)
                .map(|_| Mutex::new(FxHashMap::default()))
                .collect(),
        }
    }

    fn shard(&self, key: &(Configuration, usize)) -> usize {
        let mut h = FxHasher::default();
        key.hash(&mut h);
        (h.finish() as usize) % SHARDS
    }

    fn get(&self, key: &(Configuration, usize)) -> Option<Arc<TraceTrie>> {
        self.shards[self.shard(key)]
            .lock()
            .expect("memo lock")
            .get(key)
            .cloned()
    }

    fn put(&self, key: (Configuration, usize), v: Arc<TraceTrie>) {
        let s = self.shard(&key);
        self.shards[s].lock().expect("memo lock").insert(key, v);
    }

    fn len(&self) -> usize {
        self.shards
            .iter()
            .map(|s| s.lock().expect("memo lock").len())
            .sum()
    }
}

/// Bounded trace enumerator.
pub struct Enumerator<'a> {
    pub sem: Semantics<'a>,
    pub mode: ExecMode,
    memo: Memo,
}

impl<'a> Enumerator<'a> {
    pub fn new(sem: Semantics<'a>, mode: ExecMode) -> Self {
        Enumerator {
            sem,
            mode,
            memo: Memo::new(),
        }
    }

    pub fn traces(&self, p: &Process) -> TraceSet {
        let c = self.sem.initial(p);
        self.traces_from(&c, self.sem.bounds.depth)
    }

    pub fn traces_from(&self, c: &Configuration, depth: usize) -> TraceSet {
        TraceSet {
            root: self.explore(c, depth),
        }
    }

    /// Whether `p` can perform exactly the visible events of `trace`, with
    /// any silent steps in between. Searches only along the trace.
    pub fn realizes(&self, p: &Process, trace: &[Term]) -> bool {
        fn go(
            sem: &Semantics<'_>,
            c: &Configuration,
            trace: &[Term],
            seen: &mut HashSet<(Configuration, usize)>,
        ) -> bool {
            if trace.is_empty() {
                return true;
            }
            if !seen.insert((c.clone(), trace.len())) {
                return false;
            }
            sem.step(c).iter().any(|(label, next)| match label {
                None => go(sem, next, trace, seen),
                Some(e) => e == &trace[0] && go(sem, next, &trace[1..], seen),
            })
        }
        go(
            &self.sem,
            &self.sem.initial(p),
            trace,
            &mut HashSet::default(),
        )
    }

    /// Configurations visited so far.
    pub fn states(&self) -> usize {
        self.memo.len()
    }

    fn explore(&self, c: &Configuration, depth: usize) -> Arc<TraceTrie> {
        if depth == 0 {
            return Arc::new(TraceTrie::default());
        }
        let key = (c.clone(), depth);
        if let Some(t) = self.memo.get(&key) {
            return t;
        }
        let succs = self.sem.step(c);
        let parts = exec::map(self.mode, &succs, |(label, next)| {
            let sub = self.explore(next, if label.is_some() { depth - 1 } else { depth });
            match label {
                Some(e) => {
                    let mut children = BTreeMap::new();
                    children.insert(e.clone(), sub);
                    Arc::new(TraceTrie { children })
                }
                None => sub,
            }
        });
        let result = parts.iter().fold(Arc::new(TraceTrie::default()), |acc, t| {
            TraceTrie::merge(&acc, t)
        });
        self.memo.put(key, result.clone());
        result
    }
}

/// `traces(P)` up to the bounds, with the default candidate names.
pub fn enumerate_traces(p: &Process, th: &Theory, bounds: Bounds, mode: ExecMode) -> TraceSet {
    Enumerator::new(Semantics::new(th, bounds), mode).traces(p)
}
