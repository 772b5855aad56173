use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use super::term::{name, Name, Subst, Term};
use super::theory::Theory;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Process {
    Nil,
    Par(Arc<Process>, Arc<Process>),
    Repl(Arc<Process>),
    In(Term, Name, Arc<Process>),
    Out(Term, Term, Arc<Process>),
    New(Name, Arc<Process>),
    If(Term, Term, Arc<Process>, Arc<Process>),
    /// `let x = g(args) in P else Q`
    Let(Name, Name, Vec<Term>, Arc<Process>, Arc<Process>),
    Event(Term, Arc<Process>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WellFormedError {
    #[error("unknown function symbol `{0}`")]
    UnknownSymbol(String),
    #[error("`{symbol}` expects {expected} arguments, got {got}")]
    Arity {
        symbol: String,
        expected: usize,
        got: usize,
    },
    #[error("`{0}` is a destructor and cannot appear inside a term")]
    DestructorInTerm(String),
    #[error("event argument is not a function application: {0}")]
    BadEvent(String),
}

pub fn nil() -> Arc<Process> {
    Arc::new(Process::Nil)
}

impl Process {
    pub fn par(a: Process, b: Process) -> Process {
        Process::Par(Arc::new(a), Arc::new(b))
    }

    /// Right-nested parallel composition; `0` for an empty list.
    pub fn par_all(ps: impl IntoIterator<Item = Process>) -> Process {
        let mut items: Vec<Process> = ps.into_iter().collect();
        let Some(mut acc) = items.pop() else {
            return Process::Nil;
        };
        while let Some(p) = items.pop() {
            acc = Process::par(p, acc);
        }
        acc
    }

    pub fn repl(p: Process) -> Process {
        Process::Repl(Arc::new(p))
    }

    pub fn input(ch: Term, x: &str, p: Process) -> Process {
        Process::In(ch, name(x), Arc::new(p))
    }

    pub fn output(ch: Term, m: Term, p: Process) -> Process {
        Process::Out(ch, m, Arc::new(p))
    }

    pub fn new_name(n: &str, p: Process) -> Process {
        Process::New(name(n), Arc::new(p))
    }

    pub fn if_eq(m: Term, n: Term, p: Process, q: Process) -> Process {
        Process::If(m, n, Arc::new(p), Arc::new(q))
    }

    pub fn let_des(x: &str, g: &str, args: Vec<Term>, p: Process, q: Process) -> Process {
        Process::Let(name(x), name(g), args, Arc::new(p), Arc::new(q))
    }

    pub fn event(fact: Term, p: Process) -> Process {
        Process::Event(fact, Arc::new(p))
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, Process::Nil)
    }

    /// Flattens nested `Par` nodes into their components.
    pub fn par_components(&self) -> Vec<&Process> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(p) = stack.pop() {
            match p {
                Process::Par(a, b) => {
                    stack.push(b);
                    stack.push(a);
                }
                other => out.push(other),
            }
        }
        out
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_free_vars(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free_vars(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        let mut term = |t: &Term, bound: &Vec<Name>| {
            for v in t.vars() {
                if !bound.contains(&v) {
                    out.insert(v);
                }
            }
        };
        match self {
            Process::Nil => {}
            Process::Par(a, b) => {
                a.collect_free_vars(bound, out);
                b.collect_free_vars(bound, out);
            }
            Process::Repl(p) | Process::New(_, p) => p.collect_free_vars(bound, out),
            Process::In(ch, x, p) => {
                term(ch, bound);
                bound.push(x.clone());
                p.collect_free_vars(bound, out);
                bound.pop();
            }
            Process::Out(ch, m, p) => {
                term(ch, bound);
                term(m, bound);
                p.collect_free_vars(bound, out);
            }
            Process::If(m, n, p, q) => {
                term(m, bound);
                term(n, bound);
                p.collect_free_vars(bound, out);
                q.collect_free_vars(bound, out);
            }
            Process::Let(x, _, args, p, q) => {
                for a in args {
                    term(a, bound);
                }
                q.collect_free_vars(bound, out);
                bound.push(x.clone());
                p.collect_free_vars(bound, out);
                bound.pop();
            }
            Process::Event(f, p) => {
                term(f, bound);
                p.collect_free_vars(bound, out);
            }
        }
    }

    /// Public names occurring anywhere in the process.
    pub fn public_names(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.visit_terms(&mut |t| t.collect_pub(&mut out));
        out
    }

    /// Restricted names occurring free (not under their own `new`).
    pub fn free_fresh(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_free_fresh(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free_fresh(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        if let Process::New(n, p) = self {
            bound.push(n.clone());
            p.collect_free_fresh(bound, out);
            bound.pop();
            return;
        }
        for t in self.own_terms() {
            let mut fs = BTreeSet::new();
            t.collect_fresh(&mut fs);
            out.extend(fs.into_iter().filter(|n| !bound.contains(n)));
        }
        for c in self.children() {
            c.collect_free_fresh(bound, out);
        }
    }

    /// Terms held directly by this node (not by its continuations).
    pub fn own_terms(&self) -> Vec<&Term> {
        match self {
            Process::Nil | Process::Par(..) | Process::Repl(_) | Process::New(..) => vec![],
            Process::In(ch, _, _) => vec![ch],
            Process::Out(ch, m, _) => vec![ch, m],
            Process::If(m, n, _, _) => vec![m, n],
            Process::Let(_, _, args, _, _) => args.iter().collect(),
            Process::Event(f, _) => vec![f],
        }
    }

    pub fn children(&self) -> Vec<&Arc<Process>> {
        match self {
            Process::Nil => vec![],
            Process::Par(a, b) | Process::If(_, _, a, b) | Process::Let(_, _, _, a, b) => {
                vec![a, b]
            }
            Process::Repl(p)
            | Process::In(_, _, p)
            | Process::Out(_, _, p)
            | Process::New(_, p)
            | Process::Event(_, p) => vec![p],
        }
    }

    pub fn visit_terms(&self, f: &mut impl FnMut(&Term)) {
        for t in self.own_terms() {
            f(t);
        }
        for c in self.children() {
            c.visit_terms(f);
        }
    }

    pub fn events(&self) -> Vec<&Term> {
        let mut out = Vec::new();
        self.collect_events(&mut out);
        out
    }

    fn collect_events<'a>(&'a self, out: &mut Vec<&'a Term>) {
        if let Process::Event(f, _) = self {
            out.push(f);
        }
        for c in self.children() {
            c.collect_events(out);
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    /// Capture-avoiding substitution of variables and restricted names.
    /// Callers substitute ground terms, so only shadowing needs care.
    pub fn subst(&self, vars: &Subst, names: &Subst) -> Process {
        if vars.is_empty() && names.is_empty() {
            return self.clone();
        }
        let t = |x: &Term| x.subst(vars, names);
        let rec = |p: &Arc<Process>| Arc::new(p.subst(vars, names));
        match self {
            Process::Nil => Process::Nil,
            Process::Par(a, b) => Process::Par(rec(a), rec(b)),
            Process::Repl(p) => Process::Repl(rec(p)),
            Process::In(ch, x, p) => {
                let inner = without(vars, x);
                Process::In(t(ch), x.clone(), Arc::new(p.subst(&inner, names)))
            }
            Process::Out(ch, m, p) => Process::Out(t(ch), t(m), rec(p)),
            Process::New(n, p) => {
                let inner = without(names, n);
                Process::New(n.clone(), Arc::new(p.subst(vars, &inner)))
            }
            Process::If(m, n, p, q) => Process::If(t(m), t(n), rec(p), rec(q)),
            Process::Let(x, g, args, p, q) => {
                let inner = without(vars, x);
                Process::Let(
                    x.clone(),
                    g.clone(),
                    args.iter().map(t).collect(),
                    Arc::new(p.subst(&inner, names)),
                    rec(q),
                )
            }
            Process::Event(f, p) => Process::Event(t(f), rec(p)),
        }
    }

    pub fn subst_var(&self, x: &Name, v: &Term) -> Process {
        let mut s = Subst::new();
        s.insert(x.clone(), v.clone());
        self.subst(&s, &Subst::new())
    }

    /// Checks symbol arities against the theory and that terms only use
    /// constructors.
    pub fn check(&self, th: &Theory) -> Result<(), WellFormedError> {
        fn term(t: &Term, th: &Theory) -> Result<(), WellFormedError> {
            if let Term::App(f, args) = t {
                match th.get_constructor(f) {
                    Some(c) if c.arity == args.len() => {}
                    Some(c) => {
                        return Err(WellFormedError::Arity {
                            symbol: f.to_string(),
                            expected: c.arity,
                            got: args.len(),
                        })
                    }
                    None if th.get_destructor(f).is_some() => {
                        return Err(WellFormedError::DestructorInTerm(f.to_string()))
                    }
                    None => return Err(WellFormedError::UnknownSymbol(f.to_string())),
                }
                for a in args.iter() {
                    term(a, th)?;
                }
            }
            Ok(())
        }
        match self {
            Process::Event(f, _) => {
                if !matches!(f, Term::App(..)) {
                    return Err(WellFormedError::BadEvent(f.to_string()));
                }
                for a in f.args() {
                    term(a, th)?;
                }
            }
            Process::Let(_, g, args, _, _) => {
                let d = th
                    .get_destructor(g)
                    .ok_or_else(|| WellFormedError::UnknownSymbol(g.to_string()))?;
                if d.arity != args.len() {
                    return Err(WellFormedError::Arity {
                        symbol: g.to_string(),
                        expected: d.arity,
                        got: args.len(),
                    });
                }
                for a in args {
                    term(a, th)?;
                }
            }
            other => {
                for t in other.own_terms() {
                    term(t, th)?;
                }
            }
        }
        for c in self.children() {
            c.check(th)?;
        }
        Ok(())
    }

    /// Canonical representative up to renaming of bound variables and
    /// names and reordering of parallel components.
    pub fn canonical(&self) -> Process {
        let mut counter = 0usize;
        let renamed = self.rename_bound(&mut BTreeMap::new(), &mut BTreeMap::new(), &mut counter);
        renamed.sort_par()
    }

    fn rename_bound(
        &self,
        vars: &mut BTreeMap<Name, Term>,
        names: &mut BTreeMap<Name, Term>,
        counter: &mut usize,
    ) -> Process {
        let t = |x: &Term, vars: &BTreeMap<Name, Term>, names: &BTreeMap<Name, Term>| {
            x.subst(vars, names)
        };
        let mut fresh = |prefix: &str| {
            let n = name(&format!("{prefix}{counter}"));
            *counter += 1;
            n
        };
        match self {
            Process::Nil => Process::Nil,
            Process::Par(a, b) => Process::Par(
                Arc::new(a.rename_bound(vars, names, counter)),
                Arc::new(b.rename_bound(vars, names, counter)),
            ),
            Process::Repl(p) => Process::Repl(Arc::new(p.rename_bound(vars, names, counter))),
            Process::In(ch, x, p) => {
                let ch = t(ch, vars, names);
                let nx = fresh("%v");
                let old = vars.insert(x.clone(), Term::Var(nx.clone()));
                let body = p.rename_bound(vars, names, counter);
                restore(vars, x, old);
                Process::In(ch, nx, Arc::new(body))
            }
            Process::Out(ch, m, p) => Process::Out(
                t(ch, vars, names),
                t(m, vars, names),
                Arc::new(p.rename_bound(vars, names, counter)),
            ),
            Process::New(n, p) => {
                let nn = fresh("%n");
                let old = names.insert(n.clone(), Term::Fresh(nn.clone()));
                let body = p.rename_bound(vars, names, counter);
                restore(names, n, old);
                Process::New(nn, Arc::new(body))
            }
            Process::If(m, n, p, q) => Process::If(
                t(m, vars, names),
                t(n, vars, names),
                Arc::new(p.rename_bound(vars, names, counter)),
                Arc::new(q.rename_bound(vars, names, counter)),
            ),
            Process::Let(x, g, args, p, q) => {
                let args = args.iter().map(|a| t(a, vars, names)).collect();
                let nx = fresh("%v");
                let old = vars.insert(x.clone(), Term::Var(nx.clone()));
                let body = p.rename_bound(vars, names, counter);
                restore(vars, x, old);
                let other = q.rename_bound(vars, names, counter);
                Process::Let(nx, g.clone(), args, Arc::new(body), Arc::new(other))
            }
            Process::Event(f, p) => Process::Event(
                t(f, vars, names),
                Arc::new(p.rename_bound(vars, names, counter)),
            ),
        }
    }

    /// Sorts parallel components. Binder numbering is then redone on the
    /// sorted shape so equal multisets get equal names.
    fn sort_par(&self) -> Process {
        fn strip(p: &Process) -> Process {
            match p {
                Process::Par(..) => {
                    let mut parts: Vec<Process> = p
                        .par_components()
                        .into_iter()
                        .filter(|c| !c.is_nil())
                        .map(strip)
                        .collect();
                    parts.sort_by_key(|c| c.shape_key());
                    Process::par_all(parts)
                }
                other => other.map_children(strip),
            }
        }
        let sorted = strip(self);
        let mut counter = 0usize;
        sorted.rename_bound(&mut BTreeMap::new(), &mut BTreeMap::new(), &mut counter)
    }

    /// Ordering key independent of bound-name choice.
    fn shape_key(&self) -> String {
        let mut counter = 0usize;
        let renamed = self.rename_bound(&mut BTreeMap::new(), &mut BTreeMap::new(), &mut counter);
        super::syntax::print_process(&renamed)
    }

    pub fn map_children(&self, f: impl Fn(&Process) -> Process) -> Process {
        let g = |p: &Arc<Process>| Arc::new(f(p));
        match self {
            Process::Nil => Process::Nil,
            Process::Par(a, b) => Process::Par(g(a), g(b)),
            Process::Repl(p) => Process::Repl(g(p)),
            Process::In(ch, x, p) => Process::In(ch.clone(), x.clone(), g(p)),
            Process::Out(ch, m, p) => Process::Out(ch.clone(), m.clone(), g(p)),
            Process::New(n, p) => Process::New(n.clone(), g(p)),
            Process::If(m, n, p, q) => Process::If(m.clone(), n.clone(), g(p), g(q)),
            Process::Let(x, d, a, p, q) => {
                Process::Let(x.clone(), d.clone(), a.clone(), g(p), g(q))
            }
            Process::Event(e, p) => Process::Event(e.clone(), g(p)),
        }
    }

    pub fn alpha_eq(&self, other: &Process) -> bool {
        self.canonical() == other.canonical()
    }
}

fn without(s: &Subst, x: &Name) -> Subst {
    if s.contains_key(x) {
        let mut c = s.clone();
        c.remove(x);
        c
    } else {
        s.clone()
    }
}

fn restore(map: &mut BTreeMap<Name, Term>, key: &Name, old: Option<Term>) {
    match old {
        Some(v) => {
            map.insert(key.clone(), v);
        }
        None => {
            map.remove(key);
        }
    }
}
