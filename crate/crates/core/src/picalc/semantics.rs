use std::collections::BTreeSet;
use std::sync::Arc;

use super::deduce::Knowledge;
use super::process::Process;
use super::term::{name, Name, Subst, Term};
use super::theory::Theory;

/// Exploration bounds: events per trace, unfoldings per replication, and
/// depth of adversary-built input messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Bounds {
    pub depth: usize,
    pub repl: usize,
    pub msg_depth: usize,
}

impl Bounds {
    pub fn new(depth: usize, repl: usize, msg_depth: usize) -> Self {
        Bounds {
            depth,
            repl,
            msg_depth,
        }
    }
}

/// `(E, P, δ)` with `δ` kept saturated. Processes are stored normalized and sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    pub procs: Vec<Arc<Process>>,
    pub knowledge: Knowledge,
    /// Generated names already shown in an event; never allocated again.
    pub spent: BTreeSet<Name>,
}

impl Configuration {
    pub fn new(procs: Vec<Arc<Process>>, knowledge: Knowledge) -> Self {
        Configuration {
            procs,
            knowledge,
            spent: BTreeSet::new(),
        }
    }

    fn fresh_in_use(&self, extra: &[Arc<Process>]) -> BTreeSet<Name> {
        let mut used = self.spent.clone();
        for t in self.knowledge.items() {
            t.collect_fresh(&mut used);
        }
        for p in self.procs.iter().chain(extra) {
            p.visit_terms(&mut |t| t.collect_fresh(&mut used));
        }
        used
    }
}

/// Adversary name always available as an input.
pub const ADVERSARY_NAME: &str = "adv";

/// Operational semantics over a fixed theory and bounds.
#[derive(Debug, Clone)]
pub struct Semantics<'a> {
    pub theory: &'a Theory,
    pub bounds: Bounds,
    /// Public names the adversary may always send, besides those in the process.
    pub public: Vec<Term>,
    /// Event heads consumed silently during normalization.
    pub quiet: Vec<String>,
}

impl<'a> Semantics<'a> {
    pub fn new(theory: &'a Theory, bounds: Bounds) -> Self {
        Semantics {
            theory,
            bounds,
            public: vec![Term::public(ADVERSARY_NAME)],
            quiet: Vec::new(),
        }
    }

    pub fn with_quiet<S: Into<String>>(mut self, heads: impl IntoIterator<Item = S>) -> Self {
        self.quiet.extend(heads.into_iter().map(Into::into));
        self
    }

    pub fn with_public(mut self, names: impl IntoIterator<Item = Term>) -> Self {
        for n in names {
            if !self.public.contains(&n) {
                self.public.push(n);
            }
        }
        self
    }

    pub fn initial(&self, p: &Process) -> Configuration {
        self.normalize(vec![Arc::new(p.clone())], Knowledge::new(), Vec::new())
    }

    /// Applies every silent, deterministic rule: null, par, repl unfolding,
    /// new, let, if, quiet events, and output on a derivable channel.
    pub fn normalize(
        &self,
        pending: Vec<Arc<Process>>,
        know: Knowledge,
        stable: Vec<Arc<Process>>,
    ) -> Configuration {
        self.normalize_reserving(pending, know, stable, BTreeSet::new())
    }

    /// As `normalize`, never allocating a name in `reserved`; the result
    /// carries `reserved` as its spent set.
    fn normalize_reserving(
        &self,
        mut pending: Vec<Arc<Process>>,
        mut know: Knowledge,
        mut stable: Vec<Arc<Process>>,
        reserved: BTreeSet<Name>,
    ) -> Configuration {
        loop {
            let mut learned = Vec::new();
            while let Some(p) = pending.pop() {
                match &*p {
                    Process::Nil => {}
                    Process::Par(a, b) => {
                        pending.push(a.clone());
                        pending.push(b.clone());
                    }
                    Process::Repl(q) => {
                        for _ in 0..self.bounds.repl {
                            pending.push(q.clone());
                        }
                    }
                    Process::New(n, q) => {
                        let probe = Configuration {
                            procs: stable.clone(),
                            knowledge: know.clone(),
                            spent: reserved.clone(),
                        };
                        let mut used = probe.fresh_in_use(&pending);
                        for t in &learned {
                            let t: &Term = t;
                            t.collect_fresh(&mut used);
                        }
                        q.visit_terms(&mut |t| t.collect_fresh(&mut used));
                        let base = n.split('#').next().unwrap_or(n);
                        let fresh = (0..)
                            .map(|i| name(&format!("{base}#{i}")))
                            .find(|c| !used.contains(c))
                            .expect("unbounded counter");
                        let mut names = Subst::new();
                        names.insert(n.clone(), Term::Fresh(fresh));
                        pending.push(Arc::new(q.subst(&Subst::new(), &names)));
                    }
                    Process::Event(t, q)
                        if t.head().is_some_and(|h| self.quiet.iter().any(|x| x == h)) =>
                    {
                        pending.push(q.clone());
                    }
                    Process::If(m, n, a, b) if m.is_ground() && n.is_ground() => {
                        pending.push(if m == n { a.clone() } else { b.clone() });
                    }
                    Process::Let(x, g, args, a, b) if args.iter().all(Term::is_ground) => {
                        match self.theory.apply(g, args) {
                            Some(v) => pending.push(Arc::new(a.subst_var(x, &v))),
                            None => pending.push(b.clone()),
                        }
                    }
                    Process::Out(ch, m, q)
                        if ch.is_ground() && m.is_ground() && know.derives(ch, self.theory) =>
                    {
                        learned.push(m.clone());
                        pending.push(q.clone());
                    }
                    _ => stable.push(p),
                }
            }
            if learned.is_empty() || !know.extend(learned, self.theory) {
                break;
            }
            let (outs, rest): (Vec<_>, Vec<_>) = stable
                .into_iter()
                .partition(|p| matches!(&**p, Process::Out(..)));
            if outs.is_empty() {
                stable = rest;
                break;
            }
            pending = outs;
            stable = rest;
        }
        stable.sort();
        Configuration {
            procs: stable,
            knowledge: know,
            spent: reserved,
        }
    }

    fn without(procs: &[Arc<Process>], skip: &[usize]) -> Vec<Arc<Process>> {
        procs
            .iter()
            .enumerate()
            .filter(|(i, _)| !skip.contains(i))
            .map(|(_, p)| p.clone())
            .collect()
    }

    /// Candidate messages for an adversary input binding `x` in `cont`.
    pub fn input_candidates(&self, c: &Configuration, x: &Name, cont: &Process) -> Vec<Term> {
        let th = self.theory;
        let mut atoms: BTreeSet<Term> = self.public.iter().cloned().collect();
        atoms.extend(cont.public_names().into_iter().map(Term::Pub));
        atoms.extend(
            c.knowledge
                .items()
                .iter()
                .filter(|t| matches!(t, Term::Fresh(_)))
                .cloned(),
        );
        let mut out: BTreeSet<Term> = c.knowledge.items().clone();
        out.extend(atoms.iter().cloned());
        let mut shapes = Vec::new();
        collect_shapes(cont, x, th, &mut shapes);
        for pat in shapes {
            for sigma in solve(&pat, Subst::new(), th, &atoms, &c.knowledge) {
                let t = pat.subst_vars(&sigma);
                if t.is_ground()
                    && t.depth() <= self.bounds.msg_depth.max(1)
                    && c.knowledge.derives(&t, th)
                {
                    out.insert(t);
                }
            }
        }
        out.into_iter().filter(|m| viable(th, cont, x, m)).collect()
    }

    /// All single-step successors; `None` labels silent steps.
    ///
    /// An adversary input that leaves the knowledge unchanged is fused with
    /// the next action of the processes it releases: knowledge only grows,
    /// so deferring such an input loses no behaviour.
    pub fn step(&self, c: &Configuration) -> Vec<(Option<Term>, Configuration)> {
        let mut out = Vec::new();
        for i in 0..c.procs.len() {
            if i > 0 && c.procs[i - 1] == c.procs[i] {
                continue;
            }
            self.step_at(c, i, &mut out);
        }
        out
    }

    fn step_at(&self, c: &Configuration, i: usize, out: &mut Vec<(Option<Term>, Configuration)>) {
        let procs = &c.procs;
        match &*procs[i] {
            Process::Event(f, q) => {
                let mut spent = c.spent.clone();
                f.collect_fresh(&mut spent);
                let next = self.normalize_reserving(
                    vec![q.clone()],
                    c.knowledge.clone(),
                    Self::without(procs, &[i]),
                    spent,
                );
                out.push((Some(f.clone()), next));
            }
            Process::In(ch, x, q) if ch.is_ground() && c.knowledge.derives(ch, self.theory) => {
                let rest = Self::without(procs, &[i]);
                let in_use = c.fresh_in_use(&[]);
                for m in self.input_candidates(c, x, q) {
                    let body = Arc::new(q.subst_var(x, &m));
                    let mut piece = self.normalize_reserving(
                        vec![body],
                        c.knowledge.clone(),
                        Vec::new(),
                        in_use.clone(),
                    );
                    piece.spent = c.spent.clone();
                    if piece.procs.is_empty() && piece.knowledge == c.knowledge {
                        continue;
                    }
                    if piece.knowledge != c.knowledge {
                        out.push((
                            None,
                            self.normalize_reserving(
                                piece.procs,
                                piece.knowledge,
                                rest.clone(),
                                c.spent.clone(),
                            ),
                        ));
                        continue;
                    }
                    let mut all = rest.clone();
                    all.extend(piece.procs.iter().cloned());
                    all.sort();
                    let next = Configuration {
                        procs: all,
                        knowledge: piece.knowledge,
                        spent: c.spent.clone(),
                    };
                    let fusable = piece
                        .procs
                        .iter()
                        .all(|p| matches!(&**p, Process::Event(..) | Process::In(..)));
                    if !fusable {
                        out.push((None, next));
                        continue;
                    }
                    let mut released: Vec<&Arc<Process>> = piece.procs.iter().collect();
                    released.dedup();
                    for r in released {
                        let j = next
                            .procs
                            .iter()
                            .position(|p| p == r)
                            .expect("released process present");
                        self.step_at(&next, j, out);
                    }
                }
            }
            Process::Out(ch, m, q) => {
                for (j, r) in procs.iter().enumerate() {
                    if let Process::In(ch2, x, body) = &**r {
                        if ch2 == ch && m.is_ground() {
                            let next = self.normalize_reserving(
                                vec![q.clone(), Arc::new(body.subst_var(x, m))],
                                c.knowledge.clone(),
                                Self::without(procs, &[i, j]),
                                c.spent.clone(),
                            );
                            out.push((None, next));
                        }
                    }
                }
            }
            _ => {}
        }
    }
}

/// Instantiations of the variables of `pat` by `atoms` under which every
/// subterm headed by a private constructor is a known item.
fn solve(
    pat: &Term,
    sigma: Subst,
    th: &Theory,
    atoms: &BTreeSet<Term>,
    know: &Knowledge,
) -> Vec<Subst> {
    match pat {
        Term::Var(v) => match sigma.get(v) {
            Some(_) => vec![sigma],
            None => atoms
                .iter()
                .map(|a| {
                    let mut s = sigma.clone();
                    s.insert(v.clone(), a.clone());
                    s
                })
                .collect(),
        },
        Term::Pub(_) | Term::Fresh(_) => vec![sigma],
        Term::App(f, _) if !th.is_public_constructor(f) => {
            let inst = pat.subst_vars(&sigma);
            if inst.is_ground() {
                return vec![sigma];
            }
            let mut out = Vec::new();
            for item in know.items() {
                if item.head() != Some(&**f) {
                    continue;
                }
                let mut s = sigma.clone();
                if inst.match_into(item, &mut s)
                    && s.iter()
                        .all(|(v, t)| sigma.contains_key(v) || atoms.contains(t))
                {
                    out.push(s);
                }
            }
            out
        }
        Term::App(_, args) => args.iter().fold(vec![sigma], |acc, a| {
            acc.into_iter()
                .flat_map(|s| solve(a, s, th, atoms, know))
                .collect()
        }),
    }
}

/// Follows the silent prefix of `cont` under `x := m`, touching terms
/// only. False when that prefix certainly ends in `0`.
fn viable(th: &Theory, cont: &Process, x: &Name, m: &Term) -> bool {
    let mut sub = Subst::new();
    sub.insert(x.clone(), m.clone());
    let mut p = cont;
    loop {
        match p {
            Process::Nil => return false,
            Process::If(a, b, then, els) => {
                let (a, b) = (a.subst_vars(&sub), b.subst_vars(&sub));
                if !(a.is_ground() && b.is_ground()) {
                    return true;
                }
                p = if a == b { then } else { els };
            }
            Process::Let(y, g, args, then, els) => {
                let args: Vec<Term> = args.iter().map(|a| a.subst_vars(&sub)).collect();
                if !args.iter().all(Term::is_ground) {
                    return true;
                }
                match th.apply(g, &args) {
                    Some(v) => {
                        sub.insert(y.clone(), v);
                        p = then;
                    }
                    None => p = els,
                }
            }
            _ => return true,
        }
    }
}

fn collect_shapes(p: &Process, x: &Name, th: &Theory, out: &mut Vec<Term>) {
    let is_x = |t: &Term| matches!(t, Term::Var(v) if v == x);
    match p {
        Process::In(_, y, _) if y == x => return,
        Process::If(m, n, _, _) => {
            if is_x(m) {
                out.push(n.clone());
            }
            if is_x(n) {
                out.push(m.clone());
            }
        }
        Process::Let(_, g, args, _, _) => {
            if let Some(d) = th.get_destructor(g) {
                for (a, arg) in args.iter().enumerate() {
                    if !is_x(arg) {
                        continue;
                    }
                    for r in &d.rules {
                        let mut sigma = Subst::new();
                        let consistent = args.iter().enumerate().all(|(j, t)| {
                            j == a || !t.is_ground() || r.lhs[j].match_into(t, &mut sigma)
                        });
                        if !consistent {
                            continue;
                        }
                        let pat = r.lhs[a].subst_vars(&sigma);
                        if pat.vars().len() <= 2 {
                            out.push(pat);
                        }
                    }
                }
            }
        }
        _ => {}
    }
    let shadows = matches!(p, Process::Let(y, ..) if y == x);
    for (k, c) in p.children().into_iter().enumerate() {
        if shadows && k == 0 {
            continue;
        }
        collect_shapes(c, x, th, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::picalc::syntax::parse_process;

    fn sem(th: &Theory) -> Semantics<'_> {
        Semantics::new(th, Bounds::new(4, 2, 3))
    }

    #[test]
    fn event_rule() {
        let th = Theory::shipped();
        let s = sem(&th);
        let c = s.initial(&parse_process("event F(a)").unwrap());
        let succ = s.step(&c);
        assert_eq!(succ.len(), 1);
        assert_eq!(succ[0].0, Some(Term::app("F", vec![Term::public("a")])));
        assert!(succ[0].1.procs.is_empty());
    }

    #[test]
    fn quiet_events_fold_into_normalization() {
        let th = Theory::shipped();
        let s = sem(&th).with_quiet(["Note"]);
        let c = s.initial(&parse_process("event Note(a); event F(a) | event Note(b)").unwrap());
        let succ = s.step(&c);
        assert_eq!(succ.len(), 1);
        assert_eq!(succ[0].0, Some(Term::app("F", vec![Term::public("a")])));
    }

    #[test]
    fn par_splits_silently() {
        let th = Theory::shipped();
        let s = sem(&th);
        let c = s.initial(&parse_process("event A(a) | event B(b)").unwrap());
        assert_eq!(c.procs.len(), 2);
    }

    #[test]
    fn output_on_private_channel_blocked() {
        let th = Theory::shipped();
        let s = sem(&th);
        let c = s.initial(&parse_process("new k; out(ckey(~k), m); event Done(m)").unwrap());
        assert!(c.knowledge.is_empty());
        assert!(s.step(&c).is_empty());
    }

    #[test]
    fn internal_communication_on_private_channel() {
        let th = Theory::shipped();
        let s = sem(&th);
        let c = s.initial(
            &parse_process("new k; (out(ckey(~k), m) | in(ckey(~k), x); event Got(x))").unwrap(),
        );
        let succ = s.step(&c);
        assert_eq!(succ.len(), 1);
        assert_eq!(succ[0].0, None);
        let after = s.step(&succ[0].1);
        assert_eq!(after[0].0, Some(Term::app("Got", vec![Term::public("m")])));
    }

    #[test]
    fn input_builds_packets_from_known_key() {
        let th = Theory::shipped();
        let s = sem(&th);
        let p = parse_process(
            "out(c, k(a, b, p, q)); in(c, x); let y = get_ans_packet(k(a, b, p, q), x) in if y = adv then event Forged(y)",
        );
        // k is private but its value was output, so the adversary can use it
        let c = s.initial(&p.unwrap());
        let succ = s.step(&c);
        assert!(succ
            .iter()
            .any(|(e, _)| *e == Some(Term::app("Forged", vec![Term::public("adv")]))));
    }

    #[test]
    fn inputs_leading_nowhere_are_pruned() {
        let th = Theory::shipped();
        let s = sem(&th);
        let c =
            s.initial(&parse_process("in(c, x); if x = ckey(a) then event Claimed(a)").unwrap());
        assert!(s.step(&c).is_empty());
    }
}
