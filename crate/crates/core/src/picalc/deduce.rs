use std::collections::BTreeSet;

use super::term::{Name, Subst, Term};
use super::theory::Theory;

/// Adversary knowledge `νE.δ`: restricted names plus observed outputs in emission order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Frame {
    pub names: BTreeSet<Name>,
    pub outputs: Vec<Term>,
}

impl Frame {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn restrict(mut self, n: &str) -> Self {
        self.names.insert(n.into());
        self
    }

    pub fn output(mut self, t: Term) -> Self {
        self.outputs.push(t);
        self
    }

    pub fn knowledge(&self, th: &Theory, extra: &Term) -> Knowledge {
        let mut k = Knowledge::new();
        let mut fresh = BTreeSet::new();
        for t in self.outputs.iter().chain(std::iter::once(extra)) {
            t.collect_fresh(&mut fresh);
        }
        let mut seed: Vec<Term> = fresh
            .into_iter()
            .filter(|n| !self.names.contains(n))
            .map(Term::Fresh)
            .collect();
        seed.extend(self.outputs.iter().cloned());
        k.extend(seed, th);
        k
    }
}

/// `νE.δ ⊢ t` under the given theory.
pub fn deduce(frame: &Frame, t: &Term, th: &Theory) -> bool {
    frame.knowledge(th, t).derives(t, th)
}

/// Saturated knowledge: closed under every destructor reduction whose
/// remaining arguments are synthesizable.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Knowledge {
    items: BTreeSet<Term>,
}

impl Knowledge {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn items(&self) -> &BTreeSet<Term> {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Returns whether anything new was learned.
    pub fn add(&mut self, t: Term, th: &Theory) -> bool {
        self.extend(std::iter::once(t), th)
    }

    pub fn extend(&mut self, ts: impl IntoIterator<Item = Term>, th: &Theory) -> bool {
        let mut changed = false;
        for t in ts {
            changed |= self.items.insert(t);
        }
        if changed {
            self.saturate(th);
        }
        changed
    }

    fn saturate(&mut self, th: &Theory) {
        loop {
            let mut learned = Vec::new();
            for u in &self.items {
                for d in th.destructors() {
                    for r in &d.rules {
                        let Some(a) = r.anchor else { continue };
                        let mut sigma = Subst::new();
                        if !r.lhs[a].match_into(u, &mut sigma) {
                            continue;
                        }
                        let side_ok = r
                            .lhs
                            .iter()
                            .enumerate()
                            .all(|(i, p)| i == a || self.derives(&p.subst_vars(&sigma), th));
                        if side_ok {
                            let v = r.rhs.subst_vars(&sigma);
                            if !self.items.contains(&v) {
                                learned.push(v);
                            }
                        }
                    }
                }
            }
            if learned.is_empty() {
                return;
            }
            self.items.extend(learned);
        }
    }

    /// Synthesis over the saturated set: known terms, public names and
    /// public constructor applications.
    pub fn derives(&self, t: &Term, th: &Theory) -> bool {
        match t {
            Term::Var(_) => false,
            Term::Pub(_) => true,
            Term::Fresh(_) => self.items.contains(t),
            Term::App(f, args) => {
                self.items.contains(t)
                    || (th.is_public_constructor(f)
                        && th.get_constructor(f).map(|c| c.arity) == Some(args.len())
                        && args.iter().all(|a| self.derives(a, th)))
            }
        }
    }
}
