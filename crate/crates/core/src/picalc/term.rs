use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

pub type Name = Arc<str>;

pub fn name(s: &str) -> Name {
    Arc::from(s)
}

/// Terms of the calculus.
///
/// `Fresh` names are restricted (bound by `new` or generated at run time);
/// `Pub` names are known to the adversary.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Name),
    Fresh(Name),
    Pub(Name),
    App(Name, Arc<[Term]>),
}

pub type Subst = BTreeMap<Name, Term>;

impl Term {
    pub fn var(s: &str) -> Term {
        Term::Var(name(s))
    }

    pub fn fresh(s: &str) -> Term {
        Term::Fresh(name(s))
    }

    pub fn public(s: &str) -> Term {
        Term::Pub(name(s))
    }

    pub fn app(f: &str, args: Vec<Term>) -> Term {
        Term::App(name(f), args.into())
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::App(_, a) => a,
            _ => &[],
        }
    }

    pub fn head(&self) -> Option<&str> {
        match self {
            Term::App(f, _) => Some(f),
            _ => None,
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Fresh(_) | Term::Pub(_) => true,
            Term::App(_, a) => a.iter().all(Term::is_ground),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Term::App(_, a) => 1 + a.iter().map(Term::depth).max().unwrap_or(0),
            _ => 1,
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Term::App(_, a) => 1 + a.iter().map(Term::size).sum::<usize>(),
            _ => 1,
        }
    }

    pub fn mentions_var(&self, x: &str) -> bool {
        match self {
            Term::Var(v) => &**v == x,
            Term::App(_, a) => a.iter().any(|t| t.mentions_var(x)),
            _ => false,
        }
    }

    pub fn mentions_fresh(&self, n: &str) -> bool {
        match self {
            Term::Fresh(v) => &**v == n,
            Term::App(_, a) => a.iter().any(|t| t.mentions_fresh(n)),
            _ => false,
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Name>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::App(_, a) => a.iter().for_each(|t| t.collect_vars(out)),
            _ => {}
        }
    }

    pub fn vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_pub(&self, out: &mut BTreeSet<Name>) {
        match self {
            Term::Pub(v) => {
                out.insert(v.clone());
            }
            Term::App(_, a) => a.iter().for_each(|t| t.collect_pub(out)),
            _ => {}
        }
    }

    pub fn collect_fresh(&self, out: &mut BTreeSet<Name>) {
        match self {
            Term::Fresh(v) => {
                out.insert(v.clone());
            }
            Term::App(_, a) => a.iter().for_each(|t| t.collect_fresh(out)),
            _ => {}
        }
    }

    /// Every subterm, including `self`.
    pub fn subterms(&self, out: &mut BTreeSet<Term>) {
        out.insert(self.clone());
        for a in self.args() {
            a.subterms(out);
        }
    }

    pub fn subst(&self, vars: &Subst, names: &Subst) -> Term {
        match self {
            Term::Var(v) => vars.get(v).cloned().unwrap_or_else(|| self.clone()),
            Term::Fresh(n) => names.get(n).cloned().unwrap_or_else(|| self.clone()),
            Term::Pub(_) => self.clone(),
            Term::App(f, a) => {
                Term::App(f.clone(), a.iter().map(|t| t.subst(vars, names)).collect())
            }
        }
    }

    pub fn subst_vars(&self, vars: &Subst) -> Term {
        if vars.is_empty() {
            return self.clone();
        }
        self.subst(vars, &Subst::new())
    }

    /// One-way matching of `self` (a pattern) against a ground term.
    pub fn match_into(&self, t: &Term, sigma: &mut Subst) -> bool {
        match (self, t) {
            (Term::Var(v), _) => match sigma.get(v) {
                Some(bound) => bound == t,
                None => {
                    sigma.insert(v.clone(), t.clone());
                    true
                }
            },
            (Term::App(f, ps), Term::App(g, ts)) => {
                f == g
                    && ps.len() == ts.len()
                    && ps
                        .iter()
                        .zip(ts.iter())
                        .all(|(p, t)| p.match_into(t, sigma))
            }
            (p, t) => p == t,
        }
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
}

pub(crate) fn write_atom(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    if is_ident(s) && !super::syntax::is_keyword(s) {
        f.write_str(s)
    } else {
        write!(f, "\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

impl serde::Serialize for Term {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Fresh(n) => {
                f.write_str("~")?;
                write_atom(f, n)
            }
            Term::Pub(n) => write_atom(f, n),
            Term::App(g, a) => {
                f.write_str(g)?;
                f.write_str("(")?;
                for (i, t) in a.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{t}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_respects_repeated_vars() {
        let p = Term::app("equal", vec![Term::var("x"), Term::var("x")]);
        let mut s = Subst::new();
        assert!(p.match_into(
            &Term::app("equal", vec![Term::public("a"), Term::public("a")]),
            &mut s
        ));
        let mut s = Subst::new();
        assert!(!p.match_into(
            &Term::app("equal", vec![Term::public("a"), Term::public("b")]),
            &mut s
        ));
    }

    #[test]
    fn display_quotes_dotted_names() {
        let t = Term::app("C_ip", vec![Term::public("64.233.167.26")]);
        assert_eq!(t.to_string(), "C_ip(\"64.233.167.26\")");
        assert_eq!(Term::fresh("s#0").to_string(), "~\"s#0\"");
    }
}
