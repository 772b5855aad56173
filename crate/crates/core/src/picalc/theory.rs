use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::term::{name, Name, Subst, Term};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TheoryError {
    #[error("destructor `{0}`: reduction is not subterm-convergent")]
    NonConvergentTheory(String),
    #[error("destructor `{0}`: right-hand side uses a variable absent from the left")]
    UnboundRhsVariable(String),
    #[error("destructor `{0}`: patterns must not contain names")]
    NameInPattern(String),
    #[error("symbol `{0}` declared twice")]
    Duplicate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Constructor {
    pub arity: usize,
    pub private: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reduction {
    pub lhs: Vec<Term>,
    pub rhs: Term,
    /// Argument whose pattern binds every variable; `None` when the rule can
    /// only return one of its own arguments and so never adds knowledge.
    pub anchor: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Destructor {
    pub name: Name,
    pub arity: usize,
    pub rules: Vec<Reduction>,
}

#[derive(Debug, Clone, Default)]
pub struct Theory {
    constructors: BTreeMap<Name, Constructor>,
    destructors: BTreeMap<Name, Destructor>,
}

impl Theory {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn constructor(
        mut self,
        f: &str,
        arity: usize,
        private: bool,
    ) -> Result<Self, TheoryError> {
        if self.constructors.contains_key(f) || self.destructors.contains_key(f) {
            return Err(TheoryError::Duplicate(f.into()));
        }
        self.constructors
            .insert(name(f), Constructor { arity, private });
        Ok(self)
    }

    /// Adds a reduction `g(lhs) -> rhs`, creating the destructor on first use.
    pub fn reduction(mut self, g: &str, lhs: Vec<Term>, rhs: Term) -> Result<Self, TheoryError> {
        if self.constructors.contains_key(g) {
            return Err(TheoryError::Duplicate(g.into()));
        }
        let mut lhs_vars = BTreeSet::new();
        for p in &lhs {
            let mut names = BTreeSet::new();
            p.collect_pub(&mut names);
            p.collect_fresh(&mut names);
            if !names.is_empty() {
                return Err(TheoryError::NameInPattern(g.into()));
            }
            p.collect_vars(&mut lhs_vars);
        }
        if !rhs.vars().is_subset(&lhs_vars) {
            return Err(TheoryError::UnboundRhsVariable(g.into()));
        }
        let anchor = if lhs.contains(&rhs) {
            None
        } else {
            let found = lhs.iter().position(|p| {
                !matches!(p, Term::Var(_)) && p.vars().is_superset(&lhs_vars) && {
                    let mut subs = BTreeSet::new();
                    p.subterms(&mut subs);
                    subs.contains(&rhs)
                }
            });
            match found {
                Some(a) => Some(a),
                None => return Err(TheoryError::NonConvergentTheory(g.into())),
            }
        };
        let d = self
            .destructors
            .entry(name(g))
            .or_insert_with(|| Destructor {
                name: name(g),
                arity: lhs.len(),
                rules: Vec::new(),
            });
        if d.arity != lhs.len() {
            return Err(TheoryError::Duplicate(g.into()));
        }
        d.rules.push(Reduction { lhs, rhs, anchor });
        Ok(self)
    }

    pub fn get_constructor(&self, f: &str) -> Option<Constructor> {
        self.constructors.get(f).copied()
    }

    pub fn get_destructor(&self, g: &str) -> Option<&Destructor> {
        self.destructors.get(g)
    }

    pub fn is_public_constructor(&self, f: &str) -> bool {
        matches!(self.constructors.get(f), Some(c) if !c.private)
    }

    pub fn constructors(&self) -> impl Iterator<Item = (&Name, Constructor)> {
        self.constructors.iter().map(|(n, c)| (n, *c))
    }

    pub fn destructors(&self) -> impl Iterator<Item = &Destructor> {
        self.destructors.values()
    }

    /// Applies `g` to ground arguments; first matching reduction wins.
    pub fn apply(&self, g: &str, args: &[Term]) -> Option<Term> {
        let d = self.destructors.get(g)?;
        if d.arity != args.len() {
            return None;
        }
        d.rules.iter().find_map(|r| {
            let mut sigma = Subst::new();
            r.lhs
                .iter()
                .zip(args)
                .all(|(p, t)| p.match_into(t, &mut sigma))
                .then(|| r.rhs.subst_vars(&sigma))
        })
    }

    /// The equational theory used by the email model and the tests.
    pub fn shipped() -> Theory {
        let v = Term::var;
        let app = Term::app;
        let key = || app("k", vec![v("i"), v("j"), v("p"), v("q")]);
        let build = || -> Result<Theory, TheoryError> {
            let mut t = Theory::empty()
                .constructor("pair", 2, false)?
                .constructor("senc", 2, false)?
                .constructor("req_packet", 2, false)?
                .constructor("ans_packet", 2, false)?
                .constructor("k", 4, true)?
                .constructor("ckey", 1, true)?
                .constructor("rtok", 2, true)?
                .constructor("tls", 3, true)?
                .constructor("nsforge", 2, true)?
                .constructor("resforge", 3, true)?
                .constructor("sk", 1, true)?
                .reduction("fst", vec![app("pair", vec![v("x"), v("y")])], v("x"))?
                .reduction("snd", vec![app("pair", vec![v("x"), v("y")])], v("y"))?
                .reduction(
                    "sdec",
                    vec![app("senc", vec![v("x"), v("y")]), v("y")],
                    v("x"),
                )?
                .reduction("equal", vec![v("x"), v("x")], v("x"))?
                .reduction(
                    "get_req_packet",
                    vec![v("x"), app("req_packet", vec![v("x"), v("y")])],
                    v("y"),
                )?
                .reduction(
                    "get_ans_packet",
                    vec![v("x"), app("ans_packet", vec![v("x"), v("y")])],
                    v("y"),
                )?;
            for packet in ["req_packet", "ans_packet"] {
                let grab = if packet == "req_packet" {
                    "grab_req"
                } else {
                    "grab_ans"
                };
                t = t.reduction(
                    grab,
                    vec![
                        app(packet, vec![key(), v("y")]),
                        app("rtok", vec![v("i"), v("j")]),
                    ],
                    key(),
                )?;
            }
            t = t.reduction(
                "accept",
                vec![
                    app("req_packet", vec![key(), v("y")]),
                    app("sk", vec![v("j")]),
                    v("i"),
                    v("q"),
                ],
                key(),
            )?;
            for end in ["i", "j"] {
                t = t.reduction(
                    "sniff",
                    vec![
                        app("req_packet", vec![key(), v("y")]),
                        app("ckey", vec![v(end)]),
                    ],
                    v("y"),
                )?;
            }
            for end in ["i", "j"] {
                t = t.reduction(
                    "tls_open",
                    vec![
                        app("tls", vec![v("s"), v("i"), v("j")]),
                        app("ckey", vec![v(end)]),
                    ],
                    v("s"),
                )?;
            }
            t.reduction(
                "nsopen",
                vec![app("nsforge", vec![v("n"), v("y")]), v("n")],
                v("y"),
            )?
            .reduction(
                "resopen",
                vec![
                    app("resforge", vec![v("c"), v("n"), v("y")]),
                    v("c"),
                    v("n"),
                ],
                v("y"),
            )
        };
        build().expect("shipped theory is well-formed")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sdec_reduces() {
        let th = Theory::shipped();
        let m = Term::fresh("m");
        let k = Term::public("k");
        let c = Term::app("senc", vec![m.clone(), k.clone()]);
        assert_eq!(th.apply("sdec", &[c.clone(), k]), Some(m));
        assert_eq!(th.apply("sdec", &[c, Term::public("other")]), None);
    }

    #[test]
    fn packet_accessor() {
        let th = Theory::shipped();
        let key = Term::app(
            "k",
            vec![
                Term::public("a"),
                Term::public("b"),
                Term::public("p"),
                Term::public("q"),
            ],
        );
        let pkt = Term::app("req_packet", vec![key.clone(), Term::public("hello")]);
        assert_eq!(
            th.apply("get_req_packet", &[key, pkt]),
            Some(Term::public("hello"))
        );
    }

    #[test]
    fn rejects_non_convergent() {
        let err = Theory::empty()
            .constructor("f", 1, false)
            .unwrap()
            .reduction(
                "g",
                vec![Term::var("x")],
                Term::app("f", vec![Term::var("x")]),
            )
            .unwrap_err();
        assert_eq!(err, TheoryError::NonConvergentTheory("g".into()));
    }

    #[test]
    fn rejects_rhs_variable_escape() {
        let err = Theory::empty()
            .reduction("g", vec![Term::var("x")], Term::var("y"))
            .unwrap_err();
        assert_eq!(err, TheoryError::UnboundRhsVariable("g".into()));
    }
}
