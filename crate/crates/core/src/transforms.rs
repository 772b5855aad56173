//! Over-approximating rewrites: generalizing a uniform parallel family to a
//! replicated input, and relocating inputs. Each rewrite can be validated
//! by bounded trace inclusion.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::exec::ExecMode;
use crate::picalc::{
    Bounds, Enumerator, Name, Process, ProtocolTrace, Semantics, Term, Theory, TraceSet,
};

/// Channel on which generalized parameters are received.
pub const PARAM_CHANNEL: &str = "c";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransformError {
    #[error("template mentions variable `{0}` outside its parameters")]
    FreeVariableEscape(String),
    #[error("more than one input binds `{0}`")]
    MultipleBinders(String),
    #[error("relocating the input of `{0}` would capture or free a binder")]
    ScopeViolation(String),
    #[error("instance {index} has {got} values for {expected} parameters")]
    InstanceArity {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("parameter input `{0}` is not reachable by silent steps")]
    UnreachableParameter(String),
}

/// `∥_{p ∈ instances} template{p/params}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelFamily {
    pub template: Process,
    pub params: Vec<Name>,
    pub instances: Vec<Vec<String>>,
}

impl ParallelFamily {
    pub fn new(template: Process, params: Vec<Name>, instances: Vec<Vec<String>>) -> Self {
        ParallelFamily {
            template,
            params,
            instances,
        }
    }

    pub fn validate(&self) -> Result<(), TransformError> {
        if let Some(v) = self
            .template
            .free_vars()
            .into_iter()
            .find(|v| !self.params.contains(v))
        {
            return Err(TransformError::FreeVariableEscape(v.to_string()));
        }
        for (index, inst) in self.instances.iter().enumerate() {
            if inst.len() != self.params.len() {
                return Err(TransformError::InstanceArity {
                    index,
                    expected: self.params.len(),
                    got: inst.len(),
                });
            }
        }
        Ok(())
    }

    /// The parallel composition itself.
    pub fn expand(&self) -> Result<Process, TransformError> {
        self.validate()?;
        Ok(Process::par_all(self.instances.iter().map(|inst| {
            let vars = self
                .params
                .iter()
                .cloned()
                .zip(inst.iter().map(|v| Term::public(v)))
                .collect();
            self.template.subst(&vars, &Default::default())
        })))
    }
}

/// `!in(c, v1). … in(c, vk). template`, independent of the instances.
pub fn generalize_family(f: &ParallelFamily) -> Result<Process, TransformError> {
    if let Some(v) = f
        .template
        .free_vars()
        .into_iter()
        .find(|v| !f.params.contains(v))
    {
        return Err(TransformError::FreeVariableEscape(v.to_string()));
    }
    let body = f.params.iter().rev().fold(f.template.clone(), |p, v| {
        Process::In(Term::public(PARAM_CHANNEL), v.clone(), Arc::new(p))
    });
    Ok(Process::Repl(Arc::new(body)))
}

fn binder_count(p: &Process, var: &Name) -> usize {
    let here = usize::from(matches!(p, Process::In(_, x, _) if x == var));
    here + p
        .children()
        .into_iter()
        .map(|c| binder_count(c, var))
        .sum::<usize>()
}

fn mentions_fresh(t: &Term, n: &Name) -> bool {
    t.mentions_fresh(n)
}

/// Pushes the input binding `var` inward past restrictions and into the
/// only parallel branch that uses `var`. Stops before any other action.
pub fn push_input(q: &Process, var: &str) -> Result<Process, TransformError> {
    let var: Name = var.into();
    match binder_count(q, &var) {
        0 => return Ok(q.clone()),
        1 => {}
        _ => return Err(TransformError::MultipleBinders(var.to_string())),
    }
    rewrite_at_input(q, &var, &|ch, body| sink(ch, &var, body))
}

fn rewrite_at_input(
    p: &Process,
    var: &Name,
    f: &dyn Fn(&Term, &Process) -> Result<Process, TransformError>,
) -> Result<Process, TransformError> {
    if let Process::In(ch, x, body) = p {
        if x == var {
            return f(ch, body);
        }
    }
    let err = RefCell::new(None);
    let out = p.map_children(|c| match rewrite_at_input(c, var, f) {
        Ok(r) => r,
        Err(e) => {
            err.borrow_mut().get_or_insert(e);
            c.clone()
        }
    });
    match err.into_inner() {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

fn sink(ch: &Term, var: &Name, body: &Process) -> Result<Process, TransformError> {
    let stay = || Process::In(ch.clone(), var.clone(), Arc::new(body.clone()));
    match body {
        Process::New(n, rest) => {
            if mentions_fresh(ch, n) {
                return Err(TransformError::ScopeViolation(var.to_string()));
            }
            Ok(Process::New(n.clone(), Arc::new(sink(ch, var, rest)?)))
        }
        Process::Par(a, b) => {
            let (in_a, in_b) = (a.free_vars().contains(var), b.free_vars().contains(var));
            match (in_a, in_b) {
                (true, false) => Ok(Process::Par(Arc::new(sink(ch, var, a)?), b.clone())),
                (false, true) => Ok(Process::Par(a.clone(), Arc::new(sink(ch, var, b)?))),
                _ => Ok(stay()),
            }
        }
        _ => Ok(stay()),
    }
}

/// Applies [`push_input`] to every input variable, innermost binders first.
pub fn push_all(p: &Process) -> Process {
    fn go(p: &Process) -> Process {
        let p = p.map_children(go);
        match &p {
            Process::In(ch, x, body) => sink(ch, x, body).unwrap_or(p),
            _ => p,
        }
    }
    go(p)
}

/// Moves the unique input binding `var` to the front: `in(x).Q'`.
pub fn hoist_input(q: &Process, var: &str) -> Result<Process, TransformError> {
    let var: Name = var.into();
    match binder_count(q, &var) {
        0 => return Ok(q.clone()),
        1 => {}
        _ => return Err(TransformError::MultipleBinders(var.to_string())),
    }
    let violation = || TransformError::ScopeViolation(var.to_string());
    let mut found: Option<Term> = None;
    let stripped = strip_input(q, &var, &mut Vec::new(), &mut Vec::new(), &mut found)?;
    let ch = found.ok_or_else(violation)?;
    if q.free_vars().contains(&var) {
        return Err(violation());
    }
    Ok(Process::In(ch, var, Arc::new(stripped)))
}

fn strip_input(
    p: &Process,
    var: &Name,
    vars: &mut Vec<Name>,
    names: &mut Vec<Name>,
    found: &mut Option<Term>,
) -> Result<Process, TransformError> {
    let violation = || TransformError::ScopeViolation(var.to_string());
    if let Process::In(ch, x, body) = p {
        if x == var {
            if vars.iter().any(|v| ch.mentions_var(v)) || names.iter().any(|n| ch.mentions_fresh(n))
            {
                return Err(violation());
            }
            *found = Some(ch.clone());
            return Ok((**body).clone());
        }
    }
    if binder_count(p, var) == 0 {
        return Ok(p.clone());
    }
    match p {
        Process::Repl(_) => Err(violation()),
        Process::New(n, body) => {
            names.push(n.clone());
            let r = strip_input(body, var, vars, names, found);
            names.pop();
            Ok(Process::New(n.clone(), Arc::new(r?)))
        }
        Process::In(ch, x, body) => {
            vars.push(x.clone());
            let r = strip_input(body, var, vars, names, found);
            vars.pop();
            Ok(Process::In(ch.clone(), x.clone(), Arc::new(r?)))
        }
        Process::Let(x, g, args, then, els) => {
            if binder_count(then, var) > 0 {
                vars.push(x.clone());
                let r = strip_input(then, var, vars, names, found);
                vars.pop();
                Ok(Process::Let(
                    x.clone(),
                    g.clone(),
                    args.clone(),
                    Arc::new(r?),
                    els.clone(),
                ))
            } else {
                let r = strip_input(els, var, vars, names, found)?;
                Ok(Process::Let(
                    x.clone(),
                    g.clone(),
                    args.clone(),
                    then.clone(),
                    Arc::new(r),
                ))
            }
        }
        _ => {
            let err = RefCell::new(None);
            let out = p.map_children(|c| {
                let mut vs = vars.clone();
                let mut ns = names.clone();
                let mut fd = None;
                match strip_input(c, var, &mut vs, &mut ns, &mut fd) {
                    Ok(r) => {
                        if fd.is_some() {
                            err.borrow_mut().get_or_insert(Ok(fd));
                        }
                        r
                    }
                    Err(e) => {
                        *err.borrow_mut() = Some(Err(e));
                        c.clone()
                    }
                }
            });
            match err.into_inner() {
                Some(Err(e)) => Err(e),
                Some(Ok(fd)) => {
                    *found = fd;
                    Ok(out)
                }
                None => Ok(out),
            }
        }
    }
}

/// Outcome of a bounded trace-inclusion check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Inclusion {
    pub included: bool,
    pub counterexample: Option<ProtocolTrace>,
    pub traces_checked: usize,
    pub bounds: Bounds,
}

/// Whether every trace of `p` within `bounds` is a trace of `q` within
/// `bounds`. Public names of either side are available to the adversary on
/// both sides.
pub fn check_inclusion(
    p: &Process,
    q: &Process,
    th: &Theory,
    bounds: Bounds,
    mode: ExecMode,
) -> Inclusion {
    let public: BTreeSet<Name> = p
        .public_names()
        .into_iter()
        .chain(q.public_names())
        .collect();
    let e = Enumerator::new(
        Semantics::new(th, bounds).with_public(public.into_iter().map(Term::Pub)),
        mode,
    );
    let left = e.traces(p);
    check_inclusion_of(&left, &e, q)
}

/// Whether `left`, enumerated by `e`, is included in the traces of `q`.
/// Configurations already explored for `left` are shared with `q`.
pub fn check_inclusion_of(left: &TraceSet, e: &Enumerator<'_>, q: &Process) -> Inclusion {
    let right = e.traces(q);
    let counterexample = left.first_missing_from(&right);
    Inclusion {
        included: counterexample.is_none(),
        counterexample,
        traces_checked: left.len(),
        bounds: e.sem.bounds,
    }
}

/// Turns one replicated generalized family back into the parallel
/// composition of its instances by unrolling the replication once per
/// instance and consuming every parameter input with the instance's value.
/// Each consumed input must sit behind restrictions, parallel composition
/// or earlier consumed inputs only, so the result is reached from the
/// generalized form by silent steps on the public parameter channel.
pub fn instantiate_generalized(
    generalized: &Process,
    params: &[Name],
    instances: &[Vec<String>],
) -> Result<Process, TransformError> {
    let Process::Repl(body) = generalized else {
        return Err(TransformError::UnreachableParameter("<replication>".into()));
    };
    let mut copies = Vec::new();
    for (index, inst) in instances.iter().enumerate() {
        if inst.len() != params.len() {
            return Err(TransformError::InstanceArity {
                index,
                expected: params.len(),
                got: inst.len(),
            });
        }
        let mut pending: Vec<(Name, Term)> = params
            .iter()
            .cloned()
            .zip(inst.iter().map(|v| Term::public(v)))
            .collect();
        let p = feed(body, &mut pending);
        if let Some((v, _)) = pending.first() {
            return Err(TransformError::UnreachableParameter(v.to_string()));
        }
        copies.push(p);
    }
    Ok(Process::par_all(copies))
}

fn feed(p: &Process, pending: &mut Vec<(Name, Term)>) -> Process {
    match p {
        Process::In(ch, x, body) if *ch == Term::public(PARAM_CHANNEL) => {
            match pending.iter().position(|(v, _)| v == x) {
                Some(k) => {
                    let (_, value) = pending.remove(k);
                    feed(&body.subst_var(x, &value), pending)
                }
                None => p.clone(),
            }
        }
        Process::New(n, body) => Process::New(n.clone(), Arc::new(feed(body, pending))),
        Process::Par(a, b) => {
            let a = feed(a, pending);
            Process::Par(Arc::new(a), Arc::new(feed(b, pending)))
        }
        _ => p.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::picalc::parse_process;

    fn th() -> Theory {
        Theory::shipped()
    }

    /// Parses `src` with `params` as variables.
    fn tpl(params: &str, src: &str) -> Process {
        let ts =
            crate::picalc::parse_templates(&format!("template t({params}) = {src} end")).unwrap();
        ts[0].body.clone()
    }

    fn b4() -> Bounds {
        Bounds::new(4, 2, 2)
    }

    #[test]
    fn generalize_event_family() {
        let f = ParallelFamily::new(
            tpl("v", "event F(v)"),
            vec!["v".into()],
            vec![vec!["a".into()], vec!["b".into()]],
        );
        let g = generalize_family(&f).unwrap();
        assert!(g.alpha_eq(&parse_process("!in(c, v); event F(v)").unwrap()));
        let inc = check_inclusion(&f.expand().unwrap(), &g, &th(), b4(), ExecMode::Sequential);
        assert!(inc.included, "{inc:?}");
    }

    #[test]
    fn generalize_rejects_escape() {
        let f = ParallelFamily::new(tpl("w", "in(c, y); event F(y, w)"), vec![], vec![]);
        assert_eq!(
            generalize_family(&f),
            Err(TransformError::FreeVariableEscape("w".into()))
        );
    }

    #[test]
    fn empty_family_trivially_included() {
        let t = tpl("v", "event F(v)");
        let f = ParallelFamily::new(t, vec!["v".into()], vec![]);
        let inc = check_inclusion(
            &f.expand().unwrap(),
            &generalize_family(&f).unwrap(),
            &th(),
            b4(),
            ExecMode::Sequential,
        );
        assert!(inc.included);
        assert_eq!(inc.traces_checked, 1);
    }

    #[test]
    fn hoist_example() {
        let q = parse_process("out(c, a) | in(c, x); event F(x)").unwrap();
        let h = hoist_input(&q, "x").unwrap();
        assert!(h.alpha_eq(&parse_process("in(c, x); (out(c, a) | event F(x))").unwrap()));
        assert!(check_inclusion(&h, &q, &th(), b4(), ExecMode::Sequential).included);
    }

    #[test]
    fn push_is_inverse_of_hoist_here() {
        let h = parse_process("in(c, x); (out(c, a) | event F(x))").unwrap();
        let p = push_input(&h, "x").unwrap();
        assert!(p.alpha_eq(&parse_process("out(c, a) | in(c, x); event F(x)").unwrap()));
        assert!(check_inclusion(&h, &p, &th(), b4(), ExecMode::Sequential).included);
    }

    #[test]
    fn no_input_unchanged() {
        let q = parse_process("event A(a); out(c, b)").unwrap();
        assert_eq!(push_input(&q, "x").unwrap(), q);
        assert_eq!(hoist_input(&q, "x").unwrap(), q);
    }

    #[test]
    fn scope_violations() {
        let q = parse_process("new k; in(k, x); event F(x)").unwrap();
        assert_eq!(
            hoist_input(&q, "x"),
            Err(TransformError::ScopeViolation("x".into()))
        );
        let q = parse_process("in(c, y); in(y, x); event F(x)").unwrap();
        assert_eq!(
            hoist_input(&q, "x"),
            Err(TransformError::ScopeViolation("x".into()))
        );
        let q = parse_process("!in(c, x); event F(x)").unwrap();
        assert_eq!(
            hoist_input(&q, "x"),
            Err(TransformError::ScopeViolation("x".into()))
        );
    }

    #[test]
    fn multiple_binders() {
        let q = parse_process("in(c, x); event A(x) | in(c, x); event B(x)").unwrap();
        assert_eq!(
            push_input(&q, "x"),
            Err(TransformError::MultipleBinders("x".into()))
        );
    }

    #[test]
    fn inclusion_counterexample() {
        let inc = check_inclusion(
            &parse_process("event A(a)").unwrap(),
            &parse_process("event B(a)").unwrap(),
            &th(),
            b4(),
            ExecMode::Sequential,
        );
        assert!(!inc.included);
        assert_eq!(
            inc.counterexample,
            Some(vec![Term::app("A", vec![Term::public("a")])])
        );
        let p = parse_process("in(c, x); event A(x)").unwrap();
        assert!(check_inclusion(&p, &p, &th(), b4(), ExecMode::Sequential).included);
    }

    #[test]
    fn instantiation_undoes_generalization() {
        let t = tpl("v, w", "new s; out(c, s); event F(v, w)");
        let f = ParallelFamily::new(
            t,
            vec!["v".into(), "w".into()],
            vec![vec!["a".into(), "b".into()], vec!["b".into(), "a".into()]],
        );
        let g = push_all(&generalize_family(&f).unwrap());
        let c0 = instantiate_generalized(&g, &f.params, &f.instances).unwrap();
        assert!(c0.alpha_eq(&f.expand().unwrap()));
    }
}
