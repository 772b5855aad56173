//! Independent oracles and random generators shared by the test suites.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use symsound::exec::ExecMode;
use symsound::picalc::{
    deduce, parse_process, parse_templates, Bounds, Frame, Process, Term, Theory,
};
use symsound::planner::{
    extract_plan, reachable_fixpoint, replay, Action, PlanOutcome, PlanningTask, Predicate,
};
use symsound::transforms::{
    check_inclusion, generalize_family, hoist_input, push_input, ParallelFamily,
};

pub fn pred(i: usize) -> Predicate {
    Predicate::c(&format!("p{i}"))
}

/// Union of every state reached by breadth-first search over sets of
/// predicates, applying one action at a time.
pub fn bfs_reachable(t: &PlanningTask) -> BTreeSet<Predicate> {
    let mut seen = BTreeSet::from([t.initial.clone()]);
    let mut queue = VecDeque::from([t.initial.clone()]);
    while let Some(s) = queue.pop_front() {
        for a in &t.actions {
            if a.pre.is_subset(&s) {
                let mut next = s.clone();
                next.extend(a.post.iter().cloned());
                if seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
        }
    }
    seen.into_iter().flatten().collect()
}

pub fn random_task(rng: &mut StdRng) -> PlanningTask {
    let n = rng.gen_range(1..=12);
    let initial = (0..n).filter(|_| rng.gen_bool(0.2)).map(pred).collect();
    let actions = (0..rng.gen_range(0..=20))
        .map(|k| {
            let pre: Vec<Predicate> = (0..rng.gen_range(0..=3))
                .map(|_| pred(rng.gen_range(0..n)))
                .collect();
            Action::new(format!("a{k}"), pre, pred(rng.gen_range(0..n)))
        })
        .collect();
    PlanningTask::from_parts(initial, actions)
}

pub fn subterms(t: &Term, out: &mut BTreeSet<Term>) {
    out.insert(t.clone());
    if let Term::App(_, args) = t {
        for a in args.iter() {
            subterms(a, out);
        }
    }
}

fn head(t: &Term) -> Option<&str> {
    match t {
        Term::App(f, _) => Some(f),
        _ => None,
    }
}

/// Forward closure over the subterms of the frame and the goal: start from
/// the outputs and the names the adversary knows, then apply public
/// constructors and every destructor to known arguments until nothing new
/// appears.
pub fn naive_deduce(frame: &Frame, goal: &Term, th: &Theory) -> bool {
    let mut universe = BTreeSet::new();
    for t in frame.outputs.iter().chain(std::iter::once(goal)) {
        subterms(t, &mut universe);
    }
    let mut known: BTreeSet<Term> = frame.outputs.iter().cloned().collect();
    for u in &universe {
        match u {
            Term::Pub(_) => {
                known.insert(u.clone());
            }
            Term::Fresh(n) if !frame.names.contains(n) => {
                known.insert(u.clone());
            }
            _ => {}
        }
    }
    loop {
        let mut learned = Vec::new();
        for u in &universe {
            if let Term::App(f, args) = u {
                if th.is_public_constructor(f)
                    && !known.contains(u)
                    && args.iter().all(|a| known.contains(a))
                {
                    learned.push(u.clone());
                }
            }
        }
        for d in th.destructors() {
            let mut slots: Vec<Vec<&Term>> = vec![Vec::new(); d.arity];
            for (i, slot) in slots.iter_mut().enumerate() {
                let heads: BTreeSet<Option<&str>> =
                    d.rules.iter().map(|r| head(&r.lhs[i])).collect();
                slot.extend(
                    known
                        .iter()
                        .filter(|k| heads.contains(&None) || heads.contains(&head(k))),
                );
            }
            let mut idx = vec![0usize; d.arity];
            if slots.iter().any(Vec::is_empty) {
                continue;
            }
            loop {
                let args: Vec<Term> = idx.iter().zip(&slots).map(|(&i, s)| s[i].clone()).collect();
                if let Some(r) = th.apply(&d.name, &args) {
                    if !known.contains(&r) {
                        learned.push(r);
                    }
                }
                let mut k = 0;
                while k < d.arity {
                    idx[k] += 1;
                    if idx[k] < slots[k].len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == d.arity {
                    break;
                }
            }
        }
        if learned.is_empty() {
            return known.contains(goal);
        }
        for t in learned {
            subterms(&t, &mut universe);
            known.insert(t);
        }
    }
}

const CONSTRUCTORS: [(&str, usize); 11] = [
    ("pair", 2),
    ("senc", 2),
    ("req_packet", 2),
    ("ans_packet", 2),
    ("k", 4),
    ("ckey", 1),
    ("rtok", 2),
    ("tls", 3),
    ("nsforge", 2),
    ("resforge", 3),
    ("sk", 1),
];

fn atom(rng: &mut StdRng) -> Term {
    match rng.gen_range(0..5) {
        0 => Term::public("a"),
        1 => Term::public("b"),
        2 => Term::fresh("n1"),
        3 => Term::fresh("n2"),
        _ => Term::fresh("n3"),
    }
}

pub fn term(rng: &mut StdRng, depth: usize) -> Term {
    if depth <= 1 || rng.gen_bool(0.3) {
        return atom(rng);
    }
    let (f, n) = CONSTRUCTORS[rng.gen_range(0..CONSTRUCTORS.len())];
    Term::app(f, (0..n).map(|_| term(rng, depth - 1)).collect())
}

pub fn frame(rng: &mut StdRng) -> Frame {
    let mut f = Frame::new();
    for n in ["n1", "n2", "n3"] {
        if rng.gen_bool(0.6) {
            f = f.restrict(n);
        }
    }
    for _ in 0..rng.gen_range(1..=3) {
        f = f.output(term(rng, 4));
    }
    f
}

const VALUES: [&str; 3] = ["a", "b", "d"];

fn arg(rng: &mut StdRng, vars: &[String]) -> String {
    let v = vars.choose(rng).cloned().unwrap_or_else(|| "a".into());
    match rng.gen_range(0..5) {
        0 => "a".into(),
        1 => "b".into(),
        2 => format!("pair({v}, a)"),
        3 => format!("senc({v}, b)"),
        _ => v,
    }
}

/// A straight-line body of one to three actions over `vars`.
fn body(rng: &mut StdRng, vars: &mut Vec<String>, tag: &str) -> String {
    let n = rng.gen_range(1..=3);
    let mut steps = Vec::new();
    for k in 0..n {
        let step = match rng.gen_range(0..4) {
            0 => {
                let name = format!("n{tag}{k}");
                vars.push(name.clone());
                format!("new {name}")
            }
            1 => format!("out(c, {})", arg(rng, vars)),
            _ => format!("event E{}({})", rng.gen_range(0..3), arg(rng, vars)),
        };
        steps.push(step);
    }
    if steps.last().is_some_and(|s| s.starts_with("new")) {
        steps.push(format!("event E0({})", arg(rng, vars)));
    }
    steps.join("; ")
}

pub fn random_family(rng: &mut StdRng) -> ParallelFamily {
    let params: Vec<String> = ["v", "w"][..rng.gen_range(1..=2)]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut vars = params.clone();
    let mut src = String::new();
    if rng.gen_bool(0.4) {
        src.push_str("in(c, y); ");
        vars.push("y".into());
    }
    src.push_str(&body(rng, &mut vars, "t"));
    let t = parse_templates(&format!("template t({}) = {src} end", params.join(", "))).unwrap();
    let instances = (0..rng.gen_range(1..=3))
        .map(|_| {
            params
                .iter()
                .map(|_| VALUES.choose(rng).unwrap().to_string())
                .collect()
        })
        .collect();
    ParallelFamily::new(
        t[0].body.clone(),
        params.iter().map(|p| p.as_str().into()).collect(),
        instances,
    )
}

/// `side | prefix; in(c, x); rest(x)`.
pub fn random_relocatable(rng: &mut StdRng) -> Process {
    let side = body(rng, &mut vec![], "s");
    let prefix = if rng.gen_bool(0.5) {
        format!("{}; ", body(rng, &mut vec![], "p"))
    } else {
        String::new()
    };
    let rest = body(rng, &mut vec!["x".into()], "r");
    let src = if rng.gen_bool(0.5) {
        format!("{side} | {prefix}in(c, x); {rest}")
    } else {
        format!("{prefix}in(c, x); {rest} | {side}")
    };
    parse_process(&src).unwrap()
}

/// Compares the fixpoint with subset search on `n` random tasks and replays
/// every extracted plan. Returns how many tasks reached beyond their
/// initial state.
pub fn check_fixpoints(seed: u64, n: usize) -> Result<usize, String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut nontrivial = 0;
    for _ in 0..n {
        let t = random_task(&mut rng);
        let fix = reachable_fixpoint(&t);
        if fix != bfs_reachable(&t) {
            return Err(format!("fixpoint differs on {}", t.to_json()));
        }
        if fix.len() > t.initial.len() {
            nontrivial += 1;
        }
        for g in &t.predicates {
            let ok = match extract_plan(&t, g).map_err(|e| e.to_string())? {
                PlanOutcome::Plan(p) => replay(&t, &p).is_ok_and(|s| s.contains(g)),
                PlanOutcome::Unreachable => !fix.contains(g),
            };
            if !ok {
                return Err(format!("bad plan for {g} in {}", t.to_json()));
            }
        }
    }
    Ok(nontrivial)
}

/// Compares `deduce` with the forward closure on `n` random frames, for
/// every subterm of the frame and one random goal. Returns the number of
/// derivable and underivable goals.
pub fn check_deduction(seed: u64, n: usize) -> Result<(usize, usize), String> {
    let th = Theory::shipped();
    let mut rng = StdRng::seed_from_u64(seed);
    let (mut yes, mut no) = (0, 0);
    for _ in 0..n {
        let f = frame(&mut rng);
        let mut goals = BTreeSet::new();
        for o in &f.outputs {
            subterms(o, &mut goals);
        }
        goals.insert(term(&mut rng, 3));
        for g in &goals {
            let expected = naive_deduce(&f, g, &th);
            if deduce(&f, g, &th) != expected {
                return Err(format!(
                    "frame {:?} goal {g}: oracle says {expected}",
                    f.outputs
                ));
            }
            if expected {
                yes += 1;
            } else {
                no += 1;
            }
        }
    }
    Ok((yes, no))
}

/// Checks that each of `n` random families is included in its
/// generalization at depth 4.
pub fn check_families(seed: u64, n: usize) -> Result<usize, String> {
    let th = Theory::shipped();
    let mut rng = StdRng::seed_from_u64(seed);
    for _ in 0..n {
        let f = random_family(&mut rng);
        let expanded = f.expand().map_err(|e| e.to_string())?;
        let general = generalize_family(&f).map_err(|e| e.to_string())?;
        // the replicated side must be allowed one copy per instance
        let b = Bounds::new(4, f.instances.len(), 2);
        let inc = check_inclusion(&expanded, &general, &th, b, ExecMode::Sequential);
        if !inc.included {
            return Err(format!(
                "{expanded:?} not in {general:?}: {:?}",
                inc.counterexample
            ));
        }
    }
    Ok(n)
}

/// Hoists the input of `n` random processes and pushes it back, checking
/// both inclusions at depth 4. Returns how many processes admitted the
/// hoist.
pub fn check_relocations(seed: u64, n: usize) -> Result<usize, String> {
    let th = Theory::shipped();
    let b = Bounds::new(4, 2, 2);
    let mut rng = StdRng::seed_from_u64(seed);
    let mut checked = 0;
    for _ in 0..n {
        let q = random_relocatable(&mut rng);
        let Ok(hoisted) = hoist_input(&q, "x") else {
            continue;
        };
        let inc = check_inclusion(&hoisted, &q, &th, b, ExecMode::Sequential);
        if !inc.included {
            return Err(format!("hoisting {q:?}: {:?}", inc.counterexample));
        }
        let pushed = push_input(&hoisted, "x").map_err(|e| e.to_string())?;
        let inc = check_inclusion(&hoisted, &pushed, &th, b, ExecMode::Sequential);
        if !inc.included {
            return Err(format!("pushing {hoisted:?}: {:?}", inc.counterexample));
        }
        checked += 1;
    }
    Ok(checked)
}
