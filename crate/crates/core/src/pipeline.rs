//! End-to-end analysis of one graph: grounding, condition checks, protocol
//! enumeration, soundness verdict, query emission and the report bundle.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::{
    check_cc1, check_cs1, check_cs2, check_cs3_set, check_cs4, check_cs5, check_soundness,
    Condition, ConditionError, ConditionReport, EventMap, SigmaCap, SoundnessVerdict, VerdictKind,
};
use crate::email::{
    compile_families, instantiate_over_approximation, over_approximation, EmailConfig, EmailError,
    EventAlphabet,
};
use crate::exec::ExecMode;
use crate::graph::{load_graph, load_graph_file, GraphError, PropertyGraph};
use crate::picalc::{
    parse_process, Bounds, Enumerator, Process, Semantics, Term, Theory, TraceSet,
};
use crate::planner::{
    extract_plan, ground, PlanError, PlanOutcome, PlanningTask, Predicate, RuleSet,
};
use crate::queries::{emit_queries, partition_actions, Level, QueryError};
use crate::transforms::{check_inclusion_of, Inclusion, TransformError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("graph: {0}")]
    Graph(#[from] GraphError),
    #[error("planner: {0}")]
    Plan(#[from] PlanError),
    #[error("conditions: {0}")]
    Conditions(#[from] ConditionError),
    #[error("email model: {0}")]
    Email(#[from] EmailError),
    #[error("transforms: {0}")]
    Transform(#[from] TransformError),
    #[error("queries: {0}")]
    Query(#[from] QueryError),
    #[error("witness: {0}")]
    Witness(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundsSpec {
    pub depth: usize,
    #[serde(default = "default_replication")]
    pub replication: usize,
    #[serde(default = "default_message_depth")]
    pub message_depth: usize,
}

fn default_replication() -> usize {
    2
}

fn default_message_depth() -> usize {
    3
}

impl From<BoundsSpec> for Bounds {
    fn from(b: BoundsSpec) -> Bounds {
        Bounds::new(b.depth, b.replication, b.message_depth)
    }
}

/// Analysis configuration. Relative paths are resolved against the
/// directory of the manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub graph: PathBuf,
    pub attacker: Vec<String>,
    #[serde(default)]
    pub defender: Vec<String>,
    /// Shared-alphabet selection; all symbols when absent.
    #[serde(default)]
    pub sigma: Option<String>,
    pub bounds: BoundsSpec,
    #[serde(default)]
    pub rules: RuleSet,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Also check trace inclusion in the over-approximation.
    #[serde(default)]
    pub over_approximation: bool,
    /// Conditions that decide the outcome; all are reported.
    #[serde(default = "default_checks")]
    pub checks: Vec<Condition>,
}

fn default_checks() -> Vec<Condition> {
    vec![
        Condition::CS1,
        Condition::CS2,
        Condition::CS3,
        Condition::CS4,
        Condition::CS5,
    ]
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<RunManifest, PipelineError> {
        let text = fs::read_to_string(path).map_err(io(path))?;
        let mut m: RunManifest = serde_json::from_str(&text)
            .map_err(|e| PipelineError::Manifest(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        m.graph = base.join(&m.graph);
        if let Some(o) = &m.output {
            m.output = Some(base.join(o));
        }
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let b = self.bounds;
        if b.replication == 0 || b.message_depth == 0 {
            return Err(PipelineError::Manifest(
                "replication and message depth must be positive".into(),
            ));
        }
        self.defender_set()?;
        self.sigma_cap()?;
        Ok(())
    }

    pub fn defender_set(&self) -> Result<BTreeSet<Predicate>, PipelineError> {
        self.defender
            .iter()
            .map(|s| {
                s.parse()
                    .map_err(|e| PipelineError::Manifest(format!("defender predicate `{s}`: {e}")))
            })
            .collect()
    }

    pub fn sigma_cap(&self) -> Result<SigmaCap, PipelineError> {
        match &self.sigma {
            None => Ok(SigmaCap::default()),
            Some(s) => Ok(SigmaCap::parse(s)?),
        }
    }

    pub fn config(&self) -> Result<EmailConfig, PipelineError> {
        Ok(EmailConfig {
            attacker: self.attacker.iter().cloned().collect(),
            defender: self.defender_set()?,
        })
    }
}

/// The grounded and compiled model of a manifest.
pub struct Model {
    pub graph: PropertyGraph,
    pub task: PlanningTask,
    pub process: Process,
    pub sigma: SigmaCap,
    pub bounds: Bounds,
}

impl Model {
    pub fn build(m: &RunManifest, graph: PropertyGraph) -> Result<Model, PipelineError> {
        m.validate()?;
        let cfg = m.config()?;
        let task = ground(&graph, &cfg.attacker, &cfg.defender, m.rules)?.prune_unproducible();
        let process = compile_families(&graph, &cfg)?.process();
        Ok(Model {
            graph,
            task,
            process,
            sigma: m.sigma_cap()?,
            bounds: m.bounds.into(),
        })
    }

    pub fn semantics<'a>(&self, th: &'a Theory, depth: usize) -> Semantics<'a> {
        Semantics::new(
            th,
            Bounds {
                depth,
                ..self.bounds
            },
        )
        .with_quiet(EventAlphabet::BOOKKEEPING)
    }
}

/// A protocol trace for which the planning model has no counterpart,
/// together with everything needed to check it again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub kind: String,
    pub manifest: RunManifest,
    pub graph: serde_json::Value,
    pub trace: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Replay {
    pub realizable: bool,
    pub unsound: bool,
}

impl Replay {
    pub fn confirmed(&self) -> bool {
        self.realizable && self.unsound
    }
}

fn parse_event(s: &str) -> Result<Term, PipelineError> {
    match parse_process(&format!("event {s}")) {
        Ok(Process::Event(t, _)) => Ok(t),
        _ => Err(PipelineError::Witness(format!("not an event: `{s}`"))),
    }
}

/// Rebuilds the model of a witness, checks that its process performs the
/// trace and that the trace alone is still unsound.
pub fn replay_witness(w: &Witness, th: &Theory) -> Result<Replay, PipelineError> {
    let graph = load_graph(w.graph.to_string().as_bytes())?;
    let model = Model::build(&w.manifest, graph)?;
    let trace: Vec<Term> = w
        .trace
        .iter()
        .map(|s| parse_event(s))
        .collect::<Result<_, _>>()?;
    let e = Enumerator::new(model.semantics(th, trace.len()), ExecMode::Sequential);
    let realizable = e.realizes(&model.process, &trace);
    let single = TraceSet::from_traces([&trace]);
    let verdict = check_soundness(
        &model.task,
        &single,
        &model.sigma,
        &EventMap::shipped(),
        None,
    )?;
    Ok(Replay {
        realizable,
        unsound: verdict.kind == VerdictKind::Unsound,
    })
}

pub fn replay_witness_file(path: &Path, th: &Theory) -> Result<Replay, PipelineError> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    let w: Witness = serde_json::from_str(&text)
        .map_err(|e| PipelineError::Witness(format!("{}: {e}", path.display())))?;
    replay_witness(&w, th)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanDump {
    pub goal: String,
    pub plan: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub rules: RuleSet,
    pub bounds: Bounds,
    pub actions: usize,
    pub traces: usize,
    pub states: usize,
    pub conditions: Vec<(String, String, bool)>,
    pub soundness: VerdictKind,
    pub inclusion: Option<bool>,
    pub witnesses: usize,
    pub warnings: Vec<String>,
    pub passed: bool,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub reports: Vec<ConditionReport>,
    pub soundness: SoundnessVerdict,
    pub inclusion: Option<Inclusion>,
    pub plans: Vec<PlanDump>,
    pub schema_queries: String,
    pub ground_queries: String,
    pub witnesses: Vec<Witness>,
    pub summary: Summary,
}

impl ReportBundle {
    pub fn passed(&self) -> bool {
        self.summary.passed
    }

    pub fn report(&self, c: Condition) -> Option<&ConditionReport> {
        self.reports.iter().find(|r| r.condition == c)
    }

    pub fn summary_text(&self) -> String {
        let s = &self.summary;
        let mut out = format!(
            "rules {:?}, bounds depth {} replication {} message depth {}\n{} actions, {} traces, {} states\n",
            s.rules, s.bounds.depth, s.bounds.repl, s.bounds.msg_depth, s.actions, s.traces, s.states
        );
        for (c, v, decides) in &s.conditions {
            let note = if *decides { "" } else { " (reported only)" };
            out.push_str(&format!("{c:<5} {v}{note}\n"));
        }
        out.push_str(&format!("soundness {:?}\n", s.soundness).to_lowercase());
        if let Some(i) = s.inclusion {
            out.push_str(&format!("over-approximation inclusion {i}\n"));
        }
        for w in &s.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out.push_str(if s.passed { "PASS\n" } else { "FAIL\n" });
        out
    }

    /// Writes the bundle; file contents depend only on the manifest.
    pub fn write(&self, dir: &Path) -> Result<(), PipelineError> {
        let put = |name: &str, text: &str| -> Result<(), PipelineError> {
            let p = dir.join(name);
            if let Some(parent) = p.parent() {
                fs::create_dir_all(parent).map_err(io(parent))?;
            }
            fs::write(&p, text).map_err(io(&p))
        };
        for r in &self.reports {
            put(
                &format!("conditions/{:?}.json", r.condition).to_lowercase(),
                &r.to_json(),
            )?;
        }
        put("soundness.json", &self.soundness.to_json())?;
        if let Some(i) = &self.inclusion {
            put("inclusion.json", &json(i))?;
        }
        put("plans.json", &json(&self.plans))?;
        put("queries/schema.pv", &self.schema_queries)?;
        put("queries/ground.pv", &self.ground_queries)?;
        for (k, w) in self.witnesses.iter().enumerate() {
            put(&format!("witnesses/{k:03}-{}.json", w.kind), &json(w))?;
        }
        put("summary.json", &json(&self.summary))?;
        put("summary.txt", &self.summary_text())
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serialization is infallible") + "\n"
}

/// Runs every stage on an already loaded graph.
pub fn run_on(
    m: &RunManifest,
    graph: PropertyGraph,
    th: &Theory,
    mode: ExecMode,
) -> Result<ReportBundle, PipelineError> {
    let model = Model::build(m, graph)?;
    let map = EventMap::shipped();
    let (t, s, bounds) = (&model.task, &model.sigma, model.bounds);
    let mut warnings = Vec::new();
    if bounds.depth == 0 {
        warnings.push("depth 0: dynamic checks hold vacuously".to_string());
    }

    let mut reports = vec![check_cs1(t), check_cs2(t, s)?, check_cs4(t, s)];
    let e = Enumerator::new(model.semantics(th, bounds.depth), mode);
    let traces = e.traces(&model.process);
    reports.push(check_cs3_set(&traces).with_bound(bounds));
    reports.push(check_cs5(t, &traces, s, &map)?.with_bound(bounds));
    reports.push(check_cc1(t, &traces, bounds.depth, s, &map).with_bound(bounds));
    let soundness = check_soundness(t, &traces, s, &map, None)?.with_bound(bounds);

    let inclusion = if m.over_approximation {
        let compiled = compile_families(&model.graph, &m.config()?)?;
        let p = instantiate_over_approximation(&over_approximation(), &compiled)?;
        Some(check_inclusion_of(&traces, &e, &p))
    } else {
        None
    };

    let mut witnesses = Vec::new();
    if let Some(cex) = &soundness.counterexample {
        let mut manifest = m.clone();
        manifest.output = None;
        manifest.graph = PathBuf::from(m.graph.file_name().unwrap_or_default());
        witnesses.push(Witness {
            kind: "unsound".into(),
            manifest,
            graph: serde_json::from_str(&model.graph.to_json()).expect("graph json"),
            trace: cex.clone(),
        });
    }

    let mut plans = Vec::new();
    for goal in &t.goals {
        let plan = match extract_plan(t, goal)? {
            PlanOutcome::Plan(p) => Some(p),
            PlanOutcome::Unreachable => None,
        };
        plans.push(PlanDump {
            goal: goal.to_string(),
            plan,
        });
    }
    let partition = partition_actions(t, s)?;
    let schema_queries = emit_queries(&partition, Level::Schema, &model.graph, &map);
    let ground_queries = emit_queries(&partition, Level::Ground, &model.graph, &map);

    let passed = reports
        .iter()
        .filter(|r| m.checks.contains(&r.condition))
        .all(ConditionReport::passed)
        && soundness.kind == VerdictKind::Sound
        && inclusion.as_ref().is_none_or(|i| i.included);
    let summary = Summary {
        rules: m.rules,
        bounds,
        actions: t.actions.len(),
        traces: traces.len(),
        states: e.states(),
        conditions: reports
            .iter()
            .map(|r| {
                let verdict = serde_json::to_value(r.verdict).expect("verdict");
                (
                    format!("{:?}", r.condition),
                    verdict.as_str().unwrap_or("").to_string(),
                    m.checks.contains(&r.condition),
                )
            })
            .collect(),
        soundness: soundness.kind,
        inclusion: inclusion.as_ref().map(|i| i.included),
        witnesses: witnesses.len(),
        warnings,
        passed,
    };
    Ok(ReportBundle {
        reports,
        soundness,
        inclusion,
        plans,
        schema_queries,
        ground_queries,
        witnesses,
        summary,
    })
}

/// Loads the manifest's graph, runs, and writes the bundle to the output
/// directory when one is set.
pub fn run(m: &RunManifest, th: &Theory, mode: ExecMode) -> Result<ReportBundle, PipelineError> {
    let graph = load_graph_file(&m.graph)?;
    let bundle = run_on(m, graph, th, mode)?;
    if let Some(dir) = &m.output {
        bundle.write(dir)?;
    }
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::PropertyGraph;

    fn manifest(depth: usize) -> RunManifest {
        RunManifest {
            graph: "g.json".into(),
            attacker: vec![],
            defender: vec![],
            sigma: None,
            bounds: BoundsSpec {
                depth,
                replication: 2,
                message_depth: 3,
            },
            rules: RuleSet::Corrected,
            output: None,
            over_approximation: true,
            checks: default_checks(),
        }
    }

    #[test]
    fn empty_graph_is_vacuously_sound() {
        let b = run_on(
            &manifest(0),
            PropertyGraph::new(),
            &Theory::shipped(),
            ExecMode::Sequential,
        )
        .unwrap();
        assert!(b.passed());
        assert_eq!(b.summary.warnings.len(), 1);
        assert_eq!(b.summary.traces, 1);
        assert_eq!(b.inclusion.as_ref().map(|i| i.included), Some(true));
    }

    #[test]
    fn manifest_rejects_bad_fields() {
        let mut m = manifest(1);
        m.bounds.replication = 0;
        assert!(matches!(m.validate(), Err(PipelineError::Manifest(_))));
        let mut m = manifest(1);
        m.defender = vec!["bogus(".into()];
        assert!(m.validate().is_err());
        assert!(serde_json::from_str::<RunManifest>(
            r#"{"graph":"g","attacker":[],"bounds":{"depth":1},"x":1}"#
        )
        .is_err());
        let m: RunManifest = serde_json::from_str(
            r#"{"graph":"g","attacker":["US"],"bounds":{"depth":4},"rules":"legacy"}"#,
        )
        .unwrap();
        assert_eq!(
            (m.rules, m.bounds.replication, m.bounds.message_depth),
            (RuleSet::Legacy, 2, 3)
        );
    }

    #[test]
    fn events_parse_back() {
        let t = parse_event("C_ip(\"64.233.167.26\")").unwrap();
        assert_eq!(t.to_string(), "C_ip(\"64.233.167.26\")");
    }
}
