use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use symsound::conditions::{
    check_cc1, check_cs1, check_cs2, check_cs3_set, check_cs4, check_cs5, check_soundness,
    Condition, ConditionReport, EventMap, VerdictKind,
};
use symsound::email::{
    compile_families, derived_over_approximation, instantiate_over_approximation,
    over_approximation,
};
use symsound::exec::ExecMode;
use symsound::graph::{load_graph_file, EdgeKind};
use symsound::picalc::{print_process, Enumerator, Theory};
use symsound::pipeline::{replay_witness_file, run, BoundsSpec, Model, RunManifest};
use symsound::planner::{
    extract_plan, fixpoint_layers, reachable_fixpoint, total_reward, PlanOutcome, Predicate,
    RuleSet,
};
use symsound::queries::{emit_queries, partition_actions, Level};
use symsound::transforms::check_inclusion_of;

#[derive(Parser)]
#[command(
    name = "symsound",
    version,
    about = "Infrastructure attacker models checked against an email protocol model"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate a property graph and print its size.
    Load { graph: PathBuf },
    /// Print the grounded planning task as JSON.
    Ground(Opts),
    /// Print a relaxed plan for each goal, or for one goal.
    Plan {
        #[command(flatten)]
        opts: Opts,
        #[arg(long)]
        goal: Option<String>,
    },
    /// Print the fixpoint layers of the planning task.
    Fixpoint(Opts),
    /// Total reward of the goals reachable by the attacker.
    Reward(Opts),
    /// Check conditions and print one JSON report per condition.
    Check {
        #[command(flatten)]
        opts: Opts,
        /// Comma-separated list, e.g. cs1,cs2,cs4.
        #[arg(long, default_value = "cs1,cs2,cs3,cs4,cs5")]
        conditions: String,
    },
    /// Print the compiled protocol process.
    Compile {
        #[command(flatten)]
        opts: Opts,
        #[arg(long)]
        dump_process: Option<PathBuf>,
    },
    /// Enumerate and print the maximal protocol traces.
    Traces(Opts),
    /// Soundness verdict at the enumeration bound.
    Soundness(Opts),
    /// Print the over-approximation, or check that the graph's process is included in it.
    Transform {
        #[command(flatten)]
        opts: Opts,
        /// Derive the over-approximation from the role templates instead of printing the shipped one.
        #[arg(long)]
        derive: bool,
        #[arg(long)]
        check: bool,
    },
    /// Emit verifier queries for the postcondition classes.
    EmitQueries {
        #[command(flatten)]
        opts: Opts,
        #[arg(long, default_value = "schema")]
        level: Level,
    },
    /// Full pipeline; writes the report bundle and exits non-zero unless every check passes.
    Run(Opts),
    /// Check a witness file again from scratch.
    Replay { witness: PathBuf },
}

#[derive(Args, Clone, Default)]
struct Opts {
    /// Manifest file; flags given here override its fields.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Attacker countries, comma-separated.
    #[arg(long, value_delimiter = ',')]
    attacker: Option<Vec<String>>,
    /// Defender predicates, e.g. nDNSSEC(a.com); repeatable.
    #[arg(long)]
    defender: Vec<String>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    replication: Option<usize>,
    #[arg(long)]
    message_depth: Option<usize>,
    /// Use the rule set without r_init-ip and with nDNSSEC in r_dns-route-res.
    #[arg(long)]
    legacy_rules: bool,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    over_approximation: bool,
    /// Single-threaded enumeration.
    #[arg(long)]
    sequential: bool,
}

impl Opts {
    fn manifest(&self) -> Result<RunManifest> {
        let mut m = match &self.manifest {
            Some(p) => RunManifest::load(p)?,
            None => RunManifest {
                graph: self
                    .graph
                    .clone()
                    .context("either --manifest or --graph is required")?,
                attacker: Vec::new(),
                defender: Vec::new(),
                sigma: None,
                bounds: BoundsSpec {
                    depth: 4,
                    replication: 2,
                    message_depth: 3,
                },
                rules: RuleSet::Corrected,
                output: None,
                over_approximation: false,
                checks: vec![
                    Condition::CS1,
                    Condition::CS2,
                    Condition::CS3,
                    Condition::CS4,
                    Condition::CS5,
                ],
            },
        };
        if let Some(g) = &self.graph {
            m.graph = g.clone();
        }
        if let Some(a) = &self.attacker {
            m.attacker = a.clone();
        }
        if !self.defender.is_empty() {
            m.defender = self.defender.clone();
        }
        if self.sigma.is_some() {
            m.sigma = self.sigma.clone();
        }
        if let Some(d) = self.depth {
            m.bounds.depth = d;
        }
        if let Some(r) = self.replication {
            m.bounds.replication = r;
        }
        if let Some(d) = self.message_depth {
            m.bounds.message_depth = d;
        }
        if self.legacy_rules {
            m.rules = RuleSet::Legacy;
        }
        if self.output.is_some() {
            m.output = self.output.clone();
        }
        m.over_approximation |= self.over_approximation;
        m.validate()?;
        Ok(m)
    }

    fn model(&self) -> Result<(RunManifest, Model)> {
        let m = self.manifest()?;
        let g = load_graph_file(&m.graph)?;
        let model = Model::build(&m, g)?;
        Ok((m, model))
    }

    fn mode(&self) -> ExecMode {
        if self.sequential {
            ExecMode::Sequential
        } else {
            ExecMode::best()
        }
    }
}

fn print_reports(reports: &[ConditionReport]) -> bool {
    for r in reports {
        println!("{}", r.to_json());
    }
    reports.iter().all(ConditionReport::passed)
}

fn parse_conditions(s: &str) -> Result<Vec<Condition>> {
    s.split(',')
        .filter(|c| !c.trim().is_empty())
        .map(|c| c.trim().parse::<Condition>().map_err(anyhow::Error::msg))
        .collect()
}

fn status(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    let th = Theory::shipped();
    let map = EventMap::shipped();
    match cli.cmd {
        Cmd::Load { graph } => {
            let g = load_graph_file(&graph)?;
            println!("{} nodes, {} edges", g.node_count(), g.edges().len());
            for k in EdgeKind::ALL {
                let n = g.edges_of(k).count();
                if n > 0 {
                    println!("  {:<5} {n}", k.as_str());
                }
            }
        }
        Cmd::Ground(opts) => {
            let (_, model) = opts.model()?;
            println!("{}", model.task.to_json());
        }
        Cmd::Plan { opts, goal } => {
            let (_, model) = opts.model()?;
            let goals: Vec<Predicate> = match goal {
                Some(g) => vec![g.parse().map_err(anyhow::Error::msg)?],
                None => model.task.goals.iter().cloned().collect(),
            };
            for g in &goals {
                match extract_plan(&model.task, g)? {
                    PlanOutcome::Plan(p) => println!("{g}: {}", p.join(" ")),
                    PlanOutcome::Unreachable => println!("{g}: unreachable"),
                }
            }
        }
        Cmd::Fixpoint(opts) => {
            let (_, model) = opts.model()?;
            for (k, layer) in fixpoint_layers(&model.task).iter().enumerate() {
                let items: Vec<String> = layer.iter().map(|p| p.to_string()).collect();
                println!("{k}: {}", items.join(" "));
            }
        }
        Cmd::Reward(opts) => {
            let (_, model) = opts.model()?;
            println!(
                "{}",
                total_reward(&model.task, &reachable_fixpoint(&model.task))
            );
        }
        Cmd::Check { opts, conditions } => {
            let (m, model) = opts.model()?;
            let wanted = parse_conditions(&conditions)?;
            let (t, s, b) = (&model.task, &model.sigma, model.bounds);
            let dynamic = wanted
                .iter()
                .any(|c| matches!(c, Condition::CS3 | Condition::CS5 | Condition::CC1));
            let traces = dynamic.then(|| {
                Enumerator::new(model.semantics(&th, b.depth), opts.mode()).traces(&model.process)
            });
            let mut reports = Vec::new();
            for c in wanted {
                let tr = traces.as_ref();
                reports.push(match c {
                    Condition::CS1 => check_cs1(t),
                    Condition::CS2 => check_cs2(t, s)?,
                    Condition::CS4 => check_cs4(t, s),
                    Condition::CS3 => check_cs3_set(tr.expect("enumerated")).with_bound(b),
                    Condition::CS5 => check_cs5(t, tr.expect("enumerated"), s, &map)?.with_bound(b),
                    Condition::CC1 => {
                        check_cc1(t, tr.expect("enumerated"), m.bounds.depth, s, &map).with_bound(b)
                    }
                });
            }
            return Ok(status(print_reports(&reports)));
        }
        Cmd::Compile { opts, dump_process } => {
            let (_, model) = opts.model()?;
            write_or_print(
                dump_process.as_deref(),
                &format!("{}\n", print_process(&model.process)),
            )?;
        }
        Cmd::Traces(opts) => {
            let (_, model) = opts.model()?;
            let e = Enumerator::new(model.semantics(&th, model.bounds.depth), opts.mode());
            let traces = e.traces(&model.process);
            for t in traces.maximal() {
                let items: Vec<String> = t.iter().map(|x| x.to_string()).collect();
                println!("{}", items.join(" "));
            }
            eprintln!("{} traces, {} states", traces.len(), e.states());
        }
        Cmd::Soundness(opts) => {
            let (_, model) = opts.model()?;
            let traces = Enumerator::new(model.semantics(&th, model.bounds.depth), opts.mode())
                .traces(&model.process);
            let v = check_soundness(&model.task, &traces, &model.sigma, &map, None)?
                .with_bound(model.bounds);
            println!("{}", v.to_json());
            return Ok(status(v.kind == VerdictKind::Sound));
        }
        Cmd::Transform {
            opts,
            derive,
            check,
        } => {
            if !check {
                let p = if derive {
                    derived_over_approximation()
                } else {
                    over_approximation()
                };
                println!("{}", print_process(&p));
                return Ok(ExitCode::SUCCESS);
            }
            let (m, model) = opts.model()?;
            let compiled = compile_families(&model.graph, &m.config()?)?;
            let p = instantiate_over_approximation(&over_approximation(), &compiled)?;
            let e = Enumerator::new(model.semantics(&th, model.bounds.depth), opts.mode());
            let traces = e.traces(&model.process);
            let inc = check_inclusion_of(&traces, &e, &p);
            println!("{}", serde_json::to_string_pretty(&inc)?);
            return Ok(status(inc.included));
        }
        Cmd::EmitQueries { opts, level } => {
            let (_, model) = opts.model()?;
            let part = partition_actions(&model.task, &model.sigma)?;
            print!("{}", emit_queries(&part, level, &model.graph, &map));
        }
        Cmd::Run(opts) => {
            let m = opts.manifest()?;
            let bundle = run(&m, &th, opts.mode())?;
            print!("{}", bundle.summary_text());
            if let Some(dir) = &m.output {
                eprintln!("reports written to {}", dir.display());
            }
            return Ok(status(bundle.passed()));
        }
        Cmd::Replay { witness } => {
            let r = replay_witness_file(&witness, &th)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
            if !r.realizable {
                bail!("the model does not perform the witness trace");
            }
            return Ok(status(r.confirmed()));
        }
    }
    Ok(ExitCode::SUCCESS)
}
