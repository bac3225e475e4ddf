use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use slinlab_core::agreement::{
    check_conformance, explore_agreement, profile_for, random_b_schedule, run_algorithm_b, validate_agreement,
    AgreementSetup, OrderingObject,
};
use slinlab_core::algo::Mutation;
use slinlab_core::catalog::{catalog, Composition, AUXILIARY};
use slinlab_core::sched::{random_schedule, replay, run, Trace, Workload};
use slinlab_core::suite::{run_mutations, run_suite, SuiteConfig, SuiteReport, WORKERS_ENV};
use slinlab_core::Error;

const EXIT_FAIL: u8 = 1;
const EXIT_CAPACITY: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "slinlab", version, about = "Bounded exhaustive checking of strongly-linearizable constructions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check linearizability, strong linearizability and the program's
    /// other claimed properties over a workload family.
    Check {
        #[command(flatten)]
        suite: SuiteArgs,
        /// Write the trace of the first counterexample here (or of a seeded
        /// random schedule when nothing fails).
        #[arg(long)]
        emit_trace: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Rerun the checks against every mutant of a program.
    Mutate {
        #[command(flatten)]
        suite: SuiteArgs,
    },
    /// Run the set-agreement algorithm over an ordering object.
    Agreement(AgreementArgs),
    /// Re-execute a trace file and report any divergence.
    Replay {
        path: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// List the catalog.
    ListAlgorithms {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct SuiteArgs {
    /// TOML file with suite settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    program: Option<String>,
    /// Sequential type for simpleTypeFromSnapshot (maxRegister, counter, ...).
    #[arg(long)]
    spec: Option<String>,
    /// Literal workload such as `inc;inc,inc;read`, or a named one.
    #[arg(long)]
    workload: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    ops: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<i64>>,
    #[arg(long)]
    crash_budget: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    node_limit: Option<usize>,
    /// `atomic` or `nested` components.
    #[arg(long)]
    composition: Option<String>,
    #[arg(long)]
    mutation: Option<String>,
    /// Skip the strong linearizability search.
    #[arg(long)]
    no_strong: bool,
    #[arg(long)]
    fail_fast: bool,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
    /// Write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Print the JSON report instead of the summary.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct AgreementArgs {
    #[arg(long, default_value = "queue")]
    object: String,
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Proposed values, one per process; defaults to 10, 20, ...
    #[arg(long, value_delimiter = ',')]
    inputs: Option<Vec<i64>>,
    /// Explore every schedule instead of sampling.
    #[arg(long)]
    exhaustive: bool,
    #[arg(long, default_value_t = 1000)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Chance per step that the scheduled process crashes instead.
    #[arg(long, default_value_t = 0.01)]
    crash_rate: f64,
    #[arg(long, default_value_t = 400)]
    max_steps: usize,
    #[arg(long, default_value_t = 20_000_000)]
    node_limit: usize,
    /// Also brute-force the object's profile over sequential executions.
    #[arg(long)]
    conformance: bool,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

/// Why a command stopped early.
enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type CmdResult = Result<bool, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn parse_named<T: serde::de::DeserializeOwned>(what: &str, s: &str) -> Result<T, Failure> {
    serde_json::from_value(json!(s)).map_err(|_| usage(format!("unknown {what} {s:?}")))
}

impl SuiteArgs {
    fn config(&self) -> Result<SuiteConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
                let mut table: toml::Table =
                    toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
                if let Some(p) = &self.program {
                    table.insert("program".into(), p.clone().into());
                }
                table.try_into::<SuiteConfig>().map_err(|e| usage(format!("{}: {e}", path.display())))?
            }
            None => {
                SuiteConfig::new(self.program.as_deref().ok_or_else(|| usage("--program or --config is required"))?)
            }
        };
        if let Some(v) = &self.spec {
            cfg.spec = Some(v.clone());
        }
        if let Some(v) = &self.workload {
            cfg.workload = Some(v.clone());
        }
        cfg.n = self.n.unwrap_or(cfg.n);
        cfg.ops = self.ops.unwrap_or(cfg.ops);
        if let Some(v) = &self.values {
            cfg.values = v.clone();
        }
        cfg.crash_budget = self.crash_budget.unwrap_or(cfg.crash_budget);
        cfg.max_steps = self.max_steps.unwrap_or(cfg.max_steps);
        cfg.node_limit = self.node_limit.unwrap_or(cfg.node_limit);
        if let Some(c) = &self.composition {
            cfg.composition = parse_named::<Composition>("composition", c)?;
        }
        if let Some(m) = &self.mutation {
            cfg.mutation = Some(parse_named::<Mutation>("mutation", m)?);
        }
        cfg.strong &= !self.no_strong;
        cfg.fail_fast |= self.fail_fast;
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        Ok(cfg)
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    fs::write(path, text + "\n").map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Writes the report where asked; prints it or the summary.
fn emit(report: &impl Serialize, path: Option<&Path>, json: bool, summary: impl FnOnce()) -> Result<(), Failure> {
    if let Some(path) = path {
        write_json(path, report)?;
    }
    if json {
        println!("{}", serde_json::to_string_pretty(report).expect("reports serialize"));
    } else {
        summary();
    }
    Ok(())
}

fn print_suite(r: &SuiteReport) {
    let c = &r.config;
    println!(
        "{}{}: {} workloads, {} checked, {} skipped, {:.1}s",
        c.program,
        c.spec.as_deref().map(|s| format!(" ({s})")).unwrap_or_default(),
        r.workloads,
        r.items.len(),
        r.skipped,
        r.elapsed_ms as f64 / 1000.0
    );
    if r.passed() {
        println!("all properties hold");
        return;
    }
    for (property, count) in &r.failures {
        println!("  {property}: fails on {count} workloads");
    }
    if let Some(item) = r.first_failure() {
        println!("  first: {} ({})", item.workload, item.failures.join(", "));
        if let Some(s) = item.counterexample() {
            println!("  schedule: {}", serde_json::to_string(s).expect("schedules serialize"));
        }
    }
}

fn cmd_check(args: &SuiteArgs, emit_trace: Option<&Path>, seed: u64) -> CmdResult {
    let cfg = args.config()?;
    let report = run_suite(&cfg)?;
    emit(&report, args.report.as_deref(), args.json, || print_suite(&report))?;
    if let Some(path) = emit_trace {
        let trace = match report.first_failure() {
            Some(item) => {
                let w = Workload::parse(&item.workload).expect("reported workloads parse");
                let sim = cfg.sim(&w)?;
                let s = item.counterexample().cloned();
                let s = match s {
                    Some(s) => s,
                    None => random_schedule(&sim, seed, &[], cfg.max_steps)?,
                };
                run(&sim, &s)?
            }
            None => {
                let item = report.items.first().ok_or_else(|| usage("no workload to trace"))?;
                let w = Workload::parse(&item.workload).expect("reported workloads parse");
                let sim = cfg.sim(&w)?;
                run(&sim, &random_schedule(&sim, seed, &[], cfg.max_steps)?)?
            }
        };
        write_json(path, &trace)?;
    }
    Ok(report.passed())
}

fn cmd_mutate(args: &SuiteArgs) -> CmdResult {
    let cfg = args.config()?;
    let report = run_mutations(&SuiteConfig { mutation: None, ..cfg })?;
    emit(&report, args.report.as_deref(), args.json, || {
        println!("{}: baseline {}", report.program, if report.baseline_passed { "passes" } else { "FAILS" });
        for m in &report.mutants {
            match (m.killed, &m.workload) {
                (true, Some(w)) => println!("  {:<18} killed by {} on {w}", m.mutation.name(), m.caught_by.join(", ")),
                _ => println!("  {:<18} survived", m.mutation.name()),
            }
        }
        println!("{}/{} mutants killed", report.killed(), report.mutants.len());
    })?;
    Ok(report.baseline_passed && report.killed() > 0)
}

fn cmd_agreement(a: &AgreementArgs) -> CmdResult {
    let object: OrderingObject = a.object.parse().map_err(|e: Error| usage(e.to_string()))?;
    let profile = profile_for(object, a.n).map_err(|e| usage(e.to_string()))?;
    let k = profile.k;
    let inputs = a.inputs.clone().unwrap_or_else(|| (1..=a.n as i64).map(|i| 10 * i).collect());
    let conformance = a.conformance.then(|| check_conformance(&profile));
    let setup = AgreementSetup::atomic(profile, &inputs).map_err(|e| match e {
        Error::Config(m) => usage(m),
        e => Failure::Core(e),
    })?;
    let config = json!({
        "object": object, "n": a.n, "k": k, "inputs": inputs, "exhaustive": a.exhaustive,
        "runs": a.runs, "seed": a.seed, "crashRate": a.crash_rate, "maxSteps": a.max_steps,
    });
    let conformance_ok = conformance.as_ref().is_none_or(|c| c.passed());
    let print_conformance = |c: &Option<slinlab_core::agreement::ConformanceReport>| {
        if let Some(c) = c {
            println!(
                "profile: {} prefixes, at most {} decisions per prefix, {}",
                c.prefixes,
                c.widest,
                if c.passed() { "conforms" } else { "DOES NOT conform" }
            );
            if let Some(w) = &c.witness {
                println!("  prefix [{}] allows decisions {:?}", w.prefix.join(" "), w.decisions);
            }
        }
    };
    if a.exhaustive {
        let r = explore_agreement(&setup, a.max_steps, a.node_limit)?;
        let report = json!({ "schemaVersion": 1, "config": config, "exhaustive": r, "conformance": conformance });
        emit(&report, a.report.as_deref(), a.json, || {
            println!(
                "{object} n={}: {} configurations, {} crash-free runs, at most {} distinct decisions (k = {k})",
                a.n, r.configurations, r.crash_free_runs, r.most_distinct
            );
            println!(
                "validity failures {}, agreement failures {}, inconclusive {}, collect claims {}/{} hold",
                r.validity_failures,
                r.agreement_failures,
                r.inconclusive,
                r.claims_checked - r.claims_failed,
                r.claims_checked
            );
            print_conformance(&conformance);
        })?;
        return Ok(r.passed() && conformance_ok);
    }
    let mut runs = Vec::with_capacity(a.runs);
    for i in 0..a.runs {
        let s = random_b_schedule(&setup, a.seed.wrapping_add(i as u64), a.crash_rate, a.max_steps)?;
        runs.push(run_algorithm_b(&setup, &s)?);
    }
    let r = validate_agreement(&runs, k);
    let report = json!({ "schemaVersion": 1, "config": config, "sampled": r, "conformance": conformance });
    emit(&report, a.report.as_deref(), a.json, || {
        println!("{object} n={}: {} runs, at most {} distinct decisions (k = {k})", a.n, r.runs, r.most_distinct);
        println!(
            "validity failures {}, agreement failures {}, inconclusive {}",
            r.validity_failures, r.agreement_failures, r.inconclusive
        );
        print_conformance(&conformance);
    })?;
    Ok(r.passed() && r.inconclusive == 0 && conformance_ok)
}

fn cmd_replay(path: &Path, json: bool) -> CmdResult {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let trace: Trace = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let diffs = replay(&trace)?;
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(
                &json!({ "schemaVersion": 1, "identical": diffs.is_empty(), "differences": diffs })
            )
            .unwrap()
        );
    } else if diffs.is_empty() {
        println!("{}: {} steps replayed identically", trace.program, trace.steps.len());
    } else {
        for d in &diffs {
            println!("{d}");
        }
    }
    Ok(diffs.is_empty())
}

fn cmd_list(json: bool) -> CmdResult {
    let entries = catalog();
    if json {
        let rows: Vec<_> = entries
            .iter()
            .map(|e| json!({ "name": e.name, "type": e.object_type, "baseObjects": e.base_objects, "progress": e.progress }))
            .collect();
        println!("{}", serde_json::to_string_pretty(&json!({ "algorithms": rows, "auxiliary": AUXILIARY })).unwrap());
    } else {
        let w = |f: fn(&slinlab_core::catalog::CatalogEntry) -> usize| entries.iter().map(f).max().unwrap_or(0);
        let (a, b, c) = (w(|e| e.name.len()), w(|e| e.object_type.len()), w(|e| e.base_objects.len()));
        for e in &entries {
            println!("{:<a$}  {:<b$}  {:<c$}  {:?}", e.name, e.object_type, e.base_objects, e.progress);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            e.print().ok();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Check { suite, emit_trace, seed } => cmd_check(suite, emit_trace.as_deref(), *seed),
        Command::Mutate { suite } => cmd_mutate(suite),
        Command::Agreement(a) => cmd_agreement(a),
        Command::Replay { path, json } => cmd_replay(path, *json),
        Command::ListAlgorithms { json } => cmd_list(*json),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Core(e @ Error::Capacity { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CAPACITY)
        }
        Err(Failure::Core(e @ (Error::Config(_) | Error::Precondition(_)))) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAIL)
        }
    }
}
