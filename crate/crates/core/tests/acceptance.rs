//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria with a known blocking counterexample still report FAIL. The
//! process exits non-zero when a criterion fails for any other reason, or
//! on any failure when `SLINLAB_STRICT` is set.

use std::collections::BTreeMap;
use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use slinlab_core::agreement::{check_conformance, explore_agreement, profile_for, AgreementSetup, OrderingObject};
use slinlab_core::catalog::{build, BuildOptions};
use slinlab_core::codec::exhaustive_check;
use slinlab_core::explore::Explorer;
use slinlab_core::lin::{check_linearizable, DEFAULT_MAX_OPS};
use slinlab_core::sched::{enumerate_schedules, run, Sim, Workload};
use slinlab_core::strong::{check_strong, revalidate_witness, StrongVerdict};
use slinlab_core::suite::{named_workload, run_mutations, run_suite, SuiteConfig, SuiteReport};

#[derive(Default)]
struct Outcome {
    failures: Vec<String>,
    /// Failures with a known blocking counterexample.
    known: Vec<String>,
    info: Vec<String>,
}

impl Outcome {
    fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn fail(&mut self, failure: String, known: bool) {
        if known {
            self.known.push(failure.clone());
        }
        self.failures.push(failure);
    }
}

type Check = fn(&mut Suites) -> Outcome;

/// Suite runs shared by the criteria that read them.
#[derive(Default)]
struct Suites {
    runs: BTreeMap<String, SuiteReport>,
}

/// `(label, program, spec)` for the strong-linearizability table.
const PROGRAMS: [(&str, &str, Option<&str>); 8] = [
    ("maxRegisterFA", "maxRegisterFA", None),
    ("snapshotFA", "snapshotFA", None),
    ("simpleTypeFromSnapshot/maxRegister", "simpleTypeFromSnapshot", Some("maxRegister")),
    ("simpleTypeFromSnapshot/counter", "simpleTypeFromSnapshot", Some("counter")),
    ("readableTAS", "readableTAS", None),
    ("multiShotTAS", "multiShotTAS", None),
    ("fetchIncFromTAS", "fetchIncFromTAS", None),
    ("setFromTAS", "setFromTAS", None),
];

/// Programs whose strong-linearizability check is known to answer no.
const NOT_STRONG: [&str; 1] = ["setFromTAS"];

fn base_config(program: &str, spec: Option<&str>) -> SuiteConfig {
    SuiteConfig {
        n: 3,
        ops: 2,
        values: vec![1, 2, 3],
        crash_budget: 1,
        spec: spec.map(String::from),
        ..SuiteConfig::new(program)
    }
}

impl Suites {
    fn strong(&mut self, label: &'static str) -> &SuiteReport {
        self.runs.entry(label.to_string()).or_insert_with(|| {
            let (_, program, spec) = PROGRAMS.iter().find(|p| p.0 == label).expect("known label");
            // a single no settles the verdict, and the full strong search
            // over this family does not fit in memory
            let fail_fast = NOT_STRONG.contains(&label);
            run_suite(&SuiteConfig { fail_fast, ..base_config(program, *spec) }).expect("suite runs")
        })
    }

    /// Every property except strong linearizability, over the whole family.
    fn properties(&mut self, label: &'static str) -> &SuiteReport {
        if !NOT_STRONG.contains(&label) {
            return self.strong(label);
        }
        self.runs.entry(format!("{label} without strong")).or_insert_with(|| {
            let (_, program, spec) = PROGRAMS.iter().find(|p| p.0 == label).expect("known label");
            // the widest workload reaches about eleven million nodes
            run_suite(&SuiteConfig { strong: false, node_limit: 30_000_000, ..base_config(program, *spec) })
                .expect("suite runs")
        })
    }
}

fn codec(_: &mut Suites) -> Outcome {
    let t = Instant::now();
    let r = exhaustive_check(4, 8);
    let elapsed = t.elapsed();
    let mut o = Outcome::default();
    o.info.push(format!("{} cases, {} failures, {:.3}s", r.cases, r.failures.len(), elapsed.as_secs_f64()));
    if let Some(f) = r.failures.first() {
        o.fail(f.clone(), false);
    }
    if elapsed.as_secs_f64() >= 1.0 {
        o.fail("slower than 1s".into(), false);
    }
    o
}

fn strong_suite(s: &mut Suites) -> Outcome {
    let mut o = Outcome::default();
    for (label, ..) in PROGRAMS {
        let r = s.strong(label);
        o.info.push(format!("{label}: {} workloads in {:.1}s", r.workloads, r.elapsed_ms as f64 / 1000.0));
        if r.failures.contains_key("strongLinearizable") {
            let w = r.first_failure().map_or(String::new(), |i| format!(" at {}", i.workload));
            o.fail(format!("{label} not strongly linearizable{w}"), NOT_STRONG.contains(&label));
        }
        if r.elapsed_ms > 300_000 {
            o.fail(format!("{label} took over 5 min"), false);
        }
    }
    o
}

fn negative_witness(_: &mut Suites) -> Outcome {
    let w = Workload::parse(named_workload("negwitness").unwrap()).unwrap();
    let p = build("collectCounter", &BuildOptions::new(w.n())).unwrap();
    let spec = p.spec.clone();
    let sim = Sim::new(p, w).unwrap();
    let bounds = base_config("collectCounter", None).bounds();
    let mut traces = 0;
    let mut non_lin = 0;
    for s in enumerate_schedules(&sim, bounds) {
        let t = run(&sim, &s.unwrap()).unwrap();
        traces += 1;
        if !check_linearizable(&t.history, spec.as_ref(), DEFAULT_MAX_OPS).unwrap().is_yes() {
            non_lin += 1;
        }
    }
    let mut ex = Explorer::new(sim, bounds, 8_000_000).unwrap();
    let r = check_strong(&mut ex, spec.as_ref()).unwrap();
    let revalidated = match &r.verdict {
        StrongVerdict::No { witness: Some(w) } => revalidate_witness(&ex, spec.as_ref(), w).unwrap(),
        _ => false,
    };
    let mut o = Outcome::default();
    o.info.push(format!(
        "{traces} traces, {non_lin} not linearizable; strong verdict {}; witness revalidated: {revalidated}",
        if r.verdict.is_yes() { "yes" } else { "no" }
    ));
    if traces == 0 || non_lin > 0 {
        o.fail("some trace is not linearizable".into(), false);
    }
    if r.verdict.is_yes() || !revalidated {
        o.fail("no revalidated witness against strong linearizability".into(), false);
    }
    o
}

fn step_points(s: &mut Suites) -> Outcome {
    let mut o = Outcome::default();
    for label in ["maxRegisterFA", "snapshotFA", "fetchIncFromTAS", "setFromTAS"] {
        let r = s.properties(label);
        let leaves: usize = r.items.iter().filter_map(|i| i.points.as_ref()).map(|p| p.leaves).sum();
        let checked = r.items.iter().filter(|i| i.points.is_some()).count();
        let failing = r.items.iter().filter(|i| i.points.as_ref().is_some_and(|p| !p.passed())).count();
        o.info.push(format!("{label}: {leaves} traces over {checked} workloads"));
        if failing > 0 || checked != r.items.len() || r.skipped > 0 {
            o.fail(format!("{label}: {failing} workloads fail"), false);
        }
    }
    o
}

fn uniqueness(s: &mut Suites) -> Outcome {
    let mut o = Outcome::default();
    for label in ["readableTAS", "fetchIncFromTAS", "setFromTAS"] {
        let r = s.properties(label);
        let responses: usize = r.items.iter().filter_map(|i| i.uniqueness.as_ref()).map(|u| u.responses).sum();
        let failing =
            r.items.iter().filter(|i| i.uniqueness.as_ref().is_none_or(|u| u.counterexample.is_some())).count();
        let property = r.items.iter().find_map(|i| i.uniqueness.as_ref()).map_or("?", |u| u.property);
        o.info.push(format!("{label} {property}: {responses} responses"));
        if failing > 0 || r.skipped > 0 {
            o.fail(format!("{label}: {failing} workloads fail"), false);
        }
    }
    o
}

fn agreement(_: &mut Suites) -> Outcome {
    let mut o = Outcome::default();
    for (tag, k) in [(OrderingObject::Queue, 1), (OrderingObject::OutOfOrderQueue(2), 2)] {
        let profile = profile_for(tag, 3).unwrap();
        let setup = AgreementSetup::atomic(profile, &[10, 20, 30]).unwrap();
        let r = explore_agreement(&setup, 400, 20_000_000).unwrap();
        o.info.push(format!(
            "{tag}: {} configurations, {} crash-free runs, at most {} decisions, {} collect claims",
            r.configurations, r.crash_free_runs, r.most_distinct, r.claims_checked
        ));
        if !r.passed() || r.most_distinct > k || r.claims_checked == 0 {
            o.fail(
                format!(
                    "{tag}: validity {} agreement {} inconclusive {} claims failed {}",
                    r.validity_failures, r.agreement_failures, r.inconclusive, r.claims_failed
                ),
                false,
            );
        }
    }
    o
}

fn conformance(_: &mut Suites) -> Outcome {
    let mut failed = Vec::new();
    let mut cases = 0;
    for n in 2..=3usize {
        let mut tags = vec![
            OrderingObject::Queue,
            OrderingObject::Stack,
            OrderingObject::MultiplicityQueue,
            OrderingObject::MultiplicityStack,
        ];
        for m in 1..=2 {
            tags.extend([OrderingObject::StutteringQueue(m), OrderingObject::StutteringStack(m)]);
        }
        tags.extend((1..n as u32).map(OrderingObject::OutOfOrderQueue));
        for tag in tags {
            cases += 1;
            let r = check_conformance(&profile_for(tag, n).unwrap());
            if !r.passed() {
                let prefix = r.witness.as_ref().map_or(String::new(), |w| w.prefix.join(" "));
                failed.push((tag, format!("{tag} n={n}: {} decisions after [{prefix}]", r.widest)));
            }
        }
    }
    let mut o = Outcome::default();
    o.info.push(format!("{cases} profiles, {} fail", failed.len()));
    for (tag, f) in failed {
        o.fail(f, matches!(tag, OrderingObject::StutteringStack(_) | OrderingObject::OutOfOrderQueue(2)));
    }
    o
}

fn mutation(_: &mut Suites) -> Outcome {
    let mut o = Outcome::default();
    for program in ["readableTAS", "maxRegisterFA"] {
        let r = run_mutations(&base_config(program, None)).unwrap();
        let killed: Vec<String> = r
            .mutants
            .iter()
            .filter(|m| m.killed)
            .map(|m| format!("{:?} by {}", m.mutation, m.caught_by.join("+")))
            .collect();
        o.info.push(format!("{program}: {}/{} killed ({})", killed.len(), r.mutants.len(), killed.join(", ")));
        if !r.baseline_passed || killed.is_empty() {
            o.fail(format!("{program}: baseline passed {}, {} killed", r.baseline_passed, killed.len()), false);
        }
    }
    o
}

fn liveness(s: &mut Suites) -> Outcome {
    let mut o = Outcome::default();
    for (label, ..) in PROGRAMS {
        let r = s.properties(label);
        let failing = r.items.iter().filter(|i| !i.liveness.passed()).count();
        let steps = r.items.iter().map(|i| i.liveness.max_op_steps).max().unwrap_or(0);
        let progress = r.items.first().map_or("?".into(), |i| format!("{:?}", i.liveness.progress));
        o.info.push(format!("{label} {progress}: longest op {steps} steps"));
        if failing > 0 || r.skipped > 0 {
            o.fail(format!("{label}: {failing} workloads fail"), false);
        }
    }
    o
}

fn main() -> ExitCode {
    let checks: [(&str, Check); 9] = [
        ("codec brute force", codec),
        ("strong linearizability suite", strong_suite),
        ("negative witness", negative_witness),
        ("step-point rules", step_points),
        ("uniqueness", uniqueness),
        ("agreement reduction", agreement),
        ("profile conformance", conformance),
        ("mutation armor", mutation),
        ("liveness", liveness),
    ];
    let strict = std::env::var_os("SLINLAB_STRICT").is_some();
    let mut suites = Suites::default();
    let mut regressions = 0;
    let mut failures = 0;
    let mut err = std::io::stderr();
    for (i, (name, check)) in checks.iter().enumerate() {
        let t = Instant::now();
        let o = check(&mut suites);
        let explained = o.failures.iter().all(|f| o.known.contains(f));
        let verdict = match (o.passed(), explained) {
            (true, _) => "PASS",
            (false, true) => "FAIL [known counterexample]",
            (false, false) => "FAIL",
        };
        let detail = [o.failures.clone(), o.info.clone()].concat().join("; ");
        writeln!(err, "criterion {} {name}: {verdict} ({:.1}s) {detail}", i + 1, t.elapsed().as_secs_f64()).ok();
        if !o.passed() {
            failures += 1;
            if strict || !explained {
                regressions += 1;
            }
        }
    }
    writeln!(
        err,
        "acceptance: {} of {} criteria pass, {failures} fail, {regressions} unexpected",
        checks.len() - failures,
        checks.len()
    )
    .ok();
    if regressions == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
