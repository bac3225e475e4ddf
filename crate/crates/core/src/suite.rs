//! Checking a program over a family of bounded workloads.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use rustc_hash::FxHashSet as HashSet;
use serde::{Deserialize, Serialize};

use crate::algo::Mutation;
use crate::catalog::{build, BuildOptions, Composition, Program};
use crate::error::{Error, Result};
use crate::explore::Explorer;
use crate::lin::{check_linearizable, DEFAULT_MAX_OPS};
use crate::liveness::{check_liveness, LivenessReport};
use crate::model::Op;
use crate::points::{check_all_traces, PointReport, PointRule};
use crate::sched::{Bounds, Schedule, Sim, Workload};
use crate::strong::{check_strong, StrongReport, StrongVerdict};
use crate::value::Value;

pub const SCHEMA_VERSION: u32 = 1;

/// Most operations in one workload.
pub const MAX_TOTAL_OPS: usize = 8;

/// Most workloads in one family.
pub const MAX_WORKLOADS: usize = 20_000;

/// Environment variable giving the default number of workers.
pub const WORKERS_ENV: &str = "SLINLAB_WORKERS";

fn default_n() -> usize {
    3
}
fn default_ops() -> usize {
    2
}
fn default_values() -> Vec<i64> {
    vec![1, 2, 3]
}
fn default_max_steps() -> usize {
    Bounds::default().max_steps
}
fn default_node_limit() -> usize {
    8_000_000
}
fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SuiteConfig {
    pub program: String,
    /// Sequential specification for `simpleTypeFromSnapshot`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<String>,
    #[serde(default)]
    pub composition: Composition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutation: Option<Mutation>,
    #[serde(default = "default_n")]
    pub n: usize,
    /// Operations per process in generated workloads.
    #[serde(default = "default_ops")]
    pub ops: usize,
    #[serde(default = "default_values")]
    pub values: Vec<i64>,
    /// A single workload, literal or named, instead of a generated family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workload: Option<String>,
    #[serde(default)]
    pub crash_budget: usize,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_node_limit")]
    pub node_limit: usize,
    /// Run the strong linearizability search.
    #[serde(default = "yes")]
    pub strong: bool,
    /// Stop scheduling new workloads after the first failure.
    #[serde(default)]
    pub fail_fast: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl SuiteConfig {
    pub fn new(program: &str) -> Self {
        SuiteConfig {
            program: program.to_string(),
            spec: None,
            composition: Composition::default(),
            mutation: None,
            n: default_n(),
            ops: default_ops(),
            values: default_values(),
            workload: None,
            crash_budget: 0,
            max_steps: default_max_steps(),
            node_limit: default_node_limit(),
            strong: true,
            fail_fast: false,
            workers: None,
        }
    }

    pub fn bounds(&self) -> Bounds {
        Bounds { max_steps: self.max_steps, crash_budget: self.crash_budget }
    }

    pub fn build_options(&self, n: usize, composition: Composition) -> BuildOptions {
        BuildOptions { n, composition, spec: self.spec.clone(), mutation: self.mutation }
    }

    /// The simulator for one workload of this configuration.
    pub fn sim(&self, w: &Workload) -> Result<Sim> {
        Sim::new(build(&self.program, &self.build_options(w.n().max(1), self.composition))?, w.clone())
    }
}

/// Workloads known by name.
pub fn named_workload(name: &str) -> Option<&'static str> {
    match name {
        "negwitness" => Some("inc;inc,inc;read"),
        _ => None,
    }
}

/// Relabelings of argument values that map executions to executions with
/// the same verdicts.
#[derive(Clone, Copy, PartialEq, Eq)]
enum ValueSymmetry {
    None,
    /// Order-preserving relabelings.
    Monotone,
    /// Every relabeling; values are opaque payloads.
    Any,
}

fn value_symmetry(p: &Program) -> ValueSymmetry {
    match p.name.as_str() {
        "setFromTAS" => ValueSymmetry::Any,
        "simpleTypeFromSnapshot" if p.spec.name() == "maxRegister" => ValueSymmetry::Monotone,
        _ => ValueSymmetry::None,
    }
}

fn int_args(procs: &[Vec<Op>]) -> impl Iterator<Item = i64> + '_ {
    procs.iter().flatten().filter_map(|op| match op.arg {
        Value::Int(v) => Some(v),
        _ => None,
    })
}

/// Values used are exactly `1..=k` for some k.
fn value_dense(w: &Workload) -> bool {
    let used: BTreeSet<i64> = int_args(&w.procs).collect();
    used.iter().copied().eq(1..=used.len() as i64)
}

/// Renames values to 1, 2, ... in order of first appearance.
fn relabel(procs: &[Vec<Op>]) -> Vec<Vec<Op>> {
    let mut names = BTreeMap::new();
    for v in int_args(procs) {
        let next = names.len() as i64 + 1;
        names.entry(v).or_insert(next);
    }
    procs
        .iter()
        .map(|ops| {
            ops.iter()
                .map(|op| match op.arg {
                    Value::Int(v) => Op::new(&op.name, Value::Int(names[&v])),
                    _ => op.clone(),
                })
                .collect()
        })
        .collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for at in 0..n {
            let mut q = p.clone();
            q.insert(at, n - 1);
            out.push(q);
        }
    }
    out
}

/// The least workload reachable by permuting processes and renaming values.
fn canonical(procs: &[Vec<Op>], perms: &[Vec<usize>]) -> Vec<Vec<Op>> {
    perms.iter().map(|p| relabel(&p.iter().map(|&i| procs[i].clone()).collect::<Vec<_>>())).min().unwrap_or_default()
}

/// The workloads a configuration covers. Generated families hold only
/// workloads with exactly `ops` operations per process: every execution of
/// a shorter workload is a prefix of an execution of a longer one.
pub fn workloads(cfg: &SuiteConfig) -> Result<Vec<Workload>> {
    if let Some(text) = &cfg.workload {
        let text = named_workload(text).unwrap_or(text);
        let w = Workload::parse(text).ok_or_else(|| Error::Config(format!("cannot parse workload {text:?}")))?;
        if w.total_ops() > MAX_TOTAL_OPS {
            return Err(Error::Capacity {
                what: format!("workload has {} operations, limit {MAX_TOTAL_OPS}", w.total_ops()),
                frontier: w.total_ops(),
            });
        }
        let p = build(&cfg.program, &cfg.build_options(w.n().max(1), cfg.composition))?;
        p.validate_workload(&w.procs)?;
        return Ok(vec![w]);
    }
    if cfg.n * cfg.ops > MAX_TOTAL_OPS {
        return Err(Error::Capacity {
            what: format!("{} processes x {} operations exceeds {MAX_TOTAL_OPS} operations", cfg.n, cfg.ops),
            frontier: cfg.n * cfg.ops,
        });
    }
    if cfg.values.is_empty() {
        return Err(Error::Config("value domain is empty".into()));
    }
    let p = build(&cfg.program, &cfg.build_options(cfg.n, cfg.composition))?;
    let domain = p.domain(&cfg.values);
    let count = (domain.len() as f64).powi((cfg.n * cfg.ops) as i32);
    if count > 50.0 * MAX_WORKLOADS as f64 {
        return Err(Error::Capacity { what: "too many workloads".into(), frontier: count as usize });
    }
    let symmetry = value_symmetry(&p);
    let perms =
        if symmetry == ValueSymmetry::Any && p.symmetric() { permutations(cfg.n) } else { vec![(0..cfg.n).collect()] };
    // canonical forms are computed over every process order
    let sorted = p.symmetric() && symmetry != ValueSymmetry::Any;
    let ws: Vec<Workload> = Workload::all(cfg.n, cfg.ops, &domain, sorted)
        .into_iter()
        .filter(|w| p.validate_workload(&w.procs).is_ok())
        .filter(|w| match symmetry {
            ValueSymmetry::None => true,
            ValueSymmetry::Monotone => value_dense(w),
            ValueSymmetry::Any => canonical(&w.procs, &perms) == w.procs,
        })
        .collect();
    if ws.len() > MAX_WORKLOADS {
        return Err(Error::Capacity { what: format!("more than {MAX_WORKLOADS} workloads"), frontier: ws.len() });
    }
    Ok(ws)
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LinSummary {
    /// Distinct histories checked.
    pub histories: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Schedule>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct UniquenessReport {
    pub property: &'static str,
    pub responses: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Schedule>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ItemReport {
    pub workload: String,
    pub nodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strong: Option<StrongReport>,
    pub linearizable: LinSummary,
    pub liveness: LivenessReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<PointReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uniqueness: Option<UniquenessReport>,
    /// Properties that did not hold.
    pub failures: Vec<String>,
    pub elapsed_ms: u128,
}

impl ItemReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// A schedule exhibiting the first failed property, if one was kept.
    pub fn counterexample(&self) -> Option<&Schedule> {
        let strong = match self.strong.as_ref().map(|s| &s.verdict) {
            Some(StrongVerdict::No { witness: Some(w) }) => w.extensions.first(),
            _ => None,
        };
        strong
            .or(self.linearizable.counterexample.as_ref())
            .or(self.liveness.violation.as_ref().map(|v| &v.schedule))
            .or(self.liveness.stalled.as_ref())
            .or(self.uniqueness.as_ref().and_then(|u| u.counterexample.as_ref()))
            .or(self.points.as_ref().and_then(|p| p.counterexample.as_ref()))
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SuiteReport {
    pub schema_version: u32,
    pub config: SuiteConfig,
    pub workloads: usize,
    /// Workloads skipped after a failure with `failFast`.
    pub skipped: usize,
    /// Failing workloads per property.
    pub failures: BTreeMap<String, usize>,
    pub items: Vec<ItemReport>,
    pub elapsed_ms: u128,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn first_failure(&self) -> Option<&ItemReport> {
        self.items.iter().find(|i| !i.passed())
    }
}

/// Linearizability of every history. Crash-free leaves suffice: any
/// other node's history is a prefix of one of theirs, and linearizability
/// is closed under prefixes.
fn check_histories(ex: &mut Explorer, leaves: &[u32]) -> Result<LinSummary> {
    let spec = ex.sim.program.spec.clone();
    let mut seen = HashSet::default();
    let mut counterexample = None;
    for &v in leaves {
        if !seen.insert(ex.hist_id(v)) {
            continue;
        }
        let h = ex.history_of(v)?;
        if !check_linearizable(&h, spec.as_ref(), DEFAULT_MAX_OPS)?.is_yes() {
            counterexample = Some(ex.path_to(v));
            break;
        }
    }
    Ok(LinSummary { histories: seen.len(), counterexample })
}

/// Checks that responses new at each step keep the program's uniqueness
/// property. Returns `None` for programs without one.
fn check_uniqueness(ex: &Explorer, nodes: &[u32]) -> Option<UniquenessReport> {
    let name = ex.sim.program.name.as_str();
    let property = match name {
        "readableTAS" => "singleWinner",
        "fetchIncFromTAS" => "distinctIndices",
        "setFromTAS" => "takenOnce",
        _ => return None,
    };
    let inv = &ex.invocations;
    let mut responses = 0;
    for &v in nodes {
        let h = ex.hist(v);
        let done: Vec<(usize, &Value)> =
            h.responses.iter().enumerate().filter_map(|(i, r)| r.as_ref().map(|r| (i, r))).collect();
        responses = responses.max(done.len());
        let ok = match name {
            "readableTAS" => {
                done.iter().filter(|(i, r)| inv[*i].name == "testAndSet" && **r == Value::Int(0)).count() <= 1
            }
            "fetchIncFromTAS" => {
                // increments begun before operation `i` responded
                let started = |i: usize| {
                    (0..inv.len())
                        .filter(|&j| inv[j].name == "fetchAndIncrement")
                        .filter(|&j| h.invoked_after[j].is_some_and(|m| m >> i & 1 == 0))
                        .count()
                };
                let mut got = BTreeSet::new();
                done.iter().all(|(i, r)| match (inv[*i].name.as_str(), r) {
                    ("fetchAndIncrement", Value::Int(k)) => got.insert(*k),
                    ("read", Value::Int(k)) => *k as usize <= started(*i),
                    _ => true,
                })
            }
            _ => {
                let put: BTreeSet<&Value> = (0..inv.len())
                    .filter(|&i| inv[i].name == "put" && h.invoked() >> i & 1 == 1)
                    .map(|i| &inv[i].arg)
                    .collect();
                let mut got = BTreeSet::new();
                done.iter()
                    .all(|(i, r)| inv[*i].name != "take" || **r == Value::Empty || (put.contains(r) && got.insert(*r)))
            }
        };
        if !ok {
            return Some(UniquenessReport { property, responses, counterexample: Some(ex.path_to(v)) });
        }
    }
    Some(UniquenessReport { property, responses, counterexample: None })
}

fn explorer(p: Program, w: &Workload, cfg: &SuiteConfig) -> Result<Explorer> {
    let sim = Sim::new(p, w.clone())?;
    Explorer::new(sim, cfg.bounds(), cfg.node_limit)
}

/// Runs every check on one workload.
pub fn check_workload(cfg: &SuiteConfig, w: &Workload) -> Result<ItemReport> {
    let t = Instant::now();
    let n = w.n().max(1);
    let p = build(&cfg.program, &cfg.build_options(n, cfg.composition))?;
    p.validate_workload(&w.procs)?;
    let spec = p.spec.clone();
    let mut ex = explorer(p.clone(), w, cfg)?;
    let mut failures = Vec::new();

    let strong = if cfg.strong { Some(check_strong(&mut ex, spec.as_ref())?) } else { None };
    if strong.as_ref().is_some_and(|s| !s.verdict.is_yes()) {
        failures.push("strongLinearizable".to_string());
    }
    let nodes = ex.crash_free_nodes()?;
    let leaves: Vec<u32> = nodes.iter().copied().filter(|&v| ex.is_leaf(v)).collect();
    let linearizable = check_histories(&mut ex, &leaves)?;
    if linearizable.counterexample.is_some() {
        failures.push("linearizable".to_string());
    }
    let liveness = check_liveness(&mut ex)?;
    if !liveness.passed() {
        failures.push("liveness".to_string());
    }
    let uniqueness = check_uniqueness(&ex, &nodes);
    if uniqueness.as_ref().is_some_and(|u| u.counterexample.is_some()) {
        failures.push("uniqueness".to_string());
    }
    let points = match PointRule::for_program(&p.name) {
        Some(rule) if rule.needs_atomic_components() && cfg.composition != Composition::Atomic => {
            let atomic = build(&cfg.program, &cfg.build_options(n, Composition::Atomic))?;
            Some(check_all_traces(&mut explorer(atomic, w, cfg)?, rule))
        }
        Some(rule) => Some(check_all_traces(&mut ex, rule)),
        None => None,
    };
    let points = match points {
        // a mutant may break the rule's own assumptions
        Some(Err(Error::Rule(_))) if cfg.mutation.is_some() => {
            failures.push("points".to_string());
            None
        }
        other => other.transpose()?,
    };
    if points.as_ref().is_some_and(|r| !r.passed()) {
        failures.push("points".to_string());
    }
    Ok(ItemReport {
        workload: w.to_string(),
        nodes: ex.len(),
        strong,
        linearizable,
        liveness,
        points,
        uniqueness,
        failures,
        elapsed_ms: t.elapsed().as_millis(),
    })
}

fn worker_count(cfg: &SuiteConfig) -> usize {
    cfg.workers.or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok())).unwrap_or(1).max(1)
}

/// Checks every workload of the configuration. Items come back sorted by
/// workload whatever order they finish in.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let t = Instant::now();
    let ws = workloads(cfg)?;
    let stop = AtomicBool::new(false);
    let one = |w: &Workload| -> Option<Result<ItemReport>> {
        if cfg.fail_fast && stop.load(Ordering::Relaxed) {
            return None;
        }
        let r = check_workload(cfg, w);
        if !matches!(&r, Ok(item) if item.passed()) {
            stop.store(true, Ordering::Relaxed);
        }
        Some(r)
    };
    let results: Vec<Option<Result<ItemReport>>> = match worker_count(cfg) {
        1 => ws.iter().map(one).collect(),
        k => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| ws.par_iter().map(one).collect()),
    };
    let mut items = Vec::new();
    let mut skipped = 0;
    for r in results {
        match r {
            Some(r) => items.push(r?),
            None => skipped += 1,
        }
    }
    items.sort_by(|a, b| a.workload.cmp(&b.workload));
    let mut failures = BTreeMap::new();
    for i in &items {
        for f in &i.failures {
            *failures.entry(f.clone()).or_insert(0) += 1;
        }
    }
    Ok(SuiteReport {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        workloads: ws.len(),
        skipped,
        failures,
        items,
        elapsed_ms: t.elapsed().as_millis(),
    })
}

/// Outcome of checking one mutant.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MutantReport {
    pub mutation: Mutation,
    pub killed: bool,
    /// Properties that failed on some workload.
    pub caught_by: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workload: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MutateReport {
    pub schema_version: u32,
    pub program: String,
    /// Whether the unmutated program passes.
    pub baseline_passed: bool,
    pub mutants: Vec<MutantReport>,
}

impl MutateReport {
    pub fn killed(&self) -> usize {
        self.mutants.iter().filter(|m| m.killed).count()
    }
}

/// Reruns the suite on every mutant of the configured program.
pub fn run_mutations(cfg: &SuiteConfig) -> Result<MutateReport> {
    let base = run_suite(&SuiteConfig { mutation: None, ..cfg.clone() })?;
    let mut mutants = Vec::new();
    for m in crate::catalog::mutants_of(&cfg.program)? {
        let r = run_suite(&SuiteConfig { mutation: Some(m), fail_fast: true, ..cfg.clone() })?;
        let first = r.first_failure();
        mutants.push(MutantReport {
            mutation: m,
            killed: !r.passed(),
            caught_by: r.failures.keys().cloned().collect(),
            workload: first.map(|i| i.workload.clone()),
        });
    }
    Ok(MutateReport {
        schema_version: SCHEMA_VERSION,
        program: cfg.program.clone(),
        baseline_passed: base.passed(),
        mutants,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_max_register_family_passes() {
        let cfg = SuiteConfig { n: 2, ops: 2, crash_budget: 1, ..SuiteConfig::new("maxRegisterFA") };
        let r = run_suite(&cfg).unwrap();
        assert!(r.passed(), "{:?}", r.failures);
        assert!(r.items.iter().all(|i| i.points.as_ref().is_some_and(|p| p.passed())));
        assert!(r.items.windows(2).all(|w| w[0].workload < w[1].workload));
    }

    #[test]
    fn collect_counter_fails_only_strong_linearizability() {
        let cfg = SuiteConfig { workload: Some("negwitness".into()), ..SuiteConfig::new("collectCounter") };
        let r = run_suite(&cfg).unwrap();
        assert_eq!(r.failures.keys().collect::<Vec<_>>(), ["strongLinearizable"]);
    }

    #[test]
    fn oversized_families_are_capacity_errors() {
        let cfg = SuiteConfig { n: 9, ops: 9, ..SuiteConfig::new("maxRegisterFA") };
        assert!(matches!(run_suite(&cfg), Err(Error::Capacity { .. })));
        let cfg = SuiteConfig {
            workload: Some("inc,inc,inc;inc,inc,inc;read,read,read".into()),
            ..SuiteConfig::new("collectCounter")
        };
        assert!(matches!(run_suite(&cfg), Err(Error::Capacity { .. })));
    }

    #[test]
    fn bad_workloads_are_rejected() {
        let cfg = SuiteConfig { workload: Some("put(1);put(1)".into()), ..SuiteConfig::new("setFromTAS") };
        assert!(matches!(run_suite(&cfg), Err(Error::Precondition(_))));
        let cfg = SuiteConfig { workload: Some("inc(".into()), ..SuiteConfig::new("collectCounter") };
        assert!(matches!(run_suite(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn commuting_snapshot_types_are_process_symmetric() {
        for spec in ["counter", "maxRegister"] {
            let cfg = SuiteConfig {
                n: 2,
                ops: 2,
                crash_budget: 1,
                spec: Some(spec.into()),
                ..SuiteConfig::new("simpleTypeFromSnapshot")
            };
            let p = build(&cfg.program, &cfg.build_options(2, cfg.composition)).unwrap();
            assert!(p.symmetric());
            let domain = p.domain(&[1, 2]);
            for w in Workload::all(2, 2, &domain, true).into_iter().filter(|w| w.procs[0] != w.procs[1]).take(12) {
                let swapped = Workload::new(w.procs.iter().rev().cloned().collect());
                let a = check_workload(&cfg, &w).unwrap();
                let b = check_workload(&cfg, &swapped).unwrap();
                assert_eq!((a.nodes, &a.failures), (b.nodes, &b.failures), "{w}");
            }
        }
    }

    #[test]
    fn set_family_has_one_workload_per_orbit() {
        let cfg = SuiteConfig { n: 3, ops: 2, ..SuiteConfig::new("setFromTAS") };
        let family: BTreeSet<Vec<Vec<Op>>> = workloads(&cfg).unwrap().into_iter().map(|w| w.procs).collect();
        let p = build("setFromTAS", &BuildOptions::new(3)).unwrap();
        let perms = permutations(3);
        assert_eq!(perms.len(), 6);
        let orbits: BTreeSet<Vec<Vec<Op>>> = Workload::all(3, 2, &p.domain(&cfg.values), false)
            .into_iter()
            .filter(|w| p.validate_workload(&w.procs).is_ok())
            .map(|w| canonical(&w.procs, &perms))
            .collect();
        assert_eq!(family, orbits);
    }

    #[test]
    fn value_dense_families_are_smaller() {
        let cfg = SuiteConfig { n: 2, ops: 1, ..SuiteConfig::new("setFromTAS") };
        let names: Vec<String> = workloads(&cfg).unwrap().iter().map(Workload::to_string).collect();
        assert_eq!(names, ["put(1);put(2)", "put(1);take", "take;take"]);
    }

    #[test]
    fn config_reads_from_json_with_defaults() {
        let cfg: SuiteConfig = serde_json::from_str(r#"{"program":"readableTAS","crashBudget":1}"#).unwrap();
        assert_eq!(cfg, SuiteConfig { crash_budget: 1, ..SuiteConfig::new("readableTAS") });
        assert!(serde_json::from_str::<SuiteConfig>(r#"{"program":"x","bogus":1}"#).is_err());
    }

    #[test]
    fn readable_tas_mutants_are_killed() {
        let cfg = SuiteConfig { n: 2, ops: 2, ..SuiteConfig::new("readableTAS") };
        let r = run_mutations(&cfg).unwrap();
        assert!(r.baseline_passed);
        assert_eq!(r.killed(), r.mutants.len(), "{:?}", r.mutants);
    }
}
