//! Named, buildable programs.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::algo::{child, template, Algo, Builder, Impl, Mutation, Progress};
use crate::base::{BaseKind, ObjectTable, SlotDecl};
use crate::error::{Error, Result};
use crate::model::{Op, SpecRef};
use crate::specs::{CounterSpec, FetchIncSpec, MaxRegisterSpec, SetSpec, SnapshotSpec, TestAndSetSpec};
use crate::value::Value;

/// Largest value accepted by the fetch&add max register and snapshot.
pub const VALUE_BOUND: i64 = 255;

/// How a program's components are realized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Composition {
    /// Components are atomic base objects.
    Atomic,
    /// Components are themselves catalog programs.
    #[default]
    Nested,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BuildOptions {
    pub n: usize,
    #[serde(default)]
    pub composition: Composition,
    /// Sequential specification for `simpleTypeFromSnapshot`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutation: Option<Mutation>,
}

impl BuildOptions {
    pub fn new(n: usize) -> Self {
        BuildOptions { n, composition: Composition::Nested, spec: None, mutation: None }
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CatalogEntry {
    pub name: &'static str,
    pub object_type: &'static str,
    pub base_objects: &'static str,
    pub progress: Progress,
}

pub fn catalog() -> Vec<CatalogEntry> {
    let e = |name, object_type, base_objects, progress| CatalogEntry { name, object_type, base_objects, progress };
    vec![
        e("maxRegisterFA", "max register", "fetch&add", Progress::WaitFree),
        e("snapshotFA", "atomic snapshot", "fetch&add", Progress::WaitFree),
        e("simpleTypeFromSnapshot", "any simple type", "atomic snapshot", Progress::WaitFree),
        e("readableTAS", "readable test&set", "register, test&set", Progress::WaitFree),
        e("multiShotTAS", "multi-shot test&set", "max register, readable test&set", Progress::WaitFree),
        e("fetchIncFromTAS", "fetch&increment", "readable test&set", Progress::LockFree),
        e("setFromTAS", "set", "readable fetch&increment, register, readable test&set", Progress::LockFree),
    ]
}

/// Programs outside the catalog that the checkers also accept.
pub const AUXILIARY: [&str; 1] = ["collectCounter"];

/// A runnable program: implementation tree, shared layout and the
/// specification it claims to implement.
#[derive(Clone, Debug)]
pub struct Program {
    pub name: String,
    pub options: BuildOptions,
    pub root: Impl,
    pub spec: SpecRef,
    pub decls: Arc<Vec<SlotDecl>>,
    pub progress: Progress,
}

impl Program {
    pub fn n(&self) -> usize {
        self.options.n
    }

    pub fn initial_table(&self) -> ObjectTable {
        ObjectTable::new(self.decls.as_ref().clone())
    }

    pub fn budget(&self, op: &Op) -> Option<usize> {
        self.root.budget(op)
    }

    /// Invocations available to bounded workloads.
    pub fn domain(&self, values: &[i64]) -> Vec<Op> {
        self.spec.domain(values)
    }

    /// Rejects workloads the program cannot run.
    pub fn validate_workload(&self, procs: &[Vec<Op>]) -> Result<()> {
        if procs.len() > self.n() {
            return Err(Error::Config(format!(
                "workload has {} processes but the program was built for {}",
                procs.len(),
                self.n()
            )));
        }
        let known: BTreeSet<String> = self.spec.domain(&[1]).into_iter().map(|o| o.name).collect();
        for op in procs.iter().flatten() {
            if !known.contains(&op.name) {
                return Err(Error::Config(format!("{} has no operation {op}", self.name)));
            }
        }
        if self.name == "setFromTAS" {
            let mut seen = BTreeSet::new();
            for op in procs.iter().flatten().filter(|o| o.name == "put") {
                if !seen.insert(op.arg.clone()) {
                    return Err(Error::Precondition(format!("item {} is put more than once", op.arg)));
                }
            }
        }
        Ok(())
    }

    /// Whether permuting process ids maps executions to executions with
    /// the same verdicts. The snapshot construction breaks ties by process
    /// id, which only shows in responses when updates do not commute.
    pub fn symmetric(&self) -> bool {
        match self.name.as_str() {
            "simpleTypeFromSnapshot" => matches!(self.spec.name().as_str(), "counter" | "maxRegister"),
            _ => true,
        }
    }
}

fn fa_max_register(b: &mut Builder, n: usize, mutation: Option<Mutation>) -> Impl {
    let r = b.atomic("R", BaseKind::FetchAdd, Value::Int(0), false);
    b.composite(Algo::MaxRegisterFa { n, bound: VALUE_BOUND }, vec![child("R", r)], mutation)
}

fn fa_snapshot(b: &mut Builder, n: usize, mutation: Option<Mutation>) -> Impl {
    let r = b.atomic("R", BaseKind::FetchAdd, Value::Int(0), false);
    b.composite(Algo::SnapshotFa { n, bound: VALUE_BOUND + 1 }, vec![child("R", r)], mutation)
}

/// A readable test&set; `array` makes it a template indexed by the caller.
fn readable_tas(b: &mut Builder, prefix: &str, array: bool, nested: bool, mutation: Option<Mutation>) -> Impl {
    if nested {
        let state = b.atomic(&format!("{prefix}state"), BaseKind::Register, Value::Int(0), array);
        let ts = b.atomic(&format!("{prefix}ts"), BaseKind::TestAndSet, Value::Int(0), array);
        b.composite(Algo::ReadableTas, vec![child("state", state), child("ts", ts)], mutation)
    } else {
        let name = if prefix.is_empty() { "ts" } else { prefix.trim_end_matches('.') };
        b.atomic(name, BaseKind::TestAndSet, Value::Int(0), array)
    }
}

fn fetch_inc(b: &mut Builder, prefix: &str, nested: bool) -> Impl {
    let m = readable_tas(b, &format!("{prefix}M."), true, nested, None);
    b.composite(Algo::FetchInc, vec![template("M", m)], None)
}

pub fn build(name: &str, options: &BuildOptions) -> Result<Program> {
    let n = options.n;
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let nested = options.composition == Composition::Nested;
    let mutation = options.mutation;
    let mut b = Builder::new();
    let (root, spec, progress): (Impl, SpecRef, Progress) = match name {
        "maxRegisterFA" => (fa_max_register(&mut b, n, mutation), Arc::new(MaxRegisterSpec), Progress::WaitFree),
        "snapshotFA" => (fa_snapshot(&mut b, n, mutation), Arc::new(SnapshotSpec { n }), Progress::WaitFree),
        "simpleTypeFromSnapshot" => {
            let spec: SpecRef = match options.spec.as_deref().unwrap_or("maxRegister") {
                "maxRegister" => Arc::new(MaxRegisterSpec),
                "counter" => Arc::new(CounterSpec),
                other => match crate::specs::spec_by_name(other, n) {
                    Some(s) if s.has_relation() => s,
                    _ => return Err(Error::Config(format!("specification {other} has no commute/overwrite relation"))),
                },
            };
            let root = if nested {
                fa_snapshot(&mut b, n, None)
            } else {
                b.atomic("root", BaseKind::AtomicSnapshot, BaseKind::AtomicSnapshot.default_state(n), false)
            };
            let imp = b.composite(Algo::SimpleType { n, spec: spec.clone() }, vec![child("root", root)], mutation);
            (imp, spec, Progress::WaitFree)
        }
        "readableTAS" => {
            let state = b.atomic("state", BaseKind::Register, Value::Int(0), false);
            let ts = b.atomic("ts", BaseKind::TestAndSet, Value::Int(0), false);
            let imp = b.composite(Algo::ReadableTas, vec![child("state", state), child("ts", ts)], mutation);
            (imp, Arc::new(TestAndSetSpec { multi_shot: false }), Progress::WaitFree)
        }
        "multiShotTAS" => {
            let curr = if nested {
                fa_max_register(&mut b, n, None)
            } else {
                b.atomic("curr", BaseKind::AtomicMaxRegister, Value::Int(0), false)
            };
            let ts = readable_tas(&mut b, "TS.", true, nested, None);
            let imp = b.composite(Algo::MultiShotTas, vec![child("curr", curr), template("TS", ts)], mutation);
            (imp, Arc::new(TestAndSetSpec { multi_shot: true }), Progress::WaitFree)
        }
        "fetchIncFromTAS" => {
            let m = readable_tas(&mut b, "M.", true, nested, None);
            let imp = b.composite(Algo::FetchInc, vec![template("M", m)], mutation);
            (imp, Arc::new(FetchIncSpec), Progress::LockFree)
        }
        "setFromTAS" => {
            // Max starts at 1; the 0-based fetch&inc program is offset by one
            let (max, offset) = if nested {
                (fetch_inc(&mut b, "Max.", false), 1)
            } else {
                (b.atomic("Max", BaseKind::FetchAdd, Value::Int(1), false), 0)
            };
            let items = b.atomic("Items", BaseKind::Register, Value::Bottom, true);
            let ts = b.atomic("TS", BaseKind::TestAndSet, Value::Int(0), true);
            let imp = b.composite(
                Algo::Set { max_offset: offset },
                vec![child("Max", max), template("Items", items), template("TS", ts)],
                mutation,
            );
            (imp, Arc::new(SetSpec), Progress::LockFree)
        }
        "collectCounter" => {
            let c = b.atomic("C", BaseKind::Register, Value::Int(0), true);
            let imp = b.composite(Algo::CollectCounter { n }, vec![template("C", c)], mutation);
            (imp, Arc::new(CounterSpec), Progress::WaitFree)
        }
        _ => return Err(Error::Config(format!("unknown program {name}"))),
    };
    if let (Some(m), Some(c)) = (mutation, root.composite()) {
        if !m.applies_to(&c.algo) {
            return Err(Error::Config(format!("mutation {m} does not apply to {name}")));
        }
    }
    Ok(Program { name: name.to_string(), options: options.clone(), root, spec, decls: Arc::new(b.decls), progress })
}

/// A program that is a single atomic object of the given kind.
pub fn atomic_program(kind: BaseKind, spec: SpecRef, n: usize) -> Program {
    let mut b = Builder::new();
    let root = b.atomic(&kind.to_string(), kind, kind.default_state(n), false);
    Program {
        name: format!("atomic {kind}"),
        options: BuildOptions { n, composition: Composition::Atomic, spec: None, mutation: None },
        root,
        spec,
        decls: Arc::new(b.decls),
        progress: Progress::WaitFree,
    }
}

/// Mutations applicable to a program's outermost algorithm.
pub fn mutants_of(name: &str) -> Result<Vec<Mutation>> {
    let p = build(name, &BuildOptions::new(2))?;
    let Some(c) = p.root.composite() else { return Ok(Vec::new()) };
    Ok(Mutation::ALL.into_iter().filter(|m| m.applies_to(&c.algo)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_entry_builds_both_ways() {
        for e in catalog() {
            for composition in [Composition::Atomic, Composition::Nested] {
                let opts = BuildOptions { composition, ..BuildOptions::new(3) };
                let p = build(e.name, &opts).unwrap();
                assert_eq!(p.progress, e.progress, "{}", e.name);
            }
        }
        assert_eq!(catalog().len(), 7);
    }

    #[test]
    fn unknown_names_and_specs_are_config_errors() {
        assert!(matches!(build("nope", &BuildOptions::new(2)), Err(Error::Config(_))));
        let opts = BuildOptions { spec: Some("set".into()), ..BuildOptions::new(2) };
        assert!(matches!(build("simpleTypeFromSnapshot", &opts), Err(Error::Config(_))));
        assert!(matches!(build("maxRegisterFA", &BuildOptions::new(0)), Err(Error::Config(_))));
    }

    #[test]
    fn mutants_match_their_targets() {
        assert_eq!(mutants_of("readableTAS").unwrap(), vec![Mutation::SwapTsState, Mutation::DropStateWrite]);
        assert_eq!(mutants_of("maxRegisterFA").unwrap().len(), 3);
        let opts = BuildOptions { mutation: Some(Mutation::SwapTsState), ..BuildOptions::new(2) };
        assert!(build("maxRegisterFA", &opts).is_err());
    }

    #[test]
    fn duplicate_put_is_a_precondition_error() {
        let p = build("setFromTAS", &BuildOptions::new(2)).unwrap();
        let w = vec![vec![Op::new("put", 1.into())], vec![Op::new("put", 1.into())]];
        assert!(matches!(p.validate_workload(&w), Err(Error::Precondition(_))));
        let w = vec![vec![Op::new("put", 1.into())], vec![Op::nullary("take")]];
        p.validate_workload(&w).unwrap();
    }

    #[test]
    fn wait_free_budgets() {
        let p = build("multiShotTAS", &BuildOptions::new(3)).unwrap();
        assert_eq!(p.budget(&Op::nullary("reset")), Some(3));
        let p = build("fetchIncFromTAS", &BuildOptions::new(3)).unwrap();
        assert_eq!(p.budget(&Op::nullary("read")), None);
    }
}
