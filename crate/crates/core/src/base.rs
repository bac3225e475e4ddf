//! Simulated atomic base objects. One action on one object is one
//! indivisible simulator step.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ApplyCtx, Op, OpId, SequentialSpec};
use crate::specs::{ContainerSpec, Discipline, Relaxation};
use crate::value::Value;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaseKind {
    Register,
    FetchAdd,
    TestAndSet,
    TwoProcTestAndSet,
    Swap,
    AtomicSnapshot,
    AtomicMaxRegister,
    AtomicQueue,
    AtomicStack,
    /// A relaxed queue or stack whose nondeterminism is resolved by the
    /// scheduler's choice stream.
    AtomicRelaxed(Discipline, Relaxation),
}

impl fmt::Display for BaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseKind::AtomicRelaxed(d, r) => {
                let spec = ContainerSpec::relaxed(*d, *r);
                write!(f, "AtomicRelaxed[{}]", spec.name())
            }
            other => write!(f, "{other:?}"),
        }
    }
}

impl BaseKind {
    fn container(self) -> Option<ContainerSpec> {
        match self {
            BaseKind::AtomicQueue => Some(ContainerSpec::queue()),
            BaseKind::AtomicStack => Some(ContainerSpec::stack()),
            BaseKind::AtomicRelaxed(d, r) => Some(ContainerSpec::relaxed(d, r)),
            _ => None,
        }
    }

    /// The state a fresh instance of this kind starts in.
    pub fn default_state(self, n: usize) -> Value {
        match self {
            BaseKind::Register | BaseKind::Swap => Value::Bottom,
            BaseKind::AtomicSnapshot => Value::List(vec![Value::Int(0); n]),
            k => match k.container() {
                Some(spec) => spec.initial_state(),
                None => Value::Int(0),
            },
        }
    }
}

/// A primitive action applied to a base object.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    /// Returns the current state; every kind supports it.
    Read,
    Write(Value),
    FetchAdd(BigInt),
    TestAndSet,
    Swap(Value),
    Scan,
    Update(Value),
    ReadMax,
    WriteMax(i64),
    Enq(Value),
    Deq,
    Push(Value),
    Pop,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Read => f.write_str("read"),
            Action::Write(v) => write!(f, "write({v})"),
            Action::FetchAdd(d) => write!(f, "fetchAdd({d})"),
            Action::TestAndSet => f.write_str("testAndSet"),
            Action::Swap(v) => write!(f, "swap({v})"),
            Action::Scan => f.write_str("scan"),
            Action::Update(v) => write!(f, "update({v})"),
            Action::ReadMax => f.write_str("readMax"),
            Action::WriteMax(v) => write!(f, "writeMax({v})"),
            Action::Enq(v) => write!(f, "enq({v})"),
            Action::Deq => f.write_str("deq"),
            Action::Push(v) => write!(f, "push({v})"),
            Action::Pop => f.write_str("pop"),
        }
    }
}

/// Identity of one base object: a declared slot plus an index into it.
/// Scalar slots only use index 0; array slots are allocated on first
/// mutation.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BaseObjectId {
    pub slot: u32,
    pub index: u64,
}

/// Resolves nondeterministic outcomes of relaxed objects.
pub trait ChoiceSource {
    /// Picks one of `arity` (at least two) allowed outcomes.
    fn choose(&mut self, arity: usize) -> usize;
}

/// Replays a fixed script of choices, then always picks outcome 0, and
/// records every choice point it saw as `(arity, chosen)`.
#[derive(Clone, Debug, Default)]
pub struct ScriptedChoices {
    pub script: Vec<usize>,
    pub pos: usize,
    pub log: Vec<(usize, usize)>,
}

impl ScriptedChoices {
    pub fn new(script: Vec<usize>) -> Self {
        ScriptedChoices { script, pos: 0, log: Vec::new() }
    }
}

impl ChoiceSource for ScriptedChoices {
    fn choose(&mut self, arity: usize) -> usize {
        let c = self.script.get(self.pos).copied().unwrap_or(0).min(arity - 1);
        self.pos += 1;
        self.log.push((arity, c));
        c
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotDecl {
    pub name: String,
    pub kind: BaseKind,
    pub init: Value,
    pub array: bool,
}

/// A published node of the graph maintained by the simple-type
/// construction. `preceding[j]` holds process `j`'s node counter plus
/// one, or 0 for none.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GraphNode {
    pub invocation: Op,
    pub response: Value,
    pub preceding: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Cell {
    state: Value,
    /// Bitmask of processes that accessed a two-process object.
    users: u64,
}

/// Object dump entry: `{id, kind, state}` with integers as decimal text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectDump {
    pub id: String,
    pub kind: String,
    pub state: String,
}

/// The shared memory of one simulation. Equality and hashing ignore the
/// declarations, which are fixed per program.
#[derive(Clone, Debug)]
pub struct ObjectTable {
    decls: Arc<Vec<SlotDecl>>,
    cells: BTreeMap<BaseObjectId, Cell>,
    /// Graph nodes keyed by (process, creation counter).
    heap: BTreeMap<(usize, u64), Arc<GraphNode>>,
}

impl PartialEq for ObjectTable {
    fn eq(&self, other: &Self) -> bool {
        self.cells == other.cells && self.heap == other.heap
    }
}

impl Eq for ObjectTable {}

impl std::hash::Hash for ObjectTable {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.cells.hash(state);
        self.heap.hash(state);
    }
}

impl ObjectTable {
    pub fn new(decls: Vec<SlotDecl>) -> Self {
        ObjectTable { decls: Arc::new(decls), cells: BTreeMap::new(), heap: BTreeMap::new() }
    }

    pub fn decls(&self) -> &[SlotDecl] {
        &self.decls
    }

    pub fn decl(&self, id: BaseObjectId) -> Result<&SlotDecl> {
        let decl = self
            .decls
            .get(id.slot as usize)
            .ok_or_else(|| Error::Config(format!("unknown base object slot {}", id.slot)))?;
        if !decl.array && id.index != 0 {
            return Err(Error::Config(format!("{} is not an array", decl.name)));
        }
        Ok(decl)
    }

    pub fn label(&self, id: BaseObjectId) -> String {
        match self.decls.get(id.slot as usize) {
            Some(d) if d.array => format!("{}[{}]", d.name, id.index),
            Some(d) => d.name.clone(),
            None => format!("#{}", id.slot),
        }
    }

    /// Current state without advancing anything.
    pub fn state(&self, id: BaseObjectId) -> Result<Value> {
        let decl = self.decl(id)?;
        Ok(self.cells.get(&id).map_or_else(|| decl.init.clone(), |c| c.state.clone()))
    }

    /// Overwrites a state directly; used to seed private copies.
    pub fn set_state(&mut self, id: BaseObjectId, state: Value) -> Result<()> {
        let init = self.decl(id)?.init.clone();
        if state == init {
            self.cells.remove(&id);
        } else {
            self.cells.entry(id).or_insert(Cell { state: Value::Nil, users: 0 }).state = state;
        }
        Ok(())
    }

    pub fn snapshot_states(
        &self,
        ids: impl IntoIterator<Item = BaseObjectId>,
    ) -> Result<BTreeMap<BaseObjectId, Value>> {
        ids.into_iter().map(|id| Ok((id, self.state(id)?))).collect()
    }

    /// Every scalar slot plus every array cell that has been changed.
    pub fn touched(&self) -> Vec<BaseObjectId> {
        let mut ids: Vec<BaseObjectId> = self
            .decls
            .iter()
            .enumerate()
            .filter(|(_, d)| !d.array)
            .map(|(i, _)| BaseObjectId { slot: i as u32, index: 0 })
            .collect();
        ids.extend(self.cells.keys().copied());
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn dump(&self) -> Vec<ObjectDump> {
        self.touched()
            .into_iter()
            .map(|id| ObjectDump {
                id: self.label(id),
                kind: self.decls[id.slot as usize].kind.to_string(),
                state: self.state(id).map(|s| s.to_string()).unwrap_or_default(),
            })
            .collect()
    }

    pub fn heap_node(&self, proc: usize, counter: u64) -> Option<&GraphNode> {
        self.heap.get(&(proc, counter)).map(|n| n.as_ref())
    }

    pub fn insert_heap_node(&mut self, proc: usize, counter: u64, node: GraphNode) {
        self.heap.insert((proc, counter), Arc::new(node));
    }

    /// Applies one action atomically and returns its response.
    pub fn step(
        &mut self,
        id: BaseObjectId,
        action: &Action,
        proc: usize,
        choices: &mut dyn ChoiceSource,
    ) -> Result<Value> {
        let decls = Arc::clone(&self.decls);
        let kind = self.decl(id)?.kind;
        let decl = &decls[id.slot as usize];
        let label = self.label(id);
        let mismatch = || Error::Config(format!("{action} is not an action of {kind} {label}"));
        let mut cell = self.cells.get(&id).cloned().unwrap_or_else(|| Cell { state: decl.init.clone(), users: 0 });
        if kind == BaseKind::TwoProcTestAndSet {
            let users = cell.users | (1u64 << proc);
            if users.count_ones() > 2 {
                return Err(Error::Capability(format!(
                    "process {proc} is a third user of two-process test&set {label}"
                )));
            }
            cell.users = users;
        }
        let state = &mut cell.state;
        let prior = state.clone();
        let response = match (kind, action) {
            (_, Action::Read) => prior,
            (BaseKind::Register, Action::Write(v)) => {
                *state = v.clone();
                Value::Ok
            }
            (BaseKind::FetchAdd, Action::FetchAdd(delta)) => {
                let current = prior
                    .as_big()
                    .ok_or_else(|| Error::Integrity(format!("fetch&add {label} holds non-integer {prior}")))?;
                *state = Value::from_big(current + delta);
                prior
            }
            (BaseKind::TestAndSet | BaseKind::TwoProcTestAndSet, Action::TestAndSet) => {
                *state = Value::Int(1);
                prior
            }
            (BaseKind::Swap, Action::Swap(v)) => {
                *state = v.clone();
                prior
            }
            (BaseKind::AtomicSnapshot, Action::Scan) => prior,
            (BaseKind::AtomicSnapshot, Action::Update(v)) => {
                let Value::List(items) = state else { return Err(mismatch()) };
                let slot = items
                    .get_mut(proc)
                    .ok_or_else(|| Error::Config(format!("process {proc} has no component in {label}")))?;
                *slot = v.clone();
                Value::Ok
            }
            (BaseKind::AtomicMaxRegister, Action::ReadMax) => prior,
            (BaseKind::AtomicMaxRegister, Action::WriteMax(v)) => {
                if prior.as_int().is_some_and(|c| *v > c) {
                    *state = Value::Int(*v);
                }
                Value::Ok
            }
            (k, a) => {
                let spec = k.container().ok_or_else(mismatch)?;
                let op = match a {
                    Action::Enq(v) => Op::new("enq", v.clone()),
                    Action::Push(v) => Op::new("push", v.clone()),
                    Action::Deq => Op::nullary("deq"),
                    Action::Pop => Op::nullary("pop"),
                    _ => return Err(mismatch()),
                };
                // A base object's operations are instantaneous, so no two
                // of them are ever concurrent.
                let cx = ApplyCtx { op: Some(OpId::new(proc, 0)), overlaps: None };
                let mut outcomes = spec.apply_all(&prior, &op, &cx);
                if outcomes.is_empty() {
                    return Err(mismatch());
                }
                let pick = if outcomes.len() > 1 { choices.choose(outcomes.len()) } else { 0 };
                let (next, response) = outcomes.swap_remove(pick.min(outcomes.len() - 1));
                *state = next;
                response
            }
        };
        // Cells equal to their declaration are left implicit so that equal
        // memories compare equal.
        if cell.state == decl.init && cell.users == 0 {
            self.cells.remove(&id);
        } else {
            self.cells.insert(id, cell);
        }
        Ok(response)
    }
}
