//! Derived-object implementations as resumable per-process step machines.
//!
//! An [`Impl`] is a tree whose leaves are atomic base objects. Driving an
//! operation through [`Impl::step`] performs exactly one base-object action
//! followed by whatever local computation precedes the next action.
//! Composite implementations call their children like any other object, so
//! a catalog program can run over atomic objects or over other programs.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::base::{Action, BaseKind, BaseObjectId, ChoiceSource, GraphNode, ObjectTable, SlotDecl};
use crate::codec::{binary_adjust, decode_binary_view, decode_unary_max, unary_delta, InterleavedWord};
use crate::error::{Error, Result};
use crate::model::{Op, Relation, SequentialSpec, SpecRef};
use crate::value::Value;

pub type InstanceId = u32;

/// Process-private persistent variables, keyed by implementation instance
/// and array index.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Locals(BTreeMap<(InstanceId, u64), i64>);

impl Locals {
    fn key(id: InstanceId, param: Option<u64>) -> (InstanceId, u64) {
        (id, param.unwrap_or(u64::MAX))
    }

    pub fn get(&self, id: InstanceId, param: Option<u64>) -> i64 {
        self.0.get(&Self::key(id, param)).copied().unwrap_or(0)
    }

    pub fn set(&mut self, id: InstanceId, param: Option<u64>, v: i64) {
        self.0.insert(Self::key(id, param), v);
    }
}

/// One base-object access performed by a step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Access {
    pub obj: BaseObjectId,
    pub action: Action,
    pub result: Value,
    /// Component names from the program root down to the accessed object.
    pub labels: Vec<&'static str>,
}

/// Everything a step may touch.
pub struct StepCx<'a> {
    pub table: &'a mut ObjectTable,
    pub locals: &'a mut Locals,
    pub proc: usize,
    pub choices: &'a mut dyn ChoiceSource,
    pub labels: Vec<&'static str>,
    pub access: Option<Access>,
}

impl<'a> StepCx<'a> {
    pub fn new(
        table: &'a mut ObjectTable,
        locals: &'a mut Locals,
        proc: usize,
        choices: &'a mut dyn ChoiceSource,
    ) -> Self {
        StepCx { table, locals, proc, choices, labels: Vec::new(), access: None }
    }
}

pub enum Started {
    Frame(Frame),
    /// Completed without touching shared memory.
    Done(Value),
}

pub enum Poll {
    Pending,
    Ready(Value),
}

/// In-flight state of one operation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Frame {
    Atomic(Action),
    Composite { sub: Box<Frame>, child: u8, param: Option<u64>, st: AlgoState },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AlgoState {
    Idle,
    MaxWrite { k: Option<i64> },
    MaxRead,
    SnapUpdate { v: i64 },
    SnapScan,
    SimpleScan { op: Op },
    SimpleUpdate { resp: Value },
    TasRead,
    Tas { pc: u8, result: Value },
    Multi { name: String, pc: u8, c: i64 },
    Probe { test: bool, i: u64 },
    Put { x: Value, pc: u8 },
    Take(TakeState),
    CounterInc,
    CounterRead { j: u64, sum: i64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TakeState {
    pc: TakePc,
    taken_old: i64,
    max_old: i64,
    taken_new: i64,
    max_new: i64,
    c: i64,
    x: Value,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum TakePc {
    ReadMax,
    ReadItem,
    Tas,
}

enum Next {
    Call { child: u8, param: Option<u64>, op: Op },
    Return(Value),
}

fn call(child: u8, op: Op) -> Next {
    Next::Call { child, param: None, op }
}

fn call_at(child: u8, index: i64, op: Op) -> Next {
    Next::Call { child, param: Some(index.max(0) as u64), op }
}

/// A deliberate defect used to test that the checkers notice it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Mutation {
    /// Replace every fetch&add delta with 0.
    ZeroDelta,
    /// Skip the fetch&add(0) of a write that does not raise the maximum.
    DropNoopStep,
    /// Answer reads from process-local memory instead of shared memory.
    LocalRead,
    /// Apply only the positive half of a binary adjustment.
    DropNegAdj,
    /// Order the linearization graph by topological order alone.
    SkipDominance,
    /// Write `state` before accessing `ts`.
    SwapTsState,
    /// Never write `state`.
    DropStateWrite,
    /// Never advance `curr` on reset.
    ResetSkipsWrite,
    /// Never count lost test&sets, so `taken_new` stays 0.
    LiteralTakenNew,
}

impl Mutation {
    pub const ALL: [Mutation; 9] = [
        Mutation::ZeroDelta,
        Mutation::DropNoopStep,
        Mutation::LocalRead,
        Mutation::DropNegAdj,
        Mutation::SkipDominance,
        Mutation::SwapTsState,
        Mutation::DropStateWrite,
        Mutation::ResetSkipsWrite,
        Mutation::LiteralTakenNew,
    ];

    pub fn name(self) -> String {
        serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
    }

    pub fn parse(name: &str) -> Option<Mutation> {
        Mutation::ALL.into_iter().find(|m| m.name() == name)
    }

    /// Whether the mutation has a target in `algo`.
    pub fn applies_to(self, algo: &Algo) -> bool {
        matches!(
            (self, algo),
            (Mutation::ZeroDelta | Mutation::DropNoopStep | Mutation::LocalRead, Algo::MaxRegisterFa { .. })
                | (Mutation::ZeroDelta | Mutation::DropNegAdj | Mutation::LocalRead, Algo::SnapshotFa { .. })
                | (Mutation::SkipDominance, Algo::SimpleType { .. })
                | (Mutation::SwapTsState | Mutation::DropStateWrite, Algo::ReadableTas)
                | (Mutation::ResetSkipsWrite, Algo::MultiShotTas)
                | (Mutation::LiteralTakenNew, Algo::Set { .. })
        )
    }
}

impl fmt::Display for Mutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Clone, Debug)]
pub enum Algo {
    MaxRegisterFa { n: usize, bound: i64 },
    SnapshotFa { n: usize, bound: i64 },
    SimpleType { n: usize, spec: SpecRef },
    ReadableTas,
    MultiShotTas,
    FetchInc,
    Set { max_offset: i64 },
    CollectCounter { n: usize },
}

#[derive(Clone, Debug)]
pub struct Child {
    pub label: &'static str,
    pub imp: Impl,
    /// Template children are instantiated per array index by the caller;
    /// other children inherit the caller's index.
    pub template: bool,
}

#[derive(Debug)]
pub struct Composite {
    pub id: InstanceId,
    pub algo: Algo,
    pub children: Vec<Child>,
    pub mutation: Option<Mutation>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtomicRef {
    pub slot: u32,
    pub indexed: bool,
    pub kind: BaseKind,
}

#[derive(Clone, Debug)]
pub enum Impl {
    Atomic(AtomicRef),
    Composite(Arc<Composite>),
}

fn int_arg(op: &Op) -> Result<i64> {
    op.arg.as_int().ok_or_else(|| Error::Config(format!("{op} needs an integer argument")))
}

fn int_result(v: &Value) -> Result<i64> {
    match v {
        Value::Bottom => Ok(0),
        v => v.as_int().ok_or_else(|| Error::Integrity(format!("expected an integer, got {v}"))),
    }
}

fn unknown(op: &Op, what: &str) -> Error {
    Error::Config(format!("{what} has no operation {op}"))
}

fn action_for(op: &Op) -> Result<Action> {
    Ok(match op.name.as_str() {
        "read" => Action::Read,
        "write" => Action::Write(op.arg.clone()),
        "fetchAdd" => Action::FetchAdd(op.arg.as_big().ok_or_else(|| Error::Config(format!("{op} needs an integer")))?),
        "fetchAndIncrement" => Action::FetchAdd(BigInt::from(1)),
        "testAndSet" => Action::TestAndSet,
        "swap" => Action::Swap(op.arg.clone()),
        "scan" => Action::Scan,
        "update" => Action::Update(op.arg.clone()),
        "ReadMax" => Action::ReadMax,
        "WriteMax" => Action::WriteMax(int_arg(op)?),
        "enq" => Action::Enq(op.arg.clone()),
        "deq" => Action::Deq,
        "push" => Action::Push(op.arg.clone()),
        "pop" => Action::Pop,
        _ => return Err(unknown(op, "an atomic object")),
    })
}

impl Impl {
    pub fn start(&self, op: &Op, param: Option<u64>, cx: &mut StepCx<'_>) -> Result<Started> {
        match self {
            Impl::Atomic(_) => Ok(Started::Frame(Frame::Atomic(action_for(op)?))),
            Impl::Composite(c) => {
                let (st, next) = c.begin(op, param, cx)?;
                c.drive(st, next, param, cx)
            }
        }
    }

    pub fn step(&self, frame: &mut Frame, param: Option<u64>, cx: &mut StepCx<'_>) -> Result<Poll> {
        match (self, frame) {
            (Impl::Atomic(a), Frame::Atomic(action)) => {
                let index = if a.indexed {
                    param.ok_or_else(|| Error::Config("array object used without an index".into()))?
                } else {
                    0
                };
                let obj = BaseObjectId { slot: a.slot, index };
                let result = cx.table.step(obj, action, cx.proc, cx.choices)?;
                cx.access =
                    Some(Access { obj, action: action.clone(), result: result.clone(), labels: cx.labels.clone() });
                Ok(Poll::Ready(result))
            }
            (Impl::Composite(c), frame @ Frame::Composite { .. }) => c.step(frame, param, cx),
            _ => Err(Error::Integrity("frame does not belong to this implementation".into())),
        }
    }

    /// Maximum number of steps one invocation can take, or `None` when
    /// only lock-freedom is claimed.
    pub fn budget(&self, op: &Op) -> Option<usize> {
        match self {
            Impl::Atomic(_) => Some(1),
            Impl::Composite(c) => c.budget(op),
        }
    }

    pub fn composite(&self) -> Option<&Composite> {
        match self {
            Impl::Composite(c) => Some(c),
            Impl::Atomic(_) => None,
        }
    }
}

impl Composite {
    fn child(&self, i: u8) -> &Child {
        &self.children[i as usize]
    }

    fn mutated(&self, m: Mutation) -> bool {
        self.mutation == Some(m)
    }

    fn drive(&self, mut st: AlgoState, mut next: Next, param: Option<u64>, cx: &mut StepCx<'_>) -> Result<Started> {
        loop {
            match next {
                Next::Return(v) => return Ok(Started::Done(v)),
                Next::Call { child, param: index, op } => {
                    let ch = self.child(child);
                    let cp = if ch.template { index } else { param };
                    cx.labels.push(ch.label);
                    let started = ch.imp.start(&op, cp, cx);
                    cx.labels.pop();
                    match started? {
                        Started::Frame(f) => {
                            return Ok(Started::Frame(Frame::Composite { sub: Box::new(f), child, param: cp, st }))
                        }
                        Started::Done(v) => next = self.resume(&mut st, v, param, cx)?,
                    }
                }
            }
        }
    }

    fn step(&self, frame: &mut Frame, param: Option<u64>, cx: &mut StepCx<'_>) -> Result<Poll> {
        let Frame::Composite { sub, child, param: cp, st } = frame else {
            return Err(Error::Integrity("composite stepped with an atomic frame".into()));
        };
        let ch = self.child(*child);
        cx.labels.push(ch.label);
        let polled = ch.imp.step(sub, *cp, cx);
        cx.labels.pop();
        let v = match polled? {
            Poll::Pending => return Ok(Poll::Pending),
            Poll::Ready(v) => v,
        };
        let mut st = std::mem::replace(st, AlgoState::Idle);
        let next = self.resume(&mut st, v, param, cx)?;
        match self.drive(st, next, param, cx)? {
            Started::Frame(f) => {
                *frame = f;
                Ok(Poll::Pending)
            }
            Started::Done(v) => Ok(Poll::Ready(v)),
        }
    }

    fn begin(&self, op: &Op, param: Option<u64>, cx: &mut StepCx<'_>) -> Result<(AlgoState, Next)> {
        let p = cx.proc;
        let name = op.name.as_str();
        Ok(match &self.algo {
            Algo::MaxRegisterFa { n, bound } => {
                let prev = cx.locals.get(self.id, param);
                match name {
                    "WriteMax" => {
                        let k = int_arg(op)?;
                        if !(0..=*bound).contains(&k) {
                            return Err(Error::Config(format!("WriteMax({k}) outside 0..={bound}")));
                        }
                        if k > prev {
                            let delta = if self.mutated(Mutation::ZeroDelta) {
                                BigInt::from(0)
                            } else {
                                unary_delta(*n, p, prev as u64, k as u64)?
                            };
                            (AlgoState::MaxWrite { k: Some(k) }, call(0, Op::new("fetchAdd", Value::from_big(delta))))
                        } else if self.mutated(Mutation::DropNoopStep) {
                            (AlgoState::Idle, Next::Return(Value::Ok))
                        } else {
                            (AlgoState::MaxWrite { k: None }, call(0, Op::new("fetchAdd", 0.into())))
                        }
                    }
                    "ReadMax" if self.mutated(Mutation::LocalRead) => (AlgoState::Idle, Next::Return(Value::Int(prev))),
                    "ReadMax" => (AlgoState::MaxRead, call(0, Op::new("fetchAdd", 0.into()))),
                    _ => return Err(unknown(op, "maxRegisterFA")),
                }
            }
            Algo::SnapshotFa { n, bound } => {
                let prev = cx.locals.get(self.id, param);
                match name {
                    "update" => {
                        let v = int_arg(op)?;
                        if !(0..*bound).contains(&v) {
                            return Err(Error::Config(format!("update({v}) outside 0..{bound}")));
                        }
                        let delta = if v == prev || self.mutated(Mutation::ZeroDelta) {
                            BigInt::from(0)
                        } else {
                            let (pos, neg) = binary_adjust(*n, p, prev as u64, v as u64)?;
                            if self.mutated(Mutation::DropNegAdj) {
                                pos
                            } else {
                                pos - neg
                            }
                        };
                        (AlgoState::SnapUpdate { v }, call(0, Op::new("fetchAdd", Value::from_big(delta))))
                    }
                    "scan" if self.mutated(Mutation::LocalRead) => {
                        let mut view = vec![Value::Int(0); *n];
                        view[p] = Value::Int(prev);
                        (AlgoState::Idle, Next::Return(Value::List(view)))
                    }
                    "scan" => (AlgoState::SnapScan, call(0, Op::new("fetchAdd", 0.into()))),
                    _ => return Err(unknown(op, "snapshotFA")),
                }
            }
            Algo::SimpleType { .. } => (AlgoState::SimpleScan { op: op.clone() }, call(0, Op::nullary("scan"))),
            Algo::ReadableTas => match name {
                "read" => (AlgoState::TasRead, call(0, Op::nullary("read"))),
                "testAndSet" if self.mutated(Mutation::SwapTsState) => {
                    (AlgoState::Tas { pc: 0, result: Value::Nil }, call(0, Op::new("write", 1.into())))
                }
                "testAndSet" => (AlgoState::Tas { pc: 0, result: Value::Nil }, call(1, Op::nullary("testAndSet"))),
                _ => return Err(unknown(op, "readableTAS")),
            },
            Algo::MultiShotTas => match name {
                "testAndSet" | "read" | "reset" => {
                    (AlgoState::Multi { name: op.name.clone(), pc: 0, c: 0 }, call(0, Op::nullary("ReadMax")))
                }
                _ => return Err(unknown(op, "multiShotTAS")),
            },
            Algo::FetchInc => match name {
                "fetchAndIncrement" => {
                    (AlgoState::Probe { test: true, i: 0 }, call_at(0, 0, Op::nullary("testAndSet")))
                }
                "read" => (AlgoState::Probe { test: false, i: 0 }, call_at(0, 0, Op::nullary("read"))),
                _ => return Err(unknown(op, "fetchIncFromTAS")),
            },
            Algo::Set { .. } => match name {
                "put" => (AlgoState::Put { x: op.arg.clone(), pc: 0 }, call(0, Op::nullary("fetchAndIncrement"))),
                "take" => (
                    AlgoState::Take(TakeState {
                        pc: TakePc::ReadMax,
                        taken_old: 0,
                        max_old: 0,
                        taken_new: 0,
                        max_new: 0,
                        c: 0,
                        x: Value::Nil,
                    }),
                    call(0, Op::nullary("read")),
                ),
                _ => return Err(unknown(op, "setFromTAS")),
            },
            Algo::CollectCounter { .. } => match name {
                "inc" => {
                    let count = cx.locals.get(self.id, param) + 1;
                    cx.locals.set(self.id, param, count);
                    (AlgoState::CounterInc, call_at(0, p as i64, Op::new("write", count.into())))
                }
                "read" => (AlgoState::CounterRead { j: 0, sum: 0 }, call_at(0, 0, Op::nullary("read"))),
                _ => return Err(unknown(op, "collectCounter")),
            },
        })
    }

    fn resume(&self, st: &mut AlgoState, v: Value, param: Option<u64>, cx: &mut StepCx<'_>) -> Result<Next> {
        let next = match (&self.algo, st) {
            (Algo::MaxRegisterFa { .. }, AlgoState::MaxWrite { k }) => {
                if let Some(k) = *k {
                    cx.locals.set(self.id, param, k);
                }
                Next::Return(Value::Ok)
            }
            (Algo::MaxRegisterFa { n, .. }, AlgoState::MaxRead) => {
                let word = InterleavedWord::from_state(&v.as_big().unwrap_or_default(), *n)?;
                let max = decode_unary_max(&word)?.into_iter().max().unwrap_or(0);
                Next::Return(Value::Int(max as i64))
            }
            (Algo::SnapshotFa { .. }, AlgoState::SnapUpdate { v: new }) => {
                cx.locals.set(self.id, param, *new);
                Next::Return(Value::Ok)
            }
            (Algo::SnapshotFa { n, .. }, AlgoState::SnapScan) => {
                let word = InterleavedWord::from_state(&v.as_big().unwrap_or_default(), *n)?;
                let view = decode_binary_view(&word).into_iter().map(|c| Value::from_big(BigInt::from(c))).collect();
                Next::Return(Value::List(view))
            }
            (Algo::SimpleType { n, spec }, st @ AlgoState::SimpleScan { .. }) => {
                let AlgoState::SimpleScan { op } = st else { unreachable!() };
                let view = view_pointers(&v, *n)?;
                let skip = self.mutated(Mutation::SkipDominance);
                let resp = simple_type_response(spec.as_ref(), cx.table, &view, op, skip)?;
                let counter = cx.locals.get(self.id, param);
                cx.table.insert_heap_node(
                    cx.proc,
                    counter as u64,
                    GraphNode { invocation: op.clone(), response: resp.clone(), preceding: view },
                );
                cx.locals.set(self.id, param, counter + 1);
                *st = AlgoState::SimpleUpdate { resp };
                call(0, Op::new("update", Value::Int(counter + 1)))
            }
            (Algo::SimpleType { .. }, AlgoState::SimpleUpdate { resp }) => Next::Return(resp.clone()),
            (Algo::ReadableTas, AlgoState::TasRead) => Next::Return(v),
            (Algo::ReadableTas, AlgoState::Tas { pc, result }) => {
                let swapped = self.mutated(Mutation::SwapTsState);
                match (*pc, swapped) {
                    (0, false) => {
                        *result = v;
                        if self.mutated(Mutation::DropStateWrite) {
                            Next::Return(result.clone())
                        } else {
                            *pc = 1;
                            call(0, Op::new("write", 1.into()))
                        }
                    }
                    (0, true) => {
                        *pc = 1;
                        call(1, Op::nullary("testAndSet"))
                    }
                    (_, false) => Next::Return(result.clone()),
                    (_, true) => Next::Return(v),
                }
            }
            (Algo::MultiShotTas, AlgoState::Multi { name, pc, c }) => match *pc {
                0 => {
                    *c = int_result(&v)? + 1;
                    *pc = 1;
                    let inner = if name == "reset" { "read" } else { name.as_str() };
                    call_at(1, *c, Op::nullary(inner))
                }
                1 if name == "reset" => {
                    if int_result(&v)? == 1 && !self.mutated(Mutation::ResetSkipsWrite) {
                        *pc = 2;
                        // curr holds the index minus one
                        call(0, Op::new("WriteMax", Value::Int(*c)))
                    } else {
                        Next::Return(Value::Ok)
                    }
                }
                1 => Next::Return(v),
                _ => Next::Return(Value::Ok),
            },
            (Algo::FetchInc, AlgoState::Probe { test, i }) => {
                if int_result(&v)? == 0 {
                    Next::Return(Value::Int(*i as i64))
                } else {
                    *i += 1;
                    let name = if *test { "testAndSet" } else { "read" };
                    call_at(0, *i as i64, Op::nullary(name))
                }
            }
            (Algo::Set { max_offset }, AlgoState::Put { x, pc }) => {
                if *pc == 0 {
                    *pc = 1;
                    call_at(1, int_result(&v)? + max_offset, Op::new("write", x.clone()))
                } else {
                    Next::Return(Value::Ok)
                }
            }
            (Algo::Set { max_offset }, AlgoState::Take(t)) => {
                match t.pc {
                    TakePc::ReadMax => {
                        t.max_new = int_result(&v)? + max_offset - 1;
                        t.taken_new = 0;
                        t.c = 1;
                    }
                    TakePc::ReadItem => {
                        if v != Value::Bottom {
                            t.pc = TakePc::Tas;
                            t.x = v;
                            return Ok(call_at(2, t.c, Op::nullary("testAndSet")));
                        }
                        t.c += 1;
                    }
                    TakePc::Tas => {
                        if int_result(&v)? == 0 {
                            return Ok(Next::Return(t.x.clone()));
                        }
                        if !self.mutated(Mutation::LiteralTakenNew) {
                            t.taken_new += 1;
                        }
                        t.c += 1;
                    }
                }
                if t.c <= t.max_new {
                    t.pc = TakePc::ReadItem;
                    call_at(1, t.c, Op::nullary("read"))
                } else if t.taken_new == t.taken_old && t.max_new == t.max_old {
                    Next::Return(Value::Empty)
                } else {
                    t.taken_old = t.taken_new;
                    t.max_old = t.max_new;
                    t.pc = TakePc::ReadMax;
                    call(0, Op::nullary("read"))
                }
            }
            (Algo::CollectCounter { .. }, AlgoState::CounterInc) => Next::Return(Value::Ok),
            (Algo::CollectCounter { n }, AlgoState::CounterRead { j, sum }) => {
                *sum += int_result(&v)?;
                *j += 1;
                if (*j as usize) < *n {
                    call_at(0, *j as i64, Op::nullary("read"))
                } else {
                    Next::Return(Value::Int(*sum))
                }
            }
            (_, st) => return Err(Error::Integrity(format!("unexpected resume in state {st:?}"))),
        };
        Ok(next)
    }

    fn budget(&self, op: &Op) -> Option<usize> {
        let child = |i: usize, name: &str, arg: Value| self.children[i].imp.budget(&Op::new(name, arg));
        match &self.algo {
            Algo::MaxRegisterFa { .. } | Algo::SnapshotFa { .. } => child(0, "fetchAdd", 0.into()),
            Algo::SimpleType { .. } => Some(child(0, "scan", Value::Nil)? + child(0, "update", 1.into())?),
            Algo::ReadableTas => match op.name.as_str() {
                "read" => child(0, "read", Value::Nil),
                _ => Some(child(1, "testAndSet", Value::Nil)? + child(0, "write", 1.into())?),
            },
            Algo::MultiShotTas => {
                let head = child(0, "ReadMax", Value::Nil)?;
                match op.name.as_str() {
                    "reset" => Some(head + child(1, "read", Value::Nil)? + child(0, "WriteMax", 1.into())?),
                    name => Some(head + child(1, name, Value::Nil)?),
                }
            }
            Algo::FetchInc | Algo::Set { .. } => None,
            Algo::CollectCounter { n } => match op.name.as_str() {
                "inc" => child(0, "write", 1.into()),
                _ => Some(child(0, "read", Value::Nil)? * n),
            },
        }
    }
}

/// Decodes a scanned root into per-process node pointers.
fn view_pointers(v: &Value, n: usize) -> Result<Vec<u64>> {
    let items = v.as_list().ok_or_else(|| Error::Integrity(format!("scan returned {v}")))?;
    if items.len() != n {
        return Err(Error::Integrity(format!("scan returned {} components, expected {n}", items.len())));
    }
    items
        .iter()
        .map(|c| match c.as_int() {
            Some(x) if x >= 0 => Ok(x as u64),
            _ => Err(Error::Integrity(format!("bad node pointer {c}"))),
        })
        .collect()
}

/// A node of the graph reconstructed from a scan.
#[derive(Clone, Debug)]
pub struct ViewNode {
    pub proc: usize,
    pub counter: u64,
    pub depth: usize,
    pub node: GraphNode,
}

/// Collects every node reachable from `view`, breadth-first from the view
/// entries in ascending process order, children in ascending process order.
pub fn collect_graph(table: &ObjectTable, view: &[u64]) -> Result<Vec<ViewNode>> {
    let mut seen: BTreeMap<(usize, u64), GraphNode> = BTreeMap::new();
    let mut queue: VecDeque<(usize, u64)> = VecDeque::new();
    let mut order = Vec::new();
    for (j, &ptr) in view.iter().enumerate() {
        if ptr > 0 {
            queue.push_back((j, ptr - 1));
        }
    }
    while let Some(key) = queue.pop_front() {
        if seen.contains_key(&key) {
            continue;
        }
        let node = table
            .heap_node(key.0, key.1)
            .ok_or_else(|| Error::Integrity(format!("dangling node pointer {key:?}")))?
            .clone();
        for (j, &ptr) in node.preceding.iter().enumerate() {
            if ptr > 0 {
                queue.push_back((j, ptr - 1));
            }
        }
        order.push(key);
        seen.insert(key, node);
    }
    // depth = longest chain of predecessors
    let mut depth: BTreeMap<(usize, u64), usize> = BTreeMap::new();
    let mut keys: Vec<(usize, u64)> = seen.keys().copied().collect();
    // a predecessor of process j always has a smaller counter than any node
    // that points at it from j's later operations, so resolving by counter
    // rounds converges; iterate to a fixed point to stay independent of it
    loop {
        let mut changed = false;
        for k in &keys {
            let node = &seen[k];
            let d = node
                .preceding
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0)
                .map(|(j, &p)| depth.get(&(j, p - 1)).map_or(1, |d| d + 1))
                .max()
                .unwrap_or(0);
            if depth.get(k) != Some(&d) {
                depth.insert(*k, d);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    keys.sort_by_key(|k| (depth[k], k.0, k.1));
    let _ = order;
    Ok(keys
        .into_iter()
        .map(|k| ViewNode { proc: k.0, counter: k.1, depth: depth[&k], node: seen[&k].clone() })
        .collect())
}

/// Whether `a` dominates `b`: `b` is dominated by `a` if `a` overwrites `b`
/// but not vice versa, or they overwrite each other and `b`'s process has
/// the smaller id.
fn dominates(spec: &dyn SequentialSpec, a: &ViewNode, b: &ViewNode) -> bool {
    let Some(rel) = spec.relation(&a.node.invocation, &b.node.invocation) else {
        return false;
    };
    match rel {
        Relation::LeftOverwritesRight => true,
        Relation::BothOverwrite => b.proc < a.proc,
        Relation::RightOverwritesLeft | Relation::Commute => false,
    }
}

/// The sequential order the construction assigns to a scanned graph.
pub fn lingraph_order(spec: &dyn SequentialSpec, nodes: &[ViewNode], skip_dominance: bool) -> Vec<usize> {
    let k = nodes.len();
    let index: BTreeMap<(usize, u64), usize> =
        nodes.iter().enumerate().map(|(i, v)| ((v.proc, v.counter), i)).collect();
    // reach[x] = set of nodes reachable from x (excluding x)
    let mut reach = vec![vec![false; k]; k];
    let mut succ = vec![Vec::new(); k];
    let add_edge = |reach: &mut Vec<Vec<bool>>, succ: &mut Vec<Vec<usize>>, u: usize, v: usize| {
        succ[u].push(v);
        let mut into_v = reach[v].clone();
        into_v[v] = true;
        for (x, row) in reach.iter_mut().enumerate() {
            if x == u || row[u] {
                for (r, &hit) in row.iter_mut().zip(&into_v) {
                    *r |= hit;
                }
            }
        }
    };
    for (i, v) in nodes.iter().enumerate() {
        for (j, &p) in v.node.preceding.iter().enumerate() {
            if p > 0 {
                if let Some(&from) = index.get(&(j, p - 1)) {
                    add_edge(&mut reach, &mut succ, from, i);
                }
            }
        }
    }
    if !skip_dominance {
        for i in 0..k {
            for j in i + 1..k {
                // adding (u, v) completes a cycle iff v already reaches u
                if dominates(spec, &nodes[i], &nodes[j]) && !reach[i][j] {
                    add_edge(&mut reach, &mut succ, j, i);
                }
                if dominates(spec, &nodes[j], &nodes[i]) && !reach[j][i] {
                    add_edge(&mut reach, &mut succ, i, j);
                }
            }
        }
    }
    // Kahn's algorithm, ties broken by the initial topological order
    let mut indeg = vec![0usize; k];
    for s in &succ {
        for &v in s {
            indeg[v] += 1;
        }
    }
    let mut ready: std::collections::BTreeSet<usize> = (0..k).filter(|&i| indeg[i] == 0).collect();
    let mut out = Vec::with_capacity(k);
    while let Some(&u) = ready.iter().next() {
        ready.remove(&u);
        out.push(u);
        for &v in &succ[u] {
            indeg[v] -= 1;
            if indeg[v] == 0 {
                ready.insert(v);
            }
        }
    }
    out
}

fn simple_type_response(
    spec: &dyn SequentialSpec,
    table: &ObjectTable,
    view: &[u64],
    op: &Op,
    skip_dominance: bool,
) -> Result<Value> {
    let nodes = collect_graph(table, view)?;
    let order = lingraph_order(spec, &nodes, skip_dominance);
    let mut state = spec.initial_state();
    for i in order {
        let inv = &nodes[i].node.invocation;
        state = spec.apply(&state, inv).ok_or_else(|| Error::Config(format!("{} cannot apply {inv}", spec.name())))?.0;
    }
    Ok(spec.apply(&state, op).ok_or_else(|| Error::Config(format!("{} cannot apply {op}", spec.name())))?.1)
}

/// Progress guarantee claimed by a catalog entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Progress {
    WaitFree,
    LockFree,
}

/// Incrementally declares base objects and implementation instances.
#[derive(Debug, Default)]
pub struct Builder {
    pub decls: Vec<SlotDecl>,
    next_id: InstanceId,
}

impl Builder {
    pub fn new() -> Self {
        Builder::default()
    }

    pub fn atomic(&mut self, name: &str, kind: BaseKind, init: Value, array: bool) -> Impl {
        let slot = self.decls.len() as u32;
        self.decls.push(SlotDecl { name: name.to_string(), kind, init, array });
        Impl::Atomic(AtomicRef { slot, indexed: array, kind })
    }

    pub fn composite(&mut self, algo: Algo, children: Vec<Child>, mutation: Option<Mutation>) -> Impl {
        let id = self.next_id;
        self.next_id += 1;
        Impl::Composite(Arc::new(Composite { id, algo, children, mutation }))
    }
}

pub fn child(label: &'static str, imp: Impl) -> Child {
    Child { label, imp, template: false }
}

pub fn template(label: &'static str, imp: Impl) -> Child {
    Child { label, imp, template: true }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::ScriptedChoices;
    use crate::specs::{CounterSpec, MaxRegisterSpec};

    /// Runs each (proc, op) to completion in turn.
    fn run_seq(imp: &Impl, decls: Vec<SlotDecl>, ops: &[(usize, Op)]) -> (Vec<Value>, Vec<usize>) {
        let mut table = ObjectTable::new(decls);
        let mut locals: Vec<Locals> = vec![Locals::default(); 4];
        let mut out = Vec::new();
        let mut steps = Vec::new();
        for (p, op) in ops {
            let mut choices = ScriptedChoices::default();
            let mut cx = StepCx::new(&mut table, &mut locals[*p], *p, &mut choices);
            let mut count = 0;
            let v = match imp.start(op, None, &mut cx).unwrap() {
                Started::Done(v) => v,
                Started::Frame(mut f) => loop {
                    count += 1;
                    if let Poll::Ready(v) = imp.step(&mut f, None, &mut cx).unwrap() {
                        break v;
                    }
                },
            };
            out.push(v);
            steps.push(count);
        }
        (out, steps)
    }

    fn max_register(b: &mut Builder, n: usize) -> Impl {
        let r = b.atomic("R", BaseKind::FetchAdd, Value::Int(0), false);
        b.composite(Algo::MaxRegisterFa { n, bound: 64 }, vec![child("R", r)], None)
    }

    #[test]
    fn max_register_sequential() {
        let mut b = Builder::new();
        let m = max_register(&mut b, 2);
        let (out, steps) = run_seq(
            &m,
            b.decls,
            &[(0, Op::new("WriteMax", 2.into())), (0, Op::new("WriteMax", 1.into())), (1, Op::nullary("ReadMax"))],
        );
        assert_eq!(out, vec![Value::Ok, Value::Ok, Value::Int(2)]);
        assert_eq!(steps, vec![1, 1, 1]);
    }

    #[test]
    fn snapshot_update_then_scan() {
        let mut b = Builder::new();
        let r = b.atomic("R", BaseKind::FetchAdd, Value::Int(0), false);
        let s = b.composite(Algo::SnapshotFa { n: 2, bound: 256 }, vec![child("R", r)], None);
        let (out, _) = run_seq(
            &s,
            b.decls,
            &[(1, Op::nullary("scan")), (0, Op::new("update", 3.into())), (1, Op::nullary("scan"))],
        );
        assert_eq!(out[0], Value::List(vec![0.into(), 0.into()]));
        assert_eq!(out[2], Value::List(vec![3.into(), 0.into()]));
    }

    fn simple(b: &mut Builder, spec: SpecRef, n: usize) -> Impl {
        let r = b.atomic("R", BaseKind::FetchAdd, Value::Int(0), false);
        let snap = b.composite(Algo::SnapshotFa { n, bound: 256 }, vec![child("R", r)], None);
        b.composite(Algo::SimpleType { n, spec }, vec![child("root", snap)], None)
    }

    #[test]
    fn simple_type_sequential_max() {
        let mut b = Builder::new();
        let s = simple(&mut b, Arc::new(MaxRegisterSpec), 2);
        let (out, steps) = run_seq(&s, b.decls, &[(0, Op::new("WriteMax", 5.into())), (1, Op::nullary("ReadMax"))]);
        assert_eq!(out, vec![Value::Ok, Value::Int(5)]);
        assert_eq!(steps, vec![2, 2]);
    }

    #[test]
    fn simple_type_sequential_counter() {
        let mut b = Builder::new();
        let s = simple(&mut b, Arc::new(CounterSpec), 2);
        let (out, _) = run_seq(
            &s,
            b.decls,
            &[(0, Op::nullary("inc")), (1, Op::nullary("inc")), (0, Op::nullary("inc")), (1, Op::nullary("read"))],
        );
        assert_eq!(out[3], Value::Int(3));
    }

    #[test]
    fn lingraph_breaks_mutual_overwrite_by_pid() {
        let node = |proc: usize, v: i64| ViewNode {
            proc,
            counter: 0,
            depth: 0,
            node: GraphNode { invocation: Op::new("WriteMax", v.into()), response: Value::Ok, preceding: vec![0, 0] },
        };
        let nodes = vec![node(1, 1), node(0, 1)];
        let order = lingraph_order(&MaxRegisterSpec, &nodes, false);
        // p0's write is dominated, so it comes first
        assert_eq!(order, vec![1, 0]);
        let nodes = vec![node(0, 2), node(1, 1)];
        assert_eq!(lingraph_order(&MaxRegisterSpec, &nodes, false), vec![1, 0]);
    }

    fn tas_array(b: &mut Builder, name_state: &str, name_ts: &str) -> Impl {
        let st = b.atomic(name_state, BaseKind::Register, Value::Int(0), true);
        let ts = b.atomic(name_ts, BaseKind::TestAndSet, Value::Int(0), true);
        b.composite(Algo::ReadableTas, vec![child("state", st), child("ts", ts)], None)
    }

    #[test]
    fn readable_tas_sequential() {
        let mut b = Builder::new();
        let st = b.atomic("state", BaseKind::Register, Value::Int(0), false);
        let ts = b.atomic("ts", BaseKind::TestAndSet, Value::Int(0), false);
        let t = b.composite(Algo::ReadableTas, vec![child("state", st), child("ts", ts)], None);
        let (out, steps) = run_seq(
            &t,
            b.decls,
            &[
                (0, Op::nullary("read")),
                (0, Op::nullary("testAndSet")),
                (1, Op::nullary("testAndSet")),
                (2, Op::nullary("read")),
            ],
        );
        assert_eq!(out, vec![Value::Int(0), Value::Int(0), Value::Int(1), Value::Int(1)]);
        assert_eq!(steps, vec![1, 2, 2, 1]);
    }

    #[test]
    fn multishot_sequential() {
        let mut b = Builder::new();
        let curr = max_register(&mut b, 2);
        let ts = tas_array(&mut b, "S", "T");
        let m = b.composite(Algo::MultiShotTas, vec![child("curr", curr), template("TS", ts)], None);
        let (out, _) = run_seq(
            &m,
            b.decls,
            &[
                (0, Op::nullary("reset")),
                (0, Op::nullary("testAndSet")),
                (1, Op::nullary("testAndSet")),
                (1, Op::nullary("reset")),
                (0, Op::nullary("read")),
                (0, Op::nullary("testAndSet")),
            ],
        );
        assert_eq!(out, vec![Value::Ok, 0.into(), 1.into(), Value::Ok, 0.into(), 0.into()]);
    }

    #[test]
    fn fetch_inc_sequential() {
        let mut b = Builder::new();
        let m = b.atomic("M", BaseKind::TestAndSet, Value::Int(0), true);
        let f = b.composite(Algo::FetchInc, vec![template("M", m)], None);
        let fi = Op::nullary("fetchAndIncrement");
        let (out, _) = run_seq(
            &f,
            b.decls,
            &[(0, Op::nullary("read")), (0, fi.clone()), (1, fi.clone()), (0, fi), (1, Op::nullary("read"))],
        );
        assert_eq!(out, vec![0.into(), 0.into(), 1.into(), 2.into(), 3.into()]);
    }

    #[test]
    fn set_sequential() {
        let mut b = Builder::new();
        let max = b.atomic("Max", BaseKind::FetchAdd, Value::Int(1), false);
        let items = b.atomic("Items", BaseKind::Register, Value::Bottom, true);
        let ts = b.atomic("TS", BaseKind::TestAndSet, Value::Int(0), true);
        let s = b.composite(
            Algo::Set { max_offset: 0 },
            vec![child("Max", max), template("Items", items), template("TS", ts)],
            None,
        );
        let (out, _) = run_seq(
            &s,
            b.decls,
            &[
                (0, Op::nullary("take")),
                (0, Op::new("put", 7.into())),
                (1, Op::nullary("take")),
                (1, Op::nullary("take")),
            ],
        );
        assert_eq!(out, vec![Value::Empty, Value::Ok, Value::Int(7), Value::Empty]);
    }

    #[test]
    fn budgets() {
        let mut b = Builder::new();
        let s = simple(&mut b, Arc::new(MaxRegisterSpec), 2);
        assert_eq!(s.budget(&Op::nullary("ReadMax")), Some(2));
        let curr = max_register(&mut b, 2);
        let ts = tas_array(&mut b, "S", "T");
        let m = b.composite(Algo::MultiShotTas, vec![child("curr", curr), template("TS", ts)], None);
        assert_eq!(m.budget(&Op::nullary("reset")), Some(3));
        assert_eq!(m.budget(&Op::nullary("testAndSet")), Some(3));
    }

    #[test]
    fn mutation_names_round_trip() {
        for m in Mutation::ALL {
            assert_eq!(Mutation::parse(&m.name()), Some(m));
        }
    }
}
