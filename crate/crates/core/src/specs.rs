//! Sequential specifications of every object type used by the lab.

use std::sync::Arc;

use crate::model::{ApplyCtx, Op, OpId, Relation, SequentialSpec, SpecRef};
use crate::value::Value;

fn int_state(s: &Value) -> Option<i64> {
    s.as_int()
}

fn list(items: Vec<Value>) -> Value {
    Value::List(items)
}

fn items_of(s: &Value) -> Vec<Value> {
    s.as_list().map(<[Value]>::to_vec).unwrap_or_default()
}

/// Read/write register over integers.
#[derive(Debug, Clone)]
pub struct RegisterSpec {
    pub initial: i64,
}

impl RegisterSpec {
    pub fn new(initial: i64) -> Self {
        RegisterSpec { initial }
    }
}

impl SequentialSpec for RegisterSpec {
    fn name(&self) -> String {
        "register".into()
    }

    fn initial_state(&self) -> Value {
        Value::Int(self.initial)
    }

    fn apply_all(&self, state: &Value, op: &Op, _: &ApplyCtx<'_>) -> Vec<(Value, Value)> {
        match op.name.as_str() {
            "write" if op.arg.as_int().is_some() => vec![(op.arg.clone(), Value::Ok)],
            "read" => vec![(state.clone(), state.clone())],
            _ => vec![],
        }
    }

    fn domain(&self, values: &[i64]) -> Vec<Op> {
        let mut ops: Vec<Op> = values.iter().map(|&v| Op::new("write", v.into())).collect();
        ops.push(Op::nullary("read"));
        ops
    }

    fn relation(&self, a: &Op, b: &Op) -> Option<Relation> {
        match (a.name.as_str(), b.name.as_str()) {
            ("write", "write") => Some(Relation::BothOverwrite),
            ("write", "read") => Some(Relation::LeftOverwritesRight),
            ("read", "write") => Some(Relation::RightOverwritesLeft),
            ("read", "read") => Some(Relation::Commute),
            _ => None,
        }
    }

    fn has_relation(&self) -> bool {
        true
    }

    fn is_valid_state(&self, state: &Value) -> bool {
        int_state(state).is_some()
    }
}

/// Max register: `WriteMax(v)` and `ReadMax`, initially 0.
#[derive(Debug, Clone, Default)]
pub struct MaxRegisterSpec;

impl SequentialSpec for MaxRegisterSpec {
    fn name(&self) -> String {
        "maxRegister".into()
    }

    fn initial_state(&self) -> Value {
        Value::Int(0)
    }

    fn apply_all(&self, state: &Value, op: &Op, _: &ApplyCtx<'_>) -> Vec<(Value, Value)> {
        let Some(s) = int_state(state) else { return vec![] };
        match (op.name.as_str(), op.arg.as_int()) {
            ("WriteMax", Some(v)) => vec![(Value::Int(s.max(v)), Value::Ok)],
            ("ReadMax", _) => vec![(state.clone(), state.clone())],
            _ => vec![],
        }
    }

    fn domain(&self, values: &[i64]) -> Vec<Op> {
        let mut ops: Vec<Op> = values.iter().map(|&v| Op::new("WriteMax", v.into())).collect();
        ops.push(Op::nullary("ReadMax"));
        ops
    }

    fn relation(&self, a: &Op, b: &Op) -> Option<Relation> {
        match (a.name.as_str(), b.name.as_str()) {
            ("WriteMax", "WriteMax") => {
                let (x, y) = (a.arg.as_int()?, b.arg.as_int()?);
                Some(match x.cmp(&y) {
                    std::cmp::Ordering::Greater => Relation::LeftOverwritesRight,
                    std::cmp::Ordering::Less => Relation::RightOverwritesLeft,
                    std::cmp::Ordering::Equal => Relation::BothOverwrite,
                })
            }
            ("WriteMax", "ReadMax") => Some(Relation::LeftOverwritesRight),
            ("ReadMax", "WriteMax") => Some(Relation::RightOverwritesLeft),
            ("ReadMax", "ReadMax") => Some(Relation::Commute),
            _ => None,
        }
    }

    fn has_relation(&self) -> bool {
        true
    }

    fn is_valid_state(&self, state: &Value) -> bool {
        int_state(state).is_some_and(|v| v >= 0)
    }
}

/// Counter: `inc` and `read`, initially 0.
#[derive(Debug, Clone, Default)]
pub struct CounterSpec;

impl SequentialSpec for CounterSpec {
    fn name(&self) -> String {
        "counter".into()
    }

    fn initial_state(&self) -> Value {
        Value::Int(0)
    }

    fn apply_all(&self, state: &Value, op: &Op, _: &ApplyCtx<'_>) -> Vec<(Value, Value)> {
        let Some(s) = int_state(state) else { return vec![] };
        match op.name.as_str() {
            "inc" => vec![(Value::Int(s + 1), Value::Ok)],
            "read" => vec![(state.clone(), state.clone())],
            _ => vec![],
        }
    }

    fn domain(&self, _values: &[i64]) -> Vec<Op> {
        vec![Op::nullary("inc"), Op::nullary("read")]
    }

    fn relation(&self, a: &Op, b: &Op) -> Option<Relation> {
        match (a.name.as_str(), b.name.as_str()) {
            ("inc", "inc") | ("read", "read") => Some(Relation::Commute),
            ("inc", "read") => Some(Relation::LeftOverwritesRight),
            ("read", "inc") => Some(Relation::RightOverwritesLeft),
            _ => None,
        }
    }

    fn has_relation(&self) -> bool {
        true
    }

    fn is_valid_state(&self, state: &Value) -> bool {
        int_state(state).is_some_and(|v| v >= 0)
    }
}

/// Single-writer atomic snapshot: `update(v)` writes the caller's
/// component, `scan` returns the whole vector.
#[derive(Debug, Clone)]
pub struct SnapshotSpec {
    pub n: usize,
}

impl SequentialSpec for SnapshotSpec {
    fn name(&self) -> String {
        "snapshot".into()
    }

    fn initial_state(&self) -> Value {
        list(vec![Value::Int(0); self.n])
    }

    fn apply_all(&self, state: &Value, op: &Op, cx: &ApplyCtx<'_>) -> Vec<(Value, Value)> {
        match op.name.as_str() {
            "scan" => vec![(state.clone(), state.clone())],
            "update" => {
                let Some(id) = cx.op else { return vec![] };
                let mut items = items_of(state);
                if id.proc.0 >= items.len() || op.arg.as_int().is_none() {
                    return vec![];
                }
                items[id.proc.0] = op.arg.clone();
                vec![(list(items), Value::Ok)]
            }
            _ => vec![],
        }
    }

    fn domain(&self, values: &[i64]) -> Vec<Op> {
        let mut ops: Vec<Op> = values.iter().map(|&v| Op::new("update", v.into())).collect();
        ops.push(Op::nullary("scan"));
        ops
    }

    fn is_valid_state(&self, state: &Value) -> bool {
        state.as_list().is_some_and(|c| c.len() == self.n && c.iter().all(|v| v.as_int().is_some()))
    }
}

/// Readable test&set; with `multi_shot` it also supports `reset`.
#[derive(Debug, Clone)]
pub struct TestAndSetSpec {
    pub multi_shot: bool,
}

impl SequentialSpec for TestAndSetSpec {
    fn name(&self) -> String {
        if self.multi_shot { "multiShotTestAndSet" } else { "testAndSet" }.into()
    }

    fn initial_state(&self) -> Value {
        Value::Int(0)
    }

    fn apply_all(&self, state: &Value, op: &Op, _: &ApplyCtx<'_>) -> Vec<(Value, Value)> {
        match op.name.as_str() {
            "testAndSet" => vec![(Value::Int(1), state.clone())],
            "read" => vec![(state.clone(), state.clone())],
            "reset" if self.multi_shot => vec![(Value::Int(0), Value::Ok)],
            _ => vec![],
        }
    }

    fn domain(&self, _values: &[i64]) -> Vec<Op> {
        let mut ops = vec![Op::nullary("testAndSet"), Op::nullary("read")];
        if self.multi_shot {
            ops.push(Op::nullary("reset"));
        }
        ops
    }

    fn is_valid_state(&self, state: &Value) -> bool {
        matches!(state, Value::Int(0) | Value::Int(1))
    }
}

/// Readable fetch&increment starting at 0.
#[derive(Debug, Clone, Default)]
pub struct FetchIncSpec;

impl SequentialSpec for FetchIncSpec {
    fn name(&self) -> String {
        "fetchAndIncrement".into()
    }

    fn initial_state(&self) -> Value {
        Value::Int(0)
    }

    fn apply_all(&self, state: &Value, op: &Op, _: &ApplyCtx<'_>) -> Vec<(Value, Value)> {
        let Some(s) = int_state(state) else { return vec![] };
        match op.name.as_str() {
            "fetchAndIncrement" => vec![(Value::Int(s + 1), state.clone())],
            "read" => vec![(state.clone(), state.clone())],
            _ => vec![],
        }
    }

    fn domain(&self, _values: &[i64]) -> Vec<Op> {
        vec![Op::nullary("fetchAndIncrement"), Op::nullary("read")]
    }

    fn is_valid_state(&self, state: &Value) -> bool {
        int_state(state).is_some_and(|v| v >= 0)
    }
}

/// Set with `put(x)` and a nondeterministic `take`.
#[derive(Debug, Clone, Default)]
pub struct SetSpec;

impl SequentialSpec for SetSpec {
    fn name(&self) -> String {
        "set".into()
    }

    fn initial_state(&self) -> Value {
        list(vec![])
    }

    fn apply_all(&self, state: &Value, op: &Op, _: &ApplyCtx<'_>) -> Vec<(Value, Value)> {
        let items = items_of(state);
        match op.name.as_str() {
            "put" => {
                let mut next = items;
                if let Err(at) = next.binary_search(&op.arg) {
                    next.insert(at, op.arg.clone());
                }
                vec![(list(next), Value::Ok)]
            }
            "take" if items.is_empty() => vec![(state.clone(), Value::Empty)],
            "take" => (0..items.len())
                .map(|i| {
                    let mut rest = items.clone();
                    let x = rest.remove(i);
                    (list(rest), x)
                })
                .collect(),
            _ => vec![],
        }
    }

    fn domain(&self, values: &[i64]) -> Vec<Op> {
        let mut ops: Vec<Op> = values.iter().map(|&v| Op::new("put", v.into())).collect();
        ops.push(Op::nullary("take"));
        ops
    }

    fn is_valid_state(&self, state: &Value) -> bool {
        state.as_list().is_some_and(|items| items.windows(2).all(|w| w[0] < w[1]))
    }

    fn deterministic(&self) -> bool {
        false
    }
}

/// Which end a container removes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Discipline {
    Fifo,
    Lifo,
}

impl Discipline {
    fn insert_name(self) -> &'static str {
        match self {
            Discipline::Fifo => "enq",
            Discipline::Lifo => "push",
        }
    }

    fn remove_name(self) -> &'static str {
        match self {
            Discipline::Fifo => "deq",
            Discipline::Lifo => "pop",
        }
    }

    fn empty_response(self) -> Value {
        match self {
            Discipline::Fifo => Value::Empty,
            Discipline::Lifo => Value::Epsilon,
        }
    }

    /// Index of the `rank`-th next item to be removed.
    fn index(self, len: usize, rank: usize) -> usize {
        match self {
            Discipline::Fifo => rank,
            Discipline::Lifo => len - 1 - rank,
        }
    }
}

/// Relaxation applied to a queue or stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Relaxation {
    None,
    /// Concurrent removals may return the same item.
    Multiplicity,
    /// Up to `m` consecutive operations of one type may have no effect.
    Stuttering(u32),
    /// A dequeue returns one of the `k` oldest items.
    OutOfOrder(u32),
}

/// Queue or stack, optionally relaxed. Enqueue and push respond `OK`;
/// removal from an empty container responds `EMPTY` (queue) or ε (stack).
///
/// State layouts: plain and out-of-order `[items]`; multiplicity
/// `[items, group]` where `group` is `[item, [proc, seq]...]` for the most
/// recent removal run or nil; stuttering `[items, insertCount, removeCount]`.
#[derive(Debug, Clone)]
pub struct ContainerSpec {
    pub discipline: Discipline,
    pub relaxation: Relaxation,
}

impl ContainerSpec {
    pub fn queue() -> Self {
        ContainerSpec { discipline: Discipline::Fifo, relaxation: Relaxation::None }
    }

    pub fn stack() -> Self {
        ContainerSpec { discipline: Discipline::Lifo, relaxation: Relaxation::None }
    }

    pub fn relaxed(discipline: Discipline, relaxation: Relaxation) -> Self {
        ContainerSpec { discipline, relaxation }
    }

    fn opid_value(id: OpId) -> Value {
        list(vec![Value::Int(id.proc.0 as i64), Value::Int(id.seq as i64)])
    }

    fn value_opid(v: &Value) -> Option<OpId> {
        let l = v.as_list()?;
        Some(OpId::new(l.first()?.as_int()? as usize, l.get(1)?.as_int()? as usize))
    }

    fn insert(&self, state: &Value, x: &Value) -> Vec<(Value, Value)> {
        let parts = items_of(state);
        let mut items = items_of(&parts[0]);
        match self.relaxation {
            Relaxation::None | Relaxation::OutOfOrder(_) => {
                items.push(x.clone());
                vec![(list(vec![list(items)]), Value::Ok)]
            }
            Relaxation::Multiplicity => {
                items.push(x.clone());
                vec![(list(vec![list(items), Value::Nil]), Value::Ok)]
            }
            Relaxation::Stuttering(m) => {
                let (ins, rem) = (parts[1].as_int().unwrap_or(0), parts[2].clone());
                let mut out = Vec::new();
                if ins < m as i64 {
                    out.push((list(vec![list(items.clone()), Value::Int(ins + 1), rem.clone()]), Value::Ok));
                }
                items.push(x.clone());
                out.push((list(vec![list(items), Value::Int(0), rem]), Value::Ok));
                out
            }
        }
    }

    fn remove(&self, state: &Value, cx: &ApplyCtx<'_>) -> Vec<(Value, Value)> {
        let parts = items_of(state);
        let items = items_of(&parts[0]);
        let empty = self.discipline.empty_response();
        let take = |rank: usize| {
            let mut rest = items.clone();
            let x = rest.remove(self.discipline.index(items.len(), rank));
            (rest, x)
        };
        match self.relaxation {
            Relaxation::None => {
                if items.is_empty() {
                    return vec![(state.clone(), empty)];
                }
                let (rest, x) = take(0);
                vec![(list(vec![list(rest)]), x)]
            }
            Relaxation::OutOfOrder(k) => {
                if items.is_empty() {
                    return vec![(state.clone(), empty)];
                }
                (0..items.len().min(k.max(1) as usize))
                    .map(|rank| {
                        let (rest, x) = take(rank);
                        (list(vec![list(rest)]), x)
                    })
                    .collect()
            }
            Relaxation::Stuttering(m) => {
                if items.is_empty() {
                    return vec![(state.clone(), empty)];
                }
                let (ins, rem) = (parts[1].clone(), parts[2].as_int().unwrap_or(0));
                let mut out = Vec::new();
                let front = items[self.discipline.index(items.len(), 0)].clone();
                if rem < m as i64 {
                    out.push((list(vec![list(items.clone()), ins.clone(), Value::Int(rem + 1)]), front));
                }
                let (rest, x) = take(0);
                out.push((list(vec![list(rest), ins, Value::Int(0)]), x));
                out
            }
            Relaxation::Multiplicity => {
                let mut out = Vec::new();
                if let (Some(me), Some(group)) = (cx.op, parts[1].as_list()) {
                    let members: Vec<OpId> = group[1..].iter().filter_map(Self::value_opid).collect();
                    if members.iter().all(|&other| cx.concurrent(me, other)) {
                        let mut g = group.to_vec();
                        g.push(Self::opid_value(me));
                        out.push((list(vec![parts[0].clone(), list(g)]), group[0].clone()));
                    }
                }
                if items.is_empty() {
                    out.push((list(vec![parts[0].clone(), Value::Nil]), empty));
                } else {
                    let (rest, x) = take(0);
                    let group = match cx.op {
                        Some(me) => list(vec![x.clone(), Self::opid_value(me)]),
                        None => Value::Nil,
                    };
                    out.push((list(vec![list(rest), group]), x));
                }
                out
            }
        }
    }
}

impl SequentialSpec for ContainerSpec {
    fn name(&self) -> String {
        let base = match self.discipline {
            Discipline::Fifo => "Queue",
            Discipline::Lifo => "Stack",
        };
        match self.relaxation {
            Relaxation::None => base.to_lowercase(),
            Relaxation::Multiplicity => format!("multiplicity{base}"),
            Relaxation::Stuttering(m) => format!("stuttering{base}({m})"),
            Relaxation::OutOfOrder(k) => format!("outOfOrder{base}({k})"),
        }
    }

    fn initial_state(&self) -> Value {
        let empty = list(vec![]);
        match self.relaxation {
            Relaxation::None | Relaxation::OutOfOrder(_) => list(vec![empty]),
            Relaxation::Multiplicity => list(vec![empty, Value::Nil]),
            Relaxation::Stuttering(_) => list(vec![empty, Value::Int(0), Value::Int(0)]),
        }
    }

    fn apply_all(&self, state: &Value, op: &Op, cx: &ApplyCtx<'_>) -> Vec<(Value, Value)> {
        if !self.is_valid_state(state) {
            return vec![];
        }
        if op.name == self.discipline.insert_name() {
            self.insert(state, &op.arg)
        } else if op.name == self.discipline.remove_name() {
            self.remove(state, cx)
        } else {
            vec![]
        }
    }

    fn domain(&self, values: &[i64]) -> Vec<Op> {
        let mut ops: Vec<Op> = values.iter().map(|&v| Op::new(self.discipline.insert_name(), v.into())).collect();
        ops.push(Op::nullary(self.discipline.remove_name()));
        ops
    }

    fn is_valid_state(&self, state: &Value) -> bool {
        let Some(parts) = state.as_list() else { return false };
        let Some(first) = parts.first() else { return false };
        if first.as_list().is_none() {
            return false;
        }
        match self.relaxation {
            Relaxation::None | Relaxation::OutOfOrder(_) => parts.len() == 1,
            Relaxation::Multiplicity => parts.len() == 2 && (parts[1] == Value::Nil || parts[1].as_list().is_some()),
            Relaxation::Stuttering(m) => {
                parts.len() == 3 && parts[1..].iter().all(|c| c.as_int().is_some_and(|c| (0..=m as i64).contains(&c)))
            }
        }
    }

    fn deterministic(&self) -> bool {
        self.relaxation == Relaxation::None
    }
}

/// Looks up a specification by the name used on the command line.
pub fn spec_by_name(name: &str, n: usize) -> Option<SpecRef> {
    let spec: SpecRef = match name {
        "register" => Arc::new(RegisterSpec::new(0)),
        "maxRegister" => Arc::new(MaxRegisterSpec),
        "counter" => Arc::new(CounterSpec),
        "snapshot" => Arc::new(SnapshotSpec { n }),
        "testAndSet" => Arc::new(TestAndSetSpec { multi_shot: false }),
        "multiShotTestAndSet" => Arc::new(TestAndSetSpec { multi_shot: true }),
        "fetchAndIncrement" => Arc::new(FetchIncSpec),
        "set" => Arc::new(SetSpec),
        "queue" => Arc::new(ContainerSpec::queue()),
        "stack" => Arc::new(ContainerSpec::stack()),
        _ => return None,
    };
    Some(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn ctx_for(p: usize) -> OpId {
        OpId::new(p, 0)
    }

    /// States reachable by sequences of length <= depth from the domain.
    fn reachable(spec: &dyn SequentialSpec, ops: &[Op], depth: usize) -> BTreeSet<Value> {
        let mut seen = BTreeSet::from([spec.initial_state()]);
        let mut frontier = vec![spec.initial_state()];
        for _ in 0..depth {
            let mut next = Vec::new();
            for s in &frontier {
                for (i, op) in ops.iter().enumerate() {
                    let cx = ApplyCtx { op: Some(ctx_for(i % 2)), overlaps: None };
                    for (s2, _) in spec.apply_all(s, op, &cx) {
                        if seen.insert(s2.clone()) {
                            next.push(s2);
                        }
                    }
                }
            }
            frontier = next;
        }
        seen
    }

    fn all_specs() -> Vec<SpecRef> {
        let mut specs: Vec<SpecRef> = vec![
            Arc::new(RegisterSpec::new(0)),
            Arc::new(MaxRegisterSpec),
            Arc::new(CounterSpec),
            Arc::new(SnapshotSpec { n: 2 }),
            Arc::new(TestAndSetSpec { multi_shot: false }),
            Arc::new(TestAndSetSpec { multi_shot: true }),
            Arc::new(FetchIncSpec),
            Arc::new(SetSpec),
        ];
        for d in [Discipline::Fifo, Discipline::Lifo] {
            for r in [Relaxation::None, Relaxation::Multiplicity, Relaxation::Stuttering(1), Relaxation::Stuttering(2)]
            {
                specs.push(Arc::new(ContainerSpec::relaxed(d, r)));
            }
        }
        specs.push(Arc::new(ContainerSpec::relaxed(Discipline::Fifo, Relaxation::OutOfOrder(2))));
        specs
    }

    #[test]
    fn replay_stays_in_state_space() {
        for spec in all_specs() {
            let ops = spec.domain(&[0, 1, 2]);
            for s in reachable(spec.as_ref(), &ops, 4) {
                assert!(spec.is_valid_state(&s), "{} left its state space: {s}", spec.name());
            }
        }
    }

    #[test]
    fn relations_satisfy_their_equations() {
        let specs: Vec<SpecRef> =
            vec![Arc::new(RegisterSpec::new(0)), Arc::new(MaxRegisterSpec), Arc::new(CounterSpec)];
        for spec in specs {
            let ops = spec.domain(&[0, 1, 2, 3]);
            let states = reachable(spec.as_ref(), &ops, 4);
            let run = |s: &Value, a: &Op| spec.apply(s, a).unwrap();
            for a in &ops {
                for b in &ops {
                    let rel = spec.relation(a, b).expect("total relation");
                    assert_eq!(spec.relation(b, a), Some(rel.flipped()));
                    for s in &states {
                        let (sa, ra) = run(s, a);
                        let (sb, rb) = run(s, b);
                        let (sab, rab) = run(&sa, b);
                        let (sba, rba) = run(&sb, a);
                        match rel {
                            Relation::Commute => {
                                assert_eq!(sab, sba, "{a} {b} commute on {s}");
                                assert_eq!((ra, rb), (rba, rab), "{a} {b} responses commute on {s}");
                            }
                            _ => {
                                if rel.left_overwrites() {
                                    assert_eq!(sba, sa, "{a} overwrites {b} on {s}");
                                }
                                if rel.right_overwrites() {
                                    assert_eq!(sab, sb, "{b} overwrites {a} on {s}");
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn queue_and_stack_basics() {
        let q = ContainerSpec::queue();
        let s0 = q.initial_state();
        let (s1, _) = q.apply(&s0, &Op::new("enq", 1.into())).unwrap();
        let (s2, _) = q.apply(&s1, &Op::new("enq", 2.into())).unwrap();
        assert_eq!(q.apply(&s2, &Op::nullary("deq")).unwrap().1, Value::Int(1));
        assert_eq!(q.apply(&s0, &Op::nullary("deq")).unwrap().1, Value::Empty);
        let st = ContainerSpec::stack();
        let (t1, _) = st.apply(&st.initial_state(), &Op::new("push", 1.into())).unwrap();
        let (t2, _) = st.apply(&t1, &Op::new("push", 2.into())).unwrap();
        assert_eq!(st.apply(&t2, &Op::nullary("pop")).unwrap().1, Value::Int(2));
        assert_eq!(st.apply(&st.initial_state(), &Op::nullary("pop")).unwrap().1, Value::Epsilon);
    }

    #[test]
    fn out_of_order_returns_one_of_k_oldest() {
        let q = ContainerSpec::relaxed(Discipline::Fifo, Relaxation::OutOfOrder(2));
        let cx = ApplyCtx::sequential();
        let mut s = q.initial_state();
        for v in 0..3 {
            s = q.apply_all(&s, &Op::new("enq", v.into()), &cx).remove(0).0;
        }
        let got: BTreeSet<Value> = q.apply_all(&s, &Op::nullary("deq"), &cx).into_iter().map(|(_, r)| r).collect();
        assert_eq!(got, BTreeSet::from([Value::Int(0), Value::Int(1)]));
    }

    #[test]
    fn multiplicity_repeat_needs_concurrency() {
        let q = ContainerSpec::relaxed(Discipline::Fifo, Relaxation::Multiplicity);
        let a = OpId::new(0, 0);
        let b = OpId::new(1, 0);
        let overlap = |x: OpId, y: OpId| (x == a && y == b) || (x == b && y == a);
        let never = |_: OpId, _: OpId| false;
        let mut s = q.initial_state();
        s = q.apply_all(&s, &Op::new("enq", 7.into()), &ApplyCtx::sequential()).remove(0).0;
        let cx_a = ApplyCtx { op: Some(a), overlaps: Some(&overlap) };
        let (s, r) = q.apply_all(&s, &Op::nullary("deq"), &cx_a).remove(0);
        assert_eq!(r, Value::Int(7));
        let cx_b = ApplyCtx { op: Some(b), overlaps: Some(&overlap) };
        let got: Vec<Value> = q.apply_all(&s, &Op::nullary("deq"), &cx_b).into_iter().map(|x| x.1).collect();
        assert_eq!(got, vec![Value::Int(7), Value::Empty]);
        let cx_seq = ApplyCtx { op: Some(b), overlaps: Some(&never) };
        let got: Vec<Value> = q.apply_all(&s, &Op::nullary("deq"), &cx_seq).into_iter().map(|x| x.1).collect();
        assert_eq!(got, vec![Value::Empty]);
    }

    #[test]
    fn stuttering_counter_bounds_consecutive_stutters() {
        let q = ContainerSpec::relaxed(Discipline::Fifo, Relaxation::Stuttering(1));
        let cx = ApplyCtx::sequential();
        let s = q.initial_state();
        let outs = q.apply_all(&s, &Op::new("enq", 1.into()), &cx);
        assert_eq!(outs.len(), 2);
        let stuttered = &outs[0].0;
        let forced = q.apply_all(stuttered, &Op::new("enq", 1.into()), &cx);
        assert_eq!(forced.len(), 1, "second consecutive enq must take effect");
    }

    #[test]
    fn set_take_is_nondeterministic() {
        let set = SetSpec;
        let cx = ApplyCtx::sequential();
        let mut s = set.initial_state();
        for v in [3, 1] {
            s = set.apply_all(&s, &Op::new("put", v.into()), &cx).remove(0).0;
        }
        let got: BTreeSet<Value> = set.apply_all(&s, &Op::nullary("take"), &cx).into_iter().map(|x| x.1).collect();
        assert_eq!(got, BTreeSet::from([Value::Int(1), Value::Int(3)]));
    }
}
