//! Events, histories, linearizations and sequential specifications.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::value::Value;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessId(pub usize);

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// Identity of one high-level operation: the invoking process and its
/// per-process invocation counter.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OpId {
    pub proc: ProcessId,
    pub seq: usize,
}

impl OpId {
    pub fn new(proc: usize, seq: usize) -> Self {
        OpId { proc: ProcessId(proc), seq }
    }
}

impl fmt::Display for OpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.proc, self.seq)
    }
}

/// A high-level invocation: operation name plus argument.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Op {
    pub name: String,
    pub arg: Value,
}

impl Op {
    pub fn new(name: &str, arg: Value) -> Self {
        Op { name: name.to_string(), arg }
    }

    pub fn nullary(name: &str) -> Self {
        Op::new(name, Value::Nil)
    }

    /// Parses `name` or `name(arg)`.
    pub fn parse(text: &str) -> Option<Op> {
        let text = text.trim();
        match text.split_once('(') {
            None if !text.is_empty() => Some(Op::nullary(text)),
            None => None,
            Some((name, rest)) => {
                let arg = rest.strip_suffix(')')?;
                Some(Op::new(name.trim(), Value::parse(arg)?))
            }
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.arg {
            Value::Nil => write!(f, "{}", self.name),
            arg => write!(f, "{}({})", self.name, arg),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Invoke,
    Respond,
}

/// One invocation or response event. Serialized flat as
/// `{kind, proc, seq, name, payload}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "EventRepr", into = "EventRepr")]
pub struct Event {
    pub kind: EventKind,
    pub op: OpId,
    pub name: String,
    pub payload: Value,
}

#[derive(Serialize, Deserialize)]
struct EventRepr {
    kind: EventKind,
    proc: usize,
    seq: usize,
    name: String,
    payload: Value,
}

impl From<EventRepr> for Event {
    fn from(r: EventRepr) -> Self {
        Event { kind: r.kind, op: OpId::new(r.proc, r.seq), name: r.name, payload: r.payload }
    }
}

impl From<Event> for EventRepr {
    fn from(e: Event) -> Self {
        EventRepr { kind: e.kind, proc: e.op.proc.0, seq: e.op.seq, name: e.name, payload: e.payload }
    }
}

impl Event {
    pub fn invoke(op: OpId, inv: &Op) -> Self {
        Event { kind: EventKind::Invoke, op, name: inv.name.clone(), payload: inv.arg.clone() }
    }

    pub fn respond(op: OpId, name: &str, response: Value) -> Self {
        Event { kind: EventKind::Respond, op, name: name.to_string(), payload: response }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct History {
    pub events: Vec<Event>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub index: usize,
    pub reason: String,
}

/// One operation of a history, assembled from its events.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpRecord {
    pub id: OpId,
    pub invocation: Op,
    pub invoke_at: usize,
    pub respond_at: Option<usize>,
    pub response: Option<Value>,
}

impl OpRecord {
    pub fn is_complete(&self) -> bool {
        self.response.is_some()
    }
}

impl History {
    pub fn new(events: Vec<Event>) -> Self {
        History { events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn prefix(&self, len: usize) -> History {
        History { events: self.events[..len.min(self.events.len())].to_vec() }
    }

    /// Returns every well-formedness violation; empty iff the history is
    /// well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut pending: HashMap<ProcessId, (OpId, &str)> = HashMap::new();
        let mut next_seq: HashMap<ProcessId, usize> = HashMap::new();
        let mut seen: HashSet<OpId> = HashSet::new();
        for (index, e) in self.events.iter().enumerate() {
            let proc = e.op.proc;
            match e.kind {
                EventKind::Invoke => {
                    if let Some((open, _)) = pending.get(&proc) {
                        out.push(Violation { index, reason: format!("second invoke while {open} is pending") });
                        continue;
                    }
                    if !seen.insert(e.op) {
                        out.push(Violation { index, reason: format!("duplicate invoke of {}", e.op) });
                        continue;
                    }
                    let expected = next_seq.entry(proc).or_insert(0);
                    if e.op.seq != *expected {
                        out.push(Violation {
                            index,
                            reason: format!("{} invoked out of order, expected seq {}", e.op, expected),
                        });
                    }
                    *expected = e.op.seq + 1;
                    pending.insert(proc, (e.op, e.name.as_str()));
                }
                EventKind::Respond => match pending.get(&proc) {
                    Some((open, name)) if *open == e.op && *name == e.name => {
                        pending.remove(&proc);
                    }
                    Some((open, _)) => out.push(Violation {
                        index,
                        reason: format!("response for {} does not match pending {open}", e.op),
                    }),
                    None => out.push(Violation { index, reason: format!("response without invocation for {}", e.op) }),
                },
            }
        }
        out
    }

    pub fn is_well_formed(&self) -> bool {
        self.validate().is_empty()
    }

    /// Operations in invocation order.
    pub fn operations(&self) -> Result<Vec<OpRecord>, ModelError> {
        if let Some(v) = self.validate().into_iter().next() {
            return Err(ModelError::IllFormed { index: v.index, reason: v.reason });
        }
        let mut ops: Vec<OpRecord> = Vec::new();
        let mut by_id: HashMap<OpId, usize> = HashMap::new();
        for (index, e) in self.events.iter().enumerate() {
            match e.kind {
                EventKind::Invoke => {
                    by_id.insert(e.op, ops.len());
                    ops.push(OpRecord {
                        id: e.op,
                        invocation: Op::new(&e.name, e.payload.clone()),
                        invoke_at: index,
                        respond_at: None,
                        response: None,
                    });
                }
                EventKind::Respond => {
                    let rec = &mut ops[by_id[&e.op]];
                    rec.respond_at = Some(index);
                    rec.response = Some(e.payload.clone());
                }
            }
        }
        Ok(ops)
    }

    /// True iff `a` responds before `b` is invoked.
    pub fn real_time_precedes(&self, a: OpId, b: OpId) -> Result<bool, ModelError> {
        let find = |id: OpId, kind: EventKind| self.events.iter().position(|e| e.op == id && e.kind == kind);
        let a_inv = find(a, EventKind::Invoke).ok_or(ModelError::UnknownOp(a))?;
        let b_inv = find(b, EventKind::Invoke).ok_or(ModelError::UnknownOp(b))?;
        let _ = a_inv;
        Ok(match find(a, EventKind::Respond) {
            Some(a_resp) => a_resp < b_inv,
            None => false,
        })
    }

    /// Unordered pairs of operations that overlap in real time.
    pub fn overlapping_pairs(&self) -> Result<BTreeSet<(OpId, OpId)>, ModelError> {
        let ops = self.operations()?;
        let mut out = BTreeSet::new();
        for a in &ops {
            for b in &ops {
                if a.id >= b.id {
                    continue;
                }
                let a_before_b = a.respond_at.is_some_and(|r| r < b.invoke_at);
                let b_before_a = b.respond_at.is_some_and(|r| r < a.invoke_at);
                if !a_before_b && !b_before_a {
                    out.insert((a.id, b.id));
                }
            }
        }
        Ok(out)
    }
}

/// One entry of a sequential execution.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinEntry {
    pub op: OpId,
    pub name: String,
    pub arg: Value,
    pub response: Value,
}

impl LinEntry {
    pub fn invocation(&self) -> Op {
        Op::new(&self.name, self.arg.clone())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Linearization {
    pub entries: Vec<LinEntry>,
}

impl Linearization {
    pub fn is_prefix_of(&self, other: &Linearization) -> bool {
        other.entries.len() >= self.entries.len() && other.entries[..self.entries.len()] == self.entries[..]
    }
}

impl fmt::Display for Linearization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}:{}/{}", e.op, e.invocation(), e.response)?;
        }
        f.write_str("]")
    }
}

/// Pairwise classification of two invocations of a simple type.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    Commute,
    LeftOverwritesRight,
    RightOverwritesLeft,
    BothOverwrite,
}

impl Relation {
    pub fn flipped(self) -> Relation {
        match self {
            Relation::LeftOverwritesRight => Relation::RightOverwritesLeft,
            Relation::RightOverwritesLeft => Relation::LeftOverwritesRight,
            r => r,
        }
    }

    pub fn left_overwrites(self) -> bool {
        matches!(self, Relation::LeftOverwritesRight | Relation::BothOverwrite)
    }

    pub fn right_overwrites(self) -> bool {
        matches!(self, Relation::RightOverwritesLeft | Relation::BothOverwrite)
    }
}

/// Context handed to a specification for one transition. Relaxed
/// specifications whose relaxation depends on real-time concurrency use
/// the operation identity and the overlap oracle; everything else ignores it.
#[derive(Clone, Copy, Default)]
pub struct ApplyCtx<'a> {
    pub op: Option<OpId>,
    pub overlaps: Option<&'a dyn Fn(OpId, OpId) -> bool>,
}

impl<'a> ApplyCtx<'a> {
    pub fn sequential() -> Self {
        ApplyCtx::default()
    }

    pub fn concurrent(&self, a: OpId, b: OpId) -> bool {
        match self.overlaps {
            Some(f) => a != b && f(a, b),
            None => false,
        }
    }
}

/// A sequential specification: a (possibly nondeterministic) state machine
/// over [`Value`] states.
pub trait SequentialSpec: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn initial_state(&self) -> Value;

    /// Every allowed `(next state, response)` pair. Empty when the
    /// invocation is not part of the object's interface.
    fn apply_all(&self, state: &Value, op: &Op, cx: &ApplyCtx<'_>) -> Vec<(Value, Value)>;

    /// The unique transition of a deterministic specification.
    fn apply(&self, state: &Value, op: &Op) -> Option<(Value, Value)> {
        let mut all = self.apply_all(state, op, &ApplyCtx::sequential());
        if all.len() == 1 {
            all.pop()
        } else {
            None
        }
    }

    /// The bounded universe of invocations used for exhaustive checking.
    fn domain(&self, values: &[i64]) -> Vec<Op>;

    /// Commute/overwrite metadata; `None` for non-simple types.
    fn relation(&self, _a: &Op, _b: &Op) -> Option<Relation> {
        None
    }

    fn has_relation(&self) -> bool {
        false
    }

    /// Membership in the declared state space.
    fn is_valid_state(&self, state: &Value) -> bool;

    fn deterministic(&self) -> bool {
        true
    }
}

pub type SpecRef = Arc<dyn SequentialSpec>;

/// Checks that `lin` is a linearization of `h` under `spec`.
pub fn is_linearization_of(h: &History, lin: &Linearization, spec: &dyn SequentialSpec) -> bool {
    let Ok(ops) = h.operations() else {
        return false;
    };
    let by_id: HashMap<OpId, &OpRecord> = ops.iter().map(|o| (o.id, o)).collect();
    let mut pos: HashMap<OpId, usize> = HashMap::new();
    for (i, e) in lin.entries.iter().enumerate() {
        let Some(rec) = by_id.get(&e.op) else {
            return false;
        };
        if rec.invocation != e.invocation() || pos.insert(e.op, i).is_some() {
            return false;
        }
        if let Some(resp) = &rec.response {
            if *resp != e.response {
                return false;
            }
        }
    }
    if ops.iter().any(|o| o.is_complete() && !pos.contains_key(&o.id)) {
        return false;
    }
    for a in &ops {
        let Some(a_resp) = a.respond_at else { continue };
        for b in &ops {
            if a_resp < b.invoke_at {
                if let (Some(pa), Some(pb)) = (pos.get(&a.id), pos.get(&b.id)) {
                    if pa > pb {
                        return false;
                    }
                } else if pos.contains_key(&b.id) {
                    // b linearized while a, which precedes it, is missing
                    return false;
                }
            }
        }
    }
    let overlaps = match h.overlapping_pairs() {
        Ok(p) => p,
        Err(_) => return false,
    };
    let overlap_fn = |a: OpId, b: OpId| overlaps.contains(&(a.min(b), a.max(b)));
    replay_allows(lin, spec, &overlap_fn)
}

/// True iff some state path through `spec` yields each recorded response.
pub fn replay_allows(lin: &Linearization, spec: &dyn SequentialSpec, overlaps: &dyn Fn(OpId, OpId) -> bool) -> bool {
    let mut states: HashSet<Value> = HashSet::from([spec.initial_state()]);
    for e in &lin.entries {
        let cx = ApplyCtx { op: Some(e.op), overlaps: Some(overlaps) };
        let inv = e.invocation();
        let mut next = HashSet::new();
        for s in &states {
            for (s2, resp) in spec.apply_all(s, &inv, &cx) {
                if resp == e.response {
                    next.insert(s2);
                }
            }
        }
        if next.is_empty() {
            return false;
        }
        states = next;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specs::RegisterSpec;

    fn inv(p: usize, s: usize, name: &str, arg: Value) -> Event {
        Event::invoke(OpId::new(p, s), &Op::new(name, arg))
    }

    fn resp(p: usize, s: usize, name: &str, v: Value) -> Event {
        Event::respond(OpId::new(p, s), name, v)
    }

    fn entry(p: usize, s: usize, name: &str, arg: Value, r: Value) -> LinEntry {
        LinEntry { op: OpId::new(p, s), name: name.into(), arg, response: r }
    }

    #[test]
    fn validate_minimal_complete_op() {
        let h = History::new(vec![inv(0, 0, "write", 1.into()), resp(0, 0, "write", Value::Ok)]);
        assert!(h.validate().is_empty());
    }

    #[test]
    fn validate_response_without_invocation() {
        let h = History::new(vec![resp(0, 0, "write", Value::Ok)]);
        let v = h.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].index, 0);
        assert!(v[0].reason.contains("without invocation"));
    }

    #[test]
    fn validate_second_invoke_while_pending() {
        let h = History::new(vec![inv(0, 0, "write", 1.into()), inv(0, 1, "read", Value::Nil)]);
        let v = h.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].index, 1);
    }

    #[test]
    fn linearization_respects_real_time() {
        let spec = RegisterSpec::new(0);
        let h = History::new(vec![
            inv(0, 0, "write", 1.into()),
            resp(0, 0, "write", Value::Ok),
            inv(1, 0, "read", Value::Nil),
            resp(1, 0, "read", 1.into()),
        ]);
        let good = Linearization {
            entries: vec![entry(0, 0, "write", 1.into(), Value::Ok), entry(1, 0, "read", Value::Nil, 1.into())],
        };
        let mut bad = good.clone();
        bad.entries.reverse();
        assert!(is_linearization_of(&h, &good, &spec));
        assert!(!is_linearization_of(&h, &bad, &spec));
    }

    #[test]
    fn pending_op_may_be_included() {
        let spec = RegisterSpec::new(0);
        let h = History::new(vec![
            inv(0, 0, "write", 1.into()),
            inv(1, 0, "read", Value::Nil),
            resp(1, 0, "read", 1.into()),
        ]);
        let lin = Linearization {
            entries: vec![entry(0, 0, "write", 1.into(), Value::Ok), entry(1, 0, "read", Value::Nil, 1.into())],
        };
        assert!(is_linearization_of(&h, &lin, &spec));
    }

    #[test]
    fn real_time_precedes_cases() {
        let h = History::new(vec![
            inv(0, 0, "write", 1.into()),
            resp(0, 0, "write", Value::Ok),
            inv(1, 0, "read", Value::Nil),
            inv(2, 0, "read", Value::Nil),
            resp(1, 0, "read", 1.into()),
        ]);
        let a = OpId::new(0, 0);
        let b = OpId::new(1, 0);
        let c = OpId::new(2, 0);
        assert!(h.real_time_precedes(a, b).unwrap());
        assert!(!h.real_time_precedes(b, c).unwrap());
        assert!(!h.real_time_precedes(c, b).unwrap());
        assert!(!h.real_time_precedes(c, a).unwrap());
        assert!(matches!(h.real_time_precedes(OpId::new(5, 0), a), Err(ModelError::UnknownOp(_))));
    }

    #[test]
    fn event_json_is_flat() {
        let e = inv(2, 1, "WriteMax", 3.into());
        let text = serde_json::to_string(&e).unwrap();
        assert_eq!(text, r#"{"kind":"Invoke","proc":2,"seq":1,"name":"WriteMax","payload":3}"#);
        assert_eq!(serde_json::from_str::<Event>(&text).unwrap(), e);
    }

    #[test]
    fn op_parse() {
        assert_eq!(Op::parse("WriteMax(2)"), Some(Op::new("WriteMax", 2.into())));
        assert_eq!(Op::parse("take"), Some(Op::nullary("take")));
    }
}
