//! k-ordering profiles and the set-agreement algorithm built on them.
//!
//! A profile gives every process a proposal sequence and a decision
//! sequence of invocations, plus a decision function `d` from a process and
//! its responses to a winning process. The agreement algorithm runs the proposals on a
//! shared implementation, takes a double-collect snapshot of the
//! implementation's base objects, simulates the decision sequence locally
//! on the snapshot and decides the input of the winner.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap as HashMap;
use serde::{Serialize, Serializer};

use crate::base::{BaseKind, BaseObjectId, ChoiceSource, ScriptedChoices};
use crate::catalog::{atomic_program, Program};
use crate::error::{Error, Result};
use crate::explore::Explorer;
use crate::model::{ApplyCtx, Op, SequentialSpec};
use crate::sched::{Bounds, Config, Schedule, ScheduleItem, Sim, Workload};
use crate::specs::{ContainerSpec, Discipline, Relaxation};
use crate::value::Value;

/// Objects with a known ordering profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OrderingObject {
    Queue,
    Stack,
    MultiplicityQueue,
    MultiplicityStack,
    StutteringQueue(u32),
    StutteringStack(u32),
    OutOfOrderQueue(u32),
}

impl OrderingObject {
    pub fn discipline(self) -> Discipline {
        match self {
            OrderingObject::Stack | OrderingObject::MultiplicityStack | OrderingObject::StutteringStack(_) => {
                Discipline::Lifo
            }
            _ => Discipline::Fifo,
        }
    }

    pub fn relaxation(self) -> Relaxation {
        match self {
            OrderingObject::Queue | OrderingObject::Stack => Relaxation::None,
            OrderingObject::MultiplicityQueue | OrderingObject::MultiplicityStack => Relaxation::Multiplicity,
            OrderingObject::StutteringQueue(m) | OrderingObject::StutteringStack(m) => Relaxation::Stuttering(m),
            OrderingObject::OutOfOrderQueue(k) => Relaxation::OutOfOrder(k),
        }
    }

    pub fn spec(self) -> ContainerSpec {
        ContainerSpec::relaxed(self.discipline(), self.relaxation())
    }

    /// The atomic base object realizing this object.
    pub fn base_kind(self) -> BaseKind {
        match (self.discipline(), self.relaxation()) {
            (Discipline::Fifo, Relaxation::None) => BaseKind::AtomicQueue,
            (Discipline::Lifo, Relaxation::None) => BaseKind::AtomicStack,
            (d, r) => BaseKind::AtomicRelaxed(d, r),
        }
    }

    fn stuttering(self) -> bool {
        matches!(self.relaxation(), Relaxation::Stuttering(_))
    }

    /// Every tag with the given relaxation parameter, for `n` processes.
    pub fn all(m: u32, k: u32) -> [OrderingObject; 7] {
        [
            OrderingObject::Queue,
            OrderingObject::Stack,
            OrderingObject::MultiplicityQueue,
            OrderingObject::MultiplicityStack,
            OrderingObject::StutteringQueue(m),
            OrderingObject::StutteringStack(m),
            OrderingObject::OutOfOrderQueue(k),
        ]
    }
}

impl fmt::Display for OrderingObject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrderingObject::Queue => f.write_str("queue"),
            OrderingObject::Stack => f.write_str("stack"),
            OrderingObject::MultiplicityQueue => f.write_str("multiplicityQueue"),
            OrderingObject::MultiplicityStack => f.write_str("multiplicityStack"),
            OrderingObject::StutteringQueue(m) => write!(f, "stutteringQueue({m})"),
            OrderingObject::StutteringStack(m) => write!(f, "stutteringStack({m})"),
            OrderingObject::OutOfOrderQueue(k) => write!(f, "outOfOrderQueue({k})"),
        }
    }
}

impl Serialize for OrderingObject {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl FromStr for OrderingObject {
    type Err = Error;

    /// Parses `queue`, `stutteringStack(2)`, `outOfOrderQueue(2)` and so on.
    /// A missing parameter defaults to 1 for stuttering and 2 for
    /// out-of-order.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown object {s:?}"));
        let (name, param) = match s.trim().split_once('(') {
            Some((name, rest)) => {
                let p = rest.strip_suffix(')').ok_or_else(bad)?.trim().parse::<u32>().map_err(|_| bad())?;
                (name, Some(p))
            }
            None => (s.trim(), None),
        };
        Ok(match (name, param) {
            ("queue", None) => OrderingObject::Queue,
            ("stack", None) => OrderingObject::Stack,
            ("multiplicityQueue", None) => OrderingObject::MultiplicityQueue,
            ("multiplicityStack", None) => OrderingObject::MultiplicityStack,
            ("stutteringQueue", m) => OrderingObject::StutteringQueue(m.unwrap_or(1)),
            ("stutteringStack", m) => OrderingObject::StutteringStack(m.unwrap_or(1)),
            ("outOfOrderQueue", k) => OrderingObject::OutOfOrderQueue(k.unwrap_or(2)),
            _ => return Err(bad()),
        })
    }
}

/// How `d` reads the responses of the decision sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum DecisionRule {
    /// The single response of the decision sequence.
    LastResponse,
    /// The last response other than ε.
    LastNonEpsilon,
}

impl DecisionRule {
    /// Folds one earlier response into the pick of the responses after it.
    fn push_front(self, response: &Value, later: Option<Value>) -> Option<Value> {
        match self {
            DecisionRule::LastResponse => later.or_else(|| Some(response.clone())),
            DecisionRule::LastNonEpsilon => later.or_else(|| (*response != Value::Epsilon).then(|| response.clone())),
        }
    }

    fn pick(self, tail: &[Value]) -> Option<Value> {
        tail.iter().rev().fold(None, |later, r| self.push_front(r, later))
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OrderingProfile {
    pub object: OrderingObject,
    pub n: usize,
    pub k: usize,
    pub prop: Vec<Vec<Op>>,
    pub dec: Vec<Vec<Op>>,
    pub rule: DecisionRule,
}

impl OrderingProfile {
    /// The decision function. Sequences no legal execution produces map
    /// to process 0.
    pub fn d(&self, i: usize, resps: &[Value]) -> usize {
        let skip = self.prop[i].len();
        if resps.len() != skip + self.dec[i].len() || resps[..skip].iter().any(|r| *r != Value::Ok) {
            return 0;
        }
        self.decide(self.rule.pick(&resps[skip..]))
    }

    fn decide(&self, pick: Option<Value>) -> usize {
        match pick {
            Some(Value::Int(l)) if (0..self.n as i64).contains(&l) => l as usize,
            _ => 0,
        }
    }
}

pub fn profile_for(object: OrderingObject, n: usize) -> Result<OrderingProfile> {
    if n < 2 {
        return Err(Error::Precondition(format!("profiles need at least 2 processes, got {n}")));
    }
    let mut k = 1;
    let (copies, pops) = match object {
        OrderingObject::Queue | OrderingObject::MultiplicityQueue => (1, 1),
        OrderingObject::Stack | OrderingObject::MultiplicityStack => (1, n + 1),
        OrderingObject::StutteringQueue(m) | OrderingObject::StutteringStack(m) if m < 1 => {
            return Err(Error::Precondition("stuttering needs m >= 1".into()))
        }
        OrderingObject::StutteringQueue(m) => (m as usize + 1, 1),
        OrderingObject::StutteringStack(m) => (m as usize + 1, n * (m as usize + 1) + 1),
        OrderingObject::OutOfOrderQueue(kk) => {
            if kk < 1 || kk as usize > n - 1 {
                return Err(Error::Precondition(format!("out-of-order queues need 1 <= k <= {}", n - 1)));
            }
            k = kk as usize;
            (1, 1)
        }
    };
    let d = object.discipline();
    let (ins, rem) = match d {
        Discipline::Fifo => ("enq", "deq"),
        Discipline::Lifo => ("push", "pop"),
    };
    let rule = match d {
        Discipline::Fifo => DecisionRule::LastResponse,
        Discipline::Lifo => DecisionRule::LastNonEpsilon,
    };
    Ok(OrderingProfile {
        object,
        n,
        k,
        prop: (0..n).map(|i| vec![Op::new(ins, Value::Int(i as i64)); copies]).collect(),
        dec: (0..n).map(|_| vec![Op::nullary(rem); pops]).collect(),
        rule,
    })
}

fn container_len(state: &Value) -> usize {
    state.as_list().and_then(|p| p.first()).and_then(Value::as_list).map_or(0, <[Value]>::len)
}

/// A conforming sequential execution whose decisions range too widely.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConformanceWitness {
    /// The prefix `α`, as `p<i>:<op>/<response>` entries.
    pub prefix: Vec<String>,
    /// Every value of `d` over extensions of the prefix.
    pub decisions: Vec<usize>,
    /// Extensions in which `d` names a process that had not finished its
    /// proposals (had no effective insert, for stuttering objects).
    pub unfinished_winner: bool,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConformanceReport {
    pub object: OrderingObject,
    pub n: usize,
    pub k: usize,
    /// Prefixes in which some process finished its proposals.
    pub prefixes: usize,
    /// Largest set of decisions any prefix allows.
    pub widest: usize,
    pub winners_finished: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<ConformanceWitness>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        self.widest <= self.profile_k() && self.winners_finished
    }

    fn profile_k(&self) -> usize {
        self.k
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct SeqNode {
    state: Value,
    pos: Vec<usize>,
    /// Processes with an insert that changed the container.
    effective: u64,
    resps: Vec<Vec<Value>>,
}

type Reached = (usize, usize, bool);
type Picks = Arc<BTreeSet<Option<Value>>>;

struct Conformance<'a> {
    profile: &'a OrderingProfile,
    spec: ContainerSpec,
    /// Picks of the decision sequence from a state.
    tails: HashMap<(Value, usize, usize), Picks>,
    /// `(i, d, winner finished)` over every extension of a node.
    reach: HashMap<SeqNode, Arc<BTreeSet<Reached>>>,
}

impl Conformance<'_> {
    fn children(&self, v: &SeqNode) -> Vec<(SeqNode, String)> {
        let mut out = Vec::new();
        let cx = ApplyCtx::sequential();
        for p in 0..self.profile.n {
            let Some(op) = self.profile.prop[p].get(v.pos[p]) else { continue };
            for (state, resp) in self.spec.apply_all(&v.state, op, &cx) {
                let mut c = v.clone();
                if container_len(&state) > container_len(&v.state) {
                    c.effective |= 1 << p;
                }
                c.state = state;
                c.pos[p] += 1;
                c.resps[p].push(resp.clone());
                out.push((c, format!("p{p}:{op}/{resp}")));
            }
        }
        out
    }

    fn tails(&mut self, state: &Value, i: usize, idx: usize) -> Picks {
        let key = (state.clone(), i, idx);
        if let Some(t) = self.tails.get(&key) {
            return t.clone();
        }
        let dec = &self.profile.dec[i];
        let mut out = BTreeSet::new();
        if idx == dec.len() {
            out.insert(None);
        } else {
            for (next, resp) in self.spec.apply_all(state, &dec[idx], &ApplyCtx::sequential()) {
                for later in self.tails(&next, i, idx + 1).iter() {
                    out.insert(self.profile.rule.push_front(&resp, later.clone()));
                }
            }
        }
        let out = Arc::new(out);
        self.tails.insert(key, out.clone());
        out
    }

    fn finished(&self, v: &SeqNode, l: usize) -> bool {
        if self.profile.object.stuttering() {
            v.effective >> l & 1 == 1
        } else {
            v.pos[l] == self.profile.prop[l].len()
        }
    }

    fn reach(&mut self, v: &SeqNode) -> Arc<BTreeSet<Reached>> {
        if let Some(r) = self.reach.get(v) {
            return r.clone();
        }
        let mut out = BTreeSet::new();
        for i in 0..self.profile.n {
            if v.pos[i] != self.profile.prop[i].len() {
                continue;
            }
            for pick in self.tails(&v.state, i, 0).iter() {
                // resps of i's proposals followed by the decision responses
                let ok_prefix = v.resps[i].iter().all(|r| *r == Value::Ok);
                let l = if ok_prefix { self.profile.decide(pick.clone()) } else { 0 };
                out.insert((i, l, self.finished(v, l)));
            }
        }
        for (c, _) in self.children(v) {
            out.extend(self.reach(&c).iter().copied());
        }
        let out = Arc::new(out);
        self.reach.insert(v.clone(), out.clone());
        out
    }
}

/// Enumerates every sequential execution allowed by the profile's
/// hypotheses and measures how many processes `d` can name after each
/// prefix in which some process finished its proposals.
pub fn check_conformance(profile: &OrderingProfile) -> ConformanceReport {
    let spec = profile.object.spec();
    let n = profile.n;
    let root = SeqNode { state: spec.initial_state(), pos: vec![0; n], effective: 0, resps: vec![Vec::new(); n] };
    let mut c = Conformance { profile, spec, tails: HashMap::default(), reach: HashMap::default() };
    let mut prefixes = 0;
    let mut widest = 0;
    let mut winners_finished = true;
    let mut witness = None;
    let mut seen = rustc_hash::FxHashSet::default();
    let mut stack = vec![(root, Vec::<String>::new())];
    while let Some((v, path)) = stack.pop() {
        if !seen.insert(v.clone()) {
            continue;
        }
        if (0..n).any(|j| v.pos[j] == profile.prop[j].len()) {
            prefixes += 1;
            let r = c.reach(&v);
            let ds: BTreeSet<usize> = r.iter().map(|e| e.1).collect();
            let unfinished = r.iter().any(|e| !e.2);
            widest = widest.max(ds.len());
            winners_finished &= !unfinished;
            if witness.is_none() && (ds.len() > profile.k || unfinished) {
                witness = Some(ConformanceWitness {
                    prefix: path.clone(),
                    decisions: ds.into_iter().collect(),
                    unfinished_winner: unfinished,
                });
            }
        }
        for (child, label) in c.children(&v) {
            let mut p = path.clone();
            p.push(label);
            stack.push((child, p));
        }
    }
    ConformanceReport { object: profile.object, n, k: profile.k, prefixes, widest, winners_finished, witness }
}

/// Where a process is in algorithm B.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Pc {
    WriteM,
    WriteT,
    StepA,
    CollectT1(usize),
    CollectR(usize),
    CollectT2(usize),
    ReadM(usize),
    Done,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct BProc {
    pc: Pc,
    t: u64,
    t1: Vec<u64>,
    t2: Vec<u64>,
    r: Vec<Value>,
    resps: Vec<Value>,
    decision: Option<Value>,
    /// Choices made by the local simulation, reported with the read of M.
    local: Vec<usize>,
    crashed: bool,
}

/// A configuration of algorithm B: the implementation's memory and
/// process states, the arrays `M` and `T`, and every process's locals.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BConfig {
    a: Config,
    m: Vec<Value>,
    t: Vec<u64>,
    procs: Vec<BProc>,
}

impl BConfig {
    pub fn decisions(&self) -> Vec<Option<Value>> {
        self.procs.iter().map(|p| p.decision.clone()).collect()
    }
}

/// One step of algorithm B.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum BAction {
    WriteM {
        value: Value,
    },
    WriteT {
        t: u64,
    },
    /// A step of the implementation.
    StepA {
        #[serde(skip_serializing_if = "Option::is_none")]
        obj: Option<BaseObjectId>,
        choices: Vec<usize>,
        #[serde(skip_serializing_if = "Option::is_none")]
        response: Option<Value>,
    },
    ReadT {
        collect: u8,
        j: usize,
        value: u64,
    },
    ReadR {
        x: usize,
        value: Value,
    },
    /// Reading `M[l]` after simulating the decision sequence locally.
    ReadM {
        l: usize,
        value: Value,
        local_choices: Vec<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BStep {
    pub proc: usize,
    #[serde(flatten)]
    pub action: BAction,
    /// Set on the last read of a double collect whose two `T` collects agree.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub converged: bool,
}

/// The agreement algorithm over one implementation and one profile.
#[derive(Clone, Debug)]
pub struct AgreementSetup {
    pub profile: OrderingProfile,
    /// The implementation with workload `prop_i · dec_i` for process i.
    pub sim: Sim,
    /// Base objects any execution of the proposals can access.
    pub r: Vec<BaseObjectId>,
    pub inputs: Vec<Value>,
    /// Steps allowed to the local simulation of a decision sequence.
    pub local_budget: usize,
}

impl AgreementSetup {
    pub fn new(profile: OrderingProfile, program: Program, inputs: &[i64]) -> Result<Self> {
        let n = profile.n;
        if inputs.len() != n {
            return Err(Error::Config(format!("{} inputs for {n} processes", inputs.len())));
        }
        let props = Workload::new(profile.prop.clone());
        let mut ex =
            Explorer::new(Sim::new(program.clone(), props)?, Bounds { max_steps: 10_000, crash_budget: 0 }, 1_000_000)?;
        ex.expand_all()?;
        let mut r = BTreeSet::new();
        for v in 0..ex.len() as u32 {
            r.extend(ex.config(v).table.touched());
        }
        let both: Vec<Vec<Op>> = (0..n).map(|i| [profile.prop[i].clone(), profile.dec[i].clone()].concat()).collect();
        Ok(AgreementSetup {
            sim: Sim::new(program, Workload::new(both))?,
            r: r.into_iter().collect(),
            inputs: inputs.iter().map(|&v| Value::Int(v)).collect(),
            local_budget: 10_000,
            profile,
        })
    }

    /// The agreement algorithm over a single atomic instance of the profile's object.
    pub fn atomic(profile: OrderingProfile, inputs: &[i64]) -> Result<Self> {
        let program = atomic_program(profile.object.base_kind(), Arc::new(profile.object.spec()), profile.n);
        AgreementSetup::new(profile, program, inputs)
    }

    pub fn n(&self) -> usize {
        self.profile.n
    }

    pub fn initial(&self) -> BConfig {
        let n = self.n();
        let proc = BProc {
            pc: Pc::WriteM,
            t: 0,
            t1: Vec::new(),
            t2: Vec::new(),
            r: Vec::new(),
            resps: Vec::new(),
            decision: None,
            local: Vec::new(),
            crashed: false,
        };
        BConfig { a: self.sim.initial(), m: vec![Value::Bottom; n], t: vec![0; n], procs: vec![proc; n] }
    }

    pub fn enabled(&self, c: &BConfig, p: usize) -> bool {
        !c.procs[p].crashed && c.procs[p].pc != Pc::Done
    }

    fn props_done(&self, c: &BConfig, p: usize) -> bool {
        let ps = &c.a.procs[p];
        ps.running.is_none() && ps.next >= self.profile.prop[p].len()
    }

    /// Runs the decision sequence solo from the collected states.
    fn simulate_decision(&self, c: &BConfig, p: usize, choices: &mut dyn ChoiceSource) -> Result<Vec<Value>> {
        let mut table = self.sim.program.initial_table();
        for (id, s) in self.r.iter().zip(&c.procs[p].r) {
            table.set_state(*id, s.clone())?;
        }
        let mut cfg = Config { table, procs: c.a.procs.clone() };
        let mut out = Vec::new();
        let mut steps = 0;
        while self.sim.enabled(&cfg, p) {
            steps += 1;
            if steps > self.local_budget {
                return Err(Error::Capacity {
                    what: format!("local simulation by p{p} exceeded {} steps", self.local_budget),
                    frontier: steps,
                });
            }
            if let Some(v) = self.sim.step(&mut cfg, p, choices)?.completed() {
                out.push(v.clone());
            }
        }
        Ok(out)
    }

    /// Runs one step of `p`; nondeterministic outcomes come from `choices`.
    pub fn step(&self, c: &mut BConfig, p: usize, choices: &mut dyn ChoiceSource) -> Result<BStep> {
        let n = self.n();
        let mut converged = false;
        let pc = c.procs[p].pc;
        let action = match pc {
            Pc::WriteM => {
                c.m[p] = self.inputs[p].clone();
                c.procs[p].pc = if self.props_done(c, p) { Pc::CollectT1(0) } else { Pc::WriteT };
                BAction::WriteM { value: self.inputs[p].clone() }
            }
            Pc::WriteT => {
                let bp = &mut c.procs[p];
                bp.t += 1;
                c.t[p] = bp.t;
                bp.pc = Pc::StepA;
                BAction::WriteT { t: bp.t }
            }
            Pc::StepA => {
                let mut log = Logged { inner: choices, log: Vec::new() };
                let rec = self.sim.step(&mut c.a, p, &mut log)?;
                let response = rec.completed().cloned();
                if let Some(v) = &response {
                    c.procs[p].resps.push(v.clone());
                }
                c.procs[p].pc = if self.props_done(c, p) { Pc::CollectT1(0) } else { Pc::WriteT };
                BAction::StepA { obj: rec.access.map(|a| a.obj), choices: log.log, response }
            }
            Pc::CollectT1(j) => {
                let value = c.t[j];
                let bp = &mut c.procs[p];
                if j == 0 {
                    bp.t1.clear();
                    bp.t2.clear();
                    bp.r.clear();
                }
                bp.t1.push(value);
                bp.pc = match (j + 1 < n, self.r.is_empty()) {
                    (true, _) => Pc::CollectT1(j + 1),
                    (false, true) => Pc::CollectT2(0),
                    (false, false) => Pc::CollectR(0),
                };
                BAction::ReadT { collect: 1, j, value }
            }
            Pc::CollectR(x) => {
                let value = c.a.table.state(self.r[x])?;
                let bp = &mut c.procs[p];
                bp.r.push(value.clone());
                bp.pc = if x + 1 < self.r.len() { Pc::CollectR(x + 1) } else { Pc::CollectT2(0) };
                BAction::ReadR { x, value }
            }
            Pc::CollectT2(j) => {
                let value = c.t[j];
                c.procs[p].t2.push(value);
                if j + 1 < n {
                    c.procs[p].pc = Pc::CollectT2(j + 1);
                } else if c.procs[p].t1 != c.procs[p].t2 {
                    c.procs[p].pc = Pc::CollectT1(0);
                } else {
                    converged = true;
                    let mut log = Logged { inner: choices, log: Vec::new() };
                    let dec = self.simulate_decision(c, p, &mut log)?;
                    let bp = &mut c.procs[p];
                    bp.resps.extend(dec);
                    let l = self.profile.d(p, &bp.resps);
                    bp.pc = Pc::ReadM(l);
                    bp.local = log.log;
                }
                BAction::ReadT { collect: 2, j, value }
            }
            Pc::ReadM(l) => {
                let value = c.m[l].clone();
                let bp = &mut c.procs[p];
                let local_choices = std::mem::take(&mut bp.local);
                bp.t1.clear();
                bp.t2.clear();
                bp.r.clear();
                bp.decision = Some(value.clone());
                bp.pc = Pc::Done;
                BAction::ReadM { l, value, local_choices }
            }
            Pc::Done => return Err(Error::Precondition(format!("p{p} has decided"))),
        };
        Ok(BStep { proc: p, action, converged })
    }

    /// Every outcome of stepping `p`, one per combination of choices.
    pub fn step_outcomes(&self, c: &BConfig, p: usize) -> Result<Vec<(Vec<usize>, BConfig, BStep)>> {
        let mut out = Vec::new();
        let mut todo = vec![Vec::new()];
        while let Some(script) = todo.pop() {
            let mut next = c.clone();
            let mut choices = ScriptedChoices::new(script.clone());
            let s = self.step(&mut next, p, &mut choices)?;
            let chosen: Vec<usize> = choices.log.iter().map(|c| c.1).collect();
            for i in script.len()..choices.log.len() {
                for alt in 1..choices.log[i].0 {
                    let mut a = chosen[..i].to_vec();
                    a.push(alt);
                    todo.push(a);
                }
            }
            out.push((chosen, next, s));
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }
}

struct Logged<'a> {
    inner: &'a mut dyn ChoiceSource,
    log: Vec<usize>,
}

impl ChoiceSource for Logged<'_> {
    fn choose(&mut self, arity: usize) -> usize {
        let c = self.inner.choose(arity).min(arity - 1);
        self.log.push(c);
        c
    }
}

/// One execution of algorithm B.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AgreementRun {
    pub inputs: Vec<Value>,
    /// Decided value per process; `None` for crashed or unfinished ones.
    pub decisions: Vec<Option<Value>>,
    pub crashed: Vec<bool>,
    pub schedule: Schedule,
    pub trace: Vec<BStep>,
}

impl AgreementRun {
    /// Correct processes that had not decided when the schedule ran out.
    pub fn undecided(&self) -> Vec<usize> {
        (0..self.decisions.len()).filter(|&i| !self.crashed[i] && self.decisions[i].is_none()).collect()
    }

    /// The schedule ended before every correct process decided.
    pub fn inconclusive(&self) -> bool {
        !self.undecided().is_empty()
    }
}

/// Executes algorithm B under `schedule`.
pub fn run_algorithm_b(setup: &AgreementSetup, schedule: &Schedule) -> Result<AgreementRun> {
    let mut c = setup.initial();
    let mut choices = ScriptedChoices::new(schedule.choices.clone());
    let mut trace = Vec::new();
    for (index, item) in schedule.items.iter().enumerate() {
        let bad = |reason: String| Error::Schedule { index, reason };
        match *item {
            ScheduleItem::Step(p) => {
                if p >= setup.n() || !setup.enabled(&c, p) {
                    return Err(bad(format!("p{p} cannot take a step")));
                }
                trace.push(setup.step(&mut c, p, &mut choices)?);
            }
            ScheduleItem::Crash { crash: p } => {
                if p >= setup.n() || c.procs[p].crashed {
                    return Err(bad(format!("cannot crash p{p}")));
                }
                c.procs[p].crashed = true;
            }
        }
    }
    Ok(AgreementRun {
        inputs: setup.inputs.clone(),
        decisions: c.decisions(),
        crashed: c.procs.iter().map(|p| p.crashed).collect(),
        schedule: schedule.clone(),
        trace,
    })
}

/// A pseudo-random complete schedule; `crash` is the chance per step that
/// the stepping process crashes instead, while keeping one process alive.
pub fn random_b_schedule(setup: &AgreementSetup, seed: u64, crash: f64, max_steps: usize) -> Result<Schedule> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = setup.initial();
    let mut s = Schedule::default();
    while s.items.len() < max_steps {
        let live: Vec<usize> = (0..setup.n()).filter(|&p| setup.enabled(&c, p)).collect();
        if live.is_empty() {
            break;
        }
        let p = live[rng.gen_range(0..live.len())];
        let alive = c.procs.iter().filter(|b| !b.crashed).count();
        if alive > 1 && rng.gen_bool(crash) {
            c.procs[p].crashed = true;
            s.items.push(ScheduleItem::Crash { crash: p });
            continue;
        }
        let mut outcomes = setup.step_outcomes(&c, p)?;
        let (chosen, next, _) = outcomes.swap_remove(rng.gen_range(0..outcomes.len()));
        c = next;
        s.choices.extend(chosen);
        s.items.push(ScheduleItem::Step(p));
    }
    Ok(s)
}

#[derive(Clone, Debug, Default, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AgreementReport {
    pub runs: usize,
    pub validity_failures: usize,
    pub agreement_failures: usize,
    /// Runs whose schedule ended before a correct process decided.
    pub inconclusive: usize,
    pub most_distinct: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<Schedule>,
}

impl AgreementReport {
    pub fn passed(&self) -> bool {
        self.validity_failures == 0 && self.agreement_failures == 0
    }
}

/// Distinct decided values, or an error naming a value nobody proposed.
fn judge(inputs: &[Value], decisions: &[Option<Value>], k: usize) -> (bool, bool, usize) {
    let decided: BTreeSet<&Value> = decisions.iter().flatten().collect();
    let valid = decided.iter().all(|v| inputs.contains(v));
    (valid, decided.len() <= k, decided.len())
}

pub fn validate_agreement(runs: &[AgreementRun], k: usize) -> AgreementReport {
    let mut r = AgreementReport { runs: runs.len(), ..AgreementReport::default() };
    for run in runs {
        let (valid, agree, distinct) = judge(&run.inputs, &run.decisions, k);
        r.most_distinct = r.most_distinct.max(distinct);
        if !valid {
            r.validity_failures += 1;
        }
        if !agree {
            r.agreement_failures += 1;
        }
        if run.inconclusive() {
            r.inconclusive += 1;
        }
        if (!valid || !agree) && r.first_failure.is_none() {
            r.first_failure = Some(run.schedule.clone());
        }
    }
    r
}

/// Checks the snapshot claim for `p`'s last double collect in `run`.
///
/// Let `e1` be the last read of the first `T` collect and `e2` the first
/// read of the second. Drop, for every collected object, the
/// implementation steps of other processes between `e1` and `e2` that
/// access it after `p` read it, and everything after `e2`. The remaining
/// implementation steps must replay and leave exactly the collected states,
/// with `p` having no pending operation.
pub fn verify_collect_claim(setup: &AgreementSetup, run: &AgreementRun, p: usize) -> Result<bool> {
    let trace = &run.trace;
    let Some(exit) = trace.iter().rposition(|s| s.proc == p && s.converged) else {
        return Err(Error::Precondition(format!("p{p} never finished a double collect")));
    };
    let mine: Vec<usize> = (0..=exit).filter(|&i| trace[i].proc == p).collect();
    let mut at = mine.len() - 1;
    while at > 0 && matches!(trace[mine[at - 1]].action, BAction::ReadT { collect: 2, .. }) {
        at -= 1;
    }
    let e2 = mine[at];
    let mut reads: BTreeMap<usize, (usize, Value)> = BTreeMap::new();
    while at > 0 {
        match &trace[mine[at - 1]].action {
            BAction::ReadR { x, value } => {
                reads.insert(*x, (mine[at - 1], value.clone()));
                at -= 1;
            }
            _ => break,
        }
    }
    if at == 0 || !matches!(trace[mine[at - 1]].action, BAction::ReadT { collect: 1, .. }) {
        return Ok(false);
    }
    let e1 = mine[at - 1];
    if reads.len() != setup.r.len() {
        return Ok(false);
    }
    let read_at: BTreeMap<BaseObjectId, usize> = reads.iter().map(|(x, (i, _))| (setup.r[*x], *i)).collect();
    let mut in_h: BTreeMap<usize, usize> = BTreeMap::new();
    let mut kept = Vec::new();
    for (i, s) in trace.iter().enumerate().take(e2) {
        let BAction::StepA { obj, choices, .. } = &s.action else { continue };
        if i > e1 {
            // each process takes at most one implementation step in between
            let seen = in_h.entry(s.proc).or_insert(0);
            *seen += 1;
            if *seen > 1 {
                return Ok(false);
            }
            if obj.and_then(|o| read_at.get(&o)).is_some_and(|&r| i > r) {
                continue;
            }
        }
        kept.push((s.proc, choices.clone()));
    }
    let mut cfg = setup.sim.initial();
    for (q, choices) in kept {
        if !setup.sim.enabled(&cfg, q) {
            return Ok(false);
        }
        setup.sim.step(&mut cfg, q, &mut ScriptedChoices::new(choices))?;
    }
    if cfg.procs[p].running.is_some() {
        return Ok(false);
    }
    for (x, (_, value)) in &reads {
        if cfg.table.state(setup.r[*x])? != *value {
            return Ok(false);
        }
    }
    Ok(true)
}

fn biguint_str<S: Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExhaustiveReport {
    pub object: OrderingObject,
    pub n: usize,
    pub k: usize,
    pub inputs: Vec<Value>,
    pub configurations: usize,
    /// Maximal crash-free schedules, counting each choice outcome.
    #[serde(serialize_with = "biguint_str")]
    pub crash_free_runs: BigUint,
    pub most_distinct: usize,
    pub validity_failures: usize,
    pub agreement_failures: usize,
    /// Configurations past the step bound, left unexplored.
    pub inconclusive: usize,
    pub claims_checked: usize,
    pub claims_failed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<Schedule>,
}

impl ExhaustiveReport {
    pub fn passed(&self) -> bool {
        self.validity_failures == 0 && self.agreement_failures == 0 && self.inconclusive == 0 && self.claims_failed == 0
    }
}

/// Explores every configuration of algorithm B.
///
/// Decisions are never revoked, so checking validity and agreement in every
/// reachable configuration covers every run, including runs in which the
/// undecided processes crash there. The snapshot claim is checked for each
/// converging double collect along the first schedule found to reach it.
pub fn explore_agreement(setup: &AgreementSetup, max_steps: usize, node_limit: usize) -> Result<ExhaustiveReport> {
    let n = setup.n();
    let mut nodes: Vec<Arc<BConfig>> = vec![Arc::new(setup.initial())];
    let mut index: HashMap<Arc<BConfig>, u32> = HashMap::default();
    index.insert(nodes[0].clone(), 0);
    // first parent: (node, proc, choices), and depth
    let mut parent: Vec<Option<(u32, usize, Vec<usize>)>> = vec![None];
    let mut depth = vec![0usize];
    let mut children: Vec<Vec<u32>> = Vec::new();
    let mut exits: Vec<(u32, usize)> = Vec::new();
    let mut report = ExhaustiveReport {
        object: setup.profile.object,
        n,
        k: setup.profile.k,
        inputs: setup.inputs.clone(),
        configurations: 0,
        crash_free_runs: BigUint::from(0u32),
        most_distinct: 0,
        validity_failures: 0,
        agreement_failures: 0,
        inconclusive: 0,
        claims_checked: 0,
        claims_failed: 0,
        first_failure: None,
    };
    let path_to = |parent: &[Option<(u32, usize, Vec<usize>)>], mut v: u32| {
        let mut steps = Vec::new();
        while let Some((u, p, ch)) = &parent[v as usize] {
            steps.push((*p, ch.clone()));
            v = *u;
        }
        steps.reverse();
        let mut s = Schedule::default();
        for (p, ch) in steps {
            s.items.push(ScheduleItem::Step(p));
            s.choices.extend(ch);
        }
        s
    };
    let mut v = 0usize;
    while v < nodes.len() {
        let c = nodes[v].clone();
        let (valid, agree, distinct) = judge(&setup.inputs, &c.decisions(), setup.profile.k);
        report.most_distinct = report.most_distinct.max(distinct);
        report.validity_failures += usize::from(!valid);
        report.agreement_failures += usize::from(!agree);
        if (!valid || !agree) && report.first_failure.is_none() {
            report.first_failure = Some(path_to(&parent, v as u32));
        }
        let mut kids = Vec::new();
        if depth[v] >= max_steps {
            if (0..n).any(|p| setup.enabled(&c, p)) {
                report.inconclusive += 1;
            }
        } else {
            for p in 0..n {
                if !setup.enabled(&c, p) {
                    continue;
                }
                for (chosen, next, step) in setup.step_outcomes(&c, p)? {
                    let next = Arc::new(next);
                    let id = match index.get(&next) {
                        Some(&id) => id,
                        None => {
                            if nodes.len() >= node_limit {
                                return Err(Error::Capacity {
                                    what: format!("agreement exploration exceeded {node_limit} configurations"),
                                    frontier: nodes.len() - v,
                                });
                            }
                            let id = nodes.len() as u32;
                            nodes.push(next.clone());
                            index.insert(next, id);
                            parent.push(Some((v as u32, p, chosen)));
                            depth.push(depth[v] + 1);
                            if step.converged {
                                exits.push((id, p));
                            }
                            id
                        }
                    };
                    kids.push(id);
                }
            }
        }
        children.push(kids);
        v += 1;
    }
    report.configurations = nodes.len();
    drop(index);
    // runs counted from the leaves up; breadth-first ids need not be
    // topological once configurations merge, so iterate to a fixed point
    let mut runs: Vec<Option<BigUint>> = vec![None; nodes.len()];
    let mut stack = vec![(0u32, false)];
    while let Some((v, done)) = stack.pop() {
        if runs[v as usize].is_some() {
            continue;
        }
        let kids = &children[v as usize];
        if done || kids.is_empty() {
            let total = if kids.is_empty() {
                BigUint::from(1u32)
            } else {
                kids.iter().map(|&k| runs[k as usize].clone().unwrap_or_default()).sum()
            };
            runs[v as usize] = Some(total);
        } else {
            stack.push((v, true));
            stack.extend(kids.iter().filter(|&&k| runs[k as usize].is_none()).map(|&k| (k, false)));
        }
    }
    report.crash_free_runs = runs[0].clone().unwrap_or_default();
    for (v, p) in exits {
        let run = run_algorithm_b(setup, &path_to(&parent, v))?;
        report.claims_checked += 1;
        if !verify_collect_claim(setup, &run, p)? {
            report.claims_failed += 1;
            if report.first_failure.is_none() {
                report.first_failure = Some(run.schedule);
            }
        }
    }
    Ok(report)
}
