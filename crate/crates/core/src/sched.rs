//! Deterministic execution of programs under explicit schedules.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algo::{Access, Frame, Locals, Poll, Started, StepCx};
use crate::base::{ChoiceSource, ObjectDump, ObjectTable, ScriptedChoices};
use crate::catalog::Program;
use crate::error::{Error, Result};
use crate::model::{Event, History, Op, OpId};
use crate::value::Value;

/// Per-process invocation sequences.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Workload {
    #[serde(with = "op_lists")]
    pub procs: Vec<Vec<Op>>,
}

mod op_lists {
    use super::Op;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(procs: &[Vec<Op>], s: S) -> Result<S::Ok, S::Error> {
        let text: Vec<Vec<String>> = procs.iter().map(|p| p.iter().map(Op::to_string).collect()).collect();
        text.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Op>>, D::Error> {
        let text: Vec<Vec<String>> = Vec::deserialize(d)?;
        text.into_iter()
            .map(|p| {
                p.into_iter()
                    .map(|t| Op::parse(&t).ok_or_else(|| D::Error::custom(format!("bad operation {t:?}"))))
                    .collect()
            })
            .collect()
    }
}

impl Workload {
    pub fn new(procs: Vec<Vec<Op>>) -> Self {
        Workload { procs }
    }

    /// Parses `"inc;inc,inc;read"`: processes separated by `;`, operations
    /// by `,`. An empty segment is a process with no operations.
    pub fn parse(text: &str) -> Option<Workload> {
        let procs = text
            .split(';')
            .map(|p| {
                let p = p.trim();
                if p.is_empty() {
                    Some(Vec::new())
                } else {
                    p.split(',').map(Op::parse).collect()
                }
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Workload { procs })
    }

    pub fn n(&self) -> usize {
        self.procs.len()
    }

    pub fn total_ops(&self) -> usize {
        self.procs.iter().map(Vec::len).sum()
    }

    pub fn op(&self, id: OpId) -> Option<&Op> {
        self.procs.get(id.proc.0)?.get(id.seq)
    }

    /// Dense index of an operation, processes in order.
    pub fn index_of(&self, id: OpId) -> usize {
        self.procs[..id.proc.0].iter().map(Vec::len).sum::<usize>() + id.seq
    }

    pub fn ids(&self) -> Vec<OpId> {
        self.procs.iter().enumerate().flat_map(|(p, ops)| (0..ops.len()).map(move |s| OpId::new(p, s))).collect()
    }

    /// Every workload with exactly `ops` operations per process drawn from
    /// `domain`, optionally only one representative per process permutation.
    pub fn all(n: usize, ops: usize, domain: &[Op], up_to_symmetry: bool) -> Vec<Workload> {
        let mut seqs: Vec<Vec<Op>> = vec![Vec::new()];
        for _ in 0..ops {
            seqs = seqs
                .into_iter()
                .flat_map(|s| {
                    domain.iter().map(move |op| {
                        let mut s = s.clone();
                        s.push(op.clone());
                        s
                    })
                })
                .collect();
        }
        let mut out = Vec::new();
        let mut pick = vec![0usize; n];
        loop {
            if !up_to_symmetry || pick.windows(2).all(|w| w[0] <= w[1]) {
                out.push(Workload::new(pick.iter().map(|&i| seqs[i].clone()).collect()));
            }
            let mut i = n;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                pick[i] += 1;
                if pick[i] < seqs.len() {
                    break;
                }
                pick[i] = 0;
            }
        }
    }
}

impl std::fmt::Display for Workload {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let procs: Vec<String> =
            self.procs.iter().map(|p| p.iter().map(Op::to_string).collect::<Vec<_>>().join(",")).collect();
        f.write_str(&procs.join(";"))
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScheduleItem {
    Step(usize),
    Crash { crash: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Schedule {
    pub items: Vec<ScheduleItem>,
    /// Outcomes picked at relaxed-object choice points, in step order.
    #[serde(default)]
    pub choices: Vec<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Bounds {
    pub max_steps: usize,
    pub crash_budget: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { max_steps: 200, crash_budget: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Running {
    pub seq: usize,
    pub frame: Frame,
    pub steps: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct ProcState {
    pub next: usize,
    pub running: Option<Running>,
    pub locals: Locals,
    pub crashed: bool,
}

/// A configuration: shared memory plus every process's local state.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Config {
    pub table: ObjectTable,
    pub procs: Vec<ProcState>,
}

/// What one schedule item did.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepRecord {
    pub proc: usize,
    pub op: OpId,
    pub access: Option<Access>,
    pub events: Vec<Event>,
    /// `(arity, chosen)` for each choice point hit.
    pub choices: Vec<(usize, usize)>,
    /// Steps the operation had taken including this one.
    pub op_steps: usize,
}

impl StepRecord {
    pub fn completed(&self) -> Option<&Value> {
        self.events.iter().find(|e| e.kind == crate::model::EventKind::Respond).map(|e| &e.payload)
    }
}

/// A program bound to a workload.
#[derive(Clone, Debug)]
pub struct Sim {
    pub program: Arc<Program>,
    pub workload: Arc<Workload>,
}

impl Sim {
    pub fn new(program: Program, workload: Workload) -> Result<Sim> {
        program.validate_workload(&workload.procs)?;
        Ok(Sim { program: Arc::new(program), workload: Arc::new(workload) })
    }

    pub fn n(&self) -> usize {
        self.workload.n()
    }

    pub fn initial(&self) -> Config {
        Config { table: self.program.initial_table(), procs: vec![ProcState::default(); self.n()] }
    }

    /// True if `p` has a step to take.
    pub fn enabled(&self, cfg: &Config, p: usize) -> bool {
        let ps = &cfg.procs[p];
        !ps.crashed && (ps.running.is_some() || ps.next < self.workload.procs[p].len())
    }

    pub fn any_enabled(&self, cfg: &Config) -> bool {
        (0..self.n()).any(|p| self.enabled(cfg, p))
    }

    /// Runs one step of `p`. Starting an operation and finishing it are
    /// folded into the first and last base-object actions.
    pub fn step(&self, cfg: &mut Config, p: usize, choices: &mut dyn ChoiceSource) -> Result<StepRecord> {
        let mut events = Vec::new();
        let Config { table, procs } = cfg;
        let ps = &mut procs[p];
        let root = &self.program.root;
        let mut log = LoggingChoices { inner: choices, log: Vec::new() };
        let (seq, access, done, steps) = {
            let mut cx = StepCx::new(table, &mut ps.locals, p, &mut log);
            let mut running = match ps.running.take() {
                Some(r) => r,
                None => {
                    let seq = ps.next;
                    let op = &self.workload.procs[p][seq];
                    ps.next += 1;
                    events.push(Event::invoke(OpId::new(p, seq), op));
                    match root.start(op, None, &mut cx)? {
                        Started::Frame(frame) => Running { seq, frame, steps: 0 },
                        Started::Done(v) => {
                            events.push(Event::respond(OpId::new(p, seq), &op.name, v));
                            let access = cx.access.take();
                            drop(cx);
                            return Ok(StepRecord {
                                proc: p,
                                op: OpId::new(p, seq),
                                access,
                                events,
                                choices: log.log,
                                op_steps: 1,
                            });
                        }
                    }
                }
            };
            running.steps += 1;
            let polled = root.step(&mut running.frame, None, &mut cx)?;
            let access = cx.access.take();
            let steps = running.steps;
            let seq = running.seq;
            match polled {
                Poll::Pending => {
                    ps.running = Some(running);
                    (seq, access, None, steps)
                }
                Poll::Ready(v) => (seq, access, Some(v), steps),
            }
        };
        let id = OpId::new(p, seq);
        if let Some(v) = done {
            events.push(Event::respond(id, &self.workload.procs[p][seq].name, v));
        }
        Ok(StepRecord { proc: p, op: id, access, events, choices: log.log, op_steps: steps })
    }

    pub fn crash(&self, cfg: &mut Config, p: usize) {
        cfg.procs[p].crashed = true;
    }

    /// Every outcome of stepping `p`, one per combination of choice-point
    /// outcomes, in lexicographic order of the choices.
    pub fn step_outcomes(&self, cfg: &Config, p: usize) -> Result<Vec<(Config, StepRecord)>> {
        let mut out: Vec<(Vec<usize>, Config, StepRecord)> = Vec::new();
        let mut todo = vec![Vec::new()];
        while let Some(script) = todo.pop() {
            let mut next = cfg.clone();
            let mut choices = ScriptedChoices::new(script.clone());
            let rec = self.step(&mut next, p, &mut choices)?;
            let chosen: Vec<usize> = rec.choices.iter().map(|c| c.1).collect();
            for i in script.len()..rec.choices.len() {
                for c in 1..rec.choices[i].0 {
                    let mut alt = chosen[..i].to_vec();
                    alt.push(c);
                    todo.push(alt);
                }
            }
            out.push((chosen, next, rec));
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out.into_iter().map(|(_, c, r)| (c, r)).collect())
    }
}

struct LoggingChoices<'a> {
    inner: &'a mut dyn ChoiceSource,
    log: Vec<(usize, usize)>,
}

impl ChoiceSource for LoggingChoices<'_> {
    fn choose(&mut self, arity: usize) -> usize {
        let c = self.inner.choose(arity).min(arity - 1);
        self.log.push((arity, c));
        c
    }
}

/// One executed step in a trace.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub proc: usize,
    pub op: OpId,
    /// Accessed object label, absent for a step without a shared access.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obj: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default)]
    pub path: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Trace {
    pub program: String,
    pub options: crate::catalog::BuildOptions,
    pub workload: Workload,
    pub schedule: Schedule,
    pub history: History,
    pub steps: Vec<TraceStep>,
    pub final_states: Vec<ObjectDump>,
    pub choice_log: Vec<usize>,
}

fn trace_step(table: &ObjectTable, rec: &StepRecord) -> TraceStep {
    let a = rec.access.as_ref();
    TraceStep {
        proc: rec.proc,
        op: rec.op,
        obj: a.map(|a| table.label(a.obj)),
        action: a.map(|a| a.action.to_string()),
        result: a.map(|a| a.result.clone()),
        path: a.map(|a| a.labels.iter().map(|s| s.to_string()).collect()).unwrap_or_default(),
    }
}

/// Executes `schedule` and records everything that happened.
pub fn run(sim: &Sim, schedule: &Schedule) -> Result<Trace> {
    let mut cfg = sim.initial();
    let mut choices = ScriptedChoices::new(schedule.choices.clone());
    let mut events = Vec::new();
    let mut steps = Vec::new();
    for (index, item) in schedule.items.iter().enumerate() {
        let bad = |reason: String| Error::Schedule { index, reason };
        match *item {
            ScheduleItem::Step(p) => {
                if p >= sim.n() {
                    return Err(bad(format!("no process {p}")));
                }
                if cfg.procs[p].crashed {
                    return Err(bad(format!("p{p} has crashed")));
                }
                if !sim.enabled(&cfg, p) {
                    return Err(bad(format!("p{p} has no pending step")));
                }
                let rec = sim.step(&mut cfg, p, &mut choices)?;
                steps.push(trace_step(&cfg.table, &rec));
                events.extend(rec.events);
            }
            ScheduleItem::Crash { crash: p } => {
                if p >= sim.n() || cfg.procs[p].crashed {
                    return Err(bad(format!("cannot crash p{p}")));
                }
                sim.crash(&mut cfg, p);
            }
        }
    }
    Ok(Trace {
        program: sim.program.name.clone(),
        options: sim.program.options.clone(),
        workload: sim.workload.as_ref().clone(),
        schedule: schedule.clone(),
        history: History::new(events),
        steps,
        final_states: cfg.table.dump(),
        choice_log: choices.log.iter().map(|c| c.1).collect(),
    })
}

/// Re-executes a recorded trace. Returns one line per recorded field that
/// the re-execution does not reproduce.
pub fn replay(trace: &Trace) -> Result<Vec<String>> {
    let program = crate::catalog::build(&trace.program, &trace.options)?;
    let again = run(&Sim::new(program, trace.workload.clone())?, &trace.schedule)?;
    fn first_diff<T: PartialEq + fmt::Debug>(what: &str, old: &[T], new: &[T]) -> Option<String> {
        let i = old.iter().zip(new).position(|(a, b)| a != b).unwrap_or(old.len().min(new.len()));
        if old.len() == new.len() && i == old.len() {
            return None;
        }
        Some(format!("{what}[{i}]: recorded {:?}, replayed {:?}", old.get(i), new.get(i)))
    }
    Ok([
        first_diff("history", &trace.history.events, &again.history.events),
        first_diff("steps", &trace.steps, &again.steps),
        first_diff("finalStates", &trace.final_states, &again.final_states),
        first_diff("choiceLog", &trace.choice_log, &again.choice_log),
    ]
    .into_iter()
    .flatten()
    .collect())
}

struct Branch {
    item: ScheduleItem,
    choices: Vec<usize>,
    child: Config,
}

struct Level {
    branches: std::vec::IntoIter<Branch>,
    steps: usize,
    crashes: usize,
    choice_len: usize,
}

/// Lazy depth-first enumeration of maximal schedules.
pub struct Schedules {
    sim: Sim,
    bounds: Bounds,
    stack: Vec<Level>,
    prefix: Vec<ScheduleItem>,
    choices: Vec<usize>,
    root: Option<Config>,
    failed: bool,
}

impl Schedules {
    fn branches(&self, cfg: &Config, steps: usize, crashes: usize) -> Result<Vec<Branch>> {
        let mut out = Vec::new();
        if steps >= self.bounds.max_steps {
            return Ok(out);
        }
        for p in 0..self.sim.n() {
            if self.sim.enabled(cfg, p) {
                for (child, rec) in self.sim.step_outcomes(cfg, p)? {
                    let choices = rec.choices.iter().map(|c| c.1).collect();
                    out.push(Branch { item: ScheduleItem::Step(p), choices, child });
                }
            }
        }
        if crashes < self.bounds.crash_budget {
            for p in 0..self.sim.n() {
                if self.sim.enabled(cfg, p) {
                    let mut child = cfg.clone();
                    self.sim.crash(&mut child, p);
                    out.push(Branch { item: ScheduleItem::Crash { crash: p }, choices: Vec::new(), child });
                }
            }
        }
        Ok(out)
    }

    fn current(&self) -> Schedule {
        Schedule { items: self.prefix.clone(), choices: self.choices.clone() }
    }
}

impl Iterator for Schedules {
    type Item = Result<Schedule>;

    fn next(&mut self) -> Option<Result<Schedule>> {
        if self.failed {
            return None;
        }
        if let Some(root) = self.root.take() {
            match self.branches(&root, 0, 0) {
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
                Ok(b) if b.is_empty() => return Some(Ok(self.current())),
                Ok(b) => self.stack.push(Level { branches: b.into_iter(), steps: 0, crashes: 0, choice_len: 0 }),
            }
        }
        loop {
            let level = self.stack.last_mut()?;
            let Some(branch) = level.branches.next() else {
                self.stack.pop();
                self.prefix.pop();
                let len = self.stack.last().map_or(0, |l| l.choice_len);
                self.choices.truncate(len);
                continue;
            };
            let (mut steps, mut crashes) = (level.steps, level.crashes);
            match branch.item {
                ScheduleItem::Step(_) => steps += 1,
                ScheduleItem::Crash { .. } => crashes += 1,
            }
            let base = level.choice_len;
            self.choices.truncate(base);
            self.prefix.push(branch.item);
            self.choices.extend(branch.choices);
            match self.branches(&branch.child, steps, crashes) {
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
                Ok(b) if b.is_empty() => {
                    let s = self.current();
                    self.prefix.pop();
                    self.choices.truncate(base);
                    return Some(Ok(s));
                }
                Ok(b) => {
                    let choice_len = self.choices.len();
                    self.stack.push(Level { branches: b.into_iter(), steps, crashes, choice_len });
                }
            }
        }
    }
}

/// Every maximal legal schedule within `bounds`, lexicographically, steps
/// before crashes.
pub fn enumerate_schedules(sim: &Sim, bounds: Bounds) -> Schedules {
    Schedules {
        sim: sim.clone(),
        bounds,
        stack: Vec::new(),
        prefix: Vec::new(),
        choices: Vec::new(),
        root: Some(sim.initial()),
        failed: false,
    }
}

struct RngChoices<'a>(&'a mut ChaCha8Rng);

impl ChoiceSource for RngChoices<'_> {
    fn choose(&mut self, arity: usize) -> usize {
        self.0.gen_range(0..arity)
    }
}

/// A reproducible crash-free schedule; `bias[p]` weights process `p`
/// (missing entries weigh 1).
pub fn random_schedule(sim: &Sim, seed: u64, bias: &[f64], max_steps: usize) -> Result<Schedule> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cfg = sim.initial();
    let mut schedule = Schedule::default();
    while schedule.items.len() < max_steps {
        let enabled: Vec<usize> = (0..sim.n()).filter(|&p| sim.enabled(&cfg, p)).collect();
        if enabled.is_empty() {
            break;
        }
        let weights: Vec<f64> = enabled.iter().map(|&p| bias.get(p).copied().unwrap_or(1.0).max(0.0)).collect();
        let total: f64 = weights.iter().sum();
        let p = if total > 0.0 {
            let mut x = rng.gen_range(0.0..total);
            let mut pick = enabled[enabled.len() - 1];
            for (&p, &w) in enabled.iter().zip(&weights) {
                if w > 0.0 && x < w {
                    pick = p;
                    break;
                }
                x -= w;
            }
            pick
        } else {
            enabled[rng.gen_range(0..enabled.len())]
        };
        let rec = sim.step(&mut cfg, p, &mut RngChoices(&mut rng))?;
        schedule.items.push(ScheduleItem::Step(p));
        schedule.choices.extend(rec.choices.iter().map(|c| c.1));
    }
    Ok(schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build, BuildOptions};

    fn sim(name: &str, w: &str) -> Sim {
        let w = Workload::parse(w).unwrap();
        Sim::new(build(name, &BuildOptions::new(w.n().max(1))).unwrap(), w).unwrap()
    }

    fn count(s: &Sim, bounds: Bounds) -> usize {
        enumerate_schedules(s, bounds).inspect(|r| assert!(r.is_ok())).count()
    }

    #[test]
    fn schedule_counts() {
        let one = Bounds { max_steps: 50, crash_budget: 0 };
        assert_eq!(count(&sim("maxRegisterFA", "ReadMax;ReadMax"), one), 2);
        // readable t&s takes two steps
        assert_eq!(count(&sim("readableTAS", "testAndSet;testAndSet"), one), 6);
        let crash = Bounds { max_steps: 50, crash_budget: 1 };
        assert_eq!(count(&sim("readableTAS", "testAndSet"), crash), 3);
    }

    #[test]
    fn empty_workload_has_one_empty_schedule() {
        let s = sim("maxRegisterFA", "");
        let all: Vec<Schedule> = enumerate_schedules(&s, Bounds::default()).map(|r| r.unwrap()).collect();
        assert_eq!(all, vec![Schedule::default()]);
        assert!(run(&s, &all[0]).unwrap().history.is_empty());
    }

    #[test]
    fn replayed_traces_match_and_tampering_shows() {
        let s = sim("readableTAS", "testAndSet;testAndSet,read");
        let sch = random_schedule(&s, 7, &[], 100).unwrap();
        let t = run(&s, &sch).unwrap();
        let back: Trace = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert!(replay(&back).unwrap().is_empty());
        let mut forged = back.clone();
        forged.steps[0].result = Some(Value::Int(42));
        let diffs = replay(&forged).unwrap();
        assert_eq!(diffs.len(), 1);
        assert!(diffs[0].starts_with("steps[0]"), "{diffs:?}");
    }

    #[test]
    fn enumerated_histories_match_interleavings() {
        let s = sim("maxRegisterFA", "WriteMax(2);WriteMax(1)");
        let mut finals = Vec::new();
        for sch in enumerate_schedules(&s, Bounds::default()) {
            let t = run(&s, &sch.unwrap()).unwrap();
            assert!(t.history.is_well_formed());
            finals.push(t.history.events.iter().map(|e| e.op.proc.0).collect::<Vec<_>>());
        }
        assert_eq!(finals, vec![vec![0, 0, 1, 1], vec![1, 1, 0, 0]]);
    }

    #[test]
    fn illegal_items_name_their_index() {
        let s = sim("readableTAS", "read;read");
        let bad = Schedule { items: vec![ScheduleItem::Step(0), ScheduleItem::Step(0)], choices: vec![] };
        assert!(matches!(run(&s, &bad), Err(Error::Schedule { index: 1, .. })));
        let bad = Schedule { items: vec![ScheduleItem::Crash { crash: 1 }, ScheduleItem::Step(1)], choices: vec![] };
        assert!(matches!(run(&s, &bad), Err(Error::Schedule { index: 1, .. })));
    }

    #[test]
    fn crashed_processes_leave_pending_ops() {
        let s = sim("readableTAS", "testAndSet;read");
        let sch = Schedule {
            items: vec![ScheduleItem::Step(0), ScheduleItem::Crash { crash: 0 }, ScheduleItem::Step(1)],
            choices: vec![],
        };
        let t = run(&s, &sch).unwrap();
        assert_eq!(t.history.len(), 3);
        let ops = t.history.operations().unwrap();
        assert!(ops.iter().any(|o| !o.is_complete()));
    }

    #[test]
    fn random_schedules_are_reproducible_and_biased() {
        let s = sim("readableTAS", "testAndSet,read;testAndSet;read");
        let a = random_schedule(&s, 7, &[], 100).unwrap();
        assert_eq!(a, random_schedule(&s, 7, &[], 100).unwrap());
        let b = random_schedule(&s, 7, &[1.0, 0.0, 0.0], 100).unwrap();
        assert_eq!(&b.items[..3], &[ScheduleItem::Step(0); 3]);
        assert_eq!(run(&s, &a).unwrap(), run(&s, &a).unwrap());
    }

    #[test]
    fn relaxed_choices_branch_the_enumeration() {
        use crate::base::BaseKind;
        use crate::catalog::atomic_program;
        use crate::specs::{ContainerSpec, Discipline, Relaxation};
        let kind = BaseKind::AtomicRelaxed(Discipline::Fifo, Relaxation::OutOfOrder(2));
        let spec = std::sync::Arc::new(ContainerSpec::relaxed(Discipline::Fifo, Relaxation::OutOfOrder(2)));
        let w = Workload::parse("enq(1),enq(2),deq").unwrap();
        let s = Sim::new(atomic_program(kind, spec, 1), w).unwrap();
        let all: Vec<Schedule> = enumerate_schedules(&s, Bounds::default()).map(|r| r.unwrap()).collect();
        assert_eq!(all.len(), 2);
        let outs: Vec<Value> =
            all.iter().map(|sch| run(&s, sch).unwrap().history.events.last().unwrap().payload.clone()).collect();
        assert_eq!(outs, vec![Value::Int(1), Value::Int(2)]);
    }

    #[test]
    fn workload_parsing_and_generation() {
        let w = Workload::parse("inc;inc,inc;read").unwrap();
        assert_eq!(w.total_ops(), 4);
        assert_eq!(w.to_string(), "inc;inc,inc;read");
        let json = serde_json::to_string(&w).unwrap();
        assert_eq!(json, r#"[["inc"],["inc","inc"],["read"]]"#);
        let dom = vec![Op::nullary("a"), Op::nullary("b")];
        assert_eq!(Workload::all(2, 1, &dom, false).len(), 4);
        assert_eq!(Workload::all(2, 1, &dom, true).len(), 3);
        assert_eq!(Workload::all(3, 2, &dom, true).len(), 20);
    }
}
