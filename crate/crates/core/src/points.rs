//! Fixed linearization-point rules.
//!
//! A rule reads the steps of an execution in order and places each
//! operation at one of them. Ordering operations by their points must then
//! give a valid linearization of the execution's history.
//!
//! Points are tracked as an ordered sequence of entries. An entry is either
//! a placed operation or a tentative marker: an operation whose point is a
//! step whose role is only known once the operation responds (a take that
//! returns empty is placed at its last read of `Max`). Markers are resolved
//! against the final history.

use std::fmt;
use std::str::FromStr;

use rustc_hash::FxHashSet as HashSet;
use serde::{Deserialize, Serialize};

use crate::base::Action;
use crate::error::{Error, Result};
use crate::explore::{summary_allows, Explorer};
use crate::model::{ApplyCtx, EventKind, LinEntry, Linearization, OpId};
use crate::sched::{run, Schedule, ScheduleItem, StepRecord};
use crate::value::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PointRule {
    /// Each operation at its fetch&add step.
    FetchAddStep,
    /// Each operation at its first shared access. Wrong for most programs.
    FirstStep,
    /// Each operation at the access that obtains 0 from `M`.
    ObtainsZero,
    /// Puts at their `Items` write, successful takes at the test&set that
    /// returns 0, empty takes at their last read of `Max`.
    SetPoints,
    /// Reads at their `state` read; the winning test&set together with every
    /// test&set that already accessed `ts` at the first write to `state`;
    /// later test&sets at their `ts` access.
    ReadableTas,
}

impl PointRule {
    pub const ALL: [PointRule; 5] = [
        PointRule::FetchAddStep,
        PointRule::FirstStep,
        PointRule::ObtainsZero,
        PointRule::SetPoints,
        PointRule::ReadableTas,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PointRule::FetchAddStep => "fetchAddStep",
            PointRule::FirstStep => "firstStep",
            PointRule::ObtainsZero => "obtainsZero",
            PointRule::SetPoints => "setPoints",
            PointRule::ReadableTas => "readableTas",
        }
    }

    /// The rule used for a catalog program, if it has one.
    pub fn for_program(name: &str) -> Option<PointRule> {
        match name {
            "maxRegisterFA" | "snapshotFA" => Some(PointRule::FetchAddStep),
            "fetchIncFromTAS" => Some(PointRule::ObtainsZero),
            "setFromTAS" => Some(PointRule::SetPoints),
            "readableTAS" => Some(PointRule::ReadableTas),
            _ => None,
        }
    }

    /// Whether the rule only holds when the program's components are
    /// atomic objects. With nested readable test&sets a reader can see 0 in
    /// `state` after the winner's `ts` access.
    pub fn needs_atomic_components(self) -> bool {
        matches!(self, PointRule::ObtainsZero | PointRule::SetPoints)
    }

    /// Whether every point is fixed by the steps taken so far.
    pub fn prefix_determined(self) -> bool {
        !matches!(self, PointRule::SetPoints)
    }
}

impl fmt::Display for PointRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PointRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PointRule::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown point rule {s}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Entry {
    Op(u8),
    Marker(u8),
}

/// Points assigned along one execution prefix.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
struct RuleState {
    seq: Vec<Entry>,
    /// Test&sets that accessed `ts` before the first `state` write.
    waiting: u64,
    first_write_done: bool,
    winner: Option<u8>,
}

/// Invocation window of every operation, in terms of what has happened so far.
trait Window {
    fn invoked(&self, i: usize) -> bool;
    fn responded(&self, i: usize) -> bool;
}

#[derive(Clone, Copy)]
struct Masks {
    invoked: u64,
    responded: u64,
}

impl Window for Masks {
    fn invoked(&self, i: usize) -> bool {
        self.invoked >> i & 1 == 1
    }

    fn responded(&self, i: usize) -> bool {
        self.responded >> i & 1 == 1
    }
}

fn head(rec: &StepRecord) -> Option<&'static str> {
    rec.access.as_ref().and_then(|a| a.labels.first().copied())
}

fn result_is_zero(rec: &StepRecord) -> bool {
    rec.access.as_ref().is_some_and(|a| a.result == Value::Int(0))
}

impl RuleState {
    fn place(&mut self, i: usize, at: &dyn Window) -> Result<()> {
        // the step's own events are already in `at`, so the op's last step counts
        if !at.invoked(i) {
            return Err(Error::Rule(format!("operation #{i} placed before its invocation")));
        }
        if self.seq.contains(&Entry::Op(i as u8)) {
            return Err(Error::Rule(format!("operation #{i} placed twice")));
        }
        self.seq.retain(|e| *e != Entry::Marker(i as u8));
        self.seq.push(Entry::Op(i as u8));
        Ok(())
    }

    /// Applies one step by operation `i`. `before` reflects the history
    /// just before the step and `after` just after it.
    fn step(
        &mut self,
        rule: PointRule,
        i: usize,
        op: &str,
        rec: &StepRecord,
        before: &Masks,
        after: &Masks,
    ) -> Result<()> {
        let Some(access) = &rec.access else { return Ok(()) };
        match rule {
            PointRule::FetchAddStep => {
                if matches!(access.action, Action::FetchAdd(_)) {
                    self.place(i, after)?;
                }
            }
            PointRule::FirstStep => {
                if rec.op_steps == 1 {
                    self.place(i, after)?;
                }
            }
            PointRule::ObtainsZero => {
                if head(rec) == Some("M") && result_is_zero(rec) {
                    self.place(i, after)?;
                }
            }
            PointRule::SetPoints => match head(rec) {
                Some("Items") if matches!(access.action, Action::Write(_)) => self.place(i, after)?,
                Some("TS") if result_is_zero(rec) => self.place(i, after)?,
                Some("Max") if op == "take" => {
                    self.seq.retain(|e| *e != Entry::Marker(i as u8));
                    self.seq.push(Entry::Marker(i as u8));
                }
                _ => {}
            },
            PointRule::ReadableTas => match head(rec) {
                Some("state") if matches!(access.action, Action::Read) => self.place(i, after)?,
                Some("ts") => {
                    if result_is_zero(rec) {
                        self.winner = Some(i as u8);
                    }
                    if self.first_write_done {
                        self.place(i, after)?;
                    } else {
                        self.waiting |= 1 << i;
                    }
                }
                Some("state") if !self.first_write_done => {
                    self.first_write_done = true;
                    let Some(w) = self.winner else {
                        return Err(Error::Rule("state written before any test&set obtained 0".into()));
                    };
                    // the winner sits inside its window even if `e` belongs to another op
                    if before.responded(w as usize) {
                        return Err(Error::Rule(format!("winner #{w} responded before the first state write")));
                    }
                    self.place(w as usize, after)?;
                    for j in 0..64 {
                        if self.waiting >> j & 1 == 1 && j != w as usize {
                            if before.responded(j) {
                                return Err(Error::Rule(format!("operation #{j} responded before its point")));
                            }
                            self.place(j, after)?;
                        }
                    }
                    self.waiting = 0;
                }
                _ => {}
            },
        }
        Ok(())
    }

    /// Final order: markers of operations that returned empty become
    /// points, other markers are dropped.
    fn resolve(&self, response: &dyn Fn(usize) -> Option<Value>) -> Vec<usize> {
        self.seq
            .iter()
            .filter_map(|e| match *e {
                Entry::Op(i) => Some(i as usize),
                Entry::Marker(i) if response(i as usize) == Some(Value::Empty) => Some(i as usize),
                Entry::Marker(_) => None,
            })
            .collect()
    }
}

/// Replays `schedule` and checks the rule's linearization against the
/// resulting history.
pub fn step_point_check(ex: &Explorer, schedule: &Schedule, rule: PointRule) -> Result<bool> {
    let trace = run(&ex.sim, schedule)?;
    let mut cfg = ex.sim.initial();
    let mut choices = crate::base::ScriptedChoices::new(schedule.choices.clone());
    let mut st = RuleState::default();
    let mut masks = Masks { invoked: 0, responded: 0 };
    for item in &schedule.items {
        match *item {
            ScheduleItem::Step(p) => {
                let rec = ex.sim.step(&mut cfg, p, &mut choices)?;
                let before = masks;
                for e in &rec.events {
                    let bit = 1u64 << ex.op_index(e.op);
                    match e.kind {
                        EventKind::Invoke => masks.invoked |= bit,
                        EventKind::Respond => masks.responded |= bit,
                    }
                }
                let i = ex.op_index(rec.op);
                st.step(rule, i, &ex.invocations[i].name, &rec, &before, &masks)?;
            }
            ScheduleItem::Crash { crash } => ex.sim.crash(&mut cfg, crash),
        }
    }
    let ops = trace.history.operations()?;
    let response = |i: usize| ops.iter().find(|o| o.id == ex.ops[i]).and_then(|o| o.response.clone());
    let order = st.resolve(&response);
    // pending operations take the response the specification gives them
    let spec = ex.sim.program.spec.as_ref();
    let pairs = trace.history.overlapping_pairs()?;
    let overlaps = |a: OpId, b: OpId| pairs.contains(&(a.min(b), a.max(b)));
    let mut state = spec.initial_state();
    let mut entries = Vec::new();
    for i in order {
        let inv = &ex.invocations[i];
        let cx = ApplyCtx { op: Some(ex.ops[i]), overlaps: Some(&overlaps) };
        let outcomes = spec.apply_all(&state, inv, &cx);
        let actual = response(i);
        let Some((next, resp)) = outcomes.into_iter().find(|(_, r)| actual.as_ref().is_none_or(|a| a == r)) else {
            return Ok(false);
        };
        state = next;
        entries.push(LinEntry { op: ex.ops[i], name: inv.name.clone(), arg: inv.arg.clone(), response: resp });
    }
    Ok(crate::model::is_linearization_of(&trace.history, &Linearization { entries }, spec))
}

/// Outcome of checking a rule on every execution of a tree.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PointReport {
    pub rule: PointRule,
    pub leaves: usize,
    pub states: usize,
    /// Schedule of the first execution whose points fail, if any.
    pub counterexample: Option<Schedule>,
}

impl PointReport {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// Checks the rule on every maximal execution of the tree. Executions that
/// reach the same node with the same points are checked once.
type Frame = (u32, RuleState, Option<(u32, u32)>, usize);

pub fn check_all_traces(ex: &mut Explorer, rule: PointRule) -> Result<PointReport> {
    let spec = ex.sim.program.spec.clone();
    let mut seen: HashSet<(u32, RuleState)> = HashSet::default();
    let mut leaves = 0;
    // depth-first with explicit path so a failing execution can be reported
    let mut stack: Vec<Frame> = vec![(0, RuleState::default(), None, 0)];
    let mut path: Vec<(u32, u32)> = Vec::new();
    while let Some((v, st, via, depth)) = stack.pop() {
        path.truncate(depth.saturating_sub(1));
        if let Some(e) = via {
            path.push(e);
        }
        if !seen.insert((v, st.clone())) {
            continue;
        }
        ex.expand(v)?;
        let hist = ex.hist(v).clone();
        if ex.is_leaf(v) {
            leaves += 1;
            let response = |i: usize| hist.responses[i].clone();
            let order: Vec<(usize, Option<Value>)> = st.resolve(&response).into_iter().map(|i| (i, None)).collect();
            if !summary_allows(ex, v, &order, spec.as_ref()) {
                let mut s = Schedule::default();
                for &(u, e) in &path {
                    let edge = &ex.edges(u)[e as usize];
                    s.items.push(edge.item);
                    s.choices.extend(edge.choices.iter().copied());
                }
                return Ok(PointReport { rule, leaves, states: seen.len(), counterexample: Some(s) });
            }
            continue;
        }
        let before = Masks { invoked: hist.invoked(), responded: hist.completed() };
        for e in (0..ex.edges(v).len()).rev() {
            let child = ex.edges(v)[e].child;
            let mut next = st.clone();
            if let Some(rec) = ex.record(v, e)? {
                let h = ex.hist(child);
                let after = Masks { invoked: h.invoked(), responded: h.completed() };
                let i = ex.op_index(rec.op);
                next.step(rule, i, &ex.invocations[i].name, &rec, &before, &after)?;
            }
            stack.push((child, next, Some((v, e as u32)), depth + 1));
        }
    }
    Ok(PointReport { rule, leaves, states: seen.len(), counterexample: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algo::Mutation;
    use crate::catalog::{build, BuildOptions, Composition};
    use crate::sched::{enumerate_schedules, Bounds, Sim, Workload};

    fn explorer(name: &str, w: &str, composition: Composition, mutation: Option<Mutation>) -> Explorer {
        let w = Workload::parse(w).unwrap();
        let opts = BuildOptions { composition, mutation, ..BuildOptions::new(w.n()) };
        let sim = Sim::new(build(name, &opts).unwrap(), w).unwrap();
        Explorer::new(sim, Bounds { max_steps: 60, crash_budget: 1 }, 1_000_000).unwrap()
    }

    #[test]
    fn fetch_add_points_hold_for_the_max_register() {
        let mut ex = explorer("maxRegisterFA", "WriteMax(2),ReadMax;WriteMax(1);ReadMax", Composition::Nested, None);
        let r = check_all_traces(&mut ex, PointRule::FetchAddStep).unwrap();
        assert!(r.passed());
        assert!(r.leaves > 0);
    }

    #[test]
    fn obtains_zero_holds_for_fetch_and_increment() {
        let w = "fetchAndIncrement,read;fetchAndIncrement;read";
        let mut ex = explorer("fetchIncFromTAS", w, Composition::Atomic, None);
        assert!(check_all_traces(&mut ex, PointRule::ObtainsZero).unwrap().passed());
    }

    #[test]
    fn trace_mode_agrees_with_the_tree_walk() {
        let mut ex = explorer("setFromTAS", "put(1);take;put(2)", Composition::Atomic, None);
        assert!(check_all_traces(&mut ex, PointRule::SetPoints).unwrap().passed());
        let bounds = ex.bounds;
        let schedules: Vec<_> = enumerate_schedules(&ex.sim, bounds).take(2000).map(|s| s.unwrap()).collect();
        assert!(schedules.len() > 100);
        for s in &schedules {
            assert!(step_point_check(&ex, s, PointRule::SetPoints).unwrap(), "{s:?}");
        }
    }

    #[test]
    fn first_step_rule_fails_for_readable_test_and_set() {
        let mut ex = explorer("readableTAS", "testAndSet;testAndSet;read", Composition::Nested, None);
        assert!(check_all_traces(&mut ex, PointRule::ReadableTas).unwrap().passed());
        let r = check_all_traces(&mut ex, PointRule::FirstStep).unwrap();
        let bad = r.counterexample.expect("first-step points are not a linearization");
        assert!(!step_point_check(&ex, &bad, PointRule::FirstStep).unwrap());
        assert!(step_point_check(&ex, &bad, PointRule::ReadableTas).unwrap());
    }

    #[test]
    fn a_point_before_the_winner_exists_is_a_rule_error() {
        let mut ex = explorer("readableTAS", "testAndSet;read", Composition::Nested, Some(Mutation::SwapTsState));
        assert!(matches!(check_all_traces(&mut ex, PointRule::ReadableTas), Err(Error::Rule(_))));
    }

    #[test]
    fn rule_names_round_trip() {
        for r in PointRule::ALL {
            assert_eq!(r.name().parse::<PointRule>().unwrap(), r);
        }
        assert!("nope".parse::<PointRule>().is_err());
    }
}
