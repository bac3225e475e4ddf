//! Bounded progress checks.
//!
//! Wait-free programs publish a per-operation step budget; every operation
//! in every execution must finish within it. Lock-free programs must
//! complete some operation in every crash-free maximal execution, and the
//! longest run of steps with no completion is reported.

use serde::Serialize;

use crate::algo::Progress;
use crate::error::Result;
use crate::explore::Explorer;
use crate::sched::{Schedule, ScheduleItem};

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BudgetViolation {
    pub schedule: Schedule,
    pub process: usize,
    pub op: String,
    pub steps: usize,
    pub budget: usize,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LivenessReport {
    pub progress: Progress,
    /// Most steps any single operation takes, counting the step that completes it.
    pub max_op_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation: Option<BudgetViolation>,
    /// Longest crash-free run of steps in which no operation completes.
    pub max_gap: usize,
    /// A crash-free maximal schedule in which nothing completes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stalled: Option<Schedule>,
    /// Leaves cut off by the step bound.
    pub truncated: usize,
}

impl LivenessReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none() && self.stalled.is_none() && self.truncated == 0
    }
}

fn steps_taken(ex: &Explorer, v: u32) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
    (0..ex.sim.n()).filter_map(move |p| {
        let r = ex.proc_state(v, p).running.as_ref()?;
        Some((p, r.seq, r.steps))
    })
}

pub fn check_liveness(ex: &mut Explorer) -> Result<LivenessReport> {
    let progress = ex.sim.program.progress;
    // an operation never seen between steps finished in its first one
    let mut max_op_steps = usize::from(!ex.ops.is_empty());
    let mut violation = None;
    let mut truncated = 0;

    // a crashed process just stops, so crash-free nodes already show every
    // configuration of the others; a budget is exceeded only by an
    // operation still running with `budget` steps behind it
    let all = ex.crash_free_nodes()?;
    for &v in &all {
        for (p, seq, steps) in steps_taken(ex, v) {
            max_op_steps = max_op_steps.max(steps + 1);
            let op = &ex.sim.workload.procs[p][seq];
            if let (Progress::WaitFree, Some(budget)) = (progress, ex.sim.program.budget(op)) {
                if steps >= budget && violation.is_none() {
                    violation = Some(BudgetViolation {
                        schedule: ex.path_to(v),
                        process: p,
                        op: op.to_string(),
                        steps: steps + 1,
                        budget,
                    });
                }
            }
        }
        if ex.is_leaf(v) && ex.is_truncated(v) {
            truncated += 1;
        }
    }
    // completions are the steps that add a response
    let mut gap = vec![0usize; ex.len()];
    let mut done_somewhere = vec![false; ex.len()];
    for &v in all.iter().rev() {
        let before = ex.hist(v).completed();
        let mut g = 0;
        let mut all_complete = true;
        let mut any_edge = false;
        for e in ex.edges(v) {
            if !matches!(e.item, ScheduleItem::Step(_)) {
                continue;
            }
            any_edge = true;
            let completes = ex.hist(e.child).completed() != before;
            if !completes {
                g = g.max(1 + gap[e.child as usize]);
            }
            all_complete &= completes || done_somewhere[e.child as usize];
        }
        gap[v as usize] = g;
        // a leaf other than the root ends an execution with nothing done
        done_somewhere[v as usize] = any_edge && all_complete;
    }
    let total_ops = ex.ops.len();
    let stalled = if total_ops > 0 && !done_somewhere[0] {
        // walk to a leaf avoiding completions
        let mut v = 0u32;
        let mut s = Schedule::default();
        loop {
            let before = ex.hist(v).completed();
            let next = ex.edges(v).iter().find(|e| {
                matches!(e.item, ScheduleItem::Step(_))
                    && ex.hist(e.child).completed() == before
                    && !done_somewhere[e.child as usize]
            });
            match next {
                Some(e) => {
                    s.items.push(e.item);
                    s.choices.extend(e.choices.iter().copied());
                    v = e.child;
                }
                None => break,
            }
        }
        Some(s)
    } else {
        None
    };
    Ok(LivenessReport { progress, max_op_steps, violation, max_gap: gap[0], stalled, truncated })
}
