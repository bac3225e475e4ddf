//! Linearizability of a single history.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::model::{ApplyCtx, History, LinEntry, Linearization, OpId, OpRecord, SequentialSpec};
use crate::value::Value;

/// Default cap on the number of operations in one history.
pub const DEFAULT_MAX_OPS: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LinVerdict {
    Yes(Linearization),
    /// Length in events of the shortest non-linearizable prefix.
    No {
        prefix: usize,
    },
}

impl LinVerdict {
    pub fn is_yes(&self) -> bool {
        matches!(self, LinVerdict::Yes(_))
    }
}

struct Search<'a> {
    ops: Vec<OpRecord>,
    spec: &'a dyn SequentialSpec,
    /// `before[y]`: ops that respond before `y` is invoked.
    before: Vec<u64>,
    complete: u64,
    overlaps: HashSet<(OpId, OpId)>,
    failed: HashSet<(u64, Value)>,
}

impl Search<'_> {
    fn dfs(&mut self, mask: u64, state: &Value, out: &mut Vec<LinEntry>) -> bool {
        if mask & self.complete == self.complete {
            return true;
        }
        if self.failed.contains(&(mask, state.clone())) {
            return false;
        }
        for y in 0..self.ops.len() {
            let bit = 1u64 << y;
            if mask & bit != 0 || self.before[y] & !mask != 0 {
                continue;
            }
            let rec = &self.ops[y];
            let overlaps = &self.overlaps;
            let f = |a: OpId, b: OpId| overlaps.contains(&(a.min(b), a.max(b)));
            let cx = ApplyCtx { op: Some(rec.id), overlaps: Some(&f) };
            let mut tried = HashSet::new();
            let candidates: Vec<(Value, LinEntry)> = self
                .spec
                .apply_all(state, &rec.invocation, &cx)
                .into_iter()
                .filter(|(next, resp)| {
                    rec.response.as_ref().is_none_or(|r| r == resp) && tried.insert((next.clone(), resp.clone()))
                })
                .map(|(next, response)| {
                    let entry = LinEntry {
                        op: rec.id,
                        name: rec.invocation.name.clone(),
                        arg: rec.invocation.arg.clone(),
                        response,
                    };
                    (next, entry)
                })
                .collect();
            for (next, entry) in candidates {
                out.push(entry);
                if self.dfs(mask | bit, &next, out) {
                    return true;
                }
                out.pop();
            }
        }
        self.failed.insert((mask, state.clone()));
        false
    }
}

fn search(h: &History, spec: &dyn SequentialSpec, max_ops: usize) -> Result<Option<Linearization>> {
    let ops = h.operations()?;
    if ops.len() > max_ops.min(64) {
        return Err(Error::Capacity {
            what: format!("history has {} operations, limit {max_ops}", ops.len()),
            frontier: ops.len(),
        });
    }
    let mut before = vec![0u64; ops.len()];
    let mut complete = 0u64;
    for (x, a) in ops.iter().enumerate() {
        if let Some(r) = a.respond_at {
            complete |= 1 << x;
            for (y, b) in ops.iter().enumerate() {
                if r < b.invoke_at {
                    before[y] |= 1 << x;
                }
            }
        }
    }
    let overlaps = h.overlapping_pairs()?.into_iter().collect();
    let mut s = Search { ops, spec, before, complete, overlaps, failed: HashSet::new() };
    let mut out = Vec::new();
    Ok(s.dfs(0, &spec.initial_state(), &mut out).then_some(Linearization { entries: out }))
}

/// Decides linearizability; memoizes on (linearized set, spec state).
pub fn check_linearizable(h: &History, spec: &dyn SequentialSpec, max_ops: usize) -> Result<LinVerdict> {
    let violations = h.validate();
    if let Some(v) = violations.first() {
        return Err(crate::error::ModelError::IllFormed { index: v.index, reason: v.reason.clone() }.into());
    }
    if let Some(lin) = search(h, spec, max_ops)? {
        return Ok(LinVerdict::Yes(lin));
    }
    // linearizability is prefix-closed, so the first failing prefix is minimal
    for len in 1..=h.len() {
        if search(&h.prefix(len), spec, max_ops)?.is_none() {
            return Ok(LinVerdict::No { prefix: len });
        }
    }
    Ok(LinVerdict::No { prefix: h.len() })
}

/// Every valid linearization of `h`, by exhaustive enumeration of ordered
/// subsets of operations. Pending operations take any allowed response.
pub fn all_linearizations(h: &History, spec: &dyn SequentialSpec) -> Result<Vec<Linearization>> {
    let ops = h.operations()?;
    let overlaps: HashSet<(OpId, OpId)> = h.overlapping_pairs()?.into_iter().collect();
    let f = |a: OpId, b: OpId| overlaps.contains(&(a.min(b), a.max(b)));
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut used = vec![false; ops.len()];
    let mut cur: Vec<LinEntry> = Vec::new();
    #[allow(clippy::too_many_arguments)]
    fn rec(
        ops: &[OpRecord],
        spec: &dyn SequentialSpec,
        f: &dyn Fn(OpId, OpId) -> bool,
        state: &Value,
        used: &mut Vec<bool>,
        cur: &mut Vec<LinEntry>,
        seen: &mut HashSet<Vec<LinEntry>>,
        out: &mut Vec<Linearization>,
    ) {
        let done = ops.iter().zip(used.iter()).all(|(o, &u)| u || !o.is_complete());
        if done {
            let lin = Linearization { entries: cur.clone() };
            if seen.insert(cur.clone()) {
                out.push(lin);
            }
        }
        for (y, rec_y) in ops.iter().enumerate() {
            if used[y] {
                continue;
            }
            // every op responding before y's invocation must already be placed
            let blocked =
                ops.iter().enumerate().any(|(x, a)| !used[x] && a.respond_at.is_some_and(|r| r < rec_y.invoke_at));
            if blocked {
                continue;
            }
            let cx = ApplyCtx { op: Some(rec_y.id), overlaps: Some(f) };
            for (next, resp) in spec.apply_all(state, &rec_y.invocation, &cx) {
                if rec_y.response.as_ref().is_some_and(|r| *r != resp) {
                    continue;
                }
                used[y] = true;
                cur.push(LinEntry {
                    op: rec_y.id,
                    name: rec_y.invocation.name.clone(),
                    arg: rec_y.invocation.arg.clone(),
                    response: resp,
                });
                rec(ops, spec, f, &next, used, cur, seen, out);
                cur.pop();
                used[y] = false;
            }
        }
    }
    rec(&ops, spec, &f, &spec.initial_state(), &mut used, &mut cur, &mut seen, &mut out);
    Ok(out)
}

/// Factorial brute force: tries every ordering of every admissible subset
/// and asks [`crate::model::is_linearization_of`].
pub fn brute_force_linearizable(h: &History, spec: &dyn SequentialSpec) -> Result<bool> {
    let ops = h.operations()?;
    let pending: Vec<usize> = (0..ops.len()).filter(|&i| !ops[i].is_complete()).collect();
    for subset in 0..(1u64 << pending.len()) {
        let mut chosen: Vec<usize> = (0..ops.len()).filter(|&i| ops[i].is_complete()).collect();
        for (k, &i) in pending.iter().enumerate() {
            if subset >> k & 1 == 1 {
                chosen.push(i);
            }
        }
        let mut perm = chosen.clone();
        perm.sort();
        loop {
            if order_has_responses(&ops, &perm, spec, h) {
                return Ok(true);
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
    }
    Ok(false)
}

/// Tries every response the spec offers the pending operations in
/// `order`, then asks the reference check.
fn order_has_responses(ops: &[OpRecord], order: &[usize], spec: &dyn SequentialSpec, h: &History) -> bool {
    fn rec(
        ops: &[OpRecord],
        order: &[usize],
        spec: &dyn SequentialSpec,
        h: &History,
        state: &Value,
        entries: &mut Vec<LinEntry>,
    ) -> bool {
        let Some((&i, rest)) = order.split_first() else {
            return crate::model::is_linearization_of(h, &Linearization { entries: entries.clone() }, spec);
        };
        let o = &ops[i];
        let overlaps: HashSet<(OpId, OpId)> = h.overlapping_pairs().unwrap_or_default().into_iter().collect();
        let f = |a: OpId, b: OpId| overlaps.contains(&(a.min(b), a.max(b)));
        let cx = ApplyCtx { op: Some(o.id), overlaps: Some(&f) };
        let responses: Vec<(Value, Value)> = spec
            .apply_all(state, &o.invocation, &cx)
            .into_iter()
            .filter(|x| o.response.as_ref().is_none_or(|r| *r == x.1))
            .collect();
        for (next, response) in responses {
            entries.push(LinEntry {
                op: o.id,
                name: o.invocation.name.clone(),
                arg: o.invocation.arg.clone(),
                response,
            });
            let ok = rec(ops, rest, spec, h, &next, entries);
            entries.pop();
            if ok {
                return true;
            }
        }
        false
    }
    rec(ops, order, spec, h, &spec.initial_state(), &mut Vec::new())
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Event, Op};
    use crate::specs::{CounterSpec, RegisterSpec};

    fn inv(p: usize, s: usize, op: &str) -> Event {
        Event::invoke(OpId::new(p, s), &Op::parse(op).unwrap())
    }

    fn resp(p: usize, s: usize, name: &str, v: Value) -> Event {
        Event::respond(OpId::new(p, s), name, v)
    }

    #[test]
    fn register_examples() {
        let spec = RegisterSpec::new(0);
        let h = History::new(vec![
            inv(0, 0, "write(1)"),
            resp(0, 0, "write", Value::Ok),
            inv(0, 1, "read"),
            resp(0, 1, "read", 1.into()),
        ]);
        assert!(check_linearizable(&h, &spec, 8).unwrap().is_yes());
        let h = History::new(vec![
            inv(0, 0, "write(2)"),
            resp(0, 0, "write", Value::Ok),
            inv(1, 0, "read"),
            resp(1, 0, "read", 1.into()),
        ]);
        assert_eq!(check_linearizable(&h, &spec, 8).unwrap(), LinVerdict::No { prefix: 4 });
    }

    #[test]
    fn collect_counter_history_is_linearizable() {
        // the read sees slot 0 before p0's inc and slot 1 after p1's first inc
        let h = History::new(vec![
            inv(2, 0, "read"),
            inv(0, 0, "inc"),
            resp(0, 0, "inc", Value::Ok),
            inv(1, 0, "inc"),
            resp(1, 0, "inc", Value::Ok),
            inv(1, 1, "inc"),
            resp(1, 1, "inc", Value::Ok),
            resp(2, 0, "read", 1.into()),
        ]);
        assert!(check_linearizable(&h, &CounterSpec, 8).unwrap().is_yes());
        assert!(brute_force_linearizable(&h, &CounterSpec).unwrap());
    }

    #[test]
    fn capacity_is_explicit() {
        let events: Vec<Event> = (0..9).flat_map(|p| [inv(p, 0, "inc"), resp(p, 0, "inc", Value::Ok)]).collect();
        let h = History::new(events);
        assert!(matches!(check_linearizable(&h, &CounterSpec, 8), Err(Error::Capacity { .. })));
    }

    #[test]
    fn pending_ops_may_take_effect() {
        let spec = RegisterSpec::new(0);
        let h = History::new(vec![inv(0, 0, "write(1)"), inv(1, 0, "read"), resp(1, 0, "read", 1.into())]);
        let LinVerdict::Yes(lin) = check_linearizable(&h, &spec, 8).unwrap() else { panic!() };
        assert_eq!(lin.entries.len(), 2);
        assert_eq!(all_linearizations(&h, &spec).unwrap().len(), 1);
    }
}
