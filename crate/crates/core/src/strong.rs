//! Strong linearizability of a bounded execution tree.
//!
//! `feasible(v, σ)` asks whether the subtree below node `v` admits a
//! prefix-closed linearization function that maps `v` to `σ`. It holds iff
//! every child admits some extension of `σ` that is itself feasible; the
//! tree is strongly linearizable iff `feasible(root, ε)`.

use std::collections::{BTreeSet, VecDeque};
use std::time::Instant;

use rustc_hash::{FxHashMap as HashMap, FxHashSet as HashSet};
use serde::Serialize;

use crate::error::Result;
use crate::explore::{Explorer, HistSummary};
use crate::lin::all_linearizations;
use crate::model::{ApplyCtx, LinEntry, Linearization, SequentialSpec};
use crate::sched::{run, Schedule, ScheduleItem};
use crate::value::Value;

/// Abstract linearization: which operations are in, the resulting spec
/// state, and the responses promised to pending operations in it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Sigma {
    mask: u64,
    state: Value,
    commits: Vec<(u8, Value)>,
}

/// One way to extend a linearization at a child node.
#[derive(Clone, Debug)]
struct Ext {
    to: u32,
    appended: Vec<(u8, Value)>,
}

/// Entries reported in a positive verdict's assignment.
pub const ASSIGNMENT_CAP: usize = 4096;

/// Extension lists kept before the cache is flushed.
const EXT_CACHE_CAP: usize = 1 << 18;

pub struct StrongChecker<'a> {
    pub ex: &'a mut Explorer,
    spec: &'a dyn SequentialSpec,
    sigmas: Vec<Sigma>,
    sigma_ix: HashMap<Sigma, u32>,
    memo: HashMap<(u32, u32), bool>,
    /// Skip crash edges; see `steps_from`.
    pub crash_dominance: bool,
    /// Keyed by linearization and history summary id.
    exts: HashMap<(u32, u32), Vec<Ext>>,
}

/// A node together with paths below it that no single linearization of
/// the node can serve at once.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Witness {
    /// Schedule reaching the node.
    pub node: Schedule,
    /// Full schedules of the conflicting executions, each extending `node`.
    pub extensions: Vec<Schedule>,
    /// Linearizations of the node compatible with each extension.
    pub compatible: Vec<Vec<String>>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AssignmentEntry {
    pub node: u32,
    pub parent: Option<u32>,
    pub linearization: Vec<(usize, Value)>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "verdict", rename_all = "camelCase")]
pub enum StrongVerdict {
    /// The linearization chosen along each discovery-tree edge.
    Yes {
        assignment: Vec<AssignmentEntry>,
    },
    No {
        witness: Option<Witness>,
    },
}

impl StrongVerdict {
    pub fn is_yes(&self) -> bool {
        matches!(self, StrongVerdict::Yes { .. })
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StrongReport {
    #[serde(flatten)]
    pub verdict: StrongVerdict,
    pub nodes_explored: usize,
    pub elapsed_ms: u128,
}

impl<'a> StrongChecker<'a> {
    pub fn new(ex: &'a mut Explorer, spec: &'a dyn SequentialSpec) -> Self {
        StrongChecker {
            ex,
            spec,
            sigmas: Vec::new(),
            sigma_ix: HashMap::default(),
            memo: HashMap::default(),
            crash_dominance: true,
            exts: HashMap::default(),
        }
    }

    fn intern(&mut self, s: Sigma) -> u32 {
        if let Some(&i) = self.sigma_ix.get(&s) {
            return i;
        }
        let i = self.sigmas.len() as u32;
        self.sigmas.push(s.clone());
        self.sigma_ix.insert(s, i);
        i
    }

    fn empty(&mut self) -> u32 {
        let s = Sigma { mask: 0, state: self.spec.initial_state(), commits: Vec::new() };
        self.intern(s)
    }

    /// Drops promises kept by responses at `hist`; `None` if one is broken.
    fn settle(s: &Sigma, hist: &HistSummary) -> Option<Sigma> {
        let mut out = s.clone();
        out.commits.clear();
        for (i, r) in &s.commits {
            match &hist.responses[*i as usize] {
                Some(actual) if actual != r => return None,
                Some(_) => {}
                None => out.commits.push((*i, r.clone())),
            }
        }
        Some(out)
    }

    /// All linearizations valid at `c` that extend `s`, shortest first.
    fn extensions(&mut self, s: u32, c: u32) -> Vec<Ext> {
        let h = self.ex.hist_id(c);
        if let Some(e) = self.exts.get(&(s, h)) {
            return e.clone();
        }
        let hist = self.ex.hist(c).clone();
        let mut out = Vec::new();
        if let Some(base) = Self::settle(&self.sigmas[s as usize], &hist) {
            let completed = hist.completed();
            let invoked = hist.invoked();
            let overlaps =
                |a: crate::model::OpId, b: crate::model::OpId| hist.overlap(self.ex.op_index(a), self.ex.op_index(b));
            let mut seen: HashSet<Sigma> = std::iter::once(base.clone()).collect();
            let mut queue: VecDeque<(Sigma, Vec<(u8, Value)>)> = VecDeque::from([(base, Vec::new())]);
            let mut found: Vec<(Sigma, Vec<(u8, Value)>)> = Vec::new();
            while let Some((cur, appended)) = queue.pop_front() {
                if completed & !cur.mask == 0 {
                    found.push((cur.clone(), appended.clone()));
                }
                for y in 0..self.ex.ops.len() {
                    let bit = 1u64 << y;
                    if cur.mask & bit != 0 || invoked & bit == 0 {
                        continue;
                    }
                    let after = hist.invoked_after[y].unwrap_or(0);
                    if after & !cur.mask != 0 {
                        continue;
                    }
                    let cx = ApplyCtx { op: Some(self.ex.ops[y]), overlaps: Some(&overlaps) };
                    for (state, resp) in self.spec.apply_all(&cur.state, &self.ex.invocations[y], &cx) {
                        let mut commits = cur.commits.clone();
                        match &hist.responses[y] {
                            Some(actual) if *actual != resp => continue,
                            Some(_) => {}
                            None => {
                                commits.push((y as u8, resp.clone()));
                                commits.sort();
                            }
                        }
                        let next = Sigma { mask: cur.mask | bit, state, commits };
                        if seen.insert(next.clone()) {
                            let mut app = appended.clone();
                            app.push((y as u8, resp));
                            queue.push_back((next, app));
                        }
                    }
                }
            }
            for (sig, appended) in found {
                let to = self.intern(sig);
                out.push(Ext { to, appended });
            }
        }
        if self.exts.len() >= EXT_CACHE_CAP {
            self.exts.clear();
        }
        self.exts.insert((s, h), out.clone());
        out
    }

    fn feasible(&mut self, v: u32, s: u32) -> Result<bool> {
        if let Some(&b) = self.memo.get(&(v, s)) {
            return Ok(b);
        }
        self.ex.expand(v)?;
        let children: Vec<u32> = self.steps_from(v).map(|(_, c)| c).collect();
        let mut ok = true;
        for c in children {
            let mut any = false;
            for e in self.extensions(s, c) {
                if self.feasible(c, e.to)? {
                    any = true;
                    break;
                }
            }
            if !any {
                ok = false;
                break;
            }
        }
        self.memo.insert((v, s), ok);
        Ok(ok)
    }

    /// Edges the search must cover, as (edge index, child). A crash child
    /// has the parent's history and a subset of its futures, so whatever
    /// linearization serves the parent also serves it.
    fn steps_from(&self, v: u32) -> impl Iterator<Item = (u32, u32)> + '_ {
        let skip = self.crash_dominance;
        self.ex
            .edges(v)
            .iter()
            .enumerate()
            .filter(move |(_, e)| !(skip && matches!(e.item, ScheduleItem::Crash { .. })))
            .map(|(i, e)| (i as u32, e.child))
    }

    /// Decides strong linearizability of the whole tree.
    pub fn check(&mut self) -> Result<StrongReport> {
        let start = Instant::now();
        let root = self.empty();
        let verdict = if self.feasible(0, root)? {
            StrongVerdict::Yes { assignment: self.assignment(root)? }
        } else {
            StrongVerdict::No { witness: self.witness()? }
        };
        Ok(StrongReport { verdict, nodes_explored: self.ex.len(), elapsed_ms: start.elapsed().as_millis() })
    }

    /// Follows the first feasible extension along discovery-tree edges.
    fn assignment(&mut self, root: u32) -> Result<Vec<AssignmentEntry>> {
        let mut out = vec![AssignmentEntry { node: 0, parent: None, linearization: Vec::new() }];
        let mut stack = vec![(0u32, root, Vec::<(u8, Value)>::new())];
        let mut done: HashSet<u32> = std::iter::once(0).collect();
        while let Some((v, s, order)) = stack.pop() {
            let edges: Vec<(u32, u32)> = self.steps_from(v).collect();
            for (i, c) in edges {
                if out.len() >= ASSIGNMENT_CAP {
                    break;
                }
                if self.ex.nodes[c as usize].parent != Some((v, i)) || !done.insert(c) {
                    continue;
                }
                let mut chosen = None;
                for e in self.extensions(s, c) {
                    if self.feasible(c, e.to)? {
                        chosen = Some(e);
                        break;
                    }
                }
                let e = chosen.expect("feasible node has a feasible extension");
                let mut lin = order.clone();
                lin.extend(e.appended);
                out.push(AssignmentEntry {
                    node: c,
                    parent: Some(v),
                    linearization: lin.iter().map(|(i, r)| (*i as usize, r.clone())).collect(),
                });
                stack.push((c, e.to, lin));
            }
        }
        out.sort_by_key(|a| a.node);
        Ok(out)
    }

    /// Searches for a node and two (or, failing that, one) maximal paths
    /// below it whose sets of compatible node linearizations are disjoint.
    fn witness(&mut self) -> Result<Option<Witness>> {
        const FAMILY_CAP: usize = 64;
        let root = self.empty();
        self.ex.expand_all()?;
        let n = self.ex.len();
        // reachable linearizations per node
        let mut reach: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); n];
        reach[0].insert(root);
        let mut order: Vec<u32> = (0..n as u32).collect();
        // a node's depth equals its steps plus crashes on every path
        order.sort_by_key(|&v| self.ex.nodes[v as usize].depth);
        for &v in &order {
            let sigmas: Vec<u32> = reach[v as usize].iter().copied().collect();
            let children: Vec<u32> = self.ex.edges(v).iter().map(|e| e.child).collect();
            for c in children {
                for &s in &sigmas {
                    for e in self.extensions(s, c) {
                        reach[c as usize].insert(e.to);
                    }
                }
            }
        }
        // families of per-path compatible sets, with the path that made them
        #[derive(Clone)]
        struct Member {
            set: BTreeSet<u32>,
            via: Option<(u32, usize)>,
        }
        let mut fam: Vec<Vec<Member>> = vec![Vec::new(); n];
        for &v in order.iter().rev() {
            let edges: Vec<u32> = self.ex.edges(v).iter().map(|e| e.child).collect();
            if edges.is_empty() {
                fam[v as usize] = vec![Member { set: reach[v as usize].clone(), via: None }];
                continue;
            }
            let mut members: Vec<Member> = Vec::new();
            for (ei, &c) in edges.iter().enumerate() {
                for (mi, m) in fam[c as usize].iter().enumerate() {
                    let mut set = BTreeSet::new();
                    for &s in &reach[v as usize] {
                        if self.extensions(s, c).iter().any(|e| m.set.contains(&e.to)) {
                            set.insert(s);
                        }
                    }
                    if !members.iter().any(|x| x.set == set) && members.len() < FAMILY_CAP {
                        members.push(Member { set, via: Some((ei as u32, mi)) });
                    }
                }
            }
            fam[v as usize] = members;
        }
        let path_from = |fam: &Vec<Vec<Member>>, ex: &Explorer, mut v: u32, mut mi: usize| {
            let mut s = ex.path_to(v);
            while let Some((ei, next)) = fam[v as usize][mi].via {
                let edge = &ex.edges(v)[ei as usize];
                s.items.push(edge.item);
                s.choices.extend(edge.choices.iter().copied());
                v = edge.child;
                mi = next;
            }
            s
        };
        for &v in &order {
            let members = &fam[v as usize];
            let mut pick = None;
            'outer: for i in 0..members.len() {
                if members[i].set.is_empty() {
                    pick = Some(vec![i]);
                    break;
                }
                for j in i + 1..members.len() {
                    if members[i].set.is_disjoint(&members[j].set) {
                        pick = Some(vec![i, j]);
                        break 'outer;
                    }
                }
            }
            if let Some(pick) = pick {
                let node = self.ex.path_to(v);
                let extensions = pick.iter().map(|&i| path_from(&fam, self.ex, v, i)).collect();
                let compatible = pick
                    .iter()
                    .map(|&i| members[i].set.iter().map(|&s| describe(&self.sigmas[s as usize], self.ex)).collect())
                    .collect();
                return Ok(Some(Witness { node, extensions, compatible }));
            }
        }
        Ok(None)
    }
}

fn describe(s: &Sigma, ex: &Explorer) -> String {
    let names: Vec<String> = (0..ex.ops.len())
        .filter(|i| s.mask >> i & 1 == 1)
        .map(|i| format!("{}:{}", ex.ops[i], ex.invocations[i]))
        .collect();
    format!("{{{}}} -> {}", names.join(", "), s.state)
}

/// Decides strong linearizability of `ex`'s tree under `spec`.
pub fn check_strong(ex: &mut Explorer, spec: &dyn SequentialSpec) -> Result<StrongReport> {
    StrongChecker::new(ex, spec).check()
}

/// Chains of linearizations along one schedule, starting from each of
/// `starts` at position `from`: returns the starts that survive to the end.
fn surviving(
    ex: &Explorer,
    spec: &dyn SequentialSpec,
    schedule: &Schedule,
    from: usize,
    starts: &[Linearization],
) -> Result<Vec<bool>> {
    let mut alive: Vec<Vec<Linearization>> = starts.iter().map(|l| vec![l.clone()]).collect();
    for len in from + 1..=schedule.items.len() {
        let prefix = Schedule { items: schedule.items[..len].to_vec(), choices: schedule.choices.clone() };
        let h = run(&ex.sim, &prefix)?.history;
        let all = all_linearizations(&h, spec)?;
        for chains in alive.iter_mut() {
            let next: Vec<Linearization> =
                all.iter().filter(|l| chains.iter().any(|c| c.is_prefix_of(l))).cloned().collect();
            *chains = next;
        }
    }
    Ok(alive.iter().map(|c| !c.is_empty()).collect())
}

/// Independent check of a witness: enumerates every linearization of every
/// prefix history along the witness paths and confirms that no
/// prefix-closed choice serves all of them.
pub fn revalidate_witness(ex: &Explorer, spec: &dyn SequentialSpec, w: &Witness) -> Result<bool> {
    let k = w.node.items.len();
    for e in &w.extensions {
        if e.items.len() < k || e.items[..k] != w.node.items[..] {
            return Ok(false);
        }
    }
    // linearizations of the node reachable by a chain from the root
    let mut chain: Vec<Linearization> = vec![Linearization::default()];
    for len in 1..=k {
        let prefix = Schedule { items: w.node.items[..len].to_vec(), choices: w.node.choices.clone() };
        let h = run(&ex.sim, &prefix)?.history;
        chain = all_linearizations(&h, spec)?.into_iter().filter(|l| chain.iter().any(|c| c.is_prefix_of(l))).collect();
    }
    if k == 0 {
        chain = vec![Linearization::default()];
    }
    let mut served = vec![true; chain.len()];
    for e in &w.extensions {
        let alive = surviving(ex, spec, e, k, &chain)?;
        for (s, a) in served.iter_mut().zip(alive) {
            *s &= a;
        }
    }
    Ok(!served.iter().any(|&s| s))
}

/// Re-checks a yes verdict's assignment against concrete histories: the
/// root maps to the empty sequence, children extend parents, and each
/// entry is a linearization of its node's history.
pub fn revalidate_assignment(ex: &Explorer, spec: &dyn SequentialSpec, assignment: &[AssignmentEntry]) -> Result<bool> {
    let by_node: HashMap<u32, &AssignmentEntry> = assignment.iter().map(|a| (a.node, a)).collect();
    for a in assignment {
        match a.parent {
            None if !a.linearization.is_empty() => return Ok(false),
            None => {}
            Some(p) => {
                let Some(pa) = by_node.get(&p) else { return Ok(false) };
                if !a.linearization.starts_with(&pa.linearization) {
                    return Ok(false);
                }
            }
        }
        let h = ex.history_of(a.node)?;
        let entries = a
            .linearization
            .iter()
            .map(|(i, r)| {
                let op = ex.ops[*i];
                let inv = &ex.invocations[*i];
                LinEntry { op, name: inv.name.clone(), arg: inv.arg.clone(), response: r.clone() }
            })
            .collect();
        if !crate::model::is_linearization_of(&h, &Linearization { entries }, spec) {
            return Ok(false);
        }
    }
    Ok(true)
}
