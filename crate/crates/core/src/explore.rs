//! The bounded execution tree, stored as a DAG of distinct nodes.
//!
//! Two schedule prefixes share a node when they reach the same
//! configuration with the same abstract history: the same responses and
//! the same real-time order between operations. Every question the
//! checkers ask depends on nothing else.

use std::sync::Arc;

use rustc_hash::{FxHashMap as HashMap, FxHashSet as HashSet};

use crate::base::{ObjectTable, ScriptedChoices};
use crate::error::{Error, Result};
use crate::model::{ApplyCtx, EventKind, History, Op, OpId, SequentialSpec};
use crate::sched::{run, Bounds, Config, ProcState, Schedule, ScheduleItem, Sim, StepRecord};
use crate::value::Value;

/// Default cap on distinct nodes per tree.
pub const DEFAULT_NODE_LIMIT: usize = 2_000_000;

/// History up to real-time order and responses.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HistSummary {
    /// For invoked operations, the set of operations complete at the
    /// moment of invocation.
    pub invoked_after: Vec<Option<u64>>,
    pub responses: Vec<Option<Value>>,
}

impl HistSummary {
    pub fn new(ops: usize) -> Self {
        HistSummary { invoked_after: vec![None; ops], responses: vec![None; ops] }
    }

    pub fn completed(&self) -> u64 {
        self.responses.iter().enumerate().filter(|(_, r)| r.is_some()).fold(0, |m, (i, _)| m | 1 << i)
    }

    pub fn invoked(&self) -> u64 {
        self.invoked_after.iter().enumerate().filter(|(_, r)| r.is_some()).fold(0, |m, (i, _)| m | 1 << i)
    }

    pub fn is_complete(&self, i: usize) -> bool {
        self.responses[i].is_some()
    }

    /// Neither operation responded before the other was invoked.
    pub fn overlap(&self, a: usize, b: usize) -> bool {
        match (self.invoked_after[a], self.invoked_after[b]) {
            (Some(ia), Some(ib)) => ia >> b & 1 == 0 && ib >> a & 1 == 0,
            _ => false,
        }
    }

    fn apply(&mut self, index: &dyn Fn(OpId) -> usize, rec: &StepRecord) {
        for e in &rec.events {
            let i = index(e.op);
            match e.kind {
                EventKind::Invoke => self.invoked_after[i] = Some(self.completed()),
                EventKind::Respond => self.responses[i] = Some(e.payload.clone()),
            }
        }
    }
}

/// Interning table giving equal values equal ids.
#[derive(Debug)]
struct Pool<T> {
    items: Vec<Arc<T>>,
    index: HashMap<Arc<T>, u32>,
}

impl<T: Eq + std::hash::Hash> Pool<T> {
    fn new() -> Self {
        Pool { items: Vec::new(), index: HashMap::default() }
    }

    fn intern(&mut self, t: T) -> u32 {
        if let Some(&i) = self.index.get(&t) {
            return i;
        }
        let i = self.items.len() as u32;
        let t = Arc::new(t);
        self.items.push(t.clone());
        self.index.insert(t, i);
        i
    }

    fn get(&self, i: u32) -> &T {
        &self.items[i as usize]
    }
}

/// A node's identity as ids into the explorer's pools.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeKey {
    table: u32,
    procs: u32,
    hist: u32,
    pub steps: u32,
    pub crashes: u32,
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub item: ScheduleItem,
    pub choices: Box<[usize]>,
    pub child: u32,
}

#[derive(Clone, Debug)]
pub struct Node {
    pub key: NodeKey,
    pub edges: Option<Box<[Edge]>>,
    /// First discovered parent and edge index.
    pub parent: Option<(u32, u32)>,
    pub depth: u32,
}

pub struct Explorer {
    pub sim: Sim,
    pub bounds: Bounds,
    pub node_limit: usize,
    pub nodes: Vec<Node>,
    index: HashMap<NodeKey, u32>,
    tables: Pool<ObjectTable>,
    proc_states: Pool<ProcState>,
    proc_tuples: Pool<Vec<u32>>,
    hists: Pool<HistSummary>,
    pub ops: Vec<OpId>,
    pub invocations: Vec<Op>,
}

impl Explorer {
    pub fn new(sim: Sim, bounds: Bounds, node_limit: usize) -> Result<Explorer> {
        let ops = sim.workload.ids();
        if ops.len() > 64 {
            return Err(Error::Capacity { what: format!("{} operations in one workload", ops.len()), frontier: 0 });
        }
        let invocations =
            ops.iter().map(|&id| sim.workload.op(id).cloned().unwrap_or_else(|| Op::nullary("?"))).collect();
        let mut ex = Explorer {
            sim,
            bounds,
            node_limit,
            nodes: Vec::new(),
            index: HashMap::default(),
            tables: Pool::new(),
            proc_states: Pool::new(),
            proc_tuples: Pool::new(),
            hists: Pool::new(),
            ops,
            invocations,
        };
        let cfg = ex.sim.initial();
        let key = ex.pack(cfg, HistSummary::new(ex.ops.len()), 0, 0);
        ex.index.insert(key, 0);
        ex.nodes.push(Node { key, edges: None, parent: None, depth: 0 });
        Ok(ex)
    }

    fn pack(&mut self, cfg: Config, hist: HistSummary, steps: u32, crashes: u32) -> NodeKey {
        let procs: Vec<u32> = cfg.procs.into_iter().map(|p| self.proc_states.intern(p)).collect();
        NodeKey {
            table: self.tables.intern(cfg.table),
            procs: self.proc_tuples.intern(procs),
            hist: self.hists.intern(hist),
            steps,
            crashes,
        }
    }

    pub fn op_index(&self, id: OpId) -> usize {
        self.sim.workload.index_of(id)
    }

    pub fn key(&self, v: u32) -> NodeKey {
        self.nodes[v as usize].key
    }

    /// The configuration of node `v`.
    pub fn config(&self, v: u32) -> Config {
        let key = self.key(v);
        Config {
            table: self.tables.get(key.table).clone(),
            procs: self.proc_tuples.get(key.procs).iter().map(|&p| self.proc_states.get(p).clone()).collect(),
        }
    }

    /// Nodes with equal ids have equal history summaries.
    pub fn hist_id(&self, v: u32) -> u32 {
        self.key(v).hist
    }

    pub fn hist(&self, v: u32) -> &HistSummary {
        self.hists.get(self.key(v).hist)
    }

    pub fn proc_state(&self, v: u32, p: usize) -> &ProcState {
        self.proc_states.get(self.proc_tuples.get(self.key(v).procs)[p])
    }

    /// A leaf cut off by the step bound while some process could go on.
    pub fn is_truncated(&self, v: u32) -> bool {
        let key = self.key(v);
        key.steps as usize >= self.bounds.max_steps
            && (0..self.sim.n()).any(|p| {
                let ps = self.proc_state(v, p);
                !ps.crashed && (ps.running.is_some() || ps.next < self.sim.workload.procs[p].len())
            })
    }

    /// Expands and lists every node reachable without crashes, parents
    /// before children.
    pub fn crash_free_nodes(&mut self) -> Result<Vec<u32>> {
        let mut seen: HashSet<u32> = std::iter::once(0).collect();
        let mut out = vec![0u32];
        let mut i = 0;
        while i < out.len() {
            let v = out[i];
            i += 1;
            self.expand(v)?;
            for e in self.edges(v) {
                if matches!(e.item, ScheduleItem::Step(_)) && seen.insert(e.child) {
                    out.push(e.child);
                }
            }
        }
        // every node's depth is its step count, so depth order is topological
        out.sort_by_key(|&v| self.nodes[v as usize].depth);
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn frontier(&self) -> usize {
        self.nodes.iter().filter(|n| n.edges.is_none()).count()
    }

    fn intern(&mut self, key: NodeKey, parent: (u32, u32)) -> Result<u32> {
        if let Some(&id) = self.index.get(&key) {
            return Ok(id);
        }
        if self.nodes.len() >= self.node_limit {
            return Err(Error::Capacity {
                what: format!("execution tree exceeds {} nodes", self.node_limit),
                frontier: self.frontier(),
            });
        }
        let id = self.nodes.len() as u32;
        self.index.insert(key, id);
        let depth = self.nodes[parent.0 as usize].depth + 1;
        self.nodes.push(Node { key, edges: None, parent: Some(parent), depth });
        Ok(id)
    }

    /// Computes the children of `v` if not done yet.
    pub fn expand(&mut self, v: u32) -> Result<()> {
        if self.nodes[v as usize].edges.is_some() {
            return Ok(());
        }
        let key = self.key(v);
        let cfg = self.config(v);
        let hist0 = self.hist(v).clone();
        let mut pending: Vec<(ScheduleItem, Box<[usize]>, NodeKey)> = Vec::new();
        if (key.steps as usize) < self.bounds.max_steps {
            let workload = self.sim.workload.clone();
            let index = move |id: OpId| workload.index_of(id);
            for p in 0..self.sim.n() {
                if !self.sim.enabled(&cfg, p) {
                    continue;
                }
                for (next, rec) in self.sim.step_outcomes(&cfg, p)? {
                    let mut hist = hist0.clone();
                    hist.apply(&index, &rec);
                    let choices = rec.choices.iter().map(|c| c.1).collect();
                    let child = self.pack(next, hist, key.steps + 1, key.crashes);
                    pending.push((ScheduleItem::Step(p), choices, child));
                }
            }
            if (key.crashes as usize) < self.bounds.crash_budget {
                for p in 0..self.sim.n() {
                    if self.sim.enabled(&cfg, p) {
                        // only p's local state changes
                        let mut procs = self.proc_tuples.get(key.procs).clone();
                        let mut ps = cfg.procs[p].clone();
                        ps.crashed = true;
                        procs[p] = self.proc_states.intern(ps);
                        let child = NodeKey { procs: self.proc_tuples.intern(procs), crashes: key.crashes + 1, ..key };
                        pending.push((ScheduleItem::Crash { crash: p }, Box::default(), child));
                    }
                }
            }
        }
        let mut edges = Vec::with_capacity(pending.len());
        for (i, (item, choices, child)) in pending.into_iter().enumerate() {
            let child = self.intern(child, (v, i as u32))?;
            edges.push(Edge { item, choices, child });
        }
        self.nodes[v as usize].edges = Some(edges.into_boxed_slice());
        Ok(())
    }

    /// Re-executes edge `e` of `v`; `None` for a crash.
    pub fn record(&self, v: u32, e: usize) -> Result<Option<StepRecord>> {
        let edge = &self.edges(v)[e];
        let ScheduleItem::Step(p) = edge.item else { return Ok(None) };
        let mut cfg = self.config(v);
        let mut choices = ScriptedChoices::new(edge.choices.to_vec());
        Ok(Some(self.sim.step(&mut cfg, p, &mut choices)?))
    }

    pub fn edges(&self, v: u32) -> &[Edge] {
        self.nodes[v as usize].edges.as_deref().unwrap_or(&[])
    }

    /// Expands every reachable node.
    pub fn expand_all(&mut self) -> Result<usize> {
        let mut v = 0;
        while (v as usize) < self.nodes.len() {
            self.expand(v)?;
            v += 1;
        }
        Ok(self.nodes.len())
    }

    pub fn is_leaf(&self, v: u32) -> bool {
        self.edges(v).is_empty()
    }

    /// The schedule along first-discovery parents.
    pub fn path_to(&self, v: u32) -> Schedule {
        let mut items = Vec::new();
        let mut chunks = Vec::new();
        let mut cur = v;
        while let Some((p, e)) = self.nodes[cur as usize].parent {
            let edge = &self.edges(p)[e as usize];
            items.push(edge.item);
            chunks.push(edge.choices.to_vec());
            cur = p;
        }
        items.reverse();
        chunks.reverse();
        Schedule { items, choices: chunks.concat() }
    }

    /// The concrete history of `v`'s discovery path.
    pub fn history_of(&self, v: u32) -> Result<History> {
        Ok(run(&self.sim, &self.path_to(v))?.history)
    }

    /// Overlap oracle in terms of operation identities.
    pub fn overlap_fn(&self, v: u32) -> impl Fn(OpId, OpId) -> bool + '_ {
        let hist = self.hist(v);
        move |a: OpId, b: OpId| hist.overlap(self.op_index(a), self.op_index(b))
    }
}

/// Checks `order` (op index, response) against a summary: every complete
/// operation is present with its response, real-time order is respected
/// and some spec path produces the responses. Responses of pending
/// operations in the order are free.
pub fn summary_allows(ex: &Explorer, v: u32, order: &[(usize, Option<Value>)], spec: &dyn SequentialSpec) -> bool {
    let hist = ex.hist(v);
    let mut placed = 0u64;
    for &(i, ref resp) in order {
        let Some(after) = hist.invoked_after[i] else { return false };
        if placed >> i & 1 == 1 || after & !placed != 0 {
            return false;
        }
        if let (Some(actual), Some(r)) = (&hist.responses[i], resp) {
            if actual != r {
                return false;
            }
        }
        placed |= 1 << i;
    }
    if hist.completed() & !placed != 0 {
        return false;
    }
    let overlaps = ex.overlap_fn(v);
    let mut states = vec![spec.initial_state()];
    for &(i, _) in order {
        let cx = ApplyCtx { op: Some(ex.ops[i]), overlaps: Some(&overlaps) };
        let mut next = Vec::new();
        for s in &states {
            for (s2, r) in spec.apply_all(s, &ex.invocations[i], &cx) {
                if hist.responses[i].as_ref().is_none_or(|a| *a == r) && !next.contains(&s2) {
                    next.push(s2);
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
    use crate::catalog::{build, BuildOptions};
    use crate::sched::{enumerate_schedules, Workload};

    fn explorer(name: &str, w: &str, bounds: Bounds) -> Explorer {
        let w = Workload::parse(w).unwrap();
        let sim = Sim::new(build(name, &BuildOptions::new(w.n())).unwrap(), w).unwrap();
        Explorer::new(sim, bounds, 100_000).unwrap()
    }

    #[test]
    fn dag_paths_cover_the_schedule_space() {
        let bounds = Bounds { max_steps: 50, crash_budget: 1 };
        let mut ex = explorer("readableTAS", "testAndSet;testAndSet;read", bounds);
        ex.expand_all().unwrap();
        // count root-to-leaf paths
        let mut paths = vec![0u64; ex.len()];
        for v in (0..ex.len() as u32).rev() {
            paths[v as usize] =
                if ex.is_leaf(v) { 1 } else { ex.edges(v).iter().map(|e| paths[e.child as usize]).sum() };
        }
        let schedules = enumerate_schedules(&ex.sim, bounds).count() as u64;
        // children are always discovered after their parents
        assert_eq!(paths[0], schedules);
    }

    #[test]
    fn node_limit_is_a_capacity_error() {
        let w = Workload::parse("testAndSet;testAndSet;read").unwrap();
        let sim = Sim::new(build("readableTAS", &BuildOptions::new(3)).unwrap(), w).unwrap();
        let mut ex = Explorer::new(sim, Bounds::default(), 5).unwrap();
        assert!(matches!(ex.expand_all(), Err(Error::Capacity { .. })));
    }

    #[test]
    fn discovery_paths_replay_to_the_node() {
        let mut ex = explorer("maxRegisterFA", "WriteMax(1);ReadMax", Bounds { max_steps: 10, crash_budget: 1 });
        ex.expand_all().unwrap();
        for v in 0..ex.len() as u32 {
            let h = ex.history_of(v).unwrap();
            assert!(h.is_well_formed());
            let responses = h.events.iter().filter(|e| e.kind == EventKind::Respond).count();
            assert_eq!(responses, ex.hist(v).completed().count_ones() as usize);
        }
    }
}
