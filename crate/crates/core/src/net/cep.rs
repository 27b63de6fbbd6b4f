//! Communication-expanded task graphs.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::env::{stage_cost_table, CostTable, Environment, Workload};
use crate::error::{Error, Result};
use crate::estimate::boundary_transfers;
use crate::graph::ModelGraph;
use crate::plan::ResolvedPlan;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Fwd,
    Bwd,
    Gather,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TaskKind {
    Compute { device: usize },
    Comm { src: usize, dst: usize, domain: Option<usize> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CepTask {
    pub id: usize,
    pub kind: TaskKind,
    /// Pipeline step (compute stages even, boundaries odd).
    pub step: usize,
    /// Microbatch, or round index for gathering tasks.
    pub microbatch: usize,
    pub direction: Direction,
    /// Fixed duration of compute tasks; zero for communication.
    pub duration: f64,
    pub bytes: f64,
    /// Energy of a compute task at nominal speed.
    pub energy: f64,
    pub producer: Option<usize>,
    pub consumer: Option<usize>,
}

impl CepTask {
    pub fn is_comm(&self) -> bool {
        matches!(self.kind, TaskKind::Comm { .. })
    }

    pub fn label(&self) -> String {
        let d = match self.direction {
            Direction::Fwd => "F",
            Direction::Bwd => "B",
            Direction::Gather => "G",
        };
        match self.kind {
            TaskKind::Compute { device } => format!("{d}{}.m{}@{device}", self.step, self.microbatch),
            TaskKind::Comm { src, dst, .. } => format!("{d}{}.m{}:{src}->{dst}", self.step, self.microbatch),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CepGraph {
    pub tasks: Vec<CepTask>,
    pub deps: Vec<(usize, usize)>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl CepGraph {
    pub fn new(tasks: Vec<CepTask>, deps: Vec<(usize, usize)>) -> Result<Self> {
        let n = tasks.len();
        let deps: Vec<(usize, usize)> = deps.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for &(a, b) in &deps {
            if a >= n || b >= n {
                return Err(Error::InvalidArgument(format!("dependency {a} -> {b} out of range")));
            }
            if a == b {
                return Err(Error::CycleDetected);
            }
            succs[a].push(b);
            preds[b].push(a);
        }
        let mut indeg: Vec<usize> = preds.iter().map(Vec::len).collect();
        let mut stack: Vec<usize> = (0..n).rev().filter(|&v| indeg[v] == 0).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(v) = stack.pop() {
            topo.push(v);
            for &w in succs[v].iter().rev() {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    stack.push(w);
                }
            }
        }
        if topo.len() != n {
            return Err(Error::CycleDetected);
        }
        Ok(CepGraph {
            tasks,
            deps,
            preds,
            succs,
            topo,
        })
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn preds(&self, t: usize) -> &[usize] {
        &self.preds[t]
    }

    pub fn succs(&self, t: usize) -> &[usize] {
        &self.succs[t]
    }

    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn comm_tasks(&self) -> impl Iterator<Item = &CepTask> {
        self.tasks.iter().filter(|t| t.is_comm())
    }

    /// Nominal task durations: compute as profiled, transfers at peak.
    pub fn nominal_durations(&self, env: &Environment) -> Vec<f64> {
        self.tasks
            .iter()
            .map(|t| match t.kind {
                TaskKind::Compute { .. } => t.duration,
                TaskKind::Comm { src, dst, .. } => match env.peak_bw(src, dst) {
                    Some(bw) if bw > 0.0 && t.bytes > 0.0 => t.bytes * 8.0 / bw,
                    _ => 0.0,
                },
            })
            .collect()
    }

    /// Longest path from each task's start to the sink, task included.
    pub fn critical_path(&self, durations: &[f64]) -> Vec<f64> {
        let mut cp = vec![0.0; self.len()];
        for &v in self.topo.iter().rev() {
            let tail = self.succs[v].iter().map(|&w| cp[w]).fold(0.0, f64::max);
            cp[v] = durations[v] + tail;
        }
        cp
    }
}

/// Instance order of step `i` out of `steps`: `steps-1-i` warm-up
/// forwards, then one forward one backward.
pub fn one_f_one_b_order(steps: usize, i: usize, microbatches: usize) -> Vec<(Direction, usize)> {
    let warm = (steps - 1 - i).min(microbatches);
    let mut order: Vec<(Direction, usize)> = (0..warm).map(|m| (Direction::Fwd, m)).collect();
    let (mut nf, mut nb) = (warm, 0);
    while nb < microbatches {
        if nf < microbatches {
            order.push((Direction::Fwd, nf));
            nf += 1;
        }
        order.push((Direction::Bwd, nb));
        nb += 1;
    }
    order
}

/// Expands a linear plan into compute and transfer tasks for one iteration.
pub fn build_cep_graph(rp: &ResolvedPlan, graph: &ModelGraph, env: &Environment, workload: &Workload) -> Result<CepGraph> {
    build_cep_graph_with(&CostTable::new(graph, env), rp, graph, env, workload)
}

pub fn build_cep_graph_with(
    table: &CostTable,
    rp: &ResolvedPlan,
    graph: &ModelGraph,
    env: &Environment,
    workload: &Workload,
) -> Result<CepGraph> {
    let m = workload.microbatches as usize;
    if m == 0 {
        return Err(Error::InvalidArgument("at least one microbatch is required".into()));
    }
    let n_stages = rp.stages.len();
    let steps = 2 * n_stages - 1;
    let cut = rp.boundary_bytes(graph);
    let costs = rp
        .stages
        .iter()
        .map(|st| stage_cost_table(table, env, graph, &st.nodes, &st.devices, &st.units, st.tp_degree))
        .collect::<Result<Vec<_>>>()?;
    let transfers: Vec<_> = (0..n_stages.saturating_sub(1)).map(|s| boundary_transfers(rp, &cut, s)).collect();

    let mut tasks: Vec<CepTask> = Vec::new();
    // inst[step][dir][m] -> task ids
    let mut inst = vec![[vec![Vec::new(); m], vec![Vec::new(); m]]; steps];
    let orders: Vec<_> = (0..steps).map(|i| one_f_one_b_order(steps, i, m)).collect();
    for (i, order) in orders.iter().enumerate() {
        for &(dir, mb) in order {
            let di = (dir == Direction::Bwd) as usize;
            let mut ids = Vec::new();
            if i % 2 == 0 {
                for d in &costs[i / 2].per_device {
                    let (duration, energy) = match dir {
                        Direction::Fwd => (d.fwd_time, d.fwd_energy),
                        _ => (d.bwd_time, d.bwd_energy),
                    };
                    ids.push(tasks.len());
                    tasks.push(CepTask {
                        id: tasks.len(),
                        kind: TaskKind::Compute { device: d.device },
                        step: i,
                        microbatch: mb,
                        direction: dir,
                        duration,
                        bytes: 0.0,
                        energy,
                        producer: None,
                        consumer: None,
                    });
                }
            } else {
                let b = i / 2;
                let (up, down) = (&rp.stages[b], &rp.stages[b + 1]);
                let mut pairs: Vec<(usize, usize, f64)> =
                    transfers[b].iter().map(|p| (p.src, p.dst, p.bytes)).collect();
                if pairs.is_empty() {
                    pairs.push((up.devices[0], down.devices[0], 0.0));
                }
                for (src, dst, bytes) in pairs {
                    let (src, dst) = if dir == Direction::Fwd { (src, dst) } else { (dst, src) };
                    ids.push(tasks.len());
                    tasks.push(CepTask {
                        id: tasks.len(),
                        kind: TaskKind::Comm {
                            src,
                            dst,
                            domain: env.domain_of(src, dst),
                        },
                        step: i,
                        microbatch: mb,
                        direction: dir,
                        duration: 0.0,
                        bytes,
                        energy: 0.0,
                        producer: None,
                        consumer: None,
                    });
                }
            }
            inst[i][di][mb] = ids;
        }
    }

    let mut deps = Vec::new();
    let all_to_all = |deps: &mut Vec<(usize, usize)>, a: &[usize], b: &[usize]| {
        for &x in a {
            for &y in b {
                deps.push((x, y));
            }
        }
    };
    for (i, order) in orders.iter().enumerate() {
        for w in order.windows(2) {
            let (a, b) = (w[0], w[1]);
            all_to_all(
                &mut deps,
                &inst[i][(a.0 == Direction::Bwd) as usize][a.1],
                &inst[i][(b.0 == Direction::Bwd) as usize][b.1],
            );
        }
        for mb in 0..m {
            if i > 0 {
                all_to_all(&mut deps, &inst[i - 1][0][mb], &inst[i][0][mb]);
            }
            all_to_all(&mut deps, &inst[i][0][mb], &inst[i][1][mb]);
            if i + 1 < steps {
                all_to_all(&mut deps, &inst[i + 1][1][mb], &inst[i][1][mb]);
            }
        }
    }
    // producer and consumer compute tasks of each transfer
    let compute_on = |i: usize, di: usize, mb: usize, dev: usize, tasks: &[CepTask]| {
        inst[i][di][mb]
            .iter()
            .copied()
            .find(|&t| tasks[t].kind == TaskKind::Compute { device: dev })
    };
    for i in (1..steps).step_by(2) {
        for di in 0..2 {
            for mb in 0..m {
                for &t in &inst[i][di][mb] {
                    let TaskKind::Comm { src, dst, .. } = tasks[t].kind else { continue };
                    let (from, to) = if di == 0 { (i - 1, i + 1) } else { (i + 1, i - 1) };
                    tasks[t].producer = compute_on(from, di, mb, src, &tasks);
                    tasks[t].consumer = compute_on(to, di, mb, dst, &tasks);
                }
            }
        }
    }

    // gradient gathering once the stage has run its last backward
    for (si, st) in rp.stages.iter().enumerate() {
        let x = st.devices.len();
        if x < 2 {
            continue;
        }
        let params: u64 = st.nodes.iter().map(|&v| graph.node(v).param_bytes).sum();
        let last = *orders[2 * si].last().unwrap();
        let mut prev = inst[2 * si][(last.0 == Direction::Bwd) as usize][last.1].clone();
        for round in 0..2 * (x - 1) {
            let mut ids = Vec::with_capacity(x);
            for k in 0..x {
                let (src, dst) = (st.devices[k], st.devices[(k + 1) % x]);
                ids.push(tasks.len());
                tasks.push(CepTask {
                    id: tasks.len(),
                    kind: TaskKind::Comm {
                        src,
                        dst,
                        domain: env.domain_of(src, dst),
                    },
                    step: 2 * si,
                    microbatch: round,
                    direction: Direction::Gather,
                    duration: 0.0,
                    bytes: params as f64 / x as f64,
                    energy: 0.0,
                    producer: compute_on(2 * si, 1, m - 1, src, &tasks),
                    consumer: None,
                });
            }
            all_to_all(&mut deps, &prev, &ids);
            prev = ids;
        }
    }
    CepGraph::new(tasks, deps)
}
