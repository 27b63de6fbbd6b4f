//! Contention-aware refinement and final selection among candidates.

use alloc::vec;
use alloc::vec::Vec;

use super::cep::{build_cep_graph_with, CepGraph, TaskKind};
use super::chunk::chunkify;
use super::schedule::{solve_schedule, Schedule};
use crate::env::{CostTable, Environment, QoeSpec, Workload};
use crate::error::{Error, Result};
use crate::estimate::estimate_with;
use crate::graph::ModelGraph;
use crate::partition::objective_of;
use crate::plan::{resolve_plan, Plan};

/// A candidate re-evaluated with its contention-aware schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct Refined {
    pub plan: Plan,
    pub cep: CepGraph,
    pub schedule: Schedule,
    pub latency: f64,
    /// (device, energy) in ascending device order.
    pub energy: Vec<(usize, f64)>,
    pub objective: f64,
    pub relaxed_latency: f64,
    pub violates_qoe: bool,
}

impl Refined {
    pub fn total_energy(&self) -> f64 {
        self.energy.iter().map(|(_, e)| e).sum()
    }
}

/// Per-device energy of a scheduled CEP graph: compute energy, transfer
/// power of both endpoints while a transfer is served, and idle power over
/// the remaining makespan.
pub fn schedule_energy(g: &CepGraph, env: &Environment, s: &Schedule) -> Vec<(usize, f64)> {
    let n = env.devices().len();
    let mut energy = vec![0.0; n];
    let mut busy = vec![0.0; n];
    let mut used = vec![false; n];
    for t in &g.tasks {
        match t.kind {
            TaskKind::Compute { device } => {
                energy[device] += t.energy;
                busy[device] += t.duration;
                used[device] = true;
            }
            TaskKind::Comm { src, dst, .. } => {
                let active: f64 = s.bw[t.id].iter().map(|x| x.end - x.start).sum();
                energy[src] += active * env.device(src).comm_power;
                energy[dst] += active * env.device(dst).comm_power;
                used[src] = true;
                used[dst] = true;
            }
        }
    }
    (0..n)
        .filter(|&d| used[d])
        .map(|d| (d, energy[d] + env.device(d).idle_power * (s.makespan - busy[d]).max(0.0)))
        .collect()
}

/// Builds the CEP graph of `plan`, schedules it under contention (chunked
/// with `w` chunks per transfer, or fractional when `w == 0`) and recomputes
/// its metrics.
pub fn refine_candidate(
    plan: &Plan,
    graph: &ModelGraph,
    env: &Environment,
    workload: &Workload,
    qoe: &QoeSpec,
    w: usize,
) -> Result<Refined> {
    let rp = resolve_plan(plan, graph, env, workload)?;
    let table = CostTable::new(graph, env);
    let est = estimate_with(&table, &rp, graph, env, workload, 0.0)?;
    let cep = build_cep_graph_with(&table, &rp, graph, env, workload)?;
    let frac = solve_schedule(&cep, env)?;
    let schedule = if w == 0 { frac } else { chunkify(&cep, env, &frac, w)? };
    let energy = schedule_energy(&cep, env, &schedule);
    let latency = schedule.makespan;
    let total: f64 = energy.iter().map(|(_, e)| e).sum();
    Ok(Refined {
        plan: plan.clone(),
        cep,
        schedule,
        latency,
        energy,
        objective: objective_of(total, latency, est.mem_feasible, qoe),
        relaxed_latency: est.t_latency,
        violates_qoe: latency > qoe.t_qoe,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    /// Candidates ordered by refined objective, ties by input order.
    pub ranking: Vec<Refined>,
}

impl Selection {
    pub fn best(&self) -> &Refined {
        &self.ranking[0]
    }
}

/// Ranks already refined candidates.
pub fn select(mut refined: Vec<Refined>) -> Result<Selection> {
    if refined.iter().all(|r| !r.objective.is_finite()) {
        return Err(Error::NoFeasiblePlan);
    }
    // stable sort keeps phase-1 order among ties
    refined.sort_by(|a, b| a.objective.total_cmp(&b.objective));
    Ok(Selection { ranking: refined })
}

pub fn refine_and_select(
    candidates: &[Plan],
    graph: &ModelGraph,
    env: &Environment,
    workload: &Workload,
    qoe: &QoeSpec,
    w: usize,
) -> Result<Selection> {
    let refined = candidates
        .iter()
        .map(|p| refine_candidate(p, graph, env, workload, qoe, w))
        .collect::<Result<Vec<_>>>()?;
    select(refined)
}
