//! Analytic latency and energy estimates for linear 1F1B pipelines.

use alloc::vec;
use alloc::vec::Vec;

use crate::env::{stage_cost_table, CostTable, Environment, Workload};
use crate::error::{Error, Result};
use crate::graph::ModelGraph;
use crate::net::cep::{one_f_one_b_order, Direction};
use crate::plan::{resolve_plan, Plan, ResolvedPlan, ResolvedStage};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepCost {
    pub t: f64,
    pub e: f64,
}

/// One pipeline step: a compute stage (even index) or a stage boundary
/// transfer (odd index). `bg` is the gradient gathering cost of a
/// data-parallel stage.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Step {
    pub bf: StepCost,
    pub bb: StepCost,
    pub bg: StepCost,
}

impl Step {
    pub fn compute(fwd: f64, bwd: f64) -> Self {
        Step {
            bf: StepCost { t: fwd, e: 0.0 },
            bb: StepCost { t: bwd, e: 0.0 },
            bg: StepCost::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepList {
    pub steps: Vec<Step>,
}

impl StepList {
    pub fn from_times(fwd: &[f64], bwd: &[f64]) -> Self {
        StepList {
            steps: fwd.iter().zip(bwd).map(|(&f, &b)| Step::compute(f, b)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// First index maximising `Bf + Bb`.
pub fn bottleneck_index(steps: &StepList) -> usize {
    let mut best = 0;
    for (i, s) in steps.steps.iter().enumerate() {
        let b = &steps.steps[best];
        if s.bf.t + s.bb.t > b.bf.t + b.bb.t {
            best = i;
        }
    }
    best
}

/// Warm-up critical path up to the first forward of bottleneck step `d`
/// reaching steady state.
pub fn start_phase_time(steps: &StepList, d: usize) -> f64 {
    let st = &steps.steps;
    let n = st.len();
    let mut best = 0.0f64;
    for p in d..n {
        let sum_f: f64 = st[..=p].iter().map(|s| s.bf.t).sum();
        let max_f = st[..=p].iter().map(|s| s.bf.t).fold(0.0, f64::max);
        let sum_b: f64 = st[d + 1..=p].iter().map(|s| s.bb.t).sum();
        best = best.max(sum_f + (n - 1 - p) as f64 * max_f + sum_b);
    }
    best
}

/// Drain critical path per step, mirroring [`start_phase_time`] with the
/// forward and backward roles swapped.
pub fn end_phase_time(steps: &StepList, d: usize) -> Vec<f64> {
    let st = &steps.steps;
    let n = st.len();
    (0..n)
        .map(|s| {
            let mut best = 0.0f64;
            for p in s.max(d)..n {
                let sum_b: f64 = st[..=p].iter().map(|s| s.bb.t).sum();
                let max_b = st[..=p].iter().map(|s| s.bb.t).fold(0.0, f64::max);
                let sum_f: f64 = st[d + 1..=p].iter().map(|s| s.bf.t).sum();
                best = best.max(sum_b + (n - 1 - p) as f64 * max_b + sum_f);
            }
            best
        })
        .collect()
}

/// Latency decomposition with the bottleneck fixed at `d`.
pub fn latency_at(steps: &StepList, microbatches: u32, d: usize) -> Result<f64> {
    let n = steps.len();
    if (microbatches as usize) < n {
        return Err(Error::PipelineTooDeep {
            steps: n,
            microbatches,
        });
    }
    let t1 = start_phase_time(steps, d);
    let sd = &steps.steps[d];
    let t2 = (microbatches as usize - n + d) as f64 * (sd.bf.t + sd.bb.t);
    let t3 = end_phase_time(steps, d).into_iter().fold(0.0, f64::max);
    Ok(t1 + t2 + t3)
}

/// Latency of the pipeline. Every step is tried as the steady-state
/// bottleneck and the largest decomposition is kept; with ties or
/// near-ties in `Bf + Bb` the first-argmax choice alone can under-count.
///
/// Gathering of a data-parallel step starts when that step has run its
/// last backward, which in the drain is well before the first step
/// finishes.
pub fn pipeline_latency(steps: &StepList, microbatches: u32) -> Result<f64> {
    let mut best = latency_at(steps, microbatches, 0)?;
    for d in 1..steps.len() {
        best = best.max(latency_at(steps, microbatches, d)?);
    }
    if steps.steps.iter().any(|s| s.bg.t > 0.0) {
        let fin = last_backward_finish(steps, microbatches);
        for (s, f) in steps.steps.iter().zip(fin) {
            best = best.max(f + s.bg.t);
        }
    }
    Ok(best)
}

/// Finish time of each step's last backward when every step runs its
/// 1F1B order back to back without contention.
pub fn last_backward_finish(steps: &StepList, microbatches: u32) -> Vec<f64> {
    let (n, m) = (steps.len(), microbatches as usize);
    let orders: Vec<_> = (0..n).map(|i| one_f_one_b_order(n, i, m)).collect();
    let mut fwd = vec![vec![f64::NAN; m]; n];
    let mut bwd = vec![vec![f64::NAN; m]; n];
    let mut next = vec![0usize; n];
    let mut clock = vec![0.0f64; n];
    let mut progress = true;
    while progress {
        progress = false;
        for i in 0..n {
            while let Some(&(dir, mb)) = orders[i].get(next[i]) {
                // NaN marks an instance not yet placed
                let ready = match dir {
                    Direction::Fwd if i == 0 => 0.0,
                    Direction::Fwd => fwd[i - 1][mb],
                    _ if i + 1 == n => fwd[i][mb],
                    _ if bwd[i + 1][mb].is_nan() => f64::NAN,
                    _ => bwd[i + 1][mb].max(fwd[i][mb]),
                };
                if ready.is_nan() {
                    break;
                }
                let st = &steps.steps[i];
                let (slot, dur) = match dir {
                    Direction::Fwd => (&mut fwd[i][mb], st.bf.t),
                    _ => (&mut bwd[i][mb], st.bb.t),
                };
                clock[i] = clock[i].max(ready) + dur;
                *slot = clock[i];
                next[i] += 1;
                progress = true;
            }
        }
    }
    bwd.iter().map(|b| b.last().copied().unwrap_or(0.0)).collect()
}

/// `Σ M·(Bf.e + Bb.e) + Bg.e`.
pub fn step_energy(steps: &StepList, microbatches: u32) -> f64 {
    steps
        .steps
        .iter()
        .map(|s| microbatches as f64 * (s.bf.e + s.bb.e) + s.bg.e)
        .sum()
}

/// Ring all-reduce of the stage's weights over its devices in stage order.
pub fn gathering_time(stage: &ResolvedStage, graph: &ModelGraph, env: &Environment) -> Result<StepCost> {
    Ok(gathering_detail(stage, graph, env)?.0)
}

/// Gathering cost together with per-device energy shares.
fn gathering_detail(stage: &ResolvedStage, graph: &ModelGraph, env: &Environment) -> Result<(StepCost, Vec<(usize, f64)>)> {
    let x = stage.devices.len();
    if x < 2 {
        return Ok((StepCost::default(), Vec::new()));
    }
    let params: u64 = stage.nodes.iter().map(|&v| graph.node(v).param_bytes).sum();
    let chunk_bits = params as f64 / x as f64 * 8.0;
    let rounds = 2 * (x - 1);
    let mut slowest = 0.0f64;
    let mut share = Vec::new();
    let mut energy = 0.0;
    for k in 0..x {
        let (a, b) = (stage.devices[k], stage.devices[(k + 1) % x]);
        let dur = if chunk_bits > 0.0 {
            chunk_bits / env.peak_bw_or_err(a, b)?
        } else {
            0.0
        };
        slowest = slowest.max(dur);
        let (ea, eb) = (
            rounds as f64 * dur * env.device(a).comm_power,
            rounds as f64 * dur * env.device(b).comm_power,
        );
        share.push((a, ea));
        share.push((b, eb));
        energy += ea + eb;
    }
    Ok((
        StepCost {
            t: rounds as f64 * slowest,
            e: energy,
        },
        share,
    ))
}

/// One directed replica-to-replica transfer of a stage boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairTransfer {
    pub src: usize,
    pub dst: usize,
    pub bytes: f64,
}

/// Transfers for boundary `s` in the forward direction: each downstream
/// replica pulls the units it handles from the upstream replicas holding
/// them.
pub fn boundary_transfers(rp: &ResolvedPlan, cut: &[u64], s: usize) -> Vec<PairTransfer> {
    let (up, down) = (&rp.stages[s], &rp.stages[s + 1]);
    let mut out = Vec::new();
    for r in 0..up.devices.len() {
        let (a0, a1) = up.unit_range(r);
        for q in 0..down.devices.len() {
            let (b0, b1) = down.unit_range(q);
            let overlap = a1.min(b1).saturating_sub(a0.max(b0));
            if overlap > 0 && cut[s] > 0 {
                out.push(PairTransfer {
                    src: up.devices[r],
                    dst: down.devices[q],
                    bytes: overlap as f64 * cut[s] as f64,
                });
            }
        }
    }
    out
}

/// Transfer durations at the given rates. With `relaxed` every pair runs
/// at its peak; otherwise pairs of one boundary sharing a domain split its
/// capacity evenly.
fn pair_durations(env: &Environment, pairs: &[(usize, usize, f64)], relaxed: bool) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(pairs.len());
    for &(a, b, bytes) in pairs {
        let peak = env.peak_bw_or_err(a, b)?;
        let rate = if relaxed {
            peak
        } else {
            let dom = env.domain_of(a, b);
            let k = pairs.iter().filter(|&&(x, y, _)| env.domain_of(x, y) == dom).count();
            peak.min(dom.map_or(peak, |d| env.domain_capacity(d)) / k as f64)
        };
        out.push(bytes * 8.0 / rate);
    }
    Ok(out)
}

/// Per-device energy contributions gathered while building the step list,
/// each already multiplied by the number of microbatches.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepDetail {
    pub steps: StepList,
    /// (device, energy)
    pub energy: Vec<(usize, f64)>,
    /// (device, compute busy seconds)
    pub busy: Vec<(usize, f64)>,
    /// (device, memory bytes)
    pub mem: Vec<(usize, u64)>,
}

pub fn build_step_list(
    rp: &ResolvedPlan,
    graph: &ModelGraph,
    env: &Environment,
    workload: &Workload,
    relaxed: bool,
) -> Result<StepList> {
    Ok(build_step_detail(rp, graph, env, workload, relaxed)?.steps)
}

pub fn build_step_detail(
    rp: &ResolvedPlan,
    graph: &ModelGraph,
    env: &Environment,
    workload: &Workload,
    relaxed: bool,
) -> Result<StepDetail> {
    build_step_detail_with(&CostTable::new(graph, env), rp, graph, env, workload, relaxed)
}

pub fn build_step_detail_with(
    table: &CostTable,
    rp: &ResolvedPlan,
    graph: &ModelGraph,
    env: &Environment,
    workload: &Workload,
    relaxed: bool,
) -> Result<StepDetail> {
    let m = workload.microbatches as f64;
    let cut = rp.boundary_bytes(graph);
    let mut detail = StepDetail::default();
    for (si, st) in rp.stages.iter().enumerate() {
        if si > 0 {
            let fwd: Vec<(usize, usize, f64)> = boundary_transfers(rp, &cut, si - 1)
                .iter()
                .map(|p| (p.src, p.dst, p.bytes))
                .collect();
            let bwd: Vec<(usize, usize, f64)> = fwd.iter().map(|&(a, b, x)| (b, a, x)).collect();
            let mut step = Step::default();
            for (pairs, cost) in [(&fwd, &mut step.bf), (&bwd, &mut step.bb)] {
                let durs = pair_durations(env, pairs, relaxed)?;
                for (&(a, b, _), &dur) in pairs.iter().zip(&durs) {
                    let (ea, eb) = (dur * env.device(a).comm_power, dur * env.device(b).comm_power);
                    cost.t = cost.t.max(dur);
                    cost.e += ea + eb;
                    detail.energy.push((a, m * ea));
                    detail.energy.push((b, m * eb));
                }
            }
            detail.steps.steps.push(step);
        }
        let c = stage_cost_table(table, env, graph, &st.nodes, &st.devices, &st.units, st.tp_degree)?;
        let (bg, gshare) = gathering_detail(st, graph, env)?;
        let mut step = Step {
            bf: StepCost {
                t: c.fwd_time,
                e: c.per_device.iter().map(|d| d.fwd_energy).sum(),
            },
            bb: StepCost {
                t: c.bwd_time,
                e: c.per_device.iter().map(|d| d.bwd_energy).sum(),
            },
            bg,
        };
        step.bg.e = bg.e;
        for d in &c.per_device {
            detail.energy.push((d.device, m * d.energy()));
            detail.busy.push((d.device, m * (d.fwd_time + d.bwd_time)));
            detail.mem.push((d.device, d.mem));
        }
        detail.energy.extend(gshare);
        detail.steps.steps.push(step);
    }
    Ok(detail)
}

/// Estimated latency, energy and the weighted objective for a plan.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanEstimate {
    pub t_latency: f64,
    pub e_consumption: f64,
    pub objective: f64,
    /// (device, energy) in ascending device order.
    pub per_device_energy: Vec<(usize, f64)>,
    pub mem: Vec<(usize, u64)>,
    pub mem_feasible: bool,
}

/// Sum values by device, ascending device order.
pub(crate) fn fold_by_device<T: Copy + core::ops::AddAssign + Default>(n: usize, items: &[(usize, T)], keep: impl Fn(usize) -> bool) -> Vec<(usize, T)> {
    let mut acc = vec![T::default(); n];
    let mut used = vec![false; n];
    for &(d, x) in items {
        acc[d] += x;
        used[d] = true;
    }
    (0..n).filter(|&d| used[d] && keep(d)).map(|d| (d, acc[d])).collect()
}

/// Estimate a resolved plan. Energy includes idle draw over the latency
/// window on every participating device.
pub fn estimate_resolved(
    rp: &ResolvedPlan,
    graph: &ModelGraph,
    env: &Environment,
    workload: &Workload,
    weight: f64,
) -> Result<PlanEstimate> {
    estimate_with(&CostTable::new(graph, env), rp, graph, env, workload, weight)
}

pub fn estimate_with(
    table: &CostTable,
    rp: &ResolvedPlan,
    graph: &ModelGraph,
    env: &Environment,
    workload: &Workload,
    weight: f64,
) -> Result<PlanEstimate> {
    let detail = build_step_detail_with(table, rp, graph, env, workload, true)?;
    let t = pipeline_latency(&detail.steps, workload.microbatches)?;
    let n = env.devices().len();
    let busy = fold_by_device(n, &detail.busy, |_| true);
    let mut energy = detail.energy;
    for &(d, b) in &busy {
        energy.push((d, env.device(d).idle_power * (t - b).max(0.0)));
    }
    let per_device_energy = fold_by_device(n, &energy, |_| true);
    let e: f64 = per_device_energy.iter().map(|(_, e)| e).sum();
    let mem = fold_by_device(n, &detail.mem, |_| true);
    let mem_feasible = mem.iter().all(|&(d, m)| m <= env.device(d).mem_capacity);
    Ok(PlanEstimate {
        t_latency: t,
        e_consumption: e,
        objective: t + weight * e,
        per_device_energy,
        mem,
        mem_feasible,
    })
}

pub fn estimate_plan(
    plan: &Plan,
    graph: &ModelGraph,
    env: &Environment,
    workload: &Workload,
    weight: f64,
) -> Result<PlanEstimate> {
    let rp = resolve_plan(plan, graph, env, workload)?;
    estimate_resolved(&rp, graph, env, workload, weight)
}
