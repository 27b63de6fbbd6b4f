//! Phase-1 search over pipeline partitions and device windows.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::env::{unit_time, CostTable, DeviceId, Environment, QoeSpec, Workload};
use crate::error::{Error, Result};
use crate::estimate::{estimate_with, PlanEstimate};
use crate::graph::{ChainComponent, ModelGraph};
use crate::plan::{unresolve, Plan, PlanMetrics, Provenance, ResolvedPlan, ResolvedStage};

/// Energy plus the latency penalty; infinite when memory does not fit.
pub fn objective_value(plan: &Plan, qoe: &QoeSpec) -> Result<f64> {
    let m = plan.metrics.as_ref().ok_or(Error::MissingMetrics)?;
    Ok(objective_of(m.total_energy(), m.t_est, m.mem_feasible, qoe))
}

pub fn objective_of(energy: f64, latency: f64, mem_feasible: bool, qoe: &QoeSpec) -> f64 {
    if !mem_feasible {
        return f64::INFINITY;
    }
    energy + qoe.lambda * (latency - qoe.t_qoe).max(0.0)
}

/// Splits `total` units proportionally to `1/T_i`, rounding by largest
/// remainder with ties to the lower index.
pub fn balance_microbatches(latency: &[f64], total: u32) -> Vec<u32> {
    if latency.is_empty() {
        return Vec::new();
    }
    let inv: Vec<f64> = latency.iter().map(|&t| 1.0 / t.max(f64::MIN_POSITIVE)).collect();
    let sum: f64 = inv.iter().sum();
    let target: Vec<f64> = inv.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<u32> = target.iter().map(|&x| libm::floor(x) as u32).collect();
    let assigned: u32 = counts.iter().sum();
    let mut order: Vec<usize> = (0..latency.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (target[a] - counts[a] as f64, target[b] - counts[b] as f64);
        rb.partial_cmp(&ra).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned) as usize) {
        counts[i] += 1;
    }
    counts
}

/// Transfer time at the pair's peak rate, ignoring contention.
pub fn relaxed_comm_time(env: &Environment, src: usize, dst: usize, bytes: f64) -> Result<f64> {
    if src == dst || bytes == 0.0 {
        return Ok(0.0);
    }
    Ok(bytes * 8.0 / env.peak_bw_or_err(src, dst)?)
}

/// A prefix plan held in a DP cell.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialPlan {
    pub stages: Vec<ResolvedStage>,
    /// Flattened layer position after each stage.
    pub bounds: Vec<usize>,
    pub devices: usize,
    pub objective: f64,
    pub estimate: Option<PlanEstimate>,
}

fn cmp_partial(a: &PartialPlan, b: &PartialPlan) -> Ordering {
    a.objective
        .total_cmp(&b.objective)
        .then(a.stages.len().cmp(&b.stages.len()))
        .then(a.devices.cmp(&b.devices))
        .then_with(|| a.bounds.cmp(&b.bounds))
        .then_with(|| {
            a.stages
                .iter()
                .map(|s| s.tp_degree)
                .cmp(b.stages.iter().map(|s| s.tp_degree))
        })
}

fn top_k(mut v: Vec<PartialPlan>, k: usize) -> Vec<PartialPlan> {
    v.sort_by(cmp_partial);
    v.truncate(k);
    v
}

type Cell3 = BTreeMap<(usize, usize, usize), Vec<PartialPlan>>;
type Cell4 = BTreeMap<(usize, usize, usize, usize), Vec<PartialPlan>>;

/// DP cells. `q[(j,s,n)]` covers chains `1..=j` with `s` stages on the first
/// `n` devices; `q1[(j,l,s,n)]` additionally covers the first `l` layers of
/// chain `j`; `q2[(j,k,s,n)]` ends with one stage bundling chains `k..=j`.
#[derive(Clone, Debug, Default)]
pub struct DpTable {
    pub q: Cell3,
    pub q1: Cell4,
    pub q2: Cell4,
    pub chain_lengths: Vec<usize>,
}

struct Search<'a> {
    graph: &'a ModelGraph,
    env: &'a Environment,
    workload: &'a Workload,
    qoe: &'a QoeSpec,
    table: CostTable,
    order: Vec<usize>,
}

impl Search<'_> {
    /// All admissible ways to append a stage of `nodes` on rank window
    /// `lo..hi`.
    fn extend(&self, p: &PartialPlan, nodes: &[usize], lo: usize, hi: usize, bound: usize) -> Result<Vec<PartialPlan>> {
        let devices = &self.order[lo..hi];
        let mut variants: Vec<(Vec<u32>, u32)> = Vec::new();
        let b_m = self.workload.units_per_microbatch;
        if devices.len() == 1 {
            variants.push((vec![b_m], 1));
            if let Some(tp) = &self.env.device(devices[0]).tensor_parallel {
                if tp.degree > 1 {
                    variants.push((vec![b_m], tp.degree));
                }
            }
        } else {
            let mut lat = Vec::with_capacity(devices.len());
            for &d in devices {
                match unit_time(self.env, self.graph, nodes, d) {
                    Some(t) => lat.push(t),
                    None => return Ok(Vec::new()),
                }
            }
            let units = balance_microbatches(&lat, b_m);
            if units.contains(&0) {
                return Ok(Vec::new());
            }
            variants.push((units, 1));
        }
        let mut out = Vec::new();
        for (units, tp_degree) in variants {
            let mut stages = p.stages.clone();
            stages.push(ResolvedStage {
                nodes: nodes.to_vec(),
                devices: devices.to_vec(),
                units,
                tp_degree,
            });
            let rp = ResolvedPlan { stages };
            let est = match estimate_with(&self.table, &rp, self.graph, self.env, self.workload, 0.0) {
                Ok(e) => e,
                Err(Error::UnhostableNode { .. } | Error::NoRoute { .. } | Error::PipelineTooDeep { .. }) => continue,
                Err(e) => return Err(e),
            };
            if !est.mem_feasible {
                continue;
            }
            let objective = objective_of(est.e_consumption, est.t_latency, true, self.qoe);
            let mut bounds = p.bounds.clone();
            bounds.push(bound);
            out.push(PartialPlan {
                stages: rp.stages,
                bounds,
                devices: hi,
                objective,
                estimate: Some(est),
            });
        }
        Ok(out)
    }
}

/// Top-`k` plans over the flattened chain sequence of `components`.
pub fn partition_search(
    graph: &ModelGraph,
    components: &[ChainComponent],
    env: &Environment,
    workload: &Workload,
    qoe: &QoeSpec,
    k: usize,
) -> Result<Vec<Plan>> {
    Ok(partition_search_table(graph, components, env, workload, qoe, k)?.0)
}

pub fn partition_search_table(
    graph: &ModelGraph,
    components: &[ChainComponent],
    env: &Environment,
    workload: &Workload,
    qoe: &QoeSpec,
    k: usize,
) -> Result<(Vec<Plan>, DpTable)> {
    if k == 0 {
        return Err(Error::InvalidArgument("top-k must be at least 1".into()));
    }
    let mut chains: Vec<Vec<usize>> = Vec::new();
    for comp in components {
        for chain in &comp.chains {
            let mut idx = Vec::with_capacity(chain.len());
            for id in chain {
                idx.push(graph.index_of(id).ok_or_else(|| Error::UnknownNode(id.0.clone()))?);
            }
            if !idx.is_empty() {
                chains.push(idx);
            }
        }
    }
    if chains.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let order = env.active_rank_order();
    let n_dev = order.len();
    let max_stages = n_dev.min((workload.microbatches as usize + 1) / 2);
    let search = Search {
        graph,
        env,
        workload,
        qoe,
        table: CostTable::new(graph, env),
        order,
    };
    let jn = chains.len();
    let mut offset = vec![0usize; jn + 1];
    for j in 0..jn {
        offset[j + 1] = offset[j] + chains[j].len();
    }
    let mut dp = DpTable {
        chain_lengths: chains.iter().map(Vec::len).collect(),
        ..DpTable::default()
    };
    dp.q.insert(
        (0, 0, 0),
        vec![PartialPlan {
            stages: Vec::new(),
            bounds: Vec::new(),
            devices: 0,
            objective: 0.0,
            estimate: None,
        }],
    );
    for j in 1..=jn {
        let chain = &chains[j - 1];
        let len = chain.len();
        for s in 0..=max_stages {
            for n in 0..=n_dev {
                if let Some(v) = dp.q.get(&(j - 1, s, n)) {
                    dp.q1.insert((j, 0, s, n), v.clone());
                }
            }
        }
        for l in 1..=len {
            for s in 1..=max_stages {
                for n in s..=n_dev {
                    let mut cands = Vec::new();
                    for lp in 0..l {
                        for np in (s - 1)..n {
                            let Some(prev) = dp.q1.get(&(j, lp, s - 1, np)) else { continue };
                            for p in prev {
                                cands.extend(search.extend(p, &chain[lp..l], np, n, offset[j - 1] + l)?);
                            }
                        }
                    }
                    if !cands.is_empty() {
                        dp.q1.insert((j, l, s, n), top_k(cands, k));
                    }
                }
            }
        }
        for kk in 1..j {
            let nodes: Vec<usize> = chains[kk - 1..j].iter().flatten().copied().collect();
            for s in 1..=max_stages {
                for n in s..=n_dev {
                    let mut cands = Vec::new();
                    for np in (s - 1)..n {
                        let Some(prev) = dp.q.get(&(kk - 1, s - 1, np)) else { continue };
                        for p in prev {
                            cands.extend(search.extend(p, &nodes, np, n, offset[j])?);
                        }
                    }
                    if !cands.is_empty() {
                        dp.q2.insert((j, kk, s, n), top_k(cands, k));
                    }
                }
            }
        }
        for s in 1..=max_stages {
            for n in s..=n_dev {
                let mut cands = dp.q1.get(&(j, len, s, n)).cloned().unwrap_or_default();
                for kk in 1..j {
                    if let Some(v) = dp.q2.get(&(j, kk, s, n)) {
                        cands.extend(v.iter().cloned());
                    }
                }
                if !cands.is_empty() {
                    dp.q.insert((j, s, n), top_k(cands, k));
                }
            }
        }
    }
    let mut finals = Vec::new();
    for s in 1..=max_stages {
        for n in s..=n_dev {
            if let Some(v) = dp.q.get(&(jn, s, n)) {
                finals.extend(v.iter().cloned());
            }
        }
    }
    if finals.is_empty() {
        return Err(Error::NoFeasiblePlan);
    }
    let plans = top_k(finals, k)
        .into_iter()
        .map(|p| {
            let est = p.estimate.as_ref().expect("non-empty plan carries an estimate");
            let rp = ResolvedPlan { stages: p.stages.clone() };
            let mut plan = unresolve(&rp, graph, env);
            plan.metrics = Some(metrics_from(est, env));
            plan.provenance = Some(Provenance {
                j: jn,
                s: p.stages.len(),
                n: p.devices,
            });
            plan
        })
        .collect();
    Ok((plans, dp))
}

pub fn metrics_from(est: &PlanEstimate, env: &Environment) -> PlanMetrics {
    PlanMetrics {
        t_est: est.t_latency,
        e_est: est
            .per_device_energy
            .iter()
            .map(|&(d, e)| (env.device(d).id.clone(), e))
            .collect(),
        mem_feasible: est.mem_feasible,
    }
}

/// Devices whose estimated energy exceeds their budget.
pub fn budget_violations(metrics: &PlanMetrics, env: &Environment) -> Vec<(DeviceId, f64, f64)> {
    metrics
        .e_est
        .iter()
        .filter_map(|(id, e)| {
            let d = env.device(env.device_index(id)?);
            (*e > d.energy_budget).then(|| (id.clone(), *e, d.energy_budget))
        })
        .collect()
}
