//! Plans: pipeline stages mapped onto device groups.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::env::{DeviceId, Environment, Workload};
use crate::error::{Error, Result};
use crate::graph::{ModelGraph, NodeId};

#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    pub nodes: Vec<NodeId>,
    pub devices: Vec<DeviceId>,
    /// Reference units per device, parallel to `devices`.
    pub batch_alloc: Vec<u32>,
    pub tp_degree: u32,
}

impl Stage {
    pub fn new(nodes: Vec<NodeId>, devices: Vec<DeviceId>, batch_alloc: Vec<u32>) -> Self {
        Stage {
            nodes,
            devices,
            batch_alloc,
            tp_degree: 1,
        }
    }

    pub fn is_data_parallel(&self) -> bool {
        self.devices.len() > 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanMetrics {
    pub t_est: f64,
    pub e_est: Vec<(DeviceId, f64)>,
    pub mem_feasible: bool,
}

impl PlanMetrics {
    pub fn total_energy(&self) -> f64 {
        self.e_est.iter().map(|(_, e)| e).sum()
    }
}

/// DP cell a plan was read from: chain index, stage count, devices used.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub j: usize,
    pub s: usize,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub stages: Vec<Stage>,
    pub edges: Vec<(usize, usize)>,
    pub metrics: Option<PlanMetrics>,
    pub provenance: Option<Provenance>,
}

impl Plan {
    /// A linear pipeline over `stages`.
    pub fn chain(stages: Vec<Stage>) -> Self {
        let edges = (1..stages.len()).map(|i| (i - 1, i)).collect();
        Plan {
            stages,
            edges,
            metrics: None,
            provenance: None,
        }
    }

    pub fn is_chain(&self) -> bool {
        self.edges.len() + 1 == self.stages.len().max(1)
            && self.edges.iter().enumerate().all(|(i, &e)| e == (i, i + 1))
    }

    pub fn device_count(&self) -> usize {
        self.stages.iter().map(|s| s.devices.len()).sum()
    }

    pub fn devices(&self) -> impl Iterator<Item = &DeviceId> {
        self.stages.iter().flat_map(|s| s.devices.iter())
    }

    /// Number of steps in the 1F1B step list.
    pub fn steps(&self) -> usize {
        2 * self.stages.len() - 1
    }
}

/// A stage with graph and device indices resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedStage {
    pub nodes: Vec<usize>,
    pub devices: Vec<usize>,
    pub units: Vec<u32>,
    pub tp_degree: u32,
}

impl ResolvedStage {
    /// Half-open unit range handled by replica `r`.
    pub fn unit_range(&self, r: usize) -> (u32, u32) {
        let start: u32 = self.units[..r].iter().sum();
        (start, start + self.units[r])
    }
}

/// Index-resolved linear plan.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedPlan {
    pub stages: Vec<ResolvedStage>,
}

/// Activation bytes per reference unit crossing each stage boundary.
/// Outputs of a stage that are consumed further down the pipeline are
/// relayed through every intermediate boundary.
pub fn boundary_bytes(graph: &ModelGraph, stages: &[ResolvedStage]) -> Vec<u64> {
    let mut stage_of = vec![usize::MAX; graph.len()];
    for (s, st) in stages.iter().enumerate() {
        for &v in &st.nodes {
            stage_of[v] = s;
        }
    }
    let mut cut = vec![0u64; stages.len().saturating_sub(1)];
    for (s, st) in stages.iter().enumerate() {
        for &v in &st.nodes {
            let last = graph
                .successors(v)
                .iter()
                .map(|&w| stage_of[w])
                .filter(|&t| t != usize::MAX && t > s)
                .max();
            if let Some(last) = last {
                for c in &mut cut[s..last] {
                    *c += graph.node(v).activation_bytes;
                }
            }
        }
    }
    cut
}

impl ResolvedPlan {
    pub fn boundary_bytes(&self, graph: &ModelGraph) -> Vec<u64> {
        boundary_bytes(graph, &self.stages)
    }

    pub fn devices(&self) -> impl Iterator<Item = usize> + '_ {
        self.stages.iter().flat_map(|s| s.devices.iter().copied())
    }
}

/// Checks a plan against a graph, environment and workload, returning the
/// index form used by the estimator, scheduler and simulator.
pub fn resolve_plan(plan: &Plan, graph: &ModelGraph, env: &Environment, workload: &Workload) -> Result<ResolvedPlan> {
    if plan.stages.is_empty() {
        return Err(Error::InvalidPlan("plan has no stages".into()));
    }
    if !plan.is_chain() {
        return Err(Error::NonChainPlan);
    }
    let mut seen_nodes = vec![false; graph.len()];
    let mut seen_devices = BTreeSet::new();
    let mut stages = Vec::with_capacity(plan.stages.len());
    for (si, st) in plan.stages.iter().enumerate() {
        if st.devices.is_empty() {
            return Err(Error::InvalidPlan(format!("stage {si} has no devices")));
        }
        if st.devices.len() != st.batch_alloc.len() {
            return Err(Error::InvalidPlan(format!("stage {si}: batch allocation does not match devices")));
        }
        if st.batch_alloc.iter().sum::<u32>() != workload.units_per_microbatch {
            return Err(Error::InvalidPlan(format!(
                "stage {si}: batch allocation does not sum to {}",
                workload.units_per_microbatch
            )));
        }
        if st.tp_degree == 0 || (st.tp_degree > 1 && st.devices.len() != 1) {
            return Err(Error::InvalidPlan(format!("stage {si}: invalid tensor-parallel degree")));
        }
        let mut nodes = Vec::with_capacity(st.nodes.len());
        for id in &st.nodes {
            let v = graph.index_of(id).ok_or_else(|| Error::UnknownNode(id.0.clone()))?;
            if core::mem::replace(&mut seen_nodes[v], true) {
                return Err(Error::InvalidPlan(format!("node `{id}` assigned twice")));
            }
            nodes.push(v);
        }
        let mut devices = Vec::with_capacity(st.devices.len());
        for id in &st.devices {
            let d = env.require_device(id)?;
            if !seen_devices.insert(d) {
                return Err(Error::InvalidPlan(format!("device `{id}` used by several stages")));
            }
            devices.push(d);
        }
        stages.push(ResolvedStage {
            nodes,
            devices,
            units: st.batch_alloc.clone(),
            tp_degree: st.tp_degree,
        });
    }
    if let Some(v) = (0..graph.len()).find(|&v| !seen_nodes[v] && !graph.node(v).is_virtual) {
        return Err(Error::InvalidPlan(format!("node `{}` is not assigned", graph.node(v).id)));
    }
    let mut stage_of = vec![usize::MAX; graph.len()];
    for (s, st) in stages.iter().enumerate() {
        for &v in &st.nodes {
            stage_of[v] = s;
        }
    }
    for &(u, v) in graph.edges() {
        if stage_of[u] != usize::MAX && stage_of[v] != usize::MAX && stage_of[u] > stage_of[v] {
            return Err(Error::InvalidPlan(format!(
                "edge {} -> {} runs against the pipeline",
                graph.node(u).id,
                graph.node(v).id
            )));
        }
    }
    Ok(ResolvedPlan { stages })
}

/// Convert an index-form plan back to identifiers.
pub fn unresolve(rp: &ResolvedPlan, graph: &ModelGraph, env: &Environment) -> Plan {
    Plan::chain(
        rp.stages
            .iter()
            .map(|st| Stage {
                nodes: st.nodes.iter().map(|&v| graph.node(v).id.clone()).collect(),
                devices: st.devices.iter().map(|&d| env.device(d).id.clone()).collect(),
                batch_alloc: st.units.clone(),
                tp_degree: st.tp_degree,
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::fixtures::uniform_env;
    use crate::graph::{build_model_graph, LayerNode};

    fn chain3() -> ModelGraph {
        build_model_graph(
            vec![
                LayerNode::new("a", 10, 100),
                LayerNode::new("b", 10, 200),
                LayerNode::new("c", 10, 300),
            ],
            vec![("a".into(), "b".into()), ("b".into(), "c".into())],
        )
        .unwrap()
    }

    fn st(nodes: &[&str], devs: &[&str], alloc: &[u32]) -> Stage {
        Stage::new(
            nodes.iter().map(|&n| n.into()).collect(),
            devs.iter().map(|&d| d.into()).collect(),
            alloc.to_vec(),
        )
    }

    #[test]
    fn resolve_and_cut_bytes() {
        let g = chain3();
        let env = uniform_env(&["a", "b", "c"], &[1.0, 1.0, 1.0], 1e9, None);
        let wl = Workload {
            microbatches: 4,
            units_per_microbatch: 2,
        };
        let p = Plan::chain(vec![st(&["a"], &["d0"], &[2]), st(&["b", "c"], &["d1", "d2"], &[1, 1])]);
        let rp = resolve_plan(&p, &g, &env, &wl).unwrap();
        assert_eq!(rp.boundary_bytes(&g), vec![100]);
        assert_eq!(rp.stages[1].unit_range(1), (1, 2));
        assert_eq!(unresolve(&rp, &g, &env), p);
    }

    #[test]
    fn skip_connection_is_relayed() {
        let g = build_model_graph(
            vec![
                LayerNode::new("a", 1, 5),
                LayerNode::new("b", 1, 7),
                LayerNode::new("c", 1, 9),
            ],
            vec![
                ("a".into(), "b".into()),
                ("b".into(), "c".into()),
                ("a".into(), "c".into()),
            ],
        )
        .unwrap();
        let env = uniform_env(&["a", "b", "c"], &[1.0, 1.0, 1.0], 1e9, None);
        let wl = Workload::default();
        let p = Plan::chain(vec![st(&["a"], &["d0"], &[1]), st(&["b"], &["d1"], &[1]), st(&["c"], &["d2"], &[1])]);
        let rp = resolve_plan(&p, &g, &env, &wl).unwrap();
        assert_eq!(rp.boundary_bytes(&g), vec![5, 12]);
    }

    #[test]
    fn invalid_plans() {
        let g = chain3();
        let env = uniform_env(&["a", "b", "c"], &[1.0, 1.0], 1e9, None);
        let wl = Workload::default();
        let missing = Plan::chain(vec![st(&["a", "b"], &["d0"], &[1])]);
        assert!(matches!(resolve_plan(&missing, &g, &env, &wl), Err(Error::InvalidPlan(_))));
        let reversed = Plan::chain(vec![st(&["b", "c"], &["d0"], &[1]), st(&["a"], &["d1"], &[1])]);
        assert!(matches!(resolve_plan(&reversed, &g, &env, &wl), Err(Error::InvalidPlan(_))));
        let shared = Plan::chain(vec![st(&["a"], &["d0"], &[1]), st(&["b", "c"], &["d0"], &[1])]);
        assert!(matches!(resolve_plan(&shared, &g, &env, &wl), Err(Error::InvalidPlan(_))));
        let mut branchy = Plan::chain(vec![st(&["a"], &["d0"], &[1]), st(&["b", "c"], &["d1"], &[1])]);
        branchy.edges.clear();
        assert_eq!(resolve_plan(&branchy, &g, &env, &wl), Err(Error::NonChainPlan));
    }
}
