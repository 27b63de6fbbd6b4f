#![allow(dead_code)]

use edgeplan_core::env::{ContentionDomain, CostEntry, CostProfile, Device, DeviceId, Environment, Link, Topology, Workload};
use edgeplan_core::graph::{build_model_graph, LayerNode, ModelGraph, NodeId};
use edgeplan_core::plan::{ResolvedPlan, ResolvedStage};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

pub struct Case {
    pub graph: ModelGraph,
    pub env: Environment,
    pub workload: Workload,
    pub plan: ResolvedPlan,
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Linear model `L0 -> L1 -> ...`.
pub fn chain_model(rng: &mut StdRng, n: usize) -> ModelGraph {
    let layers: Vec<LayerNode> = (0..n)
        .map(|i| LayerNode::new(format!("L{i}").as_str(), rng.gen_range(1_000_000..20_000_000), rng.gen_range(100_000..4_000_000)))
        .collect();
    let edges = (1..n).map(|i| (NodeId(format!("L{}", i - 1)), NodeId(format!("L{i}")))).collect();
    build_model_graph(layers, edges).unwrap()
}

/// Fully linked devices; `shared` puts every pair in one domain whose
/// capacity is below the fastest link.
pub fn env_for(rng: &mut StdRng, graph: &ModelGraph, devices: usize, shared: bool) -> Environment {
    let ids: Vec<DeviceId> = (0..devices).map(|i| DeviceId(format!("d{i}"))).collect();
    let devs = ids
        .iter()
        .map(|id| {
            let mut d = Device::new(id.clone(), 1 << 40);
            d.idle_power = rng.gen_range(0.0..5.0);
            d.comm_power = rng.gen_range(0.0..2.0);
            d
        })
        .collect();
    let mut profile = CostProfile::new();
    for id in &ids {
        let speed = rng.gen_range(0.5..3.0);
        let power = rng.gen_range(10.0..100.0);
        for node in graph.nodes() {
            let fwd = rng.gen_range(0.02..0.2) / speed;
            let bwd = fwd * rng.gen_range(1.5..2.5);
            let entry = CostEntry {
                fwd_time: fwd,
                bwd_time: bwd,
                fwd_energy: fwd * power,
                bwd_energy: bwd * power,
                mem: node.param_bytes * 3,
            };
            profile.insert(node.id.clone(), id.clone(), entry);
        }
    }
    let mut links = Vec::new();
    let mut members = Vec::new();
    let mut fastest = 0.0f64;
    for a in &ids {
        for b in &ids {
            if a != b {
                let peak_bw = rng.gen_range(1e8..1e9);
                fastest = fastest.max(peak_bw);
                links.push(Link {
                    src: a.clone(),
                    dst: b.clone(),
                    peak_bw,
                });
                members.push((a.clone(), b.clone()));
            }
        }
    }
    let domains = if shared {
        vec![ContentionDomain {
            id: "air".into(),
            capacity: fastest * rng.gen_range(0.5..1.0),
            members,
        }]
    } else {
        Vec::new()
    };
    let mut env = Environment::new(devs, Topology { domains, links }, profile).unwrap();
    env.assign_ranks(graph);
    env
}

/// Random linear plan: contiguous node ranges on disjoint device groups,
/// groups of more than one device only when `dp`.
pub fn random_plan(rng: &mut StdRng, graph: &ModelGraph, devices: usize, workload: &Workload, dp: bool) -> ResolvedPlan {
    let n = graph.len();
    let max_stages = n.min(devices).min((workload.microbatches as usize + 1) / 2).max(1);
    let stages = rng.gen_range(1..=max_stages);
    let mut cuts: Vec<usize> = (1..n).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<usize> = cuts[..stages - 1].to_vec();
    cuts.sort_unstable();
    let mut bounds = vec![0];
    bounds.extend(cuts);
    bounds.push(n);
    let mut pool: Vec<usize> = (0..devices).collect();
    pool.shuffle(rng);
    let spare = devices - stages;
    let mut extra = vec![0usize; stages];
    if dp {
        for _ in 0..spare {
            if rng.gen_bool(0.6) {
                extra[rng.gen_range(0..stages)] += 1;
            }
        }
    }
    let units = workload.units_per_microbatch;
    let mut at = 0;
    let stages = (0..stages)
        .map(|s| {
            let want = (1 + extra[s]).min(units as usize);
            let group = pool[at..at + want].to_vec();
            at += want;
            let k = group.len() as u32;
            let split = (0..k).map(|r| units / k + u32::from(r < units % k)).collect();
            ResolvedStage {
                nodes: (bounds[s]..bounds[s + 1]).collect(),
                devices: group,
                units: split,
                tp_degree: 1,
            }
        })
        .collect();
    ResolvedPlan { stages }
}

pub fn case(seed: u64, shared: bool, dp: bool) -> Case {
    let mut rng = rng(seed);
    let nodes = rng.gen_range(1..=6);
    let graph = chain_model(&mut rng, nodes);
    let devices = rng.gen_range(1..=4);
    let env = env_for(&mut rng, &graph, devices, shared);
    let workload = Workload {
        microbatches: rng.gen_range(1..=6),
        units_per_microbatch: rng.gen_range(1..=4),
    };
    let plan = random_plan(&mut rng, &graph, devices, &workload, dp);
    Case { graph, env, workload, plan }
}
