mod common;

use common::{chain_model, env_for, rng};
use edgeplan_core::env::{CostEntry, CostProfile, Device, DeviceId, Environment, Link, QoeSpec, Topology, Workload};
use edgeplan_core::graph::{serial_decompose, with_virtual_terminals, ModelGraph};
use edgeplan_core::partition::{objective_value, partition_search};
use edgeplan_core::Error;
use proptest::prelude::*;
use rand::Rng;

/// `env` plus one device slower than every other on every layer, with no
/// idle draw and fast private links.
fn with_laggard(env: &Environment, graph: &ModelGraph) -> Environment {
    let id = DeviceId("laggard".into());
    let mut devices: Vec<Device> = env.devices().to_vec();
    devices.push(Device::new(id.clone(), 1 << 40));
    let mut profile = CostProfile::new();
    for (layer, dev, e) in env.profile().iter() {
        profile.insert(layer.clone(), dev.clone(), *e);
    }
    for node in graph.nodes() {
        let worst = env
            .profile()
            .iter()
            .filter(|(l, _, _)| **l == node.id)
            .fold(CostEntry::default(), |a, (_, _, e)| CostEntry {
                fwd_time: a.fwd_time.max(e.fwd_time),
                bwd_time: a.bwd_time.max(e.bwd_time),
                fwd_energy: a.fwd_energy.max(e.fwd_energy),
                bwd_energy: a.bwd_energy.max(e.bwd_energy),
                mem: a.mem.max(e.mem),
            });
        let slow = CostEntry {
            fwd_time: worst.fwd_time * 10.0,
            bwd_time: worst.bwd_time * 10.0,
            fwd_energy: worst.fwd_energy * 10.0,
            bwd_energy: worst.bwd_energy * 10.0,
            mem: worst.mem,
        };
        profile.insert(node.id.clone(), id.clone(), slow);
    }
    let mut topology: Topology = env.topology().clone();
    for d in env.devices() {
        for (src, dst) in [(d.id.clone(), id.clone()), (id.clone(), d.id.clone())] {
            topology.links.push(Link { src, dst, peak_bw: 1e10 });
        }
    }
    let mut out = Environment::new(devices, topology, profile).unwrap();
    out.assign_ranks(graph);
    out
}

fn best(graph: &ModelGraph, env: &Environment, wl: &Workload, qoe: &QoeSpec) -> Option<f64> {
    let comps = serial_decompose(graph).unwrap();
    match partition_search(graph, &comps, env, wl, qoe, 1) {
        Ok(plans) => plans.first().map(|p| objective_value(p, qoe).unwrap()),
        Err(Error::NoFeasiblePlan) => None,
        Err(e) => panic!("{e}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn an_extra_slow_device_never_hurts(seed in any::<u64>()) {
        let mut r = rng(seed);
        let nodes = r.gen_range(1..=5);
        let graph = with_virtual_terminals(&chain_model(&mut r, nodes));
        let devices = r.gen_range(1..=3);
        let env = env_for(&mut r, &graph, devices, false);
        let wl = Workload { microbatches: r.gen_range(1..=6), units_per_microbatch: r.gen_range(1..=3) };
        let qoe = QoeSpec { t_qoe: r.gen_range(0.1..5.0), lambda: [0.0, 1.0, 100.0][r.gen_range(0..3)] };
        let more = with_laggard(&env, &graph);
        prop_assert_eq!(more.active_rank_order().last().copied(), Some(devices));
        let (a, b) = (best(&graph, &env, &wl, &qoe), best(&graph, &more, &wl, &qoe));
        if let Some(a) = a {
            let b = b.expect("a superset of devices keeps every plan");
            prop_assert!(b <= a * (1.0 + 1e-12), "objective rose from {a} to {b}");
        }
    }
}
