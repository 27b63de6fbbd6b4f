//! Seeded random planning instances.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::doc::{DeviceDoc, DomainDoc, EnvDoc, LinkDoc, ModelDoc, NodeDoc, ProfileDoc, QoeDoc};

pub struct Instance {
    pub model: ModelDoc,
    pub env: EnvDoc,
    pub qoe: QoeDoc,
}

/// A layer chain on devices sharing one wireless medium. The same seed
/// always yields the same documents.
pub fn random_instance(seed: u64, layers: usize, devices: usize) -> Instance {
    let mut rng = StdRng::seed_from_u64(seed);
    let nodes: Vec<NodeDoc> = (0..layers)
        .map(|i| NodeDoc {
            id: format!("l{i}"),
            param_bytes: rng.gen_range(1..=64) * 1_000_000,
            activation_bytes: rng.gen_range(1..=16) * 250_000,
        })
        .collect();
    let edges = (1..layers).map(|i| (format!("l{}", i - 1), format!("l{i}"))).collect();
    let cap = rng.gen_range(100..=1000) as f64 * 1e6;
    let mut devs = Vec::new();
    let mut profile = Vec::new();
    for d in 0..devices {
        let id = format!("dev{d}");
        let speed = rng.gen_range(0.5..2.0f64);
        let power = rng.gen_range(5.0..60.0f64);
        for n in &nodes {
            let fwd = n.param_bytes as f64 / 1e9 / speed;
            profile.push(ProfileDoc {
                layer: n.id.clone(),
                device: id.clone(),
                fwd_s: fwd,
                bwd_s: 2.0 * fwd,
                fwd_j: power * fwd,
                bwd_j: power * 2.0 * fwd,
                mem_bytes: 3 * n.param_bytes,
            });
        }
        devs.push(DeviceDoc {
            id,
            memory_bytes: rng.gen_range(1..=8) * 1_000_000_000,
            energy_budget_j: f64::INFINITY,
            idle_power_w: power * 0.1,
            comm_power_w: rng.gen_range(1.0..3.0),
            rank: 0,
            present: true,
            tensor_parallel: None,
        });
    }
    let mut links = Vec::new();
    let mut members = Vec::new();
    for a in &devs {
        for b in &devs {
            if a.id != b.id {
                links.push(LinkDoc {
                    src: a.id.clone(),
                    dst: b.id.clone(),
                    peak_bps: cap,
                });
                members.push((a.id.clone(), b.id.clone()));
            }
        }
    }
    Instance {
        model: ModelDoc {
            schema: "edgeplan.model/1".into(),
            name: Some(format!("random-{seed}")),
            edges,
            nodes,
        },
        env: EnvDoc {
            schema: "edgeplan.env/1".into(),
            name: Some(format!("random-{seed}")),
            devices: devs,
            domains: vec![DomainDoc {
                id: "wifi".into(),
                capacity_bps: cap,
                members,
            }],
            links,
            profile,
        },
        qoe: QoeDoc {
            schema: "edgeplan.qoe/1".into(),
            t_qoe_s: 60.0,
            lambda: 1.0,
            microbatches: rng.gen_range(4..=16),
            units_per_microbatch: 4,
            merge_delta: 0.0,
        },
    }
}
