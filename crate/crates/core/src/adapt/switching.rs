//! Cost of moving from one plan to another.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::env::{DeviceId, Environment};
use crate::error::{Error, Result};
use crate::graph::ModelGraph;
use crate::plan::Plan;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SwitchCost {
    /// Time to stage the missing state on every device, in seconds.
    pub duration: f64,
    /// Part of `duration` that execution actually waits for.
    pub stall: f64,
    pub bytes_moved: u64,
    /// Bytes a full reload of the new plan would move.
    pub full_reload_bytes: u64,
    /// Incoming bytes per device of the new plan.
    pub per_device: Vec<(DeviceId, u64)>,
    /// Missing state with no reachable holder under the old plan.
    pub unsourced_bytes: u64,
}

fn holdings(plan: &Plan, graph: &ModelGraph, env: &Environment) -> Result<Vec<BTreeSet<usize>>> {
    let mut held = vec![BTreeSet::new(); env.devices().len()];
    for stage in &plan.stages {
        let nodes = stage
            .nodes
            .iter()
            .map(|id| graph.index_of(id).ok_or_else(|| Error::UnknownNode(id.0.clone())))
            .collect::<Result<Vec<_>>>()?;
        for d in &stage.devices {
            let d = env.require_device(d)?;
            held[d].extend(nodes.iter().copied());
        }
    }
    Ok(held)
}

/// Moves only the parameters a device lacks under `old`, each pulled from
/// the old holder with the fastest link. Transfers into one device are
/// serial; devices load in parallel. Immutable state (inference) is copied
/// in the background, so only what does not fit in `overlap` seconds
/// stalls execution.
pub fn switching_overhead(
    old: &Plan,
    new: &Plan,
    graph: &ModelGraph,
    env: &Environment,
    mutable_state: bool,
    overlap: f64,
) -> Result<SwitchCost> {
    let before = holdings(old, graph, env)?;
    let after = holdings(new, graph, env)?;
    let mut cost = SwitchCost::default();
    for dst in 0..env.devices().len() {
        if after[dst].is_empty() {
            continue;
        }
        let mut incoming = 0u64;
        let mut secs = 0.0;
        for &v in &after[dst] {
            let bytes = graph.node(v).param_bytes;
            cost.full_reload_bytes += bytes;
            if before[dst].contains(&v) || bytes == 0 {
                continue;
            }
            let src = (0..env.devices().len())
                .filter(|&s| s != dst && before[s].contains(&v) && env.is_present(s))
                .filter_map(|s| env.peak_bw(s, dst).filter(|&bw| bw > 0.0).map(|bw| (s, bw)))
                .fold(None, |acc: Option<(usize, f64)>, x| match acc {
                    Some(a) if a.1 >= x.1 => Some(a),
                    _ => Some(x),
                });
            match src {
                Some((_, bw)) => {
                    incoming += bytes;
                    secs += bytes as f64 * 8.0 / bw;
                }
                None => cost.unsourced_bytes += bytes,
            }
        }
        cost.bytes_moved += incoming;
        cost.duration = cost.duration.max(secs);
        cost.per_device.push((env.device(dst).id.clone(), incoming));
    }
    cost.stall = if mutable_state {
        cost.duration
    } else {
        (cost.duration - overlap).max(0.0)
    };
    Ok(cost)
}
