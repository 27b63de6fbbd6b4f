//! Feasibility sweeps over schedules.

use alloc::vec;
use alloc::vec::Vec;

use super::cep::{CepGraph, TaskKind};
use super::schedule::Schedule;
use crate::env::Environment;

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Bandwidth { domain: usize, at: f64, used: f64, capacity: f64 },
    PeakRate { task: usize, bw: f64, peak: f64 },
    Dependency { before: usize, after: usize },
    BitsMismatch { task: usize, sent: f64, expected: f64 },
    ComputeDuration { task: usize },
    DeviceOverlap { device: usize, a: usize, b: usize },
    ChunkRate { task: usize, index: usize },
}

const TOL: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL * a.abs().max(b.abs()).max(1.0)
}

/// Every violated schedule invariant; empty when the schedule is feasible.
pub fn verify_schedule(g: &CepGraph, env: &Environment, s: &Schedule) -> Vec<Violation> {
    let mut out = Vec::new();
    for &(a, b) in &g.deps {
        if s.intervals[a].finish > s.intervals[b].start + TOL * s.makespan.max(1.0) {
            out.push(Violation::Dependency { before: a, after: b });
        }
    }
    let mut per_device: Vec<Vec<usize>> = vec![Vec::new(); env.devices().len()];
    for t in &g.tasks {
        let iv = s.intervals[t.id];
        match t.kind {
            TaskKind::Compute { device } => {
                if !close(iv.finish - iv.start, t.duration) {
                    out.push(Violation::ComputeDuration { task: t.id });
                }
                per_device[device].push(t.id);
            }
            TaskKind::Comm { src, dst, .. } => {
                let sent: f64 = s.bw[t.id].iter().map(|x| (x.end - x.start) * x.bw).sum();
                if !close(sent, t.bytes * 8.0) {
                    out.push(Violation::BitsMismatch {
                        task: t.id,
                        sent,
                        expected: t.bytes * 8.0,
                    });
                }
                let peak = env.peak_bw(src, dst).unwrap_or(0.0);
                if let Some(x) = s.bw[t.id].iter().find(|x| x.bw > peak * (1.0 + TOL)) {
                    out.push(Violation::PeakRate {
                        task: t.id,
                        bw: x.bw,
                        peak,
                    });
                }
            }
        }
    }
    for (device, tasks) in per_device.iter_mut().enumerate() {
        tasks.sort_by(|&a, &b| s.intervals[a].start.total_cmp(&s.intervals[b].start));
        for w in tasks.windows(2) {
            let (a, b) = (w[0], w[1]);
            if s.intervals[a].finish > s.intervals[b].start + TOL * s.makespan.max(1.0) && s.intervals[a].finish > s.intervals[a].start {
                out.push(Violation::DeviceOverlap { device, a, b });
            }
        }
    }
    for c in &s.chunks {
        if !close((c.finish - c.start) * c.bw, c.bytes * 8.0) {
            out.push(Violation::ChunkRate {
                task: c.task,
                index: c.index,
            });
        }
    }
    // capacity sweep at every segment start
    let mut by_domain: Vec<Vec<(f64, f64, f64)>> = vec![Vec::new(); env.n_domains()];
    for t in g.comm_tasks() {
        if let TaskKind::Comm { domain: Some(d), .. } = t.kind {
            for x in &s.bw[t.id] {
                by_domain[d].push((x.start, x.end, x.bw));
            }
        }
    }
    for (d, segs) in by_domain.iter().enumerate() {
        let cap = env.domain_capacity(d);
        for &(at, _, _) in segs {
            let used: f64 = segs.iter().filter(|x| x.0 <= at && at < x.1).map(|x| x.2).sum();
            if used > cap * (1.0 + TOL) {
                out.push(Violation::Bandwidth {
                    domain: d,
                    at,
                    used,
                    capacity: cap,
                });
                break;
            }
        }
    }
    out
}
