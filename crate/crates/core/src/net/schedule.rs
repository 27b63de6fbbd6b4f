//! Event-driven malleable bandwidth scheduling of a CEP graph.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::cep::{CepGraph, TaskKind};
use crate::env::Environment;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub finish: f64,
}

/// Constant allocation over `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BwSegment {
    pub start: f64,
    pub end: f64,
    pub bw: f64,
}

/// One chunk of a transfer sent at a fixed rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Chunk {
    pub task: usize,
    pub index: usize,
    pub start: f64,
    pub finish: f64,
    pub bw: f64,
    pub bytes: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Schedule {
    pub intervals: Vec<Interval>,
    /// Piecewise-constant allocation per task (empty for compute tasks).
    pub bw: Vec<Vec<BwSegment>>,
    /// Chunk placement, present after chunking.
    pub chunks: Vec<Chunk>,
    /// Chunks per transfer; zero for a fractional schedule.
    pub chunks_per_transfer: usize,
    pub makespan: f64,
}

impl Schedule {
    /// Bits sent by task `t` up to time `at`.
    pub fn bits_sent(&self, t: usize, at: f64) -> f64 {
        self.bw[t]
            .iter()
            .map(|s| (at.min(s.end) - s.start).max(0.0) * s.bw)
            .sum()
    }

    /// Earliest time task `t` has sent `bits`.
    pub fn time_of_bits(&self, t: usize, bits: f64) -> f64 {
        let mut acc = 0.0;
        for s in &self.bw[t] {
            let here = (s.end - s.start) * s.bw;
            if acc + here >= bits * (1.0 - 1e-12) {
                return if s.bw > 0.0 {
                    (s.start + (bits - acc).max(0.0) / s.bw).min(s.end)
                } else {
                    s.start
                };
            }
            acc += here;
        }
        self.intervals[t].finish
    }
}

pub(crate) const EPS: f64 = 1e-12;

pub(crate) fn push_segment(segs: &mut Vec<BwSegment>, start: f64, end: f64, bw: f64) {
    if end <= start || bw <= 0.0 {
        return;
    }
    if let Some(last) = segs.last_mut() {
        if last.end == start && last.bw == bw {
            last.end = end;
            return;
        }
    }
    segs.push(BwSegment { start, end, bw });
}

/// Sort key: descending priority, then ascending id.
pub(crate) fn by_priority(prio: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| prio[b].total_cmp(&prio[a]).then(a.cmp(&b))
}

pub(crate) fn check_schedulable(g: &CepGraph, env: &Environment) -> Result<()> {
    for t in g.comm_tasks() {
        let TaskKind::Comm { src, dst, domain } = t.kind else { continue };
        if t.bytes <= 0.0 {
            continue;
        }
        let Some(d) = domain else {
            return Err(Error::NoRoute {
                src: env.device(src).id.0.clone(),
                dst: env.device(dst).id.0.clone(),
            });
        };
        if env.domain_capacity(d) <= 0.0 || env.peak_bw(src, dst).map_or(true, |bw| bw <= 0.0) {
            return Err(Error::UnschedulableTask { task: t.id });
        }
    }
    Ok(())
}

/// Schedules all tasks, giving each domain's capacity to ready transfers in
/// descending critical-path order, each saturated to its peak before the
/// next is served. Allocations are revisited at every event.
///
/// Priorities start from nominal durations; they are then recomputed from
/// the durations each transfer actually took, and the shortest of these
/// schedules is kept.
pub fn solve_schedule(g: &CepGraph, env: &Environment) -> Result<Schedule> {
    let mut best = solve_with_priority(g, env, &g.critical_path(&g.nominal_durations(env)))?;
    if g.comm_tasks().count() == 0 {
        return Ok(best);
    }
    let mut last = best.clone();
    for _ in 0..REFINE_ROUNDS {
        let seen: Vec<f64> = last.intervals.iter().map(|iv| iv.finish - iv.start).collect();
        last = solve_with_priority(g, env, &g.critical_path(&seen))?;
        if last.makespan < best.makespan {
            best = last.clone();
        }
    }
    Ok(best)
}

const REFINE_ROUNDS: usize = 3;

pub fn solve_with_priority(g: &CepGraph, env: &Environment, prio: &[f64]) -> Result<Schedule> {
    check_schedulable(g, env)?;
    let n = g.len();
    let mut waiting: Vec<usize> = (0..n).map(|t| g.preds(t).len()).collect();
    let mut started = vec![false; n];
    let mut done = vec![false; n];
    let mut remaining: Vec<f64> = g.tasks.iter().map(|t| t.bytes * 8.0).collect();
    let mut finish_at = vec![f64::INFINITY; n];
    let mut sched = Schedule {
        intervals: vec![Interval::default(); n],
        bw: vec![Vec::new(); n],
        ..Schedule::default()
    };
    let n_dev = env.devices().len();
    let mut device_busy: Vec<Option<usize>> = vec![None; n_dev];
    let mut ready: Vec<usize> = (0..n).filter(|&t| waiting[t] == 0).collect();
    let mut active: Vec<usize> = Vec::new();
    let mut rate = vec![0.0; n];
    let mut t_now = 0.0f64;
    let mut n_done = 0;
    let order = by_priority(prio);

    while n_done < n {
        // start compute tasks and instant transfers
        ready.sort_by(&order);
        let mut still = Vec::new();
        let mut instant = Vec::new();
        for &t in &ready {
            match g.tasks[t].kind {
                TaskKind::Compute { device } => {
                    if device_busy[device].is_none() {
                        device_busy[device] = Some(t);
                        started[t] = true;
                        sched.intervals[t].start = t_now;
                        finish_at[t] = t_now + g.tasks[t].duration;
                    } else {
                        still.push(t);
                    }
                }
                TaskKind::Comm { .. } => {
                    if remaining[t] <= 0.0 {
                        instant.push(t);
                    } else {
                        active.push(t);
                    }
                }
            }
        }
        ready = still;
        if !instant.is_empty() {
            for t in instant {
                sched.intervals[t] = Interval { start: t_now, finish: t_now };
                done[t] = true;
                n_done += 1;
                for &s in g.succs(t) {
                    waiting[s] -= 1;
                    if waiting[s] == 0 {
                        ready.push(s);
                    }
                }
            }
            continue;
        }

        // allocate bandwidth per domain
        active.sort_by(&order);
        let mut left: Vec<f64> = (0..env.n_domains()).map(|d| env.domain_capacity(d)).collect();
        for &t in &active {
            let TaskKind::Comm { src, dst, domain } = g.tasks[t].kind else { unreachable!() };
            let d = domain.expect("checked");
            let bw = env.peak_bw(src, dst).unwrap_or(0.0).min(left[d]).max(0.0);
            left[d] -= bw;
            rate[t] = bw;
            if bw > 0.0 && !started[t] {
                started[t] = true;
                sched.intervals[t].start = t_now;
            }
        }

        // next event
        let mut t_next = f64::INFINITY;
        for dev in device_busy.iter().flatten() {
            t_next = t_next.min(finish_at[*dev]);
        }
        for &t in &active {
            if rate[t] > 0.0 {
                t_next = t_next.min(t_now + remaining[t] / rate[t]);
            }
        }
        if !t_next.is_finite() {
            return Err(Error::InvalidArgument("schedule made no progress".into()));
        }

        // advance
        let mut finished = Vec::new();
        for d in 0..n_dev {
            if let Some(t) = device_busy[d] {
                if finish_at[t] <= t_next {
                    device_busy[d] = None;
                    finished.push(t);
                }
            }
        }
        let mut keep = Vec::with_capacity(active.len());
        for &t in &active {
            if rate[t] > 0.0 {
                push_segment(&mut sched.bw[t], t_now, t_next, rate[t]);
                let ends = t_now + remaining[t] / rate[t];
                remaining[t] -= rate[t] * (t_next - t_now);
                if ends <= t_next || remaining[t] <= EPS * g.tasks[t].bytes * 8.0 {
                    remaining[t] = 0.0;
                    finished.push(t);
                    continue;
                }
            }
            keep.push(t);
        }
        active = keep;
        t_now = t_next;
        finished.sort_unstable();
        for t in finished {
            sched.intervals[t].finish = t_now;
            done[t] = true;
            n_done += 1;
            for &s in g.succs(t) {
                waiting[s] -= 1;
                if waiting[s] == 0 {
                    ready.push(s);
                }
            }
        }
    }
    sched.makespan = sched.intervals.iter().map(|i| i.finish).fold(0.0, f64::max);
    Ok(sched)
}
