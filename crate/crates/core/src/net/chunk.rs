//! Temporal emulation of fractional bandwidth shares by fixed-rate chunks.

use alloc::vec;
use alloc::vec::Vec;

use super::cep::{CepGraph, TaskKind};
use super::schedule::{by_priority, check_schedulable, push_segment, Chunk, Interval, Schedule};
use crate::env::Environment;
use crate::error::{Error, Result};

pub const DEFAULT_CHUNKS: usize = 8;

/// Splits every transfer of `fractional` into `w` equal chunks, each sent at
/// one fixed rate. Chunks are placed non-preemptively in the order in which
/// the fractional schedule completes the matching share of each transfer. A
/// domain serves the earliest-due ready chunk at the pair's full rate, or
/// at the capacity left over when that covers the rate the fractional
/// schedule gave the chunk's bits or finishes the chunk sooner than waiting
/// for the full rate.
pub fn chunkify(g: &CepGraph, env: &Environment, fractional: &Schedule, w: usize) -> Result<Schedule> {
    if w == 0 {
        return Err(Error::InvalidArgument("chunk count must be at least 1".into()));
    }
    check_schedulable(g, env)?;
    let n = g.len();
    let due: Vec<Vec<f64>> = g
        .tasks
        .iter()
        .map(|t| {
            if !t.is_comm() || t.bytes <= 0.0 {
                return Vec::new();
            }
            let bits = t.bytes * 8.0;
            (0..w)
                .map(|k| fractional.time_of_bits(t.id, bits * (k + 1) as f64 / w as f64))
                .collect()
        })
        .collect();
    let prio = g.critical_path(&g.nominal_durations(env));
    let order = by_priority(&prio);

    let mut waiting: Vec<usize> = (0..n).map(|t| g.preds(t).len()).collect();
    let mut sched = Schedule {
        intervals: vec![Interval::default(); n],
        bw: vec![Vec::new(); n],
        chunks_per_transfer: w,
        ..Schedule::default()
    };
    let mut device_busy: Vec<Option<usize>> = vec![None; env.devices().len()];
    let mut finish_at = vec![f64::INFINITY; n];
    let mut next_chunk = vec![0usize; n];
    // running chunks: (task, chunk index, start, finish, bw)
    let mut running: Vec<(usize, usize, f64, f64, f64)> = Vec::new();
    let mut in_flight = vec![false; n];
    let mut ready: Vec<usize> = (0..n).filter(|&t| waiting[t] == 0).collect();
    let mut comm_ready: Vec<usize> = Vec::new();
    let mut t_now = 0.0f64;
    let mut n_done = 0;

    while n_done < n {
        ready.sort_by(&order);
        let mut still = Vec::new();
        let mut instant = Vec::new();
        for &t in &ready {
            match g.tasks[t].kind {
                TaskKind::Compute { device } => {
                    if device_busy[device].is_none() {
                        device_busy[device] = Some(t);
                        sched.intervals[t].start = t_now;
                        finish_at[t] = t_now + g.tasks[t].duration;
                    } else {
                        still.push(t);
                    }
                }
                TaskKind::Comm { .. } => {
                    if g.tasks[t].bytes <= 0.0 {
                        instant.push(t);
                    } else {
                        comm_ready.push(t);
                    }
                }
            }
        }
        ready = still;
        if !instant.is_empty() {
            for t in instant {
                sched.intervals[t] = Interval { start: t_now, finish: t_now };
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

        // place chunks
        let mut left: Vec<f64> = (0..env.n_domains()).map(|d| env.domain_capacity(d)).collect();
        for &(t, _, _, _, bw) in &running {
            if let TaskKind::Comm { domain: Some(d), .. } = g.tasks[t].kind {
                left[d] -= bw;
            }
        }
        let mut cands: Vec<usize> = comm_ready.iter().copied().filter(|&t| !in_flight[t]).collect();
        cands.sort_by(|&a, &b| {
            due[a][next_chunk[a]]
                .total_cmp(&due[b][next_chunk[b]])
                .then(prio[b].total_cmp(&prio[a]))
                .then(a.cmp(&b))
        });
        for t in cands {
            let TaskKind::Comm { src, dst, domain } = g.tasks[t].kind else { unreachable!() };
            let d = domain.expect("checked");
            let full = env.peak_bw(src, dst).unwrap_or(0.0).min(env.domain_capacity(d));
            let bits = g.tasks[t].bytes * 8.0 / w as f64;
            if full <= 0.0 || left[d] <= full * 1e-9 {
                continue;
            }
            let k = next_chunk[t];
            let since = if k == 0 { fractional.intervals[t].start } else { due[t][k - 1] };
            let planned = bits / (due[t][k] - since).max(f64::MIN_POSITIVE);
            let bw = if left[d] >= full * (1.0 - 1e-9) {
                full
            } else if left[d] >= planned * (1.0 - 1e-9) {
                left[d]
            } else {
                // take the leftover when that beats waiting for the full rate
                let mut frees: Vec<(f64, f64)> = running
                    .iter()
                    .filter(|r| matches!(g.tasks[r.0].kind, TaskKind::Comm { domain: Some(x), .. } if x == d))
                    .map(|r| (r.3, r.4))
                    .collect();
                frees.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut avail = left[d];
                let mut t_free = f64::INFINITY;
                for (at, freed) in frees {
                    avail += freed;
                    if avail >= full * (1.0 - 1e-9) {
                        t_free = at;
                        break;
                    }
                }
                if t_now + bits / left[d] > t_free + bits / full {
                    continue;
                }
                left[d]
            };
            left[d] -= bw;
            if k == 0 {
                sched.intervals[t].start = t_now;
            }
            running.push((t, k, t_now, t_now + bits / bw, bw));
            in_flight[t] = true;
        }

        let mut t_next = f64::INFINITY;
        for t in device_busy.iter().flatten() {
            t_next = t_next.min(finish_at[*t]);
        }
        for r in &running {
            t_next = t_next.min(r.3);
        }
        if !t_next.is_finite() {
            return Err(Error::InvalidArgument("chunked schedule made no progress".into()));
        }

        let mut finished = Vec::new();
        for slot in device_busy.iter_mut() {
            if let Some(t) = *slot {
                if finish_at[t] <= t_next {
                    *slot = None;
                    finished.push(t);
                }
            }
        }
        let mut keep = Vec::with_capacity(running.len());
        for r in running {
            let (t, k, start, end, bw) = r;
            if end <= t_next {
                in_flight[t] = false;
                push_segment(&mut sched.bw[t], start, end, bw);
                sched.chunks.push(Chunk {
                    task: t,
                    index: k,
                    start,
                    finish: end,
                    bw,
                    bytes: g.tasks[t].bytes / w as f64,
                });
                next_chunk[t] += 1;
                if next_chunk[t] == w {
                    comm_ready.retain(|&x| x != t);
                    finished.push(t);
                }
            } else {
                keep.push(r);
            }
        }
        running = keep;
        t_now = t_next;
        finished.sort_unstable();
        for t in finished {
            sched.intervals[t].finish = t_now;
            n_done += 1;
            for &s in g.succs(t) {
                waiting[s] -= 1;
                if waiting[s] == 0 {
                    ready.push(s);
                }
            }
        }
    }
    sched.chunks.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.task.cmp(&b.task)).then(a.index.cmp(&b.index)));
    sched.makespan = sched.intervals.iter().map(|i| i.finish).fold(0.0, f64::max);
    Ok(sched)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::schedule::solve_schedule;
    use crate::net::schedule::tests::{comm, shared_env};

    #[test]
    fn single_chunk_occupies_domain() {
        let env = shared_env(2, 1e8, 1e8);
        let g = CepGraph::new(vec![comm(0, 0, 1, 12.5e6, &env)], vec![]).unwrap();
        let s = chunkify(&g, &env, &solve_schedule(&g, &env).unwrap(), 1).unwrap();
        assert_eq!(s.chunks.len(), 1);
        assert!((s.makespan - 1.0).abs() < 1e-12);
    }

    #[test]
    fn four_quarter_chunks() {
        let env = shared_env(2, 1e8, 1e8);
        let g = CepGraph::new(vec![comm(0, 0, 1, 12.5e6, &env)], vec![]).unwrap();
        let s = chunkify(&g, &env, &solve_schedule(&g, &env).unwrap(), 4).unwrap();
        assert_eq!(s.chunks.len(), 4);
        for c in &s.chunks {
            assert!((c.finish - c.start - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn chunks_follow_fractional_order() {
        let env = shared_env(3, 1e8, 1e8);
        let g = CepGraph::new(vec![comm(0, 0, 1, 12.5e6, &env), comm(1, 0, 2, 12.5e6, &env)], vec![]).unwrap();
        let frac = solve_schedule(&g, &env).unwrap();
        let s = chunkify(&g, &env, &frac, 8).unwrap();
        assert!((s.makespan - frac.makespan).abs() <= frac.makespan / 8.0);
    }
}
