//! Discrete-event simulation of plan execution.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::env::{DeviceId, DomainId, Environment, QoeSpec, Workload};
use crate::error::{Error, Result};
use crate::graph::ModelGraph;
use crate::net::cep::{build_cep_graph, CepGraph, TaskKind};
use crate::net::schedule::{by_priority, Schedule};
use crate::plan::{resolve_plan, Plan, ResolvedPlan};

#[derive(Clone, Debug, PartialEq)]
pub enum TraceEventKind {
    BwChange { domain: DomainId, new_capacity: f64 },
    /// Speed multiplier relative to the profiled speed.
    ComputeScale { device: DeviceId, factor: f64 },
    DeviceLeave { device: DeviceId },
    DeviceJoin { device: DeviceId },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceEvent {
    pub t: f64,
    pub kind: TraceEventKind,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DynamicsTrace {
    events: Vec<TraceEvent>,
}

impl DynamicsTrace {
    pub fn new(events: Vec<TraceEvent>) -> Result<Self> {
        for w in events.windows(2) {
            if w[1].t < w[0].t {
                return Err(Error::InvalidArgument("trace times must be non-decreasing".into()));
            }
        }
        for e in &events {
            if !(e.t >= 0.0) {
                return Err(Error::InvalidArgument("trace times must be non-negative".into()));
            }
            match e.kind {
                TraceEventKind::ComputeScale { factor, .. } if !(factor > 0.0) => {
                    return Err(Error::InvalidArgument("compute scale factors must be positive".into()));
                }
                TraceEventKind::BwChange { new_capacity, .. } if !(new_capacity >= 0.0) => {
                    return Err(Error::InvalidArgument("capacities must be non-negative".into()));
                }
                _ => {}
            }
        }
        Ok(DynamicsTrace { events })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }
}

/// How a contention domain is shared among concurrent transfers.
#[derive(Clone, Copy, Debug)]
pub enum SharePolicy<'a> {
    /// Max-min fair share with per-pair peak caps.
    FairShare,
    /// Critical-path priority, each transfer saturated in turn.
    Priority,
    /// Replays the chunk order of a chunked schedule.
    Chunked(&'a Schedule),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimelineEntry {
    pub task: usize,
    pub iteration: u32,
    pub label: String,
    pub resource: String,
    pub start: f64,
    pub finish: f64,
    /// Seconds during which the task made progress.
    pub active: f64,
    /// Power drawn while active.
    pub power: f64,
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimResult {
    pub makespan: f64,
    pub per_device_energy: Vec<(DeviceId, f64)>,
    pub iteration_latencies: Vec<f64>,
    pub timeline: Vec<TimelineEntry>,
    pub events: usize,
}

impl SimResult {
    pub fn total_energy(&self) -> f64 {
        self.per_device_energy.iter().map(|(_, e)| e).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BudgetViolation {
    pub device: DeviceId,
    pub energy: f64,
    pub budget: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveReport {
    pub value: f64,
    pub violations: Vec<BudgetViolation>,
}

/// Energy plus the latency penalty of a simulated run, with per-device
/// budget overruns listed.
pub fn measure_objective(result: &SimResult, qoe: &QoeSpec, env: &Environment) -> ObjectiveReport {
    let value = result.total_energy() + qoe.lambda * (result.makespan - qoe.t_qoe).max(0.0);
    let violations = result
        .per_device_energy
        .iter()
        .filter_map(|(id, e)| {
            let budget = env.device(env.device_index(id)?).energy_budget;
            (*e > budget).then(|| BudgetViolation {
                device: id.clone(),
                energy: *e,
                budget,
            })
        })
        .collect();
    ObjectiveReport { value, violations }
}

/// Simulates a plan; transfers follow the schedule's chunk order when one
/// is given and fair-share the medium otherwise.
pub fn simulate(
    plan: &Plan,
    graph: &ModelGraph,
    env: &Environment,
    workload: &Workload,
    schedule: Option<&Schedule>,
    iterations: u32,
    trace: &DynamicsTrace,
) -> Result<SimResult> {
    let rp = resolve_plan(plan, graph, env, workload)?;
    let policy = match schedule {
        Some(s) if !s.chunks.is_empty() => SharePolicy::Chunked(s),
        Some(_) => SharePolicy::Priority,
        None => SharePolicy::FairShare,
    };
    simulate_resolved(&rp, graph, env, workload, policy, iterations, trace)
}

pub fn simulate_resolved(
    rp: &ResolvedPlan,
    graph: &ModelGraph,
    env: &Environment,
    workload: &Workload,
    policy: SharePolicy<'_>,
    iterations: u32,
    trace: &DynamicsTrace,
) -> Result<SimResult> {
    let cep = build_cep_graph(rp, graph, env, workload)?;
    simulate_cep(&cep, env, policy, iterations, trace)
}

const EPS: f64 = 1e-12;

/// Water-filling of `cap` over demands capped by `peaks`.
pub fn max_min_share(cap: f64, peaks: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..peaks.len()).collect();
    order.sort_by(|&a, &b| peaks[a].total_cmp(&peaks[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; peaks.len()];
    let mut left = cap.max(0.0);
    for (k, &i) in order.iter().enumerate() {
        let share = left / (peaks.len() - k) as f64;
        out[i] = peaks[i].min(share);
        left -= out[i];
    }
    out
}

struct ChunkState {
    /// Per domain, chunks in replay order (task, bits, scheduled rate).
    queues: Vec<VecDeque<(usize, f64, f64)>>,
    /// Remaining bits of the chunk in flight per task.
    in_flight: Vec<Option<f64>>,
    /// Scheduled rate of the chunk in flight per task.
    planned: Vec<f64>,
    chunks_left: Vec<usize>,
}

/// Runs a CEP graph for `iterations` back-to-back iterations.
pub fn simulate_cep(
    g: &CepGraph,
    env0: &Environment,
    policy: SharePolicy<'_>,
    iterations: u32,
    trace: &DynamicsTrace,
) -> Result<SimResult> {
    let n = g.len();
    let n_dev = env0.devices().len();
    let mut env = env0.clone();
    let base_speed: Vec<f64> = (0..n_dev).map(|d| env0.speed(d)).collect();
    let prio = g.critical_path(&g.nominal_durations(env0));
    let order = by_priority(&prio);
    let power: Vec<f64> = g
        .tasks
        .iter()
        .map(|t| match t.kind {
            TaskKind::Compute { .. } => {
                if t.duration > 0.0 {
                    t.energy / t.duration
                } else {
                    0.0
                }
            }
            TaskKind::Comm { src, dst, .. } => env0.device(src).comm_power + env0.device(dst).comm_power,
        })
        .collect();
    let mut uses_device = vec![false; n_dev];
    for t in &g.tasks {
        match t.kind {
            TaskKind::Compute { device } => uses_device[device] = true,
            TaskKind::Comm { src, dst, .. } => {
                uses_device[src] = true;
                uses_device[dst] = true;
            }
        }
    }

    let mut t_now = 0.0f64;
    let mut next_event = 0usize;
    let trace_ev = trace.events();
    let mut energy = vec![0.0; n_dev];
    let mut busy = vec![0.0; n_dev];
    let mut timeline = Vec::with_capacity(n * iterations as usize);
    let mut latencies = Vec::with_capacity(iterations as usize);
    let mut events = 0usize;

    for it in 0..iterations {
        let it_start = t_now;
        let mut waiting: Vec<usize> = (0..n).map(|t| g.preds(t).len()).collect();
        let mut remaining: Vec<f64> = g
            .tasks
            .iter()
            .map(|t| if t.is_comm() { t.bytes * 8.0 } else { t.duration })
            .collect();
        let mut start = vec![f64::NAN; n];
        let mut active_time = vec![0.0; n];
        let mut done = vec![false; n];
        let mut device_task: Vec<Option<usize>> = vec![None; n_dev];
        let mut ready: Vec<usize> = (0..n).filter(|&t| waiting[t] == 0).collect();
        let mut comm_active: Vec<usize> = Vec::new();
        let mut rate = vec![0.0; n];
        let mut n_done = 0usize;
        let mut chunks = match policy {
            SharePolicy::Chunked(s) => {
                let mut queues = vec![VecDeque::new(); env.n_domains()];
                let mut chunks_left = vec![0usize; n];
                for c in &s.chunks {
                    if let Some(TaskKind::Comm { domain: Some(d), .. }) = g.tasks.get(c.task).map(|t| t.kind) {
                        queues[d].push_back((c.task, c.bytes * 8.0, c.bw));
                        chunks_left[c.task] += 1;
                    }
                }
                Some(ChunkState {
                    queues,
                    in_flight: vec![None; n],
                    planned: vec![0.0; n],
                    chunks_left,
                })
            }
            _ => None,
        };

        while n_done < n {
            // trace events due now
            while next_event < trace_ev.len() && trace_ev[next_event].t <= t_now {
                let ev = &trace_ev[next_event];
                env.apply_event(&ev.kind)?;
                events += 1;
                next_event += 1;
                if let TraceEventKind::DeviceLeave { device } = &ev.kind {
                    let d = env.require_device(device)?;
                    if uses_device[d] {
                        let task = (0..n)
                            .find(|&t| !done[t] && task_on(g, t, d))
                            .unwrap_or(0);
                        return Err(Error::DeadDevice {
                            task,
                            device: device.0.clone(),
                        });
                    }
                }
            }

            ready.sort_by(&order);
            let mut still = Vec::new();
            let mut instant = Vec::new();
            for &t in &ready {
                match g.tasks[t].kind {
                    TaskKind::Compute { device } => {
                        if device_task[device].is_none() {
                            device_task[device] = Some(t);
                            start[t] = t_now;
                        } else {
                            still.push(t);
                        }
                    }
                    TaskKind::Comm { .. } => {
                        if remaining[t] <= 0.0 {
                            instant.push(t);
                        } else {
                            comm_active.push(t);
                        }
                    }
                }
            }
            ready = still;
            if !instant.is_empty() {
                for t in instant {
                    start[t] = t_now;
                    finish_task(g, t, t_now, &mut done, &mut n_done, &mut waiting, &mut ready);
                    push_entry(&mut timeline, g, &env, t, it, t_now, t_now, 0.0, power[t]);
                }
                continue;
            }

            // transfer rates
            comm_active.sort_by(&order);
            for &t in &comm_active {
                rate[t] = 0.0;
            }
            match &mut chunks {
                None => assign_rates(g, &env, &policy, &comm_active, &mut rate),
                Some(cs) => assign_chunk_rates(g, &env, cs, &comm_active, &mut rate),
            }
            for &t in &comm_active {
                if rate[t] > 0.0 && start[t].is_nan() {
                    start[t] = t_now;
                }
            }

            // next event
            let mut t_next = trace_ev.get(next_event).map_or(f64::INFINITY, |e| e.t);
            for d in 0..n_dev {
                if let Some(t) = device_task[d] {
                    let r = env.speed(d) / base_speed[d];
                    t_next = t_next.min(t_now + remaining[t] / r);
                }
            }
            for &t in &comm_active {
                if rate[t] > 0.0 {
                    let bits = match &chunks {
                        Some(cs) => cs.in_flight[t].unwrap_or(remaining[t]),
                        None => remaining[t],
                    };
                    t_next = t_next.min(t_now + bits / rate[t]);
                }
            }
            if !t_next.is_finite() {
                let task = comm_active.first().copied().unwrap_or(0);
                return Err(Error::UnschedulableTask { task });
            }
            let dt = t_next - t_now;
            events += 1;

            let mut finished = Vec::new();
            for d in 0..n_dev {
                if let Some(t) = device_task[d] {
                    let r = env.speed(d) / base_speed[d];
                    let ends = t_now + remaining[t] / r;
                    remaining[t] -= r * dt;
                    active_time[t] += dt;
                    if ends <= t_next || remaining[t] <= EPS * g.tasks[t].duration {
                        remaining[t] = 0.0;
                        device_task[d] = None;
                        finished.push(t);
                    }
                }
            }
            let mut keep = Vec::with_capacity(comm_active.len());
            for &t in &comm_active {
                if rate[t] > 0.0 {
                    active_time[t] += dt;
                    let total = g.tasks[t].bytes * 8.0;
                    match &mut chunks {
                        Some(cs) => {
                            let bits = cs.in_flight[t].expect("rated chunk in flight");
                            let ends = t_now + bits / rate[t];
                            let left = bits - rate[t] * dt;
                            remaining[t] -= rate[t] * dt;
                            if ends <= t_next || left <= EPS * total {
                                cs.in_flight[t] = None;
                                cs.chunks_left[t] -= 1;
                                if cs.chunks_left[t] == 0 {
                                    remaining[t] = 0.0;
                                    finished.push(t);
                                    continue;
                                }
                            } else {
                                cs.in_flight[t] = Some(left);
                            }
                        }
                        None => {
                            let ends = t_now + remaining[t] / rate[t];
                            remaining[t] -= rate[t] * dt;
                            if ends <= t_next || remaining[t] <= EPS * total {
                                remaining[t] = 0.0;
                                finished.push(t);
                                continue;
                            }
                        }
                    }
                }
                keep.push(t);
            }
            comm_active = keep;
            t_now = t_next;
            finished.sort_unstable();
            for t in finished {
                finish_task(g, t, t_now, &mut done, &mut n_done, &mut waiting, &mut ready);
                push_entry(&mut timeline, g, &env, t, it, start[t], t_now, active_time[t], power[t]);
            }
        }
        for e in timeline.iter().filter(|e| e.iteration == it) {
            let t = &g.tasks[e.task];
            match t.kind {
                TaskKind::Compute { device } => {
                    energy[device] += e.energy;
                    busy[device] += e.active;
                }
                TaskKind::Comm { src, dst, .. } => {
                    energy[src] += e.active * env0.device(src).comm_power;
                    energy[dst] += e.active * env0.device(dst).comm_power;
                }
            }
        }
        latencies.push(t_now - it_start);
    }
    let per_device_energy = (0..n_dev)
        .filter(|&d| uses_device[d])
        .map(|d| {
            (
                env0.device(d).id.clone(),
                energy[d] + env0.device(d).idle_power * (t_now - busy[d]).max(0.0),
            )
        })
        .collect();
    Ok(SimResult {
        makespan: t_now,
        per_device_energy,
        iteration_latencies: latencies,
        timeline,
        events,
    })
}

fn task_on(g: &CepGraph, t: usize, d: usize) -> bool {
    match g.tasks[t].kind {
        TaskKind::Compute { device } => device == d,
        TaskKind::Comm { src, dst, .. } => src == d || dst == d,
    }
}

fn finish_task(
    g: &CepGraph,
    t: usize,
    _at: f64,
    done: &mut [bool],
    n_done: &mut usize,
    waiting: &mut [usize],
    ready: &mut Vec<usize>,
) {
    done[t] = true;
    *n_done += 1;
    for &s in g.succs(t) {
        waiting[s] -= 1;
        if waiting[s] == 0 {
            ready.push(s);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn push_entry(
    timeline: &mut Vec<TimelineEntry>,
    g: &CepGraph,
    env: &Environment,
    t: usize,
    iteration: u32,
    start: f64,
    finish: f64,
    active: f64,
    power: f64,
) {
    let task = &g.tasks[t];
    let resource = match task.kind {
        TaskKind::Compute { device } => env.device(device).id.0.clone(),
        TaskKind::Comm { domain: Some(d), .. } => env.domain_id(d).0.clone(),
        TaskKind::Comm { .. } => String::from("local"),
    };
    timeline.push(TimelineEntry {
        task: t,
        iteration,
        label: task.label(),
        resource,
        start: if start.is_nan() { finish } else { start },
        finish,
        active,
        power,
        energy: active * power,
    });
}

fn assign_rates(g: &CepGraph, env: &Environment, policy: &SharePolicy<'_>, active: &[usize], rate: &mut [f64]) {
    let mut by_domain: Vec<Vec<usize>> = vec![Vec::new(); env.n_domains()];
    for &t in active {
        if let TaskKind::Comm { domain: Some(d), .. } = g.tasks[t].kind {
            by_domain[d].push(t);
        }
    }
    for (d, tasks) in by_domain.iter().enumerate() {
        let cap = env.domain_capacity(d);
        let peaks: Vec<f64> = tasks.iter().map(|&t| pair_peak(g, env, t)).collect();
        match policy {
            SharePolicy::FairShare => {
                for (&t, r) in tasks.iter().zip(max_min_share(cap, &peaks)) {
                    rate[t] = r;
                }
            }
            _ => {
                let mut left = cap;
                for (&t, &p) in tasks.iter().zip(&peaks) {
                    rate[t] = p.min(left).max(0.0);
                    left -= rate[t];
                }
            }
        }
    }
}

fn pair_peak(g: &CepGraph, env: &Environment, t: usize) -> f64 {
    match g.tasks[t].kind {
        TaskKind::Comm { src, dst, .. } => env.peak_bw(src, dst).unwrap_or(0.0).max(0.0),
        TaskKind::Compute { .. } => 0.0,
    }
}

/// Starts queued chunks in strict replay order and rates the chunks in
/// flight at their pair peak, scaled down when the domain is oversubscribed.
fn assign_chunk_rates(g: &CepGraph, env: &Environment, cs: &mut ChunkState, active: &[usize], rate: &mut [f64]) {
    let mut is_active = vec![false; g.len()];
    for &t in active {
        is_active[t] = true;
    }
    for d in 0..cs.queues.len() {
        let cap = env.domain_capacity(d);
        let mut used: f64 = (0..g.len())
            .filter(|&t| cs.in_flight[t].is_some() && domain_of(g, t) == Some(d))
            .map(|t| cs.planned[t].min(cap))
            .sum();
        while let Some(&(t, bits, bw)) = cs.queues[d].front() {
            if !is_active[t] || cs.in_flight[t].is_some() {
                break;
            }
            let want = bw.min(pair_peak(g, env, t)).min(cap);
            if want <= 0.0 || (used > 0.0 && used + want > cap * (1.0 + 1e-9)) {
                break;
            }
            cs.queues[d].pop_front();
            cs.in_flight[t] = Some(bits);
            cs.planned[t] = want;
            used += want;
        }
        let flying: Vec<usize> = (0..g.len())
            .filter(|&t| cs.in_flight[t].is_some() && domain_of(g, t) == Some(d))
            .collect();
        let want: Vec<f64> = flying.iter().map(|&t| cs.planned[t].min(cap)).collect();
        let total: f64 = want.iter().sum();
        let scale = if total > cap && total > 0.0 { cap / total } else { 1.0 };
        for (&t, w) in flying.iter().zip(want) {
            rate[t] = w * scale;
        }
    }
}

fn domain_of(g: &CepGraph, t: usize) -> Option<usize> {
    match g.tasks[t].kind {
        TaskKind::Comm { domain, .. } => domain,
        TaskKind::Compute { .. } => None,
    }
}
