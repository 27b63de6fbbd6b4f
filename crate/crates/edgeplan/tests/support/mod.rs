//! Random instances and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use edgeplan_core::adapt::PlanProfile;
use edgeplan_core::env::{
    unit_time, ContentionDomain, CostEntry, CostProfile, Device, DeviceId, Environment, Link, QoeSpec, TensorParallel,
    Topology, Workload,
};
use edgeplan_core::estimate::estimate_resolved;
use edgeplan_core::graph::{build_model_graph, serial_decompose, with_virtual_terminals, ChainComponent, LayerNode, ModelGraph};
use edgeplan_core::net::cep::{CepTask, Direction};
use edgeplan_core::net::{build_cep_graph, CepGraph, TaskKind};
use edgeplan_core::partition::{balance_microbatches, objective_of};
use edgeplan_core::plan::{ResolvedPlan, ResolvedStage};
use edgeplan_core::Error;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

pub struct Instance {
    pub graph: ModelGraph,
    pub components: Vec<ChainComponent>,
    pub env: Environment,
    pub workload: Workload,
    pub qoe: QoeSpec,
}

impl Instance {
    pub fn max_stages(&self) -> usize {
        self.env
            .active_rank_order()
            .len()
            .min((self.workload.microbatches as usize + 1) / 2)
    }
}

/// A chain of `n` layers, or with `branched` two parallel branches between
/// the first and last layer.
pub fn random_model(rng: &mut StdRng, n: usize, branched: bool) -> ModelGraph {
    let ids: Vec<String> = (0..n).map(|i| format!("L{i}")).collect();
    let layers = ids
        .iter()
        .map(|id| LayerNode::new(id.as_str(), rng.gen_range(1_000_000..40_000_000), rng.gen_range(100_000..4_000_000)))
        .collect();
    let mut edges = Vec::new();
    if branched && n >= 4 {
        let split = rng.gen_range(1..n - 1);
        let (a, b): (Vec<usize>, Vec<usize>) = (1..n - 1).partition(|&i| i <= split);
        for branch in [a, b] {
            if branch.is_empty() {
                edges.push((0, n - 1));
                continue;
            }
            edges.push((0, branch[0]));
            edges.extend(branch.windows(2).map(|w| (w[0], w[1])));
            edges.push((*branch.last().unwrap(), n - 1));
        }
    } else {
        edges.extend((1..n).map(|i| (i - 1, i)));
    }
    let edges = edges
        .into_iter()
        .map(|(a, b)| (ids[a].as_str().into(), ids[b].as_str().into()))
        .collect();
    build_model_graph(layers, edges).unwrap()
}

#[derive(Clone, Copy, Debug)]
pub struct EnvOpts {
    pub devices: usize,
    /// All pairs share one medium.
    pub shared: bool,
    pub tp: bool,
    pub tight_memory: bool,
}

pub fn random_env(rng: &mut StdRng, graph: &ModelGraph, o: EnvOpts) -> Environment {
    let n = o.devices;
    let ids: Vec<DeviceId> = (0..n).map(|i| DeviceId(format!("d{i}"))).collect();
    let speed: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..3.0)).collect();
    let power: Vec<f64> = (0..n).map(|_| rng.gen_range(10.0..120.0)).collect();
    let mut profile = CostProfile::new();
    let mut need = 0u64;
    for node in graph.nodes().iter().filter(|v| !v.is_virtual) {
        let base = rng.gen_range(0.02..0.2);
        let mem = node.param_bytes * 3 + node.activation_bytes * 2;
        need += mem + node.param_bytes;
        for d in 0..n {
            let fwd = base / speed[d] * rng.gen_range(0.8..1.25);
            let bwd = fwd * rng.gen_range(1.5..2.5);
            profile.insert(
                node.id.0.as_str(),
                ids[d].clone(),
                CostEntry {
                    fwd_time: fwd,
                    bwd_time: bwd,
                    fwd_energy: power[d] * fwd,
                    bwd_energy: power[d] * bwd,
                    mem,
                },
            );
        }
    }
    let devices = (0..n)
        .map(|d| {
            let cap = if o.tight_memory {
                (need as f64 / n as f64 * rng.gen_range(1.2..2.5)) as u64
            } else {
                1 << 40
            };
            let mut dev = Device::new(ids[d].clone(), cap);
            dev.idle_power = rng.gen_range(0.0..8.0);
            dev.comm_power = rng.gen_range(0.0..3.0);
            if o.tp && d == 0 && rng.gen_bool(0.5) {
                dev.tensor_parallel = Some(TensorParallel {
                    degree: 2,
                    speedup: rng.gen_range(1.4..1.9),
                    mem_divisor: 2.0,
                });
            }
            dev
        })
        .collect();
    let mut links = Vec::new();
    let mut members = Vec::new();
    let mut top = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            if a != b {
                let peak = rng.gen_range(100e6..1e9);
                top = top.max(peak);
                links.push(Link {
                    src: ids[a].clone(),
                    dst: ids[b].clone(),
                    peak_bw: peak,
                });
                members.push((ids[a].clone(), ids[b].clone()));
            }
        }
    }
    let domains = if o.shared && n > 1 {
        vec![ContentionDomain {
            id: "air".into(),
            capacity: top * rng.gen_range(0.5..1.0),
            members,
        }]
    } else {
        Vec::new()
    };
    let mut env = Environment::new(devices, Topology { domains, links }, profile).unwrap();
    env.assign_ranks(graph);
    env
}

/// Wraps a raw model with terminals, decomposition and a QoE target set
/// around the single-device latency of the fastest device.
pub fn instance(rng: &mut StdRng, raw: &ModelGraph, o: EnvOpts, workload: Workload) -> Instance {
    let graph = with_virtual_terminals(raw);
    let components = serial_decompose(&graph).unwrap();
    let env = random_env(rng, &graph, o);
    let all: Vec<usize> = (0..graph.len()).collect();
    let fastest = (0..env.devices().len())
        .filter_map(|d| unit_time(&env, &graph, &all, d))
        .fold(f64::INFINITY, f64::min);
    let t_ref = fastest * workload.microbatches as f64 * workload.units_per_microbatch as f64;
    let qoe = QoeSpec {
        t_qoe: t_ref * rng.gen_range(0.3..1.2),
        lambda: *[0.0, 10.0, 100.0, 1000.0].choose(rng).unwrap(),
    };
    Instance {
        graph,
        components,
        env,
        workload,
        qoe,
    }
}

/// Chains in the order the partitioner flattens them, as node indices.
pub fn flat_chains(inst: &Instance) -> Vec<Vec<usize>> {
    inst.components
        .iter()
        .flat_map(|c| c.chains.iter())
        .map(|ch| ch.iter().map(|id| inst.graph.index_of(id).unwrap()).collect())
        .collect()
}

/// Every sequence of stage node lists: a stage lies within one chain, or
/// bundles two or more whole consecutive chains.
pub fn segmentations(chains: &[Vec<usize>]) -> Vec<Vec<Vec<usize>>> {
    fn go(chains: &[Vec<usize>], j: usize, l: usize, cur: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if j == chains.len() {
            out.push(cur.clone());
            return;
        }
        let len = chains[j].len();
        for e in l + 1..=len {
            cur.push(chains[j][l..e].to_vec());
            if e == len {
                go(chains, j + 1, 0, cur, out);
            } else {
                go(chains, j, e, cur, out);
            }
            cur.pop();
        }
        if l == 0 {
            for k in j + 1..chains.len() {
                cur.push(chains[j..=k].iter().flatten().copied().collect());
                go(chains, k + 1, 0, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(chains, 0, 0, &mut Vec::new(), &mut out);
    out
}

/// Ordered compositions of `n` into `s` positive parts.
pub fn compositions(n: usize, s: usize) -> Vec<Vec<usize>> {
    if s == 0 {
        return if n == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    let mut out = Vec::new();
    for first in 1..=n.saturating_sub(s - 1) {
        for mut rest in compositions(n - first, s - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn stage_variants(inst: &Instance, nodes: &[usize], devices: &[usize]) -> Vec<ResolvedStage> {
    let b = inst.workload.units_per_microbatch;
    let stage = |units: Vec<u32>, tp_degree: u32| ResolvedStage {
        nodes: nodes.to_vec(),
        devices: devices.to_vec(),
        units,
        tp_degree,
    };
    if devices.len() == 1 {
        let mut v = vec![stage(vec![b], 1)];
        if let Some(tp) = &inst.env.device(devices[0]).tensor_parallel {
            if tp.degree > 1 {
                v.push(stage(vec![b], tp.degree));
            }
        }
        return v;
    }
    let lat: Option<Vec<f64>> = devices.iter().map(|&d| unit_time(&inst.env, &inst.graph, nodes, d)).collect();
    let Some(lat) = lat else { return Vec::new() };
    let units = balance_microbatches(&lat, b);
    if units.contains(&0) {
        return Vec::new();
    }
    vec![stage(units, 1)]
}

/// The partitioner's search space: stage lists over consecutive windows
/// of the rank order starting at the first device.
pub fn phase1_space(inst: &Instance) -> Vec<ResolvedPlan> {
    let order = inst.env.active_rank_order();
    let mut plans = Vec::new();
    for seg in segmentations(&flat_chains(inst)) {
        let s = seg.len();
        if s > inst.max_stages() {
            continue;
        }
        for n in s..=order.len() {
            for sizes in compositions(n, s) {
                let mut stages: Vec<Vec<ResolvedStage>> = vec![Vec::new()];
                let mut lo = 0;
                for (nodes, &k) in seg.iter().zip(&sizes) {
                    let variants = stage_variants(inst, nodes, &order[lo..lo + k]);
                    lo += k;
                    stages = stages
                        .into_iter()
                        .flat_map(|prefix| {
                            variants.iter().map(move |v| {
                                let mut p = prefix.clone();
                                p.push(v.clone());
                                p
                            })
                        })
                        .collect();
                }
                plans.extend(stages.into_iter().map(|stages| ResolvedPlan { stages }));
            }
        }
    }
    plans
}

/// Phase-1 objective of a plan, `None` when it cannot run or does not fit.
pub fn phase1_objective(inst: &Instance, rp: &ResolvedPlan) -> Option<f64> {
    match estimate_resolved(rp, &inst.graph, &inst.env, &inst.workload, 0.0) {
        Ok(e) if e.mem_feasible => Some(objective_of(e.e_consumption, e.t_latency, true, &inst.qoe)),
        Ok(_) => None,
        Err(Error::UnhostableNode { .. } | Error::NoRoute { .. } | Error::PipelineTooDeep { .. }) => None,
        Err(e) => panic!("unexpected estimator error: {e}"),
    }
}

pub fn brute_force_phase1(inst: &Instance) -> Option<(f64, ResolvedPlan)> {
    let mut best: Option<(f64, ResolvedPlan)> = None;
    for rp in phase1_space(inst) {
        if let Some(obj) = phase1_objective(inst, &rp) {
            if best.as_ref().map_or(true, |(b, _)| obj < *b) {
                best = Some((obj, rp));
            }
        }
    }
    best
}

/// A random linear plan over arbitrary disjoint device groups, with
/// data-parallel stages only when `dp` is set.
pub fn random_plan(rng: &mut StdRng, inst: &Instance, dp: bool) -> Option<ResolvedPlan> {
    let chains = flat_chains(inst);
    let segs: Vec<_> = segmentations(&chains)
        .into_iter()
        .filter(|s| s.len() <= inst.max_stages())
        .collect();
    let seg = segs.choose(rng)?.clone();
    let mut devices: Vec<usize> = inst.env.active_rank_order();
    devices.shuffle(rng);
    let spare = devices.len() - seg.len();
    let mut stages = Vec::new();
    let mut next = 0;
    let mut extra = if dp { rng.gen_range(0..=spare) } else { 0 };
    for nodes in seg {
        let k = if extra > 0 { rng.gen_range(0..=extra) } else { 0 };
        extra -= k;
        let group = devices[next..next + 1 + k].to_vec();
        next += 1 + k;
        let mut v = stage_variants(inst, &nodes, &group);
        if v.is_empty() {
            v = stage_variants(inst, &nodes, &group[..1]);
        }
        stages.push(v.choose(rng)?.clone());
    }
    Some(ResolvedPlan { stages })
}

/// Priority relation built up one needed comparison at a time.
#[derive(Clone)]
pub struct Order {
    before: Vec<Vec<bool>>,
}

impl Order {
    pub fn empty(n: usize) -> Self {
        Order {
            before: vec![vec![false; n]; n],
        }
    }

    /// Descending priority with ties by id.
    pub fn from_priority(prio: &[f64]) -> Self {
        let n = prio.len();
        let mut o = Order::empty(n);
        for a in 0..n {
            for b in 0..n {
                o.before[a][b] = a != b && (prio[a] > prio[b] || (prio[a] == prio[b] && a < b));
            }
        }
        o
    }

    fn cmp(&self, a: usize, b: usize) -> Option<bool> {
        if self.before[a][b] {
            Some(true)
        } else if self.before[b][a] {
            Some(false)
        } else {
            None
        }
    }

    /// Records `a` before `b` and everything implied by transitivity.
    fn add(&mut self, a: usize, b: usize) {
        let n = self.before.len();
        let ups: Vec<usize> = (0..n).filter(|&x| x == a || self.before[x][a]).collect();
        let downs: Vec<usize> = (0..n).filter(|&y| y == b || self.before[b][y]).collect();
        for &x in &ups {
            for &y in &downs {
                self.before[x][y] = true;
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleRun {
    pub start: Vec<f64>,
    pub finish: Vec<f64>,
    /// Seconds each transfer was served at a positive rate.
    pub active: Vec<f64>,
    pub makespan: f64,
}

fn sorted(items: &[usize], ord: &Order) -> Result<Vec<usize>, (usize, usize)> {
    let mut out: Vec<usize> = Vec::with_capacity(items.len());
    for &x in items {
        let mut pos = out.len();
        for (i, &y) in out.iter().enumerate() {
            match ord.cmp(x, y) {
                Some(true) => {
                    pos = i;
                    break;
                }
                Some(false) => {}
                None => return Err((x, y)),
            }
        }
        out.insert(pos, x);
    }
    Ok(out)
}

/// List schedule of `g` under a static priority order: a device runs its
/// most urgent ready task, and each medium serves active transfers in
/// priority order, each at its peak or whatever capacity is left. Returns
/// the first undecided comparison the schedule depends on.
pub fn list_schedule(g: &CepGraph, env: &Environment, ord: &Order) -> Result<OracleRun, (usize, usize)> {
    let n = g.len();
    let mut waiting: Vec<usize> = (0..n).map(|t| g.preds(t).len()).collect();
    let mut ready: Vec<usize> = (0..n).filter(|&t| waiting[t] == 0).collect();
    let mut busy: Vec<Option<usize>> = vec![None; env.devices().len()];
    let mut active: Vec<usize> = Vec::new();
    let mut left_bits: Vec<f64> = g.tasks.iter().map(|t| t.bytes * 8.0).collect();
    let mut run = OracleRun {
        start: vec![f64::NAN; n],
        finish: vec![f64::NAN; n],
        active: vec![0.0; n],
        makespan: 0.0,
    };
    let mut now = 0.0f64;
    let mut done = 0;
    let release = |t: usize, waiting: &mut Vec<usize>, ready: &mut Vec<usize>| {
        for &s in g.succs(t) {
            waiting[s] -= 1;
            if waiting[s] == 0 {
                ready.push(s);
            }
        }
    };
    while done < n {
        // admit ready work until nothing changes at this instant
        loop {
            let mut changed = false;
            let mut rest = Vec::new();
            let mut per_device: Vec<Vec<usize>> = vec![Vec::new(); busy.len()];
            for &t in &ready {
                match g.tasks[t].kind {
                    TaskKind::Compute { device } => per_device[device].push(t),
                    TaskKind::Comm { .. } if g.tasks[t].bytes <= 0.0 => {
                        run.start[t] = now;
                        run.finish[t] = now;
                        done += 1;
                        changed = true;
                        release(t, &mut waiting, &mut rest);
                    }
                    TaskKind::Comm { .. } => {
                        run.start[t] = f64::NAN;
                        active.push(t);
                    }
                }
            }
            for (dev, cands) in per_device.into_iter().enumerate() {
                if cands.is_empty() {
                    continue;
                }
                if busy[dev].is_some() {
                    rest.extend(cands);
                    continue;
                }
                let by = sorted(&cands, ord)?;
                busy[dev] = Some(by[0]);
                run.start[by[0]] = now;
                rest.extend(&by[1..]);
            }
            ready = rest;
            if !changed {
                break;
            }
        }
        if done == n {
            break;
        }
        // allocate each medium in priority order
        let mut rate = vec![0.0; n];
        let mut by_domain: Vec<Vec<usize>> = vec![Vec::new(); env.n_domains()];
        for &t in &active {
            let TaskKind::Comm { domain, .. } = g.tasks[t].kind else { unreachable!() };
            by_domain[domain.expect("routable transfer")].push(t);
        }
        for (d, ts) in by_domain.iter().enumerate() {
            let mut cap = env.domain_capacity(d);
            for t in sorted(ts, ord)? {
                let TaskKind::Comm { src, dst, .. } = g.tasks[t].kind else { unreachable!() };
                let r = env.peak_bw(src, dst).unwrap_or(0.0).min(cap).max(0.0);
                cap -= r;
                rate[t] = r;
                if r > 0.0 && run.start[t].is_nan() {
                    run.start[t] = now;
                }
            }
        }
        let mut next = f64::INFINITY;
        for t in busy.iter().flatten() {
            next = next.min(run.start[*t] + g.tasks[*t].duration);
        }
        for &t in &active {
            if rate[t] > 0.0 {
                next = next.min(now + left_bits[t] / rate[t]);
            }
        }
        assert!(next.is_finite(), "no progress possible");
        let mut finished = Vec::new();
        for slot in busy.iter_mut() {
            if let Some(t) = *slot {
                if run.start[t] + g.tasks[t].duration <= next {
                    *slot = None;
                    finished.push(t);
                }
            }
        }
        active.retain(|&t| {
            if rate[t] <= 0.0 {
                return true;
            }
            let ends = now + left_bits[t] / rate[t];
            left_bits[t] -= rate[t] * (next - now);
            run.active[t] += next - now;
            if ends <= next || left_bits[t] <= 1e-12 * g.tasks[t].bytes * 8.0 {
                finished.push(t);
                false
            } else {
                true
            }
        });
        now = next;
        finished.sort_unstable();
        for t in finished {
            run.finish[t] = now;
            done += 1;
            release(t, &mut waiting, &mut ready);
        }
    }
    run.makespan = run.finish.iter().copied().fold(0.0, f64::max);
    Ok(run)
}

/// Visits one schedule per distinct outcome of every static priority order,
/// branching only on comparisons the schedule consults. Gives up after
/// `limit` leaves and returns `None`.
pub fn exhaustive_orders(g: &CepGraph, env: &Environment, limit: usize, visit: &mut dyn FnMut(&OracleRun)) -> Option<usize> {
    fn go(g: &CepGraph, env: &Environment, ord: Order, limit: usize, leaves: &mut usize, visit: &mut dyn FnMut(&OracleRun)) -> bool {
        match list_schedule(g, env, &ord) {
            Ok(r) => {
                *leaves += 1;
                visit(&r);
                *leaves <= limit
            }
            Err((a, b)) => {
                for (x, y) in [(a, b), (b, a)] {
                    let mut o = ord.clone();
                    o.add(x, y);
                    if !go(g, env, o, limit, leaves, visit) {
                        return false;
                    }
                }
                true
            }
        }
    }
    let mut leaves = 0;
    go(g, env, Order::empty(g.len()), limit, &mut leaves, visit).then_some(leaves)
}

/// Energy of an oracle schedule: compute energy, both endpoints' transfer
/// power while served, idle power for the rest of the makespan.
pub fn oracle_energy(g: &CepGraph, env: &Environment, r: &OracleRun) -> f64 {
    let n = env.devices().len();
    let mut busy = vec![0.0; n];
    let mut used = vec![false; n];
    let mut e = 0.0;
    for t in &g.tasks {
        match t.kind {
            TaskKind::Compute { device } => {
                e += t.energy;
                busy[device] += t.duration;
                used[device] = true;
            }
            TaskKind::Comm { src, dst, .. } => {
                e += r.active[t.id] * (env.device(src).comm_power + env.device(dst).comm_power);
                used[src] = true;
                used[dst] = true;
            }
        }
    }
    e + (0..n)
        .filter(|&d| used[d])
        .map(|d| env.device(d).idle_power * (r.makespan - busy[d]).max(0.0))
        .sum::<f64>()
}

/// Best energy over mixtures of at most two plans on a grid of `step`,
/// `None` when no grid point meets `ep`.
pub fn grid_mix(profiles: &[PlanProfile], delta: f64, ep: f64, step: f64) -> Option<f64> {
    let k = (1.0 / step).round() as usize;
    let useful = |p: &PlanProfile| (delta - p.switch_cost).max(0.0);
    let g: Vec<f64> = profiles.iter().map(|p| p.rate * useful(p)).collect();
    let a: Vec<f64> = profiles.iter().map(|p| p.power * useful(p)).collect();
    let need = ep * (1.0 - 1e-12);
    let mut best: Option<f64> = None;
    let mut offer = |e: f64| {
        if best.map_or(true, |b| e < b) {
            best = Some(e);
        }
    };
    for p in 0..profiles.len() {
        for i in 0..=k {
            let x = i as f64 / k as f64;
            if g[p] * x >= need {
                offer(a[p] * x);
            }
        }
        for q in p + 1..profiles.len() {
            for i in 0..=k {
                for j in 0..=k - i {
                    let (xp, xq) = (i as f64 / k as f64, j as f64 / k as f64);
                    if g[p] * xp + g[q] * xq >= need {
                        offer(a[p] * xp + a[q] * xq);
                    }
                }
            }
        }
    }
    best
}

/// A random DAG of 3 to 8 compute tasks on 2 to 4 devices sharing one
/// medium, with at most 8 transfers between tasks on different devices.
pub fn random_cep(rng: &mut StdRng) -> (CepGraph, Environment) {
    let n_dev = rng.gen_range(2..=4);
    let dummy = random_model(rng, 1, false);
    let env = random_env(
        rng,
        &dummy,
        EnvOpts {
            devices: n_dev,
            shared: true,
            tp: false,
            tight_memory: false,
        },
    );
    let n_compute = rng.gen_range(3..=8);
    let target = rng.gen_range(1..=8);
    let mut tasks: Vec<CepTask> = Vec::new();
    let mut deps = Vec::new();
    let mut compute_ids: Vec<usize> = Vec::new();
    let task = |id: usize, kind: TaskKind, duration: f64, bytes: f64| CepTask {
        id,
        kind,
        step: 0,
        microbatch: 0,
        direction: Direction::Fwd,
        duration,
        bytes,
        energy: duration * 50.0,
        producer: None,
        consumer: None,
    };
    let mut comms = 0;
    for i in 0..n_compute {
        let device = rng.gen_range(0..n_dev);
        let id = tasks.len();
        tasks.push(task(id, TaskKind::Compute { device }, rng.gen_range(0.05..1.0), 0.0));
        if i > 0 {
            let k = rng.gen_range(1..=2.min(i));
            let mut preds: Vec<usize> = (0..i).collect();
            preds.shuffle(rng);
            for &p in &preds[..k] {
                let pid = compute_ids[p];
                let TaskKind::Compute { device: pd } = tasks[pid].kind else { unreachable!() };
                if pd != device && comms < target {
                    let cid = tasks.len();
                    let kind = TaskKind::Comm {
                        src: pd,
                        dst: device,
                        domain: env.domain_of(pd, device),
                    };
                    tasks.push(task(cid, kind, 0.0, rng.gen_range(1e6..2e7)));
                    tasks[cid].energy = 0.0;
                    deps.push((pid, cid));
                    deps.push((cid, id));
                    comms += 1;
                } else {
                    deps.push((pid, id));
                }
            }
        }
        compute_ids.push(id);
    }
    (CepGraph::new(tasks, deps).unwrap(), env)
}

/// CEP graph of a random plan with 1..=8 transfers carrying bytes.
pub fn plan_cep(rng: &mut StdRng) -> Option<(CepGraph, Environment)> {
    let nodes = rng.gen_range(2..=5);
    let raw = random_model(rng, nodes, false);
    let o = EnvOpts {
        devices: rng.gen_range(2..=4),
        shared: true,
        tp: false,
        tight_memory: false,
    };
    let wl = Workload {
        microbatches: rng.gen_range(1..=3),
        units_per_microbatch: rng.gen_range(1..=2),
    };
    let inst = instance(rng, &raw, o, wl);
    let dp = rng.gen_bool(0.3);
    let rp = random_plan(rng, &inst, dp)?;
    let g = build_cep_graph(&rp, &inst.graph, &inst.env, &inst.workload).ok()?;
    let comm = g.comm_tasks().filter(|t| t.bytes > 0.0).count();
    ((1..=8).contains(&comm) && g.comm_tasks().count() <= 8).then_some((g, inst.env))
}
