//! Devices, contention domains, cost profiles and QoE targets.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::graph::{LayerNode, ModelGraph, NodeId};
use crate::sim::TraceEventKind;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DeviceId(pub String);

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DeviceId {
    fn from(s: &str) -> Self {
        DeviceId(s.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DomainId(pub String);

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DomainId {
    fn from(s: &str) -> Self {
        DomainId(s.to_string())
    }
}

/// Co-located accelerators usable for intra-node tensor parallelism.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorParallel {
    pub degree: u32,
    pub speedup: f64,
    pub mem_divisor: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Device {
    pub id: DeviceId,
    pub mem_capacity: u64,
    /// Joules available for one plan execution; `f64::INFINITY` when unbounded.
    pub energy_budget: f64,
    pub idle_power: f64,
    pub comm_power: f64,
    /// 1-based position in the device order used by the partitioner.
    pub rank: u32,
    pub tensor_parallel: Option<TensorParallel>,
}

impl Device {
    pub fn new(id: impl Into<DeviceId>, mem_capacity: u64) -> Self {
        Device {
            id: id.into(),
            mem_capacity,
            energy_budget: f64::INFINITY,
            idle_power: 0.0,
            comm_power: 0.0,
            rank: 0,
            tensor_parallel: None,
        }
    }
}

impl From<String> for DeviceId {
    fn from(s: String) -> Self {
        DeviceId(s)
    }
}

/// Devices pairs sharing one medium of `capacity` bits per second.
#[derive(Clone, Debug, PartialEq)]
pub struct ContentionDomain {
    pub id: DomainId,
    pub capacity: f64,
    pub members: Vec<(DeviceId, DeviceId)>,
}

/// Peak point-to-point bandwidth of a directed pair in isolation.
#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub src: DeviceId,
    pub dst: DeviceId,
    pub peak_bw: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Topology {
    pub domains: Vec<ContentionDomain>,
    pub links: Vec<Link>,
}

/// Cost of one original layer on one device for a reference-size microbatch.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CostEntry {
    pub fwd_time: f64,
    pub bwd_time: f64,
    pub fwd_energy: f64,
    pub bwd_energy: f64,
    pub mem: u64,
}

impl CostEntry {
    fn add(&mut self, o: &CostEntry) {
        self.fwd_time += o.fwd_time;
        self.bwd_time += o.bwd_time;
        self.fwd_energy += o.fwd_energy;
        self.bwd_energy += o.bwd_energy;
        self.mem += o.mem;
    }
}

/// Per-(layer, device) costs. A missing entry means the device cannot host
/// the layer.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CostProfile {
    entries: BTreeMap<NodeId, BTreeMap<DeviceId, CostEntry>>,
}

impl CostProfile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, layer: impl Into<NodeId>, device: impl Into<DeviceId>, entry: CostEntry) {
        self.entries.entry(layer.into()).or_default().insert(device.into(), entry);
    }

    pub fn get(&self, layer: &NodeId, device: &DeviceId) -> Option<&CostEntry> {
        self.entries.get(layer)?.get(device)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, &DeviceId, &CostEntry)> {
        self.entries
            .iter()
            .flat_map(|(l, row)| row.iter().map(move |(d, e)| (l, d, e)))
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QoeSpec {
    pub t_qoe: f64,
    pub lambda: f64,
}

/// Pipeline shape of one iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Workload {
    /// Pipeline microbatches per iteration.
    pub microbatches: u32,
    /// Reference-size units in one pipeline microbatch; split across the
    /// replicas of a data-parallel stage.
    pub units_per_microbatch: u32,
}

impl Default for Workload {
    fn default() -> Self {
        Workload {
            microbatches: 1,
            units_per_microbatch: 1,
        }
    }
}

/// Devices, topology and profile with derived lookup tables and the
/// mutable runtime state touched by dynamics events.
#[derive(Clone, Debug, PartialEq)]
pub struct Environment {
    devices: Vec<Device>,
    topology: Topology,
    profile: CostProfile,
    device_index: BTreeMap<DeviceId, usize>,
    /// Capacities, one per domain, including implicit dedicated domains.
    capacity: Vec<f64>,
    domain_ids: Vec<DomainId>,
    pair_domain: BTreeMap<(usize, usize), usize>,
    peak: BTreeMap<(usize, usize), f64>,
    speed: Vec<f64>,
    present: Vec<bool>,
}

impl Environment {
    pub fn new(devices: Vec<Device>, topology: Topology, profile: CostProfile) -> Result<Self> {
        let mut device_index = BTreeMap::new();
        for (i, d) in devices.iter().enumerate() {
            if device_index.insert(d.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(d.id.0.clone()));
            }
        }
        let lookup = |id: &DeviceId| device_index.get(id).copied().ok_or_else(|| Error::UnknownDevice(id.0.clone()));
        let mut capacity = Vec::new();
        let mut domain_ids = Vec::new();
        let mut pair_domain = BTreeMap::new();
        for dom in &topology.domains {
            if domain_ids.contains(&dom.id) {
                return Err(Error::DuplicateId(dom.id.0.clone()));
            }
            let di = capacity.len();
            capacity.push(dom.capacity);
            domain_ids.push(dom.id.clone());
            for (a, b) in &dom.members {
                pair_domain.entry((lookup(a)?, lookup(b)?)).or_insert(di);
            }
        }
        let mut peak = BTreeMap::new();
        for l in &topology.links {
            let key = (lookup(&l.src)?, lookup(&l.dst)?);
            peak.insert(key, l.peak_bw);
            if !pair_domain.contains_key(&key) {
                // dedicated link
                pair_domain.insert(key, capacity.len());
                capacity.push(l.peak_bw);
                domain_ids.push(DomainId(format!("link:{}->{}", l.src, l.dst)));
            }
        }
        let n = devices.len();
        let mut env = Environment {
            devices,
            topology,
            profile,
            device_index,
            capacity,
            domain_ids,
            pair_domain,
            peak,
            speed: vec![1.0; n],
            present: vec![true; n],
        };
        if env.devices.iter().all(|d| d.rank == 0) {
            env.default_ranks();
        }
        Ok(env)
    }

    pub fn devices(&self) -> &[Device] {
        &self.devices
    }

    pub fn device(&self, i: usize) -> &Device {
        &self.devices[i]
    }

    pub fn device_index(&self, id: &DeviceId) -> Option<usize> {
        self.device_index.get(id).copied()
    }

    pub fn require_device(&self, id: &DeviceId) -> Result<usize> {
        self.device_index(id).ok_or_else(|| Error::UnknownDevice(id.0.clone()))
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn profile(&self) -> &CostProfile {
        &self.profile
    }

    pub fn n_domains(&self) -> usize {
        self.capacity.len()
    }

    pub fn domain_id(&self, d: usize) -> &DomainId {
        &self.domain_ids[d]
    }

    pub fn domain_index(&self, id: &DomainId) -> Option<usize> {
        self.domain_ids.iter().position(|x| x == id)
    }

    pub fn domain_capacity(&self, d: usize) -> f64 {
        self.capacity[d]
    }

    pub fn domain_of(&self, src: usize, dst: usize) -> Option<usize> {
        self.pair_domain.get(&(src, dst)).copied()
    }

    /// Peak rate of a directed pair, capped by its domain's current capacity.
    pub fn peak_bw(&self, src: usize, dst: usize) -> Option<f64> {
        let p = *self.peak.get(&(src, dst))?;
        let cap = self.domain_of(src, dst).map_or(p, |d| self.capacity[d]);
        Some(p.min(cap))
    }

    pub fn peak_bw_or_err(&self, src: usize, dst: usize) -> Result<f64> {
        match self.peak_bw(src, dst) {
            Some(bw) if bw > 0.0 => Ok(bw),
            _ => Err(Error::NoRoute {
                src: self.devices[src].id.0.clone(),
                dst: self.devices[dst].id.0.clone(),
            }),
        }
    }

    /// Nominal peak without domain capping.
    pub fn raw_peak_bw(&self, src: usize, dst: usize) -> Option<f64> {
        self.peak.get(&(src, dst)).copied()
    }

    pub fn speed(&self, device: usize) -> f64 {
        self.speed[device]
    }

    pub fn is_present(&self, device: usize) -> bool {
        self.present[device]
    }

    pub fn set_present(&mut self, device: usize, present: bool) {
        self.present[device] = present;
    }

    pub fn set_domain_capacity(&mut self, d: usize, capacity: f64) {
        self.capacity[d] = capacity;
    }

    pub fn set_speed(&mut self, device: usize, factor: f64) {
        self.speed[device] = factor;
    }

    /// Device indices ordered by rank, ties by id.
    pub fn rank_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.devices.len()).collect();
        order.sort_by(|&a, &b| {
            self.devices[a]
                .rank
                .cmp(&self.devices[b].rank)
                .then_with(|| self.devices[a].id.cmp(&self.devices[b].id))
        });
        order
    }

    /// Present devices in rank order.
    pub fn active_rank_order(&self) -> Vec<usize> {
        self.rank_order().into_iter().filter(|&d| self.present[d]).collect()
    }

    fn default_ranks(&mut self) {
        let mut order: Vec<usize> = (0..self.devices.len()).collect();
        order.sort_by(|&a, &b| self.devices[a].id.cmp(&self.devices[b].id));
        for (r, &i) in order.iter().enumerate() {
            self.devices[i].rank = r as u32 + 1;
        }
    }

    /// Ranks devices by descending single-microbatch throughput on the
    /// heaviest node of `graph`, ties by id. Devices unable to host that
    /// node go last.
    pub fn assign_ranks(&mut self, graph: &ModelGraph) {
        let heaviest = graph
            .topo_order()
            .iter()
            .copied()
            .filter(|&v| !graph.node(v).is_virtual)
            .fold(None::<usize>, |best, v| match best {
                Some(b) if graph.node(b).param_bytes >= graph.node(v).param_bytes => Some(b),
                _ => Some(v),
            });
        let throughput: Vec<f64> = (0..self.devices.len())
            .map(|d| {
                heaviest
                    .and_then(|v| self.node_cost(graph.node(v), d))
                    .map(|c| {
                        let t = c.fwd_time + c.bwd_time;
                        if t > 0.0 {
                            1.0 / t
                        } else {
                            f64::INFINITY
                        }
                    })
                    .unwrap_or(0.0)
            })
            .collect();
        let mut order: Vec<usize> = (0..self.devices.len()).collect();
        order.sort_by(|&a, &b| {
            throughput[b]
                .partial_cmp(&throughput[a])
                .unwrap_or(core::cmp::Ordering::Equal)
                .then_with(|| self.devices[a].id.cmp(&self.devices[b].id))
        });
        for (r, &i) in order.iter().enumerate() {
            self.devices[i].rank = r as u32 + 1;
        }
    }

    /// Aggregated cost of a (possibly merged) node on a device under the
    /// current speed factor. `None` when any constituent layer lacks a
    /// profile entry.
    pub fn node_cost(&self, node: &LayerNode, device: usize) -> Option<CostEntry> {
        if node.is_virtual {
            return Some(CostEntry::default());
        }
        let dev = &self.devices[device].id;
        let mut total = CostEntry::default();
        for layer in &node.original_ids {
            total.add(self.profile.get(layer, dev)?);
        }
        let s = self.speed[device];
        if s != 1.0 {
            total.fwd_time /= s;
            total.bwd_time /= s;
            total.fwd_energy /= s;
            total.bwd_energy /= s;
        }
        Some(total)
    }

    /// The contention-free counterpart: every directed pair gets its own
    /// domain at its current peak rate.
    pub fn relaxed(&self) -> Environment {
        let mut env = self.clone();
        env.capacity.clear();
        env.domain_ids.clear();
        env.pair_domain.clear();
        for (&(a, b), _) in &self.peak {
            let bw = self.peak_bw(a, b).unwrap_or(0.0);
            env.pair_domain.insert((a, b), env.capacity.len());
            env.capacity.push(bw);
            env.domain_ids.push(DomainId(format!(
                "relaxed:{}->{}",
                self.devices[a].id, self.devices[b].id
            )));
        }
        env
    }

    pub fn apply_event(&mut self, kind: &TraceEventKind) -> Result<()> {
        match kind {
            TraceEventKind::BwChange { domain, new_capacity } => {
                let d = self.domain_index(domain).ok_or_else(|| Error::UnknownDomain(domain.0.clone()))?;
                self.capacity[d] = *new_capacity;
            }
            TraceEventKind::ComputeScale { device, factor } => {
                let d = self.require_device(device)?;
                self.speed[d] = *factor;
            }
            TraceEventKind::DeviceLeave { device } => {
                let d = self.require_device(device)?;
                self.present[d] = false;
            }
            TraceEventKind::DeviceJoin { device } => {
                let d = self.require_device(device)?;
                self.present[d] = true;
            }
        }
        Ok(())
    }
}

/// Per-device share of a stage.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviceStageCost {
    pub device: usize,
    pub units: u32,
    pub fwd_time: f64,
    pub bwd_time: f64,
    pub fwd_energy: f64,
    pub bwd_energy: f64,
    pub mem: u64,
}

impl DeviceStageCost {
    pub fn energy(&self) -> f64 {
        self.fwd_energy + self.bwd_energy
    }
}

/// Aggregate stage cost for one pipeline microbatch.
#[derive(Clone, Debug, PartialEq)]
pub struct StageCost {
    pub per_device: Vec<DeviceStageCost>,
    /// Slowest replica.
    pub fwd_time: f64,
    pub bwd_time: f64,
    /// Sum over replicas.
    pub energy: f64,
}

/// Cost of running `nodes` on `devices` with `units[i]` reference units on
/// device `i` for one pipeline microbatch.
pub fn stage_cost(
    env: &Environment,
    graph: &ModelGraph,
    nodes: &[usize],
    devices: &[usize],
    units: &[u32],
    tp_degree: u32,
) -> Result<StageCost> {
    stage_cost_by(env, graph, nodes, devices, units, tp_degree, |v, d| env.node_cost(graph.node(v), d))
}

/// Node costs of a graph on every device, looked up once.
#[derive(Clone, Debug)]
pub struct CostTable {
    n_dev: usize,
    entries: Vec<Option<CostEntry>>,
}

impl CostTable {
    pub fn new(graph: &ModelGraph, env: &Environment) -> Self {
        let n_dev = env.devices().len();
        let mut entries = Vec::with_capacity(graph.len() * n_dev);
        for v in graph.nodes() {
            for d in 0..n_dev {
                entries.push(env.node_cost(v, d));
            }
        }
        CostTable { n_dev, entries }
    }

    pub fn get(&self, node: usize, device: usize) -> Option<CostEntry> {
        self.entries[node * self.n_dev + device]
    }
}

pub fn stage_cost_table(
    table: &CostTable,
    env: &Environment,
    graph: &ModelGraph,
    nodes: &[usize],
    devices: &[usize],
    units: &[u32],
    tp_degree: u32,
) -> Result<StageCost> {
    stage_cost_by(env, graph, nodes, devices, units, tp_degree, |v, d| table.get(v, d))
}

fn stage_cost_by(
    env: &Environment,
    graph: &ModelGraph,
    nodes: &[usize],
    devices: &[usize],
    units: &[u32],
    tp_degree: u32,
    lookup: impl Fn(usize, usize) -> Option<CostEntry>,
) -> Result<StageCost> {
    debug_assert_eq!(devices.len(), units.len());
    let mut per_device = Vec::with_capacity(devices.len());
    for (&dev, &count) in devices.iter().zip(units) {
        let (speedup, divisor, energy_factor) = tp_factors(env, dev, tp_degree)?;
        let mut c = CostEntry::default();
        let mut weights = 0u64;
        for &v in nodes {
            let e = lookup(v, dev).ok_or_else(|| Error::UnhostableNode {
                node: graph.node(v).id.0.clone(),
                device: env.device(dev).id.0.clone(),
            })?;
            c.add(&e);
            weights += graph.node(v).param_bytes;
        }
        let k = count as f64;
        per_device.push(DeviceStageCost {
            device: dev,
            units: count,
            fwd_time: c.fwd_time * k / speedup,
            bwd_time: c.bwd_time * k / speedup,
            fwd_energy: c.fwd_energy * k * energy_factor,
            bwd_energy: c.bwd_energy * k * energy_factor,
            mem: ((c.mem + weights) as f64 / divisor) as u64,
        });
    }
    let fwd_time = per_device.iter().map(|d| d.fwd_time).fold(0.0, f64::max);
    let bwd_time = per_device.iter().map(|d| d.bwd_time).fold(0.0, f64::max);
    let energy = per_device.iter().map(DeviceStageCost::energy).sum();
    Ok(StageCost {
        per_device,
        fwd_time,
        bwd_time,
        energy,
    })
}

/// (time divisor, memory divisor, energy multiplier) for a tensor-parallel degree.
fn tp_factors(env: &Environment, dev: usize, degree: u32) -> Result<(f64, f64, f64)> {
    if degree <= 1 {
        return Ok((1.0, 1.0, 1.0));
    }
    match &env.device(dev).tensor_parallel {
        Some(tp) if tp.degree == degree && tp.speedup > 0.0 => {
            Ok((tp.speedup, tp.mem_divisor.max(1.0), degree as f64 / tp.speedup))
        }
        _ => Err(Error::InvalidPlan(format!(
            "device `{}` does not declare tensor parallelism of degree {degree}",
            env.device(dev).id
        ))),
    }
}

/// Forward plus backward time of one reference unit of `nodes` on `device`.
pub fn unit_time(env: &Environment, graph: &ModelGraph, nodes: &[usize], device: usize) -> Option<f64> {
    let mut t = 0.0;
    for &v in nodes {
        let c = env.node_cost(graph.node(v), device)?;
        t += c.fwd_time + c.bwd_time;
    }
    Some(t)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Finding {
    UnreachablePair { src: DeviceId, dst: DeviceId },
    UnhostableNode { node: NodeId },
    CapacityViolation { src: DeviceId, dst: DeviceId, peak_bw: f64, capacity: f64 },
    PairInSeveralDomains { src: DeviceId, dst: DeviceId },
    NonPositiveCapacity { domain: DomainId },
    InvalidRanks,
    NonPositiveMemory { device: DeviceId },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Report-style consistency check of an environment against a model.
pub fn validate_environment(env: &Environment, graph: &ModelGraph) -> ValidationReport {
    let mut findings = Vec::new();
    let n = env.devices().len();
    for d in env.devices() {
        if d.mem_capacity == 0 {
            findings.push(Finding::NonPositiveMemory { device: d.id.clone() });
        }
    }
    let mut ranks: Vec<u32> = env.devices().iter().map(|d| d.rank).collect();
    ranks.sort_unstable();
    if ranks.iter().enumerate().any(|(i, &r)| r != i as u32 + 1) {
        findings.push(Finding::InvalidRanks);
    }
    for a in 0..n {
        for b in 0..n {
            if a != b && env.raw_peak_bw(a, b).map_or(true, |bw| bw <= 0.0) {
                findings.push(Finding::UnreachablePair {
                    src: env.device(a).id.clone(),
                    dst: env.device(b).id.clone(),
                });
            }
        }
    }
    for dom in &env.topology().domains {
        if dom.capacity <= 0.0 {
            findings.push(Finding::NonPositiveCapacity { domain: dom.id.clone() });
        }
    }
    let mut membership: BTreeMap<(DeviceId, DeviceId), usize> = BTreeMap::new();
    for dom in &env.topology().domains {
        for pair in &dom.members {
            *membership.entry(pair.clone()).or_default() += 1;
        }
    }
    for ((src, dst), count) in membership {
        if count > 1 {
            findings.push(Finding::PairInSeveralDomains { src, dst });
        }
    }
    for l in &env.topology().links {
        let (Some(a), Some(b)) = (env.device_index(&l.src), env.device_index(&l.dst)) else {
            continue;
        };
        if let Some(d) = env.domain_of(a, b) {
            let cap = env.domain_capacity(d);
            if l.peak_bw > cap {
                findings.push(Finding::CapacityViolation {
                    src: l.src.clone(),
                    dst: l.dst.clone(),
                    peak_bw: l.peak_bw,
                    capacity: cap,
                });
            }
        }
    }
    for node in graph.nodes() {
        if !node.is_virtual && (0..n).all(|d| env.node_cost(node, d).is_none()) {
            findings.push(Finding::UnhostableNode { node: node.id.clone() });
        }
    }
    ValidationReport { findings }
}
