//! Versioned TOML documents and their conversion to core types.

use std::fs;
use std::path::{Path, PathBuf};

use edgeplan_core::env::{
    ContentionDomain, CostEntry, CostProfile, Device, DeviceId, Environment, Link, QoeSpec, TensorParallel, Topology,
    Workload,
};
use edgeplan_core::graph::{build_model_graph, LayerNode, ModelGraph, NodeId};
use edgeplan_core::net::{BwSegment, CepGraph, Chunk, Interval, Schedule, TaskKind};
use edgeplan_core::plan::{Plan, PlanMetrics, Provenance, Stage};
use edgeplan_core::sim::{DynamicsTrace, TraceEvent, TraceEventKind};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum DocError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("{path}: expected schema `{expected}`, found `{found}`")]
    Schema { path: PathBuf, expected: &'static str, found: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] edgeplan_core::Error),
    #[error("serialization failed: {0}")]
    Serialize(#[from] toml::ser::Error),
}

pub type DocResult<T> = Result<T, DocError>;

pub trait Document: Serialize + DeserializeOwned {
    const SCHEMA: &'static str;
    fn schema(&self) -> &str;
}

macro_rules! document {
    ($t:ty, $s:literal) => {
        impl Document for $t {
            const SCHEMA: &'static str = $s;
            fn schema(&self) -> &str {
                &self.schema
            }
        }
    };
}

fn schema_of<T: Document>() -> String {
    T::SCHEMA.to_string()
}

pub fn parse<T: Document>(text: &str, path: &Path) -> DocResult<T> {
    let doc: T = toml::from_str(text).map_err(|source| DocError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    if doc.schema() != T::SCHEMA {
        return Err(DocError::Schema {
            path: path.to_path_buf(),
            expected: T::SCHEMA,
            found: doc.schema().to_string(),
        });
    }
    Ok(doc)
}

pub fn load<T: Document>(path: &Path) -> DocResult<T> {
    let text = fs::read_to_string(path).map_err(|source| DocError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text, path)
}

pub fn to_string<T: Document>(doc: &T) -> DocResult<String> {
    Ok(toml::to_string(doc)?)
}

pub fn save<T: Document>(doc: &T, path: &Path) -> DocResult<()> {
    let text = to_string(doc)?;
    fs::write(path, text).map_err(|source| DocError::Io {
        path: path.to_path_buf(),
        source,
    })
}

// ---- model ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDoc {
    #[serde(default = "schema_of::<ModelDoc>")]
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub edges: Vec<(String, String)>,
    pub nodes: Vec<NodeDoc>,
}
document!(ModelDoc, "edgeplan.model/1");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: String,
    pub param_bytes: u64,
    pub activation_bytes: u64,
}

impl ModelDoc {
    pub fn to_graph(&self) -> DocResult<ModelGraph> {
        let layers = self
            .nodes
            .iter()
            .map(|n| LayerNode::new(n.id.as_str(), n.param_bytes, n.activation_bytes))
            .collect();
        let edges = self
            .edges
            .iter()
            .map(|(a, b)| (NodeId::from(a.as_str()), NodeId::from(b.as_str())))
            .collect();
        Ok(build_model_graph(layers, edges)?)
    }

    pub fn from_graph(g: &ModelGraph, name: Option<String>) -> Self {
        ModelDoc {
            schema: schema_of::<Self>(),
            name,
            edges: g.edge_ids().into_iter().map(|(a, b)| (a.0, b.0)).collect(),
            nodes: g
                .nodes()
                .iter()
                .map(|n| NodeDoc {
                    id: n.id.0.clone(),
                    param_bytes: n.param_bytes,
                    activation_bytes: n.activation_bytes,
                })
                .collect(),
        }
    }
}

// ---- environment ----

fn yes() -> bool {
    true
}

fn infinite() -> f64 {
    f64::INFINITY
}

fn is_infinite(x: &f64) -> bool {
    x.is_infinite()
}

fn is_true(b: &bool) -> bool {
    *b
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvDoc {
    #[serde(default = "schema_of::<EnvDoc>")]
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub devices: Vec<DeviceDoc>,
    #[serde(default)]
    pub domains: Vec<DomainDoc>,
    #[serde(default)]
    pub links: Vec<LinkDoc>,
    #[serde(default)]
    pub profile: Vec<ProfileDoc>,
}
document!(EnvDoc, "edgeplan.env/1");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceDoc {
    pub id: String,
    pub memory_bytes: u64,
    #[serde(default = "infinite", skip_serializing_if = "is_infinite")]
    pub energy_budget_j: f64,
    #[serde(default)]
    pub idle_power_w: f64,
    #[serde(default)]
    pub comm_power_w: f64,
    /// Zero lets the planner rank devices by throughput.
    #[serde(default)]
    pub rank: u32,
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub present: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tensor_parallel: Option<TensorParallelDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorParallelDoc {
    pub degree: u32,
    pub speedup: f64,
    pub mem_divisor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainDoc {
    pub id: String,
    pub capacity_bps: f64,
    pub members: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkDoc {
    pub src: String,
    pub dst: String,
    pub peak_bps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileDoc {
    pub layer: String,
    pub device: String,
    pub fwd_s: f64,
    pub bwd_s: f64,
    pub fwd_j: f64,
    pub bwd_j: f64,
    pub mem_bytes: u64,
}

impl EnvDoc {
    /// Builds the environment; devices without ranks are ordered by their
    /// throughput on `graph` when one is given.
    pub fn to_env(&self, graph: Option<&ModelGraph>) -> DocResult<Environment> {
        let devices: Vec<Device> = self
            .devices
            .iter()
            .map(|d| {
                let mut dev = Device::new(d.id.as_str(), d.memory_bytes);
                dev.energy_budget = d.energy_budget_j;
                dev.idle_power = d.idle_power_w;
                dev.comm_power = d.comm_power_w;
                dev.rank = d.rank;
                dev.tensor_parallel = d.tensor_parallel.as_ref().map(|t| TensorParallel {
                    degree: t.degree,
                    speedup: t.speedup,
                    mem_divisor: t.mem_divisor,
                });
                dev
            })
            .collect();
        let topology = Topology {
            domains: self
                .domains
                .iter()
                .map(|d| ContentionDomain {
                    id: d.id.as_str().into(),
                    capacity: d.capacity_bps,
                    members: d
                        .members
                        .iter()
                        .map(|(a, b)| (DeviceId::from(a.as_str()), DeviceId::from(b.as_str())))
                        .collect(),
                })
                .collect(),
            links: self
                .links
                .iter()
                .map(|l| Link {
                    src: l.src.as_str().into(),
                    dst: l.dst.as_str().into(),
                    peak_bw: l.peak_bps,
                })
                .collect(),
        };
        let mut profile = CostProfile::new();
        for p in &self.profile {
            profile.insert(
                p.layer.as_str(),
                DeviceId::from(p.device.as_str()),
                CostEntry {
                    fwd_time: p.fwd_s,
                    bwd_time: p.bwd_s,
                    fwd_energy: p.fwd_j,
                    bwd_energy: p.bwd_j,
                    mem: p.mem_bytes,
                },
            );
        }
        let mut env = Environment::new(devices, topology, profile)?;
        if let Some(g) = graph {
            if self.devices.iter().all(|d| d.rank == 0) {
                env.assign_ranks(g);
            }
        }
        for (i, d) in self.devices.iter().enumerate() {
            if !d.present {
                env.set_present(i, false);
            }
        }
        Ok(env)
    }
}

// ---- qoe ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QoeDoc {
    #[serde(default = "schema_of::<QoeDoc>")]
    pub schema: String,
    pub t_qoe_s: f64,
    pub lambda: f64,
    pub microbatches: u32,
    #[serde(default = "one")]
    pub units_per_microbatch: u32,
    /// Nodes lighter than this fraction of the model are fused.
    #[serde(default)]
    pub merge_delta: f64,
}
document!(QoeDoc, "edgeplan.qoe/1");

fn one() -> u32 {
    1
}

impl QoeDoc {
    pub fn qoe(&self) -> QoeSpec {
        QoeSpec {
            t_qoe: self.t_qoe_s,
            lambda: self.lambda,
        }
    }

    pub fn workload(&self) -> Workload {
        Workload {
            microbatches: self.microbatches,
            units_per_microbatch: self.units_per_microbatch,
        }
    }
}

// ---- plan ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanDoc {
    #[serde(default = "schema_of::<PlanDoc>")]
    pub schema: String,
    /// Documents the plan was made from, relative to the plan file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qoe: Option<String>,
    #[serde(default)]
    pub merge_delta: f64,
    pub microbatches: u32,
    #[serde(default = "one")]
    pub units_per_microbatch: u32,
    #[serde(default)]
    pub edges: Vec<(usize, usize)>,
    pub stages: Vec<StageDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<ProvenanceDoc>,
}
document!(PlanDoc, "edgeplan.plan/1");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageDoc {
    pub nodes: Vec<String>,
    pub devices: Vec<String>,
    pub batch_alloc: Vec<u32>,
    #[serde(default = "one")]
    pub tp_degree: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsDoc {
    pub latency_s: f64,
    pub mem_feasible: bool,
    pub energy: Vec<DeviceEnergy>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceEnergy {
    pub device: String,
    pub joules: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceDoc {
    pub chain: usize,
    pub stages: usize,
    pub devices: usize,
}

impl PlanDoc {
    pub fn from_plan(plan: &Plan, workload: &Workload, merge_delta: f64) -> Self {
        PlanDoc {
            schema: schema_of::<Self>(),
            model: None,
            env: None,
            qoe: None,
            merge_delta,
            microbatches: workload.microbatches,
            units_per_microbatch: workload.units_per_microbatch,
            edges: plan.edges.clone(),
            stages: plan
                .stages
                .iter()
                .map(|s| StageDoc {
                    nodes: s.nodes.iter().map(|n| n.0.clone()).collect(),
                    devices: s.devices.iter().map(|d| d.0.clone()).collect(),
                    batch_alloc: s.batch_alloc.clone(),
                    tp_degree: s.tp_degree,
                })
                .collect(),
            metrics: plan.metrics.as_ref().map(|m| MetricsDoc {
                latency_s: m.t_est,
                mem_feasible: m.mem_feasible,
                energy: m
                    .e_est
                    .iter()
                    .map(|(d, e)| DeviceEnergy {
                        device: d.0.clone(),
                        joules: *e,
                    })
                    .collect(),
            }),
            provenance: plan.provenance.map(|p| ProvenanceDoc {
                chain: p.j,
                stages: p.s,
                devices: p.n,
            }),
        }
    }

    pub fn to_plan(&self) -> Plan {
        Plan {
            stages: self
                .stages
                .iter()
                .map(|s| Stage {
                    nodes: s.nodes.iter().map(|n| NodeId::from(n.as_str())).collect(),
                    devices: s.devices.iter().map(|d| DeviceId::from(d.as_str())).collect(),
                    batch_alloc: s.batch_alloc.clone(),
                    tp_degree: s.tp_degree,
                })
                .collect(),
            edges: self.edges.clone(),
            metrics: self.metrics.as_ref().map(|m| PlanMetrics {
                t_est: m.latency_s,
                e_est: m
                    .energy
                    .iter()
                    .map(|e| (DeviceId::from(e.device.as_str()), e.joules))
                    .collect(),
                mem_feasible: m.mem_feasible,
            }),
            provenance: self.provenance.map(|p| Provenance {
                j: p.chain,
                s: p.stages,
                n: p.devices,
            }),
        }
    }

    pub fn workload(&self) -> Workload {
        Workload {
            microbatches: self.microbatches,
            units_per_microbatch: self.units_per_microbatch,
        }
    }
}

// ---- manifest ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestDoc {
    #[serde(default = "schema_of::<ManifestDoc>")]
    pub schema: String,
    pub model: String,
    pub env: String,
    pub qoe: String,
    pub topk: usize,
    pub chunks: usize,
    pub entries: Vec<ManifestEntry>,
}
document!(ManifestDoc, "edgeplan.manifest/1");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub rank: usize,
    pub file: String,
    pub objective: f64,
    pub latency_s: f64,
    pub energy_j: f64,
    pub relaxed_latency_s: f64,
    pub violates_qoe: bool,
}

// ---- schedule ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDoc {
    #[serde(default = "schema_of::<ScheduleDoc>")]
    pub schema: String,
    pub chunks_per_transfer: usize,
    pub makespan_s: f64,
    pub tasks: Vec<TaskRow>,
    #[serde(default)]
    pub segments: Vec<SegmentRow>,
    #[serde(default)]
    pub chunks: Vec<ChunkRow>,
}
document!(ScheduleDoc, "edgeplan.schedule/1");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRow {
    pub id: usize,
    pub label: String,
    pub resource: String,
    pub start_s: f64,
    pub finish_s: f64,
    pub bytes: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentRow {
    pub task: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub bps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChunkRow {
    pub task: usize,
    pub index: usize,
    pub start_s: f64,
    pub finish_s: f64,
    pub bps: f64,
    pub bytes: f64,
}

/// Name of the device or domain a task occupies.
pub fn task_resource(g: &CepGraph, env: &Environment, t: usize) -> String {
    match g.tasks[t].kind {
        TaskKind::Compute { device } => env.device(device).id.0.clone(),
        TaskKind::Comm { domain: Some(d), .. } => env.domain_id(d).0.clone(),
        TaskKind::Comm { .. } => "local".into(),
    }
}

impl ScheduleDoc {
    pub fn from_schedule(s: &Schedule, g: &CepGraph, env: &Environment) -> Self {
        ScheduleDoc {
            schema: schema_of::<Self>(),
            chunks_per_transfer: s.chunks_per_transfer,
            makespan_s: s.makespan,
            tasks: g
                .tasks
                .iter()
                .map(|t| TaskRow {
                    id: t.id,
                    label: t.label(),
                    resource: task_resource(g, env, t.id),
                    start_s: s.intervals[t.id].start,
                    finish_s: s.intervals[t.id].finish,
                    bytes: t.bytes,
                })
                .collect(),
            segments: s
                .bw
                .iter()
                .enumerate()
                .flat_map(|(task, segs)| {
                    segs.iter().map(move |x| SegmentRow {
                        task,
                        start_s: x.start,
                        end_s: x.end,
                        bps: x.bw,
                    })
                })
                .collect(),
            chunks: s
                .chunks
                .iter()
                .map(|c| ChunkRow {
                    task: c.task,
                    index: c.index,
                    start_s: c.start,
                    finish_s: c.finish,
                    bps: c.bw,
                    bytes: c.bytes,
                })
                .collect(),
        }
    }

    pub fn to_schedule(&self) -> DocResult<Schedule> {
        let n = self.tasks.len();
        let mut intervals = vec![Interval::default(); n];
        for t in &self.tasks {
            let slot = intervals
                .get_mut(t.id)
                .ok_or_else(|| DocError::Invalid(format!("task id {} out of range", t.id)))?;
            *slot = Interval {
                start: t.start_s,
                finish: t.finish_s,
            };
        }
        let mut bw = vec![Vec::new(); n];
        for x in &self.segments {
            bw.get_mut(x.task)
                .ok_or_else(|| DocError::Invalid(format!("segment task {} out of range", x.task)))?
                .push(BwSegment {
                    start: x.start_s,
                    end: x.end_s,
                    bw: x.bps,
                });
        }
        Ok(Schedule {
            intervals,
            bw,
            chunks: self
                .chunks
                .iter()
                .map(|c| Chunk {
                    task: c.task,
                    index: c.index,
                    start: c.start_s,
                    finish: c.finish_s,
                    bw: c.bps,
                    bytes: c.bytes,
                })
                .collect(),
            chunks_per_transfer: self.chunks_per_transfer,
            makespan: self.makespan_s,
        })
    }
}

// ---- trace ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceDoc {
    #[serde(default = "schema_of::<TraceDoc>")]
    pub schema: String,
    #[serde(default)]
    pub events: Vec<EventDoc>,
}
document!(TraceDoc, "edgeplan.trace/1");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventDoc {
    BwChange { t_s: f64, domain: String, capacity_bps: f64 },
    ComputeScale { t_s: f64, device: String, factor: f64 },
    DeviceLeave { t_s: f64, device: String },
    DeviceJoin { t_s: f64, device: String },
}

impl TraceDoc {
    pub fn to_trace(&self) -> DocResult<DynamicsTrace> {
        let events = self
            .events
            .iter()
            .map(|e| match e {
                EventDoc::BwChange { t_s, domain, capacity_bps } => TraceEvent {
                    t: *t_s,
                    kind: TraceEventKind::BwChange {
                        domain: domain.as_str().into(),
                        new_capacity: *capacity_bps,
                    },
                },
                EventDoc::ComputeScale { t_s, device, factor } => TraceEvent {
                    t: *t_s,
                    kind: TraceEventKind::ComputeScale {
                        device: device.as_str().into(),
                        factor: *factor,
                    },
                },
                EventDoc::DeviceLeave { t_s, device } => TraceEvent {
                    t: *t_s,
                    kind: TraceEventKind::DeviceLeave {
                        device: device.as_str().into(),
                    },
                },
                EventDoc::DeviceJoin { t_s, device } => TraceEvent {
                    t: *t_s,
                    kind: TraceEventKind::DeviceJoin {
                        device: device.as_str().into(),
                    },
                },
            })
            .collect();
        Ok(DynamicsTrace::new(events)?)
    }

    pub fn from_trace(trace: &DynamicsTrace) -> Self {
        TraceDoc {
            schema: schema_of::<Self>(),
            events: trace
                .events()
                .iter()
                .map(|e| match &e.kind {
                    TraceEventKind::BwChange { domain, new_capacity } => EventDoc::BwChange {
                        t_s: e.t,
                        domain: domain.0.clone(),
                        capacity_bps: *new_capacity,
                    },
                    TraceEventKind::ComputeScale { device, factor } => EventDoc::ComputeScale {
                        t_s: e.t,
                        device: device.0.clone(),
                        factor: *factor,
                    },
                    TraceEventKind::DeviceLeave { device } => EventDoc::DeviceLeave {
                        t_s: e.t,
                        device: device.0.clone(),
                    },
                    TraceEventKind::DeviceJoin { device } => EventDoc::DeviceJoin {
                        t_s: e.t,
                        device: device.0.clone(),
                    },
                })
                .collect(),
        }
    }
}

// ---- results ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateDoc {
    #[serde(default = "schema_of::<EstimateDoc>")]
    pub schema: String,
    pub latency_s: f64,
    pub energy_j: f64,
    pub objective: f64,
    pub mem_feasible: bool,
    pub energy: Vec<DeviceEnergy>,
}
document!(EstimateDoc, "edgeplan.estimate/1");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimDoc {
    #[serde(default = "schema_of::<SimDoc>")]
    pub schema: String,
    pub makespan_s: f64,
    pub energy_j: f64,
    pub events: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    pub iteration_latencies_s: Vec<f64>,
    pub energy: Vec<DeviceEnergy>,
    #[serde(default)]
    pub budget_violations: Vec<DeviceEnergy>,
}
document!(SimDoc, "edgeplan.sim/1");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptDoc {
    #[serde(default = "schema_of::<AdaptDoc>")]
    pub schema: String,
    pub work: f64,
    pub deadline_s: f64,
    pub work_done: f64,
    pub energy_j: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at_s: Option<f64>,
    pub met_deadline: bool,
    pub all_feasible: bool,
    #[serde(default)]
    pub events: Vec<EventReport>,
    pub horizons: Vec<HorizonReport>,
}
document!(AdaptDoc, "edgeplan.adapt/1");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventReport {
    pub t_s: f64,
    pub kind: String,
    pub action: String,
    pub drift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonReport {
    pub start_s: f64,
    pub delta_s: f64,
    pub expected: f64,
    pub progress: f64,
    pub energy_j: f64,
    pub feasible: bool,
    pub allocations: Vec<AllocationReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationReport {
    pub plan: String,
    pub x: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierDoc {
    #[serde(default = "schema_of::<FrontierDoc>")]
    pub schema: String,
    pub points: Vec<FrontierRow>,
}
document!(FrontierDoc, "edgeplan.frontier/1");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub lambda: f64,
    pub latency_s: f64,
    pub energy_j: f64,
    pub stages: Vec<StageDoc>,
}

/// Resolves `rel` against the directory holding `base`.
pub fn relative_to(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}
