//! Loading inputs and running the planning stages end to end.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::thread;

use edgeplan_core::env::{validate_environment, Environment, QoeSpec, ValidationReport, Workload};
use edgeplan_core::graph::{merge_small_nodes, serial_decompose, with_virtual_terminals, ChainComponent, ModelGraph};
use edgeplan_core::net::{refine_candidate, select, CepGraph, Refined, Selection};
use edgeplan_core::partition::partition_search;
use edgeplan_core::plan::Plan;
use edgeplan_core::sim::SimResult;

use crate::doc::{load, relative_to, task_resource, DocResult, EnvDoc, ModelDoc, PlanDoc, QoeDoc};

/// Merged graph with virtual terminals and its serial decomposition.
pub struct PreparedGraph {
    pub graph: ModelGraph,
    pub components: Vec<ChainComponent>,
}

pub fn prepare_graph(raw: &ModelGraph, merge_delta: f64) -> DocResult<PreparedGraph> {
    let graph = with_virtual_terminals(&merge_small_nodes(raw, merge_delta));
    let components = serial_decompose(&graph)?;
    Ok(PreparedGraph { graph, components })
}

/// Everything `plan` and `frontier` read from disk.
pub struct Inputs {
    pub model_path: PathBuf,
    pub env_path: PathBuf,
    pub qoe_path: PathBuf,
    pub prepared: PreparedGraph,
    pub env: Environment,
    pub qoe: QoeSpec,
    pub workload: Workload,
    pub merge_delta: f64,
    pub validation: ValidationReport,
}

pub fn load_inputs(model: &Path, env: &Path, qoe: &Path) -> DocResult<Inputs> {
    let raw = load::<ModelDoc>(model)?.to_graph()?;
    let q = load::<QoeDoc>(qoe)?;
    let prepared = prepare_graph(&raw, q.merge_delta)?;
    let env_doc = load::<EnvDoc>(env)?;
    let environment = env_doc.to_env(Some(&prepared.graph))?;
    let validation = validate_environment(&environment, &prepared.graph);
    Ok(Inputs {
        model_path: absolute(model),
        env_path: absolute(env),
        qoe_path: absolute(qoe),
        prepared,
        env: environment,
        qoe: q.qoe(),
        workload: q.workload(),
        merge_delta: q.merge_delta,
        validation,
    })
}

pub fn absolute(p: &Path) -> PathBuf {
    std::fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

/// A plan document with the model and environment it refers to.
pub struct LoadedPlan {
    pub doc: PlanDoc,
    pub plan: Plan,
    pub prepared: PreparedGraph,
    pub env: Environment,
    pub workload: Workload,
}

/// Loads `plan`, taking the model and environment from the explicit paths
/// or else from the paths the plan document records.
pub fn load_plan(plan: &Path, model: Option<&Path>, env: Option<&Path>) -> DocResult<LoadedPlan> {
    let doc = load::<PlanDoc>(plan)?;
    let pick = |given: Option<&Path>, recorded: &Option<String>, what: &str| -> DocResult<PathBuf> {
        match (given, recorded) {
            (Some(p), _) => Ok(p.to_path_buf()),
            (None, Some(r)) => Ok(relative_to(plan, r)),
            (None, None) => Err(crate::doc::DocError::Invalid(format!(
                "{}: no {what} document recorded; pass --{what}",
                plan.display()
            ))),
        }
    };
    let model_path = pick(model, &doc.model, "model")?;
    let env_path = pick(env, &doc.env, "env")?;
    let raw = load::<ModelDoc>(&model_path)?.to_graph()?;
    let prepared = prepare_graph(&raw, doc.merge_delta)?;
    let env = load::<EnvDoc>(&env_path)?.to_env(Some(&prepared.graph))?;
    Ok(LoadedPlan {
        plan: doc.to_plan(),
        workload: doc.workload(),
        doc,
        prepared,
        env,
    })
}

fn threads(requested: usize) -> usize {
    if requested > 0 {
        requested
    } else {
        thread::available_parallelism().map_or(1, |n| n.get())
    }
}

/// Refines candidates on scoped worker threads; ranking is independent of
/// the thread count.
pub fn refine_parallel(
    candidates: &[Plan],
    graph: &ModelGraph,
    env: &Environment,
    workload: &Workload,
    qoe: &QoeSpec,
    chunks: usize,
    n_threads: usize,
) -> edgeplan_core::Result<Selection> {
    let n = threads(n_threads).min(candidates.len()).max(1);
    let mut slots: Vec<Option<edgeplan_core::Result<Refined>>> = vec![None; candidates.len()];
    thread::scope(|s| {
        for (w, part) in slots.chunks_mut(candidates.len().div_ceil(n).max(1)).enumerate() {
            let base = w * candidates.len().div_ceil(n).max(1);
            s.spawn(move || {
                for (i, slot) in part.iter_mut().enumerate() {
                    *slot = Some(refine_candidate(&candidates[base + i], graph, env, workload, qoe, chunks));
                }
            });
        }
    });
    let refined = slots
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect::<edgeplan_core::Result<Vec<_>>>()?;
    select(refined)
}

pub struct PlanOutcome {
    pub candidates: Vec<Plan>,
    pub selection: Selection,
}

pub fn plan_and_select(inputs: &Inputs, qoe: &QoeSpec, k: usize, chunks: usize, n_threads: usize) -> edgeplan_core::Result<PlanOutcome> {
    let g = &inputs.prepared;
    let candidates = partition_search(&g.graph, &g.components, &inputs.env, &inputs.workload, qoe, k)?;
    let selection = refine_parallel(&candidates, &g.graph, &inputs.env, &inputs.workload, qoe, chunks, n_threads)?;
    Ok(PlanOutcome { candidates, selection })
}

/// Writes a tab-separated timeline: task, resource, start_s, finish_s.
pub fn write_timeline<W: Write>(out: &mut W, rows: impl IntoIterator<Item = (String, String, f64, f64)>) -> std::io::Result<()> {
    writeln!(out, "task\tresource\tstart_s\tfinish_s")?;
    for (task, resource, start, finish) in rows {
        writeln!(out, "{task}\t{resource}\t{start}\t{finish}")?;
    }
    Ok(())
}

pub fn schedule_rows(g: &CepGraph, env: &Environment, s: &edgeplan_core::net::Schedule) -> Vec<(String, String, f64, f64)> {
    g.tasks
        .iter()
        .map(|t| (t.label(), task_resource(g, env, t.id), s.intervals[t.id].start, s.intervals[t.id].finish))
        .collect()
}

pub fn sim_rows(r: &SimResult) -> Vec<(String, String, f64, f64)> {
    r.timeline
        .iter()
        .map(|e| {
            let label = if r.iteration_latencies.len() > 1 {
                format!("{}@{}", e.label, e.iteration)
            } else {
                e.label.clone()
            };
            (label, e.resource.clone(), e.start, e.finish)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrontierPoint {
    pub lambda: f64,
    pub latency: f64,
    pub energy: f64,
    pub plan: Plan,
}

/// Drops dominated points and sorts the rest by latency. A point is
/// dominated when another is no worse in both coordinates and better in
/// one; of identical points the first is kept.
pub fn pareto_filter(mut points: Vec<FrontierPoint>) -> Vec<FrontierPoint> {
    points.sort_by(|a, b| {
        a.latency
            .total_cmp(&b.latency)
            .then(a.energy.total_cmp(&b.energy))
            .then(a.lambda.total_cmp(&b.lambda))
    });
    let mut out: Vec<FrontierPoint> = Vec::new();
    for p in points {
        match out.last() {
            Some(last) if p.energy >= last.energy => {}
            _ => out.push(p),
        }
    }
    out
}

/// Best refined plan for each latency weight, reduced to its Pareto set.
pub fn frontier(inputs: &Inputs, lambdas: &[f64], k: usize, chunks: usize, n_threads: usize) -> edgeplan_core::Result<Vec<FrontierPoint>> {
    let mut points = Vec::new();
    for &lambda in lambdas {
        let qoe = QoeSpec { lambda, ..inputs.qoe };
        match plan_and_select(inputs, &qoe, k, chunks, n_threads) {
            Ok(out) => {
                let best = out.selection.best();
                points.push(FrontierPoint {
                    lambda,
                    latency: best.latency,
                    energy: best.total_energy(),
                    plan: best.plan.clone(),
                });
            }
            Err(edgeplan_core::Error::NoFeasiblePlan) => {}
            Err(e) => return Err(e),
        }
    }
    if points.is_empty() {
        return Err(edgeplan_core::Error::NoFeasiblePlan);
    }
    Ok(pareto_filter(points))
}
