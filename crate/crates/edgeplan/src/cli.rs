//! Command-line front end.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use edgeplan_core::adapt::{
    classify_event, relative_drift, run_closed_loop, switching_overhead, Action, MixDecision, PlanProfile,
};
use edgeplan_core::estimate::estimate_plan;
use edgeplan_core::net::{build_cep_graph, chunkify, refine_candidate, solve_schedule, verify_schedule};
use edgeplan_core::plan::{resolve_plan, Plan};
use edgeplan_core::sim::{measure_objective, simulate, DynamicsTrace, TraceEventKind};

use crate::doc::{
    self, load, save, AdaptDoc, AllocationReport, DeviceEnergy, DocError, EstimateDoc, EventReport, FrontierDoc,
    FrontierRow, HorizonReport, ManifestDoc, ManifestEntry, PlanDoc, QoeDoc, ScheduleDoc, SimDoc, TraceDoc,
};
use crate::gen;
use crate::pipeline::{self, absolute, load_inputs, load_plan, plan_and_select, write_timeline};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "edgeplan", version, about = "Plan, schedule and simulate hybrid-parallel execution on edge devices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Search partitions, refine under contention and write ranked plans.
    Plan(PlanArgs),
    /// Print the contention-free latency, energy and objective of a plan.
    Estimate(EstimateArgs),
    /// Schedule a plan's transfers on shared links.
    Schedule(ScheduleArgs),
    /// Run a plan in the discrete-event simulator.
    Simulate(SimulateArgs),
    /// Mix ranked plans horizon by horizon toward a deadline.
    Adapt(AdaptArgs),
    /// Sweep the latency weight and print the energy-latency Pareto set.
    Frontier(FrontierArgs),
    /// Write a random model, environment and QoE document.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    env: PathBuf,
    #[arg(long)]
    qoe: PathBuf,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[command(flatten)]
    inputs: InputArgs,
    /// Candidates kept by the partition search.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..=64))]
    topk: u64,
    /// Chunks per transfer; 0 keeps fractional schedules.
    #[arg(long, default_value_t = edgeplan_core::net::DEFAULT_CHUNKS)]
    chunks: usize,
    /// Worker threads for refinement; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, default_value = "plans")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PlanRef {
    #[arg(long)]
    plan: PathBuf,
    /// Overrides the model recorded in the plan.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Overrides the environment recorded in the plan.
    #[arg(long)]
    env: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    plan: PlanRef,
    /// Energy weight in the objective.
    #[arg(long, default_value_t = 0.0)]
    weight: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScheduleArgs {
    #[command(flatten)]
    plan: PlanRef,
    #[arg(long, default_value_t = edgeplan_core::net::DEFAULT_CHUNKS)]
    chunks: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    timeline: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    plan: PlanRef,
    /// Replay this schedule's chunk order instead of fair sharing.
    #[arg(long)]
    schedule: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    iters: u32,
    /// Give every pair a private link.
    #[arg(long)]
    relaxed: bool,
    /// Report the objective under this QoE document.
    #[arg(long)]
    qoe: Option<PathBuf>,
    #[arg(long)]
    timeline: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AdaptArgs {
    /// Output directory of `plan`.
    #[arg(long)]
    plans: PathBuf,
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Seconds until the work must be done.
    #[arg(long)]
    deadline: f64,
    /// Iterations to complete.
    #[arg(long)]
    work: f64,
    /// Horizon length in seconds; defaults to a twentieth of the remaining time.
    #[arg(long)]
    horizon: Option<f64>,
    /// Model state is immutable, so switches copy in the background.
    #[arg(long)]
    inference: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FrontierArgs {
    #[command(flatten)]
    inputs: InputArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    lambdas: Vec<f64>,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..=64))]
    topk: u64,
    #[arg(long, default_value_t = edgeplan_core::net::DEFAULT_CHUNKS)]
    chunks: usize,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..=512))]
    layers: u64,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..=32))]
    devices: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
        }
    }
}

impl From<edgeplan_core::Error> for CliError {
    fn from(e: edgeplan_core::Error) -> Self {
        use edgeplan_core::Error as E;
        match e {
            E::NoFeasiblePlan | E::UnschedulableTask { .. } | E::DeadlinePassed { .. } | E::DeadDevice { .. } => {
                CliError::Infeasible(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<DocError> for CliError {
    fn from(e: DocError) -> Self {
        match e {
            DocError::Core(c) => c.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let result = match cli.command {
        Command::Plan(a) => cmd_plan(a, &mut out),
        Command::Estimate(a) => cmd_estimate(a, &mut out),
        Command::Schedule(a) => cmd_schedule(a, &mut out),
        Command::Simulate(a) => cmd_simulate(a, &mut out),
        Command::Adapt(a) => cmd_adapt(a, &mut out),
        Command::Frontier(a) => cmd_frontier(a, &mut out),
        Command::Generate(a) => cmd_generate(a, &mut out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("edgeplan: {e}");
            e.exit_code()
        }
    }
}

fn ensure_dir(p: &Path) -> CliResult {
    fs::create_dir_all(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn energies(e: &[(edgeplan_core::env::DeviceId, f64)]) -> Vec<DeviceEnergy> {
    e.iter()
        .map(|(d, j)| DeviceEnergy {
            device: d.0.clone(),
            joules: *j,
        })
        .collect()
}

fn cmd_plan(a: PlanArgs, out: &mut dyn Write) -> CliResult {
    let inputs = load_inputs(&a.inputs.model, &a.inputs.env, &a.inputs.qoe)?;
    for f in &inputs.validation.findings {
        eprintln!("warning: {f:?}");
    }
    let result = plan_and_select(&inputs, &inputs.qoe, a.topk as usize, a.chunks, a.threads)?;
    ensure_dir(&a.out)?;
    let mut manifest = ManifestDoc {
        schema: <ManifestDoc as doc::Document>::SCHEMA.into(),
        model: path_str(&inputs.model_path),
        env: path_str(&inputs.env_path),
        qoe: path_str(&inputs.qoe_path),
        topk: a.topk as usize,
        chunks: a.chunks,
        entries: Vec::new(),
    };
    writeln!(out, "{} candidates, ranked after contention-aware refinement:", result.selection.ranking.len())?;
    writeln!(out, "rank  objective      latency_s    energy_j     relaxed_s    stages  devices")?;
    for (i, r) in result.selection.ranking.iter().enumerate() {
        let file = format!("plan-{:02}.toml", i + 1);
        let mut pd = PlanDoc::from_plan(&r.plan, &inputs.workload, inputs.merge_delta);
        pd.model = Some(manifest.model.clone());
        pd.env = Some(manifest.env.clone());
        pd.qoe = Some(manifest.qoe.clone());
        save(&pd, &a.out.join(&file))?;
        manifest.entries.push(ManifestEntry {
            rank: i + 1,
            file,
            objective: r.objective,
            latency_s: r.latency,
            energy_j: r.total_energy(),
            relaxed_latency_s: r.relaxed_latency,
            violates_qoe: r.violates_qoe,
        });
        writeln!(
            out,
            "{:<5} {:<14.6} {:<12.6} {:<12.3} {:<12.6} {:<7} {}{}",
            i + 1,
            r.objective,
            r.latency,
            r.total_energy(),
            r.relaxed_latency,
            r.plan.stages.len(),
            r.plan.device_count(),
            if r.violates_qoe { "  (misses latency target)" } else { "" }
        )?;
    }
    save(&manifest, &a.out.join("manifest.toml"))?;
    writeln!(out, "wrote {}", a.out.display())?;
    Ok(())
}

fn cmd_estimate(a: EstimateArgs, out: &mut dyn Write) -> CliResult {
    let lp = load_plan(&a.plan.plan, a.plan.model.as_deref(), a.plan.env.as_deref())?;
    let est = estimate_plan(&lp.plan, &lp.prepared.graph, &lp.env, &lp.workload, a.weight)?;
    writeln!(out, "latency_s  {}", est.t_latency)?;
    writeln!(out, "energy_j   {}", est.e_consumption)?;
    writeln!(out, "objective  {}", est.objective)?;
    if !est.mem_feasible {
        writeln!(out, "memory     exceeds device capacity")?;
    }
    if let Some(p) = a.out {
        let names: Vec<_> = est
            .per_device_energy
            .iter()
            .map(|(d, e)| (lp.env.device(*d).id.clone(), *e))
            .collect();
        save(
            &EstimateDoc {
                schema: <EstimateDoc as doc::Document>::SCHEMA.into(),
                latency_s: est.t_latency,
                energy_j: est.e_consumption,
                objective: est.objective,
                mem_feasible: est.mem_feasible,
                energy: energies(&names),
            },
            &p,
        )?;
    }
    Ok(())
}

fn cmd_schedule(a: ScheduleArgs, out: &mut dyn Write) -> CliResult {
    let lp = load_plan(&a.plan.plan, a.plan.model.as_deref(), a.plan.env.as_deref())?;
    let g = &lp.prepared.graph;
    let rp = resolve_plan(&lp.plan, g, &lp.env, &lp.workload)?;
    let cep = build_cep_graph(&rp, g, &lp.env, &lp.workload)?;
    let frac = solve_schedule(&cep, &lp.env)?;
    let sched = if a.chunks == 0 { frac.clone() } else { chunkify(&cep, &lp.env, &frac, a.chunks)? };
    let violations = verify_schedule(&cep, &lp.env, &sched);
    save(&ScheduleDoc::from_schedule(&sched, &cep, &lp.env), &a.out)?;
    if let Some(t) = &a.timeline {
        let mut f = fs::File::create(t)?;
        write_timeline(&mut f, pipeline::schedule_rows(&cep, &lp.env, &sched))?;
    }
    writeln!(out, "tasks              {}", cep.len())?;
    writeln!(out, "transfers          {}", cep.comm_tasks().count())?;
    writeln!(out, "fractional_s       {}", frac.makespan)?;
    writeln!(out, "makespan_s         {}", sched.makespan)?;
    writeln!(out, "chunks             {}", sched.chunks.len())?;
    writeln!(out, "violations         {}", violations.len())?;
    if !violations.is_empty() {
        return Err(CliError::Infeasible(format!("schedule check failed: {:?}", violations[0])));
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs, out: &mut dyn Write) -> CliResult {
    let lp = load_plan(&a.plan.plan, a.plan.model.as_deref(), a.plan.env.as_deref())?;
    let env = if a.relaxed { lp.env.relaxed() } else { lp.env.clone() };
    let trace = match &a.trace {
        Some(p) => load::<TraceDoc>(p)?.to_trace()?,
        None => DynamicsTrace::empty(),
    };
    let schedule = match &a.schedule {
        Some(p) => Some(load::<ScheduleDoc>(p)?.to_schedule()?),
        None => None,
    };
    if let Some(s) = &schedule {
        let rp = resolve_plan(&lp.plan, &lp.prepared.graph, &env, &lp.workload)?;
        let cep = build_cep_graph(&rp, &lp.prepared.graph, &env, &lp.workload)?;
        if s.intervals.len() != cep.len() {
            return Err(CliError::Input(format!(
                "schedule has {} tasks but the plan expands to {}",
                s.intervals.len(),
                cep.len()
            )));
        }
    }
    let r = simulate(&lp.plan, &lp.prepared.graph, &env, &lp.workload, schedule.as_ref(), a.iters, &trace)?;
    let report = match &a.qoe {
        Some(p) => Some(measure_objective(&r, &load::<QoeDoc>(p)?.qoe(), &env)),
        None => None,
    };
    writeln!(out, "makespan_s   {}", r.makespan)?;
    writeln!(out, "energy_j     {}", r.total_energy())?;
    writeln!(out, "events       {}", r.events)?;
    if r.iteration_latencies.len() > 1 {
        let lat: Vec<String> = r.iteration_latencies.iter().map(|x| format!("{x:.6}")).collect();
        writeln!(out, "iterations   {}", lat.join(" "))?;
    }
    if let Some(rep) = &report {
        writeln!(out, "objective    {}", rep.value)?;
        for v in &rep.violations {
            writeln!(out, "over budget  {} uses {:.3} J of {:.3} J", v.device, v.energy, v.budget)?;
        }
    }
    if let Some(t) = &a.timeline {
        let mut f = fs::File::create(t)?;
        write_timeline(&mut f, pipeline::sim_rows(&r))?;
    }
    if let Some(p) = &a.out {
        save(
            &SimDoc {
                schema: <SimDoc as doc::Document>::SCHEMA.into(),
                makespan_s: r.makespan,
                energy_j: r.total_energy(),
                events: r.events,
                objective: report.as_ref().map(|x| x.value),
                iteration_latencies_s: r.iteration_latencies.clone(),
                energy: energies(&r.per_device_energy),
                budget_violations: report
                    .iter()
                    .flat_map(|x| &x.violations)
                    .map(|v| DeviceEnergy {
                        device: v.device.0.clone(),
                        joules: v.energy,
                    })
                    .collect(),
            },
            p,
        )?;
    }
    Ok(())
}

struct Candidate {
    name: String,
    plan: Plan,
}

fn event_name(k: &TraceEventKind) -> String {
    match k {
        TraceEventKind::BwChange { domain, new_capacity } => format!("bw_change {domain} -> {new_capacity} bps"),
        TraceEventKind::ComputeScale { device, factor } => format!("compute_scale {device} x{factor}"),
        TraceEventKind::DeviceLeave { device } => format!("device_leave {device}"),
        TraceEventKind::DeviceJoin { device } => format!("device_join {device}"),
    }
}

fn cmd_adapt(a: AdaptArgs, out: &mut dyn Write) -> CliResult {
    if !(a.deadline > 0.0) || !(a.work > 0.0) || a.horizon.is_some_and(|h| !(h > 0.0)) {
        return Err(CliError::Input("--deadline, --work and --horizon must be positive".into()));
    }
    let manifest_path = a.plans.join("manifest.toml");
    let manifest = load::<ManifestDoc>(&manifest_path)?;
    let inputs = load_inputs(
        &doc::relative_to(&manifest_path, &manifest.model),
        &doc::relative_to(&manifest_path, &manifest.env),
        &doc::relative_to(&manifest_path, &manifest.qoe),
    )?;
    let qoe = inputs.qoe;
    let cands: Vec<Candidate> = manifest
        .entries
        .iter()
        .map(|e| {
            let pd = load::<PlanDoc>(&a.plans.join(&e.file))?;
            Ok(Candidate {
                name: e.file.trim_end_matches(".toml").to_string(),
                plan: pd.to_plan(),
            })
        })
        .collect::<Result<_, DocError>>()?;
    if cands.is_empty() {
        return Err(CliError::Infeasible("manifest lists no plans".into()));
    }
    let trace = match &a.trace {
        Some(p) => load::<TraceDoc>(p)?.to_trace()?,
        None => DynamicsTrace::empty(),
    };

    let graph = &inputs.prepared.graph;
    let mut env = inputs.env.clone();
    let mut baseline = env.clone();
    let mut next_event = 0;
    let mut cached: Option<Vec<(usize, f64, f64)>> = None;
    let mut event_log = Vec::new();
    let mut active = 0usize;
    let mut horizon_lines = Vec::new();

    let report = run_closed_loop(a.work, a.deadline, a.horizon, qoe.lambda, |t, prev: Option<&MixDecision>| {
        // the plan that ran longest last horizon is the one in place
        if let (Some(p), Some(rows)) = (prev, cached.as_ref()) {
            if let Some(top) = p.allocations.iter().max_by(|x, y| x.x.total_cmp(&y.x)) {
                active = rows[top.plan].0;
            }
        }
        // events land at the first horizon boundary at or after their time
        while next_event < trace.events().len() && trace.events()[next_event].t <= t {
            let ev = &trace.events()[next_event];
            env.apply_event(&ev.kind)?;
            let drift = relative_drift(&baseline, &env);
            let action = classify_event(&baseline, &env, &ev.kind);
            if action == Action::Replan {
                baseline = env.clone();
            }
            event_log.push(EventReport {
                t_s: ev.t,
                kind: event_name(&ev.kind),
                action: format!("{action:?}").to_lowercase(),
                drift: if drift.is_finite() { drift } else { -1.0 },
            });
            cached = None;
            next_event += 1;
        }
        if cached.is_none() {
            let mut rows = Vec::new();
            for (i, c) in cands.iter().enumerate() {
                let alive = c
                    .plan
                    .devices()
                    .all(|d| env.device_index(d).is_some_and(|x| env.is_present(x)));
                if !alive {
                    continue;
                }
                match refine_candidate(&c.plan, graph, &env, &inputs.workload, &qoe, manifest.chunks) {
                    Ok(r) => rows.push((i, r.latency, r.total_energy())),
                    Err(edgeplan_core::Error::UnschedulableTask { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            if rows.is_empty() {
                return Err(edgeplan_core::Error::NoFeasiblePlan);
            }
            cached = Some(rows);
        }
        let rows = cached.as_ref().expect("filled above");
        rows.iter()
            .map(|&(i, latency, energy)| {
                let switch = if i == active {
                    0.0
                } else {
                    switching_overhead(&cands[active].plan, &cands[i].plan, graph, &env, !a.inference, a.horizon.unwrap_or(0.0))
                        .map(|s| s.stall)
                        .unwrap_or(0.0)
                };
                Ok(PlanProfile::from_iteration(cands[i].name.clone(), latency, energy, 1.0, switch))
            })
            .collect()
    })?;

    for (k, h) in report.horizons.iter().enumerate() {
        let mix: Vec<String> = h.decision.allocations.iter().map(|x| format!("{}={:.3}", x.id, x.x)).collect();
        horizon_lines.push(format!(
            "horizon {:>3} t={:<10.1} len={:<8.1} quota={:<10.3} done={:<10.3} energy={:<12.1} {}{}",
            k + 1,
            h.start,
            h.delta,
            h.decision.expected,
            h.decision.progress,
            h.decision.energy,
            if mix.is_empty() { "idle".into() } else { mix.join(" ") },
            if h.decision.feasible { "" } else { "  (infeasible)" }
        ));
    }
    for e in &event_log {
        writeln!(out, "event t={} {} -> {}", e.t_s, e.kind, e.action)?;
    }
    for l in &horizon_lines {
        writeln!(out, "{l}")?;
    }
    writeln!(out, "work_done    {:.6} of {}", report.work_done, a.work)?;
    writeln!(out, "energy_j     {:.3}", report.energy)?;
    match report.finished_at {
        Some(f) => writeln!(out, "finished_s   {f:.3} (deadline {})", a.deadline)?,
        None => writeln!(out, "finished_s   not finished (deadline {})", a.deadline)?,
    }
    if let Some(p) = &a.out {
        save(
            &AdaptDoc {
                schema: <AdaptDoc as doc::Document>::SCHEMA.into(),
                work: a.work,
                deadline_s: a.deadline,
                work_done: report.work_done,
                energy_j: report.energy,
                finished_at_s: report.finished_at,
                met_deadline: report.met_deadline,
                all_feasible: report.all_feasible,
                events: event_log.clone(),
                horizons: report
                    .horizons
                    .iter()
                    .map(|h| HorizonReport {
                        start_s: h.start,
                        delta_s: h.delta,
                        expected: h.decision.expected,
                        progress: h.decision.progress,
                        energy_j: h.decision.energy,
                        feasible: h.decision.feasible,
                        allocations: h
                            .decision
                            .allocations
                            .iter()
                            .map(|x| AllocationReport {
                                plan: x.id.clone(),
                                x: x.x,
                            })
                            .collect(),
                    })
                    .collect(),
            },
            p,
        )?;
    }
    if !report.met_deadline {
        return Err(CliError::Infeasible("deadline missed".into()));
    }
    Ok(())
}

fn cmd_frontier(a: FrontierArgs, out: &mut dyn Write) -> CliResult {
    if a.lambdas.iter().any(|l| !(*l >= 0.0)) {
        return Err(CliError::Input("latency weights must be non-negative".into()));
    }
    let inputs = load_inputs(&a.inputs.model, &a.inputs.env, &a.inputs.qoe)?;
    let points = pipeline::frontier(&inputs, &a.lambdas, a.topk as usize, a.chunks, a.threads)?;
    writeln!(out, "lambda     latency_s    energy_j")?;
    for p in &points {
        writeln!(out, "{:<10} {:<12.6} {:.3}", p.lambda, p.latency, p.energy)?;
    }
    if let Some(path) = &a.out {
        let rows = points
            .iter()
            .map(|p| FrontierRow {
                lambda: p.lambda,
                latency_s: p.latency,
                energy_j: p.energy,
                stages: PlanDoc::from_plan(&p.plan, &inputs.workload, inputs.merge_delta).stages,
            })
            .collect::<Vec<_>>();
        save(
            &FrontierDoc {
                schema: <FrontierDoc as doc::Document>::SCHEMA.into(),
                points: rows,
            },
            path,
        )?;
    }
    Ok(())
}

fn cmd_generate(a: GenerateArgs, out: &mut dyn Write) -> CliResult {
    let inst = gen::random_instance(a.seed, a.layers as usize, a.devices as usize);
    ensure_dir(&a.out)?;
    save(&inst.model, &a.out.join("model.toml"))?;
    save(&inst.env, &a.out.join("env.toml"))?;
    save(&inst.qoe, &a.out.join("qoe.toml"))?;
    writeln!(out, "wrote {} (seed {})", absolute(&a.out).display(), a.seed)?;
    Ok(())
}
