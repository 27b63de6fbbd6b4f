//! Reaction to environment changes: reschedule the current plan or replan.

use crate::env::{Environment, QoeSpec, Workload};
use crate::error::Result;
use crate::graph::{ChainComponent, ModelGraph};
use crate::net::select::{refine_and_select, refine_candidate, Refined};
use crate::partition::partition_search;
use crate::sim::TraceEventKind;

use super::switching::{switching_overhead, SwitchCost};

/// Largest relative drift absorbed by rescheduling alone.
pub const RESCHEDULE_THRESHOLD: f64 = 0.1;

// absorbs rounding in ratios such as 1.1 * c / c - 1
const DRIFT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    Reschedule,
    Replan,
}

fn rel(new: f64, base: f64) -> f64 {
    if base == 0.0 {
        if new == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        ((new - base) / base).abs()
    }
}

/// Largest relative change of any device speed or domain capacity between
/// two states of the same environment; infinite if membership changed.
pub fn relative_drift(baseline: &Environment, current: &Environment) -> f64 {
    let mut drift = 0.0f64;
    for d in 0..baseline.devices().len() {
        if baseline.is_present(d) != current.is_present(d) {
            return f64::INFINITY;
        }
        drift = drift.max(rel(current.speed(d), baseline.speed(d)));
    }
    for k in 0..baseline.n_domains() {
        drift = drift.max(rel(current.domain_capacity(k), baseline.domain_capacity(k)));
    }
    drift
}

/// Threshold rule. `current` already includes `event`; drift is measured
/// against the environment the active plan was made for, so small changes
/// that accumulate eventually trigger a replan.
pub fn classify_event(baseline: &Environment, current: &Environment, event: &TraceEventKind) -> Action {
    match event {
        TraceEventKind::DeviceLeave { .. } | TraceEventKind::DeviceJoin { .. } => Action::Replan,
        _ if relative_drift(baseline, current) <= RESCHEDULE_THRESHOLD + DRIFT_TOL => Action::Reschedule,
        _ => Action::Replan,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdapterConfig {
    /// Candidates kept by the partition search.
    pub k: usize,
    /// Chunks per transfer, zero for fractional schedules.
    pub chunks: usize,
    /// Training state changes every step and must move synchronously.
    pub mutable_state: bool,
    /// Seconds available for background copies of immutable state.
    pub overlap: f64,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        AdapterConfig {
            k: 5,
            chunks: crate::net::DEFAULT_CHUNKS,
            mutable_state: true,
            overlap: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventOutcome {
    /// What the threshold rule suggested.
    pub classified: Action,
    /// What was committed; a reschedule that breaks the latency target
    /// escalates to a replan.
    pub action: Action,
    pub makespan: f64,
    pub switch: Option<SwitchCost>,
}

/// Single control loop holding the active plan and its schedule.
pub struct Adapter<'a> {
    graph: &'a ModelGraph,
    components: &'a [ChainComponent],
    workload: Workload,
    qoe: QoeSpec,
    cfg: AdapterConfig,
    baseline: Environment,
    current: Environment,
    active: Refined,
}

impl<'a> Adapter<'a> {
    pub fn new(
        graph: &'a ModelGraph,
        components: &'a [ChainComponent],
        env: &Environment,
        workload: Workload,
        qoe: QoeSpec,
        cfg: AdapterConfig,
    ) -> Result<Self> {
        let active = plan_for(graph, components, env, &workload, &qoe, &cfg)?;
        Ok(Adapter {
            graph,
            components,
            workload,
            qoe,
            cfg,
            baseline: env.clone(),
            current: env.clone(),
            active,
        })
    }

    pub fn active(&self) -> &Refined {
        &self.active
    }

    pub fn environment(&self) -> &Environment {
        &self.current
    }

    pub fn handle_event(&mut self, event: &TraceEventKind) -> Result<EventOutcome> {
        self.current.apply_event(event)?;
        let classified = classify_event(&self.baseline, &self.current, event);
        if classified == Action::Reschedule {
            if let Ok(r) = refine_candidate(
                &self.active.plan,
                self.graph,
                &self.current,
                &self.workload,
                &self.qoe,
                self.cfg.chunks,
            ) {
                if r.latency <= self.qoe.t_qoe {
                    self.active = r;
                    return Ok(EventOutcome {
                        classified,
                        action: Action::Reschedule,
                        makespan: self.active.latency,
                        switch: None,
                    });
                }
            }
        }
        let next = plan_for(self.graph, self.components, &self.current, &self.workload, &self.qoe, &self.cfg)?;
        let switch = switching_overhead(
            &self.active.plan,
            &next.plan,
            self.graph,
            &self.current,
            self.cfg.mutable_state,
            self.cfg.overlap,
        )?;
        self.active = next;
        self.baseline = self.current.clone();
        Ok(EventOutcome {
            classified,
            action: Action::Replan,
            makespan: self.active.latency,
            switch: Some(switch),
        })
    }
}

fn plan_for(
    graph: &ModelGraph,
    components: &[ChainComponent],
    env: &Environment,
    workload: &Workload,
    qoe: &QoeSpec,
    cfg: &AdapterConfig,
) -> Result<Refined> {
    let cands = partition_search(graph, components, env, workload, qoe, cfg.k)?;
    let sel = refine_and_select(&cands, graph, env, workload, qoe, cfg.chunks)?;
    Ok(sel.ranking.into_iter().next().expect("selection is non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::fixtures::uniform_env;
    use crate::graph::{build_model_graph, serial_decompose, with_virtual_terminals, LayerNode};

    fn setup() -> (ModelGraph, Environment) {
        let layers = ["a", "b", "c", "d"];
        let g = build_model_graph(
            layers.iter().map(|l| LayerNode::new(*l, 1_000_000, 2_000_000)).collect(),
            layers.windows(2).map(|w| (w[0].into(), w[1].into())).collect(),
        )
        .unwrap();
        let env = uniform_env(&layers, &[0.1, 0.1, 0.12], 1e8, Some(1e8));
        (with_virtual_terminals(&g), env)
    }

    fn bw(factor: f64) -> TraceEventKind {
        TraceEventKind::BwChange {
            domain: "shared".into(),
            new_capacity: 1e8 * factor,
        }
    }

    #[test]
    fn thresholds() {
        let (_, env) = setup();
        let mut small = env.clone();
        small.apply_event(&bw(0.95)).unwrap();
        assert_eq!(classify_event(&env, &small, &bw(0.95)), Action::Reschedule);
        let mut big = env.clone();
        big.apply_event(&bw(0.5)).unwrap();
        assert_eq!(classify_event(&env, &big, &bw(0.5)), Action::Replan);
        let leave = TraceEventKind::DeviceLeave { device: "d2".into() };
        let mut gone = env.clone();
        gone.apply_event(&leave).unwrap();
        assert_eq!(classify_event(&env, &gone, &leave), Action::Replan);
    }

    #[test]
    fn small_drifts_accumulate() {
        let (_, env) = setup();
        let mut cur = env.clone();
        for f in [0.95, 0.9, 0.85] {
            cur.apply_event(&bw(f)).unwrap();
        }
        assert_eq!(classify_event(&env, &cur, &bw(0.85)), Action::Replan);
    }

    #[test]
    fn adapter_reschedules_then_replans_on_departure() {
        let (g, env) = setup();
        let comps = serial_decompose(&g).unwrap();
        let wl = Workload {
            microbatches: 4,
            units_per_microbatch: 1,
        };
        let qoe = QoeSpec {
            t_qoe: 1e6,
            lambda: 1.0,
        };
        let mut ad = Adapter::new(&g, &comps, &env, wl, qoe, AdapterConfig::default()).unwrap();
        let out = ad.handle_event(&bw(0.95)).unwrap();
        assert_eq!(out.action, Action::Reschedule);
        let leave = TraceEventKind::DeviceLeave { device: "d0".into() };
        let out = ad.handle_event(&leave).unwrap();
        assert_eq!(out.action, Action::Replan);
        assert!(out.switch.is_some());
        assert!(ad.active().plan.devices().all(|d| d.0 != "d0"));
    }

    #[test]
    fn qoe_violation_escalates() {
        let (g, env) = setup();
        let comps = serial_decompose(&g).unwrap();
        let wl = Workload {
            microbatches: 4,
            units_per_microbatch: 1,
        };
        let probe = Adapter::new(&g, &comps, &env, wl, QoeSpec { t_qoe: 1e6, lambda: 1.0 }, AdapterConfig::default())
            .unwrap()
            .active()
            .latency;
        let qoe = QoeSpec {
            t_qoe: probe * 1.0000001,
            lambda: 1.0,
        };
        let mut ad = Adapter::new(&g, &comps, &env, wl, qoe, AdapterConfig::default()).unwrap();
        let slow = TraceEventKind::ComputeScale {
            device: ad.active().plan.stages[0].devices[0].clone(),
            factor: 0.92,
        };
        let out = ad.handle_event(&slow).unwrap();
        assert_eq!(out.classified, Action::Reschedule);
        assert_eq!(out.action, Action::Replan);
    }
}
