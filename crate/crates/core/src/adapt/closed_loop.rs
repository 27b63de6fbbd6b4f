//! Horizon-by-horizon execution toward a deadline.

use alloc::vec::Vec;

use super::mix::{mix_plans, HorizonState, MixDecision, PlanProfile};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct HorizonRecord {
    pub start: f64,
    pub delta: f64,
    pub w_rem: f64,
    pub decision: MixDecision,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoopReport {
    pub horizons: Vec<HorizonRecord>,
    pub work_done: f64,
    pub energy: f64,
    /// When the last unit of work completed.
    pub finished_at: Option<f64>,
    pub met_deadline: bool,
    /// Every horizon found a mixture meeting its quota.
    pub all_feasible: bool,
}

/// Runs `work` units against `deadline` seconds. Each horizon mixes the
/// plans returned by `profiles_at(start, previous decision)`, which are
/// taken to hold for the whole horizon. `delta` fixes the horizon length;
/// the default follows the remaining time.
pub fn run_closed_loop<F>(work: f64, deadline: f64, delta: Option<f64>, lambda: f64, mut profiles_at: F) -> Result<LoopReport>
where
    F: FnMut(f64, Option<&MixDecision>) -> Result<Vec<PlanProfile>>,
{
    if !(work >= 0.0) || !(deadline > 0.0) || delta.is_some_and(|d| !(d > 0.0)) {
        return Err(Error::InvalidArgument("work, deadline and horizon must be positive".into()));
    }
    let tol = 1e-9 * work.max(1.0);
    let mut t = 0.0;
    let mut w_rem = work;
    let mut energy = 0.0;
    let mut horizons = Vec::new();
    let mut all_feasible = true;
    let mut finished_at = (work <= tol).then_some(0.0);
    while w_rem > tol {
        let d_rem = deadline - t;
        if d_rem <= 0.0 {
            break;
        }
        let h = HorizonState::new(w_rem, d_rem, delta);
        let profiles = profiles_at(t, horizons.last().map(|h: &HorizonRecord| &h.decision))?;
        let decision = mix_plans(&profiles, &h, lambda)?;
        all_feasible &= decision.feasible;
        energy += decision.energy;
        let done = decision.progress.min(w_rem);
        if w_rem - done <= tol {
            // plans run back to back, so the pace within the horizon is the
            // mixture's average
            let frac = if decision.progress > 0.0 { w_rem / decision.progress } else { 1.0 };
            finished_at = Some(t + (decision.busy_fraction() * frac).min(1.0) * h.delta);
        }
        horizons.push(HorizonRecord {
            start: t,
            delta: h.delta,
            w_rem,
            decision,
        });
        w_rem -= done;
        // the last horizon is exactly the remaining time
        t = if h.delta >= d_rem { deadline } else { t + h.delta };
    }
    let met_deadline = finished_at.is_some_and(|f| f <= deadline * (1.0 + 1e-12));
    Ok(LoopReport {
        horizons,
        work_done: work - w_rem.max(0.0),
        energy,
        finished_at,
        met_deadline,
        all_feasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn plans(scale: f64) -> Vec<PlanProfile> {
        vec![
            PlanProfile {
                id: "eco".into(),
                rate: 0.01 * scale,
                power: 10.0,
                switch_cost: 0.0,
            },
            PlanProfile {
                id: "fast".into(),
                rate: 0.03 * scale,
                power: 50.0,
                switch_cost: 5.0,
            },
        ]
    }

    #[test]
    fn finishes_on_time_at_uniform_pace() {
        let r = run_closed_loop(200.0, 10_000.0, None, 1.0, |_, _| Ok(plans(1.0))).unwrap();
        assert!(r.all_feasible && r.met_deadline);
        assert!((r.work_done - 200.0).abs() < 1e-6);
        // quotas stay constant while the pace holds
        let q0 = r.horizons[0].decision.expected / r.horizons[0].delta;
        assert!(r.horizons.iter().all(|h| (h.decision.expected / h.delta - q0).abs() < 1e-9));
    }

    #[test]
    fn slowdown_shifts_load_to_fast_plan() {
        let r = run_closed_loop(200.0, 10_000.0, Some(1000.0), 1.0, |t, _| Ok(plans(if t >= 5000.0 { 0.8 } else { 1.0 }))).unwrap();
        assert!(r.met_deadline);
        let late = r.horizons.last().unwrap().decision.fractions(2);
        assert!(late[1] > 0.0);
    }

    #[test]
    fn infeasible_horizon_is_reported() {
        let r = run_closed_loop(1000.0, 1000.0, None, 1.0, |_, _| Ok(plans(1.0))).unwrap();
        assert!(!r.all_feasible);
        assert!(!r.met_deadline);
    }
}
