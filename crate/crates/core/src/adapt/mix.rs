//! Uniform-progress quotas and time-sharing of plans within a horizon.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Steady-state behaviour of one executable plan.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanProfile {
    pub id: String,
    /// Work units per second.
    pub rate: f64,
    /// Average draw in watts while the plan runs.
    pub power: f64,
    /// Seconds lost when the plan is activated.
    pub switch_cost: f64,
}

impl PlanProfile {
    /// Profile of a plan completing `units` of work per iteration.
    pub fn from_iteration(id: impl Into<String>, latency: f64, energy: f64, units: f64, switch_cost: f64) -> Self {
        PlanProfile {
            id: id.into(),
            rate: units / latency,
            power: energy / latency,
            switch_cost,
        }
    }

    fn useful(&self, delta: f64) -> f64 {
        (delta - self.switch_cost).max(0.0)
    }

    /// Work done when run for the whole horizon.
    pub fn progress(&self, delta: f64) -> f64 {
        self.rate * self.useful(delta)
    }

    /// Energy spent when run for the whole horizon.
    pub fn energy(&self, delta: f64) -> f64 {
        self.power * self.useful(delta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HorizonState {
    pub w_rem: f64,
    pub d_rem: f64,
    pub delta: f64,
}

impl HorizonState {
    /// Uses [`default_horizon`] when `delta` is `None`.
    pub fn new(w_rem: f64, d_rem: f64, delta: Option<f64>) -> Self {
        let delta = delta.unwrap_or_else(|| default_horizon(d_rem)).min(d_rem);
        HorizonState { w_rem, d_rem, delta }
    }
}

/// A twentieth of the remaining time, clamped to [60 s, 1800 s] and never
/// beyond the deadline.
pub fn default_horizon(d_rem: f64) -> f64 {
    (d_rem / 20.0).clamp(60.0, 1800.0).min(d_rem)
}

/// Work that must be done in the next horizon to stay on a uniform pace.
pub fn expected_progress(h: &HorizonState) -> Result<f64> {
    if h.w_rem <= 0.0 {
        return Ok(0.0);
    }
    if h.d_rem <= 0.0 {
        return Err(Error::DeadlinePassed { remaining: h.w_rem });
    }
    Ok(h.delta.min(h.d_rem) / h.d_rem * h.w_rem)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Allocation {
    /// Index into the profile list.
    pub plan: usize,
    pub id: String,
    /// Fraction of the horizon.
    pub x: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixDecision {
    pub allocations: Vec<Allocation>,
    pub energy: f64,
    pub progress: f64,
    pub expected: f64,
    pub shortfall: f64,
    pub objective: f64,
    pub feasible: bool,
}

impl MixDecision {
    pub fn fractions(&self, n: usize) -> Vec<f64> {
        let mut x = vec![0.0; n];
        for a in &self.allocations {
            x[a.plan] += a.x;
        }
        x
    }

    pub fn busy_fraction(&self) -> f64 {
        self.allocations.iter().map(|a| a.x).sum()
    }
}

/// Cheapest time-sharing of `profiles` over the horizon that meets the
/// expected progress with fractions summing to at most one. When no mixture
/// can meet it, the plan with the most progress runs for the whole horizon
/// and the decision is flagged infeasible; the objective then adds
/// `lambda` times the shortfall.
///
/// The program has two constraints, so some optimal vertex uses at most two
/// plans; single plans and pairs are enumerated exhaustively.
pub fn mix_plans(profiles: &[PlanProfile], h: &HorizonState, lambda: f64) -> Result<MixDecision> {
    if profiles.is_empty() {
        return Err(Error::InvalidArgument("no plan profiles".into()));
    }
    let ep = expected_progress(h)?;
    let g: Vec<f64> = profiles.iter().map(|p| p.progress(h.delta)).collect();
    let a: Vec<f64> = profiles.iter().map(|p| p.energy(h.delta)).collect();
    let decide = |alloc: Vec<(usize, f64)>, feasible: bool| {
        let energy: f64 = alloc.iter().map(|&(p, x)| a[p] * x).sum();
        let progress: f64 = alloc.iter().map(|&(p, x)| g[p] * x).sum();
        let shortfall = if feasible { 0.0 } else { (ep - progress).max(0.0) };
        MixDecision {
            allocations: alloc
                .into_iter()
                .map(|(plan, x)| Allocation {
                    plan,
                    id: profiles[plan].id.clone(),
                    x,
                })
                .collect(),
            energy,
            progress,
            expected: ep,
            shortfall,
            objective: energy + lambda * shortfall,
            feasible,
        }
    };
    if ep <= 0.0 {
        return Ok(decide(Vec::new(), true));
    }

    let mut best: Option<(f64, Vec<(usize, f64)>)> = None;
    let mut offer = |energy: f64, alloc: Vec<(usize, f64)>| {
        let better = match &best {
            None => true,
            Some((e, cur)) => energy < *e || (energy == *e && alloc.len() < cur.len()),
        };
        if better {
            best = Some((energy, alloc));
        }
    };
    for p in 0..profiles.len() {
        if g[p] >= ep && g[p] > 0.0 {
            let x = (ep / g[p]).min(1.0);
            offer(a[p] * x, vec![(p, x)]);
        }
    }
    for p in 0..profiles.len() {
        for q in 0..profiles.len() {
            // p carries the excess, q runs below quota
            if p == q || !(g[p] > ep && g[q] < ep) {
                continue;
            }
            let xp = (ep - g[q]) / (g[p] - g[q]);
            let xq = 1.0 - xp;
            let mut alloc = vec![(p, xp), (q, xq)];
            alloc.sort_by_key(|x| x.0);
            offer(a[p] * xp + a[q] * xq, alloc);
        }
    }
    Ok(match best {
        Some((_, alloc)) => decide(alloc, true),
        None => {
            let mut top = 0;
            for p in 1..profiles.len() {
                if g[p] > g[top] || (g[p] == g[top] && a[p] < a[top]) {
                    top = p;
                }
            }
            decide(vec![(top, 1.0)], false)
        }
    })
}
