//! Runtime adaptation: horizon quotas, plan mixing, reaction to dynamics
//! and the cost of switching plans.

pub mod closed_loop;
pub mod events;
pub mod mix;
pub mod switching;

pub use closed_loop::{run_closed_loop, HorizonRecord, LoopReport};
pub use events::{classify_event, relative_drift, Action, Adapter, AdapterConfig, EventOutcome, RESCHEDULE_THRESHOLD};
pub use mix::{default_horizon, expected_progress, mix_plans, Allocation, HorizonState, MixDecision, PlanProfile};
pub use switching::{switching_overhead, SwitchCost};
