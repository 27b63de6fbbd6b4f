//! Communication-expanded graphs, contention-aware scheduling and chunking.

pub mod cep;
pub mod chunk;
pub mod schedule;
pub mod select;
pub mod verify;

pub use cep::{build_cep_graph, CepGraph, CepTask, Direction, TaskKind};
pub use chunk::{chunkify, DEFAULT_CHUNKS};
pub use schedule::{solve_schedule, BwSegment, Chunk, Interval, Schedule};
pub use select::{refine_and_select, refine_candidate, schedule_energy, select, Refined, Selection};
pub use verify::{verify_schedule, Violation};
