use alloc::string::String;

/// Errors raised by the planning, scheduling and simulation routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("model graph contains a cycle")]
    CycleDetected,
    #[error("edge {from} -> {to} references an unknown node")]
    DanglingEdge { from: String, to: String },
    #[error("duplicate identifier `{0}`")]
    DuplicateId(String),
    #[error("model graph is empty")]
    EmptyGraph,
    #[error("graph has multiple sources; add a virtual source first")]
    MultipleSources,
    #[error("graph has multiple sinks; add a virtual sink first")]
    MultipleSinks,
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown contention domain `{0}`")]
    UnknownDomain(String),
    #[error("node `{node}` cannot be hosted on device `{device}`")]
    UnhostableNode { node: String, device: String },
    #[error("no route from `{src}` to `{dst}`")]
    NoRoute { src: String, dst: String },
    #[error("plan has no estimated metrics")]
    MissingMetrics,
    #[error("no feasible plan")]
    NoFeasiblePlan,
    #[error("plan stages do not form a chain")]
    NonChainPlan,
    #[error("pipeline with {steps} steps cannot be filled by {microbatches} microbatches")]
    PipelineTooDeep { steps: usize, microbatches: u32 },
    #[error("communication task {task} sits in a zero-capacity domain")]
    UnschedulableTask { task: usize },
    #[error("deadline passed with {remaining} work units left")]
    DeadlinePassed { remaining: f64 },
    #[error("task {task} is assigned to departed device `{device}`")]
    DeadDevice { task: usize, device: String },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
