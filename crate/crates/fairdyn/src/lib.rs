//! Simulation engine for the long-term dynamics of multi-agent fair selection.
//!
//! `K` rank-ordered institutions repeatedly admit applicants from a shared
//! two-group pool. Each round, every institution balances score maximization
//! against a squared-deviation fairness loss toward a common target `alpha`,
//! either sequentially and independently ([`policy::mfg_policy`]) or jointly
//! through a central coordinator ([`policy::cmfg_policy`]). The admission
//! outcomes feed back into the pool composition through a configurable
//! reinforcement model ([`evolve::EvolutionModel`]), and the harness
//! ([`sim`]) runs seeded Monte Carlo batches over full trajectories.
//!
//! The crate is organized as a library with one runnable example per major
//! capability (see `examples/`), plus a thin `fairdyn` binary that runs
//! experiments from TOML configs and built-in presets.

pub mod config;
pub mod dist;
pub mod evolve;
pub mod ingest;
pub mod policy;
pub mod pool;
pub mod sim;

pub use config::{ExperimentConfig, Preset};
pub use dist::{Bound, ScoreDistribution};
pub use evolve::{EvolutionModel, StepSchedule};
pub use policy::{
    ActionProfile, EngineMode, FairnessTarget, GroupDistributions, InstitutionConfig, PolicyKind,
};
pub use pool::{PoolConfig, PoolState};
pub use sim::{BatchSummary, RoundRecord, Trajectory};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("probability out of range: {0}")]
    ProbabilityOutOfRange(f64),
    #[error("zero-probability admission slice")]
    DegenerateSlice,
    #[error("action {action} outside feasible interval [{lo}, {hi}]")]
    InfeasibleAction { action: f64, lo: f64, hi: f64 },
    #[error("inconsistent prior actions: {0}")]
    InconsistentPriors(String),
    #[error("pool state {0} outside (0, 1)")]
    InvalidState(f64),
    #[error("over-demand: requested {requested} applicants from a pool of {available}")]
    OverDemand { requested: usize, available: usize },
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },
    #[error("ingest error: {0}")]
    Ingest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
