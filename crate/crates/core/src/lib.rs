//! Shapley values for allocation games.
//!
//! An allocation scenario has agents, indivisible goods with non-negative
//! values, the set of goods each agent is interested in and a capacity `k`.
//! The worth of a coalition is the value of an optimal allocation of goods to
//! its members. This crate computes each agent's Shapley value in that game:
//!
//! * [`preprocess`] shrinks a scenario into independent components and
//!   resolves agents whose value is known outright,
//! * [`exact`] enumerates all coalitions of a component,
//! * [`bounds`] brackets each value using the agent's neighbourhood only,
//! * [`sampling`] holds the permutation sampler and the per-agent range
//!   sampler,
//! * [`generator`] produces synthetic author/publication scenarios.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64`, the precision used by the command line tool.

pub mod bounds;
pub mod error;
pub mod exact;
pub mod fixtures;
pub mod generator;
pub mod matching;
pub mod model;
pub mod oracle;
pub mod parallel;
pub mod preprocess;
pub mod sampling;
pub mod scalar;

pub use error::{Error, Result};
pub use model::{
    AgentError, AgentRecord, AgentsGraph, AllocationGame, AllocationScenario, CharacteristicCache,
    Coalition, Comparison, Method, RecordKind, ReportMeta, ShapleyReport,
};
pub use scalar::{Scalar, Summation};

pub type Scenario = AllocationScenario<f64>;
pub type Game = AllocationGame<f64>;
pub type Cache = CharacteristicCache<f64>;
pub type Selection = matching::Selection<f64>;
pub type PreprocessOutcome = preprocess::PreprocessOutcome<f64>;

pub type ScenarioF32 = AllocationScenario<f32>;
pub type GameF32 = AllocationGame<f32>;
