//! Risk-aware cooperative trajectory planning under observation noise.
//!
//! The planner samples determinized start states from a Gaussian belief,
//! grows one UCT tree per start state, and fuses the trees' root statistics
//! with kernel regression into a robust joint action, scored either by a
//! lower confidence bound or by a tail-risk (CVaR) measure.
//!
//! Modules, bottom-up:
//! - [`world`]: deterministic driving world, transitions and rewards
//! - [`belief`]: Gaussian belief, noisy observation, start-state sampling
//! - [`mcts`]: single-tree UCT search
//! - [`risk`]: kernel regression and VaR/CVaR on empirical distributions
//! - [`planner`]: ensemble construction and final selection policies
//! - [`harness`]: episodes, experiment grids, export, runtime overhead

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod belief;
pub mod config;
pub mod geometry;
pub mod harness;
pub mod mcts;
pub mod planner;
pub mod risk;
pub mod world;

pub use belief::{GaussianBelief, NoiseProfile, WideningConfig};
pub use config::Config;
pub use mcts::{MctsConfig, SearchTree};
pub use planner::{plan, Ensemble, PlannerConfig, SelectionPolicy};
pub use risk::{ActionCandidate, EmpiricalDistribution, RiskConfig};
pub use world::{AgentAction, JointAction, Scenario, WorldState};
