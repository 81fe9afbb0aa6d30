use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{observe, FeatureSchema, NoiseProfile};
use crate::config::Config;
use crate::harness::{HarnessError, Noise};
use crate::planner::{plan, PlannerConfig, SelectionPolicy};
use crate::world::{step, Scenario, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    /// Every agent reached the horizon collision-free and valid.
    Success,
    Collision,
    Invalid,
}

impl Outcome {
    pub fn is_success(&self) -> bool {
        *self == Outcome::Success
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub scenario: String,
    pub policy: SelectionPolicy,
    pub iterations: u64,
    pub seed: u64,
    pub noise: Noise,
    pub outcome: Outcome,
    pub steps: u32,
    /// Planning steps where at least one agent got the default action.
    pub fallback_steps: u32,
    /// Mean ensemble size over the planning steps.
    pub mean_start_states: f64,
    /// Wall time of every planning step in milliseconds.
    pub step_ms: Vec<f64>,
}

impl EpisodeResult {
    pub fn mean_step_ms(&self) -> f64 {
        if self.step_ms.is_empty() {
            0.0
        } else {
            self.step_ms.iter().sum::<f64>() / self.step_ms.len() as f64
        }
    }

    /// Copy with the timing fields cleared, for determinism comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            step_ms: Vec::new(),
            ..self.clone()
        }
    }
}

/// Closed loop: observe the true world, plan on the belief, apply the joint
/// action to the true world, until a terminal status or the horizon.
pub fn run_episode(
    scenario: &Scenario,
    policy: SelectionPolicy,
    iterations: u64,
    seed: u64,
    noise: Noise,
    config: &Config,
) -> Result<EpisodeResult, HarnessError> {
    let profile = match noise {
        Noise::On => config.active_noise(),
        Noise::Off => NoiseProfile::off(),
    };
    let planner = PlannerConfig {
        iterations,
        policy,
        ..config.planner.clone()
    };
    let schema = FeatureSchema::for_scenario(scenario, &profile);
    let mut sensor_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut planner_rng = ChaCha8Rng::seed_from_u64(seed);
    planner_rng.set_stream(1);

    let mut truth = scenario.initial_state();
    let mut outcome = Outcome::Success;
    let mut steps = 0;
    let mut fallback_steps = 0;
    let mut start_states = 0usize;
    let mut step_ms = Vec::with_capacity(scenario.episode_horizon as usize);
    while truth.time_index < scenario.episode_horizon {
        let belief = observe(&truth, &schema, &mut sensor_rng)?;
        let started = Instant::now();
        let planned = plan(&belief, scenario, &planner, &mut planner_rng)?;
        step_ms.push(started.elapsed().as_secs_f64() * 1e3);
        if planned.selection.any_fallback() {
            fallback_steps += 1;
        }
        start_states += planned.ensemble.len();
        truth = step(&truth, planned.action(), scenario.dt)?;
        steps += 1;
        match truth.status {
            Status::Ok => {}
            Status::Collision => {
                outcome = Outcome::Collision;
                break;
            }
            Status::Invalid => {
                outcome = Outcome::Invalid;
                break;
            }
        }
    }
    Ok(EpisodeResult {
        scenario: scenario.id.clone(),
        policy,
        iterations,
        seed,
        noise,
        outcome,
        steps,
        fallback_steps,
        mean_start_states: start_states as f64 / steps.max(1) as f64,
        step_ms,
    })
}
