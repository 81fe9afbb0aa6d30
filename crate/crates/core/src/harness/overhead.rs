use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{observe, FeatureSchema, GaussianBelief};
use crate::config::Config;
use crate::harness::HarnessError;
use crate::planner::{plan, PlannerConfig, SelectionPolicy};
use crate::world::{step, Scenario, Status};

/// Iteration levels of the published runtime table.
pub const PAPER_LEVELS: [u64; 6] = [250, 500, 1000, 2000, 4000, 8000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadRow {
    pub policy: SelectionPolicy,
    pub iterations: u64,
    pub mean_step_ms: f64,
    /// `mean_step_ms` over the baseline's at the same level.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadTable {
    pub scenario: String,
    pub steps: usize,
    pub rows: Vec<OverheadRow>,
}

impl OverheadTable {
    pub fn ratio(&self, policy: SelectionPolicy, iterations: u64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.policy == policy && r.iterations == iterations)
            .map(|r| r.ratio)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario,policy,iterations,mean_step_ms,ratio\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.3},{:.3}\n",
                self.scenario, r.policy, r.iterations, r.mean_step_ms, r.ratio
            ));
        }
        out
    }
}

/// Noisy beliefs along a closed-loop baseline run, restarted from the initial
/// state whenever the run ends before `steps` beliefs are collected.
fn record_beliefs(scenario: &Scenario, config: &Config, steps: usize, seed: u64) -> Result<Vec<GaussianBelief>, HarnessError> {
    let schema = FeatureSchema::for_scenario(scenario, &config.active_noise());
    let planner = PlannerConfig {
        iterations: 250,
        policy: SelectionPolicy::Baseline,
        ..config.planner.clone()
    };
    let mut sensor_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut planner_rng = ChaCha8Rng::seed_from_u64(seed);
    planner_rng.set_stream(1);
    let mut beliefs = Vec::with_capacity(steps);
    let mut truth = scenario.initial_state();
    while beliefs.len() < steps {
        let belief = observe(&truth, &schema, &mut sensor_rng)?;
        let planned = plan(&belief, scenario, &planner, &mut planner_rng)?;
        beliefs.push(belief);
        truth = step(&truth, planned.action(), scenario.dt)?;
        if truth.status != Status::Ok || truth.time_index >= scenario.episode_horizon {
            truth = scenario.initial_state();
        }
    }
    Ok(beliefs)
}

/// Mean wall time per planning step for every policy and level, measured on
/// the same `steps` recorded beliefs. Policies are interleaved per belief so
/// that drift in machine load hits all of them alike.
pub fn measure_overhead(
    scenario: &Scenario,
    policies: &[SelectionPolicy],
    levels: &[u64],
    steps: usize,
    config: &Config,
) -> Result<OverheadTable, HarnessError> {
    if steps == 0 || levels.is_empty() {
        return Err(HarnessError::Invalid("overhead needs at least one step and one level".into()));
    }
    let mut policies: Vec<SelectionPolicy> = policies.to_vec();
    policies.push(SelectionPolicy::Baseline);
    policies.sort();
    policies.dedup();
    let mut levels = levels.to_vec();
    levels.sort_unstable();
    levels.dedup();

    let beliefs = record_beliefs(scenario, config, steps, config.master_seed)?;
    let mut rows = Vec::new();
    for &iterations in &levels {
        let mut total_ms = vec![0.0; policies.len()];
        for (i, belief) in beliefs.iter().enumerate() {
            for (p, &policy) in policies.iter().enumerate() {
                let cfg = PlannerConfig {
                    iterations,
                    policy,
                    ..config.planner.clone()
                };
                let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed ^ i as u64);
                let started = Instant::now();
                plan(belief, scenario, &cfg, &mut rng)?;
                total_ms[p] += started.elapsed().as_secs_f64() * 1e3;
            }
        }
        let baseline = total_ms[policies.iter().position(|&p| p == SelectionPolicy::Baseline).expect("baseline added")];
        for (p, &policy) in policies.iter().enumerate() {
            rows.push(OverheadRow {
                policy,
                iterations,
                mean_step_ms: total_ms[p] / steps as f64,
                ratio: total_ms[p] / baseline,
            });
        }
    }
    Ok(OverheadTable {
        scenario: scenario.id.clone(),
        steps,
        rows,
    })
}

pub fn write_overhead_csv(table: &OverheadTable, path: &Path) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir.display().to_string(), e))?;
    }
    fs::write(path, table.to_csv()).map_err(|e| HarnessError::io(path.display().to_string(), e))
}
