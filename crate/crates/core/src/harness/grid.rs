use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::harness::{derive_seed, run_episode, EpisodeResult, HarnessError, Noise};
use crate::planner::SelectionPolicy;
use crate::world::Scenario;

#[derive(Debug, Clone)]
pub struct GridSpec {
    pub scenarios: Vec<Scenario>,
    pub policies: Vec<SelectionPolicy>,
    pub iteration_levels: Vec<u64>,
    /// Episodes per cell.
    pub seeds: u32,
    pub noise: Vec<Noise>,
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let empty = [
            ("scenarios", self.scenarios.is_empty()),
            ("policies", self.policies.is_empty()),
            ("iteration levels", self.iteration_levels.is_empty()),
            ("noise settings", self.noise.is_empty()),
            ("seeds", self.seeds == 0),
        ];
        if let Some((what, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(HarnessError::Invalid(format!("grid has no {what}")));
        }
        if self.iteration_levels.contains(&0) {
            return Err(HarnessError::Invalid("iteration levels must be >= 1".into()));
        }
        Ok(())
    }

    /// Distinct levels, ascending.
    pub fn levels(&self) -> Vec<u64> {
        let mut levels = self.iteration_levels.clone();
        levels.sort_unstable();
        levels.dedup();
        levels
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub scenario: String,
    pub iterations: u64,
    pub policy: SelectionPolicy,
    pub noise: Noise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub key: CellKey,
    pub episodes: u32,
    pub successes: u32,
    /// Episodes that aborted with an error instead of an outcome.
    pub errors: Vec<String>,
}

impl CellSummary {
    /// Successes over all seeds of the cell; errored episodes count as failures.
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.episodes as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResults {
    /// Ordered by scenario id, iterations, policy, noise, then seed index.
    pub episodes: Vec<EpisodeResult>,
    /// Same ordering as `episodes`, one per cell.
    pub cells: Vec<CellSummary>,
}

impl GridResults {
    pub fn cell(&self, scenario: &str, policy: SelectionPolicy, iterations: u64, noise: Noise) -> Option<&CellSummary> {
        self.cells.iter().find(|c| {
            c.key.scenario == scenario && c.key.policy == policy && c.key.iterations == iterations && c.key.noise == noise
        })
    }

    pub fn success_rate(&self, scenario: &str, policy: SelectionPolicy, iterations: u64, noise: Noise) -> Option<f64> {
        self.cell(scenario, policy, iterations, noise).map(CellSummary::success_rate)
    }
}

struct Task<'a> {
    key: CellKey,
    scenario: &'a Scenario,
    index: u32,
}

/// Runs every cell of the grid. Episodes are independent and seeded from
/// their cell coordinates, so the results do not depend on `parallelism`.
pub fn run_grid(spec: &GridSpec, config: &Config, parallelism: usize) -> Result<GridResults, HarnessError> {
    spec.validate()?;
    let mut scenarios: Vec<&Scenario> = spec.scenarios.iter().collect();
    scenarios.sort_by(|a, b| a.id.cmp(&b.id));
    let mut policies = spec.policies.clone();
    policies.sort();
    policies.dedup();
    let mut noise = spec.noise.clone();
    noise.sort();
    noise.dedup();

    let mut tasks = Vec::new();
    for scenario in &scenarios {
        for &iterations in &spec.levels() {
            for &policy in &policies {
                for &n in &noise {
                    let key = CellKey {
                        scenario: scenario.id.clone(),
                        iterations,
                        policy,
                        noise: n,
                    };
                    for index in 0..spec.seeds {
                        tasks.push(Task {
                            key: key.clone(),
                            scenario,
                            index,
                        });
                    }
                }
            }
        }
    }

    let run = |task: &Task| {
        let seed = derive_seed(
            config.master_seed,
            &task.key.scenario,
            task.key.policy,
            task.key.iterations,
            task.index,
            task.key.noise,
        );
        run_episode(task.scenario, task.key.policy, task.key.iterations, seed, task.key.noise, config)
            .map_err(|e| e.to_string())
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| HarnessError::Invalid(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<EpisodeResult, String>> = pool.install(|| tasks.par_iter().map(run).collect());

    let mut episodes = Vec::with_capacity(outcomes.len());
    let mut cells: Vec<CellSummary> = Vec::new();
    for (task, outcome) in tasks.iter().zip(outcomes) {
        if cells.last().is_none_or(|c| c.key != task.key) {
            cells.push(CellSummary {
                key: task.key.clone(),
                episodes: 0,
                successes: 0,
                errors: Vec::new(),
            });
        }
        let cell = cells.last_mut().expect("pushed above");
        cell.episodes += 1;
        match outcome {
            Ok(result) => {
                if result.outcome.is_success() {
                    cell.successes += 1;
                }
                episodes.push(result);
            }
            Err(message) => cell.errors.push(format!("seed {}: {message}", task.index)),
        }
    }
    Ok(GridResults { episodes, cells })
}
