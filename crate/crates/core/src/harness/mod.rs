//! Experiment harness: closed-loop episodes, seed grids, export, and
//! runtime-overhead measurement.

mod episode;
mod export;
mod grid;
mod overhead;
mod scenarios;
mod seed;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::BeliefError;
use crate::config::ConfigError;
use crate::planner::PlanError;
use crate::world::WorldError;

pub use episode::{run_episode, EpisodeResult, Outcome};
pub use export::{export, read_heatmap, write_heatmaps, write_jsonl, ExportFormat, Heatmap};
pub use grid::{run_grid, CellKey, CellSummary, GridResults, GridSpec};
pub use overhead::{measure_overhead, write_overhead_csv, OverheadRow, OverheadTable, PAPER_LEVELS};
pub use scenarios::{bundled_scenarios, load_scenarios, BUNDLED};
pub use seed::derive_seed;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid experiment: {0}")]
    Invalid(String),
}

impl HarnessError {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io {
            context: context.into(),
            source,
        }
    }
}

/// Whether the simulated sensors are noisy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Noise {
    Off,
    On,
}

impl Noise {
    pub fn name(&self) -> &'static str {
        match self {
            Noise::Off => "off",
            Noise::On => "on",
        }
    }
}

impl fmt::Display for Noise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Noise {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "on" => Ok(Noise::On),
            "off" => Ok(Noise::Off),
            other => Err(format!("unknown noise setting `{other}` (expected on or off)")),
        }
    }
}
