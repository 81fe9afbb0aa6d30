use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::harness::{GridResults, HarnessError, Noise};
use crate::planner::SelectionPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Jsonl,
}

/// Success rates of one policy and noise setting: rows are scenarios,
/// columns iteration levels. Rates are held at the 3-decimal precision the
/// CSV carries.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub levels: Vec<u64>,
    pub rows: Vec<(String, Vec<f64>)>,
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

impl Heatmap {
    pub fn from_results(results: &GridResults, policy: SelectionPolicy, noise: Noise) -> Option<Self> {
        let cells: Vec<_> = results
            .cells
            .iter()
            .filter(|c| c.key.policy == policy && c.key.noise == noise)
            .collect();
        if cells.is_empty() {
            return None;
        }
        let mut levels: Vec<u64> = cells.iter().map(|c| c.key.iterations).collect();
        levels.sort_unstable();
        levels.dedup();
        let mut scenarios: Vec<&str> = cells.iter().map(|c| c.key.scenario.as_str()).collect();
        scenarios.sort_unstable();
        scenarios.dedup();
        let rows = scenarios
            .into_iter()
            .map(|scenario| {
                let values = levels
                    .iter()
                    .map(|&level| {
                        cells
                            .iter()
                            .find(|c| c.key.scenario == scenario && c.key.iterations == level)
                            .map_or(f64::NAN, |c| round3(c.success_rate()))
                    })
                    .collect();
                (scenario.to_string(), values)
            })
            .collect();
        Some(Self { levels, rows })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario");
        for level in &self.levels {
            out.push_str(&format!(",{level}"));
        }
        out.push('\n');
        for (scenario, values) in &self.rows {
            out.push_str(scenario);
            for v in values {
                out.push_str(&format!(",{v:.3}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self, HarnessError> {
        let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        let levels = header
            .iter()
            .skip(1)
            .map(|h| {
                h.parse::<u64>()
                    .map_err(|_| HarnessError::Invalid(format!("bad iteration level `{h}` in heatmap header")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            let scenario = record.get(0).unwrap_or_default().to_string();
            let values = record
                .iter()
                .skip(1)
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| HarnessError::Invalid(format!("bad success rate `{v}` for {scenario}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push((scenario, values));
        }
        Ok(Self { levels, rows })
    }
}

pub fn heatmap_file_name(policy: SelectionPolicy, noise: Noise) -> String {
    format!("heatmap_{policy}_{noise}.csv")
}

pub fn read_heatmap(path: impl AsRef<Path>) -> Result<Heatmap, HarnessError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path.display().to_string(), e))?;
    Heatmap::parse_csv(&text)
}

/// One CSV per policy × noise combination present in the results.
pub fn write_heatmaps(results: &GridResults, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir.display().to_string(), e))?;
    let mut written = Vec::new();
    for policy in SelectionPolicy::ALL {
        for noise in [Noise::Off, Noise::On] {
            if let Some(heatmap) = Heatmap::from_results(results, policy, noise) {
                let path = dir.join(heatmap_file_name(policy, noise));
                fs::write(&path, heatmap.to_csv()).map_err(|e| HarnessError::io(path.display().to_string(), e))?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

/// One JSON object per episode, in the results' canonical order.
pub fn write_jsonl(results: &GridResults, path: &Path) -> Result<(), HarnessError> {
    let file = fs::File::create(path).map_err(|e| HarnessError::io(path.display().to_string(), e))?;
    let mut out = std::io::BufWriter::new(file);
    for episode in &results.episodes {
        let line = serde_json::to_string(episode).expect("episode serializes");
        writeln!(out, "{line}").map_err(|e| HarnessError::io(path.display().to_string(), e))?;
    }
    out.flush().map_err(|e| HarnessError::io(path.display().to_string(), e))
}

pub fn export(results: &GridResults, format: ExportFormat, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    if results.cells.is_empty() {
        return Err(HarnessError::Invalid("nothing to export".into()));
    }
    match format {
        ExportFormat::Csv => write_heatmaps(results, dir),
        ExportFormat::Jsonl => {
            fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir.display().to_string(), e))?;
            let path = dir.join("episodes.jsonl");
            write_jsonl(results, &path)?;
            Ok(vec![path])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{CellKey, CellSummary};

    fn cell(scenario: &str, iterations: u64, successes: u32) -> CellSummary {
        CellSummary {
            key: CellKey {
                scenario: scenario.into(),
                iterations,
                policy: SelectionPolicy::Krlcb,
                noise: Noise::On,
            },
            episodes: 100,
            successes,
            errors: vec![],
        }
    }

    #[test]
    fn three_decimal_cells() {
        let results = GridResults {
            episodes: vec![],
            cells: vec![cell("merge", 250, 97)],
        };
        let map = Heatmap::from_results(&results, SelectionPolicy::Krlcb, Noise::On).unwrap();
        assert_eq!(map.to_csv(), "scenario,250\nmerge,0.970\n");
        assert!(Heatmap::from_results(&results, SelectionPolicy::Cvar, Noise::On).is_none());
    }

    #[test]
    fn matrix_shape_and_round_trip() {
        let results = GridResults {
            episodes: vec![],
            cells: vec![
                cell("b", 250, 50),
                cell("b", 1000, 33),
                cell("a", 250, 100),
                cell("a", 1000, 1),
            ],
        };
        let map = Heatmap::from_results(&results, SelectionPolicy::Krlcb, Noise::On).unwrap();
        let csv = map.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines, ["scenario,250,1000", "a,1.000,0.010", "b,0.500,0.330"]);
        assert_eq!(Heatmap::parse_csv(&csv).unwrap(), map);
    }

    #[test]
    fn rejects_malformed_csv() {
        assert!(Heatmap::parse_csv("scenario,abc\nx,0.1\n").is_err());
        assert!(Heatmap::parse_csv("scenario,10\nx,zero\n").is_err());
    }
}
