use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use riskplan::config::Config;
use riskplan::harness::{
    export, load_scenarios, measure_overhead, run_grid, write_overhead_csv, ExportFormat, GridSpec, HarnessError,
    Noise,
};
use riskplan::risk;
use riskplan::SelectionPolicy;

#[derive(Parser)]
#[command(name = "riskplan", version, about = "Risk-aware cooperative trajectory planning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Baseline,
    Krlcb,
    Cvar,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    On,
    Off,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Var,
    VarPlus,
    Cvar,
    Ccvar,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seed grid and write heatmaps plus the episode log.
    Run {
        /// Scenario file, directory, bundled id, or `all`.
        #[arg(long, default_value = "all")]
        scenario: String,
        #[arg(long, value_enum, default_value = "all")]
        policy: PolicyArg,
        #[arg(long, value_delimiter = ',', default_value = "250,500,1000,2000")]
        iterations: Vec<u64>,
        /// Episodes per grid cell.
        #[arg(long, default_value_t = 100)]
        seeds: u32,
        #[arg(long, value_enum, default_value = "both")]
        noise: NoiseArg,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = default_parallelism())]
        parallelism: usize,
    },
    /// Evaluate a risk metric on a column of samples.
    RiskEval {
        #[arg(long, value_enum)]
        metric: Metric,
        #[arg(long)]
        alpha: f64,
        /// CSV with the samples in its first column; a non-numeric header is skipped.
        #[arg(long)]
        input: PathBuf,
    },
    /// Per-step planning time of every policy relative to the baseline.
    Overhead {
        #[arg(long, default_value = "merge2")]
        scenario: String,
        #[arg(long, value_delimiter = ',', default_value = "250,500,1000,2000,4000,8000")]
        iterations: Vec<u64>,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out/overhead.csv")]
        out: PathBuf,
    },
}

fn default_parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn load_config(path: &Option<PathBuf>) -> Result<Config, HarnessError> {
    match path {
        Some(p) => Ok(Config::load(p)?),
        None => Ok(Config::default()),
    }
}

fn policies(arg: PolicyArg) -> Vec<SelectionPolicy> {
    match arg {
        PolicyArg::Baseline => vec![SelectionPolicy::Baseline],
        PolicyArg::Krlcb => vec![SelectionPolicy::Krlcb],
        PolicyArg::Cvar => vec![SelectionPolicy::Cvar],
        PolicyArg::All => SelectionPolicy::ALL.to_vec(),
    }
}

fn read_samples(path: &PathBuf) -> Result<Vec<f64>, HarnessError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut samples = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let Some(field) = record.get(0).map(str::trim) else { continue };
        match field.parse::<f64>() {
            Ok(v) => samples.push(v),
            Err(_) if line == 0 => {}
            Err(_) => {
                return Err(HarnessError::Invalid(format!(
                    "{}: line {}: `{field}` is not a number",
                    path.display(),
                    line + 1
                )))
            }
        }
    }
    Ok(samples)
}

fn execute(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Run {
            scenario,
            policy,
            iterations,
            seeds,
            noise,
            config,
            out,
            parallelism,
        } => {
            let config = load_config(&config)?;
            let spec = GridSpec {
                scenarios: load_scenarios(&scenario)?,
                policies: policies(policy),
                iteration_levels: iterations,
                seeds,
                noise: match noise {
                    NoiseArg::On => vec![Noise::On],
                    NoiseArg::Off => vec![Noise::Off],
                    NoiseArg::Both => vec![Noise::Off, Noise::On],
                },
            };
            let started = Instant::now();
            let results = run_grid(&spec, &config, parallelism)?;
            let mut files = export(&results, ExportFormat::Csv, &out)?;
            files.extend(export(&results, ExportFormat::Jsonl, &out)?);
            for cell in &results.cells {
                println!(
                    "{:<12} {:<8} {:>5} noise={:<3} success={:.3}",
                    cell.key.scenario,
                    cell.key.policy,
                    cell.key.iterations,
                    cell.key.noise,
                    cell.success_rate()
                );
                for error in &cell.errors {
                    eprintln!("  error: {error}");
                }
            }
            for f in files {
                println!("wrote {}", f.display());
            }
            eprintln!("finished in {:.1} s", started.elapsed().as_secs_f64());
        }
        Command::RiskEval { metric, alpha, input } => {
            let samples = read_samples(&input)?;
            let value = match metric {
                Metric::Var => risk::var(&samples, alpha),
                Metric::VarPlus => risk::var_plus(&samples, alpha),
                Metric::Cvar => risk::cvar(&samples, alpha),
                Metric::Ccvar => risk::ccvar(&samples, alpha),
            }
            .map_err(|e| HarnessError::Invalid(e.to_string()))?;
            println!("{value}");
        }
        Command::Overhead {
            scenario,
            iterations,
            steps,
            config,
            out,
        } => {
            let config = load_config(&config)?;
            let scenarios = load_scenarios(&scenario)?;
            let [scenario] = scenarios.as_slice() else {
                return Err(HarnessError::Invalid("overhead runs on exactly one scenario".into()));
            };
            let table = measure_overhead(scenario, &SelectionPolicy::ALL, &iterations, steps, &config)?;
            print!("{}", table.to_csv());
            write_overhead_csv(&table, &out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
