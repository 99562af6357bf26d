mod output;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use multipole::dataset::load_csv;
use multipole::miner::{self, MinerConfig, RandomBudget};
use multipole::stats::{self, PlantCriteria, SignificanceSettings};
use multipole::{bounds, graph, Error, TimeSeriesDataset};

use output::{json_bytes, read_result, sibling, Outputs, ResultFile};

/// Mine multipoles (sets of time series with high linear dependence and
/// linear gain) and run the accompanying verification tools.
#[derive(Parser, Debug)]
#[command(name = "multipole", version, about)]
struct Cli {
    /// Worker threads, a positive integer [default: one per core]
    #[arg(long, global = true, env = "MULTIPOLE_THREADS", value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
struct Thresholds {
    /// Minimum linear dependence, real in [0, 1]
    #[arg(long, default_value_t = 0.5, value_name = "REAL")]
    sigma: f64,
    /// Minimum linear gain, real in (0, 1]
    #[arg(long, default_value_t = 0.15, value_name = "REAL")]
    delta: f64,
    /// Largest multipole size, integer >= 3 [default: floor(1/delta) + 1]
    #[arg(long, value_name = "N")]
    max_size: Option<usize>,
}

impl Thresholds {
    fn config(&self) -> Result<MinerConfig> {
        let mut cfg = MinerConfig::new(self.sigma, self.delta)?;
        if let Some(m) = self.max_size {
            cfg = cfg.with_max_size(m);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct Input {
    /// Dataset CSV: header row of names, one row per timestamp
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Subtract a least-squares linear trend before standardizing
    #[arg(long)]
    detrend: bool,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Mine maximal multipoles with the clique-based search
    Mine {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        thresholds: Thresholds,
        /// Correlation threshold of the candidate graph, real in [-1, 1]
        #[arg(
            long,
            default_value_t = 0.0,
            value_name = "REAL",
            allow_hyphen_values = true
        )]
        rho: f64,
        /// Seed, integer
        #[arg(long, default_value_t = 0, value_name = "N")]
        seed: u64,
        /// Maximal cliques to enumerate before returning a partial result, integer
        #[arg(long, default_value_t = graph::DEFAULT_CLIQUE_BUDGET, value_name = "N")]
        clique_budget: u64,
        /// Output JSON path; the CSV summary and manifest are written beside it
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Exhaustive search over all subsets up to the maximum size
    Brute {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        thresholds: Thresholds,
        /// Largest number of subsets to evaluate, integer
        #[arg(long, default_value_t = 100_000_000, value_name = "N")]
        subset_budget: u64,
        /// Output JSON path
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Evaluate uniformly random subsets
    Random {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        thresholds: Thresholds,
        /// Number of random subsets, integer >= 0
        #[arg(long, default_value_t = 100_000, value_name = "N")]
        trials: u64,
        /// Run for this many seconds instead of a trial count (not reproducible)
        #[arg(long, value_name = "REAL", conflicts_with = "trials")]
        seconds: Option<f64>,
        /// Seed, integer
        #[arg(long, default_value_t = 0, value_name = "N")]
        seed: u64,
        /// Output JSON path
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Union result files and keep only maximal member sets
    Merge {
        /// Result JSON files written by mine, brute or random
        #[arg(long, value_name = "PATH", num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        /// Output JSON path
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Sample random correlation matrices; write gain and rho_S per matrix
    Sample {
        /// Matrix size, integer in [3, 8]
        #[arg(long, value_name = "N")]
        k: usize,
        /// Number of accepted matrices, integer
        #[arg(long, default_value_t = 100_000, value_name = "N")]
        count: usize,
        /// Seed, integer
        #[arg(long, default_value_t = 0, value_name = "N")]
        seed: u64,
        /// Output CSV path
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Check the eigengap bounds on sampled correlation matrices
    Bounds {
        /// Matrix size, integer in [3, 8]
        #[arg(long, value_name = "N")]
        k: usize,
        /// Number of accepted matrices, integer
        #[arg(long, default_value_t = 100_000, value_name = "N")]
        count: usize,
        /// Seed, integer
        #[arg(long, default_value_t = 0, value_name = "N")]
        seed: u64,
        /// Output CSV path
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Generate a dataset with planted multipoles
    Synth {
        /// Number of planted multipoles, integer
        #[arg(long, value_name = "N")]
        plant: usize,
        /// Planted sizes, comma-separated integers in [3, 8], used in turn
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "3,4,5",
            value_name = "LIST"
        )]
        sizes: Vec<usize>,
        /// Total number of columns, integer
        #[arg(long, value_name = "N")]
        noise_to: usize,
        /// Number of timestamps, integer >= 50 times the largest size
        #[arg(long = "T", visible_alias = "t", value_name = "N")]
        t: usize,
        /// Minimum linear dependence of planted matrices, real in [0, 1]
        #[arg(long, default_value_t = 0.7, value_name = "REAL")]
        min_sigma: f64,
        /// Minimum linear gain of planted matrices, real in [0, 1/(k-1)]
        #[arg(long, default_value_t = 0.1, value_name = "REAL")]
        min_gain: f64,
        /// Draw planted correlations in [-1, REAL] before random sign flips and
        /// redraw blocks until the sample data meets every criterion, real in [-1, 1]
        #[arg(long, value_name = "REAL", allow_hyphen_values = true)]
        max_rho: Option<f64>,
        /// Seed, integer
        #[arg(long, default_value_t = 0, value_name = "N")]
        seed: u64,
        /// Output dataset CSV path; ground truth goes to <out>.truth.json
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Significance and reproducibility of one multipole across datasets
    Signif {
        /// Member names, comma-separated
        #[arg(long, value_delimiter = ',', required = true, value_name = "LIST")]
        multipole: Vec<String>,
        /// Datasets (windows) to test the multipole in
        #[arg(long, num_args = 1.., required = true, value_name = "PATH")]
        datasets: Vec<PathBuf>,
        /// Independent datasets for null sets and member replacement [default: --datasets]
        #[arg(long, num_args = 1.., value_name = "PATH")]
        pool: Vec<PathBuf>,
        /// Subtract a least-squares linear trend before standardizing
        #[arg(long)]
        detrend: bool,
        /// Significance level, real in (0, 1)
        #[arg(long, default_value_t = stats::DEFAULT_ALPHA, value_name = "REAL")]
        alpha: f64,
        /// Null distribution size, integer >= 999
        #[arg(long, default_value_t = 10_000, value_name = "N")]
        null_samples: usize,
        /// Member replacement repeats, integer >= 100
        #[arg(long, default_value_t = 1000, value_name = "N")]
        repeats: usize,
        /// Seed, integer
        #[arg(long, default_value_t = 0, value_name = "N")]
        seed: u64,
        /// Output JSON path
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Rerun the command recorded in a manifest and compare output digests
    Replay {
        /// Manifest JSON path
        #[arg(long, value_name = "PATH")]
        manifest: PathBuf,
    },
}

/// Errors in user-supplied flags or files.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// Signals exit code 3 after outputs were written.
#[derive(Debug)]
struct Budget(String);

impl std::fmt::Display for Budget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Budget {}

pub struct RunInfo {
    command: String,
    argv: Vec<String>,
    config: serde_json::Value,
    started_at: String,
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 2;
        }
        if cause.is::<Budget>() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::BudgetExceeded { .. } | Error::PartialResult { .. } => 3,
                Error::Json(_) => 1,
                _ => 2,
            };
        }
    }
    1
}

fn load(path: &Path, detrend: bool) -> Result<TimeSeriesDataset> {
    Ok(load_csv(path)?.standardize(detrend)?)
}

fn write_results(
    run: &RunInfo,
    out: &Path,
    variables: &[String],
    records: &[multipole::MultipoleRecord],
    inputs: &[PathBuf],
    partial: bool,
) -> Result<()> {
    let results = ResultFile::new(variables, records, partial);
    let mut outputs = Outputs::new(out);
    outputs.write(out, &json_bytes(&results))?;
    outputs.write(&sibling(out, "csv"), &results.summary_csv())?;
    outputs.finish(run, inputs, partial)?;
    Ok(())
}

fn execute(command: &Command, run: &RunInfo) -> Result<()> {
    match command {
        Command::Mine {
            input,
            thresholds,
            rho,
            seed,
            clique_budget,
            out,
        } => {
            let cfg = thresholds
                .config()?
                .with_rho(*rho)
                .with_seed(*seed)
                .with_clique_budget(*clique_budget);
            cfg.validate()?;
            let d = load(&input.input, input.detrend)?;
            let inputs = [input.input.clone()];
            match miner::mine(&d, &cfg) {
                Ok(records) => write_results(run, out, d.names(), &records, &inputs, false),
                Err(Error::PartialResult { budget, records }) => {
                    write_results(run, out, d.names(), &records, &inputs, true)?;
                    Err(Budget(format!(
                        "clique budget of {budget} calls exhausted; partial results written to {}",
                        out.display()
                    ))
                    .into())
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Brute {
            input,
            thresholds,
            subset_budget,
            out,
        } => {
            let cfg = thresholds.config()?;
            let d = load(&input.input, input.detrend)?;
            let records = miner::brute_force(&d.correlation_matrix()?, &cfg, *subset_budget)?;
            write_results(
                run,
                out,
                d.names(),
                &records,
                std::slice::from_ref(&input.input),
                false,
            )
        }
        Command::Random {
            input,
            thresholds,
            trials,
            seconds,
            seed,
            out,
        } => {
            let cfg = thresholds.config()?.with_seed(*seed);
            let budget = match seconds {
                Some(s) if !(s.is_finite() && *s >= 0.0) => {
                    bail!(Usage("--seconds must be a non-negative number".into()))
                }
                Some(s) => RandomBudget::Duration(Duration::from_secs_f64(*s)),
                None => RandomBudget::Trials(*trials),
            };
            let d = load(&input.input, input.detrend)?;
            let records = miner::random_search(&d.correlation_matrix()?, &cfg, budget)?;
            write_results(
                run,
                out,
                d.names(),
                &records,
                std::slice::from_ref(&input.input),
                false,
            )
        }
        Command::Merge { inputs, out } => {
            let mut variables: Option<Vec<String>> = None;
            let mut records = Vec::new();
            let mut partial = false;
            for path in inputs {
                let file = read_result(path)?;
                match &variables {
                    None => variables = Some(file.variables.clone()),
                    Some(v) if *v != file.variables => bail!(Usage(format!(
                        "{} was mined on different variables than {}",
                        path.display(),
                        inputs[0].display()
                    ))),
                    Some(_) => {}
                }
                partial |= file.partial;
                records.extend(file.records()?);
            }
            let merged = miner::remove_non_maximal(records);
            write_results(
                run,
                out,
                &variables.unwrap_or_default(),
                &merged,
                inputs,
                partial,
            )
        }
        Command::Sample {
            k,
            count,
            seed,
            out,
        } => {
            let samples = stats::scatter(*k, *count, *seed)?;
            let mut csv = Vec::new();
            stats::write_scatter_csv(&samples, &mut csv)?;
            let mut outputs = Outputs::new(out);
            outputs.write(out, &csv)?;
            outputs.finish(run, &[], false)?;
            let top = samples
                .iter()
                .map(|s| s.gain)
                .fold(f64::NEG_INFINITY, f64::max);
            println!("{count} matrices of size {k}; max linear gain {top}");
            Ok(())
        }
        Command::Bounds {
            k,
            count,
            seed,
            out,
        } => {
            if *k < 3 {
                bail!(Usage("--k must be at least 3".into()));
            }
            let matrices = stats::sample_correlation_matrices(*k, *count, *seed)?;
            let rows = bounds::validate_all(&matrices)?;
            let mut csv = Vec::new();
            bounds::write_validation_csv(&rows, &mut csv)?;
            let mut outputs = Outputs::new(out);
            outputs.write(out, &csv)?;
            outputs.finish(run, &[], false)?;
            let proven: usize = rows.iter().map(|r| r.proven_violations()).sum();
            let cap = rows.iter().filter(|r| r.size_cap_exceeded).count();
            println!("{count} matrices of size {k}; {proven} eigengap bound violations; size cap exceeded {cap} times");
            if proven > 0 {
                bail!(
                    "proven bounds violated {proven} times; see {}",
                    out.display()
                );
            }
            Ok(())
        }
        Command::Synth {
            plant,
            sizes,
            noise_to,
            t,
            min_sigma,
            min_gain,
            max_rho,
            seed,
            out,
        } => {
            let criteria = PlantCriteria {
                min_sigma: *min_sigma,
                min_gain: *min_gain,
                max_rho: *max_rho,
            };
            let (dataset, truth) = if max_rho.is_some() {
                let b = stats::planted_benchmark(*plant, sizes, &criteria, *noise_to, *t, *seed)?;
                (b.dataset, b.truth)
            } else {
                let planted = stats::plant_matrices(*plant, sizes, &criteria, *seed)?;
                let width: usize = planted.iter().map(|m| m.dim()).sum();
                let noise = noise_to.checked_sub(width).ok_or_else(|| {
                    Usage(format!(
                        "--noise-to {noise_to} is smaller than the {width} planted series"
                    ))
                })?;
                stats::synth_dataset(&planted, noise, *t, *seed)?
            };
            let mut csv = Vec::new();
            dataset.write_csv(&mut csv)?;
            let names: Vec<Vec<&str>> = truth
                .iter()
                .map(|set| set.iter().map(|&i| dataset.names()[i].as_str()).collect())
                .collect();
            let truth_json = serde_json::json!({ "sets": names, "indices": truth });
            let mut outputs = Outputs::new(out);
            outputs.write(out, &csv)?;
            outputs.write(&sibling(out, "truth.json"), &json_bytes(&truth_json))?;
            outputs.finish(run, &[], false)?;
            Ok(())
        }
        Command::Signif {
            multipole,
            datasets,
            pool,
            detrend,
            alpha,
            null_samples,
            repeats,
            seed,
            out,
        } => {
            if !(*alpha > 0.0 && *alpha < 1.0) {
                bail!(Usage("--alpha must be in (0,1)".into()));
            }
            let distinct: BTreeSet<&String> = multipole.iter().collect();
            if distinct.len() != multipole.len() {
                bail!(Usage("--multipole names must be distinct".into()));
            }
            let loaded = datasets
                .iter()
                .map(|p| load(p, *detrend))
                .collect::<Result<Vec<_>>>()?;
            let pool_paths = if pool.is_empty() { datasets } else { pool };
            let pool_data = if pool.is_empty() {
                loaded.clone()
            } else {
                pool.iter()
                    .map(|p| load(p, *detrend))
                    .collect::<Result<Vec<_>>>()?
            };
            let settings = SignificanceSettings {
                alpha: *alpha,
                null_samples: *null_samples,
                repeats: *repeats,
            };
            let report = stats::reproducibility(multipole, &loaded, &pool_data, &settings, *seed)?;
            let mut outputs = Outputs::new(out);
            outputs.write(out, &json_bytes(&report))?;
            let inputs: Vec<PathBuf> = datasets
                .iter()
                .chain(pool_paths.iter())
                .cloned()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            outputs.finish(run, &inputs, false)?;
            println!(
                "reproducible in {}/{} datasets",
                report.reproducible_count,
                datasets.len()
            );
            Ok(())
        }
        Command::Replay { manifest } => replay(manifest),
    }
}

fn replay(path: &Path) -> Result<()> {
    let text = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let recorded: output::Manifest =
        serde_json::from_slice(&text).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
    let cli = Cli::try_parse_from(&recorded.argv)
        .map_err(|e| Usage(format!("recorded argv does not parse: {e}")))?;
    if matches!(cli.command, Command::Replay { .. }) {
        bail!(Usage("a replay manifest cannot be replayed".into()));
    }
    run_command(&cli.command, recorded.argv.clone())?;
    let mut mismatched = Vec::new();
    for before in &recorded.outputs {
        let after = output::digest(&before.path)?;
        if after.sha256 != before.sha256 {
            mismatched.push(before.path.display().to_string());
        }
    }
    if !mismatched.is_empty() {
        bail!(
            "replay produced different bytes for {}",
            mismatched.join(", ")
        );
    }
    println!("replay reproduced {} output files", recorded.outputs.len());
    Ok(())
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Mine { .. } => "mine",
        Command::Brute { .. } => "brute",
        Command::Random { .. } => "random",
        Command::Merge { .. } => "merge",
        Command::Sample { .. } => "sample",
        Command::Bounds { .. } => "bounds",
        Command::Synth { .. } => "synth",
        Command::Signif { .. } => "signif",
        Command::Replay { .. } => "replay",
    }
}

fn run_command(command: &Command, argv: Vec<String>) -> Result<()> {
    let run = RunInfo {
        command: command_name(command).to_string(),
        argv,
        config: serde_json::to_value(command)?,
        started_at: now(),
    };
    execute(command, &run)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be a positive integer");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run_command(&cli.command, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        let usage = anyhow::Error::new(Usage("bad flag".into()));
        assert_eq!(exit_code(&usage), 2);
        let invalid = anyhow::Error::new(Error::InvalidArgument("delta must be in (0,1]".into()));
        assert_eq!(exit_code(&invalid), 2);
        let budget = anyhow::Error::new(Error::BudgetExceeded {
            what: "subsets",
            budget: 1,
        });
        assert_eq!(exit_code(&budget), 3);
        assert_eq!(exit_code(&anyhow::Error::new(Budget("partial".into()))), 3);
        assert_eq!(exit_code(&anyhow::anyhow!("internal")), 1);
        let wrapped = anyhow::Error::new(Error::NotStandardized).context("while mining");
        assert_eq!(exit_code(&wrapped), 2);
    }

    #[test]
    fn sibling_paths() {
        assert_eq!(
            sibling(Path::new("out/r.json"), "manifest.json"),
            Path::new("out/r.manifest.json")
        );
        assert_eq!(
            sibling(Path::new("d.csv"), "truth.json"),
            Path::new("d.truth.json")
        );
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
