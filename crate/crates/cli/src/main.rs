//! `mfbma` command-line driver.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mfbma::data::{format_float, read_dataset_csv, read_points_csv};
use mfbma::demo::{evaluate_demo, Demo1dConfig};
use mfbma::experiment::{self, ExperimentRecord};
use mfbma::{default_kernel_set, fit_ensemble, Error, MFEnsemble};
use serde::Serialize;

/// Failure with its exit code: 1 for invalid input, 2 for runtime errors.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let validation = matches!(
            e,
            Error::DimensionMismatch { .. }
                | Error::TooFewPoints { .. }
                | Error::DuplicatePoints { .. }
                | Error::OutsideUnitCube { .. }
                | Error::DomainViolation
                | Error::InvalidSizes(_)
                | Error::LengthMismatch(..)
                | Error::Invalid(_)
                | Error::MalformedCsv(_)
                | Error::Serialization(_)
                | Error::LevelOutOfRange { .. }
                | Error::EmptyCandidates
        );
        CliError {
            code: if validation { 1 } else { 2 },
            message: e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(name = "mfbma", version, about = "Multi-fidelity ensemble emulation")]
struct Cli {
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    /// Raise log verbosity (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    common: Common,
    /// Overrides the replicate count.
    #[arg(long)]
    replicates: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit an ensemble to CSV datasets.
    Fit(Common),
    /// Predict with a fitted ensemble.
    Predict {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replicated one-shot benchmark experiment.
    Benchmark(ExperimentArgs),
    /// Replicated adaptive-design experiment.
    Adaptive(ExperimentArgs),
    /// One-dimensional demonstration on the Forrester pair.
    Demo1d {
        /// Optional JSON configuration; defaults are used without it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::runtime(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct LevelSummary {
    level: usize,
    beta: f64,
    process_variance: f64,
    lengthscales: Vec<f64>,
    log_likelihood: f64,
}

#[derive(Serialize)]
struct ChainSummary {
    kernel: String,
    weight: f64,
    log_likelihood: f64,
    levels: Vec<LevelSummary>,
}

#[derive(Serialize)]
struct FitSummary {
    levels: usize,
    dimension: usize,
    training_points: Vec<usize>,
    dropped_kernels: Vec<String>,
    chains: Vec<ChainSummary>,
}

fn fit_summary(ens: &MFEnsemble) -> FitSummary {
    let fitted: Vec<_> = ens.chains().iter().map(|c| c.kernel()).collect();
    FitSummary {
        levels: ens.level_count(),
        dimension: ens.dim(),
        training_points: ens.datasets().iter().map(|d| d.len()).collect(),
        dropped_kernels: ens
            .kernel_set()
            .iter()
            .filter(|k| !fitted.contains(k))
            .map(|k| k.to_string())
            .collect(),
        chains: ens
            .chains()
            .iter()
            .zip(ens.weights())
            .map(|(c, &w)| ChainSummary {
                kernel: c.kernel().to_string(),
                weight: w,
                log_likelihood: c.top().log_marginal_likelihood(),
                levels: c
                    .levels()
                    .iter()
                    .enumerate()
                    .map(|(i, l)| LevelSummary {
                        level: i + 1,
                        beta: l.beta(),
                        process_variance: l.process_variance(),
                        lengthscales: l.params().lengthscales.clone(),
                        log_likelihood: l.log_marginal_likelihood(),
                    })
                    .collect(),
            })
            .collect(),
    }
}

fn cmd_fit(args: &Common, quiet: bool) -> Result<(), CliError> {
    let cfg = config::load_fit(&args.config)?;
    if cfg.datasets.is_empty() {
        return Err(CliError::validation("`datasets` must list at least one CSV"));
    }
    let mut datasets = Vec::new();
    for (i, p) in cfg.datasets.iter().enumerate() {
        let path = config::resolve(&args.config, p);
        let file =
            fs::File::open(&path).map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
        let ds = read_dataset_csv(file, i + 1).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        ds.validate()
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        datasets.push(ds);
    }
    let mut opt = cfg.optimizer.clone();
    if let Some(s) = args.seed {
        opt.seed = s;
    }
    let kernels = cfg.kernels.clone().unwrap_or_else(default_kernel_set);
    let ens = fit_ensemble(&datasets, &kernels, &opt)?;
    create_dir(&args.out)?;
    let mut json = ens.to_json()?;
    json.push('\n');
    write(&args.out.join("ensemble.json"), &json)?;
    write(&args.out.join("fit_summary.json"), &to_json(&fit_summary(&ens))?)?;
    if !quiet {
        println!("fitted {} chains over {} levels", ens.chains().len(), ens.level_count());
        for (c, w) in ens.chains().iter().zip(ens.weights()) {
            println!("  {:<12} weight {w:.6}", c.kernel().name());
        }
    }
    Ok(())
}

fn cmd_predict(config_path: &Path, out: &Path, quiet: bool) -> Result<(), CliError> {
    let cfg = config::load_predict(config_path)?;
    let ens_text = config::read_text(&config::resolve(config_path, &cfg.ensemble))?;
    let ens = MFEnsemble::from_json(&ens_text)?;
    let qpath = config::resolve(config_path, &cfg.queries);
    let file =
        fs::File::open(&qpath).map_err(|e| CliError::validation(format!("cannot read {}: {e}", qpath.display())))?;
    let (dim, queries) =
        read_points_csv(file).map_err(|e| CliError::validation(format!("{}: {e}", qpath.display())))?;
    let d = ens.dim();
    if let Some(qd) = dim {
        if qd != d {
            return Err(CliError::validation(format!(
                "query CSV has {qd} columns but the ensemble expects {d}"
            )));
        }
    }
    let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    header.extend(["mean", "var_within", "var_between", "var_total"].map(String::from));
    header.extend(ens.chains().iter().map(|c| format!("mean_{}", c.kernel().name())));
    let mut text = header.join(",");
    text.push('\n');
    if queries.nrows() > 0 {
        let pred = ens.predict(&queries)?;
        let total = pred.total_variance();
        for i in 0..queries.nrows() {
            let mut row: Vec<String> = (0..d).map(|j| format_float(queries[(i, j)])).collect();
            row.extend([pred.mean[i], pred.var_within[i], pred.var_between[i], total[i]].map(format_float));
            row.extend(pred.per_learner_means.iter().map(|m| format_float(m[i])));
            text.push_str(&row.join(","));
            text.push('\n');
        }
    }
    create_dir(out)?;
    write(&out.join("predictions.csv"), &text)?;
    if !quiet {
        println!("wrote {} predictions", queries.nrows());
    }
    Ok(())
}

fn report(record: &ExperimentRecord, out: &Path, quiet: bool) -> Result<(), CliError> {
    experiment::emit_report(record, out)?;
    if !quiet {
        match record.mean_rmse {
            Some(m) => println!(
                "{} {}: mean RMSE {m:.6e} (standard error {:.3e}, {} of {} replicates failed)",
                record.config.benchmark,
                if record.kind == experiment::RunKind::Adaptive {
                    "adaptive"
                } else {
                    "one-shot"
                },
                record.std_error,
                record.failed_replicates,
                record.replicates.len()
            ),
            None => println!("every replicate failed"),
        }
    }
    if record.mean_rmse.is_none() {
        return Err(CliError::runtime("every replicate failed"));
    }
    Ok(())
}

fn cmd_experiment(args: &ExperimentArgs, adaptive: bool, quiet: bool) -> Result<(), CliError> {
    let mut cfg = config::load_experiment(&args.common.config)?;
    if let Some(s) = args.common.seed {
        cfg.base_seed = s;
    }
    if let Some(r) = args.replicates {
        cfg.replicates = r;
    }
    cfg.validate()?;
    let record = if adaptive {
        if cfg.adaptive.is_none() {
            return Err(CliError::validation("config needs an `adaptive` section"));
        }
        experiment::run_adaptive(&cfg)?
    } else {
        experiment::run_one_shot(&cfg)?
    };
    report(&record, &args.common.out, quiet)
}

fn cmd_demo1d(config_path: Option<&Path>, out: &Path, seed: Option<u64>, quiet: bool) -> Result<(), CliError> {
    let mut cfg = match config_path {
        Some(p) => config::load_demo(p)?,
        None => Demo1dConfig::default(),
    };
    if let Some(s) = seed {
        cfg.optimizer.seed = s;
    }
    let ens = cfg.fit()?;
    let result = evaluate_demo(&cfg, &ens)?;
    create_dir(out)?;
    write(&out.join("demo1d_grid.csv"), &result.grid_csv())?;
    write(&out.join("demo1d_points.csv"), &result.points_csv())?;
    write(&out.join("demo1d_summary.json"), &to_json(&fit_summary(&ens))?)?;
    if !quiet {
        println!("wrote {} grid rows", result.x.len());
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let quiet = cli.quiet;
    match &cli.command {
        Command::Fit(args) => cmd_fit(args, quiet),
        Command::Predict { config, out } => cmd_predict(config, out, quiet),
        Command::Benchmark(args) => cmd_experiment(args, false, quiet),
        Command::Adaptive(args) => cmd_experiment(args, true, quiet),
        Command::Demo1d { config, out, seed } => cmd_demo1d(config.as_deref(), out, *seed, quiet),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else {
        match cli.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            2 => log::LevelFilter::Debug,
            _ => log::LevelFilter::Trace,
        }
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
