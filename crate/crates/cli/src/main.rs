use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use stochopt_core::experiment::{run_experiment, run_sweep, ExperimentConfig, ExperimentReport};

const COLUMNS: &str = "\
CSV output (one file per seed plus <name>_aggregate.csv, the per-row mean over
successful seeds). Lines starting with '#' echo the configuration.

  svm: iteration,kernel_evals,objective,test_error,support_size
  pca: iteration,est_runtime,objective,suboptimality,rank,stuck

est_runtime is the running sum of squared explicit ranks; stuck is 1 when the
reported subspace is more than 0.1 radians from the optimal one.";

#[derive(Parser, Debug)]
#[command(name = "stochopt", version, about = "Stochastic kernel SVM and streaming PCA experiments", after_help = COLUMNS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a kernel SVM (SBP or a comparison solver).
    SvmTrain(Overrides),
    /// Train a dense SVM and sparsify its support set.
    SvmSparsify(Overrides),
    /// Run a streaming PCA solver.
    PcaTrain(Overrides),
    /// Run the configured experiment and report wall-clock time.
    Bench(Overrides),
}

#[derive(clap::Args, Debug)]
struct Overrides {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    algorithm: Option<String>,
    /// PCA target rank.
    #[arg(long)]
    k: Option<u64>,
    /// Capped MSG rank cap.
    #[arg(long = "K")]
    cap_rank: Option<u64>,
    /// Iteration count.
    #[arg(long = "T")]
    iterations: Option<u64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    eta_scale: Option<f64>,
    /// Run this single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// LIBSVM file, `synthetic` or `separable`.
    #[arg(long)]
    data: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn apply(&self, config: &mut ExperimentConfig) -> stochopt_core::Result<()> {
        let pairs: [(&str, Option<String>); 10] = [
            ("algorithm", self.algorithm.clone()),
            ("k", self.k.map(|v| v.to_string())),
            ("K", self.cap_rank.map(|v| v.to_string())),
            ("T", self.iterations.map(|v| v.to_string())),
            ("nu", self.nu.map(|v| v.to_string())),
            ("lambda", self.lambda.map(|v| v.to_string())),
            ("eta_scale", self.eta_scale.map(|v| v.to_string())),
            ("seeds", self.seed.map(|v| v.to_string())),
            ("data", self.data.clone()),
            ("out", self.out.as_ref().map(|p| p.to_string_lossy().into_owned())),
        ];
        for (key, value) in pairs {
            if let Some(value) = value {
                config.set(key, value)?;
            }
        }
        Ok(())
    }
}

fn fixed_task(config: &mut ExperimentConfig, task: &str) -> anyhow::Result<()> {
    match config.get("task") {
        Some(t) if t != task => bail!("this command runs {task} experiments, but the configuration says task = {t}"),
        Some(_) => Ok(()),
        None => Ok(config.set("task", task)?),
    }
}

fn print_report(report: &ExperimentReport) {
    for s in &report.seeds {
        match &s.result {
            Ok(summary) => println!(
                "seed {}: validation {} test {} -> {}",
                s.seed,
                summary.validation,
                summary.test,
                s.csv_path.display()
            ),
            Err(message) => println!("seed {}: failed: {message}", s.seed),
        }
    }
    if let Some(path) = &report.aggregate_path {
        println!("aggregate -> {}", path.display());
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let (overrides, task, bench) = match &cli.command {
        Command::SvmTrain(o) => (o, "svm", false),
        Command::SvmSparsify(o) => (o, "svm", false),
        Command::PcaTrain(o) => (o, "pca", false),
        Command::Bench(o) => (o, "", true),
    };
    let mut config = ExperimentConfig::load(&overrides.config)
        .with_context(|| format!("reading configuration {}", overrides.config.display()))?;
    overrides.apply(&mut config)?;
    if !task.is_empty() {
        fixed_task(&mut config, task)?;
    }
    if matches!(cli.command, Command::SvmSparsify(_)) {
        config.set("algorithm", "sparsify")?;
    }
    config.validate()?;

    let start = Instant::now();
    if let Some((key, values)) = config.sweep()? {
        let report = run_sweep(&config, &key, &values)?;
        for c in &report.candidates {
            println!("{key} = {}: validation {} test {}", c.value, c.validation, c.test);
        }
        println!(
            "selected {key} = {} (validation {}, test {})",
            report.best.value, report.best.validation, report.best.test
        );
    } else {
        let report = run_experiment(&config)?;
        print_report(&report);
        if report.failures() == report.seeds.len() {
            eprintln!("every seed failed");
            return Ok(false);
        }
    }
    if bench {
        println!("elapsed {:.3} s", start.elapsed().as_secs_f64());
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
