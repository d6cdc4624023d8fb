use clap::{Args, Parser, Subcommand};
use optosqueeze::pipeline::{
    report, run_single, run_sweep_ratio_vs_s, run_sweep_variance_vs_tone_ratio, PipelineError, RunConfig, RunOutput,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Simulate, demodulate and fit a parametrically squeezed optomechanical oscillator.
#[derive(Parser)]
#[command(name = "optosqueeze", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One operating point through both analysis paths.
    Simulate(RunArgs),
    /// Sideband ratios at each `sweep_s` gain.
    SweepRatios(RunArgs),
    /// Quadrature variances at each `sweep_epsilon` tone ratio.
    SweepVariances(RunArgs),
    /// Re-read a run directory and evaluate the acceptance bounds.
    Report {
        /// Run directory written by one of the run verbs.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Parse and cross-check a configuration without running anything.
    ValidateConfig {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Also persist the raw sampled records.
    #[arg(long)]
    keep_raw: bool,
}

fn load(path: Option<&Path>) -> Result<RunConfig, PipelineError> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn prepare(a: &RunArgs) -> Result<(RunConfig, PathBuf), PipelineError> {
    let mut cfg = load(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(w) = a.workers {
        if w == 0 {
            return Err(PipelineError::Config("--workers must be at least 1".into()));
        }
        cfg.workers = Some(w);
    }
    cfg.keep_raw |= a.keep_raw;
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
    cfg.validate()?;
    Ok((cfg, out))
}

fn print_run(out: &RunOutput, dir: &Path) {
    println!("config_hash {}", out.config_hash);
    for p in &out.points {
        let failed = p.checks.iter().filter(|c| !c.pass).count();
        println!(
            "{} {} ({} checks, {} failing){}",
            p.label,
            p.status(),
            p.checks.len(),
            failed,
            p.errors.first().map_or(String::new(), |e| format!(": {e}"))
        );
    }
    println!("artifacts in {}", dir.display());
}

fn execute(cli: Cli) -> Result<u8, PipelineError> {
    match cli.command {
        Command::Simulate(a) => {
            let (cfg, dir) = prepare(&a)?;
            let out = run_single(&cfg, Some(&dir))?;
            print_run(&out, &dir);
            Ok(0)
        }
        Command::SweepRatios(a) => {
            let (cfg, dir) = prepare(&a)?;
            let s = cfg.sweep_s.clone();
            let out = run_sweep_ratio_vs_s(&cfg, &s, Some(&dir))?;
            print_run(&out, &dir);
            Ok(0)
        }
        Command::SweepVariances(a) => {
            let (cfg, dir) = prepare(&a)?;
            let eps = match &cfg.sweep_epsilon {
                Some(e) => e.clone(),
                None => cfg.variance_sweep_epsilons()?,
            };
            let out = run_sweep_variance_vs_tone_ratio(&cfg, &eps, Some(&dir))?;
            print_run(&out, &dir);
            Ok(0)
        }
        Command::Report { out } => {
            let r = report(&out)?;
            print!("{}", r.text);
            Ok(if r.pass { 0 } else { 4 })
        }
        Command::ValidateConfig { config } => {
            let cfg = load(config.as_deref())?;
            let rates = cfg.validate()?;
            println!("config_hash {}", cfg.hash());
            println!(
                "s = {:.6}, gamma_eff = {:.4} Hz, n_bar = {}, quantum_squeezed = {}",
                rates.s,
                rates.gamma_eff / (2.0 * std::f64::consts::PI),
                rates.n_bar,
                rates.regime().quantum_squeezed
            );
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
