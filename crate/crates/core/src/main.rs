use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use open_majorana::config::RunConfig;
use open_majorana::experiments::{run_sweep, transfer_efficiency, write_records, SweepOptions};
use open_majorana::factorization::{classical_noise_ensemble, factorization_report};
use open_majorana::spin::HalfInteger;
use open_majorana::{Error, Result};

/// Open spin-j Majorana sweeps: transfer efficiency and factorization checks.
#[derive(Debug, Parser)]
#[command(name = "majorana", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Overrides,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One transfer-efficiency run.
    Single,
    /// Efficiency over the (j, channel, T, gamma) grid, written as CSV.
    Sweep,
    /// Unitary and Lindblad factorization residuals.
    Factorization,
    /// Shared classical white noise: Monte Carlo vs second-order cross term.
    ClassicalNoise,
}

#[derive(Debug, Args)]
struct Overrides {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Bundled configuration (fig1 or fig2); --config wins if both are given.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Output path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Spin quantum number (half-integer).
    #[arg(long, global = true)]
    j: Option<f64>,
    /// Flat bath rate gamma / Omega.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Temperature k_B T / Omega.
    #[arg(long, global = true)]
    temp: Option<f64>,
    /// Bath coupling channel: Jz or Jx.
    #[arg(long, global = true)]
    channel: Option<String>,
    /// Write zero wall times so reruns produce identical CSVs.
    #[arg(long, global = true)]
    no_timing: bool,
}

fn resolve(opts: &Overrides) -> Result<RunConfig> {
    let mut cfg = match (&opts.config, &opts.preset) {
        (Some(path), _) => RunConfig::from_path(path)?,
        (None, Some(name)) => RunConfig::preset(name)?,
        (None, None) => RunConfig::default(),
    };
    if let Some(j) = opts.j {
        HalfInteger::spin(j)?;
        cfg.model.j = j;
        cfg.sweep.j_list = vec![j];
    }
    if let Some(g) = opts.gamma {
        cfg.noise.gamma = g;
        cfg.sweep.gamma_grid = Some(vec![g]);
    }
    if let Some(t) = opts.temp {
        cfg.noise.temperature = t;
        cfg.sweep.temperatures = vec![t];
    }
    if let Some(c) = &opts.channel {
        cfg.noise.channel = c.clone();
        cfg.sweep.channels = vec![c.clone()];
    }
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if opts.workers.is_some() {
        cfg.workers = opts.workers;
    }
    if opts.out.is_some() {
        cfg.out = opts.out.clone();
    }
    if opts.no_timing {
        cfg.timing = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Prints the report, and writes it plus the metadata when an output path is set.
fn emit(cfg: &RunConfig, subcommand: &str, report: &str) -> Result<()> {
    print!("{report}");
    let meta = cfg.metadata_block(subcommand)?;
    match &cfg.out {
        Some(path) => {
            std::fs::write(path, report)?;
            std::fs::write(sibling(path, ".meta.toml"), meta)?;
        }
        None => println!("\n# metadata\n{meta}"),
    }
    Ok(())
}

/// Returns whether the run hit a numerical failure.
fn run(cli: &Cli) -> Result<bool> {
    let cfg = resolve(&cli.opts)?;
    match cli.command {
        Command::Single => {
            let noise = cfg.noise_config()?;
            let rec = transfer_efficiency(cfg.model.j, &noise, &cfg.model, &cfg.integrator)?;
            let mut report = String::new();
            report += &format!("j = {}\n", rec.j);
            report += &format!("channel = \"{}\"\n", rec.channel);
            report += &format!("gamma_over_omega = {}\n", rec.gamma);
            report += &format!("kBT_over_omega = {}\n", rec.temperature);
            report += &format!("efficiency = {}\n", rec.efficiency);
            report += &format!("trace_drift = {:e}\n", rec.trace_drift);
            report += &format!("hermiticity_drift = {:e}\n", rec.hermiticity_drift);
            report += &format!("min_eigenvalue = {:e}\n", rec.min_eigenvalue);
            report += &format!("steps = {}\n", rec.steps);
            report += &format!("failed = {}\n", rec.failed);
            if let Some(f) = &rec.failure {
                report += &format!("failure = {f:?}\n");
            }
            emit(&cfg, "single", &report)?;
            Ok(rec.failed)
        }
        Command::Sweep => {
            let spec = cfg.sweep_spec()?;
            let opts = SweepOptions {
                workers: cfg.workers,
                timing: cfg.timing,
            };
            let records = run_sweep(&spec, cfg.out.as_deref(), opts)?;
            let meta = cfg.metadata_block("sweep")?;
            match &cfg.out {
                Some(path) => {
                    std::fs::write(sibling(path, ".meta.toml"), meta)?;
                    eprintln!("wrote {} records to {}", records.len(), path.display());
                }
                None => {
                    write_records(std::io::stdout(), &records)?;
                    eprintln!("# metadata\n{meta}");
                }
            }
            let failed = records.iter().filter(|r| r.failed).count();
            if failed > 0 {
                eprintln!("{failed} of {} grid points failed", records.len());
            }
            Ok(failed > 0)
        }
        Command::Factorization => {
            let noise = cfg.noise_config()?;
            let rep = factorization_report(
                cfg.model.j,
                &noise,
                &cfg.model,
                &cfg.integrator,
                cfg.factorization.checkpoints,
            )?;
            emit(&cfg, "factorization", &rep.to_key_values())?;
            if let Some(path) = &cfg.out {
                let file = std::fs::File::create(sibling(path, ".checkpoints.csv"))?;
                rep.write_checkpoints_csv(file)?;
            }
            Ok(false)
        }
        Command::ClassicalNoise => {
            let nc = cfg.classical_noise_config()?;
            let rep = classical_noise_ensemble(&cfg.model, &nc, &cfg.integrator)?;
            for w in &rep.warnings {
                eprintln!("warning: {w}");
            }
            emit(&cfg, "classical-noise", &rep.to_key_values())?;
            if let Some(path) = &cfg.out {
                let file = std::fs::File::create(sibling(path, ".entries.csv"))?;
                rep.write_entries_csv(file)?;
            }
            Ok(false)
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        1
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
