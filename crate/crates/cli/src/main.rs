//! `hypvmc`: train, evaluate and check recurrent neural quantum states.
//!
//! Exit codes: 0 success, 1 validation or usage error, 2 numerical failure.
//! Failures print one line, `error[<kind>]: <message>`, on stderr.

use clap::{Args, Parser, Subcommand};
use hypvmc::config::{ConfigError, ExperimentConfig};
use hypvmc::geometry::suite::run_suite;
use hypvmc::presets::{find_preset, preset_catalog};
use hypvmc::runner::{self, RunError};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hypvmc", version, about = "Variational Monte Carlo with Euclidean and hyperbolic RNN wavefunctions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Experiment config (JSON).
    config: Option<PathBuf>,
    /// Use a named preset instead of a config file.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train and write metrics.csv, best.ckpt and manifest into the run directory.
    Train {
        #[command(flatten)]
        source: Source,
        /// Suppress per-epoch progress on stderr.
        #[arg(long)]
        quiet: bool,
    },
    /// Estimate the energy of the saved model from fresh samples.
    Infer {
        #[command(flatten)]
        source: Source,
    },
    /// Ground-state energy by exact diagonalization.
    Exact {
        #[command(flatten)]
        source: Source,
    },
    /// Run the randomized Poincaré-ball property suite.
    GeometryCheck {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the probability table of the saved model as CSV.
    Enumerate {
        #[command(flatten)]
        source: Source,
    },
    /// List the preset catalog, or print one preset as a config file.
    Presets {
        /// Print this preset's config as JSON.
        name: Option<String>,
    },
}

/// A failure with its exit code and the short kind shown to the user.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            kind: "usage",
            message: message.into(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure {
            code: 1,
            kind: "config",
            message: e.to_string(),
        }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        let code = e.exit_code() as u8;
        let kind = match (&e, code) {
            (_, 2) => "numerical",
            (RunError::Config(_), _) => "config",
            (RunError::Checkpoint(_) | RunError::Mismatch(_), _) => "checkpoint",
            (RunError::Oracle(_), _) => "oracle",
            (RunError::Io { .. }, _) => "io",
            _ => "validation",
        };
        Failure {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

fn load(source: &Source) -> Result<ExperimentConfig, Failure> {
    match (&source.config, &source.preset) {
        (Some(path), None) => Ok(ExperimentConfig::load(path)?),
        (None, Some(name)) => find_preset(name)
            .map(|p| p.config)
            .ok_or_else(|| Failure::usage(format!("unknown preset `{name}`"))),
        _ => Err(Failure::usage("give either a config path or --preset")),
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Train { source, quiet } => {
            let config = load(&source)?;
            let summary = runner::train_with_progress(&config, |r| {
                if !quiet {
                    eprintln!(
                        "epoch {:>5}  E = {:+.6}  var = {:.4e}  {}",
                        r.epoch,
                        r.mean_e,
                        r.variance,
                        if r.best_saved { "saved" } else { "" }
                    );
                }
            })?;
            let last = summary.records.last().expect("at least one epoch");
            println!(
                "train run={} dir={} epochs={} saved_epoch={} selection={} last_mean={:.8} last_stderr={:.8}",
                config.name,
                summary.run_dir.display(),
                summary.records.len(),
                summary.saved_epoch,
                if summary.fallback { "final" } else { "gate" },
                last.mean_e,
                last.stderr
            );
        }
        Command::Infer { source } => {
            let config = load(&source)?;
            let s = runner::infer(&config)?;
            println!(
                "infer run={} epoch={} samples={} mean={:.10} stderr={:.10} variance={:.10} imag={:.3e}",
                config.name, s.epoch, s.samples, s.stats.mean.re, s.stats.stderr, s.stats.variance, s.stats.mean.im
            );
        }
        Command::Exact { source } => {
            let config = load(&source)?;
            let exp = config.validate()?;
            let gs = runner::exact(&config)?;
            println!(
                "exact spec=\"{}\" sites={} method={} basis_dim={} e0={:.12}",
                exp.spec,
                exp.spec.num_sites(),
                gs.method,
                gs.basis.dim(),
                gs.energy
            );
        }
        Command::GeometryCheck { trials, seed } => {
            if trials == 0 {
                return Err(Failure::usage("--trials must be positive"));
            }
            let checks = run_suite(trials, seed);
            for c in &checks {
                println!("{c}");
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(Failure {
                    code: 2,
                    kind: "numerical",
                    message: format!("{failed} geometry properties failed"),
                });
            }
        }
        Command::Enumerate { source } => {
            let config = load(&source)?;
            let table = runner::enumerate(&config)?;
            println!("config,probability,phase");
            for s in table {
                let bits: String = s.config.iter().map(|b| char::from(b'0' + b)).collect();
                println!("{bits},{:.15e},{:.15}", s.probability, s.phase);
            }
        }
        Command::Presets { name: None } => {
            println!("name,model,cell,hidden,epochs,parameters,scale");
            for p in preset_catalog() {
                let c = &p.config;
                println!(
                    "{},{},{},{},{},{},{}",
                    c.name,
                    c.model,
                    c.cell,
                    c.hidden,
                    c.epochs,
                    p.expected_params,
                    if p.desk_scale { "desk" } else { "long" }
                );
            }
        }
        Command::Presets { name: Some(name) } => {
            let p = find_preset(&name).ok_or_else(|| Failure::usage(format!("unknown preset `{name}`")))?;
            p.check()?;
            println!("{}", p.config.to_json());
        }
    }
    Ok(())
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let head = msg.split("Usage:").next().unwrap_or_default();
            eprintln!("error[usage]: {}", one_line(head.trim_start_matches("error: ")));
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}", f.kind, one_line(&f.message));
            ExitCode::from(f.code)
        }
    }
}
