//! Experiment driver: turns a validated config into run-directory artifacts.

use crate::ansatz::Ansatz;
use crate::checkpoint::{Checkpoint, CheckpointError, METRICS_FILE};
use crate::config::{ConfigError, Experiment, ExperimentConfig};
use crate::oracle::{self, EnumeratedState, GroundState, OracleError};
use crate::params::ParameterStore;
use crate::vmc::{self, EnergyStats, TrainingRecord, VmcError};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Copy of the experiment config stored next to the checkpoint.
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Vmc(#[from] VmcError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("checkpoint in {0} was trained with a different ansatz")]
    Mismatch(PathBuf),
}

impl RunError {
    /// 2 for numerical failures, 1 for everything the user can fix.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Vmc(VmcError::NonFinite { .. }) | RunError::Oracle(OracleError::NoConvergence { .. }) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, RunError>;

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |e| RunError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Initialization draws from a seed distinct from the sampling streams.
pub fn init_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub run_dir: PathBuf,
    pub records: Vec<TrainingRecord>,
    /// Epoch of the saved model.
    pub saved_epoch: usize,
    /// True when no epoch passed the gate and the final model was saved.
    pub fallback: bool,
}

fn checkpoint(exp: &Experiment, params: ParameterStore, epoch: usize, fallback: bool) -> Checkpoint {
    let mut c = Checkpoint {
        config: exp.ansatz.clone(),
        params,
        seed: exp.train.seed,
        epoch,
        extra: Default::default(),
    };
    c.extra.insert("name".into(), exp.name.clone());
    c.extra.insert("hamiltonian".into(), exp.spec.to_string());
    c.extra.insert("selection".into(), if fallback { "final" } else { "gate" }.into());
    c
}

/// Train from scratch and write `metrics.csv`, `best.ckpt`, `manifest` and
/// a copy of the config. Nothing is written before the config validates.
pub fn train(config: &ExperimentConfig) -> Result<TrainSummary> {
    train_with_progress(config, |_| {})
}

/// [`train`], reporting every epoch record to `progress`.
pub fn train_with_progress(
    config: &ExperimentConfig,
    mut progress: impl FnMut(&TrainingRecord),
) -> Result<TrainSummary> {
    let exp = config.validate()?;
    let mut ansatz = Ansatz::glorot(exp.ansatz.clone(), init_seed(exp.train.seed)).map_err(VmcError::from)?;
    let run_dir = exp.run_dir();
    std::fs::create_dir_all(&run_dir).map_err(io(&run_dir))?;
    let cfg_path = run_dir.join(CONFIG_FILE);
    std::fs::write(&cfg_path, config.to_json()).map_err(io(&cfg_path))?;
    let metrics_path = run_dir.join(METRICS_FILE);
    let mut metrics = BufWriter::new(File::create(&metrics_path).map_err(io(&metrics_path))?);
    writeln!(metrics, "{}", TrainingRecord::CSV_HEADER).map_err(io(&metrics_path))?;

    let mut write_error = None;
    let outcome = vmc::train(&mut ansatz, &exp.spec, &exp.train, |record, params| {
        progress(record);
        let res = writeln!(metrics, "{}", record.csv_row())
            .and_then(|_| metrics.flush())
            .map_err(io(&metrics_path))
            .and_then(|_| {
                if record.best_saved {
                    checkpoint(&exp, params.clone(), record.epoch, false).write(&run_dir)?;
                }
                Ok(())
            });
        if let Err(e) = res {
            write_error = Some(e);
            return Err(VmcError::Config("aborted: could not write run artifacts".into()));
        }
        Ok(())
    });
    if let Some(e) = write_error {
        return Err(e);
    }
    let outcome = outcome?;
    let (saved_epoch, fallback) = match &outcome.best {
        Some((epoch, _)) => (*epoch, false),
        None => {
            let epoch = exp.train.epochs;
            checkpoint(&exp, ansatz.params().clone(), epoch, true).write(&run_dir)?;
            (epoch, true)
        }
    };
    Ok(TrainSummary {
        run_dir,
        records: outcome.records,
        saved_epoch,
        fallback,
    })
}

/// Load the saved model of a run, checking it matches the config.
pub fn load_model(exp: &Experiment) -> Result<(Ansatz, Checkpoint)> {
    let dir = exp.run_dir();
    let ckpt = Checkpoint::read(&dir)?;
    if ckpt.config != exp.ansatz {
        return Err(RunError::Mismatch(dir));
    }
    Ok((ckpt.clone().into_ansatz()?, ckpt))
}

#[derive(Debug, Clone)]
pub struct InferenceSummary {
    pub stats: EnergyStats,
    pub epoch: usize,
    pub samples: usize,
}

/// Fresh samples from the saved model.
pub fn infer(config: &ExperimentConfig) -> Result<InferenceSummary> {
    let exp = config.validate()?;
    let (ansatz, ckpt) = load_model(&exp)?;
    let stats = vmc::infer(&ansatz, &exp.spec, exp.inference_samples, exp.train.seed)?;
    Ok(InferenceSummary {
        stats,
        epoch: ckpt.epoch,
        samples: exp.inference_samples,
    })
}

/// Ground-state energy of the config's Hamiltonian.
pub fn exact(config: &ExperimentConfig) -> Result<GroundState> {
    let exp = config.validate()?;
    Ok(oracle::ground_state_auto(&exp.spec)?)
}

/// Probability table of the saved model.
pub fn enumerate(config: &ExperimentConfig) -> Result<Vec<EnumeratedState>> {
    let exp = config.validate()?;
    let (ansatz, _) = load_model(&exp)?;
    Ok(oracle::enumerate_probabilities(&ansatz)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::CellKind;
    use crate::hamiltonian::ModelKind;

    fn small(dir: &Path) -> ExperimentConfig {
        let mut c = ExperimentConfig::new("tiny", ModelKind::Tfim1D, CellKind::EGru);
        c.n = Some(4);
        c.hidden = 4;
        c.epochs = 3;
        c.steps_per_epoch = 2;
        c.batch_size = 16;
        c.inference_samples = 200;
        c.output_dir = dir.to_path_buf();
        c
    }

    #[test]
    fn train_then_infer_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let c = small(dir.path());
        let s = train(&c).unwrap();
        assert_eq!(s.records.len(), 3);
        let csv = std::fs::read_to_string(s.run_dir.join(METRICS_FILE)).unwrap();
        assert_eq!(csv.lines().count(), 4);
        let a = infer(&c).unwrap();
        let b = infer(&c).unwrap();
        assert_eq!(a.stats, b.stats);
        assert_eq!(a.epoch, s.saved_epoch);

        let first = std::fs::read(s.run_dir.join(crate::checkpoint::BLOB_FILE)).unwrap();
        train(&c).unwrap();
        let second = std::fs::read(s.run_dir.join(crate::checkpoint::BLOB_FILE)).unwrap();
        assert_eq!(first, second);

        let table = enumerate(&c).unwrap();
        assert_eq!(table.len(), 16);
        assert!((table.iter().map(|s| s.probability).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_config_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(dir.path());
        c.clip = Some("sideways".into());
        let err = train(&c).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn infer_without_checkpoint_fails() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(infer(&small(dir.path())), Err(RunError::Checkpoint(_))));
    }

    #[test]
    fn exit_codes() {
        let nf = RunError::Vmc(VmcError::NonFinite {
            what: "gradient",
            epoch: 3,
            param_norm: 1.0,
        });
        assert_eq!(nf.exit_code(), 2);
        let stalled = RunError::Oracle(OracleError::NoConvergence {
            restarts: 1,
            residual: 1.0,
        });
        assert_eq!(stalled.exit_code(), 2);
        assert_eq!(RunError::Mismatch(PathBuf::from("x")).exit_code(), 1);
    }

    #[test]
    fn exact_small_heisenberg() {
        let mut c = ExperimentConfig::new("h2", ModelKind::J1J2, CellKind::EGru);
        c.n = Some(2);
        assert!((exact(&c).unwrap().energy + 0.75).abs() < 1e-12);
    }
}
