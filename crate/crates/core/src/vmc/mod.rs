//! Variational Monte Carlo: energy and gradient estimators, the training
//! loop and inference.

mod optim;

pub use optim::{clip_gradients, rsgd_step, Adam, AdamConfig, ClipMode, Rsgd};

use crate::ansatz::{Ansatz, AnsatzError, Sample, Wavefunction};
use crate::hamiltonian::{HamiltonianError, HamiltonianSpec};
use crate::params::{Gradient, ParameterStore};
use num_complex::Complex64;
use std::time::Instant;
use thiserror::Error;

/// Generator stream reserved for inference, disjoint from training steps.
pub const INFERENCE_STREAM: u64 = 1 << 63;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VmcError {
    #[error("empty sample batch")]
    EmptyBatch,
    #[error("non-finite {what} at epoch {epoch} (parameter norm {param_norm:.6e})")]
    NonFinite {
        what: &'static str,
        epoch: usize,
        param_norm: f64,
    },
    #[error("{0}")]
    Shape(String),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
}

pub type Result<T> = std::result::Result<T, VmcError>;

/// Sample statistics of a batch of local energies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyStats {
    pub mean: Complex64,
    /// `Σ|E_loc − Ē|² / (n − 1)`.
    pub variance: f64,
    pub stderr: f64,
    pub samples: usize,
    /// Set when `n = 1`: variance and stderr are reported as zero.
    pub degenerate: bool,
}

impl EnergyStats {
    /// `mean (stderr)` with four decimals, as energies are usually tabulated.
    pub fn table_format(&self) -> String {
        format!("{:.4} ({:.4})", self.mean.re, self.stderr)
    }
}

pub fn energy_estimate(local_energies: &[Complex64]) -> Result<EnergyStats> {
    let n = local_energies.len();
    if n == 0 {
        return Err(VmcError::EmptyBatch);
    }
    let mean = local_energies.iter().sum::<Complex64>() / n as f64;
    if n == 1 {
        return Ok(EnergyStats {
            mean,
            variance: 0.0,
            stderr: 0.0,
            samples: 1,
            degenerate: true,
        });
    }
    let variance = local_energies.iter().map(|e| (e - mean).norm_sqr()).sum::<f64>() / (n - 1) as f64;
    Ok(EnergyStats {
        mean,
        variance,
        stderr: (variance / n as f64).sqrt(),
        samples: n,
        degenerate: false,
    })
}

/// `E_loc` for every sample, reusing the `log Ψ` recorded while sampling.
pub fn local_energies(spec: &HamiltonianSpec, psi: &Ansatz, samples: &[Sample]) -> Result<Vec<Complex64>> {
    samples
        .iter()
        .map(|s| Ok(spec.local_energy_at(&s.config, s.value, psi)?))
        .collect()
}

/// `∂E/∂θ = 2 Re[⟨E_loc* ∂logΨ⟩ − Ē* ⟨∂logΨ⟩]` with `∂logΨ = ∂a + i ∂φ`.
///
/// Averages are uniform over the batch, or use `weights` (summing to one)
/// when given, e.g. exact probabilities over an enumerated space.
pub fn gradient_estimate(
    local_energies: &[Complex64],
    amp_grads: &[Gradient],
    phase_grads: &[Gradient],
    weights: Option<&[f64]>,
) -> Result<Gradient> {
    let n = local_energies.len();
    if n == 0 {
        return Err(VmcError::EmptyBatch);
    }
    if amp_grads.len() != n || phase_grads.len() != n || weights.is_some_and(|w| w.len() != n) {
        return Err(VmcError::Shape(format!(
            "{n} energies, {} amplitude and {} phase gradients",
            amp_grads.len(),
            phase_grads.len()
        )));
    }
    let w = |i: usize| weights.map_or(1.0 / n as f64, |w| w[i]);
    let mean: Complex64 = (0..n).map(|i| w(i) * local_energies[i]).sum();
    let mut out = Gradient {
        tensors: amp_grads[0].tensors.iter().map(|t| vec![0.0; t.len()]).collect(),
    };
    for i in 0..n {
        let d = local_energies[i] - mean;
        let (ga, gp) = (&amp_grads[i], &phase_grads[i]);
        if ga.tensors.len() != out.tensors.len() || gp.tensors.len() != out.tensors.len() {
            return Err(VmcError::Shape("gradient tensor count mismatch".into()));
        }
        out.add_scaled(ga, 2.0 * w(i) * d.re);
        out.add_scaled(gp, 2.0 * w(i) * d.im);
    }
    Ok(out)
}

/// Saves only when the batch mean improves on the best so far and the batch
/// variance is below a tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestModelGate {
    best: Option<f64>,
    pub tolerance: f64,
}

impl BestModelGate {
    pub fn new(tolerance: f64) -> Self {
        BestModelGate { best: None, tolerance }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    pub fn consider(&mut self, mean: f64, variance: f64) -> bool {
        let improves = self.best.is_none_or(|b| mean < b);
        let save = improves && variance < self.tolerance && mean.is_finite();
        if save {
            self.best = Some(mean);
        }
        save
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Optimizer updates per epoch; the epoch record reports the last one.
    pub steps_per_epoch: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub rsgd_lr: f64,
    pub clip: ClipMode,
    pub variance_tolerance: f64,
}

impl TrainConfig {
    pub fn new(epochs: usize, seed: u64) -> Self {
        TrainConfig {
            epochs,
            steps_per_epoch: 1,
            batch_size: 50,
            seed,
            adam: AdamConfig::default(),
            rsgd_lr: 1e-2,
            clip: ClipMode::None,
            variance_tolerance: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(VmcError::Config(m.into()));
        if self.epochs == 0 || self.steps_per_epoch == 0 {
            return bad("epochs and steps_per_epoch must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        let a = &self.adam;
        if !(a.lr > 0.0 && a.eps > 0.0 && a.decay > 0.0 && a.decay_steps > 0.0) {
            return bad("adam lr, eps, decay and decay_steps must be positive");
        }
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2)) {
            return bad("adam betas must lie in [0, 1)");
        }
        if !(self.rsgd_lr > 0.0) {
            return bad("rsgd_lr must be positive");
        }
        if !(self.variance_tolerance > 0.0) {
            return bad("variance_tolerance must be positive");
        }
        Ok(())
    }
}

/// One line of the metrics stream.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRecord {
    pub epoch: usize,
    pub mean_e: f64,
    pub imag_e: f64,
    pub variance: f64,
    pub stderr: f64,
    pub best_saved: bool,
    pub elapsed_s: f64,
    pub clip: ClipMode,
    pub seed: u64,
}

impl TrainingRecord {
    pub const CSV_HEADER: &'static str = "epoch,mean_e,imag_e,variance,stderr,best_saved,elapsed_s";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.10},{:.3e},{:.10},{:.10},{},{:.3}",
            self.epoch,
            self.mean_e,
            self.imag_e,
            self.variance,
            self.stderr,
            u8::from(self.best_saved),
            self.elapsed_s
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub records: Vec<TrainingRecord>,
    /// Epoch and parameters of the last model the gate accepted.
    pub best: Option<(usize, ParameterStore)>,
}

/// One optimizer update. Returns the batch statistics of the parameters
/// before the update.
fn train_step(
    ansatz: &mut Ansatz,
    spec: &HamiltonianSpec,
    cfg: &TrainConfig,
    adam: &mut Adam,
    stream: u64,
    epoch: usize,
) -> Result<EnergyStats> {
    let samples = ansatz.sample_batch(cfg.batch_size, cfg.seed, stream)?;
    let elocs = local_energies(spec, ansatz, &samples)?;
    let stats = energy_estimate(&elocs)?;
    let non_finite = |what, params: &ParameterStore| VmcError::NonFinite {
        what,
        epoch,
        param_norm: params.l2_norm(),
    };
    if !(stats.mean.re.is_finite() && stats.mean.im.is_finite() && stats.variance.is_finite()) {
        return Err(non_finite("energy", ansatz.params()));
    }
    // The covariance estimator written as a weighted sum of per-sample
    // derivatives, one backward pass per sample.
    let n = samples.len() as f64;
    let mut grad = Gradient::zeros_like(ansatz.params());
    for (s, e) in samples.iter().zip(&elocs) {
        let d = e - stats.mean;
        ansatz.accumulate_gradient(&s.config, 2.0 * d.re / n, 2.0 * d.im / n, &mut grad)?;
    }
    if !grad.is_finite() {
        return Err(non_finite("gradient", ansatz.params()));
    }
    clip_gradients(&mut grad, cfg.clip);
    let rsgd = Rsgd {
        lr: cfg.rsgd_lr,
        curvature: ansatz.config().curvature,
    };
    adam.step(ansatz.params_mut(), &grad);
    rsgd.step(ansatz.params_mut(), &grad);
    if !ansatz.params().all_finite() {
        return Err(non_finite("parameters", ansatz.params()));
    }
    Ok(stats)
}

/// Train `ansatz` in place. `on_epoch` sees each record together with the
/// model whose batch produced it.
pub fn train<F>(ansatz: &mut Ansatz, spec: &HamiltonianSpec, cfg: &TrainConfig, mut on_epoch: F) -> Result<TrainOutcome>
where
    F: FnMut(&TrainingRecord, &ParameterStore) -> Result<()>,
{
    cfg.validate()?;
    spec.validate()?;
    if spec.num_sites() != ansatz.num_sites() {
        return Err(VmcError::Shape(format!(
            "hamiltonian has {} sites, ansatz {}",
            spec.num_sites(),
            ansatz.num_sites()
        )));
    }
    let start = Instant::now();
    let mut adam = Adam::new(cfg.adam, ansatz.params());
    let mut gate = BestModelGate::new(cfg.variance_tolerance);
    let mut outcome = TrainOutcome {
        records: Vec::with_capacity(cfg.epochs),
        best: None,
    };
    for epoch in 1..=cfg.epochs {
        let mut stats = None;
        let mut before = None;
        for step in 0..cfg.steps_per_epoch {
            let stream = ((epoch - 1) * cfg.steps_per_epoch + step) as u64;
            if step + 1 == cfg.steps_per_epoch {
                before = Some(ansatz.params().clone());
            }
            stats = Some(train_step(ansatz, spec, cfg, &mut adam, stream, epoch)?);
        }
        let (stats, before) = (stats.expect("at least one step"), before.expect("snapshot"));
        let best_saved = gate.consider(stats.mean.re, stats.variance);
        let record = TrainingRecord {
            epoch,
            mean_e: stats.mean.re,
            imag_e: stats.mean.im,
            variance: stats.variance,
            stderr: stats.stderr,
            best_saved,
            elapsed_s: start.elapsed().as_secs_f64(),
            clip: cfg.clip,
            seed: cfg.seed,
        };
        on_epoch(&record, &before)?;
        if best_saved {
            outcome.best = Some((epoch, before));
        }
        outcome.records.push(record);
    }
    Ok(outcome)
}

/// Fresh seeded sampling of `n` configurations and their energy statistics.
pub fn infer(ansatz: &Ansatz, spec: &HamiltonianSpec, n: usize, seed: u64) -> Result<EnergyStats> {
    if n == 0 {
        return Err(VmcError::EmptyBatch);
    }
    let samples = ansatz.sample_batch(n, seed, INFERENCE_STREAM)?;
    let elocs = local_energies(spec, ansatz, &samples)?;
    energy_estimate(&elocs)
}

/// `E_loc` for arbitrary configurations of any wavefunction.
pub fn local_energies_of<W: Wavefunction + ?Sized>(
    spec: &HamiltonianSpec,
    psi: &W,
    configs: &[Vec<u8>],
) -> Result<Vec<Complex64>> {
    configs.iter().map(|c| Ok(spec.local_energy(c, psi)?)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{AnsatzConfig, CellKind, Lattice};

    #[test]
    fn uniform_two_site_tfim_batch() {
        let spec = HamiltonianSpec::tfim1d(2, 1.0, 1.0);
        let psi = Ansatz::zeros(AnsatzConfig::new(CellKind::ERnn, 2, Lattice::Chain(2))).unwrap();
        let configs = vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]];
        let e = local_energies_of(&spec, &psi, &configs).unwrap();
        let stats = energy_estimate(&e).unwrap();
        assert!((stats.mean.re + 2.0).abs() < 1e-14);
    }

    #[test]
    fn constant_batch_has_zero_variance_and_single_sample_is_degenerate() {
        let e = vec![Complex64::new(-1.5, 0.0); 10];
        let s = energy_estimate(&e).unwrap();
        assert_eq!(s.variance, 0.0);
        assert_eq!(s.stderr, 0.0);
        let s = energy_estimate(&e[..1]).unwrap();
        assert!(s.degenerate && s.variance == 0.0);
        assert_eq!(energy_estimate(&[]), Err(VmcError::EmptyBatch));
    }

    #[test]
    fn stderr_is_sqrt_var_over_n() {
        let e: Vec<Complex64> = (0..8).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let s = energy_estimate(&e).unwrap();
        assert!((s.variance - 6.0).abs() < 1e-12);
        assert!((s.stderr - (6.0f64 / 8.0).sqrt()).abs() < 1e-12);
    }

    fn toy_grads(n: usize) -> (Vec<Complex64>, Vec<Gradient>, Vec<Gradient>) {
        let e = (0..n).map(|i| Complex64::new(i as f64 * 0.7 - 1.0, 0.1 * i as f64)).collect();
        let ga = (0..n).map(|i| Gradient { tensors: vec![vec![i as f64, 1.0]] }).collect();
        let gp = (0..n).map(|i| Gradient { tensors: vec![vec![0.5, -(i as f64)]] }).collect();
        (e, ga, gp)
    }

    #[test]
    fn single_sample_gradient_vanishes_and_scales_linearly() {
        let (e, ga, gp) = toy_grads(1);
        let g = gradient_estimate(&e, &ga, &gp, None).unwrap();
        assert_eq!(g.flatten(), vec![0.0, 0.0]);
        let (e, ga, gp) = toy_grads(5);
        let g1 = gradient_estimate(&e, &ga, &gp, None).unwrap();
        let e2: Vec<Complex64> = e.iter().map(|x| 2.0 * x).collect();
        let g2 = gradient_estimate(&e2, &ga, &gp, None).unwrap();
        for (a, b) in g1.flatten().iter().zip(g2.flatten()) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
        assert!(gradient_estimate(&e, &ga[..2], &gp, None).is_err());
    }

    #[test]
    fn gate_requires_improvement_and_low_variance() {
        let mut gate = BestModelGate::new(1.0);
        assert!(!gate.consider(-1.0, 2.0));
        assert!(gate.consider(-1.0, 0.5));
        assert!(!gate.consider(-0.5, 0.1));
        assert!(!gate.consider(-2.0, 1.5));
        assert!(gate.consider(-2.0, 0.9));
        assert_eq!(gate.best(), Some(-2.0));
    }

    #[test]
    fn training_is_deterministic() {
        let spec = HamiltonianSpec::tfim1d(4, 1.0, 1.0);
        let cfg_a = AnsatzConfig::new(CellKind::HGru, 4, Lattice::Chain(4));
        let mut cfg = TrainConfig::new(3, 11);
        cfg.batch_size = 8;
        let run = || {
            let mut a = Ansatz::glorot(cfg_a.clone(), 1).unwrap();
            let out = train(&mut a, &spec, &cfg, |_, _| Ok(())).unwrap();
            (out.records.iter().map(|r| (r.mean_e, r.variance)).collect::<Vec<_>>(), a.params().flatten())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn csv_row_shape() {
        let r = TrainingRecord {
            epoch: 3,
            mean_e: -1.0,
            imag_e: 0.0,
            variance: 0.5,
            stderr: 0.1,
            best_saved: true,
            elapsed_s: 1.25,
            clip: ClipMode::None,
            seed: 1,
        };
        assert_eq!(r.csv_row().split(',').count(), TrainingRecord::CSV_HEADER.split(',').count());
    }
}
