//! Exact reference values for small systems: dense and Lanczos ground
//! states, exhaustive enumeration of ansatz probabilities, and a lookup-table
//! wavefunction built from an exact eigenvector.

use crate::ansatz::{AnsatzError, Wavefunction, WavefunctionValue};
use crate::hamiltonian::{HamiltonianError, HamiltonianSpec};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub const MAX_DENSE_SITES: usize = 12;
pub const MAX_LANCZOS_SITES: usize = 24;
pub const MAX_ENUMERATE_SITES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{method} limited to {limit} sites, got {sites}")]
    TooLarge {
        method: &'static str,
        sites: usize,
        limit: usize,
    },
    #[error("lanczos did not converge after {restarts} restarts (residual {residual:.3e})")]
    NoConvergence { restarts: usize, residual: f64 },
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
    #[error(transparent)]
    Wavefunction(#[from] AnsatzError),
}

pub type Result<T> = std::result::Result<T, OracleError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Dense,
    Lanczos,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Dense => "dense",
            Method::Lanczos => "lanczos",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dense" => Ok(Method::Dense),
            "lanczos" => Ok(Method::Lanczos),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

/// Bit `i` of a basis label is the value of site `i`.
pub fn config_to_index(config: &[u8]) -> usize {
    config
        .iter()
        .enumerate()
        .fold(0, |acc, (i, &s)| acc | ((s as usize & 1) << i))
}

pub fn index_to_config(index: usize, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((index >> i) & 1) as u8).collect()
}

/// Basis states the diagonalization works in: all `2^N` labels for the Ising
/// models, the zero-magnetization sector for the Heisenberg models.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    sites: usize,
    /// Sorted labels; `None` means the full space.
    labels: Option<Vec<usize>>,
}

impl Basis {
    pub fn for_spec(spec: &HamiltonianSpec) -> Self {
        let n = spec.num_sites();
        if spec.kind.is_ising() {
            Basis {
                sites: n,
                labels: None,
            }
        } else {
            let up = n / 2;
            let labels = (0..1usize << n)
                .filter(|k| k.count_ones() as usize == up)
                .collect();
            Basis {
                sites: n,
                labels: Some(labels),
            }
        }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        self.labels.as_ref().map_or(1 << self.sites, Vec::len)
    }

    pub fn label(&self, k: usize) -> usize {
        self.labels.as_ref().map_or(k, |l| l[k])
    }

    pub fn position(&self, label: usize) -> Option<usize> {
        match &self.labels {
            None => (label < 1 << self.sites).then_some(label),
            Some(l) => l.binary_search(&label).ok(),
        }
    }

    pub fn is_sector(&self) -> bool {
        self.labels.is_some()
    }
}

/// Sparse rows of `H` restricted to a basis.
struct Operator {
    diagonal: Vec<f64>,
    /// Flattened off-diagonal entries, row `k` in `offsets[k]..offsets[k + 1]`.
    columns: Vec<u32>,
    values: Vec<f64>,
    offsets: Vec<usize>,
}

impl Operator {
    fn build(spec: &HamiltonianSpec, basis: &Basis) -> Result<Self> {
        spec.validate()?;
        let n = spec.num_sites();
        let dim = basis.dim();
        let bonds = spec.bonds();
        let z = |label: usize, i: usize| if (label >> i) & 1 == 0 { 1.0 } else { -1.0 };
        let mut op = Operator {
            diagonal: Vec::with_capacity(dim),
            columns: Vec::new(),
            values: Vec::new(),
            offsets: Vec::with_capacity(dim + 1),
        };
        op.offsets.push(0);
        for k in 0..dim {
            let label = basis.label(k);
            let mut d = 0.0;
            if spec.kind.is_ising() {
                for b in &bonds {
                    d -= b.coupling * z(label, b.i) * z(label, b.j);
                }
                if spec.b != 0.0 {
                    for i in 0..n {
                        op.columns.push((label ^ (1 << i)) as u32);
                        op.values.push(-spec.b);
                    }
                }
            } else {
                for b in &bonds {
                    d += b.coupling * z(label, b.i) * z(label, b.j) / 4.0;
                    if ((label >> b.i) ^ (label >> b.j)) & 1 == 1 {
                        let target = label ^ (1 << b.i) ^ (1 << b.j);
                        let col = basis.position(target).expect("exchange stays in sector");
                        op.columns.push(col as u32);
                        op.values.push(b.coupling / 2.0);
                    }
                }
            }
            op.diagonal.push(d);
            op.offsets.push(op.columns.len());
        }
        Ok(op)
    }

    fn dim(&self) -> usize {
        self.diagonal.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for k in 0..self.dim() {
            let mut acc = self.diagonal[k] * x[k];
            for e in self.offsets[k]..self.offsets[k + 1] {
                acc += self.values[e] * x[self.columns[e] as usize];
            }
            y[k] = acc;
        }
    }

    fn dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for k in 0..n {
            m[(k, k)] += self.diagonal[k];
            for e in self.offsets[k]..self.offsets[k + 1] {
                m[(k, self.columns[e] as usize)] += self.values[e];
            }
        }
        m
    }
}

/// Full `2^N × 2^N` matrix assembled from [`HamiltonianSpec::connections`].
pub fn dense_hamiltonian(spec: &HamiltonianSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let n = spec.num_sites();
    if n > MAX_DENSE_SITES {
        return Err(OracleError::TooLarge {
            method: "dense",
            sites: n,
            limit: MAX_DENSE_SITES,
        });
    }
    let dim = 1 << n;
    let mut m = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        let (d, conns) = spec.connections(&index_to_config(k, n))?;
        m[(k, k)] += d;
        for c in conns {
            m[(k, config_to_index(&c.target))] += c.element;
        }
    }
    Ok(m)
}

/// Lowest eigenpair, with the eigenvector expressed in `basis`.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    pub method: Method,
    pub basis: Basis,
    pub vector: Vec<f64>,
}

impl GroundState {
    pub fn amplitude(&self, config: &[u8]) -> f64 {
        self.basis
            .position(config_to_index(config))
            .map_or(0.0, |k| self.vector[k])
    }

    /// Eigenvector over all `2^N` labels.
    pub fn full_vector(&self) -> Vec<f64> {
        let mut out = vec![0.0; 1 << self.basis.sites()];
        for (k, v) in self.vector.iter().enumerate() {
            out[self.basis.label(k)] = *v;
        }
        out
    }
}

/// Ground energy and state of `spec`.
pub fn ground_state(spec: &HamiltonianSpec, method: Method) -> Result<GroundState> {
    let n = spec.num_sites();
    let limit = match method {
        Method::Dense => MAX_DENSE_SITES,
        Method::Lanczos => MAX_LANCZOS_SITES,
    };
    if n > limit {
        return Err(OracleError::TooLarge {
            method: if method == Method::Dense { "dense" } else { "lanczos" },
            sites: n,
            limit,
        });
    }
    let basis = Basis::for_spec(spec);
    let op = Operator::build(spec, &basis)?;
    let (energy, vector) = match method {
        Method::Dense => dense_lowest(&op.dense()),
        Method::Lanczos => lanczos(&op, &LanczosOptions::default())?,
    };
    Ok(GroundState {
        energy,
        method,
        basis,
        vector,
    })
}

/// Dense for up to [`MAX_DENSE_SITES`] sites, Lanczos beyond.
pub fn ground_state_auto(spec: &HamiltonianSpec) -> Result<GroundState> {
    if spec.num_sites() <= MAX_DENSE_SITES {
        ground_state(spec, Method::Dense)
    } else {
        ground_state(spec, Method::Lanczos)
    }
}

fn dense_lowest(m: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let (k, &e) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty matrix");
    (e, eig.eigenvectors.column(k).iter().copied().collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    pub krylov_dim: usize,
    pub max_restarts: usize,
    /// Stop when `‖H v − θ v‖` falls below this.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            krylov_dim: 30,
            max_restarts: 500,
            tolerance: 1e-9,
            seed: 0x5eed,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    n
}

/// Restarted Lanczos with full reorthogonalization; each restart begins
/// from the current lowest Ritz vector.
fn lanczos(op: &Operator, opts: &LanczosOptions) -> Result<(f64, Vec<f64>)> {
    let dim = op.dim();
    if dim <= opts.krylov_dim.max(64) {
        return Ok(dense_lowest(&op.dense()));
    }
    let m = opts.krylov_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    normalize(&mut start);
    let mut residual = f64::INFINITY;
    let mut w = vec![0.0; dim];
    for _ in 0..opts.max_restarts {
        let mut basis: Vec<Vec<f64>> = vec![start];
        let mut alpha = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        for j in 0..m {
            op.apply(&basis[j], &mut w);
            alpha.push(dot(&basis[j], &w));
            // Two passes of classical Gram–Schmidt against the whole basis.
            for _ in 0..2 {
                for v in &basis {
                    let p = dot(v, &w);
                    w.iter_mut().zip(v).for_each(|(x, y)| *x -= p * y);
                }
            }
            let b = dot(&w, &w).sqrt();
            beta.push(b);
            if j + 1 == m || b < 1e-12 {
                break;
            }
            basis.push(w.iter().map(|x| x / b).collect());
        }
        let k = alpha.len();
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let (_, s) = dense_lowest(&t);
        residual = (beta[k - 1] * s[k - 1]).abs();
        let mut ritz = vec![0.0; dim];
        for (v, c) in basis.iter().zip(&s) {
            ritz.iter_mut().zip(v).for_each(|(x, y)| *x += c * y);
        }
        normalize(&mut ritz);
        if residual < opts.tolerance {
            op.apply(&ritz, &mut w);
            return Ok((dot(&ritz, &w), ritz));
        }
        start = ritz;
    }
    Err(OracleError::NoConvergence {
        restarts: opts.max_restarts,
        residual,
    })
}

/// `(σ, P(σ), φ(σ))` for every configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedState {
    pub config: Vec<u8>,
    pub probability: f64,
    pub phase: f64,
}

pub fn enumerate_probabilities<W: Wavefunction + ?Sized>(psi: &W) -> Result<Vec<EnumeratedState>> {
    let n = psi.num_sites();
    if n > MAX_ENUMERATE_SITES {
        return Err(OracleError::TooLarge {
            method: "enumeration",
            sites: n,
            limit: MAX_ENUMERATE_SITES,
        });
    }
    (0..1usize << n)
        .map(|k| {
            let config = index_to_config(k, n);
            let v = psi.log_psi(&config)?;
            Ok(EnumeratedState {
                config,
                probability: v.probability(),
                phase: v.phase,
            })
        })
        .collect()
}

/// `⟨Ψ|H|Ψ⟩/⟨Ψ|Ψ⟩` as `Σ P(σ) E_loc(σ) / Σ P(σ)` over every configuration.
pub fn exact_energy<W: Wavefunction + ?Sized>(spec: &HamiltonianSpec, psi: &W) -> Result<Complex64> {
    let table = enumerate_probabilities(psi)?;
    let mut num = Complex64::new(0.0, 0.0);
    let mut norm = 0.0;
    for s in &table {
        if s.probability > 0.0 {
            num += s.probability * spec.local_energy(&s.config, psi)?;
            norm += s.probability;
        }
    }
    Ok(num / norm)
}

/// `E(θ) − E₀`, non-negative by the variational principle.
pub fn variational_gap<W: Wavefunction + ?Sized>(spec: &HamiltonianSpec, psi: &W, e0: f64) -> Result<f64> {
    Ok(exact_energy(spec, psi)?.re - e0)
}

/// A wavefunction given by an explicit table of `2^N` real amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupWavefunction {
    sites: usize,
    values: Vec<WavefunctionValue>,
    probabilities: Vec<f64>,
}

impl LookupWavefunction {
    /// `amplitudes[k]` is `Ψ` at the configuration with label `k`; the table
    /// is normalized on construction.
    pub fn from_amplitudes(sites: usize, amplitudes: &[f64]) -> Self {
        assert_eq!(amplitudes.len(), 1 << sites, "amplitude table length");
        let norm = amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt();
        let values = amplitudes
            .iter()
            .map(|a| WavefunctionValue {
                log_amplitude: (a.abs() / norm).ln(),
                phase: if *a < 0.0 { std::f64::consts::PI } else { 0.0 },
            })
            .collect();
        let probabilities = amplitudes.iter().map(|a| (a / norm).powi(2)).collect();
        LookupWavefunction {
            sites,
            values,
            probabilities,
        }
    }

    pub fn from_ground_state(gs: &GroundState) -> Self {
        Self::from_amplitudes(gs.basis.sites(), &gs.full_vector())
    }

    /// Independent draws from `|Ψ|²` by inverse-CDF lookup.
    pub fn sample_batch(&self, n: usize, seed: u64) -> Vec<Vec<u8>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cdf = Vec::with_capacity(self.probabilities.len());
        let mut acc = 0.0;
        for p in &self.probabilities {
            acc += p;
            cdf.push(acc);
        }
        (0..n)
            .map(|_| {
                let u = rng.gen::<f64>() * acc;
                let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                index_to_config(k, self.sites)
            })
            .collect()
    }
}

impl Wavefunction for LookupWavefunction {
    fn num_sites(&self) -> usize {
        self.sites
    }

    fn log_psi(&self, config: &[u8]) -> std::result::Result<WavefunctionValue, AnsatzError> {
        if config.len() != self.sites {
            return Err(AnsatzError::Length {
                expected: self.sites,
                got: config.len(),
            });
        }
        if let Some(&s) = config.iter().find(|&&s| s > 1) {
            return Err(AnsatzError::SiteValue(s));
        }
        Ok(self.values[config_to_index(config)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_roundtrip() {
        for k in 0..64 {
            assert_eq!(config_to_index(&index_to_config(k, 6)), k);
        }
    }

    #[test]
    fn small_anchors() {
        let e = ground_state(&HamiltonianSpec::j1j2(2, 1.0, 0.0), Method::Dense).unwrap().energy;
        assert!((e + 0.75).abs() < 1e-12);
        let e = ground_state(&HamiltonianSpec::tfim1d(2, 1.0, 1.0), Method::Dense).unwrap().energy;
        assert!((e + 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sector_operator_matches_dense_connections() {
        for spec in [
            HamiltonianSpec::tfim1d(5, 1.0, 0.7),
            HamiltonianSpec::tfim2d(2, 3, 1.0, 3.0),
            HamiltonianSpec::j1j2(6, 1.0, 0.3),
            HamiltonianSpec::j1j2j3(6, 1.0, 0.2, 0.5),
        ] {
            let full = dense_hamiltonian(&spec).unwrap();
            assert!((&full - full.transpose()).amax() < 1e-12);
            let basis = Basis::for_spec(&spec);
            let op = Operator::build(&spec, &basis).unwrap().dense();
            for a in 0..basis.dim() {
                for b in 0..basis.dim() {
                    assert_eq!(op[(a, b)], full[(basis.label(a), basis.label(b))]);
                }
            }
        }
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        for spec in [HamiltonianSpec::tfim1d(10, 1.0, 1.0), HamiltonianSpec::j1j2(12, 1.0, 0.2)] {
            let d = ground_state(&spec, Method::Dense).unwrap();
            let l = ground_state(&spec, Method::Lanczos).unwrap();
            assert!((d.energy - l.energy).abs() < 1e-8, "{spec}: {} vs {}", d.energy, l.energy);
            let overlap: f64 = d.vector.iter().zip(&l.vector).map(|(a, b)| a * b).sum();
            assert!((overlap.abs() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn size_limits() {
        let big = HamiltonianSpec::tfim1d(13, 1.0, 1.0);
        assert!(matches!(ground_state(&big, Method::Dense), Err(OracleError::TooLarge { .. })));
        assert!(dense_hamiltonian(&big).is_err());
    }

    #[test]
    fn lookup_ground_state_is_an_eigenstate() {
        let spec = HamiltonianSpec::tfim1d(6, 1.0, 1.0);
        let gs = ground_state(&spec, Method::Dense).unwrap();
        let psi = LookupWavefunction::from_ground_state(&gs);
        for s in psi.sample_batch(200, 3) {
            let e = spec.local_energy(&s, &psi).unwrap();
            assert!((e.re - gs.energy).abs() < 1e-9 && e.im.abs() < 1e-12);
        }
        assert!(variational_gap(&spec, &psi, gs.energy).unwrap().abs() < 1e-10);
    }
}
