//! Autoregressive recurrent wavefunctions.
//!
//! An ansatz reads a spin configuration site by site. At each step a
//! recurrent cell turns the previous hidden state and the previous spin into
//! a new hidden state, a Softmax head gives the conditional distribution of
//! the current spin and, for complex wavefunctions, a Softsign head adds a
//! per-site phase.

mod cells;
mod wavefunction;

pub use cells::ParamIds;
pub use wavefunction::{Sample, Traversal, Wavefunction, WavefunctionValue};

use crate::autodiff::AutodiffError;
use crate::params::{Manifold, ParameterStore, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Site alphabet size: every system here is built from two-level sites.
pub const SITE_DIM: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnsatzError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("invalid ansatz config: {0}")]
    Config(String),
    #[error("configuration has {got} sites, ansatz expects {expected}")]
    Length { expected: usize, got: usize },
    #[error("site value {0} outside the two-level alphabet")]
    SiteValue(u8),
    #[error("zero conditional probability at site {0}")]
    ZeroProbability(usize),
}

pub type Result<T> = std::result::Result<T, AnsatzError>;

/// Recurrent cell families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellKind {
    #[serde(rename = "eRNN")]
    ERnn,
    #[serde(rename = "eGRU")]
    EGru,
    #[serde(rename = "hGRU")]
    HGru,
    #[serde(rename = "eRNN2D")]
    ERnn2D,
}

impl CellKind {
    pub const ALL: [CellKind; 4] = [CellKind::ERnn, CellKind::EGru, CellKind::HGru, CellKind::ERnn2D];

    pub fn as_str(self) -> &'static str {
        match self {
            CellKind::ERnn => "eRNN",
            CellKind::EGru => "eGRU",
            CellKind::HGru => "hGRU",
            CellKind::ERnn2D => "eRNN2D",
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CellKind {
    type Err = AnsatzError;

    fn from_str(s: &str) -> Result<Self> {
        CellKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| AnsatzError::Config(format!("unknown cell kind `{s}`")))
    }
}

/// Site geometry seen by the ansatz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Lattice {
    Chain(usize),
    /// Row-major square or rectangular grid: `rows × cols`.
    Grid(usize, usize),
}

impl Lattice {
    pub fn num_sites(self) -> usize {
        match self {
            Lattice::Chain(n) => n,
            Lattice::Grid(r, c) => r * c,
        }
    }
}

impl fmt::Display for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lattice::Chain(n) => write!(f, "chain:{n}"),
            Lattice::Grid(r, c) => write!(f, "grid:{r}x{c}"),
        }
    }
}

impl FromStr for Lattice {
    type Err = AnsatzError;

    /// `chain:<n>` or `grid:<rows>x<cols>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || AnsatzError::Config(format!("invalid lattice `{s}`"));
        let num = |v: &str| v.parse::<usize>().map_err(|_| bad());
        match s.split_once(':').ok_or_else(bad)? {
            ("chain", n) => Ok(Lattice::Chain(num(n)?)),
            ("grid", rc) => {
                let (r, c) = rc.split_once('x').ok_or_else(bad)?;
                Ok(Lattice::Grid(num(r)?, num(c)?))
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzConfig {
    pub cell: CellKind,
    pub hidden: usize,
    /// Adds the Softsign phase head.
    pub complex: bool,
    /// Curvature of the hidden-state ball; only read by the hyperbolic GRU.
    pub curvature: f64,
    pub lattice: Lattice,
    /// Multiply by `(-1)^{M_A}` with `A` the odd (1-indexed) sites.
    pub marshall_sign: bool,
}

impl AnsatzConfig {
    pub fn new(cell: CellKind, hidden: usize, lattice: Lattice) -> Self {
        AnsatzConfig {
            cell,
            hidden,
            complex: false,
            curvature: 1.0,
            lattice,
            marshall_sign: false,
        }
    }

    pub fn complex(mut self, complex: bool) -> Self {
        self.complex = complex;
        self
    }

    pub fn curvature(mut self, c: f64) -> Self {
        self.curvature = c;
        self
    }

    pub fn marshall(mut self, on: bool) -> Self {
        self.marshall_sign = on;
        self
    }

    pub fn num_sites(&self) -> usize {
        self.lattice.num_sites()
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(AnsatzError::Config("hidden size must be at least 1".into()));
        }
        if self.num_sites() < 1 {
            return Err(AnsatzError::Config("lattice has no sites".into()));
        }
        if self.cell == CellKind::HGru && !(self.curvature >= 0.0 && self.curvature.is_finite()) {
            return Err(AnsatzError::Config(format!(
                "curvature must be finite and non-negative, got {}",
                self.curvature
            )));
        }
        match (self.cell, self.lattice) {
            (CellKind::ERnn2D, Lattice::Chain(_)) => Err(AnsatzError::Config(
                "the 2D RNN needs a grid lattice".into(),
            )),
            _ => Ok(()),
        }
    }

    /// `(name, rows, cols, manifold)` for every tensor, in store order.
    pub fn tensor_shapes(&self) -> Vec<(&'static str, usize, usize, Manifold)> {
        use Manifold::{Euclidean as E, Hyperbolic as H};
        let h = self.hidden;
        let v = SITE_DIM;
        let bias = if self.cell == CellKind::HGru { H } else { E };
        let mut shapes = match self.cell {
            CellKind::ERnn => vec![("W_h", h, h, E), ("U_h", h, v, E), ("b_h", h, 1, E)],
            CellKind::EGru | CellKind::HGru => vec![
                ("W_r", h, h, E),
                ("W_z", h, h, E),
                ("W_h", h, h, E),
                ("U_r", h, v, E),
                ("U_z", h, v, E),
                ("U_h", h, v, E),
                ("b_r", h, 1, bias),
                ("b_z", h, 1, bias),
                ("b_h", h, 1, bias),
            ],
            CellKind::ERnn2D => vec![
                ("W_h", h, h, E),
                ("W_v", h, h, E),
                ("U_h", h, v, E),
                ("U_v", h, v, E),
                ("b", h, 1, E),
            ],
        };
        shapes.push(("U1", v, h, E));
        shapes.push(("c1", v, 1, E));
        if self.complex {
            shapes.push(("U2", v, h, E));
            shapes.push(("c2", v, 1, E));
        }
        shapes
    }
}

/// Number of trainable scalars of an ansatz.
pub fn count_parameters(config: &AnsatzConfig) -> Result<usize> {
    config.validate()?;
    Ok(config
        .tensor_shapes()
        .iter()
        .map(|(_, r, c, _)| r * c)
        .sum())
}

/// Parameters plus the structure needed to evaluate them.
#[derive(Debug, Clone)]
pub struct Ansatz {
    config: AnsatzConfig,
    params: ParameterStore,
    ids: ParamIds,
    traversal: Traversal,
}

impl Ansatz {
    /// All-zero parameters: every conditional is uniform.
    pub fn zeros(config: AnsatzConfig) -> Result<Self> {
        config.validate()?;
        let mut params = ParameterStore::new();
        for (name, r, c, m) in config.tensor_shapes() {
            params.push(Tensor::zeros(name, r, c, m));
        }
        Self::from_params(config, params)
    }

    /// Glorot-uniform weights, zero biases (hyperbolic biases at the origin).
    pub fn glorot(config: AnsatzConfig, seed: u64) -> Result<Self> {
        let mut a = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in a.params.tensors_mut() {
            if t.cols > 1 {
                let limit = (6.0 / (t.rows + t.cols) as f64).sqrt();
                for v in &mut t.data {
                    *v = rng.gen_range(-limit..limit);
                }
            }
        }
        Ok(a)
    }

    /// Every scalar uniform in `[-scale, scale]`; hyperbolic tensors are
    /// kept inside the ball. Used by tests that need generic parameters.
    pub fn random(config: AnsatzConfig, seed: u64, scale: f64) -> Result<Self> {
        let mut a = Self::zeros(config)?;
        let c = a.config.curvature;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in a.params.tensors_mut() {
            for v in &mut t.data {
                *v = rng.gen_range(-scale..scale);
            }
            if t.manifold == Manifold::Hyperbolic {
                t.data = crate::geometry::project_with(std::mem::take(&mut t.data), c, 0.5);
            }
        }
        Ok(a)
    }

    /// Wrap an existing store, checking names, shapes and manifold tags.
    pub fn from_params(config: AnsatzConfig, params: ParameterStore) -> Result<Self> {
        config.validate()?;
        let shapes = config.tensor_shapes();
        if shapes.len() != params.len() {
            return Err(AnsatzError::Config(format!(
                "expected {} tensors, found {}",
                shapes.len(),
                params.len()
            )));
        }
        for ((name, r, c, m), t) in shapes.iter().zip(params.tensors()) {
            if t.name != *name || t.rows != *r || t.cols != *c || t.manifold != *m {
                return Err(AnsatzError::Config(format!(
                    "tensor `{}` {}x{} {} does not match expected `{}` {}x{} {}",
                    t.name, t.rows, t.cols, t.manifold, name, r, c, m
                )));
            }
        }
        let ids = ParamIds::resolve(&config, &params);
        let traversal = Traversal::new(config.lattice, config.cell);
        Ok(Ansatz {
            config,
            params,
            ids,
            traversal,
        })
    }

    pub fn config(&self) -> &AnsatzConfig {
        &self.config
    }

    pub fn params(&self) -> &ParameterStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterStore {
        &mut self.params
    }

    pub fn ids(&self) -> &ParamIds {
        &self.ids
    }

    pub fn traversal(&self) -> &Traversal {
        &self.traversal
    }

    pub fn num_sites(&self) -> usize {
        self.config.num_sites()
    }

    pub fn parameter_count(&self) -> usize {
        self.params.scalar_count()
    }
}
