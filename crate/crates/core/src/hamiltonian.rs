//! Spin Hamiltonians as sparse matrix-element generators.
//!
//! Site values `0` and `1` stand for `σᶻ = +1` and `σᶻ = −1`. The Ising
//! models use bare Pauli matrices; the Heisenberg models use `S = σ/2`.
//! Boundaries are open everywhere.

use crate::ansatz::{AnsatzError, Lattice, Wavefunction, WavefunctionValue};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HamiltonianError {
    #[error("invalid hamiltonian: {0}")]
    Invalid(String),
    #[error("configuration has {got} sites, hamiltonian expects {expected}")]
    Length { expected: usize, got: usize },
    #[error("site value {0} outside the two-level alphabet")]
    SiteValue(u8),
    #[error(transparent)]
    Wavefunction(#[from] AnsatzError),
}

pub type Result<T> = std::result::Result<T, HamiltonianError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "TFIM1D")]
    Tfim1D,
    #[serde(rename = "TFIM2D")]
    Tfim2D,
    #[serde(rename = "J1J2")]
    J1J2,
    #[serde(rename = "J1J2J3")]
    J1J2J3,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Tfim1D, ModelKind::Tfim2D, ModelKind::J1J2, ModelKind::J1J2J3];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Tfim1D => "TFIM1D",
            ModelKind::Tfim2D => "TFIM2D",
            ModelKind::J1J2 => "J1J2",
            ModelKind::J1J2J3 => "J1J2J3",
        }
    }

    pub fn is_ising(self) -> bool {
        matches!(self, ModelKind::Tfim1D | ModelKind::Tfim2D)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = HamiltonianError;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| HamiltonianError::Invalid(format!("unknown model `{s}`")))
    }
}

/// One nonzero off-diagonal matrix element `⟨σ|H|σ′⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    pub target: Vec<u8>,
    pub element: f64,
}

/// A coupled pair of sites `(i, j)` with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub coupling: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    pub kind: ModelKind,
    /// Ising coupling.
    pub j: f64,
    /// Transverse field.
    pub b: f64,
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
    pub lattice: Lattice,
}

impl HamiltonianSpec {
    pub fn tfim1d(n: usize, j: f64, b: f64) -> Self {
        HamiltonianSpec {
            kind: ModelKind::Tfim1D,
            j,
            b,
            j1: 0.0,
            j2: 0.0,
            j3: 0.0,
            lattice: Lattice::Chain(n),
        }
    }

    pub fn tfim2d(rows: usize, cols: usize, j: f64, b: f64) -> Self {
        HamiltonianSpec {
            kind: ModelKind::Tfim2D,
            lattice: Lattice::Grid(rows, cols),
            ..Self::tfim1d(rows * cols, j, b)
        }
    }

    pub fn j1j2(n: usize, j1: f64, j2: f64) -> Self {
        HamiltonianSpec {
            kind: ModelKind::J1J2,
            j: 0.0,
            b: 0.0,
            j1,
            j2,
            j3: 0.0,
            lattice: Lattice::Chain(n),
        }
    }

    pub fn j1j2j3(n: usize, j1: f64, j2: f64, j3: f64) -> Self {
        HamiltonianSpec {
            kind: ModelKind::J1J2J3,
            j3,
            ..Self::j1j2(n, j1, j2)
        }
    }

    pub fn num_sites(&self) -> usize {
        self.lattice.num_sites()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_sites();
        if n < 2 {
            return Err(HamiltonianError::Invalid(format!("need at least 2 sites, got {n}")));
        }
        let couplings = [self.j, self.b, self.j1, self.j2, self.j3];
        if couplings.iter().any(|v| !v.is_finite()) {
            return Err(HamiltonianError::Invalid("couplings must be finite".into()));
        }
        match (self.kind, self.lattice) {
            (ModelKind::Tfim2D, Lattice::Chain(_)) => {
                Err(HamiltonianError::Invalid("TFIM2D needs a grid lattice".into()))
            }
            (k, Lattice::Grid(..)) if k != ModelKind::Tfim2D => {
                Err(HamiltonianError::Invalid(format!("{k} is defined on a chain")))
            }
            _ => Ok(()),
        }
    }

    /// Every coupled pair, nearest neighbors first; zero couplings are skipped.
    pub fn bonds(&self) -> Vec<Bond> {
        let mut out = Vec::new();
        let mut push = |i: usize, j: usize, coupling: f64| {
            if coupling != 0.0 {
                out.push(Bond { i, j, coupling });
            }
        };
        match (self.kind, self.lattice) {
            (ModelKind::Tfim2D, Lattice::Grid(rows, cols)) => {
                for r in 0..rows {
                    for c in 0..cols {
                        let s = r * cols + c;
                        if c + 1 < cols {
                            push(s, s + 1, self.j);
                        }
                        if r + 1 < rows {
                            push(s, s + cols, self.j);
                        }
                    }
                }
            }
            _ => {
                let n = self.num_sites();
                let ranges: &[f64] = match self.kind {
                    ModelKind::Tfim1D | ModelKind::Tfim2D => &[self.j],
                    ModelKind::J1J2 => &[self.j1, self.j2],
                    ModelKind::J1J2J3 => &[self.j1, self.j2, self.j3],
                };
                for (k, &coupling) in ranges.iter().enumerate() {
                    let d = k + 1;
                    for i in 0..n.saturating_sub(d) {
                        push(i, i + d, coupling);
                    }
                }
            }
        }
        out
    }

    /// The Majumdar–Ghosh point `J2 = J1/2` of the `J1J2` chain.
    pub fn is_majumdar_ghosh(&self) -> bool {
        self.kind == ModelKind::J1J2 && self.j1 != 0.0 && self.j2 == 0.5 * self.j1
    }

    /// Exact open-chain dimer energy `−(3/8)·N·J1` at the Majumdar–Ghosh
    /// point with an even number of sites.
    pub fn majumdar_ghosh_energy(&self) -> Option<f64> {
        let n = self.num_sites();
        (self.is_majumdar_ghosh() && n.is_multiple_of(2)).then(|| -0.375 * n as f64 * self.j1)
    }

    fn check(&self, config: &[u8]) -> Result<()> {
        if config.len() != self.num_sites() {
            return Err(HamiltonianError::Length {
                expected: self.num_sites(),
                got: config.len(),
            });
        }
        match config.iter().find(|&&s| s > 1) {
            Some(&s) => Err(HamiltonianError::SiteValue(s)),
            None => Ok(()),
        }
    }

    /// Diagonal element and the nonzero off-diagonal elements of row `σ`.
    pub fn connections(&self, config: &[u8]) -> Result<(f64, Vec<Connection>)> {
        self.check(config)?;
        let z = |s: u8| if s == 0 { 1.0 } else { -1.0 };
        let bonds = self.bonds();
        let mut diagonal = 0.0;
        let mut conns = Vec::new();
        if self.kind.is_ising() {
            for bond in &bonds {
                diagonal -= bond.coupling * z(config[bond.i]) * z(config[bond.j]);
            }
            if self.b != 0.0 {
                for i in 0..config.len() {
                    let mut target = config.to_vec();
                    target[i] ^= 1;
                    conns.push(Connection {
                        target,
                        element: -self.b,
                    });
                }
            }
        } else {
            for bond in &bonds {
                let (a, b) = (config[bond.i], config[bond.j]);
                diagonal += bond.coupling * z(a) * z(b) / 4.0;
                if a != b {
                    let mut target = config.to_vec();
                    target.swap(bond.i, bond.j);
                    conns.push(Connection {
                        target,
                        element: bond.coupling / 2.0,
                    });
                }
            }
        }
        Ok((diagonal, conns))
    }

    /// `E_loc(σ) = Σ_σ′ ⟨σ|H|σ′⟩ Ψ(σ′)/Ψ(σ)`.
    pub fn local_energy<W: Wavefunction + ?Sized>(&self, config: &[u8], psi: &W) -> Result<Complex64> {
        let base = psi.log_psi(config)?;
        self.local_energy_at(config, base, psi)
    }

    /// As [`local_energy`](Self::local_energy) with `log Ψ(σ)` already known.
    pub fn local_energy_at<W: Wavefunction + ?Sized>(
        &self,
        config: &[u8],
        base: WavefunctionValue,
        psi: &W,
    ) -> Result<Complex64> {
        let (diagonal, conns) = self.connections(config)?;
        let targets: Vec<Vec<u8>> = conns.iter().map(|c| c.target.clone()).collect();
        let values = psi.log_psi_near(config, &targets)?;
        let mut e = Complex64::new(diagonal, 0.0);
        for (conn, v) in conns.iter().zip(&values) {
            e += conn.element * base.ratio_to(v);
        }
        Ok(e)
    }
}

impl fmt::Display for HamiltonianSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, self.lattice) {
            (ModelKind::Tfim1D, l) => write!(f, "TFIM1D N={} J={} B={}", l.num_sites(), self.j, self.b),
            (ModelKind::Tfim2D, Lattice::Grid(r, c)) => write!(f, "TFIM2D {r}x{c} J={} B={}", self.j, self.b),
            (ModelKind::Tfim2D, l) => write!(f, "TFIM2D N={} J={} B={}", l.num_sites(), self.j, self.b),
            (ModelKind::J1J2, l) => write!(f, "J1J2 N={} J1={} J2={}", l.num_sites(), self.j1, self.j2),
            (ModelKind::J1J2J3, l) => write!(
                f,
                "J1J2J3 N={} J1={} J2={} J3={}",
                l.num_sites(),
                self.j1,
                self.j2,
                self.j3
            ),
        }
    }
}

/// 1-indexed `(row, column)` of an `n × n` lattice to its 1-indexed chain
/// position, `(row − 1)·n + column`.
pub fn lattice_map_2d(row: usize, col: usize, n: usize) -> Result<usize> {
    if row == 0 || col == 0 || row > n || col > n {
        return Err(HamiltonianError::Invalid(format!(
            "site ({row}, {col}) outside a {n}x{n} lattice"
        )));
    }
    Ok((row - 1) * n + col)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{Ansatz, AnsatzConfig, CellKind};

    fn uniform(n: usize) -> Ansatz {
        Ansatz::zeros(AnsatzConfig::new(CellKind::ERnn, 2, Lattice::Chain(n))).unwrap()
    }

    #[test]
    fn tfim_three_sites_all_up() {
        let h = HamiltonianSpec::tfim1d(3, 1.0, 1.0);
        let (d, conns) = h.connections(&[0, 0, 0]).unwrap();
        assert_eq!(d, -2.0);
        assert_eq!(conns.len(), 3);
        assert!(conns.iter().all(|c| c.element == -1.0));
        let e = h.local_energy(&[0, 0, 0], &uniform(3)).unwrap();
        assert!((e.re + 5.0).abs() < 1e-14 && e.im == 0.0);
    }

    #[test]
    fn tfim_two_sites_uniform() {
        let h = HamiltonianSpec::tfim1d(2, 1.0, 1.0);
        let psi = uniform(2);
        let e: Vec<f64> = [[0, 0], [0, 1], [1, 0], [1, 1]]
            .iter()
            .map(|c| h.local_energy(c, &psi).unwrap().re)
            .collect();
        for (a, b) in e.iter().zip([-3.0, -1.0, -1.0, -3.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn heisenberg_two_sites() {
        let h = HamiltonianSpec::j1j2(2, 1.0, 0.0);
        let (d, conns) = h.connections(&[0, 1]).unwrap();
        assert_eq!(d, -0.25);
        assert_eq!(conns, vec![Connection { target: vec![1, 0], element: 0.5 }]);
        let e = h.local_energy(&[0, 1], &uniform(2)).unwrap();
        assert!((e.re - 0.25).abs() < 1e-14);
    }

    #[test]
    fn j1j3_bonds_open_chain() {
        let h = HamiltonianSpec::j1j2j3(4, 1.0, 0.0, 0.5);
        let pairs: Vec<(usize, usize, f64)> = h.bonds().iter().map(|b| (b.i, b.j, b.coupling)).collect();
        assert_eq!(pairs, vec![(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 0.5)]);
    }

    #[test]
    fn grid_bonds_do_not_wrap() {
        let h = HamiltonianSpec::tfim2d(5, 5, 1.0, 3.0);
        let bonds = h.bonds();
        assert_eq!(bonds.len(), 2 * 5 * 4);
        // Chain positions 5 and 6 (1-indexed) end one row and start the next.
        assert!(!bonds.iter().any(|b| (b.i, b.j) == (4, 5)));
        assert!(bonds.iter().any(|b| (b.i, b.j) == (0, 5)));
    }

    #[test]
    fn lattice_map() {
        assert_eq!(lattice_map_2d(1, 1, 5).unwrap(), 1);
        assert_eq!(lattice_map_2d(2, 1, 5).unwrap(), 6);
        assert_eq!(lattice_map_2d(1, 5, 5).unwrap(), 5);
        assert!(lattice_map_2d(0, 1, 5).is_err());
        assert!(lattice_map_2d(1, 6, 5).is_err());
    }

    #[test]
    fn connection_counts_and_sector() {
        let h = HamiltonianSpec::j1j2(6, 1.0, 0.5);
        let config = [0, 1, 1, 0, 1, 0];
        let (_, conns) = h.connections(&config).unwrap();
        let antiparallel = h.bonds().iter().filter(|b| config[b.i] != config[b.j]).count();
        assert_eq!(conns.len(), antiparallel);
        let mag = |c: &[u8]| c.iter().map(|&s| s as usize).sum::<usize>();
        assert!(conns.iter().all(|c| mag(&c.target) == mag(&config)));
        let t = HamiltonianSpec::tfim1d(6, 1.0, 1.0);
        let (_, conns) = t.connections(&config).unwrap();
        assert_eq!(conns.len(), 6);
        assert!(conns
            .iter()
            .all(|c| c.target.iter().zip(&config).filter(|(a, b)| a != b).count() == 1));
    }

    #[test]
    fn majumdar_ghosh_flag() {
        let h = HamiltonianSpec::j1j2(50, 1.0, 0.5);
        assert!(h.is_majumdar_ghosh());
        assert_eq!(h.majumdar_ghosh_energy(), Some(-18.75));
        assert_eq!(HamiltonianSpec::j1j2(50, 1.0, 0.2).majumdar_ghosh_energy(), None);
    }

    #[test]
    fn validation() {
        assert!(HamiltonianSpec::tfim1d(1, 1.0, 1.0).validate().is_err());
        assert!(HamiltonianSpec::tfim1d(4, f64::NAN, 1.0).validate().is_err());
        assert!(HamiltonianSpec::tfim1d(4, 1.0, 1.0).connections(&[0, 1]).is_err());
        assert!(HamiltonianSpec::tfim2d(2, 2, 1.0, 1.0).validate().is_ok());
        assert!("XXZ".parse::<ModelKind>().is_err());
    }
}
