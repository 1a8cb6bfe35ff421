//! Autoregressive scan, sampling and gradients of `log Ψ`.

use super::cells::{Cell, HeadOut};
use super::{Ansatz, AnsatzError, CellKind, Lattice, Result, SITE_DIM};
use crate::autodiff::{Algebra, Eval, Tape};
use crate::params::Gradient;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// `log Ψ(σ) = log_amplitude + i·phase`, with `|Ψ|² = P(σ)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WavefunctionValue {
    pub log_amplitude: f64,
    pub phase: f64,
}

impl WavefunctionValue {
    pub fn probability(&self) -> f64 {
        (2.0 * self.log_amplitude).exp()
    }

    pub fn amplitude(&self) -> Complex64 {
        Complex64::from_polar(self.log_amplitude.exp(), self.phase)
    }

    /// `Ψ(other) / Ψ(self)`.
    pub fn ratio_to(&self, other: &WavefunctionValue) -> Complex64 {
        Complex64::from_polar(
            (other.log_amplitude - self.log_amplitude).exp(),
            other.phase - self.phase,
        )
    }
}

/// Anything that can evaluate `log Ψ` on configurations of a fixed length.
pub trait Wavefunction {
    fn num_sites(&self) -> usize;
    fn log_psi(&self, config: &[u8]) -> Result<WavefunctionValue>;

    /// Evaluate many configurations that are small edits of `base`.
    fn log_psi_near(&self, base: &[u8], configs: &[Vec<u8>]) -> Result<Vec<WavefunctionValue>> {
        let _ = base;
        configs.iter().map(|c| self.log_psi(c)).collect()
    }
}

/// A drawn configuration and the `log Ψ` accumulated while drawing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Site values in lattice (row-major) order.
    pub config: Vec<u8>,
    pub value: WavefunctionValue,
}

/// Order in which the ansatz visits the sites and, for each visit, the
/// path positions of the neighbors it reads from.
#[derive(Debug, Clone, PartialEq)]
pub struct Traversal {
    order: Vec<usize>,
    horizontal: Vec<Option<usize>>,
    vertical: Vec<Option<usize>>,
}

impl Traversal {
    /// Chain cells walk sites in row-major order. The 2D RNN walks a snake:
    /// even rows left to right, odd rows right to left.
    pub fn new(lattice: Lattice, cell: CellKind) -> Self {
        let n = lattice.num_sites();
        match (lattice, cell) {
            (Lattice::Grid(rows, cols), CellKind::ERnn2D) => {
                let mut order = Vec::with_capacity(n);
                for r in 0..rows {
                    if r % 2 == 0 {
                        order.extend((0..cols).map(|c| r * cols + c));
                    } else {
                        order.extend((0..cols).rev().map(|c| r * cols + c));
                    }
                }
                let mut position = vec![0; n];
                for (p, &s) in order.iter().enumerate() {
                    position[s] = p;
                }
                let mut horizontal = Vec::with_capacity(n);
                let mut vertical = Vec::with_capacity(n);
                for &s in &order {
                    let (r, c) = (s / cols, s % cols);
                    let prev_col = if r % 2 == 0 { c.checked_sub(1) } else { Some(c + 1).filter(|&c| c < cols) };
                    horizontal.push(prev_col.map(|pc| position[r * cols + pc]));
                    vertical.push(r.checked_sub(1).map(|pr| position[pr * cols + c]));
                }
                Traversal {
                    order,
                    horizontal,
                    vertical,
                }
            }
            _ => Traversal {
                order: (0..n).collect(),
                horizontal: (0..n).map(|p| p.checked_sub(1)).collect(),
                vertical: vec![None; n],
            },
        }
    }

    /// Site visited at each path position.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn horizontal(&self) -> &[Option<usize>] {
        &self.horizontal
    }

    pub fn vertical(&self) -> &[Option<usize>] {
        &self.vertical
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    fn to_path(&self, config: &[u8]) -> Vec<u8> {
        self.order.iter().map(|&s| config[s]).collect()
    }
}

/// Values kept from a full scan so that nearby configurations can resume
/// from their first differing path position.
#[derive(Debug, Clone)]
struct ScanCache {
    spins: Vec<u8>,
    hidden: Vec<Vec<f64>>,
    log_probs: Vec<Vec<f64>>,
    phases: Vec<Vec<f64>>,
}

impl Ansatz {
    fn cell(&self) -> Cell<'_> {
        Cell::new(&self.config, &self.ids)
    }

    fn check_config(&self, config: &[u8]) -> Result<()> {
        if config.len() != self.num_sites() {
            return Err(AnsatzError::Length {
                expected: self.num_sites(),
                got: config.len(),
            });
        }
        match config.iter().find(|&&s| s as usize >= SITE_DIM) {
            Some(&s) => Err(AnsatzError::SiteValue(s)),
            None => Ok(()),
        }
    }

    /// `π · M_A(σ)` with `A` the odd 1-indexed sites, or zero.
    pub fn marshall_phase(&self, config: &[u8]) -> f64 {
        if !self.config.marshall_sign {
            return 0.0;
        }
        let m: u32 = config.iter().step_by(2).map(|&s| s as u32).sum();
        PI * m as f64
    }

    /// Hidden state at path position `p`, given those before it.
    fn hidden_at<A: Algebra>(
        &self,
        cell: &Cell<'_>,
        alg: &mut A,
        hidden: &[A::V],
        spins: &[u8],
        p: usize,
    ) -> Result<A::V> {
        let t = &self.traversal;
        let neighbor = |alg: &mut A, q: Option<usize>| match q {
            Some(q) => (hidden[q].clone(), cell.input(alg, Some(spins[q]))),
            None => (alg.zeros(cell.hidden), cell.input(alg, None)),
        };
        if cell.kind == CellKind::ERnn2D {
            let (hh, xh) = neighbor(alg, t.horizontal[p]);
            let (hv, xv) = neighbor(alg, t.vertical[p]);
            cell.rnn2d_step(alg, &hh, &xh, &hv, &xv)
        } else {
            let (h, x) = neighbor(alg, t.horizontal[p]);
            cell.step(alg, &h, &x)
        }
    }

    /// Full scan: `(log_amplitude, phase)` as algebra scalars.
    fn scan<A: Algebra>(&self, alg: &mut A, config: &[u8]) -> Result<(A::V, A::V)> {
        self.check_config(config)?;
        let cell = self.cell();
        let spins = self.traversal.to_path(config);
        let mut hidden: Vec<A::V> = Vec::with_capacity(spins.len());
        let mut logp = alg.zeros(1);
        let mut phase = alg.zeros(1);
        for (p, &s) in spins.iter().enumerate() {
            let h = self.hidden_at(&cell, alg, &hidden, &spins, p)?;
            let HeadOut { log_probs, phases } = cell.head(alg, &h)?;
            let lp = alg.index(&log_probs, s as usize)?;
            if !alg.scalar(&lp).is_finite() {
                return Err(AnsatzError::ZeroProbability(self.traversal.order[p]));
            }
            logp = alg.add(&logp, &lp)?;
            if let Some(ph) = phases {
                let v = alg.index(&ph, s as usize)?;
                phase = alg.add(&phase, &v)?;
            }
            hidden.push(h);
        }
        let log_amplitude = alg.affine(&logp, 0.5, 0.0)?;
        let phase = alg.affine(&phase, 1.0, self.marshall_phase(config))?;
        Ok((log_amplitude, phase))
    }

    pub fn log_psi(&self, config: &[u8]) -> Result<WavefunctionValue> {
        let mut e = Eval::new(&self.params);
        let (la, ph) = self.scan(&mut e, config)?;
        Ok(WavefunctionValue {
            log_amplitude: la[0],
            phase: ph[0],
        })
    }

    /// Conditional distributions `P(σ_p = · | σ_<p)` along the path, for
    /// inspection and tests.
    pub fn conditionals(&self, config: &[u8]) -> Result<Vec<[f64; SITE_DIM]>> {
        let cache = self.scan_cached(config)?;
        Ok(cache
            .log_probs
            .iter()
            .map(|lp| [lp[0].exp(), lp[1].exp()])
            .collect())
    }

    fn scan_cached(&self, config: &[u8]) -> Result<ScanCache> {
        self.check_config(config)?;
        let spins = self.traversal.to_path(config);
        self.resume(spins, None)
    }

    /// Scan `spins` (path order), reusing `base` up to the first position
    /// where the two disagree.
    fn resume(&self, spins: Vec<u8>, base: Option<&ScanCache>) -> Result<ScanCache> {
        let n = spins.len();
        let start = base.map_or(0, |b| {
            b.spins.iter().zip(&spins).position(|(a, b)| a != b).unwrap_or(n)
        });
        let mut cache = ScanCache {
            spins,
            hidden: Vec::with_capacity(n),
            log_probs: Vec::with_capacity(n),
            phases: Vec::with_capacity(n),
        };
        if let Some(b) = base {
            // The state at `start` depends only on earlier spins, so it is shared too.
            let keep = (start + 1).min(n);
            cache.hidden.extend_from_slice(&b.hidden[..keep]);
            cache.log_probs.extend_from_slice(&b.log_probs[..keep]);
            cache.phases.extend_from_slice(&b.phases[..keep]);
        }
        let cell = self.cell();
        let mut e = Eval::new(&self.params);
        for p in cache.hidden.len()..n {
            let h = self.hidden_at(&cell, &mut e, &cache.hidden, &cache.spins, p)?;
            let head = cell.head(&mut e, &h)?;
            cache.hidden.push(h);
            cache.log_probs.push(head.log_probs);
            cache.phases.push(head.phases.unwrap_or_default());
        }
        Ok(cache)
    }

    fn value_of(&self, cache: &ScanCache, config: &[u8]) -> Result<WavefunctionValue> {
        let mut logp = 0.0;
        let mut phase = 0.0;
        for (p, &s) in cache.spins.iter().enumerate() {
            let lp = cache.log_probs[p][s as usize];
            if !lp.is_finite() {
                return Err(AnsatzError::ZeroProbability(self.traversal.order[p]));
            }
            logp += lp;
            if let Some(v) = cache.phases[p].get(s as usize) {
                phase += v;
            }
        }
        Ok(WavefunctionValue {
            log_amplitude: 0.5 * logp,
            phase: phase + self.marshall_phase(config),
        })
    }

    /// `log Ψ` together with its parameter gradients
    /// `(∂ log_amplitude, ∂ phase)`.
    pub fn log_psi_gradients(&self, config: &[u8]) -> Result<(WavefunctionValue, Gradient, Gradient)> {
        let mut tape = Tape::with_params(&self.params);
        let (la, ph) = self.scan(&mut tape, config)?;
        let value = WavefunctionValue {
            log_amplitude: tape.get(la)[0],
            phase: tape.get(ph)[0],
        };
        let g_amp = tape.backward(la)?.param_gradient(&tape, &self.params);
        let g_phase = tape.backward(ph)?.param_gradient(&tape, &self.params);
        Ok((value, g_amp, g_phase))
    }

    /// `out += w_amp · ∂ log_amplitude + w_phase · ∂ phase` with one backward pass.
    pub fn accumulate_gradient(
        &self,
        config: &[u8],
        w_amp: f64,
        w_phase: f64,
        out: &mut Gradient,
    ) -> Result<WavefunctionValue> {
        let mut tape = Tape::with_params(&self.params);
        let (la, ph) = self.scan(&mut tape, config)?;
        let value = WavefunctionValue {
            log_amplitude: tape.get(la)[0],
            phase: tape.get(ph)[0],
        };
        let a = tape.affine(&la, w_amp, 0.0)?;
        let b = tape.affine(&ph, w_phase, 0.0)?;
        let root = tape.add(&a, &b)?;
        tape.backward(root)?.accumulate_into(&tape, out, 1.0);
        Ok(value)
    }

    /// Draw one configuration autoregressively.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Sample> {
        let n = self.num_sites();
        let cell = self.cell();
        let mut e = Eval::new(&self.params);
        let mut spins = Vec::with_capacity(n);
        let mut hidden: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut logp = 0.0;
        let mut phase = 0.0;
        for p in 0..n {
            let h = self.hidden_at(&cell, &mut e, &hidden, &spins, p)?;
            let head = cell.head(&mut e, &h)?;
            let s = if rng.gen::<f64>() < head.log_probs[1].exp() { 1 } else { 0 };
            let lp = head.log_probs[s];
            if !lp.is_finite() {
                return Err(AnsatzError::ZeroProbability(self.traversal.order[p]));
            }
            logp += lp;
            if let Some(ph) = head.phases {
                phase += ph[s];
            }
            spins.push(s as u8);
            hidden.push(h);
        }
        let mut config = vec![0u8; n];
        for (p, &site) in self.traversal.order.iter().enumerate() {
            config[site] = spins[p];
        }
        let phase = phase + self.marshall_phase(&config);
        Ok(Sample {
            config,
            value: WavefunctionValue {
                log_amplitude: 0.5 * logp,
                phase,
            },
        })
    }

    /// `n` independent draws from the generator stream `stream` of `seed`.
    pub fn sample_batch(&self, n: usize, seed: u64, stream: u64) -> Result<Vec<Sample>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        (0..n).map(|_| self.sample(&mut rng)).collect()
    }
}

impl Wavefunction for Ansatz {
    fn num_sites(&self) -> usize {
        self.config.num_sites()
    }

    fn log_psi(&self, config: &[u8]) -> Result<WavefunctionValue> {
        Ansatz::log_psi(self, config)
    }

    fn log_psi_near(&self, base: &[u8], configs: &[Vec<u8>]) -> Result<Vec<WavefunctionValue>> {
        let cache = self.scan_cached(base)?;
        configs
            .iter()
            .map(|c| {
                self.check_config(c)?;
                let resumed = self.resume(self.traversal.to_path(c), Some(&cache))?;
                self.value_of(&resumed, c)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::AnsatzConfig;
    use crate::autodiff::finite_diff_check;

    fn configs(n: usize) -> impl Iterator<Item = Vec<u8>> {
        (0..1usize << n).map(move |k| (0..n).map(|i| ((k >> i) & 1) as u8).collect())
    }

    fn lattice_for(kind: CellKind) -> Lattice {
        match kind {
            CellKind::ERnn2D => Lattice::Grid(2, 3),
            _ => Lattice::Chain(6),
        }
    }

    #[test]
    fn snake_traversal_neighbors() {
        let t = Traversal::new(Lattice::Grid(3, 3), CellKind::ERnn2D);
        assert_eq!(t.order(), &[0, 1, 2, 5, 4, 3, 6, 7, 8]);
        assert_eq!(t.horizontal()[3], None);
        assert_eq!(t.horizontal()[4], Some(3));
        // Site 4 (row 1, col 1) sits below site 1, visited at position 1.
        assert_eq!(t.vertical()[4], Some(1));
        assert_eq!(t.vertical()[6], Some(5));
        let chain = Traversal::new(Lattice::Grid(2, 2), CellKind::EGru);
        assert_eq!(chain.order(), &[0, 1, 2, 3]);
    }

    #[test]
    fn zero_network_is_uniform() {
        for kind in CellKind::ALL {
            let a = Ansatz::zeros(AnsatzConfig::new(kind, 3, lattice_for(kind)).complex(true)).unwrap();
            let v = a.log_psi(&[1, 0, 1, 1, 0, 0]).unwrap();
            assert!((v.log_amplitude - 3.0 * 0.5f64.ln()).abs() < 1e-14);
            assert_eq!(v.phase, 0.0);
        }
    }

    #[test]
    fn normalized_for_every_cell() {
        for kind in CellKind::ALL {
            let a = Ansatz::random(AnsatzConfig::new(kind, 4, lattice_for(kind)), 21, 1.0).unwrap();
            let total: f64 = configs(6).map(|c| a.log_psi(&c).unwrap().probability()).sum();
            assert!((total - 1.0).abs() < 1e-10, "{kind}: {total}");
        }
    }

    #[test]
    fn marshall_parity() {
        let a = Ansatz::zeros(AnsatzConfig::new(CellKind::EGru, 2, Lattice::Chain(4)).marshall(true)).unwrap();
        assert!((a.marshall_phase(&[1, 0, 1, 0]) - 2.0 * PI).abs() < 1e-15);
        assert!((a.marshall_phase(&[1, 1, 0, 1]) - PI).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_configs() {
        let a = Ansatz::zeros(AnsatzConfig::new(CellKind::ERnn, 2, Lattice::Chain(3))).unwrap();
        assert!(matches!(a.log_psi(&[0, 1]), Err(AnsatzError::Length { .. })));
        assert!(matches!(a.log_psi(&[0, 2, 1]), Err(AnsatzError::SiteValue(2))));
    }

    #[test]
    fn sampled_values_match_rescan() {
        for kind in CellKind::ALL {
            let a = Ansatz::random(AnsatzConfig::new(kind, 4, lattice_for(kind)).complex(true), 2, 0.8).unwrap();
            for s in a.sample_batch(50, 9, 3).unwrap() {
                let v = a.log_psi(&s.config).unwrap();
                assert!((v.log_amplitude - s.value.log_amplitude).abs() < 1e-12);
                assert!((v.phase - s.value.phase).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn near_evaluation_matches_full_scan() {
        for kind in CellKind::ALL {
            let a = Ansatz::random(AnsatzConfig::new(kind, 4, lattice_for(kind)).complex(true), 4, 0.9).unwrap();
            let base = vec![0, 1, 1, 0, 1, 0];
            let mut near = Vec::new();
            for i in 0..6 {
                let mut c = base.clone();
                c[i] ^= 1;
                near.push(c.clone());
                c[(i + 1) % 6] ^= 1;
                near.push(c);
            }
            near.push(base.clone());
            let fast = a.log_psi_near(&base, &near).unwrap();
            for (c, f) in near.iter().zip(&fast) {
                let v = a.log_psi(c).unwrap();
                assert!((v.log_amplitude - f.log_amplitude).abs() < 1e-13, "{kind}");
                assert!((v.phase - f.phase).abs() < 1e-13, "{kind}");
            }
        }
    }

    #[test]
    fn sample_batch_is_reproducible() {
        let a = Ansatz::random(AnsatzConfig::new(CellKind::HGru, 3, Lattice::Chain(5)), 1, 0.5).unwrap();
        assert_eq!(a.sample_batch(20, 5, 0).unwrap(), a.sample_batch(20, 5, 0).unwrap());
        assert_ne!(a.sample_batch(20, 5, 0).unwrap(), a.sample_batch(20, 5, 1).unwrap());
    }

    #[test]
    fn gradients_match_finite_differences() {
        for kind in CellKind::ALL {
            let lattice = match kind {
                CellKind::ERnn2D => Lattice::Grid(2, 2),
                _ => Lattice::Chain(4),
            };
            let cfg = AnsatzConfig::new(kind, 3, lattice).complex(true);
            let a = Ansatz::random(cfg.clone(), 17, 0.7).unwrap();
            let config = [1, 0, 1, 1];
            let (_, g_amp, g_phase) = a.log_psi_gradients(&config).unwrap();
            let theta = a.params().flatten();
            let eval = |th: &[f64], amp: bool| {
                let mut p = a.params().clone();
                p.assign_flat(th);
                let b = Ansatz::from_params(cfg.clone(), p).unwrap();
                let v = b.log_psi(&config).unwrap();
                if amp {
                    v.log_amplitude
                } else {
                    v.phase
                }
            };
            let r = finite_diff_check(|t| eval(t, true), &theta, &g_amp.flatten(), 1e-6);
            assert!(r.max_rel_error < 1e-6, "{kind} amplitude {r:?}");
            let r = finite_diff_check(|t| eval(t, false), &theta, &g_phase.flatten(), 1e-6);
            assert!(r.max_rel_error < 1e-6, "{kind} phase {r:?}");

            let mut acc = Gradient::zeros_like(a.params());
            a.accumulate_gradient(&config, 0.3, -1.2, &mut acc).unwrap();
            let mut expect = g_amp.clone();
            expect.scale(0.3);
            expect.add_scaled(&g_phase, -1.2);
            for (x, y) in acc.flatten().iter().zip(expect.flatten()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
