//! Engine outputs checked against independent oracles: dense linear algebra,
//! finite differences of the exact energy, and flat-space limits.

use hypvmc::ansatz::{Ansatz, AnsatzConfig, CellKind, Lattice};
use hypvmc::geometry::{projection_count, reset_projection_count};
use hypvmc::hamiltonian::HamiltonianSpec;
use hypvmc::oracle::{dense_hamiltonian, enumerate_probabilities, exact_energy, index_to_config};
use hypvmc::params::Gradient;
use hypvmc::vmc::gradient_estimate;
use nalgebra::DVector;
use num_complex::Complex64;

fn all_specs(n: usize) -> Vec<HamiltonianSpec> {
    vec![
        HamiltonianSpec::tfim1d(n, 1.0, 0.7),
        HamiltonianSpec::tfim2d(2, n / 2, 1.0, 3.0),
        HamiltonianSpec::j1j2(n, 1.0, 0.4),
        HamiltonianSpec::j1j2j3(n, 1.0, 0.2, 0.5),
    ]
}

/// `⟨Ψ|H|Ψ⟩/⟨Ψ|Ψ⟩` with the full matrix and the explicit complex vector.
fn dense_expectation(spec: &HamiltonianSpec, psi: &Ansatz) -> Complex64 {
    let h = dense_hamiltonian(spec).unwrap();
    let n = spec.num_sites();
    let amps: Vec<Complex64> = (0..1usize << n)
        .map(|k| {
            let v = psi.log_psi(&index_to_config(k, n)).unwrap();
            Complex64::from_polar(v.log_amplitude.exp(), v.phase)
        })
        .collect();
    let re = DVector::from_iterator(amps.len(), amps.iter().map(|a| a.re));
    let im = DVector::from_iterator(amps.len(), amps.iter().map(|a| a.im));
    // H is real symmetric, so ⟨Ψ|H|Ψ⟩ = reᵀHre + imᵀHim.
    let num = re.dot(&(&h * &re)) + im.dot(&(&h * &im));
    let den = re.dot(&re) + im.dot(&im);
    Complex64::new(num / den, 0.0)
}

#[test]
fn local_energy_average_matches_dense_expectation() {
    for spec in all_specs(6) {
        for (k, cell) in [CellKind::EGru, CellKind::HGru].into_iter().enumerate() {
            let cfg = AnsatzConfig::new(cell, 5, spec.lattice).complex(true).marshall(!spec.kind.is_ising());
            let psi = Ansatz::random(cfg, 3 + k as u64, 0.8).unwrap();
            let enumerated = exact_energy(&spec, &psi).unwrap();
            let dense = dense_expectation(&spec, &psi);
            assert!((enumerated - dense).norm() < 1e-9, "{spec} {cell}: {enumerated} vs {dense}");
        }
    }
}

#[test]
fn gradient_estimator_with_exact_weights_is_the_energy_derivative() {
    let spec = HamiltonianSpec::tfim1d(3, 1.0, 0.8);
    for cell in [CellKind::ERnn, CellKind::HGru] {
        let cfg = AnsatzConfig::new(cell, 3, Lattice::Chain(3)).complex(true);
        let psi = Ansatz::random(cfg.clone(), 21, 0.7).unwrap();
        let table = enumerate_probabilities(&psi).unwrap();
        let (mut elocs, mut amps, mut phases, mut weights) = (vec![], vec![], vec![], vec![]);
        for s in &table {
            let (_, ga, gp) = psi.log_psi_gradients(&s.config).unwrap();
            elocs.push(spec.local_energy(&s.config, &psi).unwrap());
            amps.push(ga);
            phases.push(gp);
            weights.push(s.probability);
        }
        let grad = gradient_estimate(&elocs, &amps, &phases, Some(&weights)).unwrap().flatten();

        let theta = psi.params().flatten();
        let energy = |th: &[f64]| {
            let mut p = psi.params().clone();
            p.assign_flat(th);
            exact_energy(&spec, &Ansatz::from_params(cfg.clone(), p).unwrap()).unwrap().re
        };
        let report = hypvmc::autodiff::finite_diff_check(energy, &theta, &grad, 1e-5);
        assert!(report.max_rel_error < 1e-6, "{cell}: {report:?}");
    }
}

#[test]
fn estimator_hand_example_and_shape_check() {
    let zero = Gradient { tensors: vec![vec![0.0; 2]] };
    let one = Gradient { tensors: vec![vec![1.0, -1.0]] };
    let e = [Complex64::new(-1.0, 0.0), Complex64::new(-3.0, 0.0)];
    let g = gradient_estimate(&e, &[one.clone(), zero.clone()], &[zero.clone(), zero.clone()], None).unwrap();
    // 2·mean[(E − Ē)·∂a] = 2·½·(−1 − (−2))·(1, −1) = (1, −1).
    assert_eq!(g.tensors[0], vec![1.0, -1.0]);
    assert!(gradient_estimate(&e, &[one], &[zero.clone(), zero], None).is_err());
}

#[test]
fn hyperbolic_gru_reduces_to_euclidean_gru_in_the_flat_limit() {
    let lattice = Lattice::Chain(6);
    let hyp = Ansatz::random(AnsatzConfig::new(CellKind::HGru, 4, lattice).complex(true).curvature(1e-8), 8, 0.5).unwrap();
    let euc_cfg = AnsatzConfig::new(CellKind::EGru, 4, lattice).complex(true);
    let mut euc = Ansatz::zeros(euc_cfg).unwrap();
    for t in hyp.params().tensors() {
        euc.params_mut().by_name_mut(&t.name).unwrap().data = t.data.clone();
    }
    let mut worst: f64 = 0.0;
    for k in 0..64 {
        let c = index_to_config(k, 6);
        let (a, b) = (hyp.log_psi(&c).unwrap(), euc.log_psi(&c).unwrap());
        worst = worst.max((a.log_amplitude - b.log_amplitude).abs()).max((a.phase - b.phase).abs());
    }
    assert!(worst < 1e-5, "flat-limit deviation {worst:e}");
}

#[test]
fn long_hyperbolic_scans_never_need_projection() {
    let psi = Ansatz::glorot(AnsatzConfig::new(CellKind::HGru, 16, Lattice::Chain(1000)), 4).unwrap();
    reset_projection_count();
    let samples = psi.sample_batch(10, 1, 0).unwrap();
    assert_eq!(samples.len() * 1000, 10_000);
    assert_eq!(projection_count(), 0, "hidden states hit the boundary margin");
}
