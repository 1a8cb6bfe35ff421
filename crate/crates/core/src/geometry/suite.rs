//! Randomized property suite for the gyrovector operations.

use super::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;

/// Outcome of one property over all trials.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub trials: usize,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl fmt::Display for PropertyCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<22} trials={} worst={:.3e} tol={:.1e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.trials,
            self.worst,
            self.tolerance
        )
    }
}

fn check(name: &'static str, trials: usize, worst: f64, tolerance: f64) -> PropertyCheck {
    PropertyCheck {
        name,
        trials,
        worst,
        tolerance,
        passed: worst.is_finite() && worst <= tolerance,
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn random_vec<R: Rng>(rng: &mut R, dim: usize, radius: f64) -> Vec<f64> {
    let dir: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let n = norm(&dir).max(SMALL_NORM);
    let r = radius * rng.gen::<f64>();
    dir.iter().map(|x| x * r / n).collect()
}

/// A point of the unit ball with norm up to `max_norm`.
fn random_point<R: Rng>(rng: &mut R, dim: usize, max_norm: f64) -> BallPoint {
    BallPoint::new(random_vec(rng, dim, max_norm), 1.0).expect("inside the unit ball")
}

/// Run every property `trials` times at curvature 1 (the flat-limit check
/// uses `c ∈ {1e-3, 1e-4}`).
pub fn run_suite(trials: usize, seed: u64) -> Vec<PropertyCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = move |rng: &mut ChaCha8Rng| rng.gen_range(1..=8usize);
    let mut out = Vec::new();

    let mut worst = 0.0f64;
    for _ in 0..trials {
        let d = dims(&mut rng);
        let x = random_point(&mut rng, d, 0.95);
        let y = random_point(&mut rng, d, 0.95);
        let zero = BallPoint::origin(d, 1.0);
        let left = mobius_add(&x.neg(), &x).expect("same space");
        let right = mobius_add(&x, &x.neg()).expect("same space");
        let ident = mobius_add(&zero, &y).expect("same space");
        worst = worst
            .max(left.norm())
            .max(right.norm())
            .max(dist(ident.coords(), y.coords()));
    }
    out.push(check("add_inverse_identity", trials, worst, 1e-10));

    // Base points stay within ‖x‖ ≤ 0.5 so that a unit step cannot reach the
    // boundary margin, where projection would make the map non-invertible.
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let d = dims(&mut rng);
        let x = random_point(&mut rng, d, 0.5);
        let v = TangentVector::new(random_vec(&mut rng, d, 1.0), x.clone()).expect("finite");
        let y = exp_map(&x, &v).expect("same dim");
        let back = log_map(&x, &y).expect("same space");
        worst = worst.max(dist(back.coords(), v.coords()));
    }
    out.push(check("exp_log_roundtrip", trials, worst, 1e-9));

    let mut worst = 0.0f64;
    for _ in 0..trials {
        let d = dims(&mut rng);
        let x = random_point(&mut rng, d, 0.95);
        let r = rng.gen_range(-3.0..3.0);
        let lhs = mobius_scalar_mul(r, &x);
        let t: Vec<f64> = log0(&x).coords().iter().map(|v| r * v).collect();
        worst = worst.max(dist(lhs.coords(), exp0(&t, 1.0).coords()));
    }
    out.push(check("scalar_mul_exp_log", trials, worst, 1e-10));

    let mut worst = 0.0f64;
    for _ in 0..trials {
        let d = dims(&mut rng);
        let x = random_point(&mut rng, d, 0.9);
        let b = random_point(&mut rng, d, 0.9);
        let lhs = mobius_add(&x, &b).expect("same space");
        let moved = parallel_transport0(&x, &log0(&b)).expect("same dim");
        let rhs = exp_map(&x, &moved).expect("same dim");
        worst = worst.max(dist(lhs.coords(), rhs.coords()));
    }
    out.push(check("transport_relation", trials, worst, 1e-9));

    // ‖(x ⊕_c y) − (x + y)‖ should shrink linearly in c: the log-log slope
    // between c = 1e-3 and 1e-4 must be 1, and the error bounded by K·c.
    let (mut slope_dev, mut k_max) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let d = dims(&mut rng);
        let x = random_vec(&mut rng, d, 1.0);
        let y = random_vec(&mut rng, d, 1.0);
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let err = |c: f64| {
            let p = |v: &[f64]| BallPoint::new(v.to_vec(), c).expect("inside for small c");
            dist(mobius_add(&p(&x), &p(&y)).expect("same space").coords(), &sum)
        };
        let (e3, e4) = (err(1e-3), err(1e-4));
        k_max = k_max.max(e3 / 1e-3).max(e4 / 1e-4);
        if e4 > 1e-13 {
            slope_dev = slope_dev.max(((e3 / e4).log10() - 1.0).abs());
        }
    }
    out.push(check("flat_limit_slope", trials, slope_dev, 0.05));
    out.push(check("flat_limit_constant", trials, k_max, 10.0));

    // Near-boundary fuzz: every output must satisfy c‖x‖² < 1.
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let d = dims(&mut rng);
        let edge = |rng: &mut ChaCha8Rng| {
            let v = random_vec(rng, d, 1.0);
            let n = norm(&v).max(SMALL_NORM);
            let r = 1.0 - 10f64.powf(rng.gen_range(-14.0..-1.0));
            project_with(v.iter().map(|a| a * r / n).collect(), 1.0, 0.0)
        };
        let x = BallPoint::new(edge(&mut rng), 1.0).expect("inside");
        let y = BallPoint::new(edge(&mut rng), 1.0).expect("inside");
        let v = TangentVector::new(random_vec(&mut rng, d, 50.0), x.clone()).expect("finite");
        let w: Vec<f64> = (0..d * d).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let outputs = [
            mobius_add(&x, &y).expect("same space"),
            mobius_scalar_mul(rng.gen_range(-10.0..10.0), &x),
            exp_map(&x, &v).expect("same dim"),
            mobius_matvec(&w, d, d, &x).expect("square"),
            mobius_pointwise(f64::tanh, &x),
            exp0(v.coords(), 1.0),
        ];
        for o in &outputs {
            let s = o.norm().powi(2);
            if !s.is_finite() || s >= 1.0 {
                worst = f64::INFINITY;
            } else {
                worst = worst.max(s - (1.0 - BOUNDARY_EPS).powi(2)).max(0.0);
            }
        }
    }
    out.push(check("ball_invariant_fuzz", trials, worst, 1e-12));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_and_is_reproducible() {
        let a = run_suite(200, 1);
        for c in &a {
            assert!(c.passed, "{c}");
        }
        assert_eq!(a, run_suite(200, 1));
    }
}
