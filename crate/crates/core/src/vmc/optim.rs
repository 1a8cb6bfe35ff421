//! Adam for Euclidean tensors, Riemannian SGD for ball-valued tensors, and
//! gradient clipping.

use crate::geometry::{self, BallPoint, TangentVector};
use crate::params::{Gradient, Manifold, ParameterStore};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Adam constants and the exponential schedule `lr(t) = lr · decay^(t / decay_steps)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub decay: f64,
    pub decay_steps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            decay: 0.95,
            decay_steps: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    m: Gradient,
    v: Gradient,
    t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParameterStore) -> Self {
        Adam {
            config,
            m: Gradient::zeros_like(params),
            v: Gradient::zeros_like(params),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Learning rate of the next step.
    pub fn learning_rate(&self) -> f64 {
        let c = &self.config;
        c.lr * c.decay.powf(self.t as f64 / c.decay_steps)
    }

    /// Update every Euclidean tensor of `params`; ball-valued tensors are skipped.
    pub fn step(&mut self, params: &mut ParameterStore, grad: &Gradient) {
        let lr = self.learning_rate();
        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        for (k, t) in params.tensors_mut().iter_mut().enumerate() {
            if t.manifold != Manifold::Euclidean {
                continue;
            }
            let (m, v, g) = (&mut self.m.tensors[k], &mut self.v.tensors[k], &grad.tensors[k]);
            for i in 0..t.data.len() {
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
                let mh = m[i] / bc1;
                let vh = v[i] / bc2;
                t.data[i] -= lr * mh / (vh.sqrt() + c.eps);
            }
        }
    }
}

/// `x ← proj(exp_x(−α · ((1 − c‖x‖²)²/4) · g))`.
pub fn rsgd_step(x: &[f64], grad: &[f64], alpha: f64, c: f64) -> Vec<f64> {
    let scale = (1.0 - c * geometry::sq_norm(x)).powi(2) / 4.0;
    let v: Vec<f64> = grad.iter().map(|g| -alpha * scale * g).collect();
    let step = BallPoint::new(x.to_vec(), c)
        .and_then(|p| TangentVector::new(v, p.clone()).map(|v| (p, v)))
        .and_then(|(p, v)| geometry::exp_map(&p, &v));
    match step {
        Ok(p) => geometry::project_with(p.into_coords(), c, geometry::BOUNDARY_EPS),
        // Non-finite or off-ball input: fall back to the projected Euclidean step.
        Err(_) => {
            let moved = x.iter().zip(grad).map(|(a, g)| a - alpha * scale * g).collect();
            geometry::project_with(moved, c, geometry::BOUNDARY_EPS)
        }
    }
}

/// Riemannian SGD on every ball-valued tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rsgd {
    pub lr: f64,
    pub curvature: f64,
}

impl Rsgd {
    pub fn step(&self, params: &mut ParameterStore, grad: &Gradient) {
        for (k, t) in params.tensors_mut().iter_mut().enumerate() {
            if t.manifold == Manifold::Hyperbolic {
                t.data = rsgd_step(&t.data, &grad.tensors[k], self.lr, self.curvature);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ClipMode {
    #[default]
    None,
    /// Clamp every component to `[−v, v]`.
    Value(f64),
    /// Rescale when the global L2 norm exceeds the bound.
    Norm(f64),
}

impl fmt::Display for ClipMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClipMode::None => f.write_str("none"),
            ClipMode::Value(v) => write!(f, "value:{v}"),
            ClipMode::Norm(m) => write!(f, "norm:{m}"),
        }
    }
}

impl FromStr for ClipMode {
    type Err = String;

    /// `none`, `value:<v>` or `norm:<m>`.
    fn from_str(s: &str) -> Result<Self, String> {
        let bound = |v: &str| {
            v.parse::<f64>()
                .ok()
                .filter(|b| *b > 0.0 && b.is_finite())
                .ok_or_else(|| format!("clip bound must be a positive number, got `{v}`"))
        };
        match s.split_once(':') {
            None if s == "none" => Ok(ClipMode::None),
            Some(("value", v)) => Ok(ClipMode::Value(bound(v)?)),
            Some(("norm", v)) => Ok(ClipMode::Norm(bound(v)?)),
            _ => Err(format!("unknown clip mode `{s}`")),
        }
    }
}

pub fn clip_gradients(grad: &mut Gradient, mode: ClipMode) {
    match mode {
        ClipMode::None => {}
        ClipMode::Value(v) => {
            for g in grad.tensors.iter_mut().flat_map(|t| t.iter_mut()) {
                *g = g.clamp(-v, v);
            }
        }
        ClipMode::Norm(m) => {
            let n = grad.global_norm();
            if n > m {
                grad.scale(m / n);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Tensor;

    fn store(values: &[f64], manifold: Manifold) -> ParameterStore {
        let mut s = ParameterStore::new();
        let mut t = Tensor::zeros("x", values.len(), 1, manifold);
        t.data = values.to_vec();
        s.push(t);
        s
    }

    fn grad(values: &[f64]) -> Gradient {
        Gradient {
            tensors: vec![values.to_vec()],
        }
    }

    #[test]
    fn adam_zero_gradient_is_noop_and_first_step_is_sign_like() {
        let mut p = store(&[0.5, -1.0], Manifold::Euclidean);
        let mut adam = Adam::new(AdamConfig::default(), &p);
        adam.step(&mut p, &grad(&[0.0, 0.0]));
        assert_eq!(p.flatten(), vec![0.5, -1.0]);

        let mut p = store(&[0.5, -1.0], Manifold::Euclidean);
        let mut adam = Adam::new(AdamConfig::default(), &p);
        let g = [2.0, -0.25];
        adam.step(&mut p, &grad(&g));
        for (i, (x, x0)) in p.flatten().iter().zip([0.5, -1.0]).enumerate() {
            let expect = x0 - 1e-3 * g[i] / (g[i].abs() + 1e-8);
            assert!((x - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn adam_schedule() {
        let p = store(&[0.0], Manifold::Euclidean);
        let mut adam = Adam::new(AdamConfig::default(), &p);
        adam.t = 100;
        assert!((adam.learning_rate() - 1e-3 * 0.95).abs() < 1e-18);
    }

    #[test]
    fn adam_skips_ball_tensors() {
        let mut p = store(&[0.1, 0.2], Manifold::Hyperbolic);
        let mut adam = Adam::new(AdamConfig::default(), &p);
        adam.step(&mut p, &grad(&[1.0, 1.0]));
        assert_eq!(p.flatten(), vec![0.1, 0.2]);
    }

    #[test]
    fn rsgd_cases() {
        assert_eq!(rsgd_step(&[0.2, -0.1], &[0.0, 0.0], 1e-2, 1.0), vec![0.2, -0.1]);
        let g = [3.0, -1.0];
        let at_origin = rsgd_step(&[0.0, 0.0], &g, 0.5, 1.0);
        let v: Vec<f64> = g.iter().map(|x| -0.5 * x / 4.0).collect();
        let expect = geometry::exp0(&v, 1.0);
        for (a, b) in at_origin.iter().zip(expect.coords()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rsgd_flat_limit_is_sgd_with_quarter_rate() {
        let x = [0.3, -0.4, 0.1];
        let g = [0.7, 0.2, -1.1];
        let alpha = 1e-2;
        let out = rsgd_step(&x, &g, alpha, 1e-8);
        for i in 0..3 {
            assert!((out[i] - (x[i] - alpha / 4.0 * g[i])).abs() < 1e-6);
        }
    }

    #[test]
    fn rsgd_stays_in_ball() {
        let out = rsgd_step(&[0.99, 0.0], &[-1e6, 0.0], 1.0, 1.0);
        assert!(geometry::norm(&out) < 1.0);
    }

    #[test]
    fn clipping() {
        let mut g = grad(&[3.0, -4.0]);
        clip_gradients(&mut g, ClipMode::None);
        assert_eq!(g.tensors[0], vec![3.0, -4.0]);
        clip_gradients(&mut g, ClipMode::Norm(1.0));
        assert!((g.tensors[0][0] - 0.6).abs() < 1e-15 && (g.tensors[0][1] + 0.8).abs() < 1e-15);
        let mut g = grad(&[3.0, -4.0]);
        clip_gradients(&mut g, ClipMode::Value(2.0));
        assert_eq!(g.tensors[0], vec![2.0, -2.0]);
    }

    #[test]
    fn clip_mode_parsing() {
        assert_eq!("none".parse::<ClipMode>().unwrap(), ClipMode::None);
        assert_eq!("norm:1".parse::<ClipMode>().unwrap(), ClipMode::Norm(1.0));
        assert_eq!("value:0.5".parse::<ClipMode>().unwrap(), ClipMode::Value(0.5));
        assert!("norm:-1".parse::<ClipMode>().is_err());
        assert!("global".parse::<ClipMode>().is_err());
        assert_eq!(ClipMode::Norm(1.0).to_string().parse::<ClipMode>().unwrap(), ClipMode::Norm(1.0));
    }
}
