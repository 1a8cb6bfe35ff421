//! One recurrent step per cell family, plus the output heads.

use super::{AnsatzConfig, AnsatzError, CellKind, Result, SITE_DIM};
use crate::autodiff::Algebra;
use crate::geometry::{self, graph::Ball};
use crate::params::{ParamId, ParameterStore};
use std::f64::consts::PI;

/// Store positions of every named tensor an ansatz may use.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamIds {
    pub w_r: Option<ParamId>,
    pub w_z: Option<ParamId>,
    pub w_h: Option<ParamId>,
    pub u_r: Option<ParamId>,
    pub u_z: Option<ParamId>,
    pub u_h: Option<ParamId>,
    pub b_r: Option<ParamId>,
    pub b_z: Option<ParamId>,
    pub b_h: Option<ParamId>,
    pub w_v: Option<ParamId>,
    pub u_v: Option<ParamId>,
    pub b: Option<ParamId>,
    pub u1: Option<ParamId>,
    pub c1: Option<ParamId>,
    pub u2: Option<ParamId>,
    pub c2: Option<ParamId>,
}

impl ParamIds {
    pub fn resolve(_config: &AnsatzConfig, params: &ParameterStore) -> Self {
        ParamIds {
            w_r: params.id("W_r"),
            w_z: params.id("W_z"),
            w_h: params.id("W_h"),
            u_r: params.id("U_r"),
            u_z: params.id("U_z"),
            u_h: params.id("U_h"),
            b_r: params.id("b_r"),
            b_z: params.id("b_z"),
            b_h: params.id("b_h"),
            w_v: params.id("W_v"),
            u_v: params.id("U_v"),
            b: params.id("b"),
            u1: params.id("U1"),
            c1: params.id("c1"),
            u2: params.id("U2"),
            c2: params.id("c2"),
        }
    }
}

fn need(id: Option<ParamId>, name: &str) -> Result<ParamId> {
    id.ok_or_else(|| AnsatzError::Config(format!("missing tensor `{name}`")))
}

/// Euclidean one-hot of a site value; `None` is the zero start input.
pub(crate) fn one_hot(spin: Option<u8>) -> Vec<f64> {
    let mut v = vec![0.0; SITE_DIM];
    if let Some(s) = spin {
        v[s as usize] = 1.0;
    }
    v
}

/// Cell evaluator bound to one ansatz.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Cell<'a> {
    pub kind: CellKind,
    pub hidden: usize,
    pub complex: bool,
    pub ball: Ball,
    pub ids: &'a ParamIds,
}

/// Per-site head outputs: log-probabilities and, if complex, phases.
pub(crate) struct HeadOut<V> {
    pub log_probs: V,
    pub phases: Option<V>,
}

impl<'a> Cell<'a> {
    pub fn new(config: &AnsatzConfig, ids: &'a ParamIds) -> Self {
        let c = if config.cell == CellKind::HGru {
            config.curvature
        } else {
            0.0
        };
        Cell {
            kind: config.cell,
            hidden: config.hidden,
            complex: config.complex,
            ball: Ball::new(c),
            ids,
        }
    }

    /// Input vector for a neighbor spin, lifted onto the ball for the hGRU.
    pub fn input<A: Algebra>(&self, alg: &mut A, spin: Option<u8>) -> A::V {
        let x = one_hot(spin);
        if self.kind == CellKind::HGru && spin.is_some() {
            alg.constant(geometry::exp0(&x, self.ball.c).into_coords())
        } else {
            alg.constant(x)
        }
    }

    /// `W x + U y + b` style sum of stored-matrix products.
    fn linear<A: Algebra>(
        alg: &mut A,
        terms: &[(Option<ParamId>, &str, &A::V)],
        bias: (Option<ParamId>, &str),
    ) -> Result<A::V> {
        let mut acc = alg.param(need(bias.0, bias.1)?)?;
        for (id, name, x) in terms {
            let y = alg.matvec(need(*id, name)?, x)?;
            acc = alg.add(&acc, &y)?;
        }
        Ok(acc)
    }

    pub fn rnn_step<A: Algebra>(&self, alg: &mut A, h: &A::V, x: &A::V) -> Result<A::V> {
        let ids = self.ids;
        let pre = Self::linear(alg, &[(ids.w_h, "W_h", h), (ids.u_h, "U_h", x)], (ids.b_h, "b_h"))?;
        Ok(alg.tanh(&pre)?)
    }

    pub fn gru_step<A: Algebra>(&self, alg: &mut A, h: &A::V, x: &A::V) -> Result<A::V> {
        let ids = self.ids;
        let r = Self::linear(alg, &[(ids.w_r, "W_r", h), (ids.u_r, "U_r", x)], (ids.b_r, "b_r"))?;
        let r = alg.sigmoid(&r)?;
        let z = Self::linear(alg, &[(ids.w_z, "W_z", h), (ids.u_z, "U_z", x)], (ids.b_z, "b_z"))?;
        let z = alg.sigmoid(&z)?;
        let rh = alg.mul(&r, h)?;
        let cand = Self::linear(alg, &[(ids.w_h, "W_h", &rh), (ids.u_h, "U_h", x)], (ids.b_h, "b_h"))?;
        let cand = alg.tanh(&cand)?;
        // (1 - z) h + z h̃ = h + z (h̃ - h)
        let diff = alg.sub(&cand, h)?;
        let upd = alg.mul(&z, &diff)?;
        Ok(alg.add(h, &upd)?)
    }

    /// `(W ⊗ h ⊕ U ⊗ x) ⊕ b`, with `wh` the Euclidean image of the recurrent term.
    fn mobius_affine<A: Algebra>(
        &self,
        alg: &mut A,
        h: &A::V,
        wh: &A::V,
        u: (Option<ParamId>, &str),
        x: &A::V,
        bias: (Option<ParamId>, &str),
    ) -> Result<A::V> {
        let ball = self.ball;
        let a = ball.mobius_apply(alg, h, wh)?;
        let ux = alg.matvec(need(u.0, u.1)?, x)?;
        let b = ball.mobius_apply(alg, x, &ux)?;
        let s = ball.mobius_add(alg, &a, &b)?;
        let bias = alg.param(need(bias.0, bias.1)?)?;
        Ok(ball.mobius_add(alg, &s, &bias)?)
    }

    pub fn hgru_step<A: Algebra>(&self, alg: &mut A, h: &A::V, x: &A::V) -> Result<A::V> {
        let ids = self.ids;
        let ball = self.ball;
        let gate = |alg: &mut A, w: Option<ParamId>, wn, u, un, b, bn| -> Result<A::V> {
            let wh = alg.matvec(need(w, wn)?, h)?;
            let p = self.mobius_affine(alg, h, &wh, (u, un), x, (b, bn))?;
            let t = ball.log0(alg, &p)?;
            Ok(alg.sigmoid(&t)?)
        };
        let r = gate(alg, ids.w_r, "W_r", ids.u_r, "U_r", ids.b_r, "b_r")?;
        let z = gate(alg, ids.w_z, "W_z", ids.u_z, "U_z", ids.b_z, "b_z")?;
        // (W diag r) ⊗ h has Euclidean image W (r ⊙ h).
        let rh = alg.mul(&r, h)?;
        let wrh = alg.matvec(need(ids.w_h, "W_h")?, &rh)?;
        let p = self.mobius_affine(alg, h, &wrh, (ids.u_h, "U_h"), x, (ids.b_h, "b_h"))?;
        let cand = ball.mobius_tanh(alg, &p)?;
        let neg_h = alg.neg(h)?;
        let d = ball.mobius_add(alg, &neg_h, &cand)?;
        let zd = alg.mul(&z, &d)?;
        let upd = ball.mobius_apply(alg, &d, &zd)?;
        Ok(ball.mobius_add(alg, h, &upd)?)
    }

    pub fn rnn2d_step<A: Algebra>(
        &self,
        alg: &mut A,
        h_h: &A::V,
        x_h: &A::V,
        h_v: &A::V,
        x_v: &A::V,
    ) -> Result<A::V> {
        let ids = self.ids;
        let pre = Self::linear(
            alg,
            &[
                (ids.u_h, "U_h", x_h),
                (ids.w_h, "W_h", h_h),
                (ids.u_v, "U_v", x_v),
                (ids.w_v, "W_v", h_v),
            ],
            (ids.b, "b"),
        )?;
        Ok(alg.tanh(&pre)?)
    }

    /// One step of a chain cell.
    pub fn step<A: Algebra>(&self, alg: &mut A, h: &A::V, x: &A::V) -> Result<A::V> {
        match self.kind {
            CellKind::ERnn => self.rnn_step(alg, h, x),
            CellKind::EGru => self.gru_step(alg, h, x),
            CellKind::HGru => self.hgru_step(alg, h, x),
            CellKind::ERnn2D => Err(AnsatzError::Config(
                "the 2D RNN needs two neighbor states".into(),
            )),
        }
    }

    /// Softmax log-probabilities and optional π·Softsign phases.
    pub fn head<A: Algebra>(&self, alg: &mut A, h: &A::V) -> Result<HeadOut<A::V>> {
        let ids = self.ids;
        let f = if self.kind == CellKind::HGru {
            self.ball.log0(alg, h)?
        } else {
            h.clone()
        };
        let logits = Self::linear(alg, &[(ids.u1, "U1", &f)], (ids.c1, "c1"))?;
        let log_probs = alg.log_softmax(&logits)?;
        let phases = if self.complex {
            let a = Self::linear(alg, &[(ids.u2, "U2", &f)], (ids.c2, "c2"))?;
            let s = alg.softsign(&a)?;
            Some(alg.affine(&s, PI, 0.0)?)
        } else {
            None
        };
        Ok(HeadOut { log_probs, phases })
    }
}
