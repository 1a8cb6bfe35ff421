//! Differentiable Poincaré-ball operations over any [`Algebra`].
//!
//! Branches on small norms are taken on values; each branch is itself a
//! smooth expression, so derivatives are exact away from the switch points.
//! Ball projection is straight-through in the backward pass.

use super::{note_projection, ATANH_LIMIT, BOUNDARY_EPS, SMALL_NORM};
use crate::autodiff::{Algebra, Result};

/// Curvature and boundary margin shared by every op of one ansatz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    pub c: f64,
    pub eps: f64,
}

impl Ball {
    pub fn new(c: f64) -> Self {
        Ball {
            c,
            eps: BOUNDARY_EPS,
        }
    }

    fn flat(&self) -> bool {
        self.c == 0.0
    }

    pub fn project<A: Algebra>(&self, alg: &mut A, x: A::V) -> Result<A::V> {
        if self.flat() {
            return Ok(x);
        }
        let values = alg.value(&x);
        let n = super::norm(values);
        let limit = super::max_norm(self.c, self.eps);
        if n >= limit {
            note_projection();
            let s = limit / n;
            let replacement = values.iter().map(|v| v * s).collect();
            alg.straight_through(&x, replacement)
        } else {
            Ok(x)
        }
    }

    /// `scale · v` where `scale` is a length-one node.
    fn scaled<A: Algebra>(alg: &mut A, s: &A::V, v: &A::V) -> Result<A::V> {
        alg.scale(s, v)
    }

    pub fn exp0<A: Algebra>(&self, alg: &mut A, v: &A::V) -> Result<A::V> {
        let n = alg.norm(v)?;
        if self.flat() || alg.scalar(&n) < SMALL_NORM {
            return Ok(v.clone());
        }
        let sn = alg.affine(&n, self.c.sqrt(), 0.0)?;
        let t = alg.tanh(&sn)?;
        let f = alg.div(&t, &sn)?;
        let out = Self::scaled(alg, &f, v)?;
        self.project(alg, out)
    }

    pub fn log0<A: Algebra>(&self, alg: &mut A, y: &A::V) -> Result<A::V> {
        let n = alg.norm(y)?;
        if self.flat() || alg.scalar(&n) < SMALL_NORM {
            return Ok(y.clone());
        }
        let sn = alg.affine(&n, self.c.sqrt(), 0.0)?;
        let cl = alg.clamp(&sn, -ATANH_LIMIT, ATANH_LIMIT)?;
        let at = alg.atanh(&cl)?;
        let f = alg.div(&at, &sn)?;
        Self::scaled(alg, &f, y)
    }

    pub fn mobius_add<A: Algebra>(&self, alg: &mut A, x: &A::V, y: &A::V) -> Result<A::V> {
        if self.flat() {
            return alg.add(x, y);
        }
        let c = self.c;
        let xy = alg.dot(x, y)?;
        let x2 = alg.dot(x, x)?;
        let y2 = alg.dot(y, y)?;
        let base = alg.affine(&xy, 2.0 * c, 1.0)?;
        let cy2 = alg.affine(&y2, c, 0.0)?;
        let coef_x = alg.add(&base, &cy2)?;
        let coef_y = alg.affine(&x2, -c, 1.0)?;
        let x2y2 = alg.mul(&x2, &y2)?;
        let tail = alg.affine(&x2y2, c * c, 0.0)?;
        let den = alg.add(&base, &tail)?;
        let one = alg.constant(vec![1.0]);
        let inv = alg.div(&one, &den)?;
        let ax = Self::scaled(alg, &coef_x, x)?;
        let by = Self::scaled(alg, &coef_y, y)?;
        let num = alg.add(&ax, &by)?;
        let out = Self::scaled(alg, &inv, &num)?;
        self.project(alg, out)
    }

    /// `M ⊗_c x` given `x` and the Euclidean image `mx = M x`.
    pub fn mobius_apply<A: Algebra>(&self, alg: &mut A, x: &A::V, mx: &A::V) -> Result<A::V> {
        if self.flat() {
            return Ok(mx.clone());
        }
        let sc = self.c.sqrt();
        let xn = alg.norm(x)?;
        if alg.scalar(&xn) < SMALL_NORM {
            return self.project(alg, mx.clone());
        }
        let mxn = alg.norm(mx)?;
        let sxn = alg.affine(&xn, sc, 0.0)?;
        let cl = alg.clamp(&sxn, -ATANH_LIMIT, ATANH_LIMIT)?;
        let at = alg.atanh(&cl)?;
        let out = if alg.scalar(&mxn) < SMALL_NORM {
            let f = alg.div(&at, &sxn)?;
            Self::scaled(alg, &f, mx)?
        } else {
            let ratio = alg.div(&mxn, &xn)?;
            let arg = alg.mul(&ratio, &at)?;
            let t = alg.tanh(&arg)?;
            let smxn = alg.affine(&mxn, sc, 0.0)?;
            let f = alg.div(&t, &smxn)?;
            Self::scaled(alg, &f, mx)?
        };
        self.project(alg, out)
    }

    /// Möbius version of `tanh`: `exp_0(tanh(log_0 x))`.
    pub fn mobius_tanh<A: Algebra>(&self, alg: &mut A, x: &A::V) -> Result<A::V> {
        let l = self.log0(alg, x)?;
        let t = alg.tanh(&l)?;
        self.exp0(alg, &t)
    }
}
