//! Poincaré-ball gyrovector operations.
//!
//! The ball of curvature parameter `c > 0` is `{x : c‖x‖² < 1}`; `c = 0`
//! degenerates to flat space and every operation reduces to its Euclidean
//! counterpart. Outputs are kept a margin [`BOUNDARY_EPS`] away from the
//! boundary so that `atanh` and the conformal factor stay finite.
//!
//! This module works on plain `f64` slices. [`graph`] contains the same
//! formulas written against [`Algebra`](crate::autodiff::Algebra) so they can
//! be differentiated inside the hyperbolic GRU.

pub mod graph;
pub mod suite;

use std::cell::Cell;
use thiserror::Error;

/// Default distance kept from the ball boundary, in units of `1/√c`.
pub const BOUNDARY_EPS: f64 = 1e-5;
/// Below this norm the closed forms switch to their first-order expansions.
pub const SMALL_NORM: f64 = 1e-12;
/// `atanh` arguments are clamped to `[-ATANH_LIMIT, ATANH_LIMIT]`.
pub const ATANH_LIMIT: f64 = 1.0 - 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("curvature mismatch: {0} vs {1}")]
    CurvatureMismatch(f64, f64),
    #[error("invalid curvature {0}; expected c >= 0")]
    InvalidCurvature(f64),
    #[error("non-finite coordinate at index {0}")]
    NonFinite(usize),
    #[error("point outside the ball: c·‖x‖² = {0}")]
    OutsideBall(f64),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

thread_local! {
    static PROJECTIONS: Cell<u64> = const { Cell::new(0) };
}

/// Number of times a ball projection actually rescaled a point on this thread.
pub fn projection_count() -> u64 {
    PROJECTIONS.with(Cell::get)
}

pub fn reset_projection_count() {
    PROJECTIONS.with(|p| p.set(0));
}

pub(crate) fn note_projection() {
    PROJECTIONS.with(|p| p.set(p.get() + 1));
}

/// A point strictly inside the Poincaré ball of curvature `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallPoint {
    coords: Vec<f64>,
    c: f64,
}

/// A tangent vector attached to a base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub coords: Vec<f64>,
    pub base: BallPoint,
}

impl BallPoint {
    /// Validate that `coords` lies strictly inside the ball.
    pub fn new(coords: Vec<f64>, c: f64) -> Result<Self> {
        check_curvature(c)?;
        check_finite(&coords)?;
        let r = c * sq_norm(&coords);
        if r >= 1.0 {
            return Err(GeometryError::OutsideBall(r));
        }
        Ok(BallPoint { coords, c })
    }

    pub fn origin(dim: usize, c: f64) -> Self {
        BallPoint {
            coords: vec![0.0; dim],
            c,
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn curvature(&self) -> f64 {
        self.c
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.coords)
    }

    /// Conformal factor `λ_x = 2 / (1 - c‖x‖²)`.
    pub fn conformal_factor(&self) -> f64 {
        conformal_factor(&self.coords, self.c)
    }

    pub fn neg(&self) -> BallPoint {
        BallPoint {
            coords: self.coords.iter().map(|v| -v).collect(),
            c: self.c,
        }
    }

    fn same_space(&self, other: &BallPoint) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(GeometryError::DimensionMismatch(self.dim(), other.dim()));
        }
        if self.c != other.c {
            return Err(GeometryError::CurvatureMismatch(self.c, other.c));
        }
        Ok(())
    }
}

impl TangentVector {
    pub fn new(coords: Vec<f64>, base: BallPoint) -> Result<Self> {
        if coords.len() != base.dim() {
            return Err(GeometryError::DimensionMismatch(coords.len(), base.dim()));
        }
        check_finite(&coords)?;
        Ok(TangentVector { coords, base })
    }

    /// A tangent vector at the origin of the ball of curvature `c`.
    pub fn at_origin(coords: Vec<f64>, c: f64) -> Self {
        let base = BallPoint::origin(coords.len(), c);
        TangentVector { coords, base }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn base(&self) -> &BallPoint {
        &self.base
    }
}

fn check_curvature(c: f64) -> Result<()> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(GeometryError::InvalidCurvature(c));
    }
    Ok(())
}

fn check_finite(x: &[f64]) -> Result<()> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(GeometryError::NonFinite(i)),
        None => Ok(()),
    }
}

pub(crate) fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    sq_norm(x).sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn scaled(x: &[f64], s: f64) -> Vec<f64> {
    x.iter().map(|v| s * v).collect()
}

pub(crate) fn clamped_atanh(x: f64) -> f64 {
    x.clamp(-ATANH_LIMIT, ATANH_LIMIT).atanh()
}

pub fn conformal_factor(x: &[f64], c: f64) -> f64 {
    2.0 / (1.0 - c * sq_norm(x))
}

/// Largest admissible norm for curvature `c` and margin `eps`.
pub fn max_norm(c: f64, eps: f64) -> f64 {
    (1.0 - eps) / c.sqrt()
}

/// Rescale `x` onto the shell of radius `(1 - eps)/√c` if it reaches past it.
pub fn project_with(x: Vec<f64>, c: f64, eps: f64) -> Vec<f64> {
    if c <= 0.0 {
        return x;
    }
    let n = norm(&x);
    let limit = max_norm(c, eps);
    if n >= limit {
        note_projection();
        let s = limit / n;
        x.into_iter().map(|v| v * s).collect()
    } else {
        x
    }
}

/// Map any finite vector into the ball, rescaling it if it lies too close to
/// or beyond the boundary.
pub fn project_to_ball(x: Vec<f64>, c: f64) -> Result<BallPoint> {
    project_to_ball_with(x, c, BOUNDARY_EPS)
}

pub fn project_to_ball_with(x: Vec<f64>, c: f64, eps: f64) -> Result<BallPoint> {
    check_curvature(c)?;
    check_finite(&x)?;
    Ok(BallPoint {
        coords: project_with(x, c, eps),
        c,
    })
}

fn raw_mobius_add(x: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let xy = dot(x, y);
    let x2 = sq_norm(x);
    let y2 = sq_norm(y);
    let a = 1.0 + 2.0 * c * xy + c * y2;
    let b = 1.0 - c * x2;
    // `den ≥ (1 − c‖x‖‖y‖)²` vanishes only for antipodal points on the
    // boundary, where the numerator vanishes too; floor it to stay finite.
    let den = (1.0 + 2.0 * c * xy + c * c * x2 * y2).max(f64::MIN_POSITIVE);
    x.iter()
        .zip(y)
        .map(|(xi, yi)| (a * xi + b * yi) / den)
        .collect()
}

/// Möbius addition `x ⊕_c y`.
pub fn mobius_add(x: &BallPoint, y: &BallPoint) -> Result<BallPoint> {
    x.same_space(y)?;
    let c = x.c;
    Ok(BallPoint {
        coords: project_with(raw_mobius_add(&x.coords, &y.coords, c), c, BOUNDARY_EPS),
        c,
    })
}

/// Möbius scalar multiplication `r ⊗_c x`.
pub fn mobius_scalar_mul(r: f64, x: &BallPoint) -> BallPoint {
    let c = x.c;
    let n = x.norm();
    let coords = if c == 0.0 || n < SMALL_NORM {
        scaled(&x.coords, r)
    } else {
        let sc = c.sqrt();
        let s = (r * clamped_atanh(sc * n)).tanh() / (sc * n);
        scaled(&x.coords, s)
    };
    BallPoint {
        coords: project_with(coords, c, BOUNDARY_EPS),
        c,
    }
}

fn raw_exp0(v: &[f64], c: f64) -> Vec<f64> {
    let n = norm(v);
    if c == 0.0 || n < SMALL_NORM {
        return v.to_vec();
    }
    let sc = c.sqrt();
    scaled(v, (sc * n).tanh() / (sc * n))
}

fn raw_log0(y: &[f64], c: f64) -> Vec<f64> {
    let n = norm(y);
    if c == 0.0 || n < SMALL_NORM {
        return y.to_vec();
    }
    let sc = c.sqrt();
    scaled(y, clamped_atanh(sc * n) / (sc * n))
}

/// `exp^c_0(v)`: tangent space at the origin to the ball.
pub fn exp0(v: &[f64], c: f64) -> BallPoint {
    BallPoint {
        coords: project_with(raw_exp0(v, c), c, BOUNDARY_EPS),
        c,
    }
}

/// `log^c_0(y)`: ball to the tangent space at the origin.
pub fn log0(y: &BallPoint) -> TangentVector {
    TangentVector::at_origin(raw_log0(&y.coords, y.c), y.c)
}

/// Exponential map `exp^c_x(v)`.
pub fn exp_map(x: &BallPoint, v: &TangentVector) -> Result<BallPoint> {
    if v.coords.len() != x.dim() {
        return Err(GeometryError::DimensionMismatch(v.coords.len(), x.dim()));
    }
    let c = x.c;
    if c == 0.0 {
        let coords = x.coords.iter().zip(&v.coords).map(|(a, b)| a + b).collect();
        return Ok(BallPoint { coords, c });
    }
    let lambda = x.conformal_factor();
    let n = norm(&v.coords);
    let step = if n < SMALL_NORM {
        scaled(&v.coords, lambda / 2.0)
    } else {
        let sc = c.sqrt();
        scaled(&v.coords, (sc * lambda * n / 2.0).tanh() / (sc * n))
    };
    let step = project_with(step, c, BOUNDARY_EPS);
    Ok(BallPoint {
        coords: project_with(raw_mobius_add(&x.coords, &step, c), c, BOUNDARY_EPS),
        c,
    })
}

/// Logarithmic map `log^c_x(y)`.
pub fn log_map(x: &BallPoint, y: &BallPoint) -> Result<TangentVector> {
    x.same_space(y)?;
    let c = x.c;
    if c == 0.0 {
        let coords = y.coords.iter().zip(&x.coords).map(|(a, b)| a - b).collect();
        return TangentVector::new(coords, x.clone());
    }
    let u = raw_mobius_add(&x.neg().coords, &y.coords, c);
    let lambda = x.conformal_factor();
    let n = norm(&u);
    let coords = if n < SMALL_NORM {
        scaled(&u, 2.0 / lambda)
    } else {
        let sc = c.sqrt();
        scaled(&u, 2.0 / (sc * lambda) * clamped_atanh(sc * n) / n)
    };
    TangentVector::new(coords, x.clone())
}

/// Parallel transport of a tangent vector at the origin to `T_x`, defined as
/// `log_x(x ⊕ exp_0(v))`.
pub fn parallel_transport0(x: &BallPoint, v: &TangentVector) -> Result<TangentVector> {
    if v.coords.len() != x.dim() {
        return Err(GeometryError::DimensionMismatch(v.coords.len(), x.dim()));
    }
    let moved = mobius_add(x, &exp0(&v.coords, x.c))?;
    log_map(x, &moved)
}

/// Möbius matrix-vector product `W ⊗_c x` for a row-major `rows × cols` matrix.
pub fn mobius_matvec(w: &[f64], rows: usize, cols: usize, x: &BallPoint) -> Result<BallPoint> {
    if cols != x.dim() || w.len() != rows * cols {
        return Err(GeometryError::DimensionMismatch(cols, x.dim()));
    }
    let mx: Vec<f64> = w
        .chunks_exact(cols)
        .map(|row| dot(row, &x.coords))
        .collect();
    Ok(BallPoint {
        coords: project_with(raw_mobius_apply(&x.coords, mx, x.c), x.c, BOUNDARY_EPS),
        c: x.c,
    })
}

/// `M ⊗_c x` given `x` and the Euclidean image `mx = M x`.
fn raw_mobius_apply(x: &[f64], mx: Vec<f64>, c: f64) -> Vec<f64> {
    let xn = norm(x);
    let mxn = norm(&mx);
    if c == 0.0 || xn < SMALL_NORM {
        return mx;
    }
    let sc = c.sqrt();
    let at = clamped_atanh(sc * xn);
    if mxn < SMALL_NORM {
        let s = at / (sc * xn);
        return mx.into_iter().map(|v| v * s).collect();
    }
    let s = (mxn / xn * at).tanh() / (sc * mxn);
    mx.into_iter().map(|v| v * s).collect()
}

/// Möbius version of a pointwise nonlinearity: `exp_0(f(log_0(x)))`.
pub fn mobius_pointwise(f: impl Fn(f64) -> f64, x: &BallPoint) -> BallPoint {
    let t: Vec<f64> = raw_log0(&x.coords, x.c).into_iter().map(f).collect();
    exp0(&t, x.c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[f64]) -> BallPoint {
        BallPoint::new(v.to_vec(), 1.0).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn add_left_inverse_and_identity() {
        let x = p(&[0.3, 0.0]);
        assert!(close(mobius_add(&x.neg(), &x).unwrap().coords(), &[0.0, 0.0], 1e-15));
        let y = p(&[0.4, 0.1]);
        assert!(close(mobius_add(&BallPoint::origin(2, 1.0), &y).unwrap().coords(), &[0.4, 0.1], 1e-15));
    }

    #[test]
    fn collinear_addition_matches_relativistic_formula() {
        // Along a line the gyroaddition is (a + b) / (1 + c·a·b).
        let r = mobius_add(&p(&[0.3, 0.0]), &p(&[0.4, 0.0])).unwrap();
        let expected = (0.3 + 0.4) / (1.0 + 0.3 * 0.4);
        assert!((r.coords()[0] - 0.625).abs() < 1e-15);
        assert!((r.coords()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn add_rejects_mismatched_spaces() {
        let a = p(&[0.1, 0.1]);
        let b = BallPoint::new(vec![0.1], 1.0).unwrap();
        assert_eq!(mobius_add(&a, &b), Err(GeometryError::DimensionMismatch(2, 1)));
        let d = BallPoint::new(vec![0.1, 0.1], 0.5).unwrap();
        assert_eq!(mobius_add(&a, &d), Err(GeometryError::CurvatureMismatch(1.0, 0.5)));
    }

    #[test]
    fn scalar_mul_cases() {
        let x = p(&[0.3, 0.2]);
        assert!(close(mobius_scalar_mul(1.0, &x).coords(), &[0.3, 0.2], 1e-15));
        assert!(close(mobius_scalar_mul(0.0, &x).coords(), &[0.0, 0.0], 0.0));
        // tanh(2·atanh t) = 2t / (1 + t²)
        let t: f64 = 0.3;
        let doubled = mobius_scalar_mul(2.0, &p(&[t, 0.0]));
        assert!((doubled.coords()[0] - 2.0 * t / (1.0 + t * t)).abs() < 1e-15);
        assert!((doubled.coords()[0] - 0.5504587).abs() < 1e-7);
    }

    #[test]
    fn exp0_and_log0_values() {
        let e = exp0(&[0.5, 0.0], 1.0);
        assert!((e.coords()[0] - 0.5f64.tanh()).abs() < 1e-15);
        assert!((e.coords()[0] - 0.4621172).abs() < 1e-7);
        let l = log0(&p(&[0.5f64.tanh(), 0.0]));
        assert!(close(&l.coords, &[0.5, 0.0], 1e-15));
    }

    #[test]
    fn exp_map_at_origin_matches_exp0() {
        let o = BallPoint::origin(2, 1.0);
        let v = TangentVector::at_origin(vec![0.2, -0.7], 1.0);
        // λ_0 = 2 turns exp_0 into the general formula.
        let a = exp_map(&o, &v).unwrap();
        assert!(close(a.coords(), exp0(&v.coords, 1.0).coords(), 1e-15));
    }

    #[test]
    fn transport_from_origin_to_origin_is_identity() {
        let o = BallPoint::origin(3, 1.0);
        let v = TangentVector::at_origin(vec![0.3, -0.1, 0.2], 1.0);
        let t = parallel_transport0(&o, &v).unwrap();
        assert!(close(&t.coords, &v.coords, 1e-15));
    }

    #[test]
    fn transport_flat_limit() {
        let x = BallPoint::new(vec![0.4, -0.3], 1e-8).unwrap();
        let v = TangentVector::at_origin(vec![0.5, 0.25], 1e-8);
        let t = parallel_transport0(&x, &v).unwrap();
        assert!(close(&t.coords, &v.coords, 1e-6));
    }

    #[test]
    fn matvec_cases() {
        let x = p(&[0.2, 0.5]);
        let id = [1.0, 0.0, 0.0, 1.0];
        assert!(close(mobius_matvec(&id, 2, 2, &x).unwrap().coords(), &[0.2, 0.5], 1e-15));
        let zero = [0.0; 4];
        assert_eq!(mobius_matvec(&zero, 2, 2, &x).unwrap().coords(), &[0.0, 0.0]);
        let rot = [0.0, -1.0, 1.0, 0.0];
        let r = mobius_matvec(&rot, 2, 2, &p(&[0.3, 0.0])).unwrap();
        assert!(close(r.coords(), &[0.0, 0.3], 1e-15));
        assert!(mobius_matvec(&id, 2, 2, &p(&[0.1])).is_err());
    }

    #[test]
    fn pointwise_cases() {
        let x = p(&[0.25, -0.4]);
        assert!(close(mobius_pointwise(|v| v, &x).coords(), x.coords(), 1e-12));
        assert_eq!(mobius_pointwise(f64::tanh, &BallPoint::origin(2, 1.0)).coords(), &[0.0, 0.0]);
        let y = mobius_pointwise(f64::tanh, &p(&[0.5, 0.0]));
        let composed = exp0(&[0.5f64.atanh().tanh(), 0.0], 1.0);
        assert!(close(y.coords(), composed.coords(), 1e-15));
    }

    #[test]
    fn projection_cases() {
        assert_eq!(project_to_ball(vec![0.1, 0.1], 1.0).unwrap().coords(), &[0.1, 0.1]);
        let r = project_to_ball(vec![2.0, 0.0], 1.0).unwrap();
        assert!((r.coords()[0] - 0.99999).abs() < 1e-15);
        assert_eq!(project_to_ball(vec![0.0, 0.0], 1.0).unwrap().coords(), &[0.0, 0.0]);
        assert_eq!(
            project_to_ball(vec![f64::NAN, 0.0], 1.0),
            Err(GeometryError::NonFinite(0))
        );
    }

    #[test]
    fn ball_point_rejects_exterior() {
        assert!(matches!(BallPoint::new(vec![1.0, 0.0], 1.0), Err(GeometryError::OutsideBall(_))));
        assert!(matches!(BallPoint::new(vec![0.1], -1.0), Err(GeometryError::InvalidCurvature(_))));
    }

    #[test]
    fn flat_curvature_is_euclidean() {
        let x = BallPoint::new(vec![3.0, 1.0], 0.0).unwrap();
        let y = BallPoint::new(vec![-1.0, 2.0], 0.0).unwrap();
        assert_eq!(mobius_add(&x, &y).unwrap().coords(), &[2.0, 3.0]);
        let v = TangentVector::at_origin(vec![0.5, 0.5], 0.0);
        assert_eq!(exp_map(&x, &v).unwrap().coords(), &[3.5, 1.5]);
        assert_eq!(log_map(&x, &y).unwrap().coords, vec![-4.0, 1.0]);
    }
}
