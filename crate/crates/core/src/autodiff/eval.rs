use super::kernels as k;
use super::{Algebra, AutodiffError, Result};
use crate::params::{ParamId, ParameterStore};

/// Value-only evaluation of [`Algebra`] programs.
#[derive(Debug, Clone, Copy, Default)]
pub struct Eval<'p> {
    params: Option<&'p ParameterStore>,
}

impl<'p> Eval<'p> {
    pub fn new(params: &'p ParameterStore) -> Self {
        Eval {
            params: Some(params),
        }
    }

    /// An evaluator without parameters, for pure vector math.
    pub fn detached() -> Self {
        Eval { params: None }
    }

    fn store(&self) -> Result<&'p ParameterStore> {
        self.params.ok_or(AutodiffError::MissingParams)
    }
}

impl Algebra for Eval<'_> {
    type V = Vec<f64>;

    fn value<'s>(&'s self, v: &'s Vec<f64>) -> &'s [f64] {
        v
    }

    fn constant(&mut self, data: Vec<f64>) -> Vec<f64> {
        data
    }

    fn param(&mut self, id: ParamId) -> Result<Vec<f64>> {
        Ok(self.store()?.get(id).data.clone())
    }

    fn matvec(&mut self, w: ParamId, x: &Vec<f64>) -> Result<Vec<f64>> {
        let t = self.store()?.get(w);
        k::matvec("matvec", &t.data, t.rows, t.cols, x)
    }

    fn add(&mut self, a: &Vec<f64>, b: &Vec<f64>) -> Result<Vec<f64>> {
        k::zip_with("add", a, b, |x, y| x + y)
    }

    fn sub(&mut self, a: &Vec<f64>, b: &Vec<f64>) -> Result<Vec<f64>> {
        k::zip_with("sub", a, b, |x, y| x - y)
    }

    fn mul(&mut self, a: &Vec<f64>, b: &Vec<f64>) -> Result<Vec<f64>> {
        k::zip_with("mul", a, b, |x, y| x * y)
    }

    fn div(&mut self, a: &Vec<f64>, b: &Vec<f64>) -> Result<Vec<f64>> {
        k::div(a, b)
    }

    fn affine(&mut self, x: &Vec<f64>, a: f64, b: f64) -> Result<Vec<f64>> {
        Ok(x.iter().map(|v| a * v + b).collect())
    }

    fn scale(&mut self, s: &Vec<f64>, v: &Vec<f64>) -> Result<Vec<f64>> {
        k::scale(s, v)
    }

    fn dot(&mut self, a: &Vec<f64>, b: &Vec<f64>) -> Result<Vec<f64>> {
        Ok(vec![k::dot(a, b)?])
    }

    fn sum(&mut self, x: &Vec<f64>) -> Result<Vec<f64>> {
        Ok(vec![x.iter().sum()])
    }

    fn norm(&mut self, x: &Vec<f64>) -> Result<Vec<f64>> {
        Ok(vec![k::norm(x)])
    }

    fn concat(&mut self, parts: &[Vec<f64>]) -> Result<Vec<f64>> {
        let slices: Vec<&[f64]> = parts.iter().map(Vec::as_slice).collect();
        Ok(k::concat(&slices))
    }

    fn index(&mut self, x: &Vec<f64>, i: usize) -> Result<Vec<f64>> {
        Ok(vec![k::index(x, i)?])
    }

    fn tanh(&mut self, x: &Vec<f64>) -> Result<Vec<f64>> {
        Ok(x.iter().map(|v| v.tanh()).collect())
    }

    fn atanh(&mut self, x: &Vec<f64>) -> Result<Vec<f64>> {
        k::atanh(x)
    }

    fn sigmoid(&mut self, x: &Vec<f64>) -> Result<Vec<f64>> {
        Ok(x.iter().map(|v| k::sigmoid(*v)).collect())
    }

    fn softsign(&mut self, x: &Vec<f64>) -> Result<Vec<f64>> {
        Ok(x.iter().map(|v| k::softsign(*v)).collect())
    }

    fn log(&mut self, x: &Vec<f64>) -> Result<Vec<f64>> {
        k::log(x)
    }

    fn exp(&mut self, x: &Vec<f64>) -> Result<Vec<f64>> {
        Ok(x.iter().map(|v| v.exp()).collect())
    }

    fn sqrt(&mut self, x: &Vec<f64>) -> Result<Vec<f64>> {
        k::sqrt(x)
    }

    fn softmax(&mut self, x: &Vec<f64>) -> Result<Vec<f64>> {
        k::softmax(x)
    }

    fn log_softmax(&mut self, x: &Vec<f64>) -> Result<Vec<f64>> {
        k::log_softmax(x)
    }

    fn clamp(&mut self, x: &Vec<f64>, lo: f64, hi: f64) -> Result<Vec<f64>> {
        Ok(x.iter().map(|v| v.clamp(lo, hi)).collect())
    }

    fn straight_through(&mut self, x: &Vec<f64>, replacement: Vec<f64>) -> Result<Vec<f64>> {
        k::same_len("straight_through", x, &replacement)?;
        Ok(replacement)
    }
}
