use super::kernels as k;
use super::{Algebra, AutodiffError, Result};
use crate::params::{Gradient, ParamId, ParameterStore};

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Affine(Var, f64),
    Scale(Var, Var),
    MatVec(Var, Var),
    Dot(Var, Var),
    Sum(Var),
    Norm(Var),
    Concat(Vec<Var>),
    Index(Var, usize),
    Tanh(Var),
    Atanh(Var),
    Sigmoid(Var),
    Softsign(Var),
    Log(Var),
    Exp(Var),
    Sqrt(Var),
    Softmax(Var),
    LogSoftmax(Var),
    Clamp(Var, f64, f64),
    StraightThrough(Var),
}

#[derive(Debug, Clone)]
enum Value {
    Owned(Vec<f64>),
    Param(ParamId),
}

#[derive(Debug, Clone)]
struct Node {
    value: Value,
    rows: usize,
    cols: usize,
    op: Op,
}

/// A recording of one forward computation.
///
/// Nodes are appended in evaluation order, so reverse insertion order is a
/// reverse topological order and every node is visited once by
/// [`backward`](Tape::backward).
#[derive(Debug, Clone, Default)]
pub struct Tape<'p> {
    params: Option<&'p ParameterStore>,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<Var>>,
}

impl<'p> Tape<'p> {
    pub fn new() -> Self {
        Tape {
            params: None,
            nodes: Vec::new(),
            param_nodes: Vec::new(),
        }
    }

    pub fn with_params(params: &'p ParameterStore) -> Self {
        Tape {
            params: Some(params),
            nodes: Vec::with_capacity(1024),
            param_nodes: vec![None; params.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A differentiable leaf vector.
    pub fn var(&mut self, data: Vec<f64>) -> Var {
        let n = data.len();
        self.push(Value::Owned(data), n, 1, Op::Leaf)
    }

    /// A differentiable leaf matrix (row-major).
    pub fn matrix(&mut self, data: Vec<f64>, rows: usize, cols: usize) -> Var {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        self.push(Value::Owned(data), rows, cols, Op::Leaf)
    }

    pub fn get(&self, v: Var) -> &[f64] {
        match &self.nodes[v.0].value {
            Value::Owned(d) => d,
            Value::Param(id) => &self.params.expect("param node without store").get(*id).data,
        }
    }

    fn push(&mut self, value: Value, rows: usize, cols: usize, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            rows,
            cols,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn vec(&mut self, data: Vec<f64>, op: Op) -> Var {
        let n = data.len();
        self.push(Value::Owned(data), n, 1, op)
    }

    fn param_node(&mut self, id: ParamId) -> Result<Var> {
        let store = self.params.ok_or(AutodiffError::MissingParams)?;
        if let Some(v) = self.param_nodes[id.0] {
            return Ok(v);
        }
        let t = store.get(id);
        let v = self.push(Value::Param(id), t.rows, t.cols, Op::Param);
        self.param_nodes[id.0] = Some(v);
        Ok(v)
    }

    /// Matrix variable times vector variable.
    pub fn matvec_var(&mut self, w: Var, x: Var) -> Result<Var> {
        let (rows, cols) = (self.nodes[w.0].rows, self.nodes[w.0].cols);
        let out = k::matvec("matvec", self.get(w), rows, cols, self.get(x))?;
        Ok(self.vec(out, Op::MatVec(w, x)))
    }

    /// Reverse sweep from a scalar root.
    pub fn backward(&self, root: Var) -> Result<Adjoints> {
        let root_len = self.get(root).len();
        if root_len != 1 {
            return Err(AutodiffError::NonScalarRoot(root_len));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        grads[root.0] = Some(vec![1.0]);

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let out = self.get(Var(i));
            match &node.op {
                Op::Leaf | Op::Param => {}
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, &g);
                    accumulate(&mut grads, *b, &g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, &g);
                    let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                    accumulate(&mut grads, *b, &neg);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.get(*a), self.get(*b));
                    let ga: Vec<f64> = g.iter().zip(bv).map(|(g, b)| g * b).collect();
                    let gb: Vec<f64> = g.iter().zip(av).map(|(g, a)| g * a).collect();
                    accumulate(&mut grads, *a, &ga);
                    accumulate(&mut grads, *b, &gb);
                }
                Op::Div(a, b) => {
                    let (av, bv) = (self.get(*a), self.get(*b));
                    let ga: Vec<f64> = g.iter().zip(bv).map(|(g, b)| g / b).collect();
                    let gb: Vec<f64> = g
                        .iter()
                        .zip(av.iter().zip(bv))
                        .map(|(g, (a, b))| -g * a / (b * b))
                        .collect();
                    accumulate(&mut grads, *a, &ga);
                    accumulate(&mut grads, *b, &gb);
                }
                Op::Affine(x, a) => {
                    let gx: Vec<f64> = g.iter().map(|v| a * v).collect();
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Scale(s, v) => {
                    let (sv, vv) = (self.get(*s)[0], self.get(*v));
                    let gs: f64 = g.iter().zip(vv).map(|(g, v)| g * v).sum();
                    let gv: Vec<f64> = g.iter().map(|g| g * sv).collect();
                    accumulate(&mut grads, *s, &[gs]);
                    accumulate(&mut grads, *v, &gv);
                }
                Op::MatVec(w, x) => {
                    let wn = &self.nodes[w.0];
                    let (rows, cols) = (wn.rows, wn.cols);
                    let (wv, xv) = (self.get(*w), self.get(*x));
                    let mut gw = vec![0.0; rows * cols];
                    let mut gx = vec![0.0; cols];
                    for r in 0..rows {
                        let gr = g[r];
                        if gr == 0.0 {
                            continue;
                        }
                        let wrow = &wv[r * cols..(r + 1) * cols];
                        let gwrow = &mut gw[r * cols..(r + 1) * cols];
                        for c in 0..cols {
                            gwrow[c] += gr * xv[c];
                            gx[c] += gr * wrow[c];
                        }
                    }
                    accumulate(&mut grads, *w, &gw);
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Dot(a, b) => {
                    let (av, bv) = (self.get(*a), self.get(*b));
                    let ga: Vec<f64> = bv.iter().map(|b| g[0] * b).collect();
                    let gb: Vec<f64> = av.iter().map(|a| g[0] * a).collect();
                    accumulate(&mut grads, *a, &ga);
                    accumulate(&mut grads, *b, &gb);
                }
                Op::Sum(x) => {
                    let n = self.get(*x).len();
                    accumulate(&mut grads, *x, &vec![g[0]; n]);
                }
                Op::Norm(x) => {
                    let xv = self.get(*x);
                    let n = out[0];
                    let gx: Vec<f64> = if n > 0.0 {
                        xv.iter().map(|v| g[0] * v / n).collect()
                    } else {
                        vec![0.0; xv.len()]
                    };
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let n = self.get(*p).len();
                        accumulate(&mut grads, *p, &g[offset..offset + n]);
                        offset += n;
                    }
                }
                Op::Index(x, idx) => {
                    let mut gx = vec![0.0; self.get(*x).len()];
                    gx[*idx] = g[0];
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Tanh(x) => {
                    let gx: Vec<f64> = g.iter().zip(out).map(|(g, y)| g * (1.0 - y * y)).collect();
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Atanh(x) => {
                    let xv = self.get(*x);
                    let gx: Vec<f64> = g.iter().zip(xv).map(|(g, x)| g / (1.0 - x * x)).collect();
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Sigmoid(x) => {
                    let gx: Vec<f64> = g.iter().zip(out).map(|(g, y)| g * y * (1.0 - y)).collect();
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Softsign(x) => {
                    let xv = self.get(*x);
                    let gx: Vec<f64> = g
                        .iter()
                        .zip(xv)
                        .map(|(g, x)| {
                            let d = 1.0 + x.abs();
                            g / (d * d)
                        })
                        .collect();
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Log(x) => {
                    let xv = self.get(*x);
                    let gx: Vec<f64> = g.iter().zip(xv).map(|(g, x)| g / x).collect();
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Exp(x) => {
                    let gx: Vec<f64> = g.iter().zip(out).map(|(g, y)| g * y).collect();
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Sqrt(x) => {
                    let gx: Vec<f64> = g
                        .iter()
                        .zip(out)
                        .map(|(g, y)| if *y > 0.0 { g / (2.0 * y) } else { 0.0 })
                        .collect();
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Softmax(x) => {
                    let s: f64 = g.iter().zip(out).map(|(g, y)| g * y).sum();
                    let gx: Vec<f64> = g.iter().zip(out).map(|(g, y)| y * (g - s)).collect();
                    accumulate(&mut grads, *x, &gx);
                }
                Op::LogSoftmax(x) => {
                    let total: f64 = g.iter().sum();
                    let gx: Vec<f64> = g
                        .iter()
                        .zip(out)
                        .map(|(g, y)| g - y.exp() * total)
                        .collect();
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Clamp(x, lo, hi) => {
                    let xv = self.get(*x);
                    let gx: Vec<f64> = g
                        .iter()
                        .zip(xv)
                        .map(|(g, x)| if *x >= *lo && *x <= *hi { *g } else { 0.0 })
                        .collect();
                    accumulate(&mut grads, *x, &gx);
                }
                Op::StraightThrough(x) => accumulate(&mut grads, *x, &g),
            }
            grads[i] = Some(g);
        }
        Ok(Adjoints { grads })
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, g: &[f64]) {
    match &mut grads[v.0] {
        Some(acc) => {
            for (a, b) in acc.iter_mut().zip(g) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(g.to_vec()),
    }
}

/// Result of a reverse sweep: the derivative of the root with respect to
/// every node that influences it.
#[derive(Debug, Clone)]
pub struct Adjoints {
    grads: Vec<Option<Vec<f64>>>,
}

impl Adjoints {
    /// Derivative with respect to `v`, or `None` when the root does not
    /// depend on it.
    pub fn wrt(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Collect parameter derivatives into a store-congruent gradient.
    pub fn param_gradient(&self, tape: &Tape<'_>, store: &ParameterStore) -> Gradient {
        let mut out = Gradient::zeros_like(store);
        self.accumulate_into(tape, &mut out, 1.0);
        out
    }

    /// `out += factor * dRoot/dParams`.
    pub fn accumulate_into(&self, tape: &Tape<'_>, out: &mut Gradient, factor: f64) {
        for (pid, var) in tape.param_nodes.iter().enumerate() {
            if let Some(g) = var.and_then(|v| self.wrt(v)) {
                for (o, gi) in out.tensors[pid].iter_mut().zip(g) {
                    *o += factor * gi;
                }
            }
        }
    }
}

impl Algebra for Tape<'_> {
    type V = Var;

    fn value<'s>(&'s self, v: &'s Var) -> &'s [f64] {
        self.get(*v)
    }

    fn constant(&mut self, data: Vec<f64>) -> Var {
        self.var(data)
    }

    fn param(&mut self, id: ParamId) -> Result<Var> {
        self.param_node(id)
    }

    fn matvec(&mut self, w: ParamId, x: &Var) -> Result<Var> {
        let wv = self.param_node(w)?;
        self.matvec_var(wv, *x)
    }

    fn add(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let out = k::zip_with("add", self.get(*a), self.get(*b), |x, y| x + y)?;
        Ok(self.vec(out, Op::Add(*a, *b)))
    }

    fn sub(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let out = k::zip_with("sub", self.get(*a), self.get(*b), |x, y| x - y)?;
        Ok(self.vec(out, Op::Sub(*a, *b)))
    }

    fn mul(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let out = k::zip_with("mul", self.get(*a), self.get(*b), |x, y| x * y)?;
        Ok(self.vec(out, Op::Mul(*a, *b)))
    }

    fn div(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let out = k::div(self.get(*a), self.get(*b))?;
        Ok(self.vec(out, Op::Div(*a, *b)))
    }

    fn affine(&mut self, x: &Var, a: f64, b: f64) -> Result<Var> {
        let out = self.get(*x).iter().map(|v| a * v + b).collect();
        Ok(self.vec(out, Op::Affine(*x, a)))
    }

    fn scale(&mut self, s: &Var, v: &Var) -> Result<Var> {
        let out = k::scale(self.get(*s), self.get(*v))?;
        Ok(self.vec(out, Op::Scale(*s, *v)))
    }

    fn dot(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let out = k::dot(self.get(*a), self.get(*b))?;
        Ok(self.vec(vec![out], Op::Dot(*a, *b)))
    }

    fn sum(&mut self, x: &Var) -> Result<Var> {
        let out = self.get(*x).iter().sum();
        Ok(self.vec(vec![out], Op::Sum(*x)))
    }

    fn norm(&mut self, x: &Var) -> Result<Var> {
        let out = k::norm(self.get(*x));
        Ok(self.vec(vec![out], Op::Norm(*x)))
    }

    fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let slices: Vec<&[f64]> = parts.iter().map(|p| self.get(*p)).collect();
        let out = k::concat(&slices);
        Ok(self.vec(out, Op::Concat(parts.to_vec())))
    }

    fn index(&mut self, x: &Var, i: usize) -> Result<Var> {
        let out = k::index(self.get(*x), i)?;
        Ok(self.vec(vec![out], Op::Index(*x, i)))
    }

    fn tanh(&mut self, x: &Var) -> Result<Var> {
        let out = self.get(*x).iter().map(|v| v.tanh()).collect();
        Ok(self.vec(out, Op::Tanh(*x)))
    }

    fn atanh(&mut self, x: &Var) -> Result<Var> {
        let out = k::atanh(self.get(*x))?;
        Ok(self.vec(out, Op::Atanh(*x)))
    }

    fn sigmoid(&mut self, x: &Var) -> Result<Var> {
        let out = self.get(*x).iter().map(|v| k::sigmoid(*v)).collect();
        Ok(self.vec(out, Op::Sigmoid(*x)))
    }

    fn softsign(&mut self, x: &Var) -> Result<Var> {
        let out = self.get(*x).iter().map(|v| k::softsign(*v)).collect();
        Ok(self.vec(out, Op::Softsign(*x)))
    }

    fn log(&mut self, x: &Var) -> Result<Var> {
        let out = k::log(self.get(*x))?;
        Ok(self.vec(out, Op::Log(*x)))
    }

    fn exp(&mut self, x: &Var) -> Result<Var> {
        let out = self.get(*x).iter().map(|v| v.exp()).collect();
        Ok(self.vec(out, Op::Exp(*x)))
    }

    fn sqrt(&mut self, x: &Var) -> Result<Var> {
        let out = k::sqrt(self.get(*x))?;
        Ok(self.vec(out, Op::Sqrt(*x)))
    }

    fn softmax(&mut self, x: &Var) -> Result<Var> {
        let out = k::softmax(self.get(*x))?;
        Ok(self.vec(out, Op::Softmax(*x)))
    }

    fn log_softmax(&mut self, x: &Var) -> Result<Var> {
        let out = k::log_softmax(self.get(*x))?;
        Ok(self.vec(out, Op::LogSoftmax(*x)))
    }

    fn clamp(&mut self, x: &Var, lo: f64, hi: f64) -> Result<Var> {
        let out = self.get(*x).iter().map(|v| v.clamp(lo, hi)).collect();
        Ok(self.vec(out, Op::Clamp(*x, lo, hi)))
    }

    fn straight_through(&mut self, x: &Var, replacement: Vec<f64>) -> Result<Var> {
        k::same_len("straight_through", self.get(*x), &replacement)?;
        Ok(self.vec(replacement, Op::StraightThrough(*x)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{finite_diff_check, Eval};

    #[test]
    fn square_has_derivative_six_at_three() {
        let mut t = Tape::new();
        let x = t.var(vec![3.0]);
        let y = t.mul(&x, &x).unwrap();
        let adj = t.backward(y).unwrap();
        assert_eq!(adj.wrt(x).unwrap(), &[6.0]);
    }

    #[test]
    fn tanh_slope_at_origin_is_one() {
        let mut t = Tape::new();
        let x = t.var(vec![0.0]);
        let y = t.tanh(&x).unwrap();
        assert_eq!(t.backward(y).unwrap().wrt(x).unwrap(), &[1.0]);
    }

    #[test]
    fn softmax_and_softsign_values() {
        let mut e = Eval::detached();
        assert_eq!(e.softmax(&vec![0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(e.softsign(&vec![1.0]).unwrap(), vec![0.5]);
    }

    #[test]
    fn non_scalar_root_is_rejected() {
        let mut t = Tape::new();
        let x = t.var(vec![1.0, 2.0]);
        let y = t.tanh(&x).unwrap();
        assert_eq!(t.backward(y).unwrap_err(), AutodiffError::NonScalarRoot(2));
    }

    #[test]
    fn domain_errors_name_the_op() {
        let mut t = Tape::new();
        let x = t.var(vec![-1.0]);
        match t.log(&x) {
            Err(AutodiffError::Domain { op, .. }) => assert_eq!(op, "log"),
            other => panic!("expected domain error, got {other:?}"),
        }
        let y = t.var(vec![1.0, 2.0]);
        assert!(matches!(t.add(&x, &y), Err(AutodiffError::ShapeMismatch { op: "add", .. })));
    }

    #[test]
    fn unused_leaf_has_no_adjoint() {
        let mut t = Tape::new();
        let x = t.var(vec![1.0]);
        let unused = t.var(vec![2.0]);
        let y = t.exp(&x).unwrap();
        let adj = t.backward(y).unwrap();
        assert!(adj.wrt(unused).is_none());
    }

    #[test]
    fn backward_twice_is_identical() {
        let mut t = Tape::new();
        let x = t.var(vec![0.3, -0.7, 1.1]);
        let s = t.sigmoid(&x).unwrap();
        let n = t.norm(&s).unwrap();
        let a = t.backward(n).unwrap();
        let b = t.backward(n).unwrap();
        assert_eq!(a.wrt(x), b.wrt(x));
    }

    #[test]
    fn gradient_of_sum_is_sum_of_gradients() {
        let x0 = vec![0.2, -0.4, 0.9];
        let build = |t: &mut Tape, which: u8| -> (Var, Var) {
            let x = t.var(x0.clone());
            let f = t.tanh(&x).unwrap();
            let f = t.sum(&f).unwrap();
            let s = t.softsign(&x).unwrap();
            let g = t.dot(&s, &x).unwrap();
            let root = match which {
                0 => f,
                1 => g,
                _ => t.add(&f, &g).unwrap(),
            };
            (x, root)
        };
        let grads: Vec<Vec<f64>> = (0..3)
            .map(|w| {
                let mut t = Tape::new();
                let (x, r) = build(&mut t, w);
                t.backward(r).unwrap().wrt(x).unwrap().to_vec()
            })
            .collect();
        for ((a, b), sum) in grads[0].iter().zip(&grads[1]).zip(&grads[2]) {
            assert!((a + b - sum).abs() < 1e-14);
        }
    }

    #[test]
    fn every_op_matches_finite_differences() {
        let x0 = vec![0.3, -0.2, 0.45];
        let w0 = vec![0.5, -1.0, 0.25, 0.8, 0.1, -0.6];
        let f = |t: &mut Tape, x: Var, w: Var| -> Result<Var> {
            let y = t.matvec_var(w, x)?;
            let y = t.tanh(&y)?;
            let s = t.sigmoid(&x)?;
            let ss = t.softsign(&s)?;
            let cl = t.clamp(&x, -0.25, 0.4)?;
            let at = t.atanh(&cl)?;
            let n = t.norm(&x)?;
            let sc = t.scale(&n, &at)?;
            let ex = t.exp(&sc)?;
            let lg = t.log(&ex)?;
            let sq = t.sqrt(&ex)?;
            let q = t.div(&lg, &sq)?;
            let cat = t.concat(&[y, q])?;
            let sm = t.softmax(&cat)?;
            let ls = t.log_softmax(&cat)?;
            let i0 = t.index(&sm, 1)?;
            let d = t.dot(&ls, &ls)?;
            let dd = t.affine(&d, 0.1, 2.0)?;
            let m = t.mul(&dd, &i0)?;
            let st = t.straight_through(&ss, vec![0.0; 3])?;
            let stsum = t.sum(&st)?;
            let r = t.sub(&m, &stsum)?;
            t.add(&r, &n)
        };
        let mut theta = x0.clone();
        theta.extend(&w0);
        let value = |th: &[f64]| {
            let mut t = Tape::new();
            let x = t.var(th[..3].to_vec());
            let w = t.matrix(th[3..].to_vec(), 2, 3);
            let r = f(&mut t, x, w).unwrap();
            t.get(r)[0]
        };
        let mut t = Tape::new();
        let x = t.var(x0.clone());
        let w = t.matrix(w0.clone(), 2, 3);
        let r = f(&mut t, x, w).unwrap();
        let adj = t.backward(r).unwrap();
        let mut analytic = adj.wrt(x).unwrap().to_vec();
        analytic.extend(adj.wrt(w).unwrap());
        // The straight-through node has value zero but identity gradient,
        // so add its contribution back to the finite-difference side.
        let report = finite_diff_check(
            |th| {
                let mut e = Eval::detached();
                let s = e.sigmoid(&th[..3].to_vec()).unwrap();
                let ss: f64 = e.softsign(&s).unwrap().iter().sum();
                value(th) - ss
            },
            &theta,
            &analytic,
            1e-5,
        );
        assert!(report.max_rel_error < 1e-7, "{report:?}");
    }
}
