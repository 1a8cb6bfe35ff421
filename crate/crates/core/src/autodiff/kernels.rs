//! Forward kernels shared by the plain evaluator and the tape.

use super::{AutodiffError, Result};

pub(crate) fn same_len(op: &'static str, a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(AutodiffError::ShapeMismatch {
            op,
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

pub(crate) fn zip_with(
    op: &'static str,
    a: &[f64],
    b: &[f64],
    f: impl Fn(f64, f64) -> f64,
) -> Result<Vec<f64>> {
    same_len(op, a, b)?;
    Ok(a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
}

pub(crate) fn div(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    same_len("div", a, b)?;
    if let Some(z) = b.iter().find(|v| **v == 0.0) {
        return Err(AutodiffError::Domain {
            op: "div",
            detail: format!("division by {z}"),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x / y).collect())
}

pub(crate) fn scale(s: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if s.len() != 1 {
        return Err(AutodiffError::ShapeMismatch {
            op: "scale",
            left: s.len(),
            right: 1,
        });
    }
    Ok(v.iter().map(|x| s[0] * x).collect())
}

pub(crate) fn matvec(op: &'static str, w: &[f64], rows: usize, cols: usize, x: &[f64]) -> Result<Vec<f64>> {
    if cols != x.len() {
        return Err(AutodiffError::ShapeMismatch {
            op,
            left: cols,
            right: x.len(),
        });
    }
    Ok(w.chunks_exact(cols)
        .take(rows)
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    same_len("dot", a, b)?;
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn index(x: &[f64], i: usize) -> Result<f64> {
    x.get(i).copied().ok_or(AutodiffError::ShapeMismatch {
        op: "index",
        left: i,
        right: x.len(),
    })
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softsign(x: f64) -> f64 {
    x / (1.0 + x.abs())
}

pub(crate) fn atanh(x: &[f64]) -> Result<Vec<f64>> {
    if let Some(v) = x.iter().find(|v| !(v.abs() < 1.0)) {
        return Err(AutodiffError::Domain {
            op: "atanh",
            detail: format!("argument {v} outside (-1, 1)"),
        });
    }
    Ok(x.iter().map(|v| v.atanh()).collect())
}

pub(crate) fn log(x: &[f64]) -> Result<Vec<f64>> {
    if let Some(v) = x.iter().find(|v| !(**v > 0.0)) {
        return Err(AutodiffError::Domain {
            op: "log",
            detail: format!("non-positive argument {v}"),
        });
    }
    Ok(x.iter().map(|v| v.ln()).collect())
}

pub(crate) fn sqrt(x: &[f64]) -> Result<Vec<f64>> {
    if let Some(v) = x.iter().find(|v| !(**v >= 0.0)) {
        return Err(AutodiffError::Domain {
            op: "sqrt",
            detail: format!("negative argument {v}"),
        });
    }
    Ok(x.iter().map(|v| v.sqrt()).collect())
}

pub(crate) fn log_softmax(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(AutodiffError::ShapeMismatch {
            op: "softmax",
            left: 0,
            right: 1,
        });
    }
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    Ok(x.iter().map(|v| v - lse).collect())
}

pub(crate) fn softmax(x: &[f64]) -> Result<Vec<f64>> {
    Ok(log_softmax(x)?.into_iter().map(f64::exp).collect())
}

pub(crate) fn concat(parts: &[&[f64]]) -> Vec<f64> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}
