/// Outcome of comparing an analytic gradient against central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDiffReport {
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, 1e-3)`.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Index of the component that attains `max_rel_error`.
    pub worst_index: usize,
    pub numeric: Vec<f64>,
}

/// Relative errors are taken against a magnitude floor of `1e-3`, so
/// components smaller than that are held to an absolute tolerance instead.
pub const MAGNITUDE_FLOOR: f64 = 1e-3;

/// Central-difference check of `analytic` as the gradient of `f` at `theta`.
pub fn finite_diff_check<F>(f: F, theta: &[f64], analytic: &[f64], h: f64) -> FiniteDiffReport
where
    F: Fn(&[f64]) -> f64,
{
    assert_eq!(theta.len(), analytic.len(), "gradient length");
    let mut point = theta.to_vec();
    let mut numeric = Vec::with_capacity(theta.len());
    let mut report = FiniteDiffReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst_index: 0,
        numeric: Vec::new(),
    };
    for i in 0..theta.len() {
        let orig = point[i];
        point[i] = orig + h;
        let up = f(&point);
        point[i] = orig - h;
        let down = f(&point);
        point[i] = orig;
        let d = (up - down) / (2.0 * h);
        let abs = (d - analytic[i]).abs();
        let rel = abs / d.abs().max(analytic[i].abs()).max(MAGNITUDE_FLOOR);
        if rel > report.max_rel_error || rel.is_nan() {
            report.max_rel_error = rel;
            report.worst_index = i;
        }
        report.max_abs_error = report.max_abs_error.max(abs);
        numeric.push(d);
    }
    report.numeric = numeric;
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact_to_roundoff() {
        let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * v * v).sum();
        let theta = [0.5, -1.5, 2.0];
        let grad: Vec<f64> = theta
            .iter()
            .enumerate()
            .map(|(i, v)| 2.0 * (i as f64 + 1.0) * v)
            .collect();
        let report = finite_diff_check(f, &theta, &grad, 1e-5);
        assert!(report.max_rel_error < 1e-10, "{report:?}");
    }

    #[test]
    fn wrong_gradient_is_flagged() {
        let f = |x: &[f64]| x[0].sin();
        let report = finite_diff_check(f, &[0.3], &[0.0], 1e-5);
        assert!(report.max_rel_error > 0.9);
    }
}
