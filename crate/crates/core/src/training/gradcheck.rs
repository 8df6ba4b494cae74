use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Largest parameter vector [`gradient_check`] accepts.
pub const GRADIENT_CHECK_LIMIT: usize = 5000;

const STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Coordinate attaining `max_rel_error`.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub passed: bool,
}

/// Compares `grad` at `x` against central differences of `f` with step 1e-5.
/// The per-coordinate error is `|fd − g| / max(|fd|, |g|, 1e-8)`.
pub fn gradient_check<F>(f: F, x: &[f64], grad: &[f64], tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if x.len() > GRADIENT_CHECK_LIMIT {
        return Err(Error::InvalidParameter(format!(
            "gradient check limited to {GRADIENT_CHECK_LIMIT} parameters, got {}",
            x.len()
        )));
    }
    if grad.len() != x.len() {
        return Err(Error::ShapeMismatch("gradient length differs from parameter length".into()));
    }
    let mut probe = x.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: grad.first().copied().unwrap_or(0.0),
        numeric: 0.0,
        passed: true,
    };
    for i in 0..x.len() {
        probe[i] = x[i] + STEP;
        let up = f(&probe)?;
        probe[i] = x[i] - STEP;
        let down = f(&probe)?;
        probe[i] = x[i];
        let fd = (up - down) / (2.0 * STEP);
        let err = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-8);
        if err > report.max_rel_error || i == 0 {
            report.max_rel_error = err;
            report.worst_index = i;
            report.analytic = grad[i];
            report.numeric = fd;
        }
    }
    report.passed = report.max_rel_error < tol;
    Ok(report)
}
