//! Gaussian random fields with covariance `sigma^2 (-Δ + tau^2 I)^(-alpha)`
//! on the periodic unit torus.

use super::{check_size, fft_inverse, ComplexSpectrum, RealField};
use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrfParams {
    pub tau: f64,
    pub alpha: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl GrfParams {
    /// 1-D Burgers initial conditions.
    pub fn burgers(seed: u64) -> Self {
        Self {
            tau: 5.0,
            alpha: 2.0,
            sigma: 25.0,
            seed,
        }
    }

    /// 2-D Navier–Stokes initial vorticity.
    pub fn navier_stokes(seed: u64) -> Self {
        Self {
            tau: 7.0,
            alpha: 2.5,
            sigma: 7f64.powf(1.5),
            seed,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::InvalidParameter(format!("GRF tau must be > 0, got {}", self.tau)));
        }
        if !(self.alpha > dim as f64 / 2.0) {
            return Err(Error::InvalidParameter(format!(
                "GRF alpha must exceed d/2 = {}, got {}",
                dim as f64 / 2.0,
                self.alpha
            )));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!("GRF sigma must be >= 0, got {}", self.sigma)));
        }
        Ok(())
    }

    /// Covariance eigenvalue of the Fourier mode with squared wavenumber `k2`
    /// (integer frequencies, so the Laplacian eigenvalue is `4π² k2`).
    pub fn eigenvalue(&self, k2: f64) -> f64 {
        self.sigma * self.sigma * (4.0 * PI * PI * k2 + self.tau * self.tau).powf(-self.alpha)
    }
}

/// Draws one zero-mean sample on an `s`-point (per axis) grid.
///
/// Every stored mode below Nyquist gets an independent standard complex
/// Gaussian scaled by the square root of its covariance eigenvalue; the zero
/// mode and the Nyquist lines are set to zero. Draws happen in row-major order
/// over the half-spectrum layout.
pub fn grf_sample(p: &GrfParams, s: usize, dim: usize) -> Result<RealField> {
    p.validate(dim)?;
    check_size(s)?;
    let mut rng = ChaCha20Rng::seed_from_u64(p.seed);
    let mut draw = || {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    };
    let n = (s as f64).powi(dim as i32);
    let amp = |k2: f64| n * p.eigenvalue(k2).sqrt();
    let half = s / 2;
    let hs = half + 1;
    let mut spec = ComplexSpectrum::zeros(s, dim, 1, 0);
    let coeffs = spec.coeffs_mut();
    match dim {
        1 => {
            for k in 1..half {
                coeffs[k] = draw() * amp((k * k) as f64);
            }
        }
        _ => {
            for row in 0..s {
                if row == half {
                    continue;
                }
                let k1 = if row < half { row as i64 } else { row as i64 - s as i64 };
                for k2 in 0..half {
                    if k2 == 0 && k1 <= 0 {
                        continue;
                    }
                    let ksq = (k1 * k1) as f64 + (k2 * k2) as f64;
                    coeffs[row * hs + k2] = draw() * amp(ksq);
                }
            }
            for row in 1..half {
                coeffs[(s - row) * hs] = coeffs[row * hs].conj();
            }
        }
    }
    if p.sigma == 0.0 {
        return Ok(RealField::zeros(s, dim, 1));
    }
    fft_inverse(&spec, s)
}

/// Pointwise variance of [`grf_sample`] on an `s`-point grid: the sum of the
/// covariance eigenvalues over every mode the sampler populates.
pub fn grf_pointwise_variance(p: &GrfParams, s: usize, dim: usize) -> f64 {
    let half = s as i64 / 2;
    let range = -half + 1..half;
    match dim {
        1 => range.filter(|&k| k != 0).map(|k| p.eigenvalue((k * k) as f64)).sum(),
        _ => {
            let mut total = 0.0;
            for k1 in range.clone() {
                for k2 in range.clone() {
                    if k1 != 0 || k2 != 0 {
                        total += p.eigenvalue((k1 * k1 + k2 * k2) as f64);
                    }
                }
            }
            total
        }
    }
}
