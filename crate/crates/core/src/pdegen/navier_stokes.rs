//! 2-D incompressible Navier–Stokes in vorticity form,
//! `∂_t ω + u·∇ω = ν Δω + η`, with `Δψ = -ω` and `u = (∂_y ψ, -∂_x ψ)`.
//!
//! Diffusion is treated with Crank–Nicolson, advection and forcing with a
//! Heun predictor-corrector.

use super::{dealias_keep, integrate, PdeKind, PdeProblem, Trajectory};
use crate::error::{Error, Result};
use crate::spectral::{fft_forward, fft_inverse, ComplexSpectrum, RealField};
use num_complex::Complex64;
use std::f64::consts::PI;

/// `η(x, y) = 0.1 (sin 2π(x+y) + cos 2π(x+y))` on an `s × s` grid.
pub fn make_forcing(s: usize) -> RealField {
    RealField::from_fn(s, 2, |p| {
        let a = 2.0 * PI * (p[0] + p[1]);
        0.1 * (a.sin() + a.cos())
    })
}

struct NsStepper {
    s: usize,
    dt: f64,
    omega_hat: ComplexSpectrum,
    forcing_hat: Option<Vec<Complex64>>,
    kx: Vec<f64>,
    ky: Vec<f64>,
    lap: Vec<f64>,
    keep: Vec<bool>,
    /// `(1 - ν dt Λ/2)` and `1 / (1 + ν dt Λ/2)`, `Λ = |2πk|²`.
    explicit: Vec<f64>,
    implicit_inv: Vec<f64>,
}

impl NsStepper {
    fn new(problem: &PdeProblem, init: &RealField, forcing: Option<&RealField>) -> Result<Self> {
        let s = problem.s;
        let hs = s / 2 + 1;
        let n = s * hs;
        let mut kx = Vec::with_capacity(n);
        let mut ky = Vec::with_capacity(n);
        let mut keep = Vec::with_capacity(n);
        for row in 0..s {
            let k1 = if row <= s / 2 { row as i64 } else { row as i64 - s as i64 };
            for k2 in 0..hs as i64 {
                kx.push(2.0 * PI * k1 as f64);
                ky.push(2.0 * PI * k2 as f64);
                keep.push(dealias_keep(k1, s) && dealias_keep(k2, s));
            }
        }
        let lap: Vec<f64> = kx.iter().zip(&ky).map(|(a, b)| a * a + b * b).collect();
        let dt = problem.dt_internal;
        let half = problem.nu * dt / 2.0;
        let explicit = lap.iter().map(|l| 1.0 - half * l).collect();
        let implicit_inv = lap.iter().map(|l| 1.0 / (1.0 + half * l)).collect();
        let mut forcing_hat = forcing.map(|f| fft_forward(f).map(|spec| spec.coeffs().to_vec())).transpose()?;
        if let Some(f) = forcing_hat.as_mut() {
            // mean already checked to vanish; drop the rounding residue
            f[0] = Complex64::new(0.0, 0.0);
        }
        Ok(Self {
            s,
            dt,
            omega_hat: fft_forward(init)?,
            forcing_hat,
            kx,
            ky,
            lap,
            keep,
            explicit,
            implicit_inv,
        })
    }

    /// Dealiased `-u·∇ω + η` in spectral space.
    fn rhs(&self, w: &[Complex64]) -> Vec<Complex64> {
        let s = self.s;
        let n = w.len();
        let i = Complex64::new(0.0, 1.0);
        let zero = Complex64::new(0.0, 0.0);
        let mut fields = [vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]];
        for idx in 0..n {
            if !self.keep[idx] || self.lap[idx] == 0.0 {
                continue;
            }
            let wk = w[idx];
            let psi = wk / self.lap[idx];
            fields[0][idx] = i * self.ky[idx] * psi; // u
            fields[1][idx] = -i * self.kx[idx] * psi; // v
            fields[2][idx] = i * self.kx[idx] * wk; // ∂x ω
            fields[3][idx] = i * self.ky[idx] * wk; // ∂y ω
        }
        let phys: Vec<RealField> = fields
            .into_iter()
            .map(|c| {
                let spec = ComplexSpectrum::new(s, 2, 1, 0, c).expect("full layout");
                fft_inverse(&spec, s).expect("valid grid")
            })
            .collect();
        let adv: Vec<f64> = (0..s * s)
            .map(|p| phys[0].data()[p] * phys[2].data()[p] + phys[1].data()[p] * phys[3].data()[p])
            .collect();
        let adv_hat = fft_forward(&RealField::new(s, 2, 1, adv).expect("grid")).expect("valid grid");
        let mut out: Vec<Complex64> = adv_hat
            .coeffs()
            .iter()
            .zip(&self.keep)
            .map(|(a, &k)| if k { -a } else { zero })
            .collect();
        // the mean of u·∇ω vanishes identically on the torus
        out[0] = zero;
        if let Some(f) = &self.forcing_hat {
            out.iter_mut().zip(f).for_each(|(o, f)| *o += f);
        }
        out
    }

    fn step(&mut self) -> bool {
        let dt = self.dt;
        let w0 = self.omega_hat.coeffs().to_vec();
        let a0 = self.rhs(&w0);
        let predictor: Vec<Complex64> = (0..w0.len())
            .map(|k| (w0[k] * self.explicit[k] + a0[k] * dt) * self.implicit_inv[k])
            .collect();
        let a1 = self.rhs(&predictor);
        let mut finite = true;
        let out = self.omega_hat.coeffs_mut();
        for k in 0..w0.len() {
            let next = (w0[k] * self.explicit[k] + (a0[k] + a1[k]) * (dt / 2.0)) * self.implicit_inv[k];
            finite &= next.re.is_finite() && next.im.is_finite();
            out[k] = next;
        }
        finite
    }
}

/// Integrates the vorticity equation from `init_vorticity`, recording every
/// `dt_record`. Forcing must have zero spatial mean.
pub fn ns_vorticity_solve(problem: &PdeProblem, init_vorticity: &RealField) -> Result<Trajectory> {
    if problem.kind != PdeKind::NavierStokes2d {
        return Err(Error::InvalidParameter("ns_vorticity_solve needs a navier_stokes2d problem".into()));
    }
    problem.validate()?;
    let s = problem.s;
    if init_vorticity.dim() != 2 || init_vorticity.size() != s || init_vorticity.channels() != 1 {
        return Err(Error::ShapeMismatch(format!(
            "initial vorticity must be a single-channel {s}x{s} field"
        )));
    }
    let forcing = problem.forcing_field();
    if let Some(f) = &forcing {
        if f.dim() != 2 || f.size() != s || f.channels() != 1 {
            return Err(Error::ShapeMismatch(format!("forcing must be a single-channel {s}x{s} field")));
        }
        let scale = f.data().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let mean = f.data().iter().sum::<f64>() / f.data().len() as f64;
        if mean.abs() > 1e-12 * scale {
            return Err(Error::InvalidParameter(format!("nonzero-mean forcing (mean {mean:e})")));
        }
    }
    let mut stepper = NsStepper::new(problem, init_vorticity, forcing.as_ref())?;
    integrate(problem, &mut stepper, NsStepper::step, |st| {
        fft_inverse(&st.omega_hat, st.s).expect("valid grid")
    })
}
