//! `∂_t u + ∂_x(u²/2) = ν ∂_xx u` with an integrating factor for diffusion and
//! classical RK4 (Lawson form) on the dealiased flux.

use super::{dealias_keep, integrate, PdeKind, PdeProblem, Trajectory};
use crate::error::{Error, Result};
use crate::spectral::{real_plan, RealField};
use num_complex::Complex64;
use std::f64::consts::PI;

struct BurgersStepper {
    s: usize,
    dt: f64,
    u_hat: Vec<Complex64>,
    /// `exp(-ν k² dt/2)` per half-spectrum bin.
    decay_half: Vec<f64>,
    /// `-i k / 2` on dealiased bins, 0 elsewhere.
    flux_op: Vec<Complex64>,
    u: Vec<f64>,
    scratch: Vec<Complex64>,
    stages: [Vec<Complex64>; 5],
}

impl BurgersStepper {
    fn new(problem: &PdeProblem, init: &RealField) -> Self {
        let s = problem.s;
        let hs = s / 2 + 1;
        let mut u_hat = vec![Complex64::new(0.0, 0.0); hs];
        let mut scratch = Vec::new();
        real_plan(s).forward(init.data(), &mut u_hat, &mut scratch);
        let dt = problem.dt_internal;
        let decay_half = (0..hs)
            .map(|m| {
                let k = 2.0 * PI * m as f64;
                (-problem.nu * k * k * dt / 2.0).exp()
            })
            .collect();
        let flux_op = (0..hs)
            .map(|m| {
                if dealias_keep(m as i64, s) {
                    Complex64::new(0.0, -PI * m as f64)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        let zeros = vec![Complex64::new(0.0, 0.0); hs];
        Self {
            s,
            dt,
            u_hat,
            decay_half,
            flux_op,
            u: vec![0.0; s],
            scratch,
            stages: std::array::from_fn(|_| zeros.clone()),
        }
    }

    /// Dealiased `-∂_x(u²)/2` of `v_hat`, written into `out`.
    fn flux(&mut self, v_hat: &[Complex64], out: &mut [Complex64]) {
        let plan = real_plan(self.s);
        for (m, (o, v)) in out.iter_mut().zip(v_hat).enumerate() {
            *o = if dealias_keep(m as i64, self.s) { *v } else { Complex64::new(0.0, 0.0) };
        }
        plan.inverse(out, &mut self.u, &mut self.scratch);
        self.u.iter_mut().for_each(|x| *x = *x * *x);
        plan.forward(&self.u, out, &mut self.scratch);
        for (o, op) in out.iter_mut().zip(&self.flux_op) {
            *o *= op;
        }
    }

    fn step(&mut self) -> bool {
        let dt = self.dt;
        let [mut a, mut b, mut c, mut d, mut tmp] = std::mem::take(&mut self.stages);
        let u0 = self.u_hat.clone();
        let e = std::mem::take(&mut self.decay_half);

        self.flux(&u0, &mut a);
        for m in 0..u0.len() {
            tmp[m] = (u0[m] + a[m] * (dt / 2.0)) * e[m];
        }
        self.flux(&tmp, &mut b);
        for m in 0..u0.len() {
            tmp[m] = u0[m] * e[m] + b[m] * (dt / 2.0);
        }
        self.flux(&tmp, &mut c);
        for m in 0..u0.len() {
            tmp[m] = u0[m] * (e[m] * e[m]) + c[m] * (dt * e[m]);
        }
        self.flux(&tmp, &mut d);
        let mut finite = true;
        for m in 0..u0.len() {
            let e2 = e[m] * e[m];
            let next = u0[m] * e2 + (a[m] * e2 + (b[m] + c[m]) * (2.0 * e[m]) + d[m]) * (dt / 6.0);
            finite &= next.re.is_finite() && next.im.is_finite();
            self.u_hat[m] = next;
        }
        self.stages = [a, b, c, d, tmp];
        self.decay_half = e;
        finite
    }
}

/// Integrates Burgers' equation from `init`, recording every `dt_record`.
pub fn burgers_solve(problem: &PdeProblem, init: &RealField) -> Result<Trajectory> {
    if problem.kind != PdeKind::Burgers1d {
        return Err(Error::InvalidParameter("burgers_solve needs a burgers1d problem".into()));
    }
    problem.validate()?;
    if init.dim() != 1 || init.size() != problem.s || init.channels() != 1 {
        return Err(Error::ShapeMismatch(format!(
            "initial condition must be a single-channel 1-D field of size {}",
            problem.s
        )));
    }
    let mut stepper = BurgersStepper::new(problem, init);
    integrate(problem, &mut stepper, BurgersStepper::step, |st| {
        let mut data = vec![0.0; st.s];
        let mut scratch = Vec::new();
        real_plan(st.s).inverse(&st.u_hat, &mut data, &mut scratch);
        RealField::new(st.s, 1, 1, data).expect("grid-sized buffer")
    })
}
