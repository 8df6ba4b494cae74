//! Iterative radix-2 kernels and cached plans.
//!
//! Real transforms of length `n` run through a complex transform of length
//! `n / 2` with the usual even/odd packing.

use num_complex::Complex64;
use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::rc::Rc;

pub(crate) struct ComplexPlan {
    n: usize,
    /// `exp(-2πik/n)` for `k < n/2`.
    twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl ComplexPlan {
    fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two());
        let twiddles = (0..n / 2)
            .map(|k| {
                let (s, c) = (-2.0 * PI * k as f64 / n as f64).sin_cos();
                Complex64::new(c, s)
            })
            .collect();
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        Self { n, twiddles, bitrev }
    }

    /// Unnormalized in-place transform; `inverse` flips the exponent sign.
    pub(crate) fn process(&self, a: &mut [Complex64], inverse: bool) {
        let n = self.n;
        debug_assert_eq!(a.len(), n);
        for i in 0..n {
            let j = self.bitrev[i];
            if j > i {
                a.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            for start in (0..n).step_by(len) {
                let (lo, hi) = a[start..start + len].split_at_mut(half);
                for j in 0..half {
                    let mut w = self.twiddles[j * step];
                    if inverse {
                        w = w.conj();
                    }
                    let u = lo[j];
                    let v = hi[j] * w;
                    lo[j] = u + v;
                    hi[j] = u - v;
                }
            }
            len *= 2;
        }
    }
}

pub(crate) struct RealPlan {
    n: usize,
    half: Rc<ComplexPlan>,
    /// `exp(-2πik/n)` for `k <= n/2`.
    w: Vec<Complex64>,
}

impl RealPlan {
    fn new(n: usize, half: Rc<ComplexPlan>) -> Self {
        let w = (0..=n / 2)
            .map(|k| {
                let (s, c) = (-2.0 * PI * k as f64 / n as f64).sin_cos();
                Complex64::new(c, s)
            })
            .collect();
        Self { n, half, w }
    }

    /// Unnormalized forward transform, `out.len() == n/2 + 1`.
    pub(crate) fn forward(&self, x: &[f64], out: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        let m = self.n / 2;
        scratch.clear();
        scratch.extend((0..m).map(|j| Complex64::new(x[2 * j], x[2 * j + 1])));
        self.half.process(scratch, false);
        for k in 0..=m {
            let zk = scratch[k % m];
            let zc = scratch[(m - k) % m].conj();
            let even = (zk + zc) * 0.5;
            let diff = zk - zc;
            // odd = (zk - zc) / (2i)
            let odd = Complex64::new(diff.im * 0.5, -diff.re * 0.5);
            out[k] = even + self.w[k] * odd;
        }
    }

    /// Normalized inverse (1/n) of a half spectrum. Imaginary parts of the
    /// zero and Nyquist bins are ignored, which makes this the real part of
    /// the Hermitian-extended inverse.
    pub(crate) fn inverse(&self, spec: &[Complex64], out: &mut [f64], scratch: &mut Vec<Complex64>) {
        let m = self.n / 2;
        scratch.clear();
        for k in 0..m {
            let mut xk = spec[k];
            let mut xc = spec[m - k].conj();
            if k == 0 {
                xk.im = 0.0;
                xc.im = 0.0;
            }
            let even = (xk + xc) * 0.5;
            let odd = (xk - xc) * self.w[k].conj() * 0.5;
            // z = even + i * odd
            scratch.push(Complex64::new(even.re - odd.im, even.im + odd.re));
        }
        self.half.process(scratch, true);
        let scale = 1.0 / m as f64;
        for j in 0..m {
            out[2 * j] = scratch[j].re * scale;
            out[2 * j + 1] = scratch[j].im * scale;
        }
    }
}

thread_local! {
    static COMPLEX_PLANS: RefCell<HashMap<usize, Rc<ComplexPlan>>> = RefCell::new(HashMap::new());
    static REAL_PLANS: RefCell<HashMap<usize, Rc<RealPlan>>> = RefCell::new(HashMap::new());
}

pub(crate) fn complex_plan(n: usize) -> Rc<ComplexPlan> {
    COMPLEX_PLANS.with(|plans| {
        plans
            .borrow_mut()
            .entry(n)
            .or_insert_with(|| Rc::new(ComplexPlan::new(n)))
            .clone()
    })
}

pub(crate) fn real_plan(n: usize) -> Rc<RealPlan> {
    if let Some(p) = REAL_PLANS.with(|plans| plans.borrow().get(&n).cloned()) {
        return p;
    }
    let plan = Rc::new(RealPlan::new(n, complex_plan(n / 2)));
    REAL_PLANS.with(|plans| plans.borrow_mut().insert(n, plan.clone()));
    plan
}
