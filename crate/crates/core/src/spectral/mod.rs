//! Fourier transforms on the periodic unit torus, mode truncation and
//! Gaussian random field sampling.
//!
//! Conventions: the forward transform is unnormalized, the inverse carries the
//! `1/N` factor (`N` = total number of grid points). The last spatial axis is
//! stored as a half spectrum (`0..=s/2`); in 2-D the first axis keeps the full
//! frequency range. Truncation to `f` modes keeps `0..f` on the half axis and,
//! in 2-D, the two corner blocks `0..f` and `s-f..s` on the full axis, stored
//! as `[2f][f]` with the negative-frequency block last.

mod fft;
mod grf;

pub use grf::{grf_pointwise_variance, grf_sample, GrfParams};

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

pub(crate) use fft::{complex_plan, real_plan};

/// Real samples on a uniform periodic grid, channel-major: `[channel][spatial]`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RealField {
    s: usize,
    dim: usize,
    channels: usize,
    data: Vec<f64>,
}

impl RealField {
    pub fn new(s: usize, dim: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        if channels == 0 {
            return Err(Error::InvalidParameter("field needs at least one channel".into()));
        }
        let expected = channels * s.pow(dim as u32);
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "field data has {} values, expected {expected}",
                data.len()
            )));
        }
        Ok(Self { s, dim, channels, data })
    }

    pub fn zeros(s: usize, dim: usize, channels: usize) -> Self {
        Self {
            s,
            dim,
            channels,
            data: vec![0.0; channels * s.pow(dim as u32)],
        }
    }

    /// Samples `f` at the grid points `i/s` (1-D) or `(i/s, j/s)` (2-D).
    pub fn from_fn(s: usize, dim: usize, f: impl Fn(&[f64]) -> f64) -> Self {
        let h = 1.0 / s as f64;
        let data = match dim {
            1 => (0..s).map(|i| f(&[i as f64 * h])).collect(),
            _ => (0..s * s)
                .map(|idx| f(&[(idx / s) as f64 * h, (idx % s) as f64 * h]))
                .collect(),
        };
        Self { s, dim, channels: 1, data }
    }

    pub fn size(&self) -> usize {
        self.s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Grid points per channel.
    pub fn points(&self) -> usize {
        self.s.pow(self.dim as u32)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.points();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.points();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Strided subsampling: every `factor`-th point along each axis.
    pub fn downsample(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.s % factor != 0 {
            return Err(Error::InvalidParameter(format!(
                "downsample factor {factor} does not divide grid size {}",
                self.s
            )));
        }
        let s = self.s / factor;
        let mut data = Vec::with_capacity(self.channels * s.pow(self.dim as u32));
        for c in 0..self.channels {
            let src = self.channel(c);
            match self.dim {
                1 => data.extend((0..s).map(|i| src[i * factor])),
                _ => {
                    for i in 0..s {
                        let row = i * factor * self.s;
                        data.extend((0..s).map(|j| src[row + j * factor]));
                    }
                }
            }
        }
        Ok(Self {
            s,
            dim: self.dim,
            channels: self.channels,
            data,
        })
    }
}

/// Fourier coefficients of a multi-channel real field, `[channel][modes...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    s: usize,
    dim: usize,
    channels: usize,
    /// Retained modes per axis; 0 means the untruncated layout.
    modes: usize,
    coeffs: Vec<Complex64>,
}

impl ComplexSpectrum {
    pub fn new(s: usize, dim: usize, channels: usize, modes: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        check_dim(dim)?;
        check_size(s)?;
        if modes > s / 2 {
            return Err(Error::ModesExceedNyquist { modes, size: s });
        }
        let expected = channels * coeffs_per_channel(s, dim, modes);
        if coeffs.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "spectrum has {} coefficients, expected {expected}",
                coeffs.len()
            )));
        }
        Ok(Self { s, dim, channels, modes, coeffs })
    }

    pub fn zeros(s: usize, dim: usize, channels: usize, modes: usize) -> Self {
        Self {
            s,
            dim,
            channels,
            modes,
            coeffs: vec![Complex64::new(0.0, 0.0); channels * coeffs_per_channel(s, dim, modes)],
        }
    }

    pub fn size(&self) -> usize {
        self.s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn is_truncated(&self) -> bool {
        self.modes > 0
    }

    pub fn per_channel(&self) -> usize {
        coeffs_per_channel(self.s, self.dim, self.modes)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn channel(&self, c: usize) -> &[Complex64] {
        let n = self.per_channel();
        &self.coeffs[c * n..(c + 1) * n]
    }

    /// Coefficient at signed frequency `k` (1-D) or `(k1, k2)` with `k2 >= 0`
    /// (2-D). Returns `None` when the frequency is not stored.
    pub fn get(&self, channel: usize, k: &[i64]) -> Option<Complex64> {
        let idx = self.index_of(k)?;
        Some(self.coeffs[channel * self.per_channel() + idx])
    }

    fn index_of(&self, k: &[i64]) -> Option<usize> {
        let s = self.s as i64;
        let half = s / 2;
        match (self.dim, self.modes) {
            (1, 0) => (0..=half).contains(&k[0]).then_some(k[0] as usize),
            (1, f) => (0..f as i64).contains(&k[0]).then_some(k[0] as usize),
            (_, 0) => {
                if !(0..=half).contains(&k[1]) || k[0] <= -s || k[0] >= s {
                    return None;
                }
                let row = k[0].rem_euclid(s) as usize;
                Some(row * (self.s / 2 + 1) + k[1] as usize)
            }
            (_, f) => {
                let f = f as i64;
                if !(0..f).contains(&k[1]) {
                    return None;
                }
                let row = if (0..f).contains(&k[0]) {
                    k[0]
                } else if (-f..0).contains(&k[0]) {
                    k[0] + 2 * f
                } else {
                    return None;
                };
                Some(row as usize * f as usize + k[1] as usize)
            }
        }
    }
}

pub(crate) fn coeffs_per_channel(s: usize, dim: usize, modes: usize) -> usize {
    match (dim, modes) {
        (1, 0) => s / 2 + 1,
        (1, f) => f,
        (_, 0) => s * (s / 2 + 1),
        (_, f) => 2 * f * f,
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("spatial dimension {dim} not in {{1, 2}}")))
    }
}

pub fn check_size(s: usize) -> Result<()> {
    if s >= 4 && s.is_power_of_two() {
        Ok(())
    } else {
        Err(Error::UnsupportedGridSize(s))
    }
}

/// Unnormalized forward transform over every spatial axis.
pub fn fft_forward(field: &RealField) -> Result<ComplexSpectrum> {
    forward_impl(field, None)
}

/// Forward transform restricted to the retained corner modes; equal to
/// `truncate_modes(fft_forward(field), f)` but skips unused column transforms.
pub fn fft_forward_truncated(field: &RealField, f: usize) -> Result<ComplexSpectrum> {
    if f == 0 {
        return Err(Error::InvalidParameter("retained mode count must be >= 1".into()));
    }
    forward_impl(field, Some(f))
}

fn forward_impl(field: &RealField, trunc: Option<usize>) -> Result<ComplexSpectrum> {
    let s = field.s;
    check_size(s)?;
    if let Some(f) = trunc {
        if f > s / 2 {
            return Err(Error::ModesExceedNyquist { modes: f, size: s });
        }
    }
    let modes = trunc.unwrap_or(0);
    let per = coeffs_per_channel(s, field.dim, modes);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); field.channels * per];
    let rplan = real_plan(s);
    let hs = s / 2 + 1;
    let mut scratch = Vec::with_capacity(s);
    match field.dim {
        1 => {
            let mut row = vec![Complex64::new(0.0, 0.0); hs];
            for c in 0..field.channels {
                rplan.forward(field.channel(c), &mut row, &mut scratch);
                coeffs[c * per..(c + 1) * per].copy_from_slice(&row[..per]);
            }
        }
        _ => {
            let cplan = complex_plan(s);
            let cols = trunc.unwrap_or(hs);
            let mut rows = vec![Complex64::new(0.0, 0.0); s * hs];
            let mut col = vec![Complex64::new(0.0, 0.0); s];
            for c in 0..field.channels {
                let src = field.channel(c);
                for i in 0..s {
                    rplan.forward(&src[i * s..(i + 1) * s], &mut rows[i * hs..(i + 1) * hs], &mut scratch);
                }
                let dst = &mut coeffs[c * per..(c + 1) * per];
                for k2 in 0..cols {
                    for i in 0..s {
                        col[i] = rows[i * hs + k2];
                    }
                    cplan.process(&mut col, false);
                    match trunc {
                        None => {
                            for i in 0..s {
                                dst[i * hs + k2] = col[i];
                            }
                        }
                        Some(f) => {
                            for r in 0..f {
                                dst[r * f + k2] = col[r];
                                dst[(f + r) * f + k2] = col[s - f + r];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(ComplexSpectrum {
        s,
        dim: field.dim,
        channels: field.channels,
        modes,
        coeffs,
    })
}

/// Normalized inverse transform onto a grid of size `s`. Truncated spectra are
/// zero-filled first; only the real part of the Hermitian extension is kept.
pub fn fft_inverse(spec: &ComplexSpectrum, s: usize) -> Result<RealField> {
    check_size(s)?;
    if spec.modes > s / 2 {
        return Err(Error::ModesExceedNyquist { modes: spec.modes, size: s });
    }
    if spec.modes == 0 && spec.s != s {
        return Err(Error::ShapeMismatch(format!(
            "untruncated spectrum of size {} cannot be inverted onto grid {s}",
            spec.s
        )));
    }
    let dim = spec.dim;
    let n = s.pow(dim as u32);
    let mut data = vec![0.0; spec.channels * n];
    let rplan = real_plan(s);
    let hs = s / 2 + 1;
    let per = spec.per_channel();
    let mut scratch = Vec::with_capacity(s);
    match dim {
        1 => {
            let mut row = vec![Complex64::new(0.0, 0.0); hs];
            for c in 0..spec.channels {
                let src = &spec.coeffs[c * per..(c + 1) * per];
                row.fill(Complex64::new(0.0, 0.0));
                row[..per].copy_from_slice(src);
                rplan.inverse(&row, &mut data[c * n..(c + 1) * n], &mut scratch);
            }
        }
        _ => {
            let cplan = complex_plan(s);
            let cols = if spec.modes > 0 { spec.modes } else { hs };
            let mut rows = vec![Complex64::new(0.0, 0.0); s * hs];
            let mut col = vec![Complex64::new(0.0, 0.0); s];
            let scale = 1.0 / s as f64;
            for c in 0..spec.channels {
                let src = &spec.coeffs[c * per..(c + 1) * per];
                rows.fill(Complex64::new(0.0, 0.0));
                for k2 in 0..cols {
                    col.fill(Complex64::new(0.0, 0.0));
                    if spec.modes == 0 {
                        for i in 0..s {
                            col[i] = src[i * hs + k2];
                        }
                    } else {
                        let f = spec.modes;
                        for r in 0..f {
                            col[r] = src[r * f + k2];
                            // when f == s/2 both blocks are disjoint and cover the axis
                            col[s - f + r] += src[(f + r) * f + k2];
                        }
                    }
                    cplan.process(&mut col, true);
                    for i in 0..s {
                        rows[i * hs + k2] = col[i] * scale;
                    }
                }
                let dst = &mut data[c * n..(c + 1) * n];
                for i in 0..s {
                    rplan.inverse(&rows[i * hs..(i + 1) * hs], &mut dst[i * s..(i + 1) * s], &mut scratch);
                }
            }
        }
    }
    if spec.s != s {
        // coefficients carry the normalization of the grid they came from
        let ratio = (s as f64 / spec.s as f64).powi(dim as i32);
        data.iter_mut().for_each(|v| *v *= ratio);
    }
    Ok(RealField {
        s,
        dim,
        channels: spec.channels,
        data,
    })
}

/// Keeps the lowest `f` frequencies per axis (corner rule in 2-D).
pub fn truncate_modes(spec: &ComplexSpectrum, f: usize) -> Result<ComplexSpectrum> {
    if f == 0 {
        return Err(Error::InvalidParameter("retained mode count must be >= 1".into()));
    }
    if f > spec.s / 2 {
        return Err(Error::ModesExceedNyquist { modes: f, size: spec.s });
    }
    if spec.modes > 0 && f > spec.modes {
        return Err(Error::InvalidParameter(format!(
            "cannot widen a spectrum truncated at {} to {f} modes",
            spec.modes
        )));
    }
    let per_out = coeffs_per_channel(spec.s, spec.dim, f);
    let mut coeffs = Vec::with_capacity(spec.channels * per_out);
    for c in 0..spec.channels {
        let src = spec.channel(c);
        match spec.dim {
            1 => coeffs.extend_from_slice(&src[..f]),
            _ => {
                let lookup = |k1: i64, k2: i64| spec.index_of(&[k1, k2]).map(|i| src[i]).unwrap();
                for r in 0..2 * f {
                    let k1 = if r < f { r as i64 } else { r as i64 - 2 * f as i64 };
                    coeffs.extend((0..f).map(|k2| lookup(k1, k2 as i64)));
                }
            }
        }
    }
    Ok(ComplexSpectrum {
        s: spec.s,
        dim: spec.dim,
        channels: spec.channels,
        modes: f,
        coeffs,
    })
}

/// Zero-fills a truncated spectrum into the full layout of grid size `s`.
/// Coefficients are rescaled by `(s / s_orig)^d` so the padded spectrum is the
/// unnormalized transform of the band-limited interpolant on the new grid.
pub fn pad_modes(spec: &ComplexSpectrum, s: usize) -> Result<ComplexSpectrum> {
    check_size(s)?;
    if spec.modes == 0 {
        if spec.s == s {
            return Ok(spec.clone());
        }
        return Err(Error::InvalidParameter(
            "only truncated spectra can be padded to a new grid size".into(),
        ));
    }
    let f = spec.modes;
    if f > s / 2 {
        return Err(Error::ModesExceedNyquist { modes: f, size: s });
    }
    let mut out = ComplexSpectrum::zeros(s, spec.dim, spec.channels, 0);
    let per_out = out.per_channel();
    let ratio = (s as f64 / spec.s as f64).powi(spec.dim as i32);
    for c in 0..spec.channels {
        let src = spec.channel(c);
        let dst = &mut out.coeffs[c * per_out..(c + 1) * per_out];
        match spec.dim {
            1 => dst[..f].iter_mut().zip(src).for_each(|(d, v)| *d = v * ratio),
            _ => {
                let hs = s / 2 + 1;
                for r in 0..2 * f {
                    let row = if r < f { r } else { s - 2 * f + r };
                    for k2 in 0..f {
                        dst[row * hs + k2] += src[r * f + k2] * ratio;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Direct-summation DFT with the same layout and normalization as
/// [`fft_forward`]. 2-D transforms are evaluated one axis at a time.
pub fn dft_oracle(field: &RealField) -> Result<ComplexSpectrum> {
    let s = field.s;
    if s > 256 {
        return Err(Error::OracleSizeGuard(s));
    }
    check_size(s)?;
    let hs = s / 2 + 1;
    let root = |k: usize, n: usize| {
        let (sn, cs) = (-2.0 * PI * ((k * n) % s) as f64 / s as f64).sin_cos();
        Complex64::new(cs, sn)
    };
    let per = coeffs_per_channel(s, field.dim, 0);
    let mut coeffs = Vec::with_capacity(field.channels * per);
    for c in 0..field.channels {
        let x = field.channel(c);
        match field.dim {
            1 => {
                for k in 0..hs {
                    coeffs.push((0..s).map(|n| root(k, n) * x[n]).sum());
                }
            }
            _ => {
                let mut rows = vec![Complex64::new(0.0, 0.0); s * hs];
                for i in 0..s {
                    for k2 in 0..hs {
                        rows[i * hs + k2] = (0..s).map(|n| root(k2, n) * x[i * s + n]).sum();
                    }
                }
                for k1 in 0..s {
                    for k2 in 0..hs {
                        coeffs.push((0..s).map(|i| root(k1, i) * rows[i * hs + k2]).sum());
                    }
                }
            }
        }
    }
    Ok(ComplexSpectrum {
        s,
        dim: field.dim,
        channels: field.channels,
        modes: 0,
        coeffs,
    })
}

/// Band-limited resampling to grid size `s` (zero-padding or truncating the
/// spectrum). Requires the input to carry no energy at or above the target
/// Nyquist frequency for an exact result.
pub fn resample(field: &RealField, s: usize) -> Result<RealField> {
    check_size(s)?;
    let f = (field.s.min(s)) / 2;
    let spec = fft_forward_truncated(field, f)?;
    fft_inverse(&spec, s)
}
