//! The Koopman neural operator: a pointwise encoder lifts the input into a
//! latent observation space, each time step advances the latent state with a
//! per-mode linear operator on the lowest Fourier modes plus a pointwise
//! channel map, and a pointwise decoder maps back to the physical field.

mod network;
mod windows;

pub use network::{backward, decode, encode, forward, koopman_apply, kno_step, predict, Cotangents, Tape};
pub use windows::{build_hankel_windows, WindowSample};

use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Latent channel count (operator size).
    pub o: usize,
    /// Retained Fourier modes per axis.
    pub f: usize,
    /// Rollout length supervised during training.
    pub r_train: usize,
    /// Delay-embedding depth: input snapshots stacked as channels.
    pub m: usize,
    /// Number of cascaded spectral/complement units per time step.
    pub units: usize,
    /// Spatial dimension, 1 or 2.
    pub d: usize,
    /// Physical channels.
    pub c: usize,
    /// Appended coordinate channels: 0 or `d`.
    pub coord_channels: usize,
    #[serde(default = "enabled")]
    pub spectral_branch: bool,
    #[serde(default = "enabled")]
    pub conv_branch: bool,
}

fn enabled() -> bool {
    true
}

impl ModelConfig {
    pub fn new(d: usize, o: usize, f: usize, r_train: usize) -> Self {
        Self {
            o,
            f,
            r_train,
            m: 1,
            units: 1,
            d,
            c: 1,
            coord_channels: d,
            spectral_branch: true,
            conv_branch: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("o", self.o), ("f", self.f), ("r_train", self.r_train), ("m", self.m), ("units", self.units), ("c", self.c)];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidParameter(format!("model config field {name} must be >= 1")));
        }
        if self.d != 1 && self.d != 2 {
            return Err(Error::InvalidParameter(format!("spatial dimension {} not in {{1, 2}}", self.d)));
        }
        if self.coord_channels != 0 && self.coord_channels != self.d {
            return Err(Error::InvalidParameter("coord_channels must be 0 or d".into()));
        }
        Ok(())
    }

    /// Encoder input width: stacked snapshots plus coordinates.
    pub fn input_channels(&self) -> usize {
        self.m * self.c + self.coord_channels
    }

    /// Koopman matrices per unit: `f` in 1-D, the `2 f²` corner cells in 2-D.
    pub fn modes_retained(&self) -> usize {
        if self.d == 1 {
            self.f
        } else {
            2 * self.f * self.f
        }
    }

    /// Learnable scalars; complex weights count twice.
    pub fn count_parameters(&self) -> usize {
        let (o, c) = (self.o, self.c);
        let encoder = self.input_channels() * o + o;
        let koopman = if self.spectral_branch { self.modes_retained() * o * o * 2 } else { 0 };
        let conv = if self.conv_branch { o * o + o } else { 0 };
        let decoder = o * o + o + o * c + c;
        encoder + self.units * (koopman + conv) + decoder
    }
}

/// Parameters of one cascaded unit. Disabled branches hold empty tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitParams {
    /// `[mode][out][in]`.
    pub koopman: Vec<Complex64>,
    /// `[out][in]`.
    pub conv_w: Vec<f64>,
    pub conv_b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    /// `[o][input_channels]`.
    pub encoder_w: Vec<f64>,
    pub encoder_b: Vec<f64>,
    pub units: Vec<UnitParams>,
    /// `[o][o]`.
    pub decoder_w1: Vec<f64>,
    pub decoder_b1: Vec<f64>,
    /// `[c][o]`.
    pub decoder_w2: Vec<f64>,
    pub decoder_b2: Vec<f64>,
}

pub type Gradients = ModelParams;

/// Latent observables `[o][grid]`, channel-major like every field.
pub type LatentState = crate::spectral::RealField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Real,
    Complex,
}

/// Read-only view of one named parameter tensor.
#[derive(Debug, Clone)]
pub struct ParamView<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: ParamKind,
    /// Complex tensors are viewed as interleaved `(re, im)` pairs.
    pub data: &'a [f64],
}

impl ModelParams {
    pub fn zeros(config: &ModelConfig) -> Self {
        let (o, c, cin) = (config.o, config.c, config.input_channels());
        let unit = UnitParams {
            koopman: if config.spectral_branch {
                vec![Complex64::new(0.0, 0.0); config.modes_retained() * o * o]
            } else {
                Vec::new()
            },
            conv_w: if config.conv_branch { vec![0.0; o * o] } else { Vec::new() },
            conv_b: if config.conv_branch { vec![0.0; o] } else { Vec::new() },
        };
        Self {
            config: config.clone(),
            encoder_w: vec![0.0; o * cin],
            encoder_b: vec![0.0; o],
            units: vec![unit; config.units],
            decoder_w1: vec![0.0; o * o],
            decoder_b1: vec![0.0; o],
            decoder_w2: vec![0.0; c * o],
            decoder_b2: vec![0.0; c],
        }
    }

    /// Affine maps: `U(-1/√fan_in, 1/√fan_in)`. Koopman entries: real and
    /// imaginary parts `U(0, 1) / o`.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut p = Self::zeros(config);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let o = config.o;
        let fill = |v: &mut [f64], fan_in: usize, rng: &mut ChaCha20Rng| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            v.iter_mut().for_each(|x| *x = rng.random_range(-bound..bound));
        };
        let cin = config.input_channels();
        fill(&mut p.encoder_w, cin, &mut rng);
        fill(&mut p.encoder_b, cin, &mut rng);
        for unit in &mut p.units {
            for w in &mut unit.koopman {
                let re: f64 = rng.random();
                let im: f64 = rng.random();
                *w = Complex64::new(re, im) / o as f64;
            }
            fill(&mut unit.conv_w, o, &mut rng);
            fill(&mut unit.conv_b, o, &mut rng);
        }
        fill(&mut p.decoder_w1, o, &mut rng);
        fill(&mut p.decoder_b1, o, &mut rng);
        fill(&mut p.decoder_w2, o, &mut rng);
        fill(&mut p.decoder_b2, o, &mut rng);
        Ok(p)
    }

    /// Every tensor in canonical order with its name and shape.
    pub fn views(&self) -> Vec<ParamView<'_>> {
        let cfg = &self.config;
        let (o, c) = (cfg.o, cfg.c);
        let mut out = vec![
            real("encoder.weight".into(), vec![o, cfg.input_channels()], &self.encoder_w),
            real("encoder.bias".into(), vec![o], &self.encoder_b),
        ];
        for (u, unit) in self.units.iter().enumerate() {
            if cfg.spectral_branch {
                out.push(ParamView {
                    name: format!("unit{u}.koopman"),
                    shape: vec![cfg.modes_retained(), o, o],
                    kind: ParamKind::Complex,
                    data: bytemuck::cast_slice(&unit.koopman),
                });
            }
            if cfg.conv_branch {
                out.push(real(format!("unit{u}.conv.weight"), vec![o, o], &unit.conv_w));
                out.push(real(format!("unit{u}.conv.bias"), vec![o], &unit.conv_b));
            }
        }
        out.push(real("decoder.hidden.weight".into(), vec![o, o], &self.decoder_w1));
        out.push(real("decoder.hidden.bias".into(), vec![o], &self.decoder_b1));
        out.push(real("decoder.out.weight".into(), vec![c, o], &self.decoder_w2));
        out.push(real("decoder.out.bias".into(), vec![c], &self.decoder_b2));
        out
    }

    /// Mutable flat slices in the same order as [`ModelParams::views`].
    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let spectral = self.config.spectral_branch;
        let conv = self.config.conv_branch;
        let mut out: Vec<&mut [f64]> = vec![&mut self.encoder_w, &mut self.encoder_b];
        for unit in &mut self.units {
            if spectral {
                out.push(bytemuck::cast_slice_mut(&mut unit.koopman));
            }
            if conv {
                out.push(&mut unit.conv_w);
                out.push(&mut unit.conv_b);
            }
        }
        out.push(&mut self.decoder_w1);
        out.push(&mut self.decoder_b1);
        out.push(&mut self.decoder_w2);
        out.push(&mut self.decoder_b2);
        out
    }

    pub fn scalar_count(&self) -> usize {
        self.views().iter().map(|v| v.data.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.views().iter().all(|v| v.data.iter().all(|x| x.is_finite()))
    }

    /// Flattened copy of every scalar in canonical order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.views().iter().flat_map(|v| v.data.iter().copied()).collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.scalar_count() {
            return Err(Error::ShapeMismatch(format!(
                "flat parameter vector has {} entries, expected {}",
                flat.len(),
                self.scalar_count()
            )));
        }
        let mut offset = 0;
        for s in self.slices_mut() {
            s.copy_from_slice(&flat[offset..offset + s.len()]);
            offset += s.len();
        }
        Ok(())
    }

    /// `self += alpha * other`, for gradient accumulation.
    pub fn add_scaled(&mut self, other: &ModelParams, alpha: f64) {
        let src: Vec<&[f64]> = other.views().into_iter().map(|v| v.data).collect();
        for (dst, src) in self.slices_mut().into_iter().zip(src) {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += alpha * s);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|v| *v *= alpha);
        }
    }
}

fn real<'a>(name: String, shape: Vec<usize>, data: &'a [f64]) -> ParamView<'a> {
    ParamView {
        name,
        shape,
        kind: ParamKind::Real,
        data,
    }
}
