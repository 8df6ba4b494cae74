use super::{Gradients, ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::spectral::{fft_forward_truncated, fft_inverse, ComplexSpectrum, RealField};
use num_complex::Complex64;

/// `out[o][p] = Σ_i w[o][i] x[i][p] + b[o]` over `n` grid points.
fn affine(w: &[f64], b: &[f64], x: &[f64], n: usize) -> Vec<f64> {
    let outs = b.len();
    let ins = x.len() / n;
    let mut y = vec![0.0; outs * n];
    for (o, row) in y.chunks_exact_mut(n).enumerate() {
        row.fill(b[o]);
        for i in 0..ins {
            let wi = w[o * ins + i];
            if wi != 0.0 {
                row.iter_mut().zip(&x[i * n..(i + 1) * n]).for_each(|(r, xv)| *r += wi * xv);
            }
        }
    }
    y
}

/// Accumulates weight and bias gradients of [`affine`] and returns the input
/// gradient.
fn affine_backward(w: &[f64], x: &[f64], gy: &[f64], n: usize, gw: &mut [f64], gb: &mut [f64]) -> Vec<f64> {
    let outs = gb.len();
    let ins = x.len() / n;
    let mut gx = vec![0.0; ins * n];
    for o in 0..outs {
        let g = &gy[o * n..(o + 1) * n];
        gb[o] += g.iter().sum::<f64>();
        for i in 0..ins {
            let xi = &x[i * n..(i + 1) * n];
            gw[o * ins + i] += g.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>();
            let wi = w[o * ins + i];
            gx[i * n..(i + 1) * n].iter_mut().zip(g).for_each(|(d, gv)| *d += wi * gv);
        }
    }
    gx
}

fn check_channels(field: &RealField, expected: usize, what: &str) -> Result<()> {
    if field.channels() != expected {
        return Err(Error::ShapeMismatch(format!(
            "{what} has {} channels, expected {expected}",
            field.channels()
        )));
    }
    Ok(())
}

fn with_coords(input: &RealField, cfg: &ModelConfig) -> Result<Vec<f64>> {
    check_channels(input, cfg.m * cfg.c, "model input")?;
    if input.dim() != cfg.d {
        return Err(Error::ShapeMismatch(format!(
            "model input is {}-D, model expects {}-D",
            input.dim(),
            cfg.d
        )));
    }
    let s = input.size();
    let n = input.points();
    let mut x = Vec::with_capacity(cfg.input_channels() * n);
    x.extend_from_slice(input.data());
    if cfg.coord_channels > 0 {
        if cfg.d == 1 {
            x.extend((0..n).map(|i| i as f64 / s as f64));
        } else {
            x.extend((0..n).map(|p| (p / s) as f64 / s as f64));
            x.extend((0..n).map(|p| (p % s) as f64 / s as f64));
        }
    }
    Ok(x)
}

/// Lifts the stacked input snapshots into the latent space.
pub fn encode(params: &ModelParams, input: &RealField) -> Result<RealField> {
    let x = with_coords(input, &params.config)?;
    encode_raw(params, &x, input)
}

fn encode_raw(params: &ModelParams, x: &[f64], like: &RealField) -> Result<RealField> {
    let mut z = affine(&params.encoder_w, &params.encoder_b, x, like.points());
    z.iter_mut().for_each(|v| *v = v.tanh());
    RealField::new(like.size(), like.dim(), params.config.o, z)
}

/// Applies the per-mode complex matrices `weights[j]` (`[mode][out][in]`) to a
/// truncated latent spectrum.
pub fn koopman_apply(spec: &ComplexSpectrum, weights: &[Complex64]) -> Result<ComplexSpectrum> {
    if !spec.is_truncated() {
        return Err(Error::ShapeMismatch("koopman layer needs a truncated spectrum".into()));
    }
    let modes = spec.per_channel();
    let o = spec.channels();
    if weights.len() != modes * o * o {
        return Err(Error::ShapeMismatch(format!(
            "koopman weights hold {} entries, spectrum needs {modes}x{o}x{o}",
            weights.len()
        )));
    }
    let x = spec.coeffs();
    let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
    for j in 0..modes {
        let k = &weights[j * o * o..(j + 1) * o * o];
        for oo in 0..o {
            let mut acc = Complex64::new(0.0, 0.0);
            for oi in 0..o {
                acc += k[oo * o + oi] * x[oi * modes + j];
            }
            y[oo * modes + j] = acc;
        }
    }
    ComplexSpectrum::new(spec.size(), spec.dim(), o, spec.modes(), y)
}

struct UnitTape {
    input: RealField,
    spec: Option<ComplexSpectrum>,
}

fn unit_forward(params: &ModelParams, u: usize, z: &RealField) -> Result<(RealField, Option<ComplexSpectrum>)> {
    let cfg = &params.config;
    let unit = &params.units[u];
    let n = z.points();
    let mut out = vec![0.0; cfg.o * n];
    let mut spec_in = None;
    if cfg.spectral_branch {
        if cfg.f > z.size() / 2 {
            return Err(Error::ModesExceedNyquist { modes: cfg.f, size: z.size() });
        }
        let x = fft_forward_truncated(z, cfg.f)?;
        let y = koopman_apply(&x, &unit.koopman)?;
        out = fft_inverse(&y, z.size())?.into_data();
        spec_in = Some(x);
    }
    if cfg.conv_branch {
        let c = affine(&unit.conv_w, &unit.conv_b, z.data(), n);
        out.iter_mut().zip(c).for_each(|(a, b)| *a += b);
    }
    Ok((RealField::new(z.size(), z.dim(), cfg.o, out)?, spec_in))
}

/// One pass of unit `unit`: spectral branch plus pointwise complement.
pub fn kno_step(params: &ModelParams, state: &RealField, unit: usize) -> Result<RealField> {
    check_channels(state, params.config.o, "latent state")?;
    if unit >= params.units.len() {
        return Err(Error::InvalidParameter(format!("unit index {unit} out of range")));
    }
    Ok(unit_forward(params, unit, state)?.0)
}

fn decode_hidden(params: &ModelParams, z: &RealField) -> (Vec<f64>, RealField) {
    let n = z.points();
    let mut h = affine(&params.decoder_w1, &params.decoder_b1, z.data(), n);
    h.iter_mut().for_each(|v| *v = v.tanh());
    let y = affine(&params.decoder_w2, &params.decoder_b2, &h, n);
    let field = RealField::new(z.size(), z.dim(), params.config.c, y).expect("decoder output shape");
    (h, field)
}

/// Maps a latent state back to physical channels.
pub fn decode(params: &ModelParams, state: &RealField) -> Result<RealField> {
    check_channels(state, params.config.o, "latent state")?;
    Ok(decode_hidden(params, state).1)
}

/// Intermediates retained by [`forward`] for [`backward`].
pub struct Tape {
    input: Vec<f64>,
    z0: RealField,
    /// `steps[j][u]` is unit `u`'s record during step `j + 1`.
    steps: Vec<Vec<UnitTape>>,
    /// Decoder hidden activations: index 0 for the reconstruction, `j` for
    /// prediction `j`.
    hidden: Vec<Vec<f64>>,
    latents: Vec<RealField>,
}

impl Tape {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }
}

/// Loss gradients with respect to the forward outputs.
#[derive(Debug, Clone)]
pub struct Cotangents {
    pub predictions: Vec<RealField>,
    pub reconstruction: RealField,
}

fn rollout(
    params: &ModelParams,
    input: &RealField,
    r_pred: usize,
    record: bool,
) -> Result<(Vec<RealField>, RealField, Option<Tape>)> {
    let cfg = &params.config;
    let x = with_coords(input, cfg)?;
    let z0 = encode_raw(params, &x, input)?;
    let (h0, reconstruction) = decode_hidden(params, &z0);
    let mut hidden = vec![h0];
    let mut steps = Vec::with_capacity(r_pred);
    let mut latents = Vec::with_capacity(r_pred);
    let mut predictions = Vec::with_capacity(r_pred);
    let mut z = z0.clone();
    for _ in 0..r_pred {
        let mut units = Vec::with_capacity(cfg.units);
        for u in 0..cfg.units {
            let (next, spec) = unit_forward(params, u, &z)?;
            if record {
                units.push(UnitTape { input: z, spec });
            }
            z = next;
        }
        let (h, y) = decode_hidden(params, &z);
        if record {
            steps.push(units);
            hidden.push(h);
            latents.push(z.clone());
        }
        predictions.push(y);
    }
    let tape = record.then(|| Tape {
        input: x,
        z0,
        steps,
        hidden,
        latents,
    });
    Ok((predictions, reconstruction, tape))
}

/// Encodes, advances the latent state `r_pred` times and decodes every step.
/// Returns the predictions, the reconstruction of the newest input snapshot
/// and the tape for [`backward`].
pub fn forward(params: &ModelParams, input: &RealField, r_pred: usize) -> Result<(Vec<RealField>, RealField, Tape)> {
    let (p, r, t) = rollout(params, input, r_pred, true)?;
    Ok((p, r, t.expect("tape recorded")))
}

/// [`forward`] without recording intermediates.
pub fn predict(params: &ModelParams, input: &RealField, r_pred: usize) -> Result<Vec<RealField>> {
    Ok(rollout(params, input, r_pred, false)?.0)
}

fn decode_backward(params: &ModelParams, z: &RealField, h: &[f64], gy: &RealField, grads: &mut Gradients) -> Vec<f64> {
    let n = z.points();
    let mut gh = affine_backward(&params.decoder_w2, h, gy.data(), n, &mut grads.decoder_w2, &mut grads.decoder_b2);
    gh.iter_mut().zip(h).for_each(|(g, hv)| *g *= 1.0 - hv * hv);
    affine_backward(&params.decoder_w1, z.data(), &gh, n, &mut grads.decoder_w1, &mut grads.decoder_b1)
}

fn unit_backward(params: &ModelParams, u: usize, tape: &UnitTape, g_out: &[f64], grads: &mut Gradients) -> Result<Vec<f64>> {
    let cfg = &params.config;
    let z = &tape.input;
    let n = z.points();
    let mut g_in = vec![0.0; g_out.len()];
    if cfg.conv_branch {
        let unit = &mut grads.units[u];
        g_in = affine_backward(&params.units[u].conv_w, z.data(), g_out, n, &mut unit.conv_w, &mut unit.conv_b);
    }
    if let Some(x) = &tape.spec {
        let (s, dim, o) = (z.size(), z.dim(), cfg.o);
        let modes = x.per_channel();
        let last_axis_zero = |j: usize| if dim == 1 { j == 0 } else { j % cfg.f == 0 };
        // adjoint of the real-part inverse: weight 1/N for self-conjugate columns, 2/N otherwise
        let g_field = RealField::new(s, dim, o, g_out.to_vec())?;
        let mut gy = fft_forward_truncated(&g_field, cfg.f)?.coeffs().to_vec();
        let norm = 1.0 / n as f64;
        for oo in 0..o {
            for j in 0..modes {
                let w = if last_axis_zero(j) { norm } else { 2.0 * norm };
                gy[oo * modes + j] *= w;
            }
        }
        let k = &params.units[u].koopman;
        let gk = &mut grads.units[u].koopman;
        let xs = x.coeffs();
        let mut gx = vec![Complex64::new(0.0, 0.0); xs.len()];
        for j in 0..modes {
            let base = j * o * o;
            for oo in 0..o {
                let g = gy[oo * modes + j];
                for oi in 0..o {
                    gk[base + oo * o + oi] += g * xs[oi * modes + j].conj();
                    gx[oi * modes + j] += k[base + oo * o + oi].conj() * g;
                }
            }
        }
        // adjoint of the forward transform: Re Σ gX e^{iθ}, expressed through the normalized inverse
        for oi in 0..o {
            for j in 0..modes {
                let w = if last_axis_zero(j) { n as f64 } else { n as f64 / 2.0 };
                gx[oi * modes + j] *= w;
            }
        }
        let back = fft_inverse(&ComplexSpectrum::new(s, dim, o, cfg.f, gx)?, s)?;
        g_in.iter_mut().zip(back.data()).for_each(|(a, b)| *a += b);
    }
    Ok(g_in)
}

/// Reverse-mode gradients of `<cotangents, forward outputs>`. Koopman weight
/// gradients are `∂/∂Re + i ∂/∂Im`.
pub fn backward(params: &ModelParams, tape: &Tape, cot: &Cotangents) -> Result<Gradients> {
    let cfg = &params.config;
    let r = tape.horizon();
    if cot.predictions.len() != r {
        return Err(Error::ShapeMismatch(format!(
            "{} prediction cotangents for a rollout of {r}",
            cot.predictions.len()
        )));
    }
    let like = &tape.z0;
    for g in cot.predictions.iter().chain(std::iter::once(&cot.reconstruction)) {
        if g.size() != like.size() || g.dim() != like.dim() || g.channels() != cfg.c {
            return Err(Error::ShapeMismatch("cotangent shape does not match the forward outputs".into()));
        }
    }
    let mut grads = ModelParams::zeros(cfg);
    let mut g = vec![0.0; cfg.o * like.points()];
    for j in (1..=r).rev() {
        let gd = decode_backward(params, &tape.latents[j - 1], &tape.hidden[j], &cot.predictions[j - 1], &mut grads);
        g.iter_mut().zip(gd).for_each(|(a, b)| *a += b);
        for u in (0..cfg.units).rev() {
            g = unit_backward(params, u, &tape.steps[j - 1][u], &g, &mut grads)?;
        }
    }
    let gd = decode_backward(params, &tape.z0, &tape.hidden[0], &cot.reconstruction, &mut grads);
    g.iter_mut().zip(gd).for_each(|(a, b)| *a += b);
    g.iter_mut().zip(tape.z0.data()).for_each(|(a, z)| *a *= 1.0 - z * z);
    let n = like.points();
    affine_backward(&params.encoder_w, &tape.input, &g, n, &mut grads.encoder_w, &mut grads.encoder_b);
    Ok(grads)
}
