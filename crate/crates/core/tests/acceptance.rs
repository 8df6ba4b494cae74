//! End-to-end acceptance checks. Each test prints one PASS/FAIL line with the
//! measured quantities, then asserts. Tests share one lock so runtimes are
//! measured without competing for the CPU.

use kno::harness::{ablation, mesh_independence, median, zeroshot_length, ModelTemplate, Setting, Variant};
use kno::model::{backward, forward, kno_step, predict, ModelConfig, ModelParams};
use kno::pdegen::{build_dataset, burgers_solve, ns_vorticity_solve, Dataset, Forcing, PdeProblem};
use kno::persistence::{load_checkpoint, read_tensor, save_checkpoint, save_dataset};
use kno::spectral::{dft_oracle, fft_forward, fft_forward_truncated, fft_inverse, grf_sample, resample, GrfParams, RealField};
use kno::training::{evaluate, gradient_check, loss, loss_cotangents, train, Checkpoint, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

// criterion 1
const ORACLE_TOL: f64 = 1e-8;
const ROUND_TRIP_TOL: f64 = 1e-10;
const PARSEVAL_TOL: f64 = 1e-10;
const SPECTRAL_BUDGET: Duration = Duration::from_secs(10);
// criterion 2
const FULL_GRAD_TOL: f64 = 1e-3;
const LAYER_GRAD_TOL: f64 = 1e-4;
const GRAD_BUDGET: Duration = Duration::from_secs(120);
// criterion 3
const TAYLOR_GREEN_TOL: f64 = 1e-4;
const HEAT_DECAY_TOL: f64 = 1e-3;
const SELF_CONVERGENCE_TOL: f64 = 1e-6;
const PHYSICS_BUDGET: Duration = Duration::from_secs(300);
// criterion 4
const MESH_SPREAD_TOL: f64 = 1e-3;
const MESH_BUDGET: Duration = Duration::from_secs(20 * 60);
// criterion 5
const INVARIANCE_TOL: f64 = 1e-10;
const INVARIANCE_BUDGET: Duration = Duration::from_secs(60);
// criterion 6
const BURGERS_REL_L2_TARGET: f64 = 5e-2;
const BURGERS_MSE_IMPROVEMENT: f64 = 10.0;
const BURGERS_BUDGET: Duration = Duration::from_secs(30 * 60);

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(id: usize, name: &str, pass: bool, detail: &str) {
    // written past the test harness capture so the verdict shows in every run
    let line = format!("ACCEPTANCE {id} [{name}]: {} | {detail}\n", if pass { "PASS" } else { "FAIL" });
    std::io::stdout().lock().write_all(line.as_bytes()).unwrap();
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// 200 train / 40 test Burgers trajectories at s = 256, shared by the
/// learning and ablation checks.
fn burgers_256() -> &'static Dataset {
    static DATA: OnceLock<Dataset> = OnceLock::new();
    DATA.get_or_init(|| build_dataset(&PdeProblem::burgers_default(256), 200, 40, 0).expect("burgers dataset"))
}

fn burgers_template(o: usize, f: usize, r: usize) -> ModelTemplate {
    // Burgers is translation invariant; coordinate channels are left out
    ModelTemplate {
        m: 1,
        units: 1,
        coords: false,
        settings: vec![Setting { o, f, r }],
    }
}

fn burgers_train(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        lr: 3e-3,
        window_stride: 10,
        ..TrainConfig::default()
    }
}

#[test]
fn criterion_1_spectral_correctness() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let (mut oracle_err, mut trip_err, mut parseval_err) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..100 {
        let dim = 1 + i % 2;
        let s = 1usize << rng.random_range(2..=8);
        let n = s.pow(dim as u32);
        let field = RealField::new(s, dim, 1, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let fast = fft_forward(&field).unwrap();
        let slow = dft_oracle(&field).unwrap();
        for (a, b) in fast.coeffs().iter().zip(slow.coeffs()) {
            oracle_err = oracle_err.max((a - b).norm());
        }
        let back = fft_inverse(&fast, s).unwrap();
        for (a, b) in back.data().iter().zip(field.data()) {
            trip_err = trip_err.max((a - b).abs());
        }
        // half-spectrum Parseval: interior columns of the last axis count twice
        let hs = s / 2 + 1;
        let spectral: f64 = fast
            .coeffs()
            .iter()
            .enumerate()
            .map(|(idx, c)| {
                let k_last = idx % hs;
                let w = if k_last == 0 || k_last == s / 2 { 1.0 } else { 2.0 };
                w * c.norm_sqr()
            })
            .sum::<f64>()
            / n as f64;
        let physical: f64 = field.data().iter().map(|v| v * v).sum();
        parseval_err = parseval_err.max((spectral - physical).abs() / physical);
    }
    let elapsed = start.elapsed();
    let pass = oracle_err < ORACLE_TOL
        && trip_err < ROUND_TRIP_TOL
        && parseval_err < PARSEVAL_TOL
        && elapsed < SPECTRAL_BUDGET;
    verdict(
        1,
        "spectral correctness",
        pass,
        &format!(
            "100 fields; max oracle err {oracle_err:.2e} (< {ORACLE_TOL:e}), round trip {trip_err:.2e} (< {ROUND_TRIP_TOL:e}), \
             Parseval {parseval_err:.2e} (< {PARSEVAL_TOL:e}), {elapsed:.1?} (< {SPECTRAL_BUDGET:?})"
        ),
    );
}

/// Max relative finite-difference error per parameter tensor of the
/// `<cotangent, outputs>` functional for an `r`-step rollout.
fn tensor_errors(params: &ModelParams, input: &RealField, targets: &[RealField], r: usize) -> Vec<(String, f64)> {
    let objective = |p: &ModelParams| -> kno::Result<f64> {
        let (pred, rec, _) = forward(p, input, r)?;
        Ok(loss(&pred, &targets[..r], &rec, input, 0.5)?.total)
    };
    let (pred, rec, tape) = forward(params, input, r).unwrap();
    let cot = loss_cotangents(&pred, &targets[..r], &rec, input, 0.5).unwrap();
    let grads = backward(params, &tape, &cot).unwrap();
    let flat = params.to_flat();
    let gflat = grads.to_flat();
    let mut offset = 0;
    let mut out = Vec::new();
    for view in params.views() {
        let len = view.data.len();
        let range = offset..offset + len;
        let f = |sub: &[f64]| {
            let mut full = flat.clone();
            full[range.clone()].copy_from_slice(sub);
            let mut p = params.clone();
            p.set_flat(&full)?;
            objective(&p)
        };
        let report = gradient_check(f, &flat[range.clone()], &gflat[range.clone()], 1.0).unwrap();
        out.push((view.name.clone(), report.max_rel_error));
        offset += len;
    }
    out
}

#[test]
fn criterion_2_gradient_fidelity() {
    let _g = serial();
    let start = Instant::now();
    let (s, r) = (16, 2);
    let cfg = ModelConfig::new(1, 4, 3, r);
    let params = ModelParams::init(&cfg, 11).unwrap();
    let init = grf_sample(&GrfParams::burgers(5), s, 1).unwrap();
    let input = RealField::new(s, 1, 1, init.data().iter().map(|v| v / 0.3).collect()).unwrap();
    let targets: Vec<RealField> = (0..r as u64)
        .map(|k| {
            let g = grf_sample(&GrfParams::burgers(6 + k), s, 1).unwrap();
            RealField::new(s, 1, 1, g.data().iter().map(|v| v / 0.3).collect()).unwrap()
        })
        .collect();

    // full model: total loss over the r-step rollout, all scalars at once
    let x = params.to_flat();
    let f = |flat: &[f64]| {
        let mut p = params.clone();
        p.set_flat(flat)?;
        let (pred, rec, _) = forward(&p, &input, r)?;
        Ok(loss(&pred, &targets, &rec, &input, 0.5)?.total)
    };
    let (pred, rec, tape) = forward(&params, &input, r).unwrap();
    let cot = loss_cotangents(&pred, &targets, &rec, &input, 0.5).unwrap();
    let grad = backward(&params, &tape, &cot).unwrap().to_flat();
    let full = gradient_check(f, &x, &grad, FULL_GRAD_TOL).unwrap();

    // per layer: encoder and decoder through the reconstruction path alone,
    // spectral and complement weights through a single step
    let mut layer_worst = (String::new(), 0.0f64);
    for (rollout, prefixes) in [(0, &["encoder", "decoder"][..]), (1, &["unit0"][..])] {
        for (name, err) in tensor_errors(&params, &input, &targets, rollout) {
            if prefixes.iter().any(|p| name.starts_with(p)) && err >= layer_worst.1 {
                layer_worst = (name, err);
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = full.passed && layer_worst.1 < LAYER_GRAD_TOL && elapsed < GRAD_BUDGET;
    verdict(
        2,
        "gradient fidelity",
        pass,
        &format!(
            "s=16 o=4 f=3 r=2: full-model max rel err {:.2e} at coordinate {} (< {FULL_GRAD_TOL:e}); \
             worst per-layer {:.2e} in {} (< {LAYER_GRAD_TOL:e}); {elapsed:.1?}",
            full.max_rel_error, full.worst_index, layer_worst.1, layer_worst.0
        ),
    );
}

#[test]
fn criterion_3_solver_physics() {
    let _g = serial();
    let start = Instant::now();
    let mut details = Vec::new();
    let mut pass = true;

    for nu in [1e-3, 1e-4] {
        let p = PdeProblem {
            t_end: 1.0,
            dt_record: 1.0,
            forcing: Forcing::None,
            ..PdeProblem::navier_stokes_default(nu)
        };
        let init = RealField::from_fn(p.s, 2, |x| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos());
        let traj = ns_vorticity_solve(&p, &init).unwrap();
        let decay = (-8.0 * PI * PI * nu).exp();
        let expected: Vec<f64> = init.data().iter().map(|v| v * decay).collect();
        let err = rel_l2(traj.snapshots.last().unwrap().data(), &expected);
        pass &= err < TAYLOR_GREEN_TOL;
        details.push(format!("Taylor-Green nu={nu:e}: {err:.2e}"));
    }

    let p = PdeProblem::burgers_default(64);
    let init = RealField::from_fn(64, 1, |x| 1e-6 * (2.0 * PI * x[0]).sin());
    let traj = burgers_solve(&p, &init).unwrap();
    let amp = fft_forward(traj.snapshots.last().unwrap()).unwrap().coeffs()[1].norm() * 2.0 / 64.0;
    let heat = (amp / (1e-6 * (-0.1 * 4.0 * PI * PI).exp()) - 1.0).abs();
    pass &= heat < HEAT_DECAY_TOL;
    details.push(format!("Burgers heat decay: {heat:.2e}"));

    let halve = |p: &PdeProblem| PdeProblem {
        dt_internal: p.dt_internal / 2.0,
        ..p.clone()
    };
    let bp = PdeProblem::burgers_default(1024);
    let binit = grf_sample(&GrfParams::burgers(3), 1024, 1).unwrap();
    let coarse = burgers_solve(&bp, &binit).unwrap();
    let fine = burgers_solve(&halve(&bp), &binit).unwrap();
    let b_conv = rel_l2(coarse.snapshots.last().unwrap().data(), fine.snapshots.last().unwrap().data());
    pass &= b_conv < SELF_CONVERGENCE_TOL;
    details.push(format!("Burgers dt halving: {b_conv:.2e}"));

    let np = PdeProblem::navier_stokes_default(1e-3);
    let ninit = grf_sample(&GrfParams::navier_stokes(3), np.s, 2).unwrap();
    let coarse = ns_vorticity_solve(&np, &ninit).unwrap();
    let fine = ns_vorticity_solve(&halve(&np), &ninit).unwrap();
    let n_conv = rel_l2(coarse.snapshots.last().unwrap().data(), fine.snapshots.last().unwrap().data());
    pass &= n_conv < SELF_CONVERGENCE_TOL;
    details.push(format!("NS dt halving to t={}: {n_conv:.2e}", np.t_end));

    let elapsed = start.elapsed();
    pass &= elapsed < PHYSICS_BUDGET;
    details.push(format!("{elapsed:.1?}"));
    verdict(3, "solver physics", pass, &details.join("; "));
}

#[test]
fn criterion_4_mesh_independence() {
    let _g = serial();
    let start = Instant::now();
    let fine = build_dataset(&PdeProblem::burgers_default(2048), 24, 10, 500).unwrap();
    let rows = mesh_independence(&fine, &burgers_template(16, 10, 10), &burgers_train(20), 256, &[512, 1024, 2048]).unwrap();
    let row = &rows[0];
    let elapsed = start.elapsed();
    let mses: Vec<String> = row.scores.iter().map(|s| format!("{}: {:.6e}", s.resolution, s.mse)).collect();
    verdict(
        4,
        "mesh independence",
        row.spread < MESH_SPREAD_TOL && elapsed < MESH_BUDGET,
        &format!(
            "trained at 256; MSE {}; spread {:.2e} (< {MESH_SPREAD_TOL:e}); {elapsed:.1?}",
            mses.join(", "),
            row.spread
        ),
    );
}

#[test]
fn criterion_5_resolution_invariance() {
    let _g = serial();
    let start = Instant::now();
    let mut worst = 0.0f64;
    for dim in [1, 2] {
        // inputs carry modes below 3 while the model keeps 4; the encoder tanh
        // spreads energy upward, but only harmonics near s alias onto kept modes
        let (s, f) = (64usize, 4);
        let mut cfg = ModelConfig::new(dim, 6, f, 3);
        cfg.m = 2;
        cfg.coord_channels = 0;
        let params = ModelParams::init(&cfg, 21).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(dim as u64);
        let n = s.pow(dim as u32) * 2;
        let noise = RealField::new(s, dim, 2, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let coarse = fft_inverse(&fft_forward_truncated(&noise, 3).unwrap(), s).unwrap();
        let fine = resample(&coarse, 2 * s).unwrap();

        // a single latent step on a bandlimited state
        let mut lcfg = cfg.clone();
        lcfg.o = 2;
        let lparams = ModelParams::init(&lcfg, 3).unwrap();
        let a = kno_step(&lparams, &coarse, 0).unwrap();
        let b = kno_step(&lparams, &fine, 0).unwrap().downsample(2).unwrap();
        worst = worst.max(a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));

        // the full rollout
        let pc = predict(&params, &coarse, 3).unwrap();
        let pf = predict(&params, &fine, 3).unwrap();
        for (a, b) in pc.iter().zip(&pf) {
            let b = b.downsample(2).unwrap();
            worst = worst.max(a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
        }
    }
    let elapsed = start.elapsed();
    verdict(
        5,
        "resolution invariance",
        worst < INVARIANCE_TOL && elapsed < INVARIANCE_BUDGET,
        &format!("max |out(2s)|_s - out(s)| = {worst:.2e} (< {INVARIANCE_TOL:e}) over 1-D and 2-D; {elapsed:.1?}"),
    );
}

#[test]
fn criterion_6_burgers_learning() {
    let _g = serial();
    let start = Instant::now();
    let ds = burgers_256();
    let template = burgers_template(16, 10, 10);
    let mcfg = template.config(template.settings[0], 1, 1);
    let tcfg = burgers_train(100);
    let untrained = Checkpoint {
        params: ModelParams::init(&mcfg, tcfg.seed).unwrap(),
        train: tcfg.clone(),
        normalizer: ds.normalizer.clone(),
    };
    let before = evaluate(&untrained, &ds.test, 10).unwrap();
    let out = train(ds, &mcfg, &tcfg).unwrap();
    let after = evaluate(&out.checkpoint, &ds.test, 10).unwrap();
    let elapsed = start.elapsed();
    let improvement = before.mse / after.mse;
    verdict(
        6,
        "desk-scale Burgers learning",
        after.rel_l2 <= BURGERS_REL_L2_TARGET && improvement >= BURGERS_MSE_IMPROVEMENT && elapsed < BURGERS_BUDGET,
        &format!(
            "200/40 trajectories at 256, o=16 f=10 r=10, 100 epochs (best epoch {:?}): test rel L2 {:.3e} (<= {BURGERS_REL_L2_TARGET:e}); \
             MSE {:.3e} vs untrained {:.3e} ({improvement:.0}x, >= {BURGERS_MSE_IMPROVEMENT}x); {elapsed:.1?}",
            out.best_epoch, after.rel_l2, after.mse, before.mse
        ),
    );
}

#[test]
fn criterion_7_zeroshot_length_trend() {
    let _g = serial();
    let start = Instant::now();
    let problem = PdeProblem {
        dt_internal: 1e-2,
        ..PdeProblem::navier_stokes_default(1e-3)
    };
    let ds = build_dataset(&problem, 80, 20, 1000).unwrap();
    // inputs cover t in [0, 10]; training supervises (10, 30]; evaluation extends to (30, 50]
    let template = ModelTemplate {
        m: 11,
        units: 1,
        coords: true,
        settings: vec![Setting { o: 8, f: 8, r: 20 }],
    };
    let tcfg = TrainConfig {
        epochs: 30,
        lr: 3e-3,
        batch_size: 8,
        window_stride: 40,
        ..TrainConfig::default()
    };
    let rows = zeroshot_length(&ds, &template, &tcfg, 40).unwrap();
    let row = &rows[0];
    let elapsed = start.elapsed();
    verdict(
        7,
        "zero-shot length trend",
        row.prefix_consistent && row.extended_range_mse > row.supervised_range_mse,
        &format!(
            "NS nu=1e-3, 80/20 trajectories at 64x64; prefix identical: {}; mean step MSE (10,30] {:.3e}, (30,50] {:.3e}; {elapsed:.1?}",
            row.prefix_consistent, row.supervised_range_mse, row.extended_range_mse
        ),
    );
}

#[test]
fn criterion_8_ablation_direction() {
    let _g = serial();
    let start = Instant::now();
    let full = burgers_256();
    let ds = Dataset::from_parts(full.problem.clone(), full.train[..50].to_vec(), full.test[..20].to_vec()).unwrap();
    let rows = ablation(&ds, &burgers_template(16, 10, 10), &burgers_train(30), &[0, 1, 2]).unwrap();
    let full_median = rows.iter().find(|r| r.variant == Variant::Full).unwrap().median_mse;
    let pass = rows.iter().filter(|r| r.variant != Variant::Full).all(|r| r.median_mse >= full_median);
    let detail: Vec<String> = rows
        .iter()
        .map(|r| format!("{} {:.3e} {:?}", r.variant.name(), median(&r.mse), r.mse.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>()))
        .collect();
    let elapsed = start.elapsed();
    verdict(
        8,
        "ablation direction",
        pass,
        &format!("median test MSE over seeds 0,1,2 (50/20 trajectories, 30 epochs): {}; {elapsed:.1?}", detail.join("; ")),
    );
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

#[test]
fn criterion_9_reproducibility() {
    let _g = serial();
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut problem = PdeProblem::burgers_default(64);
    problem.t_end = 0.5;
    let mcfg = burgers_template(6, 6, 4).config(Setting { o: 6, f: 6, r: 4 }, 1, 1);
    let tcfg = TrainConfig {
        epochs: 4,
        batch_size: 4,
        window_stride: 3,
        seed: 9,
        ..TrainConfig::default()
    };
    let pipeline = |tag: &str| {
        let ds = build_dataset(&problem, 4, 2, 77).unwrap();
        let hash = save_dataset(&dir.path().join(format!("data_{tag}")), &ds).unwrap();
        let out = train(&ds, &mcfg, &tcfg).unwrap();
        let metrics = evaluate(&out.checkpoint, &ds.test, 6).unwrap();
        save_checkpoint(&dir.path().join(format!("ckpt_{tag}")), &out.checkpoint).unwrap();
        (hash, out, metrics)
    };
    let (hash_a, out_a, m_a) = pipeline("a");
    let (hash_b, out_b, m_b) = pipeline("b");
    let same_data = hash_a == hash_b;
    let same_params = bits(&out_a.checkpoint.params.to_flat()) == bits(&out_b.checkpoint.params.to_flat());
    let same_metrics = bits(&m_a.per_step_mse) == bits(&m_b.per_step_mse) && m_a.rel_l2.to_bits() == m_b.rel_l2.to_bits();
    let same_history = out_a.history == out_b.history;

    let mut same_files = true;
    let mut serialized = 0;
    for entry in std::fs::read_dir(dir.path().join("ckpt_a")).unwrap() {
        let path = entry.unwrap().path();
        let twin = dir.path().join("ckpt_b").join(path.file_name().unwrap());
        same_files &= std::fs::read(&path).unwrap() == std::fs::read(&twin).unwrap();
        if path.extension().is_some_and(|e| e == "knot") {
            serialized += read_tensor(&path).unwrap().scalars().len();
        }
    }
    let loaded = load_checkpoint(&dir.path().join("ckpt_a")).unwrap();
    let round_trip = bits(&loaded.params.to_flat()) == bits(&out_a.checkpoint.params.to_flat())
        && loaded.train == out_a.checkpoint.train
        && loaded.normalizer == out_a.checkpoint.normalizer;
    let reloaded = evaluate(&loaded, &build_dataset(&problem, 4, 2, 77).unwrap().test, 6).unwrap();
    let same_eval = bits(&reloaded.per_step_mse) == bits(&m_a.per_step_mse);
    let count_ok = serialized == mcfg.count_parameters();
    let elapsed = start.elapsed();
    verdict(
        9,
        "reproducibility",
        same_data && same_params && same_metrics && same_history && same_files && round_trip && same_eval && count_ok,
        &format!(
            "dataset hashes equal {same_data}; params bitwise {same_params}; history {same_history}; metrics bitwise {same_metrics}; \
             checkpoint files identical {same_files}; load round trip {round_trip}; reloaded eval bitwise {same_eval}; \
             serialized scalars {serialized} = count_parameters {}; {elapsed:.1?}",
            mcfg.count_parameters()
        ),
    );
}
