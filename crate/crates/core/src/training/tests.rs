use super::trainer::train;
use super::*;
use crate::model::{backward, forward, predict, ModelConfig, ModelParams};
use crate::pdegen::{build_dataset, Dataset, PdeProblem};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn field(values: &[f64]) -> RealField {
    RealField::new(values.len(), 1, 1, values.to_vec()).unwrap()
}

fn random_field(s: usize, dim: usize, channels: usize, seed: u64) -> RealField {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = s.pow(dim as u32) * channels;
    RealField::new(s, dim, channels, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn tiny_dataset() -> Dataset {
    build_dataset(&PdeProblem::burgers_default(32), 2, 1, 0).unwrap()
}

fn tiny_model() -> ModelConfig {
    let mut cfg = ModelConfig::new(1, 4, 4, 3);
    cfg.coord_channels = 0;
    cfg
}

fn quick_train() -> TrainConfig {
    TrainConfig {
        epochs: 20,
        batch_size: 4,
        lr: 1e-2,
        window_stride: 2,
        seed: 3,
        ..TrainConfig::default()
    }
}

#[test]
fn loss_hand_case() {
    let single = |v: f64| RealField::new(4, 1, 1, vec![v; 4]).unwrap();
    let l = loss(&[single(2.0)], &[single(0.0)], &single(1.0), &single(0.0), 0.5).unwrap();
    assert_eq!(l.pred_loss, 4.0);
    assert_eq!(l.recon_loss, 1.0);
    assert_eq!(l.total, 4.5);
}

#[test]
fn loss_zero_on_exact_outputs_and_lambda_zero() {
    let t = vec![field(&[1.0, 2.0, 3.0, 4.0]), field(&[0.5, 0.0, -1.0, 2.0])];
    let x = field(&[3.0, 1.0, 4.0, 1.0]);
    assert_eq!(loss(&t, &t, &x, &x, 0.7).unwrap().total, 0.0);
    let off = field(&[9.0, 9.0, 9.0, 9.0]);
    let l = loss(&t, &t, &off, &x, 0.0).unwrap();
    assert_eq!(l.total, l.pred_loss);
    assert!(l.recon_loss > 0.0);
    assert!(loss(&t, &t[..1], &x, &x, 0.5).is_err());
}

#[test]
fn loss_cotangents_match_finite_differences() {
    let preds = vec![random_field(8, 1, 1, 1), random_field(8, 1, 1, 2)];
    let targets = vec![random_field(8, 1, 1, 3), random_field(8, 1, 1, 4)];
    let rec = random_field(8, 1, 1, 5);
    let last = random_field(8, 1, 1, 6);
    let cot = loss_cotangents(&preds, &targets, &rec, &last, 0.3).unwrap();
    let h = 1e-6;
    let mut p = preds.clone();
    p[1].data_mut()[3] += h;
    let up = loss(&p, &targets, &rec, &last, 0.3).unwrap().total;
    p[1].data_mut()[3] -= 2.0 * h;
    let down = loss(&p, &targets, &rec, &last, 0.3).unwrap().total;
    assert!(((up - down) / (2.0 * h) - cot.predictions[1].data()[3]).abs() < 1e-8);
    let mut r = rec.clone();
    r.data_mut()[5] += h;
    let up = loss(&preds, &targets, &r, &last, 0.3).unwrap().total;
    r.data_mut()[5] -= 2.0 * h;
    let down = loss(&preds, &targets, &r, &last, 0.3).unwrap().total;
    assert!(((up - down) / (2.0 * h) - cot.reconstruction.data()[5]).abs() < 1e-8);
}

#[test]
fn adam_zero_gradient_leaves_params_and_counts_step() {
    let cfg = tiny_model();
    let mut p = ModelParams::init(&cfg, 1).unwrap();
    let before = p.clone();
    let mut state = OptimState::new(&cfg);
    adam_update(&mut p, &ModelParams::zeros(&cfg), &mut state, &TrainConfig::default()).unwrap();
    assert_eq!(p, before);
    assert_eq!(state.step, 1);
}

#[test]
fn adam_first_step_closed_form() {
    // from zero moments the bias-corrected step is -lr * g / (|g| + eps)
    let cfg = tiny_model();
    let tcfg = TrainConfig {
        lr: 0.01,
        eps_opt: 1e-3,
        ..TrainConfig::default()
    };
    let mut p = ModelParams::init(&cfg, 1).unwrap();
    let before = p.to_flat();
    let mut g = ModelParams::zeros(&cfg);
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let gflat: Vec<f64> = (0..g.scalar_count()).map(|_| rng.random_range(-0.01..0.01)).collect();
    g.set_flat(&gflat).unwrap();
    let mut state = OptimState::new(&cfg);
    adam_update(&mut p, &g, &mut state, &tcfg).unwrap();
    for ((a, b), gi) in p.to_flat().iter().zip(&before).zip(&gflat) {
        let expected = b - 0.01 * gi / (gi.abs() + 1e-3);
        assert!((a - expected).abs() < 1e-15, "{a} vs {expected}");
    }
}

#[test]
fn adam_zero_lr_is_identity_and_koopman_moves_as_two_reals() {
    let cfg = tiny_model();
    let mut p = ModelParams::init(&cfg, 1).unwrap();
    let before = p.clone();
    let mut g = ModelParams::zeros(&cfg);
    g.units[0].koopman[0] = Complex64::new(1.0, -2.0);
    let mut state = OptimState::new(&cfg);
    let zero_lr = TrainConfig {
        lr: 0.0,
        ..TrainConfig::default()
    };
    adam_update(&mut p, &g, &mut state, &zero_lr).unwrap();
    assert_eq!(p, before);
    adam_update(&mut p, &g, &mut OptimState::new(&cfg), &TrainConfig::default()).unwrap();
    let d = p.units[0].koopman[0] - before.units[0].koopman[0];
    assert!((d.re + 1e-3).abs() < 1e-9 && (d.im - 1e-3).abs() < 1e-9);
    assert_eq!(p.units[0].koopman[1], before.units[0].koopman[1]);
}

#[test]
fn adam_rejects_mismatched_shapes() {
    let cfg = tiny_model();
    let mut other = cfg.clone();
    other.o = 5;
    let mut p = ModelParams::init(&cfg, 1).unwrap();
    let g = ModelParams::zeros(&other);
    assert!(adam_update(&mut p, &g, &mut OptimState::new(&cfg), &TrainConfig::default()).is_err());
}

#[test]
fn lr_schedule_steps() {
    let t = TrainConfig::default();
    assert_eq!(t.lr_at(0), 1e-3);
    assert_eq!(t.lr_at(24), 1e-3);
    assert_eq!(t.lr_at(25), 5e-4);
    assert_eq!(t.lr_at(60), 2.5e-4);
}

#[test]
fn train_config_validation() {
    assert!(TrainConfig::default().validate().is_ok());
    for bad in [
        TrainConfig { lr: 0.0, ..TrainConfig::default() },
        TrainConfig { beta1: 1.0, ..TrainConfig::default() },
        TrainConfig { lambda_rec: -1.0, ..TrainConfig::default() },
        TrainConfig { batch_size: 0, ..TrainConfig::default() },
    ] {
        assert!(bad.validate().is_err());
    }
}

#[test]
fn zero_epochs_returns_initial_params() {
    let ds = tiny_dataset();
    let tcfg = TrainConfig { epochs: 0, ..quick_train() };
    let out = train(&ds, &tiny_model(), &tcfg).unwrap();
    assert!(out.history.is_empty());
    assert_eq!(out.checkpoint.params, ModelParams::init(&tiny_model(), tcfg.seed).unwrap());
}

#[test]
fn training_loss_decreases_and_is_deterministic() {
    let ds = tiny_dataset();
    let a = train(&ds, &tiny_model(), &quick_train()).unwrap();
    assert_eq!(a.history.len(), 20);
    let first = a.history[0].train;
    let last = a.history[19].train;
    assert!(last.total < first.total, "{} !< {}", last.total, first.total);
    assert!(last.recon_loss < first.recon_loss && last.recon_loss.is_finite());
    let b = train(&ds, &tiny_model(), &quick_train()).unwrap();
    assert_eq!(a.checkpoint, b.checkpoint);
    assert_eq!(a.history, b.history);
}

#[test]
fn incompatible_dataset_rejected() {
    let ds = tiny_dataset();
    let mut cfg = tiny_model();
    cfg.d = 2;
    cfg.coord_channels = 0;
    assert!(matches!(train(&ds, &cfg, &quick_train()), Err(crate::Error::ShapeMismatch(_))));
}

#[test]
fn evaluate_stubs() {
    let ds = tiny_dataset();
    let id = Normalizer::identity(1);
    let oracle = |traj: &crate::pdegen::Trajectory| {
        let windows = crate::model::build_hankel_windows(traj, 1, 5, 1).unwrap();
        windows.into_iter().map(|w| (w.input, w.targets)).collect::<Vec<_>>()
    };
    let table = oracle(&ds.test[0]);
    let lookup = |input: &RealField, _r: usize| {
        Ok(table.iter().find(|(i, _)| i == input).expect("known window").1.clone())
    };
    let m = evaluate_with(lookup, &ds.test, &id, 1, 5, 1).unwrap();
    assert_eq!(m.rel_l2, 0.0);
    assert_eq!(m.mse, 0.0);
    let zeros = |input: &RealField, r: usize| Ok(vec![RealField::zeros(input.size(), 1, 1); r]);
    let m = evaluate_with(zeros, &ds.test, &id, 1, 5, 1).unwrap();
    assert!(m.per_step.iter().all(|v| (v - 1.0).abs() < 1e-15));
    assert_eq!(m.per_step.len(), 5);
    assert_eq!(m.windows, 41 - 6 + 1);
}

#[test]
fn evaluate_is_pure_and_checks_horizon() {
    let ds = tiny_dataset();
    let ckpt = Checkpoint {
        params: ModelParams::init(&tiny_model(), 2).unwrap(),
        train: quick_train(),
        normalizer: ds.normalizer.clone(),
    };
    let a = evaluate(&ckpt, &ds.test, 4).unwrap();
    assert_eq!(a, evaluate(&ckpt, &ds.test, 4).unwrap());
    assert!(matches!(evaluate(&ckpt, &ds.test, 41), Err(crate::Error::TrajectoryTooShort { .. })));
}

#[test]
fn gradient_check_linear_function_is_exact() {
    let w = [1.5, -2.0, 0.25];
    let f = |x: &[f64]| Ok(x.iter().zip(&w).map(|(a, b)| a * b).sum());
    let r = gradient_check(f, &[0.3, 0.1, -0.7], &w, 1e-10).unwrap();
    assert!(r.passed && r.max_rel_error < 1e-10, "{r:?}");
}

fn kno_loss_setup() -> (ModelParams, WindowSampleParts) {
    let mut cfg = ModelConfig::new(1, 4, 3, 2);
    cfg.units = 1;
    let params = ModelParams::init(&cfg, 5).unwrap();
    let parts = WindowSampleParts {
        input: random_field(16, 1, 1, 7),
        targets: vec![random_field(16, 1, 1, 8), random_field(16, 1, 1, 9)],
    };
    (params, parts)
}

struct WindowSampleParts {
    input: RealField,
    targets: Vec<RealField>,
}

fn kno_total(params: &ModelParams, w: &WindowSampleParts) -> Result<f64> {
    let (pred, rec, _) = forward(params, &w.input, 2)?;
    Ok(loss(&pred, &w.targets, &rec, &w.input, 0.5)?.total)
}

fn kno_grad(params: &ModelParams, w: &WindowSampleParts) -> Vec<f64> {
    let (pred, rec, tape) = forward(params, &w.input, 2).unwrap();
    let cot = loss_cotangents(&pred, &w.targets, &rec, &w.input, 0.5).unwrap();
    backward(params, &tape, &cot).unwrap().to_flat()
}

#[test]
fn gradient_check_full_model_and_fault_injection() {
    let (params, w) = kno_loss_setup();
    let x = params.to_flat();
    let f = |flat: &[f64]| {
        let mut p = params.clone();
        p.set_flat(flat)?;
        kno_total(&p, &w)
    };
    let mut grad = kno_grad(&params, &w);
    let report = gradient_check(f, &x, &grad, 1e-3).unwrap();
    assert!(report.passed, "{report:?}");
    let bad = grad
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap();
    let bad = (bad + 17) % grad.len();
    grad[bad] *= 2.0;
    let report = gradient_check(f, &x, &grad, 1e-3).unwrap();
    assert!(!report.passed);
    assert_eq!(report.worst_index, bad);
}

#[test]
fn gradient_check_guards_size() {
    let x = vec![0.0; GRADIENT_CHECK_LIMIT + 1];
    assert!(gradient_check(|_| Ok(0.0), &x, &x, 1e-3).is_err());
}

#[test]
fn rollout_prediction_matches_forward() {
    let (params, w) = kno_loss_setup();
    let (pred, _, _) = forward(&params, &w.input, 2).unwrap();
    assert_eq!(pred, predict(&params, &w.input, 2).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn batch_loss_is_permutation_invariant(seed in 0u64..500) {
        let cfg = tiny_model();
        let params = ModelParams::init(&cfg, seed).unwrap();
        let samples: Vec<crate::model::WindowSample> = (0..4)
            .map(|i| crate::model::WindowSample {
                input: random_field(16, 1, 1, seed * 10 + i),
                targets: (0..3).map(|j| random_field(16, 1, 1, seed * 100 + i * 3 + j)).collect(),
            })
            .collect();
        let fwd: Vec<&crate::model::WindowSample> = samples.iter().collect();
        let rev: Vec<&crate::model::WindowSample> = samples.iter().rev().collect();
        let (a, ga) = super::trainer::batch_step(&params, &fwd, 0.5).unwrap();
        let (b, gb) = super::trainer::batch_step(&params, &rev, 0.5).unwrap();
        prop_assert!((a.total - b.total).abs() <= 1e-14 * a.total);
        for (x, y) in ga.to_flat().iter().zip(gb.to_flat()) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }
}
