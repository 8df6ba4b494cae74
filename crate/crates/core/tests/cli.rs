use std::path::Path;
use std::process::{Command, Output};

fn kno(args: &[&str], data_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kno"));
    cmd.args(args).env_remove("KNO_DATA_DIR");
    if let Some(d) = data_dir {
        cmd.env("KNO_DATA_DIR", d);
    }
    cmd.output().expect("run kno")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn generate_tiny(out: &Path) -> Output {
    kno(
        &[
            "generate", "--pde", "burgers", "--resolution", "64,32", "--n-train", "2", "--n-test", "1", "--t-end", "0.25",
            "--seed", "3", "--out", out.to_str().unwrap(),
        ],
        None,
    )
}

#[test]
fn generate_train_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("burgers");
    let g = generate_tiny(&data);
    assert!(g.status.success(), "{}", text(&g));
    assert!(text(&g).contains("11 snapshots"));
    assert!(data.join("s32/manifest.json").exists() && data.join("s64/manifest.json").exists());

    let cfg = dir.path().join("train.toml");
    std::fs::write(&cfg, "[model]\ncoords = false\nsettings = [{ o = 4, f = 4, r = 2 }]\n[train]\nbatch_size = 4\n").unwrap();
    let run = dir.path().join("run");
    let t = kno(
        &[
            "train", "--data", "burgers/s32", "--config", cfg.to_str().unwrap(), "--epochs", "3", "--out",
            run.to_str().unwrap(),
        ],
        Some(dir.path()),
    );
    assert!(t.status.success(), "{}", text(&t));
    assert!(run.join("checkpoint/manifest.json").exists());
    let history = std::fs::read_to_string(run.join("history.jsonl")).unwrap();
    let epochs: std::collections::BTreeSet<u64> = history
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["epoch"].as_u64().unwrap())
        .collect();
    assert_eq!(epochs.len(), 3);

    let e = kno(
        &[
            "eval", "--checkpoint", run.join("checkpoint").to_str().unwrap(), "--data", data.join("s64").to_str().unwrap(),
            "--resolution", "32",
        ],
        None,
    );
    assert!(e.status.success(), "{}", text(&e));
    let metrics: serde_json::Value = serde_json::from_slice(&e.stdout).unwrap();
    let saved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("test_metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["mse"], saved["mse"]);
}

#[test]
fn zero_epochs_writes_initial_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    assert!(generate_tiny(&data).status.success());
    let run = dir.path().join("run");
    let t = kno(
        &[
            "train", "--data", data.join("s32").to_str().unwrap(), "--epochs", "0", "--setting", "3,4,2", "--out",
            run.to_str().unwrap(),
        ],
        None,
    );
    assert!(t.status.success(), "{}", text(&t));
    assert!(run.join("checkpoint/manifest.json").exists());
    assert_eq!(std::fs::read_to_string(run.join("history.jsonl")).unwrap(), "");
}

#[test]
fn repeated_generation_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate_tiny(&dir.path().join("a"));
    let b = generate_tiny(&dir.path().join("b"));
    let hashes = |o: &Output| {
        String::from_utf8_lossy(&o.stdout)
            .lines()
            .map(|l| l.rsplit(' ').next().unwrap().to_string())
            .collect::<Vec<_>>()
    };
    assert_eq!(hashes(&a), hashes(&b));
    let fa = std::fs::read(dir.path().join("a/s64/train_0001.knot")).unwrap();
    let fb = std::fs::read(dir.path().join("b/s64/train_0001.knot")).unwrap();
    assert_eq!(fa, fb);
}

#[test]
fn experiment_subcommand_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "[data]\npde = \"burgers\"\nresolution = 64\nt_end = 0.25\nn_train = 2\nn_test = 1\n\
         [model]\ncoords = false\n[train]\nepochs = 1\n[params]\neval_resolutions = [32, 64]\n",
    )
    .unwrap();
    let out = dir.path().join("mesh");
    let o = kno(
        &[
            "experiment", "mesh", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--resolution", "32",
            "--setting", "4,4,2",
        ],
        None,
    );
    assert!(o.status.success(), "{}", text(&o));
    for f in ["report.json", "metrics.jsonl", "table.tsv", "data/manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(text(&o).contains("mse_spread"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(kno(&["bogus"], None).status.code(), Some(1));
    assert_eq!(kno(&["train", "--setting", "1,2"], None).status.code(), Some(1));
    assert_eq!(kno(&["train"], None).status.code(), Some(1), "no data dir");
    let missing = dir.path().join("nothing");
    assert_eq!(kno(&["train", "--data", missing.to_str().unwrap()], None).status.code(), Some(2));
    let blowup = kno(
        &[
            "generate", "--pde", "ns", "--resolution", "16", "--nu", "1e-5", "--dt-internal", "1", "--n-train", "1",
            "--n-test", "1", "--out", dir.path().join("x").to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(blowup.status.code(), Some(3), "{}", text(&blowup));
    assert_eq!(kno(&["--help"], None).status.code(), Some(0));
}
