use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nll(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nll"))
        .args(args)
        .current_dir(dir)
        .env_remove("NLL_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = nll(args, dir);
    assert!(
        out.status.success(),
        "nll {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn noise_make_writes_a_matrix() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &[
            "noise", "make", "--kind", "pair", "--k", "3", "--rate", "0.2", "--out", "t.json",
        ],
        dir.path(),
    );
    let v: Value = serde_json::from_slice(&read(dir.path(), "t.json")).unwrap();
    assert_eq!(v["k"], 3);
    assert_eq!(v["rows"][0][1].as_f64(), Some(0.2));
    let bad = nll(
        &[
            "noise", "make", "--kind", "pair", "--k", "3", "--rate", "0.6", "--out", "u.json",
        ],
        dir.path(),
    );
    assert_eq!(bad.status.code(), Some(2));
    assert!(!dir.path().join("u.json").exists());
}

#[test]
fn data_pipeline_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        &[
            "noise", "make", "--kind", "uniform", "--k", "2", "--rate", "0.3", "--out", "t.json",
        ],
        d,
    );
    for tag in ["a", "b"] {
        ok(
            &[
                "data",
                "make",
                "--kind",
                "moons",
                "--m",
                "200",
                "--seed",
                "4",
                "--out",
                &format!("clean_{tag}.csv"),
            ],
            d,
        );
        ok(
            &[
                "data",
                "corrupt",
                "--noise",
                "t.json",
                "--seed",
                "9",
                "--in",
                &format!("clean_{tag}.csv"),
                "--out",
                &format!("noisy_{tag}.csv"),
            ],
            d,
        );
        ok(
            &[
                "data",
                "split",
                "--val-frac",
                "0.25",
                "--seed",
                "2",
                "--in",
                &format!("noisy_{tag}.csv"),
                "--train-out",
                &format!("tr_{tag}.csv"),
                "--val-out",
                &format!("va_{tag}.csv"),
            ],
            d,
        );
    }
    for f in ["clean", "noisy", "tr", "va"] {
        assert_eq!(read(d, &format!("{f}_a.csv")), read(d, &format!("{f}_b.csv")), "{f}");
    }
    let train = String::from_utf8(read(d, "tr_a.csv")).unwrap();
    assert!(train.starts_with("x0,x1,label\n"));
    assert_eq!(train.lines().count(), 151);
    let clean = String::from_utf8(read(d, "clean_a.csv")).unwrap();
    assert_ne!(clean, String::from_utf8(read(d, "noisy_a.csv")).unwrap());

    ok(
        &[
            "data", "make", "--kind", "tabular", "--m", "16", "--seed", "1", "--out", "tab.csv",
        ],
        d,
    );
    let tab = String::from_utf8(read(d, "tab.csv")).unwrap();
    assert_eq!(tab.lines().count(), 17);
}

#[test]
fn environment_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let run = |seed: &str, out: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_nll"))
            .args(["data", "make", "--kind", "circles", "--m", "20", "--out", out])
            .env("NLL_SEED", seed)
            .current_dir(d)
            .status()
            .unwrap();
        assert!(status.success());
    };
    run("3", "env.csv");
    ok(
        &[
            "data", "make", "--kind", "circles", "--m", "20", "--seed", "3", "--out", "flag.csv",
        ],
        d,
    );
    assert_eq!(read(d, "env.csv"), read(d, "flag.csv"));
    run("4", "other.csv");
    assert_ne!(read(d, "env.csv"), read(d, "other.csv"));
}

#[test]
fn oracle_and_bounds_on_the_tabular_world() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["data", "world", "--out", "w.json"], d);
    ok(
        &[
            "noise", "make", "--kind", "uniform", "--k", "2", "--rate", "0.25", "--out", "t.json",
        ],
        d,
    );

    let best: Value =
        serde_json::from_str(&ok(&["oracle", "best", "--world", "w.json", "--noise", "t.json"], d)).unwrap();
    assert!((best["value"].as_f64().unwrap() - 0.75).abs() < 1e-12);
    assert_eq!(best["unique"], true);
    assert_eq!(best["assignment"], serde_json::json!([0, 0, 1, 1, 0, 0, 1, 1]));
    let clean: Value = serde_json::from_str(&ok(&["oracle", "best", "--world", "w.json", "--clean"], d)).unwrap();
    assert_eq!(clean["value"].as_f64(), Some(1.0));
    assert_eq!(nll(&["oracle", "best", "--world", "w.json"], d).status.code(), Some(2));

    let val: Value = serde_json::from_str(&ok(&["bounds", "val", "--n", "1000", "--delta", "0.01"], d)).unwrap();
    assert!((val["bound"].as_f64().unwrap() - 0.0480).abs() < 5e-4);
    let gen: Value = serde_json::from_str(&ok(
        &["bounds", "gen", "--m", "100000", "--dvc", "10", "--delta", "0.05"],
        d,
    ))
    .unwrap();
    assert!((gen["bound"].as_f64().unwrap() - 0.0953).abs() < 1e-4);
    assert_eq!(
        nll(&["bounds", "gen", "--m", "4", "--dvc", "10", "--delta", "0.05"], d)
            .status
            .code(),
        Some(2)
    );

    std::fs::write(d.join("h.json"), r#"{"assignment": [0, 0, 1, 1, 0, 0, 1, 1], "k": 2}"#).unwrap();
    let args = [
        "bounds", "audit", "--model", "h.json", "--world", "w.json", "--noise", "t.json", "--n", "1000", "--delta",
        "0.01", "--trials", "500", "--seed", "1",
    ];
    let first = ok(&args, d);
    assert_eq!(first, ok(&args, d));
    let audit: Value = serde_json::from_str(&first).unwrap();
    assert!((audit["exact_noisy_accuracy"].as_f64().unwrap() - 0.75).abs() < 1e-12);
    assert!(audit["violations"].as_u64().unwrap() <= 20);
}

#[test]
fn train_and_nts_reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        &[
            "noise", "make", "--kind", "uniform", "--k", "2", "--rate", "0.2", "--out", "t.json",
        ],
        d,
    );
    ok(
        &[
            "data", "make", "--kind", "moons", "--m", "120", "--seed", "1", "--out", "c.csv",
        ],
        d,
    );
    ok(
        &[
            "data", "corrupt", "--noise", "t.json", "--seed", "1", "--in", "c.csv", "--out", "n.csv",
        ],
        d,
    );
    ok(
        &[
            "data",
            "split",
            "--val-frac",
            "0.25",
            "--seed",
            "1",
            "--in",
            "n.csv",
            "--train-out",
            "tr.csv",
            "--val-out",
            "va.csv",
        ],
        d,
    );
    ok(
        &[
            "data", "make", "--kind", "moons", "--m", "300", "--seed", "2", "--out", "te.csv",
        ],
        d,
    );
    std::fs::write(
        d.join("cfg.json"),
        r#"{"max_steps": 300, "learning_rate": 0.05, "checkpoint_every": 100, "seed": 3}"#,
    )
    .unwrap();
    for tag in ["a", "b"] {
        ok(
            &[
                "train",
                "--data",
                "tr.csv",
                "--val",
                "va.csv",
                "--config",
                "cfg.json",
                "--out",
                &format!("m_{tag}.json"),
                "--checkpoints",
                &format!("ck_{tag}.csv"),
            ],
            d,
        );
        ok(
            &[
                "nts",
                "--train",
                "tr.csv",
                "--val",
                "va.csv",
                "--test",
                "te.csv",
                "--config",
                "cfg.json",
                "--report",
                &format!("r_{tag}.json"),
            ],
            d,
        );
    }
    for f in ["m_{}.json", "ck_{}.csv", "r_{}.json"] {
        assert_eq!(read(d, &f.replace("{}", "a")), read(d, &f.replace("{}", "b")), "{f}");
    }
    let ck = String::from_utf8(read(d, "ck_a.csv")).unwrap();
    let lines: Vec<&str> = ck.lines().collect();
    assert_eq!(lines[0], "step,train_acc,val_acc");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("300,"));
    let report: Value = serde_json::from_slice(&read(d, "r_a.json")).unwrap();
    assert_eq!(report["teacher_trail"].as_array().unwrap().len(), 3);
    assert!(report["nt_acc"].is_number());

    std::fs::write(d.join("bad.json"), r#"{"learning_rate": -1}"#).unwrap();
    let bad = nll(
        &["train", "--data", "tr.csv", "--config", "bad.json", "--out", "x.json"],
        d,
    );
    assert_eq!(bad.status.code(), Some(2));
    let typo = nll(&["train", "--data", "missing.csv", "--out", "x.json"], d);
    assert_eq!(typo.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&typo.stderr).contains("missing.csv"));

    // A trained MLP can be audited on the world it is evaluated at.
    ok(&["data", "world", "--out", "w.json"], d);
    ok(
        &[
            "data", "make", "--kind", "tabular", "--m", "40", "--seed", "5", "--out", "tab.csv",
        ],
        d,
    );
    ok(
        &[
            "train",
            "--data",
            "tab.csv",
            "--config",
            "cfg.json",
            "--out",
            "tab_model.json",
        ],
        d,
    );
    ok(
        &[
            "bounds",
            "audit",
            "--model",
            "tab_model.json",
            "--world",
            "w.json",
            "--noise",
            "t.json",
            "--n",
            "100",
            "--delta",
            "0.1",
            "--trials",
            "50",
        ],
        d,
    );
}

#[test]
fn sweep_demo_and_audit_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("sweep.json"),
        r#"{"sizes": [8, 64], "repeats": 2, "test_size": 500, "seed": 1,
            "train": {"max_steps": 200, "learning_rate": 0.02, "momentum": 0.9, "checkpoint_every": 200}}"#,
    )
    .unwrap();
    for tag in ["a", "b"] {
        ok(&["sweep", "--config", "sweep.json", "--out", tag], d);
        ok(&["demo", "tabular", "--seed", "2", "--out", tag], d);
    }
    for f in ["sweep.csv", "sweep.json", "sweep.svg", "tabular.json"] {
        assert_eq!(read(d, &format!("a/{f}")), read(d, &format!("b/{f}")), "{f}");
    }
    let csv = String::from_utf8(read(d, "a/sweep.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1 + 4 + 2);
    let demo: Value = serde_json::from_slice(&read(d, "a/tabular.json")).unwrap();
    assert_eq!(demo["exact"]["unique"], true);
}
