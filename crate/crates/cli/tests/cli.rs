//! End-to-end tests of the `actgrad` binary surface: flags, exit codes, file
//! outputs and their formats.

mod common;

use actgrad_cli::checkpoint;
use actgrad_cli::metrics::MetricsTable;
use actgrad_core::data::load_test_set;
use std::path::Path;
use std::process::{Command, Output};
use tempfile::tempdir;

fn actgrad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_actgrad"))
        .args(args)
        .env_remove("ACTGRAD_DATA_DIR")
        .output()
        .expect("spawn actgrad")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// CSV text minus the wall_seconds column, for determinism comparisons.
fn without_wall_seconds(csv: &str) -> String {
    csv.lines()
        .map(|line| {
            let mut fields: Vec<&str> = line.split(',').collect();
            fields.remove(5);
            fields.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn train_row_count_and_determinism() {
    let data = common::data_dir();
    let data = data.to_str().unwrap();
    let out_a = tempdir().unwrap();
    let out_b = tempdir().unwrap();
    for out in [&out_a, &out_b] {
        let res = actgrad(&[
            "--data-dir", data,
            "--out-dir", out.path().to_str().unwrap(),
            "--seed", "7",
            "train", "--size", "small", "--activation", "fourier",
            "--epochs", "2", "--subset", "300", "--val-subset", "100",
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let csv_a = std::fs::read_to_string(out_a.path().join("metrics-small-fourier-seed7.csv")).unwrap();
    let csv_b = std::fs::read_to_string(out_b.path().join("metrics-small-fourier-seed7.csv")).unwrap();
    assert_eq!(csv_a.lines().count(), 3, "header + one row per epoch:\n{csv_a}");
    assert!(csv_a.starts_with("epoch,train_accuracy,train_loss,val_accuracy,val_loss,wall_seconds\n"));
    assert_eq!(without_wall_seconds(&csv_a), without_wall_seconds(&csv_b));
}

#[test]
fn from_manifest_reproduces_the_run() {
    let data = common::data_dir();
    let out = tempdir().unwrap();
    let rerun = tempdir().unwrap();
    let res = actgrad(&[
        "--data-dir", data.to_str().unwrap(),
        "--out-dir", out.path().to_str().unwrap(),
        "--seed", "3",
        "train", "--size", "small", "--activation", "lc",
        "--epochs", "1", "--subset", "200", "--val-subset", "100",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let res = actgrad(&[
        "--data-dir", data.to_str().unwrap(),
        "--out-dir", rerun.path().to_str().unwrap(),
        "train", "--from-manifest",
        out.path().join("small-lc-seed3.manifest.json").to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let a = std::fs::read_to_string(out.path().join("metrics-small-lc-seed3.csv")).unwrap();
    let b = std::fs::read_to_string(rerun.path().join("metrics-small-lc-seed3.csv")).unwrap();
    assert_eq!(without_wall_seconds(&a), without_wall_seconds(&b));
}

#[test]
fn checkpoint_reloads_to_the_reported_accuracy() {
    let data = common::data_dir();
    let out = tempdir().unwrap();
    let res = actgrad(&[
        "--data-dir", data.to_str().unwrap(),
        "--out-dir", out.path().to_str().unwrap(),
        "--seed", "5",
        "train", "--size", "small", "--activation", "relu",
        "--epochs", "1", "--subset", "200", "--val-subset", "100",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let table = MetricsTable::read(&out.path().join("metrics-small-relu-seed5.csv")).unwrap();
    let reported = table.best_val_accuracy().unwrap();
    let (manifest, net) = checkpoint::load(&out.path().join("small-relu-seed5.ckpt")).unwrap();
    let val = load_test_set(&data)
        .unwrap()
        .subset(manifest.data.val_subset.unwrap(), manifest.seed)
        .unwrap();
    let (_, acc) = net.evaluate(&val.images, &val.one_hot).unwrap();
    assert_eq!(acc, reported);
}

#[test]
fn compare_reports_absolute_percentage_improvements() {
    let dir = tempdir().unwrap();
    let write = |name: &str, rows: &[(f64, f64)]| -> String {
        let mut csv = String::from("epoch,train_accuracy,train_loss,val_accuracy,val_loss,wall_seconds\n");
        for (i, (train, val)) in rows.iter().enumerate() {
            csv.push_str(&format!("{},{train},1.0,{val},1.0,1.000\n", i + 1));
        }
        let path = dir.path().join(name);
        std::fs::write(&path, csv).unwrap();
        path.to_str().unwrap().to_string()
    };
    let baseline = write("metrics-base.csv", &[(0.8355, 0.5914)]);
    let fourier = write("metrics-fourier.csv", &[(0.7866, 0.6423)]);

    let res = actgrad(&["compare", "--baseline", &baseline, "--variant", &fourier]);
    assert!(res.status.success());
    let text = stdout_of(&res);
    assert!(text.contains("5.09"), "{text}");
    assert!(text.contains("-4.89"), "{text}");

    let res = actgrad(&["compare", "--baseline", &baseline, "--variant", &baseline]);
    let text = stdout_of(&res);
    assert!(text.contains("0.00"), "{text}");

    let res = actgrad(&["compare", "--baseline", "/no/such.csv", "--variant", &fourier]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn pso_history_is_well_formed() {
    let data = common::data_dir();
    let out = tempdir().unwrap();
    let res = actgrad(&[
        "--data-dir", data.to_str().unwrap(),
        "--out-dir", out.path().to_str().unwrap(),
        "--seed", "13",
        "pso", "--size", "small", "--activation", "relu",
        "--particles", "3", "--generations", "4",
        "--subset", "200", "--val-subset", "60", "--eval-subset", "80",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = std::fs::read_to_string(out.path().join("pso-small-relu-seed13.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("generation,best_fitness,val_accuracy"));
    let mut last_fitness = f64::NEG_INFINITY;
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 3, "{line}");
        assert_eq!(fields[0].parse::<usize>().unwrap(), i + 1);
        let fitness: f64 = fields[1].parse().unwrap();
        assert!(fitness >= last_fitness, "fitness dipped at generation {}", i + 1);
        last_fitness = fitness;
        rows += 1;
    }
    assert_eq!(rows, 4);
}

#[test]
fn gradcheck_component_flag() {
    let res = actgrad(&["--seed", "2", "gradcheck", "--component", "fourier"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = stdout_of(&res);
    assert!(text.contains("fourier"), "{text}");
    assert!(text.contains("pass"), "{text}");

    let res = actgrad(&["gradcheck", "--component", "nonsense"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn fetch_data_synthetic_writes_official_sizes_and_skips_rewrites() {
    let dir = tempdir().unwrap();
    let data = dir.path().join("data");
    let res = actgrad(&["--data-dir", data.to_str().unwrap(), "fetch-data", "--synthetic"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for name in ["data_batch_1.bin", "data_batch_5.bin", "test_batch.bin"] {
        let len = std::fs::metadata(data.join(name)).unwrap().len();
        assert_eq!(len, 30_730_000, "{name}");
    }
    let res = actgrad(&["--data-dir", data.to_str().unwrap(), "fetch-data", "--synthetic"]);
    assert!(res.status.success());
    assert!(stdout_of(&res).contains("already present"));
}

#[test]
fn pretrained_run_writes_flag_column_and_baseline_does_not() {
    let data = common::data_dir();
    let out = tempdir().unwrap();
    let res = actgrad(&[
        "--data-dir", data.to_str().unwrap(),
        "--out-dir", out.path().to_str().unwrap(),
        "--seed", "9",
        "train", "--size", "small", "--activation", "fourier",
        "--epochs", "1", "--subset", "200", "--val-subset", "60",
        "--pretrain-ae", "--ae-epochs", "1", "--with-baseline",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let pre = std::fs::read_to_string(out.path().join("metrics-small-fourier-seed9-ae.csv")).unwrap();
    let base = std::fs::read_to_string(out.path().join("metrics-small-fourier-seed9.csv")).unwrap();
    assert!(pre.lines().next().unwrap().ends_with(",pretrained"), "{pre}");
    assert!(pre.lines().nth(1).unwrap().ends_with(",true"), "{pre}");
    assert!(base.starts_with("epoch,train_accuracy,train_loss,val_accuracy,val_loss,wall_seconds\n"));
}

#[test]
fn usage_errors_exit_2() {
    let missing = Path::new("/nonexistent-data-dir");
    let res = actgrad(&[
        "--data-dir", missing.to_str().unwrap(),
        "train", "--size", "small", "--activation", "relu", "--epochs", "1",
    ]);
    assert_eq!(res.status.code(), Some(2));

    let res = actgrad(&["train", "--size", "small", "--activation", "relu"]);
    assert_eq!(res.status.code(), Some(2), "missing --epochs");

    let res = actgrad(&["train", "--size", "small", "--activation", "relu", "--epochs", "0"]);
    assert_eq!(res.status.code(), Some(2), "zero epochs");

    let res = actgrad(&[
        "train", "--size", "small", "--activation", "relu", "--epochs", "1", "--with-baseline",
    ]);
    assert_eq!(res.status.code(), Some(2), "--with-baseline without --pretrain-ae");

    let res = actgrad(&["train", "--size", "huge", "--activation", "relu", "--epochs", "1"]);
    assert_eq!(res.status.code(), Some(2), "unknown size");
}
