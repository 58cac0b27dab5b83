use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kcnet::data::{split, Normalization, SplitSpec};
use kcnet::doa::epoch_split_seed;
use kcnet::rng::SeededRng;
use kcnet::{Dataset, KcNet, OutputWeights};
use kcnet_cli::model_file::SavedModel;
use kcnet_cli::{exit, RunConfig};
use ndarray::Array2;
use proptest::prelude::*;
use tempfile::TempDir;

fn kcnet(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kcnet"))
        .args(args)
        .current_dir(cwd)
        .env_remove("KCNET_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Three noisy classes over 12 features, written as CSV with a `label` column.
fn write_csv(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let mut rng = SeededRng::new(seed);
    let mut text = String::from("label");
    for f in 0..12 {
        text.push_str(&format!(",f{f}"));
    }
    text.push('\n');
    for i in 0..n {
        let class = i % 3;
        text.push_str(["x", "y", "z"][class]);
        for f in 0..12 {
            let v = rng.uniform(-1.0, 1.0) + if f % 3 == class { 1.5 } else { 0.0 };
            text.push_str(&format!(",{v:.6}"));
        }
        text.push('\n');
    }
    let path = dir.join("toy.csv");
    fs::write(&path, text).unwrap();
    path
}

fn common<'a>(csv: &'a str, out: &'a str) -> Vec<&'a str> {
    vec!["--csv", csv, "--hidden", "40", "--fan-in", "4", "--lambda", "0.5", "--reps", "1", "--out", out]
}

#[test]
fn missing_input_is_io_error_with_no_outputs() {
    let tmp = TempDir::new().unwrap();
    let out = kcnet(&["fit", "--csv", "absent.csv", "--out", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(exit::IO));
    assert!(!tmp.path().join("run").exists());
    assert!(fs::read_dir(tmp.path()).unwrap().next().is_none());
}

#[test]
fn fit_replays_byte_identically() {
    let tmp = TempDir::new().unwrap();
    let csv = write_csv(tmp.path(), 240, 1);
    let csv = csv.to_str().unwrap();
    for run in ["a", "b"] {
        let mut args = vec!["fit"];
        args.extend(common(csv, run));
        args.extend(["--seed", "7"]);
        ok(&kcnet(&args, tmp.path()));
    }
    let a = fs::read(tmp.path().join("a/model.kcn")).unwrap();
    let b = fs::read(tmp.path().join("b/model.kcn")).unwrap();
    assert_eq!(a, b);
    let strip = |p: &str| {
        let s = fs::read_to_string(tmp.path().join(p).join("reports.jsonl")).unwrap();
        let v: serde_json::Value = serde_json::from_str(s.trim()).unwrap();
        (v["accuracy"].clone(), v["confusion"].clone())
    };
    assert_eq!(strip("a"), strip("b"));
    let names: Vec<_> = fs::read_dir(tmp.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    for f in ["config.toml", "model.kcn", "reports.jsonl", "summary.csv"] {
        assert!(names.iter().any(|n| n == f), "{f} missing");
    }
}

#[test]
fn evaluate_matches_training_report() {
    let tmp = TempDir::new().unwrap();
    let csv = write_csv(tmp.path(), 240, 2);
    let csv = csv.to_str().unwrap();
    let mut args = vec!["fit"];
    args.extend(common(csv, "run"));
    ok(&kcnet(&args, tmp.path()));
    let trained: serde_json::Value =
        serde_json::from_str(fs::read_to_string(tmp.path().join("run/reports.jsonl")).unwrap().trim()).unwrap();

    // the held-out split is the one `fit` used, rebuilt from the same seed
    let data: Dataset<f64> = kcnet::data::load_csv(csv, &kcnet::data::CsvOptions::new("label")).unwrap();
    let (_, test) = split(&data, &SplitSpec::new(0.9, 0).stratified(true)).unwrap();
    let model = SavedModel::load(&tmp.path().join("run/model.kcn")).unwrap();
    let SavedModel::KcNet64(m) = &model else { panic!("expected f64 KCNet") };
    let pred = m.predict(test.features()).unwrap();
    let acc = pred.iter().zip(test.labels()).filter(|(p, t)| p == t).count() as f64 / test.n_samples() as f64;
    assert_eq!(trained["accuracy"].as_f64().unwrap(), acc);

    let out = kcnet(&["evaluate", "--model", "run/model.kcn", "--csv", csv], tmp.path());
    ok(&out);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["confusion"]["counts"].as_array().unwrap().len(), 3);
    assert_eq!(v["per_class"].as_array().unwrap().len(), 3);
    assert!(v["accuracy"].as_f64().unwrap() > 0.5);
}

#[test]
fn doa_single_epoch_zero_stop_equals_plain_fit_on_split() {
    let tmp = TempDir::new().unwrap();
    let csv = write_csv(tmp.path(), 300, 3);
    let csv = csv.to_str().unwrap();
    let mut args = vec!["doa", "--epochs", "1", "--stop-metric", "0", "--seed", "5"];
    args.extend(common(csv, "doa"));
    ok(&kcnet(&args, tmp.path()));

    let history = fs::read_to_string(tmp.path().join("doa/history.csv")).unwrap();
    assert_eq!(history.lines().count(), 2, "header plus one epoch:\n{history}");

    let mut fit_args = vec!["fit", "--seed", "5"];
    fit_args.extend(common(csv, "fit"));
    ok(&kcnet(&fit_args, tmp.path()));

    let SavedModel::KcNet64(doa) = SavedModel::load(&tmp.path().join("doa/model.kcn")).unwrap() else { panic!() };
    let SavedModel::KcNet64(fit) = SavedModel::load(&tmp.path().join("fit/model.kcn")).unwrap() else { panic!() };
    assert_eq!(doa.projection, fit.projection);

    let data: Dataset<f64> = kcnet::data::load_csv(csv, &kcnet::data::CsvOptions::new("label")).unwrap();
    let (train, test) = split(&data, &SplitSpec::new(0.9, 5).stratified(true)).unwrap();
    let (epoch_train, _) = split(&train, &SplitSpec::new(1.0 - 1.0 / 6.0, epoch_split_seed(5, 0))).unwrap();
    let reference = KcNet::fit_with_projection(&epoch_train, &fit.config, fit.projection.clone()).unwrap();
    assert_eq!(doa.predict(test.features()).unwrap(), reference.predict(test.features()).unwrap());
}

#[test]
fn history_never_exceeds_epoch_budget() {
    let tmp = TempDir::new().unwrap();
    let csv = write_csv(tmp.path(), 240, 4);
    let csv = csv.to_str().unwrap();
    let mut args = vec!["ensemble", "--submodels", "2", "--sub-hidden", "20", "--epochs", "3", "--stop-metric", "1.01"];
    args.extend(["--csv", csv, "--fan-in", "4", "--lambda", "0.5", "--reps", "2", "--out", "ens"]);
    ok(&kcnet(&args, tmp.path()));
    let text = fs::read_to_string(tmp.path().join("ens/history.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "rep,submodel,epoch,val_metric,flipped,connections");
    let rows: Vec<Vec<usize>> = lines
        .map(|l| l.split(',').enumerate().filter(|(i, _)| *i != 3).map(|(_, v)| v.parse().unwrap()).collect())
        .collect();
    for rep in 0..2 {
        for sub in 0..2 {
            let n = rows.iter().filter(|r| r[0] == rep && r[1] == sub).count();
            assert!((1..=3).contains(&n), "rep {rep} submodel {sub}: {n} rows");
        }
    }
    assert!(tmp.path().join("ens/model-r0.kcn").exists());
    assert!(tmp.path().join("ens/model-r1.kcn").exists());
    let SavedModel::KcNet64(m) = SavedModel::load(&tmp.path().join("ens/model-r0.kcn")).unwrap() else { panic!() };
    assert_eq!(m.hidden_dim(), 40);
}

#[test]
fn gradcheck_defaults_pass_and_replay() {
    let tmp = TempDir::new().unwrap();
    let a = kcnet(&["gradcheck", "--seed", "11"], tmp.path());
    ok(&a);
    let b = kcnet(&["gradcheck", "--seed", "11"], tmp.path());
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["instances"], 100);
    assert!(v["max_oracle_dev"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn gradcheck_rejects_single_hidden_unit_and_reports_failure() {
    let tmp = TempDir::new().unwrap();
    let out = kcnet(&["gradcheck", "--max-hidden", "1"], tmp.path());
    assert_eq!(out.status.code(), Some(exit::USAGE));
    let out = kcnet(&["gradcheck", "--max-input", "9"], tmp.path());
    assert_eq!(out.status.code(), Some(exit::USAGE));
    let out = kcnet(&["gradcheck", "--instances", "5", "--oracle-tol", "0", "--fd-tol", "0"], tmp.path());
    assert_eq!(out.status.code(), Some(exit::CHECK_FAILED));
}

#[test]
fn flags_override_config_file() {
    let tmp = TempDir::new().unwrap();
    let csv = write_csv(tmp.path(), 150, 6);
    fs::write(
        tmp.path().join("run.toml"),
        format!(
            "[data]\ncsv = {:?}\n[model]\nhidden_dim = 30\nfan_in = 3\nridge_lambda = 2.0\n[run]\nreps = 1\nseed = 4\n",
            csv.to_str().unwrap()
        ),
    )
    .unwrap();
    ok(&kcnet(&["--config", "run.toml", "fit", "--hidden", "25", "--out", "run"], tmp.path()));
    let snap = RunConfig::from_file(&tmp.path().join("run/config.toml")).unwrap();
    assert_eq!(snap.model.hidden_dim.unwrap().fixed().unwrap(), 25);
    assert_eq!(snap.model.fan_in, Some(3));
    assert_eq!(snap.model.ridge_lambda, Some(2.0));
    assert_eq!(snap.seed(), 4);

    fs::write(tmp.path().join("bad.toml"), "[model]\nhidden = 3\n").unwrap();
    let out = kcnet(&["--config", "bad.toml", "fit", "--csv", "x.csv"], tmp.path());
    assert_eq!(out.status.code(), Some(exit::PARSE));
}

#[test]
fn bench_sweeps_widths_for_each_model() {
    let tmp = TempDir::new().unwrap();
    let csv = write_csv(tmp.path(), 150, 7);
    let csv = csv.to_str().unwrap();
    let args = [
        "bench", "--csv", csv, "--hidden", "10..30", "--step", "10", "--fan-in", "4", "--lambda", "0.5", "--elm-lambda",
        "0.01", "--reps", "1", "--out", "bench",
    ];
    let first = kcnet(&args, tmp.path());
    ok(&first);
    let text = fs::read_to_string(tmp.path().join("bench/bench.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "model,hidden_dim,seed,configure_s,train_s,evaluate_s,total_s,accuracy");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);

    let acc = |t: &str| -> Vec<(String, String)> {
        t.lines()
            .skip(1)
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                (format!("{}-{}", f[0], f[1]), f[7].to_string())
            })
            .collect()
    };
    let mut again = args.to_vec();
    *again.last_mut().unwrap() = "bench2";
    ok(&kcnet(&again, tmp.path()));
    let text2 = fs::read_to_string(tmp.path().join("bench2/bench.csv")).unwrap();
    assert_eq!(acc(&text), acc(&text2));
}

#[test]
fn dimension_mismatch_has_its_own_exit_code() {
    let tmp = TempDir::new().unwrap();
    let csv = write_csv(tmp.path(), 150, 8);
    let mut args = vec!["fit"];
    args.extend(common(csv.to_str().unwrap(), "run"));
    ok(&kcnet(&args, tmp.path()));
    fs::write(tmp.path().join("narrow.csv"), "label,f0\nx,1\ny,2\n").unwrap();
    let out = kcnet(&["evaluate", "--model", "run/model.kcn", "--csv", "narrow.csv"], tmp.path());
    assert_eq!(out.status.code(), Some(exit::DIMENSION), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn corrupt_model_file_is_parse_error() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("m.kcn"), b"KCNETMDL\x01\x00").unwrap();
    let csv = write_csv(tmp.path(), 30, 9);
    let out = kcnet(&["evaluate", "--model", "m.kcn", "--csv", csv.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(exit::PARSE));
}

fn random_model(seed: u64, d: usize, b: usize, c: usize) -> KcNet<f64> {
    let mut rng = SeededRng::new(seed);
    let mut config = kcnet::ModelConfig::new(d, b);
    config.fan_in = 1 + rng.below(d - 1);
    config.rng_seed = seed;
    let projection = kcnet::sample_projection(&config).unwrap();
    let beta = Array2::from_shape_fn((b, c), |_| rng.uniform(-3.0, 3.0));
    let normalization = Normalization {
        mean: (0..d).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        std: (0..d).map(|_| rng.uniform(0.1, 2.0)).collect(),
        constant: (0..d).map(|_| rng.below(5) == 0).collect(),
    };
    KcNet {
        config,
        projection,
        output: OutputWeights::new(beta),
        normalization,
        class_labels: (0..c).map(|k| format!("class {k}")).collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn model_file_round_trip_predicts_identically(seed in any::<u64>(), d in 2usize..40, b in 1usize..60, c in 2usize..6) {
        let model = random_model(seed, d, b, c);
        let saved = SavedModel::KcNet64(model.clone());
        let SavedModel::KcNet64(back) = SavedModel::from_bytes(&saved.to_bytes()).unwrap() else { unreachable!() };
        prop_assert_eq!(&back, &model);
        let mut rng = SeededRng::new(seed ^ 0x5eed);
        let x = Array2::from_shape_fn((1000, d), |_| rng.uniform(-4.0, 4.0));
        let a = model.predict_logits(x.view()).unwrap();
        let b = back.predict_logits(x.view()).unwrap();
        prop_assert!(a.iter().zip(b.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}
