mod common;

use std::path::{Path, PathBuf};

use common::*;
use tsketch::{
    build_measurement, build_trainer, load_sketch, precompute, predict, AnalyticGate, Circuit,
    CircuitBuilder, DeletionSet, MeasurementConfig, MeasurementKind, Seed,
};

const SEED: &str = "0f0e0d0c0b0a09080706050403020100f0e0d0c0b0a090807060504030201000";

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        write_json(&dir.path().join("trainer.json"), &small_config());
        write_csv(&dir.path().join("data.csv"), &small_data());
        write_json(
            &dir.path().join("measure.json"),
            &MeasurementConfig {
                kind: small_loss(),
                model: None,
            },
        );
        Fixture { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn p(&self, name: &str) -> String {
        path_str(&self.path(name)).to_string()
    }
}

fn args(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn precompute_cmd(fx: &Fixture, extra: &[&str]) -> serde_json::Value {
    let mut v: Vec<String> = [
        "precompute",
        "--trainer",
        &fx.p("trainer.json"),
        "--data",
        &fx.p("data.csv"),
        "--s",
        "3",
        "--k",
        "256",
        "--seed",
        SEED,
        "--out",
        &fx.p("sketch.tskd"),
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    v.extend(extra.iter().map(|s| s.to_string()));
    run_json(&args(&v))
}

#[test]
fn precompute_then_predict_matches_library() {
    let fx = Fixture::new();
    let out = precompute_cmd(&fx, &[]);
    assert_eq!(out["mode"], "seeded");
    assert_eq!(out["n"], 4);
    assert_eq!(out["p"], 2);
    let bytes = std::fs::metadata(fx.path("sketch.tskd")).unwrap().len();
    assert_eq!(out["bytes"].as_u64().unwrap(), bytes);
    assert_eq!(bytes, 65 + 16 * 4 + 16 * 256 * 4 * 2);

    let pred = run_json(&[
        "predict",
        "--sketch",
        &fx.p("sketch.tskd"),
        "--measure",
        &fx.p("measure.json"),
        "--delete",
        "2,4",
        "--m",
        "8",
    ]);

    let cfg = small_config();
    let a = build_trainer(&cfg, &small_data()).unwrap();
    let phi = build_measurement(&small_loss(), cfg.model, 2).unwrap();
    let sk = precompute(&a, 3, 256, SEED.parse::<Seed>().unwrap()).unwrap();
    assert_eq!(load_sketch(&fx.path("sketch.tskd")).unwrap(), sk);
    let want = predict(&sk, &DeletionSet::new(vec![2, 4], 4).unwrap(), &phi, 8).unwrap();
    assert_eq!(pred["prediction"].as_f64().unwrap(), want.re());
    assert_eq!(pred["delete"], serde_json::json!([2, 4]));
    assert_eq!(pred["terms"].as_array().unwrap().len(), 4);
}

#[test]
fn explicit_mode_predicts_identically() {
    let fx = Fixture::new();
    precompute_cmd(&fx, &[]);
    let seeded = run_json(&[
        "predict",
        "--sketch",
        &fx.p("sketch.tskd"),
        "--measure",
        &fx.p("measure.json"),
        "--delete",
        "1",
        "--m",
        "4",
    ]);
    let out = precompute_cmd(&fx, &["--explicit"]);
    assert_eq!(out["mode"], "explicit");
    let explicit = run_json(&[
        "predict",
        "--sketch",
        &fx.p("sketch.tskd"),
        "--measure",
        &fx.p("measure.json"),
        "--delete",
        "1",
        "--m",
        "4",
    ]);
    assert_eq!(seeded["nu"], explicit["nu"]);
}

#[test]
fn retrain_reports_oracle_measurement() {
    let fx = Fixture::new();
    let out = run_json(&[
        "retrain",
        "--trainer",
        &fx.p("trainer.json"),
        "--data",
        &fx.p("data.csv"),
        "--measure",
        &fx.p("measure.json"),
        "--delete",
        "3",
    ]);
    let cfg = small_config();
    let a = build_trainer(&cfg, &small_data()).unwrap();
    let phi = build_measurement(&small_loss(), cfg.model, 2).unwrap();
    let theta =
        tsketch::retrain_oracle(&a, &DeletionSet::new(vec![3], 4).unwrap().downweights(1.0))
            .unwrap();
    assert_eq!(
        out["measurement"].as_f64().unwrap(),
        phi.eval_scalar(&theta).unwrap()[0].re
    );
    assert_eq!(out["parameters"].as_array().unwrap().len(), 2);
}

fn write_circuit(path: &Path, f: &Circuit) {
    std::fs::write(path, f.to_json_string()).unwrap();
}

fn product_circuit() -> Circuit {
    let mut b = CircuitBuilder::new(2);
    let x = b.input(0);
    let y = b.input(1);
    let m = b.mul(&[x, y]);
    b.output(m);
    b.build().unwrap()
}

#[test]
fn sketch_fn_and_eval() {
    let fx = Fixture::new();
    write_circuit(&fx.path("f.json"), &product_circuit());
    std::fs::write(fx.path("base.json"), "[1, [0.5, 0]]").unwrap();
    std::fs::write(fx.path("base_point.json"), "[1, 0.5]").unwrap();
    run_json(&[
        "sketch-fn",
        "--circuit",
        &fx.p("f.json"),
        "--base",
        &fx.p("base.json"),
        "--s",
        "2",
        "--k",
        "64",
        "--seed",
        SEED,
        "--out",
        &fx.p("f.tskd"),
    ]);
    let out = run_json(&[
        "eval",
        "--sketch",
        &fx.p("f.tskd"),
        "--point",
        &fx.p("base_point.json"),
        "--m",
        "4",
    ]);
    // at the base point the estimate is exact
    assert_eq!(out["value"], serde_json::json!([[0.5, 0.0]]));
}

#[test]
fn oracle_writes_tensors() {
    let fx = Fixture::new();
    write_circuit(&fx.path("f.json"), &product_circuit());
    std::fs::write(fx.path("base.json"), "[0, 0]").unwrap();
    let out = run_json(&[
        "oracle",
        "--circuit",
        &fx.p("f.json"),
        "--base",
        &fx.p("base.json"),
        "--s",
        "2",
        "--out",
        &fx.p("tensors.json"),
        "--gamma",
        "2",
    ]);
    let frob = out["frobenius"].as_array().unwrap();
    assert!((frob[2].as_f64().unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
    assert_eq!(out["complete"], true);
    assert_eq!(out["alpha"]["argmax_r"], 2);
    let file: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fx.path("tensors.json")).unwrap()).unwrap();
    let t2 = &file["tensors"][2];
    assert_eq!(t2["shape"], serde_json::json!([1, 2, 2]));
    assert_eq!(t2["entries"][1], serde_json::json!([1.0, 0.0]));
}

#[test]
fn oracle_refuses_large_inputs() {
    let fx = Fixture::new();
    let mut b = CircuitBuilder::new(5);
    let x = b.input(4);
    b.output(x);
    write_circuit(&fx.path("f.json"), &b.build().unwrap());
    std::fs::write(fx.path("base.json"), "[0, 0, 0, 0, 0]").unwrap();
    let out = run(&[
        "oracle",
        "--circuit",
        &fx.p("f.json"),
        "--base",
        &fx.p("base.json"),
        "--s",
        "2",
        "--out",
        &fx.p("t.json"),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stability_writes_profile_csv() {
    let fx = Fixture::new();
    let out = run_json(&[
        "stability",
        "--trainer",
        &fx.p("trainer.json"),
        "--data",
        &fx.p("data.csv"),
        "--measure",
        &fx.p("measure.json"),
        "--rmax",
        "3",
        "--trials",
        "5",
        "--seed",
        SEED,
        "--out",
        &fx.p("profile.csv"),
        "--gamma",
        "4",
    ]);
    assert_eq!(out["orders"].as_array().unwrap().len(), 3);
    assert!(out["alpha"]["value"].as_f64().unwrap() > 0.0);
    let text = std::fs::read_to_string(fx.path("profile.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "r,trial,estimate,log_estimate");
    assert_eq!(lines.len(), 1 + 3 * 5);
}

#[test]
fn sweep_with_sketch_column() {
    let fx = Fixture::new();
    let out = run_json(&[
        "sweep",
        "--trainer",
        &fx.p("trainer.json"),
        "--data",
        &fx.p("data.csv"),
        "--measure",
        &fx.p("measure.json"),
        "--delete",
        "1",
        "--grid",
        "0:1:0.25",
        "--s",
        "2",
        "--k",
        "128",
        "--seed",
        SEED,
        "--m",
        "4",
        "--out",
        &fx.p("curve.csv"),
    ]);
    assert_eq!(out["points"].as_array().unwrap().len(), 5);
    let text = std::fs::read_to_string(fx.path("curve.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "z,retrain,taylor_1,taylor_2,sketch");
    // at z = 0 every column is the undeleted measurement
    let first: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert!(first[1..].iter().all(|&v| v == first[1]));
}

#[test]
fn measurement_file_may_be_a_circuit() {
    let fx = Fixture::new();
    let phi = build_measurement(
        &MeasurementKind::ParameterProbe { index: 1 },
        small_config().model,
        2,
    )
    .unwrap();
    write_circuit(&fx.path("phi.json"), &phi);
    let out = run_json(&[
        "retrain",
        "--trainer",
        &fx.p("trainer.json"),
        "--data",
        &fx.p("data.csv"),
        "--measure",
        &fx.p("phi.json"),
    ]);
    assert_eq!(out["measurement"], out["parameters"][1]);
}

#[test]
fn exit_codes() {
    let fx = Fixture::new();
    // usage: missing flags, bad seed, bad epsilon
    assert_eq!(run(&["params", "--epsilon", "0.1"]).status.code(), Some(2));
    assert_eq!(
        run(&["params", "--epsilon", "1.5", "--delta", "0.1"])
            .status
            .code(),
        Some(2)
    );
    let bad_seed = run(&[
        "precompute",
        "--trainer",
        &fx.p("trainer.json"),
        "--data",
        &fx.p("data.csv"),
        "--s",
        "2",
        "--k",
        "4",
        "--seed",
        "abc",
        "--out",
        &fx.p("x.tskd"),
    ]);
    assert_eq!(bad_seed.status.code(), Some(2));

    // domain: 1/x sketched at x* = 0
    let mut b = CircuitBuilder::new(1);
    let x = b.input(0);
    let r = b.unary(AnalyticGate::Reciprocal, x);
    b.output(r);
    write_circuit(&fx.path("rec.json"), &b.build().unwrap());
    std::fs::write(fx.path("zero.json"), "[0]").unwrap();
    let out = run(&[
        "sketch-fn",
        "--circuit",
        &fx.p("rec.json"),
        "--base",
        &fx.p("zero.json"),
        "--s",
        "2",
        "--k",
        "4",
        "--seed",
        SEED,
        "--out",
        &fx.p("rec.tskd"),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let body: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(body["error"]["kind"], "domain");
    assert!(!fx.path("rec.tskd").exists());

    // corrupt sketch file
    std::fs::write(fx.path("bad.tskd"), b"TSKD\x01\x00\x00\x00").unwrap();
    let out = run(&[
        "eval",
        "--sketch",
        &fx.p("bad.tskd"),
        "--point",
        &fx.p("zero.json"),
        "--m",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // missing file
    let out = run(&[
        "eval",
        "--sketch",
        &fx.p("missing.tskd"),
        "--point",
        &fx.p("zero.json"),
        "--m",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));

    // deletion index outside the training set
    precompute_cmd(&fx, &[]);
    let out = run(&[
        "predict",
        "--sketch",
        &fx.p("sketch.tskd"),
        "--measure",
        &fx.p("measure.json"),
        "--delete",
        "9",
        "--m",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn plain_mean_aggregator() {
    let fx = Fixture::new();
    precompute_cmd(&fx, &[]);
    let out = run_json(&[
        "predict",
        "--sketch",
        &fx.p("sketch.tskd"),
        "--measure",
        &fx.p("measure.json"),
        "--delete",
        "1,3",
        "--mean",
    ]);
    assert_eq!(out["aggregator"], "mean");

    let sk = load_sketch(&fx.path("sketch.tskd")).unwrap();
    let phi = build_measurement(&small_loss(), small_config().model, 2).unwrap();
    let want = tsketch::MeasuredSketch::new(&sk, &phi)
        .unwrap()
        .predict(
            &DeletionSet::new(vec![1, 3], 4).unwrap(),
            tsketch::Aggregator::Mean,
            1.0,
        )
        .unwrap();
    assert_eq!(out["prediction"].as_f64().unwrap(), want.re());

    let neither = run(&[
        "predict",
        "--sketch",
        &fx.p("sketch.tskd"),
        "--measure",
        &fx.p("measure.json"),
    ]);
    assert_eq!(neither.status.code(), Some(2));
}
