#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tsketch::{Dataset, MeasurementKind, ModelKind, TrainerConfig};

/// Eight examples with three features for the end-to-end deletion runs.
pub fn deletion_data() -> Dataset {
    Dataset::new(
        vec![
            vec![0.9, -0.3, 0.5],
            vec![-0.4, 0.8, 0.2],
            vec![0.1, 0.6, -0.9],
            vec![0.7, 0.2, 0.4],
            vec![-0.8, -0.5, 0.3],
            vec![0.3, -0.9, -0.2],
            vec![0.5, 0.4, 0.8],
            vec![-0.2, 0.1, -0.6],
        ],
        vec![1.5, -0.9, -1.2, 1.1, -0.4, 0.9, 1.6, -0.1],
    )
    .unwrap()
}

pub fn deletion_config() -> TrainerConfig {
    TrainerConfig {
        model: ModelKind::LinearRegression,
        learning_rate: 0.05,
        epochs: 2,
        init_seed: 7,
    }
}

pub fn held_out_loss() -> MeasurementKind {
    MeasurementKind::LossOnExample {
        features: vec![0.6, -0.2, 0.7],
        target: 0.3,
    }
}

/// Four examples with two features, small enough for the dense oracle.
pub fn small_data() -> Dataset {
    Dataset::new(
        vec![
            vec![1.0, 0.3],
            vec![-0.5, 0.9],
            vec![0.4, -0.8],
            vec![0.7, 0.6],
        ],
        vec![0.8, 0.1, -0.6, 0.9],
    )
    .unwrap()
}

pub fn small_config() -> TrainerConfig {
    TrainerConfig {
        model: ModelKind::LinearRegression,
        learning_rate: 0.1,
        epochs: 1,
        init_seed: 3,
    }
}

pub fn small_loss() -> MeasurementKind {
    MeasurementKind::LossOnExample {
        features: vec![0.5, -0.4],
        target: 0.2,
    }
}

pub fn write_csv(path: &Path, data: &Dataset) {
    let mut text = String::new();
    let d = data.dim();
    let header: Vec<String> = (0..d)
        .map(|j| format!("x{j}"))
        .chain(std::iter::once("y".to_string()))
        .collect();
    text.push_str(&header.join(","));
    text.push('\n');
    for (x, y) in data.features().iter().zip(data.targets()) {
        let row: Vec<String> = x
            .iter()
            .chain(std::iter::once(y))
            .map(f64::to_string)
            .collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) {
    std::fs::write(path, serde_json::to_string(value).unwrap()).unwrap();
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_tsketch"))
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

pub fn run_json(args: &[&str]) -> serde_json::Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "tsketch {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}
