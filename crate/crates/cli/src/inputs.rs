//! File loading and JSON shapes shared by the subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use tsketch::{
    build_measurement, build_trainer, Circuit, Complex64, Dataset, MeasurementConfig, ModelKind,
    TrainerConfig,
};

use crate::CliError;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn input_error(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Lib(tsketch::Error::Input {
        path: path.to_path_buf(),
        message: message.into(),
    })
}

fn with_path(path: &Path) -> impl Fn(tsketch::Error) -> CliError + '_ {
    move |e| match e {
        tsketch::Error::InvalidArgument(msg) => input_error(path, msg),
        other => CliError::Lib(other),
    }
}

/// A complex vector written as a JSON array whose entries are either plain
/// numbers or `[re, im]` pairs.
pub fn parse_vector(text: &str, path: &Path) -> Result<Vec<Complex64>, CliError> {
    let v: Value = serde_json::from_str(text).map_err(|e| input_error(path, e.to_string()))?;
    let items = v
        .as_array()
        .ok_or_else(|| input_error(path, "expected a JSON array"))?;
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let bad = || input_error(path, format!("entry {i}: expected a number or [re, im]"));
            let c = match item {
                Value::Number(x) => Complex64::new(x.as_f64().ok_or_else(bad)?, 0.0),
                Value::Array(pair) if pair.len() == 2 => Complex64::new(
                    pair[0].as_f64().ok_or_else(bad)?,
                    pair[1].as_f64().ok_or_else(bad)?,
                ),
                _ => return Err(bad()),
            };
            if c.re.is_finite() && c.im.is_finite() {
                Ok(c)
            } else {
                Err(input_error(path, format!("entry {i} is not finite")))
            }
        })
        .collect()
}

pub fn load_vector(path: &Path) -> Result<Vec<Complex64>, CliError> {
    parse_vector(&read_text(path)?, path)
}

pub fn load_circuit(path: &Path) -> Result<Circuit, CliError> {
    Circuit::from_json_str(&read_text(path)?).map_err(with_path(path))
}

pub struct Training {
    pub config: TrainerConfig,
    pub data: Dataset,
    pub circuit: Circuit,
}

pub fn load_training(cfg: &Path, data: &Path) -> Result<Training, CliError> {
    let config = TrainerConfig::from_json_str(&read_text(cfg)?).map_err(with_path(cfg))?;
    let data = Dataset::from_csv_path(data)?;
    let circuit = build_trainer(&config, &data)?;
    Ok(Training {
        config,
        data,
        circuit,
    })
}

/// A measurement file holds either a measurement description or a full
/// circuit (recognized by its `nodes` field). `model` is the trainer's model
/// when known; a description naming a different model is rejected.
pub fn load_measurement(
    path: &Path,
    p: usize,
    model: Option<ModelKind>,
) -> Result<Circuit, CliError> {
    let text = read_text(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| input_error(path, e.to_string()))?;
    if value.get("nodes").is_some() {
        let phi = Circuit::from_json_str(&text).map_err(with_path(path))?;
        return Ok(phi);
    }
    let cfg = MeasurementConfig::from_json_str(&text).map_err(with_path(path))?;
    let model = match (cfg.model, model) {
        (Some(a), Some(b)) if a != b => {
            return Err(input_error(
                path,
                format!("measurement model {a:?} differs from trainer model {b:?}"),
            ))
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => ModelKind::default(),
    };
    build_measurement(&cfg.kind, model, p).map_err(with_path(path))
}

pub fn complex_json(c: Complex64) -> Value {
    json!([c.re, c.im])
}

pub fn complex_list(v: &[Complex64]) -> Value {
    Value::Array(v.iter().map(|&c| complex_json(c)).collect())
}

/// `start:stop:step`, inclusive of `stop` up to rounding.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("grid must be start:stop:step, got {text:?}"));
    }
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
    let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(format!("grid {text:?} needs step > 0 and start <= stop"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        return Err(format!("grid {text:?} has too many points"));
    }
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

pub fn write_json(path: &PathBuf, value: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    fs::write(path, text + "\n").map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints() {
        let g = parse_grid("0:1:0.1").unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g[0], 0.0);
        assert!((g[10] - 1.0).abs() < 1e-12);
        assert_eq!(parse_grid("0.5:0.5:1").unwrap(), vec![0.5]);
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("0:1").is_err());
    }

    #[test]
    fn vector_forms() {
        let p = Path::new("x.json");
        let v = parse_vector("[1, [0.5, -2], 0]", p).unwrap();
        assert_eq!(v[1], Complex64::new(0.5, -2.0));
        assert!(parse_vector("{\"a\": 1}", p).is_err());
        assert!(parse_vector("[[1, 2, 3]]", p).is_err());
    }
}
