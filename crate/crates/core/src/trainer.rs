//! Toy learning algorithms as circuits over per-example downweights.
//!
//! One pass of downweighted SGD with batch size 1 visits the examples in
//! order and applies `θ ← θ - (1 - w_i) · η · ∇ℓ_i(θ)`. Gradients are
//! written out by hand for each model. [`simulate`] runs the same update
//! loop directly in `f64` with the operations in the same order as the
//! circuit, so the two agree bit for bit on real inputs.

use std::io::Read;
use std::path::Path;

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, CircuitBuilder, NodeId};
use crate::error::{Error, Result};

/// Model family trained by the toy algorithm.
///
/// * `linear_regression`: `ŷ = ⟨x, θ⟩`, `p = d`.
/// * `quadratic_mlp`: `ŷ = Σ_h v_h (u_h · x)²` with `p = hidden · (d + 1)`;
///   parameters are `U` row-major followed by `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    LinearRegression,
    QuadraticMlp {
        hidden: usize,
    },
}

impl ModelKind {
    pub fn num_params(&self, d: usize) -> usize {
        match *self {
            ModelKind::LinearRegression => d,
            ModelKind::QuadraticMlp { hidden } => hidden * (d + 1),
        }
    }

    /// Feature dimension implied by `p` parameters.
    pub fn feature_dim(&self, p: usize) -> Result<usize> {
        match *self {
            ModelKind::LinearRegression => Ok(p),
            ModelKind::QuadraticMlp { hidden } => {
                if hidden == 0 || !p.is_multiple_of(hidden) || p / hidden < 2 {
                    return Err(Error::invalid(format!(
                        "p = {p} is not hidden·(d+1) for hidden = {hidden}"
                    )));
                }
                Ok(p / hidden - 1)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ModelKind::QuadraticMlp { hidden: 0 } => {
                Err(Error::invalid("quadratic_mlp needs hidden >= 1"))
            }
            _ => Ok(()),
        }
    }
}

/// Training examples: real feature vectors and real targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Dataset> {
        if features.is_empty() {
            return Err(Error::invalid("dataset is empty"));
        }
        if features.len() != targets.len() {
            return Err(Error::Dimension {
                what: "dataset targets",
                expected: features.len(),
                got: targets.len(),
            });
        }
        let d = features[0].len();
        if d == 0 {
            return Err(Error::invalid("examples need at least one feature"));
        }
        for (i, row) in features.iter().enumerate() {
            if row.len() != d {
                return Err(Error::invalid(format!(
                    "example {} has {} features, expected {d}",
                    i + 1,
                    row.len()
                )));
            }
        }
        if features
            .iter()
            .flatten()
            .chain(&targets)
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("dataset values must be finite"));
        }
        Ok(Dataset { features, targets })
    }

    /// Reads CSV rows of `features..., target`. A first row that does not
    /// parse as numbers is treated as a header.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut features = Vec::new();
        let mut targets = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::invalid(format!("CSV: {e}")))?;
            let parsed: std::result::Result<Vec<f64>, _> =
                record.iter().map(|f| f.parse::<f64>()).collect();
            let mut row = match parsed {
                Ok(row) => row,
                Err(_) if line == 0 => continue,
                Err(e) => {
                    return Err(Error::invalid(format!("CSV row {}: {e}", line + 1)));
                }
            };
            if row.len() < 2 {
                return Err(Error::invalid(format!(
                    "CSV row {} needs at least one feature and a target",
                    line + 1
                )));
            }
            targets.push(row.pop().expect("row has a target"));
            features.push(row);
        }
        Dataset::new(features, targets)
    }

    pub fn from_csv_path(path: &Path) -> Result<Dataset> {
        let file = std::fs::File::open(path).map_err(|e| Error::Input {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Dataset::from_csv_reader(file).map_err(|e| Error::Input {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Copy with example `i` (zero-based) replaced.
    pub fn with_example(&self, i: usize, features: Vec<f64>, target: f64) -> Result<Dataset> {
        let mut out = self.clone();
        out.features[i] = features;
        out.targets[i] = target;
        Dataset::new(out.features, out.targets)
    }
}

/// Hyperparameters of the toy trainer. Batch size is always 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerConfig {
    #[serde(default)]
    pub model: ModelKind,
    pub learning_rate: f64,
    pub epochs: usize,
    #[serde(default)]
    pub init_seed: u64,
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<TrainerConfig> {
        let cfg: TrainerConfig =
            serde_json::from_str(s).map_err(|e| Error::invalid(format!("trainer config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn num_params(&self, data: &Dataset) -> usize {
        self.model.num_params(data.dim())
    }

    /// Initial parameters: `0.1 · (2u - 1)` with `u` uniform on `[0, 1)`
    /// from ChaCha20 seeded with `init_seed`, one draw per parameter.
    pub fn initial_parameters(&self, p: usize) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(self.init_seed);
        (0..p)
            .map(|_| {
                let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
                0.1 * (2.0 * u - 1.0)
            })
            .collect()
    }
}

/// Circuit nodes for `Σ_j x_j θ_j`, folded in `j` order, with `tail`
/// appended as the final addend when present.
fn dot_nodes(b: &mut CircuitBuilder, x: &[f64], theta: &[NodeId], tail: Option<NodeId>) -> NodeId {
    let mut terms: Vec<NodeId> = x
        .iter()
        .zip(theta)
        .map(|(&xj, &t)| {
            let c = b.real(xj);
            b.mul(&[c, t])
        })
        .collect();
    terms.extend(tail);
    b.add(&terms)
}

/// Model output `ŷ(x; θ)` and, for the MLP, the hidden activations.
fn model_nodes(
    b: &mut CircuitBuilder,
    model: ModelKind,
    x: &[f64],
    theta: &[NodeId],
    tail: Option<NodeId>,
) -> (NodeId, Vec<NodeId>, Vec<NodeId>) {
    match model {
        ModelKind::LinearRegression => (dot_nodes(b, x, theta, tail), vec![], vec![]),
        ModelKind::QuadraticMlp { hidden } => {
            let d = x.len();
            let acts: Vec<NodeId> = (0..hidden)
                .map(|h| dot_nodes(b, x, &theta[h * d..(h + 1) * d], None))
                .collect();
            let squares: Vec<NodeId> = acts.iter().map(|&a| b.mul(&[a, a])).collect();
            let v = &theta[hidden * d..];
            let mut terms: Vec<NodeId> = squares
                .iter()
                .zip(v)
                .map(|(&sq, &vh)| b.mul(&[vh, sq]))
                .collect();
            terms.extend(tail);
            (b.add(&terms), acts, squares)
        }
    }
}

/// The learning algorithm as a circuit from `n` downweights to `p`
/// trained parameters.
pub fn build_trainer(cfg: &TrainerConfig, data: &Dataset) -> Result<Circuit> {
    cfg.validate()?;
    let n = data.len();
    let d = data.dim();
    let p = cfg.num_params(data);
    let mut b = CircuitBuilder::new(n);
    let mut theta: Vec<NodeId> = cfg
        .initial_parameters(p)
        .into_iter()
        .map(|v| b.real(v))
        .collect();
    let lr_factor = -2.0 * cfg.learning_rate;
    for _ in 0..cfg.epochs {
        for (i, (x, &y)) in data.features.iter().zip(&data.targets).enumerate() {
            let neg_y = b.real(-y);
            let (resid, acts, squares) = model_nodes(&mut b, cfg.model, x, &theta, Some(neg_y));
            // keep = 1 + (-1)·w_i
            let one = b.real(1.0);
            let minus = b.real(-1.0);
            let w = b.input(i);
            let neg_w = b.mul(&[minus, w]);
            let keep = b.add(&[one, neg_w]);
            let factor = b.real(lr_factor);
            let step = b.mul(&[keep, factor, resid]);
            theta = match cfg.model {
                ModelKind::LinearRegression => x
                    .iter()
                    .zip(&theta)
                    .map(|(&xj, &t)| {
                        let c = b.real(xj);
                        let delta = b.mul(&[step, c]);
                        b.add(&[t, delta])
                    })
                    .collect(),
                ModelKind::QuadraticMlp { hidden } => {
                    let mut next = Vec::with_capacity(p);
                    let two = b.real(2.0);
                    for h in 0..hidden {
                        let vh = theta[hidden * d + h];
                        for j in 0..d {
                            let c = b.real(x[j]);
                            let delta = b.mul(&[step, two, vh, acts[h], c]);
                            next.push(b.add(&[theta[h * d + j], delta]));
                        }
                    }
                    for h in 0..hidden {
                        let delta = b.mul(&[step, squares[h]]);
                        next.push(b.add(&[theta[hidden * d + h], delta]));
                    }
                    next
                }
            };
        }
    }
    for t in theta {
        b.output(t);
    }
    b.build()
}

fn dot(x: &[f64], theta: &[f64]) -> f64 {
    let mut acc = x[0] * theta[0];
    for j in 1..x.len() {
        acc += x[j] * theta[j];
    }
    acc
}

/// Plain `f64` training loop with the circuit's operation order.
pub fn simulate(cfg: &TrainerConfig, data: &Dataset, w: &[f64]) -> Result<Vec<f64>> {
    cfg.validate()?;
    if w.len() != data.len() {
        return Err(Error::Dimension {
            what: "downweights",
            expected: data.len(),
            got: w.len(),
        });
    }
    let d = data.dim();
    let mut theta = cfg.initial_parameters(cfg.num_params(data));
    let lr_factor = -2.0 * cfg.learning_rate;
    for _ in 0..cfg.epochs {
        for (i, (x, &y)) in data.features.iter().zip(&data.targets).enumerate() {
            let keep = 1.0 - w[i];
            match cfg.model {
                ModelKind::LinearRegression => {
                    let resid = dot(x, &theta) + (-y);
                    let step = keep * lr_factor * resid;
                    for j in 0..d {
                        theta[j] += step * x[j];
                    }
                }
                ModelKind::QuadraticMlp { hidden } => {
                    let acts: Vec<f64> = (0..hidden)
                        .map(|h| dot(x, &theta[h * d..(h + 1) * d]))
                        .collect();
                    let squares: Vec<f64> = acts.iter().map(|a| a * a).collect();
                    let mut resid = theta[hidden * d] * squares[0];
                    for h in 1..hidden {
                        resid += theta[hidden * d + h] * squares[h];
                    }
                    resid += -y;
                    let step = keep * lr_factor * resid;
                    let old = theta.clone();
                    for h in 0..hidden {
                        let vh = old[hidden * d + h];
                        for j in 0..d {
                            theta[h * d + j] = old[h * d + j] + step * 2.0 * vh * acts[h] * x[j];
                        }
                    }
                    for h in 0..hidden {
                        theta[hidden * d + h] = old[hidden * d + h] + step * squares[h];
                    }
                }
            }
        }
    }
    Ok(theta)
}

/// Ground-truth parameters `A(w)` by direct evaluation.
pub fn retrain_oracle(a: &Circuit, w: &[Complex64]) -> Result<Vec<Complex64>> {
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("downweights must be finite"));
    }
    a.eval_scalar(w)
}

/// What a measurement function reads from trained parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasurementKind {
    /// Squared error of the model on one example.
    LossOnExample { features: Vec<f64>, target: f64 },
    /// A single parameter `θ_index` (zero-based).
    ParameterProbe { index: usize },
    /// Model output coordinate `coordinate` on `features`. The toy models
    /// have one output coordinate.
    LogitProbe {
        features: Vec<f64>,
        #[serde(default)]
        coordinate: usize,
    },
}

/// Measurement description as stored in JSON. `model` defaults to linear
/// regression when the file does not say.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementConfig {
    #[serde(flatten)]
    pub kind: MeasurementKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelKind>,
}

impl MeasurementConfig {
    pub fn from_json_str(s: &str) -> Result<MeasurementConfig> {
        serde_json::from_str(s).map_err(|e| Error::invalid(format!("measurement config: {e}")))
    }
}

/// The measurement `φ` as a circuit from `p` parameters to one output.
pub fn build_measurement(kind: &MeasurementKind, model: ModelKind, p: usize) -> Result<Circuit> {
    model.validate()?;
    let mut b = CircuitBuilder::new(p);
    let theta: Vec<NodeId> = (0..p).map(|i| b.input(i)).collect();
    let check_features = |features: &[f64]| -> Result<()> {
        let d = model.feature_dim(p)?;
        if features.len() != d {
            return Err(Error::Dimension {
                what: "measurement features",
                expected: d,
                got: features.len(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("measurement features must be finite"));
        }
        Ok(())
    };
    let out = match kind {
        MeasurementKind::ParameterProbe { index } => {
            if *index >= p {
                return Err(Error::invalid(format!(
                    "parameter index {index} out of range for p = {p}"
                )));
            }
            theta[*index]
        }
        MeasurementKind::LossOnExample { features, target } => {
            check_features(features)?;
            let neg_y = b.real(-target);
            let (resid, _, _) = model_nodes(&mut b, model, features, &theta, Some(neg_y));
            b.mul(&[resid, resid])
        }
        MeasurementKind::LogitProbe {
            features,
            coordinate,
        } => {
            check_features(features)?;
            if *coordinate != 0 {
                return Err(Error::invalid(format!(
                    "output coordinate {coordinate} out of range (model has 1 output)"
                )));
            }
            model_nodes(&mut b, model, features, &theta, None).0
        }
    };
    b.output(out);
    b.build()
}
