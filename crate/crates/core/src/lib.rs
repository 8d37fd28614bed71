//! Local sketches of arithmetic circuits.
//!
//! A circuit `f: C^n -> C^p` is evaluated over truncated power series
//! `C[z]/(z^{s+1})` along `k` random complex unit directions at a base
//! point. The resulting per-direction Taylor coefficients form a sketch
//! from which `f(x)` can be estimated at nearby points without touching
//! the circuit again. Applied to a training procedure viewed as a circuit
//! in per-example downweights, the sketch predicts the effect of deleting
//! training examples without retraining.
//!
//! Module map:
//!
//! - [`jet`]: truncated complex power series and analytic gates.
//! - [`circuit`]: circuit IR, validation, JSON form, ring-generic evaluation.
//! - [`sampling`]: seeded Haar directions.
//! - [`estimator`]: `n[r]`, the rank-one estimator, median-of-means.
//! - [`sketch`]: sketching and sketch evaluation.
//! - [`deletion`]: precompute/predict for deletion sets, parameter choice.
//! - [`trainer`]: toy downweighted-SGD trainers and measurements.
//! - [`oracle`]: exact derivative tensors at tiny scale.
//! - [`stability`]: Monte Carlo probing of per-order Taylor norms.
//! - [`persistence`]: the binary sketch file format.

pub mod circuit;
pub mod deletion;
pub mod error;
pub mod estimator;
pub mod jet;
pub mod oracle;
pub mod persistence;
pub mod sampling;
pub mod sketch;
pub mod stability;
pub mod trainer;

pub use num_complex::Complex64;

pub use circuit::{Circuit, CircuitBuilder, CircuitDraft, NodeId, Op, RingValue};
pub use deletion::{
    precompute, predict, select_parameters, DeletionSet, MeasuredSketch, ParameterChoice,
    Prediction,
};
pub use error::{Error, PersistError, Result};
pub use estimator::{median_of_means, sym_dim, Aggregator};
pub use jet::{AnalyticGate, Jet};
pub use oracle::{
    alpha_exact, exact_norm_profile, exact_taylor_tensors, frobenius_profile, OracleLimits,
    TaylorTensors,
};
pub use persistence::{load_sketch, save_sketch};
pub use sampling::{DirectionSource, Seed};
pub use sketch::{sketch, sketch_eval, sketch_eval_terms, Estimate, SketchData};
pub use stability::{fit_alpha, probe, StabilityProfile};
pub use trainer::{
    build_measurement, build_trainer, retrain_oracle, Dataset, MeasurementConfig, MeasurementKind,
    ModelKind, TrainerConfig,
};
