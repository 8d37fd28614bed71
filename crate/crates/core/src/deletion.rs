//! Sketch-based data deletion: precompute once from the learning
//! algorithm, then predict any measurement after deleting any subset of
//! the training examples.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::estimator::Aggregator;
use crate::sampling::{DirectionSource, Seed};
use crate::sketch::{estimate, sketch, sketch_with_directions, SketchData};

/// Training-example indices to delete, one-based, sorted and unique.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeletionSet {
    indices: Vec<usize>,
    n: usize,
}

impl DeletionSet {
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<DeletionSet> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&bad) = indices.iter().find(|&&i| i == 0 || i > n) {
            return Err(Error::invalid(format!(
                "deletion index {bad} outside [1, {n}]"
            )));
        }
        Ok(DeletionSet { indices, n })
    }

    pub fn empty(n: usize) -> DeletionSet {
        DeletionSet {
            indices: Vec::new(),
            n,
        }
    }

    /// Parses a comma-separated list such as `3,7,18`. An empty string is
    /// the empty set.
    pub fn parse(list: &str, n: usize) -> Result<DeletionSet> {
        let indices = list
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| Error::invalid(format!("bad deletion index {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        DeletionSet::new(indices, n)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Downweight vector `z · 1_D`.
    pub fn downweights(&self, z: f64) -> Vec<Complex64> {
        let mut w = vec![Complex64::new(0.0, 0.0); self.n];
        for &i in &self.indices {
            w[i - 1] = Complex64::new(z, 0.0);
        }
        w
    }
}

/// Sketch parameters achieving error `ε · α(4√d)` with probability `1 - δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParameterChoice {
    pub epsilon: f64,
    pub delta: f64,
    pub s: usize,
    pub m: usize,
    pub k: usize,
}

/// `s = ⌈log₄(2/ε)⌉`, `m = ⌈8 ln(2s/δ)⌉`, `k = ⌈16m/ε²⌉`.
pub fn select_parameters(epsilon: f64, delta: f64) -> Result<ParameterChoice> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    // Smallest s with 4^s >= 2/ε, found exactly rather than through a
    // floating-point logarithm.
    let target = 2.0 / epsilon;
    let mut s = 0usize;
    let mut pow = 1.0f64;
    while pow < target {
        pow *= 4.0;
        s += 1;
    }
    let m = (8.0 * (2.0 * s as f64 / delta).ln()).ceil() as usize;
    let k = (16.0 * m as f64 / (epsilon * epsilon)).ceil() as usize;
    Ok(ParameterChoice {
        epsilon,
        delta,
        s,
        m,
        k,
    })
}

/// Sketches the learning algorithm at the all-zero downweight vector.
pub fn precompute(a: &Circuit, s: usize, k: usize, seed: Seed) -> Result<SketchData> {
    sketch(
        &vec![Complex64::new(0.0, 0.0); a.num_inputs()],
        a,
        s,
        k,
        seed,
    )
}

/// As [`precompute`], with caller-provided directions.
pub fn precompute_with_directions(
    a: &Circuit,
    s: usize,
    directions: DirectionSource,
) -> Result<SketchData> {
    sketch_with_directions(
        &vec![Complex64::new(0.0, 0.0); a.num_inputs()],
        a,
        s,
        directions,
    )
}

/// Counterfactual estimate. `re()` is the predicted measurement; the
/// imaginary part is estimator noise for real-valued problems.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub nu: Complex64,
    /// `ν_0, ..., ν_s`.
    pub terms: Vec<Complex64>,
}

impl Prediction {
    pub fn re(&self) -> f64 {
        self.nu.re
    }

    pub fn imag_abs(&self) -> f64 {
        self.nu.im.abs()
    }
}

/// A sketch with one measurement already pushed through every direction:
/// `q_i = φ(p_i)` over the jet ring. Reusable across deletion sets.
#[derive(Debug, Clone)]
pub struct MeasuredSketch<'a> {
    sketch: &'a SketchData,
    /// Row-major `k × (s+1)`.
    q: Vec<Complex64>,
}

impl<'a> MeasuredSketch<'a> {
    pub fn new(sketch: &'a SketchData, phi: &Circuit) -> Result<Self> {
        if phi.num_inputs() != sketch.p() {
            return Err(Error::Dimension {
                what: "measurement inputs (p)",
                expected: sketch.p(),
                got: phi.num_inputs(),
            });
        }
        if phi.num_outputs() != 1 {
            return Err(Error::Dimension {
                what: "measurement outputs",
                expected: 1,
                got: phi.num_outputs(),
            });
        }
        let s = sketch.s();
        let per_direction: Vec<Result<Vec<Complex64>>> = (0..sketch.k())
            .into_par_iter()
            .map(|i| {
                let out = phi
                    .eval_jets(s, &sketch.jets(i))
                    .map_err(|e| e.at_direction(i))?;
                Ok(out[0].coeffs().to_vec())
            })
            .collect();
        let mut q = Vec::with_capacity(sketch.k() * (s + 1));
        for block in per_direction {
            q.extend(block?);
        }
        Ok(MeasuredSketch { sketch, q })
    }

    /// `q_{i,r}`.
    pub fn coeff(&self, i: usize, r: usize) -> Complex64 {
        self.q[i * (self.sketch.s() + 1) + r]
    }

    /// Prediction for the downweight vector `downweight · 1_D`.
    pub fn predict(
        &self,
        deletion: &DeletionSet,
        aggregator: Aggregator,
        downweight: f64,
    ) -> Result<Prediction> {
        if deletion.n() != self.sketch.n() {
            return Err(Error::Dimension {
                what: "deletion set universe (n)",
                expected: self.sketch.n(),
                got: deletion.n(),
            });
        }
        if !(0.0..=1.0).contains(&downweight) {
            return Err(Error::invalid(format!(
                "downweight must lie in [0, 1], got {downweight}"
            )));
        }
        let x = deletion.downweights(downweight);
        let est = estimate(
            self.sketch.directions(),
            self.sketch.base_point(),
            &self.q,
            1,
            self.sketch.s(),
            &x,
            aggregator,
        )?;
        Ok(Prediction {
            nu: est.total[0],
            terms: est.terms.into_iter().map(|t| t[0]).collect(),
        })
    }
}

/// Predicts `(φ ∘ A)(1_D)` with median-of-means over `m` blocks.
pub fn predict(
    sk: &SketchData,
    deletion: &DeletionSet,
    phi: &Circuit,
    m: usize,
) -> Result<Prediction> {
    MeasuredSketch::new(sk, phi)?.predict(deletion, Aggregator::MedianOfMeans { blocks: m }, 1.0)
}
