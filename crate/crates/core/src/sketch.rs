//! Local sketching of a circuit at a base point, and evaluation of the
//! sketch at nearby points.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::estimator::{inner, powers, sym_dim, Aggregator};
use crate::jet::Jet;
use crate::sampling::{DirectionSource, Seed};

/// Output of the sketching step: the base point, the `k` directions and,
/// for every direction `ψ_i`, the Taylor coefficients
/// `P[i][r] = (1/r!) f^{(r)}(x*)[ψ_i^{⊗r}] ∈ C^p` for `r = 0..=s`.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchData {
    base_point: Vec<Complex64>,
    directions: DirectionSource,
    /// Row-major `k × (s+1) × p`.
    taylor: Vec<Complex64>,
    p: usize,
    s: usize,
}

impl SketchData {
    /// Assembles a sketch from its parts, checking every dimension and that
    /// the order-0 block is the same for all directions.
    pub fn new(
        base_point: Vec<Complex64>,
        directions: DirectionSource,
        taylor: Vec<Complex64>,
        p: usize,
        s: usize,
    ) -> Result<SketchData> {
        let (k, n) = (directions.k(), directions.n());
        if k == 0 || n == 0 || p == 0 {
            return Err(Error::invalid("sketch dimensions n, p, k must be positive"));
        }
        if base_point.len() != n {
            return Err(Error::Dimension {
                what: "base point length",
                expected: n,
                got: base_point.len(),
            });
        }
        if taylor.len() != k * (s + 1) * p {
            return Err(Error::Dimension {
                what: "Taylor data length",
                expected: k * (s + 1) * p,
                got: taylor.len(),
            });
        }
        let stride = (s + 1) * p;
        let first = &taylor[..p];
        if taylor.chunks(stride).any(|block| &block[..p] != first) {
            return Err(Error::invalid(
                "order-0 Taylor coefficients differ between directions",
            ));
        }
        Ok(SketchData {
            base_point,
            directions,
            taylor,
            p,
            s,
        })
    }

    pub fn n(&self) -> usize {
        self.directions.n()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn k(&self) -> usize {
        self.directions.k()
    }

    pub fn base_point(&self) -> &[Complex64] {
        &self.base_point
    }

    pub fn directions(&self) -> &DirectionSource {
        &self.directions
    }

    pub fn taylor(&self) -> &[Complex64] {
        &self.taylor
    }

    /// `P[i][r]`, a slice of length `p`.
    pub fn coeff(&self, i: usize, r: usize) -> &[Complex64] {
        let start = (i * (self.s + 1) + r) * self.p;
        &self.taylor[start..start + self.p]
    }

    /// `f(x*)`.
    pub fn value_at_base(&self) -> &[Complex64] {
        self.coeff(0, 0)
    }

    /// The `p` output jets for direction `i`.
    pub fn jets(&self, i: usize) -> Vec<Jet> {
        (0..self.p)
            .map(|o| {
                let coeffs = (0..=self.s).map(|r| self.coeff(i, r)[o]).collect();
                Jet::from_coeffs(coeffs).expect("stored coefficients are finite")
            })
            .collect()
    }

    /// The order-`order` sketch with the same directions.
    pub fn truncate(&self, order: usize) -> Result<SketchData> {
        if order > self.s {
            return Err(Error::invalid(format!(
                "cannot truncate an order-{} sketch to order {order}",
                self.s
            )));
        }
        let taylor = self
            .taylor
            .chunks((self.s + 1) * self.p)
            .flat_map(|block| block[..(order + 1) * self.p].iter().copied())
            .collect();
        Ok(SketchData {
            base_point: self.base_point.clone(),
            directions: self.directions.clone(),
            taylor,
            p: self.p,
            s: order,
        })
    }
}

/// Sketches `f` at `xstar` with `k` seeded directions and order `s`.
pub fn sketch(
    xstar: &[Complex64],
    f: &Circuit,
    s: usize,
    k: usize,
    seed: Seed,
) -> Result<SketchData> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    sketch_with_directions(
        xstar,
        f,
        s,
        DirectionSource::seeded(seed, k, f.num_inputs()),
    )
}

/// Sketches `f` at `xstar` along the given directions. Directions are
/// evaluated in parallel; the result does not depend on the schedule.
pub fn sketch_with_directions(
    xstar: &[Complex64],
    f: &Circuit,
    s: usize,
    directions: DirectionSource,
) -> Result<SketchData> {
    let n = f.num_inputs();
    if n == 0 {
        return Err(Error::invalid("cannot sketch a circuit with no inputs"));
    }
    if xstar.len() != n || directions.n() != n {
        return Err(Error::Dimension {
            what: "base point / direction dimension",
            expected: n,
            got: if xstar.len() != n {
                xstar.len()
            } else {
                directions.n()
            },
        });
    }
    let p = f.num_outputs();
    let per_direction: Vec<Result<Vec<Complex64>>> = (0..directions.k())
        .into_par_iter()
        .map(|i| {
            let psi = directions.row(i);
            let inputs: Vec<Jet> = xstar
                .iter()
                .zip(&psi)
                .map(|(&x, &d)| Jet::variable(s, x, d))
                .collect();
            let outs = f.eval_jets(s, &inputs).map_err(|e| e.at_direction(i))?;
            let mut block = vec![Complex64::new(0.0, 0.0); (s + 1) * p];
            for (o, jet) in outs.iter().enumerate() {
                for (r, c) in jet.coeffs().iter().enumerate() {
                    block[r * p + o] = *c;
                }
            }
            Ok(block)
        })
        .collect();
    let mut taylor = Vec::with_capacity(directions.k() * (s + 1) * p);
    for block in per_direction {
        taylor.extend(block?);
    }
    SketchData::new(xstar.to_vec(), directions, taylor, p, s)
}

/// Per-order terms `ν_0, ..., ν_s` of a sketch estimate and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub terms: Vec<Vec<Complex64>>,
    pub total: Vec<Complex64>,
}

/// Combines per-direction Taylor coefficients into the estimate at `x`.
///
/// `coeffs` is row-major `k × (s+1) × width`. The order-0 term is taken
/// directly from the first direction since it is the same for all of them.
pub(crate) fn estimate(
    directions: &DirectionSource,
    base: &[Complex64],
    coeffs: &[Complex64],
    width: usize,
    s: usize,
    x: &[Complex64],
    aggregator: Aggregator,
) -> Result<Estimate> {
    let (k, n) = (directions.k(), directions.n());
    if x.len() != n {
        return Err(Error::Dimension {
            what: "evaluation point length",
            expected: n,
            got: x.len(),
        });
    }
    aggregator.check(k)?;
    let delta: Vec<Complex64> = x.iter().zip(base).map(|(a, b)| a - b).collect();
    let pows: Vec<Vec<Complex64>> = (0..k)
        .into_par_iter()
        .map(|i| powers(inner(&directions.row(i), &delta), s))
        .collect();

    let stride = (s + 1) * width;
    let mut terms = Vec::with_capacity(s + 1);
    terms.push(coeffs[..width].to_vec());
    let mut samples = vec![Complex64::new(0.0, 0.0); k * width];
    for r in 1..=s {
        for i in 0..k {
            let block = &coeffs[i * stride + r * width..i * stride + (r + 1) * width];
            for o in 0..width {
                samples[i * width + o] = pows[i][r] * block[o];
            }
        }
        let dim = sym_dim(n, r)?.value;
        let agg = aggregator.aggregate(&samples, width)?;
        terms.push(agg.into_iter().map(|c| c * dim).collect());
    }
    let mut total = terms[0].clone();
    for term in &terms[1..] {
        for (t, c) in total.iter_mut().zip(term) {
            *t += c;
        }
    }
    Ok(Estimate { terms, total })
}

/// Estimates `f(x)` from a sketch, with per-order terms.
pub fn sketch_eval_terms(
    sk: &SketchData,
    x: &[Complex64],
    aggregator: Aggregator,
) -> Result<Estimate> {
    estimate(
        &sk.directions,
        &sk.base_point,
        &sk.taylor,
        sk.p,
        sk.s,
        x,
        aggregator,
    )
}

/// Estimates `f(x)` from a sketch using median-of-means with `m` blocks.
pub fn sketch_eval(sk: &SketchData, x: &[Complex64], m: usize) -> Result<Vec<Complex64>> {
    Ok(sketch_eval_terms(sk, x, Aggregator::MedianOfMeans { blocks: m })?.total)
}
