//! Monte Carlo probing of the per-order Taylor norms
//! `(1/r!) ‖f^{(r)}(x*)‖_F` with random complex directions.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::estimator::sym_dim;
use crate::jet::Jet;
use crate::sampling::{seeded_direction, Seed};

/// Per-order trial estimates `√n[r] · |(1/r!) f^{(r)}(x*)[ψ^{⊗r}]|`.
///
/// Trial `t` uses direction `t` of the seeded family, so every trial can be
/// reproduced from `(seed, t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityProfile {
    pub n: usize,
    pub r_max: usize,
    pub seed: Seed,
    /// `estimates[r - 1][t]` for `r = 1..=r_max`.
    pub estimates: Vec<Vec<f64>>,
}

impl StabilityProfile {
    pub fn trials(&self) -> usize {
        self.estimates.first().map_or(0, Vec::len)
    }

    pub fn order(&self, r: usize) -> &[f64] {
        assert!(
            r >= 1 && r <= self.r_max,
            "order {r} outside 1..={}",
            self.r_max
        );
        &self.estimates[r - 1]
    }

    /// Mean of the squared estimates, an unbiased estimate of
    /// `((1/r!) ‖f^{(r)}‖_F)^2`.
    pub fn mean_square(&self, r: usize) -> f64 {
        let xs = self.order(r);
        xs.iter().map(|e| e * e).sum::<f64>() / xs.len() as f64
    }

    /// Standard error of [`Self::mean_square`].
    pub fn mean_square_std_err(&self, r: usize) -> f64 {
        let xs = self.order(r);
        let t = xs.len() as f64;
        if xs.len() < 2 {
            return f64::INFINITY;
        }
        let mean = self.mean_square(r);
        let var = xs.iter().map(|e| (e * e - mean).powi(2)).sum::<f64>() / (t - 1.0);
        (var / t).sqrt()
    }

    pub fn rms(&self, r: usize) -> f64 {
        self.mean_square(r).sqrt()
    }

    /// Delta-method standard error of [`Self::rms`].
    pub fn rms_std_err(&self, r: usize) -> f64 {
        let rms = self.rms(r);
        if rms == 0.0 {
            return if self.order(r).iter().all(|&e| e == 0.0) {
                0.0
            } else {
                f64::INFINITY
            };
        }
        self.mean_square_std_err(r) / (2.0 * rms)
    }

    /// Figure-style CSV with columns `r, trial, estimate, log_estimate`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::invalid(format!("writing profile CSV: {e}"));
        w.write_record(["r", "trial", "estimate", "log_estimate"])
            .map_err(io)?;
        for (ri, row) in self.estimates.iter().enumerate() {
            for (t, e) in row.iter().enumerate() {
                w.write_record([
                    (ri + 1).to_string(),
                    t.to_string(),
                    format!("{e:e}"),
                    format!("{:e}", e.ln()),
                ])
                .map_err(io)?;
            }
        }
        w.flush()
            .map_err(|e| Error::invalid(format!("writing profile CSV: {e}")))
    }
}

/// Probe at the origin.
pub fn probe(f: &Circuit, r_max: usize, trials: usize, seed: Seed) -> Result<StabilityProfile> {
    let zero = vec![Complex64::new(0.0, 0.0); f.num_inputs()];
    probe_at(f, &zero, r_max, trials, seed)
}

/// One order-`r_max` jet evaluation per trial direction.
pub fn probe_at(
    f: &Circuit,
    xstar: &[Complex64],
    r_max: usize,
    trials: usize,
    seed: Seed,
) -> Result<StabilityProfile> {
    if f.num_outputs() != 1 {
        return Err(Error::Dimension {
            what: "probed circuit outputs",
            expected: 1,
            got: f.num_outputs(),
        });
    }
    if r_max == 0 || trials == 0 {
        return Err(Error::invalid(
            "stability probe needs r_max >= 1 and trials >= 1",
        ));
    }
    let n = f.num_inputs();
    if xstar.len() != n {
        return Err(Error::Dimension {
            what: "base point length",
            expected: n,
            got: xstar.len(),
        });
    }
    let scale: Vec<f64> = (1..=r_max)
        .map(|r| sym_dim(n, r).map(|d| d.value.sqrt()))
        .collect::<Result<_>>()?;

    let per_trial: Vec<Result<Vec<f64>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let psi = seeded_direction(&seed, t as u64, n);
            let inputs: Vec<Jet> = xstar
                .iter()
                .zip(&psi)
                .map(|(&x, &d)| Jet::variable(r_max, x, d))
                .collect();
            let out = f.eval_jets(r_max, &inputs).map_err(|e| e.at_direction(t))?;
            Ok((1..=r_max)
                .map(|r| scale[r - 1] * out[0].coeff(r).norm())
                .collect())
        })
        .collect();

    let mut estimates = vec![Vec::with_capacity(trials); r_max];
    for row in per_trial {
        for (r, e) in row?.into_iter().enumerate() {
            estimates[r].push(e);
        }
    }
    Ok(StabilityProfile {
        n,
        r_max,
        seed,
        estimates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaFit {
    pub value: f64,
    pub argmax_r: usize,
    /// The maximizing term sits at `r_max`, so larger orders may dominate.
    pub still_growing: bool,
}

/// `max_r γ^r · rms_r` over the probed orders.
pub fn fit_alpha(profile: &StabilityProfile, gamma: f64) -> AlphaFit {
    assert!(gamma >= 0.0, "gamma must be non-negative");
    let mut fit = AlphaFit {
        value: 0.0,
        argmax_r: 0,
        still_growing: false,
    };
    for r in 1..=profile.r_max {
        let term = gamma.powi(r as i32) * profile.rms(r);
        if term > fit.value {
            fit.value = term;
            fit.argmax_r = r;
        }
    }
    fit.still_growing = fit.argmax_r == profile.r_max;
    fit
}
