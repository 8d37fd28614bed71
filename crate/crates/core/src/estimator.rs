//! Symmetric-subspace dimensions, the rank-one projection estimator and
//! the median-of-means aggregator.

use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimension `n[r] = binom(n + r - 1, r)` of the symmetric subspace of
/// `(C^n)^{⊗r}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymDim {
    pub n: usize,
    pub r: usize,
    pub value: f64,
}

/// `n[r]` in product form `n (n+1) ··· (n+r-1) / r!`.
///
/// Each partial product is itself a binomial coefficient, so the result is
/// exact whenever it stays below `2^53`.
pub fn sym_dim(n: usize, r: usize) -> Result<SymDim> {
    if n == 0 {
        return Err(Error::invalid("n[r] needs n >= 1"));
    }
    let mut value = 1.0f64;
    for j in 0..r {
        value = value * (n + j) as f64 / (j + 1) as f64;
    }
    if !value.is_finite() {
        return Err(Error::SymDimOverflow { n, r });
    }
    Ok(SymDim { n, r, value })
}

/// `⟨u, v⟩ = Σ conj(u_j) v_j`.
pub fn inner(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    debug_assert_eq!(u.len(), v.len());
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        acc += a.conj() * b;
    }
    acc
}

/// `z^r` by repeated multiplication (`z^0 = 1`).
pub(crate) fn powers(z: Complex64, max: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(max + 1);
    let mut acc = Complex64::new(1.0, 0.0);
    out.push(acc);
    for _ in 0..max {
        acc *= z;
        out.push(acc);
    }
    out
}

/// Single-direction estimate `n[r] · coeff · ⟨ψ, x - x*⟩^r` of
/// `(1/r!) f^{(r)}(x*)[(x - x*)^{⊗r}]`, where
/// `coeff = (1/r!) f^{(r)}(x*)[ψ^{⊗r}]`.
pub fn rank1_projection_estimate(
    coeff: &[Complex64],
    psi: &[Complex64],
    x: &[Complex64],
    xstar: &[Complex64],
    r: usize,
) -> Result<Vec<Complex64>> {
    if psi.len() != x.len() || x.len() != xstar.len() {
        return Err(Error::Dimension {
            what: "estimator vectors",
            expected: psi.len(),
            got: x.len().min(xstar.len()),
        });
    }
    let delta: Vec<Complex64> = x.iter().zip(xstar).map(|(a, b)| a - b).collect();
    let dim = sym_dim(psi.len(), r)?.value;
    let scale = powers(inner(psi, &delta), r)[r] * dim;
    Ok(coeff.iter().map(|c| c * scale).collect())
}

/// Partition of `k` samples into `m` consecutive blocks. When `m` does not
/// divide `k`, the first `k mod m` blocks hold one extra sample.
pub fn block_ranges(k: usize, m: usize) -> Vec<Range<usize>> {
    let base = k / m;
    let extra = k % m;
    let mut start = 0;
    (0..m)
        .map(|b| {
            let len = base + usize::from(b < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let len = values.len();
    if len % 2 == 1 {
        values[len / 2]
    } else {
        (values[len / 2 - 1] + values[len / 2]) / 2.0
    }
}

/// Coordinate-wise median-of-means over `k` samples in `C^p`, stored
/// row-major (`samples[i * p + o]`). Real and imaginary parts take their
/// medians separately.
pub fn median_of_means(samples: &[Complex64], p: usize, m: usize) -> Result<Vec<Complex64>> {
    let k = sample_count(samples, p)?;
    if m == 0 || m > k {
        return Err(Error::invalid(format!(
            "median-of-means needs 1 <= m <= k, got m = {m}, k = {k}"
        )));
    }
    let blocks = block_ranges(k, m);
    let mut re = vec![0.0; m];
    let mut im = vec![0.0; m];
    let mut out = Vec::with_capacity(p);
    for o in 0..p {
        for (b, range) in blocks.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in range.clone() {
                acc += samples[i * p + o];
            }
            let mean = acc / range.len() as f64;
            re[b] = mean.re;
            im[b] = mean.im;
        }
        out.push(Complex64::new(median(&mut re), median(&mut im)));
    }
    Ok(out)
}

/// Coordinate-wise empirical mean.
pub fn mean(samples: &[Complex64], p: usize) -> Result<Vec<Complex64>> {
    let k = sample_count(samples, p)?;
    Ok((0..p)
        .map(|o| {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..k {
                acc += samples[i * p + o];
            }
            acc / k as f64
        })
        .collect())
}

fn sample_count(samples: &[Complex64], p: usize) -> Result<usize> {
    if p == 0 || samples.is_empty() {
        return Err(Error::invalid("cannot aggregate an empty batch"));
    }
    if !samples.len().is_multiple_of(p) {
        return Err(Error::Dimension {
            what: "sample batch length (multiple of p)",
            expected: p * (samples.len() / p + 1),
            got: samples.len(),
        });
    }
    Ok(samples.len() / p)
}

/// How per-direction estimates at each order are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Aggregator {
    MedianOfMeans { blocks: usize },
    Mean,
}

impl Aggregator {
    pub fn aggregate(&self, samples: &[Complex64], p: usize) -> Result<Vec<Complex64>> {
        match *self {
            Aggregator::MedianOfMeans { blocks } => median_of_means(samples, p, blocks),
            Aggregator::Mean => mean(samples, p),
        }
    }

    pub(crate) fn check(&self, k: usize) -> Result<()> {
        match *self {
            Aggregator::MedianOfMeans { blocks } if blocks == 0 || blocks > k => Err(
                Error::invalid(format!("block count m = {blocks} must lie in [1, k = {k}]")),
            ),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn re(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn sym_dim_examples() {
        assert_eq!(sym_dim(2, 2).unwrap().value, 3.0);
        assert_eq!(sym_dim(3, 2).unwrap().value, 6.0);
        for r in 0..20 {
            assert_eq!(sym_dim(1, r).unwrap().value, 1.0);
        }
        assert_eq!(sym_dim(7, 0).unwrap().value, 1.0);
        assert!(sym_dim(0, 1).is_err());
        assert!(matches!(
            sym_dim(1 << 40, 40),
            Err(Error::SymDimOverflow { .. })
        ));
    }

    #[test]
    fn sym_dim_is_exact_below_2_pow_53() {
        fn binom(n: u128, r: u128) -> u128 {
            (0..r).fold(1, |acc, j| acc * (n - j) / (j + 1))
        }
        for n in 1..60usize {
            for r in 0..12usize {
                let exact = binom((n + r - 1) as u128, r as u128);
                if exact < 1 << 53 {
                    assert_eq!(sym_dim(n, r).unwrap().value, exact as f64, "n={n} r={r}");
                }
            }
        }
    }

    #[test]
    fn mom_hand_example() {
        let xs: Vec<Complex64> = [1.0, 2.0, 100.0, 2.0, 1.0, 3.0].map(re).to_vec();
        assert_eq!(median_of_means(&xs, 1, 3).unwrap(), vec![re(2.0)]);
        // m = 1 is the plain mean
        let one = median_of_means(&xs, 1, 1).unwrap();
        assert_eq!(one, mean(&xs, 1).unwrap());
        assert!((one[0].re - 109.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn mom_constant_samples() {
        let c = Complex64::new(0.25, -1.5);
        let xs = vec![c; 12];
        assert_eq!(median_of_means(&xs, 2, 3).unwrap(), vec![c, c]);
    }

    #[test]
    fn mom_errors() {
        assert!(median_of_means(&[], 1, 1).is_err());
        assert!(median_of_means(&[re(1.0)], 1, 2).is_err());
        assert!(median_of_means(&[re(1.0)], 1, 0).is_err());
        assert!(median_of_means(&[re(1.0); 3], 2, 1).is_err());
    }

    #[test]
    fn uneven_blocks_front_load_extras() {
        let b = block_ranges(10, 4);
        assert_eq!(b, vec![0..3, 3..6, 6..8, 8..10]);
        assert_eq!(block_ranges(6, 3), vec![0..2, 2..4, 4..6]);
    }

    #[test]
    fn even_median_averages_middle_pair() {
        let xs: Vec<Complex64> = vec![
            Complex64::new(1.0, 4.0),
            Complex64::new(3.0, 2.0),
            Complex64::new(10.0, -1.0),
            Complex64::new(0.0, 0.0),
        ];
        let got = median_of_means(&xs, 1, 4).unwrap();
        assert_eq!(got, vec![Complex64::new(2.0, 1.0)]);
    }

    #[test]
    fn rank1_estimate_trivial_cases() {
        let psi = vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)];
        let x = vec![Complex64::new(1.0, 2.0), Complex64::new(-1.0, 0.5)];
        let coeff = vec![Complex64::new(3.0, -1.0)];
        assert_eq!(
            rank1_projection_estimate(&coeff, &psi, &x, &x, 0).unwrap(),
            coeff
        );
        let zero = rank1_projection_estimate(&coeff, &psi, &x, &x, 2).unwrap();
        assert_eq!(zero[0], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn inner_is_conjugate_linear_in_first_argument() {
        let u = [Complex64::new(0.0, 1.0)];
        let v = [Complex64::new(1.0, 0.0)];
        assert_eq!(inner(&u, &v), Complex64::new(0.0, -1.0));
    }
}
