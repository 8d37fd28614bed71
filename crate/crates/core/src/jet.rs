//! Truncated complex power series `C[z]/(z^{s+1})`.
//!
//! A [`Jet`] of order `s` holds the coefficients `c_0, ..., c_s` of a
//! polynomial in `z`; products drop every term of degree above `s`.
//! Evaluating a circuit on inputs `x + z·ψ` over this ring yields the
//! normalized directional derivatives `(1/r!) f^{(r)}(x)[ψ^{⊗r}]` as the
//! coefficients of the output.

use std::cell::RefCell;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orders at or above this use FFT multiplication.
pub const FFT_THRESHOLD: usize = 32;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Largest `|z|` for which the complex error function is evaluated by its
/// Maclaurin series. Real arguments have no limit.
pub const COMPLEX_ERF_RADIUS: f64 = 3.0;

/// Unary gates with a local Taylor expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticGate {
    Reciprocal,
    Sqrt,
    Exp,
    Log,
    Tanh,
    Gelu,
}

impl AnalyticGate {
    pub const ALL: [AnalyticGate; 6] = [
        AnalyticGate::Reciprocal,
        AnalyticGate::Sqrt,
        AnalyticGate::Exp,
        AnalyticGate::Log,
        AnalyticGate::Tanh,
        AnalyticGate::Gelu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AnalyticGate::Reciprocal => "reciprocal",
            AnalyticGate::Sqrt => "sqrt",
            AnalyticGate::Exp => "exp",
            AnalyticGate::Log => "log",
            AnalyticGate::Tanh => "tanh",
            AnalyticGate::Gelu => "gelu",
        }
    }

    fn domain_error(self, value: Complex64) -> Error {
        Error::GateDomain {
            gate: self,
            value,
            node: None,
            direction: None,
        }
    }

    /// Evaluates the gate on a scalar.
    ///
    /// Reciprocal, sqrt and log refuse an exact zero; sqrt and log use the
    /// principal branch.
    pub fn eval_scalar(self, x: Complex64) -> Result<Complex64> {
        let y = match self {
            AnalyticGate::Reciprocal | AnalyticGate::Sqrt | AnalyticGate::Log if x == ZERO => {
                return Err(self.domain_error(x))
            }
            AnalyticGate::Reciprocal => x.inv(),
            AnalyticGate::Sqrt => x.sqrt(),
            AnalyticGate::Exp => x.exp(),
            AnalyticGate::Log => x.ln(),
            AnalyticGate::Tanh => x.tanh(),
            AnalyticGate::Gelu => {
                let e = complex_erf(x * FRAC_1_SQRT_2).ok_or_else(|| self.domain_error(x))?;
                0.5 * x * (ONE + e)
            }
        };
        if y.is_finite() {
            Ok(y)
        } else {
            Err(self.domain_error(x))
        }
    }
}

impl fmt::Display for AnalyticGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Error function on the complex plane.
///
/// Real arguments use the library `erf`; other arguments are summed from
/// the Maclaurin series and are only accepted for `|z| <= COMPLEX_ERF_RADIUS`.
pub fn complex_erf(z: Complex64) -> Option<Complex64> {
    if z.im == 0.0 {
        return Some(Complex64::new(libm::erf(z.re), 0.0));
    }
    if !(z.norm() <= COMPLEX_ERF_RADIUS) {
        return None;
    }
    // erf(z) = 2z/sqrt(pi) e^{-z^2} sum_n (2z^2)^n / (1·3···(2n+1)),
    // free of cancellation near the real axis.
    let two_z2 = 2.0 * z * z;
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for n in 1..400 {
        term = term * two_z2 / (2 * n + 1) as f64;
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    Some(sum * z * (-z * z).exp() * (2.0 / PI.sqrt()))
}

/// Element of `C[z]/(z^{s+1})`: `coeffs[r]` multiplies `z^r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    coeffs: Vec<Complex64>,
}

impl Jet {
    pub fn zero(order: usize) -> Self {
        Jet {
            coeffs: vec![ZERO; order + 1],
        }
    }

    pub fn constant(order: usize, c: Complex64) -> Self {
        let mut j = Jet::zero(order);
        j.coeffs[0] = c;
        j
    }

    /// `value + slope·z`, truncated to `order`.
    pub fn variable(order: usize, value: Complex64, slope: Complex64) -> Self {
        let mut j = Jet::constant(order, value);
        if order >= 1 {
            j.coeffs[1] = slope;
        }
        j
    }

    /// Builds a jet from its coefficients; the order is `coeffs.len() - 1`.
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("a jet needs at least one coefficient"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("jet coefficients must be finite"));
        }
        Ok(Jet { coeffs })
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn coeff(&self, r: usize) -> Complex64 {
        self.coeffs[r]
    }

    /// `r!` times the coefficient of `z^r`.
    pub fn derivative(&self, r: usize) -> Complex64 {
        let fact: f64 = (1..=r).map(|j| j as f64).product();
        self.coeffs[r] * fact
    }

    /// Drops every coefficient above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        assert!(order <= self.order(), "cannot truncate to a higher order");
        Jet {
            coeffs: self.coeffs[..=order].to_vec(),
        }
    }

    fn check_order(&self, other: &Jet) -> Result<()> {
        if self.order() != other.order() {
            return Err(Error::OrderMismatch {
                left: self.order(),
                right: other.order(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Jet) -> Result<Jet> {
        self.check_order(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Jet { coeffs })
    }

    pub(crate) fn add_assign_unchecked(&mut self, other: &Jet) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
    }

    pub fn scale(&self, c: Complex64) -> Jet {
        Jet {
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    /// Truncated product. Uses [`Jet::mul_naive`] below [`FFT_THRESHOLD`]
    /// and [`Jet::mul_fft`] at or above it.
    pub fn mul(&self, other: &Jet) -> Result<Jet> {
        self.check_order(other)?;
        Ok(mul_coeffs(&self.coeffs, &other.coeffs))
    }

    /// Direct convolution `c_r = sum_{j=0}^{r} a_j b_{r-j}`, summed in
    /// increasing `j`.
    pub fn mul_naive(&self, other: &Jet) -> Result<Jet> {
        self.check_order(other)?;
        Ok(Jet {
            coeffs: convolve_naive(&self.coeffs, &other.coeffs),
        })
    }

    /// Product via complex FFT with power-of-two padding. The constant
    /// coefficient is always the exact product `a_0 b_0`.
    pub fn mul_fft(&self, other: &Jet) -> Result<Jet> {
        self.check_order(other)?;
        Ok(Jet {
            coeffs: convolve_fft(&self.coeffs, &other.coeffs),
        })
    }

    /// Applies an analytic gate as a power series around the constant term.
    pub fn compose(&self, gate: AnalyticGate) -> Result<Jet> {
        let a = &self.coeffs;
        let b0 = gate.eval_scalar(a[0])?;
        let mut b = match gate {
            AnalyticGate::Reciprocal => series_reciprocal(a, b0),
            AnalyticGate::Sqrt => series_sqrt(a, b0),
            AnalyticGate::Exp => series_exp(a, b0),
            AnalyticGate::Log => series_log(a, b0),
            AnalyticGate::Tanh => series_tanh(a, b0),
            AnalyticGate::Gelu => series_gelu(a, gate)?,
        };
        // Keeps order-0 evaluation identical to scalar evaluation.
        b[0] = b0;
        if b.iter().any(|c| !c.is_finite()) {
            return Err(gate.domain_error(a[0]));
        }
        Ok(Jet { coeffs: b })
    }
}

pub(crate) fn mul_coeffs(a: &[Complex64], b: &[Complex64]) -> Jet {
    let coeffs = if a.len() > FFT_THRESHOLD {
        convolve_fft(a, b)
    } else {
        convolve_naive(a, b)
    };
    Jet { coeffs }
}

fn convolve_naive(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    (0..a.len())
        .map(|r| {
            let mut acc = ZERO;
            for j in 0..=r {
                acc += a[j] * b[r - j];
            }
            acc
        })
        .collect()
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn convolve_fft(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let len = a.len();
    let size = (2 * len - 1).next_power_of_two();
    let (fwd, inv) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(size), p.plan_fft_inverse(size))
    });
    let mut fa = vec![ZERO; size];
    let mut fb = vec![ZERO; size];
    fa[..len].copy_from_slice(a);
    fb[..len].copy_from_slice(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let norm = 1.0 / size as f64;
    let mut out: Vec<Complex64> = fa[..len].iter().map(|c| c * norm).collect();
    out[0] = a[0] * b[0];
    out
}

fn series_reciprocal(a: &[Complex64], b0: Complex64) -> Vec<Complex64> {
    let mut b = vec![ZERO; a.len()];
    b[0] = b0;
    for k in 1..a.len() {
        let mut acc = ZERO;
        for j in 1..=k {
            acc += a[j] * b[k - j];
        }
        b[k] = -acc * b0;
    }
    b
}

fn series_sqrt(a: &[Complex64], b0: Complex64) -> Vec<Complex64> {
    let mut b = vec![ZERO; a.len()];
    b[0] = b0;
    let twice = b0 * 2.0;
    for k in 1..a.len() {
        let mut acc = ZERO;
        for j in 1..k {
            acc += b[j] * b[k - j];
        }
        b[k] = (a[k] - acc) / twice;
    }
    b
}

fn series_exp(a: &[Complex64], b0: Complex64) -> Vec<Complex64> {
    let mut b = vec![ZERO; a.len()];
    b[0] = b0;
    for k in 1..a.len() {
        let mut acc = ZERO;
        for j in 1..=k {
            acc += a[j] * b[k - j] * j as f64;
        }
        b[k] = acc / k as f64;
    }
    b
}

fn series_log(a: &[Complex64], b0: Complex64) -> Vec<Complex64> {
    let mut b = vec![ZERO; a.len()];
    b[0] = b0;
    for k in 1..a.len() {
        let mut acc = ZERO;
        for j in 1..k {
            acc += b[j] * a[k - j] * j as f64;
        }
        b[k] = (a[k] - acc / k as f64) / a[0];
    }
    b
}

fn series_tanh(a: &[Complex64], t0: Complex64) -> Vec<Complex64> {
    // t' = (1 - t^2) a'
    let len = a.len();
    let mut t = vec![ZERO; len];
    let mut u = vec![ZERO; len];
    t[0] = t0;
    u[0] = ONE - t0 * t0;
    for k in 1..len {
        let mut acc = ZERO;
        for j in 1..=k {
            acc += a[j] * u[k - j] * j as f64;
        }
        t[k] = acc / k as f64;
        let mut sq = ZERO;
        for j in 0..=k {
            sq += t[j] * t[k - j];
        }
        u[k] = -sq;
    }
    t
}

fn series_gelu(a: &[Complex64], gate: AnalyticGate) -> Result<Vec<Complex64>> {
    // gelu(a) = a/2 * (1 + erf(c)) with c = a/sqrt(2); erf(c)' = 2/sqrt(pi) exp(-c^2) c'
    let c: Vec<Complex64> = a.iter().map(|x| x * FRAC_1_SQRT_2).collect();
    let c_sq = mul_coeffs(&c, &c);
    let g = series_exp(
        &c_sq.coeffs.iter().map(|x| -x).collect::<Vec<_>>(),
        (-c_sq.coeffs[0]).exp(),
    );
    let scale = 2.0 / PI.sqrt();
    let mut e = vec![ZERO; a.len()];
    e[0] = complex_erf(c[0]).ok_or_else(|| gate.domain_error(a[0]))?;
    for k in 1..a.len() {
        let mut acc = ZERO;
        for j in 1..=k {
            acc += c[j] * g[k - j] * j as f64;
        }
        e[k] = acc * scale / k as f64;
    }
    let half_a: Vec<Complex64> = a.iter().map(|x| x * 0.5).collect();
    e[0] += ONE;
    Ok(mul_coeffs(&half_a, &e).coeffs)
}
