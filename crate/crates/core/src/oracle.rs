//! Brute-force ground truth at tiny scale.
//!
//! Circuits are evaluated over the multivariate truncated ring
//! `C[z_1, ..., z_n] / (total degree > s)` at `x* + (z_1, ..., z_n)`, which
//! yields every partial derivative up to order `s` exactly (up to
//! round-off). Analytic gates are expanded with Taylor coefficients obtained
//! from a Cauchy contour integral of the scalar gate, independently of the
//! jet recurrences.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::circuit::{Circuit, Ring};
use crate::error::{Error, Result};
use crate::jet::AnalyticGate;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Size guard for [`exact_taylor_tensors`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_n: usize,
    pub max_s: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits { max_n: 4, max_s: 4 }
    }
}

/// Multi-indices of total degree at most `s` in `n` variables, in graded
/// order, with the table of products that stay within the degree bound.
#[derive(Debug)]
pub struct MultiIndexTable {
    n: usize,
    s: usize,
    indices: Vec<Vec<u8>>,
    degree: Vec<usize>,
    lookup: HashMap<Vec<u8>, usize>,
    products: Vec<(u32, u32, u32)>,
}

impl MultiIndexTable {
    pub fn new(n: usize, s: usize) -> MultiIndexTable {
        assert!(s < u8::MAX as usize, "degree bound too large");
        let mut indices: Vec<Vec<u8>> = vec![vec![0; n]];
        let mut frontier = vec![vec![0u8; n]];
        for _ in 0..s {
            let mut next = Vec::new();
            for alpha in &frontier {
                // Increment only at or after the last nonzero position so
                // each multi-index appears once.
                let last = alpha.iter().rposition(|&a| a > 0).unwrap_or(0);
                for j in last..n {
                    let mut beta = alpha.clone();
                    beta[j] += 1;
                    next.push(beta);
                }
            }
            indices.extend(next.iter().cloned());
            frontier = next;
        }
        let degree: Vec<usize> = indices
            .iter()
            .map(|a| a.iter().map(|&x| x as usize).sum())
            .collect();
        let lookup: HashMap<Vec<u8>, usize> = indices
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, a)| (a, i))
            .collect();
        let mut products = Vec::new();
        for (ia, a) in indices.iter().enumerate() {
            for (ib, b) in indices.iter().enumerate() {
                if degree[ia] + degree[ib] > s {
                    continue;
                }
                let sum: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                products.push((ia as u32, ib as u32, lookup[&sum] as u32));
            }
        }
        MultiIndexTable {
            n,
            s,
            indices,
            degree,
            lookup,
            products,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn index_of(&self, alpha: &[u8]) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }

    pub fn multi_index(&self, i: usize) -> &[u8] {
        &self.indices[i]
    }

    /// Position of the monomial `z_j`.
    fn unit(&self, j: usize) -> usize {
        let mut alpha = vec![0u8; self.n];
        alpha[j] = 1;
        self.lookup[&alpha]
    }
}

/// Truncated multivariate power series over `C`.
#[derive(Debug, Clone)]
pub struct MultiJet<'t> {
    table: &'t MultiIndexTable,
    coeffs: Vec<Complex64>,
}

impl<'t> MultiJet<'t> {
    pub fn constant(table: &'t MultiIndexTable, c: Complex64) -> Self {
        let mut coeffs = vec![ZERO; table.len()];
        coeffs[0] = c;
        MultiJet { table, coeffs }
    }

    /// `value + z_j` (requires `s >= 1` for the `z_j` term to survive).
    pub fn variable(table: &'t MultiIndexTable, j: usize, value: Complex64) -> Self {
        let mut v = MultiJet::constant(table, value);
        if table.s >= 1 {
            v.coeffs[table.unit(j)] = Complex64::new(1.0, 0.0);
        }
        v
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }
}

impl<'t> Ring for MultiJet<'t> {
    type Ctx = &'t MultiIndexTable;

    fn constant(table: &'t MultiIndexTable, c: Complex64) -> Self {
        MultiJet::constant(table, c)
    }

    fn in_ring(&self, table: &'t MultiIndexTable) -> bool {
        std::ptr::eq(self.table, table)
    }

    fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
    }

    fn mul(&self, other: &Self) -> Self {
        let mut out = vec![ZERO; self.coeffs.len()];
        for &(a, b, c) in &self.table.products {
            out[c as usize] += self.coeffs[a as usize] * other.coeffs[b as usize];
        }
        MultiJet {
            table: self.table,
            coeffs: out,
        }
    }

    fn apply(&self, gate: AnalyticGate) -> Result<Self> {
        let a0 = self.coeffs[0];
        let g = gate_taylor_coefficients(gate, a0, self.table.s)?;
        // g(a0 + h) = Σ g_k h^k by Horner, h nilpotent.
        let mut h = self.clone();
        h.coeffs[0] = ZERO;
        let mut acc = MultiJet::constant(self.table, g[self.table.s]);
        for k in (0..self.table.s).rev() {
            acc = acc.mul(&h);
            acc.coeffs[0] += g[k];
        }
        Ok(acc)
    }
}

/// Radius of the contour used around `center`.
fn contour_radius(gate: AnalyticGate, center: Complex64) -> f64 {
    match gate {
        AnalyticGate::Reciprocal | AnalyticGate::Sqrt | AnalyticGate::Log => {
            (center.norm() / 2.0).min(1.0)
        }
        AnalyticGate::Tanh => {
            // Poles at i(π/2 + jπ).
            let j = ((center.im - PI / 2.0) / PI).round();
            let pole = Complex64::new(0.0, PI / 2.0 + j * PI);
            let dist = [
                pole,
                pole + Complex64::new(0.0, PI),
                pole - Complex64::new(0.0, PI),
            ]
            .iter()
            .map(|p| (center - p).norm())
            .fold(f64::INFINITY, f64::min);
            (dist / 2.0).min(1.0)
        }
        AnalyticGate::Exp | AnalyticGate::Gelu => 1.0,
    }
}

/// Branch of the gate that is analytic on the disc around `center`.
fn gate_near(
    gate: AnalyticGate,
    center: Complex64,
    g0: Complex64,
    w: Complex64,
) -> Result<Complex64> {
    match gate {
        AnalyticGate::Sqrt => Ok(g0 * (w / center).sqrt()),
        AnalyticGate::Log => Ok(g0 + (w / center).ln()),
        _ => gate.eval_scalar(w),
    }
}

/// Taylor coefficients `g_0, ..., g_s` of `gate` at `center` from the
/// trapezoid rule on `g_k = (1/2πi) ∮ g(w) / (w - center)^{k+1} dw`.
pub fn gate_taylor_coefficients(
    gate: AnalyticGate,
    center: Complex64,
    s: usize,
) -> Result<Vec<Complex64>> {
    const POINTS: usize = 64;
    let g0 = gate.eval_scalar(center)?;
    let rho = contour_radius(gate, center);
    if !(rho > 0.0) {
        return Err(Error::GateDomain {
            gate,
            value: center,
            node: None,
            direction: None,
        });
    }
    let samples: Vec<Complex64> = (0..POINTS)
        .map(|j| {
            let w = center + Complex64::from_polar(rho, 2.0 * PI * j as f64 / POINTS as f64);
            gate_near(gate, center, g0, w)
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(s + 1);
    out.push(g0);
    for k in 1..=s {
        let mut acc = ZERO;
        for (j, v) in samples.iter().enumerate() {
            let angle = -2.0 * PI * (j * k % POINTS) as f64 / POINTS as f64;
            acc += v * Complex64::from_polar(1.0, angle);
        }
        out.push(acc / (POINTS as f64 * rho.powi(k as i32)));
    }
    Ok(out)
}

/// Full derivative tensors `f^{(r)}(x*) ∈ C^p ⊗ (C^n)^{⊗r}` for `r = 0..=s`.
#[derive(Debug, Clone, Serialize)]
pub struct TaylorTensors {
    pub n: usize,
    pub p: usize,
    pub s: usize,
    /// `tensors[r]` is row-major `p × n^r`.
    #[serde(skip)]
    pub tensors: Vec<Vec<Complex64>>,
    /// False when the circuit may have nonzero derivatives above order `s`.
    pub complete: bool,
}

impl TaylorTensors {
    pub fn tensor(&self, r: usize) -> &[Complex64] {
        &self.tensors[r]
    }

    /// Entry `f^{(r)}_o[i_1, ..., i_r]`.
    pub fn entry(&self, o: usize, idx: &[usize]) -> Complex64 {
        let r = idx.len();
        let flat = idx.iter().fold(0, |acc, &i| acc * self.n + i);
        self.tensors[r][o * self.n.pow(r as u32) + flat]
    }

    /// `(1/r!) f^{(r)}_o[v^{⊗r}]` (no conjugation).
    pub fn directional(&self, o: usize, r: usize, v: &[Complex64]) -> Complex64 {
        let len = self.n.pow(r as u32);
        contract(&self.tensors[r][o * len..(o + 1) * len], self.n, r, v) / factorial(r)
    }
}

pub fn factorial(r: usize) -> f64 {
    (1..=r).map(|j| j as f64).product()
}

/// `T[v^{⊗r}] = Σ T[i_1..i_r] v_{i_1} ··· v_{i_r}` for a row-major tensor.
pub fn contract(t: &[Complex64], n: usize, r: usize, v: &[Complex64]) -> Complex64 {
    assert_eq!(t.len(), n.pow(r as u32));
    // Contract the last index repeatedly.
    let mut cur = t.to_vec();
    for _ in 0..r {
        cur = cur
            .chunks(n)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect();
    }
    cur[0]
}

fn permutations(r: usize) -> Vec<Vec<usize>> {
    if r == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(r - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, r - 1);
            out.push(q);
        }
    }
    out
}

fn digits(mut flat: usize, n: usize, r: usize) -> Vec<usize> {
    let mut d = vec![0; r];
    for slot in d.iter_mut().rev() {
        *slot = flat % n;
        flat /= n;
    }
    d
}

fn undigits(d: &[usize], n: usize) -> usize {
    d.iter().fold(0, |acc, &i| acc * n + i)
}

/// Average of a tensor over all permutations of its `r` factors.
pub fn symmetrize(t: &[Complex64], n: usize, r: usize) -> Vec<Complex64> {
    let perms = permutations(r);
    let len = n.pow(r as u32);
    (0..len)
        .map(|flat| {
            let d = digits(flat, n, r);
            let sum: Complex64 = perms
                .iter()
                .map(|p| {
                    let q: Vec<usize> = p.iter().map(|&k| d[k]).collect();
                    t[undigits(&q, n)]
                })
                .sum();
            sum / perms.len() as f64
        })
        .collect()
}

/// Orthogonal projector onto the symmetric subspace of `(C^n)^{⊗r}`, as a
/// row-major `n^r × n^r` real matrix.
pub fn symmetric_projector(n: usize, r: usize) -> Vec<f64> {
    let perms = permutations(r);
    let len = n.pow(r as u32);
    let mut out = vec![0.0; len * len];
    for col in 0..len {
        let d = digits(col, n, r);
        for p in &perms {
            let q: Vec<usize> = p.iter().map(|&k| d[k]).collect();
            out[undigits(&q, n) * len + col] += 1.0 / perms.len() as f64;
        }
    }
    out
}

pub fn frobenius_norm(t: &[Complex64]) -> f64 {
    t.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Exact derivative tensors of `f` at `xstar` up to order `s`, under the
/// default size guard (`n <= 4`, `s <= 4`).
pub fn exact_taylor_tensors(f: &Circuit, xstar: &[Complex64], s: usize) -> Result<TaylorTensors> {
    exact_taylor_tensors_with_limits(f, xstar, s, OracleLimits::default())
}

fn check_request(f: &Circuit, xstar: &[Complex64], s: usize, limits: OracleLimits) -> Result<()> {
    let n = f.num_inputs();
    if n > limits.max_n || s > limits.max_s {
        return Err(Error::OracleLimit {
            n,
            s,
            max_n: limits.max_n,
            max_s: limits.max_s,
        });
    }
    if xstar.len() != n {
        return Err(Error::Dimension {
            what: "base point length",
            expected: n,
            got: xstar.len(),
        });
    }
    Ok(())
}

fn eval_multijets<'t>(
    table: &'t MultiIndexTable,
    f: &Circuit,
    xstar: &[Complex64],
) -> Result<Vec<MultiJet<'t>>> {
    let inputs: Vec<MultiJet> = xstar
        .iter()
        .enumerate()
        .map(|(j, &x)| MultiJet::variable(table, j, x))
        .collect();
    f.eval_ring(table, &inputs)
}

pub fn exact_taylor_tensors_with_limits(
    f: &Circuit,
    xstar: &[Complex64],
    s: usize,
    limits: OracleLimits,
) -> Result<TaylorTensors> {
    check_request(f, xstar, s, limits)?;
    let n = f.num_inputs();
    let p = f.num_outputs();
    let table = MultiIndexTable::new(n, s);
    let outs = eval_multijets(&table, f, xstar)?;

    let mut tensors = Vec::with_capacity(s + 1);
    for r in 0..=s {
        let len = n.pow(r as u32);
        let mut t = vec![ZERO; p * len];
        for flat in 0..len {
            let d = digits(flat, n, r);
            let mut alpha = vec![0u8; n];
            for &i in &d {
                alpha[i] += 1;
            }
            let idx = table.index_of(&alpha).expect("degree within bound");
            let alpha_fact: f64 = alpha.iter().map(|&a| factorial(a as usize)).product();
            for (o, out) in outs.iter().enumerate() {
                t[o * len + flat] = out.coeffs[idx] * alpha_fact;
            }
        }
        tensors.push(t);
    }
    let complete = f.polynomial_degree().is_some_and(|d| d <= s);
    Ok(TaylorTensors {
        n,
        p,
        s,
        tensors,
        complete,
    })
}

/// `(1/r!) ‖f^{(r)}(x*)‖_F` for `r = 0..=s`.
pub fn frobenius_profile(t: &TaylorTensors) -> Vec<f64> {
    t.tensors
        .iter()
        .enumerate()
        .map(|(r, tensor)| frobenius_norm(tensor) / factorial(r))
        .collect()
}

/// Per-order norms `(1/r!) ‖f^{(r)}(x*)‖_F` without materializing tensors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormProfile {
    pub n: usize,
    pub p: usize,
    pub s: usize,
    /// `norms[r]` for `r = 0..=s`, over all outputs.
    pub norms: Vec<f64>,
    pub complete: bool,
}

/// Norms straight from the multi-index coefficients: an entry of
/// `f^{(r)}` with index multiset `α` equals `α! c_α` and occurs `r!/α!`
/// times, so `‖f^{(r)}‖_F^2 = r! Σ_{|α|=r} α! |c_α|^2`.
pub fn exact_norm_profile(
    f: &Circuit,
    xstar: &[Complex64],
    s: usize,
    limits: OracleLimits,
) -> Result<NormProfile> {
    check_request(f, xstar, s, limits)?;
    let table = MultiIndexTable::new(f.num_inputs(), s);
    let outs = eval_multijets(&table, f, xstar)?;
    let mut sums = vec![0.0; s + 1];
    for (i, alpha) in table.indices.iter().enumerate() {
        let alpha_fact: f64 = alpha.iter().map(|&a| factorial(a as usize)).product();
        for out in &outs {
            sums[table.degree[i]] += alpha_fact * out.coeffs[i].norm_sqr();
        }
    }
    let norms = sums
        .iter()
        .enumerate()
        .map(|(r, &sum)| (sum / factorial(r)).sqrt())
        .collect();
    Ok(NormProfile {
        n: f.num_inputs(),
        p: f.num_outputs(),
        s,
        norms,
        complete: f.polynomial_degree().is_some_and(|d| d <= s),
    })
}

/// Tightest stability value `max_{r >= 1} (γ^r / r!) ‖f^{(r)}(x*)‖_F` over
/// the available orders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaValue {
    pub value: f64,
    /// Order attaining the maximum (0 when every term vanishes).
    pub argmax_r: usize,
    /// Set when higher orders were not computed and may be larger.
    pub lower_bound: bool,
}

pub fn alpha_exact(t: &TaylorTensors, gamma: f64) -> AlphaValue {
    alpha_from_norms(&frobenius_profile(t), gamma, !t.complete)
}

/// `max_{r >= 1} γ^r norms[r]`.
pub fn alpha_from_norms(norms: &[f64], gamma: f64, lower_bound: bool) -> AlphaValue {
    assert!(gamma >= 0.0, "gamma must be non-negative");
    let mut best = AlphaValue {
        value: 0.0,
        argmax_r: 0,
        lower_bound,
    };
    for (r, &norm) in norms.iter().enumerate().skip(1) {
        let term = gamma.powi(r as i32) * norm;
        if term > best.value {
            best.value = term;
            best.argmax_r = r;
        }
    }
    best
}

impl<'t> MultiJet<'t> {
    /// Coefficient of the monomial `z^alpha`.
    pub fn coeff(&self, alpha: &[u8]) -> Complex64 {
        self.table
            .index_of(alpha)
            .map(|i| self.coeffs[i])
            .unwrap_or(ZERO)
    }
}
