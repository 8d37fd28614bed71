//! Haar-random complex unit directions.
//!
//! Seeded directions come from ChaCha20 keyed with the 256-bit master seed.
//! Direction `i` reads stream `i`; coordinate `j` consumes the four 32-bit
//! words at word position `4j..4j+4`, taken as two little-endian `u64`s
//! `(w1, w2)`. The pre-normalization component is the Box–Muller pair
//!
//! ```text
//! u1 = ((w1 >> 11) + 1) · 2^-53      in (0, 1]
//! u2 =  (w2 >> 11)      · 2^-53      in [0, 1)
//! g  = sqrt(-2 ln u1) · (cos 2πu2 + i sin 2πu2)
//! ```
//!
//! and the direction is `g / ‖g‖`. Any `(i, j)` can be derived on its own.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

/// 256-bit master key; written as 64 hex characters.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed(pub [u8; 32]);

impl Seed {
    /// A key with `x` in its first eight bytes (little-endian), zeros after.
    /// Handy for tests and trial seeds.
    pub fn from_u64(x: u64) -> Seed {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&x.to_le_bytes());
        Seed(key)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// ChaCha20 generator positioned at the start of stream `stream`.
    pub fn stream(&self, stream: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::from_seed(self.0);
        rng.set_stream(stream);
        rng
    }
}

impl FromStr for Seed {
    type Err = Error;

    fn from_str(s: &str) -> Result<Seed> {
        let s = s.trim();
        if s.len() != 64 {
            return Err(Error::invalid(format!(
                "seed must be 64 hex characters, got {}",
                s.len()
            )));
        }
        let mut key = [0u8; 32];
        hex::decode_to_slice(s, &mut key)
            .map_err(|e| Error::invalid(format!("seed is not hex: {e}")))?;
        Ok(Seed(key))
    }
}

impl fmt::Debug for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Seed({})", self.to_hex())
    }
}

impl serde::Serialize for Seed {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl fmt::Display for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

fn gaussian_from_words(w1: u64, w2: u64) -> Complex64 {
    let u1 = ((w1 >> 11) + 1) as f64 * TWO_POW_M53;
    let u2 = (w2 >> 11) as f64 * TWO_POW_M53;
    let radius = (-2.0 * u1.ln()).sqrt();
    let (sin, cos) = (2.0 * PI * u2).sin_cos();
    Complex64::new(radius * cos, radius * sin)
}

/// Standard complex Gaussian draw (both parts `N(0, 1)`).
pub fn complex_gaussian<R: RngCore + ?Sized>(rng: &mut R) -> Complex64 {
    let w1 = rng.next_u64();
    let w2 = rng.next_u64();
    gaussian_from_words(w1, w2)
}

fn normalize(mut v: Vec<Complex64>) -> Vec<Complex64> {
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 && norm.is_finite() {
        for c in &mut v {
            *c /= norm;
        }
    } else {
        // Probability ~2^-53n; fall back to the first basis vector.
        v.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        v[0] = Complex64::new(1.0, 0.0);
    }
    v
}

/// Haar-random unit vector in `C^n`: i.i.d. complex Gaussians, normalized.
pub fn sample_direction<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Vec<Complex64> {
    assert!(n >= 1, "direction dimension must be positive");
    normalize((0..n).map(|_| complex_gaussian(rng)).collect())
}

/// Uniform unit vector in `R^n`, used to contrast real and complex
/// direction ensembles.
pub fn sample_real_direction<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    assert!(n >= 1, "direction dimension must be positive");
    let mut v: Vec<f64> = Vec::with_capacity(n);
    while v.len() < n {
        let g = complex_gaussian(rng);
        v.push(g.re);
        if v.len() < n {
            v.push(g.im);
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / norm).collect()
}

/// Pre-normalization Gaussian for coordinate `j` of direction `i`.
pub fn derive_component(seed: &Seed, i: u64, j: u64) -> Complex64 {
    let mut rng = seed.stream(i);
    rng.set_word_pos(4 * j as u128);
    complex_gaussian(&mut rng)
}

/// Direction `i` of a seeded family in `C^n`.
pub fn seeded_direction(seed: &Seed, i: u64, n: usize) -> Vec<Complex64> {
    sample_direction(n, &mut seed.stream(i))
}

/// The `k` directions of a sketch.
#[derive(Debug, Clone, PartialEq)]
pub enum DirectionSource {
    /// Row-major `k × n` matrix of unit rows.
    Explicit {
        k: usize,
        n: usize,
        rows: Vec<Complex64>,
    },
    /// Rows regenerated from the master seed on demand.
    Seeded { seed: Seed, k: usize, n: usize },
}

impl DirectionSource {
    pub fn seeded(seed: Seed, k: usize, n: usize) -> Self {
        DirectionSource::Seeded { seed, k, n }
    }

    /// Wraps a materialized matrix, checking that each row is a unit vector.
    pub fn explicit(k: usize, n: usize, rows: Vec<Complex64>) -> Result<Self> {
        if rows.len() != k * n {
            return Err(Error::Dimension {
                what: "direction matrix entries",
                expected: k * n,
                got: rows.len(),
            });
        }
        for (i, row) in rows.chunks(n.max(1)).enumerate() {
            let norm = row.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if !(norm - 1.0).abs().le(&1e-12) {
                return Err(Error::invalid(format!(
                    "direction {i} has norm {norm}, expected 1"
                )));
            }
        }
        Ok(DirectionSource::Explicit { k, n, rows })
    }

    pub fn k(&self) -> usize {
        match self {
            DirectionSource::Explicit { k, .. } | DirectionSource::Seeded { k, .. } => *k,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            DirectionSource::Explicit { n, .. } | DirectionSource::Seeded { n, .. } => *n,
        }
    }

    pub fn seed(&self) -> Option<&Seed> {
        match self {
            DirectionSource::Seeded { seed, .. } => Some(seed),
            DirectionSource::Explicit { .. } => None,
        }
    }

    /// Direction `i` as an owned vector.
    pub fn row(&self, i: usize) -> Vec<Complex64> {
        assert!(i < self.k(), "direction index {i} out of range");
        match self {
            DirectionSource::Explicit { n, rows, .. } => rows[i * n..(i + 1) * n].to_vec(),
            DirectionSource::Seeded { seed, n, .. } => seeded_direction(seed, i as u64, *n),
        }
    }

    /// Materializes every row.
    pub fn to_explicit(&self) -> DirectionSource {
        match self {
            DirectionSource::Explicit { .. } => self.clone(),
            DirectionSource::Seeded { k, n, .. } => DirectionSource::Explicit {
                k: *k,
                n: *n,
                rows: (0..*k).flat_map(|i| self.row(i)).collect(),
            },
        }
    }
}
