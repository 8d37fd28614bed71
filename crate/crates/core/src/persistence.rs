//! Binary sketch files.
//!
//! ```text
//! offset  size      field
//! 0       4         magic "TSKD"
//! 4       4         format version (u32)
//! 8       1         mode: 0 = explicit directions, 1 = seeded
//! 9       8         n (u64)
//! 17      8         p (u64)
//! 25      4         s (u32)
//! 29      4         k (u32)
//! 33      32        master seed (mode 1 only)
//! ..      16 n      base point
//! ..      16 k n    directions, row-major (mode 0 only)
//! ..      16 k(s+1)p  Taylor coefficients P, row-major k × (s+1) × p
//! ```
//!
//! Integers are little-endian; a complex value is `(re, im)` as two
//! little-endian IEEE-754 doubles.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{PersistError, Result};
use crate::sampling::{DirectionSource, Seed};
use crate::sketch::SketchData;

pub const MAGIC: [u8; 4] = *b"TSKD";
pub const FORMAT_VERSION: u32 = 1;
pub const MODE_EXPLICIT: u8 = 0;
pub const MODE_SEEDED: u8 = 1;

const FIXED_HEADER: u64 = 33;
const COMPLEX_BYTES: u64 = 16;

/// Header length in bytes for the given mode and input dimension.
pub fn header_len(mode: u8, n: u64) -> u64 {
    let seed = if mode == MODE_SEEDED { 32 } else { 0 };
    FIXED_HEADER + seed + COMPLEX_BYTES * n
}

/// Total file length for a sketch.
pub fn encoded_len(sk: &SketchData) -> u64 {
    let (n, p, s, k) = (sk.n() as u64, sk.p() as u64, sk.s() as u64, sk.k() as u64);
    let (mode, dirs) = match sk.directions() {
        DirectionSource::Explicit { .. } => (MODE_EXPLICIT, k * n),
        DirectionSource::Seeded { .. } => (MODE_SEEDED, 0),
    };
    header_len(mode, n) + COMPLEX_BYTES * (dirs + k * (s + 1) * p)
}

fn put_complex(buf: &mut Vec<u8>, values: &[Complex64]) {
    for c in values {
        buf.extend_from_slice(&c.re.to_le_bytes());
        buf.extend_from_slice(&c.im.to_le_bytes());
    }
}

pub fn to_bytes(sk: &SketchData) -> Result<Vec<u8>> {
    let s = u32::try_from(sk.s()).map_err(|_| PersistError::BadDims("s exceeds u32".into()))?;
    let k = u32::try_from(sk.k()).map_err(|_| PersistError::BadDims("k exceeds u32".into()))?;
    let mut buf = Vec::with_capacity(encoded_len(sk) as usize);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let mode = match sk.directions() {
        DirectionSource::Explicit { .. } => MODE_EXPLICIT,
        DirectionSource::Seeded { .. } => MODE_SEEDED,
    };
    buf.push(mode);
    buf.extend_from_slice(&(sk.n() as u64).to_le_bytes());
    buf.extend_from_slice(&(sk.p() as u64).to_le_bytes());
    buf.extend_from_slice(&s.to_le_bytes());
    buf.extend_from_slice(&k.to_le_bytes());
    if let Some(seed) = sk.directions().seed() {
        buf.extend_from_slice(&seed.0);
    }
    put_complex(&mut buf, sk.base_point());
    if let DirectionSource::Explicit { rows, .. } = sk.directions() {
        put_complex(&mut buf, rows);
    }
    put_complex(&mut buf, sk.taylor());
    Ok(buf)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8], PersistError> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(PersistError::Truncated {
                expected: self.pos as u64 + len as u64,
                actual: self.bytes.len() as u64,
            }),
        }
    }

    fn u32(&mut self) -> Result<u32, PersistError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, PersistError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, PersistError> {
        let offset = self.pos as u64;
        let x = f64::from_le_bytes(self.take(8)?.try_into().unwrap());
        if x.is_finite() {
            Ok(x)
        } else {
            Err(PersistError::NonFinite(offset))
        }
    }

    fn complex(&mut self, count: usize) -> Result<Vec<Complex64>, PersistError> {
        (0..count)
            .map(|_| Ok(Complex64::new(self.f64()?, self.f64()?)))
            .collect()
    }
}

fn dim(x: u64, name: &str) -> Result<usize, PersistError> {
    if x == 0 {
        return Err(PersistError::BadDims(format!("{name} must be positive")));
    }
    usize::try_from(x).map_err(|_| PersistError::BadDims(format!("{name} = {x} too large")))
}

pub fn from_bytes(bytes: &[u8]) -> Result<SketchData> {
    Ok(decode(bytes)?)
}

fn decode(bytes: &[u8]) -> Result<SketchData, PersistError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
    if magic != MAGIC {
        return Err(PersistError::BadMagic(magic));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(PersistError::UnsupportedVersion(version));
    }
    let mode = r.take(1)?[0];
    if mode != MODE_EXPLICIT && mode != MODE_SEEDED {
        return Err(PersistError::BadMode(mode));
    }
    let n64 = r.u64()?;
    let p64 = r.u64()?;
    let s64 = r.u32()? as u64;
    let k64 = r.u32()? as u64;

    // Size check before any header-driven allocation.
    let dirs = if mode == MODE_EXPLICIT {
        k64.checked_mul(n64)
    } else {
        Some(0)
    };
    let expected = dirs
        .and_then(|d| {
            let body = k64.checked_mul(s64 + 1)?.checked_mul(p64)?.checked_add(d)?;
            COMPLEX_BYTES
                .checked_mul(body)?
                .checked_add(COMPLEX_BYTES.checked_mul(n64)?)?
                .checked_add(header_len(mode, 0))
        })
        .ok_or_else(|| PersistError::BadDims("dimensions overflow".into()))?;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(PersistError::Truncated { expected, actual });
    }
    if actual > expected {
        return Err(PersistError::TrailingBytes(actual - expected));
    }
    let (n, p, k) = (dim(n64, "n")?, dim(p64, "p")?, dim(k64, "k")?);
    let s = s64 as usize;

    let seed = if mode == MODE_SEEDED {
        Some(Seed(r.take(32)?.try_into().unwrap()))
    } else {
        None
    };
    let base_point = r.complex(n)?;
    let directions = match seed {
        Some(seed) => DirectionSource::seeded(seed, k, n),
        None => DirectionSource::explicit(k, n, r.complex(k * n)?)
            .map_err(|e| PersistError::BadDims(e.to_string()))?,
    };
    let taylor = r.complex(k * (s + 1) * p)?;
    SketchData::new(base_point, directions, taylor, p, s)
        .map_err(|e| PersistError::BadDims(e.to_string()))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PersistError + '_ {
    move |source| PersistError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the sketch atomically: temp file in the target directory, fsync,
/// rename.
pub fn save_sketch(sk: &SketchData, path: &Path) -> Result<()> {
    let bytes = to_bytes(sk)?;
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(&bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| io_err(path)(e.error))?;
    if let Ok(d) = fs::File::open(dir) {
        let _ = d.sync_all();
    }
    Ok(())
}

pub fn load_sketch(path: &Path) -> Result<SketchData> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    from_bytes(&bytes)
}
