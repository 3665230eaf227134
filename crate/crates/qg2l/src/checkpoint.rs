//! Binary checkpoint format for two-layer states.
//!
//! Layout, all little-endian:
//!
//! ```text
//!   magic  "QG2L"            4 bytes
//!   version u32              = 1
//!   L       f64              domain side length
//!   N       u32              modes per dimension
//!   layers  u32              = 2
//!   time    f64
//!   layer 0 coefficients     N² × (re f64, im f64), row-major
//!   layer 1 coefficients     same
//! ```
//!
//! Round-trips are bit-exact for any field produced by this crate.

use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::field::{Field2L, ScalarField};
use crate::grid::Grid;

pub const MAGIC: [u8; 4] = *b"QG2L";
pub const VERSION: u32 = 1;
/// Decoder guard against absurd allocations from corrupt headers.
const MAX_N: u32 = 4096;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CheckpointError {
    #[error("checkpoint truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("bad magic: not a QG2L checkpoint")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("invalid header field: {0}")]
    BadHeader(&'static str),
}

pub fn encode(field: &Field2L, time: f64) -> Vec<u8> {
    let grid = field.grid();
    let n = grid.n();
    let mut out = Vec::with_capacity(4 + 4 + 8 + 4 + 4 + 8 + 2 * n * n * 16);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&grid.l().to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&2u32.to_le_bytes());
    out.extend_from_slice(&time.to_le_bytes());
    for layer in 0..2 {
        for c in field.layer(layer).coeffs() {
            out.extend_from_slice(&c.re.to_le_bytes());
            out.extend_from_slice(&c.im.to_le_bytes());
        }
    }
    out
}

fn read_f64(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap())
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

pub fn decode(bytes: &[u8]) -> Result<(Field2L, f64), CheckpointError> {
    const HEADER: usize = 4 + 4 + 8 + 4 + 4 + 8;
    if bytes.len() < HEADER {
        return Err(CheckpointError::Truncated { expected: HEADER, found: bytes.len() });
    }
    if bytes[0..4] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u32(bytes, 4);
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let l = read_f64(bytes, 8);
    let n = read_u32(bytes, 16);
    let layers = read_u32(bytes, 20);
    let time = read_f64(bytes, 24);
    if !(l.is_finite() && l > 0.0) {
        return Err(CheckpointError::BadHeader("L must be finite and positive"));
    }
    if n % 2 != 0 || n < 8 || n > MAX_N {
        return Err(CheckpointError::BadHeader("N must be even, >= 8 and sane"));
    }
    if layers != 2 {
        return Err(CheckpointError::BadHeader("layer count must be 2"));
    }
    if !time.is_finite() {
        return Err(CheckpointError::BadHeader("time must be finite"));
    }
    let n = n as usize;
    let expected = HEADER + 2 * n * n * 16;
    if bytes.len() != expected {
        return Err(CheckpointError::Truncated { expected, found: bytes.len() });
    }
    let grid: Arc<Grid> = Grid::new(l, n);
    let mut layers_out = Vec::with_capacity(2);
    let mut at = HEADER;
    for _ in 0..2 {
        let mut coeffs = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            let re = read_f64(bytes, at);
            let im = read_f64(bytes, at + 8);
            at += 16;
            if !(re.is_finite() && im.is_finite()) {
                return Err(CheckpointError::BadHeader("non-finite coefficient"));
            }
            coeffs.push(Complex64::new(re, im));
        }
        layers_out.push(ScalarField::from_raw_symmetrized(&grid, coeffs));
    }
    let l2 = layers_out.pop().unwrap();
    let l1 = layers_out.pop().unwrap();
    Ok((Field2L::from_layers(l1, l2), time))
}

pub fn write_file(path: &Path, field: &Field2L, time: f64) -> std::io::Result<()> {
    std::fs::write(path, encode(field, time))
}

pub fn read_file(path: &Path) -> std::io::Result<Result<(Field2L, f64), CheckpointError>> {
    Ok(decode(&std::fs::read(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{purpose, random_field_2l, stream};

    #[test]
    fn roundtrip_is_bit_exact() {
        let g = Grid::new(3.5, 16);
        let mut rng = stream(1, purpose::TEST, 0);
        let f = random_field_2l(&g, 1.0, 0.7, &mut rng);
        let bytes = encode(&f, 12.25);
        let (back, t) = decode(&bytes).unwrap();
        assert_eq!(t, 12.25);
        assert!(back.bit_eq(&f));
        // Re-encode must reproduce the byte stream exactly.
        assert_eq!(encode(&back, t), bytes);
    }

    #[test]
    fn decoder_rejects_corrupt_input() {
        let g = Grid::new(1.0, 8);
        let f = Field2L::zeros(&g);
        let bytes = encode(&f, 0.0);
        assert_eq!(decode(&bytes[..10]).unwrap_err(), CheckpointError::Truncated { expected: 32, found: 10 });
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(decode(&bad).unwrap_err(), CheckpointError::BadMagic);
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(decode(&bad).unwrap_err(), CheckpointError::BadVersion(_)));
        let mut bad = bytes.clone();
        bad[16] = 7; // odd N
        assert!(matches!(decode(&bad).unwrap_err(), CheckpointError::BadHeader(_)));
        let mut bad = bytes;
        bad.truncate(bad.len() - 1);
        assert!(matches!(decode(&bad).unwrap_err(), CheckpointError::Truncated { .. }));
    }
}
