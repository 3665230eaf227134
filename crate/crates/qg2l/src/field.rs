//! Zero-mean spectral fields on a periodic square grid.
//!
//! A `ScalarField` stores the full N×N complex coefficient array of one real
//! field; `Field2L` stacks two layers. Constructors enforce the structural
//! invariants: the mean mode is exactly zero, Nyquist rows are exactly zero,
//! and coefficients are Hermitian-symmetric, so the physical field is real.

use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::grid::Grid;

/// One real scalar field, stored spectrally.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    coeffs: Vec<Complex64>,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<Grid>) -> ScalarField {
        ScalarField {
            grid: grid.clone(),
            coeffs: vec![Complex64::new(0.0, 0.0); grid.n() * grid.n()],
        }
    }

    /// Wrap a raw coefficient buffer, enforcing all structural invariants:
    /// Hermitian symmetrization, zero mean mode, zero Nyquist rows.
    pub fn from_raw_symmetrized(grid: &Arc<Grid>, mut coeffs: Vec<Complex64>) -> ScalarField {
        let n = grid.n();
        assert_eq!(coeffs.len(), n * n);
        symmetrize(n, &mut coeffs);
        ScalarField { grid: grid.clone(), coeffs }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    #[inline]
    pub fn at(&self, ix: usize, iy: usize) -> Complex64 {
        self.coeffs[iy * self.grid.n() + ix]
    }

    /// Set the coefficient at integer frequency `(j1, j2)` and the conjugate
    /// at `(-j1, -j2)`, keeping the field real. The mean mode is rejected.
    pub fn set_mode(&mut self, j1: i32, j2: i32, c: Complex64) {
        assert!((j1, j2) != (0, 0), "mean mode is structurally zero");
        let n = self.grid.n();
        let half = (n / 2) as i32;
        assert!(j1.abs() < half && j2.abs() < half, "mode outside represented band");
        let ix = self.grid.index_of_freq(j1);
        let iy = self.grid.index_of_freq(j2);
        let jx = self.grid.index_of_freq(-j1);
        let jy = self.grid.index_of_freq(-j2);
        self.coeffs[iy * n + ix] = c;
        self.coeffs[jy * n + jx] = c.conj();
    }

    /// Pointwise linear combination `self + s * other`.
    pub fn axpy(&mut self, s: f64, other: &ScalarField) {
        assert!(self.grid.same_as(&other.grid), "grid mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(other.coeffs.iter()) {
            *a += s * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in self.coeffs.iter_mut() {
            *a *= s;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Exact coefficient equality (used by semimetric zero tests).
    pub fn bit_eq(&self, other: &ScalarField) -> bool {
        self.grid.same_as(&other.grid)
            && self
                .coeffs
                .iter()
                .zip(other.coeffs.iter())
                .all(|(a, b)| a.re == b.re && a.im == b.im)
    }
}

/// Two-layer field (streamfunction, vorticity, or difference variables).
#[derive(Debug, Clone)]
pub struct Field2L {
    layers: [ScalarField; 2],
}

impl Field2L {
    pub fn zeros(grid: &Arc<Grid>) -> Field2L {
        Field2L {
            layers: [ScalarField::zeros(grid), ScalarField::zeros(grid)],
        }
    }

    pub fn from_layers(l1: ScalarField, l2: ScalarField) -> Field2L {
        assert!(l1.grid().same_as(l2.grid()), "grid mismatch");
        Field2L { layers: [l1, l2] }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.layers[0].grid()
    }

    #[inline]
    pub fn layer(&self, i: usize) -> &ScalarField {
        &self.layers[i]
    }

    #[inline]
    pub fn layer_mut(&mut self, i: usize) -> &mut ScalarField {
        &mut self.layers[i]
    }

    pub fn axpy(&mut self, s: f64, other: &Field2L) {
        self.layers[0].axpy(s, &other.layers[0]);
        self.layers[1].axpy(s, &other.layers[1]);
    }

    pub fn scale(&mut self, s: f64) {
        self.layers[0].scale(s);
        self.layers[1].scale(s);
    }

    /// `self - other`, layerwise.
    pub fn minus(&self, other: &Field2L) -> Field2L {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.layers[0].is_finite() && self.layers[1].is_finite()
    }

    pub fn bit_eq(&self, other: &Field2L) -> bool {
        self.layers[0].bit_eq(&other.layers[0]) && self.layers[1].bit_eq(&other.layers[1])
    }
}

/// Layer heights and stratification constants with `p = h₁F₁ = h₂F₂`.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct LayerWeights {
    pub h1: f64,
    pub h2: f64,
    pub f1: f64,
    pub f2: f64,
}

impl LayerWeights {
    pub fn new(h1: f64, h2: f64, f1: f64, f2: f64) -> Result<LayerWeights, String> {
        if !(h1 > 0.0 && h2 > 0.0 && f1 > 0.0 && f2 > 0.0) {
            return Err("layer weights must be strictly positive".to_string());
        }
        let p = h1 * f1;
        if (h1 * f1 - h2 * f2).abs() > 1e-12 * p {
            return Err(format!(
                "h1*F1 = {} and h2*F2 = {} must agree (p-compatibility)",
                h1 * f1,
                h2 * f2
            ));
        }
        Ok(LayerWeights { h1, h2, f1, f2 })
    }

    /// `p = h₁F₁ = h₂F₂`.
    pub fn p(&self) -> f64 {
        self.h1 * self.f1
    }
}

#[inline]
fn bits(c: Complex64) -> (u64, u64) {
    (c.re.to_bits(), c.im.to_bits())
}

/// Replace signed zeros by +0.0 so symmetrization is byte-stable.
#[inline]
fn clean_zero(c: Complex64) -> Complex64 {
    Complex64::new(
        if c.re == 0.0 { 0.0 } else { c.re },
        if c.im == 0.0 { 0.0 } else { c.im },
    )
}

/// In-place Hermitian symmetrization plus zeroing of the structurally-excluded
/// slots. After this, the physical field is exactly real and zero-mean.
///
/// Entries that already satisfy the invariants bitwise are left untouched, so
/// a checkpoint decode of a well-formed field is the identity at byte level.
pub(crate) fn symmetrize(n: usize, coeffs: &mut [Complex64]) {
    let half = n / 2;
    let zero = Complex64::new(0.0, 0.0);
    // Nyquist rows cannot pair under j -> -j; they are excluded outright.
    for i in 0..n {
        if bits(coeffs[half * n + i]) != bits(zero) {
            coeffs[half * n + i] = zero;
        }
        if bits(coeffs[i * n + half]) != bits(zero) {
            coeffs[i * n + half] = zero;
        }
    }
    if bits(coeffs[0]) != bits(zero) {
        coeffs[0] = zero;
    }
    for iy in 0..n {
        if iy == half {
            continue;
        }
        let ny = if iy == 0 { 0 } else { n - iy };
        for ix in 0..n {
            if ix == half {
                continue;
            }
            let nx = if ix == 0 { 0 } else { n - ix };
            let a = iy * n + ix;
            let b = ny * n + nx;
            if a < b && bits(coeffs[b]) != bits(coeffs[a].conj()) {
                let v = clean_zero(0.5 * (coeffs[a] + coeffs[b].conj()));
                coeffs[a] = v;
                coeffs[b] = clean_zero(v.conj());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetrize_produces_hermitian_pairs() {
        let g = Grid::new(1.0, 8);
        let n = g.n();
        let mut raw = vec![Complex64::new(0.0, 0.0); n * n];
        for (i, c) in raw.iter_mut().enumerate() {
            *c = Complex64::new(i as f64, (i % 3) as f64);
        }
        let f = ScalarField::from_raw_symmetrized(&g, raw);
        for iy in 0..n {
            for ix in 0..n {
                let jx = g.freq(ix);
                let jy = g.freq(iy);
                if jx.abs() == (n / 2) as i32 || jy.abs() == (n / 2) as i32 {
                    continue;
                }
                let a = f.at(ix, iy);
                let b = f.at(g.index_of_freq(-jx), g.index_of_freq(-jy));
                assert_eq!(a, b.conj());
            }
        }
        assert_eq!(f.at(0, 0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn layer_weights_reject_p_mismatch() {
        assert!(LayerWeights::new(1.0, 1.0, 1.0, 1.0).is_ok());
        assert!(LayerWeights::new(1.0, 2.0, 1.0, 0.5).is_ok());
        assert!(LayerWeights::new(1.0, 1.0, 1.0, 2.0).is_err());
        assert!(LayerWeights::new(-1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn set_mode_keeps_field_real() {
        let g = Grid::new(2.0 * std::f64::consts::PI, 16);
        let mut f = ScalarField::zeros(&g);
        f.set_mode(2, -3, Complex64::new(0.5, -0.25));
        let a = f.at(g.index_of_freq(2), g.index_of_freq(-3));
        let b = f.at(g.index_of_freq(-2), g.index_of_freq(3));
        assert_eq!(a, b.conj());
    }
}
