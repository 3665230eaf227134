//! Periodic square grid and the eigenstructure of `-Δ` on it.
//!
//! Fields live on `[0,L]²` with `N` collocation points per direction and are
//! stored as complex Fourier coefficients. Real fields are Hermitian-symmetric,
//! so the conjugate pair `{k, -k}` carries a single complex degree of freedom,
//! equivalently the two real eigenfunctions `√2/L·cos(k·x)` and `√2/L·sin(k·x)`
//! of `-Δ` with eigenvalue `|k|²`.
//!
//! The mode enumeration below lists one canonical representative per conjugate
//! pair, sorted ascending by `|k|²` with ties broken lexicographically on the
//! integer wavenumbers `(j₁, j₂)`. Eigen-index `n` (1-based) always refers to
//! this ordering, and every pair has multiplicity 2 in trace sums. The zero
//! mode is structurally excluded (all fields are zero-mean), and so are the
//! Nyquist rows `|j| = N/2`, which cannot be paired Hermitian-symmetrically.

use std::sync::Arc;

/// One conjugate pair of Fourier modes, identified by its canonical
/// representative `(j1, j2)` with `j2 > 0` or (`j2 == 0` and `j1 > 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    /// Integer wavenumbers of the canonical representative.
    pub j: (i32, i32),
    /// Eigenvalue of `-Δ`: `λ = (2π/L)²(j1² + j2²)`.
    pub lambda: f64,
}

/// Periodic square grid `[0,L]²` with `N` modes per dimension.
#[derive(Debug)]
pub struct Grid {
    n: usize,
    l: f64,
    /// Canonical pair enumeration, ascending `(j1²+j2², j1, j2)`.
    modes: Vec<Mode>,
    /// Storage index -> 1-based pair rank; 0 marks structurally-zero entries
    /// (the mean mode and the Nyquist rows).
    rank_of: Vec<u32>,
}

impl Grid {
    /// Build the grid and its deterministic mode ordering.
    ///
    /// Panics if `N` is odd or `N < 8`.
    pub fn new(l: f64, n: usize) -> Arc<Grid> {
        assert!(l > 0.0, "domain side length must be positive");
        assert!(n % 2 == 0 && n >= 8, "N must be even and at least 8");
        let half = (n / 2) as i32;
        let k1 = 2.0 * std::f64::consts::PI / l;

        // Collect canonical representatives with integer sort key.
        let mut keyed: Vec<(i64, i32, i32)> = Vec::new();
        for j2 in -(half - 1)..=(half - 1) {
            for j1 in -(half - 1)..=(half - 1) {
                if (j1, j2) == (0, 0) {
                    continue;
                }
                let canonical = j2 > 0 || (j2 == 0 && j1 > 0);
                if canonical {
                    keyed.push((j1 as i64 * j1 as i64 + j2 as i64 * j2 as i64, j1, j2));
                }
            }
        }
        keyed.sort_unstable();
        let modes: Vec<Mode> = keyed
            .iter()
            .map(|&(m2, j1, j2)| Mode {
                j: (j1, j2),
                lambda: k1 * k1 * m2 as f64,
            })
            .collect();

        let mut rank_of = vec![0u32; n * n];
        for (rank0, &(_, j1, j2)) in keyed.iter().enumerate() {
            let r = (rank0 + 1) as u32;
            for (a, b) in [(j1, j2), (-j1, -j2)] {
                let ix = Self::index_of_freq_static(n, a);
                let iy = Self::index_of_freq_static(n, b);
                rank_of[iy * n + ix] = r;
            }
        }

        Arc::new(Grid { n, l, modes, rank_of })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    /// Number of represented conjugate pairs.
    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    /// Smallest nonzero eigenvalue of `-Δ`, `λ₁ = (2π/L)²`.
    pub fn lambda_1(&self) -> f64 {
        let k1 = 2.0 * std::f64::consts::PI / self.l;
        k1 * k1
    }

    /// Eigenvalue of the `rank`-th pair (1-based) in the deterministic order.
    pub fn lambda_n(&self, rank: usize) -> f64 {
        self.modes[rank - 1].lambda
    }

    pub fn mode(&self, rank: usize) -> Mode {
        self.modes[rank - 1]
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    /// 1-based pair rank of a storage index, or 0 for structurally-zero slots.
    #[inline]
    pub fn rank_of_index(&self, idx: usize) -> u32 {
        self.rank_of[idx]
    }

    /// Signed integer frequency of a storage index along one dimension.
    #[inline]
    pub fn freq(&self, i: usize) -> i32 {
        let n = self.n as i32;
        let i = i as i32;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Storage index along one dimension for a signed frequency.
    #[inline]
    pub fn index_of_freq(&self, j: i32) -> usize {
        Self::index_of_freq_static(self.n, j)
    }

    #[inline]
    fn index_of_freq_static(n: usize, j: i32) -> usize {
        if j >= 0 {
            j as usize
        } else {
            (j + n as i32) as usize
        }
    }

    /// Physical wavenumber for a signed integer frequency.
    #[inline]
    pub fn wavenumber(&self, j: i32) -> f64 {
        2.0 * std::f64::consts::PI / self.l * j as f64
    }

    /// `|k|²` at a storage position `(ix, iy)`.
    #[inline]
    pub fn lambda_at(&self, ix: usize, iy: usize) -> f64 {
        let kx = self.wavenumber(self.freq(ix));
        let ky = self.wavenumber(self.freq(iy));
        kx * kx + ky * ky
    }

    /// Largest retained `|j|` under the 2/3 dealiasing rule.
    pub fn dealias_cut(&self) -> i32 {
        (self.n / 3) as i32
    }

    /// True if the storage position survives the 2/3-rule truncation.
    #[inline]
    pub fn in_dealias_band(&self, ix: usize, iy: usize) -> bool {
        let c = self.dealias_cut();
        self.freq(ix).abs() <= c && self.freq(iy).abs() <= c
    }

    /// Parseval factor: `∫ uv dx = L² Σ û conj(v̂)` over all stored entries.
    #[inline]
    pub fn parseval(&self) -> f64 {
        self.l * self.l
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.n == other.n && self.l == other.l
    }
}
