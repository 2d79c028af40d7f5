//! Symmetric banded matrices with half-bandwidth 1 (tridiagonal) or 2
//! (pentadiagonal): Sturm counts through the LDLᵀ inertia, and shifted solves for
//! inverse iteration.

/// Symmetric band matrix stored by diagonals: `bands[d-1][i] = A[i][i+d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand {
    diag: Vec<f64>,
    bands: Vec<Vec<f64>>,
}

impl SymBand {
    pub fn new(diag: Vec<f64>, bands: Vec<Vec<f64>>) -> Self {
        let n = diag.len();
        assert!(
            bands.len() <= 2,
            "only half-bandwidths up to 2 are supported"
        );
        for (d, b) in bands.iter().enumerate() {
            assert_eq!(b.len(), n.saturating_sub(d + 1), "band {} has wrong length", d + 1);
        }
        Self { diag, bands }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn half_bandwidth(&self) -> usize {
        self.bands.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn band(&self, d: usize) -> &[f64] {
        &self.bands[d - 1]
    }

    /// `A[i][j]` for `|i - j| <= half_bandwidth`, zero otherwise.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        match d {
            0 => self.diag[lo],
            d if d <= self.bands.len() => self.bands[d - 1][lo],
            _ => 0.0,
        }
    }

    /// `c·A + diag(extra)`.
    pub fn scaled_plus_diag(&self, c: f64, extra: &[f64]) -> SymBand {
        assert_eq!(extra.len(), self.dim());
        SymBand {
            diag: self
                .diag
                .iter()
                .zip(extra)
                .map(|(a, e)| c * a + e)
                .collect(),
            bands: self
                .bands
                .iter()
                .map(|b| b.iter().map(|a| c * a).collect())
                .collect(),
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(x.len(), n);
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(a, v)| a * v).collect();
        for (dm1, band) in self.bands.iter().enumerate() {
            let d = dm1 + 1;
            for (i, &a) in band.iter().enumerate() {
                y[i] += a * x[i + d];
                y[i + d] += a * x[i];
            }
        }
        y
    }

    /// Gershgorin interval containing every eigenvalue.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut radius = 0.0;
            for d in 1..=self.bands.len() {
                if i >= d {
                    radius += self.bands[d - 1][i - d].abs();
                }
                if i + d < n {
                    radius += self.bands[d - 1][i].abs();
                }
            }
            lo = lo.min(self.diag[i] - radius);
            hi = hi.max(self.diag[i] + radius);
        }
        (lo, hi)
    }

    fn max_abs_entry(&self) -> f64 {
        self.diag
            .iter()
            .chain(self.bands.iter().flatten())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Number of eigenvalues strictly below `shift`, from the signs of the pivots
    /// of `A - shift·I = L D Lᵀ` (Sylvester's law of inertia). For a tridiagonal
    /// matrix this is the classical Sturm sequence count.
    pub fn count_below(&self, shift: f64) -> usize {
        let n = self.dim();
        let pivmin = f64::MIN_POSITIVE.max(f64::EPSILON * f64::EPSILON * self.max_abs_entry());
        let mut count = 0;
        // d_{i-1}, d_{i-2}, l1_{i-1}
        let (mut d1, mut d2, mut p1) = (0.0_f64, 0.0_f64, 0.0_f64);
        for i in 0..n {
            let a = self.diag[i] - shift;
            let (s, p) = match self.bands.len() {
                1 => {
                    let p = if i >= 1 { self.bands[0][i - 1] / d1 } else { 0.0 };
                    (0.0, p)
                }
                _ => {
                    let s = if i >= 2 { self.bands[1][i - 2] / d2 } else { 0.0 };
                    let p = if i >= 1 {
                        let e = self.bands[0][i - 1];
                        let corr = if i >= 2 { s * p1 * d2 } else { 0.0 };
                        (e - corr) / d1
                    } else {
                        0.0
                    };
                    (s, p)
                }
            };
            let mut d = a;
            if i >= 1 {
                d -= p * p * d1;
            }
            if i >= 2 {
                d -= s * s * d2;
            }
            if d.abs() < pivmin {
                d = -pivmin;
            }
            if d < 0.0 {
                count += 1;
            }
            d2 = d1;
            d1 = d;
            p1 = p;
        }
        count
    }

    /// Solves `(A - shift·I) x = b` by banded Gaussian elimination with partial
    /// pivoting. Exact singularity is replaced by a tiny pivot, which is what
    /// inverse iteration wants.
    pub fn solve_shifted(&self, shift: f64, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let kl = self.bands.len();
        let ku = 2 * kl; // upper bandwidth after pivoting fill-in
        let width = kl + ku + 1;
        let tiny = f64::EPSILON * self.max_abs_entry().max(shift.abs()).max(f64::MIN_POSITIVE);
        // row-major band storage: row i holds columns i-kl ..= i+ku at offset (j - i + kl)
        let mut a = vec![0.0; n * width];
        let idx = |i: usize, j: usize| i * width + (j + kl - i);
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + kl).min(n - 1);
            for j in lo..=hi {
                let mut v = self.get(i, j);
                if i == j {
                    v -= shift;
                }
                a[idx(i, j)] = v;
            }
        }
        let mut x = b.to_vec();
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            // pivot search in column k
            let mut piv = k;
            let mut best = a[idx(k, k)].abs();
            for i in k + 1..=last {
                let v = a[idx(i, k)].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            let col_hi = (k + ku).min(n - 1);
            if piv != k {
                for j in k..=col_hi {
                    a.swap(idx(k, j), idx(piv, j));
                }
                x.swap(k, piv);
            }
            if a[idx(k, k)].abs() < tiny {
                a[idx(k, k)] = tiny;
            }
            let pivot = a[idx(k, k)];
            for i in k + 1..=last {
                let f = a[idx(i, k)] / pivot;
                if f == 0.0 {
                    continue;
                }
                a[idx(i, k)] = 0.0;
                for j in k + 1..=col_hi {
                    a[idx(i, j)] -= f * a[idx(k, j)];
                }
                x[i] -= f * x[k];
            }
        }
        for k in (0..n).rev() {
            let col_hi = (k + ku).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=col_hi {
                s -= a[idx(k, j)] * x[j];
            }
            x[k] = s / a[idx(k, k)];
        }
        x
    }
}
