//! Uniform radial grid on `(0, r_max]`, quadrature rules and the discrete radial
//! Laplacian acting on reduced fields `U(r) = r u(r)`.
//!
//! The origin is never a node. Two quadrature rules are provided:
//!
//! * [`RadialGrid::weights`] integrates an arbitrary smooth integrand over
//!   `[0, r_max]`. The left end is an open rule (the value at `r = 0` is never
//!   sampled) and the right end is the closed Gregory correction; both are exact for
//!   cubics, so the rule is fourth order for smooth integrands.
//! * [`RadialGrid::reduced_weights`] is the trapezoid rule for integrands that
//!   vanish at the origin, which is the case for everything built from `U`. This is
//!   the inner product used by the variational problem, the Poisson kernel and the
//!   eigensolvers, so that norms, energies and eigenvalues are mutually consistent.

use std::sync::Arc;

use crate::eigen::banded::SymBand;
use crate::error::{Result, SolitonError};

pub const MIN_NODES: usize = 16;

// Open left end, exact for cubics, all weights positive.
const LEFT_WEIGHTS: [f64; 5] = [55.0 / 24.0, 5.0 / 24.0, 0.25, 17.0 / 8.0, 5.0 / 8.0];
// Closed right end (Gregory), exact for cubics.
const RIGHT_WEIGHTS: [f64; 3] = [23.0 / 24.0, 7.0 / 6.0, 3.0 / 8.0];

/// Finite-difference stencil used for second derivatives of reduced fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stencil {
    /// Three-point central difference, second order, tridiagonal.
    Second,
    /// Five-point central difference, fourth order, pentadiagonal. The row next to
    /// the origin uses a ghost value built from the cusp condition
    /// `U''(0) = -2 z U'(0)`.
    #[default]
    Fourth,
}

impl Stencil {
    pub fn half_bandwidth(self) -> usize {
        match self {
            Stencil::Second => 1,
            Stencil::Fourth => 2,
        }
    }

    pub fn order(self) -> f64 {
        match self {
            Stencil::Second => 2.0,
            Stencil::Fourth => 4.0,
        }
    }
}

impl std::fmt::Display for Stencil {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stencil::Second => "second",
            Stencil::Fourth => "fourth",
        })
    }
}

impl std::str::FromStr for Stencil {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "second" | "2" => Ok(Stencil::Second),
            "fourth" | "4" => Ok(Stencil::Fourth),
            other => Err(format!("unknown stencil '{other}' (expected second|fourth)")),
        }
    }
}

/// Uniform discretization `r_i = i h`, `i = 1..=n`, `h = r_max / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    spacing: f64,
    r_max: f64,
    weights: Vec<f64>,
    reduced_weights: Vec<f64>,
    stencil: Stencil,
}

/// Builds a grid with the default fourth-order stencil.
pub fn build_grid(n: usize, r_max: f64) -> Result<Arc<RadialGrid>> {
    RadialGrid::new(n, r_max, Stencil::default())
}

impl RadialGrid {
    pub fn new(n: usize, r_max: f64, stencil: Stencil) -> Result<Arc<Self>> {
        if n < MIN_NODES {
            return Err(SolitonError::InvalidGrid(format!(
                "need at least {MIN_NODES} nodes, got {n}"
            )));
        }
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(SolitonError::InvalidGrid(format!(
                "r_max must be positive and finite, got {r_max}"
            )));
        }
        let h = r_max / n as f64;
        let mut nodes: Vec<f64> = (1..=n).map(|i| i as f64 * h).collect();
        // pin the last node exactly
        nodes[n - 1] = r_max;

        let mut weights = vec![h; n];
        for (w, c) in weights.iter_mut().zip(LEFT_WEIGHTS) {
            *w = c * h;
        }
        for (w, c) in weights[n - 3..].iter_mut().zip(RIGHT_WEIGHTS) {
            *w = c * h;
        }

        let mut reduced_weights = vec![h; n];
        reduced_weights[n - 1] = 0.5 * h;

        Ok(Arc::new(Self {
            nodes,
            spacing: h,
            r_max,
            weights,
            reduced_weights,
            stencil,
        }))
    }

    /// Same extent and resolution with a different stencil.
    pub fn with_stencil(&self, stencil: Stencil) -> Arc<Self> {
        Arc::new(Self {
            stencil,
            ..self.clone()
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn reduced_weights(&self) -> &[f64] {
        &self.reduced_weights
    }

    pub fn stencil(&self) -> Stencil {
        self.stencil
    }

    /// `∑ w_i f_i` with the general-purpose weights.
    pub fn quadrature(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        self.weights.iter().zip(values).map(|(w, f)| w * f).sum()
    }

    /// `∑ ŵ_i f_i` for integrands that vanish at the origin.
    pub fn reduced_quadrature(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        self.reduced_weights
            .iter()
            .zip(values)
            .map(|(w, f)| w * f)
            .sum()
    }

    /// The discrete operator `d²/dr²` on the interior nodes `r_1..r_{n-1}`, with
    /// `U(0) = 0` and `U(r_max) = 0`. Symmetric; `cusp_charge` only enters the
    /// fourth-order closure at the first node.
    pub fn laplacian_band(&self, cusp_charge: f64) -> SymBand {
        let m = self.len() - 1;
        let h = self.spacing;
        match self.stencil {
            Stencil::Second => {
                let c = 1.0 / (h * h);
                SymBand::new(vec![-2.0 * c; m], vec![vec![c; m - 1]])
            }
            Stencil::Fourth => {
                let c = 1.0 / (12.0 * h * h);
                let mut diag = vec![-30.0 * c; m];
                let zh = cusp_charge * h;
                // ghost U(-h) = -U(h) (1 + 2zh + 2z²h²)
                diag[0] += (1.0 + 2.0 * zh + 2.0 * zh * zh) * c;
                // ghost U(r_max + h) = -U(r_max - h)
                diag[m - 1] += c;
                SymBand::new(diag, vec![vec![16.0 * c; m - 1], vec![-c; m - 2]])
            }
        }
    }

    /// Second derivative of a reduced field. The last node is treated as the
    /// Dirichlet boundary; the returned value there is zero.
    pub fn laplacian(&self, reduced: &[f64], cusp_charge: f64) -> Vec<f64> {
        let n = self.len();
        debug_assert_eq!(reduced.len(), n);
        let band = self.laplacian_band(cusp_charge);
        let mut out = band.mul_vec(&reduced[..n - 1]);
        out.push(0.0);
        out
    }
}

/// A real function sampled on the nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(SolitonError::InvalidField(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SolitonError::InvalidField(format!(
                "non-finite value at node {i}"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    /// Samples `f` at every node. Panics if `f` produces a non-finite value.
    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid, values).expect("sampled function must be finite")
    }

    /// `u = U / r` from a reduced field.
    pub fn from_reduced(grid: Arc<RadialGrid>, reduced: &[f64]) -> Result<Self> {
        let values = reduced
            .iter()
            .zip(grid.nodes())
            .map(|(u, r)| u / r)
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `U = r u`.
    pub fn reduced(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(self.grid.nodes())
            .map(|(u, r)| u * r)
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = self
            .values
            .iter()
            .zip(self.grid.nodes())
            .map(|(&v, &r)| f(r, v))
            .collect();
        Self::new(Arc::clone(&self.grid), values).expect("mapped field must be finite")
    }

    pub fn sub(&self, other: &RadialField) -> Result<Self> {
        self.same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            grid: Arc::clone(&self.grid),
            values,
        })
    }

    pub fn same_grid(&self, other: &RadialField) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid {
            Ok(())
        } else {
            Err(SolitonError::GridMismatch)
        }
    }
}

/// `∑ w_i f(r_i)`.
pub fn integrate(f: &RadialField) -> f64 {
    f.grid().quadrature(f.values())
}

/// `(4π ∫ u² r² dr)^{1/2}`, the L² norm in three dimensions of a radial function.
pub fn l2_norm_3d(u: &RadialField) -> f64 {
    let reduced = u.reduced();
    let sq: Vec<f64> = reduced.iter().map(|x| x * x).collect();
    (4.0 * std::f64::consts::PI * u.grid().reduced_quadrature(&sq)).sqrt()
}

/// 3D L² inner product of two radial fields.
pub fn inner_3d(a: &RadialField, b: &RadialField) -> Result<f64> {
    a.same_grid(b)?;
    let grid = a.grid();
    let prod: Vec<f64> = a
        .values()
        .iter()
        .zip(b.values())
        .zip(grid.nodes())
        .map(|((x, y), r)| x * y * r * r)
        .collect();
    Ok(4.0 * std::f64::consts::PI * grid.reduced_quadrature(&prod))
}

/// Rescales `u` so that `l2_norm_3d(u)² = n_charge`.
pub fn normalize_to(u: &RadialField, n_charge: f64) -> Result<RadialField> {
    if !(n_charge.is_finite() && n_charge > 0.0) {
        return Err(SolitonError::InvalidProblem(format!(
            "normalization target must be positive, got {n_charge}"
        )));
    }
    let norm = l2_norm_3d(u);
    if norm == 0.0 || !norm.is_finite() {
        return Err(SolitonError::ZeroNormalization);
    }
    Ok(u.scaled(n_charge.sqrt() / norm))
}

/// Physical parameters: nuclear charge `z`, total charge `N = ∫u²` and the index
/// `k` of the requested state (`k = 1` is the ground state).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemSpec {
    pub z: f64,
    pub n_charge: f64,
    pub k_index: usize,
}

impl ProblemSpec {
    pub fn new(z: f64, n_charge: f64, k_index: usize) -> Result<Self> {
        if !(z.is_finite() && z >= 0.0) {
            return Err(SolitonError::InvalidProblem(format!(
                "z must be finite and nonnegative, got {z}"
            )));
        }
        if !(n_charge.is_finite() && n_charge > 0.0) {
            return Err(SolitonError::InvalidProblem(format!(
                "N must be finite and positive, got {n_charge}"
            )));
        }
        if k_index == 0 {
            return Err(SolitonError::InvalidProblem("k must be at least 1".into()));
        }
        let spec = Self {
            z,
            n_charge,
            k_index,
        };
        if spec.exceeds_neutrality() {
            log::warn!(
                "N = {n_charge} exceeds z = {z}: outside the N <= z regime, results are exploratory"
            );
        }
        Ok(spec)
    }

    pub fn exceeds_neutrality(&self) -> bool {
        self.n_charge > self.z
    }

    pub fn with_k(&self, k_index: usize) -> Self {
        Self { k_index, ..*self }
    }

    pub fn is_neutral(&self) -> bool {
        (self.n_charge - self.z).abs() <= 1e-12 * self.z.max(1.0)
    }
}
