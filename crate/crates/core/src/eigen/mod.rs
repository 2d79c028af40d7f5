//! Linear radial eigenproblem `-½U'' + q(r) U = ωU` with `U(0) = 0`, solved for
//! the k-th eigenpair by two independent backends.
//!
//! [`solve_kth_matrix`] discretizes the operator with the grid's stencil and finds
//! eigenvalues by inertia bisection. [`solve_kth_shooting`] integrates outward with
//! RK4 and bisects first on the node count, then on the logarithmic-derivative
//! mismatch against the decaying exponential. The two agree to discretization
//! accuracy, which makes them useful for cross-validation.

pub mod banded;
mod matrix;
mod shooting;

use std::sync::Arc;

use crate::error::{Result, SolitonError};
use crate::grid::{ProblemSpec, RadialField};

pub use matrix::solve_kth_matrix;
pub use shooting::solve_kth_shooting;

/// `q(r) = -φ(r) - z/r`. `cusp_charge` is the strength of the `-1/r` singularity
/// and fixes the boundary behaviour `U''(0) = -2 cusp_charge U'(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectivePotential {
    pub q: RadialField,
    pub cusp_charge: f64,
}

impl EffectivePotential {
    /// A bare potential with a given Coulomb cusp, used directly by tests and
    /// by callers that build `q` themselves.
    pub fn new(q: RadialField, cusp_charge: f64) -> Self {
        Self { q, cusp_charge }
    }

    pub fn max_abs(&self) -> f64 {
        self.q.max_abs()
    }
}

pub fn build_effective_potential(phi: &RadialField, spec: &ProblemSpec) -> EffectivePotential {
    let z = spec.z;
    EffectivePotential {
        q: phi.map(|r, p| -p - z / r),
        cusp_charge: z,
    }
}

/// The k-th eigenpair. `reduced` holds `U`, normalized to `4π∫U² dr = N` with
/// `U(r_1) > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub omega: f64,
    pub reduced: RadialField,
    pub node_count: usize,
}

impl EigenPair {
    /// `u = U / r`.
    pub fn field(&self) -> RadialField {
        RadialField::from_reduced(Arc::clone(self.reduced.grid()), self.reduced.values())
            .expect("eigenvector is finite")
    }
}

/// Strict sign changes of `U` over the nodes, ignoring entries below
/// `1e-12 max|U|`.
pub fn count_nodes(reduced: &RadialField) -> usize {
    count_sign_changes(reduced.values())
}

pub(crate) fn count_sign_changes(values: &[f64]) -> usize {
    let max = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return 0;
    }
    let floor = 1e-12 * max;
    let mut last_sign = 0.0;
    let mut count = 0;
    for &v in values {
        if v.abs() < floor {
            continue;
        }
        let s = v.signum();
        if last_sign != 0.0 && s != last_sign {
            count += 1;
        }
        last_sign = s;
    }
    count
}

/// Scales `values` to `4π ∑ ŵ U² = N` with a positive first entry.
pub(crate) fn normalize_reduced(
    grid: &Arc<crate::grid::RadialGrid>,
    mut values: Vec<f64>,
    n_charge: f64,
) -> Result<RadialField> {
    let sq: Vec<f64> = values.iter().map(|x| x * x).collect();
    let norm2 = 4.0 * std::f64::consts::PI * grid.reduced_quadrature(&sq);
    if !(norm2 > 0.0 && norm2.is_finite()) {
        return Err(SolitonError::ZeroNormalization);
    }
    let first = values.iter().copied().find(|v| *v != 0.0).unwrap_or(1.0);
    let c = (n_charge / norm2).sqrt() * first.signum();
    for v in &mut values {
        *v *= c;
    }
    RadialField::new(Arc::clone(grid), values)
}

/// `r_max κ` with `κ = √(-2ω)` when it falls short of 25, where the bound state
/// still feels the outer wall.
pub(crate) fn truncation_depth(omega: f64, r_max: f64) -> Option<f64> {
    let depth = r_max * (-2.0 * omega).sqrt();
    (omega < 0.0 && depth < 25.0).then_some(depth)
}

fn warn_if_truncated(omega: f64, r_max: f64) {
    if let Some(depth) = truncation_depth(omega, r_max) {
        log::debug!("r_max·√(-2ω) = {depth:.2} < 25: the bound state is truncated");
    }
}

fn check_inputs(q: &EffectivePotential, k: usize, n_charge: f64) -> Result<()> {
    if k == 0 {
        return Err(SolitonError::InvalidProblem("k must be at least 1".into()));
    }
    if !(n_charge.is_finite() && n_charge > 0.0) {
        return Err(SolitonError::InvalidProblem(format!(
            "normalization must be positive, got {n_charge}"
        )));
    }
    let n = q.q.len();
    if 4 * k >= n {
        return Err(SolitonError::KExceedsResolution { k, n });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn effective_potential_forms() {
        let g = build_grid(400, 20.0).unwrap();
        let zero = RadialField::zeros(g.clone());
        let q = build_effective_potential(&zero, &ProblemSpec::new(1.0, 1.0, 1).unwrap());
        for (&r, &v) in g.nodes().iter().zip(q.q.values()) {
            assert_eq!(v, -1.0 / r);
        }
        let q0 = build_effective_potential(&zero, &ProblemSpec::new(0.0, 1.0, 1).unwrap());
        assert!(q0.q.values().iter().all(|&v| v == 0.0));

        let phi = RadialField::from_fn(g.clone(), |r| -(1.0 - (-2.0 * r).exp() * (1.0 + r)) / r);
        let q = build_effective_potential(&phi, &ProblemSpec::new(1.0, 1.0, 1).unwrap());
        for (&r, &v) in g.nodes().iter().zip(q.q.values()) {
            let expected = -(-2.0 * r).exp() * (1.0 + r) / r;
            assert!((v - expected).abs() < 1e-12 * (1.0 + expected.abs()));
        }
    }

    #[test]
    fn node_counts() {
        let g = build_grid(1000, 40.0).unwrap();
        let f = |h: fn(f64) -> f64| RadialField::from_fn(g.clone(), h);
        assert_eq!(count_nodes(&f(|r| r * (-r).exp())), 0);
        assert_eq!(count_nodes(&f(|r| r * (1.0 - r / 2.0) * (-r / 2.0).exp())), 1);
        assert_eq!(count_nodes(&RadialField::zeros(g.clone())), 0);
        // tiny noise below the floor is ignored
        let noisy = f(|r| r * (-r).exp() + if r > 30.0 { -1e-14 } else { 0.0 });
        assert_eq!(count_nodes(&noisy), 0);
    }
}
