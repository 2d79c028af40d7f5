//! Inverse Laplacian of radial densities through the kernel
//! `Δ⁻¹v(r) = −∫ v(ρ) ρ² / max(r, ρ) dρ`, evaluated with one forward and one
//! backward cumulative sum.
//!
//! The sums use the reduced (trapezoid) weights of the grid. The kernel has a kink
//! at `ρ = r`; the leading trapezoid error there is `h² v(r) / 12`, which is
//! subtracted so that `w` is fourth-order accurate. The correction is diagonal,
//! so the discrete Hartree energy stays a symmetric quartic form in `U`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::grid::{RadialField, RadialGrid};

/// Solution of `Δw = v` for a radial `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonResult {
    pub w: RadialField,
    pub w_prime: RadialField,
    /// `∫_{ℝ³} v dx`
    pub total_charge: f64,
}

/// Kernel applied to a reduced density `ρ_i = v(r_i) r_i²`. Returns `w` at the nodes.
pub(crate) fn kernel_reduced(grid: &RadialGrid, rho: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let r = grid.nodes();
    let wts = grid.reduced_weights();
    let h = grid.spacing();

    // backward[i] = Σ_{j>i} ŵ_j ρ_j / r_j
    let mut backward = vec![0.0; n];
    let mut acc = 0.0;
    for i in (0..n).rev() {
        backward[i] = acc;
        acc += wts[i] * rho[i] / r[i];
    }

    let mut w = vec![0.0; n];
    let mut forward = 0.0;
    for i in 0..n {
        forward += wts[i] * rho[i];
        let kink = h * h / 12.0 * rho[i] / (r[i] * r[i]);
        w[i] = -(forward / r[i] + backward[i]) + kink;
    }
    w
}

fn warn_if_truncated(v: &RadialField) {
    let max = v.max_abs();
    let r_max = v.grid().r_max();
    let tail = v.values().last().copied().unwrap_or(0.0).abs() * r_max * r_max;
    if max > 0.0 && tail > 1e-10 * max {
        log::warn!(
            "density not negligible at r_max = {r_max}: |v(r_max)| r_max² = {tail:e}, truncation error expected"
        );
    }
}

/// `w = Δ⁻¹v`, its radial derivative, and the total charge `4π∫ v ρ² dρ`.
pub fn inverse_laplacian(v: &RadialField) -> PoissonResult {
    warn_if_truncated(v);
    let grid = v.grid();
    let r = grid.nodes();
    let wts = grid.reduced_weights();
    let rho: Vec<f64> = v
        .values()
        .iter()
        .zip(r)
        .map(|(vi, ri)| vi * ri * ri)
        .collect();
    let w = kernel_reduced(grid, &rho);

    // w'(r) = (1/r²) ∫₀^r v ρ² dρ, trapezoid partial sums (nonnegative for v ≥ 0)
    let mut w_prime = vec![0.0; rho.len()];
    let mut partial = 0.0;
    for i in 0..rho.len() {
        partial += wts[i] * rho[i];
        w_prime[i] = (partial - 0.5 * grid.spacing() * rho[i]) / (r[i] * r[i]);
    }
    let total_charge = 4.0 * PI * grid.reduced_quadrature(&rho);

    PoissonResult {
        w: RadialField::new(Arc::clone(grid), w).expect("kernel of a finite field is finite"),
        w_prime: RadialField::new(Arc::clone(grid), w_prime)
            .expect("kernel of a finite field is finite"),
        total_charge,
    }
}

/// `E_H = π ∫|∇Δ⁻¹u²|² dx = −4π² ∫ w u² r² dr` with `w = Δ⁻¹u²`.
pub fn hartree_energy(u: &RadialField) -> f64 {
    let rho: Vec<f64> = u.reduced().iter().map(|x| x * x).collect();
    hartree_from_reduced_density(u.grid(), &rho)
}

pub(crate) fn hartree_from_reduced_density(grid: &RadialGrid, rho: &[f64]) -> f64 {
    let w = kernel_reduced(grid, rho);
    let integrand: Vec<f64> = rho.iter().zip(&w).map(|(p, wi)| p * wi).collect();
    -4.0 * PI * PI * grid.reduced_quadrature(&integrand)
}

/// `∫|∇Δ⁻¹v|² dx = -∫ v Δ⁻¹v dx` for a radial density `v`.
pub fn dirichlet_energy(v: &RadialField) -> f64 {
    let grid = v.grid();
    let rho: Vec<f64> = v
        .values()
        .iter()
        .zip(grid.nodes())
        .map(|(vi, ri)| vi * ri * ri)
        .collect();
    hartree_from_reduced_density(grid, &rho) / PI
}

/// `φ = 4π Δ⁻¹u²`, the potential generated by the density `u²` (`Δφ = 4πu²`).
pub fn electric_potential(u: &RadialField) -> RadialField {
    let rho: Vec<f64> = u.reduced().iter().map(|x| x * x).collect();
    let w = kernel_reduced(u.grid(), &rho);
    RadialField::new(
        Arc::clone(u.grid()),
        w.into_iter().map(|x| 4.0 * PI * x).collect(),
    )
    .expect("kernel of a finite field is finite")
}
