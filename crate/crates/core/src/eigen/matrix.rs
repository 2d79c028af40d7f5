use super::{check_inputs, count_sign_changes, normalize_reduced, warn_if_truncated};
use super::{EffectivePotential, EigenPair};
use crate::eigen::banded::SymBand;
use crate::error::{Result, SolitonError};

const BISECTION_TOL: f64 = 1e-12;
const INVERSE_SHIFT: f64 = 1e-10;
const INVERSE_ITERATIONS: usize = 5;

/// `H = -½ L + diag(q)` on the interior nodes.
pub(crate) fn hamiltonian(q: &EffectivePotential) -> SymBand {
    let grid = q.q.grid();
    let m = grid.len() - 1;
    grid.laplacian_band(q.cusp_charge)
        .scaled_plus_diag(-0.5, &q.q.values()[..m])
}

/// k-th smallest eigenvalue of `h` by bisection on the inertia count, or the
/// number of eigenvalues found below `ceiling` if there are fewer than `k`.
pub(crate) fn kth_eigenvalue(h: &SymBand, k: usize, ceiling: f64) -> std::result::Result<f64, usize> {
    let below = h.count_below(ceiling);
    if below < k {
        return Err(below);
    }
    let (mut lo, _) = h.gershgorin();
    let mut hi = ceiling;
    lo -= 1.0;
    while hi - lo > BISECTION_TOL * (1.0 + hi.abs().min(lo.abs())) {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if h.count_below(mid) >= k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Matrix backend: inertia bisection for ω, inverse iteration for `U`.
pub fn solve_kth_matrix(q: &EffectivePotential, k: usize, n_charge: f64) -> Result<EigenPair> {
    check_inputs(q, k, n_charge)?;
    let grid = q.q.grid();
    let h = hamiltonian(q);
    let threshold = -10.0 * f64::EPSILON * q.max_abs();
    let omega = kth_eigenvalue(&h, k, threshold).map_err(|found| {
        SolitonError::NotBelowContinuum {
            k,
            found,
            threshold,
        }
    })?;
    warn_if_truncated(omega, grid.r_max());

    let m = h.dim();
    // smooth start vector with a component along every low state
    let mut x: Vec<f64> = grid.nodes()[..m]
        .iter()
        .map(|r| r * (-r / (k as f64 * grid.r_max())).exp() + 1e-3)
        .collect();
    let shift = omega + INVERSE_SHIFT;
    for _ in 0..INVERSE_ITERATIONS {
        let y = h.solve_shifted(shift, &x);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = y.into_iter().map(|v| v / norm).collect();
    }
    x.push(0.0);
    let reduced = normalize_reduced(grid, x, n_charge)?;
    let node_count = count_sign_changes(reduced.values());
    if node_count + 1 != k {
        log::debug!("matrix eigenvector k = {k} has {node_count} nodes");
    }
    Ok(EigenPair {
        omega,
        reduced,
        node_count,
    })
}
