//! The constrained functional
//!
//! ```text
//! J(u) = T + E_H - C_V,   T = ¼∫|∇u|²,   E_H = π∫|∇Δ⁻¹u²|²,   C_V = ½∫(z/|x|) u²,
//! ```
//!
//! its L² gradient, and the two identities that certify a critical point.
//!
//! Everything is evaluated on `U = r u` with the same stencil and inner product as
//! the eigensolver, so the gradient is the exact derivative of the discrete `J`
//! and the discrete Lagrange multiplier is the eigenvalue. The last node is the
//! Dirichlet boundary and is ignored.
//!
//! The kinetic and Coulomb sums carry a matching end correction
//! `(h²/12)·2πz·U'(0)²`. It cancels in `J` (so the gradient is unchanged) but
//! restores fourth-order accuracy of each term separately, which the virial
//! identity needs.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::grid::{ProblemSpec, RadialField, RadialGrid};
use crate::poisson::kernel_reduced;

/// The three terms of `J`, `J` itself, and the Rayleigh multiplier `⟨J'(u), u⟩ / N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub hartree: f64,
    pub coulomb: f64,
    pub total_j: f64,
    pub rayleigh_omega: f64,
}

impl EnergyBreakdown {
    pub fn zero() -> Self {
        Self {
            kinetic: 0.0,
            hartree: 0.0,
            coulomb: 0.0,
            total_j: 0.0,
            rayleigh_omega: 0.0,
        }
    }
}

/// Relative residual of an identity. `degenerate` marks the `0/0` case, where the
/// value is reported as zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub value: f64,
    pub degenerate: bool,
}

impl Residual {
    fn ratio(num: f64, den: f64) -> Self {
        if den == 0.0 || !den.is_finite() {
            Self {
                value: 0.0,
                degenerate: true,
            }
        } else {
            Self {
                value: num.abs() / den,
                degenerate: false,
            }
        }
    }
}

/// Reduced field with the boundary node cleared.
fn interior_reduced(u: &RadialField) -> Vec<f64> {
    let mut reduced = u.reduced();
    if let Some(last) = reduced.last_mut() {
        *last = 0.0;
    }
    reduced
}

/// One-sided estimate of `U'(0)` from `U(0) = 0`, `U(h)`, `U(2h)`.
fn slope_at_origin(grid: &RadialGrid, reduced: &[f64]) -> f64 {
    (4.0 * reduced[0] - reduced[1]) / (2.0 * grid.spacing())
}

struct Terms {
    kinetic: f64,
    hartree: f64,
    coulomb: f64,
    /// `4π ∑ h g̃ U` with the uncorrected kinetic and Coulomb sums
    pairing: f64,
}

fn terms(grid: &RadialGrid, reduced: &[f64], z: f64) -> Terms {
    let n = grid.len();
    let h = grid.spacing();
    let r = grid.nodes();
    let lap = grid.laplacian(reduced, z);
    let wts = grid.reduced_weights();

    let mut kin = 0.0;
    let mut cou = 0.0;
    for i in 0..n - 1 {
        kin -= wts[i] * reduced[i] * lap[i];
        cou += wts[i] * reduced[i] * reduced[i] / r[i];
    }
    let rho: Vec<f64> = reduced.iter().map(|x| x * x).collect();
    let w = kernel_reduced(grid, &rho);
    let mut self_int = 0.0;
    for i in 0..n {
        self_int += wts[i] * rho[i] * w[i];
    }
    let hartree = -4.0 * PI * PI * self_int;

    let a1 = slope_at_origin(grid, reduced);
    let end = h * h / 12.0 * a1 * a1;
    let kinetic = PI * kin + PI * 2.0 * z * end;
    let coulomb = 2.0 * PI * z * (cou + end);
    let pairing = 2.0 * PI * kin + 4.0 * hartree - 4.0 * PI * z * cou;
    Terms {
        kinetic,
        hartree,
        coulomb,
        pairing,
    }
}

pub fn evaluate(u: &RadialField, spec: &ProblemSpec) -> EnergyBreakdown {
    let reduced = interior_reduced(u);
    if reduced.iter().all(|&x| x == 0.0) {
        return EnergyBreakdown::zero();
    }
    let t = terms(u.grid(), &reduced, spec.z);
    let norm2 = {
        let sq: Vec<f64> = reduced.iter().map(|x| x * x).collect();
        4.0 * PI * u.grid().reduced_quadrature(&sq)
    };
    EnergyBreakdown {
        kinetic: t.kinetic,
        hartree: t.hartree,
        coulomb: t.coulomb,
        total_j: t.kinetic + t.hartree - t.coulomb,
        rayleigh_omega: t.pairing / norm2,
    }
}

/// Reduced gradient `g̃ = -½U'' - φU - (z/r)U` on the interior nodes, zero at the
/// boundary node. For radial `h`, `dJ(u + εh)/dε = 4π ∑ ŵ g̃ (r h)`.
pub fn reduced_gradient(u: &RadialField, spec: &ProblemSpec) -> Vec<f64> {
    let grid = u.grid();
    let reduced = interior_reduced(u);
    let n = grid.len();
    let r = grid.nodes();
    let lap = grid.laplacian(&reduced, spec.z);
    let rho: Vec<f64> = reduced.iter().map(|x| x * x).collect();
    let w = kernel_reduced(grid, &rho);
    let mut g = vec![0.0; n];
    for i in 0..n - 1 {
        let phi = 4.0 * PI * w[i];
        g[i] = -0.5 * lap[i] - phi * reduced[i] - spec.z / r[i] * reduced[i];
    }
    g
}

/// L² representative `g = g̃ / r` of `J'(u)`, so that `⟨g, h⟩_{L²}` is the
/// directional derivative.
pub fn gradient(u: &RadialField, spec: &ProblemSpec) -> RadialField {
    let g = reduced_gradient(u, spec);
    RadialField::from_reduced(Arc::clone(u.grid()), &g).expect("gradient of a finite field")
}

/// `|Nω - (2J + 2E_H)| / (|Nω| + |J| + E_H)`.
pub fn multiplier_residual(omega: f64, n_charge: f64, e: &EnergyBreakdown) -> Residual {
    let lhs = n_charge * omega;
    let rhs = 2.0 * e.total_j + 2.0 * e.hartree;
    Residual::ratio(lhs - rhs, lhs.abs() + e.total_j.abs() + e.hartree)
}

/// `|2T + E_H - C_V| / (2T + E_H + C_V)`: the derivative of `J` along
/// mass-preserving dilations.
pub fn virial_residual(e: &EnergyBreakdown) -> Residual {
    Residual::ratio(
        2.0 * e.kinetic + e.hartree - e.coulomb,
        2.0 * e.kinetic + e.hartree + e.coulomb,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, inner_3d};

    fn spec(z: f64) -> ProblemSpec {
        ProblemSpec::new(z, 1.0, 1).unwrap()
    }

    #[test]
    fn zero_field() {
        let g = build_grid(200, 20.0).unwrap();
        let u = RadialField::zeros(g);
        assert_eq!(evaluate(&u, &spec(1.0)), EnergyBreakdown::zero());
        assert!(gradient(&u, &spec(1.0)).values().iter().all(|&v| v == 0.0));
        let r = multiplier_residual(0.0, 1.0, &EnergyBreakdown::zero());
        assert!(r.degenerate && r.value == 0.0);
    }

    #[test]
    fn hydrogen_1s_terms() {
        let g = build_grid(4000, 40.0).unwrap();
        let u = RadialField::from_fn(g, |r| (-r).exp() / PI.sqrt());
        let e = evaluate(&u, &spec(1.0));
        assert!((e.kinetic - 0.25).abs() < 1e-4);
        assert!((e.hartree - 5.0 / 32.0).abs() < 1e-4);
        assert!((e.coulomb - 0.5).abs() < 1e-4);
        assert!((e.total_j + 3.0 / 32.0).abs() < 1e-4);
        assert!((e.total_j - (e.kinetic + e.hartree - e.coulomb)).abs() < 1e-15);

        let e0 = evaluate(&u, &spec(0.0));
        assert!((e0.total_j - 13.0 / 32.0).abs() < 1e-4);
        assert_eq!(e0.coulomb, 0.0);

        // the multiplier identity is algebraic in the three terms
        let omega = (2.0 * e.kinetic + 4.0 * e.hartree - 2.0 * e.coulomb) / 1.0;
        assert!(multiplier_residual(omega, 1.0, &e).value < 1e-14);
        assert!((omega - 0.125).abs() < 1e-4);
        assert!((e.rayleigh_omega - omega).abs() < 1e-10);

        let v = virial_residual(&e);
        let expected = (5.0 / 32.0) / (0.5 + 5.0 / 32.0 + 0.5);
        assert!((v.value - expected).abs() < 1e-4);
    }

    fn trial(g: &Arc<RadialGrid>, a: f64, b: f64, c: f64) -> RadialField {
        RadialField::from_fn(g.clone(), move |r| (1.0 + a * r + b * r * r) * (-c * r).exp())
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = build_grid(800, 30.0).unwrap();
        let s = ProblemSpec::new(1.3, 0.7, 1).unwrap();
        let u = trial(&g, 0.3, -0.1, 0.9);
        let grad = gradient(&u, &s);
        for (a, b, c) in [(0.0, 0.2, 1.1), (-0.5, 0.0, 0.8), (0.4, 0.1, 1.5)] {
            let dir = trial(&g, a, b, c);
            let eps = 1e-5;
            let plus = RadialField::new(
                g.clone(),
                u.values().iter().zip(dir.values()).map(|(x, d)| x + eps * d).collect(),
            )
            .unwrap();
            let minus = RadialField::new(
                g.clone(),
                u.values().iter().zip(dir.values()).map(|(x, d)| x - eps * d).collect(),
            )
            .unwrap();
            let fd = (evaluate(&plus, &s).total_j - evaluate(&minus, &s).total_j) / (2.0 * eps);
            let an = inner_3d(&grad, &dir).unwrap();
            assert!((an - fd).abs() / (1.0 + fd.abs()) < 1e-8, "{an} {fd}");
        }
    }

    #[test]
    fn hartree_is_quartic() {
        let g = build_grid(500, 25.0).unwrap();
        let u = trial(&g, 0.2, 0.05, 1.0);
        let e1 = evaluate(&u, &spec(1.0)).hartree;
        let e2 = evaluate(&u.scaled(0.37), &spec(1.0)).hartree;
        assert!((e2 / e1 - 0.37_f64.powi(4)).abs() < 1e-12);
    }

    #[test]
    fn dilation_derivative_is_virial_combination() {
        // J(u_λ) with u_λ(x) = λ^{3/2} u(λx), differentiated numerically at λ = 1
        let g = build_grid(6000, 40.0).unwrap();
        let s = spec(1.0);
        let base = |r: f64| (1.0 + 0.3 * r) * (-1.2 * r).exp();
        let j = |lam: f64| {
            let u = RadialField::from_fn(g.clone(), move |r| lam.powf(1.5) * base(lam * r));
            evaluate(&u, &s).total_j
        };
        let d = 1e-4;
        let dj = (j(1.0 + d) - j(1.0 - d)) / (2.0 * d);
        let e = evaluate(&RadialField::from_fn(g.clone(), base), &s);
        let combo = 2.0 * e.kinetic + e.hartree - e.coulomb;
        assert!((dj - combo).abs() < 1e-6 * (1.0 + combo.abs()), "{dj} {combo}");
    }
}
