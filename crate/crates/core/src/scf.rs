//! Self-consistent field iteration for the k-th solitary wave.
//!
//! Each step solves the Poisson equation for the current density, mixes the new
//! potential linearly into the previous one, and takes the k-th eigenpair of the
//! resulting linear radial operator. A projected gradient flow on the constraint
//! sphere gives an independent route to the ground state.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::eigen::{
    build_effective_potential, solve_kth_matrix, solve_kth_shooting, EigenPair,
};
use crate::energy::{evaluate, reduced_gradient, EnergyBreakdown};
use crate::error::{Result, SolitonError};
use crate::grid::{l2_norm_3d, normalize_to, ProblemSpec, RadialField, RadialGrid};
use crate::poisson::electric_potential;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    #[default]
    Matrix,
    Shooting,
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "matrix" => Ok(Backend::Matrix),
            "shooting" => Ok(Backend::Shooting),
            other => Err(format!("unknown backend '{other}' (expected matrix|shooting)")),
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::Matrix => "matrix",
            Backend::Shooting => "shooting",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScfConfig {
    pub mixing_alpha: f64,
    pub tol_omega: f64,
    pub tol_u: f64,
    pub max_iter: usize,
    pub backend: Backend,
}

impl Default for ScfConfig {
    fn default() -> Self {
        Self {
            mixing_alpha: 0.5,
            tol_omega: 1e-9,
            tol_u: 1e-7,
            max_iter: 200,
            backend: Backend::Matrix,
        }
    }
}

impl ScfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mixing_alpha > 0.0 && self.mixing_alpha <= 1.0) {
            return Err(SolitonError::InvalidProblem(format!(
                "mixing must lie in (0, 1], got {}",
                self.mixing_alpha
            )));
        }
        if !(self.tol_omega > 0.0 && self.tol_u > 0.0) {
            return Err(SolitonError::InvalidProblem(
                "tolerances must be positive".into(),
            ));
        }
        if self.max_iter == 0 {
            return Err(SolitonError::InvalidProblem(
                "max_iter must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A solution `(u, φ, ω)` with its reduced fields `U = r u`, `V = -r φ` and energy.
#[derive(Debug, Clone, PartialEq)]
pub struct SolitonState {
    pub spec: ProblemSpec,
    pub u: RadialField,
    pub phi: RadialField,
    pub omega: f64,
    pub reduced: RadialField,
    pub vred: RadialField,
    pub energy: EnergyBreakdown,
    pub k_index: usize,
    pub iterations: usize,
    pub converged: bool,
}

impl SolitonState {
    /// Assembles a state from `u`, recomputing `φ`, the reduced fields and the
    /// energy.
    pub fn from_field(
        spec: ProblemSpec,
        u: RadialField,
        omega: f64,
        iterations: usize,
        converged: bool,
    ) -> Self {
        let phi = electric_potential(&u);
        let grid = Arc::clone(u.grid());
        let reduced = RadialField::new(Arc::clone(&grid), u.reduced()).expect("finite");
        let vred = RadialField::new(grid, phi.reduced().iter().map(|v| -v).collect())
            .expect("finite");
        let energy = evaluate(&u, &spec);
        Self {
            spec,
            u,
            phi,
            omega,
            reduced,
            vred,
            energy,
            k_index: spec.k_index,
            iterations,
            converged,
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.u.grid()
    }

    /// `‖J'(u) - ωu‖ / √N`.
    pub fn gradient_residual(&self) -> f64 {
        let g = reduced_gradient(&self.u, &self.spec);
        let res: Vec<f64> = g
            .iter()
            .zip(self.reduced.values())
            .map(|(gi, ui)| gi - self.omega * ui)
            .collect();
        let sq: Vec<f64> = res.iter().map(|x| x * x).collect();
        (4.0 * PI * self.grid().reduced_quadrature(&sq) / self.spec.n_charge).sqrt()
    }
}

fn generalized_laguerre(n: usize, alpha: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - x;
    for j in 1..n {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + alpha - x) * cur - (jf + alpha) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// k-th hydrogenic s-state of `-½Δ - z_eff/r`, `z_eff = max(z - N/2, z/2)`,
/// normalized to `N`. A unit charge stands in when `z = 0`.
pub fn initial_guess(spec: &ProblemSpec, grid: &Arc<RadialGrid>) -> Result<RadialField> {
    let mut z_eff = (spec.z - 0.5 * spec.n_charge).max(0.5 * spec.z);
    if z_eff <= 0.0 {
        z_eff = 1.0;
    }
    let k = spec.k_index as f64;
    let u = RadialField::from_fn(Arc::clone(grid), |r| {
        let x = 2.0 * z_eff * r / k;
        (-z_eff * r / k).exp() * generalized_laguerre(spec.k_index - 1, 1.0, x)
    });
    normalize_to(&u, spec.n_charge)
}

fn no_solitary_wave(spec: &ProblemSpec, detail: &str) -> SolitonError {
    let reason = if spec.z == 0.0 {
        format!("z = 0: the effective potential -φ is nonnegative, so the radial operator has no negative spectrum ({detail})")
    } else {
        format!(
            "z = {}: no bound state with index {} below the continuum, r_max may be too small ({detail})",
            spec.z, spec.k_index
        )
    };
    SolitonError::NoSolitaryWave { z: spec.z, reason }
}

/// k-th eigenpair of `-½U'' + qU` with the chosen backend.
fn eigenpair(
    phi: &RadialField,
    spec: &ProblemSpec,
    backend: Backend,
) -> Result<EigenPair> {
    let q = build_effective_potential(phi, spec);
    let k = spec.k_index;
    match backend {
        Backend::Matrix => solve_kth_matrix(&q, k, spec.n_charge).map_err(|e| match e {
            SolitonError::NotBelowContinuum { .. } => no_solitary_wave(spec, &e.to_string()),
            other => other,
        }),
        Backend::Shooting => {
            let q_min = q.q.values().iter().copied().fold(f64::INFINITY, f64::min);
            let lo = q_min.min(0.0) - 1.0;
            let hi = -1e-12 * q.max_abs().max(1.0);
            solve_kth_shooting(&q, k, spec.n_charge, (lo, hi)).map_err(|e| match e {
                SolitonError::EmptyBracket { .. } => no_solitary_wave(spec, &e.to_string()),
                other => other,
            })
        }
    }
}

/// Runs the SCF loop on `grid`. `initial` defaults to [`initial_guess`].
pub fn solve(
    spec: &ProblemSpec,
    grid: &Arc<RadialGrid>,
    cfg: &ScfConfig,
    initial: Option<&RadialField>,
) -> Result<SolitonState> {
    cfg.validate()?;
    let mut u = match initial {
        Some(u0) => {
            if **u0.grid() != **grid {
                return Err(SolitonError::GridMismatch);
            }
            normalize_to(u0, spec.n_charge)?
        }
        None => initial_guess(spec, grid)?,
    };
    let alpha = cfg.mixing_alpha;
    let mut mixed: Option<RadialField> = None;
    let mut prev_omega: Option<f64> = None;
    let mut last_domega = f64::INFINITY;
    let mut omega = 0.0;

    for iteration in 1..=cfg.max_iter {
        let phi = electric_potential(&u);
        let phi_mix = match mixed {
            None => phi,
            Some(old) => {
                let values = old
                    .values()
                    .iter()
                    .zip(phi.values())
                    .map(|(a, b)| (1.0 - alpha) * a + alpha * b)
                    .collect();
                RadialField::new(Arc::clone(grid), values)?
            }
        };
        let pair = eigenpair(&phi_mix, spec, cfg.backend)?;
        mixed = Some(phi_mix);
        let u_new = pair.field();
        let du = l2_norm_3d(&u_new.sub(&u)?);
        omega = pair.omega;
        let converged = match prev_omega {
            Some(p) => {
                last_domega = (omega - p).abs();
                last_domega <= cfg.tol_omega && du <= cfg.tol_u
            }
            None => false,
        };
        log::debug!("scf iteration {iteration}: ω = {omega:.15}, |Δu| = {du:e}");
        u = u_new;
        prev_omega = Some(omega);
        if converged {
            log::info!("scf converged in {iteration} iterations, ω = {omega}");
            if let Some(depth) = crate::eigen::truncation_depth(omega, grid.r_max()) {
                log::warn!(
                    "r_max·√(-2ω) = {depth:.2} < 25: truncation error of the bound state may not be negligible"
                );
            }
            return Ok(SolitonState::from_field(*spec, u, omega, iteration, true));
        }
    }
    Err(SolitonError::MaxIterations {
        iterations: cfg.max_iter,
        last_domega,
        state: Box::new(SolitonState::from_field(
            *spec,
            u,
            omega,
            cfg.max_iter,
            false,
        )),
    })
}

/// Grid used for state `k` of a sweep: extent and node count both scale with
/// `k²`, keeping the spacing fixed.
pub fn grid_for_state(base: &RadialGrid, k: usize) -> Result<Arc<RadialGrid>> {
    let s = k * k;
    RadialGrid::new(base.len() * s, base.r_max() * s as f64, base.stencil())
}

/// States `k = 1..=k_max`, each on its own scaled grid. Solves run on the current
/// rayon pool; results are ordered by `k`.
pub fn spectrum_sweep(
    spec_base: &ProblemSpec,
    base_grid: &RadialGrid,
    cfg: &ScfConfig,
    k_max: usize,
) -> Result<Vec<SolitonState>> {
    if k_max == 0 {
        return Err(SolitonError::InvalidProblem("k_max must be at least 1".into()));
    }
    (1..=k_max)
        .into_par_iter()
        .map(|k| {
            let tag = |e: SolitonError| SolitonError::AtIndex {
                k,
                source: Box::new(e),
            };
            let grid = grid_for_state(base_grid, k).map_err(tag)?;
            solve(&spec_base.with_k(k), &grid, cfg, None).map_err(tag)
        })
        .collect()
}

/// Options for [`ground_state_gradient_flow`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    /// stop when `‖J'(u) - ωu‖ / √N` drops below this
    pub tol_residual: f64,
    pub max_iter: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            tol_residual: 1e-9,
            max_iter: 5000,
        }
    }
}

/// Minimizes `J` on the sphere `∫u² = N` by preconditioned steepest descent.
///
/// The search direction is the projected residual `J'(u) - ωu` smoothed by
/// `(-½ d²/dr² + σ)⁻¹`, and each step is renormalized onto the sphere with a
/// backtracking (Armijo) line search on `J`.
pub fn ground_state_gradient_flow(
    spec: &ProblemSpec,
    grid: &Arc<RadialGrid>,
    flow: &FlowConfig,
    initial: Option<&RadialField>,
) -> Result<SolitonState> {
    if spec.k_index != 1 {
        return Err(SolitonError::InvalidProblem(
            "gradient flow reaches the ground state only (k = 1)".into(),
        ));
    }
    let n_charge = spec.n_charge;
    let mut u = match initial {
        Some(u0) => normalize_to(u0, n_charge)?,
        None => initial_guess(spec, grid)?,
    };
    let m = grid.len() - 1;
    let h = grid.spacing();
    let dot = |a: &[f64], b: &[f64]| 4.0 * PI * h * a[..m].iter().zip(&b[..m]).map(|(x, y)| x * y).sum::<f64>();
    let kinetic_band = grid.laplacian_band(spec.z).scaled_plus_diag(-0.5, &vec![0.0; m]);

    // Rayleigh multiplier, residual `J'(u) - ωu` and its norm
    let residual = |u: &RadialField| {
        let reduced = u.reduced();
        let g = reduced_gradient(u, spec);
        let omega = dot(&g, &reduced) / dot(&reduced, &reduced);
        let res: Vec<f64> = g.iter().zip(&reduced).map(|(gi, ui)| gi - omega * ui).collect();
        let norm = (dot(&res, &res) / n_charge).sqrt();
        (omega, res, norm)
    };

    let mut j = evaluate(&u, spec).total_j;
    let (mut omega, mut res, mut res_norm) = residual(&u);
    let mut tau = 1.0;
    for iteration in 1..=flow.max_iter {
        if omega >= 0.0 && iteration > 50 {
            return Err(no_solitary_wave(spec, "gradient flow found no negative multiplier"));
        }
        if res_norm <= flow.tol_residual {
            log::info!("gradient flow converged in {iteration} iterations, ω = {omega}");
            return Ok(SolitonState::from_field(*spec, u, omega, iteration, true));
        }
        let reduced = u.reduced();
        let sigma = omega.abs().max(0.1);
        let mut dir = kinetic_band.solve_shifted(-sigma, &res[..m]);
        dir.push(0.0);
        let c = dot(&dir, &reduced) / dot(&reduced, &reduced);
        for (d, ui) in dir.iter_mut().zip(&reduced) {
            *d -= c * ui;
        }
        let slope = dot(&res, &dir);

        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = reduced.iter().zip(&dir).map(|(x, d)| x - tau * d).collect();
            let candidate =
                normalize_to(&RadialField::from_reduced(Arc::clone(grid), &trial)?, n_charge)?;
            let j_new = evaluate(&candidate, spec).total_j;
            // Close to the minimum the decrease of J drowns in rounding; the
            // residual norm takes over as the merit function there.
            let ok = if tau * slope > 1e-11 * j.abs() {
                j_new <= j - 1e-4 * tau * slope
            } else {
                let next = residual(&candidate);
                let better = next.2 < res_norm;
                if better {
                    (omega, res, res_norm) = next;
                }
                better
            };
            if ok {
                if tau * slope > 1e-11 * j.abs() {
                    (omega, res, res_norm) = residual(&candidate);
                }
                u = candidate;
                j = j_new;
                accepted = true;
                break;
            }
            tau *= 0.5;
        }
        if !accepted {
            log::warn!("gradient flow line search stalled at residual {res_norm:e}");
            return Ok(SolitonState::from_field(*spec, u, omega, iteration, false));
        }
        tau = (tau * 2.0).min(4.0);
    }
    Err(SolitonError::MaxIterations {
        iterations: flow.max_iter,
        last_domega: f64::NAN,
        state: Box::new(SolitonState::from_field(*spec, u, omega, flow.max_iter, false)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn laguerre_values() {
        // L_2^{(1)}(x) = (x² - 6x + 6) / 2
        for x in [0.0, 0.5, 3.0] {
            assert!((generalized_laguerre(2, 1.0, x) - (x * x - 6.0 * x + 6.0) / 2.0).abs() < 1e-14);
        }
        assert_eq!(generalized_laguerre(0, 1.0, 2.0), 1.0);
    }

    #[test]
    fn initial_guess_has_k_minus_one_nodes() {
        let g = build_grid(9000, 90.0).unwrap();
        for k in 1..=3 {
            let spec = ProblemSpec::new(1.0, 1.0, k).unwrap();
            let u = initial_guess(&spec, &g).unwrap();
            assert!((l2_norm_3d(&u).powi(2) - 1.0).abs() < 1e-12);
            assert_eq!(crate::eigen::count_sign_changes(&u.reduced()), k - 1);
        }
    }

    #[test]
    fn hydrogen_limit() {
        let g = build_grid(4000, 40.0).unwrap();
        let spec = ProblemSpec::new(1.0, 1e-8, 1).unwrap();
        let s = solve(&spec, &g, &ScfConfig::default(), None).unwrap();
        assert!(s.converged);
        assert!((s.omega + 0.5).abs() < 1e-5);
    }

    #[test]
    fn zero_charge_has_no_solution() {
        let g = build_grid(1000, 20.0).unwrap();
        let spec = ProblemSpec::new(0.0, 1.0, 1).unwrap();
        for backend in [Backend::Matrix, Backend::Shooting] {
            let cfg = ScfConfig {
                backend,
                ..ScfConfig::default()
            };
            let err = solve(&spec, &g, &cfg, None).unwrap_err();
            assert!(err.is_no_solitary_wave(), "{err}");
            assert!(err.to_string().contains("no negative eigenvalue"));
        }
    }

    #[test]
    fn max_iterations_carries_state() {
        let g = build_grid(1000, 30.0).unwrap();
        let spec = ProblemSpec::new(1.0, 1.0, 1).unwrap();
        let cfg = ScfConfig {
            max_iter: 2,
            ..ScfConfig::default()
        };
        match solve(&spec, &g, &cfg, None) {
            Err(SolitonError::MaxIterations { state, iterations, .. }) => {
                assert_eq!(iterations, 2);
                assert!(!state.converged);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let bad = ScfConfig {
            mixing_alpha: 0.0,
            ..ScfConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!("Shooting".parse::<Backend>().unwrap() == Backend::Shooting);
        assert!("qr".parse::<Backend>().is_err());
    }
}
