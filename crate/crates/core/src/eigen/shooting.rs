use super::{check_inputs, count_sign_changes, normalize_reduced, warn_if_truncated};
use super::{EffectivePotential, EigenPair};
use crate::error::{Result, SolitonError};

const TOL: f64 = 1e-12;
const RESCALE: f64 = 1e100;
/// e-folds of the decaying branch before the matching radius.
const MATCH_EFOLDS: f64 = 25.0;

struct Shooter<'a> {
    q: &'a [f64],
    r: &'a [f64],
    h: f64,
    a: f64,
    c0: f64,
}

impl<'a> Shooter<'a> {
    fn new(pot: &'a EffectivePotential) -> Self {
        let grid = pot.q.grid();
        let q = pot.q.values();
        let r = grid.nodes();
        let a = pot.cusp_charge;
        // regular part of q near the origin, q + a/r ≈ c0
        let c0 = 2.0 * (q[0] + a / r[0]) - (q[1] + a / r[1]);
        Self {
            q,
            r,
            h: grid.spacing(),
            a,
            c0,
        }
    }

    /// Series start at `r = h`: `U = r - a r² + c₃ r³`, normalized so `U'(0) = 1`.
    fn initial(&self, omega: f64) -> (f64, f64) {
        let (a, c0) = (self.a, self.c0);
        let h = self.h;
        let c3 = (a * a + c0 - omega) / 3.0;
        (h - a * h * h + c3 * h * h * h, 1.0 - 2.0 * a * h + 3.0 * c3 * h * h)
    }

    /// One RK4 step of length 2h from node `i` to node `i + 2`.
    #[inline]
    fn step(&self, i: usize, omega: f64, u: f64, du: f64) -> (f64, f64) {
        let step = 2.0 * self.h;
        let f = |qq: f64, x: f64| 2.0 * (qq - omega) * x;
        let (q0, q1, q2) = (self.q[i], self.q[i + 1], self.q[i + 2]);
        let k1u = du;
        let k1v = f(q0, u);
        let k2u = du + 0.5 * step * k1v;
        let k2v = f(q1, u + 0.5 * step * k1u);
        let k3u = du + 0.5 * step * k2v;
        let k3v = f(q1, u + 0.5 * step * k2u);
        let k4u = du + step * k3v;
        let k4v = f(q2, u + step * k3u);
        (
            u + step / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u),
            du + step / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
        )
    }

    /// Sign changes of the outward solution over the whole domain.
    fn node_count(&self, omega: f64) -> usize {
        let (mut u, mut du) = self.initial(omega);
        let mut prev = u;
        let mut count = 0;
        let mut i = 0;
        while i + 2 < self.q.len() {
            (u, du) = self.step(i, omega, u, du);
            if u * prev < 0.0 {
                count += 1;
            }
            if u != 0.0 {
                prev = u;
            }
            if u.abs() > RESCALE {
                u /= RESCALE;
                du /= RESCALE;
                prev /= RESCALE;
            }
            i += 2;
        }
        count
    }

    /// `U'(R) + κ U(R)` at the matching radius `R = min(r_max, 25/κ)`.
    fn miss(&self, omega: f64) -> f64 {
        let kappa = (-2.0 * omega).sqrt();
        let r_match = (MATCH_EFOLDS / kappa).min(*self.r.last().unwrap());
        let (mut u, mut du) = self.initial(omega);
        let mut i = 0;
        while i + 2 < self.q.len() && self.r[i + 2] <= r_match {
            (u, du) = self.step(i, omega, u, du);
            if u.abs() > RESCALE {
                u /= RESCALE;
                du /= RESCALE;
            }
            i += 2;
        }
        du + kappa * u
    }

    /// Outward solution on every node: RK4 values on even indices, cubic Hermite
    /// interpolation on odd ones, and the decaying exponential past the point
    /// where the growing branch takes over.
    fn profile(&self, omega: f64, k: usize) -> Vec<f64> {
        let n = self.q.len();
        let mut u_vals = vec![0.0; n];
        let mut du_vals = vec![0.0; n];
        let (mut u, mut du) = self.initial(omega);
        u_vals[0] = u;
        du_vals[0] = du;
        let mut i = 0;
        let mut last = 0;
        while i + 2 < n {
            (u, du) = self.step(i, omega, u, du);
            if !u.is_finite() || u.abs() > RESCALE {
                break;
            }
            u_vals[i + 2] = u;
            du_vals[i + 2] = du;
            i += 2;
            last = i;
        }
        let h = self.h;
        let mut j = 1;
        while j < last {
            let (p0, p1) = (u_vals[j - 1], u_vals[j + 1]);
            let (m0, m1) = (du_vals[j - 1], du_vals[j + 1]);
            // Hermite midpoint over an interval of length 2h
            u_vals[j] = 0.5 * (p0 + p1) + 0.25 * h * (m0 - m1);
            j += 2;
        }

        // splice the decaying tail after the (k-1)-th node; later sign changes
        // belong to the growing branch
        let kappa = (-2.0 * omega).sqrt();
        let mut anchor = 0;
        let mut seen = 0;
        for idx in (2..=last).step_by(2) {
            if seen + 1 < k && u_vals[idx] * u_vals[idx - 2] < 0.0 {
                seen += 1;
                anchor = idx;
            }
        }
        // climb the last lobe, then follow it down to where the growing branch
        // takes over
        let mut splice = anchor;
        while splice + 2 <= last && u_vals[splice + 2].abs() >= u_vals[splice].abs() {
            splice += 2;
        }
        while splice + 2 <= last
            && u_vals[splice + 2].abs() < u_vals[splice].abs()
            && u_vals[splice + 2] * u_vals[splice] > 0.0
        {
            splice += 2;
        }
        let (u_s, r_s) = (u_vals[splice], self.r[splice]);
        for k in splice + 1..n {
            u_vals[k] = u_s * (-kappa * (self.r[k] - r_s)).exp();
        }
        u_vals[n - 1] = 0.0;
        u_vals
    }
}

/// Shooting backend. `bracket = (lo, hi)` with `lo < hi < 0` must contain the
/// k-th eigenvalue: the outward solution has fewer than `k` nodes at `lo` and at
/// least `k` at `hi`.
pub fn solve_kth_shooting(
    pot: &EffectivePotential,
    k: usize,
    n_charge: f64,
    bracket: (f64, f64),
) -> Result<EigenPair> {
    check_inputs(pot, k, n_charge)?;
    let (mut lo, mut hi) = bracket;
    if !(lo < hi && hi < 0.0) {
        return Err(SolitonError::InvalidProblem(format!(
            "bracket must satisfy lo < hi < 0, got ({lo}, {hi})"
        )));
    }
    let shooter = Shooter::new(pot);
    if shooter.node_count(lo) >= k || shooter.node_count(hi) < k {
        return Err(SolitonError::EmptyBracket {
            k,
            lo: bracket.0,
            hi: bracket.1,
        });
    }

    // Phase 1: node count, until the bracket is narrow.
    while hi - lo > 1e-6 * hi.abs() {
        let mid = 0.5 * (lo + hi);
        if shooter.node_count(mid) >= k {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    // Phase 2: logarithmic-derivative mismatch inside the narrowed bracket; if it
    // does not change sign there, keep bisecting on the node count.
    let (mut m_lo, m_hi) = (shooter.miss(lo), shooter.miss(hi));
    let use_miss = m_lo * m_hi < 0.0;
    while hi - lo > TOL {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let go_up = if use_miss {
            let m = shooter.miss(mid);
            let same = m * m_lo > 0.0;
            if same {
                m_lo = m;
            }
            same
        } else {
            shooter.node_count(mid) < k
        };
        if go_up {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let omega = 0.5 * (lo + hi);
    warn_if_truncated(omega, pot.q.grid().r_max());

    let values = shooter.profile(omega, k);
    let reduced = normalize_reduced(pot.q.grid(), values, n_charge)?;
    let node_count = count_sign_changes(reduced.values());
    Ok(EigenPair {
        omega,
        reduced,
        node_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::solve_kth_matrix;
    use crate::grid::{build_grid, RadialField};

    fn hydrogen(n: usize, r_max: f64) -> EffectivePotential {
        let g = build_grid(n, r_max).unwrap();
        EffectivePotential::new(RadialField::from_fn(g, |r| -1.0 / r), 1.0)
    }

    #[test]
    fn ground_state_of_hydrogen() {
        let q = hydrogen(4000, 40.0);
        let p = solve_kth_shooting(&q, 1, 1.0, (-1.0, -0.01)).unwrap();
        assert!((p.omega + 0.5).abs() < 1e-6, "{}", p.omega);
        assert_eq!(p.node_count, 0);
        let c = (1.0 / std::f64::consts::PI).sqrt();
        for (&r, &u) in q.q.grid().nodes().iter().zip(p.reduced.values()) {
            assert!((u - c * r * (-r).exp()).abs() < 1e-5, "r = {r}");
        }
    }

    #[test]
    fn third_state_of_hydrogen() {
        let q = hydrogen(36000, 360.0);
        let p = solve_kth_shooting(&q, 3, 1.0, (-0.1, -0.03)).unwrap();
        assert!((p.omega + 1.0 / 18.0).abs() < 1e-5, "{}", p.omega);
        assert_eq!(p.node_count, 2);
    }

    #[test]
    fn bracket_without_eigenvalue() {
        let q = hydrogen(4000, 40.0);
        let err = solve_kth_shooting(&q, 1, 1.0, (-0.4, -0.3)).unwrap_err();
        assert!(err.to_string().contains("bracket contains no k-th eigenvalue"));
    }

    #[test]
    fn agrees_with_matrix_backend() {
        let g = build_grid(4000, 40.0).unwrap();
        let q = EffectivePotential::new(
            RadialField::from_fn(g, |r| -1.5 / r + 0.8 * (-0.7 * r).exp()),
            1.5,
        );
        let a = solve_kth_matrix(&q, 1, 1.0).unwrap();
        let b = solve_kth_shooting(&q, 1, 1.0, (-5.0, -1e-3)).unwrap();
        assert!((a.omega - b.omega).abs() < 1e-6, "{} {}", a.omega, b.omega);
    }
}
