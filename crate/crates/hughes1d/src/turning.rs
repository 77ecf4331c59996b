//! Turning-point computation.
//!
//! The turning point ξ balances the accumulated affine cost to each exit:
//! ∫_{-1}^{ξ} (1 + α ρ) dy = ∫_{ξ}^{1} (1 + α ρ) dy. Since the cumulative
//! cost is piecewise linear and strictly increasing (slope >= 1), ξ is found
//! by an exact linear solve inside the bracketing segment; a bisection
//! fallback is kept as an independent test oracle.

use crate::density::{PiecewiseConstantDensity, CORRIDOR_LEFT, CORRIDOR_RIGHT};
use crate::error::{Error, Result};
use crate::ftl;
use crate::model::ModelParams;

/// A solved turning point: position, the particle index `I0` when the state
/// is discrete (`None` for continuous profiles or when the index formula has
/// an empty satisfying set), and the cost-balance defect at `xi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurningState {
    pub xi: f64,
    pub index: Option<usize>,
    pub residual: f64,
}

/// Solves the cost-balance equation exactly on the piecewise-linear
/// cumulative cost. For α = 0 the cost is constant and ξ = 0 identically.
pub fn turning_point(d: &PiecewiseConstantDensity, alpha: f64) -> TurningState {
    debug_assert!(alpha >= 0.0);
    if alpha == 0.0 {
        return TurningState {
            xi: 0.0,
            index: None,
            residual: 0.0,
        };
    }
    let total = d
        .cumulative_cost(alpha, CORRIDOR_RIGHT)
        .expect("corridor end is in range");
    let target = 0.5 * total;

    let mut acc = 0.0;
    let mut xi = CORRIDOR_RIGHT;
    for (l, r, v) in d.partition_on(CORRIDOR_LEFT, CORRIDOR_RIGHT) {
        let slope = 1.0 + alpha * v;
        let next = acc + slope * (r - l);
        if next >= target {
            xi = (l + (target - acc) / slope).min(r);
            break;
        }
        acc = next;
    }
    let residual = (2.0 * d.cumulative_cost(alpha, xi).expect("xi in corridor") - total).abs();
    TurningState {
        xi,
        index: None,
        residual,
    }
}

/// Bisection solver for the same equation, independent of the linear
/// inversion path; kept as a test oracle.
pub fn turning_point_bisect(d: &PiecewiseConstantDensity, alpha: f64, tol: f64) -> f64 {
    let total = d.cumulative_cost(alpha, CORRIDOR_RIGHT).unwrap();
    let balance = |x: f64| 2.0 * d.cumulative_cost(alpha, x).unwrap() - total;
    let (mut lo, mut hi) = (CORRIDOR_LEFT, CORRIDOR_RIGHT);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if balance(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The discrete turning index:
/// `I0 = max { i : (2/(α m)) x_i < #{j : x_i < x_j < 1} - #{j : -1 < x_j < x_i} }`,
/// with both counting sets ranging over particles strictly inside the
/// corridor. Returns `None` when no index satisfies the inequality.
///
/// For α = 0 the formula degenerates and the convention
/// `I0 = max { i : x_i < 0 }` applies (ξ ≡ 0 for a constant cost).
pub fn turning_index(positions: &[f64], alpha: f64, m: f64) -> Result<Option<usize>> {
    if positions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::State("positions not strictly increasing".into()));
    }
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::State(format!("particle mass {m} must be positive")));
    }
    if alpha == 0.0 {
        let mut best = None;
        for (i, &x) in positions.iter().enumerate() {
            if x < 0.0 {
                best = Some(i);
            }
        }
        return Ok(best);
    }
    // Counting with strict inequalities; positions are sorted, so the counts
    // reduce to index arithmetic around the corridor bounds.
    let n_le_left = positions.partition_point(|&x| x <= CORRIDOR_LEFT);
    let n_lt_right = positions.partition_point(|&x| x < CORRIDOR_RIGHT);
    let scale = 2.0 / (alpha * m);
    let mut best = None;
    for (i, &x) in positions.iter().enumerate() {
        let right = n_lt_right.saturating_sub(i + 1) as f64;
        let left = i.saturating_sub(n_le_left) as f64;
        if scale * x < right - left {
            best = Some(i);
        }
    }
    Ok(best)
}

/// The approximate turning point of a particle state: builds the discrete
/// density (with the turning gap zeroed) and solves the cost balance on it.
pub fn discrete_turning_point(positions: &[f64], m: f64, alpha: f64) -> Result<TurningState> {
    let index = turning_index(positions, alpha, m)?;
    let density = ftl::discrete_density(positions, m, index);
    let solved = turning_point(&density, alpha);
    Ok(TurningState { index, ..solved })
}

/// Turning-curve velocity from the boundary traces:
/// `ξ' = (α/2) (f(ρ(-1+)) - f(ρ(1-)))`.
pub fn xi_dot_formula(p: &ModelParams, rho_left: f64, rho_right: f64) -> Result<f64> {
    Ok(0.5 * p.alpha * (p.flux(rho_left)? - p.flux(rho_right)?))
}

/// Returns `(2 |ξ2(0) - ξ1(0)|, ∫_{-1}^{1} |α2 ρ2 - α1 ρ1| dx)`; the first
/// component never exceeds the second.
pub fn xi0_gap_bound(
    d1: &PiecewiseConstantDensity,
    d2: &PiecewiseConstantDensity,
    alpha1: f64,
    alpha2: f64,
) -> (f64, f64) {
    let xi1 = turning_point(d1, alpha1).xi;
    let xi2 = turning_point(d2, alpha2).xi;
    let gap = 2.0 * (xi2 - xi1).abs();
    let bound = crate::density::merged_integral(d1, d2, CORRIDOR_LEFT, CORRIDOR_RIGHT, |a, b| {
        (alpha2 * b - alpha1 * a).abs()
    });
    (gap, bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::reference_datum;
    use proptest::prelude::*;

    #[test]
    fn zero_density_turns_at_origin() {
        let ts = turning_point(&PiecewiseConstantDensity::zero(), 3.0);
        assert_eq!(ts.xi, 0.0);
        assert!(ts.residual < 1e-15);
    }

    #[test]
    fn symmetric_pair_turns_at_origin() {
        let d =
            PiecewiseConstantDensity::new(&[(-0.8, -0.4, 0.6), (0.4, 0.8, 0.6)]).unwrap();
        for alpha in [0.0, 0.5, 2.0, 12.7] {
            let ts = turning_point(&d, alpha);
            assert!(ts.xi.abs() < 1e-14, "alpha={alpha}: xi={}", ts.xi);
        }
    }

    #[test]
    fn reference_datum_closed_form() {
        let d = reference_datum();
        let ts = turning_point(&d, 1.0);
        let expected = -0.4 + (1.405 - 1.05) / 1.9;
        assert!((ts.xi - expected).abs() < 1e-12);
        assert!(ts.residual <= 1e-12 * 2.81);
        let bis = turning_point_bisect(&d, 1.0, 1e-12);
        assert!((ts.xi - bis).abs() < 1e-10);
    }

    #[test]
    fn turning_index_examples() {
        // Condition holds only at i = 0: -5 < 2.
        let i0 = turning_index(&[-0.5, 0.2, 0.6], 1.0, 0.2).unwrap();
        assert_eq!(i0, Some(0));
        // All three conditions hold.
        let i0 = turning_index(&[-0.8, -0.6, -0.4], 1.0, 0.2).unwrap();
        assert_eq!(i0, Some(2));
        // alpha = 0 convention.
        let i0 = turning_index(&[-0.3, 0.3], 0.0, 0.2).unwrap();
        assert_eq!(i0, Some(0));
        let i0 = turning_index(&[0.1, 0.3], 0.0, 0.2).unwrap();
        assert_eq!(i0, None);
    }

    #[test]
    fn turning_index_rejects_unsorted() {
        assert!(turning_index(&[0.3, 0.1], 1.0, 0.2).is_err());
        assert!(turning_index(&[0.1, 0.3], 1.0, 0.0).is_err());
    }

    #[test]
    fn discrete_turning_point_symmetric() {
        // Antisymmetric positions with equal gaps: the middle gap is zeroed
        // and the profile stays symmetric.
        let ts = discrete_turning_point(&[-0.6, -0.2, 0.2, 0.6], 0.1, 1.0).unwrap();
        assert!(ts.xi.abs() < 1e-14);
    }

    #[test]
    fn xi_dot_formula_examples() {
        let p = ModelParams::normalized(2.0);
        assert_eq!(xi_dot_formula(&p, 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(xi_dot_formula(&p, 0.5, 0.5).unwrap(), 0.0);
        let p = ModelParams::normalized(1.0);
        assert!((xi_dot_formula(&p, 0.9, 0.0).unwrap() - 0.045).abs() < 1e-15);
        assert!(xi_dot_formula(&p, 1.2, 0.0).is_err());
    }

    #[test]
    fn gap_bound_for_alpha_perturbation() {
        let d = reference_datum();
        let (gap, bound) = xi0_gap_bound(&d, &d, 1.0, 1.1);
        assert!(gap <= bound + 1e-12);
        assert!((bound - 0.081).abs() < 1e-12);
        let (gap, bound) = xi0_gap_bound(&d, &d, 1.0, 1.0);
        assert_eq!((gap, bound), (0.0, 0.0));
    }

    fn arb_corridor_density() -> impl Strategy<Value = PiecewiseConstantDensity> {
        proptest::collection::vec((-1.0..1.0f64, 1e-3..0.5f64, 0.01..1.0f64), 1..4).prop_map(
            |raw| {
                let mut blocks = Vec::new();
                let mut cursor = -1.0f64;
                for (start, width, v) in raw {
                    let l = start.max(cursor);
                    let r = (l + width).min(1.0);
                    if r > l {
                        blocks.push((l, r, v));
                        cursor = r;
                    }
                }
                PiecewiseConstantDensity::new(&blocks).unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn residual_is_tiny(d in arb_corridor_density(), alpha in 0.0..20.0f64) {
            let ts = turning_point(&d, alpha);
            let total = 2.0 + alpha * d.total_mass();
            prop_assert!(ts.residual <= 1e-12 * total);
        }

        #[test]
        fn xi_stays_clear_of_exits(d in arb_corridor_density(), alpha in 0.0..20.0f64) {
            // delta = (1 + alpha rho_max L/2)^{-1} with support length L <= 2.
            let delta = 1.0 / (1.0 + alpha);
            let ts = turning_point(&d, alpha);
            prop_assert!(ts.xi >= -1.0 + delta - 1e-12);
            prop_assert!(ts.xi <= 1.0 - delta + 1e-12);
        }

        #[test]
        fn bisection_agrees(d in arb_corridor_density(), alpha in 0.0..20.0f64) {
            let ts = turning_point(&d, alpha);
            let bis = turning_point_bisect(&d, alpha, 1e-12);
            prop_assert!((ts.xi - bis).abs() < 1e-10);
        }

        // Moving a block rightward (same mass) never decreases xi.
        #[test]
        fn xi_monotone_under_rightward_transfer(
            l in -1.0..0.5f64,
            width in 1e-3..0.3f64,
            v in 0.05..1.0f64,
            eta in 0.0..0.5f64,
            alpha in 0.01..20.0f64,
        ) {
            let r = (l + width).min(1.0);
            let d1 = PiecewiseConstantDensity::new(&[(l, r, v)]).unwrap();
            let step = eta.min(1.0 - r);
            let d2 = d1.shift(step);
            let xi1 = turning_point(&d1, alpha).xi;
            let xi2 = turning_point(&d2, alpha).xi;
            prop_assert!(xi2 >= xi1 - 1e-12);
        }

        #[test]
        fn alpha_zero_always_origin(d in arb_corridor_density()) {
            prop_assert_eq!(turning_point(&d, 0.0).xi, 0.0);
        }

        #[test]
        fn gap_bound_random_pairs(
            d1 in arb_corridor_density(),
            d2 in arb_corridor_density(),
            a1 in 0.0..15.0f64,
            a2 in 0.0..15.0f64,
        ) {
            let (gap, bound) = xi0_gap_bound(&d1, &d2, a1, a2);
            prop_assert!(gap <= bound + 1e-12 * (1.0 + bound));
        }
    }
}
