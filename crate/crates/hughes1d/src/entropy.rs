//! Kruzhkov entropy audit on grid runs.
//!
//! For a space-time window lying strictly on one side of the turning curve,
//! entropy consistency of a solution ρ means
//!
//!   ∬ ( |ρ - κ| φ_t + Φ φ_x ) dx dt >= 0,
//!   Φ = sign(x - ξ(t)) sign(ρ - κ) (f(ρ) - f(κ)),
//!
//! for every κ and every smooth bump φ supported in the window. The audit
//! evaluates the negative of that integral for a built-in bump scaled to the
//! window, treating the snapshot series as piecewise constant in time so the
//! φ_t part telescopes exactly. Entropy-consistent output yields a residual
//! below O(dx); a genuine entropy violation yields a strictly positive value
//! proportional to the violation.

use crate::error::{Error, Result};
use crate::godunov::SolveOutput;
use crate::model::ModelParams;

/// Entropy-consistent output keeps the residual below this multiple of dx.
pub const ENTROPY_TOL_FACTOR: f64 = 2.0;

/// Axis-aligned space-time box.
#[derive(Debug, Clone, Copy)]
pub struct SpaceTimeWindow {
    pub t0: f64,
    pub t1: f64,
    pub x0: f64,
    pub x1: f64,
}

impl SpaceTimeWindow {
    pub fn new(t0: f64, t1: f64, x0: f64, x1: f64) -> Result<Self> {
        if !(t1 > t0 && x1 > x0) {
            return Err(Error::Usage(format!(
                "degenerate window [{t0}, {t1}] x [{x0}, {x1}]"
            )));
        }
        Ok(Self { t0, t1, x0, x1 })
    }
}

// exp(1 - 1/(1 - s^2)) on (-1, 1); peaks at 1, vanishes smoothly at +-1.
fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

// Five-point Gauss-Legendre nodes and weights on [-1, 1].
const GAUSS_X: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GAUSS_W: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

fn gauss<F: Fn(f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    GAUSS_X
        .iter()
        .zip(GAUSS_W.iter())
        .map(|(&x, &w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Composite Gauss quadrature with panels no wider than `max_panel`.
fn gauss_composite<F: Fn(f64) -> f64 + Copy>(a: f64, b: f64, max_panel: f64, f: F) -> f64 {
    let panels = ((b - a) / max_panel).ceil().max(1.0) as usize;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| gauss(a + k as f64 * h, a + (k + 1) as f64 * h, f))
        .sum()
}

/// Evaluates the (negated) Kruzhkov pairing of a recorded run against the
/// built-in bump on `window`, for the constant `kappa`.
///
/// The window must lie strictly on one side of the recorded turning-point
/// series and be covered by the snapshot times.
pub fn entropy_residual(
    out: &SolveOutput,
    p: &ModelParams,
    kappa: f64,
    window: &SpaceTimeWindow,
) -> Result<f64> {
    p.check_density(kappa)?;
    let w = *window;

    if out.xi_series.is_empty() {
        return Err(Error::Usage(
            "run carries no turning-point series; entropy audit needs one".into(),
        ));
    }
    let mut side: Option<bool> = None;
    for &(t, xi) in &out.xi_series {
        if t < w.t0 - 1e-9 || t > w.t1 + 1e-9 {
            continue;
        }
        let right_of_xi = w.x0 > xi;
        let left_of_xi = w.x1 < xi;
        if !right_of_xi && !left_of_xi {
            return Err(Error::Usage(format!(
                "window [{}, {}] intersects the turning point {xi} at t = {t}",
                w.x0, w.x1
            )));
        }
        match side {
            None => side = Some(right_of_xi),
            Some(prev) if prev != right_of_xi => {
                return Err(Error::Usage(
                    "turning point crosses the window during its time span".into(),
                ))
            }
            _ => {}
        }
    }
    let dir = if side.unwrap_or(true) { 1.0 } else { -1.0 };

    let snaps = &out.snapshots;
    let covered = snaps.first().map_or(false, |(t, _)| *t <= w.t0 + 1e-12)
        && snaps.last().map_or(false, |(t, _)| *t >= w.t1 - 1e-12);
    if !covered {
        return Err(Error::Usage(
            "snapshot series does not cover the window time span".into(),
        ));
    }

    let (tc, tr) = (0.5 * (w.t0 + w.t1), 0.5 * (w.t1 - w.t0));
    let (xc, xr) = (0.5 * (w.x0 + w.x1), 0.5 * (w.x1 - w.x0));
    let phi = |t: f64, x: f64| bump((t - tc) / tr) * bump((x - xc) / xr);
    let max_panel = (w.x1 - w.x0) / 64.0;

    let f_kappa = p.flux_clamped(kappa);
    let mut pairing = 0.0;
    for pair in snaps.windows(2) {
        let (tk, ref rho) = pair[0];
        let (tk1, _) = pair[1];
        let lo = tk.max(w.t0);
        let hi = tk1.min(w.t1);
        if hi <= lo {
            continue;
        }
        for (l, r, v) in rho.partition_on(w.x0, w.x1) {
            // |rho - kappa| phi_t term, integrated exactly in t over the slab.
            let dphi = |x: f64| phi(hi, x) - phi(lo, x);
            pairing += (v - kappa).abs() * gauss_composite(l, r, max_panel, dphi);
            // Phi phi_x term: integrate phi in t, difference across the segment.
            let psi = |x: f64| gauss(lo, hi, |t| phi(t, x));
            let big_phi =
                dir * (v - kappa).signum() * (p.flux_clamped(v) - f_kappa);
            pairing += big_phi * (psi(r) - psi(l));
        }
    }
    Ok(-pairing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::PiecewiseConstantDensity;
    use crate::godunov::solve;

    fn params(alpha: f64) -> ModelParams {
        ModelParams::normalized(alpha)
    }

    fn constant_run(value: f64) -> SolveOutput {
        let d = PiecewiseConstantDensity::new(&[(-2.0, 2.0, value)]).unwrap();
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.02).collect();
        SolveOutput {
            snapshots: times.iter().map(|&t| (t, d.clone())).collect(),
            xi_series: times.iter().map(|&t| (t, -3.0)).collect(),
            dx: 0.01,
            initial_mass: d.total_mass(),
            max_mass_drift: 0.0,
            min_cell: value,
            max_cell: value,
        }
    }

    #[test]
    fn constant_window_is_exact_zero() {
        let p = params(0.0);
        let w = SpaceTimeWindow::new(0.05, 0.35, -0.5, 0.5).unwrap();
        for kappa in [0.0, 0.25, 0.6, 1.0] {
            let r = entropy_residual(&constant_run(0.4), &p, kappa, &w).unwrap();
            assert!(r.abs() < 1e-12, "kappa={kappa}: r={r}");
        }
    }

    #[test]
    fn rarefaction_window_is_entropy_consistent() {
        let p = params(0.0);
        let d = PiecewiseConstantDensity::new(&[(0.1, 0.4, 0.9)]).unwrap();
        let dx = 1.0 / 400.0;
        let times: Vec<f64> = (0..=120).map(|k| 0.3 * k as f64 / 120.0).collect();
        let out = solve(&d, &p, 0.3, dx, &times).unwrap();
        let w = SpaceTimeWindow::new(0.05, 0.3, 0.45, 0.75).unwrap();
        for kappa in [0.25, 0.5, 0.75] {
            let r = entropy_residual(&out, &p, kappa, &w).unwrap();
            assert!(r <= ENTROPY_TOL_FACTOR * dx, "kappa={kappa}: r={r}");
        }
    }

    #[test]
    fn expansion_shock_is_flagged() {
        let p = params(0.0);
        // Stationary non-entropic jump 0.8 -> 0.2 at x = 0.3 (the RH speed of
        // the pair is zero, but the entropic solution is a rarefaction).
        let d =
            PiecewiseConstantDensity::new(&[(-2.0, 0.3, 0.8), (0.3, 2.0, 0.2)]).unwrap();
        let times: Vec<f64> = (0..=40).map(|k| k as f64 * 0.01).collect();
        let out = SolveOutput {
            snapshots: times.iter().map(|&t| (t, d.clone())).collect(),
            xi_series: times.iter().map(|&t| (t, -0.95)).collect(),
            dx: 0.01,
            initial_mass: d.total_mass(),
            max_mass_drift: 0.0,
            min_cell: 0.2,
            max_cell: 0.8,
        };
        let w = SpaceTimeWindow::new(0.05, 0.35, 0.1, 0.5).unwrap();
        let r = entropy_residual(&out, &p, 0.5, &w).unwrap();
        assert!(r > 1e-4, "expansion shock not flagged: r={r}");
    }

    #[test]
    fn entropic_shock_passes() {
        let p = params(0.0);
        let d =
            PiecewiseConstantDensity::new(&[(-2.0, 0.3, 0.2), (0.3, 2.0, 0.8)]).unwrap();
        let times: Vec<f64> = (0..=40).map(|k| k as f64 * 0.01).collect();
        let out = SolveOutput {
            snapshots: times.iter().map(|&t| (t, d.clone())).collect(),
            xi_series: times.iter().map(|&t| (t, -0.95)).collect(),
            dx: 0.01,
            initial_mass: d.total_mass(),
            max_mass_drift: 0.0,
            min_cell: 0.2,
            max_cell: 0.8,
        };
        let w = SpaceTimeWindow::new(0.05, 0.35, 0.1, 0.5).unwrap();
        let r = entropy_residual(&out, &p, 0.5, &w).unwrap();
        assert!(r <= 1e-12, "entropic shock flagged: r={r}");
    }

    #[test]
    fn window_on_turning_point_rejected() {
        let p = params(1.0);
        let mut run = constant_run(0.3);
        for (t, xi) in run.xi_series.iter_mut() {
            *xi = 0.1 * *t / 0.4;
        }
        let w = SpaceTimeWindow::new(0.05, 0.35, -0.5, 0.5).unwrap();
        assert!(entropy_residual(&run, &p, 0.5, &w).is_err());
    }
}
