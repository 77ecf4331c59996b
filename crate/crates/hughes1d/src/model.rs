//! Flux and velocity law.
//!
//! The built-in law is the affine one, v(ρ) = v_max (1 - ρ/ρ_max), with flux
//! f(ρ) = ρ v(ρ) concave on [0, ρ_max], and the affine congestion cost
//! c(ρ) = 1 + α ρ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model parameters: free-flow speed, jam density and cost slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub v_max: f64,
    pub rho_max: f64,
    /// Slope of the affine cost c(ρ) = 1 + α ρ. α = 0 is nearest-exit behaviour.
    pub alpha: f64,
}

impl ModelParams {
    pub fn new(v_max: f64, rho_max: f64, alpha: f64) -> Result<Self> {
        let p = Self {
            v_max,
            rho_max,
            alpha,
        };
        p.validate()?;
        Ok(p)
    }

    /// Normalized parameters (v_max = ρ_max = 1) with the given cost slope.
    pub fn normalized(alpha: f64) -> Self {
        Self::new(1.0, 1.0, alpha).expect("alpha must be >= 0")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_max.is_finite() && self.v_max > 0.0) {
            return Err(Error::InvalidParams(format!("v_max = {}", self.v_max)));
        }
        if !(self.rho_max.is_finite() && self.rho_max > 0.0) {
            return Err(Error::InvalidParams(format!("rho_max = {}", self.rho_max)));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::InvalidParams(format!("alpha = {}", self.alpha)));
        }
        Ok(())
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { alpha, ..*self }
    }

    /// v(ρ) = v_max (1 - ρ/ρ_max). Errors outside [0, ρ_max].
    pub fn velocity(&self, rho: f64) -> Result<f64> {
        self.check_density(rho)?;
        Ok(self.velocity_clamped(rho))
    }

    /// f(ρ) = ρ v(ρ). Errors outside [0, ρ_max].
    pub fn flux(&self, rho: f64) -> Result<f64> {
        self.check_density(rho)?;
        Ok(self.flux_clamped(rho))
    }

    pub(crate) fn check_density(&self, rho: f64) -> Result<()> {
        if !rho.is_finite() || rho < 0.0 || rho > self.rho_max {
            return Err(Error::Domain(format!(
                "density {} outside [0, {}]",
                rho, self.rho_max
            )));
        }
        Ok(())
    }

    /// Velocity with the argument clamped into [0, ρ_max]; used in inner loops
    /// where the state invariant already bounds the density up to roundoff.
    #[inline]
    pub(crate) fn velocity_clamped(&self, rho: f64) -> f64 {
        let r = rho.clamp(0.0, self.rho_max);
        self.v_max * (1.0 - r / self.rho_max)
    }

    #[inline]
    pub(crate) fn flux_clamped(&self, rho: f64) -> f64 {
        let r = rho.clamp(0.0, self.rho_max);
        r * self.velocity_clamped(r)
    }

    /// f'(ρ) = v_max (1 - 2ρ/ρ_max).
    #[inline]
    pub(crate) fn flux_prime(&self, rho: f64) -> f64 {
        self.v_max * (1.0 - 2.0 * rho / self.rho_max)
    }

    /// Inverse of f' on [0, ρ_max]; the state radiated at slope s inside a fan.
    #[inline]
    pub(crate) fn flux_prime_inv(&self, s: f64) -> f64 {
        0.5 * self.rho_max * (1.0 - s / self.v_max)
    }

    /// Argmax of f: ρ_max / 2 for the affine law.
    #[inline]
    pub(crate) fn critical_density(&self) -> f64 {
        0.5 * self.rho_max
    }
}

/// One structural assumption checked by [`validate_model`].
#[derive(Debug, Clone)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Report over all structural assumptions on the flux/velocity law.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

const GRID_POINTS: usize = 1024;
const GRID_TOL: f64 = 1e-12;

/// Checks the structural assumptions the model relies on: f(0) = f(ρ_max) = 0,
/// concavity of f, a null critical set of f', f > ρ f' on (0, ρ_max],
/// f - ρ f' + ρ² f'' ≤ 0, v' < 0 and v' + ρ v'' ≤ 0.
///
/// Everything is checked on a uniform grid; for the built-in affine law the
/// relevant derivatives are closed-form (v'' = 0).
pub fn validate_model(p: &ModelParams) -> ValidationReport {
    let mut checks = Vec::new();
    let f = |r: f64| p.flux_clamped(r);
    let fp = |r: f64| p.flux_prime(r);
    // Affine v: v' constant, v'' = 0, f'' = 2 v'.
    let v_prime = -p.v_max / p.rho_max;
    let f_second = 2.0 * v_prime;
    let grid =
        (0..=GRID_POINTS).map(|k| p.rho_max * (k as f64) / (GRID_POINTS as f64));

    let endpoint_defect = f(0.0).abs().max(f(p.rho_max).abs());
    checks.push(AssumptionCheck {
        name: "f(0) = f(rho_max) = 0",
        passed: endpoint_defect <= GRID_TOL,
        detail: format!("endpoint defect {endpoint_defect:.3e}"),
    });

    // Concavity via second differences on the uniform grid.
    let h = p.rho_max / GRID_POINTS as f64;
    let mut max_second_diff = f64::NEG_INFINITY;
    for k in 1..GRID_POINTS {
        let r = k as f64 * h;
        let d2 = f(r - h) - 2.0 * f(r) + f(r + h);
        max_second_diff = max_second_diff.max(d2);
    }
    checks.push(AssumptionCheck {
        name: "f concave",
        passed: max_second_diff <= GRID_TOL,
        detail: format!("max second difference {max_second_diff:.3e}"),
    });

    let critical_count = grid.clone().filter(|&r| fp(r).abs() <= 1e-9).count();
    checks.push(AssumptionCheck {
        name: "critical set of f' has zero measure",
        passed: critical_count <= 2,
        detail: format!("{critical_count} grid points with |f'| <= 1e-9"),
    });

    let mut min_gap = f64::INFINITY;
    for r in grid.clone().skip(1) {
        min_gap = min_gap.min(f(r) - r * fp(r));
    }
    checks.push(AssumptionCheck {
        name: "f > rho f' on (0, rho_max]",
        passed: min_gap > 0.0,
        detail: format!("min f - rho f' = {min_gap:.3e}"),
    });

    let mut max_combo = f64::NEG_INFINITY;
    for r in grid.clone() {
        max_combo = max_combo.max(f(r) - r * fp(r) + r * r * f_second);
    }
    checks.push(AssumptionCheck {
        name: "f - rho f' + rho^2 f'' <= 0",
        passed: max_combo <= GRID_TOL,
        detail: format!("max value {max_combo:.3e}"),
    });

    checks.push(AssumptionCheck {
        name: "v' < 0",
        passed: v_prime < 0.0,
        detail: format!("v' = {v_prime:.3e}"),
    });

    // v'' = 0 for the affine law, so v' + rho v'' = v'.
    let max_vpp = grid.map(|_| v_prime).fold(f64::NEG_INFINITY, f64::max);
    checks.push(AssumptionCheck {
        name: "v' + rho v'' <= 0",
        passed: max_vpp <= GRID_TOL,
        detail: format!("max value {max_vpp:.3e}"),
    });

    ValidationReport { checks }
}
