//! Piecewise-constant density profiles on the line.
//!
//! Profiles are stored as a contiguous partition (strictly increasing
//! breakpoints, one value per interval) and are zero outside the partition.
//! Adjacent intervals with equal values are merged and zero-valued end
//! intervals are trimmed, so two profiles representing the same function
//! compare equal. All integral functionals (mass, L1 distance, total
//! variation, cumulative cost) are evaluated exactly on the merged
//! partition; there is no quadrature anywhere in this module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Left end of the corridor.
pub const CORRIDOR_LEFT: f64 = -1.0;
/// Right end of the corridor.
pub const CORRIDOR_RIGHT: f64 = 1.0;

const SUPPORT_SLACK: f64 = 1e-12;

/// A piecewise-constant, compactly supported density profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstantDensity {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstantDensity {
    /// The identically zero profile.
    pub fn zero() -> Self {
        Self {
            breaks: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a profile from `(left, right, value)` blocks.
    ///
    /// Blocks must be pairwise disjoint after sorting (touching endpoints are
    /// fine), with finite non-negative values. Zero-width and zero-valued
    /// blocks are dropped; the result is canonical.
    pub fn new(blocks: &[(f64, f64, f64)]) -> Result<Self> {
        let mut blocks: Vec<(f64, f64, f64)> = blocks
            .iter()
            .copied()
            .filter(|&(l, r, _)| l != r)
            .collect();
        for &(l, r, v) in &blocks {
            if !(l.is_finite() && r.is_finite() && v.is_finite()) {
                return Err(Error::Construction(format!(
                    "non-finite block ({l}, {r}, {v})"
                )));
            }
            if r < l {
                return Err(Error::Construction(format!(
                    "block ({l}, {r}) has negative width"
                )));
            }
            if v < 0.0 {
                return Err(Error::Construction(format!("negative density {v}")));
            }
        }
        blocks.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in blocks.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(Error::Construction(format!(
                    "blocks ({}, {}) and ({}, {}) overlap",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }

        // Contiguous partition with explicit zero intervals across gaps.
        let mut breaks = Vec::new();
        let mut values = Vec::new();
        for (l, r, v) in blocks {
            if let Some(&last) = breaks.last() {
                if l > last {
                    values.push(0.0);
                    breaks.push(l);
                }
            } else {
                breaks.push(l);
            }
            values.push(v);
            breaks.push(r);
        }
        let mut d = Self { breaks, values };
        d.canonicalize();
        Ok(d)
    }

    fn canonicalize(&mut self) {
        // Merge equal-valued neighbours.
        let mut breaks = Vec::with_capacity(self.breaks.len());
        let mut values = Vec::with_capacity(self.values.len());
        for (k, &v) in self.values.iter().enumerate() {
            if values.last() == Some(&v) {
                *breaks.last_mut().unwrap() = self.breaks[k + 1];
            } else {
                if breaks.is_empty() {
                    breaks.push(self.breaks[k]);
                }
                values.push(v);
                breaks.push(self.breaks[k + 1]);
            }
        }
        // Trim zero ends.
        while values.first() == Some(&0.0) {
            values.remove(0);
            breaks.remove(0);
        }
        while values.last() == Some(&0.0) {
            values.pop();
            breaks.pop();
        }
        if values.is_empty() {
            breaks.clear();
        }
        self.breaks = breaks;
        self.values = values;
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }

    /// Support bounds `(inf, sup)`, or `None` for the zero profile.
    pub fn support(&self) -> Option<(f64, f64)> {
        if self.is_zero() {
            None
        } else {
            Some((self.breaks[0], *self.breaks.last().unwrap()))
        }
    }

    /// Non-zero blocks as `(left, right, value)` triples.
    pub fn blocks(&self) -> Vec<(f64, f64, f64)> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(k, &v)| (self.breaks[k], self.breaks[k + 1], v))
            .collect()
    }

    /// Value at `x`; intervals are half-open `[b_k, b_{k+1})`.
    pub fn value_at(&self, x: f64) -> f64 {
        if self.is_zero() || x < self.breaks[0] || x >= *self.breaks.last().unwrap() {
            return 0.0;
        }
        let k = self.breaks.partition_point(|&b| b <= x) - 1;
        self.values[k.min(self.values.len() - 1)]
    }

    /// Checks the invariants required of an initial datum: support inside the
    /// corridor and values below the jam density.
    pub fn check_initial_datum(&self, rho_max: f64) -> Result<()> {
        if let Some((lo, hi)) = self.support() {
            if lo < CORRIDOR_LEFT - SUPPORT_SLACK || hi > CORRIDOR_RIGHT + SUPPORT_SLACK {
                return Err(Error::Construction(format!(
                    "support [{lo}, {hi}] leaves the corridor [-1, 1]"
                )));
            }
        }
        for &v in &self.values {
            if v > rho_max + SUPPORT_SLACK {
                return Err(Error::Construction(format!(
                    "density {v} exceeds rho_max {rho_max}"
                )));
            }
        }
        Ok(())
    }

    /// ∫ ρ dx over the whole line; exact.
    pub fn total_mass(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(k, v)| v * (self.breaks[k + 1] - self.breaks[k]))
            .sum()
    }

    /// ∫ ρ dx over `(a, b)`; exact.
    pub fn mass_on(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut acc = 0.0;
        for (k, &v) in self.values.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let lo = self.breaks[k].max(a);
            let hi = self.breaks[k + 1].min(b);
            if hi > lo {
                acc += v * (hi - lo);
            }
        }
        acc
    }

    /// Exact L1 distance over the whole line.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        merged_integral(self, other, f64::NEG_INFINITY, f64::INFINITY, |a, b| {
            (a - b).abs()
        })
    }

    /// Exact L1 distance restricted to `(a, b)`.
    pub fn l1_distance_on(&self, other: &Self, a: f64, b: f64) -> f64 {
        merged_integral(self, other, a, b, |x, y| (x - y).abs())
    }

    /// Total variation: the sum of absolute jumps, including the jumps to the
    /// zero exterior.
    pub fn total_variation(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let mut tv = self.values[0].abs() + self.values.last().unwrap().abs();
        for w in self.values.windows(2) {
            tv += (w[1] - w[0]).abs();
        }
        tv
    }

    /// Antiderivative of the affine cost from the left exit:
    /// `(x + 1) + α · mass on (-1, x)`. Defined for `x ∈ [-1, 1]`.
    pub fn cumulative_cost(&self, alpha: f64, x: f64) -> Result<f64> {
        if !(CORRIDOR_LEFT..=CORRIDOR_RIGHT).contains(&x) {
            return Err(Error::Domain(format!("position {x} outside [-1, 1]")));
        }
        Ok((x - CORRIDOR_LEFT) + alpha * self.mass_on(CORRIDOR_LEFT, x))
    }

    /// Profile translated by `delta`.
    pub fn shift(&self, delta: f64) -> Self {
        Self {
            breaks: self.breaks.iter().map(|b| b + delta).collect(),
            values: self.values.clone(),
        }
    }

    /// Translated profile validated as an initial datum (support must stay
    /// inside the corridor).
    pub fn shifted_datum(&self, delta: f64, rho_max: f64) -> Result<Self> {
        let d = self.shift(delta);
        d.check_initial_datum(rho_max)?;
        Ok(d)
    }

    /// Restriction to `(a, b)`, extended by zero outside.
    pub fn restrict(&self, a: f64, b: f64) -> Self {
        let blocks: Vec<(f64, f64, f64)> = self
            .blocks()
            .into_iter()
            .filter_map(|(l, r, v)| {
                let lo = l.max(a);
                let hi = r.min(b);
                (hi > lo).then_some((lo, hi, v))
            })
            .collect();
        Self::new(&blocks).expect("restriction of a valid profile is valid")
    }

    /// Contiguous partition of `[a, b]` into constant pieces `(l, r, value)`,
    /// including zero-valued pieces.
    pub(crate) fn partition_on(&self, a: f64, b: f64) -> Vec<(f64, f64, f64)> {
        let mut cuts = vec![a];
        for &bp in &self.breaks {
            if bp > a && bp < b {
                cuts.push(bp);
            }
        }
        cuts.push(b);
        cuts.windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| (w[0], w[1], self.value_at(w[0])))
            .collect()
    }
}

/// Integrates `combine(ρ1, ρ2)` exactly over `(lo, hi)` on the merged
/// breakpoint partition of the two profiles. `combine(0, 0)` must be 0.
pub(crate) fn merged_integral(
    d1: &PiecewiseConstantDensity,
    d2: &PiecewiseConstantDensity,
    lo: f64,
    hi: f64,
    combine: impl Fn(f64, f64) -> f64,
) -> f64 {
    let mut cuts: Vec<f64> = d1
        .breaks
        .iter()
        .chain(d2.breaks.iter())
        .copied()
        .filter(|&b| b > lo && b < hi)
        .collect();
    if let Some((a, b)) = bounded_range(d1, d2, lo, hi) {
        cuts.push(a);
        cuts.push(b);
    } else {
        return 0.0;
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        let width = w[1] - w[0];
        if width > 0.0 {
            acc += combine(d1.value_at(w[0]), d2.value_at(w[0])) * width;
        }
    }
    acc
}

fn bounded_range(
    d1: &PiecewiseConstantDensity,
    d2: &PiecewiseConstantDensity,
    lo: f64,
    hi: f64,
) -> Option<(f64, f64)> {
    let supports = [d1.support(), d2.support()];
    let mut a = f64::INFINITY;
    let mut b = f64::NEG_INFINITY;
    for s in supports.into_iter().flatten() {
        a = a.min(s.0);
        b = b.max(s.1);
    }
    if a > b {
        return None;
    }
    let a = a.max(lo);
    let b = b.min(hi);
    (b > a).then_some((a, b))
}

/// The initial datum of the first numerical study: two 0.9 blocks left of the
/// centre, with a vacuum gap at (-0.5, -0.4).
pub fn reference_datum() -> PiecewiseConstantDensity {
    PiecewiseConstantDensity::new(&[(-1.0, -0.5, 0.9), (-0.4, 0.0, 0.9)])
        .expect("reference datum is valid")
}
