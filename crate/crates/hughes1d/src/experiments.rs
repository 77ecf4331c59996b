//! Scripted studies: evacuation-time sweeps, jump detection, and empirical
//! checks of the quantitative statements (turning-curve velocity, stability
//! ratio, restart property, cross-scheme convergence).
//!
//! Sweep points are independent jobs run concurrently; records are returned
//! in parameter order regardless of completion order, and every record is
//! produced by a single-threaded deterministic simulation.

use rayon::prelude::*;

use crate::density::PiecewiseConstantDensity;
use crate::error::Result;
use crate::ftl::{
    atomize, detect_crossings, integrate, sample_density, IntegrateOptions, LeaderRule,
    Trajectory, TrajectorySample,
};
use crate::godunov;
use crate::model::ModelParams;
use crate::turning::{xi0_gap_bound, xi_dot_formula};

/// Horizon cap for "run until evacuated" sweep points.
pub const SWEEP_HORIZON: f64 = 50.0;

/// Gaps below this density carry no boundary trace.
pub const TRACE_DENSITY_FLOOR: f64 = 1e-6;

/// Default jump-detection factor: a jump is an adjacent difference exceeding
/// this multiple of the median absolute adjacent difference.
pub const JUMP_FACTOR: f64 = 5.0;

/// One sweep point.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub param: f64,
    /// Evacuation time; `None` when the horizon was reached first or the
    /// point failed.
    pub t_mic: Option<f64>,
    pub crossings: usize,
    pub max_turning_residual: f64,
    pub min_spacing: f64,
    pub wall_secs: f64,
    pub error: Option<String>,
}

fn run_point(
    param: f64,
    datum: Result<PiecewiseConstantDensity>,
    p: &ModelParams,
    n: usize,
    dt: f64,
    rule: LeaderRule,
) -> SweepRecord {
    let start = std::time::Instant::now();
    let outcome = datum.and_then(|d| {
        let state = atomize(&d, n, p)?;
        let mut opts = IntegrateOptions::new(dt, SWEEP_HORIZON);
        opts.rule = rule;
        integrate(&state, p, &opts)
    });
    match outcome {
        Ok(traj) => {
            let max_res = traj
                .samples
                .iter()
                .map(|s| s.turning_residual)
                .fold(0.0, f64::max);
            let min_spacing = traj
                .samples
                .iter()
                .map(|s| s.min_spacing)
                .fold(f64::INFINITY, f64::min);
            SweepRecord {
                param,
                t_mic: traj.evacuation_time,
                crossings: detect_crossings(&traj).len(),
                max_turning_residual: max_res,
                min_spacing,
                wall_secs: start.elapsed().as_secs_f64(),
                error: None,
            }
        }
        Err(e) => SweepRecord {
            param,
            t_mic: None,
            crossings: 0,
            max_turning_residual: f64::NAN,
            min_spacing: f64::NAN,
            wall_secs: start.elapsed().as_secs_f64(),
            error: Some(e.to_string()),
        },
    }
}

/// One simulation per cost slope in `alpha_grid`, identical N and dt.
pub fn sweep_alpha(
    datum: &PiecewiseConstantDensity,
    base: &ModelParams,
    alpha_grid: &[f64],
    n: usize,
    dt: f64,
    rule: LeaderRule,
) -> Vec<SweepRecord> {
    alpha_grid
        .par_iter()
        .map(|&alpha| run_point(alpha, Ok(datum.clone()), &base.with_alpha(alpha), n, dt, rule))
        .collect()
}

/// One simulation per perturbation value, with the datum produced by
/// `family`; per-point construction failures are recorded in the table and
/// the sweep continues.
pub fn sweep_delta<F>(
    family: F,
    delta_grid: &[f64],
    p: &ModelParams,
    n: usize,
    dt: f64,
    rule: LeaderRule,
) -> Vec<SweepRecord>
where
    F: Fn(f64) -> Result<PiecewiseConstantDensity> + Sync,
{
    delta_grid
        .par_iter()
        .map(|&delta| run_point(delta, family(delta), p, n, dt, rule))
        .collect()
}

/// A detected evacuation-time discontinuity between two adjacent sweep
/// points.
#[derive(Debug, Clone, Copy)]
pub struct JumpEvent {
    /// Index of the left record of the pair.
    pub index: usize,
    pub param_lo: f64,
    pub param_hi: f64,
    /// Midpoint of the pair, reported as the jump position.
    pub position: f64,
    pub delta: f64,
    pub threshold: f64,
}

/// Flags adjacent-pair differences exceeding `factor` times the median
/// absolute adjacent difference. Pairs interrupted by failed points are
/// skipped. Deterministic: identical records give identical jump sets.
pub fn detect_jumps_with_factor(records: &[SweepRecord], factor: f64) -> Vec<JumpEvent> {
    let mut diffs = Vec::new();
    for (i, pair) in records.windows(2).enumerate() {
        if let (Some(a), Some(b)) = (pair[0].t_mic, pair[1].t_mic) {
            diffs.push((i, (b - a).abs()));
        }
    }
    if diffs.len() < 2 {
        return Vec::new();
    }
    let mut sorted: Vec<f64> = diffs.iter().map(|&(_, d)| d).collect();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    let threshold = factor * median;
    diffs
        .into_iter()
        .filter(|&(_, d)| d > threshold)
        .map(|(i, d)| JumpEvent {
            index: i,
            param_lo: records[i].param,
            param_hi: records[i + 1].param,
            position: 0.5 * (records[i].param + records[i + 1].param),
            delta: d,
            threshold,
        })
        .collect()
}

pub fn detect_jumps(records: &[SweepRecord]) -> Vec<JumpEvent> {
    detect_jumps_with_factor(records, JUMP_FACTOR)
}

/// Scheme-level well-separation certificate: no turning-curve crossings and
/// the turning point stays at least 2m/ρ_max away from every mass-carrying
/// particle at every sample.
#[derive(Debug, Clone, Copy)]
pub struct WellSeparation {
    pub crossings: usize,
    pub min_gap_to_turning: f64,
    pub threshold: f64,
    pub ok: bool,
}

pub fn certify_well_separated(traj: &Trajectory, p: &ModelParams) -> WellSeparation {
    let crossings = detect_crossings(traj).len();
    let m = traj.m;
    let mut min_gap = f64::INFINITY;
    for s in &traj.samples {
        let x = &s.positions;
        let n = x.len() - 1;
        let gap_density = |k: usize| -> f64 {
            if Some(k) == s.i0 {
                0.0
            } else {
                m / (x[k + 1] - x[k])
            }
        };
        for i in 0..=n {
            let carries = (i > 0 && gap_density(i - 1) >= TRACE_DENSITY_FLOOR)
                || (i < n && gap_density(i) >= TRACE_DENSITY_FLOOR);
            if carries {
                min_gap = min_gap.min((x[i] - s.xi).abs());
            }
        }
    }
    let threshold = 2.0 * m / p.rho_max;
    WellSeparation {
        crossings,
        min_gap_to_turning: min_gap,
        threshold,
        ok: crossings == 0 && min_gap >= threshold,
    }
}

#[derive(Debug, Clone)]
pub enum StabilityScope {
    InScope,
    OutOfScope(String),
    Degenerate,
}

/// Discrete counterpart of the L1 stability estimate.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: Option<f64>,
    pub scope: StabilityScope,
    /// `(2 |ξ2(0) - ξ1(0)|, ∫ |α2 ρ2 - α1 ρ1|)` for the same pair.
    pub xi_gap: (f64, f64),
}

/// Runs the two scenarios to `t_eval` and returns
/// `‖ρ1(t) - ρ2(t)‖_{L1(corridor)} / (|α1 - α2| + ‖ρ̄1 - ρ̄2‖_{L1})`.
///
/// Pairs that fail the well-separation certificate are reported as out of
/// scope, not as errors.
pub fn stability_ratio(
    d1: &PiecewiseConstantDensity,
    p1: &ModelParams,
    d2: &PiecewiseConstantDensity,
    p2: &ModelParams,
    n: usize,
    dt: f64,
    t_eval: f64,
) -> Result<StabilityReport> {
    let xi_gap = xi0_gap_bound(d1, d2, p1.alpha, p2.alpha);
    let run = |d: &PiecewiseConstantDensity, p: &ModelParams| -> Result<Trajectory> {
        let state = atomize(d, n, p)?;
        integrate(&state, p, &IntegrateOptions::new(dt, t_eval))
    };
    let traj1 = run(d1, p1)?;
    let traj2 = run(d2, p2)?;
    let cert1 = certify_well_separated(&traj1, p1);
    let cert2 = certify_well_separated(&traj2, p2);

    let rho1 = sample_density(traj1.samples.last().unwrap(), traj1.m);
    let rho2 = sample_density(traj2.samples.last().unwrap(), traj2.m);
    let numerator = rho1.l1_distance_on(&rho2, -1.0, 1.0);
    let denominator = (p1.alpha - p2.alpha).abs() + d1.l1_distance_on(d2, -1.0, 1.0);

    let scope = if !cert1.ok || !cert2.ok {
        StabilityScope::OutOfScope(format!(
            "well-separation certificate failed (crossings {}/{}, min gap {:.3e}/{:.3e})",
            cert1.crossings, cert2.crossings, cert1.min_gap_to_turning, cert2.min_gap_to_turning
        ))
    } else if denominator == 0.0 {
        StabilityScope::Degenerate
    } else {
        StabilityScope::InScope
    };
    let ratio = (denominator > 0.0).then(|| numerator / denominator);
    Ok(StabilityReport {
        numerator,
        denominator,
        ratio,
        scope,
        xi_gap,
    })
}

/// Boundary trace near an exit: the density of the first (left exit) or last
/// (right exit) gap that carries mass and touches the 2m/ρ_max strip inside
/// the exit; zero when no mass abuts the exit.
fn boundary_traces(s: &TrajectorySample, m: f64, rho_max: f64) -> (f64, f64) {
    let x = &s.positions;
    let n = x.len() - 1;
    let strip = 2.0 * m / rho_max;
    let gap_density = |k: usize| -> f64 {
        if Some(k) == s.i0 {
            0.0
        } else {
            m / (x[k + 1] - x[k])
        }
    };
    let mut left = 0.0;
    for k in 0..n {
        if x[k + 1] > -1.0 && x[k] < -1.0 + strip {
            let r = gap_density(k);
            if r > TRACE_DENSITY_FLOOR {
                left = r;
                break;
            }
        }
    }
    let mut right = 0.0;
    for k in (0..n).rev() {
        if x[k] < 1.0 && x[k + 1] > 1.0 - strip {
            let r = gap_density(k);
            if r > TRACE_DENSITY_FLOOR {
                right = r;
                break;
            }
        }
    }
    (left, right)
}

#[derive(Debug, Clone)]
pub struct DotxiReport {
    pub max_deviation: f64,
    pub samples_used: usize,
    pub certificate: WellSeparation,
}

/// Compares central finite differences of the recorded turning-point series
/// against the boundary-trace formula ξ' = (α/2)(f(ρ(-1+)) - f(ρ(1-))),
/// skipping samples adjacent to a turning-index switch.
pub fn dotxi_check(
    datum: &PiecewiseConstantDensity,
    p: &ModelParams,
    n: usize,
    dt: f64,
    horizon: f64,
) -> Result<DotxiReport> {
    let state = atomize(datum, n, p)?;
    let traj = integrate(&state, p, &IntegrateOptions::new(dt, horizon))?;
    let certificate = certify_well_separated(&traj, p);
    let m = traj.m;

    let mut max_dev: f64 = 0.0;
    let mut used = 0;
    for k in 1..traj.samples.len().saturating_sub(1) {
        let (prev, cur, next) = (
            &traj.samples[k - 1],
            &traj.samples[k],
            &traj.samples[k + 1],
        );
        if prev.i0 != cur.i0 || cur.i0 != next.i0 {
            continue;
        }
        let fd = (next.xi - prev.xi) / (next.t - prev.t);
        let (tl, tr) = boundary_traces(cur, m, p.rho_max);
        let formula = xi_dot_formula(p, tl.min(p.rho_max), tr.min(p.rho_max))?;
        max_dev = max_dev.max((fd - formula).abs());
        used += 1;
    }
    Ok(DotxiReport {
        max_deviation: max_dev,
        samples_used: used,
        certificate,
    })
}

/// Restart error: runs to `t_eval` directly, and via a stop at `t0` with
/// corridor restriction and re-atomization; returns the corridor L1 distance
/// of the reconstructed densities at `t_eval`.
pub fn restart_consistency(
    datum: &PiecewiseConstantDensity,
    p: &ModelParams,
    n: usize,
    dt: f64,
    t0: f64,
    t_eval: f64,
) -> Result<f64> {
    if !(0.0 < t0 && t0 < t_eval) {
        return Err(crate::error::Error::Usage(format!(
            "need 0 < t0 < t_eval, got t0 = {t0}, t_eval = {t_eval}"
        )));
    }
    let state = atomize(datum, n, p)?;
    let direct = integrate(&state, p, &IntegrateOptions::new(dt, t_eval))?;
    let rho_direct = sample_density(direct.samples.last().unwrap(), direct.m);

    let first_leg = integrate(&state, p, &IntegrateOptions::new(dt, t0))?;
    let mid = sample_density(first_leg.samples.last().unwrap(), first_leg.m).restrict(-1.0, 1.0);
    let restarted = atomize(&mid, n, p)?;
    let second_leg = integrate(&restarted, p, &IntegrateOptions::new(dt, t_eval - t0))?;
    let rho_restarted = sample_density(second_leg.samples.last().unwrap(), second_leg.m);

    Ok(rho_direct.l1_distance_on(&rho_restarted, -1.0, 1.0))
}

/// Corridor L1 distances between particle-scheme reconstructions at several
/// N and one grid-oracle snapshot, at a common evaluation time.
#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub dx: f64,
    /// `(N, ‖ρ_FtL - ρ_grid‖_{L1(corridor)})`, in the given N order.
    pub rows: Vec<(usize, f64)>,
    pub strictly_decreasing: bool,
}

pub fn cross_scheme_convergence(
    datum: &PiecewiseConstantDensity,
    p: &ModelParams,
    t_eval: f64,
    n_list: &[usize],
    dx: f64,
) -> Result<ConvergenceTable> {
    let oracle = godunov::solve(datum, p, t_eval, dx, &[t_eval])?;
    let grid_rho = oracle
        .snapshot_at(t_eval)
        .expect("final snapshot recorded")
        .restrict(-1.0, 1.0);
    let rows: Vec<(usize, f64)> = n_list
        .par_iter()
        .map(|&n| -> Result<(usize, f64)> {
            let state = atomize(datum, n, p)?;
            let traj = integrate(&state, p, &IntegrateOptions::new(0.004, t_eval))?;
            let rho = sample_density(traj.samples.last().unwrap(), traj.m).restrict(-1.0, 1.0);
            Ok((n, rho.l1_distance(&grid_rho)))
        })
        .collect::<Result<_>>()?;
    let strictly_decreasing = rows.windows(2).all(|w| w[1].1 < w[0].1);
    Ok(ConvergenceTable {
        dx,
        rows,
        strictly_decreasing,
    })
}
