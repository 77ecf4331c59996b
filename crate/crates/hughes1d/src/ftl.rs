//! Deterministic many-particle (follow-the-leader) scheme.
//!
//! The initial density is atomized into N gaps of equal mass m carrying N+1
//! particles. The two outermost particles move at ±v_max; every interior
//! particle left of the turning index follows the gap behind it leftward,
//! every interior particle right of it follows the gap ahead rightward:
//!
//!   x_0' = -v_max,
//!   x_i' = -v(m / (x_i - x_{i-1}))   for 1 <= i <= I0,
//!   x_i' = +v(m / (x_{i+1} - x_i))   for I0+1 <= i <= N-1,
//!   x_N' = +v_max.
//!
//! The index I0 is refreshed at the start of every time step and frozen
//! within it. Inside a frozen step the system is advanced by the explicit
//! midpoint rule with enough equal sub-steps to keep the stiffest
//! gap-relaxation mode (rate up to v_max rho_max / m) inside the stability
//! region; the step size `dt` is the reporting and index-refresh cadence.

use std::io::Write;

use crate::density::PiecewiseConstantDensity;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::turning::{discrete_turning_point, turning_index};

/// Slack allowed below the jam spacing m/ρ_max.
pub const SPACING_TOL: f64 = 1e-9;

/// Fallback horizon for "run until evacuated".
pub const EVACUATION_CAP: f64 = 200.0;

/// Rule for the two outermost particles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeaderRule {
    /// x_0 and x_N always move at -v_max and +v_max. This is the printed
    /// system, kept as the default.
    Paper,
    /// Extension beyond the printed system: when one side has no followers
    /// at all, the leader on that side falls back to the follower rule
    /// instead of detaching from the crowd.
    Natural,
}

impl Default for LeaderRule {
    fn default() -> Self {
        LeaderRule::Paper
    }
}

/// Ordered particle positions with their common gap mass.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystemState {
    time: f64,
    positions: Vec<f64>,
    m: f64,
    i0: Option<usize>,
}

impl ParticleSystemState {
    pub fn new(time: f64, positions: Vec<f64>, m: f64, p: &ModelParams) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::State("need at least two particles".into()));
        }
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::State(format!("gap mass {m} must be positive")));
        }
        let jam_gap = m / p.rho_max;
        for (i, w) in positions.windows(2).enumerate() {
            if !(w[1] - w[0] >= jam_gap - SPACING_TOL) {
                return Err(Error::State(format!(
                    "spacing {} between particles {} and {} below m/rho_max = {}",
                    w[1] - w[0],
                    i,
                    i + 1,
                    jam_gap
                )));
            }
        }
        let i0 = turning_index(&positions, p.alpha, m)?;
        Ok(Self {
            time,
            positions,
            m,
            i0,
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// Number of gaps N; the state carries N+1 particles.
    pub fn n(&self) -> usize {
        self.positions.len() - 1
    }

    /// Turning index cached at construction / last refresh.
    pub fn turning_index(&self) -> Option<usize> {
        self.i0
    }

    pub fn in_corridor_count(&self) -> usize {
        count_in_corridor(&self.positions)
    }

    /// Same particle configuration restamped at a different time.
    pub fn at_time(&self, time: f64) -> Self {
        Self { time, ..self.clone() }
    }
}

fn count_in_corridor(x: &[f64]) -> usize {
    x.iter().filter(|&&p| p > -1.0 && p < 1.0).count()
}

/// Splits the datum into N gaps of exactly equal mass m = M/N by inverting
/// the cumulative-mass function; the first particle sits at the infimum of
/// the support, the last at its supremum.
pub fn atomize(
    d: &PiecewiseConstantDensity,
    n: usize,
    p: &ModelParams,
) -> Result<ParticleSystemState> {
    if n < 2 {
        return Err(Error::Scenario(format!("particle parameter N = {n} < 2")));
    }
    let blocks = d.blocks();
    let total = d.total_mass();
    if blocks.is_empty() || total <= 0.0 {
        return Err(Error::Scenario("datum has zero mass".into()));
    }
    let m = total / n as f64;
    let masses: Vec<f64> = blocks.iter().map(|(l, r, v)| v * (r - l)).collect();

    let mut positions = Vec::with_capacity(n + 1);
    positions.push(blocks[0].0);
    let mut b = 0usize;
    let mut cum_before = 0.0;
    for i in 1..=n {
        let target = (i as f64 * m).min(total);
        while b + 1 < blocks.len() && cum_before + masses[b] < target {
            cum_before += masses[b];
            b += 1;
        }
        let (l, r, v) = blocks[b];
        positions.push((l + (target - cum_before) / v).min(r));
    }
    ParticleSystemState::new(0.0, positions, m, p)
}

/// Evaluates the right-hand side with the index frozen at `i0`. Velocities
/// are written into `out`; errors on a gap tighter than the jam spacing.
fn rhs_frozen(
    x: &[f64],
    m: f64,
    p: &ModelParams,
    i0: Option<usize>,
    rule: LeaderRule,
    out: &mut [f64],
) -> Result<()> {
    let n = x.len() - 1;
    let jam_gap = m / p.rho_max;
    let i0_num = i0.map_or(-1, |i| i as i64);

    let local_density = |gap: f64| -> Result<f64> {
        if gap < jam_gap - SPACING_TOL {
            return Err(Error::State(format!(
                "density overflow: gap {gap} below jam spacing {jam_gap}"
            )));
        }
        Ok(m / gap)
    };

    out[0] = -p.v_max;
    out[n] = p.v_max;
    for i in 1..n {
        if (i as i64) <= i0_num {
            let r = local_density(x[i] - x[i - 1])?;
            out[i] = -p.velocity_clamped(r);
        } else {
            let r = local_density(x[i + 1] - x[i])?;
            out[i] = p.velocity_clamped(r);
        }
    }
    if rule == LeaderRule::Natural {
        if i0_num < 0 {
            // No left-goers: the left leader joins the right-going crowd.
            out[0] = p.velocity_clamped(local_density(x[1] - x[0])?);
        }
        if i0_num >= n as i64 {
            // No right-goers: the right leader joins the left-going crowd.
            out[n] = -p.velocity_clamped(local_density(x[n] - x[n - 1])?);
        }
    }
    Ok(())
}

/// Particle velocities with the turning index recomputed from the current
/// positions.
pub fn rhs(state: &ParticleSystemState, p: &ModelParams, rule: LeaderRule) -> Result<Vec<f64>> {
    let i0 = turning_index(&state.positions, p.alpha, state.m)?;
    let mut out = vec![0.0; state.positions.len()];
    rhs_frozen(&state.positions, state.m, p, i0, rule, &mut out)?;
    Ok(out)
}

/// One recorded state of a run.
#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub t: f64,
    pub positions: Vec<f64>,
    pub i0: Option<usize>,
    pub xi: f64,
    pub turning_residual: f64,
    pub in_corridor: usize,
    pub min_spacing: f64,
}

/// Recorded run: samples, gap mass, and the evacuation time once detected.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub evacuation_time: Option<f64>,
    pub m: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    /// Outer step: index-refresh and recording cadence.
    pub dt: f64,
    pub t_end: f64,
    /// Record every this many outer steps (the initial and final states are
    /// always recorded).
    pub record_every: usize,
    pub rule: LeaderRule,
}

impl IntegrateOptions {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            record_every: 1,
            rule: LeaderRule::Paper,
        }
    }
}

/// Advances the system to `t_end` or until no particle remains strictly
/// inside the corridor, whichever comes first. Deterministic: identical
/// inputs give bit-identical trajectories.
pub fn integrate(
    state: &ParticleSystemState,
    p: &ModelParams,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    if !(opts.dt.is_finite() && opts.dt > 0.0) {
        return Err(Error::Usage(format!("dt = {} must be positive", opts.dt)));
    }
    if opts.record_every == 0 {
        return Err(Error::Usage("record_every must be >= 1".into()));
    }
    if opts.t_end <= state.time {
        return Err(Error::Usage(format!(
            "t_end = {} not after state time {}",
            opts.t_end, state.time
        )));
    }

    let m = state.m;
    let n_particles = state.positions.len();
    // Sub-step count keeping h * (v_max rho_max / m) <= 1, the monotonicity
    // bound for the stiffest admissible gap.
    let substeps = ((opts.dt * p.v_max * p.rho_max / m).ceil() as usize).max(1);

    let mut samples = Vec::new();
    let mut x = state.positions.clone();
    let mut x_prev = x.clone();
    let mut x_half = vec![0.0; n_particles];
    let mut k1 = vec![0.0; n_particles];
    let mut k2 = vec![0.0; n_particles];

    let record =
        |samples: &mut Vec<TrajectorySample>, t: f64, x: &[f64]| -> Result<()> {
            let ts = discrete_turning_point(x, m, p.alpha)?;
            let min_spacing = x
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min);
            samples.push(TrajectorySample {
                t,
                positions: x.to_vec(),
                i0: ts.index,
                xi: ts.xi,
                turning_residual: ts.residual,
                in_corridor: count_in_corridor(x),
                min_spacing,
            });
            Ok(())
        };

    record(&mut samples, state.time, &x)?;
    let mut evacuation_time = None;
    if count_in_corridor(&x) == 0 {
        return Ok(Trajectory {
            samples,
            evacuation_time: Some(state.time),
            m,
            n: n_particles - 1,
        });
    }

    let mut step: usize = 0;
    loop {
        let t_prev = state.time + step as f64 * opts.dt;
        let remaining = opts.t_end - t_prev;
        let dt_step = opts.dt.min(remaining);
        let t_now = if remaining <= opts.dt {
            opts.t_end
        } else {
            state.time + (step + 1) as f64 * opts.dt
        };

        let i0 = turning_index(&x, p.alpha, m)?;
        x_prev.copy_from_slice(&x);
        let h = dt_step / substeps as f64;
        for _ in 0..substeps {
            let res: Result<()> = (|| {
                rhs_frozen(&x, m, p, i0, opts.rule, &mut k1)?;
                for (xh, (&xi, &v)) in x_half.iter_mut().zip(x.iter().zip(k1.iter())) {
                    *xh = xi + 0.5 * h * v;
                }
                rhs_frozen(&x_half, m, p, i0, opts.rule, &mut k2)?;
                for (xi, &v) in x.iter_mut().zip(k2.iter()) {
                    *xi += h * v;
                }
                Ok(())
            })();
            if let Err(e) = res {
                return Err(Error::Integration {
                    time: t_prev,
                    step,
                    detail: e.to_string(),
                });
            }
        }
        if x.windows(2).any(|w| w[1] - w[0] < m / p.rho_max - SPACING_TOL) {
            return Err(Error::Integration {
                time: t_now,
                step,
                detail: "particle ordering/spacing violated".into(),
            });
        }
        step += 1;

        if count_in_corridor(&x) == 0 {
            evacuation_time = Some(refine_evacuation(&x_prev, &x, t_prev, t_now, opts.dt));
            record(&mut samples, t_now, &x)?;
            break;
        }
        if t_now >= opts.t_end {
            record(&mut samples, t_now, &x)?;
            break;
        }
        if step % opts.record_every == 0 {
            record(&mut samples, t_now, &x)?;
        }
    }

    Ok(Trajectory {
        samples,
        evacuation_time,
        m,
        n: n_particles - 1,
    })
}

/// Bisects the linear interpolant of the last step for the first instant at
/// which the corridor is empty; resolution dt/100.
fn refine_evacuation(x_prev: &[f64], x_now: &[f64], t_prev: f64, t_now: f64, dt: f64) -> f64 {
    let empty_at = |tau: f64| -> bool {
        let theta = (tau - t_prev) / (t_now - t_prev);
        x_prev
            .iter()
            .zip(x_now.iter())
            .all(|(&a, &b)| {
                let pos = a + theta * (b - a);
                !(pos > -1.0 && pos < 1.0)
            })
    };
    let (mut lo, mut hi) = (t_prev, t_now);
    while hi - lo > dt / 100.0 {
        let mid = 0.5 * (lo + hi);
        if empty_at(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The discrete density of a particle configuration: value m/(x_{i+1} - x_i)
/// on each gap, with the turning gap `i0` (and everything outside the
/// particle range) set to zero.
pub fn discrete_density(
    positions: &[f64],
    m: f64,
    i0: Option<usize>,
) -> PiecewiseConstantDensity {
    let blocks: Vec<(f64, f64, f64)> = positions
        .windows(2)
        .enumerate()
        .filter(|(i, _)| Some(*i) != i0)
        .map(|(_, w)| (w[0], w[1], m / (w[1] - w[0])))
        .collect();
    PiecewiseConstantDensity::new(&blocks).expect("ordered particles give disjoint gaps")
}

/// Discrete density of a live state, using its cached turning index.
pub fn reconstruct_density(state: &ParticleSystemState) -> PiecewiseConstantDensity {
    discrete_density(&state.positions, state.m, state.i0)
}

/// Discrete density of a recorded sample.
pub fn sample_density(sample: &TrajectorySample, m: f64) -> PiecewiseConstantDensity {
    discrete_density(&sample.positions, m, sample.i0)
}

/// First recorded time with an empty corridor (refined within the detection
/// step), or `None` if the horizon was reached first.
pub fn evacuation_time(traj: &Trajectory) -> Option<f64> {
    traj.evacuation_time
}

/// A particle path crossing the turning curve between two samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingEvent {
    pub particle: usize,
    pub time: f64,
}

/// Sign changes of x_i(t) - ξ(t) between consecutive samples, for particles
/// inside the corridor at both sample times.
pub fn detect_crossings(traj: &Trajectory) -> Vec<CrossingEvent> {
    let mut events = Vec::new();
    for pair in traj.samples.windows(2) {
        let (s0, s1) = (&pair[0], &pair[1]);
        for i in 0..s0.positions.len() {
            let (x0, x1) = (s0.positions[i], s1.positions[i]);
            let inside = |x: f64| x > -1.0 && x < 1.0;
            if !(inside(x0) && inside(x1)) {
                continue;
            }
            let d0 = x0 - s0.xi;
            let d1 = x1 - s1.xi;
            if d0 * d1 < 0.0 {
                let theta = d0 / (d0 - d1);
                events.push(CrossingEvent {
                    particle: i,
                    time: s0.t + theta * (s1.t - s0.t),
                });
            }
        }
    }
    events
}

/// Writes one row per sample: `t, x_0..x_N, I0, xi, in_corridor`, floats with
/// 17 significant digits. An absent turning index prints as -1.
pub fn write_trajectory<W: Write>(traj: &Trajectory, mut w: W) -> std::io::Result<()> {
    for s in &traj.samples {
        write!(w, "{:.16e}", s.t)?;
        for x in &s.positions {
            write!(w, ",{x:.16e}")?;
        }
        let i0 = s.i0.map_or(-1i64, |i| i as i64);
        writeln!(w, ",{i0},{:.16e},{}", s.xi, s.in_corridor)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::reference_datum;
    use proptest::prelude::*;

    fn params(alpha: f64) -> ModelParams {
        ModelParams::normalized(alpha)
    }

    #[test]
    fn atomize_uniform_block() {
        let d = PiecewiseConstantDensity::new(&[(-0.5, 0.5, 1.0)]).unwrap();
        let s = atomize(&d, 2, &params(1.0)).unwrap();
        let expect = [-0.5, 0.0, 0.5];
        for (a, b) in s.positions().iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn atomize_reference_datum_n4() {
        let s = atomize(&reference_datum(), 4, &params(1.0)).unwrap();
        let expect = [-1.0, -0.775, -0.55, -0.225, 0.0];
        for (a, b) in s.positions().iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12, "{:?}", s.positions());
        }
        assert!((s.m() - 0.2025).abs() < 1e-15);
    }

    #[test]
    fn atomize_reference_datum_n500() {
        let d = reference_datum();
        let s = atomize(&d, 500, &params(1.0)).unwrap();
        assert_eq!(s.positions().len(), 501);
        for w in s.positions().windows(2) {
            let mass = d.mass_on(w[0], w[1]);
            assert!((mass - 0.81 / 500.0).abs() < 1e-12);
        }
    }

    #[test]
    fn atomize_rejects_zero_mass() {
        let z = PiecewiseConstantDensity::zero();
        assert!(atomize(&z, 10, &params(1.0)).is_err());
        assert!(atomize(&reference_datum(), 1, &params(1.0)).is_err());
    }

    #[test]
    fn rhs_vacuum_limit() {
        let p = params(1.0);
        let s = ParticleSystemState::new(
            0.0,
            vec![-0.9, -0.6, -0.3],
            1e-4,
            &p,
        )
        .unwrap();
        // All particles left of xi with huge gaps: interior speed close to -v_max.
        let v = rhs(&s, &p, LeaderRule::Paper).unwrap();
        assert_eq!(v[0], -1.0);
        assert!((v[1] + 1.0).abs() < 1e-3);
    }

    #[test]
    fn rhs_jammed_follower_stops() {
        let p = params(1.0);
        let m = 0.25;
        // Spacing exactly m/rho_max on the left side: follower speed 0.
        let s = ParticleSystemState::new(0.0, vec![-0.75, -0.5, -0.25], m, &p).unwrap();
        let v = rhs(&s, &p, LeaderRule::Paper).unwrap();
        assert_eq!(v[1], 0.0);
    }

    #[test]
    fn rhs_mixed_directions() {
        let p = params(1.0);
        let s = ParticleSystemState::new(0.0, vec![-0.5, 0.2, 0.6], 0.2, &p).unwrap();
        assert_eq!(s.turning_index(), Some(0));
        let v = rhs(&s, &p, LeaderRule::Paper).unwrap();
        assert_eq!(v[0], -1.0);
        assert!((v[1] - 0.5).abs() < 1e-15);
        assert_eq!(v[2], 1.0);
    }

    #[test]
    fn integrate_already_evacuated() {
        let p = params(1.0);
        let s = ParticleSystemState::new(0.5, vec![-1.5, 1.2, 1.5], 0.1, &p).unwrap();
        let traj = integrate(&s, &p, &IntegrateOptions::new(0.01, 1.0)).unwrap();
        assert_eq!(traj.samples.len(), 1);
        assert_eq!(traj.evacuation_time, Some(0.5));
    }

    #[test]
    fn integrate_single_sided_block() {
        let p = params(0.0);
        let d = PiecewiseConstantDensity::new(&[(0.5, 0.6, 0.9)]).unwrap();
        let s = atomize(&d, 10, &p).unwrap();
        let opts = IntegrateOptions::new(0.004, 5.0);
        let traj = integrate(&s, &p, &opts).unwrap();
        // The right leader travels 0.4 at speed 1.
        let cross = traj
            .samples
            .iter()
            .find(|s| *s.positions.last().unwrap() >= 1.0)
            .map(|s| s.t)
            .unwrap();
        assert!((cross - 0.4).abs() <= 2.0 * opts.dt);
        // The printed system sends x_0 to the left exit: last out at t = 1.5.
        let t_mic = traj.evacuation_time.unwrap();
        assert!((t_mic - 1.5).abs() <= opts.dt, "t_mic = {t_mic}");
    }

    #[test]
    fn natural_rule_keeps_left_leader_with_crowd() {
        let p = params(0.0);
        let d = PiecewiseConstantDensity::new(&[(0.5, 0.6, 0.9)]).unwrap();
        let s = atomize(&d, 10, &p).unwrap();
        let mut opts = IntegrateOptions::new(0.004, 5.0);
        opts.rule = LeaderRule::Natural;
        let traj = integrate(&s, &p, &opts).unwrap();
        // Everyone exits right, well before the detached-leader time 1.5.
        assert!(traj.evacuation_time.unwrap() < 1.2);
    }

    #[test]
    fn reconstruct_density_examples() {
        let p = params(1.0);
        let s = ParticleSystemState::new(0.0, vec![-0.5, 0.2, 0.6], 0.2, &p).unwrap();
        let d = reconstruct_density(&s);
        // I0 = 0 zeroes the first gap.
        let blocks = d.blocks();
        assert_eq!(blocks.len(), 1);
        assert_eq!((blocks[0].0, blocks[0].1), (0.2, 0.6));
        assert!((blocks[0].2 - 0.5).abs() < 1e-14);
        assert!((d.total_mass() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn reconstruct_inverts_atomize_on_uniform_block() {
        let p = params(0.0);
        let d = PiecewiseConstantDensity::new(&[(0.2, 0.7, 1.0)]).unwrap();
        let s = atomize(&d, 2, &p).unwrap();
        // alpha = 0 and all mass right of 0: I0 = None, no gap zeroed.
        assert_eq!(s.turning_index(), None);
        let r = reconstruct_density(&s);
        assert!(r.l1_distance(&d) < 1e-12);
    }

    #[test]
    fn reconstructed_mass_counts_gaps() {
        let p = params(1.0);
        let d = reference_datum();
        let s = atomize(&d, 50, &p).unwrap();
        let interior = matches!(s.turning_index(), Some(i) if i < s.n());
        let expect = s.m() * (s.n() as f64 - if interior { 1.0 } else { 0.0 });
        assert!((reconstruct_density(&s).total_mass() - expect).abs() < 1e-12);
    }

    #[test]
    fn step_halving_consistency() {
        let d = reference_datum();
        for alpha in [1.0, 5.0, 12.7] {
            let p = params(alpha);
            let s = atomize(&d, 200, &p).unwrap();
            let t1 = integrate(&s, &p, &IntegrateOptions::new(0.004, EVACUATION_CAP))
                .unwrap()
                .evacuation_time
                .unwrap();
            let t2 = integrate(&s, &p, &IntegrateOptions::new(0.002, EVACUATION_CAP))
                .unwrap()
                .evacuation_time
                .unwrap();
            assert!(
                (t1 - t2).abs() <= 4.0 * 0.004,
                "alpha={alpha}: T({}) vs T({})",
                t1,
                t2
            );
        }
    }

    #[test]
    fn in_corridor_count_non_increasing() {
        let p = params(1.0);
        let s = atomize(&reference_datum(), 100, &p).unwrap();
        let traj = integrate(&s, &p, &IntegrateOptions::new(0.004, EVACUATION_CAP)).unwrap();
        for w in traj.samples.windows(2) {
            assert!(w[1].in_corridor <= w[0].in_corridor);
        }
        assert!(traj.evacuation_time.is_some());
    }

    #[test]
    fn mirror_symmetry_odd_gap_count() {
        let p = params(1.0);
        let d = PiecewiseConstantDensity::new(&[(-0.5, 0.5, 0.8)]).unwrap();
        let s = atomize(&d, 101, &p).unwrap();
        let traj = integrate(&s, &p, &IntegrateOptions::new(0.004, 0.8)).unwrap();
        for sample in &traj.samples {
            let n = sample.positions.len();
            for i in 0..n {
                let defect = (sample.positions[i] + sample.positions[n - 1 - i]).abs();
                assert!(defect < 1e-9, "t={}: defect {defect}", sample.t);
            }
            assert!(sample.xi.abs() < 1e-12);
        }
    }

    #[test]
    fn determinism_bitwise() {
        let p = params(12.7);
        let s = atomize(&reference_datum(), 100, &p).unwrap();
        let opts = IntegrateOptions::new(0.004, 1.0);
        let a = integrate(&s, &p, &opts).unwrap();
        let b = integrate(&s, &p, &opts).unwrap();
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        write_trajectory(&a, &mut buf_a).unwrap();
        write_trajectory(&b, &mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
    }

    #[test]
    fn crossings_empty_for_separated_blocks() {
        let p = params(1.0);
        let d =
            PiecewiseConstantDensity::new(&[(-1.0, -0.8, 0.9), (0.8, 1.0, 0.9)]).unwrap();
        let s = atomize(&d, 100, &p).unwrap();
        let traj = integrate(&s, &p, &IntegrateOptions::new(0.004, 0.5)).unwrap();
        assert!(detect_crossings(&traj).is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        // Mass between consecutive particles equals m exactly.
        #[test]
        fn atomization_partition_property(
            splits in proptest::collection::vec((0.0..1.0f64, 0.05..0.9f64), 1..4),
            n in 2..40usize,
        ) {
            let mut blocks = Vec::new();
            let mut cursor = -1.0f64;
            for (gap, v) in splits {
                let l = (cursor + gap * 0.3).min(0.9);
                let r = (l + 0.2).min(1.0);
                if r > l {
                    blocks.push((l, r, v));
                    cursor = r;
                }
            }
            let d = PiecewiseConstantDensity::new(&blocks).unwrap();
            prop_assume!(d.total_mass() > 0.0);
            let s = atomize(&d, n, &params(1.0)).unwrap();
            let m = s.m();
            for w in s.positions().windows(2) {
                prop_assert!((d.mass_on(w[0], w[1]) - m).abs() <= 1e-12);
            }
            let (lo, hi) = d.support().unwrap();
            prop_assert!((s.positions()[0] - lo).abs() <= 1e-12);
            prop_assert!((s.positions()[s.n()] - hi).abs() <= 1e-12);
        }

        // The discrete turning point stays within the slack band around the
        // turning gap (2 alpha m covers the zeroed gap, corridor clipping
        // and count-vs-mass quantization at the index particle).
        #[test]
        fn gap_slack_bound_random_states(
            seed_positions in proptest::collection::vec(-1.2..1.2f64, 3..30),
            alpha in 0.05..15.0f64,
        ) {
            let mut xs = seed_positions;
            xs.sort_by(f64::total_cmp);
            xs.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
            prop_assume!(xs.len() >= 3);
            let m = 0.05;
            let p = ModelParams::normalized(alpha);
            let state = ParticleSystemState::new(0.0, xs.clone(), m, &p);
            prop_assume!(state.is_ok());
            let ts = discrete_turning_point(&xs, m, alpha).unwrap();
            if let Some(i0) = ts.index {
                if i0 + 1 < xs.len() {
                    let (lo, hi) = (xs[i0], xs[i0 + 1]);
                    if lo > -1.0 && hi < 1.0 {
                        let slack = 2.0 * alpha * m;
                        prop_assert!(ts.xi >= lo - slack - 1e-12);
                        prop_assert!(ts.xi <= hi + slack + 1e-12);
                    }
                }
            }
        }
    }
}
