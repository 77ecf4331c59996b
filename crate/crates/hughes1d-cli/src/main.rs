//! Command-line front end: scenario validation, single runs, evacuation-time
//! sweeps, and the quantitative checks. Exit codes: 0 success (or a check
//! explicitly out of theorem scope), 1 usage/parse problems, 2 numerical
//! failures.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use hughes1d::entropy::{entropy_residual, SpaceTimeWindow, ENTROPY_TOL_FACTOR};
use hughes1d::error::Error;
use hughes1d::experiments::{
    certify_well_separated, cross_scheme_convergence, detect_jumps, dotxi_check,
    restart_consistency, stability_ratio, sweep_alpha, sweep_delta, StabilityScope, SweepRecord,
};
use hughes1d::ftl::{atomize, detect_crossings, integrate, write_trajectory, IntegrateOptions};
use hughes1d::godunov::solve;
use hughes1d::model::validate_model;
use hughes1d::scenario::Scenario;

#[derive(Parser)]
#[command(name = "hughes1d", version, about = "1D Hughes evacuation simulator")]
struct Cli {
    /// Assert determinism: the pipeline uses no randomness anywhere.
    #[arg(long, global = true)]
    seedless: bool,
    /// Cap on concurrent sweep jobs (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a scenario and check every model assumption and datum invariant.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Run one simulation; write the trajectory table and a JSON summary.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Trajectory output: one row per sample, `t,x_0..x_N,I0,xi,count`.
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON summary path.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        particles: Option<usize>,
    },
    /// Evacuation-time sweep over alpha or the datum perturbation delta.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        step: f64,
        /// CSV output with header `param,T_mic,crossings,evacuated`.
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON summary (config echo, records, detected jumps).
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        particles: Option<usize>,
    },
    /// Run one of the quantitative checks on a scenario.
    Check {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        kind: CheckKind,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        particles: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepParam {
    Alpha,
    Delta,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckKind {
    Dotxi,
    Stability,
    Restart,
    Convergence,
    Entropy,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
        {
            eprintln!("error: could not configure {jobs} jobs: {e}");
            std::process::exit(1);
        }
    }
    if cli.seedless {
        println!("seedless: no randomness anywhere in the pipeline; runs are bit-reproducible");
    }
    let code = match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                1
            } else {
                2
            }
        }
    };
    std::process::exit(code);
}

fn load(path: &PathBuf, dt: Option<f64>, particles: Option<usize>) -> Result<Scenario, Error> {
    let mut s = Scenario::load(path)?;
    if let Some(dt) = dt {
        s.dt = dt;
    }
    if let Some(n) = particles {
        s.particles = n;
    }
    s.validate()?;
    Ok(s)
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Validate { scenario } => cmd_validate(&scenario),
        Command::Simulate {
            scenario,
            out,
            summary,
            dt,
            particles,
        } => cmd_simulate(&load(&scenario, dt, particles)?, &out, summary.as_deref()),
        Command::Sweep {
            scenario,
            param,
            from,
            to,
            step,
            out,
            summary,
            dt,
            particles,
        } => cmd_sweep(
            &load(&scenario, dt, particles)?,
            param,
            from,
            to,
            step,
            &out,
            summary.as_deref(),
        ),
        Command::Check {
            scenario,
            kind,
            dt,
            particles,
        } => cmd_check(&load(&scenario, dt, particles)?, kind),
    }
}

fn cmd_validate(path: &PathBuf) -> Result<(), Error> {
    let s = Scenario::load(path)?;
    let report = validate_model(&s.model);
    let mut all = true;
    for c in &report.checks {
        println!("{} {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        all &= c.passed;
    }
    let d = s.datum_density()?;
    println!(
        "PASS datum: {} block(s), mass {}, support in corridor, values within [0, rho_max]",
        d.blocks().len(),
        d.total_mass()
    );
    println!("scenario ok: N = {}, dt = {}", s.particles, s.dt);
    if all {
        Ok(())
    } else {
        Err(Error::Scenario("model assumption check failed".into()))
    }
}

fn cmd_simulate(
    s: &Scenario,
    out: &PathBuf,
    summary: Option<&std::path::Path>,
) -> Result<(), Error> {
    let datum = s.datum_density()?;
    let state = atomize(&datum, s.particles, &s.model)?;
    let mut opts = IntegrateOptions::new(s.dt, s.horizon());
    opts.record_every = s.record_every;
    opts.rule = s.one_sided_leaders;
    let traj = integrate(&state, &s.model, &opts)?;

    let file = File::create(out)?;
    write_trajectory(&traj, BufWriter::new(file))?;

    let crossings = detect_crossings(&traj);
    let last = traj.samples.last().expect("at least one sample");
    match traj.evacuation_time {
        Some(t) => println!("T_mic = {t}"),
        None => println!("not evacuated by t = {}", last.t),
    }
    println!("crossings = {}, final xi = {}", crossings.len(), last.xi);
    if let Some(path) = summary {
        let doc = json!({
            "scenario": serde_json::to_value(s)?,
            "t_mic": traj.evacuation_time,
            "evacuated": traj.evacuation_time.is_some(),
            "crossings": crossings.len(),
            "final_xi": last.xi,
            "final_time": last.t,
            "samples": traj.samples.len(),
        });
        std::fs::write(path, format!("{:#}\n", doc))?;
    }
    Ok(())
}

fn grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>, Error> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Usage(format!("step = {step} must be positive")));
    }
    if to < from {
        return Err(Error::Usage(format!("empty range [{from}, {to}]")));
    }
    let count = ((to - from) / step).round() as usize;
    Ok((0..=count).map(|k| from + k as f64 * step).collect())
}

fn cmd_sweep(
    s: &Scenario,
    param: SweepParam,
    from: f64,
    to: f64,
    step: f64,
    out: &PathBuf,
    summary: Option<&std::path::Path>,
) -> Result<(), Error> {
    let values = grid(from, to, step)?;
    let records = match param {
        SweepParam::Alpha => {
            let datum = s.datum_density()?;
            sweep_alpha(
                &datum,
                &s.model,
                &values,
                s.particles,
                s.dt,
                s.one_sided_leaders,
            )
        }
        SweepParam::Delta => sweep_delta(
            |delta| s.datum_for(delta),
            &values,
            &s.model,
            s.particles,
            s.dt,
            s.one_sided_leaders,
        ),
    };

    let file = File::create(out)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "param,T_mic,crossings,evacuated")?;
    for r in &records {
        let t = r.t_mic.map(|t| t.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{}", r.param, t, r.crossings, r.t_mic.is_some())?;
    }
    w.flush()?;

    let jumps = detect_jumps(&records);
    println!("{} points, {} jump(s) detected", records.len(), jumps.len());
    for j in &jumps {
        println!(
            "jump at param {} (pair {} -> {}): |dT| = {:.6} > {:.6}",
            j.position, j.param_lo, j.param_hi, j.delta, j.threshold
        );
    }
    for r in records.iter().filter(|r| r.error.is_some()) {
        println!("point {} failed: {}", r.param, r.error.as_ref().unwrap());
    }
    if let Some(path) = summary {
        let doc = json!({
            "scenario": serde_json::to_value(s)?,
            "param": match param { SweepParam::Alpha => "alpha", SweepParam::Delta => "delta" },
            "range": {"from": from, "to": to, "step": step},
            "records": records.iter().map(record_json).collect::<Vec<_>>(),
            "jumps": jumps.iter().map(|j| json!({
                "position": j.position,
                "param_lo": j.param_lo,
                "param_hi": j.param_hi,
                "delta": j.delta,
                "threshold": j.threshold,
            })).collect::<Vec<_>>(),
        });
        std::fs::write(path, format!("{:#}\n", doc))?;
    }
    Ok(())
}

fn record_json(r: &SweepRecord) -> serde_json::Value {
    json!({
        "param": r.param,
        "t_mic": r.t_mic,
        "crossings": r.crossings,
        "max_turning_residual": r.max_turning_residual,
        "min_spacing": r.min_spacing,
        "wall_secs": r.wall_secs,
        "error": r.error,
    })
}

fn cmd_check(s: &Scenario, kind: CheckKind) -> Result<(), Error> {
    let datum = s.datum_density()?;
    let p = &s.model;
    let n = s.particles;
    match kind {
        CheckKind::Dotxi => {
            let horizon = s.t_end.unwrap_or(1.0);
            let report = dotxi_check(&datum, p, n, s.dt, horizon)?;
            if !report.certificate.ok {
                println!(
                    "OUT OF SCOPE: scenario not well-separated ({} crossings, min gap {:.3e})",
                    report.certificate.crossings, report.certificate.min_gap_to_turning
                );
                return Ok(());
            }
            println!(
                "max |d(xi)/dt - formula| = {:.6e} over {} samples",
                report.max_deviation, report.samples_used
            );
            if report.max_deviation <= 5e-2 {
                println!("PASS (tolerance 5e-2)");
                Ok(())
            } else {
                Err(Error::Step(format!(
                    "turning-curve velocity deviation {} exceeds 5e-2",
                    report.max_deviation
                )))
            }
        }
        CheckKind::Stability => {
            let t_eval = s.t_end.unwrap_or(0.1);
            let p2 = p.with_alpha(p.alpha + 0.01);
            let mut ratios = Vec::new();
            for factor in [1, 2] {
                let report = stability_ratio(&datum, p, &datum, &p2, n * factor, s.dt, t_eval)?;
                match report.scope {
                    StabilityScope::OutOfScope(why) => {
                        println!("OUT OF SCOPE: {why}");
                        return Ok(());
                    }
                    _ => {
                        let ratio = report.ratio.unwrap_or(0.0);
                        println!(
                            "N = {}: ratio = {:.6e} (numerator {:.3e}, denominator {:.3e})",
                            n * factor,
                            ratio,
                            report.numerator,
                            report.denominator
                        );
                        ratios.push(ratio);
                    }
                }
            }
            if ratios[1] <= 2.0 * ratios[0] || ratios[1] <= 1e-12 {
                println!("PASS (bounded under refinement)");
                Ok(())
            } else {
                Err(Error::Step(format!(
                    "stability ratio grew more than 2x under refinement: {} -> {}",
                    ratios[0], ratios[1]
                )))
            }
        }
        CheckKind::Restart => {
            let t_eval = s.t_end.unwrap_or(0.5);
            let t0 = 0.4 * t_eval;
            let mut errs = Vec::new();
            for factor in [1, 2, 4] {
                let err = restart_consistency(&datum, p, n / 2 * factor, s.dt, t0, t_eval)?;
                println!("N = {}: restart L1 difference = {:.6e}", n / 2 * factor, err);
                errs.push(err);
            }
            if errs.windows(2).all(|w| w[1] < w[0]) {
                println!("PASS (decreasing under refinement)");
                Ok(())
            } else {
                Err(Error::Step(format!(
                    "restart differences not decreasing: {errs:?}"
                )))
            }
        }
        CheckKind::Convergence => {
            let t_eval = s.t_end.unwrap_or(0.3).min(0.5);
            let dx = s.oracle_dx.unwrap_or(1.0 / 800.0);
            let state = atomize(&datum, n, p)?;
            let traj = integrate(&state, p, &IntegrateOptions::new(s.dt, t_eval))?;
            let cert = certify_well_separated(&traj, p);
            if !cert.ok {
                println!(
                    "OUT OF SCOPE: scenario not well-separated ({} crossings)",
                    cert.crossings
                );
                return Ok(());
            }
            let table =
                cross_scheme_convergence(&datum, p, t_eval, &[n / 4, n / 2, n], dx)?;
            for (n_i, err) in &table.rows {
                println!("N = {n_i}: L1 distance to grid oracle = {err:.6e}");
            }
            if table.strictly_decreasing {
                println!("PASS (strictly decreasing in N at dx = {dx})");
                Ok(())
            } else {
                Err(Error::Step("cross-scheme distances not decreasing".into()))
            }
        }
        CheckKind::Entropy => {
            let t_end = s.t_end.unwrap_or(0.25).min(0.5);
            let dx = s.oracle_dx.unwrap_or(1.0 / 400.0);
            let snaps: Vec<f64> = (0..=160).map(|k| t_end * k as f64 / 160.0).collect();
            let out = solve(&datum, p, t_end, dx, &snaps)?;
            let xi_lo = out
                .xi_series
                .iter()
                .map(|&(_, x)| x)
                .fold(f64::INFINITY, f64::min);
            let xi_hi = out
                .xi_series
                .iter()
                .map(|&(_, x)| x)
                .fold(f64::NEG_INFINITY, f64::max);
            let mut windows = Vec::new();
            if xi_lo - 0.05 - (-0.95) >= 0.2 {
                windows.push(SpaceTimeWindow::new(0.2 * t_end, 0.8 * t_end, -0.95, xi_lo - 0.05)?);
            }
            if 0.95 - (xi_hi + 0.05) >= 0.2 {
                windows.push(SpaceTimeWindow::new(0.2 * t_end, 0.8 * t_end, xi_hi + 0.05, 0.95)?);
            }
            if windows.is_empty() {
                return Err(Error::Usage(
                    "no corridor window clear of the turning curve".into(),
                ));
            }
            let mut worst: f64 = f64::NEG_INFINITY;
            for w in &windows {
                for kappa in [0.25, 0.5, 0.75] {
                    let r = entropy_residual(&out, p, kappa * p.rho_max, w)?;
                    println!(
                        "window x in [{:.3}, {:.3}], kappa = {:.2}: residual = {:+.6e}",
                        w.x0,
                        w.x1,
                        kappa * p.rho_max,
                        r
                    );
                    worst = worst.max(r);
                }
            }
            let tol = ENTROPY_TOL_FACTOR * dx;
            if worst <= tol {
                println!("PASS (residuals within {tol:.3e})");
                Ok(())
            } else {
                Err(Error::Step(format!(
                    "entropy residual {worst} exceeds {tol}"
                )))
            }
        }
    }
}
