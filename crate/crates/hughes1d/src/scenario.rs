//! Scenario files: a versioned JSON schema carrying the model parameters,
//! the initial datum, the scheme settings, and (optionally) a one-parameter
//! datum family for perturbation sweeps. Unknown keys are rejected and every
//! module precondition is checked at load time, so a scenario that parses
//! and validates can be simulated.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::density::PiecewiseConstantDensity;
use crate::error::{Error, Result};
use crate::ftl::LeaderRule;
use crate::model::ModelParams;

pub const SCHEMA_VERSION: u32 = 1;

/// One-parameter datum families for perturbation sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatumFamily {
    /// datum(δ) = base datum translated by δ.
    Shift,
    /// datum(δ) = a block of the given value on (center - δ, center + δ),
    /// plus the fixed blocks.
    Widen {
        center: f64,
        value: f64,
        #[serde(default)]
        fixed: Vec<[f64; 3]>,
    },
}

fn default_record_every() -> usize {
    1
}

/// A complete experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub model: ModelParams,
    /// Initial datum as (left, right, value) blocks supported in [-1, 1].
    pub datum: Vec<[f64; 3]>,
    /// Optional perturbation family for delta sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<DatumFamily>,
    /// Gap count N; the scheme carries N + 1 particles.
    pub particles: usize,
    pub dt: f64,
    /// Simulation horizon; `None` runs until evacuated.
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default)]
    pub one_sided_leaders: LeaderRule,
    /// Cell width for the grid-oracle checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_dx: Option<f64>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Scenario(format!(
                "unsupported schema version {} (expected {})",
                self.schema_version, SCHEMA_VERSION
            )));
        }
        self.model.validate()?;
        let d = self.datum_density()?;
        d.check_initial_datum(self.model.rho_max)?;
        if self.particles < 2 {
            return Err(Error::Scenario(format!(
                "particles = {} must be at least 2",
                self.particles
            )));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Scenario(format!("dt = {} must be positive", self.dt)));
        }
        if let Some(t) = self.t_end {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::Scenario(format!("t_end = {t} must be positive")));
            }
        }
        if self.record_every == 0 {
            return Err(Error::Scenario("record_every must be >= 1".into()));
        }
        if let Some(dx) = self.oracle_dx {
            if !(dx.is_finite() && dx > 0.0) {
                return Err(Error::Scenario(format!("oracle_dx = {dx} must be positive")));
            }
        }
        Ok(())
    }

    pub fn datum_density(&self) -> Result<PiecewiseConstantDensity> {
        let blocks: Vec<(f64, f64, f64)> =
            self.datum.iter().map(|b| (b[0], b[1], b[2])).collect();
        PiecewiseConstantDensity::new(&blocks)
    }

    /// The perturbed datum for a delta-sweep point; requires a family.
    pub fn datum_for(&self, delta: f64) -> Result<PiecewiseConstantDensity> {
        let family = self
            .family
            .as_ref()
            .ok_or_else(|| Error::Usage("scenario declares no datum family".into()))?;
        let d = match family {
            DatumFamily::Shift => self.datum_density()?.shift(delta),
            DatumFamily::Widen {
                center,
                value,
                fixed,
            } => {
                let mut blocks = vec![(center - delta, center + delta, *value)];
                blocks.extend(fixed.iter().map(|b| (b[0], b[1], b[2])));
                PiecewiseConstantDensity::new(&blocks)?
            }
        };
        d.check_initial_datum(self.model.rho_max)?;
        Ok(d)
    }

    /// Effective horizon: the configured one, or the evacuation cap.
    pub fn horizon(&self) -> f64 {
        self.t_end.unwrap_or(crate::ftl::EVACUATION_CAP)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_json_string())?)
    }
}

/// Two 0.9 blocks left of the centre with a 0.1 vacuum gap; the reference
/// datum of the evacuation-time studies.
pub fn num_in_con() -> Scenario {
    Scenario {
        schema_version: SCHEMA_VERSION,
        model: ModelParams::normalized(1.0),
        datum: vec![[-1.0, -0.5, 0.9], [-0.4, 0.0, 0.9]],
        family: None,
        particles: 500,
        dt: 0.004,
        t_end: None,
        record_every: 1,
        one_sided_leaders: LeaderRule::Paper,
        oracle_dx: None,
    }
}

/// The reference datum as a shift family: datum(δ) translated right by δ.
pub fn num_in_con_2() -> Scenario {
    Scenario {
        family: Some(DatumFamily::Shift),
        ..num_in_con()
    }
}

/// A block widening symmetrically about -0.5 plus a fixed block hugging the
/// right exit, at the high cost slope where the evacuation time jumps.
pub fn num_in_con_4() -> Scenario {
    Scenario {
        model: ModelParams::normalized(12.7),
        datum: vec![[0.75, 1.0, 0.9]],
        family: Some(DatumFamily::Widen {
            center: -0.5,
            value: 0.9,
            fixed: vec![[0.75, 1.0, 0.9]],
        }),
        ..num_in_con()
    }
}

/// Two blocks hugging opposite exits: mass never approaches the turning
/// point, the validation regime for the stability and convergence checks.
pub fn well_separated() -> Scenario {
    Scenario {
        datum: vec![[-1.0, -0.8, 0.9], [0.8, 1.0, 0.9]],
        t_end: Some(1.0),
        oracle_dx: Some(1.0 / 800.0),
        ..num_in_con()
    }
}

/// Asymmetric subcritical variant of the well-separated scenario. Densities
/// below the flux maximizer drain freely, so the exit traces equal the block
/// values and the turning point drifts at a sustained nonzero speed; this is
/// the non-degenerate setting for the turning-curve velocity check. (Blocks
/// hugging an exit at supercritical density all drain at the same sonic
/// trace, which makes the velocity formula identically zero by balance.)
pub fn well_separated_drift() -> Scenario {
    Scenario {
        datum: vec![[-1.0, -0.8, 0.4], [0.75, 1.0, 0.2]],
        t_end: Some(0.3),
        oracle_dx: Some(1.0 / 800.0),
        ..num_in_con()
    }
}

/// All configurations shipped with the repository, with their file stems.
pub fn bundled() -> Vec<(&'static str, Scenario)> {
    vec![
        ("num_in_con", num_in_con()),
        ("num_in_con_2", num_in_con_2()),
        ("num_in_con_4", num_in_con_4()),
        ("well_separated", well_separated()),
        ("well_separated_drift", well_separated_drift()),
    ]
}
