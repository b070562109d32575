//! Run configuration: a TOML document with sections `scenario`, `prior`,
//! `sdp`, `dddp`, `ddp` and `mpc`.
//!
//! ```toml
//! [scenario]
//! preset = 1          # optional; start from a reference scenario
//! x0 = 0.0
//! v0 = 5.0
//! escape = "energy_only"
//!
//! [scenario.bounds]
//! x_max = 150.0
//!
//! [prior]
//! distribution = "uniform"
//! k_min = 10
//! k_max = 30
//!
//! [dddp]
//! delta0 = 0.5
//! corridor = [20.0, 4.0]
//! ```
//!
//! Without a preset every scenario field must be given.

use std::path::Path;

use glosa_core::dddp::DddpParams;
use glosa_core::ddp::DdpParams;
use glosa_core::model::{Bounds, EscapeConvention};
use glosa_core::{Scenario, SwitchingPrior};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Sdp,
    Dddp,
    Ddp,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Sdp => "sdp",
            SolverKind::Dddp => "dddp",
            SolverKind::Ddp => "ddp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdpSettings {
    /// Acceleration step of the full grid.
    pub delta: f64,
    /// Stage whose value/policy slice is exported with the run.
    pub export_stage: Option<usize>,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self {
            delta: 0.125,
            export_stage: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcSettings {
    pub seed: u64,
    /// Number of consecutive seeds in a batch run.
    pub runs: usize,
    /// Re-solve at every step from the current state.
    pub resolve: bool,
}

impl Default for MpcSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            runs: 1,
            resolve: false,
        }
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub scenario_id: Option<usize>,
    pub scenario: Scenario,
    pub sdp: SdpSettings,
    pub dddp: DddpParams,
    pub ddp: DdpParams,
    pub mpc: MpcSettings,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    scenario: ScenarioSection,
    prior: Option<PriorSection>,
    #[serde(default)]
    sdp: SdpSettings,
    #[serde(default)]
    dddp: DddpParams,
    #[serde(default)]
    ddp: DdpParams,
    #[serde(default)]
    mpc: MpcSettings,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    preset: Option<usize>,
    x0: Option<f64>,
    v0: Option<f64>,
    xe: Option<f64>,
    ve: Option<f64>,
    x1: Option<f64>,
    w: Option<f64>,
    dt: Option<f64>,
    escape: Option<EscapeConvention>,
    #[serde(default)]
    bounds: BoundsSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsSection {
    x_min: Option<f64>,
    x_max: Option<f64>,
    v_min: Option<f64>,
    v_max: Option<f64>,
    a_min: Option<f64>,
    a_max: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "distribution", rename_all = "lowercase", deny_unknown_fields)]
enum PriorSection {
    Uniform { k_min: usize, k_max: usize },
    Explicit { k_min: usize, probabilities: Vec<f64> },
}

fn pick(value: Option<f64>, base: Option<f64>, name: &str) -> Result<f64, HarnessError> {
    value
        .or(base)
        .ok_or_else(|| HarnessError::Config(format!("missing field `{name}` in [scenario]")))
}

impl Config {
    /// Reference scenario `id` with default solver settings.
    pub fn preset(id: usize) -> Result<Self, HarnessError> {
        let scenario = Scenario::reference_set(id)
            .ok_or_else(|| HarnessError::Config(format!("unknown scenario preset {id}")))?;
        Ok(Self {
            scenario_id: Some(id),
            scenario,
            sdp: SdpSettings::default(),
            dddp: DddpParams::default(),
            ddp: DdpParams::default(),
            mpc: MpcSettings::default(),
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let sc = file.scenario;
        let base = match sc.preset {
            Some(id) => Some(
                Scenario::reference_set(id)
                    .ok_or_else(|| HarnessError::Config(format!("unknown scenario preset {id}")))?,
            ),
            None => None,
        };
        let b = base.as_ref();
        let bb = b.map(|s| s.bounds);
        let bounds = Bounds {
            x_min: pick(sc.bounds.x_min, bb.map(|b| b.x_min), "bounds.x_min")?,
            x_max: pick(sc.bounds.x_max, bb.map(|b| b.x_max), "bounds.x_max")?,
            v_min: pick(sc.bounds.v_min, bb.map(|b| b.v_min), "bounds.v_min")?,
            v_max: pick(sc.bounds.v_max, bb.map(|b| b.v_max), "bounds.v_max")?,
            a_min: pick(sc.bounds.a_min, bb.map(|b| b.a_min), "bounds.a_min")?,
            a_max: pick(sc.bounds.a_max, bb.map(|b| b.a_max), "bounds.a_max")?,
        };
        let prior = match file.prior {
            Some(PriorSection::Uniform { k_min, k_max }) => SwitchingPrior::uniform(k_min, k_max),
            Some(PriorSection::Explicit { k_min, probabilities }) => SwitchingPrior::explicit(k_min, probabilities),
            None => b
                .map(|s| s.prior.clone())
                .ok_or_else(|| glosa_core::GlosaError::InvalidPrior("missing [prior] section".into())),
        }
        .map_err(|e| HarnessError::Config(e.to_string()))?;
        let scenario = Scenario {
            x0: pick(sc.x0, b.map(|s| s.x0), "x0")?,
            v0: pick(sc.v0, b.map(|s| s.v0), "v0")?,
            xe: pick(sc.xe, b.map(|s| s.xe), "xe")?,
            ve: pick(sc.ve, b.map(|s| s.ve), "ve")?,
            x1: pick(sc.x1, b.map(|s| s.x1), "x1")?,
            w: pick(sc.w, b.map(|s| s.w), "w")?,
            dt: pick(sc.dt, b.map(|s| s.dt), "dt")?,
            bounds,
            prior,
            escape: sc.escape.or(b.map(|s| s.escape)).unwrap_or_default(),
        };
        let config = Self {
            scenario_id: sc.preset,
            scenario,
            sdp: file.sdp,
            dddp: file.dddp,
            ddp: file.ddp,
            mpc: file.mpc,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let violations = self.scenario.violations();
        if !violations.is_empty() {
            let msg = violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
            return Err(HarnessError::Config(msg));
        }
        self.dddp.validate().map_err(|e| HarnessError::Config(format!("[dddp] {e}")))?;
        self.ddp.validate().map_err(|e| HarnessError::Config(format!("[ddp] {e}")))?;
        if !(self.sdp.delta > 0.0) {
            return Err(HarnessError::Config("[sdp] delta must be positive".into()));
        }
        Ok(())
    }
}
