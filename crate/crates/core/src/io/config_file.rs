//! TOML configuration: simulation scenario, band plan and analysis options.
//!
//! Every field is optional; omitted fields take the reference operating
//! point (312.5 MS/s, 40·10⁶ samples, four-decade band plan, cross
//! estimator, uncapped gain).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{format_err, io_err};
use crate::band::BandPlan;
use crate::error::{CoshError, Result};
use crate::psd::{Estimator, Window};
use crate::synth::SimulationScenario;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    CONFIG_SCHEMA_VERSION
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub estimator: Estimator,
    pub window: Window,
    /// Upper bound on the delay-line processing gain; `None` leaves nulls
    /// uncapped and flags them as spurs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain_cap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub scenario: SimulationScenario,
    #[serde(default = "BandPlan::reference")]
    pub band_plan: BandPlan,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

impl Default for ConfigFile {
    fn default() -> Self {
        ConfigFile {
            schema_version: CONFIG_SCHEMA_VERSION,
            scenario: SimulationScenario::default(),
            band_plan: BandPlan::reference(),
            analysis: AnalysisSection::default(),
        }
    }
}

impl ConfigFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ConfigFile = toml::from_str(text).map_err(|e| CoshError::config(e.to_string()))?;
        if cfg.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(CoshError::config(format!(
                "unsupported schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CoshError::config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.band_plan.validate()?;
        if let Some(c) = self.analysis.gain_cap {
            if !(c > 0.0 && c.is_finite()) {
                return Err(CoshError::config("gain_cap must be > 0"));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml_str(&text).map_err(|e| format_err(path, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml_string()?).map_err(io_err(path))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BandPlanFile {
    #[serde(default = "schema_version")]
    schema_version: u32,
    #[serde(flatten)]
    plan: BandPlan,
}

/// Resolves `builtin:paper` or loads a TOML band plan (`[[bands]]` tables
/// with `f_lo_hz`, `f_hi_hz`, `rbw_hz`, plus optional `trim_fraction`).
pub fn load_band_plan(spec: &str) -> Result<BandPlan> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        return match name {
            "paper" => Ok(BandPlan::reference()),
            other => Err(CoshError::usage(format!(
                "unknown builtin band plan '{other}' (available: paper)"
            ))),
        };
    }
    let path = Path::new(spec);
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let file: BandPlanFile = toml::from_str(&text).map_err(|e| format_err(path, e.to_string()))?;
    if file.schema_version != CONFIG_SCHEMA_VERSION {
        return Err(format_err(
            path,
            format!("unsupported schema_version {}", file.schema_version),
        ));
    }
    file.plan.validate().map_err(|e| format_err(path, e.to_string()))?;
    Ok(file.plan)
}
