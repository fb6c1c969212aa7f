//! Scenario files: TOML with an explicit schema version.
//!
//! ```toml
//! schema_version = "1"
//! K = 5.0
//!
//! [demand]
//! N = 100.0
//! gamma = 10.0
//!
//! [[firms]]
//! c = 0.25
//!
//! [solver]            # optional
//! tolerance = 1e-8
//! max_iterations = 100000
//! damping = 0.5
//! seed = 7
//!
//! [quadruple]         # optional, used by `supermod`
//! firm = 1
//! own = [50.0, 50.2]
//! others_low = [0.0]
//! others_high = [1.0]
//! ```

use std::path::Path;

use pab_core::analysis::Quadruple;
use pab_core::{Demand, Scenario};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCENARIO_SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: String,
    #[serde(rename = "K")]
    pub k: f64,
    pub demand: DemandSpec,
    pub firms: Vec<FirmSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadruple: Option<QuadrupleSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSpec {
    #[serde(rename = "N")]
    pub intercept: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirmSpec {
    pub c: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub damping: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadrupleSpec {
    /// One-based firm index.
    pub firm: usize,
    pub own: [f64; 2],
    pub others_low: Vec<f64>,
    pub others_high: Vec<f64>,
}

impl QuadrupleSpec {
    pub fn to_quadruple(&self) -> Quadruple<f64> {
        Quadruple {
            own_low: self.own[0],
            own_high: self.own[1],
            others_low: self.others_low.clone(),
            others_high: self.others_high.clone(),
        }
    }
}

/// Scenario files shipped under `scenarios/`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    PaperK5,
    PaperK10,
    PaperK1000,
    Example1,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::PaperK5 => "paper_k5",
            Preset::PaperK10 => "paper_k10",
            Preset::PaperK1000 => "paper_k1000",
            Preset::Example1 => "example1",
        }
    }

    fn source(self) -> &'static str {
        match self {
            Preset::PaperK5 => include_str!("../../../scenarios/paper_k5.toml"),
            Preset::PaperK10 => include_str!("../../../scenarios/paper_k10.toml"),
            Preset::PaperK1000 => include_str!("../../../scenarios/paper_k1000.toml"),
            Preset::Example1 => include_str!("../../../scenarios/example1.toml"),
        }
    }

    pub fn load(self) -> CliResult<ScenarioFile> {
        ScenarioFile::parse(self.source(), self.name())
    }
}

impl ScenarioFile {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> CliResult<Self> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| CliError::Parse(format!("{origin}: {e}")))?;
        if file.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(CliError::Parse(format!(
                "{origin}: unsupported schema_version {:?}, expected {SCENARIO_SCHEMA_VERSION:?}",
                file.schema_version
            )));
        }
        file.to_scenario()?;
        Ok(file)
    }

    pub fn to_scenario(&self) -> CliResult<Scenario<f64>> {
        let demand = Demand::new(self.demand.intercept, self.demand.gamma)?;
        let costs: Vec<f64> = self.firms.iter().map(|f| f.c).collect();
        Scenario::from_costs(demand, &costs, self.k).map_err(|e| CliError::Validation(e.to_string()))
    }
}
