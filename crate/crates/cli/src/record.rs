//! Machine-readable result records (JSON, full precision).

use std::collections::BTreeMap;

use pab_core::analysis::{IncreasingDifferencesReport, KSweepRow};
use pab_core::equilibrium::MultiStartReport;
use pab_core::{EquilibriumResult, KinkedOffer, NashCertificate, SupplyCurve, UtilityBreakdown};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::scenario::ScenarioFile;

pub const RECORD_SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: String,
    pub command: String,
    pub inputs: Inputs,
    pub outputs: Outputs,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    /// Scenario file name or preset name.
    pub source: String,
    pub scenario: ScenarioFile,
    pub args: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outputs {
    Clear {
        breakpoints: Vec<f64>,
        clearing_price: f64,
        quantities: Vec<f64>,
        utilities: Vec<f64>,
        total_supply: f64,
        demand_at_price: f64,
    },
    Solve {
        equilibrium: EquilibriumResult<f64>,
        certificate: NashCertificate<f64>,
        multi_start: Option<MultiStartReport<f64>>,
    },
    Sweep {
        rows: Vec<KSweepRow<f64>>,
        table_path: String,
    },
    Supermod {
        firm: usize,
        report: IncreasingDifferencesReport<f64>,
        regime_filtered: bool,
    },
    Verify {
        breakpoints: Vec<f64>,
        clearing_price: f64,
        utilities: Vec<f64>,
        certificate: NashCertificate<f64>,
    },
    Dominate {
        firm: usize,
        clearing_price: f64,
        original: UtilityBreakdown<f64>,
        original_integral: f64,
        transformed: TransformedCurve,
        kinked: Option<KinkedAlternative>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformedCurve {
    pub curve: SupplyCurve<f64>,
    pub integral: f64,
    pub utility: UtilityBreakdown<f64>,
    pub clearing_price_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinkedAlternative {
    pub offer: KinkedOffer<f64>,
    pub utility: UtilityBreakdown<f64>,
    pub clearing_price_after: f64,
}

impl ResultRecord {
    pub fn new(command: &str, inputs: Inputs, outputs: Outputs, diagnostics: Vec<String>) -> Self {
        Self {
            schema_version: RECORD_SCHEMA_VERSION.to_string(),
            command: command.to_string(),
            inputs,
            outputs,
            diagnostics,
        }
    }

    /// Serializes and checks that the text parses back to an equal record,
    /// which also rejects non-finite numbers (JSON writes them as `null`).
    pub fn to_json(&self) -> CliResult<String> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Domain(format!("cannot serialize record: {e}")))?;
        match serde_json::from_str::<ResultRecord>(&text) {
            Ok(back) if back == *self => Ok(text),
            Ok(_) => Err(CliError::Domain("record does not round-trip".into())),
            Err(e) => Err(CliError::Domain(format!("record contains non-finite values: {e}"))),
        }
    }
}
