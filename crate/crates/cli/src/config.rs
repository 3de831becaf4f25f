//! Experiment config and results files. Both are TOML, or JSON when the file
//! name ends in `.json`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use decision_gate::decision_engine::MetricSpec;
use decision_gate::design_corrections::{CorrectionKind, CorrectionPolicy, Correlations};
use decision_gate::sequential_gst::SpendingFunction;
use decision_gate::{CorrelationMatrix, RiskBudget};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfigFile {
    pub metrics: Vec<MetricSpec>,
    pub budget: BudgetSection,
    pub policy: PolicySection,
    #[serde(default)]
    pub sequential: Option<SequentialSection>,
    #[serde(default)]
    pub correlations: Option<CorrelationSection>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    pub alpha: f64,
    pub alpha_minus: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub correction: CorrectionKind,
    #[serde(default)]
    pub nyholt: bool,
    #[serde(default)]
    pub guardrail_overpowered: bool,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequentialSection {
    pub k_looks: usize,
    #[serde(default)]
    pub spending: SpendingFunction,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationSection {
    pub ids: Vec<String>,
    pub matrix: CorrelationMatrix,
}

impl ExperimentConfigFile {
    pub fn budget(&self) -> RiskBudget {
        RiskBudget::new(self.budget.alpha, self.budget.alpha_minus, self.budget.beta)
    }

    pub fn policy(&self) -> CorrectionPolicy {
        CorrectionPolicy {
            kind: self.policy.correction,
            nyholt: self.policy.nyholt,
            guardrail_overpowered: self.policy.guardrail_overpowered,
        }
    }

    pub fn correlations(&self) -> Result<Option<Correlations>, CliError> {
        self.correlations
            .as_ref()
            .map(|c| Correlations::new(c.ids.clone(), c.matrix.clone()).map_err(CliError::from))
            .transpose()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultsFile {
    #[serde(default)]
    pub metrics: Vec<MetricResult>,
    #[serde(default)]
    pub quality: QualityResults,
}

/// Observed treatment minus control difference in the metric's own units.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricResult {
    pub id: String,
    pub estimate: f64,
    pub std_error: f64,
    pub n_treatment: u64,
    pub n_control: u64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityResults {
    #[serde(default)]
    pub srm: Option<SrmCounts>,
    #[serde(default)]
    pub external_quality_pvalues: Vec<ExternalPValue>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SrmCounts {
    pub treatment_count: u64,
    pub control_count: u64,
    #[serde(default = "even_split")]
    pub planned_ratio: f64,
}

fn even_split() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalPValue {
    pub id: String,
    pub p_value: f64,
}

impl ResultsFile {
    /// Metric results by id; duplicates are an input error.
    pub fn metrics_by_id(&self) -> Result<BTreeMap<&str, &MetricResult>, CliError> {
        let mut out = BTreeMap::new();
        for m in &self.metrics {
            if out.insert(m.id.as_str(), m).is_some() {
                return Err(CliError::Input(format!(
                    "metric {} appears more than once in results",
                    m.id
                )));
            }
        }
        Ok(out)
    }

    pub fn pvalues_by_id(&self) -> Result<BTreeMap<&str, f64>, CliError> {
        let mut out = BTreeMap::new();
        let mut seen = BTreeSet::new();
        for p in &self.quality.external_quality_pvalues {
            if !seen.insert(p.id.as_str()) {
                return Err(CliError::Input(format!(
                    "quality p-value {} appears more than once",
                    p.id
                )));
            }
            out.insert(p.id.as_str(), p.p_value);
        }
        Ok(out)
    }
}

/// Reads and parses `path`, reporting schema violations with their field path.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let located = |field: String, msg: String| {
        let at = if field.is_empty() || field == "." {
            String::new()
        } else {
            format!(" at `{field}`")
        };
        CliError::Input(format!("{}{at}: {msg}", path.display()))
    };
    if is_json {
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de)
            .map_err(|e| located(e.path().to_string(), e.into_inner().to_string()))
    } else {
        let de =
            toml::Deserializer::parse(&text).map_err(|e| located(String::new(), e.to_string()))?;
        serde_path_to_error::deserialize(de)
            .map_err(|e| located(e.path().to_string(), e.into_inner().message().to_string()))
    }
}
