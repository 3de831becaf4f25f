use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    apply_nyholt, compute_corrections, CorrectionKind, CorrectionPolicy, Corrections, MetricCounts,
    RiskBudget,
};
use crate::decision_engine::{MetricSpec, QualityTest, Role};
use crate::error::{Error, Result};
use crate::hypothesis_tests::{required_sample_size, TestKind};
use crate::num_core::CorrelationMatrix;

/// A single planned test, written `metric:kind` in reports.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TestId {
    pub metric: String,
    pub kind: TestKind,
}

impl TestId {
    pub fn new(metric: impl Into<String>, kind: TestKind) -> Self {
        Self {
            metric: metric.into(),
            kind,
        }
    }
}

impl fmt::Display for TestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.metric, self.kind)
    }
}

impl FromStr for TestId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (metric, kind) = s.rsplit_once(':').ok_or_else(|| {
            Error::configuration(format!("test id {s:?} is not of the form metric:kind"))
        })?;
        Ok(Self::new(metric, kind.parse()?))
    }
}

impl Serialize for TestId {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TestId {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRuleKind {
    Rule1,
    Rule2,
}

/// Correlation matrix over named metrics, used for Nyholt's adjustment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlations {
    pub ids: Vec<String>,
    pub matrix: CorrelationMatrix<f64>,
}

impl Correlations {
    pub fn new(ids: Vec<String>, matrix: CorrelationMatrix<f64>) -> Result<Self> {
        if ids.len() != matrix.dim() {
            return Err(Error::configuration(format!(
                "correlations list {} ids for a {}x{} matrix",
                ids.len(),
                matrix.dim(),
                matrix.dim()
            )));
        }
        if ids.iter().collect::<BTreeSet<_>>().len() != ids.len() {
            return Err(Error::configuration("correlation ids must be unique"));
        }
        Ok(Self { ids, matrix })
    }

    fn block(&self, metrics: &[&str]) -> Result<CorrelationMatrix<f64>> {
        let idx = metrics
            .iter()
            .map(|m| {
                self.ids.iter().position(|id| id == m).ok_or_else(|| {
                    Error::configuration(format!("correlations do not cover metric {m}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.matrix.submatrix(&idx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanOptions {
    /// Give every success and guardrail metric a deterioration test under Decision Rule 2.
    pub auto_deterioration: bool,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            auto_deterioration: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPlan {
    pub rule: DecisionRuleKind,
    pub policy: CorrectionPolicy,
    pub budget: RiskBudget<f64>,
    pub counts: MetricCounts,
    pub corrections: Corrections<f64>,
    /// Significance level of every planned test.
    pub levels: BTreeMap<TestId, f64>,
    /// Per-test power target 1−β* of each success and guardrail metric.
    pub power_targets: BTreeMap<String, f64>,
    /// Per-group sample size each powered metric needs on its own.
    pub sample_sizes: BTreeMap<String, u64>,
    pub required_n_per_group: u64,
}

impl DesignPlan {
    pub fn level(&self, metric: &str, kind: TestKind) -> Option<f64> {
        self.levels.get(&TestId::new(metric, kind)).copied()
    }
}

/// Assigns every test its level and power target and sizes the experiment.
pub fn build_design_plan(
    metrics: &[MetricSpec],
    budget: &RiskBudget<f64>,
    policy: &CorrectionPolicy,
    correlations: Option<&Correlations>,
    options: &PlanOptions,
) -> Result<DesignPlan> {
    let mut seen = BTreeSet::new();
    for m in metrics {
        m.validate()?;
        if !seen.insert(m.id.as_str()) {
            return Err(Error::configuration(format!(
                "duplicate metric id {}",
                m.id
            )));
        }
    }
    let mut sorted: Vec<&MetricSpec> = metrics.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));

    let rule = if policy.kind == CorrectionKind::Prop33 {
        DecisionRuleKind::Rule1
    } else {
        DecisionRuleKind::Rule2
    };
    let auto = options.auto_deterioration && rule == DecisionRuleKind::Rule2;

    let success: Vec<&str> = sorted
        .iter()
        .filter(|m| m.has(Role::Success))
        .map(|m| m.id.as_str())
        .collect();
    let guardrail: Vec<&str> = sorted
        .iter()
        .filter(|m| m.has(Role::Guardrail))
        .map(|m| m.id.as_str())
        .collect();
    let counts = MetricCounts {
        success: success.len(),
        guardrail: guardrail.len(),
        deterioration: sorted
            .iter()
            .filter(|m| m.has(Role::Deterioration) && !m.is_powered())
            .count(),
        quality: sorted.iter().filter(|m| m.has(Role::Quality)).count(),
    };

    let corrections = if policy.nyholt {
        let block = |ids: &[&str]| -> Result<Option<CorrelationMatrix<f64>>> {
            if ids.len() < 2 {
                return Ok(None);
            }
            let c = correlations.ok_or_else(|| {
                Error::configuration("nyholt adjustment requires a correlation matrix")
            })?;
            c.block(ids).map(Some)
        };
        let cs = block(&success)?;
        let cg = block(&guardrail)?;
        apply_nyholt(counts, budget, policy, cs.as_ref(), cg.as_ref())?
    } else {
        compute_corrections(counts, budget, policy)?
    };

    let mut levels = BTreeMap::new();
    let mut power_targets = BTreeMap::new();
    let mut sample_sizes = BTreeMap::new();
    let power = 1.0 - corrections.beta_star;
    for m in &sorted {
        let id = m.id.as_str();
        let mut n_needed = 0u64;
        if m.has(Role::Success) {
            let a = corrections.alpha_success.expect("success metrics present");
            levels.insert(TestId::new(id, TestKind::Superiority), a);
            let n = required_sample_size(
                m.variance.expect("validated"),
                m.mde.expect("validated"),
                a,
                corrections.beta_star,
            )?;
            n_needed = n_needed.max(n);
        }
        if m.has(Role::Guardrail) {
            let a = corrections.alpha_guardrail;
            levels.insert(TestId::new(id, TestKind::NonInferiority), a);
            let n = required_sample_size(
                m.variance.expect("validated"),
                m.nim.expect("validated"),
                a,
                corrections.beta_star,
            )?;
            n_needed = n_needed.max(n);
        }
        if m.is_powered() {
            power_targets.insert(id.to_string(), power);
            sample_sizes.insert(id.to_string(), n_needed);
        }
        let deteriorates = m.has(Role::Deterioration) || (auto && m.is_powered());
        if deteriorates || m.has(Role::Quality) {
            let a = corrections.alpha_minus_star.ok_or_else(|| {
                Error::planning(format!(
                    "{} plans no deterioration or quality tests, but metric {id} needs one",
                    policy.kind
                ))
            })?;
            if deteriorates {
                levels.insert(TestId::new(id, TestKind::Inferiority), a);
            }
            if m.has(Role::Quality) {
                let kind = match m.quality_test() {
                    QualityTest::Srm => TestKind::QualitySrm,
                    QualityTest::External => TestKind::QualityExternal,
                };
                levels.insert(TestId::new(id, kind), a);
            }
        }
    }

    let required_n_per_group = sample_sizes.values().copied().max().unwrap_or(1);
    Ok(DesignPlan {
        rule,
        policy: *policy,
        budget: *budget,
        counts,
        corrections,
        levels,
        power_targets,
        sample_sizes,
        required_n_per_group,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision_engine::MetricSpec;

    fn table1() -> Vec<MetricSpec> {
        vec![
            MetricSpec::success("conversion", 0.25, 0.01),
            MetricSpec::guardrail("latency", 4.0, 0.1),
            MetricSpec::deterioration("crashes"),
            MetricSpec::quality("srm"),
        ]
    }

    fn budget() -> RiskBudget<f64> {
        RiskBudget::new(0.05, 0.05, 0.2)
    }

    #[test]
    fn table1_prop41_plan() {
        let plan = build_design_plan(
            &table1(),
            &budget(),
            &CorrectionKind::Prop41.into(),
            None,
            &PlanOptions::default(),
        )
        .unwrap();
        assert_eq!(plan.counts, MetricCounts::new(1, 1, 1, 1));
        assert_eq!(plan.rule, DecisionRuleKind::Rule2);
        assert_eq!(plan.level("crashes", TestKind::Inferiority), Some(0.0125));
        assert_eq!(plan.level("srm", TestKind::QualitySrm), Some(0.0125));
        assert_eq!(
            plan.level("conversion", TestKind::Inferiority),
            Some(0.0125)
        );
        assert_eq!(plan.level("latency", TestKind::Inferiority), Some(0.0125));
        assert_eq!(plan.level("conversion", TestKind::Superiority), Some(0.05));
        assert_eq!(plan.level("latency", TestKind::NonInferiority), Some(0.05));
        assert_eq!(plan.levels.len(), 6);
        let beta_star = 0.15 / (0.95 * 2.0);
        assert!((plan.corrections.beta_star - beta_star).abs() < 1e-15);
        assert!((plan.power_targets["latency"] - (1.0 - beta_star)).abs() < 1e-15);
        let n_conv = required_sample_size(0.25, 0.01, 0.05, beta_star).unwrap();
        let n_lat = required_sample_size(4.0, 0.1, 0.05, beta_star).unwrap();
        assert_eq!(plan.required_n_per_group, n_conv.max(n_lat));
    }

    #[test]
    fn single_success_uncorrected_is_plain_test() {
        let m = [MetricSpec::success("a", 1.0, 0.2)];
        let opts = PlanOptions {
            auto_deterioration: false,
        };
        let plan =
            build_design_plan(&m, &budget(), &CorrectionKind::None.into(), None, &opts).unwrap();
        assert_eq!(plan.levels.len(), 1);
        assert_eq!(plan.level("a", TestKind::Superiority), Some(0.05));
        assert_eq!(plan.power_targets["a"], 0.8);
        assert_eq!(plan.required_n_per_group, 310);
    }

    #[test]
    fn order_invariance() {
        let mut m = table1();
        let a = build_design_plan(
            &m,
            &budget(),
            &CorrectionKind::Prop41Improved.into(),
            None,
            &PlanOptions::default(),
        )
        .unwrap();
        m.reverse();
        let b = build_design_plan(
            &m,
            &budget(),
            &CorrectionKind::Prop41Improved.into(),
            None,
            &PlanOptions::default(),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn prop33_plans_rule1_without_deterioration() {
        let m = [
            MetricSpec::success("a", 1.0, 0.2),
            MetricSpec::guardrail("g", 1.0, 0.2),
        ];
        let plan = build_design_plan(
            &m,
            &budget(),
            &CorrectionKind::Prop33.into(),
            None,
            &PlanOptions::default(),
        )
        .unwrap();
        assert_eq!(plan.rule, DecisionRuleKind::Rule1);
        assert_eq!(plan.levels.len(), 2);
        assert!(build_design_plan(
            &table1(),
            &budget(),
            &CorrectionKind::Prop33.into(),
            None,
            &PlanOptions::default()
        )
        .is_err());
    }

    #[test]
    fn infeasible_budget_names_condition() {
        let err = build_design_plan(
            &table1(),
            &RiskBudget::new(0.05, 0.3, 0.2),
            &CorrectionKind::Prop41.into(),
            None,
            &PlanOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Planning(_)));
        assert!(err.to_string().contains("alpha_minus must be < beta"));
    }

    #[test]
    fn nyholt_plan_uses_named_block() {
        let m: Vec<MetricSpec> = (0..3)
            .map(|i| MetricSpec::success(format!("s{i}"), 1.0, 0.1))
            .collect();
        let corr = Correlations::new(
            vec!["s2".into(), "s0".into(), "s1".into()],
            CorrelationMatrix::equicorrelated(3, 1.0).unwrap(),
        )
        .unwrap();
        let policy = CorrectionPolicy::new(CorrectionKind::Prop41).with_nyholt();
        let plan = build_design_plan(&m, &budget(), &policy, Some(&corr), &PlanOptions::default())
            .unwrap();
        assert!((plan.corrections.alpha_success.unwrap() - 0.05).abs() < 1e-12);
        assert!(matches!(
            build_design_plan(&m, &budget(), &policy, None, &PlanOptions::default()),
            Err(Error::Configuration(_))
        ));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let m = [
            MetricSpec::success("a", 1.0, 0.2),
            MetricSpec::guardrail("a", 1.0, 0.2),
        ];
        assert!(matches!(
            build_design_plan(
                &m,
                &budget(),
                &CorrectionKind::Prop41.into(),
                None,
                &PlanOptions::default()
            ),
            Err(Error::Configuration(_))
        ));
    }

    #[test]
    fn plan_json_round_trip() {
        let plan = build_design_plan(
            &table1(),
            &budget(),
            &CorrectionKind::Prop41.into(),
            None,
            &PlanOptions::default(),
        )
        .unwrap();
        let json = serde_json::to_string(&plan).unwrap();
        assert!(json.contains("\"srm:quality_srm\""));
        assert_eq!(serde_json::from_str::<DesignPlan>(&json).unwrap(), plan);
    }

    #[test]
    fn test_id_parsing() {
        let id: TestId = "a:b:inferiority".parse().unwrap();
        assert_eq!(id, TestId::new("a:b", TestKind::Inferiority));
        assert!("plain".parse::<TestId>().is_err());
        assert!("a:bogus".parse::<TestId>().is_err());
    }
}
