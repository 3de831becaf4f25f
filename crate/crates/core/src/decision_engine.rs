//! Metric roles and the two ship/no-ship decision rules.
//!
//! Decision Rule 1 ships when at least one success metric is significantly
//! superior and every guardrail is significantly non-inferior. Decision Rule 2
//! additionally requires that no success, guardrail or extra deterioration
//! metric deteriorates significantly and that no quality test fails.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::design_corrections::{DecisionRuleKind, DesignPlan, TestId};
use crate::error::{Error, Result};
use crate::hypothesis_tests::{TestKind, TestOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Success,
    Guardrail,
    Deterioration,
    Quality,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    IncreaseGood,
    DecreaseGood,
}

impl Direction {
    /// Multiplier that maps a raw difference onto the increase-is-good scale.
    pub fn sign(self) -> f64 {
        match self {
            Self::IncreaseGood => 1.0,
            Self::DecreaseGood => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityTest {
    Srm,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub id: String,
    pub roles: BTreeSet<Role>,
    #[serde(default)]
    pub direction: Direction,
    /// Per-unit outcome variance; required for success and guardrail metrics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mde: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nim: Option<f64>,
    /// Defaults to `srm` for a metric named "srm" and `external` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality_test: Option<QualityTest>,
}

impl MetricSpec {
    pub fn new(id: impl Into<String>, roles: impl IntoIterator<Item = Role>) -> Self {
        Self {
            id: id.into(),
            roles: roles.into_iter().collect(),
            direction: Direction::IncreaseGood,
            variance: None,
            mde: None,
            nim: None,
            quality_test: None,
        }
    }

    pub fn success(id: impl Into<String>, variance: f64, mde: f64) -> Self {
        Self {
            variance: Some(variance),
            mde: Some(mde),
            ..Self::new(id, [Role::Success])
        }
    }

    pub fn guardrail(id: impl Into<String>, variance: f64, nim: f64) -> Self {
        Self {
            variance: Some(variance),
            nim: Some(nim),
            ..Self::new(id, [Role::Guardrail])
        }
    }

    pub fn deterioration(id: impl Into<String>) -> Self {
        Self::new(id, [Role::Deterioration])
    }

    pub fn quality(id: impl Into<String>) -> Self {
        Self::new(id, [Role::Quality])
    }

    pub fn has(&self, role: Role) -> bool {
        self.roles.contains(&role)
    }

    pub fn is_powered(&self) -> bool {
        self.has(Role::Success) || self.has(Role::Guardrail)
    }

    pub fn quality_test(&self) -> QualityTest {
        self.quality_test.unwrap_or(if self.id == "srm" {
            QualityTest::Srm
        } else {
            QualityTest::External
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: Option<f64>| -> Result<()> {
            match v {
                Some(x) if x > 0.0 && x.is_finite() => Ok(()),
                Some(x) => Err(Error::configuration(format!(
                    "metric {}: {name} must be positive, got {x}",
                    self.id
                ))),
                None => Ok(()),
            }
        };
        if self.id.is_empty() || self.id.contains(':') {
            return Err(Error::configuration(format!(
                "metric id {:?} must be nonempty and contain no ':'",
                self.id
            )));
        }
        if self.roles.is_empty() {
            return Err(Error::configuration(format!(
                "metric {}: roles must not be empty",
                self.id
            )));
        }
        positive("variance", self.variance)?;
        positive("mde", self.mde)?;
        positive("nim", self.nim)?;
        if self.is_powered() && self.variance.is_none() {
            return Err(Error::configuration(format!(
                "metric {}: variance is required",
                self.id
            )));
        }
        if self.has(Role::Success) && self.mde.is_none() {
            return Err(Error::configuration(format!(
                "metric {}: success metric requires mde",
                self.id
            )));
        }
        if self.has(Role::Guardrail) && self.nim.is_none() {
            return Err(Error::configuration(format!(
                "metric {}: guardrail metric requires nim",
                self.id
            )));
        }
        Ok(())
    }
}

/// Outcome of every planned test, keyed by test id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExperimentOutcome {
    pub tests: BTreeMap<TestId, TestOutcome>,
}

impl ExperimentOutcome {
    pub fn new(tests: BTreeMap<TestId, TestOutcome>) -> Self {
        Self { tests }
    }

    /// Checks that the outcomes cover exactly the plan's tests.
    pub fn for_plan(plan: &DesignPlan, tests: BTreeMap<TestId, TestOutcome>) -> Result<Self> {
        let planned: BTreeSet<&TestId> = plan.levels.keys().collect();
        let observed: BTreeSet<&TestId> = tests.keys().collect();
        if let Some(missing) = planned.difference(&observed).next() {
            return Err(Error::evaluation(format!(
                "missing outcome for planned test {missing}"
            )));
        }
        if let Some(extra) = observed.difference(&planned).next() {
            return Err(Error::evaluation(format!(
                "outcome for unplanned test {extra}"
            )));
        }
        Ok(Self { tests })
    }

    fn of_kind(
        &self,
        pred: impl Fn(TestKind) -> bool,
    ) -> impl Iterator<Item = (&TestId, &TestOutcome)> {
        self.tests.iter().filter(move |(id, _)| pred(id.kind))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Ship,
    NoShip,
}

/// Flat decision record. Under Decision Rule 1 the deterioration and quality
/// clauses are not part of the rule and are reported as satisfied.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub rule: DecisionRuleKind,
    pub verdict: Verdict,
    pub any_success_superior: bool,
    pub all_guardrails_noninferior: bool,
    pub no_deterioration: bool,
    pub no_quality_failure: bool,
    /// Failing tests, ordered quality, deterioration, guardrail, success.
    pub blocking_tests: Vec<TestId>,
}

#[derive(Default)]
struct Clauses {
    success_present: bool,
    success: Vec<TestId>,
    guardrail: Vec<TestId>,
    deterioration: Vec<TestId>,
    quality: Vec<TestId>,
}

fn clauses(outcomes: &ExperimentOutcome) -> Result<Clauses> {
    let mut c = Clauses::default();
    let mut powered = 0usize;
    let mut any_superior = false;
    for (id, o) in outcomes.of_kind(|k| k == TestKind::Superiority) {
        powered += 1;
        c.success_present = true;
        any_superior |= o.rejected;
        c.success.push(id.clone());
    }
    if any_superior {
        c.success.clear();
    }
    for (id, o) in outcomes.of_kind(|k| k == TestKind::NonInferiority) {
        powered += 1;
        if !o.rejected {
            c.guardrail.push(id.clone());
        }
    }
    if powered == 0 {
        return Err(Error::evaluation(
            "no success or guardrail tests to decide on",
        ));
    }
    for (id, o) in outcomes.of_kind(|k| k == TestKind::Inferiority) {
        if o.rejected {
            c.deterioration.push(id.clone());
        }
    }
    for (id, o) in outcomes.of_kind(TestKind::is_quality) {
        if o.rejected {
            c.quality.push(id.clone());
        }
    }
    Ok(c)
}

fn decide(rule: DecisionRuleKind, c: Clauses) -> Decision {
    let success_ok = c.success.is_empty();
    let guardrail_ok = c.guardrail.is_empty();
    let (det_ok, qual_ok, mut blocking) = match rule {
        DecisionRuleKind::Rule1 => (true, true, Vec::new()),
        DecisionRuleKind::Rule2 => {
            let mut b = c.quality.clone();
            b.extend(c.deterioration.iter().cloned());
            (c.deterioration.is_empty(), c.quality.is_empty(), b)
        }
    };
    blocking.extend(c.guardrail);
    blocking.extend(c.success);
    let ship = success_ok && guardrail_ok && det_ok && qual_ok;
    Decision {
        rule,
        verdict: if ship { Verdict::Ship } else { Verdict::NoShip },
        any_success_superior: success_ok,
        all_guardrails_noninferior: guardrail_ok,
        no_deterioration: det_ok,
        no_quality_failure: qual_ok,
        blocking_tests: blocking,
    }
}

/// Ship iff some success metric is superior and all guardrails are
/// non-inferior. Without success tests the first clause is dropped.
pub fn evaluate_rule1(outcomes: &ExperimentOutcome) -> Result<Decision> {
    Ok(decide(DecisionRuleKind::Rule1, clauses(outcomes)?))
}

/// Decision Rule 1 plus no significant deterioration and no failed quality test.
pub fn evaluate_rule2(outcomes: &ExperimentOutcome) -> Result<Decision> {
    Ok(decide(DecisionRuleKind::Rule2, clauses(outcomes)?))
}

pub fn evaluate(rule: DecisionRuleKind, outcomes: &ExperimentOutcome) -> Result<Decision> {
    match rule {
        DecisionRuleKind::Rule1 => evaluate_rule1(outcomes),
        DecisionRuleKind::Rule2 => evaluate_rule2(outcomes),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    QualityFailure,
    Deterioration,
    GuardrailNotNoninferior,
    NoSuccessSuperior,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplanationSection {
    pub clause: Clause,
    pub tests: Vec<TestId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Explanation {
    pub verdict: Verdict,
    pub blocking: Vec<ExplanationSection>,
}

fn clause_of(kind: TestKind) -> Clause {
    match kind {
        TestKind::QualitySrm | TestKind::QualityExternal => Clause::QualityFailure,
        TestKind::Inferiority => Clause::Deterioration,
        TestKind::NonInferiority => Clause::GuardrailNotNoninferior,
        TestKind::Superiority => Clause::NoSuccessSuperior,
    }
}

/// Groups blocking tests by clause: quality failures, deteriorations,
/// guardrail failures, then missing success.
pub fn explain(decision: &Decision) -> Explanation {
    let order = [
        Clause::QualityFailure,
        Clause::Deterioration,
        Clause::GuardrailNotNoninferior,
        Clause::NoSuccessSuperior,
    ];
    let blocking = order
        .into_iter()
        .filter_map(|clause| {
            let mut tests: Vec<TestId> = decision
                .blocking_tests
                .iter()
                .filter(|t| clause_of(t.kind) == clause)
                .cloned()
                .collect();
            tests.sort();
            (!tests.is_empty()).then_some(ExplanationSection { clause, tests })
        })
        .collect();
    Explanation {
        verdict: decision.verdict,
        blocking,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(rejected: bool) -> TestOutcome {
        TestOutcome {
            z_statistic: 0.0,
            p_value: if rejected { 0.001 } else { 0.5 },
            rejected,
            ci_lower: None,
        }
    }

    fn roster(entries: &[(&str, TestKind, bool)]) -> ExperimentOutcome {
        ExperimentOutcome::new(
            entries
                .iter()
                .map(|&(m, k, r)| (TestId::new(m, k), outcome(r)))
                .collect(),
        )
    }

    #[test]
    fn rule1_examples() {
        let d = evaluate_rule1(&roster(&[("a", TestKind::Superiority, true)])).unwrap();
        assert_eq!(d.verdict, Verdict::Ship);
        assert!(d.blocking_tests.is_empty());

        let d = evaluate_rule1(&roster(&[
            ("s1", TestKind::Superiority, false),
            ("s2", TestKind::Superiority, false),
            ("g1", TestKind::NonInferiority, true),
            ("g2", TestKind::NonInferiority, true),
            ("g3", TestKind::NonInferiority, true),
        ]))
        .unwrap();
        assert_eq!(d.verdict, Verdict::NoShip);
        assert_eq!(
            d.blocking_tests,
            vec![
                TestId::new("s1", TestKind::Superiority),
                TestId::new("s2", TestKind::Superiority)
            ]
        );
    }

    #[test]
    fn rule1_guardrail_only_drops_success_clause() {
        let d = evaluate_rule1(&roster(&[("g", TestKind::NonInferiority, true)])).unwrap();
        assert_eq!(d.verdict, Verdict::Ship);
        assert!(d.any_success_superior);
    }

    #[test]
    fn rule1_ignores_deterioration() {
        let d = evaluate_rule1(&roster(&[
            ("a", TestKind::Superiority, true),
            ("a", TestKind::Inferiority, true),
        ]))
        .unwrap();
        assert_eq!(d.verdict, Verdict::Ship);
    }

    #[test]
    fn rule2_examples() {
        let pass = [
            ("s", TestKind::Superiority, true),
            ("g", TestKind::NonInferiority, true),
            ("s", TestKind::Inferiority, false),
            ("g", TestKind::Inferiority, false),
            ("srm", TestKind::QualitySrm, false),
        ];
        assert_eq!(
            evaluate_rule2(&roster(&pass)).unwrap().verdict,
            Verdict::Ship
        );

        let mut fail = pass;
        fail[4].2 = true;
        let d = evaluate_rule2(&roster(&fail)).unwrap();
        assert_eq!(d.verdict, Verdict::NoShip);
        assert_eq!(
            d.blocking_tests,
            vec![TestId::new("srm", TestKind::QualitySrm)]
        );
    }

    #[test]
    fn empty_roster_is_an_error() {
        assert!(matches!(
            evaluate_rule1(&ExperimentOutcome::default()),
            Err(Error::Evaluation(_))
        ));
        let only_quality = roster(&[("srm", TestKind::QualitySrm, false)]);
        assert!(matches!(
            evaluate_rule2(&only_quality),
            Err(Error::Evaluation(_))
        ));
    }

    #[test]
    fn explain_orders_quality_first() {
        let d = evaluate_rule2(&roster(&[
            ("s", TestKind::Superiority, false),
            ("x", TestKind::Inferiority, true),
            ("srm", TestKind::QualitySrm, true),
        ]))
        .unwrap();
        let e = explain(&d);
        let clauses: Vec<Clause> = e.blocking.iter().map(|s| s.clause).collect();
        assert_eq!(
            clauses,
            vec![
                Clause::QualityFailure,
                Clause::Deterioration,
                Clause::NoSuccessSuperior
            ]
        );

        let ship = evaluate_rule2(&roster(&[("s", TestKind::Superiority, true)])).unwrap();
        assert!(explain(&ship).blocking.is_empty());
    }

    #[test]
    fn decision_and_explanation_round_trip() {
        let d = evaluate_rule2(&roster(&[
            ("s", TestKind::Superiority, false),
            ("g", TestKind::NonInferiority, false),
            ("srm", TestKind::QualitySrm, true),
        ]))
        .unwrap();
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<Decision>(&json).unwrap(), d);
        let e = explain(&d);
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(serde_json::from_str::<Explanation>(&json).unwrap(), e);
    }

    #[test]
    fn metric_spec_validation() {
        assert!(MetricSpec::success("a", 1.0, 0.1).validate().is_ok());
        let mut m = MetricSpec::success("a", 1.0, 0.1);
        m.mde = None;
        assert!(matches!(m.validate(), Err(Error::Configuration(_))));
        let mut g = MetricSpec::guardrail("g", 1.0, 0.1);
        g.nim = None;
        assert!(g.validate().is_err());
        assert!(MetricSpec::new("x", []).validate().is_err());
        assert!(MetricSpec::quality("a:b").validate().is_err());
        assert_eq!(MetricSpec::quality("srm").quality_test(), QualityTest::Srm);
        assert_eq!(
            MetricSpec::quality("bias").quality_test(),
            QualityTest::External
        );
    }
}
