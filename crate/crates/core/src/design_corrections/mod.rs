//! Significance levels and power targets that bound the type I and type II
//! error rates of a multi-metric ship decision.
//!
//! Notation: S success, G guardrail, D extra deterioration and Q quality
//! metrics; α is the decision-level false positive budget, α₋ the total
//! budget of the deterioration and quality tests, and β the decision-level
//! false negative budget.

mod plan;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num_core::{self, symmetric_eigenvalues, CorrelationMatrix, Real};

pub use plan::{
    build_design_plan, Correlations, DecisionRuleKind, DesignPlan, PlanOptions, TestId,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MetricCounts {
    pub success: usize,
    pub guardrail: usize,
    pub deterioration: usize,
    pub quality: usize,
}

impl MetricCounts {
    pub fn new(success: usize, guardrail: usize, deterioration: usize, quality: usize) -> Self {
        Self {
            success,
            guardrail,
            deterioration,
            quality,
        }
    }

    pub fn total(&self) -> usize {
        self.success + self.guardrail + self.deterioration + self.quality
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskBudget<T> {
    pub alpha: T,
    pub alpha_minus: T,
    pub beta: T,
}

impl<T: Real> RiskBudget<T> {
    pub fn new(alpha: T, alpha_minus: T, beta: T) -> Self {
        Self {
            alpha,
            alpha_minus,
            beta,
        }
    }

    fn check_unit_interval(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("alpha_minus", self.alpha_minus),
            ("beta", self.beta),
        ] {
            if !(v > T::zero() && v < T::one()) {
                return Err(Error::planning(format!(
                    "{name} must lie in (0, 1), got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionKind {
    /// Nominal levels everywhere.
    None,
    /// α/S for success, α/(S+G+D+Q)-style split for α₋, no β correction.
    OnlyAlpha,
    Prop33,
    Prop41,
    Prop41Improved,
    Prop41ImprovedRemark,
}

impl CorrectionKind {
    pub const ALL: [Self; 6] = [
        Self::None,
        Self::OnlyAlpha,
        Self::Prop33,
        Self::Prop41,
        Self::Prop41Improved,
        Self::Prop41ImprovedRemark,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::OnlyAlpha => "only_alpha",
            Self::Prop33 => "prop33",
            Self::Prop41 => "prop41",
            Self::Prop41Improved => "prop41_improved",
            Self::Prop41ImprovedRemark => "prop41_improved_remark",
        }
    }
}

impl std::fmt::Display for CorrectionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CorrectionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::configuration(format!("unknown correction {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CorrectionPolicy {
    pub kind: CorrectionKind,
    /// Replace S and G by Nyholt's effective number of tests.
    #[serde(default)]
    pub nyholt: bool,
    /// Use φ = (S−1+G+D)/(S+G+D)·α₋ in the improved corrections, for
    /// designs whose guardrails are powered beyond α₋.
    #[serde(default)]
    pub guardrail_overpowered: bool,
}

impl CorrectionPolicy {
    pub fn new(kind: CorrectionKind) -> Self {
        Self {
            kind,
            nyholt: false,
            guardrail_overpowered: false,
        }
    }

    pub fn with_nyholt(mut self) -> Self {
        self.nyholt = true;
        self
    }
}

impl From<CorrectionKind> for CorrectionPolicy {
    fn from(kind: CorrectionKind) -> Self {
        Self::new(kind)
    }
}

/// Per-test levels and the per-test type II error target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corrections<T> {
    /// Level of each superiority test; absent when S = 0.
    pub alpha_success: Option<T>,
    pub alpha_guardrail: T,
    /// Level of each deterioration and quality test; absent under Decision Rule 1.
    pub alpha_minus_star: Option<T>,
    pub beta_star: T,
}

/// S and G as reals, so Nyholt's effective counts can stand in for them.
#[derive(Debug, Clone, Copy)]
struct Effective<T> {
    counts: MetricCounts,
    s: T,
    g: T,
    d: T,
    q: T,
}

impl<T: Real> Effective<T> {
    fn exact(counts: MetricCounts) -> Self {
        Self {
            counts,
            s: T::from_count(counts.success),
            g: T::from_count(counts.guardrail),
            d: T::from_count(counts.deterioration),
            q: T::from_count(counts.quality),
        }
    }

    fn total(&self) -> T {
        self.s + self.g + self.d + self.q
    }

    /// β divisor: G+1 with success metrics, G without.
    fn beta_divisor(&self) -> T {
        if self.counts.success > 0 {
            self.g + T::one()
        } else {
            self.g
        }
    }

    fn alpha_success(&self, alpha: T) -> Option<T> {
        (self.counts.success > 0).then(|| alpha / self.s)
    }
}

fn require_powered(counts: MetricCounts) -> Result<()> {
    if counts.success + counts.guardrail == 0 {
        return Err(Error::planning(
            "at least one success or guardrail metric is required",
        ));
    }
    Ok(())
}

/// Decision Rule 1 correction: α/S per success metric, α per guardrail,
/// type II target β/(G+1), or β/G without success metrics.
pub fn correct_prop33<T: Real>(
    counts: MetricCounts,
    budget: &RiskBudget<T>,
) -> Result<Corrections<T>> {
    prop33(&Effective::exact(counts), budget)
}

fn prop33<T: Real>(e: &Effective<T>, budget: &RiskBudget<T>) -> Result<Corrections<T>> {
    require_powered(e.counts)?;
    budget.check_unit_interval()?;
    if e.counts.deterioration + e.counts.quality > 0 {
        return Err(Error::planning(
            "prop33 applies only without deterioration and quality metrics (D = Q = 0)",
        ));
    }
    Ok(Corrections {
        alpha_success: e.alpha_success(budget.alpha),
        alpha_guardrail: budget.alpha,
        alpha_minus_star: None,
        beta_star: budget.beta / e.beta_divisor(),
    })
}

/// Decision Rule 2 correction: α₋ split evenly over all S+G+D+Q deterioration
/// and quality tests, β shrunk to leave room for their false alarms.
pub fn correct_prop41<T: Real>(
    counts: MetricCounts,
    budget: &RiskBudget<T>,
) -> Result<Corrections<T>> {
    prop41(&Effective::exact(counts), budget)
}

fn prop41<T: Real>(e: &Effective<T>, budget: &RiskBudget<T>) -> Result<Corrections<T>> {
    require_powered(e.counts)?;
    budget.check_unit_interval()?;
    if budget.alpha_minus >= budget.beta {
        return Err(Error::planning(
            "alpha_minus must be < beta: beta budget exhausted by deterioration/quality tests",
        ));
    }
    let am = budget.alpha_minus;
    Ok(Corrections {
        alpha_success: e.alpha_success(budget.alpha),
        alpha_guardrail: budget.alpha,
        alpha_minus_star: Some(am / e.total()),
        beta_star: (budget.beta - am) / ((T::one() - am) * e.beta_divisor()),
    })
}

/// Refined Decision Rule 2 correction. Only the deterioration tests that can
/// fire alongside a superior success metric consume β, through φ; with
/// `use_remark` φ counts the extra deterioration and quality tests only.
pub fn correct_prop41_improved<T: Real>(
    counts: MetricCounts,
    budget: &RiskBudget<T>,
    use_remark: bool,
) -> Result<Corrections<T>> {
    let phi = if use_remark {
        Phi::Remark
    } else {
        Phi::Improved
    };
    prop41_improved(&Effective::exact(counts), budget, phi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phi {
    Improved,
    Remark,
    GuardrailOverpowered,
}

fn prop41_improved<T: Real>(
    e: &Effective<T>,
    budget: &RiskBudget<T>,
    phi_kind: Phi,
) -> Result<Corrections<T>> {
    require_powered(e.counts)?;
    budget.check_unit_interval()?;
    let (alpha, am, beta) = (budget.alpha, budget.alpha_minus, budget.beta);
    if am > T::one() - alpha {
        return Err(Error::planning("alpha_minus must be <= 1 - alpha"));
    }
    if am > beta {
        return Err(Error::planning("alpha_minus must be <= beta"));
    }
    let n = e.total();
    let phi = match phi_kind {
        Phi::Improved => (e.d + e.s + e.q - T::one()).max(T::zero()) / n * am,
        Phi::Remark => (e.d + e.q) / n * am,
        Phi::GuardrailOverpowered => {
            let sgd = e.s + e.g + e.d;
            (e.s - T::one() + e.g + e.d).max(T::zero()) / sgd * am
        }
    };
    let alpha_success = (e.counts.success > 0).then(|| {
        if e.counts.success + e.counts.deterioration >= 2 {
            alpha / ((T::one() - am / n) * e.s)
        } else {
            alpha / e.s
        }
    });
    Ok(Corrections {
        alpha_success,
        alpha_guardrail: alpha,
        alpha_minus_star: Some(am / n),
        beta_star: (beta - phi) / ((T::one() - phi) * e.beta_divisor()),
    })
}

fn uncorrected<T: Real>(e: &Effective<T>, budget: &RiskBudget<T>) -> Result<Corrections<T>> {
    require_powered(e.counts)?;
    budget.check_unit_interval()?;
    Ok(Corrections {
        alpha_success: (e.counts.success > 0).then_some(budget.alpha),
        alpha_guardrail: budget.alpha,
        alpha_minus_star: Some(budget.alpha_minus),
        beta_star: budget.beta,
    })
}

fn only_alpha<T: Real>(e: &Effective<T>, budget: &RiskBudget<T>) -> Result<Corrections<T>> {
    require_powered(e.counts)?;
    budget.check_unit_interval()?;
    Ok(Corrections {
        alpha_success: e.alpha_success(budget.alpha),
        alpha_guardrail: budget.alpha,
        alpha_minus_star: Some(budget.alpha_minus / e.total()),
        beta_star: budget.beta,
    })
}

fn dispatch<T: Real>(
    e: &Effective<T>,
    budget: &RiskBudget<T>,
    policy: &CorrectionPolicy,
) -> Result<Corrections<T>> {
    let improved_phi = |remark: bool| {
        if policy.guardrail_overpowered {
            Phi::GuardrailOverpowered
        } else if remark {
            Phi::Remark
        } else {
            Phi::Improved
        }
    };
    match policy.kind {
        CorrectionKind::None => uncorrected(e, budget),
        CorrectionKind::OnlyAlpha => only_alpha(e, budget),
        CorrectionKind::Prop33 => prop33(e, budget),
        CorrectionKind::Prop41 => prop41(e, budget),
        CorrectionKind::Prop41Improved => prop41_improved(e, budget, improved_phi(false)),
        CorrectionKind::Prop41ImprovedRemark => prop41_improved(e, budget, improved_phi(true)),
    }
}

/// Corrections for `policy` with the exact metric counts. The `nyholt` flag
/// is ignored here; see [`apply_nyholt`].
pub fn compute_corrections<T: Real>(
    counts: MetricCounts,
    budget: &RiskBudget<T>,
    policy: &CorrectionPolicy,
) -> Result<Corrections<T>> {
    dispatch(&Effective::exact(counts), budget, policy)
}

/// Nyholt's effective number of independent tests,
/// M_E = 1 + (M−1)(1 − V_λ/M), with V_λ the sample variance (denominator
/// M−1) of the eigenvalues. Clamped to [1, M].
pub fn nyholt_effective_tests<T: Real>(corr: &CorrelationMatrix<T>) -> Result<T> {
    let m_count = corr.dim();
    if m_count <= 1 {
        return Ok(T::one());
    }
    let eig = symmetric_eigenvalues(corr.matrix())?;
    let m = T::from_count(m_count);
    let mean = eig.iter().fold(T::zero(), |a, &x| a + x) / m;
    let var = eig
        .iter()
        .fold(T::zero(), |a, &x| a + (x - mean) * (x - mean))
        / (m - T::one());
    let me = T::one() + (m - T::one()) * (T::one() - var / m);
    Ok(me.max(T::one()).min(m))
}

/// Corrections with S replaced by M_E(Σ_S) and G by M_E(Σ_G) throughout the
/// selected formula. A missing matrix leaves that count unchanged.
pub fn apply_nyholt<T: Real>(
    counts: MetricCounts,
    budget: &RiskBudget<T>,
    policy: &CorrectionPolicy,
    corr_success: Option<&CorrelationMatrix<T>>,
    corr_guardrail: Option<&CorrelationMatrix<T>>,
) -> Result<Corrections<T>> {
    let mut e = Effective::exact(counts);
    if let Some(c) = corr_success {
        if c.dim() != counts.success {
            return Err(Error::planning(format!(
                "success correlation matrix is {0}x{0} but there are {1} success metrics",
                c.dim(),
                counts.success
            )));
        }
        e.s = nyholt_effective_tests(c)?;
    }
    if let Some(c) = corr_guardrail {
        if c.dim() != counts.guardrail {
            return Err(Error::planning(format!(
                "guardrail correlation matrix is {0}x{0} but there are {1} guardrail metrics",
                c.dim(),
                counts.guardrail
            )));
        }
        e.g = nyholt_effective_tests(c)?;
    }
    dispatch(&e, budget, policy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticStructure {
    Independent,
    PerfectlyCorrelated,
}

/// Closed-form Decision Rule 1 type I error rate and power when every test
/// is at its null boundary (type I) or at its design alternative (power).
/// Uncorrected means level α and type II error β on every test; corrected
/// means the Decision Rule 1 correction.
pub fn analytic_rule1_error_rates<T: Real>(
    counts: MetricCounts,
    budget: &RiskBudget<T>,
    structure: AnalyticStructure,
    corrected: bool,
) -> Result<(T, T)> {
    if counts.deterioration + counts.quality > 0 {
        return Err(Error::domain(
            "analytic rates cover success and guardrail metrics only",
        ));
    }
    require_powered(counts)
        .map_err(|_| Error::domain("need at least one success or guardrail metric"))?;
    let one = T::one();
    let (a, b) = (budget.alpha, budget.beta);
    let s = T::from_count(counts.success);
    let g = T::from_count(counts.guardrail);
    let si = counts.success as i32;
    let gi = counts.guardrail as i32;
    use AnalyticStructure::*;
    let rates = match (
        counts.guardrail > 0,
        counts.success > 0,
        structure,
        corrected,
    ) {
        (true, false, PerfectlyCorrelated, false) => (a, one - b),
        (true, false, PerfectlyCorrelated, true) => (a, one - b / g),
        (true, false, Independent, false) => (a.powi(gi), (one - b).powi(gi)),
        (true, false, Independent, true) => (a.powi(gi), (one - b / g).powi(gi)),
        (false, true, PerfectlyCorrelated, false) => (a, one - b),
        (false, true, PerfectlyCorrelated, true) => (a / s, one - b),
        (false, true, Independent, false) => (one - (one - a).powi(si), one - b.powi(si)),
        (false, true, Independent, true) => (one - (one - a / s).powi(si), one - b.powi(si)),
        (true, true, Independent, false) => (
            a.powi(gi) * (one - (one - a).powi(si)),
            (one - b).powi(gi) * (one - b.powi(si)),
        ),
        (true, true, Independent, true) => {
            let bs = b / (g + one);
            (
                a.powi(gi) * (one - (one - a / s).powi(si)),
                (one - bs).powi(gi) * (one - bs.powi(si)),
            )
        }
        (true, true, PerfectlyCorrelated, false) => (a, one - b),
        (true, true, PerfectlyCorrelated, true) => (a / s, one - b / (g + one)),
        (false, false, _, _) => unreachable!("checked above"),
    };
    Ok(rates)
}

/// Probability that any of S−1 success metrics shows significant
/// deterioration when the remaining one sits at its design alternative:
/// (S−1)·Φ(z_{α₋/S} − z_{1−α₊/S} − z_{1−β}).
pub fn deterioration_prob_under_alternative<T: Real>(
    s: usize,
    alpha_plus: T,
    alpha_minus: T,
    beta: T,
) -> Result<T> {
    if s < 2 {
        return Err(Error::domain("deterioration probability needs S >= 2"));
    }
    for (name, p) in [
        ("alpha_plus", alpha_plus),
        ("alpha_minus", alpha_minus),
        ("beta", beta),
    ] {
        if !(p > T::zero() && p < T::one()) {
            return Err(Error::domain(format!("{name} must lie in (0, 1), got {p}")));
        }
    }
    let st = T::from_count(s);
    let z = num_core::quantile(alpha_minus / st)
        - num_core::quantile(T::one() - alpha_plus / st)
        - num_core::quantile(T::one() - beta);
    Ok((st - T::one()) * num_core::cdf(z))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_budget() -> RiskBudget<f64> {
        RiskBudget::new(0.05, 0.05, 0.2)
    }

    const SIM: MetricCounts = MetricCounts {
        success: 5,
        guardrail: 5,
        deterioration: 2,
        quality: 2,
    };

    #[test]
    fn prop33_examples() {
        let b = default_budget();
        let c = correct_prop33(MetricCounts::new(5, 5, 0, 0), &b).unwrap();
        assert_eq!(c.alpha_success, Some(0.01));
        assert_eq!(c.alpha_guardrail, 0.05);
        assert!((c.beta_star - 0.2 / 6.0).abs() < 1e-15);

        let c = correct_prop33(MetricCounts::new(1, 0, 0, 0), &b).unwrap();
        assert_eq!((c.alpha_success, c.beta_star), (Some(0.05), 0.2));

        let c = correct_prop33(MetricCounts::new(0, 3, 0, 0), &b).unwrap();
        assert_eq!(c.alpha_success, None);
        assert!((c.beta_star - 0.2 / 3.0).abs() < 1e-15);

        assert!(matches!(
            correct_prop33(MetricCounts::new(0, 0, 0, 0), &b),
            Err(Error::Planning(_))
        ));
        assert!(matches!(
            correct_prop33(MetricCounts::new(1, 1, 1, 0), &b),
            Err(Error::Planning(_))
        ));
    }

    #[test]
    fn prop41_examples() {
        let c = correct_prop41(SIM, &default_budget()).unwrap();
        assert!((c.alpha_minus_star.unwrap() - 0.05 / 14.0).abs() < 1e-15);
        assert!((c.alpha_success.unwrap() - 0.01).abs() < 1e-15);
        assert!((c.beta_star - 0.15 / (0.95 * 6.0)).abs() < 1e-15);

        let tiny = RiskBudget::new(0.05_f64, 1e-15, 0.2);
        let c = correct_prop41(SIM, &tiny).unwrap();
        assert!((c.beta_star - 0.2 / 6.0).abs() < 1e-12);

        let edge = RiskBudget::new(0.05, 0.2 - 1e-9, 0.2);
        assert!(correct_prop41(SIM, &edge).unwrap().beta_star < 1e-8);

        let err = correct_prop41(SIM, &RiskBudget::new(0.05, 0.3, 0.2)).unwrap_err();
        assert!(err.to_string().contains("alpha_minus must be < beta"));
    }

    #[test]
    fn prop41_without_success_divides_by_g() {
        let c = correct_prop41(MetricCounts::new(0, 4, 1, 1), &default_budget()).unwrap();
        assert_eq!(c.alpha_success, None);
        assert!((c.beta_star - 0.15 / (0.95 * 4.0)).abs() < 1e-15);
        assert!((c.alpha_minus_star.unwrap() - 0.05 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn improved_examples() {
        let c = correct_prop41_improved(SIM, &default_budget(), false).unwrap();
        let phi = 8.0 / 14.0 * 0.05;
        assert!((c.beta_star - (0.2 - phi) / ((1.0 - phi) * 6.0)).abs() < 1e-15);
        assert!((c.beta_star - 0.029_411_764_705_882_35).abs() < 1e-12);
        assert!((c.alpha_success.unwrap() - 0.05 / ((1.0 - 0.05 / 14.0) * 5.0)).abs() < 1e-15);
        assert!((c.alpha_success.unwrap() - 0.010_035_842_293_906_81).abs() < 1e-12);

        let r = correct_prop41_improved(SIM, &default_budget(), true).unwrap();
        let phi = 4.0 / 14.0 * 0.05;
        assert!((r.beta_star - (0.2 - phi) / ((1.0 - phi) * 6.0)).abs() < 1e-15);
        assert!((r.beta_star - 0.031_400_966_183_574_88).abs() < 1e-12);
    }

    #[test]
    fn improved_reduces_to_prop33() {
        let b = default_budget();
        for g in 0..4 {
            let counts = MetricCounts::new(1, g, 0, 0);
            let i = correct_prop41_improved(counts, &b, false).unwrap();
            let p = correct_prop33(counts, &b).unwrap();
            assert_eq!(i.alpha_success, p.alpha_success);
            assert!((i.beta_star - p.beta_star).abs() < 1e-15);
        }
    }

    #[test]
    fn improved_conditions() {
        assert!(correct_prop41_improved(SIM, &RiskBudget::new(0.05, 0.25, 0.2), false).is_err());
        assert!(correct_prop41_improved(SIM, &RiskBudget::new(0.9, 0.15, 0.2), false).is_err());
        // α₋ = β is allowed here, unlike plain prop41.
        assert!(correct_prop41_improved(SIM, &RiskBudget::new(0.05, 0.2, 0.2), false).is_ok());
    }

    #[test]
    fn guardrail_overpowered_variant() {
        let mut policy = CorrectionPolicy::new(CorrectionKind::Prop41Improved);
        policy.guardrail_overpowered = true;
        let c = compute_corrections(SIM, &default_budget(), &policy).unwrap();
        let phi = (5.0 - 1.0 + 5.0 + 2.0) / 12.0 * 0.05;
        assert!((c.beta_star - (0.2 - phi) / ((1.0 - phi) * 6.0)).abs() < 1e-15);
    }

    #[test]
    fn uncorrected_and_only_alpha() {
        let c = compute_corrections(SIM, &default_budget(), &CorrectionKind::None.into()).unwrap();
        assert_eq!(c.alpha_success, Some(0.05));
        assert_eq!(c.alpha_minus_star, Some(0.05));
        assert_eq!(c.beta_star, 0.2);
        let c =
            compute_corrections(SIM, &default_budget(), &CorrectionKind::OnlyAlpha.into()).unwrap();
        assert_eq!(c.alpha_success, Some(0.01));
        assert!((c.alpha_minus_star.unwrap() - 0.05 / 14.0).abs() < 1e-15);
        assert_eq!(c.beta_star, 0.2);
    }

    #[test]
    fn nyholt_examples() {
        assert_eq!(
            nyholt_effective_tests(&CorrelationMatrix::<f64>::identity(5)).unwrap(),
            5.0
        );
        let one = CorrelationMatrix::equicorrelated(5, 1.0_f64).unwrap();
        assert!((nyholt_effective_tests(&one).unwrap() - 1.0).abs() < 1e-12);
        let high = CorrelationMatrix::equicorrelated(5, 0.99_f64).unwrap();
        let me = nyholt_effective_tests(&high).unwrap();
        assert!((me - (1.0 + 4.0 * (1.0 - 19.602 / 4.0 / 5.0))).abs() < 1e-12);
        assert!((me - 1.0796).abs() < 1e-12);
        assert_eq!(
            nyholt_effective_tests(&CorrelationMatrix::<f64>::identity(1)).unwrap(),
            1.0
        );
    }

    #[test]
    fn apply_nyholt_examples() {
        let b = default_budget();
        let policy = CorrectionPolicy::new(CorrectionKind::Prop41).with_nyholt();
        let eye = CorrelationMatrix::identity(5);
        let with = apply_nyholt(SIM, &b, &policy, Some(&eye), Some(&eye)).unwrap();
        assert_eq!(with, correct_prop41(SIM, &b).unwrap());

        let high = CorrelationMatrix::equicorrelated(5, 0.99).unwrap();
        let c = apply_nyholt(SIM, &b, &policy, Some(&high), None).unwrap();
        assert!((c.alpha_success.unwrap() - 0.05 / 1.0796).abs() < 1e-12);

        let c = apply_nyholt(SIM, &b, &policy, None, Some(&high)).unwrap();
        assert!((c.beta_star - 0.15 / (0.95 * 2.0796)).abs() < 1e-12);

        let wrong = CorrelationMatrix::identity(4);
        assert!(matches!(
            apply_nyholt(SIM, &b, &policy, Some(&wrong), None),
            Err(Error::Planning(_))
        ));
    }

    #[test]
    fn analytic_cells() {
        let b = default_budget();
        let (t1, _) = analytic_rule1_error_rates(
            MetricCounts::new(0, 4, 0, 0),
            &b,
            AnalyticStructure::PerfectlyCorrelated,
            false,
        )
        .unwrap();
        assert_eq!(t1, 0.05);
        let (t1, _) = analytic_rule1_error_rates(
            MetricCounts::new(5, 0, 0, 0),
            &b,
            AnalyticStructure::Independent,
            false,
        )
        .unwrap();
        assert!((t1 - 0.226_219_062_5).abs() < 1e-12);
        let (_, power) = analytic_rule1_error_rates(
            MetricCounts::new(0, 10, 0, 0),
            &b,
            AnalyticStructure::Independent,
            false,
        )
        .unwrap();
        assert!((power - 0.107_374_182_4).abs() < 1e-12);
        assert!(analytic_rule1_error_rates(
            MetricCounts::new(1, 1, 1, 0),
            &b,
            AnalyticStructure::Independent,
            true
        )
        .is_err());
    }

    #[test]
    fn deterioration_table_corner() {
        let p: f64 = deterioration_prob_under_alternative(2, 0.1, 0.2, 0.2).unwrap();
        assert!((p - 0.000_082).abs() < 5e-6);
        let p: f64 = deterioration_prob_under_alternative(5, 0.1, 0.2, 0.2).unwrap();
        assert!((p - 0.000_007).abs() < 2e-6);
        let small = deterioration_prob_under_alternative(5, 0.1, 0.2, 1e-6).unwrap();
        assert!(small < 1e-12);
        assert!(deterioration_prob_under_alternative(1, 0.1, 0.2, 0.2).is_err());
    }

    #[test]
    fn single_precision_formulas() {
        let b = RiskBudget::new(0.05_f32, 0.05, 0.2);
        let c = correct_prop41(SIM, &b).unwrap();
        assert!((c.beta_star - 0.15 / 5.7).abs() < 1e-7);
    }

    #[test]
    fn correction_kind_round_trips_through_str() {
        for k in CorrectionKind::ALL {
            assert_eq!(k.as_str().parse::<CorrectionKind>().unwrap(), k);
        }
        assert!("bonferroni".parse::<CorrectionKind>().is_err());
    }
}
