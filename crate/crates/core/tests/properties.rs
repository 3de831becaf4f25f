use std::collections::BTreeMap;

use proptest::prelude::*;

use decision_gate::decision_engine::{
    evaluate_rule1, evaluate_rule2, explain, ExperimentOutcome, Verdict,
};
use decision_gate::design_corrections::{
    compute_corrections, correct_prop41, correct_prop41_improved, nyholt_effective_tests,
    CorrectionKind, CorrectionPolicy, MetricCounts, TestId,
};
use decision_gate::hypothesis_tests::{
    achieved_power, required_sample_size, run_inferiority, run_superiority, MetricReadout,
    TestKind, TestOutcome, TestSpec,
};
use decision_gate::num_core::{
    cholesky_lower, std_normal_cdf, std_normal_quantile, std_normal_sf, symmetric_eigenvalues,
    CorrelationMatrix, Matrix,
};
use decision_gate::sequential_gst::{
    compute_boundaries, crossing_probability, SpendingFunction, SpendingPlan,
};
use decision_gate::RiskBudget;

/// Random correlation matrix: Gram matrix of random unit vectors.
fn correlation(dim: usize) -> impl Strategy<Value = CorrelationMatrix<f64>> {
    prop::collection::vec(prop::collection::vec(-1.0..1.0f64, dim), dim).prop_filter_map(
        "degenerate row",
        move |v| {
            let mut unit = Vec::with_capacity(dim);
            for row in v {
                let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm < 1e-3 {
                    return None;
                }
                unit.push(row.iter().map(|x| x / norm).collect::<Vec<_>>());
            }
            let rows: Vec<Vec<f64>> = (0..dim)
                .map(|i| {
                    (0..dim)
                        .map(|j| {
                            if i == j {
                                1.0
                            } else {
                                unit[i].iter().zip(&unit[j]).map(|(a, b)| a * b).sum()
                            }
                        })
                        .collect()
                })
                .collect();
            CorrelationMatrix::from_rows(&rows).ok()
        },
    )
}

fn budget() -> impl Strategy<Value = RiskBudget> {
    (0.001..0.2f64, 0.001..0.2f64, 0.05..0.4f64).prop_map(|(a, am, b)| RiskBudget::new(a, am, b))
}

fn counts() -> impl Strategy<Value = MetricCounts> {
    (0..6usize, 0..6usize, 0..4usize, 0..4usize)
        .prop_filter("needs a powered metric", |(s, g, _, _)| s + g > 0)
        .prop_map(|(s, g, d, q)| MetricCounts::new(s, g, d, q))
}

fn outcome(rejected: bool) -> TestOutcome {
    TestOutcome {
        z_statistic: 0.0,
        p_value: if rejected { 0.0 } else { 1.0 },
        rejected,
        ci_lower: None,
    }
}

proptest! {
    #[test]
    fn quantile_inverts_cdf(p in 1e-300..1.0f64) {
        let z = std_normal_quantile(p).unwrap();
        let back = std_normal_cdf(z).unwrap();
        prop_assert!(((back - p) / p).abs() < 1e-9, "p={p} back={back}");
    }

    #[test]
    fn cdf_and_sf_are_complementary(z in -30.0..30.0f64) {
        let total = std_normal_cdf(z).unwrap() + std_normal_sf(z).unwrap();
        prop_assert!((total - 1.0).abs() < 1e-15);
        prop_assert!((std_normal_cdf(z).unwrap() - std_normal_sf(-z).unwrap()).abs() <= 1e-15 * std_normal_cdf(z).unwrap().max(1e-300));
    }

    #[test]
    fn correlation_round_trips_through_json(c in (2..6usize).prop_flat_map(correlation)) {
        let json = serde_json::to_string(&c).unwrap();
        let back: CorrelationMatrix<f64> = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn eigenvalues_sum_to_trace(c in (1..7usize).prop_flat_map(correlation)) {
        let ev = symmetric_eigenvalues(c.matrix()).unwrap();
        let sum: f64 = ev.iter().sum();
        prop_assert!((sum - c.dim() as f64).abs() < 1e-9);
        prop_assert!(ev.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(ev.iter().all(|&x| x > -1e-9));
    }

    #[test]
    fn cholesky_reconstructs(c in (1..7usize).prop_flat_map(correlation)) {
        let l = cholesky_lower(&c).unwrap();
        let back = l.reconstruct();
        prop_assert!(back.frobenius_distance(c.matrix()) < 1e-9);
        for i in 0..c.dim() {
            for j in i + 1..c.dim() {
                prop_assert_eq!(l.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn nyholt_within_bounds(c in (1..7usize).prop_flat_map(correlation)) {
        let m_e: f64 = nyholt_effective_tests(&c).unwrap();
        prop_assert!((1.0..=c.dim() as f64).contains(&m_e));
    }

    #[test]
    fn transpose_is_an_involution(rows in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 4), 4)) {
        let m = Matrix::from_rows(&rows).unwrap();
        prop_assert_eq!(m.transpose().transpose(), m);
    }

    #[test]
    fn prop41_levels_stay_below_nominal(c in counts(), b in budget()) {
        prop_assume!(b.alpha_minus < b.beta);
        let r = correct_prop41(c, &b).unwrap();
        prop_assert!(r.beta_star <= b.beta);
        prop_assert!(r.alpha_guardrail <= b.alpha);
        prop_assert!(r.alpha_minus_star.unwrap() <= b.alpha_minus);
        if let Some(a) = r.alpha_success {
            prop_assert!((a - b.alpha / c.success as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn prop41_rejects_exhausted_beta(c in counts(), alpha in 0.001..0.2f64, beta in 0.01..0.4f64, excess in 0.0..0.5f64) {
        let b = RiskBudget::new(alpha, beta + excess, beta);
        prop_assert!(correct_prop41(c, &b).is_err());
    }

    #[test]
    fn more_metrics_never_loosen_levels(c in counts(), b in budget(), extra in 1..4usize) {
        prop_assume!(b.alpha_minus < b.beta);
        let bigger = MetricCounts::new(c.success, c.guardrail + extra, c.deterioration + extra, c.quality);
        let small = correct_prop41(c, &b).unwrap();
        let large = correct_prop41(bigger, &b).unwrap();
        prop_assert!(large.beta_star <= small.beta_star);
        prop_assert!(large.alpha_minus_star.unwrap() <= small.alpha_minus_star.unwrap());
    }

    #[test]
    fn improved_is_never_stricter_on_alpha(c in counts(), b in budget()) {
        prop_assume!(c.success > 0 && b.alpha_minus <= b.beta && b.alpha_minus <= 1.0 - b.alpha);
        let basic = correct_prop41(c, &b);
        let improved = correct_prop41_improved(c, &b, false).unwrap();
        prop_assert!(improved.alpha_success.unwrap() >= b.alpha / c.success as f64 - 1e-15);
        if let Ok(basic) = basic {
            prop_assert!(improved.alpha_success.unwrap() >= basic.alpha_success.unwrap() - 1e-15);
        }
    }

    #[test]
    fn every_policy_yields_probabilities(c in counts(), b in budget(), k in 0..6usize) {
        let policy = CorrectionPolicy::new(CorrectionKind::ALL[k]);
        if let Ok(r) = compute_corrections(c, &b, &policy) {
            for p in [r.alpha_guardrail, r.beta_star].into_iter().chain(r.alpha_success).chain(r.alpha_minus_star) {
                prop_assert!(p > 0.0 && p < 1.0);
            }
        }
    }

    /// Superiority and deterioration on the same readout never both reject
    /// once their levels sum to at most 1.
    #[test]
    fn superiority_and_deterioration_disjoint(
        estimate in -10.0..10.0f64,
        se in 0.01..5.0f64,
        a_plus in 0.001..0.5f64,
        a_minus in 0.001..0.5f64,
    ) {
        let r = MetricReadout::new(estimate, se, 100, 100).unwrap();
        let sup = run_superiority(&r, &TestSpec::superiority(a_plus).unwrap()).unwrap();
        let det = run_inferiority(&r, &TestSpec::inferiority(a_minus).unwrap()).unwrap();
        prop_assert!(!(sup.rejected && det.rejected));
    }

    #[test]
    fn sample_size_reaches_target_power(var in 0.1..10.0f64, effect in 0.01..2.0f64, alpha in 0.001..0.2f64, beta in 0.01..0.5f64) {
        let n = required_sample_size(var, effect, alpha, beta).unwrap();
        prop_assert!(achieved_power(var, effect, n, alpha).unwrap() >= 1.0 - beta - 1e-12);
        if n > 1 {
            prop_assert!(achieved_power(var, effect, n - 1, alpha).unwrap() < 1.0 - beta);
        }
    }

    #[test]
    fn rule2_ship_implies_rule1_ship(bits in prop::collection::vec(any::<bool>(), 8), s in 0..3usize, g in 0..3usize) {
        prop_assume!(s + g > 0);
        let kinds = [TestKind::Superiority, TestKind::NonInferiority, TestKind::Inferiority, TestKind::QualitySrm];
        let sizes = [s, g, 1, 1];
        let mut tests = BTreeMap::new();
        let mut i = 0;
        for (kind, n) in kinds.into_iter().zip(sizes) {
            for _ in 0..n {
                tests.insert(TestId::new(format!("m{i}"), kind), outcome(bits[i]));
                i += 1;
            }
        }
        let o = ExperimentOutcome::new(tests);
        let r1 = evaluate_rule1(&o).unwrap();
        let r2 = evaluate_rule2(&o).unwrap();
        if r2.verdict == Verdict::Ship {
            prop_assert_eq!(r1.verdict, Verdict::Ship);
        }
        prop_assert_eq!(r2.verdict == Verdict::Ship, r2.blocking_tests.is_empty());
        prop_assert_eq!(explain(&r2).verdict, r2.verdict);
    }

    #[test]
    fn test_id_round_trips(metric in "[a-z_:]{1,12}", k in 0..5usize) {
        let id = TestId::new(metric, TestKind::ALL[k]);
        prop_assert_eq!(id.to_string().parse::<TestId>().unwrap(), id);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn gst_exact_size_and_monotone_boundaries(alpha in 0.005..0.2f64, k in 1..12usize, obf in any::<bool>()) {
        let spending = if obf { SpendingFunction::OBrienFlemingType } else { SpendingFunction::Linear };
        let schedule = compute_boundaries(&SpendingPlan::equally_spaced(alpha, k, spending).unwrap()).unwrap();
        let size = crossing_probability(&schedule, 0.0).unwrap();
        prop_assert!((size - alpha).abs() < 1e-4, "size {size} vs {alpha}");
        let spent: f64 = schedule.incremental_alpha.iter().sum();
        prop_assert!((spent - alpha).abs() < 1e-12);
        let power = crossing_probability(&schedule, -1.0).unwrap();
        prop_assert!(power > size);
        if obf {
            prop_assert!(schedule.critical_z.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}
