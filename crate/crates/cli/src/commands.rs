use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use decision_gate::decision_engine::{
    evaluate, explain, Decision, ExperimentOutcome, Explanation, MetricSpec, Verdict,
};
use decision_gate::design_corrections::{
    build_design_plan, CorrectionKind, CorrectionPolicy, DesignPlan, MetricCounts, PlanOptions,
    TestId,
};
use decision_gate::hypothesis_tests::{
    run_external, run_inferiority, run_noninferiority, run_srm, run_superiority, MetricReadout,
    TestKind, TestOutcome, TestSpec,
};
use decision_gate::mc_harness::{
    run_overlay_study, run_table, study_grid, to_tsv, CovarianceStructure, Hypothesis, MetricKind,
    OverlayConfig, OverlayReport, RejectionReport, Scenario, SimulationConfig,
};
use decision_gate::num_core::mix_seed;
use decision_gate::sequential_gst::{
    compute_boundaries, BoundarySchedule, SpendingFunction, SpendingPlan,
};
use decision_gate::RiskBudget;

use crate::config::{load, ExperimentConfigFile, ResultsFile};
use crate::render;
use crate::{CliError, Format};

#[derive(Debug, Clone, Serialize)]
pub struct DesignOutput {
    pub plan: DesignPlan,
    /// Deterioration boundaries when the config has a `sequential` section.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deterioration_boundaries: Option<BoundarySchedule>,
}

fn plan_from(config: &ExperimentConfigFile) -> Result<DesignPlan, CliError> {
    let correlations = config.correlations()?;
    Ok(build_design_plan(
        &config.metrics,
        &config.budget(),
        &config.policy(),
        correlations.as_ref(),
        &PlanOptions::default(),
    )?)
}

pub fn design(config_path: &Path, format: Format) -> Result<(String, i32), CliError> {
    let config: ExperimentConfigFile = load(config_path)?;
    let plan = plan_from(&config)?;
    let deterioration_boundaries = match (config.sequential, plan.corrections.alpha_minus_star) {
        (Some(seq), Some(alpha)) => Some(compute_boundaries(&SpendingPlan::equally_spaced(
            alpha,
            seq.k_looks,
            seq.spending,
        )?)?),
        _ => None,
    };
    let out = DesignOutput {
        plan,
        deterioration_boundaries,
    };
    let text = match format {
        Format::Json => render::json(&out)?,
        Format::Table => render::design_table(&out),
    };
    Ok((text, 0))
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationOutput {
    pub decision: Decision,
    pub explanation: Explanation,
    pub tests: BTreeMap<TestId, EvaluatedTest>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluatedTest {
    pub level: f64,
    #[serde(flatten)]
    pub outcome: TestOutcome,
}

fn readout(
    spec: &MetricSpec,
    results: &BTreeMap<&str, &crate::config::MetricResult>,
) -> Result<MetricReadout, CliError> {
    let r = results
        .get(spec.id.as_str())
        .ok_or_else(|| CliError::Input(format!("results are missing metric {}", spec.id)))?;
    // Tests run on the increase-is-good scale.
    Ok(MetricReadout::new(
        spec.direction.sign() * r.estimate,
        r.std_error,
        r.n_treatment,
        r.n_control,
    )?)
}

/// Runs every planned test on the observed results.
pub fn run_tests(
    config: &ExperimentConfigFile,
    plan: &DesignPlan,
    results: &ResultsFile,
) -> Result<BTreeMap<TestId, TestOutcome>, CliError> {
    let specs: BTreeMap<&str, &MetricSpec> =
        config.metrics.iter().map(|m| (m.id.as_str(), m)).collect();
    let metrics = results.metrics_by_id()?;
    let pvalues = results.pvalues_by_id()?;
    for id in metrics.keys() {
        if !specs.get(id).is_some_and(|m| {
            plan.levels
                .keys()
                .any(|t| t.metric == m.id && !t.kind.is_quality())
        }) {
            return Err(CliError::Input(format!(
                "results contain metric {id}, which the plan does not test"
            )));
        }
    }
    for id in pvalues.keys() {
        if plan.level(id, TestKind::QualityExternal).is_none() {
            return Err(CliError::Input(format!(
                "results contain quality p-value {id}, which the plan does not test"
            )));
        }
    }
    let srm_tests = plan
        .levels
        .keys()
        .filter(|t| t.kind == TestKind::QualitySrm)
        .count();
    if srm_tests > 1 {
        return Err(CliError::Input(
            "more than one metric uses the SRM quality test".into(),
        ));
    }
    if srm_tests == 0 && results.quality.srm.is_some() {
        return Err(CliError::Input(
            "results contain SRM counts, but the plan has no SRM test".into(),
        ));
    }

    let mut outcomes = BTreeMap::new();
    for (test, &level) in &plan.levels {
        let spec = specs[test.metric.as_str()];
        let outcome = match test.kind {
            TestKind::Superiority => {
                run_superiority(&readout(spec, &metrics)?, &TestSpec::superiority(level)?)?
            }
            TestKind::NonInferiority => {
                let nim = spec.nim.expect("guardrail specs carry a nim");
                run_noninferiority(
                    &readout(spec, &metrics)?,
                    &TestSpec::non_inferiority(level, nim)?,
                )?
            }
            TestKind::Inferiority => {
                run_inferiority(&readout(spec, &metrics)?, &TestSpec::inferiority(level)?)?
            }
            TestKind::QualitySrm => {
                let srm = results.quality.srm.ok_or_else(|| {
                    CliError::Input(format!("results are missing SRM counts for {}", spec.id))
                })?;
                run_srm(
                    srm.treatment_count,
                    srm.control_count,
                    srm.planned_ratio,
                    level,
                )?
            }
            TestKind::QualityExternal => {
                let p = pvalues.get(spec.id.as_str()).ok_or_else(|| {
                    CliError::Input(format!("results are missing quality p-value {}", spec.id))
                })?;
                run_external(*p, level)?
            }
        };
        outcomes.insert(test.clone(), outcome);
    }
    Ok(outcomes)
}

pub fn evaluate_cmd(
    config_path: &Path,
    results_path: &Path,
    format: Format,
) -> Result<(String, i32), CliError> {
    let config: ExperimentConfigFile = load(config_path)?;
    let results: ResultsFile = load(results_path)?;
    let plan = plan_from(&config)?;
    let outcomes = ExperimentOutcome::for_plan(&plan, run_tests(&config, &plan, &results)?)?;
    let decision = evaluate(plan.rule, &outcomes)?;
    let explanation = explain(&decision);
    let tests = outcomes
        .tests
        .iter()
        .map(|(id, o)| {
            (
                id.clone(),
                EvaluatedTest {
                    level: plan.levels[id],
                    outcome: *o,
                },
            )
        })
        .collect();
    let code = if decision.verdict == Verdict::Ship {
        0
    } else {
        1
    };
    let out = EvaluationOutput {
        decision,
        explanation,
        tests,
    };
    let text = match format {
        Format::Json => render::json(&out)?,
        Format::Table => render::evaluation_table(&out),
    };
    Ok((text, code))
}

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub scenario: Scenario,
    pub structure: CovarianceStructure,
    pub correction: CorrectionKind,
    pub nyholt: bool,
    pub counts: MetricCounts,
    pub budget: RiskBudget,
    pub reps: u64,
    pub seed: u64,
    pub looks: usize,
    pub spending: SpendingFunction,
    pub paper_tables: bool,
    pub nyholt_rows: bool,
    pub overlay_table: bool,
    pub out: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
enum SimulationOutput {
    Reports(Vec<RejectionReport>),
    Overlay(Vec<OverlayReport>),
}

pub fn simulate(args: &SimulateArgs) -> Result<(String, i32), CliError> {
    if args.reps == 0 {
        return Err(CliError::Input("--reps must be at least 1".into()));
    }
    if args.looks == 0 {
        return Err(CliError::Input("--looks must be at least 1".into()));
    }
    let output = if args.overlay_table {
        let cells = [
            (MetricKind::Success, Hypothesis::H0),
            (MetricKind::Success, Hypothesis::H1),
            (MetricKind::Guardrail, Hypothesis::H0),
            (MetricKind::Guardrail, Hypothesis::H1),
        ];
        let reports = cells
            .into_iter()
            .enumerate()
            .map(|(i, (metric, hypothesis))| {
                let config = OverlayConfig {
                    k_looks: args.looks,
                    alpha: args.budget.alpha,
                    alpha_minus: args.budget.alpha,
                    beta: args.budget.beta,
                    replications: args.reps,
                    seed: mix_seed(args.seed, i as u64),
                    spending: args.spending,
                    ..OverlayConfig::new(metric, hypothesis)
                };
                run_overlay_study(&config)
            })
            .collect::<Result<Vec<_>, _>>()?;
        SimulationOutput::Overlay(reports)
    } else {
        let grid = if args.paper_tables {
            let mut grid = study_grid(&Scenario::ALL, args.reps, args.seed, args.nyholt_rows);
            for cell in &mut grid {
                cell.k_looks = args.looks;
                cell.spending = args.spending;
            }
            grid
        } else {
            let policy = CorrectionPolicy {
                nyholt: args.nyholt,
                ..CorrectionPolicy::new(args.correction)
            };
            vec![SimulationConfig {
                counts: args.counts,
                budget: args.budget,
                policy,
                scenario: args.scenario,
                structure: args.structure.clone(),
                replications: args.reps,
                k_looks: args.looks,
                seed: args.seed,
                spending: args.spending,
            }]
        };
        SimulationOutput::Reports(run_table(&grid)?)
    };
    let text = match (args.format, &output) {
        (Format::Json, out) => render::json(out)?,
        (Format::Table, SimulationOutput::Reports(r)) => to_tsv(r),
        (Format::Table, SimulationOutput::Overlay(r)) => render::overlay_tsv(r),
    };
    match &args.out {
        Some(path) => {
            std::fs::write(path, &text)
                .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
            Ok((String::new(), 0))
        }
        None => Ok((text, 0)),
    }
}
