//! Monte Carlo verification of the decision rules' error rates.
//!
//! Simulation works on standardized statistics. Each metric carries a
//! Brownian path observed at K equally spaced looks; its statistic at look k
//! is Z_k = (B(t_k) + θ·t_k)/√t_k, so the final-look statistic is N(θ, 1).
//! Success and guardrail paths are correlated according to the covariance
//! structure; extra deterioration and quality metrics are independent with
//! θ = 0. Superiority and non-inferiority tests run at the final look only,
//! deterioration and quality tests at every look against group-sequential
//! boundaries.

mod overlay;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design_corrections::{
    apply_nyholt, compute_corrections, CorrectionKind, CorrectionPolicy, Corrections, MetricCounts,
    RiskBudget,
};
use crate::error::{Error, Result};
use crate::num_core::{
    cholesky_lower, mix_seed, quantile, CorrelationMatrix, LowerTriangular, RandomStream,
};
use crate::sequential_gst::{compute_boundaries, BoundarySchedule, SpendingFunction, SpendingPlan};

pub use overlay::{run_overlay_study, Hypothesis, MetricKind, OverlayConfig, OverlayReport};

/// Pairwise correlation of the correlated blocks.
pub const HIGH_CORRELATION: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Success effects 0, guardrails at their non-inferiority margin.
    GlobalH0,
    /// Every effect 0.
    StatusQuo,
    /// Success effects at the design alternative, guardrail effects 0.
    GlobalH1,
}

impl Scenario {
    pub const ALL: [Self; 3] = [Self::GlobalH0, Self::StatusQuo, Self::GlobalH1];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::GlobalH0 => "global_h0",
            Self::StatusQuo => "status_quo",
            Self::GlobalH1 => "global_h1",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::configuration(format!("unknown scenario {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceStructure {
    Independent,
    /// All success and guardrail metrics pairwise correlated.
    Dependent,
    /// Success metrics pairwise correlated, guardrails independent.
    Block1,
    /// Guardrail metrics pairwise correlated, success metrics independent.
    Block2,
    /// Correlation over the success metrics followed by the guardrails.
    Explicit(CorrelationMatrix<f64>),
}

impl CovarianceStructure {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Independent => "independent",
            Self::Dependent => "dependent",
            Self::Block1 => "block1",
            Self::Block2 => "block2",
            Self::Explicit(_) => "explicit",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(Self::Independent),
            "dependent" => Ok(Self::Dependent),
            "block1" => Ok(Self::Block1),
            "block2" => Ok(Self::Block2),
            _ => Err(Error::configuration(format!(
                "unknown covariance structure {s:?}"
            ))),
        }
    }

    /// Correlation of the S+G success and guardrail statistics.
    pub fn correlation(&self, s: usize, g: usize) -> Result<CorrelationMatrix<f64>> {
        let rho = HIGH_CORRELATION;
        match self {
            Self::Independent => Ok(CorrelationMatrix::identity(s + g)),
            Self::Dependent => CorrelationMatrix::equicorrelated(s + g, rho),
            Self::Block1 => CorrelationMatrix::blocks(&[(s, rho), (g, 0.0)]),
            Self::Block2 => CorrelationMatrix::blocks(&[(s, 0.0), (g, rho)]),
            Self::Explicit(m) if m.dim() == s + g => Ok(m.clone()),
            Self::Explicit(m) => Err(Error::configuration(format!(
                "explicit correlation is {0}x{0}, expected {1}x{1}",
                m.dim(),
                s + g
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub counts: MetricCounts,
    pub budget: RiskBudget<f64>,
    pub policy: CorrectionPolicy,
    pub scenario: Scenario,
    pub structure: CovarianceStructure,
    pub replications: u64,
    pub k_looks: usize,
    pub seed: u64,
    pub spending: SpendingFunction,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            counts: MetricCounts::new(5, 5, 2, 2),
            budget: RiskBudget::new(0.05, 0.05, 0.2),
            policy: CorrectionPolicy::new(CorrectionKind::Prop41),
            scenario: Scenario::StatusQuo,
            structure: CovarianceStructure::Independent,
            replications: 20_000,
            k_looks: 10,
            seed: 20_240_601,
            spending: SpendingFunction::Linear,
        }
    }
}

impl SimulationConfig {
    pub fn correction_label(&self) -> String {
        let mut label = self.policy.kind.as_str().to_string();
        if self.policy.guardrail_overpowered {
            label.push_str("+overpowered");
        }
        if self.policy.nyholt {
            label.push_str("+nyholt");
        }
        label
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub rate: f64,
    pub se: f64,
}

impl RateEstimate {
    pub fn from_count(hits: u64, total: u64) -> Self {
        let rate = hits as f64 / total as f64;
        Self {
            rate,
            se: (rate * (1.0 - rate) / total as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionReport {
    pub scenario: Scenario,
    pub structure: String,
    pub correction: String,
    pub replications: u64,
    pub seed: u64,
    pub corrections: Corrections<f64>,
    /// Any success metric significantly superior.
    pub r_s: RateEstimate,
    /// All guardrails significantly non-inferior.
    pub r_g: RateEstimate,
    /// Any success or guardrail metric significantly deteriorating.
    pub r_dsdg: RateEstimate,
    /// Any extra deterioration or quality test rejecting.
    pub r_dq: RateEstimate,
    /// Ship rate under Decision Rule 2.
    pub decision_rate: RateEstimate,
    /// Ship rate under Decision Rule 1.
    pub decision_rate_rule1: RateEstimate,
}

pub const TSV_HEADER: &str =
    "scenario\tstructure\tcorrection\tR_S\tR_G\tR_DSDG\tR_DQ\tdecision_rate\tse_decision";

impl RejectionReport {
    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.scenario.as_str(),
            self.structure,
            self.correction,
            format_sig(self.r_s.rate),
            format_sig(self.r_g.rate),
            format_sig(self.r_dsdg.rate),
            format_sig(self.r_dq.rate),
            format_sig(self.decision_rate.rate),
            format_sig(self.decision_rate.se),
        )
    }
}

/// Header plus one row per report, newline terminated.
pub fn to_tsv(reports: &[RejectionReport]) -> String {
    let mut out = String::from(TSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.tsv_row());
        out.push('\n');
    }
    out
}

/// Six significant digits: fixed point for magnitudes in [1e-4, 1e9),
/// scientific otherwise.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-4..9).contains(&magnitude) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Everything a replication needs, fixed before sampling starts.
struct Design {
    s: usize,
    g: usize,
    extra: usize,
    k: usize,
    chol: LowerTriangular<f64>,
    /// Final-look drift per success/guardrail metric.
    theta: Vec<f64>,
    z_success: f64,
    z_guardrail: f64,
    nim_z: f64,
    boundaries: Option<Vec<f64>>,
    corrections: Corrections<f64>,
}

fn plan_corrections(
    config: &SimulationConfig,
    corr: &CorrelationMatrix<f64>,
) -> Result<Corrections<f64>> {
    let (s, g) = (config.counts.success, config.counts.guardrail);
    if config.policy.nyholt {
        let success: Vec<usize> = (0..s).collect();
        let guardrail: Vec<usize> = (s..s + g).collect();
        let cs = (s >= 2).then(|| corr.submatrix(&success)).transpose()?;
        let cg = (g >= 2).then(|| corr.submatrix(&guardrail)).transpose()?;
        apply_nyholt(
            config.counts,
            &config.budget,
            &config.policy,
            cs.as_ref(),
            cg.as_ref(),
        )
    } else {
        compute_corrections(config.counts, &config.budget, &config.policy)
    }
}

pub(crate) fn deterioration_schedule(
    alpha: f64,
    k: usize,
    spending: SpendingFunction,
) -> Result<BoundarySchedule> {
    compute_boundaries(&SpendingPlan::equally_spaced(alpha, k, spending)?)
}

impl Design {
    fn new(config: &SimulationConfig) -> Result<Self> {
        if config.replications == 0 {
            return Err(Error::configuration("replications must be at least 1"));
        }
        if config.k_looks == 0 {
            return Err(Error::configuration("k_looks must be at least 1"));
        }
        let (s, g) = (config.counts.success, config.counts.guardrail);
        let corr = config.structure.correlation(s, g)?;
        let corrections = plan_corrections(config, &corr)?;
        let z_beta = quantile(1.0 - corrections.beta_star);
        let z_success = corrections
            .alpha_success
            .map_or(f64::INFINITY, |a| quantile(1.0 - a));
        let z_guardrail = quantile(1.0 - corrections.alpha_guardrail);
        let nim_z = z_guardrail + z_beta;
        let mut theta = vec![0.0; s + g];
        match config.scenario {
            Scenario::GlobalH0 => theta[s..].iter_mut().for_each(|x| *x = -nim_z),
            Scenario::StatusQuo => {}
            Scenario::GlobalH1 => theta[..s].iter_mut().for_each(|x| *x = z_success + z_beta),
        }
        let boundaries = corrections
            .alpha_minus_star
            .map(|a| {
                deterioration_schedule(a, config.k_looks, config.spending).map(|b| b.critical_z)
            })
            .transpose()?;
        Ok(Self {
            s,
            g,
            extra: config.counts.deterioration + config.counts.quality,
            k: config.k_looks,
            chol: cholesky_lower(&corr)?,
            theta,
            z_success,
            z_guardrail,
            nim_z,
            boundaries,
            corrections,
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    superior: u64,
    noninferior: u64,
    deteriorated: u64,
    extra_rejected: u64,
    ship_rule2: u64,
    ship_rule1: u64,
}

impl Tally {
    fn merge(self, o: Self) -> Self {
        Self {
            superior: self.superior + o.superior,
            noninferior: self.noninferior + o.noninferior,
            deteriorated: self.deteriorated + o.deteriorated,
            extra_rejected: self.extra_rejected + o.extra_rejected,
            ship_rule2: self.ship_rule2 + o.ship_rule2,
            ship_rule1: self.ship_rule1 + o.ship_rule1,
        }
    }
}

struct Scratch {
    z: Vec<f64>,
    inc: Vec<f64>,
    b_path: Vec<f64>,
    extra: Vec<f64>,
}

fn replicate(d: &Design, stream: &mut RandomStream, buf: &mut Scratch) -> Tally {
    let m = d.s + d.g;
    let dt = 1.0 / d.k as f64;
    let sqrt_dt = dt.sqrt();
    buf.b_path.iter_mut().for_each(|x| *x = 0.0);
    buf.extra.iter_mut().for_each(|x| *x = 0.0);
    let mut deteriorated = false;
    let mut extra_rejected = false;
    for look in 0..d.k {
        stream.fill_standard_normal(&mut buf.z);
        d.chol.apply_into(&buf.z, &mut buf.inc);
        for (b, x) in buf.b_path.iter_mut().zip(&buf.inc) {
            *b += x * sqrt_dt;
        }
        for b in buf.extra.iter_mut() {
            *b += stream.standard_normal() * sqrt_dt;
        }
        if let Some(c) = &d.boundaries {
            let t = (look + 1) as f64 * dt;
            let sqrt_t = t.sqrt();
            let crit = -c[look];
            deteriorated |= (0..m).any(|i| (buf.b_path[i] + d.theta[i] * t) / sqrt_t < crit);
            extra_rejected |= buf.extra.iter().any(|&b| b / sqrt_t < crit);
        }
    }
    // At t = 1 the statistic is B(1) + θ.
    let superior = (0..d.s).any(|i| buf.b_path[i] + d.theta[i] > d.z_success);
    let noninferior = (d.s..m).all(|i| buf.b_path[i] + d.theta[i] + d.nim_z > d.z_guardrail);
    let rule1 = (superior || d.s == 0) && noninferior;
    Tally {
        superior: superior as u64,
        noninferior: noninferior as u64,
        deteriorated: deteriorated as u64,
        extra_rejected: extra_rejected as u64,
        ship_rule2: (rule1 && !deteriorated && !extra_rejected) as u64,
        ship_rule1: rule1 as u64,
    }
}

/// Simulates `config.replications` experiments. Replication i draws from
/// substream i of `config.seed`, so results do not depend on thread count.
pub fn run_simulation(config: &SimulationConfig) -> Result<RejectionReport> {
    let design = Design::new(config)?;
    let m = design.s + design.g;
    let tally = (0..config.replications)
        .into_par_iter()
        .fold(
            || {
                let buf = Scratch {
                    z: vec![0.0; m],
                    inc: vec![0.0; m],
                    b_path: vec![0.0; m],
                    extra: vec![0.0; design.extra],
                };
                (Tally::default(), buf)
            },
            |(acc, mut buf), i| {
                let mut stream = RandomStream::new(config.seed, i);
                let t = replicate(&design, &mut stream, &mut buf);
                (acc.merge(t), buf)
            },
        )
        .map(|(t, _)| t)
        .reduce(Tally::default, Tally::merge);

    let n = config.replications;
    Ok(RejectionReport {
        scenario: config.scenario,
        structure: config.structure.label().to_string(),
        correction: config.correction_label(),
        replications: n,
        seed: config.seed,
        corrections: design.corrections,
        r_s: RateEstimate::from_count(tally.superior, n),
        r_g: RateEstimate::from_count(tally.noninferior, n),
        r_dsdg: RateEstimate::from_count(tally.deteriorated, n),
        r_dq: RateEstimate::from_count(tally.extra_rejected, n),
        decision_rate: RateEstimate::from_count(tally.ship_rule2, n),
        decision_rate_rule1: RateEstimate::from_count(tally.ship_rule1, n),
    })
}

/// One report per cell, in input order.
pub fn run_table(grid: &[SimulationConfig]) -> Result<Vec<RejectionReport>> {
    if grid.is_empty() {
        return Err(Error::configuration("simulation grid is empty"));
    }
    grid.iter().map(run_simulation).collect()
}

/// The scenario × structure × correction grid of the simulation study,
/// optionally with Nyholt rows. Each cell gets its own seed derived from
/// `seed` and the cell's position.
pub fn study_grid(
    scenarios: &[Scenario],
    replications: u64,
    seed: u64,
    nyholt_rows: bool,
) -> Vec<SimulationConfig> {
    let structures = [
        CovarianceStructure::Independent,
        CovarianceStructure::Dependent,
        CovarianceStructure::Block1,
        CovarianceStructure::Block2,
    ];
    let mut policies: Vec<CorrectionPolicy> = [
        CorrectionKind::None,
        CorrectionKind::OnlyAlpha,
        CorrectionKind::Prop41,
    ]
    .map(CorrectionPolicy::new)
    .to_vec();
    if nyholt_rows {
        policies.push(nyholt_policy());
    }
    let mut grid = Vec::new();
    for &scenario in scenarios {
        for structure in &structures {
            for policy in &policies {
                let index = grid.len() as u64;
                grid.push(SimulationConfig {
                    scenario,
                    structure: structure.clone(),
                    policy: *policy,
                    replications,
                    seed: mix_seed(seed, index),
                    ..SimulationConfig::default()
                });
            }
        }
    }
    grid
}

/// Nyholt-adjusted policy used for the correlated-metric rows of the grid.
pub fn nyholt_policy() -> CorrectionPolicy {
    CorrectionPolicy::new(CorrectionKind::Prop41ImprovedRemark).with_nyholt()
}
