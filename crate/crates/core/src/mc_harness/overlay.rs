//! Single-metric simulation showing how often a sequential deterioration test
//! and a fixed-horizon superiority or non-inferiority test disagree.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{deterioration_schedule, RateEstimate};
use crate::error::{Error, Result};
use crate::num_core::{quantile, RandomStream};
use crate::sequential_gst::SpendingFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Success,
    Guardrail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlayConfig {
    pub metric: MetricKind,
    pub hypothesis: Hypothesis,
    pub k_looks: usize,
    pub alpha: f64,
    /// Level of the sequential deterioration test.
    pub alpha_minus: f64,
    pub beta: f64,
    pub replications: u64,
    pub seed: u64,
    pub spending: SpendingFunction,
}

impl OverlayConfig {
    pub fn new(metric: MetricKind, hypothesis: Hypothesis) -> Self {
        Self {
            metric,
            hypothesis,
            k_looks: 10,
            alpha: 0.05,
            alpha_minus: 0.05,
            beta: 0.2,
            replications: 100_000,
            seed: 8,
            spending: SpendingFunction::Linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayReport {
    pub config: OverlayConfig,
    /// Final test rejects and the deterioration test never does.
    pub sig_decision: RateEstimate,
    /// Deterioration boundary crossed at some look.
    pub sig_deteriorating: RateEstimate,
    /// Final superiority (success) or non-inferiority (guardrail) rejection.
    pub sig_superior: RateEstimate,
    pub sig_both: RateEstimate,
}

pub fn run_overlay_study(config: &OverlayConfig) -> Result<OverlayReport> {
    if config.replications == 0 || config.k_looks == 0 {
        return Err(Error::configuration(
            "replications and k_looks must be at least 1",
        ));
    }
    for (name, v) in [
        ("alpha", config.alpha),
        ("alpha_minus", config.alpha_minus),
        ("beta", config.beta),
    ] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::configuration(format!(
                "{name} must lie in (0, 1), got {v}"
            )));
        }
    }
    let c = deterioration_schedule(config.alpha_minus, config.k_looks, config.spending)?.critical_z;
    let z_alpha = quantile(1.0 - config.alpha);
    let nim_z = z_alpha + quantile(1.0 - config.beta);
    // Statistic at the final look is B(1) + θ + shift, compared with z_alpha.
    let (theta, shift) = match (config.metric, config.hypothesis) {
        (MetricKind::Success, Hypothesis::H0) => (0.0, 0.0),
        (MetricKind::Success, Hypothesis::H1) => (nim_z, 0.0),
        (MetricKind::Guardrail, Hypothesis::H0) => (-nim_z, nim_z),
        (MetricKind::Guardrail, Hypothesis::H1) => (0.0, nim_z),
    };
    let k = config.k_looks;
    let dt = 1.0 / k as f64;

    let counts = (0..config.replications)
        .into_par_iter()
        .map(|i| {
            let mut stream = RandomStream::new(config.seed, i);
            let mut b = 0.0;
            let mut crossed = false;
            for (look, ck) in c.iter().enumerate() {
                b += stream.standard_normal() * dt.sqrt();
                let t = (look + 1) as f64 * dt;
                crossed |= (b + theta * t) / t.sqrt() < -ck;
            }
            let fin = b + theta + shift > z_alpha;
            [
                (fin && !crossed) as u64,
                crossed as u64,
                fin as u64,
                (fin && crossed) as u64,
            ]
        })
        .reduce(
            || [0; 4],
            |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]],
        );
    debug_assert_eq!(c.len(), k);

    let n = config.replications;
    Ok(OverlayReport {
        config: *config,
        sig_decision: RateEstimate::from_count(counts[0], n),
        sig_deteriorating: RateEstimate::from_count(counts[1], n),
        sig_superior: RateEstimate::from_count(counts[2], n),
        sig_both: RateEstimate::from_count(counts[3], n),
    })
}
