//! One-sided group-sequential boundaries for deterioration tests.
//!
//! The statistic at look k is Z_k = (B(t_k) + θ·t_k)/√t_k for a standard
//! Brownian motion B and information fraction t_k, so Cov(Z_j, Z_k) =
//! √(t_j/t_k). A deterioration test rejects at the first look with
//! Z_k < −c_k. Boundaries come from error spending: c_k is chosen so that the
//! probability of first crossing at look k under θ = 0 equals the alpha
//! spent between t_{k−1} and t_k. Crossing probabilities are computed by
//! the recursive numerical integration of Armitage, McPherson and Rowe on the
//! score scale S = √t·Z, with the trapezoidal rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num_core::{quantile, sf, std_normal_pdf};

const SPAN_SD: f64 = 8.0;
const MIN_NODES: usize = 400;
const MAX_REFINEMENTS: usize = 5;
const BOUNDARY_TOL: f64 = 1e-5;
const PROBABILITY_TOL: f64 = 1e-6;
const MAX_CRITICAL_Z: f64 = 40.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpendingFunction {
    /// α(t) = α·t.
    #[default]
    Linear,
    /// α(t) = 2(1 − Φ(z_{1−α/2}/√t)).
    #[serde(rename = "obf")]
    OBrienFlemingType,
}

impl SpendingFunction {
    /// Cumulative alpha spent by information fraction `t`.
    pub fn spent(self, alpha: f64, t: f64) -> f64 {
        match self {
            Self::Linear => alpha * t,
            Self::OBrienFlemingType => 2.0 * sf(quantile(1.0 - alpha / 2.0) / t.sqrt()),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::OBrienFlemingType => "obf",
        }
    }
}

impl std::str::FromStr for SpendingFunction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "obf" => Ok(Self::OBrienFlemingType),
            _ => Err(Error::configuration(format!(
                "unknown spending function {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpendingPlan {
    pub total_alpha: f64,
    pub information_fractions: Vec<f64>,
    pub spending: SpendingFunction,
}

impl SpendingPlan {
    pub fn new(
        total_alpha: f64,
        information_fractions: Vec<f64>,
        spending: SpendingFunction,
    ) -> Result<Self> {
        let plan = Self {
            total_alpha,
            information_fractions,
            spending,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// `k` looks at t = 1/k, 2/k, …, 1.
    pub fn equally_spaced(total_alpha: f64, k: usize, spending: SpendingFunction) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("number of analyses must be at least 1"));
        }
        let fractions = (1..=k).map(|i| i as f64 / k as f64).collect();
        Self::new(total_alpha, fractions, spending)
    }

    pub fn k_analyses(&self) -> usize {
        self.information_fractions.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.total_alpha > 0.0 && self.total_alpha < 1.0) {
            return Err(Error::domain(format!(
                "total alpha must lie in (0, 1), got {}",
                self.total_alpha
            )));
        }
        let t = &self.information_fractions;
        if t.is_empty() {
            return Err(Error::domain("number of analyses must be at least 1"));
        }
        if !(t[0] > 0.0) || t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain(
                "information fractions must be strictly increasing and positive",
            ));
        }
        if t[t.len() - 1] != 1.0 {
            return Err(Error::domain("the last information fraction must be 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySchedule {
    pub total_alpha: f64,
    /// Reject for deterioration at look k when Z_k < −critical_z[k].
    pub critical_z: Vec<f64>,
    pub incremental_alpha: Vec<f64>,
    pub information_fractions: Vec<f64>,
}

impl BoundarySchedule {
    pub fn k_analyses(&self) -> usize {
        self.critical_z.len()
    }
}

/// Sub-density of the score S_k on the continuation region (−∞, b], truncated
/// SPAN_SD standard deviations either side of the mean.
///
/// Nodes sit on the lattice j·h plus the endpoint b, so the transition kernel
/// between two lattice grids depends only on j − i and is evaluated once per
/// offset. `weighted` holds density times trapezoid weight.
struct Density {
    h: f64,
    /// Lattice index of the first node.
    j0: i64,
    /// Lattice nodes followed by the endpoint b.
    xs: Vec<f64>,
    weighted: Vec<f64>,
}

impl Density {
    fn empty(h: f64) -> Self {
        Self {
            h,
            j0: 0,
            xs: Vec::new(),
            weighted: Vec::new(),
        }
    }

    /// Nodes on [lo, b] with their trapezoid weights, or `None` when the
    /// region is thinner than one step.
    fn nodes(lo: f64, b: f64, h: f64) -> Option<(i64, Vec<f64>, Vec<f64>)> {
        let j_lo = (lo / h).ceil() as i64;
        let j_hi = (b / h).ceil() as i64 - 1;
        if j_hi <= j_lo {
            return None;
        }
        let mut xs: Vec<f64> = (j_lo..=j_hi).map(|j| j as f64 * h).collect();
        let tail = b - xs[xs.len() - 1];
        let mut w = vec![h; xs.len()];
        w[0] = 0.5 * h;
        let last = w.len() - 1;
        w[last] = 0.5 * h + 0.5 * tail;
        xs.push(b);
        w.push(0.5 * tail);
        Some((j_lo, xs, w))
    }

    /// S_1 ~ N(μ t_1, t_1) restricted to S_1 ≤ b.
    fn first(t: f64, b: f64, mu: f64, h: f64) -> Self {
        let sd = t.sqrt();
        let (lo, hi) = (mu * t - SPAN_SD * sd, b.min(mu * t + SPAN_SD * sd));
        let Some((j0, xs, w)) = Self::nodes(lo, hi, h) else {
            return Self::empty(h);
        };
        let weighted = xs
            .iter()
            .zip(&w)
            .map(|(&x, &w)| w * std_normal_pdf((x - mu * t) / sd) / sd)
            .collect();
        Self {
            h,
            j0,
            xs,
            weighted,
        }
    }

    /// P(not yet crossed, S_next > b).
    fn cross(&self, b: f64, dt: f64, mu: f64) -> f64 {
        let sd = dt.sqrt();
        let shift = mu * dt;
        self.xs
            .iter()
            .zip(&self.weighted)
            .map(|(&x, &w)| w * sf((b - x - shift) / sd))
            .sum()
    }

    fn advance(&self, t: f64, dt: f64, b: f64, mu: f64) -> Self {
        let h = self.h;
        if self.xs.is_empty() {
            return Self::empty(h);
        }
        // Far-out boundaries carry no mass beyond the span; truncate there.
        let b = b.min(mu * t + SPAN_SD * t.sqrt());
        let Some((a0, ys, w)) = Self::nodes(mu * t - SPAN_SD * t.sqrt(), b, h) else {
            return Self::empty(h);
        };
        let sd = dt.sqrt();
        let shift = mu * dt;
        let kernel = |d: f64| std_normal_pdf((d - shift) / sd) / sd;

        let m_old = self.xs.len() - 1;
        let m_new = ys.len() - 1;
        let (old_w, old_end) = self.weighted.split_at(m_old);
        let (old_end_x, old_end_w) = (self.xs[m_old], old_end[0]);
        // Offsets a − j run from a0 − (j0 + m_old − 1) upward.
        let j_max = self.j0 + m_old as i64 - 1;
        let d_min = a0 - j_max;
        let d_max = a0 + m_new as i64 - 1 - self.j0;
        let table: Vec<f64> = (d_min..=d_max).map(|d| kernel(d as f64 * h)).collect();
        let reversed: Vec<f64> = old_w.iter().rev().copied().collect();

        let mut f = Vec::with_capacity(ys.len());
        for (a_off, &y) in ys[..m_new].iter().enumerate() {
            let start = a_off;
            let lattice: f64 = reversed
                .iter()
                .zip(&table[start..start + m_old])
                .map(|(w, k)| w * k)
                .sum();
            f.push(lattice + old_end_w * kernel(y - old_end_x));
        }
        let at_b: f64 = self
            .xs
            .iter()
            .zip(&self.weighted)
            .map(|(&x, &wx)| wx * kernel(b - x))
            .sum();
        f.push(at_b);
        let weighted = f.into_iter().zip(&w).map(|(v, w)| v * w).collect();
        Self {
            h,
            j0: a0,
            xs: ys,
            weighted,
        }
    }
}

fn first_boundary(inc: f64) -> f64 {
    if inc > 0.0 {
        (-quantile(inc.min(0.5))).min(MAX_CRITICAL_Z)
    } else {
        MAX_CRITICAL_Z
    }
}

/// Finds c with `cross(c) = target`; `cross` is decreasing in c.
fn solve_boundary(target: f64, cross: impl Fn(f64) -> f64) -> f64 {
    if target <= 0.0 || cross(MAX_CRITICAL_Z) >= target {
        return MAX_CRITICAL_Z;
    }
    let (mut lo, mut hi) = (-MAX_CRITICAL_Z, MAX_CRITICAL_Z);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cross(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Coarsest lattice step: at most a fortieth of a unit-time standard
/// deviation and an eighth of the smallest increment's.
fn base_step(t: &[f64]) -> f64 {
    let min_dt = t.windows(2).map(|w| w[1] - w[0]).fold(t[0], f64::min);
    (min_dt.sqrt() / 8.0).min((SPAN_SD + 2.0) / MIN_NODES as f64)
}

fn boundaries_at(t: &[f64], inc: &[f64], h: f64) -> Vec<f64> {
    let mut c = vec![first_boundary(inc[0])];
    let mut density = Density::first(t[0], c[0] * t[0].sqrt(), 0.0, h);
    for k in 1..t.len() {
        let dt = t[k] - t[k - 1];
        let sqrt_t = t[k].sqrt();
        let ck = solve_boundary(inc[k], |ck| density.cross(ck * sqrt_t, dt, 0.0));
        c.push(ck);
        if k + 1 < t.len() {
            density = density.advance(t[k], dt, ck * sqrt_t, 0.0);
        }
    }
    c
}

/// Error-spending boundaries for `plan`, refined by doubling the grid until
/// successive boundaries agree within 1e-5.
pub fn compute_boundaries(plan: &SpendingPlan) -> Result<BoundarySchedule> {
    plan.validate()?;
    let t = &plan.information_fractions;
    let mut cumulative: Vec<f64> = t
        .iter()
        .map(|&x| plan.spending.spent(plan.total_alpha, x))
        .collect();
    *cumulative.last_mut().expect("nonempty") = plan.total_alpha;
    let incremental: Vec<f64> = cumulative
        .iter()
        .scan(0.0, |prev, &c| {
            let d = (c - *prev).max(0.0);
            *prev = c;
            Some(d)
        })
        .collect();

    let mut h = base_step(t);
    let mut c = boundaries_at(t, &incremental, h);
    for _ in 0..MAX_REFINEMENTS {
        if t.len() == 1 {
            break;
        }
        h /= 2.0;
        let refined = boundaries_at(t, &incremental, h);
        let drift = c
            .iter()
            .zip(&refined)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        c = refined;
        if drift < BOUNDARY_TOL {
            break;
        }
    }
    Ok(BoundarySchedule {
        total_alpha: plan.total_alpha,
        critical_z: c,
        incremental_alpha: incremental,
        information_fractions: t.clone(),
    })
}

/// Probability of rejecting at any look when Z_k = (B(t_k) + drift·t_k)/√t_k.
pub fn crossing_probability(schedule: &BoundarySchedule, drift: f64) -> Result<f64> {
    if !drift.is_finite() {
        return Err(Error::domain("drift must be finite"));
    }
    let crossing = |h: f64| {
        // Lower crossing of Z is upper crossing of −S, whose drift is −drift.
        let mu = -drift;
        let t = &schedule.information_fractions;
        let c = &schedule.critical_z;
        let b0 = c[0] * t[0].sqrt();
        let mut total = sf((b0 - mu * t[0]) / t[0].sqrt());
        let mut density = Density::first(t[0], b0, mu, h);
        for k in 1..t.len() {
            let dt = t[k] - t[k - 1];
            let b = c[k] * t[k].sqrt();
            total += density.cross(b, dt, mu);
            if k + 1 < t.len() {
                density = density.advance(t[k], dt, b, mu);
            }
        }
        total
    };
    let mut h = base_step(&schedule.information_fractions);
    let mut p = crossing(h);
    for _ in 0..MAX_REFINEMENTS {
        if schedule.k_analyses() == 1 {
            break;
        }
        h /= 2.0;
        let refined = crossing(h);
        let change = (refined - p).abs();
        p = refined;
        if change < PROBABILITY_TOL {
            break;
        }
    }
    Ok(p.clamp(0.0, 1.0))
}

/// First look (1-based) at which the path crosses the deterioration boundary.
pub fn evaluate_sequential(
    stat_path: &[f64],
    schedule: &BoundarySchedule,
) -> Result<Option<usize>> {
    if stat_path.len() > schedule.k_analyses() {
        return Err(Error::domain(format!(
            "path has {} looks but the schedule only {}",
            stat_path.len(),
            schedule.k_analyses()
        )));
    }
    for (k, (&z, &c)) in stat_path.iter().zip(&schedule.critical_z).enumerate() {
        if !z.is_finite() {
            return Err(Error::domain(format!(
                "statistic at look {} is not finite",
                k + 1
            )));
        }
        if z < -c {
            return Ok(Some(k + 1));
        }
    }
    Ok(None)
}
