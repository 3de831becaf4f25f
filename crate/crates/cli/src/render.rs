use std::fmt::Write;

use serde::Serialize;

use decision_gate::decision_engine::{Clause, Verdict};
use decision_gate::mc_harness::{format_sig, Hypothesis, MetricKind, OverlayReport};

use crate::commands::{DesignOutput, EvaluationOutput};
use crate::CliError;

pub fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), format_sig)
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn clause_name(c: Clause) -> &'static str {
    match c {
        Clause::QualityFailure => "quality failure",
        Clause::Deterioration => "deterioration",
        Clause::GuardrailNotNoninferior => "guardrail not non-inferior",
        Clause::NoSuccessSuperior => "no success metric superior",
    }
}

/// Left-aligned columns separated by two spaces.
fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let mut l = String::from(" ");
        for (cell, w) in cells.iter().zip(&width) {
            let _ = write!(l, " {cell:<w$} ");
        }
        out.push_str(l.trim_end());
        out.push('\n');
    };
    line(header.to_vec());
    for row in rows {
        line(row.iter().map(String::as_str).collect());
    }
    out
}

pub fn design_table(out: &DesignOutput) -> String {
    let p = &out.plan;
    let c = &p.corrections;
    let mut s = String::new();
    let _ = writeln!(s, "decision rule: {:?}", p.rule);
    let _ = writeln!(
        s,
        "correction: {}{}{}",
        p.policy.kind,
        if p.policy.nyholt { " + nyholt" } else { "" },
        if p.policy.guardrail_overpowered {
            " (guardrail overpowered)"
        } else {
            ""
        }
    );
    let _ = writeln!(
        s,
        "budget: alpha={} alpha_minus={} beta={}",
        format_sig(p.budget.alpha),
        format_sig(p.budget.alpha_minus),
        format_sig(p.budget.beta)
    );
    let _ = writeln!(
        s,
        "metrics: S={} G={} D={} Q={}",
        p.counts.success, p.counts.guardrail, p.counts.deterioration, p.counts.quality
    );
    s.push_str("\ncorrected levels\n");
    let rows = vec![
        vec!["alpha_success".into(), opt(c.alpha_success)],
        vec!["alpha_guardrail".into(), format_sig(c.alpha_guardrail)],
        vec!["alpha_minus_star".into(), opt(c.alpha_minus_star)],
        vec!["beta_star".into(), format_sig(c.beta_star)],
    ];
    s.push_str(&table(&["quantity", "value"], &rows));

    s.push_str("\ntests\n");
    let rows: Vec<Vec<String>> = p
        .levels
        .iter()
        .map(|(id, a)| vec![id.to_string(), format_sig(*a)])
        .collect();
    s.push_str(&table(&["test", "level"], &rows));

    s.push_str("\npowered metrics\n");
    let rows: Vec<Vec<String>> = p
        .power_targets
        .iter()
        .map(|(id, power)| {
            vec![
                id.clone(),
                format_sig(*power),
                p.sample_sizes[id].to_string(),
            ]
        })
        .collect();
    s.push_str(&table(&["metric", "power_target", "n_per_group"], &rows));
    let _ = writeln!(s, "\nrequired n per group: {}", p.required_n_per_group);

    if let Some(b) = &out.deterioration_boundaries {
        let _ = writeln!(
            s,
            "\ndeterioration boundaries (reject when z < -critical_z)"
        );
        let rows: Vec<Vec<String>> = (0..b.critical_z.len())
            .map(|k| {
                vec![
                    (k + 1).to_string(),
                    format_sig(b.information_fractions[k]),
                    format_sig(b.critical_z[k]),
                    format_sig(b.incremental_alpha[k]),
                ]
            })
            .collect();
        s.push_str(&table(
            &["look", "information", "critical_z", "alpha_spent"],
            &rows,
        ));
    }
    s
}

pub fn evaluation_table(out: &EvaluationOutput) -> String {
    let d = &out.decision;
    let mut s = String::new();
    let verdict = match d.verdict {
        Verdict::Ship => "SHIP",
        Verdict::NoShip => "NO SHIP",
    };
    let _ = writeln!(s, "verdict: {verdict} ({:?})", d.rule);
    s.push_str("\nclauses\n");
    let rows = vec![
        vec![
            "some success metric superior".into(),
            yes_no(d.any_success_superior).into(),
        ],
        vec![
            "all guardrails non-inferior".into(),
            yes_no(d.all_guardrails_noninferior).into(),
        ],
        vec![
            "no significant deterioration".into(),
            yes_no(d.no_deterioration).into(),
        ],
        vec![
            "no quality failure".into(),
            yes_no(d.no_quality_failure).into(),
        ],
    ];
    s.push_str(&table(&["clause", "holds"], &rows));
    if !out.explanation.blocking.is_empty() {
        s.push_str("\nblocking\n");
        let rows: Vec<Vec<String>> = out
            .explanation
            .blocking
            .iter()
            .map(|sec| {
                let tests: Vec<String> = sec.tests.iter().map(ToString::to_string).collect();
                vec![clause_name(sec.clause).into(), tests.join(", ")]
            })
            .collect();
        s.push_str(&table(&["clause", "tests"], &rows));
    }
    s.push_str("\ntests\n");
    let rows: Vec<Vec<String>> = out
        .tests
        .iter()
        .map(|(id, t)| {
            vec![
                id.to_string(),
                format_sig(t.level),
                format_sig(t.outcome.z_statistic),
                format_sig(t.outcome.p_value),
                yes_no(t.outcome.rejected).into(),
                opt(t.outcome.ci_lower),
            ]
        })
        .collect();
    s.push_str(&table(
        &["test", "level", "z", "p_value", "rejected", "ci_lower"],
        &rows,
    ));
    s
}

pub fn overlay_tsv(reports: &[OverlayReport]) -> String {
    let mut s = String::from(
        "metric\thypothesis\tlooks\tsig_decision\tsig_deteriorating\tsig_superior\tsig_both\tse_decision\n",
    );
    for r in reports {
        let metric = match r.config.metric {
            MetricKind::Success => "success",
            MetricKind::Guardrail => "guardrail",
        };
        let hypothesis = match r.config.hypothesis {
            Hypothesis::H0 => "H0",
            Hypothesis::H1 => "H1",
        };
        let _ = writeln!(
            s,
            "{metric}\t{hypothesis}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.config.k_looks,
            format_sig(r.sig_decision.rate),
            format_sig(r.sig_deteriorating.rate),
            format_sig(r.sig_superior.rate),
            format_sig(r.sig_both.rate),
            format_sig(r.sig_decision.se),
        );
    }
    s
}
