//! Text and JSON views of an experiment report.

use bandclt::experiment::ExperimentReport;
use serde::Serialize;

/// `|z|` below this counts as agreement with the limit.
pub const Z_THRESHOLD: f64 = 4.0;

#[derive(Debug, Serialize)]
pub struct VarianceRow {
    pub function: String,
    pub mc_variance: f64,
    pub theory_variance: Option<f64>,
    pub z_score: Option<f64>,
}

pub fn variance_rows(report: &ExperimentReport) -> Vec<VarianceRow> {
    report
        .functions
        .iter()
        .map(|f| VarianceRow {
            function: f.function.clone(),
            mc_variance: f.variance,
            theory_variance: f.theory.as_ref().map(|t| t.value.re),
            z_score: f.z_score,
        })
        .collect()
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.prec$}"))
}

pub fn render_variance(rows: &Vec<VarianceRow>) -> String {
    let width = rows.iter().map(|r| r.function.len()).max().unwrap_or(0).max(8);
    let mut s = format!(
        "{:<width$}  {:>12}  {:>15}  {:>8}\n",
        "function", "MC variance", "theory variance", "z-score"
    );
    for r in rows {
        s += &format!(
            "{:<width$}  {:>12.6}  {:>15}  {:>8}\n",
            r.function,
            r.mc_variance,
            opt(r.theory_variance, 6),
            opt(r.z_score, 2)
        );
    }
    s
}

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    fn below(name: String, value: f64, bound: f64) -> Self {
        Self {
            name,
            value,
            bound,
            pass: value < bound,
        }
    }
}

/// Variance z-scores, pseudo-variance smallness, cross-covariances against
/// their limits and norm exceedances.
pub fn comparison(report: &ExperimentReport) -> Vec<Check> {
    let n = report.replicates as f64;
    let mut out = Vec::new();
    for f in &report.functions {
        if let Some(z) = f.z_score {
            out.push(Check::below(format!("{} |z|", f.function), z.abs(), Z_THRESHOLD));
        }
        out.push(Check::below(
            format!("{} |pseudo-variance|", f.function),
            f.pseudo_variance.norm(),
            4.0 * f.variance / n.sqrt(),
        ));
    }
    for c in &report.cross_covariances {
        if let Some(t) = c.theory {
            out.push(Check::below(
                format!("{} x {} |cov - theory|", c.functions.0, c.functions.1),
                (c.estimate - t).norm(),
                c.tolerance,
            ));
        }
    }
    if let Some(norm) = &report.norm {
        out.push(Check {
            name: format!("norm exceedances over {}", norm.rho_check),
            value: norm.exceedances as f64,
            bound: 0.0,
            pass: norm.exceedances == 0,
        });
    }
    out
}

pub fn render_comparison(checks: &Vec<Check>) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    checks
        .iter()
        .map(|c| {
            format!(
                "{} {:<width$}  {:>12.6}  (bound {:.6})\n",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.bound
            )
        })
        .collect()
}
