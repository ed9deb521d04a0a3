//! Output formatting: the JSON envelope and plain-text tables.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{Map, Value};
use spd_manova::estimation::{DispersionEstimate, FitDiagnostics, RegressionModel};
use spd_manova::inference::{FrechetAnovaResult, ManovaResult};
use spd_manova::simulation::{CalibrationReport, ConsistencyReport, GeometryAudit, NullCurvePoint, PowerReport};

use crate::EstimateReport;

/// Significant digits of floats in JSON output.
pub const JSON_DIGITS: usize = 12;
/// Significant digits of floats in tables.
pub const TABLE_DIGITS: usize = 6;

#[derive(Serialize)]
pub struct Envelope {
    pub command: String,
    pub config: Value,
    pub result: Value,
    pub version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_seconds: Option<f64>,
}

fn round_sig(x: f64, digits: usize) -> f64 {
    format!("{:.*e}", digits - 1, x).parse().unwrap_or(x)
}

/// Rounds every float in `v` to [`JSON_DIGITS`] significant digits.
pub fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64 number"), JSON_DIGITS);
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_floats).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_floats(v))).collect::<Map<_, _>>()),
        other => other,
    }
}

pub fn to_json(envelope: &Envelope) -> String {
    let v = serde_json::to_value(envelope).expect("envelope serializes");
    let mut s = serde_json::to_string_pretty(&round_floats(v)).expect("value serializes");
    s.push('\n');
    s
}

/// `x` with six significant digits, plain where that stays short.
pub fn num(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (TABLE_DIGITS as i32 - 1 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{:.*e}", TABLE_DIGITS - 1, x)
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or("-".into(), num)
}

fn matrix(out: &mut String, indent: &str, m: &DMatrix<f64>) {
    let cells: Vec<Vec<String>> = m.row_iter().map(|r| r.iter().map(|x| num(*x)).collect()).collect();
    let width = cells.iter().flatten().map(String::len).max().unwrap_or(0);
    for row in cells {
        let line: Vec<String> = row.iter().map(|c| format!("{c:>width$}")).collect();
        let _ = writeln!(out, "{indent}[ {} ]", line.join("  "));
    }
}

pub fn manova_table(r: &ManovaResult) -> String {
    let mut s = String::new();
    let w = &r.decomposition;
    let _ = writeln!(s, "Riemannian MANOVA");
    let _ = writeln!(s, "  groups           {}", w.group_vectors.len());
    let _ = writeln!(s, "  observations     {}", r.n);
    let _ = writeln!(s, "  Wilks' Lambda    {}", num(w.lambda_star));
    let _ = writeln!(s, "  -n ln Lambda     {}", num(r.statistic));
    let _ = writeln!(s, "  df               {}", r.df);
    let _ = writeln!(s, "  p-value          {}", num(r.p_value));
    s
}

pub fn frechet_table(labels: &[String], r: &FrechetAnovaResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Frechet ANOVA");
    let _ = writeln!(s, "  statistic        {}", num(r.statistic));
    let _ = writeln!(s, "  F_n              {}", num(r.f_n));
    let _ = writeln!(s, "  U_n              {}", num(r.u_n));
    let _ = writeln!(s, "  df               {}", r.df);
    let _ = writeln!(s, "  p-value          {}", num(r.p_value));
    let _ = writeln!(s, "  pooled variance  {}", num(r.pooled_variance));
    let _ = writeln!(s, "  {:<12} {:>14} {:>14}", "group", "variance", "sigma^2");
    for ((l, v), sh) in labels.iter().zip(&r.group_variances).zip(&r.sigma_hats) {
        let _ = writeln!(s, "  {:<12} {:>14} {:>14}", l, num(*v), num(*sh));
    }
    s
}

fn fit_line(s: &mut String, d: &FitDiagnostics) {
    let _ = writeln!(
        s,
        "  iterations {}  gradient norm {}  converged {}",
        d.iterations,
        num(d.final_gradient_norm),
        d.converged
    );
}

pub fn estimate_table(r: &EstimateReport) -> String {
    let mut s = String::new();
    for e in r.groups.iter().chain(std::iter::once(&r.pooled)) {
        let _ = writeln!(s, "{} (n = {})", e.label, e.n);
        fit_line(&mut s, &e.mean_fit);
        let _ = writeln!(s, "  Frechet mean");
        matrix(&mut s, "    ", e.mean.matrix());
        let _ = writeln!(s, "  spherical variance {}", num(e.spherical_variance));
        match &e.dispersion {
            Some(d) => {
                let _ = writeln!(s, "  dispersion{}", if d.singular { " (singular)" } else { "" });
                matrix(&mut s, "    ", &d.matrix);
            }
            None => {
                let _ = writeln!(s, "  dispersion needs at least 2 observations");
            }
        }
    }
    s
}

pub fn regression_table(model: &RegressionModel, fit: &FitDiagnostics, disp: &DispersionEstimate) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Geodesic regression");
    fit_line(&mut s, fit);
    let _ = writeln!(s, "  base point");
    matrix(&mut s, "    ", model.base().matrix());
    for (k, v) in model.coefficients().iter().enumerate() {
        let _ = writeln!(s, "  coefficient x_{}", k + 1);
        matrix(&mut s, "    ", v.matrix());
    }
    let _ = writeln!(s, "  residual dispersion{}", if disp.singular { " (singular)" } else { "" });
    matrix(&mut s, "    ", &disp.matrix);
    s
}

pub fn null_table(r: &CalibrationReport, curve: Option<&[NullCurvePoint]>) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<8} {:>4} {:>6} {:>8} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "test", "df", "used", "excluded", "degenerate", "rate", "se", "KS", "KS 1%"
    );
    for (name, c) in [("MANOVA", &r.manova), ("Frechet", &r.frechet)] {
        let _ = writeln!(
            s,
            "{:<8} {:>4} {:>6} {:>8} {:>10} {:>10} {:>10} {:>10} {:>10}",
            name,
            c.df,
            c.used,
            c.excluded,
            c.degenerate,
            num(c.rejection_rate),
            num(c.standard_error),
            num(c.ks_distance),
            num(c.ks_critical_1pct)
        );
    }
    if let Some(points) = curve {
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:>6} {:>10} {:>10} {:>10} {:>10} {:>10}",
            "n_l", "MANOVA KS", "Frechet KS", "KS 1%", "MANOVA", "Frechet"
        );
        for p in points {
            let _ = writeln!(
                s,
                "{:>6} {:>10} {:>10} {:>10} {:>10} {:>10}",
                p.n_per_group,
                num(p.manova_ks),
                num(p.frechet_ks),
                num(p.ks_critical_1pct),
                num(p.manova_rejection_rate),
                num(p.frechet_rejection_rate)
            );
        }
    }
    s
}

pub fn power_table(r: &PowerReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>8} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "theta", "MANOVA", "se", "Frechet", "se", "delta", "delta F", "theory", "theory F"
    );
    for row in &r.rows {
        let _ = writeln!(
            s,
            "{:>8} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
            num(row.theta),
            num(row.manova.rate),
            num(row.manova.standard_error),
            num(row.frechet.rate),
            num(row.frechet.standard_error),
            num(row.delta_novel),
            num(row.delta_frechet),
            num(row.theory_manova),
            num(row.theory_frechet)
        );
    }
    let _ = writeln!(s, "slopes: delta {}  delta F {}", opt(r.slope_novel), opt(r.slope_frechet));
    s
}

/// Long format `theta,test,power,se`.
pub fn power_csv(r: &PowerReport) -> String {
    let mut s = String::from("theta,test,power,se\n");
    for row in &r.rows {
        for (name, e) in [("manova", &row.manova), ("frechet", &row.frechet)] {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                round_sig(row.theta, JSON_DIGITS),
                name,
                round_sig(e.rate, JSON_DIGITS),
                round_sig(e.standard_error, JSON_DIGITS)
            );
        }
    }
    s
}

pub fn consistency_table(r: &ConsistencyReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>8} {:>16} {:>16}", "n", "mean error", "dispersion error");
    for row in &r.rows {
        let _ = writeln!(
            s,
            "{:>8} {:>16} {:>16}",
            row.n,
            num(row.median_mean_error),
            num(row.median_dispersion_error)
        );
    }
    let _ = writeln!(
        s,
        "decreasing: mean {}  dispersion {}",
        r.mean_error_decreasing, r.dispersion_error_decreasing
    );
    s
}

pub fn audit_table(a: &GeometryAudit) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<28} {:>3} {:>12} {:>6}", "invariant", "p", "max error", "ok");
    for c in &a.invariants {
        let _ = writeln!(s, "{:<28} {:>3} {:>12} {:>6}", c.name, c.p, num(c.max_error), c.passed);
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<28} {:>3} {:>12} {:>6}", "residual sweep", "p", "variation", "ok");
    for r in &a.residual_sweeps {
        let _ = writeln!(s, "{:<28} {:>3} {:>12} {:>6}", "worst", r.p, num(r.worst_variation), r.passed);
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<28} {:>3} {:>12} {:>6}", "richardson order", "p", "median", "ok");
    for r in &a.richardson {
        let _ = writeln!(s, "{:<28} {:>3} {:>12} {:>6}", "", r.p, num(r.median_order), r.passed);
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "{:>6} {:>12} {:>12} {:>12} {:>12}", "b", "closed", "fd", "gap", "predicted");
    for r in &a.scalar_rows {
        let _ = writeln!(
            s,
            "{:>6} {:>12} {:>12} {:>12} {:>12}",
            num(r.b),
            num(r.closed_form),
            num(r.finite_difference),
            num(r.discrepancy),
            num(r.predicted)
        );
    }
    for j in &a.jacobi_endpoint {
        let _ = writeln!(
            s,
            "p = {}: smallest |J(1)| {}  vanishing at s = 1 {}",
            j.p,
            num(j.min_endpoint_norm),
            j.vanishing_claim_holds
        );
    }
    s
}
