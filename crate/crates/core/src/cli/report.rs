//! Report rows and their CSV / JSON serialization.

use crate::validate::VERSION;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// First line of every CSV file.
pub fn header_comment() -> String {
    format!("# extreme-gibbs v{VERSION}")
}

/// 17 significant digits.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{:.16e}", v + 0.0)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Keeps free text inside one CSV field.
pub fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
    } else {
        s.to_string()
    }
}

/// One comparison of an approximation against an oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxReport {
    pub approximation: String,
    pub model: String,
    pub regime: String,
    pub n: usize,
    pub a: f64,
    pub tv: f64,
    pub sup_gap: f64,
    /// Negative mass of the approximation.
    pub neg_mass: f64,
    pub runtime_ms: f64,
    /// Acceptance rate, prefactor discrepancy, z-statistics and the like.
    pub diagnostics: BTreeMap<String, f64>,
    pub status: String,
}

impl ApproxReport {
    pub fn failed(approximation: &str, model: &str, n: usize, a: f64, why: String) -> Self {
        ApproxReport {
            approximation: approximation.into(),
            model: model.into(),
            regime: String::new(),
            n,
            a,
            tv: f64::NAN,
            sup_gap: f64::NAN,
            neg_mass: f64::NAN,
            runtime_ms: 0.0,
            diagnostics: BTreeMap::new(),
            status: format!("error: {why}"),
        }
    }
}

/// Diagnostic columns, in output order.
pub const DIAGNOSTICS: [&str; 7] = [
    "regime_ratio",
    "acceptance_rate",
    "prefactor_discrepancy",
    "z_max",
    "tail_ratio",
    "eta",
    "window_tail_ratio",
];

/// CSV for report rows. `runtime_ms` is written only with `timings`, so that
/// default output is byte-reproducible.
pub fn reports_csv(rows: &[ApproxReport], timings: bool) -> String {
    let mut s = header_comment();
    s.push('\n');
    s.push_str("approximation,model,regime,n,a,tv,sup_gap,neg_mass");
    for d in DIAGNOSTICS {
        s.push(',');
        s.push_str(d);
    }
    s.push_str(",runtime_ms,status\n");
    for r in rows {
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{}",
            field(&r.approximation),
            field(&r.model),
            r.regime,
            r.n,
            num(r.a),
            num(r.tv),
            num(r.sup_gap),
            num(r.neg_mass)
        );
        for d in DIAGNOSTICS {
            s.push(',');
            s.push_str(&opt(r.diagnostics.get(d).copied()));
        }
        let rt = if timings {
            num(r.runtime_ms)
        } else {
            String::new()
        };
        let _ = writeln!(s, ",{rt},{}", field(&r.status));
    }
    s
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    version: &'a str,
    rows: &'a T,
}

/// JSON document `{"version": .., "rows": [..]}`.
pub fn to_json<T: Serialize>(rows: &T) -> String {
    let mut s = serde_json::to_string_pretty(&Envelope {
        version: VERSION,
        rows,
    })
    .expect("report rows serialize");
    s.push('\n');
    s
}

/// One row of the tilt table; numeric fields are `None` when the solve failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltRow {
    pub a: f64,
    pub t: Option<f64>,
    pub m: Option<f64>,
    pub s2: Option<f64>,
    pub mu3: Option<f64>,
    pub skew_ratio: Option<f64>,
    pub psi: Option<f64>,
    pub psi_d1: Option<f64>,
    #[serde(rename = "V")]
    pub v: Option<f64>,
    pub status: String,
}

pub fn tilt_csv(rows: &[TiltRow]) -> String {
    let mut s = header_comment();
    s.push_str("\na,t,m,s2,mu3,skew_ratio,psi,psi_d1,V,status\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            num(r.a),
            opt(r.t),
            opt(r.m),
            opt(r.s2),
            opt(r.mu3),
            opt(r.skew_ratio),
            opt(r.psi),
            opt(r.psi_d1),
            opt(r.v),
            field(&r.status)
        );
    }
    s
}

/// Exact and approximate densities on a shared grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub approximation: String,
    pub n: usize,
    pub a: f64,
    pub x: Vec<f64>,
    pub exact: Vec<f64>,
    pub approx: Vec<f64>,
}

pub fn curves_csv(curves: &[Curve]) -> String {
    let mut s = header_comment();
    s.push_str("\napproximation,n,a,x,exact,approx\n");
    for c in curves {
        for i in 0..c.x.len() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                field(&c.approximation),
                c.n,
                num(c.a),
                num(c.x[i]),
                num(c.exact[i]),
                num(c.approx[i])
            );
        }
    }
    s
}
