//! DOT and JSON exports. Every float is written with six significant digits
//! so that outputs diff cleanly between runs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::IterationSnapshot;
use crate::error::Result;
use crate::family::{coefficient_id, cov_eq_id, HypothesisKind, HypothesisRecord};

pub const REPORT_DIGITS: usize = 6;

const HIGHLIGHT: &str = "color=\"red\", fontcolor=\"red\", style=\"bold\"";
const PLAIN: &str = "color=\"black\"";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DotView {
    Effects,
    InducedCovariances,
}

/// Rounds to `digits` significant decimal digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x)
}

/// C's `%g`: six significant digits, trailing zeros dropped, exponent form
/// outside `[1e-4, 1e6)`.
pub fn fmt_g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", REPORT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..REPORT_DIGITS as i32).contains(&exp) {
        let decimals = (REPORT_DIGITS as i32 - 1 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Rounds every non-integer number in the tree to six significant digits.
pub fn round_json(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64 number"), REPORT_DIGITS);
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_json).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

/// Pretty JSON with sorted keys and rounded floats.
pub fn to_stable_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let v = round_json(serde_json::to_value(value)?);
    Ok(serde_json::to_string_pretty(&v)?)
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn label(estimate: Option<f64>, r: Option<&HypothesisRecord>) -> String {
    let est = estimate.map_or("NA".to_string(), fmt_g);
    let adj = r.and_then(|r| r.adjusted_p).map_or("NA".to_string(), fmt_g);
    format!("{est} ({adj})")
}

fn style(r: Option<&HypothesisRecord>, q: f64) -> &'static str {
    if r.is_some_and(|r| r.is_highlighted(q)) {
        HIGHLIGHT
    } else {
        PLAIN
    }
}

/// Renders a snapshot as Graphviz DOT. Elements whose adjusted p-value
/// exceeds `q` are drawn red and bold.
pub fn export_dot(snapshot: &IterationSnapshot, view: DotView, q: f64) -> String {
    let graph = &snapshot.graph_frozen;
    let mut out = String::new();
    let (header, connector) = match view {
        DotView::Effects => ("digraph effects", "->"),
        DotView::InducedCovariances => ("graph induced_covariances", "--"),
    };
    writeln!(out, "{header} {{").unwrap();
    writeln!(out, "  node [shape=box];").unwrap();
    for name in graph.node_names() {
        writeln!(out, "  {} [id={}];", quote(name), quote(&format!("node:{name}"))).unwrap();
    }
    let mut lines: Vec<(String, String)> = Vec::new();
    match view {
        DotView::Effects => {
            for e in graph.edges() {
                let id = coefficient_id(&e.child, &e.parent);
                let r = snapshot.record(&id);
                let line = format!(
                    "  {} {connector} {} [id={}, label={}, {}];",
                    quote(&e.parent),
                    quote(&e.child),
                    quote(&id),
                    quote(&label(r.and_then(|r| r.estimate), r)),
                    style(r, q)
                );
                lines.push((id, line));
            }
        }
        DotView::InducedCovariances => {
            let order = &snapshot.fit.order;
            for (i, x) in order.iter().enumerate() {
                for y in &order[i..] {
                    let id = cov_eq_id(x, y);
                    let Some(r) = snapshot.record(&id) else { continue };
                    debug_assert_eq!(r.kind, HypothesisKind::CovEquivalence);
                    let attrs = if r.is_highlighted(q) {
                        "color=\"red\", fontcolor=\"red\", style=\"dashed,bold\""
                    } else {
                        "color=\"black\", style=\"dashed\""
                    };
                    let line = format!(
                        "  {} {connector} {} [id={}, label={}, {attrs}];",
                        quote(x),
                        quote(y),
                        quote(&id),
                        quote(&label(r.estimate, Some(r))),
                    );
                    lines.push((id, line));
                }
            }
        }
    }
    lines.sort();
    for (_, line) in lines {
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str("}\n");
    out
}

/// Snapshot JSON without the wall-clock timestamp, so that identical inputs
/// give identical bytes.
pub fn report_json(snapshot: &IterationSnapshot) -> Result<String> {
    let mut v = serde_json::to_value(snapshot)?;
    if let Value::Object(map) = &mut v {
        map.remove("created_at");
    }
    to_stable_json(&v)
}

/// Writes `report.json`, `effects.dot` and `covariances.dot` into `dir`.
pub fn write_fit_report(dir: impl AsRef<Path>, snapshot: &IterationSnapshot) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let q = snapshot.q();
    fs::write(dir.join("report.json"), report_json(snapshot)? + "\n")?;
    fs::write(dir.join("effects.dot"), export_dot(snapshot, DotView::Effects, q))?;
    fs::write(dir.join("covariances.dot"), export_dot(snapshot, DotView::InducedCovariances, q))?;
    Ok(())
}
