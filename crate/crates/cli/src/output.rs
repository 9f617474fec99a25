//! CSV and JSON writers with round-trip float formatting.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{Number, Value};
use vch_core::vchloop::{CostMode, ScanRow};

/// 17 significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Rewrites every non-integer number with 17 significant digits.
fn reformat(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                if let Ok(m) = serde_json::from_str::<Number>(&fmt_f64(x)) {
                    *n = m;
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(reformat),
        Value::Object(o) => o.values_mut().for_each(reformat),
        _ => {}
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    reformat(&mut v);
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

/// Landscape rows: `param_1..param_m[,x,y,z],cost,cost_stderr`, plus
/// `cost_pt,cost_pt_stderr` in `both` mode. `cost` is the mode's objective,
/// except in `both` mode where it is the full-trace cost.
pub fn landscape_csv(rows: &[ScanRow], mode: CostMode) -> String {
    let m = rows.first().map_or(0, |r| r.params.len());
    let sphere = rows.first().is_some_and(|r| r.axis.is_some());
    let mut head: Vec<String> = (1..=m).map(|i| format!("param_{i}")).collect();
    if sphere {
        head.extend(["x", "y", "z"].map(String::from));
    }
    head.extend(["cost", "cost_stderr"].map(String::from));
    if mode == CostMode::Both {
        head.extend(["cost_pt", "cost_pt_stderr"].map(String::from));
    }
    let mut out = head.join(",") + "\n";
    for r in rows {
        let mut cells: Vec<String> = r.params.iter().map(|&p| fmt_f64(p)).collect();
        if let Some(ax) = r.axis {
            cells.extend(ax.map(fmt_f64));
        }
        match mode {
            CostMode::Both => {
                cells.push(fmt_f64(r.cost.c));
                cells.push(fmt_f64(r.cost.c_stderr));
                cells.push(fmt_opt(r.cost.c_pt));
                cells.push(fmt_opt(r.cost.c_pt_stderr));
            }
            _ => {
                let (v, s) = r.cost.objective(mode);
                cells.push(fmt_f64(v));
                cells.push(fmt_f64(s));
            }
        }
        out += &cells.join(",");
        out.push('\n');
    }
    out
}

/// Writes to `path`, or to stdout when absent.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}
