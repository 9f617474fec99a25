//! Subcommand implementations. Each returns the text to emit.

use anyhow::{anyhow, Result};
use serde::Serialize;
use vch_core::branchstate::build_branched_state;
use vch_core::estimators::{element_readout, Part};
use vch_core::histories::HistoryLabel;
use vch_core::report::{build_report, ConsistencyReport};
use vch_core::vchloop::{cost_of_state, landscape_scan, optimize, CostMode, CostValue, RunSummary};
use vch_core::verify::{run_verify, Mutation, VerifyReport};

use crate::config::{ConfigError, RunConfig, ShotsArg};
use crate::output::{landscape_csv, to_json};

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum ShotsOut {
    Word(&'static str),
    Count(u64),
}

fn shots_out(s: ShotsArg) -> ShotsOut {
    match s {
        ShotsArg::Exact => ShotsOut::Word("exact"),
        ShotsArg::Finite(n) => ShotsOut::Count(n),
    }
}

#[derive(Debug, Serialize)]
struct RunHeader {
    command: &'static str,
    model: String,
    seed: u64,
    shots: ShotsOut,
    mode: CostMode,
}

fn header(cfg: &RunConfig, command: &'static str) -> RunHeader {
    RunHeader { command, model: cfg.model_name.clone(), seed: cfg.seed, shots: shots_out(cfg.shots), mode: cfg.mode }
}

pub fn landscape(cfg: &RunConfig) -> Result<String> {
    let rows = landscape_scan(&cfg.model, cfg.ansatz()?, cfg.grid()?, cfg.mode, &cfg.plan())?;
    Ok(landscape_csv(&rows, cfg.mode))
}

#[derive(Debug, Serialize)]
struct MinimumOut {
    params: Vec<f64>,
    run: usize,
    cost: CostValue,
    report: ConsistencyReport,
}

#[derive(Debug, Serialize)]
struct OptimizeOut {
    #[serde(flatten)]
    header: RunHeader,
    param_count: usize,
    minima: Vec<MinimumOut>,
    runs: Vec<RunSummary>,
    total_evaluations: usize,
    budget_exhausted_runs: usize,
}

pub fn optimize_cmd(cfg: &RunConfig) -> Result<String> {
    let ansatz = cfg.ansatz()?;
    let res = optimize(&cfg.model, ansatz, cfg.mode, &cfg.plan(), &cfg.optimizer)?;
    let minima = res
        .minima
        .into_iter()
        .map(|m| {
            let state = build_branched_state(&cfg.model, &ansatz.family(&m.params)?)?;
            let report = build_report(&state, m.cost, &cfg.readout)?;
            Ok(MinimumOut { params: m.params, run: m.run, cost: m.cost, report })
        })
        .collect::<vch_core::Result<Vec<_>>>()?;
    let out = OptimizeOut {
        header: header(cfg, "optimize"),
        param_count: ansatz.param_count(),
        budget_exhausted_runs: res.runs.iter().filter(|r| r.budget_exhausted).count(),
        minima,
        runs: res.runs,
        total_evaluations: res.total_evaluations,
    };
    to_json(&out)
}

#[derive(Debug, Serialize)]
struct HistoryOut {
    label: String,
    probability: f64,
}

#[derive(Debug, Serialize)]
struct ProbabilitiesOut {
    #[serde(flatten)]
    header: RunHeader,
    params: Vec<f64>,
    histories: Vec<HistoryOut>,
    report: ConsistencyReport,
}

pub fn probabilities(cfg: &RunConfig) -> Result<String> {
    let ansatz = cfg.ansatz()?;
    let params = cfg.params()?.to_vec();
    let family = ansatz.family(&params)?;
    let state = build_branched_state(&cfg.model, &family)?;
    let cost = cost_of_state(&state, cfg.mode, &cfg.plan())?;
    let report = build_report(&state, cost, &cfg.readout)?;
    let histories = family
        .labels()
        .into_iter()
        .zip(state.probabilities())
        .map(|(l, p)| HistoryOut { label: l.to_string(), probability: p })
        .collect();
    to_json(&ProbabilitiesOut { header: header(cfg, "probabilities"), params, histories, report })
}

#[derive(Debug, Serialize)]
struct ElementOut {
    #[serde(flatten)]
    header: RunHeader,
    params: Vec<f64>,
    a: String,
    b: String,
    part: Part,
    value: f64,
    stderr: f64,
}

/// Estimates one part of `D(a, b)`. Command-line labels override `[element]`.
pub fn element(cfg: &RunConfig, a: Option<&str>, b: Option<&str>, part: Option<Part>) -> Result<String> {
    let ansatz = cfg.ansatz()?;
    let params = cfg.params()?.to_vec();
    let a = a.map(str::to_string).or_else(|| cfg.element.0.clone()).ok_or_else(|| anyhow!(ConfigError("missing history label a".into())))?;
    let b = b.map(str::to_string).or_else(|| cfg.element.1.clone()).ok_or_else(|| anyhow!(ConfigError("missing history label b".into())))?;
    let part = part.or(cfg.element.2).unwrap_or(Part::Real);
    let family = ansatz.family(&params)?;
    let dims = family.ancilla_dims();
    let la = HistoryLabel::parse(&a, &dims)?;
    let lb = HistoryLabel::parse(&b, &dims)?;
    let state = build_branched_state(&cfg.model, &family)?;
    let est = element_readout(&state, &la, &lb, part, &cfg.plan().derive("element"))?;
    to_json(&ElementOut { header: header(cfg, "element"), params, a: la.to_string(), b: lb.to_string(), part, value: est.value, stderr: est.stderr })
}

/// Returns the printable suite lines and the report.
pub fn verify(cases: u64, mutation: Mutation) -> Result<(String, VerifyReport)> {
    let rep = run_verify(cases, mutation)?;
    let mut text: String = rep.suites.iter().map(|s| format!("{s}\n")).collect();
    text += if rep.passed() { "verify: PASS\n" } else { "verify: FAIL\n" };
    Ok((text, rep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse, Overrides};

    const CFG: &str = r#"
[model]
builtin = "spin-field"
[ansatz]
kind = "azimuth-xy"
params = [0.0, 0.0]
[grid]
axes = [{ start = 0.0, stop = 3.0, count = 3 }, { start = 0.0, stop = 3.0, count = 2 }]
[optimizer]
restarts = 2
[element]
a = "00"
b = "10"
"#;

    fn cfg() -> RunConfig {
        parse(CFG, &Overrides::default()).unwrap()
    }

    #[test]
    fn landscape_has_one_row_per_point() {
        let s = landscape(&cfg()).unwrap();
        assert_eq!(s.lines().count(), 1 + 6);
        let first: Vec<f64> = s.lines().nth(1).unwrap().split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(&first[..2], &[0.0, 0.0]);
        assert!((first[2] - 0.1709085765514323).abs() < 1e-14);
    }

    #[test]
    fn element_matches_decoherence_entry() {
        let v: serde_json::Value = serde_json::from_str(&element(&cfg(), None, None, None).unwrap()).unwrap();
        assert!((v["value"].as_f64().unwrap() + 0.20670545260795145).abs() < 1e-14);
        assert_eq!(v["stderr"].as_f64().unwrap(), 0.0);
        let v: serde_json::Value = serde_json::from_str(&element(&cfg(), Some("01"), Some("01"), None).unwrap()).unwrap();
        assert!((v["value"].as_f64().unwrap() - 0.2067054526079515).abs() < 1e-14);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let v: serde_json::Value = serde_json::from_str(&probabilities(&cfg()).unwrap()).unwrap();
        let total: f64 = v["histories"].as_array().unwrap().iter().map(|h| h["probability"].as_f64().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(v["histories"][2]["label"], "10");
    }

    #[test]
    fn optimize_reports_each_minimum() {
        let v: serde_json::Value = serde_json::from_str(&optimize_cmd(&cfg()).unwrap()).unwrap();
        assert_eq!(v["runs"].as_array().unwrap().len(), 2);
        for m in v["minima"].as_array().unwrap() {
            assert!(m["cost"]["c"].as_f64().unwrap() < 1e-8);
            assert!(m["report"]["retained"].is_array());
        }
    }

    #[test]
    fn verify_reports_mutation() {
        let (text, rep) = verify(5, Mutation::SignFlip).unwrap();
        assert!(!rep.passed());
        assert!(text.contains("FAIL route-equivalence"));
    }
}
