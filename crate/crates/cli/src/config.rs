//! TOML run configuration.

use std::fmt;
use std::path::Path;

use anyhow::{anyhow, bail, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Deserialize;
use vch_core::estimators::{Part, ShotPlan};
use vch_core::histories::{ModelSpec, RankPartition, Segment};
use vch_core::models::{chiral_model, spin_field_model, ChiralConfig, SpinFieldConfig};
use vch_core::qmath::Operator;
use vch_core::report::{ReadoutPlan, ReadoutThreshold};
use vch_core::vchloop::{AnsatzKind, AnsatzSpec, Axis, CostMode, Grid, OptimizerConfig};

/// Problem with the configuration file or command-line values.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(ConfigError(msg.into()))
}

/// `"exact"` or a positive shot count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShotsArg {
    Exact,
    Finite(u64),
}

impl std::str::FromStr for ShotsArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("exact") {
            return Ok(ShotsArg::Exact);
        }
        match s.parse::<u64>() {
            Ok(0) | Err(_) => Err(format!("expected \"exact\" or a positive integer, got {s:?}")),
            Ok(n) => Ok(ShotsArg::Finite(n)),
        }
    }
}

impl<'de> Deserialize<'de> for ShotsArg {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(0) => Err("shot count must be positive".to_string()),
            Raw::Count(n) => Ok(ShotsArg::Finite(n)),
            Raw::Word(w) => w.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

type RawMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    shots: Option<ShotsArg>,
    workers: Option<usize>,
    model: toml::Table,
    ansatz: Option<AnsatzSection>,
    #[serde(default)]
    cost: CostSection,
    #[serde(default)]
    optimizer: OptimizerConfig,
    grid: Option<GridSection>,
    readout: Option<ReadoutSection>,
    element: Option<ElementSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnsatzSection {
    kind: String,
    k: Option<usize>,
    #[serde(default)]
    stationary: bool,
    partition: Option<Vec<Vec<usize>>>,
    qubits: Option<usize>,
    layers: Option<usize>,
    params: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostSection {
    #[serde(default)]
    mode: CostMode,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    axes: Option<Vec<Axis>>,
    sphere: Option<SphereSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SphereSection {
    #[serde(default = "default_subdivisions")]
    subdivisions: usize,
}

fn default_subdivisions() -> usize {
    2
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReadoutSection {
    #[serde(default = "default_n_readout")]
    n_readout: u64,
    exact: Option<bool>,
    #[serde(default = "default_eps_max")]
    eps_max: f64,
    #[serde(default)]
    threshold: ReadoutThreshold,
}

impl Default for ReadoutSection {
    fn default() -> Self {
        Self { n_readout: default_n_readout(), exact: None, eps_max: default_eps_max(), threshold: ReadoutThreshold::Poisson }
    }
}

fn default_n_readout() -> u64 {
    1_000_000
}

fn default_eps_max() -> f64 {
    0.05
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ElementSection {
    a: Option<String>,
    b: Option<String>,
    part: Option<Part>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CustomModel {
    s_dims: Vec<usize>,
    #[serde(default)]
    e_dims: Vec<usize>,
    rho: Option<RawMatrix>,
    psi: Option<Vec<[f64; 2]>>,
    segments: Vec<RawSegment>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSegment {
    unitary: Option<RawMatrix>,
    hamiltonian: Option<RawMatrix>,
    dt: Option<f64>,
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub shots: Option<ShotsArg>,
    pub workers: Option<usize>,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub shots: ShotsArg,
    pub workers: Option<usize>,
    pub model: ModelSpec,
    pub model_name: String,
    pub ansatz: Option<AnsatzSpec>,
    pub params: Option<Vec<f64>>,
    pub mode: CostMode,
    pub optimizer: OptimizerConfig,
    pub grid: Option<Grid>,
    pub readout: ReadoutPlan,
    pub element: (Option<String>, Option<String>, Option<Part>),
}

impl RunConfig {
    pub fn plan(&self) -> ShotPlan {
        match self.shots {
            ShotsArg::Exact => ShotPlan { shots: vch_core::estimators::Shots::Exact, seed: self.seed },
            ShotsArg::Finite(n) => ShotPlan { shots: vch_core::estimators::Shots::Finite(n), seed: self.seed },
        }
    }

    pub fn ansatz(&self) -> Result<&AnsatzSpec> {
        self.ansatz.as_ref().ok_or_else(|| config_err("missing [ansatz] section"))
    }

    /// Ansatz parameters given in `[ansatz] params`.
    pub fn params(&self) -> Result<&[f64]> {
        self.params.as_deref().ok_or_else(|| config_err("missing [ansatz] params"))
    }

    pub fn grid(&self) -> Result<&Grid> {
        self.grid.as_ref().ok_or_else(|| config_err("missing [grid] section"))
    }
}

pub fn load(path: &Path, over: &Overrides) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    parse(&text, over)
}

pub fn parse(text: &str, over: &Overrides) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
    let (model, model_name) = build_model(raw.model)?;
    let shots = over.shots.or(raw.shots).unwrap_or(ShotsArg::Exact);
    let seed = over.seed.or(raw.seed).unwrap_or(0);
    let workers = over.workers.or(raw.workers);
    if workers == Some(0) {
        bail!(ConfigError("workers must be at least 1".into()));
    }

    let (ansatz, params) = match raw.ansatz {
        Some(a) => {
            let (spec, params) = build_ansatz(a, &model)?;
            (Some(spec), params)
        }
        None => (None, None),
    };

    let grid = match raw.grid {
        None => None,
        Some(GridSection { axes: Some(a), sphere: None }) => Some(Grid::Axes(a)),
        Some(GridSection { axes: None, sphere: Some(s) }) => Some(Grid::Sphere { subdivisions: s.subdivisions }),
        Some(_) => bail!(ConfigError("[grid] needs exactly one of `axes` or `sphere`".into())),
    };

    let r = raw.readout.unwrap_or_default();
    let readout = ReadoutPlan {
        n_readout: r.n_readout,
        exact: r.exact.unwrap_or(shots == ShotsArg::Exact),
        seed: ShotPlan::exact().derive("readout").derive_index(seed).seed,
        eps_max: r.eps_max,
        threshold: r.threshold,
    };
    if !(readout.eps_max > 0.0 && readout.eps_max <= 1.0) || readout.n_readout == 0 {
        bail!(ConfigError("[readout] needs n_readout >= 1 and eps_max in (0, 1]".into()));
    }

    let e = raw.element.unwrap_or_default();
    Ok(RunConfig {
        seed,
        shots,
        workers,
        model,
        model_name,
        ansatz,
        params,
        mode: raw.cost.mode,
        optimizer: raw.optimizer,
        grid,
        readout,
        element: (e.a, e.b, e.part),
    })
}

fn build_model(mut table: toml::Table) -> Result<(ModelSpec, String)> {
    let name = match table.remove("builtin") {
        Some(toml::Value::String(s)) => s,
        Some(_) => bail!(ConfigError("[model] builtin must be a string".into())),
        None => bail!(ConfigError("[model] needs `builtin = \"spin-field\" | \"chiral\" | \"custom\"`".into())),
    };
    let value = toml::Value::Table(table);
    let model = match name.as_str() {
        "spin-field" => {
            let cfg: SpinFieldConfig = value.try_into().map_err(|e| config_err(format!("[model]: {e}")))?;
            spin_field_model(&cfg)
        }
        "chiral" => {
            let cfg: ChiralConfig = value.try_into().map_err(|e| config_err(format!("[model]: {e}")))?;
            chiral_model(&cfg)
        }
        "custom" => {
            let cfg: CustomModel = value.try_into().map_err(|e| config_err(format!("[model]: {e}")))?;
            custom_model(cfg)
        }
        other => bail!(ConfigError(format!("unknown builtin model {other:?}"))),
    }
    .map_err(|e| config_err(e.to_string()))?;
    Ok((model, name))
}

fn matrix(raw: &RawMatrix, what: &str) -> Result<DMatrix<Complex64>> {
    let n = raw.len();
    if n == 0 || raw.iter().any(|r| r.len() != n) {
        bail!(ConfigError(format!("{what} must be a non-empty square matrix of [re, im] pairs")));
    }
    Ok(DMatrix::from_fn(n, n, |r, c| Complex64::new(raw[r][c][0], raw[r][c][1])))
}

fn custom_model(cfg: CustomModel) -> vch_core::Result<ModelSpec> {
    let dims: Vec<usize> = cfg.s_dims.iter().chain(&cfg.e_dims).copied().collect();
    let bad = |e: anyhow::Error| vch_core::Error::InvalidConfig(e.to_string());
    let rho = match (cfg.rho, cfg.psi) {
        (Some(r), None) => Operator::new(dims.clone(), matrix(&r, "rho").map_err(bad)?)?,
        (None, Some(p)) => {
            let psi: Vec<Complex64> = p.iter().map(|z| Complex64::new(z[0], z[1])).collect();
            let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(vch_core::Error::InvalidModel("psi is the zero vector".into()));
            }
            let psi: Vec<Complex64> = psi.iter().map(|z| z / norm).collect();
            Operator::projector_onto(dims.clone(), &psi)?
        }
        _ => return Err(vch_core::Error::InvalidConfig("custom model needs exactly one of `rho` or `psi`".into())),
    };
    let segments = cfg
        .segments
        .iter()
        .map(|s| match (&s.unitary, &s.hamiltonian, s.dt) {
            (Some(u), None, None) => Ok(Segment::Unitary(Operator::new(dims.clone(), matrix(u, "unitary").map_err(bad)?)?)),
            (None, Some(h), Some(dt)) => Ok(Segment::Hamiltonian { h: Operator::new(dims.clone(), matrix(h, "hamiltonian").map_err(bad)?)?, dt }),
            _ => Err(vch_core::Error::InvalidConfig("each segment needs `unitary`, or `hamiltonian` with `dt`".into())),
        })
        .collect::<vch_core::Result<Vec<_>>>()?;
    ModelSpec::new(rho, segments, cfg.s_dims, cfg.e_dims)
}

fn build_ansatz(a: AnsatzSection, model: &ModelSpec) -> Result<(AnsatzSpec, Option<Vec<f64>>)> {
    let kind = match a.kind.as_str() {
        "azimuth-xy" => AnsatzKind::AzimuthXy,
        "bloch-axis" => AnsatzKind::BlochAxis,
        "single-qubit-general" => AnsatzKind::SingleQubitGeneral,
        "layered-multi-qubit" => AnsatzKind::LayeredMultiQubit {
            qubits: a.qubits.ok_or_else(|| config_err("layered-multi-qubit needs `qubits`"))?,
            layers: a.layers.ok_or_else(|| config_err("layered-multi-qubit needs `layers`"))?,
        },
        other => bail!(ConfigError(format!("unknown ansatz kind {other:?}"))),
    };
    if !matches!(kind, AnsatzKind::LayeredMultiQubit { .. }) && (a.qubits.is_some() || a.layers.is_some()) {
        bail!(ConfigError("`qubits` and `layers` apply only to layered-multi-qubit".into()));
    }
    if kind.s_dims() != model.s_dims() {
        bail!(ConfigError(format!("ansatz acts on S dims {:?} but the model has {:?}", kind.s_dims(), model.s_dims())));
    }
    let k = a.k.unwrap_or(model.k());
    if k != model.k() {
        bail!(ConfigError(format!("ansatz k = {k} but the model has {} segments", model.k())));
    }
    let mut spec = AnsatzSpec::new(kind, k, a.stationary).map_err(|e| config_err(e.to_string()))?;
    if let Some(groups) = a.partition {
        let p = RankPartition::new(groups, model.s_dim()).map_err(|e| config_err(e.to_string()))?;
        spec = spec.with_partition(p).map_err(|e| config_err(e.to_string()))?;
    }
    if let Some(p) = &a.params {
        if p.len() != spec.param_count() {
            bail!(ConfigError(format!("[ansatz] params has {} values, the ansatz takes {}", p.len(), spec.param_count())));
        }
    }
    Ok((spec, a.params))
}
