//! Experiment configuration: JSON file, environment seed and dotted flag overrides.

use std::path::{Path, PathBuf};

use panto_core::model::{InitialValue, Validate};
use panto_core::{InitialCondition, MatrixMode, Model, Tolerances};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};

use crate::exit::CliError;

pub const SECTIONS: [&str; 4] = ["model", "sim", "analysis", "output"];
pub const SEED_ENV: &str = "PANTO_SEED";
const TOOL: &str = "panto";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Model<f64>,
    pub sim: SimConfig,
    pub analysis: AnalysisConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Step size; the model's stability limit capped at 0.01 when absent.
    pub h: Option<f64>,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub n_paths: usize,
    pub master_seed: u64,
    #[serde(deserialize_with = "initial_condition")]
    pub x0: InitialCondition<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { h: None, t_end: 200.0, n_paths: 1000, master_seed: 0, x0: InitialCondition::constant(1.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Moment order for scalar models; multi-delay and matrix models are mean-square only.
    pub p: u8,
    /// Fit window; `[T/4, T]` when absent.
    pub window: Option<(f64, f64)>,
    pub n_nodes: usize,
    /// Tail window of the almost-sure statistics; `[T/2, T]` when absent.
    pub tail: Option<(f64, f64)>,
    /// Include the almost-sure check; on whenever `T ≥ 100` when absent.
    pub almost_sure: Option<bool>,
    pub matrix_mode: MatrixMode,
    pub tolerances: Tolerances<f64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            p: 1,
            window: None,
            n_nodes: 32,
            tail: None,
            almost_sure: None,
            matrix_mode: MatrixMode::default(),
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

/// The output directory is not part of the serialized config, so a manifest
/// replays identically into any directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing)]
    pub directory: Option<PathBuf>,
    pub formats: Vec<Format>,
    pub plot: bool,
    pub dump_paths: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: None, formats: vec![Format::Csv, Format::Json], plot: true, dump_paths: false }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

fn initial_condition<'de, D: Deserializer<'de>>(d: D) -> Result<InitialCondition<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Bare(InitialValue<f64>),
        Full(InitialCondition<f64>),
    }
    Ok(match Raw::deserialize(d)? {
        Raw::Bare(InitialValue::Scalar(x)) => InitialCondition::constant(x),
        Raw::Bare(InitialValue::Vector(v)) => InitialCondition::vector(v),
        Raw::Full(ic) => ic,
    })
}

/// Everything a run needs to reproduce its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub master_seed: u64,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            master_seed: config.sim.master_seed,
            config: config.clone(),
        }
    }
}

/// A `--section.key=value` flag split into its key path and JSON value.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub path: Vec<String>,
    pub value: Value,
}

impl Override {
    /// Parses `section.key.sub=value`; hyphens in keys become underscores.
    /// The value is JSON when it parses as JSON and a string otherwise.
    pub fn parse(flag: &str, value: &str) -> Result<Self, CliError> {
        let path: Vec<String> = flag.split('.').map(|s| s.replace('-', "_")).collect();
        if path.len() < 2 || path.iter().any(String::is_empty) || !SECTIONS.contains(&path[0].as_str()) {
            return Err(CliError::Config(format!("bad override --{flag}")));
        }
        let value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_owned()));
        Ok(Self { path, value })
    }

    fn apply(&self, root: &mut Value) -> Result<(), CliError> {
        let mut node = root;
        for key in &self.path[..self.path.len() - 1] {
            let obj = node
                .as_object_mut()
                .ok_or_else(|| CliError::Config(format!("override --{} crosses a non-object", self.path.join("."))))?;
            node = obj.entry(key.clone()).or_insert_with(|| Value::Object(Map::new()));
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("override --{} crosses a non-object", self.path.join("."))))?;
        obj.insert(self.path[self.path.len() - 1].clone(), self.value.clone());
        Ok(())
    }
}

/// Splits `--model.*`, `--sim.*`, `--analysis.*` and `--output.*` flags off the
/// argument list. Both `--a.b=v` and `--a.b v` are accepted.
pub fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<Override>), CliError> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let dotted = arg
            .strip_prefix("--")
            .filter(|s| SECTIONS.iter().any(|sec| s.starts_with(&format!("{sec}."))))
            .map(str::to_owned);
        match dotted {
            Some(body) => {
                let (flag, value) = match body.split_once('=') {
                    Some((f, v)) => (f.to_owned(), v.to_owned()),
                    None => {
                        let v = it.next().ok_or_else(|| CliError::Config(format!("--{body} needs a value")))?;
                        (body, v)
                    }
                };
                overrides.push(Override::parse(&flag, &value)?);
            }
            None => rest.push(arg),
        }
    }
    Ok((rest, overrides))
}

fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, top) => *slot = top,
    }
}

fn defaults() -> Value {
    serde_json::json!({
        "sim": SimConfig::default(),
        "analysis": AnalysisConfig::default(),
        "output": OutputConfig::default(),
    })
}

/// Reads a config file, or the config embedded in a manifest.
pub fn read_file(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut v: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if v.get("tool").and_then(Value::as_str) == Some(TOOL) {
        if let Some(inner) = v.get_mut("config") {
            v = inner.take();
        }
    }
    Ok(v)
}

/// Defaults, then the file, then `PANTO_SEED`, then flags.
pub fn resolve(
    file: Option<Value>,
    seed_env: Option<&str>,
    overrides: &[Override],
    out: Option<PathBuf>,
) -> Result<ExperimentConfig, CliError> {
    let mut root = defaults();
    if let Some(f) = file {
        if !f.is_object() {
            return Err(CliError::Config("config must be a JSON object".into()));
        }
        merge(&mut root, f);
    }
    if let Some(s) = seed_env {
        let seed: u64 = s.trim().parse().map_err(|_| CliError::Config(format!("{SEED_ENV}={s} is not a u64")))?;
        root["sim"]["master_seed"] = seed.into();
    }
    for o in overrides {
        o.apply(&mut root)?;
    }
    if root.get("model").is_none() {
        return Err(CliError::Config("no model section".into()));
    }
    if let Some(m) = root["model"].get_mut("matrix").and_then(Value::as_object_mut) {
        if !m.contains_key("d") {
            let d = m.get("A").and_then(Value::as_array).map_or(0, Vec::len);
            m.insert("d".into(), d.into());
        }
    }
    let mut cfg: ExperimentConfig = serde_json::from_value(root).map_err(|e| CliError::Config(e.to_string()))?;
    if out.is_some() {
        cfg.output.directory = out;
    }
    cfg.check()?;
    Ok(cfg)
}

impl ExperimentConfig {
    /// Validates the model and the simulation and analysis settings.
    pub fn check(&mut self) -> Result<(), CliError> {
        self.model = self.model.clone().validate().map_err(CliError::from_core)?;
        let dim = self.model.dim();
        self.sim.x0.check(dim).map_err(CliError::from_core)?;
        let s = &self.sim;
        if !(s.t_end.is_finite() && s.t_end > 0.0) {
            return Err(CliError::Config(format!("T = {} must be positive", s.t_end)));
        }
        if let Some(h) = s.h {
            if !(h.is_finite() && h > 0.0) {
                return Err(CliError::Config(format!("h = {h} must be positive")));
            }
        }
        if s.n_paths == 0 {
            return Err(CliError::Config("n_paths must be at least 1".into()));
        }
        let a = &self.analysis;
        if !matches!(self.model, Model::Scalar(_)) && a.p != 2 {
            // mean square is the only order with an analytic result off the scalar family
            self.analysis.p = 2;
        }
        if !matches!(self.analysis.p, 1 | 2) {
            return Err(CliError::Config(format!("p = {} must be 1 or 2", self.analysis.p)));
        }
        for (name, w) in [("window", self.analysis.window), ("tail", self.analysis.tail)] {
            if let Some((lo, hi)) = w {
                if !(lo > 0.0 && lo < hi && hi <= self.sim.t_end) {
                    return Err(CliError::Config(format!("{name} [{lo}, {hi}] must lie in (0, T]")));
                }
            }
        }
        if self.analysis.n_nodes < 2 {
            return Err(CliError::Config("n_nodes must be at least 2".into()));
        }
        Ok(())
    }

    pub fn window(&self) -> (f64, f64) {
        self.analysis.window.unwrap_or((self.sim.t_end / 4.0, self.sim.t_end))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.output.directory.clone().unwrap_or_else(|| PathBuf::from("panto-out"))
    }
}
