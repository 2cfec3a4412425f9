//! Run configuration: a TOML file, flag overrides on top, then typed sections.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::failure::Failure;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    /// Seed of `random_bump` fields.
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub function: FunctionConfig,
    pub params: ParamsConfig,
    pub window: WindowConfig,
    pub base: BaseConfig,
    pub point: PointConfig,
    pub norm: NormConfig,
    pub minpoly: MinpolyConfig,
    pub seqop: SeqopConfig,
    pub transport: TransportConfig,
    pub harness: HarnessOverrides,
    pub verify: VerifyConfig,
    pub example_b: ExampleBConfig,
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FunctionConfig {
    /// Registry spec `name(args)`, `random_bump`, or a grid file (`.bin`/`.csv`).
    pub spec: String,
    pub dim: usize,
    /// Second factor of the product check.
    pub other: String,
}

impl Default for FunctionConfig {
    fn default() -> Self {
        FunctionConfig {
            spec: "abs".into(),
            dim: 1,
            other: "gauss".into(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsConfig {
    pub s: f64,
    pub q: f64,
    pub p: f64,
    pub degree: i32,
    pub k: u32,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        ParamsConfig {
            s: 1.0,
            q: 1.0,
            p: 2.0,
            degree: 1,
            k: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub j_min: i32,
    pub j_max: i32,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig { j_min: -12, j_max: 8 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseConfig {
    /// Box `[-half, half]^n` unless `lo`/`hi` are given.
    pub half: f64,
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
    pub per_axis: usize,
    pub critical_points: bool,
}

impl Default for BaseConfig {
    fn default() -> Self {
        BaseConfig {
            half: 1.0,
            lo: None,
            hi: None,
            per_axis: 41,
            critical_points: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointConfig {
    /// Center; the origin when absent (for `osc`, the base points).
    pub x0: Option<Vec<f64>>,
    pub r: f64,
}

impl Default for PointConfig {
    fn default() -> Self {
        PointConfig { x0: None, r: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    #[default]
    Seminorm,
    Full,
    Tilde,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormConfig {
    pub kind: NormKind,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinpolyConfig {
    /// δ schedule; the default continuation when absent.
    pub deltas: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeqopConfig {
    /// `j,value` CSV; otherwise `values` starting at `j_min`.
    pub input: Option<PathBuf>,
    pub j_min: i32,
    pub values: Vec<f64>,
    pub alpha: f64,
    pub q: f64,
    /// When set, the two-operator bound with inner exponent `p` is checked too.
    pub beta: Option<f64>,
    pub p: f64,
}

impl Default for SeqopConfig {
    fn default() -> Self {
        SeqopConfig {
            input: None,
            j_min: 0,
            values: Vec::new(),
            alpha: 1.0,
            q: 1.0,
            beta: None,
            p: 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportConfig {
    /// A calibration problem (`static`, `translation`, `rotation`, `rotation_source`);
    /// otherwise the problem is built from `function.spec`, `velocity` and `source`.
    pub problem: Option<String>,
    pub velocity: String,
    /// `zero` or a registry spec.
    pub source: String,
    /// Modulates the source by `cos(omega t)`.
    pub omega: Option<f64>,
    pub horizon: f64,
    /// Defaults to `horizon / 512`.
    pub dt: Option<f64>,
    /// Snapshot times; defaults to the horizon.
    pub times: Option<Vec<f64>>,
    pub half: f64,
    pub spacing: f64,
    pub interpolation: campanato_core::grid::Interpolation,
}

impl Default for TransportConfig {
    fn default() -> Self {
        TransportConfig {
            problem: None,
            velocity: "zero".into(),
            source: "zero".into(),
            omega: None,
            horizon: 1.0,
            dt: None,
            times: None,
            half: 1.0,
            spacing: 1.0 / 32.0,
            interpolation: campanato_core::grid::Interpolation::Cubic,
        }
    }
}

/// Overrides of the harness defaults for the problem dimension.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessOverrides {
    pub checkpoints: Option<usize>,
    pub per_axis: Option<usize>,
    pub half: Option<f64>,
    pub j_min: Option<i32>,
    pub j_max: Option<i32>,
    pub spacing: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inequality {
    #[default]
    Estimate1,
    Estimate2,
    Estimate3,
    Estimate4,
    Local,
    Suite,
    Embedding,
    Growth,
    Interpolation,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub inequality: Inequality,
    /// Exponents of the estimate; the calibrated ones when absent.
    pub s: Option<f64>,
    pub q: Option<f64>,
    pub p: Option<f64>,
    pub degree: Option<i32>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExampleBConfig {
    pub p: f64,
    pub samples: usize,
    pub j_min: i32,
    pub j_max: i32,
    pub extend: i32,
}

impl Default for ExampleBConfig {
    fn default() -> Self {
        ExampleBConfig {
            p: 2.0,
            samples: 101,
            j_min: -20,
            j_max: 4,
            extend: 4,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// JSON report; stdout when absent.
    pub report: Option<PathBuf>,
    /// CSV series or profile.
    pub csv: Option<PathBuf>,
    /// Grid snapshot of `solve` (`.csv` extension selects the CSV layout).
    pub grid: Option<PathBuf>,
}

/// Reads `path` (if any), applies `overrides` as `dotted.key = value` and
/// deserializes the result.
pub fn load(path: Option<&Path>, overrides: &[(String, Value)]) -> Result<RunConfig, Failure> {
    let mut table = match path {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).map_err(|e| Failure::usage(format!("config {}: {e}", p.display())))?;
            text.parse::<Table>()
                .map_err(|e| Failure::usage(format!("config {}: {e}", p.display())))?
        }
        None => Table::new(),
    };
    for (key, value) in overrides {
        set(&mut table, key, value.clone())?;
    }
    RunConfig::deserialize(Value::Table(table)).map_err(|e| Failure::usage(format!("config: {e}")))
}

fn set(table: &mut Table, key: &str, value: Value) -> Result<(), Failure> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Failure::usage(format!("empty key `{key}`")))?;
    let mut cur = table;
    for part in parts {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Failure::usage(format!("`{part}` in `{key}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// A `--set` value: TOML syntax when it parses, a bare string otherwise.
pub fn parse_value(text: &str) -> Value {
    format!("v = {text}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(text.to_string()))
}
