//! Scenario configuration: a JSON document, with dotted-path overrides applied
//! before validation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use tsdyn_core::forcing::{PoissonSequenceSpec, DEFAULT_K_MIN, DEFAULT_Z0};
use tsdyn_core::impulsive::DEFAULT_CERT_GRID;
use tsdyn_core::{Harmonic, ImpulsiveModel, Matrix, PoissonSequence, TimeScaleSpec, TrigComponent, TrigForcing};

use crate::CliError;

/// The built-in example scenario.
pub const EXAMPLE5: &str = include_str!("../configs/example5.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub timescale: TimeScaleConfig,
    /// A in row-major order.
    pub matrix: Vec<f64>,
    /// One entry per component of f.
    pub forcing: Vec<ComponentConfig>,
    pub gamma: GammaConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub windows: Windows,
    #[serde(default)]
    pub stability: StabilityConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeScaleConfig {
    pub theta: f64,
    pub omega: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub harmonics: Vec<HarmonicConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicConfig {
    pub n: u32,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaConfig {
    Logistic {
        r: f64,
        #[serde(default = "default_z0")]
        z0: f64,
        #[serde(default = "default_k_min")]
        k_min: i64,
        c: Vec<f64>,
    },
    /// Keys are interval indices written as strings.
    Table(BTreeMap<String, Vec<f64>>),
}

fn default_z0() -> f64 {
    DEFAULT_Z0
}

fn default_k_min() -> i64 {
    DEFAULT_K_MIN
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub eval_tol: f64,
    pub period_tol: f64,
    pub poisson_eps: f64,
    pub grid_step: f64,
    pub rk_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { eval_tol: 1e-8, period_tol: 1e-6, poisson_eps: 0.05, grid_step: 0.05, rk_step: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Windows {
    pub sim_t0: f64,
    pub sim_t_end: f64,
    /// Initial state of `simulate`; zero when absent.
    #[serde(default)]
    pub sim_y0: Option<Vec<f64>>,
    pub compact_lo: f64,
    pub compact_hi: f64,
    /// Index window for return mining; padded from the compact set when absent.
    #[serde(default)]
    pub return_window: Option<[i64; 2]>,
    #[serde(default = "default_zeta_max")]
    pub zeta_max: i64,
    #[serde(default = "default_max_returns")]
    pub max_returns: usize,
}

fn default_zeta_max() -> i64 {
    100_000
}

fn default_max_returns() -> usize {
    6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityConfig {
    pub seed: u64,
    /// Starts are drawn uniformly from [−spread, spread]ᵐ.
    pub spread: f64,
    /// Horizon in periods ω.
    pub periods: f64,
    pub cert_grid: usize,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig { seed: 2024, spread: 2.0, periods: 10.0, cert_grid: DEFAULT_CERT_GRID }
    }
}

/// A validated configuration with its model built.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub model: ImpulsiveModel,
}

impl Scenario {
    pub fn timescale(&self) -> &TimeScaleSpec {
        self.model.timescale()
    }
}

/// Reads, overrides and validates a configuration file.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))?;
    parse_config(&text, overrides)
}

pub fn parse_config(text: &str, overrides: &[String]) -> Result<Scenario, CliError> {
    let mut doc: Value =
        serde_json::from_str(text).map_err(|e| CliError::Config(vec![format!("parse error: {e}")]))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let config: ScenarioConfig =
        serde_json::from_value(doc).map_err(|e| CliError::Config(vec![format!("parse error: {e}")]))?;
    validate(config)
}

/// `a.b.c=value`; the value is read as JSON, falling back to a plain string.
fn apply_override(doc: &mut Value, spec: &str) -> Result<(), CliError> {
    let (path, raw) =
        spec.split_once('=').ok_or_else(|| CliError::Usage(format!("override `{spec}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Usage(format!("override `{path}`: `{key}` is not inside an object")))?;
        if i + 1 == keys.len() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        node = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Err(CliError::Usage(format!("override `{spec}` has an empty key")))
}

fn validate(config: ScenarioConfig) -> Result<Scenario, CliError> {
    let mut errors = Vec::new();
    let tsc = config.timescale;
    let ts = TimeScaleSpec::new(tsc.theta, tsc.omega, tsc.delta)
        .map_err(|e| errors.push(format!("timescale: {e}")))
        .ok();

    let m = config.forcing.len();
    if m == 0 {
        errors.push("forcing: at least one component is required".into());
    }
    let a = if config.matrix.len() != m * m {
        errors.push(format!("matrix: expected {} entries for a {m}×{m} system, got {}", m * m, config.matrix.len()));
        None
    } else {
        Matrix::from_row_major(&config.matrix).map_err(|e| errors.push(format!("matrix: {e}"))).ok()
    };

    let components = config
        .forcing
        .iter()
        .map(|c| TrigComponent {
            constant: c.constant,
            harmonics: c.harmonics.iter().map(|h| Harmonic { n: h.n, cos: h.cos, sin: h.sin }).collect(),
        })
        .collect();
    let f = TrigForcing::new(tsc.omega, components).map_err(|e| errors.push(format!("forcing: {e}"))).ok();

    let gamma_spec = match &config.gamma {
        GammaConfig::Logistic { r, z0, k_min, c } => {
            if c.len() != m {
                errors.push(format!("gamma.logistic.c: expected {m} entries, got {}", c.len()));
            }
            Some(PoissonSequenceSpec::Logistic { r: *r, z0: *z0, k_min: *k_min, output: c.clone() })
        }
        GammaConfig::Table(entries) => {
            let mut table = BTreeMap::new();
            for (key, v) in entries {
                match key.trim().parse::<i64>() {
                    Ok(k) => {
                        if v.len() != m {
                            errors.push(format!("gamma.table.{key}: expected {m} entries, got {}", v.len()));
                        }
                        table.insert(k, v.clone());
                    }
                    Err(_) => errors.push(format!("gamma.table: key `{key}` is not an integer")),
                }
            }
            Some(PoissonSequenceSpec::Table { table })
        }
    };
    let gamma = gamma_spec.and_then(|s| PoissonSequence::new(s).map_err(|e| errors.push(format!("gamma: {e}"))).ok());

    let tol = config.tolerances;
    for (name, v) in [
        ("eval_tol", tol.eval_tol),
        ("period_tol", tol.period_tol),
        ("poisson_eps", tol.poisson_eps),
        ("grid_step", tol.grid_step),
        ("rk_step", tol.rk_step),
    ] {
        if !(v.is_finite() && v > 0.0) {
            errors.push(format!("tolerances.{name}: must be positive, got {v}"));
        }
    }

    let w = &config.windows;
    if !(w.sim_t0 < w.sim_t_end) {
        errors.push(format!("windows: sim_t0 < sim_t_end violated ({} ≥ {})", w.sim_t0, w.sim_t_end));
    }
    if !(w.compact_lo <= w.compact_hi) {
        errors.push(format!("windows: compact_lo ≤ compact_hi violated ({} > {})", w.compact_lo, w.compact_hi));
    }
    if let Some(y0) = &w.sim_y0 {
        if y0.len() != m || y0.iter().any(|v| !v.is_finite()) {
            errors.push(format!("windows.sim_y0: expected {m} finite entries"));
        }
    }
    if let Some([lo, hi]) = w.return_window {
        if lo > hi {
            errors.push(format!("windows.return_window: {lo} > {hi}"));
        }
    }
    if w.zeta_max < 1 {
        errors.push("windows.zeta_max: must be at least 1".into());
    }
    if w.max_returns == 0 {
        errors.push("windows.max_returns: must be at least 1".into());
    }
    if let Some(ts) = &ts {
        for (name, t) in [("sim_t0", w.sim_t0), ("sim_t_end", w.sim_t_end)] {
            if !ts.contains(t) {
                errors.push(format!("windows.{name}: {t} is not in the time scale"));
            }
        }
        if ts.psi(w.sim_t0).is_err() && ts.contains(w.sim_t0) {
            errors.push(format!("windows.sim_t0: {} is a left endpoint; start inside an interval", w.sim_t0));
        }
    }
    let st = config.stability;
    if !(st.spread.is_finite() && st.spread > 0.0) {
        errors.push("stability.spread: must be positive".into());
    }
    if !(st.periods >= 5.0) {
        errors.push(format!("stability.periods: at least 5 periods are required, got {}", st.periods));
    }
    if st.cert_grid < 2 {
        errors.push("stability.cert_grid: must be at least 2".into());
    }

    if !errors.is_empty() {
        return Err(CliError::Config(errors));
    }
    let model = ImpulsiveModel::new(a.unwrap(), ts.unwrap(), f.unwrap(), gamma.unwrap())
        .map_err(|e| CliError::Config(vec![format!("model: {e}")]))?;
    Ok(Scenario { config, model })
}

/// The bundled example with the given overrides.
pub fn example(overrides: &[String]) -> Result<Scenario, CliError> {
    parse_config(EXAMPLE5, overrides)
}
