//! Run configuration: strict JSON parsing, preset resolution, serialization.

use std::fmt;
use std::str::FromStr;

use geomgate::fock::FockDim;
use geomgate::{ModelKind, Preset, SystemParams};
use serde_json::{Map, Number, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config is not valid JSON: {0}")]
    Syntax(String),
    #[error("config must be a JSON object")]
    NotAnObject,
    #[error("missing required field `{0}`")]
    MissingField(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("field `{0}` is not a finite number")]
    NonFiniteValue(String),
    #[error("field `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
}

impl ConfigError {
    pub fn name(&self) -> &'static str {
        match self {
            ConfigError::Syntax(_) => "Syntax",
            ConfigError::NotAnObject => "NotAnObject",
            ConfigError::MissingField(_) => "MissingField",
            ConfigError::UnknownField(_) => "UnknownField",
            ConfigError::NonFiniteValue(_) => "NonFiniteValue",
            ConfigError::InvalidValue { .. } => "InvalidValue",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl OutputFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            _ => Err(format!("unknown format `{s}` (expected json or csv)")),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Physics fields a preset overrides. `model_kind`, `n_max` and `dt` stay
/// under the config's control.
pub const PRESET_FIELDS: [&str; 7] = ["g", "omega", "delta_large", "delta_small", "gamma_cav", "gamma_r", "t_total"];

const REQUIRED: [&str; 6] = ["omega", "delta_large", "delta_small", "n_max", "t_total", "model_kind"];

const KNOWN: [&str; 13] = [
    "g",
    "omega",
    "delta_large",
    "delta_small",
    "gamma_cav",
    "gamma_r",
    "n_max",
    "t_total",
    "dt",
    "model_kind",
    "preset",
    "output_path",
    "format",
];

/// Everything a run needs. `params.dt` is always resolved; `auto_dt` records
/// that it came from [`SystemParams::default_dt`] and should follow changes
/// of the other parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: SystemParams,
    pub auto_dt: bool,
    pub preset: Option<Preset>,
    pub output_path: Option<String>,
    pub format: OutputFormat,
}

impl RunConfig {
    pub fn from_preset(preset: Preset) -> Self {
        RunConfig { params: preset.params(), auto_dt: true, preset: Some(preset), output_path: None, format: OutputFormat::Json }
    }

    /// Applies `preset` over the physics fields, logging each value it changes.
    pub fn apply_preset(&mut self, preset: Preset) {
        let p = preset.params();
        for key in PRESET_FIELDS {
            let (old, new) = (get_f64(&self.params, key), get_f64(&p, key));
            if old != new {
                log::info!("preset {} overrides {key}: {old} -> {new}", preset.name());
            }
            set_f64(&mut self.params, key, new);
        }
        self.preset = Some(preset);
        self.refresh_dt();
    }

    /// Recomputes `dt` from the current parameters when it was not given.
    pub fn refresh_dt(&mut self) {
        if self.auto_dt {
            self.params.dt = self.params.default_dt();
        }
    }

    /// Canonical JSON (sorted keys, shortest round-trip floats).
    pub fn to_json(&self) -> String {
        let mut m = Map::new();
        for key in PRESET_FIELDS {
            m.insert(key.into(), num(get_f64(&self.params, key)));
        }
        m.insert("n_max".into(), Value::from(self.params.n_max.n_max()));
        m.insert("model_kind".into(), Value::from(self.params.model_kind.as_str()));
        if !self.auto_dt {
            m.insert("dt".into(), num(self.params.dt));
        }
        if let Some(p) = self.preset {
            m.insert("preset".into(), Value::from(p.name()));
        }
        if let Some(path) = &self.output_path {
            m.insert("output_path".into(), Value::from(path.as_str()));
        }
        m.insert("format".into(), Value::from(self.format.as_str()));
        serde_json::to_string_pretty(&Value::Object(m)).expect("finite values serialize")
    }

    /// SHA-256 of the canonical physics configuration (output settings
    /// excluded), first 16 hex digits.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_path = None;
        c.format = OutputFormat::Json;
        let digest = Sha256::digest(c.to_json().as_bytes());
        hex::encode(digest)[..16].to_string()
    }
}

fn num(x: f64) -> Value {
    Value::Number(Number::from_f64(x).expect("finite"))
}

pub fn get_f64(p: &SystemParams, key: &str) -> f64 {
    match key {
        "g" => p.g,
        "omega" => p.omega,
        "delta_large" => p.delta_large,
        "delta_small" => p.delta_small,
        "gamma_cav" => p.gamma_cav,
        "gamma_r" => p.gamma_r,
        "t_total" => p.t_total,
        "dt" => p.dt,
        "n_max" => p.n_max.n_max() as f64,
        _ => panic!("not a numeric parameter: {key}"),
    }
}

fn set_f64(p: &mut SystemParams, key: &str, v: f64) {
    match key {
        "g" => p.g = v,
        "omega" => p.omega = v,
        "delta_large" => p.delta_large = v,
        "delta_small" => p.delta_small = v,
        "gamma_cav" => p.gamma_cav = v,
        "gamma_r" => p.gamma_r = v,
        "t_total" => p.t_total = v,
        "dt" => p.dt = v,
        _ => panic!("not a float parameter: {key}"),
    }
}

/// Sets a numeric parameter by name; `n_max` must be a positive integer.
pub fn set_param(p: &mut SystemParams, key: &str, v: f64) -> Result<(), ConfigError> {
    if !v.is_finite() {
        return Err(ConfigError::NonFiniteValue(key.into()));
    }
    if key == "n_max" {
        p.n_max = n_max_from(key, v)?;
    } else {
        set_f64(p, key, v);
    }
    Ok(())
}

/// Names accepted by [`set_param`].
pub const NUMERIC_PARAMS: [&str; 9] = ["g", "omega", "delta_large", "delta_small", "gamma_cav", "gamma_r", "n_max", "t_total", "dt"];

fn n_max_from(key: &str, v: f64) -> Result<FockDim, ConfigError> {
    if v.fract() != 0.0 || !(1.0..=4096.0).contains(&v) {
        return Err(ConfigError::InvalidValue { key: key.into(), reason: format!("{v} is not an integer in [1, 4096]") });
    }
    FockDim::new(v as usize).map_err(|e| ConfigError::InvalidValue { key: key.into(), reason: e.to_string() })
}

fn number(m: &Map<String, Value>, key: &str) -> Result<Option<f64>, ConfigError> {
    match m.get(key) {
        None => Ok(None),
        Some(Value::Number(n)) => {
            let x = n.as_f64().ok_or_else(|| ConfigError::NonFiniteValue(key.into()))?;
            if x.is_finite() {
                Ok(Some(x))
            } else {
                Err(ConfigError::NonFiniteValue(key.into()))
            }
        }
        // Spellings some JSON writers use for IEEE specials.
        Some(Value::String(s)) if matches!(s.to_ascii_lowercase().as_str(), "nan" | "inf" | "-inf" | "infinity" | "-infinity") => {
            Err(ConfigError::NonFiniteValue(key.into()))
        }
        Some(other) => Err(ConfigError::InvalidValue { key: key.into(), reason: format!("expected a number, got {other}") }),
    }
}

fn string<'a>(m: &'a Map<String, Value>, key: &str) -> Result<Option<&'a str>, ConfigError> {
    match m.get(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(other) => Err(ConfigError::InvalidValue { key: key.into(), reason: format!("expected a string, got {other}") }),
    }
}

fn parsed<T: FromStr<Err = String>>(m: &Map<String, Value>, key: &str) -> Result<Option<T>, ConfigError> {
    string(m, key)?.map(|s| s.parse().map_err(|reason| ConfigError::InvalidValue { key: key.into(), reason })).transpose()
}

/// Parses a config. Unknown keys are rejected. Physics values are ratios to
/// `g`; without a preset, `omega, delta_large, delta_small, n_max, t_total`
/// and `model_kind` are required.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let Value::Object(m) = value else {
        return Err(ConfigError::NotAnObject);
    };
    if let Some(key) = m.keys().find(|k| !KNOWN.contains(&k.as_str())) {
        return Err(ConfigError::UnknownField(key.clone()));
    }
    let preset: Option<Preset> = parsed(&m, "preset")?;
    let base = preset.map(Preset::params);
    if base.is_none() {
        if let Some(key) = REQUIRED.iter().find(|k| !m.contains_key(**k)) {
            return Err(ConfigError::MissingField((*key).into()));
        }
    }
    let model_kind: ModelKind = match (parsed(&m, "model_kind")?, &base) {
        (Some(k), _) => k,
        (None, Some(b)) => b.model_kind,
        (None, None) => unreachable!("required"),
    };
    let n_max = match (number(&m, "n_max")?, &base) {
        (Some(v), _) => n_max_from("n_max", v)?,
        (None, Some(b)) => b.n_max,
        (None, None) => unreachable!("required"),
    };
    let float = |key: &str, default: Option<f64>| -> Result<f64, ConfigError> {
        number(&m, key)?.or(default).ok_or_else(|| ConfigError::MissingField(key.into()))
    };
    let from_base = |key: &str| base.as_ref().map(|b| get_f64(b, key));
    let mut params = SystemParams {
        g: float("g", Some(1.0))?,
        omega: float("omega", from_base("omega"))?,
        delta_large: float("delta_large", from_base("delta_large"))?,
        delta_small: float("delta_small", from_base("delta_small"))?,
        gamma_cav: float("gamma_cav", Some(0.0))?,
        gamma_r: float("gamma_r", Some(0.0))?,
        n_max,
        t_total: float("t_total", from_base("t_total"))?,
        dt: 0.0,
        model_kind,
    };
    let dt = number(&m, "dt")?;
    params.dt = dt.unwrap_or(1.0);
    let mut config = RunConfig {
        params,
        auto_dt: dt.is_none(),
        preset: None,
        output_path: string(&m, "output_path")?.map(str::to_string),
        format: parsed(&m, "format")?.unwrap_or_default(),
    };
    match preset {
        Some(p) => config.apply_preset(p),
        None => config.refresh_dt(),
    }
    config.params.validate().map_err(|e| match e {
        geomgate::Error::InvalidParams { name, reason } => ConfigError::InvalidValue { key: name.into(), reason },
        other => ConfigError::InvalidValue { key: "params".into(), reason: other.to_string() },
    })?;
    Ok(config)
}
