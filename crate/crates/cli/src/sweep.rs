//! Parameter sweeps over a Cartesian grid.

use std::f64::consts::PI;
use std::str::FromStr;

use geomgate::format::fmt_f64;
use geomgate::gate::{run_row, simulate_gate, GateOptions};
use geomgate::{ModelKind, QubitRow};
use rayon::prelude::*;
use serde_json::{Map, Value};

use crate::config::{set_param, ConfigError, RunConfig, NUMERIC_PARAMS};

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Rescale {
    #[default]
    None,
    /// Sets `delta = (2 Omega g - g^2)/Delta` and `t` to one loop period at
    /// every point, so a single excited atom traverses one closed loop of
    /// radius 1/2 and picks up `phi = -pi/2`.
    HoldPiPhase,
}

impl FromStr for Rescale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Rescale::None),
            "hold_pi_phase" => Ok(Rescale::HoldPiPhase),
            _ => Err(format!("unknown rescale `{s}` (expected none or hold_pi_phase)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub axes: Vec<Axis>,
    pub rescale: Rescale,
    /// Adds `phi_eg` of the full and effective models on the `eg` row.
    pub compare_full: bool,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SpecError {
    #[error("sweep spec: {0}")]
    Invalid(#[from] ConfigError),
    #[error("sweep axis `{0}` has no values")]
    EmptyAxis(String),
    #[error("sweep spec has no axes")]
    NoAxes,
}

fn invalid(key: &str, reason: impl Into<String>) -> SpecError {
    SpecError::Invalid(ConfigError::InvalidValue { key: key.into(), reason: reason.into() })
}

fn finite(key: &str, v: &Value) -> Result<f64, SpecError> {
    let x = v.as_f64().ok_or_else(|| invalid(key, format!("expected a number, got {v}")))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(ConfigError::NonFiniteValue(key.into()).into())
    }
}

fn strict_keys(m: &Map<String, Value>, known: &[&str]) -> Result<(), SpecError> {
    match m.keys().find(|k| !known.contains(&k.as_str())) {
        Some(k) => Err(ConfigError::UnknownField(k.clone()).into()),
        None => Ok(()),
    }
}

fn parse_axis(v: &Value) -> Result<Axis, SpecError> {
    let m = v.as_object().ok_or_else(|| invalid("axes", "each axis must be an object"))?;
    strict_keys(m, &["name", "values", "linspace"])?;
    let name = m.get("name").and_then(Value::as_str).ok_or_else(|| ConfigError::MissingField("name".into()))?.to_string();
    if !NUMERIC_PARAMS.contains(&name.as_str()) {
        return Err(invalid("name", format!("`{name}` is not a numeric parameter ({})", NUMERIC_PARAMS.join(", "))));
    }
    let values = match (m.get("values"), m.get("linspace")) {
        (Some(vals), None) => {
            let arr = vals.as_array().ok_or_else(|| invalid("values", "expected an array"))?;
            arr.iter().map(|x| finite("values", x)).collect::<Result<Vec<_>, _>>()?
        }
        (None, Some(Value::Object(ls))) => {
            strict_keys(ls, &["start", "stop", "count"])?;
            let get = |k: &str| ls.get(k).ok_or_else(|| SpecError::from(ConfigError::MissingField(k.into()))).and_then(|v| finite(k, v));
            let (start, stop, count) = (get("start")?, get("stop")?, get("count")?);
            if count.fract() != 0.0 || count < 0.0 {
                return Err(invalid("count", format!("{count} is not a non-negative integer")));
            }
            let n = count as usize;
            (0..n).map(|k| if n == 1 { start } else { start + (stop - start) * k as f64 / (n - 1) as f64 }).collect()
        }
        (None, Some(_)) => return Err(invalid("linspace", "expected {start, stop, count}")),
        _ => return Err(invalid(&name, "give exactly one of `values` or `linspace`")),
    };
    if values.is_empty() {
        return Err(SpecError::EmptyAxis(name));
    }
    Ok(Axis { name, values })
}

pub fn parse_spec(text: &str) -> Result<SweepSpec, SpecError> {
    let v: Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let m = v.as_object().ok_or(ConfigError::NotAnObject)?;
    strict_keys(m, &["axes", "rescale", "compare_full"])?;
    let axes = m.get("axes").ok_or_else(|| ConfigError::MissingField("axes".into()))?;
    let axes = axes.as_array().ok_or_else(|| invalid("axes", "expected an array"))?;
    if axes.is_empty() {
        return Err(SpecError::NoAxes);
    }
    let axes = axes.iter().map(parse_axis).collect::<Result<Vec<_>, _>>()?;
    let rescale = match m.get("rescale") {
        None => Rescale::None,
        Some(Value::String(s)) => s.parse().map_err(|r: String| invalid("rescale", r))?,
        Some(other) => return Err(invalid("rescale", format!("expected a string, got {other}"))),
    };
    let compare_full = match m.get("compare_full") {
        None => false,
        Some(Value::Bool(b)) => *b,
        Some(other) => return Err(invalid("compare_full", format!("expected a boolean, got {other}"))),
    };
    Ok(SweepSpec { axes, rescale, compare_full })
}

impl SweepSpec {
    pub fn grid_size(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// Axis values of grid point `index`; the first axis varies slowest.
    pub fn point(&self, mut index: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.axes.len()];
        for (slot, axis) in out.iter_mut().zip(&self.axes).rev() {
            *slot = axis.values[index % axis.values.len()];
            index /= axis.values.len();
        }
        out
    }
}

/// Outcome of one grid point. Gate columns are `None` when the gate run
/// failed; comparison columns are `None` when not requested or failed.
#[derive(Clone, Debug, PartialEq)]
pub struct PointResult {
    pub index: usize,
    pub axis_values: Vec<f64>,
    pub gate: Option<[f64; 5]>,
    pub comparison: Option<[f64; 4]>,
    pub error: Option<String>,
}

fn point_config(base: &RunConfig, spec: &SweepSpec, values: &[f64]) -> Result<RunConfig, ConfigError> {
    let mut c = base.clone();
    let dt_on_axis = spec.axes.iter().any(|a| a.name == "dt");
    for (axis, &v) in spec.axes.iter().zip(values) {
        set_param(&mut c.params, &axis.name, v)?;
    }
    if spec.rescale == Rescale::HoldPiPhase {
        let p = &mut c.params;
        p.delta_small = (2.0 * p.omega * p.g - p.g * p.g) / p.delta_large;
        p.t_total = p.loop_period();
    }
    if !dt_on_axis {
        c.refresh_dt();
    }
    c.params.validate().map_err(|e| ConfigError::InvalidValue { key: "params".into(), reason: e.to_string() })?;
    Ok(c)
}

fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

pub fn evaluate_point(base: &RunConfig, spec: &SweepSpec, index: usize) -> PointResult {
    let axis_values = spec.point(index);
    let mut out = PointResult { index, axis_values, gate: None, comparison: None, error: None };
    let config = match point_config(base, spec, &out.axis_values) {
        Ok(c) => c,
        Err(e) => {
            out.error = Some(e.name().to_string());
            return out;
        }
    };
    let opts = GateOptions::default();
    match simulate_gate(&config.params, &opts) {
        Ok(r) => {
            let eg = QubitRow::EG.index();
            let ee = QubitRow::EE.index();
            out.gate = Some([r.phases[eg], r.phases[ee], r.fidelity, r.max_excitation, r.error_estimate]);
        }
        Err(e) => {
            log::warn!("point {index}: {e}");
            out.error = Some(e.name().to_string());
        }
    }
    if spec.compare_full {
        let with = |kind| geomgate::SystemParams { model_kind: kind, ..config.params.clone() }.with_default_dt();
        let full = run_row(&with(ModelKind::Full), QubitRow::EG, &opts);
        let eff = run_row(&with(ModelKind::Effective), QubitRow::EG, &opts);
        match (full, eff) {
            (Ok(f), Ok(e)) => {
                let (pf, pe) = (f.phase(QubitRow::EG), e.phase(QubitRow::EG));
                match (pf, pe) {
                    (Ok(pf), Ok(pe)) => out.comparison = Some([pf, pe, wrap(pf - pe).abs(), f.max_r_population]),
                    (Err(e), _) | (_, Err(e)) => {
                        out.error.get_or_insert_with(|| e.name().to_string());
                    }
                }
            }
            (Err(e), _) | (_, Err(e)) => {
                log::warn!("point {index} comparison: {e}");
                out.error.get_or_insert_with(|| e.name().to_string());
            }
        }
    }
    out
}

/// Runs every grid point on up to `jobs` threads. Results come back in
/// ascending point index.
pub fn run_sweep(base: &RunConfig, spec: &SweepSpec, jobs: usize) -> anyhow::Result<Vec<PointResult>> {
    let n = spec.grid_size();
    log::info!("sweep: {n} grid points on {jobs} thread(s)");
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    Ok(pool.install(|| (0..n).into_par_iter().map(|i| evaluate_point(base, spec, i)).collect()))
}

pub fn csv_header(spec: &SweepSpec) -> String {
    let mut cols = vec!["point_index".to_string()];
    cols.extend(spec.axes.iter().map(|a| a.name.clone()));
    cols.extend(["phi_eg", "phi_ee", "fidelity", "max_excitation", "error_estimate"].map(String::from));
    if spec.compare_full {
        cols.extend(["phi_eg_full", "phi_eg_effective", "phi_gap", "max_r_population"].map(String::from));
    }
    cols.extend(["status", "error"].map(String::from));
    cols.join(",")
}

pub fn csv_row(spec: &SweepSpec, r: &PointResult) -> String {
    let mut cols = vec![r.index.to_string()];
    cols.extend(r.axis_values.iter().map(|&v| fmt_f64(v)));
    let opt = |xs: Option<&[f64]>, n: usize| -> Vec<String> {
        match xs {
            Some(xs) => xs.iter().map(|&x| fmt_f64(x)).collect(),
            None => vec![String::new(); n],
        }
    };
    cols.extend(opt(r.gate.as_ref().map(|g| &g[..]), 5));
    if spec.compare_full {
        cols.extend(opt(r.comparison.as_ref().map(|c| &c[..]), 4));
    }
    cols.push(if r.error.is_some() { "failed" } else { "ok" }.to_string());
    cols.push(r.error.clone().unwrap_or_default());
    cols.join(",")
}
