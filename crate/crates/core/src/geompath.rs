//! Phase-space paths, ordered displacement products and the geometric phase
//! they accumulate.
//!
//! A path `alpha_0 .. alpha_N` is read as `N` straight segments
//! `d_k = alpha_k - alpha_{k-1}`. Applying the segment displacements in
//! order gives
//!
//! ```text
//! D(d_N) ... D(d_1) = exp(i Theta) D(alpha_N - alpha_0),
//! Theta = Im sum_{k<j} d_j d_k* = Im sum_k alpha_k* (alpha_{k+1} - alpha_k)
//! ```
//!
//! when `alpha_0 = 0`; for general start points the same left-endpoint sum
//! is used with `alpha_k - alpha_0`, which differs only by the boundary term
//! `Im(alpha_0* (alpha_N - alpha_0))`. For a closed loop that term vanishes
//! and `Theta` is twice the signed enclosed area.

use std::f64::consts::TAU;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::fock::{displacement_checked, ComplexAmplitude, FockDim, ModeOperator, TruncationWarning};
use crate::linalg::C64;

pub const DEFAULT_CLOSURE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementPath {
    samples: Vec<ComplexAmplitude>,
    closure_tol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathPhaseResult {
    /// Signed geometric phase in radians.
    pub theta: f64,
    pub net_displacement: ComplexAmplitude,
    /// Shoelace area; positive for counterclockwise loops.
    pub signed_area: f64,
}

impl DisplacementPath {
    pub fn new(samples: Vec<ComplexAmplitude>) -> Result<Self> {
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("path sample"));
        }
        Ok(Self { samples, closure_tol: DEFAULT_CLOSURE_TOL })
    }

    pub fn from_c64(samples: impl IntoIterator<Item = C64>) -> Result<Self> {
        Self::new(samples.into_iter().map(ComplexAmplitude::from).collect())
    }

    pub fn with_closure_tol(mut self, tol: f64) -> Self {
        self.closure_tol = tol;
        self
    }

    /// Polygon through `vertices`, closed back onto the first vertex.
    pub fn polygon(vertices: &[ComplexAmplitude]) -> Result<Self> {
        let mut samples = vertices.to_vec();
        if let Some(&first) = vertices.first() {
            samples.push(first);
        }
        Self::new(samples)
    }

    /// Regular `segments`-gon inscribed in a circle, starting and ending at
    /// `center + radius`.
    pub fn circle(center: ComplexAmplitude, radius: f64, segments: usize, counterclockwise: bool) -> Result<Self> {
        let c = center.to_c64();
        let sign = if counterclockwise { 1.0 } else { -1.0 };
        let pts = (0..=segments).map(|k| {
            if k == segments {
                c + radius
            } else {
                c + C64::from_polar(radius, sign * TAU * k as f64 / segments as f64)
            }
        });
        Self::from_c64(pts)
    }

    pub fn samples(&self) -> &[ComplexAmplitude] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn closure_tol(&self) -> f64 {
        self.closure_tol
    }

    pub fn is_closed(&self) -> bool {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) if self.samples.len() >= 2 => (b.to_c64() - a.to_c64()).norm() <= self.closure_tol,
            _ => false,
        }
    }

    pub fn reversed(&self) -> Self {
        let mut samples = self.samples.clone();
        samples.reverse();
        Self { samples, closure_tol: self.closure_tol }
    }

    /// Joins `other` onto the end of `self`. The first sample of `other` is
    /// dropped when it coincides with the last sample of `self`; otherwise a
    /// straight connecting segment is implied.
    pub fn concat(&self, other: &DisplacementPath) -> Self {
        let mut samples = self.samples.clone();
        let mut rest = other.samples.as_slice();
        if let (Some(last), Some(first)) = (samples.last(), rest.first()) {
            if last == first {
                rest = &rest[1..];
            }
        }
        samples.extend_from_slice(rest);
        Self { samples, closure_tol: self.closure_tol.max(other.closure_tol) }
    }

    /// Segment increments `alpha_k - alpha_{k-1}`.
    pub fn segments(&self) -> impl Iterator<Item = C64> + '_ {
        self.samples.windows(2).map(|w| w[1].to_c64() - w[0].to_c64())
    }

    pub fn write_csv<W: Write>(&self, mut out: W, fmt: impl Fn(f64) -> String) -> std::io::Result<()> {
        writeln!(out, "index,re,im")?;
        for (k, s) in self.samples.iter().enumerate() {
            writeln!(out, "{},{},{}", k, fmt(s.re), fmt(s.im))?;
        }
        Ok(())
    }

    /// Reads the `index,re,im` CSV written by [`write_csv`](Self::write_csv).
    /// Lines starting with `#` are ignored.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut samples = Vec::new();
        let mut saw_header = false;
        for (lineno, line) in input.lines().enumerate() {
            let line_no = lineno + 1;
            let line = line.map_err(|e| Error::PathCsv { line: line_no, reason: e.to_string() })?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !saw_header {
                if line != "index,re,im" {
                    return Err(Error::PathCsv { line: line_no, reason: format!("expected header `index,re,im`, got `{line}`") });
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::PathCsv { line: line_no, reason: format!("expected 3 fields, got {}", fields.len()) });
            }
            let index: usize =
                fields[0].parse().map_err(|_| Error::PathCsv { line: line_no, reason: format!("bad index `{}`", fields[0]) })?;
            if index != samples.len() {
                return Err(Error::PathCsv { line: line_no, reason: format!("index {index} out of sequence") });
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim().parse().map_err(|_| Error::PathCsv { line: line_no, reason: format!("bad number `{s}`") })
            };
            samples.push(ComplexAmplitude::new(parse(fields[1])?, parse(fields[2])?));
        }
        Self::new(samples)
    }
}

/// Geometric phase by the left-endpoint rule, plus net displacement and
/// shoelace area.
pub fn path_phase(path: &DisplacementPath) -> Result<PathPhaseResult> {
    let s = path.samples();
    if s.len() < 2 {
        return Err(Error::DegeneratePath(s.len()));
    }
    let origin = s[0].to_c64();
    let mut theta = 0.0;
    let mut twice_area = 0.0;
    for w in s.windows(2) {
        let (a, b) = (w[0].to_c64() - origin, w[1].to_c64() - origin);
        theta += (a.conj() * (b - a)).im;
        twice_area += a.re * b.im - a.im * b.re;
    }
    let net = s[s.len() - 1].to_c64() - origin;
    Ok(PathPhaseResult { theta, net_displacement: net.into(), signed_area: 0.5 * twice_area })
}

/// Ordered product `D(d_N) ... D(d_1)` of the segment displacements and the
/// phase predicted for it by [`path_phase`].
pub fn compose_displacements(path: &DisplacementPath, dim: FockDim) -> Result<(ModeOperator, f64)> {
    let (product, theta, _) = compose_displacements_checked(path, dim)?;
    Ok((product, theta))
}

/// As [`compose_displacements`], also returning truncation diagnostics for
/// any path sample (relative to the start) outside the guard.
pub fn compose_displacements_checked(path: &DisplacementPath, dim: FockDim) -> Result<(ModeOperator, f64, Vec<TruncationWarning>)> {
    let phase = path_phase(path)?;
    let origin = path.samples()[0].to_c64();
    let mut warnings: Vec<TruncationWarning> =
        path.samples().iter().filter_map(|s| crate::fock::truncation_check((s.to_c64() - origin).into(), dim)).take(1).collect();
    let mut product = ModeOperator::identity(dim);
    for d in path.segments() {
        let (step, w) = displacement_checked(d.into(), dim);
        warnings.extend(w);
        product = &step * &product;
    }
    for w in &warnings {
        log::warn!("compose_displacements: {w}");
    }
    Ok((product, phase.theta, warnings))
}
