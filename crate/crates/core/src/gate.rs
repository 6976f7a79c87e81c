//! Conditional phase gate: four basis-state runs, phase extraction,
//! single-qubit correction and scoring.
//!
//! Each computational state `|uv>|0>` is propagated under the selected model.
//! Its phase is `arg <uv 0|psi_uv(t)>`; for open-system runs, where only one
//! density matrix is evolved (the superposition witness
//! `(|g>+|e>)(|g>+|e>)|0>/2`), it is the phase of the coherence
//! `<uv 0|rho|gg 0>`. Full-model phases are reported with the bare atomic
//! precession `exp(-i Delta S_z t)` removed, so they are comparable with the
//! effective models.

use std::fmt::Write as _;

use ndarray::{Array1, Array2};

use crate::dynamics::{
    self, cavity_observables, frame_transform_diag, reduced_cavity, Dissipation, JointState, LindbladStepper, PropagationOptions, StepGrid,
    UnitaryStepper,
};
use crate::error::{Error, Result};
use crate::fock::ComplexAmplitude;
use crate::format::fmt_f64;
use crate::linalg::{self, C64};
use crate::model::{self, AtomPair, JointOperator, JointSpace, Level, ModelKind, QubitRow, SystemParams};

/// Target diagonal `(1, 1, 1, -1)` of the controlled phase gate.
pub const PI_GATE: [C64; 4] = [C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(-1.0, 0.0)];

/// Step-halving tolerance for gate runs. Phases are scored at the `1e-3`
/// level, so a stricter default would reject the default time step.
pub const GATE_CONVERGENCE_TOL: f64 = 1e-3;

const NORM_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct GateOptions {
    pub propagation: PropagationOptions,
}

impl Default for GateOptions {
    fn default() -> Self {
        Self { propagation: PropagationOptions { tolerance: GATE_CONVERGENCE_TOL, check_convergence: true } }
    }
}

/// Diagnostics of the superposition input `|+,+>|0>`.
#[derive(Clone, Debug, PartialEq)]
pub struct WitnessSummary {
    /// Overlap with the ideal output of the target gate.
    pub fidelity: f64,
    /// Minimum over time of the reduced cavity purity.
    pub min_cavity_purity: f64,
    /// Maximum over time of `<a+ a>`.
    pub max_excitation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateReport {
    pub model_kind: ModelKind,
    pub t_total: f64,
    /// `(phi_gg, phi_ge, phi_eg, phi_ee)` in `(-pi, pi]`.
    pub phases: [f64; 4],
    /// `<uv 0|psi_uv(t)>`, with the correction applied once corrected. For
    /// open-system runs `sqrt(population) e^{i phase}`.
    pub amplitudes: [C64; 4],
    /// `|<uv 0|psi_uv(t)>|^2` or `<uv 0|rho_uv|uv 0>`.
    pub populations: [f64; 4],
    /// Final `<a>` of each row.
    pub residual_alpha: [ComplexAmplitude; 4],
    /// Minimum over time of each row's reduced cavity purity.
    pub cavity_purity: [f64; 4],
    /// Unit-modulus diagonal of the gate, after correction if applied.
    pub corrected_diagonal: [C64; 4],
    pub corrected: bool,
    pub fidelity: f64,
    /// Maximum over time of `<a+ a>` in the single-excitation rows.
    pub max_excitation: f64,
    /// Maximum over time and rows of the total `|r>` population.
    pub max_r_population: f64,
    /// Cavity-decay error budget `t_total / t_eff`, 0 without decay.
    pub error_estimate: f64,
    /// Largest step-halving estimate of the runs.
    pub convergence_estimate: f64,
    pub witness: WitnessSummary,
    /// Final witness density matrix of open-system runs.
    pub witness_state: Option<(JointSpace, JointState)>,
    pub notes: Vec<String>,
}

impl GateReport {
    pub fn is_dissipative(&self) -> bool {
        self.witness_state.is_some()
    }

    /// JSON with the keys `phases, residual_alpha, purity, corrected,
    /// fidelity, max_excitation, error_estimate` first, then diagnostics and a
    /// string-valued `meta` object.
    pub fn to_json(&self, meta: &[(&str, String)]) -> String {
        let list = |xs: &[f64]| format!("[{}]", xs.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(", "));
        let pairs = |zs: &[C64]| {
            let items: Vec<String> = zs.iter().map(|z| format!("[{}, {}]", fmt_f64(z.re), fmt_f64(z.im))).collect();
            format!("[{}]", items.join(", "))
        };
        let alphas: Vec<C64> = self.residual_alpha.iter().map(|a| a.to_c64()).collect();
        let mut s = String::from("{\n");
        let mut field = |k: &str, v: String| {
            let _ = writeln!(s, "  \"{k}\": {v},");
        };
        field("phases", list(&self.phases));
        field("residual_alpha", pairs(&alphas));
        field("purity", list(&self.cavity_purity));
        field("corrected", pairs(&self.corrected_diagonal));
        field("fidelity", fmt_f64(self.fidelity));
        field("max_excitation", fmt_f64(self.max_excitation));
        field("error_estimate", fmt_f64(self.error_estimate));
        field(
            "witness",
            format!(
                "{{\"fidelity\": {}, \"min_cavity_purity\": {}, \"max_excitation\": {}}}",
                fmt_f64(self.witness.fidelity),
                fmt_f64(self.witness.min_cavity_purity),
                fmt_f64(self.witness.max_excitation)
            ),
        );
        field("model_kind", json_string(self.model_kind.as_str()));
        field("t_total", fmt_f64(self.t_total));
        field("populations", list(&self.populations));
        field("max_r_population", fmt_f64(self.max_r_population));
        field("convergence_estimate", fmt_f64(self.convergence_estimate));
        field("correction_applied", self.corrected.to_string());
        let meta: Vec<String> = meta.iter().map(|(k, v)| format!("{}: {}", json_string(k), json_string(v))).collect();
        let _ = writeln!(s, "  \"meta\": {{{}}}", meta.join(", "));
        s.push('}');
        s
    }
}

pub fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// The Hamiltonian actually integrated on a space, plus the diagonal `E`
/// with `psi_reported(t) = exp(-i E t) psi_integrated(t)`.
///
/// The full model is integrated in the frame where it is static (see
/// [`model::full_hamiltonian_rotating`]); `E` undoes that frame and removes
/// the bare atomic precession. The effective models are integrated as is.
pub struct PropagationFrame {
    pub hamiltonian: JointOperator,
    pub report_frame: Array1<f64>,
}

pub fn propagation_frame(params: &SystemParams, space: &JointSpace) -> PropagationFrame {
    match params.model_kind {
        ModelKind::Full => {
            let rot = model::full_hamiltonian_rotating(params, space);
            let mut h = JointOperator::new(space.clone());
            h.push(0.0, rot.static_part);
            let nf = space.fock().dim();
            let sz = Array1::from_shape_fn(space.dim(), |i| {
                let p = space.atoms()[i / nf];
                0.5 * (p.count(Level::R) as f64 - p.count(Level::E) as f64)
            });
            PropagationFrame { hamiltonian: h, report_frame: rot.frame - sz * params.delta_large }
        }
        _ => PropagationFrame { hamiltonian: params.hamiltonian(space), report_frame: Array1::zeros(space.dim()) },
    }
}

/// Named parameter sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    /// `delta = g^2/Delta`, `Omega = g`, `(g^2/Delta) t = pi`: one closed
    /// loop per excited atom and a `-pi/2` single-atom phase.
    A,
    /// `Delta = 10 g`, `delta = 2 g`, `Omega = g`, `gamma = g/27`: small
    /// circles, run for the exact `2 phi = -pi` duration.
    B,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::A => "A",
            Preset::B => "B",
        }
    }

    pub fn params(self) -> SystemParams {
        let (delta_small, gamma_cav, n_max) = match self {
            Preset::A => (0.1, 0.0, 24),
            Preset::B => (2.0, 1.0 / 27.0, 8),
        };
        let mut p = SystemParams {
            g: 1.0,
            omega: 1.0,
            delta_large: 10.0,
            delta_small,
            gamma_cav,
            gamma_r: 0.0,
            n_max: crate::fock::FockDim::new(n_max).expect("n_max >= 1"),
            t_total: 0.0,
            dt: 0.0,
            model_kind: ModelKind::Transformed,
        };
        p.t_total = match self {
            Preset::A => std::f64::consts::PI * p.delta_large / (p.g * p.g),
            Preset::B => p.pi_gate_time(),
        };
        p.with_default_dt()
    }
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(Preset::A),
            "B" | "b" => Ok(Preset::B),
            _ => Err(format!("unknown preset `{s}` (expected A or B)")),
        }
    }
}

/// Propagates the four computational states and extracts phases and cavity
/// diagnostics. No correction is applied.
pub fn run_gate(params: &SystemParams) -> Result<GateReport> {
    run_gate_with(params, &GateOptions::default())
}

pub fn run_gate_with(params: &SystemParams, opts: &GateOptions) -> Result<GateReport> {
    params.validate()?;
    if params.is_open() {
        run_open(params, opts)
    } else {
        run_closed(params, opts)
    }
}

/// [`run_gate`] followed by [`apply_correction`].
pub fn simulate_gate(params: &SystemParams, opts: &GateOptions) -> Result<GateReport> {
    run_gate_with(params, opts).map(|r| apply_correction(&r))
}

fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(std::f64::consts::TAU);
    if y > std::f64::consts::PI {
        y - std::f64::consts::TAU
    } else {
        y
    }
}

fn phase_of(row: QubitRow, overlap: C64) -> Result<f64> {
    if overlap.norm() < 0.5 {
        return Err(Error::AmbiguousPhase { row: row.label(), overlap: overlap.norm() });
    }
    Ok(if row == QubitRow::GG && overlap.im == 0.0 { 0.0 } else { wrap_phase(overlap.arg()) })
}

/// Running extrema over a trajectory.
struct Extrema {
    min_purity: [f64; 4],
    max_photons: [f64; 4],
    max_r: f64,
    witness_min_purity: f64,
    witness_max_photons: f64,
}

impl Extrema {
    fn new() -> Self {
        Self { min_purity: [1.0; 4], max_photons: [0.0; 4], max_r: 0.0, witness_min_purity: 1.0, witness_max_photons: 0.0 }
    }

    fn row(&mut self, k: usize, purity: f64, photons: f64, p_r: f64) {
        self.min_purity[k] = self.min_purity[k].min(purity);
        self.max_photons[k] = self.max_photons[k].max(photons);
        self.max_r = self.max_r.max(p_r);
    }

    fn witness(&mut self, rho_cav: &Array2<C64>) {
        let tr = linalg::trace(rho_cav).re;
        let purity = rho_cav.iter().map(|z| z.norm_sqr()).sum::<f64>() / (tr * tr);
        let photons = (0..rho_cav.nrows()).map(|n| n as f64 * rho_cav[[n, n]].re).sum::<f64>() / tr;
        self.witness_min_purity = self.witness_min_purity.min(purity);
        self.witness_max_photons = self.witness_max_photons.max(photons);
    }

    fn single_excitation_peak(&self) -> f64 {
        self.max_photons[QubitRow::GE.index()].max(self.max_photons[QubitRow::EG.index()])
    }
}

fn run_closed(params: &SystemParams, opts: &GateOptions) -> Result<GateReport> {
    let grid = StepGrid::new(params.t_total, params.dt)?;
    let rows: Vec<(QubitRow, JointSpace, PropagationFrame)> = QubitRow::ALL
        .iter()
        .map(|&row| {
            let space = params.row_space(row);
            let frame = propagation_frame(params, &space);
            (row, space, frame)
        })
        .collect();
    let initial: Vec<Array1<C64>> =
        rows.iter().map(|(row, space, _)| space.basis_vector(row.pair(), 0).expect("row in its own space")).collect();
    let mut steppers: Vec<UnitaryStepper> =
        rows.iter().zip(&initial).map(|((_, _, f), v)| UnitaryStepper::new(&f.hamiltonian, v.clone(), grid)).collect();

    let mut ext = Extrema::new();
    let observe = |steppers: &[UnitaryStepper], ext: &mut Extrema| {
        let mut witness = Array2::<C64>::zeros((params.n_max.dim(), params.n_max.dim()));
        for (k, (st, (_, space, _))) in steppers.iter().zip(&rows).enumerate() {
            let state = JointState::Pure(st.state().clone());
            let obs = cavity_observables(space, &state);
            ext.row(k, obs.purity, obs.photons, obs.p_r);
            witness.scaled_add(C64::from(0.25), &reduced_cavity(space, &state));
        }
        ext.witness(&witness);
    };
    observe(&steppers, &mut ext);
    loop {
        let advanced = steppers.iter_mut().fold(false, |acc, st| st.step() | acc);
        if !advanced {
            break;
        }
        observe(&steppers, &mut ext);
    }
    let finals: Vec<Array1<C64>> = steppers.into_iter().map(|st| st.into_state()).collect();

    let mut convergence_estimate: f64 = 0.0;
    for ((_, _, frame), (v0, v)) in rows.iter().zip(initial.into_iter().zip(&finals)) {
        let drift = (linalg::vec_norm(v) - 1.0).abs();
        if drift > NORM_TOL {
            return Err(Error::NormDrift { drift });
        }
        if opts.propagation.check_convergence && grid.steps > 0 && frame.hamiltonian.is_time_dependent() {
            let mut fine = UnitaryStepper::new(&frame.hamiltonian, v0, grid.halved());
            while fine.step() {}
            convergence_estimate = convergence_estimate.max(linalg::vec_norm(&(v - fine.state())));
        }
    }
    if convergence_estimate > opts.propagation.tolerance {
        return Err(Error::NonConvergence { estimate: convergence_estimate, tol: opts.propagation.tolerance });
    }

    let mut phases = [0.0; 4];
    let mut amplitudes = [C64::new(0.0, 0.0); 4];
    let mut residual_alpha = [ComplexAmplitude::ZERO; 4];
    for (k, ((row, space, frame), v)) in rows.iter().zip(finals).enumerate() {
        let reported = frame_transform_diag(&JointState::Pure(v), &frame.report_frame, params.t_total);
        let JointState::Pure(ref psi) = reported else { unreachable!() };
        amplitudes[k] = psi[space.index(row.pair(), 0).expect("vacuum component")];
        phases[k] = phase_of(*row, amplitudes[k])?;
        residual_alpha[k] = cavity_observables(space, &reported).alpha;
    }
    let mut report = GateReport {
        model_kind: params.model_kind,
        t_total: params.t_total,
        phases,
        amplitudes,
        populations: amplitudes.map(|c| c.norm_sqr()),
        residual_alpha,
        cavity_purity: ext.min_purity,
        corrected_diagonal: amplitudes.map(|c| c / c.norm()),
        corrected: false,
        fidelity: 0.0,
        max_excitation: ext.single_excitation_peak(),
        max_r_population: ext.max_r,
        error_estimate: decoherence_error_estimate(params).error,
        convergence_estimate,
        witness: WitnessSummary { fidelity: 0.0, min_cavity_purity: ext.witness_min_purity, max_excitation: ext.witness_max_photons },
        witness_state: None,
        notes: Vec::new(),
    };
    report.fidelity = gate_fidelity(&report, &PI_GATE);
    report.witness.fidelity = report.fidelity;
    Ok(report)
}

/// Indices of `sub`'s atomic states inside `space`, expanded over the Fock levels.
fn block_indices(space: &JointSpace, sub: &JointSpace) -> Vec<usize> {
    let nf = space.fock().dim();
    sub.atoms()
        .iter()
        .flat_map(|&p| {
            let a = space.atom_index(p).expect("row space inside witness space");
            (0..nf).map(move |n| a * nf + n)
        })
        .collect()
}

fn block(rho: &Array2<C64>, idx: &[usize]) -> Array2<C64> {
    Array2::from_shape_fn((idx.len(), idx.len()), |(i, j)| rho[[idx[i], idx[j]]])
}

fn witness_vector(space: &JointSpace) -> Array1<C64> {
    QubitRow::ALL
        .iter()
        .fold(Array1::zeros(space.dim()), |acc, row| acc + space.basis_vector(row.pair(), 0).expect("computational state") * C64::from(0.5))
}

fn run_open(params: &SystemParams, opts: &GateOptions) -> Result<GateReport> {
    let grid = StepGrid::new(params.t_total, params.dt)?;
    let space = match params.model_kind {
        ModelKind::Full => JointSpace::full(params.n_max),
        _ => JointSpace::qubit(params.n_max),
    };
    let frame = propagation_frame(params, &space);
    let row_spaces: Vec<JointSpace> = QubitRow::ALL.iter().map(|&r| params.row_space(r)).collect();
    let row_idx: Vec<Vec<usize>> = row_spaces.iter().map(|s| block_indices(&space, s)).collect();
    let w = witness_vector(&space);
    let rho0 = JointState::Pure(w).to_density();
    let diss = Dissipation { gamma_cav: params.gamma_cav, gamma_r: params.gamma_r };

    let mut ext = Extrema::new();
    let observe = |rho: &Array2<C64>, ext: &mut Extrema| {
        let state = JointState::Density(rho.clone());
        ext.witness(&reduced_cavity(&space, &state));
        for (k, (sub, idx)) in row_spaces.iter().zip(&row_idx).enumerate() {
            let obs = cavity_observables(sub, &JointState::Density(block(rho, idx)));
            ext.row(k, obs.purity, obs.photons, obs.p_r);
        }
    };
    let mut stepper = LindbladStepper::new(&frame.hamiltonian, rho0.clone(), &diss, grid);
    observe(stepper.state(), &mut ext);
    while stepper.step() {
        observe(stepper.state(), &mut ext);
    }
    let rho = stepper.into_state();
    let drift = (linalg::trace(&rho).re - 1.0).abs();
    if drift > 1e-8 {
        return Err(Error::NormDrift { drift });
    }
    let mut notes = Vec::new();
    let min_eig = JointState::Density(rho.clone()).min_eigenvalue();
    if min_eig < -1e-6 {
        notes.push(format!("PositivityBreach: smallest eigenvalue {min_eig:.3e}"));
    }
    let mut convergence_estimate = 0.0;
    if opts.propagation.check_convergence && grid.steps > 0 {
        let mut fine = LindbladStepper::new(&frame.hamiltonian, rho0, &diss, grid.halved());
        while fine.step() {}
        convergence_estimate = linalg::frobenius(&(&rho - fine.state()));
        if convergence_estimate > opts.propagation.tolerance {
            return Err(Error::NonConvergence { estimate: convergence_estimate, tol: opts.propagation.tolerance });
        }
    }

    let reported = frame_transform_diag(&JointState::Density(rho), &frame.report_frame, params.t_total);
    let JointState::Density(ref r) = reported else { unreachable!() };
    let gg = space.index(QubitRow::GG.pair(), 0).expect("gg in space");
    let mut phases = [0.0; 4];
    let mut amplitudes = [C64::new(0.0, 0.0); 4];
    let mut populations = [0.0; 4];
    let mut residual_alpha = [ComplexAmplitude::ZERO; 4];
    for (k, row) in QubitRow::ALL.iter().enumerate() {
        let i = space.index(row.pair(), 0).expect("row in space");
        populations[k] = 4.0 * r[[i, i]].re;
        let magnitude = populations[k].max(0.0).sqrt();
        if magnitude < 0.5 {
            return Err(Error::AmbiguousPhase { row: row.label(), overlap: magnitude });
        }
        phases[k] = if k == 0 { 0.0 } else { wrap_phase(r[[i, gg]].arg()) };
        amplitudes[k] = C64::from_polar(magnitude, phases[k]);
        residual_alpha[k] = cavity_observables(&row_spaces[k], &JointState::Density(block(r, &row_idx[k]))).alpha;
    }
    let mut report = GateReport {
        model_kind: params.model_kind,
        t_total: params.t_total,
        phases,
        amplitudes,
        populations,
        residual_alpha,
        cavity_purity: ext.min_purity,
        corrected_diagonal: phases.map(|p| C64::from_polar(1.0, p)),
        corrected: false,
        fidelity: 0.0,
        max_excitation: ext.single_excitation_peak(),
        max_r_population: ext.max_r,
        error_estimate: decoherence_error_estimate(params).error,
        convergence_estimate,
        witness: WitnessSummary { fidelity: 0.0, min_cavity_purity: ext.witness_min_purity, max_excitation: ext.witness_max_photons },
        witness_state: Some((space, reported)),
        notes,
    };
    report.fidelity = gate_fidelity(&report, &PI_GATE);
    report.witness.fidelity = witness_fidelity(&report, &[0.0, 0.0], &PI_GATE);
    Ok(report)
}

/// Product of single-atom phase factors `exp(-i theta_j)` over the atoms of
/// `pair` that are in `e`.
fn correction_factor(pair: AtomPair, theta: &[f64; 2]) -> C64 {
    let mut z = C64::new(1.0, 0.0);
    for (level, th) in [pair.0, pair.1].into_iter().zip(theta) {
        if level == Level::E {
            z *= C64::from_polar(1.0, -th);
        }
    }
    z
}

/// Single-atom phases `(theta_1, theta_2)` that cancel the measured
/// single-excitation phases: atom 1 carries `phi_eg`, atom 2 `phi_ge`.
pub fn correction_phases(report: &GateReport) -> [f64; 2] {
    [report.phases[QubitRow::EG.index()], report.phases[QubitRow::GE.index()]]
}

/// Applies `|e_j> -> exp(-i theta_j) |e_j>` on each atom, with `theta_j` the
/// measured single-excitation phases, so that `|ge>` and `|eg>` are
/// corrected by one factor and `|ee>` by both. Applying it to an already
/// corrected report is a no-op.
pub fn apply_correction(report: &GateReport) -> GateReport {
    if report.corrected {
        return report.clone();
    }
    let theta = correction_phases(report);
    let mut out = report.clone();
    for (k, row) in QubitRow::ALL.iter().enumerate() {
        let f = correction_factor(row.pair(), &theta);
        out.amplitudes[k] = report.amplitudes[k] * f;
        out.corrected_diagonal[k] = report.corrected_diagonal[k] * f;
    }
    out.corrected = true;
    out.fidelity = gate_fidelity(&out, &PI_GATE);
    out.witness.fidelity = if out.is_dissipative() { witness_fidelity(report, &theta, &PI_GATE) } else { out.fidelity };
    out
}

/// Correction the analytic phases call for: `phi(t) + Omega^2 t/Delta` per
/// excited atom, without the Stark term for the transformed model.
pub fn analytic_correction_phase(params: &SystemParams) -> f64 {
    let (phi, _) = model::conditional_phase(params, params.t_total);
    match params.model_kind {
        ModelKind::Transformed => phi,
        _ => phi + model::stark_phase(params, params.t_total),
    }
}

/// Unitary runs: `|1/4 sum_k d_k^* c_k|^2` with `c_k` the (corrected) vacuum
/// amplitudes, which is also the fidelity of the superposition input.
/// Open-system runs: mean population `<k 0|rho_k|k 0>` of the four rows.
pub fn gate_fidelity(report: &GateReport, ideal: &[C64; 4]) -> f64 {
    if report.is_dissipative() {
        report.populations.iter().sum::<f64>() / 4.0
    } else {
        let s: C64 = ideal.iter().zip(&report.amplitudes).map(|(d, c)| d.conj() * c).sum();
        (s / 4.0).norm_sqr()
    }
}

/// `<w|C rho C^+|w>` for the stored witness state, with `C` the
/// single-atom correction and `|w> = (1/2) sum_k d_k |k 0>`.
fn witness_fidelity(report: &GateReport, theta: &[f64; 2], ideal: &[C64; 4]) -> f64 {
    let Some((space, state)) = &report.witness_state else {
        return report.fidelity;
    };
    let rho = state.to_density();
    let nf = space.fock().dim();
    let c = Array1::from_shape_fn(space.dim(), |i| correction_factor(space.atoms()[i / nf], theta));
    let w = QubitRow::ALL.iter().zip(ideal).fold(Array1::<C64>::zeros(space.dim()), |acc, (row, d)| {
        acc + space.basis_vector(row.pair(), 0).expect("row in space") * (d * 0.5)
    });
    let mut f = C64::new(0.0, 0.0);
    for i in 0..space.dim() {
        for j in 0..space.dim() {
            f += w[i].conj() * c[i] * rho[[i, j]] * c[j].conj() * w[j];
        }
    }
    f.re
}

/// Cavity-decay error budget.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecoherenceEstimate {
    /// Cavity excitation probability `(Omega g / (Delta delta + g^2))^2`.
    pub p_exc: f64,
    /// Effective decoherence time `1 / (gamma p_exc)`.
    pub t_eff: f64,
    /// `t_total / t_eff`.
    pub error: f64,
}

pub fn decoherence_error_estimate(params: &SystemParams) -> DecoherenceEstimate {
    let p_exc = params.loop_radius().powi(2);
    let rate = params.gamma_cav * p_exc;
    if rate > 0.0 {
        DecoherenceEstimate { p_exc, t_eff: 1.0 / rate, error: params.t_total * rate }
    } else {
        DecoherenceEstimate { p_exc, t_eff: f64::INFINITY, error: 0.0 }
    }
}

/// Outcome of propagating a single computational state.
#[derive(Clone, Debug, PartialEq)]
pub struct RowRun {
    /// `<uv 0|psi_uv(t)>`, or `sqrt(<uv 0|rho|uv 0>)` for open-system runs.
    pub amplitude: C64,
    pub residual_alpha: ComplexAmplitude,
    pub min_purity: f64,
    pub max_excitation: f64,
    pub max_r_population: f64,
    pub convergence_estimate: f64,
}

impl RowRun {
    /// `arg <uv 0|psi_uv(t)>` in `(-pi, pi]`; open-system rows carry no phase.
    pub fn phase(&self, row: QubitRow) -> Result<f64> {
        phase_of(row, self.amplitude)
    }
}

/// Propagates `|row>|0>` alone on its smallest invariant space.
pub fn run_row(params: &SystemParams, row: QubitRow, opts: &GateOptions) -> Result<RowRun> {
    params.validate()?;
    let space = params.row_space(row);
    let frame = propagation_frame(params, &space);
    let v0 = space.basis_vector(row.pair(), 0).expect("row in its own space");
    let i0 = space.index(row.pair(), 0).expect("row in its own space");
    let mut ext = Extrema::new();
    let mut track = |state: &JointState| {
        let obs = cavity_observables(&space, state);
        ext.row(0, obs.purity, obs.photons, obs.p_r);
    };
    let rep = if params.is_open() {
        let diss = Dissipation { gamma_cav: params.gamma_cav, gamma_r: params.gamma_r };
        let rho0 = JointState::Density(JointState::Pure(v0).to_density());
        dynamics::propagate_lindblad_with(&frame.hamiltonian, &rho0, &diss, params.t_total, params.dt, &opts.propagation, |_, r| {
            track(&JointState::Density(r.clone()))
        })?
    } else {
        dynamics::propagate_unitary_with(
            &frame.hamiltonian,
            &JointState::Pure(v0),
            params.t_total,
            params.dt,
            &opts.propagation,
            |_, v| track(&JointState::Pure(v.clone())),
        )?
    };
    let reported = frame_transform_diag(&rep.final_state, &frame.report_frame, params.t_total);
    let amplitude = match &reported {
        JointState::Pure(v) => v[i0],
        JointState::Density(r) => C64::from(r[[i0, i0]].re.max(0.0).sqrt()),
    };
    Ok(RowRun {
        amplitude,
        residual_alpha: cavity_observables(&space, &reported).alpha,
        min_purity: ext.min_purity[0],
        max_excitation: ext.max_photons[0],
        max_r_population: ext.max_r,
        convergence_estimate: rep.convergence_estimate,
    })
}

/// One sample of a single-row trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub alpha: ComplexAmplitude,
    pub p_r: f64,
    pub purity: f64,
}

/// Samples `<a>`, `|r>` population and cavity purity after every step of the
/// evolution of `|row>|0>`.
pub fn sample_trajectory(params: &SystemParams, row: QubitRow, opts: &GateOptions) -> Result<Vec<TrajectorySample>> {
    params.validate()?;
    let space = params.row_space(row);
    let frame = propagation_frame(params, &space);
    let v0 = space.basis_vector(row.pair(), 0).expect("row in its own space");
    let mut out = Vec::new();
    let mut record = |t: f64, state: JointState| {
        let reported = frame_transform_diag(&state, &frame.report_frame, t);
        let obs = cavity_observables(&space, &reported);
        out.push(TrajectorySample { t, alpha: obs.alpha, p_r: obs.p_r, purity: obs.purity });
    };
    if params.is_open() {
        let diss = Dissipation { gamma_cav: params.gamma_cav, gamma_r: params.gamma_r };
        let rho0 = JointState::Density(JointState::Pure(v0).to_density());
        dynamics::propagate_lindblad_with(&frame.hamiltonian, &rho0, &diss, params.t_total, params.dt, &opts.propagation, |t, r| {
            record(t, JointState::Density(r.clone()))
        })?;
    } else {
        dynamics::propagate_unitary_with(
            &frame.hamiltonian,
            &JointState::Pure(v0),
            params.t_total,
            params.dt,
            &opts.propagation,
            |t, v| record(t, JointState::Pure(v.clone())),
        )?;
    }
    Ok(out)
}

#[cfg(test)]
mod properties;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockDim;
    use std::f64::consts::PI;

    fn preset_a() -> SystemParams {
        Preset::A.params()
    }

    #[test]
    fn preset_values() {
        let a = Preset::A.params();
        assert!((a.t_total - 10.0 * PI).abs() < 1e-12);
        assert!((a.delta_small - a.g * a.g / a.delta_large).abs() < 1e-15);
        let b = Preset::B.params();
        assert!((b.t_total - 105.0 * PI).abs() < 1e-12);
        assert!((b.gamma_cav - 0.037037).abs() < 1e-6);
        assert_eq!("b".parse::<Preset>(), Ok(Preset::B));
        assert!("C".parse::<Preset>().is_err());
    }

    fn synthetic(phases: [f64; 4]) -> GateReport {
        let amplitudes = phases.map(|p| C64::from_polar(1.0, p));
        GateReport {
            model_kind: ModelKind::Transformed,
            t_total: 1.0,
            phases,
            amplitudes,
            populations: [1.0; 4],
            residual_alpha: [ComplexAmplitude::ZERO; 4],
            cavity_purity: [1.0; 4],
            corrected_diagonal: amplitudes,
            corrected: false,
            fidelity: 0.0,
            max_excitation: 0.0,
            max_r_population: 0.0,
            error_estimate: 0.0,
            convergence_estimate: 0.0,
            witness: WitnessSummary { fidelity: 0.0, min_cavity_purity: 1.0, max_excitation: 0.0 },
            witness_state: None,
            notes: Vec::new(),
        }
    }

    #[test]
    fn correction_algebra() {
        for x in [-1.3, -0.2, 0.0, 0.7, 2.9] {
            let r = apply_correction(&synthetic([0.0, x, x, 4.0 * x]));
            let want = [C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::from_polar(1.0, 2.0 * x)];
            for (got, want) in r.corrected_diagonal.iter().zip(want) {
                assert!((got - want).norm() < 1e-15);
            }
            assert!(r.corrected);
            assert_eq!(apply_correction(&r), r);
        }
    }

    #[test]
    fn fidelity_of_ideal_and_phase_errors() {
        let ideal = apply_correction(&synthetic([0.0, -0.4, -0.4, -0.8 - PI]));
        assert!((ideal.fidelity - 1.0).abs() < 1e-15);
        for eps in [1e-3, 0.05, 0.3] {
            let r = apply_correction(&synthetic([0.0, -0.4, -0.4, -0.8 - PI + eps]));
            let exact = (10.0 + 6.0 * eps.cos()) / 16.0;
            assert!((r.fidelity - exact).abs() < 1e-14);
            // Leading order is 3/16 eps^2.
            assert!((1.0 - r.fidelity - 3.0 / 16.0 * eps * eps).abs() <= eps.powi(4) / 32.0);
        }
    }

    #[test]
    fn zero_time_gate_is_identity() {
        let p = SystemParams { t_total: 0.0, ..preset_a() };
        let r = apply_correction(&run_gate(&p).unwrap());
        for z in r.corrected_diagonal {
            assert!((z - C64::new(1.0, 0.0)).norm() < 1e-15);
        }
        assert_eq!(r.phases, [0.0; 4]);
    }

    #[test]
    fn ground_row_is_dark_in_every_model() {
        for kind in ModelKind::ALL {
            let p = SystemParams { model_kind: kind, t_total: 1.3, gamma_cav: 0.1, n_max: FockDim::new(4).unwrap(), ..preset_a() }
                .with_default_dt();
            let r = run_gate(&p).unwrap();
            assert_eq!(r.phases[0], 0.0, "{kind}");
            assert!(r.residual_alpha[0].norm() < 1e-12);
            assert!((r.cavity_purity[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn preset_a_transformed_gate() {
        let r = run_gate(&preset_a()).unwrap();
        let want = [0.0, -PI / 2.0, -PI / 2.0, 0.0];
        for (got, want) in r.phases.iter().zip(want) {
            assert!(wrap_phase(got - want).abs() < 1e-3, "{:?}", r.phases);
        }
        assert!(r.residual_alpha.iter().all(|a| a.norm() < 1e-3));
        let c = apply_correction(&r);
        for (z, d) in c.corrected_diagonal.iter().zip(PI_GATE) {
            assert!((z - d).norm() < 1e-3);
        }
        assert!(c.fidelity >= 0.999);
        assert!((analytic_correction_phase(&preset_a()) + PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn preset_a_effective_single_excitation_phase() {
        let p = SystemParams { model_kind: ModelKind::Effective, ..preset_a() };
        let want = wrap_phase(-PI / 2.0 + model::stark_phase(&p, p.t_total));
        let opts = GateOptions::default();
        let ge = run_row(&p, QubitRow::GE, &opts).unwrap();
        let eg = run_row(&p, QubitRow::EG, &opts).unwrap();
        assert!(wrap_phase(eg.phase(QubitRow::EG).unwrap() - want).abs() < 1e-3);
        assert_eq!(ge.amplitude, eg.amplitude);
        // Both Stark shifts act on |ee>, so its loop does not close at this time.
        assert!(matches!(run_gate(&p), Err(Error::AmbiguousPhase { row: "ee", .. })));
    }

    #[test]
    fn decoherence_budget_for_preset_b() {
        let p = Preset::B.params();
        let est = decoherence_error_estimate(&p);
        assert!((est.p_exc - 1.0 / 441.0).abs() < 1e-15);
        assert!((est.t_eff - 27.0 * 441.0).abs() < 1e-9);
        assert!((est.error - 105.0 * PI / 11907.0).abs() < 1e-15);
        let none = decoherence_error_estimate(&SystemParams { gamma_cav: 0.0, ..p });
        assert_eq!(none.error, 0.0);
    }

    #[test]
    fn json_key_order() {
        let r = apply_correction(&synthetic([0.0, 0.1, 0.1, 0.4]));
        let s = r.to_json(&[("tool", "geomgate".into())]);
        let keys = [
            "\"phases\"",
            "\"residual_alpha\"",
            "\"purity\"",
            "\"corrected\"",
            "\"fidelity\"",
            "\"max_excitation\"",
            "\"error_estimate\"",
            "\"meta\"",
        ];
        let pos: Vec<usize> = keys.iter().map(|k| s.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{s}");
        assert!(s.contains("\"meta\": {\"tool\": \"geomgate\"}"));
        assert_eq!(json_string("a\"b\\\n"), "\"a\\\"b\\\\\\n\"");
    }

    #[test]
    fn trajectory_follows_analytic_loop() {
        let p = SystemParams { n_max: FockDim::new(12).unwrap(), t_total: 2.5 * PI, ..preset_a() };
        let samples = sample_trajectory(&p, QubitRow::EG, &GateOptions::default()).unwrap();
        assert_eq!(samples.len(), StepGrid::new(p.t_total, p.dt).unwrap().steps + 1);
        for s in samples.iter().step_by(7) {
            let want = model::alpha_trajectory(&p, s.t).to_c64();
            assert!((s.alpha.to_c64() - want).norm() < 1e-4, "t={}", s.t);
            assert_eq!(s.p_r, 0.0);
        }
    }
}
