//! Time evolution on a [`JointSpace`].
//!
//! Unitary runs use the exponential midpoint rule
//! `psi_{k+1} = exp(-i H(t_k + dt/2) dt) psi_k`, which is exact for static
//! Hamiltonians (the step propagator is then computed once). Density-matrix
//! runs add zero-temperature cavity damping `gamma D[a]` and optional
//! `|r> -> |e>` decay through a Strang split
//! `K(dt/2) . U(dt) . K(dt/2)`, where `K` is the exact damping channel in
//! Kraus form. Both schemes are second order, and every run is repeated once
//! at half the step to report a convergence estimate (skipped when the
//! scheme is exact, i.e. for a static Hamiltonian without dissipation).

use ndarray::{s, Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::fock::{self, ComplexAmplitude};
use crate::linalg::{self, C64};
use crate::model::{self, JointOperator, JointSpace, Level};

const NORM_TOL: f64 = 1e-9;
const TRACE_TOL: f64 = 1e-8;
const POSITIVITY_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub enum JointState {
    Pure(Array1<C64>),
    Density(Array2<C64>),
}

impl JointState {
    pub fn dim(&self) -> usize {
        match self {
            JointState::Pure(v) => v.len(),
            JointState::Density(r) => r.nrows(),
        }
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, JointState::Pure(_))
    }

    pub fn to_density(&self) -> Array2<C64> {
        match self {
            JointState::Pure(v) => Array2::from_shape_fn((v.len(), v.len()), |(i, j)| v[i] * v[j].conj()),
            JointState::Density(r) => r.clone(),
        }
    }

    /// Vector norm for pure states, trace for density matrices.
    pub fn norm(&self) -> f64 {
        match self {
            JointState::Pure(v) => linalg::vec_norm(v),
            JointState::Density(r) => linalg::trace(r).re,
        }
    }

    /// Euclidean distance for pure states, Frobenius distance otherwise.
    pub fn distance(&self, other: &JointState) -> f64 {
        match (self, other) {
            (JointState::Pure(a), JointState::Pure(b)) => linalg::vec_norm(&(a - b)),
            _ => linalg::frobenius(&(self.to_density() - other.to_density())),
        }
    }

    /// `<i|state|j>` (amplitude product for pure states).
    pub fn element(&self, i: usize, j: usize) -> C64 {
        match self {
            JointState::Pure(v) => v[i] * v[j].conj(),
            JointState::Density(r) => r[[i, j]],
        }
    }

    /// Smallest eigenvalue; 0 for pure states.
    pub fn min_eigenvalue(&self) -> f64 {
        match self {
            JointState::Pure(_) => 0.0,
            JointState::Density(r) => linalg::hermitian_eigenvalues(r)[0],
        }
    }

    /// Checks unit norm (pure) or unit trace, Hermiticity and positivity
    /// (density).
    pub fn check(&self) -> Result<()> {
        match self {
            JointState::Pure(v) => {
                if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::NonFinite("state vector"));
                }
                let drift = (self.norm() - 1.0).abs();
                if drift > NORM_TOL {
                    return Err(Error::NormDrift { drift });
                }
            }
            JointState::Density(r) => {
                if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::NonFinite("density matrix"));
                }
                let drift = (self.norm() - 1.0).abs();
                if drift > TRACE_TOL {
                    return Err(Error::NormDrift { drift });
                }
                let herm = linalg::hermiticity_defect(r);
                if herm > TRACE_TOL {
                    return Err(Error::StateMismatch(format!("density matrix is not Hermitian (defect {herm:.2e})")));
                }
                let min = self.min_eigenvalue();
                if min < -NORM_TOL {
                    return Err(Error::StateMismatch(format!("density matrix has eigenvalue {min:.2e}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagationOptions {
    /// Largest accepted change of the final state under step halving.
    pub tolerance: f64,
    /// Rerun at `dt/2` to estimate the time-step error.
    pub check_convergence: bool,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self { tolerance: 1e-6, check_convergence: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagationReport {
    pub final_state: JointState,
    pub step_count: usize,
    /// Step actually used, `t_total / step_count`.
    pub dt: f64,
    /// Distance between the final states at `dt` and `dt/2`; 0 when not checked.
    pub convergence_estimate: f64,
    /// Deviation of the final norm or trace from 1.
    pub norm_drift: f64,
    pub notes: Vec<String>,
}

/// Uniform time grid covering `[0, t_total]` with a step no larger than the
/// requested one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepGrid {
    pub steps: usize,
    pub dt: f64,
}

impl StepGrid {
    pub fn new(t_total: f64, dt: f64) -> Result<Self> {
        if !t_total.is_finite() || !dt.is_finite() {
            return Err(Error::NonFinite("time grid"));
        }
        if dt <= 0.0 {
            return Err(Error::InvalidParams { name: "dt", reason: format!("{dt} must be > 0") });
        }
        if t_total < 0.0 {
            return Err(Error::InvalidParams { name: "t_total", reason: format!("{t_total} must be >= 0") });
        }
        if t_total == 0.0 {
            return Ok(Self { steps: 0, dt });
        }
        let x = t_total / dt;
        let steps = if (x - x.round()).abs() <= 1e-9 * x { x.round() } else { x.ceil() } as usize;
        Ok(Self { steps, dt: t_total / steps as f64 })
    }

    pub fn halved(self) -> Self {
        Self { steps: 2 * self.steps, dt: self.dt / 2.0 }
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

/// Incremental midpoint propagation of a pure state.
pub struct UnitaryStepper<'h> {
    h: &'h JointOperator,
    grid: StepGrid,
    k: usize,
    psi: Array1<C64>,
    fixed: Option<Array2<C64>>,
}

impl<'h> UnitaryStepper<'h> {
    pub fn new(h: &'h JointOperator, psi0: Array1<C64>, grid: StepGrid) -> Self {
        assert_eq!(psi0.len(), h.space().dim());
        let fixed = (!h.is_time_dependent()).then(|| linalg::unitary_step(&h.at(0.0), grid.dt));
        Self { h, grid, k: 0, psi: psi0, fixed }
    }

    /// Advances one step; returns false once the grid is exhausted.
    pub fn step(&mut self) -> bool {
        if self.k >= self.grid.steps {
            return false;
        }
        self.psi = match &self.fixed {
            Some(u) => u.dot(&self.psi),
            None => {
                let tm = self.grid.time(self.k) + 0.5 * self.grid.dt;
                linalg::unitary_step(&self.h.at(tm), self.grid.dt).dot(&self.psi)
            }
        };
        self.k += 1;
        true
    }

    pub fn time(&self) -> f64 {
        self.grid.time(self.k)
    }

    pub fn state(&self) -> &Array1<C64> {
        &self.psi
    }

    pub fn into_state(self) -> Array1<C64> {
        self.psi
    }
}

fn expect_pure(h: &JointOperator, psi0: &JointState) -> Result<Array1<C64>> {
    match psi0 {
        JointState::Pure(v) if v.len() == h.space().dim() => {
            psi0.check().map_err(|_| Error::StateMismatch(format!("initial state has norm {}", psi0.norm())))?;
            Ok(v.clone())
        }
        JointState::Pure(v) => Err(Error::StateMismatch(format!("state dimension {} vs space dimension {}", v.len(), h.space().dim()))),
        JointState::Density(_) => Err(Error::StateMismatch("unitary propagation needs a pure state".into())),
    }
}

pub fn propagate_unitary(h: &JointOperator, psi0: &JointState, t_total: f64, dt: f64) -> Result<PropagationReport> {
    propagate_unitary_with(h, psi0, t_total, dt, &PropagationOptions::default(), |_, _| {})
}

/// Midpoint propagation calling `observe(t, psi)` at `t = 0` and after every
/// step of the primary (not the half-step) run.
pub fn propagate_unitary_with(
    h: &JointOperator,
    psi0: &JointState,
    t_total: f64,
    dt: f64,
    opts: &PropagationOptions,
    mut observe: impl FnMut(f64, &Array1<C64>),
) -> Result<PropagationReport> {
    let v0 = expect_pure(h, psi0)?;
    let grid = StepGrid::new(t_total, dt)?;
    let mut stepper = UnitaryStepper::new(h, v0.clone(), grid);
    observe(0.0, stepper.state());
    while stepper.step() {
        observe(stepper.time(), stepper.state());
    }
    let final_state = JointState::Pure(stepper.into_state());
    let norm_drift = (final_state.norm() - 1.0).abs();
    if norm_drift > NORM_TOL {
        return Err(Error::NormDrift { drift: norm_drift });
    }
    let mut convergence_estimate = 0.0;
    if opts.check_convergence && grid.steps > 0 && h.is_time_dependent() {
        let mut fine = UnitaryStepper::new(h, v0, grid.halved());
        while fine.step() {}
        convergence_estimate = final_state.distance(&JointState::Pure(fine.into_state()));
        if convergence_estimate > opts.tolerance {
            return Err(Error::NonConvergence { estimate: convergence_estimate, tol: opts.tolerance });
        }
    }
    Ok(PropagationReport { final_state, step_count: grid.steps, dt: grid.dt, convergence_estimate, norm_drift, notes: Vec::new() })
}

/// Decay rates of the open-system runs.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Dissipation {
    pub gamma_cav: f64,
    /// `|r> -> |e>` decay of each atom.
    pub gamma_r: f64,
}

/// Kraus operators of zero-temperature amplitude damping for a time `s`
/// at rate `gamma`:
/// `K_k = sum_n sqrt(C(n,k)) e^{-gamma s (n-k)/2} (1 - e^{-gamma s})^{k/2} |n-k><n|`.
/// Exact for the truncated mode as well, since damping never raises `n`.
pub fn damping_kraus(dim: fock::FockDim, gamma_s: f64) -> Vec<Array2<C64>> {
    let d = dim.dim();
    let keep = (-gamma_s).exp();
    let lose = -(-gamma_s).exp_m1();
    let mut out = Vec::new();
    for k in 0..d {
        if k > 0 && lose == 0.0 {
            break;
        }
        let mut m = Array2::zeros((d, d));
        for n in k..d {
            let binom = (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
            let amp = binom.sqrt() * keep.powf(0.5 * (n - k) as f64) * lose.powf(0.5 * k as f64);
            m[[n - k, n]] = C64::from(amp);
        }
        out.push(m);
    }
    out
}

/// Products of Kraus channels acting on the joint space.
struct DampingChannel {
    stages: Vec<Vec<(Array2<C64>, Array2<C64>)>>,
}

impl DampingChannel {
    fn new(space: &JointSpace, diss: &Dissipation, s: f64) -> Self {
        let mut stages = Vec::new();
        let pair = |k: Array2<C64>| {
            let kd = linalg::dagger(&k);
            (k, kd)
        };
        if diss.gamma_cav > 0.0 {
            let id9 = linalg::identity(9);
            let stage = damping_kraus(space.fock(), diss.gamma_cav * s).into_iter().map(|k| pair(space.embed(&id9, &k))).collect();
            stages.push(stage);
        }
        if diss.gamma_r > 0.0 {
            let keep = (-0.5 * diss.gamma_r * s).exp();
            let lose = (-(-diss.gamma_r * s).exp_m1()).sqrt();
            let idm = linalg::identity(space.fock().dim());
            for j in 0..2 {
                let k0 = model::single(Level::G, Level::G)
                    + model::single(Level::E, Level::E)
                    + model::single(Level::R, Level::R) * C64::from(keep);
                let k1 = model::single(Level::E, Level::R) * C64::from(lose);
                let stage = [k0, k1].into_iter().map(|k| pair(space.embed(&model::on_atom(j, &k), &idm))).collect();
                stages.push(stage);
            }
        }
        Self { stages }
    }

    fn apply(&self, rho: &Array2<C64>) -> Array2<C64> {
        let mut rho = rho.clone();
        for stage in &self.stages {
            let mut next = Array2::zeros(rho.dim());
            for (k, kd) in stage {
                next += &k.dot(&rho).dot(kd);
            }
            rho = next;
        }
        rho
    }
}

/// Incremental Strang-split propagation of a density matrix.
pub struct LindbladStepper<'h> {
    h: &'h JointOperator,
    grid: StepGrid,
    k: usize,
    rho: Array2<C64>,
    fixed: Option<(Array2<C64>, Array2<C64>)>,
    half: DampingChannel,
}

impl<'h> LindbladStepper<'h> {
    pub fn new(h: &'h JointOperator, rho0: Array2<C64>, diss: &Dissipation, grid: StepGrid) -> Self {
        assert_eq!(rho0.nrows(), h.space().dim());
        let fixed = (!h.is_time_dependent()).then(|| {
            let u = linalg::unitary_step(&h.at(0.0), grid.dt);
            let ud = linalg::dagger(&u);
            (u, ud)
        });
        let half = DampingChannel::new(h.space(), diss, 0.5 * grid.dt);
        Self { h, grid, k: 0, rho: rho0, fixed, half }
    }

    pub fn step(&mut self) -> bool {
        if self.k >= self.grid.steps {
            return false;
        }
        let rho = self.half.apply(&self.rho);
        let rho = match &self.fixed {
            Some((u, ud)) => u.dot(&rho).dot(ud),
            None => {
                let tm = self.grid.time(self.k) + 0.5 * self.grid.dt;
                let u = linalg::unitary_step(&self.h.at(tm), self.grid.dt);
                u.dot(&rho).dot(&linalg::dagger(&u))
            }
        };
        self.rho = self.half.apply(&rho);
        self.k += 1;
        true
    }

    pub fn time(&self) -> f64 {
        self.grid.time(self.k)
    }

    pub fn state(&self) -> &Array2<C64> {
        &self.rho
    }

    pub fn into_state(self) -> Array2<C64> {
        self.rho
    }
}

fn expect_density(h: &JointOperator, rho0: &JointState) -> Result<Array2<C64>> {
    if rho0.dim() != h.space().dim() {
        return Err(Error::StateMismatch(format!("state dimension {} vs space dimension {}", rho0.dim(), h.space().dim())));
    }
    rho0.check().map_err(|e| Error::StateMismatch(format!("initial density matrix: {e}")))?;
    Ok(rho0.to_density())
}

pub fn propagate_lindblad(h: &JointOperator, rho0: &JointState, gamma_cav: f64, t_total: f64, dt: f64) -> Result<PropagationReport> {
    let diss = Dissipation { gamma_cav, gamma_r: 0.0 };
    propagate_lindblad_with(h, rho0, &diss, t_total, dt, &PropagationOptions::default(), |_, _| {})
}

/// Open-system propagation of
/// `drho/dt = -i[H(t), rho] + gamma_cav D[a] rho + gamma_r sum_j D[|e_j><r_j|] rho`,
/// calling `observe(t, rho)` at `t = 0` and after every step.
pub fn propagate_lindblad_with(
    h: &JointOperator,
    rho0: &JointState,
    diss: &Dissipation,
    t_total: f64,
    dt: f64,
    opts: &PropagationOptions,
    mut observe: impl FnMut(f64, &Array2<C64>),
) -> Result<PropagationReport> {
    for (name, v) in [("gamma_cav", diss.gamma_cav), ("gamma_r", diss.gamma_r)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidParams { name, reason: format!("{v} must be finite and >= 0") });
        }
    }
    let r0 = expect_density(h, rho0)?;
    let grid = StepGrid::new(t_total, dt)?;
    let mut stepper = LindbladStepper::new(h, r0.clone(), diss, grid);
    observe(0.0, stepper.state());
    while stepper.step() {
        observe(stepper.time(), stepper.state());
    }
    let final_state = JointState::Density(stepper.into_state());
    let norm_drift = (final_state.norm() - 1.0).abs();
    if norm_drift > TRACE_TOL {
        return Err(Error::NormDrift { drift: norm_drift });
    }
    let mut notes = Vec::new();
    let min = final_state.min_eigenvalue();
    if min < -POSITIVITY_TOL {
        notes.push(format!("PositivityBreach: smallest eigenvalue {min:.3e}"));
    }
    let mut convergence_estimate = 0.0;
    if opts.check_convergence && grid.steps > 0 && (h.is_time_dependent() || diss.gamma_cav > 0.0 || diss.gamma_r > 0.0) {
        let mut fine = LindbladStepper::new(h, r0, diss, grid.halved());
        while fine.step() {}
        convergence_estimate = final_state.distance(&JointState::Density(fine.into_state()));
        if convergence_estimate > opts.tolerance {
            return Err(Error::NonConvergence { estimate: convergence_estimate, tol: opts.tolerance });
        }
    }
    Ok(PropagationReport { final_state, step_count: grid.steps, dt: grid.dt, convergence_estimate, norm_drift, notes })
}

/// `exp(-i H_0 t) psi'` for a static diagonal `H_0`.
pub fn frame_transform(psi_prime: &JointState, h0: &JointOperator, t: f64) -> Result<JointState> {
    let diag = h0
        .static_diagonal()
        .ok_or_else(|| Error::InvalidParams { name: "h0", reason: "frame generator must be static and diagonal".into() })?;
    if diag.len() != psi_prime.dim() {
        return Err(Error::StateMismatch(format!("state dimension {} vs frame dimension {}", psi_prime.dim(), diag.len())));
    }
    Ok(frame_transform_diag(psi_prime, &diag, t))
}

pub fn frame_transform_diag(psi_prime: &JointState, diag: &Array1<f64>, t: f64) -> JointState {
    let ph = diag.mapv(|e| C64::from_polar(1.0, -e * t));
    match psi_prime {
        JointState::Pure(v) => JointState::Pure(v * &ph),
        JointState::Density(r) => JointState::Density(Array2::from_shape_fn(r.dim(), |(i, j)| r[[i, j]] * ph[i] * ph[j].conj())),
    }
}

/// Cavity quantities of a joint state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavityObservables {
    /// `<a>`.
    pub alpha: ComplexAmplitude,
    /// `<a+ a>`.
    pub photons: f64,
    /// `Tr(rho_cav^2)` of the normalized reduced cavity state.
    pub purity: f64,
    /// Total population of `|r>`, summed over both atoms.
    pub p_r: f64,
}

/// Reduced cavity density matrix (unnormalized if the state is).
pub fn reduced_cavity(space: &JointSpace, state: &JointState) -> Array2<C64> {
    let (na, nf) = (space.atoms().len(), space.fock().dim());
    match state {
        JointState::Pure(v) => {
            let m = v.view().into_shape_with_order((na, nf)).expect("state length matches space");
            // rho[n, m] = sum_a psi[a, n] psi*[a, m]
            m.t().dot(&m.mapv(|z| z.conj()))
        }
        JointState::Density(r) => {
            let mut out = Array2::zeros((nf, nf));
            for a in 0..na {
                out += &r.slice(s![a * nf..(a + 1) * nf, a * nf..(a + 1) * nf]);
            }
            out
        }
    }
}

pub fn cavity_observables(space: &JointSpace, state: &JointState) -> CavityObservables {
    let rho = reduced_cavity(space, state);
    let tr = linalg::trace(&rho).re;
    let nf = space.fock().dim();
    let mut alpha = C64::new(0.0, 0.0);
    let mut photons = 0.0;
    for n in 0..nf {
        photons += n as f64 * rho[[n, n]].re;
        if n + 1 < nf {
            // Tr(rho a) = sum_n sqrt(n+1) rho[n+1, n]
            alpha += rho[[n + 1, n]] * ((n + 1) as f64).sqrt();
        }
    }
    let purity = rho.iter().map(|z| z.norm_sqr()).sum::<f64>() / (tr * tr);
    let pops = atomic_populations(space, state);
    let p_r = space.atoms().iter().zip(pops.iter()).map(|(p, w)| p.count(Level::R) as f64 * w).sum::<f64>() / tr;
    CavityObservables { alpha: (alpha / tr).into(), photons: photons / tr, purity, p_r }
}

/// Population of each atomic basis state of `space`.
pub fn atomic_populations(space: &JointSpace, state: &JointState) -> Array1<f64> {
    let (na, nf) = (space.atoms().len(), space.fock().dim());
    match state {
        JointState::Pure(v) => {
            let m = v.view().into_shape_with_order((na, nf)).expect("state length matches space");
            m.map(|z| z.norm_sqr()).sum_axis(Axis(1))
        }
        JointState::Density(r) => Array1::from_shape_fn(na, |a| (0..nf).map(|n| r[[a * nf + n, a * nf + n]].re).sum()),
    }
}
