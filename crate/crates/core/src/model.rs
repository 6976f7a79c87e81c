//! Two three-level atoms coupled to one cavity mode and a classical field.
//!
//! Levels per atom are `g < e < r`; `g` and `e` carry the qubit and `r` is
//! the auxiliary excited state. Joint basis states are
//! `|l1 l2> (x) |n>` with atom 1 the slowest index and the photon number the
//! fastest. All frequencies are in units of the coupling `g`.
//!
//! Four Hamiltonians are provided, each as a sum of static and
//! single-frequency terms (see [`JointOperator`]):
//!
//! * [`full_hamiltonian`]: the dispersive three-level model, in the frame
//!   rotating at the cavity frequency.
//! * [`effective_hamiltonian`]: its second-order effective form (Stark
//!   shifts, field-assisted cavity coupling, cavity-mediated exchange).
//! * [`frame_hamiltonian`]: the diagonal Stark part used to change frame.
//! * [`transformed_hamiltonian`]: the effective coupling in that frame, with
//!   the per-atom sideband detunings `delta -+ g^2/Delta`.
//!
//! The per-atom sideband form of the transformed Hamiltonian is the exact
//! frame conjugate only in sectors with at most one atom outside `g`. With
//! both atoms in `e` the cavity Stark shifts add, and the exact conjugate
//! oscillates at `delta + 2 g^2/Delta` instead (see [`frame_conjugate`]).

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::fock::{self, ComplexAmplitude, FockDim};
use crate::linalg::{self, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    G,
    E,
    R,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::G, Level::E, Level::R];

    fn index(self) -> usize {
        self as usize
    }
}

/// Two-atom basis state `|l1 l2>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomPair(pub Level, pub Level);

impl AtomPair {
    fn index9(self) -> usize {
        3 * self.0.index() + self.1.index()
    }

    pub fn count(self, level: Level) -> usize {
        (self.0 == level) as usize + (self.1 == level) as usize
    }
}

impl fmt::Display for AtomPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = |l: Level| match l {
            Level::G => 'g',
            Level::E => 'e',
            Level::R => 'r',
        };
        write!(f, "{}{}", c(self.0), c(self.1))
    }
}

/// Computational basis state, in report order `gg, ge, eg, ee`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QubitRow {
    GG,
    GE,
    EG,
    EE,
}

impl QubitRow {
    pub const ALL: [QubitRow; 4] = [QubitRow::GG, QubitRow::GE, QubitRow::EG, QubitRow::EE];

    pub fn pair(self) -> AtomPair {
        match self {
            QubitRow::GG => AtomPair(Level::G, Level::G),
            QubitRow::GE => AtomPair(Level::G, Level::E),
            QubitRow::EG => AtomPair(Level::E, Level::G),
            QubitRow::EE => AtomPair(Level::E, Level::E),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            QubitRow::GG => "gg",
            QubitRow::GE => "ge",
            QubitRow::EG => "eg",
            QubitRow::EE => "ee",
        }
    }

    /// Number of atoms in `e`.
    pub fn excitations(self) -> usize {
        self.pair().count(Level::E)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// A set of two-atom basis states tensored with a truncated Fock space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointSpace {
    atoms: Vec<AtomPair>,
    fock: FockDim,
}

impl JointSpace {
    pub fn new(atoms: Vec<AtomPair>, fock: FockDim) -> Self {
        assert!(!atoms.is_empty(), "joint space needs at least one atomic state");
        Self { atoms, fock }
    }

    /// All nine two-atom states.
    pub fn full(fock: FockDim) -> Self {
        let atoms = Level::ALL.iter().flat_map(|&a| Level::ALL.iter().map(move |&b| AtomPair(a, b))).collect();
        Self::new(atoms, fock)
    }

    /// The four computational states.
    pub fn qubit(fock: FockDim) -> Self {
        Self::new(QubitRow::ALL.iter().map(|r| r.pair()).collect(), fock)
    }

    pub fn sector(pair: AtomPair, fock: FockDim) -> Self {
        Self::new(vec![pair], fock)
    }

    /// Smallest subspace closed under the full model that contains `row`:
    /// an atom in `g` stays there, an atom in `e` may visit `r`.
    pub fn row_closure(row: QubitRow, fock: FockDim) -> Self {
        let choices = |l: Level| match l {
            Level::G => vec![Level::G],
            _ => vec![Level::E, Level::R],
        };
        let p = row.pair();
        let atoms = choices(p.0).into_iter().flat_map(|a| choices(p.1).into_iter().map(move |b| AtomPair(a, b))).collect();
        Self::new(atoms, fock)
    }

    pub fn atoms(&self) -> &[AtomPair] {
        &self.atoms
    }

    pub fn fock(&self) -> FockDim {
        self.fock
    }

    pub fn dim(&self) -> usize {
        self.atoms.len() * self.fock.dim()
    }

    pub fn atom_index(&self, pair: AtomPair) -> Option<usize> {
        self.atoms.iter().position(|&p| p == pair)
    }

    pub fn index(&self, pair: AtomPair, n: usize) -> Option<usize> {
        (n < self.fock.dim()).then_some(())?;
        self.atom_index(pair).map(|a| a * self.fock.dim() + n)
    }

    /// `|pair> (x) |n>` as a state vector.
    pub fn basis_vector(&self, pair: AtomPair, n: usize) -> Option<Array1<C64>> {
        let i = self.index(pair, n)?;
        let mut v = Array1::zeros(self.dim());
        v[i] = C64::new(1.0, 0.0);
        Some(v)
    }

    /// Embeds an atomic operator on the nine-state space, restricted to this
    /// space's atomic states, tensored with a mode operator.
    pub fn embed(&self, atomic9: &Array2<C64>, mode: &Array2<C64>) -> Array2<C64> {
        let na = self.atoms.len();
        let restricted = Array2::from_shape_fn((na, na), |(i, j)| atomic9[[self.atoms[i].index9(), self.atoms[j].index9()]]);
        linalg::kron(&restricted, mode)
    }

    pub fn contains_space(&self, other: &JointSpace) -> bool {
        self.fock == other.fock && other.atoms.iter().all(|p| self.atoms.contains(p))
    }
}

/// `|out><in|` on one three-level atom.
pub(crate) fn single(level_out: Level, level_in: Level) -> Array2<C64> {
    let mut m = Array2::zeros((3, 3));
    m[[level_out.index(), level_in.index()]] = C64::new(1.0, 0.0);
    m
}

/// Single-atom operator acting on atom `j` (0 or 1) of the pair.
pub(crate) fn on_atom(j: usize, op: &Array2<C64>) -> Array2<C64> {
    let id = linalg::identity(3);
    if j == 0 {
        linalg::kron(op, &id)
    } else {
        linalg::kron(&id, op)
    }
}

fn proj(level: Level) -> Array2<C64> {
    single(level, level)
}

/// `S+ = |r><e|`.
fn raise() -> Array2<C64> {
    single(Level::R, Level::E)
}

/// `S- = |e><r|`.
fn lower() -> Array2<C64> {
    single(Level::E, Level::R)
}

fn s_z() -> Array2<C64> {
    (proj(Level::R) - proj(Level::E)) * C64::from(0.5)
}

fn sum_atoms(op: &Array2<C64>) -> Array2<C64> {
    on_atom(0, op) + on_atom(1, op)
}

fn dipole_exchange() -> Array2<C64> {
    on_atom(0, &raise()).dot(&on_atom(1, &lower())) + on_atom(0, &lower()).dot(&on_atom(1, &raise()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Full,
    Effective,
    Transformed,
    EffectiveLindblad,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Full, ModelKind::Effective, ModelKind::Transformed, ModelKind::EffectiveLindblad];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Full => "full",
            ModelKind::Effective => "effective",
            ModelKind::Transformed => "transformed",
            ModelKind::EffectiveLindblad => "effective_lindblad",
        }
    }

    pub fn is_dissipative(self) -> bool {
        self == ModelKind::EffectiveLindblad
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown model kind `{s}` (expected full, effective, transformed or effective_lindblad)"))
    }
}

/// Physical and numerical parameters. Frequencies and times are in units of
/// `g` (so `g` is normally 1).
#[derive(Clone, Debug, PartialEq)]
pub struct SystemParams {
    pub g: f64,
    /// Classical-field Rabi frequency.
    pub omega: f64,
    /// Atom-cavity detuning.
    pub delta_large: f64,
    /// Two-field detuning.
    pub delta_small: f64,
    /// Cavity decay rate; acts in open-system runs (see [`SystemParams::is_open`]).
    pub gamma_cav: f64,
    /// Decay of `|r>` into `|e>`; only acts in the full model.
    pub gamma_r: f64,
    pub n_max: FockDim,
    pub t_total: f64,
    pub dt: f64,
    pub model_kind: ModelKind,
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("g", self.g),
            ("omega", self.omega),
            ("delta_large", self.delta_large),
            ("delta_small", self.delta_small),
            ("gamma_cav", self.gamma_cav),
            ("gamma_r", self.gamma_r),
            ("t_total", self.t_total),
            ("dt", self.dt),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::InvalidParams { name, reason: format!("{v} is not finite") });
            }
        }
        let positive = |name: &'static str, v: f64, strict: bool| {
            if (strict && v <= 0.0) || v < 0.0 {
                Err(Error::InvalidParams { name, reason: format!("{v} must be {}", if strict { "> 0" } else { ">= 0" }) })
            } else {
                Ok(())
            }
        };
        positive("g", self.g, true)?;
        positive("omega", self.omega, false)?;
        positive("gamma_cav", self.gamma_cav, false)?;
        positive("gamma_r", self.gamma_r, false)?;
        positive("t_total", self.t_total, false)?;
        positive("dt", self.dt, true)?;
        if self.delta_large == 0.0 {
            return Err(Error::InvalidParams { name: "delta_large", reason: "must be nonzero".into() });
        }
        Ok(())
    }

    /// Whether runs evolve a density matrix: the `effective_lindblad` model,
    /// or the full model with `|r>` decay. Both decay channels act then.
    pub fn is_open(&self) -> bool {
        self.model_kind.is_dissipative() || (self.model_kind == ModelKind::Full && self.gamma_r > 0.0)
    }

    /// Soft dispersive-regime checks. Returned, not enforced.
    pub fn regime_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let scale = self.g.max(self.omega);
        if self.delta_large.abs() < 5.0 * scale {
            out.push(format!("|delta_large| = {} < 5 max(g, omega) = {}: dispersive elimination is poor", self.delta_large, 5.0 * scale));
        }
        if self.delta_small.abs() > 0.5 * self.delta_large.abs() {
            out.push(format!("delta_small = {} is not small against delta_large = {}", self.delta_small, self.delta_large));
        }
        let fastest = self.fastest_frequency();
        if fastest > 0.0 && self.dt > TAU / (50.0 * fastest) {
            out.push(format!("dt = {} resolves the fastest phase (frequency {fastest}) with fewer than 50 points", self.dt));
        }
        out
    }

    /// Effective field-assisted coupling `Omega g / Delta`.
    pub fn sideband_coupling(&self) -> f64 {
        self.omega * self.g / self.delta_large
    }

    /// Loop frequency `delta + g^2/Delta` of a single-atom trajectory.
    pub fn loop_frequency(&self) -> f64 {
        self.delta_small + self.g * self.g / self.delta_large
    }

    /// Loop radius `Omega g / (Delta delta + g^2)`.
    pub fn loop_radius(&self) -> f64 {
        self.omega * self.g / (self.delta_large * self.delta_small + self.g * self.g)
    }

    /// Duration of one closed single-atom loop.
    pub fn loop_period(&self) -> f64 {
        TAU / self.loop_frequency().abs()
    }

    /// Time at which the secular single-atom phase reaches `-pi/2`, i.e. the
    /// doubly excited row picks up a conditional `-pi` after correction:
    /// `t = pi Delta (Delta delta + g^2) / (2 Omega^2 g^2)`.
    pub fn pi_gate_time(&self) -> f64 {
        PI * self.delta_large * (self.delta_large * self.delta_small + self.g * self.g) / (2.0 * self.omega.powi(2) * self.g.powi(2))
    }

    fn fastest_frequency(&self) -> f64 {
        match self.model_kind {
            ModelKind::Full => self.delta_large.abs(),
            _ => self.loop_frequency().abs(),
        }
    }

    /// `2 pi / (200 Delta)` for the full model, `2 pi / (200 nu)` otherwise.
    pub fn default_dt(&self) -> f64 {
        TAU / (200.0 * self.fastest_frequency())
    }

    pub fn with_default_dt(mut self) -> Self {
        self.dt = self.default_dt();
        self
    }

    /// Joint space the selected model runs on when all four computational
    /// rows are needed at once.
    pub fn joint_space(&self) -> JointSpace {
        match self.model_kind {
            ModelKind::Full => JointSpace::full(self.n_max),
            _ => JointSpace::qubit(self.n_max),
        }
    }

    /// Smallest space holding the evolution of one computational row.
    pub fn row_space(&self, row: QubitRow) -> JointSpace {
        match self.model_kind {
            ModelKind::Full => JointSpace::row_closure(row, self.n_max),
            _ => JointSpace::sector(row.pair(), self.n_max),
        }
    }

    /// The Hamiltonian of the selected model on `space`.
    pub fn hamiltonian(&self, space: &JointSpace) -> JointOperator {
        match self.model_kind {
            ModelKind::Full => full_hamiltonian(self, space),
            ModelKind::Effective | ModelKind::EffectiveLindblad => effective_hamiltonian(self, space),
            ModelKind::Transformed => transformed_hamiltonian(self, space),
        }
    }
}

/// One term `exp(i freq t) * matrix` of a Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub freq: f64,
    pub matrix: Array2<C64>,
}

/// Hermitian operator on a [`JointSpace`], given as a finite sum of static
/// and single-frequency terms. Hermiticity holds at every `t` because every
/// oscillating term is paired with its conjugate.
#[derive(Clone, Debug, PartialEq)]
pub struct JointOperator {
    space: JointSpace,
    terms: Vec<Term>,
}

impl JointOperator {
    pub fn new(space: JointSpace) -> Self {
        Self { space, terms: Vec::new() }
    }

    pub fn space(&self) -> &JointSpace {
        &self.space
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Adds `coeff * exp(i freq t) * matrix`; zero terms are dropped.
    pub fn push(&mut self, freq: f64, matrix: Array2<C64>) {
        assert_eq!(matrix.dim(), (self.space.dim(), self.space.dim()));
        if linalg::max_abs(&matrix) == 0.0 {
            return;
        }
        if let Some(t) = self.terms.iter_mut().find(|t| t.freq == freq) {
            t.matrix = &t.matrix + &matrix;
        } else {
            self.terms.push(Term { freq, matrix });
        }
    }

    /// Adds `matrix * e^{i freq t}` plus its Hermitian conjugate.
    pub fn push_with_conjugate(&mut self, freq: f64, matrix: Array2<C64>) {
        let conj = linalg::dagger(&matrix);
        self.push(freq, matrix);
        self.push(-freq, conj);
    }

    pub fn is_time_dependent(&self) -> bool {
        self.terms.iter().any(|t| t.freq != 0.0)
    }

    pub fn at(&self, t: f64) -> Array2<C64> {
        let n = self.space.dim();
        let mut out = Array2::zeros((n, n));
        for term in &self.terms {
            let c = if term.freq == 0.0 { C64::new(1.0, 0.0) } else { C64::from_polar(1.0, term.freq * t) };
            out.scaled_add(c, &term.matrix);
        }
        out
    }

    /// Diagonal of a static diagonal operator, or `None` otherwise.
    pub fn static_diagonal(&self) -> Option<Array1<f64>> {
        if self.is_time_dependent() {
            return None;
        }
        let m = self.at(0.0);
        let n = m.nrows();
        for i in 0..n {
            for j in 0..n {
                if i != j && m[[i, j]].norm() > 0.0 {
                    return None;
                }
            }
        }
        Some(m.diag().mapv(|z| z.re))
    }
}

fn mode_ops(fock: FockDim) -> (Array2<C64>, Array2<C64>, Array2<C64>, Array2<C64>) {
    let a = fock::annihilation(fock).into_matrix();
    let ad = linalg::dagger(&a);
    let n = fock::number(fock).into_matrix();
    (a, ad, n, linalg::identity(fock.dim()))
}

/// Three-level dispersive model in the frame rotating at the cavity frequency:
///
/// `H(t) = sum_j [ Delta S_z,j + g (a S+_j + a+ S-_j) + Omega (e^{-i delta t} S+_j + e^{i delta t} S-_j) ]`.
pub fn full_hamiltonian(params: &SystemParams, space: &JointSpace) -> JointOperator {
    let (a, _, _, id) = mode_ops(space.fock());
    let mut h = JointOperator::new(space.clone());
    h.push(0.0, space.embed(&sum_atoms(&s_z()), &id) * C64::from(params.delta_large));
    h.push_with_conjugate(0.0, space.embed(&sum_atoms(&raise()), &a) * C64::from(params.g));
    h.push_with_conjugate(-params.delta_small, space.embed(&sum_atoms(&raise()), &id) * C64::from(params.omega));
    h
}

/// The full model in the frame `exp(-i G t)` with
/// `G = delta (a+ a + sum_j |r_j><r_j|)`, where it is time independent.
#[derive(Clone, Debug)]
pub struct RotatingFrameHamiltonian {
    pub static_part: Array2<C64>,
    /// Diagonal of `G`.
    pub frame: Array1<f64>,
    pub space: JointSpace,
}

pub fn full_hamiltonian_rotating(params: &SystemParams, space: &JointSpace) -> RotatingFrameHamiltonian {
    let (a, _, n, id) = mode_ops(space.fock());
    let sp = space.embed(&sum_atoms(&raise()), &a) * C64::from(params.g);
    let drive = space.embed(&sum_atoms(&raise()), &id) * C64::from(params.omega);
    let frame_op = space.embed(&linalg::identity(9), &n) + space.embed(&sum_atoms(&proj(Level::R)), &id);
    let frame_op = frame_op * C64::from(params.delta_small);
    let static_part =
        space.embed(&sum_atoms(&s_z()), &id) * C64::from(params.delta_large) + &sp + linalg::dagger(&sp) + &drive + linalg::dagger(&drive)
            - &frame_op;
    RotatingFrameHamiltonian { static_part, frame: frame_op.diag().mapv(|z| z.re), space: space.clone() }
}

/// Second-order effective Hamiltonian of the dispersive model:
///
/// ```text
/// H_i(t) = (1/Delta) sum_j (g^2 a+a + Omega^2 + Omega g (a e^{i delta t} + a+ e^{-i delta t})) (|r_j><r_j| - |e_j><e_j|)
///        + (g^2/Delta) sum_j |r_j><r_j| + (g^2/Delta) (S+_1 S-_2 + S-_1 S+_2)
/// ```
pub fn effective_hamiltonian(params: &SystemParams, space: &JointSpace) -> JointOperator {
    let (a, _, n, id) = mode_ops(space.fock());
    let (g, om, dl) = (params.g, params.omega, params.delta_large);
    let pop_diff = sum_atoms(&(proj(Level::R) - proj(Level::E)));
    let mut h = JointOperator::new(space.clone());
    h.push(0.0, space.embed(&pop_diff, &(n * C64::from(g * g / dl) + id.clone() * C64::from(om * om / dl))));
    h.push(0.0, space.embed(&sum_atoms(&proj(Level::R)), &id) * C64::from(g * g / dl));
    h.push(0.0, space.embed(&dipole_exchange(), &id) * C64::from(g * g / dl));
    h.push_with_conjugate(params.delta_small, space.embed(&pop_diff, &a) * C64::from(om * g / dl));
    h
}

/// Static diagonal Stark part
/// `H_0 = (1/Delta) sum_j [ (g^2 a+a + Omega^2)(|r_j><r_j| - |e_j><e_j|) + g^2 |r_j><r_j| ]`.
pub fn frame_hamiltonian(params: &SystemParams, space: &JointSpace) -> JointOperator {
    let (_, _, n, id) = mode_ops(space.fock());
    let (g, om, dl) = (params.g, params.omega, params.delta_large);
    let pop_diff = sum_atoms(&(proj(Level::R) - proj(Level::E)));
    let mut h = JointOperator::new(space.clone());
    h.push(0.0, space.embed(&pop_diff, &(n * C64::from(g * g / dl) + id.clone() * C64::from(om * om / dl))));
    h.push(0.0, space.embed(&sum_atoms(&proj(Level::R)), &id) * C64::from(g * g / dl));
    h
}

/// Effective coupling in the frame of [`frame_hamiltonian`], with per-atom
/// sideband detunings:
///
/// ```text
/// H'(t) = (Omega g/Delta) sum_j { [a e^{i(delta - g^2/Delta)t} + h.c.] |r_j><r_j|
///                               - [a e^{i(delta + g^2/Delta)t} + h.c.] |e_j><e_j| }
///       + (g^2/Delta)(S+_1 S-_2 + S-_1 S+_2)
/// ```
pub fn transformed_hamiltonian(params: &SystemParams, space: &JointSpace) -> JointOperator {
    let (a, _, _, id) = mode_ops(space.fock());
    let (g, dl) = (params.g, params.delta_large);
    let shift = g * g / dl;
    let eps = C64::from(params.sideband_coupling());
    let mut h = JointOperator::new(space.clone());
    h.push_with_conjugate(params.delta_small - shift, space.embed(&sum_atoms(&proj(Level::R)), &a) * eps);
    h.push_with_conjugate(params.delta_small + shift, space.embed(&sum_atoms(&proj(Level::E)), &a) * (-eps));
    h.push(0.0, space.embed(&dipole_exchange(), &id) * C64::from(g * g / dl));
    h
}

/// `exp(i H_0 t) M exp(-i H_0 t)` for a diagonal `H_0`.
pub fn frame_conjugate(m: &Array2<C64>, h0_diag: &Array1<f64>, t: f64) -> Array2<C64> {
    Array2::from_shape_fn(m.dim(), |(k, l)| m[[k, l]] * C64::from_polar(1.0, (h0_diag[k] - h0_diag[l]) * t))
}

/// Single-atom cavity displacement
/// `alpha(t) = -(Omega g / (Delta delta + g^2)) (exp(-i nu t) - 1)`, `nu = delta + g^2/Delta`.
/// The doubly excited row follows `2 alpha(t)`, the `gg` row stays at 0.
pub fn alpha_trajectory(params: &SystemParams, t: f64) -> ComplexAmplitude {
    let nu = params.loop_frequency();
    let eps = params.sideband_coupling();
    let x = nu * t;
    if x.abs() < 1e-6 {
        // i eps t (1 - i x/2 - x^2/6)
        let z = C64::new(0.0, eps * t) * C64::new(1.0 - x * x / 6.0, -x / 2.0);
        return z.into();
    }
    let z = C64::from(-params.loop_radius()) * (C64::from_polar(1.0, -x) - 1.0);
    z.into()
}

/// Conditional phases `(phi, phi')` of the single- and doubly-excited rows,
/// `phi = -(Omega g)^2 / (Delta (Delta delta + g^2)) [t - sin(nu t)/nu]`, `phi' = 4 phi`.
pub fn conditional_phase(params: &SystemParams, t: f64) -> (f64, f64) {
    let nu = params.loop_frequency();
    let eps = params.sideband_coupling();
    let x = nu * t;
    // t - sin(x)/nu = (x - sin x)/nu
    let x_minus_sin = if x.abs() < 1e-3 { x.powi(3) / 6.0 - x.powi(5) / 120.0 } else { x - x.sin() };
    let phi = if nu == 0.0 { 0.0 } else { -eps * eps * x_minus_sin / (nu * nu) };
    (phi, 4.0 * phi)
}

/// Secular part of [`conditional_phase`]:
/// `-(Omega g)^2 t / (Delta (Delta delta + g^2))`.
pub fn secular_phase(params: &SystemParams, t: f64) -> f64 {
    let (om, g, dl, ds) = (params.omega, params.g, params.delta_large, params.delta_small);
    -(om * g).powi(2) * t / (dl * (dl * ds + g * g))
}

/// Dynamic phase `Omega^2 t / Delta` a single `e` atom picks up from the
/// classical-field Stark shift.
pub fn stark_phase(params: &SystemParams, t: f64) -> f64 {
    params.omega.powi(2) * t / params.delta_large
}
