//! Gate-level invariants over random parameters.

use std::f64::consts::PI;

use crate::fock::FockDim;
use crate::gate::{apply_correction, run_gate, sample_trajectory, GateOptions, Preset};
use crate::geompath::{path_phase, DisplacementPath};
use crate::model::{alpha_trajectory, conditional_phase};
use crate::{ModelKind, QubitRow, SystemParams, C64};
use proptest::prelude::*;

fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

fn loops(omega: f64, delta_small: f64, count: f64) -> SystemParams {
    let mut p = SystemParams { omega, delta_small, n_max: FockDim::new(30).unwrap(), ..Preset::A.params() };
    p.t_total = count * p.loop_period();
    SystemParams { dt: p.default_dt() / 2.0, ..p }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn exchange_symmetry_and_area_law(omega in 0.3..1.2f64, delta_small in 0.05..0.6f64, count in 1u32..3) {
        let p = loops(omega, delta_small, count as f64);
        // Peak |alpha| of the ee loop is 4R.
        prop_assume!(4.0 * p.loop_radius() <= 2.5);
        let r = run_gate(&p).unwrap();
        let [_, ge, eg, ee] = r.phases;
        prop_assert_eq!(ge, eg);
        prop_assert!(wrap(ee - 4.0 * eg).abs() <= 1e-6, "ee {} eg {}", ee, eg);
        for a in r.residual_alpha {
            prop_assert!(a.norm() <= 1e-8);
        }
    }

    #[test]
    fn correction_cancels_single_atom_phases(x in -PI..PI) {
        let mut r = run_gate(&Preset::A.params()).unwrap();
        r.phases = [0.0, x, x, wrap(4.0 * x)];
        for k in 0..4 {
            r.amplitudes[k] = C64::from_polar(1.0, r.phases[k]);
            r.corrected_diagonal[k] = r.amplitudes[k];
        }
        let c = apply_correction(&r);
        let want = [C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::from_polar(1.0, 2.0 * x)];
        for (z, w) in c.corrected_diagonal.iter().zip(want) {
            prop_assert!((z - w).norm() <= 1e-12);
        }
        prop_assert_eq!(apply_correction(&c), c);
    }

    /// The printed secular-plus-sine phase against the geometric phase of the
    /// sampled analytic loop, at arbitrary (open) times.
    #[test]
    fn conditional_phase_matches_sampled_path(fraction in 0.05..2.5f64) {
        let p = Preset::B.params();
        let t = fraction * p.loop_period();
        let n = 20_000;
        let samples = (0..=n).map(|k| alpha_trajectory(&p, t * k as f64 / n as f64)).collect();
        let theta = path_phase(&DisplacementPath::new(samples).unwrap()).unwrap().theta;
        let (phi, _) = conditional_phase(&p, t);
        prop_assert!((theta - phi).abs() <= 1e-6 * (1.0 + phi.abs()), "theta {} phi {}", theta, phi);
    }
}

#[test]
fn preset_b_small_circle_invariants() {
    let p = Preset::B.params();
    let r = run_gate(&p).unwrap();
    let two_r_sq = (2.0 * p.loop_radius()).powi(2);
    assert!(r.witness.min_cavity_purity >= 1.0 - 4.0 * two_r_sq);
    for purity in r.cavity_purity {
        assert!(purity >= 1.0 - 4.0 * two_r_sq);
    }
    assert!(r.max_excitation <= two_r_sq + 1e-4, "{}", r.max_excitation);
    // 110.25 loops: each excited atom ends a quarter loop away from the origin.
    let radius = p.loop_radius();
    let a = r.residual_alpha[QubitRow::EG.index()];
    assert!((a.re - radius).abs() < 1e-3 && (a.im - radius).abs() < 1e-3, "{a:?}");
}

#[test]
fn propagated_trajectory_phase_at_open_times() {
    let p = SystemParams { n_max: FockDim::new(12).unwrap(), ..Preset::A.params() };
    let p = SystemParams { t_total: 0.6 * p.loop_period(), ..p };
    let samples = sample_trajectory(&p, QubitRow::GE, &GateOptions::default()).unwrap();
    let path = DisplacementPath::new(samples.iter().map(|s| s.alpha).collect()).unwrap();
    let theta = path_phase(&path).unwrap().theta;
    let (phi, _) = conditional_phase(&p, p.t_total);
    assert!((theta - phi).abs() < 1e-3, "theta {theta} phi {phi}");
    let end = alpha_trajectory(&p, p.t_total);
    let last = samples.last().unwrap().alpha;
    assert!((last.to_c64() - end.to_c64()).norm() < 1e-3);
}

#[test]
fn lindblad_gate_without_decay_matches_unitary() {
    let base = SystemParams { n_max: FockDim::new(4).unwrap(), gamma_cav: 0.0, ..Preset::B.params() };
    let base = SystemParams { t_total: 3.0 * base.loop_period(), ..base };
    let open = apply_correction(&run_gate(&SystemParams { model_kind: ModelKind::EffectiveLindblad, ..base.clone() }).unwrap());
    let closed = apply_correction(&run_gate(&SystemParams { model_kind: ModelKind::Effective, ..base }).unwrap());
    assert!((open.witness.fidelity - closed.fidelity).abs() < 1e-6, "{} {}", open.witness.fidelity, closed.fidelity);
    for (a, b) in open.phases.iter().zip(closed.phases) {
        assert!(wrap(a - b).abs() < 1e-6);
    }
}
