//! Acceptance criteria, one line each. Runs as a plain binary so the
//! verdict lines always reach the test log; exits non-zero if any fails.

use std::f64::consts::PI;
use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use geomgate::dynamics::{frame_transform, propagate_lindblad_with, propagate_unitary_with, Dissipation, JointState, PropagationOptions};
use geomgate::fock::{displacement, ComplexAmplitude, FockDim};
use geomgate::gate::{self, apply_correction, decoherence_error_estimate, run_gate, run_row, GateOptions, Preset, PI_GATE};
use geomgate::geompath::{compose_displacements, path_phase, DisplacementPath};
use geomgate::model::{
    self, effective_hamiltonian, frame_hamiltonian, transformed_hamiltonian, JointSpace, ModelKind, QubitRow, SystemParams,
};
use geomgate::C64;

struct Verdict {
    pass: bool,
    detail: String,
}

type Check = fn() -> Verdict;

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

fn no_check() -> PropagationOptions {
    PropagationOptions { tolerance: f64::INFINITY, check_convergence: false }
}

fn amp(re: f64, im: f64) -> ComplexAmplitude {
    ComplexAmplitude::new(re, im)
}

/// Composition law and closed-path identity for `|alpha|, |beta| <= 0.3` at
/// `n_max = 24`, entrywise on the levels the truncation represents.
fn displacement_algebra() -> Verdict {
    let start = Instant::now();
    let dim = FockDim::new(24).unwrap();
    let block = dim.trusted_levels();
    let mut comp: f64 = 0.0;
    let mut comp_full: f64 = 0.0;
    let mags = [0.05, 0.15, 0.3];
    let angles = [0.0, 0.9, 2.2, 4.0];
    for &ra in &mags {
        for &ta in &angles {
            for &rb in &mags {
                for &tb in &angles {
                    let a = C64::from_polar(ra, ta);
                    let b = C64::from_polar(rb, tb);
                    let lhs = &displacement(a.into(), dim) * &displacement(b.into(), dim);
                    let rhs = displacement((a + b).into(), dim).scale(C64::from_polar(1.0, (a * b.conj()).im));
                    comp = comp.max(lhs.block_max_diff(&rhs, block));
                    comp_full = comp_full.max(lhs.max_abs_diff(&rhs));
                }
            }
        }
    }
    let loops = [
        vec![amp(0.0, 0.0), amp(0.3, 0.0), amp(0.0, 0.3)],
        vec![amp(-0.15, -0.15), amp(0.15, -0.15), amp(0.15, 0.15), amp(-0.15, 0.15)],
        (0..6).map(|k| C64::from_polar(0.3, k as f64 * PI / 3.0).into()).collect(),
        vec![amp(0.1, 0.0), amp(-0.2, 0.1), amp(0.05, -0.2), amp(0.0, 0.25)],
    ];
    let mut closed: f64 = 0.0;
    for vertices in loops {
        let path = DisplacementPath::polygon(&vertices).unwrap();
        let (product, theta) = compose_displacements(&path, dim).unwrap();
        let want = geomgate::ModeOperator::identity(dim).scale(C64::from_polar(1.0, theta));
        closed = closed.max(product.block_max_diff(&want, block));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        comp <= 1e-8 && closed <= 1e-8 && secs < 1.0,
        format!(
            "composition {comp:.2e}, closed path {closed:.2e} on levels 0..={} (full-matrix composition deviation {comp_full:.2e} is the truncation corner), {secs:.2} s",
            block - 1
        ),
    )
}

fn area_law() -> Verdict {
    let mut rel: f64 = 0.0;
    let polygons: Vec<Vec<ComplexAmplitude>> = vec![
        vec![amp(0.0, 0.0), amp(0.2, 0.0), amp(0.2, 0.2), amp(0.0, 0.2)],
        vec![amp(1.0, -0.5), amp(-0.3, 0.8), amp(-0.9, -1.1)],
        // Non-convex arrow.
        vec![amp(0.0, 0.0), amp(2.0, 1.0), amp(0.0, 2.0), amp(0.7, 1.0)],
        (0..17).map(|k| C64::from_polar(0.4 + 0.1 * (k % 3) as f64, 2.0 * PI * k as f64 / 17.0).into()).collect(),
    ];
    for v in &polygons {
        for path in [DisplacementPath::polygon(v).unwrap(), DisplacementPath::polygon(v).unwrap().reversed()] {
            let r = path_phase(&path).unwrap();
            rel = rel.max((r.theta.abs() - 2.0 * r.signed_area.abs()).abs() / r.theta.abs());
        }
    }
    let mut circle: f64 = 0.0;
    for (c, radius) in [(amp(0.0, 0.0), 0.05), (amp(0.3, -0.2), 0.5), (amp(-1.0, 1.0), 1.0), (amp(0.0, 0.0), 2.0)] {
        for ccw in [true, false] {
            let r = path_phase(&DisplacementPath::circle(c, radius, 10_000, ccw).unwrap()).unwrap();
            rel = rel.max((r.theta.abs() - 2.0 * r.signed_area.abs()).abs() / r.theta.abs());
            circle = circle.max((r.theta.abs() - 2.0 * PI * radius * radius).abs());
        }
    }
    verdict(
        rel <= 1e-12 && circle <= 1e-3,
        format!("max relative |Theta| vs 2|area| {rel:.1e}, circle |Theta - 2 pi r^2| at 1e4 segments {circle:.2e}"),
    )
}

fn preset_a_gate() -> Verdict {
    let start = Instant::now();
    let r = run_gate(&Preset::A.params()).unwrap();
    let want = [0.0, -PI / 2.0, -PI / 2.0, -2.0 * PI];
    let phase_err = r.phases.iter().zip(want).map(|(p, w)| wrap(p - w).abs()).fold(0.0, f64::max);
    let residual = r.residual_alpha.iter().map(|a| a.norm()).fold(0.0, f64::max);
    let c = apply_correction(&r);
    let diag_err = c.corrected_diagonal.iter().zip(PI_GATE).map(|(z, d)| (z - d).norm()).fold(0.0, f64::max);
    verdict(
        phase_err <= 1e-3 && residual <= 1e-3 && diag_err <= 1e-3 && c.fidelity >= 0.999,
        format!(
            "phase error {phase_err:.2e} rad, residual |alpha| {residual:.2e}, corrected diagonal error {diag_err:.2e}, fidelity {:.6}, {:.2} s",
            c.fidelity,
            start.elapsed().as_secs_f64()
        ),
    )
}

/// Propagation under the effective Hamiltonian against the Stark-frame
/// propagation transformed back, for every computational input state.
fn frame_consistency() -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for (preset, refine) in [(Preset::A, 16.0), (Preset::B, 8.0)] {
        let p = preset.params();
        let dt = p.dt / refine;
        let mut devs = Vec::new();
        for row in QubitRow::ALL {
            // Every model here is diagonal in the atoms, so each row evolves in its own sector.
            let q = JointSpace::sector(row.pair(), p.n_max);
            let (hi, hp, h0) = (effective_hamiltonian(&p, &q), transformed_hamiltonian(&p, &q), frame_hamiltonian(&p, &q));
            let psi0 = JointState::Pure(q.basis_vector(row.pair(), 0).unwrap());
            let direct = propagate_unitary_with(&hi, &psi0, p.t_total, dt, &no_check(), |_, _| {}).unwrap();
            let framed = propagate_unitary_with(&hp, &psi0, p.t_total, dt, &no_check(), |_, _| {}).unwrap();
            let back = frame_transform(&framed.final_state, &h0, p.t_total).unwrap();
            let d = direct.final_state.distance(&back);
            pass &= d <= 1e-6;
            devs.push(format!("{} {d:.1e}", row.label()));
        }
        parts.push(format!("preset {} (dt/{refine}): {}", preset.name(), devs.join(", ")));
    }
    verdict(pass, format!("final-state distance (tolerance 1e-6) {}", parts.join("; ")))
}

fn full_model_validation() -> Verdict {
    let opts = GateOptions::default();
    let mut diffs = Vec::new();
    let mut p_r = Vec::new();
    for delta_large in [10.0, 20.0, 40.0] {
        let at = |kind| {
            SystemParams {
                delta_large,
                delta_small: 1.0 / delta_large,
                t_total: PI * delta_large,
                n_max: FockDim::new(16).unwrap(),
                model_kind: kind,
                ..Preset::A.params()
            }
            .with_default_dt()
        };
        let full = run_row(&at(ModelKind::Full), QubitRow::EG, &opts).unwrap();
        let eff = run_row(&at(ModelKind::Effective), QubitRow::EG, &opts).unwrap();
        let d = wrap(full.phase(QubitRow::EG).unwrap() - eff.phase(QubitRow::EG).unwrap()).abs();
        diffs.push(d);
        p_r.push(full.max_r_population);
    }
    let decreasing = diffs.windows(2).all(|w| w[1] < w[0]);
    let r_decreasing = p_r.windows(2).all(|w| w[1] < w[0]);
    verdict(
        decreasing && r_decreasing && p_r[0] <= 5e-2,
        format!(
            "|phi_eg(full) - phi_eg(effective)| at Delta = 10, 20, 40: {:.2e}, {:.2e}, {:.2e}; max |r> population {:.3e}, {:.3e}, {:.3e}",
            diffs[0], diffs[1], diffs[2], p_r[0], p_r[1], p_r[2]
        ),
    )
}

fn small_circle_regime() -> Verdict {
    let p = Preset::B.params();
    let r = run_gate(&p).unwrap();
    let two_r_sq = (2.0 * p.loop_radius()).powi(2);
    let min_row_purity = r.cavity_purity.iter().copied().fold(1.0, f64::min);
    let purity = r.witness.min_cavity_purity.min(min_row_purity);
    verdict(
        (1e-3..=1e-2).contains(&r.max_excitation) && purity >= 0.98,
        format!(
            "max excitation {:.4e} (loop bound (2R)^2 = {two_r_sq:.4e}), min cavity purity {purity:.4} (superposition input; basis rows {min_row_purity:.4})",
            r.max_excitation
        ),
    )
}

fn decoherence_budget() -> Verdict {
    let start = Instant::now();
    let p = SystemParams { model_kind: ModelKind::EffectiveLindblad, n_max: FockDim::new(4).unwrap(), ..Preset::B.params() };
    let est = decoherence_error_estimate(&p);
    // The same budget with the excitation probability rounded to 1e-3.
    let rounded = p.t_total * p.gamma_cav * 1e-3;
    let r = apply_correction(&run_gate(&p).unwrap());
    let infidelity = 1.0 - r.witness.fidelity;
    let within = |x: f64| infidelity <= 3.0 * x && infidelity >= x / 3.0;
    let secs = start.elapsed().as_secs_f64();
    verdict(
        (1e-2..1e-1).contains(&est.error) && (rounded - 1.2e-2).abs() <= 0.05 * 1.2e-2 && within(est.error) && within(rounded) && secs < 300.0,
        format!(
            "t/T = {:.4e} (p_exc {:.4e}, T {:.4e}), with p_exc rounded to 1e-3: {rounded:.4e}; witness 1 - F = {infidelity:.4e} ({:.2}x, {:.2}x); {secs:.1} s",
            est.error,
            est.p_exc,
            est.t_eff,
            infidelity / est.error,
            infidelity / rounded
        ),
    )
}

fn geometric_consistency() -> Verdict {
    let p = Preset::A.params();
    let p = SystemParams { dt: p.dt / 8.0, ..p };
    let opts = GateOptions::default();
    let radius = p.loop_radius();
    let area = PI * radius * radius;
    let (phi, phi2) = model::conditional_phase(&p, p.t_total);
    let eg = run_row(&p, QubitRow::EG, &opts).unwrap().phase(QubitRow::EG).unwrap();
    let ee = run_row(&p, QubitRow::EE, &opts).unwrap().phase(QubitRow::EE).unwrap();
    let samples = gate::sample_trajectory(&p, QubitRow::EG, &opts).unwrap();
    let path = DisplacementPath::new(samples.iter().map(|s| s.alpha).collect()).unwrap().with_closure_tol(1e-6);
    let theta = path_phase(&path).unwrap().theta;
    let errs = [(eg + 2.0 * area).abs(), (eg - phi).abs(), wrap(ee + 2.0 * 4.0 * area).abs(), wrap(ee - phi2).abs(), (theta - eg).abs()];
    let worst = errs.iter().copied().fold(0.0, f64::max);
    verdict(
        worst <= 1e-4,
        format!(
            "phi_eg {eg:.7} vs -2 area {:.7} and closed form {phi:.7}; phi_ee vs -8 area {:.1e}; geometric phase of the propagated loop {theta:.7}; worst {worst:.1e}",
            -2.0 * area,
            errs[2]
        ),
    )
}

fn numerical_hygiene() -> Verdict {
    let p = Preset::B.params();
    let mut ratios = Vec::new();
    let mut drift: f64 = 0.0;
    for row in [QubitRow::EG, QubitRow::EE] {
        let space = JointSpace::sector(row.pair(), p.n_max);
        let h = transformed_hamiltonian(&p, &space);
        let psi0 = JointState::Pure(space.basis_vector(row.pair(), 0).unwrap());
        for t in [p.loop_period(), p.t_total] {
            let run = |dt: f64| propagate_unitary_with(&h, &psi0, t, dt, &no_check(), |_, _| {}).unwrap();
            let reference = run(p.dt / 16.0).final_state;
            let coarse = run(p.dt);
            let fine = run(p.dt / 2.0);
            drift = drift.max(coarse.norm_drift).max(fine.norm_drift);
            ratios.push(coarse.final_state.distance(&reference) / fine.final_state.distance(&reference));
        }
    }
    let lp = SystemParams { model_kind: ModelKind::EffectiveLindblad, n_max: FockDim::new(4).unwrap(), ..p.clone() };
    let q = JointSpace::qubit(lp.n_max);
    let w =
        QubitRow::ALL.iter().fold(ndarray::Array1::zeros(q.dim()), |acc, r| acc + q.basis_vector(r.pair(), 0).unwrap() * C64::from(0.5));
    let rho0 = JointState::Density(JointState::Pure(w).to_density());
    let diss = Dissipation { gamma_cav: lp.gamma_cav, gamma_r: 0.0 };
    let lind =
        propagate_lindblad_with(&effective_hamiltonian(&lp, &q), &rho0, &diss, 5.0 * lp.loop_period(), lp.dt, &no_check(), |_, _| {})
            .unwrap();
    drift = drift.max(lind.norm_drift);
    let ok_ratio = ratios.iter().all(|r| (3.5..=4.5).contains(r));
    verdict(
        ok_ratio && drift <= 1e-8,
        format!(
            "step-halving error ratios (eg, ee over one loop and the full gate) {}; max norm/trace drift {drift:.1e}",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("displacement algebra", displacement_algebra),
        ("area law", area_law),
        ("preset A gate", preset_a_gate),
        ("frame consistency", frame_consistency),
        ("full-model validation", full_model_validation),
        ("small-circle regime", small_circle_regime),
        ("decoherence budget", decoherence_budget),
        ("geometric consistency", geometric_consistency),
        ("numerical hygiene", numerical_hygiene),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        failed += usize::from(!v.pass);
        println!(
            "criterion {} {} {name}: {} [{:.1} s]",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
