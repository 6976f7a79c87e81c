//! Invariant checks behind `geomgate verify`.

use std::f64::consts::PI;

use geomgate::fock::{displacement, FockDim};
use geomgate::gate::{apply_correction, run_gate, run_row, GateOptions, GateReport, Preset};
use geomgate::geompath::{compose_displacements, path_phase, DisplacementPath};
use geomgate::{ComplexAmplitude, ModeOperator, ModelKind, QubitRow, SystemParams, C64};

pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

fn displacement_algebra() -> anyhow::Result<Check> {
    let dim = FockDim::new(24)?;
    let levels = dim.trusted_levels();
    let mut worst: f64 = 0.0;
    for (a, b) in [(C64::new(0.3, 0.0), C64::new(0.0, 0.3)), (C64::new(-0.2, 0.1), C64::new(0.15, 0.25))] {
        let lhs = &displacement(a.into(), dim) * &displacement(b.into(), dim);
        let rhs = displacement((a + b).into(), dim).scale(C64::from_polar(1.0, (a * b.conj()).im));
        worst = worst.max(lhs.block_max_diff(&rhs, levels));
    }
    let tri = DisplacementPath::polygon(&[ComplexAmplitude::ZERO, ComplexAmplitude::new(0.3, 0.0), ComplexAmplitude::new(0.0, 0.3)])?;
    let (product, theta) = compose_displacements(&tri, dim)?;
    worst = worst.max(product.block_max_diff(&ModeOperator::identity(dim).scale(C64::from_polar(1.0, theta)), levels));
    Ok(Check { name: "displacement algebra", pass: worst <= 1e-8, detail: format!("max deviation {worst:.1e}") })
}

fn area_law() -> anyhow::Result<Check> {
    let r = path_phase(&DisplacementPath::circle(ComplexAmplitude::new(0.2, -0.1), 0.7, 10_000, true)?)?;
    let rel = (r.theta - 2.0 * r.signed_area).abs() / r.theta.abs();
    let circle = (r.theta - 2.0 * PI * 0.49).abs();
    Ok(Check {
        name: "area law",
        pass: rel <= 1e-12 && circle <= 1e-3,
        detail: format!("Theta vs 2 area {rel:.1e}, vs 2 pi r^2 {circle:.1e}"),
    })
}

fn correction_algebra(template: &GateReport) -> Check {
    let mut worst: f64 = 0.0;
    for x in [-2.9, -PI / 2.0, 0.3, 1.7] {
        let mut r = template.clone();
        r.corrected = false;
        r.phases = [0.0, x, x, wrap(4.0 * x)];
        for k in 0..4 {
            r.amplitudes[k] = C64::from_polar(1.0, r.phases[k]);
            r.corrected_diagonal[k] = r.amplitudes[k];
        }
        let c = apply_correction(&r);
        let want = [C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::from_polar(1.0, 2.0 * x)];
        for (z, w) in c.corrected_diagonal.iter().zip(want) {
            worst = worst.max((z - w).norm());
        }
    }
    Check { name: "correction algebra", pass: worst <= 1e-12, detail: format!("max deviation {worst:.1e}") }
}

fn preset_invariants(preset: Preset) -> anyhow::Result<(GateReport, Vec<Check>)> {
    let p = preset.params();
    let r = run_gate(&p)?;
    let (ge, eg, ee) = (r.phases[QubitRow::GE.index()], r.phases[QubitRow::EG.index()], r.phases[QubitRow::EE.index()]);
    let mut checks = vec![Check {
        name: "exchange symmetry",
        pass: (ge - eg).abs() <= 1e-12,
        detail: format!("preset {}: |phi_ge - phi_eg| = {:.1e}", preset.name(), (ge - eg).abs()),
    }];
    if preset == Preset::A {
        let d = wrap(ee - 4.0 * eg).abs();
        checks.push(Check { name: "area law phi_ee = 4 phi_eg", pass: d <= 1e-6, detail: format!("preset A: {d:.1e} rad") });
    } else {
        let two_r = (2.0 * p.loop_radius()).powi(2);
        let purity = r.witness.min_cavity_purity.min(r.cavity_purity.iter().copied().fold(1.0, f64::min));
        checks.push(Check {
            name: "small-circle disentanglement",
            pass: purity >= 1.0 - 4.0 * two_r && r.max_excitation <= two_r + 1e-4,
            detail: format!(
                "purity {purity:.5} >= {:.5}, max excitation {:.3e} <= {:.3e}",
                1.0 - 4.0 * two_r,
                r.max_excitation,
                two_r + 1e-4
            ),
        });
    }
    Ok((r, checks))
}

fn full_vs_effective() -> anyhow::Result<Check> {
    let opts = GateOptions::default();
    let mut gaps = Vec::new();
    let mut p_r = Vec::new();
    for delta_large in [10.0, 20.0, 40.0] {
        let at = |kind| {
            SystemParams {
                delta_large,
                delta_small: 1.0 / delta_large,
                t_total: PI * delta_large,
                n_max: FockDim::new(16).expect("n_max >= 1"),
                model_kind: kind,
                ..Preset::A.params()
            }
            .with_default_dt()
        };
        let full = run_row(&at(ModelKind::Full), QubitRow::EG, &opts)?;
        let eff = run_row(&at(ModelKind::Effective), QubitRow::EG, &opts)?;
        gaps.push(wrap(full.phase(QubitRow::EG)? - eff.phase(QubitRow::EG)?).abs());
        p_r.push(full.max_r_population);
    }
    let pass = gaps.windows(2).all(|w| w[1] < w[0]) && p_r.windows(2).all(|w| w[1] < w[0]) && p_r[0] <= 5e-2;
    Ok(Check {
        name: "full vs effective",
        pass,
        detail: format!("gaps {:.2e} {:.2e} {:.2e}, max p_r {:.2e} {:.2e} {:.2e}", gaps[0], gaps[1], gaps[2], p_r[0], p_r[1], p_r[2]),
    })
}

fn or_fail(name: &'static str, r: anyhow::Result<Check>) -> Check {
    r.unwrap_or_else(|e| Check { name, pass: false, detail: format!("error: {e}") })
}

/// Runs the invariant suites. `quick` skips the full-model comparison.
pub fn run_checks(quick: bool) -> Vec<Check> {
    let mut out = vec![or_fail("displacement algebra", displacement_algebra()), or_fail("area law", area_law())];
    let mut template = None;
    for preset in [Preset::A, Preset::B] {
        match preset_invariants(preset) {
            Ok((r, checks)) => {
                template.get_or_insert(r);
                out.extend(checks);
            }
            Err(e) => out.push(Check { name: "preset invariants", pass: false, detail: format!("preset {}: {e}", preset.name()) }),
        }
    }
    if let Some(t) = template {
        out.push(correction_algebra(&t));
    }
    if !quick {
        out.push(or_fail("full vs effective", full_vs_effective()));
    }
    out
}
