//! Closed-form lineshape against the 32-level steady state.

use std::f64::consts::TAU;

use cpt_core::atomic_model::{raman_resonance_hz, ExcitedLevel};
use cpt_core::coupling::PolarizationScheme;
use cpt_core::lineshape::{amplitude_c, amplitude_c_exact, lineshape_params, LambdaSystem, LineshapeParams};
use cpt_core::relaxation::Cell;
use cpt_core::scan::{run_scan_with, ObservableKind, ScanConfig, ScanModel};
use cpt_core::Complex64;

/// |3,−1⟩ and |4,+1⟩.
const G: usize = 2;
const E: usize = 12;
const FIELD: f64 = 285e-6;

fn model(offset_hz: f64, intensity: f64) -> ScanModel {
    let relax = Cell::Cell2.relaxation(0.6).unwrap();
    let mut cfg = ScanConfig::new(relax, FIELD, PolarizationScheme::lin_parallel(), ExcitedLevel::Fp3, intensity, 0.0, 1.0);
    cfg.common_offset = TAU * offset_hz;
    cfg.observable = ObservableKind::Transmittance { alpha: 1.0 };
    ScanModel::new(&cfg).unwrap()
}

/// Analytic parameters with populations taken from the full solution at
/// the unshifted resonance, and the full ρ_ge there.
fn analytic(model: &ScanModel) -> (LineshapeParams, f64, Complex64) {
    let relax = model.config.relaxation;
    let center = TAU * raman_resonance_hz(&model.energies, -1, 1).unwrap();
    let rho = model.solve_at(center).unwrap();
    let sys = LambdaSystem::new(&model.coupling, G, E, ExcitedLevel::Fp3, relax.gamma).unwrap();
    let det = model.detunings(center);
    let p = lineshape_params(&sys, &model.coupling, &det, relax.gamma_p, rho.population(G), rho.population(E));
    let shifted = center + p.light_shift;
    (p, shifted, model.solve_at(shifted).unwrap().get(G, E))
}

#[test]
fn center_and_width_match_the_full_solution() {
    for intensity in [0.2, 0.5] {
        let probe = model(0.0, intensity);
        let (p, center, _) = analytic(&probe);
        let half = 12.0 * p.width;
        let cfg = probe.config.with_range(center - half, center + half, 241);
        let scan = run_scan_with(&ScanModel::new(&cfg).unwrap()).unwrap();
        let peak = scan.peak(-1, 1).expect("(−1,1) peak");
        assert!(peak.isolated);
        let center_err = (TAU * peak.center_hz - center).abs();
        assert!(center_err <= p.width / 10.0, "I={intensity}: center off by {center_err} rad/s, Δ_width {}", p.width);
        let fwhm = TAU * peak.fwhm_hz.unwrap();
        let rel = (fwhm - 2.0 * p.width).abs() / (2.0 * p.width);
        assert!(rel <= 0.15, "I={intensity}: FWHM {fwhm} vs 2Δ_width {}", 2.0 * p.width);
    }
}

#[test]
fn dispersive_part_flips_with_common_detuning() {
    let offset = 200e6;
    let (plus, _, rho_plus) = analytic(&model(offset, 0.5));
    let (minus, _, rho_minus) = analytic(&model(-offset, 0.5));
    // On resonance ρ_ge = C/Δ_width, so the full coherence carries the
    // numeric C directly.
    let num_plus = rho_plus * plus.width;
    let num_minus = rho_minus * minus.width;
    let ratio = |c: Complex64| c.im / c.re;
    assert!(plus.amplitude.re * minus.amplitude.re > 0.0);
    assert!(ratio(plus.amplitude) * ratio(minus.amplitude) < 0.0, "{:?} {:?}", plus.amplitude, minus.amplitude);
    assert!(ratio(num_plus) * ratio(num_minus) < 0.0, "{num_plus:?} {num_minus:?}");
    assert_eq!(ratio(num_plus).signum(), ratio(plus.amplitude).signum());
    assert!((num_plus.re - plus.amplitude.re).abs() <= 0.05 * plus.amplitude.re.abs());
}

#[test]
fn grouped_amplitude_matches_sublevel_sum_at_low_field() {
    let relax = Cell::Cell2.relaxation(0.6).unwrap();
    let cfg = ScanConfig::new(relax, 1e-6, PolarizationScheme::lin_parallel(), ExcitedLevel::Fp3, 1.0, 0.0, 1.0);
    let m = ScanModel::new(&cfg).unwrap();
    let sys = LambdaSystem::new(&m.coupling, G, E, ExcitedLevel::Fp3, relax.gamma).unwrap();
    let det = m.detunings(0.0);
    let exact = amplitude_c_exact(&sys, &m.coupling, &det, 0.07, 0.05);
    let grouped = amplitude_c(&sys, &m.coupling, &m.constants, m.common_detuning(), 0.07, 0.05);
    assert!((exact - grouped).norm() <= 1e-4 * exact.norm(), "{exact} vs {grouped}");
}
