//! Closed-form CPT lineshape of one (g, e) ground pair.
//!
//! Eliminating the optical coherences adiabatically (excited populations and
//! excited–excited coherences dropped, γ_f = Γ/2) turns the ρ_ge equation
//! into ρ_ge = C / (Δ_width + i(δ_g − δ_e − Δ_LS)): a symmetric plus an
//! antisymmetric Lorentzian in the Raman detuning. Everything here is
//! derived from the same element equation the full solver uses, so the two
//! can be compared directly; coherences within a hyperfine level are
//! neglected in this module only.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::atomic_model::{
    excited_slot, AtomicConstants, ExcitedLevel, ZeemanEnergies, GROUND_COUNT, GROUND_F3, GROUND_F4,
    LEVEL_COUNT,
};
use crate::coupling::{rabi_spherical, CouplingMatrix};
use crate::error::ModelError;
use crate::observables::{lorentz_antisymmetric, lorentz_symmetric};

/// A Λ pair: g in F=3, e in F=4, driven through the excited level `tuned`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSystem {
    /// Ground slot in F=3 (0..7).
    pub g: usize,
    /// Ground slot in F=4 (7..16).
    pub e: usize,
    pub tuned: ExcitedLevel,
    /// Optical decoherence γ_f = Γ/2.
    pub gamma_f: f64,
}

impl LambdaSystem {
    /// Fails unless g ∈ F=3, e ∈ F=4 and some sublevel of `tuned` couples
    /// to both.
    pub fn new(coupling: &CouplingMatrix, g: usize, e: usize, tuned: ExcitedLevel, gamma: f64) -> Result<Self, ModelError> {
        if !GROUND_F3.contains(&g) {
            return Err(ModelError::WrongManifold { index: g + 1, expected: "ground F=3" });
        }
        if !GROUND_F4.contains(&e) {
            return Err(ModelError::WrongManifold { index: e + 1, expected: "ground F=4" });
        }
        let connected = tuned
            .slots()
            .any(|u| coupling.get(g, u).norm() > 0.0 && coupling.get(e, u).norm() > 0.0);
        if !connected {
            return Err(ModelError::InvalidParameter(format!(
                "sublevels {} and {} share no excited sublevel of {tuned}",
                g + 1,
                e + 1
            )));
        }
        Ok(Self { g, e, tuned, gamma_f: 0.5 * gamma })
    }
}

/// Width, light shift and complex amplitude of the ρ_ge resonance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineshapeParams {
    /// Δ_width (rad/s): half width at half maximum of |ρ_ge|².
    pub width: f64,
    /// Δ_LS (rad/s): resonance at δ_g − δ_e = Δ_LS.
    pub light_shift: f64,
    pub amplitude: Complex64,
}

fn excited() -> impl Iterator<Item = usize> {
    GROUND_COUNT..LEVEL_COUNT
}

/// Δ_width = (Γ_g+Γ_e)/2 + ¼ Σ_u [|Ω_gu|² S(δ_u−δ_e, γ_f) + |Ω_ue|² S(δ_u−δ_g, γ_f)].
pub fn width(system: &LambdaSystem, coupling: &CouplingMatrix, detunings: &[f64; LEVEL_COUNT], ground_decay: f64) -> f64 {
    let (g, e, gf) = (system.g, system.e, system.gamma_f);
    let broadening: f64 = excited()
        .map(|u| {
            coupling.get(g, u).norm_sqr() * lorentz_symmetric(detunings[u] - detunings[e], gf)
                + coupling.get(e, u).norm_sqr() * lorentz_symmetric(detunings[u] - detunings[g], gf)
        })
        .sum();
    ground_decay + 0.25 * broadening
}

/// Δ_LS = ¼ Σ_u [|Ω_gu|² A(δ_u−δ_e, γ_f) − |Ω_ue|² A(δ_u−δ_g, γ_f)]: the
/// differential shift of the two ground sublevels, which vanishes for
/// balanced couplings at any optical detuning.
pub fn light_shift(system: &LambdaSystem, coupling: &CouplingMatrix, detunings: &[f64; LEVEL_COUNT]) -> f64 {
    let (g, e, gf) = (system.g, system.e, system.gamma_f);
    let sum: f64 = excited()
        .map(|u| {
            coupling.get(g, u).norm_sqr() * lorentz_antisymmetric(detunings[u] - detunings[e], gf)
                - coupling.get(e, u).norm_sqr() * lorentz_antisymmetric(detunings[u] - detunings[g], gf)
        })
        .sum();
    0.25 * sum
}

/// Σ_{u ∈ level} Ω_gu Ω*_eu.
pub fn coupling_product(coupling: &CouplingMatrix, g: usize, e: usize, level: ExcitedLevel) -> Complex64 {
    level.slots().map(|u| coupling.get(g, u) * coupling.get(e, u).conj()).sum()
}

/// C summed over every excited sublevel with its own optical detunings:
/// C = −¼ Σ_u Ω_gu Ω*_eu [ρ_ee/(γ_f + i(δ_u−δ_e)) + ρ_gg/(γ_f − i(δ_u−δ_g))].
pub fn amplitude_c_exact(
    system: &LambdaSystem,
    coupling: &CouplingMatrix,
    detunings: &[f64; LEVEL_COUNT],
    rho_gg: f64,
    rho_ee: f64,
) -> Complex64 {
    let (g, e, gf) = (system.g, system.e, system.gamma_f);
    let sum: Complex64 = excited()
        .map(|u| {
            let k = coupling.get(g, u) * coupling.get(e, u).conj();
            let to_e = Complex64::new(gf, detunings[u] - detunings[e]).inv() * rho_ee;
            let to_g = Complex64::new(gf, -(detunings[u] - detunings[g])).inv() * rho_gg;
            k * (to_e + to_g)
        })
        .sum();
    -0.25 * sum
}

/// C with the Zeeman shifts neglected against the optical detunings: one
/// term per excited hyperfine level, with x_F' the detuning of that level
/// from the light at zero field,
/// C = −Σ_F' γ_f/(4(γ_f²+x²)) [(ρ_gg+ρ_ee) + i(ρ_gg−ρ_ee) x/γ_f] Σ_{u∈F'} Ω_gu Ω*_eu.
pub fn amplitude_c(
    system: &LambdaSystem,
    coupling: &CouplingMatrix,
    constants: &AtomicConstants,
    common: f64,
    rho_gg: f64,
    rho_ee: f64,
) -> Complex64 {
    let gf = system.gamma_f;
    [ExcitedLevel::Fp3, ExcitedLevel::Fp4]
        .into_iter()
        .map(|level| {
            let x = level_detuning(constants, level, common);
            let weight = gf / (4.0 * (gf * gf + x * x));
            let bracket = Complex64::new(rho_gg + rho_ee, (rho_gg - rho_ee) * x / gf);
            -weight * bracket * coupling_product(coupling, system.g, system.e, level)
        })
        .sum()
}

/// Rotating-frame detuning of an excited hyperfine level at zero field.
pub fn level_detuning(constants: &AtomicConstants, level: ExcitedLevel, common: f64) -> f64 {
    let half = 0.5 * constants.excited_hfs;
    match level {
        ExcitedLevel::Fp3 => -half - common,
        ExcitedLevel::Fp4 => half - common,
    }
}

/// Width, light shift and exact C evaluated at the given detunings.
pub fn lineshape_params(
    system: &LambdaSystem,
    coupling: &CouplingMatrix,
    detunings: &[f64; LEVEL_COUNT],
    ground_decay: f64,
    rho_gg: f64,
    rho_ee: f64,
) -> LineshapeParams {
    LineshapeParams {
        width: width(system, coupling, detunings, ground_decay),
        light_shift: light_shift(system, coupling, detunings),
        amplitude: amplitude_c_exact(system, coupling, detunings, rho_gg, rho_ee),
    }
}

/// ρ_ge = C / (Δ_width + i y) at y = δ_g − δ_e − Δ_LS.
pub fn coherence(params: &LineshapeParams, y: f64) -> Complex64 {
    params.amplitude / Complex64::new(params.width, y)
}

/// One sample of the closed-form spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticPoint {
    /// Raman detuning (rad/s).
    pub raman: f64,
    /// Re ρ_ge = Re C · S(y, Δ_width) + Im C · A(y, Δ_width).
    pub re_rho_ge: f64,
    /// Coherence part of the transmittance per unit α, F₂.
    pub f2: f64,
}

/// F₂ of the pair for a given ρ_ge, per unit α, with the exact optical
/// Lorentzian of each leg (see [`crate::observables::transmittance`]).
pub fn f2_for_coherence(
    system: &LambdaSystem,
    coupling: &CouplingMatrix,
    detunings: &[f64; LEVEL_COUNT],
    gamma: f64,
    rho_ge: Complex64,
) -> f64 {
    let (g, e, gf) = (system.g, system.e, system.gamma_f);
    let mut total = 0.0;
    for n in excited() {
        let z = coupling.get(e, n) * coupling.get(g, n).conj() * rho_ge;
        let (xg, xe) = (detunings[n] - detunings[g], detunings[n] - detunings[e]);
        let s = lorentz_symmetric(xg, gf) + lorentz_symmetric(xe, gf);
        let a = lorentz_antisymmetric(xe, gf) - lorentz_antisymmetric(xg, gf);
        total -= (s * z.re + a * z.im) / (2.0 * gamma);
    }
    total
}

/// Closed-form spectrum over `raman` (rad/s). The parameters are held fixed
/// across the scan; `detunings_at` gives the detuning vector for a Raman
/// detuning and is used for the optical Lorentzians of F₂.
pub fn analytic_spectrum(
    system: &LambdaSystem,
    params: &LineshapeParams,
    coupling: &CouplingMatrix,
    energies: &ZeemanEnergies,
    gamma: f64,
    raman: &[f64],
    detunings_at: impl Fn(f64) -> [f64; LEVEL_COUNT],
) -> Vec<AnalyticPoint> {
    let offset = energies.shift[system.e] - energies.shift[system.g];
    raman
        .iter()
        .map(|&r| {
            let y = r - offset - params.light_shift;
            let rho_ge = coherence(params, y);
            let det = detunings_at(r);
            AnalyticPoint {
                raman: r,
                re_rho_ge: rho_ge.re,
                f2: f2_for_coherence(system, coupling, &det, gamma, rho_ge),
            }
        })
        .collect()
}

/// |Σ_{u∈level} Ω_gu Ω*_eu|²: the squared coupling sum that sets the
/// strength of a double-Λ resonance; zero means the two Λ paths cancel.
pub fn suppression_check(g: usize, e: usize, coupling: &CouplingMatrix, level: ExcitedLevel) -> f64 {
    coupling_product(coupling, g, e, level).norm_sqr()
}

/// The four σ± legs of the (m, m) double-Λ through F'=3: s = |3, m⟩,
/// s' = |4, m⟩, t = |3', m+1⟩, t' = |3', m−1⟩. Field 1 drives s, field 2
/// drives s'.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoubleLambdaLegs {
    pub plus_1_s_t: f64,
    pub plus_2_sp_t: f64,
    pub minus_1_s_tp: f64,
    pub minus_2_sp_tp: f64,
}

impl DoubleLambdaLegs {
    /// Legs for Cs D1 with field amplitudes `e1`, `e2` (V/m).
    pub fn cesium(constants: &AtomicConstants, m: i32, e1: f64, e2: f64) -> Result<Self, ModelError> {
        if m.abs() > 3 {
            return Err(ModelError::InvalidQuantumNumbers(format!("(m, m) resonances need |m| ≤ 3, got {m}")));
        }
        let s = (m + 3) as usize;
        let s_ = (m + 4) as usize + GROUND_F4.start;
        let leg = |e: f64, q: i32, from: usize, m_to: i32| {
            excited_slot(3, m_to).map_or(0.0, |to| rabi_spherical(constants, e, q, from, to))
        };
        Ok(Self {
            plus_1_s_t: leg(e1, 1, s, m + 1),
            plus_2_sp_t: leg(e2, 1, s_, m + 1),
            minus_1_s_tp: leg(e1, -1, s, m - 1),
            minus_2_sp_tp: leg(e2, -1, s_, m - 1),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DarkStateClass {
    /// A dark state common to both Λ paths exists.
    CommonDark,
    /// The dark state of one Λ path is the bright state of the other.
    MutuallyBright,
    Neither,
    /// A leg in a denominator vanishes while both σ paths are present.
    Inapplicable,
}

/// Classifies the (m, m) double-Λ at field angle θ by comparing e^{2iθ}
/// with the common-dark ratio Ω⁺_{2s't}Ω⁻_{1st'} / (Ω⁺_{1st}Ω⁻_{2s't'}) and
/// the mutually-bright ratio −Ω⁺_{1st}Ω⁻_{1st'} / (Ω⁺_{2s't}Ω⁻_{2s't'}).
pub fn dark_state_condition(theta: f64, legs: &DoubleLambdaLegs, tol: f64) -> DarkStateClass {
    let plus_path = legs.plus_1_s_t != 0.0 && legs.plus_2_sp_t != 0.0;
    let minus_path = legs.minus_1_s_tp != 0.0 && legs.minus_2_sp_tp != 0.0;
    if !(plus_path && minus_path) {
        // At most one Λ: no double-Λ interference to classify.
        if plus_path || minus_path {
            return DarkStateClass::Neither;
        }
        return DarkStateClass::Inapplicable;
    }
    let phase = Complex64::from_polar(1.0, 2.0 * theta);
    let common = legs.plus_2_sp_t * legs.minus_1_s_tp / (legs.plus_1_s_t * legs.minus_2_sp_tp);
    let bright = -legs.plus_1_s_t * legs.minus_1_s_tp / (legs.plus_2_sp_t * legs.minus_2_sp_tp);
    if (phase - common).norm() <= tol {
        DarkStateClass::CommonDark
    } else if (phase - bright).norm() <= tol {
        DarkStateClass::MutuallyBright
    } else {
        DarkStateClass::Neither
    }
}

/// Whether the (m, m) resonance should be missing: the two Λ paths must
/// oppose each other and their coupling sum must cancel. `relative_sum` is
/// the suppression value divided by a reference nonzero one.
pub fn resonance_prohibited(class: DarkStateClass, relative_sum: f64) -> bool {
    class == DarkStateClass::MutuallyBright && relative_sum < 1e-9
}

/// θ values the two conventional linear schemes use.
pub const THETA_PARALLEL: f64 = 0.0;
pub const THETA_PERPENDICULAR: f64 = FRAC_PI_2;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{build_bichromatic_coupling, FieldAmplitudes, PolarizationScheme};
    use crate::units::field_amplitude;

    fn cs() -> AtomicConstants {
        AtomicConstants::cesium_d1()
    }

    fn lin_parallel(intensity: f64) -> CouplingMatrix {
        build_bichromatic_coupling(
            &cs(),
            PolarizationScheme::lin_parallel(),
            FieldAmplitudes::from_total_intensity(intensity).unwrap(),
        )
    }

    #[test]
    fn m_zero_ratios() {
        let c = cs();
        let e = field_amplitude(1.0);
        let legs = DoubleLambdaLegs::cesium(&c, 0, e, e).unwrap();
        let common = legs.plus_2_sp_t * legs.minus_1_s_tp / (legs.plus_1_s_t * legs.minus_2_sp_tp);
        assert!((common + 1.0).abs() < 1e-12);
        assert_eq!(dark_state_condition(THETA_PERPENDICULAR, &legs, 1e-9), DarkStateClass::CommonDark);
        assert_eq!(dark_state_condition(THETA_PARALLEL, &legs, 1e-9), DarkStateClass::MutuallyBright);
    }

    #[test]
    fn nonzero_m_still_mutually_bright_at_equal_fields() {
        let c = cs();
        let e = field_amplitude(1.0);
        for m in [-2, -1, 1, 2] {
            let legs = DoubleLambdaLegs::cesium(&c, m, e, e).unwrap();
            assert_eq!(dark_state_condition(THETA_PARALLEL, &legs, 1e-9), DarkStateClass::MutuallyBright, "m={m}");
        }
    }

    #[test]
    fn single_lambda_is_neither() {
        let legs = DoubleLambdaLegs { plus_1_s_t: 1.0, plus_2_sp_t: 2.0, minus_1_s_tp: 0.0, minus_2_sp_tp: 0.0 };
        assert_eq!(dark_state_condition(0.0, &legs, 1e-9), DarkStateClass::Neither);
        let legs = DoubleLambdaLegs { plus_1_s_t: 1.0, plus_2_sp_t: 0.0, minus_1_s_tp: 0.0, minus_2_sp_tp: 3.0 };
        assert_eq!(dark_state_condition(0.0, &legs, 1e-9), DarkStateClass::Inapplicable);
    }

    #[test]
    fn suppression_symmetric_in_m_and_zero_at_m0() {
        let k = lin_parallel(1.0);
        let value = |m: i32| suppression_check((m + 3) as usize, (m + 4) as usize + 7, &k, ExcitedLevel::Fp3);
        let top = value(3);
        assert!(value(0) <= 1e-12 * top);
        for m in 1..=3 {
            assert!((value(m) - value(-m)).abs() <= 1e-12 * top);
        }
    }

    #[test]
    fn zero_intensity_width_is_ground_decay() {
        let k = CouplingMatrix::zero();
        let sys = LambdaSystem { g: 2, e: 10, tuned: ExcitedLevel::Fp3, gamma_f: 1e9 };
        let det = [0.0; LEVEL_COUNT];
        assert_eq!(width(&sys, &k, &det, 672.0), 672.0);
        assert_eq!(light_shift(&sys, &k, &det), 0.0);
    }

    #[test]
    fn equal_populations_give_real_c() {
        let k = lin_parallel(1.0);
        let c = cs();
        let sys = LambdaSystem::new(&k, 2, 10, ExcitedLevel::Fp3, 2.0 * 1.6e9).unwrap();
        let amp = amplitude_c(&sys, &k, &c, ExcitedLevel::Fp3.tuning(&c), 0.06, 0.06);
        assert!(amp.im.abs() <= 1e-12 * amp.re.abs());
    }

    #[test]
    fn lambda_system_requires_shared_excited_level() {
        let k = build_bichromatic_coupling(
            &cs(),
            PolarizationScheme::SigmaMinusPair,
            FieldAmplitudes::from_total_intensity(1.0).unwrap(),
        );
        // |3,−3⟩ has no σ⁻ partner in F'=3.
        assert!(LambdaSystem::new(&k, 0, 8, ExcitedLevel::Fp3, 1e9).is_err());
        assert!(LambdaSystem::new(&k, 3, 11, ExcitedLevel::Fp3, 1e9).is_ok());
        assert!(LambdaSystem::new(&k, 8, 11, ExcitedLevel::Fp3, 1e9).is_err());
    }
}
