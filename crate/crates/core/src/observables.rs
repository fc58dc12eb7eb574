//! Physical outputs read off a steady-state density matrix.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::atomic_model::{EXCITED_FP3, EXCITED_FP4, GROUND_COUNT, GROUND_F3, GROUND_F4, LEVEL_COUNT};
use crate::coupling::CouplingMatrix;
use crate::solver::DensityMatrix;

/// Σ_n ρ_nn over the 16 excited sublevels.
pub fn excited_population(rho: &DensityMatrix) -> f64 {
    (GROUND_COUNT..LEVEL_COUNT).map(|n| rho.population(n)).sum()
}

/// The same sum from the steady-state identity ρ_nn = −Σ_l Im(Ω_nl ρ_ln)/Γ.
/// Only equal to [`excited_population`] at steady state.
pub fn excited_population_via_coupling(rho: &DensityMatrix, coupling: &CouplingMatrix, gamma: f64) -> f64 {
    let mut total = 0.0;
    for n in GROUND_COUNT..LEVEL_COUNT {
        let flux: f64 = (0..GROUND_COUNT)
            .map(|l| (coupling.get(l, n).conj() * rho.get(l, n)).im)
            .sum();
        total -= flux / gamma;
    }
    total
}

/// S(x, w) = w / (x² + w²).
pub fn lorentz_symmetric(x: f64, w: f64) -> f64 {
    w / (x * x + w * w)
}

/// A(x, w) = x / (x² + w²).
pub fn lorentz_antisymmetric(x: f64, w: f64) -> f64 {
    x / (x * x + w * w)
}

/// Transmittance and its split into one-photon and ground-coherence parts.
///
/// `absorbed = (α/Γ) Σ_{l,n} Im(Ω_ln ρ_nl)`, which is α times the total
/// excited population at steady state. `one_photon` is Σ F₁ and
/// `cpt_term` is Σ F₂, both evaluated with the exact optical Lorentzians
/// S(δ_n − δ_l, γ_ln) of each leg; `residual` collects what those two
/// neglect (coherences within a hyperfine level, excited-state coherences
/// and the dispersive parts), so that
/// `transmittance = 1 − one_photon + cpt_term − residual` holds exactly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionBudget {
    pub alpha: f64,
    pub absorbed: f64,
    pub one_photon: f64,
    pub cpt_term: f64,
    pub residual: f64,
    pub transmittance: f64,
}

/// Direct sum (α/Γ) Σ_{l,n} Im(Ω_ln ρ_nl), without any decomposition.
pub fn absorbed_fraction(rho: &DensityMatrix, coupling: &CouplingMatrix, gamma: f64, alpha: f64) -> f64 {
    let mut sum = 0.0;
    for l in 0..GROUND_COUNT {
        for n in GROUND_COUNT..LEVEL_COUNT {
            sum += (coupling.get(l, n) * rho.get(n, l)).im;
        }
    }
    alpha * sum / gamma
}

pub fn transmittance(
    rho: &DensityMatrix,
    coupling: &CouplingMatrix,
    detunings: &[f64; LEVEL_COUNT],
    decay: &[f64; LEVEL_COUNT],
    alpha: f64,
) -> AbsorptionBudget {
    let gamma = decay[GROUND_COUNT..].iter().fold(0.0f64, |a, &b| a.max(b));
    let absorbed = absorbed_fraction(rho, coupling, gamma, alpha);
    let width = |l: usize, n: usize| 0.5 * (decay[l] + decay[n]);
    let prefactor = alpha / (2.0 * gamma);

    let mut one_photon = 0.0;
    for l in 0..GROUND_COUNT {
        for n in GROUND_COUNT..LEVEL_COUNT {
            let w = coupling.get(l, n).norm_sqr();
            if w != 0.0 {
                let s = lorentz_symmetric(detunings[n] - detunings[l], width(l, n));
                one_photon += prefactor * s * w * (rho.population(l) - rho.population(n));
            }
        }
    }

    // Each (g, e) pair enters through both the g row and the e row of the
    // optical coherences with Z = Ω_en Ω_ng ρ_ge.
    let mut cpt_term = 0.0;
    for g in GROUND_F3 {
        for e in GROUND_F4 {
            let rho_ge = rho.get(g, e);
            for n in EXCITED_FP3.chain(EXCITED_FP4) {
                let z = coupling.get(e, n) * coupling.get(g, n).conj() * rho_ge;
                if z == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let (xg, xe) = (detunings[n] - detunings[g], detunings[n] - detunings[e]);
                let (wg, we) = (width(g, n), width(e, n));
                let s = lorentz_symmetric(xg, wg) + lorentz_symmetric(xe, we);
                let a = lorentz_antisymmetric(xe, we) - lorentz_antisymmetric(xg, wg);
                cpt_term -= prefactor * (s * z.re + a * z.im);
            }
        }
    }
    let residual = absorbed - one_photon + cpt_term;
    AbsorptionBudget {
        alpha,
        absorbed,
        one_photon,
        cpt_term,
        residual,
        transmittance: 1.0 - absorbed,
    }
}

/// Median of the outer 10% of the samples (5% at each end, at least one
/// sample per end).
pub fn spectrum_baseline(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let edge = ((values.len() as f64 * 0.05).round() as usize).max(1).min(values.len());
    let mut outer: Vec<f64> = values[..edge].iter().chain(&values[values.len() - edge..]).copied().collect();
    outer.sort_by(f64::total_cmp);
    let k = outer.len();
    Some(if k % 2 == 1 {
        outer[k / 2]
    } else {
        0.5 * (outer[k / 2 - 1] + outer[k / 2])
    })
}

/// |value at the peak − baseline|. `None` when no peak was identified.
pub fn cpt_amplitude(values: &[f64], peak: Option<usize>) -> Option<f64> {
    let index = peak?;
    let baseline = spectrum_baseline(values)?;
    values.get(index).map(|v| (v - baseline).abs())
}
