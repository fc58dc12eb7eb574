//! Bichromatic Rabi couplings between the 16 ground and 16 excited
//! sublevels under the rotating-wave approximation.
//!
//! The ω₁ field drives only the 6S1/2 F=3 rows and ω₂ only the F=4 rows.
//! Rabi frequencies are angular frequencies, Ω_st = −(E/ħ)·d_FF'·CG.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::atomic_model::{
    clebsch_gordan, decompose_slot, AtomicConstants, ExcitedLevel, Manifold, SublevelIndex,
    EXCITED_COUNT, GROUND_COUNT, GROUND_F3, LEVEL_COUNT,
};
use crate::error::ModelError;
use crate::units::{field_amplitude, HBAR};

/// Polarization of the two frequency components.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolarizationScheme {
    SigmaPlusPair,
    SigmaMinusPair,
    /// Both legs linear; ω₁ along x, ω₂ at angle `theta` in [0, π).
    LinLin { theta: f64 },
}

impl PolarizationScheme {
    pub fn lin_lin(theta: f64) -> Self {
        let mut t = theta.rem_euclid(PI);
        if t >= PI {
            t = 0.0;
        }
        PolarizationScheme::LinLin { theta: t }
    }

    pub fn lin_parallel() -> Self {
        Self::lin_lin(0.0)
    }

    pub fn lin_perpendicular() -> Self {
        Self::lin_lin(PI / 2.0)
    }

    pub fn theta(&self) -> Option<f64> {
        match self {
            PolarizationScheme::LinLin { theta } => Some(*theta),
            _ => None,
        }
    }
}

impl fmt::Display for PolarizationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolarizationScheme::SigmaPlusPair => write!(f, "σ+σ+"),
            PolarizationScheme::SigmaMinusPair => write!(f, "σ-σ-"),
            PolarizationScheme::LinLin { theta } if *theta == 0.0 => write!(f, "Lin||Lin"),
            PolarizationScheme::LinLin { theta } if (*theta - PI / 2.0).abs() < 1e-12 => {
                write!(f, "Lin⊥Lin")
            }
            PolarizationScheme::LinLin { theta } => write!(f, "Lin-Lin(θ={theta})"),
        }
    }
}

/// Field amplitudes (V/m) of the ω₁ and ω₂ components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldAmplitudes {
    pub e1: f64,
    pub e2: f64,
}

impl FieldAmplitudes {
    pub fn new(e1: f64, e2: f64) -> Result<Self, ModelError> {
        if !(e1 >= 0.0 && e2 >= 0.0 && e1.is_finite() && e2.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "field amplitudes must be finite and non-negative, got {e1}, {e2}"
            )));
        }
        Ok(Self { e1, e2 })
    }

    /// Each leg from its own intensity (W/m²).
    pub fn from_intensities(i1: f64, i2: f64) -> Result<Self, ModelError> {
        if !(i1 >= 0.0 && i2 >= 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "intensities must be non-negative, got {i1}, {i2}"
            )));
        }
        Self::new(field_amplitude(i1), field_amplitude(i2))
    }

    /// Total intensity (W/m²) split as E₁ = E₂ = E/√2.
    pub fn from_total_intensity(total: f64) -> Result<Self, ModelError> {
        if !(total >= 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "intensity must be non-negative, got {total}"
            )));
        }
        let e = field_amplitude(total) * FRAC_1_SQRT_2;
        Self::new(e, e)
    }
}

fn check_pair(s: SublevelIndex, t: SublevelIndex) -> Result<(), ModelError> {
    if !s.is_ground() {
        return Err(ModelError::WrongManifold {
            index: s.get(),
            expected: "ground",
        });
    }
    if t.is_ground() {
        return Err(ModelError::WrongManifold {
            index: t.get(),
            expected: "excited",
        });
    }
    Ok(())
}

/// Single-polarization Rabi frequency for spherical component `q`.
pub(crate) fn rabi_spherical(constants: &AtomicConstants, e: f64, q: i32, s: usize, t: usize) -> f64 {
    let g = decompose_slot(s);
    let x = decompose_slot(t);
    debug_assert!(g.manifold == Manifold::Ground && x.manifold == Manifold::Excited);
    let cg = clebsch_gordan(x.f, x.m, g.f, g.m, q);
    if cg == 0.0 {
        return 0.0;
    }
    -(e / HBAR) * constants.dipole(g.f, x.f) * cg
}

/// Ω^{σ+}_st for field amplitude `e` (V/m).
pub fn rabi_sigma_plus(
    constants: &AtomicConstants,
    e: f64,
    s: SublevelIndex,
    t: SublevelIndex,
) -> Result<Complex64, ModelError> {
    check_pair(s, t)?;
    Ok(Complex64::new(rabi_spherical(constants, e, 1, s.slot(), t.slot()), 0.0))
}

/// Ω^{σ−}_st for field amplitude `e` (V/m).
pub fn rabi_sigma_minus(
    constants: &AtomicConstants,
    e: f64,
    s: SublevelIndex,
    t: SublevelIndex,
) -> Result<Complex64, ModelError> {
    check_pair(s, t)?;
    Ok(Complex64::new(rabi_spherical(constants, e, -1, s.slot(), t.slot()), 0.0))
}

fn linear_from_parts(theta: f64, plus: f64, minus: f64) -> Complex64 {
    -Complex64::from_polar(FRAC_1_SQRT_2, -theta) * plus + Complex64::from_polar(FRAC_1_SQRT_2, theta) * minus
}

/// Ω^{lin}_st for polarization angle `theta` from the x axis.
pub fn rabi_linear(
    constants: &AtomicConstants,
    e: f64,
    theta: f64,
    s: SublevelIndex,
    t: SublevelIndex,
) -> Result<Complex64, ModelError> {
    check_pair(s, t)?;
    let plus = rabi_spherical(constants, e, 1, s.slot(), t.slot());
    let minus = rabi_spherical(constants, e, -1, s.slot(), t.slot());
    Ok(linear_from_parts(theta, plus, minus))
}

/// Ground × excited block of the coupling, Ω_st.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrix {
    // [ground slot][excited slot - 16]
    omega: [[Complex64; EXCITED_COUNT]; GROUND_COUNT],
}

impl CouplingMatrix {
    pub fn zero() -> Self {
        Self {
            omega: [[Complex64::new(0.0, 0.0); EXCITED_COUNT]; GROUND_COUNT],
        }
    }

    /// Ω_st for ground slot `s` (0..16) and excited slot `t` (16..32).
    pub fn get(&self, s: usize, t: usize) -> Complex64 {
        self.omega[s][t - GROUND_COUNT]
    }

    pub fn set(&mut self, s: usize, t: usize, value: Complex64) {
        self.omega[s][t - GROUND_COUNT] = value;
    }

    /// Entry (l, u) of the full Hermitian 32×32 coupling, with
    /// Ω_ts = conj(Ω_st) and zero within each manifold.
    pub fn full(&self, l: usize, u: usize) -> Complex64 {
        match (l < GROUND_COUNT, u < GROUND_COUNT) {
            (true, false) => self.get(l, u),
            (false, true) => self.get(u, l).conj(),
            _ => Complex64::new(0.0, 0.0),
        }
    }

    /// Row-major 32×32 Hermitian coupling.
    pub fn to_full(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); LEVEL_COUNT * LEVEL_COUNT];
        for l in 0..LEVEL_COUNT {
            for u in 0..LEVEL_COUNT {
                out[l * LEVEL_COUNT + u] = self.full(l, u);
            }
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for row in out.omega.iter_mut() {
            for v in row.iter_mut() {
                *v *= factor;
            }
        }
        out
    }

    /// Copy with every coupling to `level` removed.
    pub fn without_level(&self, level: ExcitedLevel) -> Self {
        let mut out = self.clone();
        for s in 0..GROUND_COUNT {
            for t in level.slots() {
                out.set(s, t, Complex64::new(0.0, 0.0));
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.omega
            .iter()
            .flat_map(|row| row.iter())
            .fold(0.0, |acc, v| acc.max(v.norm()))
    }

    pub fn is_zero(&self) -> bool {
        self.max_abs() == 0.0
    }
}

/// Assembles Ω_st for both legs of the bichromatic field.
pub fn build_bichromatic_coupling(
    constants: &AtomicConstants,
    scheme: PolarizationScheme,
    fields: FieldAmplitudes,
) -> CouplingMatrix {
    let mut out = CouplingMatrix::zero();
    for s in 0..GROUND_COUNT {
        let first_leg = GROUND_F3.contains(&s);
        let e = if first_leg { fields.e1 } else { fields.e2 };
        for t in GROUND_COUNT..LEVEL_COUNT {
            let value = match scheme {
                PolarizationScheme::SigmaPlusPair => {
                    Complex64::new(rabi_spherical(constants, e, 1, s, t), 0.0)
                }
                PolarizationScheme::SigmaMinusPair => {
                    Complex64::new(rabi_spherical(constants, e, -1, s, t), 0.0)
                }
                PolarizationScheme::LinLin { theta } => {
                    let angle = if first_leg { 0.0 } else { theta };
                    linear_from_parts(
                        angle,
                        rabi_spherical(constants, e, 1, s, t),
                        rabi_spherical(constants, e, -1, s, t),
                    )
                }
            };
            out.set(s, t, value);
        }
    }
    out
}

/// Ground sublevels with no coupling to any sublevel of `tuned`.
pub fn dark_ground_states(coupling: &CouplingMatrix, tuned: ExcitedLevel) -> BTreeSet<SublevelIndex> {
    (0..GROUND_COUNT)
        .filter(|&s| tuned.slots().all(|t| coupling.get(s, t).norm() == 0.0))
        .map(SublevelIndex::from_slot)
        .collect()
}
