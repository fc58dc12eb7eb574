//! Level structure of the Cs D1 line: the 32 hyperfine Zeeman sublevels,
//! their Breit–Rabi energies in a static field and the rotating-frame
//! detunings seen by a bichromatic field.
//!
//! Sublevels are numbered 1..=32: 6S1/2 F=3 (1–7), 6S1/2 F=4 (8–16),
//! 6P1/2 F'=3 (17–23), 6P1/2 F'=4 (24–32), each block ordered by ascending
//! m_F. Array storage everywhere else in the crate uses the zero-based
//! *slot* `index - 1`.

pub mod angular;
mod constants;

use std::f64::consts::TAU;
use std::fmt;

pub use angular::clebsch_gordan;
pub use constants::AtomicConstants;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

pub const LEVEL_COUNT: usize = 32;
pub const GROUND_COUNT: usize = 16;
pub const EXCITED_COUNT: usize = 16;

/// Slots of the 6S1/2 F=3 sublevels.
pub const GROUND_F3: std::ops::Range<usize> = 0..7;
/// Slots of the 6S1/2 F=4 sublevels.
pub const GROUND_F4: std::ops::Range<usize> = 7..16;
pub const EXCITED_FP3: std::ops::Range<usize> = 16..23;
pub const EXCITED_FP4: std::ops::Range<usize> = 23..32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Manifold {
    /// 6S1/2
    Ground,
    /// 6P1/2
    Excited,
}

/// One of the two 6P1/2 hyperfine levels, used to say where the light is
/// tuned.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub enum ExcitedLevel {
    Fp3,
    Fp4,
}

impl ExcitedLevel {
    pub fn f(self) -> i32 {
        match self {
            ExcitedLevel::Fp3 => 3,
            ExcitedLevel::Fp4 => 4,
        }
    }

    pub fn from_f(f: i32) -> Result<Self, ModelError> {
        match f {
            3 => Ok(ExcitedLevel::Fp3),
            4 => Ok(ExcitedLevel::Fp4),
            _ => Err(ModelError::InvalidQuantumNumbers(format!(
                "6P1/2 has F'=3 or F'=4, got {f}"
            ))),
        }
    }

    pub fn slots(self) -> std::ops::Range<usize> {
        match self {
            ExcitedLevel::Fp3 => EXCITED_FP3,
            ExcitedLevel::Fp4 => EXCITED_FP4,
        }
    }

    pub fn other(self) -> Self {
        match self {
            ExcitedLevel::Fp3 => ExcitedLevel::Fp4,
            ExcitedLevel::Fp4 => ExcitedLevel::Fp3,
        }
    }

    /// Common detuning that puts both fields on this level at zero field.
    pub fn tuning(self, constants: &AtomicConstants) -> f64 {
        match self {
            ExcitedLevel::Fp3 => -0.5 * constants.excited_hfs,
            ExcitedLevel::Fp4 => 0.5 * constants.excited_hfs,
        }
    }
}

impl TryFrom<i32> for ExcitedLevel {
    type Error = ModelError;

    fn try_from(f: i32) -> Result<Self, ModelError> {
        Self::from_f(f)
    }
}

impl From<ExcitedLevel> for i32 {
    fn from(level: ExcitedLevel) -> i32 {
        level.f()
    }
}

impl fmt::Display for ExcitedLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F'={}", self.f())
    }
}

/// Quantum numbers of a sublevel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Sublevel {
    pub manifold: Manifold,
    pub f: i32,
    pub m: i32,
}

impl fmt::Display for Sublevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.manifold {
            Manifold::Ground => "6S1/2",
            Manifold::Excited => "6P1/2",
        };
        write!(f, "{name} F={} m={}", self.f, self.m)
    }
}

/// 1-based sublevel label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SublevelIndex(u8);

impl SublevelIndex {
    pub fn new(index: usize) -> Result<Self, ModelError> {
        if (1..=LEVEL_COUNT).contains(&index) {
            Ok(Self(index as u8))
        } else {
            Err(ModelError::IndexOutOfRange(index))
        }
    }

    /// Panics if `slot >= 32`.
    pub fn from_slot(slot: usize) -> Self {
        assert!(slot < LEVEL_COUNT, "slot {slot} out of range");
        Self(slot as u8 + 1)
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }

    pub fn slot(self) -> usize {
        self.0 as usize - 1
    }

    pub fn is_ground(self) -> bool {
        self.slot() < GROUND_COUNT
    }

    pub fn decompose(self) -> Sublevel {
        decompose_slot(self.slot())
    }

    pub fn all() -> impl Iterator<Item = SublevelIndex> {
        (0..LEVEL_COUNT).map(Self::from_slot)
    }
}

impl fmt::Display for SublevelIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}>", self.0)
    }
}

fn block_start(manifold: Manifold, f: i32) -> Option<usize> {
    match (manifold, f) {
        (Manifold::Ground, 3) => Some(GROUND_F3.start),
        (Manifold::Ground, 4) => Some(GROUND_F4.start),
        (Manifold::Excited, 3) => Some(EXCITED_FP3.start),
        (Manifold::Excited, 4) => Some(EXCITED_FP4.start),
        _ => None,
    }
}

/// Label of `(manifold, F, m_F)`.
pub fn index_of(manifold: Manifold, f: i32, m: i32) -> Result<SublevelIndex, ModelError> {
    let start = block_start(manifold, f).ok_or_else(|| {
        ModelError::InvalidQuantumNumbers(format!("no F={f} hyperfine level in {manifold:?}"))
    })?;
    if m.abs() > f {
        return Err(ModelError::InvalidQuantumNumbers(format!(
            "m_F={m} outside -{f}..={f}"
        )));
    }
    Ok(SublevelIndex::from_slot(start + (m + f) as usize))
}

/// Quantum numbers stored at a zero-based slot.
pub fn decompose_slot(slot: usize) -> Sublevel {
    let (manifold, f, start) = match slot {
        s if GROUND_F3.contains(&s) => (Manifold::Ground, 3, GROUND_F3.start),
        s if GROUND_F4.contains(&s) => (Manifold::Ground, 4, GROUND_F4.start),
        s if EXCITED_FP3.contains(&s) => (Manifold::Excited, 3, EXCITED_FP3.start),
        s if EXCITED_FP4.contains(&s) => (Manifold::Excited, 4, EXCITED_FP4.start),
        _ => panic!("slot {slot} out of range"),
    };
    Sublevel {
        manifold,
        f,
        m: (slot - start) as i32 - f,
    }
}

/// Slot of a ground sublevel by (F, m).
pub(crate) fn ground_slot(f: i32, m: i32) -> Option<usize> {
    index_of(Manifold::Ground, f, m).ok().map(SublevelIndex::slot)
}

/// Slot of an excited sublevel by (F', m').
pub(crate) fn excited_slot(f: i32, m: i32) -> Option<usize> {
    index_of(Manifold::Excited, f, m).ok().map(SublevelIndex::slot)
}

/// Sublevel energies in a static field along the quantization axis.
///
/// Energies are angular frequencies measured from the centroid of the
/// sublevel's fine-structure level; the shift from the zero-field hyperfine
/// energy is kept separately because the detunings only need the shift and
/// it is computed without cancellation.
#[derive(Clone, Debug, PartialEq)]
pub struct ZeemanEnergies {
    pub field: f64,
    pub shift: [f64; LEVEL_COUNT],
    pub zero_field: [f64; LEVEL_COUNT],
}

impl ZeemanEnergies {
    /// ω_l^B.
    pub fn omega(&self, slot: usize) -> f64 {
        self.zero_field[slot] + self.shift[slot]
    }
}

/// Breit–Rabi shift of `(F, m)` within a J=1/2 manifold, relative to the
/// zero-field hyperfine energy.
///
/// `hfs` is the hyperfine splitting and `larmor_j`, `larmor_i` are
/// `g_J μ_B B` and `g_I μ_B B`, all as angular frequencies.
fn breit_rabi_shift(spin: f64, f: i32, m: i32, hfs: f64, larmor_j: f64, larmor_i: f64) -> f64 {
    let upper = f as f64 > spin;
    let mf = m as f64;
    let x = (larmor_j - larmor_i) / hfs;
    // sqrt(1 + u) - 1 written as u / (sqrt(1 + u) + 1) to keep the tiny shift
    // free of cancellation against the hyperfine splitting.
    let root_minus_one = if upper && (mf + spin + 0.5).abs() < 1e-9 {
        // m = -(I + 1/2): the root is (1 - x), continued through x = 1.
        -x
    } else {
        let u = 4.0 * mf * x / (2.0 * spin + 1.0) + x * x;
        u / ((1.0 + u).sqrt() + 1.0)
    };
    let sign = if upper { 1.0 } else { -1.0 };
    larmor_i * mf + sign * 0.5 * hfs * root_minus_one
}

/// ω_l^B for all 32 sublevels at field `field` (tesla).
pub fn zeeman_energies(constants: &AtomicConstants, field: f64) -> Result<ZeemanEnergies, ModelError> {
    if !(field >= 0.0 && field.is_finite()) {
        return Err(ModelError::InvalidParameter(format!(
            "magnetic field must be finite and non-negative, got {field} T"
        )));
    }
    let spin = constants.nuclear_spin;
    let mu_b = constants.bohr_magneton * field;
    let mut shift = [0.0; LEVEL_COUNT];
    let mut zero_field = [0.0; LEVEL_COUNT];
    for slot in 0..LEVEL_COUNT {
        let level = decompose_slot(slot);
        let (hfs, gj) = match level.manifold {
            Manifold::Ground => (constants.ground_hfs, constants.ground_gj),
            Manifold::Excited => (constants.excited_hfs, constants.excited_gj),
        };
        shift[slot] = breit_rabi_shift(spin, level.f, level.m, hfs, gj * mu_b, constants.nuclear_gi * mu_b);
        zero_field[slot] = constants.hyperfine_energy(level.manifold, level.f);
    }
    Ok(ZeemanEnergies {
        field,
        shift,
        zero_field,
    })
}

/// Rotating-frame detunings δ_l for Raman detuning `raman` and common
/// detuning `common` (both angular frequencies).
pub fn detuning_vector(
    energies: &ZeemanEnergies,
    constants: &AtomicConstants,
    raman: f64,
    common: f64,
) -> [f64; LEVEL_COUNT] {
    let mut delta = [0.0; LEVEL_COUNT];
    let half_excited = 0.5 * constants.excited_hfs;
    for slot in GROUND_F3 {
        delta[slot] = energies.shift[slot] + 0.5 * raman;
    }
    for slot in GROUND_F4 {
        delta[slot] = energies.shift[slot] - 0.5 * raman;
    }
    for slot in EXCITED_FP3 {
        delta[slot] = energies.shift[slot] - half_excited - common;
    }
    for slot in EXCITED_FP4 {
        delta[slot] = energies.shift[slot] + half_excited - common;
    }
    delta
}

/// Raman detuning (Hz) at which the `(m_g, m_e)` two-photon resonance
/// between 6S1/2 |F=3, m_g> and |F=4, m_e> occurs, ignoring light shifts.
pub fn raman_resonance_hz(energies: &ZeemanEnergies, m_g: i32, m_e: i32) -> Option<f64> {
    let g = ground_slot(3, m_g)?;
    let e = ground_slot(4, m_e)?;
    Some((energies.shift[e] - energies.shift[g]) / TAU)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cs() -> AtomicConstants {
        AtomicConstants::cesium_d1()
    }

    #[test]
    fn index_examples() {
        assert_eq!(index_of(Manifold::Ground, 3, -3).unwrap().get(), 1);
        assert_eq!(index_of(Manifold::Ground, 4, -4).unwrap().get(), 8);
        assert_eq!(index_of(Manifold::Excited, 4, 4).unwrap().get(), 32);
        assert_eq!(index_of(Manifold::Excited, 3, -3).unwrap().get(), 17);
    }

    #[test]
    fn index_rejects_invalid_quantum_numbers() {
        assert!(index_of(Manifold::Ground, 5, 0).is_err());
        assert!(index_of(Manifold::Ground, 3, 4).is_err());
        assert!(index_of(Manifold::Excited, 4, -5).is_err());
        assert!(SublevelIndex::new(0).is_err());
        assert!(SublevelIndex::new(33).is_err());
    }

    #[test]
    fn index_round_trip() {
        for idx in SublevelIndex::all() {
            let s = idx.decompose();
            assert_eq!(index_of(s.manifold, s.f, s.m).unwrap(), idx);
        }
    }

    #[test]
    fn zero_field_degeneracy() {
        let c = cs();
        let z = zeeman_energies(&c, 0.0).unwrap();
        for slot in GROUND_F3 {
            assert_eq!(z.shift[slot], 0.0);
            assert_eq!(z.omega(slot), c.omega_g0());
        }
        for slot in GROUND_F4 {
            assert_eq!(z.omega(slot), c.omega_e0());
        }
        assert!((c.omega_e0() - c.omega_g0() - c.ground_hfs).abs() < 1e-3);
    }

    #[test]
    fn negative_field_rejected() {
        assert!(zeeman_energies(&cs(), -1e-6).is_err());
    }

    #[test]
    fn detunings_at_zero_field() {
        let c = cs();
        let z = zeeman_energies(&c, 0.0).unwrap();
        let d = detuning_vector(&z, &c, 0.0, 0.0);
        for slot in 0..GROUND_COUNT {
            assert_eq!(d[slot], 0.0);
        }
        for slot in EXCITED_FP3 {
            assert_eq!(d[slot], -0.5 * c.excited_hfs);
        }
        for slot in EXCITED_FP4 {
            assert_eq!(d[slot], 0.5 * c.excited_hfs);
        }
        let tuned = detuning_vector(&z, &c, 0.0, ExcitedLevel::Fp3.tuning(&c));
        for slot in EXCITED_FP3 {
            assert_eq!(tuned[slot], 0.0);
        }
        let tuned = detuning_vector(&z, &c, 0.0, ExcitedLevel::Fp4.tuning(&c));
        for slot in EXCITED_FP4 {
            assert_eq!(tuned[slot], 0.0);
        }
    }

    #[test]
    fn detunings_are_affine_with_half_slopes() {
        let c = cs();
        let z = zeeman_energies(&c, 139e-6).unwrap();
        let base = detuning_vector(&z, &c, 0.0, 0.0);
        let dr = 2.0e4;
        let dopt = 3.0e7;
        let moved = detuning_vector(&z, &c, dr, dopt);
        for slot in 0..LEVEL_COUNT {
            let expect = if GROUND_F3.contains(&slot) {
                0.5 * dr
            } else if GROUND_F4.contains(&slot) {
                -0.5 * dr
            } else {
                -dopt
            };
            assert!((moved[slot] - base[slot] - expect).abs() < 1e-6);
        }
    }

    #[test]
    fn stretched_upper_state_is_linear_in_field() {
        // |F=4, m=-4>: g_I μB m B - (ΔE/2)·x, x = (g_J - g_I) μB B / ΔE.
        let c = cs();
        let b = 1e-3;
        let z = zeeman_energies(&c, b).unwrap();
        let mu = c.bohr_magneton * b;
        let expect = c.nuclear_gi * mu * -4.0 - 0.5 * (c.ground_gj - c.nuclear_gi) * mu;
        let slot = ground_slot(4, -4).unwrap();
        assert!((z.shift[slot] - expect).abs() < 1e-6 * expect.abs());
    }

    #[test]
    fn first_order_zeeman_is_odd_in_m() {
        let c = cs();
        // The even (second-order) part scales as x ~ 3e-8 relative to the odd one.
        let z = zeeman_energies(&c, 1e-8).unwrap();
        for m in 1..=3 {
            let p = z.shift[ground_slot(3, m).unwrap()];
            let n = z.shift[ground_slot(3, -m).unwrap()];
            let zero = z.shift[ground_slot(3, 0).unwrap()];
            assert!(((p - zero) + (n - zero)).abs() < 1e-6 * (p - zero).abs());
        }
    }
}
