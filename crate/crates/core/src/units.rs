//! Physical constants (CODATA 2018) and unit helpers.

use std::f64::consts::TAU;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

/// 1 μW/mm² in W/m².
pub const UW_PER_MM2: f64 = 1.0;

/// Hz → rad/s.
pub fn hz(f: f64) -> f64 {
    TAU * f
}

/// kHz → rad/s.
pub fn khz(f: f64) -> f64 {
    TAU * f * 1e3
}

/// GHz → rad/s.
pub fn ghz(f: f64) -> f64 {
    TAU * f * 1e9
}

/// rad/s → Hz.
pub fn to_hz(omega: f64) -> f64 {
    omega / TAU
}

/// μT → T.
pub fn microtesla(b: f64) -> f64 {
    b * 1e-6
}

/// Peak field amplitude of a plane wave of intensity `intensity` (W/m²),
/// with I = ½ c ε₀ E².
pub fn field_amplitude(intensity: f64) -> f64 {
    (2.0 * intensity / (SPEED_OF_LIGHT * VACUUM_PERMITTIVITY)).sqrt()
}
