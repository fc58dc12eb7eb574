use std::collections::HashMap;
use std::f64::consts::TAU;
use std::path::Path;

use super::Manifold;
use crate::error::ModelError;

const BUNDLED: &str = include_str!("../../data/cs_d1.constants");

/// Atomic data for the Cs D1 line. Frequencies are stored as angular
/// frequencies (rad/s).
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicConstants {
    pub nuclear_spin: f64,
    /// 6S1/2 hyperfine splitting Δ_hfs.
    pub ground_hfs: f64,
    /// 6P1/2 hyperfine splitting Δ'_hfs.
    pub excited_hfs: f64,
    pub ground_gj: f64,
    pub excited_gj: f64,
    pub nuclear_gi: f64,
    /// μ_B/ħ in rad/s per tesla.
    pub bohr_magneton: f64,
    pub d1_frequency: f64,
    /// <J=1/2||er||J'=1/2> in C·m.
    pub reduced_dipole: f64,
    /// `<F'||er||F>` in units of `reduced_dipole`, indexed `[F-3][F'-3]`.
    pub dipole_factors: [[f64; 2]; 2],
}

impl AtomicConstants {
    /// Constants shipped with the crate.
    pub fn cesium_d1() -> Self {
        Self::parse(BUNDLED).expect("bundled constants file is valid")
    }

    pub fn bundled_source() -> &'static str {
        BUNDLED
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let mut values = HashMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ModelError::ConstantsParse {
                line: n + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let value: f64 = value.trim().parse().map_err(|_| ModelError::ConstantsParse {
                line: n + 1,
                message: format!("`{}` is not a number", value.trim()),
            })?;
            if values.insert(key.trim().to_string(), value).is_some() {
                return Err(ModelError::ConstantsParse {
                    line: n + 1,
                    message: format!("duplicate key `{}`", key.trim()),
                });
            }
        }
        let get = |key: &str| {
            values
                .get(key)
                .copied()
                .ok_or_else(|| ModelError::MissingConstant(key.to_string()))
        };
        let version = get("format_version")?;
        if version != 1.0 {
            return Err(ModelError::ConstantsParse {
                line: 0,
                message: format!("unsupported format_version {version}"),
            });
        }
        Ok(Self {
            nuclear_spin: get("nuclear_spin")?,
            ground_hfs: TAU * get("ground_hfs_hz")?,
            excited_hfs: TAU * get("excited_hfs_hz")?,
            ground_gj: get("ground_gj")?,
            excited_gj: get("excited_gj")?,
            nuclear_gi: get("nuclear_gi")?,
            bohr_magneton: TAU * get("bohr_magneton_hz_per_t")?,
            d1_frequency: TAU * get("d1_frequency_hz")?,
            reduced_dipole: get("d1_reduced_dipole_cm")?,
            dipole_factors: [
                [get("d_f3_fp3")?, get("d_f3_fp4")?],
                [get("d_f4_fp3")?, get("d_f4_fp4")?],
            ],
        })
    }

    /// d_FF' in C·m for ground F and excited F'.
    pub fn dipole(&self, f: i32, f_prime: i32) -> f64 {
        self.reduced_dipole * self.dipole_factor(f, f_prime)
    }

    /// d_FF' in units of the J reduced matrix element.
    pub fn dipole_factor(&self, f: i32, f_prime: i32) -> f64 {
        assert!(
            (3..=4).contains(&f) && (3..=4).contains(&f_prime),
            "no D1 dipole factor for F={f}, F'={f_prime}"
        );
        self.dipole_factors[(f - 3) as usize][(f_prime - 3) as usize]
    }

    /// Zero-field energy of hyperfine level F of a manifold, measured from
    /// that manifold's centroid (the Breit–Rabi zero).
    pub fn hyperfine_energy(&self, manifold: Manifold, f: i32) -> f64 {
        let hfs = match manifold {
            Manifold::Ground => self.ground_hfs,
            Manifold::Excited => self.excited_hfs,
        };
        let offset = -hfs / (2.0 * (2.0 * self.nuclear_spin + 1.0));
        if f as f64 > self.nuclear_spin {
            offset + 0.5 * hfs
        } else {
            offset - 0.5 * hfs
        }
    }

    /// ω_g^0 (6S1/2 F=3).
    pub fn omega_g0(&self) -> f64 {
        self.hyperfine_energy(Manifold::Ground, 3)
    }

    /// ω_e^0 (6S1/2 F=4).
    pub fn omega_e0(&self) -> f64 {
        self.hyperfine_energy(Manifold::Ground, 4)
    }

    /// ω_i0: midpoint of the 6P1/2 F'=3 and F'=4 energies.
    pub fn omega_i0(&self) -> f64 {
        0.5 * (self.hyperfine_energy(Manifold::Excited, 3) + self.hyperfine_energy(Manifold::Excited, 4))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_file_parses() {
        let c = AtomicConstants::cesium_d1();
        assert_eq!(c.nuclear_spin, 3.5);
        assert!((c.ground_hfs / TAU - 9_192_631_770.0).abs() < 1e-3);
        assert!((c.excited_hfs / TAU - 1.1676804e9).abs() < 1.0);
    }

    #[test]
    fn excited_midpoint_sits_half_a_splitting_from_each_level() {
        let c = AtomicConstants::cesium_d1();
        let lo = c.hyperfine_energy(Manifold::Excited, 3);
        let hi = c.hyperfine_energy(Manifold::Excited, 4);
        assert!((c.omega_i0() - lo - 0.5 * c.excited_hfs).abs() < 1e-3);
        assert!((hi - c.omega_i0() - 0.5 * c.excited_hfs).abs() < 1e-3);
    }

    #[test]
    fn dipole_factors_sum_to_unit_line_strength() {
        // Σ_F d_FF'^2 = 1 for each excited F' (J = J' = 1/2).
        let c = AtomicConstants::cesium_d1();
        for fp in 3..=4 {
            let total: f64 = (3..=4).map(|f| c.dipole_factor(f, fp).powi(2)).sum();
            assert!((total - 1.0).abs() < 1e-14, "F'={fp}: {total}");
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = AtomicConstants::parse("format_version = 1\nnuclear_spin = abc\n").unwrap_err();
        match err {
            ModelError::ConstantsParse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let err = AtomicConstants::parse("format_version = 1\n").unwrap_err();
        assert!(matches!(err, ModelError::MissingConstant(_)));
        let err = AtomicConstants::parse("x = 1\nx = 2\n").unwrap_err();
        assert!(matches!(err, ModelError::ConstantsParse { line: 2, .. }));
    }
}
