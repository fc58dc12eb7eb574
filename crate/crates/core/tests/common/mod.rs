#![allow(dead_code)]

use std::f64::consts::TAU;

use cpt_core::atomic_model::{detuning_vector, zeeman_energies, AtomicConstants, ExcitedLevel, LEVEL_COUNT};
use cpt_core::coupling::{build_bichromatic_coupling, CouplingMatrix, FieldAmplitudes, PolarizationScheme};
use cpt_core::relaxation::{BranchingTable, Cell, M1Model, RelaxationConfig};
use cpt_core::solver::LiouvillianParts;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One fully specified 32-level problem.
#[derive(Clone, Debug)]
pub struct CsCase {
    pub scheme: PolarizationScheme,
    pub tuned: ExcitedLevel,
    pub field: f64,
    pub intensity: f64,
    pub raman: f64,
    pub common_offset: f64,
    pub relaxation: RelaxationConfig,
}

impl CsCase {
    pub fn coupling(&self) -> CouplingMatrix {
        let c = AtomicConstants::cesium_d1();
        let f = FieldAmplitudes::from_intensities(self.intensity, self.intensity).unwrap();
        build_bichromatic_coupling(&c, self.scheme, f)
    }

    pub fn detunings(&self) -> [f64; LEVEL_COUNT] {
        let c = AtomicConstants::cesium_d1();
        let z = zeeman_energies(&c, self.field).unwrap();
        detuning_vector(&z, &c, self.raman, self.tuned.tuning(&c) + self.common_offset)
    }

    pub fn parts(&self) -> LiouvillianParts {
        let c = AtomicConstants::cesium_d1();
        let branching = BranchingTable::new(&c, self.relaxation.m1).unwrap();
        LiouvillianParts::cesium(&self.detunings(), &self.coupling(), &self.relaxation, &branching)
    }
}

pub fn random_scheme(rng: &mut ChaCha8Rng) -> PolarizationScheme {
    match rng.random_range(0..4) {
        0 => PolarizationScheme::SigmaMinusPair,
        1 => PolarizationScheme::SigmaPlusPair,
        2 => PolarizationScheme::lin_parallel(),
        _ => PolarizationScheme::lin_lin(rng.random_range(0.0..std::f64::consts::PI)),
    }
}

pub fn random_case(rng: &mut ChaCha8Rng, scheme: PolarizationScheme) -> CsCase {
    let cell = [Cell::Cell1, Cell::Cell2, Cell::Cell3][rng.random_range(0..3)];
    let m1 = if rng.random_bool(0.5) {
        M1Model::Balanced
    } else {
        M1Model::RowNormalized { within_manifold: rng.random_bool(0.5) }
    };
    CsCase {
        scheme,
        tuned: if rng.random_bool(0.5) { ExcitedLevel::Fp3 } else { ExcitedLevel::Fp4 },
        field: rng.random_range(0.0..300e-6),
        intensity: rng.random_range(0.1..20.0),
        raman: TAU * rng.random_range(-50e3..50e3),
        common_offset: TAU * rng.random_range(-300e6..300e6),
        relaxation: cell.relaxation(rng.random_range(0.0..=1.0)).unwrap().with_m1(m1),
    }
}
