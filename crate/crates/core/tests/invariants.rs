//! Physical invariants of the model and of computed steady states.

mod common;

use std::f64::consts::TAU;

use common::CsCase;
use cpt_core::atomic_model::{AtomicConstants, ExcitedLevel, GROUND_COUNT, LEVEL_COUNT};
use cpt_core::coupling::PolarizationScheme;
use cpt_core::relaxation::{source_matrix, BranchingTable, Cell, M1Model};
use cpt_core::solver::{assemble, steady_state, LiouvillianParts};
use proptest::prelude::*;

const MODELS: [M1Model; 3] = [
    M1Model::Balanced,
    M1Model::RowNormalized { within_manifold: true },
    M1Model::RowNormalized { within_manifold: false },
];

fn case_strategy() -> impl Strategy<Value = CsCase> {
    (
        0usize..4,
        0.0..std::f64::consts::PI,
        any::<bool>(),
        0.0..300e-6,
        0.0..20.0,
        -50e3..50e3,
        -300e6..300e6,
        0usize..3,
        0.0..=1.0,
        0usize..3,
    )
        .prop_map(|(s, theta, f4, field, intensity, raman, offset, cell, r, m1)| CsCase {
            scheme: match s {
                0 => PolarizationScheme::SigmaMinusPair,
                1 => PolarizationScheme::SigmaPlusPair,
                2 => PolarizationScheme::lin_parallel(),
                _ => PolarizationScheme::lin_lin(theta),
            },
            tuned: if f4 { ExcitedLevel::Fp4 } else { ExcitedLevel::Fp3 },
            field,
            intensity,
            raman: TAU * raman,
            common_offset: TAU * offset,
            relaxation: [Cell::Cell1, Cell::Cell2, Cell::Cell3][cell].relaxation(r).unwrap().with_m1(MODELS[m1]),
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn steady_state_is_a_density_matrix(case in case_strategy()) {
        let m = assemble(&case.parts()).unwrap();
        prop_assert!(m.trace_defect() <= 1e-12);
        let rho = steady_state(&m).unwrap();
        prop_assert!((rho.trace().re - 1.0).abs() <= 1e-10);
        prop_assert!(rho.trace().im.abs() <= 1e-10);
        // Hermiticity is never imposed by the solver.
        prop_assert!(rho.hermiticity_error() <= 1e-12, "{:e}", rho.hermiticity_error());
        prop_assert!(rho.populations().iter().all(|&p| p >= -1e-12));
    }

    #[test]
    fn rescaling_rates_and_detunings_leaves_the_state(case in case_strategy(), k in 0.01f64..100.0) {
        let parts = case.parts();
        let mut scaled = parts.clone();
        scaled.detunings.iter_mut().for_each(|d| *d *= k);
        scaled.decay.iter_mut().for_each(|d| *d *= k);
        scaled.repopulation.iter_mut().for_each(|d| *d *= k);
        scaled.rabi.iter_mut().for_each(|d| *d *= k);
        let a = steady_state(&assemble(&parts).unwrap()).unwrap();
        let b = steady_state(&assemble(&scaled).unwrap()).unwrap();
        prop_assert!(a.max_diff(&b) <= 1e-10, "{:e}", a.max_diff(&b));
    }

    #[test]
    fn source_flux_balances_decay(case in case_strategy(), seed in 0u64..1000) {
        let c = AtomicConstants::cesium_d1();
        let table = BranchingTable::new(&c, case.relaxation.m1).unwrap();
        // Arbitrary non-negative populations summing to one.
        let mut pops: Vec<f64> = (0..LEVEL_COUNT).map(|l| ((seed as f64 + 1.0) * (l as f64 + 0.37)).sin().abs()).collect();
        let total: f64 = pops.iter().sum();
        pops.iter_mut().for_each(|p| *p /= total);
        let influx: f64 = source_matrix(&pops, &case.relaxation, &table).iter().sum();
        let outflux: f64 = (0..LEVEL_COUNT)
            .map(|l| if l < GROUND_COUNT { case.relaxation.gamma_p } else { case.relaxation.gamma } * pops[l])
            .sum();
        prop_assert!((influx - outflux).abs() <= 1e-12 * outflux);
    }
}

#[test]
fn branching_tables_are_normalized() {
    let c = AtomicConstants::cesium_d1();
    for model in MODELS {
        let t = BranchingTable::new(&c, model).unwrap();
        for n in 0..16 {
            let t2: f64 = t.optical_t2[n].iter().sum();
            let w: f64 = t.branching[n].iter().sum();
            assert!((t2 - 1.0).abs() <= 1e-12, "Σ T² row {n}: {t2}");
            assert!((w - 1.0).abs() <= 1e-12, "Σ W row {n}: {w}");
        }
        for m in 0..GROUND_COUNT {
            let s: f64 = (0..GROUND_COUNT).filter(|&l| l != m).map(|l| t.m1[m][l]).sum();
            assert!((s - 1.0).abs() <= 1e-12, "{model:?} Σ T̃² row {m}: {s}");
            assert_eq!(t.m1[m][m], 0.0);
        }
    }
}

#[test]
fn no_light_gives_uniform_ground_state() {
    for r in [0.0, 0.3, 0.6, 1.0] {
        let relax = Cell::Cell2.relaxation(r).unwrap();
        let case = CsCase {
            scheme: PolarizationScheme::SigmaMinusPair,
            tuned: ExcitedLevel::Fp4,
            field: 139e-6,
            intensity: 0.0,
            raman: 0.0,
            common_offset: 0.0,
            relaxation: relax,
        };
        let rho = steady_state(&assemble(&case.parts()).unwrap()).unwrap();
        for l in 0..GROUND_COUNT {
            assert!((rho.population(l) - 1.0 / 16.0).abs() <= 1e-12, "r={r} l={l}: {}", rho.population(l));
        }
        assert!(rho.populations()[GROUND_COUNT..].iter().all(|&p| p.abs() <= 1e-15));
    }
}

#[test]
fn generic_three_level_trace_is_preserved() {
    let mut p = LiouvillianParts::new(3);
    p.decay = vec![0.01, 0.02, 1.0];
    p.repopulation[1] = 0.01;
    p.repopulation[3] = 0.02;
    p.repopulation[6] = 0.4;
    p.repopulation[7] = 0.6;
    let m = assemble(&p).unwrap();
    assert!(m.trace_defect() <= 1e-15);
}
