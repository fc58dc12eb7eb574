//! Release-gate suite: each check compares an implementation against an
//! independent construction and passes when the residual is within its
//! bound (scaled by `tolerance_scale`).

use std::f64::consts::{PI, TAU};

use cpt_core::atomic_model::angular::{cached_table, clebsch_gordan_racah, perturbed_table};
use cpt_core::atomic_model::{
    detuning_vector, raman_resonance_hz, zeeman_energies, AtomicConstants, ExcitedLevel, GROUND_COUNT, LEVEL_COUNT,
};
use cpt_core::coupling::{build_bichromatic_coupling, FieldAmplitudes, PolarizationScheme};
use cpt_core::lineshape::{lineshape_params, LambdaSystem};
use cpt_core::observables::{excited_population, excited_population_via_coupling};
use cpt_core::oracle::{clebsch_gordan_ladder, dipole_factor_6j, lambda_steady_state, liouville_rhs, LambdaParams};
use cpt_core::relaxation::{source_matrix, BranchingTable, Cell, M1Model, RelaxationConfig};
use cpt_core::scan::{run_scan_with, ScanConfig, ScanModel};
use cpt_core::solver::{assemble, steady_state, time_evolve, DensityMatrix, LiouvillianParts};
use cpt_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::CliError;

#[derive(Clone, Copy, Debug)]
pub struct Options {
    pub seed: u64,
    pub tolerance_scale: f64,
    /// Shifts the cached ⟨4 0|3 1 0 0⟩ entry seen by the CG check.
    pub perturb_cg: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub residual: f64,
    pub bound: f64,
    pub pass: bool,
}

struct Suite {
    scale: f64,
    checks: Vec<Check>,
}

impl Suite {
    fn record(&mut self, name: &'static str, residual: f64, bound: f64) {
        let bound = bound * self.scale;
        self.checks.push(Check {
            name,
            residual,
            bound,
            pass: residual <= bound,
        });
    }
}

fn fail(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

pub fn run(options: Options) -> Result<Vec<Check>, CliError> {
    if !(options.tolerance_scale.is_finite() && options.tolerance_scale > 0.0) {
        return Err(CliError::Config(format!("tolerance scale must be positive, got {}", options.tolerance_scale)));
    }
    let mut suite = Suite {
        scale: options.tolerance_scale,
        checks: Vec::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let constants = AtomicConstants::cesium_d1();

    let table = match options.perturb_cg {
        Some(delta) => perturbed_table(3, 4, 0, 0, delta),
        None => cached_table(),
    };
    let cg = table
        .iter()
        .map(|&((f, fp, m, q), v)| (v - clebsch_gordan_ladder(f, m, 1, q, fp, m + q)).abs())
        .fold(0.0, f64::max);
    suite.record("cg_table_vs_ladder", cg, 1e-12);

    let mut racah: f64 = 0.0;
    for j1 in 0..=4i32 {
        for j2 in 0..=2 {
            for j in (j1 - j2).abs()..=j1 + j2 {
                for m1 in -j1..=j1 {
                    for m2 in (-j2..=j2).filter(|m2| (m1 + m2).abs() <= j) {
                        let m = m1 + m2;
                        racah = racah.max(
                            (clebsch_gordan_racah(j1, m1, j2, m2, j, m) - clebsch_gordan_ladder(j1, m1, j2, m2, j, m))
                                .abs(),
                        );
                    }
                }
            }
        }
    }
    suite.record("racah_vs_ladder", racah, 1e-12);

    let mut dipole: f64 = 0.0;
    for f in 3..=4 {
        for fp in 3..=4 {
            dipole = dipole.max((constants.dipole_factor(f, fp) - dipole_factor_6j(f, fp, 7)).abs());
        }
    }
    suite.record("dipole_factors_vs_6j", dipole, 1e-14);

    let mut rows: f64 = 0.0;
    for model in [
        M1Model::Balanced,
        M1Model::RowNormalized { within_manifold: true },
        M1Model::RowNormalized { within_manifold: false },
    ] {
        let t = BranchingTable::new(&constants, model).map_err(fail)?;
        for n in 0..16 {
            rows = rows.max((t.optical_t2[n].iter().sum::<f64>() - 1.0).abs());
            rows = rows.max((t.branching[n].iter().sum::<f64>() - 1.0).abs());
        }
        for m in 0..GROUND_COUNT {
            let s: f64 = (0..GROUND_COUNT).filter(|&l| l != m).map(|l| t.m1[m][l]).sum();
            rows = rows.max((s - 1.0).abs());
        }
    }
    suite.record("branching_rows_sum_to_one", rows, 1e-12);

    let mut element: f64 = 0.0;
    for _ in 0..10 {
        let case = Case::random(&mut rng);
        let parts = case.parts(&constants)?;
        let m = assemble(&parts).map_err(fail)?;
        let rho = random_hermitian(&mut rng, parts.dim);
        let (fast, slow) = (m.apply(&rho), liouville_rhs(&parts, &rho));
        element = element.max(fast.max_diff(&slow) / slow.max_abs().max(1.0));
    }
    suite.record("liouvillian_vs_element_sum", element, 1e-12);

    let (mut trace, mut herm, mut flux, mut identity): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..10 {
        let case = Case::random(&mut rng);
        let rho = steady_state(&assemble(&case.parts(&constants)?).map_err(fail)?).map_err(fail)?;
        trace = trace.max((rho.trace() - 1.0).norm());
        herm = herm.max(rho.hermiticity_error());
        let via = excited_population_via_coupling(&rho, &case.coupling(&constants)?, case.relaxation.gamma);
        identity = identity.max((excited_population(&rho) - via).abs());
        let table = BranchingTable::new(&constants, case.relaxation.m1).map_err(fail)?;
        let pops = rho.populations();
        let influx: f64 = source_matrix(&pops, &case.relaxation, &table).iter().sum();
        let outflux: f64 = (0..LEVEL_COUNT)
            .map(|l| pops[l] * if l < GROUND_COUNT { case.relaxation.gamma_p } else { case.relaxation.gamma })
            .sum();
        flux = flux.max((influx - outflux).abs() / outflux);
    }
    suite.record("steady_state_trace", trace, 1e-10);
    suite.record("steady_state_hermiticity", herm, 1e-12);
    suite.record("source_flux_balance", flux, 1e-12);
    suite.record("excited_population_identity", identity, 1e-9);

    let mut evolve: f64 = 0.0;
    for _ in 0..3 {
        let mut case = Case::random(&mut rng);
        // Round-off of the propagator grows like ‖M‖·T·ε, so the reference
        // run needs fast ground relaxation.
        case.relaxation.gamma_p = TAU * rng.random_range(5e3..30e3);
        let m = assemble(&case.parts(&constants)?).map_err(fail)?;
        let stationary = steady_state(&m).map_err(fail)?;
        let evolved = time_evolve(&DensityMatrix::uniform_over(32, 16), &m, 80.0 / case.relaxation.gamma_p, 1e-9)
            .map_err(fail)?;
        evolve = evolve.max(evolved.max_diff(&stationary));
    }
    suite.record("steady_state_vs_time_evolution", evolve, 1e-6);

    let mut lambda: f64 = 0.0;
    for _ in 0..50 {
        let p = random_lambda(&mut rng);
        let oracle = lambda_steady_state(&p).ok_or_else(|| fail("singular three-level oracle"))?;
        let rho = steady_state(&assemble(&p.to_parts()).map_err(fail)?).map_err(fail)?;
        for (l, row) in oracle.iter().enumerate() {
            for (m, v) in row.iter().enumerate() {
                lambda = lambda.max((rho.get(l, m) - v).norm());
            }
        }
    }
    suite.record("three_level_oracle", lambda, 1e-10);

    let (center, fwhm) = lineshape_agreement()?;
    suite.record("lineshape_center_over_width", center, 0.1);
    suite.record("lineshape_fwhm_relative", fwhm, 0.15);

    Ok(suite.checks)
}

/// Isolated (−1,1) resonance of Lin∥Lin on F'=3 at 285 μT and 0.2 μW/mm²:
/// numeric peak against the closed form, as (center offset / Δ_width,
/// relative FWHM error).
fn lineshape_agreement() -> Result<(f64, f64), CliError> {
    const G: usize = 2; // |3,−1⟩
    const E: usize = 12; // |4,+1⟩
    let relax = Cell::Cell2.relaxation(0.6).map_err(fail)?;
    let config = ScanConfig::new(relax, 285e-6, PolarizationScheme::lin_parallel(), ExcitedLevel::Fp3, 0.2, -1.0, 1.0);
    let model = ScanModel::new(&config)?;
    let predicted = TAU * raman_resonance_hz(&model.energies, -1, 1).ok_or_else(|| fail("no (−1,1) resonance"))?;
    let rho = model.solve_at(predicted)?;
    let system = LambdaSystem::new(&model.coupling, G, E, ExcitedLevel::Fp3, relax.gamma).map_err(fail)?;
    let p = lineshape_params(
        &system,
        &model.coupling,
        &model.detunings(predicted),
        relax.gamma_p,
        rho.population(G),
        rho.population(E),
    );
    let center = predicted + p.light_shift;
    let half = 12.0 * p.width;
    let scan = run_scan_with(&ScanModel::new(&config.with_range(center - half, center + half, 241))?)?;
    let Some(peak) = scan.peak(-1, 1) else {
        return Ok((f64::INFINITY, f64::INFINITY));
    };
    let offset = (TAU * peak.center_hz - center).abs() / p.width;
    let fwhm = peak
        .fwhm_hz
        .map_or(f64::INFINITY, |w| (TAU * w - 2.0 * p.width).abs() / (2.0 * p.width));
    Ok((offset, fwhm))
}

/// A randomized full-manifold problem.
struct Case {
    scheme: PolarizationScheme,
    tuned: ExcitedLevel,
    field: f64,
    intensity: f64,
    raman: f64,
    common_offset: f64,
    relaxation: RelaxationConfig,
}

impl Case {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let scheme = match rng.random_range(0..4) {
            0 => PolarizationScheme::SigmaMinusPair,
            1 => PolarizationScheme::SigmaPlusPair,
            2 => PolarizationScheme::lin_parallel(),
            _ => PolarizationScheme::lin_lin(rng.random_range(0.0..PI)),
        };
        let cell = [Cell::Cell1, Cell::Cell2, Cell::Cell3][rng.random_range(0..3)];
        let m1 = if rng.random_bool(0.5) {
            M1Model::Balanced
        } else {
            M1Model::RowNormalized { within_manifold: rng.random_bool(0.5) }
        };
        let r = rng.random_range(0.0..=1.0);
        Case {
            scheme,
            tuned: if rng.random_bool(0.5) { ExcitedLevel::Fp3 } else { ExcitedLevel::Fp4 },
            field: rng.random_range(0.0..300e-6),
            intensity: rng.random_range(0.1..20.0),
            raman: TAU * rng.random_range(-50e3..50e3),
            common_offset: TAU * rng.random_range(-300e6..300e6),
            relaxation: cell.relaxation(r).expect("r in [0, 1]").with_m1(m1),
        }
    }

    fn coupling(&self, c: &AtomicConstants) -> Result<cpt_core::coupling::CouplingMatrix, CliError> {
        let f = FieldAmplitudes::from_intensities(self.intensity, self.intensity).map_err(fail)?;
        Ok(build_bichromatic_coupling(c, self.scheme, f))
    }

    fn parts(&self, c: &AtomicConstants) -> Result<LiouvillianParts, CliError> {
        let z = zeeman_energies(c, self.field).map_err(fail)?;
        let detunings = detuning_vector(&z, c, self.raman, self.tuned.tuning(c) + self.common_offset);
        let branching = BranchingTable::new(c, self.relaxation.m1).map_err(fail)?;
        Ok(LiouvillianParts::cesium(&detunings, &self.coupling(c)?, &self.relaxation, &branching))
    }
}

fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize) -> DensityMatrix {
    let mut rho = DensityMatrix::zeros(dim);
    for l in 0..dim {
        rho.set(l, l, Complex64::new(rng.random_range(0.0..1.0), 0.0));
        for m in l + 1..dim {
            let z = Complex64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
            rho.set(l, m, z);
            rho.set(m, l, z.conj());
        }
    }
    rho
}

fn random_lambda(rng: &mut ChaCha8Rng) -> LambdaParams {
    let gamma = rng.random_range(0.5..2.0);
    let (up, down) = (rng.random_range(1e-4..1e-2), rng.random_range(1e-4..1e-2));
    let branch_g = rng.random_range(0.2..0.8);
    let mut c = |s: f64| Complex64::from_polar(rng.random_range(0.0..s), rng.random_range(0.0..TAU));
    let (omega_gi, omega_ei) = (c(1.0), c(1.0));
    LambdaParams {
        detunings: [rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-1.0..1.0)],
        omega_gi,
        omega_ei,
        decay: [up, down, gamma],
        rate_g_to_e: up,
        rate_e_to_g: down,
        branch_g,
        branch_e: 1.0 - branch_g,
    }
}
