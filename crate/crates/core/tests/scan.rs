use std::f64::consts::TAU;
use std::io::Write;

use cpt_core::atomic_model::{index_of, ExcitedLevel, Manifold};
use cpt_core::coupling::PolarizationScheme;
use cpt_core::lineshape::coupling_product;
use cpt_core::relaxation::Cell;
use cpt_core::scan::*;

const KHZ: f64 = TAU * 1e3;

fn sigma_f4(cell: Cell, r: f64, half_window_khz: f64) -> ScanConfig {
    ScanConfig::new(
        cell.relaxation(r).unwrap(),
        22.7e-6,
        PolarizationScheme::SigmaMinusPair,
        ExcitedLevel::Fp4,
        6.6,
        -half_window_khz * KHZ,
        half_window_khz * KHZ,
    )
}

fn ground_slot(f: i32, m: i32) -> usize {
    index_of(Manifold::Ground, f, m).unwrap().slot()
}

/// Least-squares line through (x, y); returns (slope, intercept, R²).
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx, sxy * sxy / (sxx * syy))
}

#[test]
fn scan_is_identical_for_any_worker_count() {
    let config = sigma_f4(Cell::Cell2, 0.6, 200.0).with_range(-200.0 * KHZ, 200.0 * KHZ, 81);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_scan(&config).unwrap())
    };
    let (one, three) = (run(1), run(3));
    assert_eq!(one.points.len(), three.points.len());
    for (a, b) in one.points.iter().zip(&three.points) {
        assert_eq!(a.raman_hz.to_bits(), b.raman_hz.to_bits());
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }
    assert_eq!(one.peaks, three.peaks);
}

#[test]
fn scan_points_are_sorted_and_peaks_inside() {
    let scan = run_scan(&sigma_f4(Cell::Cell2, 0.6, 560.0)).unwrap();
    assert!(scan.points.windows(2).all(|w| w[0].raman_hz < w[1].raman_hz));
    let (lo, hi) = (scan.points[0].raman_hz, scan.points.last().unwrap().raman_hz);
    assert!(scan.peaks.iter().all(|p| p.center_hz >= lo && p.center_hz <= hi));
}

#[test]
fn sigma_f4_at_low_field_shows_seven_zeeman_peaks() {
    let scan = run_scan(&sigma_f4(Cell::Cell2, 0.6, 560.0)).unwrap();
    let labels: Vec<_> = scan.peaks.iter().filter_map(|p| p.label.pair()).collect();
    for m in -3..=3 {
        assert!(labels.contains(&(m, m)), "missing ({m},{m}) in {labels:?}");
    }
    assert_eq!(scan.peaks.len(), 7, "{:?}", scan.peaks);
}

#[test]
fn high_pressure_cell_favors_the_edge_resonance() {
    let scan = run_scan(&sigma_f4(Cell::Cell3, 0.3, 560.0)).unwrap();
    let edge = scan.amplitude(-3, -3);
    for m in -2..=3 {
        assert!(edge > scan.amplitude(m, m), "(−3,−3) {edge} vs ({m},{m}) {}", scan.amplitude(m, m));
    }
}

#[test]
fn lin_parallel_f3_second_order_pattern() {
    // Each (m, m) group is scanned in its own window so the doublet
    // satellites stay resolved at low intensity.
    let base = ScanConfig::new(
        Cell::Cell2.relaxation(0.6).unwrap(),
        285e-6,
        PolarizationScheme::lin_parallel(),
        ExcitedLevel::Fp3,
        0.5,
        -KHZ,
        KHZ,
    );
    let model = ScanModel::new(&base).unwrap();
    let mut amplitude = [0.0; 7];
    for m in -3..=3 {
        let center = model.predicted_center(m, m).unwrap();
        let scan = run_scan(&base.with_range(center - 8.0 * KHZ, center + 8.0 * KHZ, 161)).unwrap();
        amplitude[(m + 3) as usize] = scan.amplitude(m, m);
        if m == 0 {
            assert!(scan.peak(0, 0).is_none(), "(0,0) should be prohibited: {:?}", scan.peaks);
            assert!(scan.peak(-1, 1).is_some() && scan.peak(1, -1).is_some(), "{:?}", scan.peaks);
        } else {
            assert!(amplitude[(m + 3) as usize] > 0.0, "({m},{m}) missing: {:?}", scan.peaks);
        }
    }
    for m in 1..3 {
        let (i, j) = ((m + 3) as usize, (m + 4) as usize);
        assert!(amplitude[j] > amplitude[i], "|m| ordering for +m: {amplitude:?}");
        let (i, j) = ((3 - m) as usize, (2 - m) as usize);
        assert!(amplitude[j] > amplitude[i], "|m| ordering for −m: {amplitude:?}");
    }
}

#[test]
fn zero_field_merges_everything_into_one_ambiguous_peak() {
    let mut config = sigma_f4(Cell::Cell2, 0.6, 5.0);
    config.field = 0.0;
    config.steps = 101;
    let scan = run_scan(&config).unwrap();
    assert_eq!(scan.peaks.len(), 1);
    match &scan.peaks[0].label {
        PeakLabel::Ambiguous { candidates } => assert_eq!(candidates.len(), 7),
        other => panic!("expected ambiguous label, got {other}"),
    }
}

fn sigma_f3(field: f64, half_window_khz: f64) -> ScanConfig {
    ScanConfig::new(
        Cell::Cell2.relaxation(0.6).unwrap(),
        field,
        PolarizationScheme::SigmaMinusPair,
        ExcitedLevel::Fp3,
        6.6,
        -half_window_khz * KHZ,
        half_window_khz * KHZ,
    )
}

#[test]
fn sigma_f3_edge_resonance_needs_the_detuned_level() {
    let config = sigma_f3(22.7e-6, 30.0);
    let model = ScanModel::new(&config).unwrap();
    let center = model.predicted_center(-3, -3).unwrap();
    let window = config.with_range(center - 30.0 * KHZ, center + 30.0 * KHZ, 121);
    let full = run_scan(&window).unwrap().amplitude(-3, -3);
    assert!(full > 0.0);

    let stripped_coupling = ScanModel::new(&window).unwrap().coupling.without_level(ExcitedLevel::Fp4);
    let stripped = ScanModel::with_coupling(&window, Some(stripped_coupling)).unwrap();
    let without = run_scan_with(&stripped).unwrap().amplitude(-3, -3);
    assert!(without * 100.0 < full, "with F'=4 {full:e}, without {without:e}");
}

#[test]
fn sigma_f3_pattern_favors_positive_m() {
    let scan = run_scan(&sigma_f3(22.7e-6, 560.0)).unwrap();
    let a: Vec<f64> = (-3..=3).map(|m| scan.amplitude(m, m)).collect();
    assert!(a.iter().all(|&v| v > 0.0), "{a:?}");
    for m in 1..=3usize {
        assert!(a[3 + m] > a[3 - m], "({m},{m}) should exceed (−{m},−{m}): {a:?}");
    }
}

#[test]
fn sigma_f3_pattern_peaks_at_the_center() {
    let scan = run_scan(&sigma_f3(22.7e-6, 560.0)).unwrap();
    let center = scan.amplitude(0, 0);
    for m in [-3, -2, -1, 1, 2, 3] {
        assert!(center > scan.amplitude(m, m), "(0,0) {center:e} vs ({m},{m}) {:e}", scan.amplitude(m, m));
    }
}

#[test]
fn amplitudes_track_rabi_product_times_population() {
    // Amplitude against |Σ Ω_gu Ω*_eu|²·(ρ_gg + ρ_ee) through the resonant
    // level, across the (m, m) peaks of one spectrum.
    let config = sigma_f4(Cell::Cell2, 0.6, 560.0);
    let model = ScanModel::new(&config).unwrap();
    let scan = run_scan_with(&model).unwrap();
    let (mut measured, mut predicted) = (Vec::new(), Vec::new());
    for m in -3..=3 {
        let peak = scan.peak(m, m).unwrap();
        let rho = model.solve_at(peak.center_hz * TAU).unwrap();
        let (g, e) = (ground_slot(3, m), ground_slot(4, m));
        let product = coupling_product(&model.coupling, g, e, ExcitedLevel::Fp4).norm_sqr();
        measured.push(peak.amplitude);
        predicted.push(product * (rho.population(g) + rho.population(e)));
    }
    let (slope, _, r2) = linear_fit(&predicted, &measured);
    let pearson = r2.sqrt();
    assert!(slope > 0.0 && pearson > 0.9, "slope {slope:e}, Pearson r {pearson}");
}

#[test]
fn zero_intensity_gives_zero_amplitude() {
    let config = sigma_f4(Cell::Cell2, 0.6, 5.0).with_range(-5.0 * KHZ, 5.0 * KHZ, 101);
    let rows = intensity_sweep(&config, &[0.0, 1.0], (0, 0), None).unwrap();
    assert_eq!(rows[0].amplitude, 0.0);
    assert!(rows[0].fwhm_hz.is_none());
    assert!(rows[1].amplitude > 0.0);
}

fn fig8_config(scheme: PolarizationScheme, tuned: ExcitedLevel, half_window_khz: f64) -> ScanConfig {
    let mut config = ScanConfig::new(
        Cell::Cell2.relaxation(0.6).unwrap(),
        139e-6,
        scheme,
        tuned,
        1.0,
        -half_window_khz * KHZ,
        half_window_khz * KHZ,
    );
    config.steps = 161;
    config
}

#[test]
fn lin_parallel_amplitude_is_linear_in_intensity() {
    let intensities = [0.0, 1.0, 2.0, 4.0, 6.6, 10.0, 15.0];
    let config = fig8_config(PolarizationScheme::lin_parallel(), ExcitedLevel::Fp3, 40.0);
    let rows = intensity_sweep(&config, &intensities, (-1, 1), None).unwrap();
    let amplitude: Vec<f64> = rows.iter().map(|r| r.amplitude).collect();
    assert!(amplitude[1..].iter().all(|&a| a > 0.0), "{rows:?}");
    let (_, _, r2) = linear_fit(&intensities, &amplitude);
    assert!(r2 > 0.99, "R² = {r2}, amplitudes {amplitude:?}");
}

#[test]
fn sigma_f4_amplitude_saturates() {
    // Above ~1 μW/mm²; at lower intensity the amplitude starts quadratically.
    let intensities = [1.0, 2.0, 4.0, 7.0, 10.0, 13.0];
    let config = fig8_config(PolarizationScheme::SigmaMinusPair, ExcitedLevel::Fp4, 15.0);
    let rows = intensity_sweep(&config, &intensities, (0, 0), None).unwrap();
    let slopes: Vec<f64> = rows
        .windows(2)
        .map(|w| (w[1].amplitude - w[0].amplitude) / (w[1].intensity - w[0].intensity))
        .collect();
    assert!(slopes.windows(2).all(|s| s[1] < s[0]), "slopes {slopes:?}");
}

#[test]
fn sweep_normalizes_to_the_chosen_point() {
    let config = fig8_config(PolarizationScheme::SigmaMinusPair, ExcitedLevel::Fp4, 10.0);
    let rows = intensity_sweep(&config, &[0.5, 2.0], (0, 0), Some(1)).unwrap();
    assert!((rows[1].amplitude_rel - 1.0).abs() < 1e-15);
    assert!((rows[0].amplitude_rel - rows[0].amplitude / rows[1].amplitude).abs() < 1e-15);
}

#[test]
fn trap_population_without_light_is_thermal() {
    for (tuned, expected) in [(ExcitedLevel::Fp4, 1.0 / 16.0), (ExcitedLevel::Fp3, 3.0 / 16.0)] {
        let config = fig8_config(PolarizationScheme::SigmaMinusPair, tuned, 5.0);
        let rows = trap_population_sweep(&config, &[0.0], (0, 0), KHZ).unwrap();
        assert!((rows[0].trap_population - expected).abs() < 1e-6, "{tuned:?}: {rows:?}");
    }
}

fn write_reference(scan: &SpectrumScan) -> tempfile::NamedTempFile {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "detuning_hz,value").unwrap();
    for p in &scan.points {
        writeln!(file, "{:.17e},{:.17e}", p.raman_hz, p.value).unwrap();
    }
    file.flush().unwrap();
    file
}

fn round_trip(cell: Cell, r: f64, half_window_khz: f64, grid: &[f64]) -> RelaxationFit {
    let truth = sigma_f4(cell, r, half_window_khz);
    let reference = read_reference_csv(write_reference(&run_scan(&truth).unwrap()).path()).unwrap();
    fit_relaxation_ratio(&reference, &truth, grid).unwrap()
}

#[test]
fn fit_recovers_the_generating_ratio() {
    let grid = [0.2, 0.4, 0.6, 0.8, 1.0];
    let fit = round_trip(Cell::Cell2, 0.6, 560.0, &grid);
    assert_eq!(fit.best_r, 0.6, "{fit:?}");
    let best = grid.iter().position(|&r| r == fit.best_r).unwrap();
    for w in fit.misfit[..=best].windows(2) {
        assert!(w[1].1 < w[0].1, "misfit not decreasing toward optimum: {:?}", fit.misfit);
    }
    for w in fit.misfit[best..].windows(2) {
        assert!(w[1].1 > w[0].1, "misfit not increasing away from optimum: {:?}", fit.misfit);
    }
}

#[test]
fn fit_separates_low_and_high_pressure_cells() {
    let grid = [0.3, 0.6, 1.0];
    assert_eq!(round_trip(Cell::Cell1, 1.0, 1200.0, &grid).best_r, 1.0);
    assert_eq!(round_trip(Cell::Cell3, 0.3, 560.0, &grid).best_r, 0.3);
}

#[test]
fn fit_refuses_a_featureless_reference() {
    let config = sigma_f4(Cell::Cell2, 0.6, 560.0);
    let flat: Vec<(f64, f64)> = (0..50).map(|k| (k as f64 * 1e3, 1.0)).collect();
    assert!(fit_relaxation_ratio(&flat, &config, &[0.6]).is_err());
    assert!(fit_relaxation_ratio(&flat, &config, &[]).is_err());
}

#[test]
fn reference_csv_needs_the_right_header() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "freq,value\n1,2").unwrap();
    file.flush().unwrap();
    assert!(read_reference_csv(file.path()).is_err());
    assert!(read_reference_csv("/nonexistent/reference.csv").is_err());
}
