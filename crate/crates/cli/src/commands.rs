//! The data-producing subcommands. Each reads a resolved [`RunConfig`],
//! writes its files through a [`Writer`] and returns a one-line summary.

use std::f64::consts::TAU;

use cpt_core::atomic_model::{index_of, Manifold};
use cpt_core::error::ScanError;
use cpt_core::lineshape::{analytic_spectrum, lineshape_params, LambdaSystem};
use cpt_core::scan::{
    fit_relaxation_ratio, intensity_sweep, read_reference_csv, run_scan, run_scan_with, trap_population_sweep, Peak,
    ScanModel, ScanPoint,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{RunConfig, SweepKind};
use crate::error::CliError;
use crate::output::{num, opt, Writer};

/// Sampled points in ascending detuning and the peaks found in them.
pub struct Spectrum {
    pub points: Vec<ScanPoint>,
    pub peaks: Vec<Peak>,
    pub sign: f64,
}

#[derive(Serialize)]
struct PeakRecord {
    label: String,
    center_hz: f64,
    fwhm_hz: Option<f64>,
    amplitude: f64,
    isolated: bool,
}

/// The full range in one grid, or with `focus_half_window_khz` one grid per
/// merged window around the predicted resonances.
pub fn spectrum_scan(cfg: &RunConfig) -> Result<Spectrum, CliError> {
    let config = cfg.scan_config()?;
    let Some(half_khz) = cfg.scan.focus_half_window_khz else {
        let scan = run_scan(&config)?;
        return Ok(Spectrum {
            points: scan.points,
            peaks: scan.peaks,
            sign: scan.sign,
        });
    };
    if !(half_khz.is_finite() && half_khz > 0.0) {
        return Err(CliError::Config(format!("focus_half_window_khz must be positive, got {half_khz}")));
    }
    let half = TAU * half_khz * 1e3;
    let model = ScanModel::new(&config)?;
    let mut centers: Vec<f64> = model
        .candidates()
        .into_iter()
        .map(|(_, c)| c)
        .filter(|c| (config.raman_start..=config.raman_stop).contains(c))
        .collect();
    if centers.is_empty() {
        return Err(CliError::Config("no predicted resonance inside the scan range".into()));
    }
    centers.sort_by(f64::total_cmp);
    let mut windows: Vec<(f64, f64)> = Vec::new();
    for c in centers {
        match windows.last_mut() {
            Some(last) if c - half <= last.1 => last.1 = c + half,
            _ => windows.push((c - half, c + half)),
        }
    }
    let mut spectrum = Spectrum {
        points: Vec::new(),
        peaks: Vec::new(),
        sign: config.observable.resonance_sign(),
    };
    for (lo, hi) in windows {
        let scan = run_scan(&config.with_range(lo, hi, config.steps))?;
        let offset = spectrum.points.len();
        spectrum.peaks.extend(scan.peaks.into_iter().map(|p| Peak {
            index: p.index + offset,
            ..p
        }));
        spectrum.points.extend(scan.points);
    }
    Ok(spectrum)
}

pub fn spectrum(cfg: &RunConfig, out: &Writer) -> Result<String, CliError> {
    let s = spectrum_scan(cfg)?;
    out.csv(
        "spectrum.csv",
        &["detuning_hz", "value"],
        s.points.iter().map(|p| vec![num(p.raman_hz), num(p.value)]),
    )?;
    let peaks: Vec<PeakRecord> = s
        .peaks
        .iter()
        .map(|p| PeakRecord {
            label: p.label.to_string(),
            center_hz: p.center_hz,
            fwhm_hz: p.fwhm_hz,
            amplitude: p.amplitude,
            isolated: p.isolated,
        })
        .collect();
    out.json("peaks.json", &json!({ "resonance_sign": s.sign, "peaks": peaks }))?;
    Ok(format!("{} points, {} peaks", s.points.len(), peaks.len()))
}

pub fn sweep(cfg: &RunConfig, out: &Writer) -> Result<String, CliError> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("the sweep command needs a [sweep] section".into()))?;
    let intensities = &sweep.intensities_uw_per_mm2;
    if intensities.is_empty() || sweep.curves.is_empty() {
        return Err(CliError::Config("sweep needs at least one intensity and one curve".into()));
    }
    if let Some(bad) = sweep.curves.iter().find(|c| c.name.is_empty() || c.name.contains([',', '"', '\n', '\r'])) {
        return Err(CliError::Config(format!("curve name {:?} must be non-empty without commas or quotes", bad.name)));
    }
    let mut records = Vec::new();
    let mut rows = Vec::new();
    match sweep.kind {
        SweepKind::Intensity => {
            let normalize_at = match sweep.normalize_at_uw_per_mm2 {
                None => None,
                Some(n) => Some(intensities.iter().position(|&i| i == n).ok_or_else(|| {
                    CliError::Config(format!("normalize_at_uw_per_mm2 = {n} is not one of the sweep intensities"))
                })?),
            };
            for curve in &sweep.curves {
                let pair = (curve.resonance[0], curve.resonance[1]);
                let result = intensity_sweep(&cfg.curve_config(curve)?, intensities, pair, normalize_at)?;
                rows.extend(result.iter().map(|r| {
                    vec![
                        curve.name.clone(),
                        num(r.intensity),
                        opt(r.center_hz),
                        opt(r.fwhm_hz),
                        num(r.amplitude),
                        num(r.amplitude_rel),
                    ]
                }));
                records.push(json!({ "name": curve.name, "resonance": curve.resonance, "rows": result }));
            }
            out.csv(
                "sweep.csv",
                &["curve", "intensity_uw_mm2", "center_hz", "width_hz", "amplitude", "amplitude_rel"],
                rows,
            )?;
        }
        SweepKind::TrapPopulation => {
            let half = TAU * sweep.half_window_khz * 1e3;
            if !(half.is_finite() && half > 0.0) {
                return Err(CliError::Config("half_window_khz must be positive".into()));
            }
            for curve in &sweep.curves {
                let pair = (curve.resonance[0], curve.resonance[1]);
                let result = trap_population_sweep(&cfg.curve_config(curve)?, intensities, pair, half)?;
                rows.extend(
                    result
                        .iter()
                        .map(|r| vec![curve.name.clone(), num(r.intensity), num(r.raman_hz), num(r.trap_population)]),
                );
                records.push(json!({ "name": curve.name, "resonance": curve.resonance, "rows": result }));
            }
            out.csv("sweep.csv", &["curve", "intensity_uw_mm2", "raman_hz", "trap_population"], rows)?;
        }
    }
    out.json("sweep.json", &json!({ "kind": sweep.kind, "curves": records }))?;
    Ok(format!("{} curves × {} intensities", sweep.curves.len(), intensities.len()))
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Numeric Re ρ_ge and observable beside the closed-form lineshape of one
/// resonance, over ±`half_window_widths`·Δ_width around its shifted center.
pub fn lineshape(cfg: &RunConfig, out: &Writer) -> Result<String, CliError> {
    let ls = cfg
        .lineshape
        .as_ref()
        .ok_or_else(|| CliError::Config("the lineshape command needs a [lineshape] section".into()))?;
    if ls.steps < 3 || !(ls.half_window_widths.is_finite() && ls.half_window_widths > 0.0) {
        return Err(CliError::Config("lineshape needs steps ≥ 3 and a positive half_window_widths".into()));
    }
    let [m_g, m_e] = ls.resonance;
    let slot = |f, m| {
        index_of(Manifold::Ground, f, m)
            .map(|i| i.slot())
            .map_err(|e| CliError::Config(format!("resonance ({m_g},{m_e}): {e}")))
    };
    let (g, e) = (slot(3, m_g)?, slot(4, m_e)?);
    let config = cfg.scan_config()?;
    let relax = config.relaxation;
    let model = ScanModel::new(&config)?;
    let predicted = model
        .predicted_center(m_g, m_e)
        .ok_or_else(|| CliError::Config(format!("no resonance ({m_g},{m_e})")))?;
    let rho = model.solve_at(predicted)?;
    let system = LambdaSystem::new(&model.coupling, g, e, config.tuned, relax.gamma)
        .map_err(|err| CliError::Config(format!("resonance ({m_g},{m_e}): {err}")))?;
    let p = lineshape_params(
        &system,
        &model.coupling,
        &model.detunings(predicted),
        relax.gamma_p,
        rho.population(g),
        rho.population(e),
    );
    if !(p.width.is_finite() && p.width > 0.0) {
        return Err(CliError::Numerical(format!("non-positive analytic width {}", p.width)));
    }
    let center = predicted + p.light_shift;
    let half = ls.half_window_widths * p.width;
    let grid = linspace(center - half, center + half, ls.steps);
    let analytic = analytic_spectrum(&system, &p, &model.coupling, &model.energies, relax.gamma, &grid, |r| {
        model.detunings(r)
    });
    let numeric: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&r| model.solve_at(r).map(|rho| (rho.get(g, e).re, model.observe(&rho, r))))
        .collect::<Result<_, ScanError>>()?;
    let scan = run_scan_with(&ScanModel::new(&config.with_range(center - half, center + half, ls.steps))?)?;
    let peak = scan.peak_covering(m_g, m_e);

    out.csv(
        "lineshape.csv",
        &["detuning_hz", "numeric_re_rho_ge", "analytic_re_rho_ge", "numeric_value", "analytic_f2"],
        grid.iter().zip(&analytic).zip(&numeric).map(|((&r, a), n)| {
            vec![num(r / TAU), num(n.0), num(a.re_rho_ge), num(n.1), num(a.f2)]
        }),
    )?;
    let numeric_fwhm = peak.and_then(|p| p.fwhm_hz);
    out.json(
        "lineshape.json",
        &json!({
            "resonance": ls.resonance,
            "width_hz": p.width / TAU,
            "analytic_fwhm_hz": 2.0 * p.width / TAU,
            "light_shift_hz": p.light_shift / TAU,
            "amplitude_c": { "re": p.amplitude.re, "im": p.amplitude.im },
            "predicted_center_hz": predicted / TAU,
            "analytic_center_hz": center / TAU,
            "numeric_center_hz": peak.map(|p| p.center_hz),
            "numeric_fwhm_hz": numeric_fwhm,
            "isolated": peak.map(|p| p.isolated),
        }),
    )?;
    Ok(format!(
        "analytic FWHM {:.3} Hz, numeric FWHM {}",
        2.0 * p.width / TAU,
        numeric_fwhm.map_or("undefined".into(), |w| format!("{w:.3} Hz"))
    ))
}

pub fn fit_r(cfg: &RunConfig, out: &Writer) -> Result<String, CliError> {
    let fit = cfg
        .fit
        .as_ref()
        .ok_or_else(|| CliError::Config("the fit-r command needs a [fit] section".into()))?;
    let path = fit
        .reference
        .as_ref()
        .ok_or_else(|| CliError::Config("[fit] reference is required".into()))?;
    let reference = read_reference_csv(path)?;
    let result = fit_relaxation_ratio(&reference, &cfg.scan_config()?, &fit.r_grid)?;
    out.csv("misfit.csv", &["r", "misfit"], result.misfit.iter().map(|&(r, m)| vec![num(r), num(m)]))?;
    out.json("fit.json", &result)?;
    Ok(format!("best r = {}", result.best_r))
}
