//! Raman-detuning scans, intensity sweeps and the relaxation-ratio fit.
//!
//! A scan solves the steady state once per detuning with a solver built for
//! the shared sparsity pattern, evaluates points in parallel and sorts them,
//! so the output does not depend on the worker count.

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atomic_model::{
    detuning_vector, raman_resonance_hz, zeeman_energies, AtomicConstants, ExcitedLevel, SublevelIndex,
    ZeemanEnergies, LEVEL_COUNT,
};
use crate::coupling::{build_bichromatic_coupling, dark_ground_states, CouplingMatrix, FieldAmplitudes, PolarizationScheme};
use crate::error::ScanError;
use crate::observables::{excited_population, spectrum_baseline, transmittance};
use crate::relaxation::{decay_vector, BranchingTable, RelaxationConfig};
use crate::solver::{assemble, DensityMatrix, Liouvillian, LiouvillianParts, SolveOptions, SteadyStateSolver};

/// What a scan records at each detuning.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObservableKind {
    /// Σ ρ_nn over the excited sublevels; CPT shows as a dip.
    #[default]
    ExcitedPopulation,
    /// T = 1 − α Σ ρ_nn; CPT shows as a peak.
    Transmittance { alpha: f64 },
}

impl ObservableKind {
    /// +1 when resonances raise the observable, −1 when they lower it.
    pub fn resonance_sign(self) -> f64 {
        match self {
            ObservableKind::ExcitedPopulation => -1.0,
            ObservableKind::Transmittance { .. } => 1.0,
        }
    }
}

/// How the configured intensity maps onto the two field legs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntensityMode {
    /// Each sideband carries the configured intensity (I₁ = I₂ = I).
    #[default]
    PerLeg,
    /// The configured intensity is shared, each leg gets E/√2.
    Total,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub relaxation: RelaxationConfig,
    /// Static field (T).
    pub field: f64,
    pub scheme: PolarizationScheme,
    pub tuned: ExcitedLevel,
    /// Added to the common detuning that centers the light on `tuned` (rad/s).
    pub common_offset: f64,
    /// W/m² (1 W/m² = 1 μW/mm²).
    pub intensity: f64,
    pub intensity_mode: IntensityMode,
    /// Raman detuning range (rad/s).
    pub raman_start: f64,
    pub raman_stop: f64,
    pub steps: usize,
    pub observable: ObservableKind,
    /// Zoom refinement levels around each detected extremum.
    pub refine_levels: usize,
    /// Peaks smaller than this fraction of the largest are ignored.
    pub peak_threshold: f64,
    pub solve: SolveOptions,
}

impl ScanConfig {
    /// Defaults for a scan over `[raman_start, raman_stop]`: 601 points,
    /// excited-population observable, three refinement levels.
    pub fn new(
        relaxation: RelaxationConfig,
        field: f64,
        scheme: PolarizationScheme,
        tuned: ExcitedLevel,
        intensity: f64,
        raman_start: f64,
        raman_stop: f64,
    ) -> Self {
        Self {
            relaxation,
            field,
            scheme,
            tuned,
            common_offset: 0.0,
            intensity,
            intensity_mode: IntensityMode::PerLeg,
            raman_start,
            raman_stop,
            steps: 601,
            observable: ObservableKind::ExcitedPopulation,
            refine_levels: 3,
            peak_threshold: 1e-3,
            solve: SolveOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ScanError> {
        let bad = |msg: String| Err(ScanError::InvalidConfig(msg));
        if self.steps < 3 {
            return bad(format!("need at least 3 scan steps, got {}", self.steps));
        }
        if !(self.raman_start.is_finite() && self.raman_stop.is_finite()) || self.raman_stop <= self.raman_start {
            return bad(format!(
                "Raman range must be finite and non-empty, got [{}, {}] rad/s",
                self.raman_start, self.raman_stop
            ));
        }
        if !(self.intensity >= 0.0 && self.intensity.is_finite()) {
            return bad(format!("intensity must be finite and non-negative, got {}", self.intensity));
        }
        if !self.common_offset.is_finite() {
            return bad("common detuning offset must be finite".into());
        }
        if !(0.0..1.0).contains(&self.peak_threshold) {
            return bad(format!("peak threshold must lie in [0, 1), got {}", self.peak_threshold));
        }
        if let ObservableKind::Transmittance { alpha } = self.observable {
            if !(alpha.is_finite() && alpha >= 0.0) {
                return bad(format!("α must be finite and non-negative, got {alpha}"));
            }
        }
        self.relaxation.validate()?;
        Ok(())
    }

    pub fn fields(&self) -> Result<FieldAmplitudes, ScanError> {
        Ok(match self.intensity_mode {
            IntensityMode::PerLeg => FieldAmplitudes::from_intensities(self.intensity, self.intensity)?,
            IntensityMode::Total => FieldAmplitudes::from_total_intensity(self.intensity)?,
        })
    }

    pub fn with_intensity(&self, intensity: f64) -> Self {
        Self { intensity, ..self.clone() }
    }

    pub fn with_range(&self, start: f64, stop: f64, steps: usize) -> Self {
        Self {
            raman_start: start,
            raman_stop: stop,
            steps,
            ..self.clone()
        }
    }
}

/// Everything that stays fixed across one scan.
pub struct ScanModel {
    pub constants: AtomicConstants,
    pub config: ScanConfig,
    pub energies: ZeemanEnergies,
    pub branching: BranchingTable,
    pub coupling: CouplingMatrix,
    parts: LiouvillianParts,
    solver: SteadyStateSolver,
}

impl ScanModel {
    pub fn new(config: &ScanConfig) -> Result<Self, ScanError> {
        Self::with_coupling(config, None)
    }

    /// As [`ScanModel::new`], with the coupling replaced when `coupling` is
    /// given (used to switch off selected transitions).
    pub fn with_coupling(config: &ScanConfig, coupling: Option<CouplingMatrix>) -> Result<Self, ScanError> {
        config.validate()?;
        let constants = AtomicConstants::cesium_d1();
        let energies = zeeman_energies(&constants, config.field)?;
        let branching = BranchingTable::new(&constants, config.relaxation.m1)?;
        let coupling =
            coupling.unwrap_or_else(|| build_bichromatic_coupling(&constants, config.scheme, config.fields().unwrap()));
        let common = config.tuned.tuning(&constants) + config.common_offset;
        let detunings = detuning_vector(&energies, &constants, 0.0, common);
        let parts = LiouvillianParts::cesium(&detunings, &coupling, &config.relaxation, &branching);
        let template = assemble(&parts).map_err(ScanError::Setup)?;
        let solver = SteadyStateSolver::new(&template, config.solve).map_err(ScanError::Setup)?;
        Ok(Self {
            constants,
            config: config.clone(),
            energies,
            branching,
            coupling,
            parts,
            solver,
        })
    }

    /// Common detuning Δ_opt (rad/s).
    pub fn common_detuning(&self) -> f64 {
        self.config.tuned.tuning(&self.constants) + self.config.common_offset
    }

    pub fn detunings(&self, raman: f64) -> [f64; LEVEL_COUNT] {
        detuning_vector(&self.energies, &self.constants, raman, self.common_detuning())
    }

    pub fn liouvillian(&self, raman: f64) -> Result<Liouvillian, ScanError> {
        let mut parts = self.parts.clone();
        parts.detunings.copy_from_slice(&self.detunings(raman));
        assemble(&parts).map_err(|source| ScanError::Solver {
            raman_hz: raman / TAU,
            source,
        })
    }

    pub fn solve_at(&self, raman: f64) -> Result<DensityMatrix, ScanError> {
        let m = self.liouvillian(raman)?;
        self.solver.solve(&m).map_err(|source| ScanError::Solver {
            raman_hz: raman / TAU,
            source,
        })
    }

    pub fn observe(&self, rho: &DensityMatrix, raman: f64) -> f64 {
        match self.config.observable {
            ObservableKind::ExcitedPopulation => excited_population(rho),
            ObservableKind::Transmittance { alpha } => {
                let decay = decay_vector(&self.config.relaxation);
                transmittance(rho, &self.coupling, &self.detunings(raman), &decay, alpha).transmittance
            }
        }
    }

    pub fn value_at(&self, raman: f64) -> Result<f64, ScanError> {
        let rho = self.solve_at(raman)?;
        Ok(self.observe(&rho, raman))
    }

    /// Predicted Raman detuning (rad/s) of the (m_g, m_e) resonance.
    pub fn predicted_center(&self, m_g: i32, m_e: i32) -> Option<f64> {
        raman_resonance_hz(&self.energies, m_g, m_e).map(|hz| hz * TAU)
    }

    /// Resonances the polarization scheme can drive, with predicted centers
    /// (rad/s).
    pub fn candidates(&self) -> Vec<((i32, i32), f64)> {
        resonance_candidates(self.config.scheme)
            .into_iter()
            .filter_map(|(g, e)| self.predicted_center(g, e).map(|c| ((g, e), c)))
            .collect()
    }

    /// Evaluates `ramans` in parallel; output in input order.
    pub fn evaluate(&self, ramans: &[f64]) -> Result<Vec<f64>, ScanError> {
        ramans.par_iter().map(|&r| self.value_at(r)).collect()
    }
}

/// (m_g, m_e) pairs reachable by the scheme: Δm = 0 for circular pairs,
/// Δm ∈ {0, ±2} for linear ones.
pub fn resonance_candidates(scheme: PolarizationScheme) -> Vec<(i32, i32)> {
    let steps: &[i32] = match scheme {
        PolarizationScheme::SigmaPlusPair | PolarizationScheme::SigmaMinusPair => &[0],
        PolarizationScheme::LinLin { .. } => &[-2, 0, 2],
    };
    let mut out = Vec::new();
    for m_g in -3..=3 {
        for &d in steps {
            let m_e = m_g + d;
            if m_e.abs() <= 4 {
                out.push((m_g, m_e));
            }
        }
    }
    out
}

/// Label of a detected resonance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PeakLabel {
    Resonance { m_g: i32, m_e: i32 },
    /// Several predicted resonances fall within the matching tolerance.
    Ambiguous { candidates: Vec<(i32, i32)> },
    Unknown,
}

impl PeakLabel {
    pub fn pair(&self) -> Option<(i32, i32)> {
        match self {
            PeakLabel::Resonance { m_g, m_e } => Some((*m_g, *m_e)),
            _ => None,
        }
    }
}

impl fmt::Display for PeakLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PeakLabel::Resonance { m_g, m_e } => write!(f, "({m_g},{m_e})"),
            PeakLabel::Ambiguous { candidates } => {
                let names: Vec<String> = candidates.iter().map(|(g, e)| format!("({g},{e})")).collect();
                write!(f, "ambiguous[{}]", names.join(" "))
            }
            PeakLabel::Unknown => write!(f, "unknown"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub raman_hz: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub label: PeakLabel,
    pub center_hz: f64,
    /// Omitted when the half-maximum crossings run into a neighbor.
    pub fwhm_hz: Option<f64>,
    /// |extremum − baseline| from a parabola through the three samples
    /// bracketing the extremum.
    pub amplitude: f64,
    /// No other detected peak within 3 FWHM.
    pub isolated: bool,
    /// Index of the extremal sample in the scan.
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumScan {
    pub points: Vec<ScanPoint>,
    pub peaks: Vec<Peak>,
    pub baseline: f64,
    /// +1 if resonances are peaks, −1 if dips.
    pub sign: f64,
}

impl SpectrumScan {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn peak(&self, m_g: i32, m_e: i32) -> Option<&Peak> {
        self.peaks.iter().find(|p| p.label.pair() == Some((m_g, m_e)))
    }

    /// The peak labeled `(m_g, m_e)`, or else one whose ambiguous label
    /// includes it (merged neighbors).
    pub fn peak_covering(&self, m_g: i32, m_e: i32) -> Option<&Peak> {
        self.peak(m_g, m_e).or_else(|| {
            self.peaks.iter().find(|p| match &p.label {
                PeakLabel::Ambiguous { candidates } => candidates.contains(&(m_g, m_e)),
                _ => false,
            })
        })
    }

    /// Amplitude of the labeled resonance, zero when no such peak was found.
    pub fn amplitude(&self, m_g: i32, m_e: i32) -> f64 {
        self.peak(m_g, m_e).map_or(0.0, |p| p.amplitude)
    }
}

fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    let step = (stop - start) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { stop } else { start + step * i as f64 })
        .collect()
}

/// Vertex of the parabola through three points: (x, y).
pub fn parabola_vertex(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64)) -> (f64, f64) {
    let (x0, y0) = p0;
    let (x1, y1) = p1;
    let (x2, y2) = p2;
    // Newton form: y = y0 + a (x − x0) + b (x − x0)(x − x1).
    let a = (y1 - y0) / (x1 - x0);
    let b = ((y2 - y1) / (x2 - x1) - a) / (x2 - x0);
    if b == 0.0 || !b.is_finite() {
        return p1;
    }
    let x = 0.5 * (x0 + x1) - a / (2.0 * b);
    if !(x0.min(x2)..=x0.max(x2)).contains(&x) {
        return p1;
    }
    let y = y0 + a * (x - x0) + b * (x - x0) * (x - x1);
    (x, y)
}

/// Indices of local maxima of `deviation` above `threshold`.
fn local_maxima(deviation: &[f64], threshold: f64) -> Vec<usize> {
    let n = deviation.len();
    (1..n.saturating_sub(1))
        .filter(|&i| {
            deviation[i] > threshold && deviation[i] > deviation[i - 1] && deviation[i] >= deviation[i + 1]
        })
        .collect()
}

fn deviations(points: &[ScanPoint], baseline: f64, sign: f64) -> Vec<f64> {
    points.iter().map(|p| sign * (p.value - baseline)).collect()
}

/// Extremal samples of a spectrum: local maxima of sign·(value − baseline)
/// above `threshold` times the largest one.
pub fn detect_peaks(points: &[ScanPoint], sign: f64, threshold: f64) -> Vec<usize> {
    let values: Vec<f64> = points.iter().map(|p| p.value).collect();
    let Some(baseline) = spectrum_baseline(&values) else {
        return Vec::new();
    };
    let dev = deviations(points, baseline, sign);
    let top = dev.iter().fold(0.0f64, |a, &b| a.max(b));
    if top <= 0.0 {
        return Vec::new();
    }
    local_maxima(&dev, threshold * top)
}

/// Full width at half maximum of the peak at `index`, measured above the
/// baseline with linear interpolation between samples. `None` when the
/// profile turns upward again before reaching half maximum on either side
/// (an overlapping neighbor) or the scan ends first.
pub fn measure_fwhm(points: &[ScanPoint], index: usize, baseline: f64, sign: f64) -> Option<f64> {
    let dev = deviations(points, baseline, sign);
    let top = dev[index];
    if top <= 0.0 {
        return None;
    }
    let half = 0.5 * top;
    let crossing = |step: isize| -> Option<f64> {
        let mut i = index as isize;
        loop {
            let j = i + step;
            if j < 0 || j as usize >= dev.len() {
                return None;
            }
            let (a, b) = (dev[i as usize], dev[j as usize]);
            if b <= half {
                let (xa, xb) = (points[i as usize].raman_hz, points[j as usize].raman_hz);
                return Some(xa + (half - a) * (xb - xa) / (b - a));
            }
            if b > a {
                return None;
            }
            i = j;
        }
    };
    Some(crossing(1)? - crossing(-1)?)
}

/// Matches detected peaks to predicted resonances. A peak whose center is
/// within `tolerance_hz(peak)` of exactly one prediction gets that label;
/// more than one gives an ambiguous label, none gives unknown.
pub fn label_peaks(peaks: &mut [Peak], candidates: &[((i32, i32), f64)], tolerance_hz: impl Fn(&Peak) -> f64) {
    for peak in peaks.iter_mut() {
        let tolerance_hz = tolerance_hz(peak);
        let mut near: Vec<((i32, i32), f64)> = candidates
            .iter()
            .map(|&(pair, c)| (pair, (c / TAU - peak.center_hz).abs()))
            .filter(|&(_, d)| d <= tolerance_hz)
            .collect();
        near.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        peak.label = match near.as_slice() {
            [] => PeakLabel::Unknown,
            [(pair, _)] => PeakLabel::Resonance { m_g: pair.0, m_e: pair.1 },
            many => PeakLabel::Ambiguous {
                candidates: many.iter().map(|(p, _)| *p).collect(),
            },
        };
    }
}

fn merge_points(points: &mut Vec<ScanPoint>, extra: Vec<ScanPoint>) {
    points.extend(extra);
    points.sort_by(|a, b| a.raman_hz.total_cmp(&b.raman_hz));
    // Detunings that differ only by Hz ↔ rad/s round-off are the same point.
    points.dedup_by(|a, b| (a.raman_hz - b.raman_hz).abs() <= 1e-9 * a.raman_hz.abs().max(b.raman_hz.abs()).max(1.0));
}

const ZOOM_FACTOR: usize = 6;
const RESOLVED_SAMPLES: f64 = 12.0;

/// Solves every grid point, refines around extrema and extracts peaks.
pub fn run_scan(config: &ScanConfig) -> Result<SpectrumScan, ScanError> {
    let model = ScanModel::new(config)?;
    run_scan_with(&model)
}

pub fn run_scan_with(model: &ScanModel) -> Result<SpectrumScan, ScanError> {
    let config = &model.config;
    let sign = config.observable.resonance_sign();
    let candidates = model.candidates();

    let mut grid = linspace(config.raman_start, config.raman_stop, config.steps);
    let coarse_step_hz = (config.raman_stop - config.raman_start) / (config.steps - 1) as f64 / TAU;
    grid.extend(
        candidates
            .iter()
            .map(|&(_, c)| c)
            .filter(|c| (config.raman_start..=config.raman_stop).contains(c)),
    );
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let values = model.evaluate(&grid)?;
    let mut points: Vec<ScanPoint> = grid
        .iter()
        .zip(values)
        .map(|(&r, value)| ScanPoint { raman_hz: r / TAU, value })
        .collect();

    // Zoom refinement: each extremum whose width spans fewer than
    // RESOLVED_SAMPLES local steps gets a finer uniform sub-grid over ±2
    // local steps, shrinking the spacing by ZOOM_FACTOR per level.
    for _ in 0..config.refine_levels {
        let vals: Vec<f64> = points.iter().map(|p| p.value).collect();
        let baseline = spectrum_baseline(&vals).unwrap_or(0.0);
        let mut extra_hz = BTreeSet::new();
        for i in detect_peaks(&points, sign, config.peak_threshold) {
            let x = points[i].raman_hz;
            let h = (x - points[i - 1].raman_hz).min(points[i + 1].raman_hz - x);
            let resolved = measure_fwhm(&points, i, baseline, sign).is_some_and(|w| w >= RESOLVED_SAMPLES * h);
            if resolved {
                continue;
            }
            let fine = h / ZOOM_FACTOR as f64;
            for k in -(2 * ZOOM_FACTOR as i64)..=(2 * ZOOM_FACTOR as i64) {
                let r = x + k as f64 * fine;
                if k != 0 && (points[0].raman_hz..=points[points.len() - 1].raman_hz).contains(&r) {
                    extra_hz.insert(Ordered(r));
                }
            }
        }
        if extra_hz.is_empty() {
            break;
        }
        let extra: Vec<f64> = extra_hz.into_iter().map(|o| o.0 * TAU).collect();
        let values = model.evaluate(&extra)?;
        merge_points(
            &mut points,
            extra
                .iter()
                .zip(values)
                .map(|(&r, value)| ScanPoint { raman_hz: r / TAU, value })
                .collect(),
        );
    }

    Ok(extract_peaks(points, sign, config.peak_threshold, &candidates, coarse_step_hz))
}

/// Wrapper that gives f64 a total order for set membership.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Ordered(f64);

impl Eq for Ordered {}

impl PartialOrd for Ordered {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ordered {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Peak extraction and labeling on an already sampled spectrum.
pub fn extract_peaks(
    points: Vec<ScanPoint>,
    sign: f64,
    threshold: f64,
    candidates: &[((i32, i32), f64)],
    coarse_step_hz: f64,
) -> SpectrumScan {
    let values: Vec<f64> = points.iter().map(|p| p.value).collect();
    let baseline = spectrum_baseline(&values).unwrap_or(0.0);
    let indices = detect_peaks(&points, sign, threshold);
    let mut peaks: Vec<Peak> = indices
        .iter()
        .map(|&i| {
            let at = |k: usize| (points[k].raman_hz, sign * (points[k].value - baseline));
            let (center_hz, amplitude) = parabola_vertex(at(i - 1), at(i), at(i + 1));
            Peak {
                label: PeakLabel::Unknown,
                center_hz,
                fwhm_hz: measure_fwhm(&points, i, baseline, sign),
                amplitude,
                isolated: true,
                index: i,
            }
        })
        .collect();
    let centers: Vec<f64> = peaks.iter().map(|p| p.center_hz).collect();
    for (k, peak) in peaks.iter_mut().enumerate() {
        if let Some(w) = peak.fwhm_hz {
            peak.isolated = centers
                .iter()
                .enumerate()
                .all(|(j, &c)| j == k || (c - peak.center_hz).abs() > 3.0 * w);
        }
    }
    // Matching tolerance per peak: half its width (or half the distance to
    // the nearest other peak when the width is unknown), never below two
    // local sample spacings.
    let tolerances: Vec<f64> = peaks
        .iter()
        .map(|p| {
            let i = p.index;
            let h = (points[i].raman_hz - points[i - 1].raman_hz).min(points[i + 1].raman_hz - points[i].raman_hz);
            let scale = p.fwhm_hz.unwrap_or_else(|| {
                let nearest = centers
                    .iter()
                    .map(|&c| (c - p.center_hz).abs())
                    .filter(|&d| d > 0.0)
                    .fold(f64::INFINITY, f64::min);
                if nearest.is_finite() {
                    nearest
                } else {
                    coarse_step_hz
                }
            });
            (0.5 * scale).max(2.0 * h)
        })
        .collect();
    let by_index: Vec<(usize, f64)> = peaks.iter().map(|p| p.index).zip(tolerances).collect();
    label_peaks(&mut peaks, candidates, |p| {
        by_index.iter().find(|(i, _)| *i == p.index).map_or(0.0, |(_, t)| *t)
    });
    SpectrumScan {
        points,
        peaks,
        baseline,
        sign,
    }
}

/// Ground sublevels treated as trap states when the light is tuned to
/// `tuned`: those with no σ⁻ coupling to it (|8⟩ for F'=4, |1⟩, |8⟩, |9⟩
/// for F'=3). The same set is used for every polarization scheme.
pub fn trap_set(constants: &AtomicConstants, tuned: ExcitedLevel) -> BTreeSet<SublevelIndex> {
    let unit = FieldAmplitudes::new(1.0, 1.0).expect("unit fields are valid");
    let coupling = build_bichromatic_coupling(constants, PolarizationScheme::SigmaMinusPair, unit);
    dark_ground_states(&coupling, tuned)
}

/// Extremum of the observable near `center` (rad/s), searched on a local
/// grid of ±`half_window` and polished with a parabola; returns the
/// detuning of the extremal sample.
pub fn locate_resonance(model: &ScanModel, center: f64, half_window: f64, samples: usize) -> Result<f64, ScanError> {
    let sign = model.config.observable.resonance_sign();
    let mut lo = center - half_window;
    let mut hi = center + half_window;
    let mut best = center;
    for _ in 0..3 {
        let grid = linspace(lo, hi, samples.max(5));
        let values = model.evaluate(&grid)?;
        let k = (0..grid.len())
            .max_by(|&a, &b| (sign * values[a]).total_cmp(&(sign * values[b])))
            .unwrap();
        best = grid[k];
        let step = grid[1] - grid[0];
        lo = best - step;
        hi = best + step;
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// W/m² (= μW/mm²).
    pub intensity: f64,
    pub center_hz: Option<f64>,
    pub fwhm_hz: Option<f64>,
    pub amplitude: f64,
    pub amplitude_rel: f64,
}

/// Width and amplitude of the `(m_g, m_e)` resonance at each intensity. The
/// scan window is centered on the predicted resonance with the configured
/// span. A peak whose ambiguous label includes the resonance stands in for
/// it. Amplitudes are divided by the one at `normalize_at` (an index into
/// `intensities`) when that amplitude is nonzero.
pub fn intensity_sweep(
    config: &ScanConfig,
    intensities: &[f64],
    resonance: (i32, i32),
    normalize_at: Option<usize>,
) -> Result<Vec<SweepRow>, ScanError> {
    let span = config.raman_stop - config.raman_start;
    let mut rows = Vec::with_capacity(intensities.len());
    for &intensity in intensities {
        let base = ScanModel::new(&config.with_intensity(intensity))?;
        let center = base
            .predicted_center(resonance.0, resonance.1)
            .ok_or_else(|| ScanError::InvalidConfig(format!("no resonance {resonance:?}")))?;
        let windowed = config.with_intensity(intensity).with_range(center - 0.5 * span, center + 0.5 * span, config.steps);
        let model = ScanModel::new(&windowed)?;
        let scan = run_scan_with(&model)?;
        let peak = scan.peak_covering(resonance.0, resonance.1);
        rows.push(SweepRow {
            intensity,
            center_hz: peak.map(|p| p.center_hz),
            fwhm_hz: peak.and_then(|p| p.fwhm_hz),
            amplitude: peak.map_or(0.0, |p| p.amplitude),
            amplitude_rel: 0.0,
        });
    }
    let norm = normalize_at.and_then(|k| rows.get(k)).map(|r| r.amplitude).filter(|&a| a > 0.0);
    for row in rows.iter_mut() {
        row.amplitude_rel = norm.map_or(row.amplitude, |n| row.amplitude / n);
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapRow {
    pub intensity: f64,
    pub raman_hz: f64,
    pub trap_population: f64,
}

/// Σ ρ_ll over [`trap_set`] at each intensity, solved at the extremum of
/// the `(m_g, m_e)` resonance (searched within ±`half_window` rad/s of its
/// predicted center).
pub fn trap_population_sweep(
    config: &ScanConfig,
    intensities: &[f64],
    resonance: (i32, i32),
    half_window: f64,
) -> Result<Vec<TrapRow>, ScanError> {
    let constants = AtomicConstants::cesium_d1();
    let traps = trap_set(&constants, config.tuned);
    intensities
        .iter()
        .map(|&intensity| {
            let model = ScanModel::new(&config.with_intensity(intensity))?;
            let center = model
                .predicted_center(resonance.0, resonance.1)
                .ok_or_else(|| ScanError::InvalidConfig(format!("no resonance {resonance:?}")))?;
            let raman = if intensity > 0.0 {
                locate_resonance(&model, center, half_window, 21)?
            } else {
                center
            };
            let rho = model.solve_at(raman)?;
            Ok(TrapRow {
                intensity,
                raman_hz: raman / TAU,
                trap_population: traps.iter().map(|s| rho.population(s.slot())).sum(),
            })
        })
        .collect()
}

/// Amplitudes of the (m, m) resonances, m = −3..3, normalized to sum to 1.
/// Missing peaks count as zero. Requires at least `min_peaks` found.
pub fn amplitude_pattern(scan: &SpectrumScan, min_peaks: usize) -> Result<[f64; 7], ScanError> {
    let mut pattern = [0.0; 7];
    let mut found = 0;
    for m in -3..=3 {
        if let Some(p) = scan.peak(m, m) {
            pattern[(m + 3) as usize] = p.amplitude;
            found += 1;
        }
    }
    if found < min_peaks {
        return Err(ScanError::Fit(format!("only {found} labeled (m,m) peaks, need {min_peaks}")));
    }
    let total: f64 = pattern.iter().sum();
    pattern.iter_mut().for_each(|v| *v /= total);
    Ok(pattern)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxationFit {
    pub best_r: f64,
    /// (r, misfit) over the grid.
    pub misfit: Vec<(f64, f64)>,
    pub reference_pattern: [f64; 7],
}

/// Least-squares fit of r to the normalized (m, m) amplitude pattern of a
/// reference spectrum (detuning in Hz, value), sampled in the same
/// observable as `config`.
pub fn fit_relaxation_ratio(
    reference: &[(f64, f64)],
    config: &ScanConfig,
    r_grid: &[f64],
) -> Result<RelaxationFit, ScanError> {
    if r_grid.is_empty() {
        return Err(ScanError::Fit("empty r grid".into()));
    }
    let points: Vec<ScanPoint> = reference
        .iter()
        .map(|&(raman_hz, value)| ScanPoint { raman_hz, value })
        .collect();
    if points.len() < 3 {
        return Err(ScanError::Fit("reference spectrum has fewer than 3 samples".into()));
    }
    let model = ScanModel::new(config)?;
    let step_hz = (points[points.len() - 1].raman_hz - points[0].raman_hz) / (points.len() - 1) as f64;
    let sign = config.observable.resonance_sign();
    let reference_scan = extract_peaks(points, sign, config.peak_threshold, &model.candidates(), step_hz.abs());
    let reference_pattern = amplitude_pattern(&reference_scan, 3)?;

    let mut misfit = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let mut relaxation = config.relaxation;
        relaxation.r = r;
        let trial = ScanConfig {
            relaxation,
            ..config.clone()
        };
        let scan = run_scan(&trial)?;
        let pattern = amplitude_pattern(&scan, 3)?;
        let sq: f64 = pattern.iter().zip(&reference_pattern).map(|(a, b)| (a - b).powi(2)).sum();
        misfit.push((r, sq));
    }
    let best_r = misfit.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
    Ok(RelaxationFit {
        best_r,
        misfit,
        reference_pattern,
    })
}

/// Reads a reference spectrum CSV with header `detuning_hz,value`; lines
/// starting with `#` are skipped.
pub fn read_reference_csv(path: impl AsRef<Path>) -> Result<Vec<(f64, f64)>, ScanError> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| ScanError::Reference(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| ScanError::Reference(e.to_string()))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| ScanError::Reference(format!("missing column `{name}`")))
    };
    let (x, y) = (column("detuning_hz")?, column("value")?);
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| ScanError::Reference(e.to_string()))?;
        let parse = |k: usize| {
            record
                .get(k)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| ScanError::Reference(format!("row {}: bad number", row + 2)))
        };
        out.push((parse(x)?, parse(y)?));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lorentz_points(center: f64, hwhm: f64, depth: f64, span: f64, n: usize) -> Vec<ScanPoint> {
        linspace(center - span, center + span, n)
            .into_iter()
            .map(|x| ScanPoint {
                raman_hz: x,
                value: 1.0 - depth * hwhm * hwhm / ((x - center).powi(2) + hwhm * hwhm),
            })
            .collect()
    }

    #[test]
    fn fwhm_of_synthetic_lorentzian() {
        let pts = lorentz_points(10.0, 50.0, 0.3, 5000.0, 20001);
        let i = detect_peaks(&pts, -1.0, 1e-3)[0];
        let w = measure_fwhm(&pts, i, 1.0, -1.0).unwrap();
        assert!((w - 100.0).abs() < 1.0, "{w}");
    }

    #[test]
    fn parabola_recovers_vertex() {
        let f = |x: f64| 2.0 - 3.0 * (x - 0.3).powi(2);
        let (x, y) = parabola_vertex((0.0, f(0.0)), (0.4, f(0.4)), (1.0, f(1.0)));
        assert!((x - 0.3).abs() < 1e-12 && (y - 2.0).abs() < 1e-12);
    }

    #[test]
    fn overlapping_peaks_have_no_width() {
        let mut pts = lorentz_points(0.0, 50.0, 0.3, 2000.0, 4001);
        for p in pts.iter_mut() {
            p.value -= 0.25 * 2500.0 / ((p.raman_hz - 130.0).powi(2) + 2500.0);
        }
        let peaks = detect_peaks(&pts, -1.0, 1e-3);
        assert_eq!(peaks.len(), 2);
        assert!(peaks.iter().any(|&i| measure_fwhm(&pts, i, 1.0, -1.0).is_none()));
    }

    #[test]
    fn degenerate_candidates_are_ambiguous() {
        let mut peaks = vec![Peak {
            label: PeakLabel::Unknown,
            center_hz: 0.0,
            fwhm_hz: Some(100.0),
            amplitude: 1.0,
            isolated: true,
            index: 1,
        }];
        let cands = vec![((0, 0), 0.0), ((1, 1), 0.0), ((2, 2), 1e6)];
        label_peaks(&mut peaks, &cands, |_| 50.0);
        assert_eq!(peaks[0].label, PeakLabel::Ambiguous { candidates: vec![(0, 0), (1, 1)] });
        label_peaks(&mut peaks, &cands[2..], |_| 50.0);
        assert_eq!(peaks[0].label, PeakLabel::Unknown);
    }

    #[test]
    fn candidates_follow_scheme() {
        assert_eq!(resonance_candidates(PolarizationScheme::SigmaMinusPair).len(), 7);
        let lin = resonance_candidates(PolarizationScheme::lin_parallel());
        assert!(lin.contains(&(-1, 1)) && lin.contains(&(1, -1)) && lin.contains(&(3, 3)));
        assert!(!lin.contains(&(0, 1)));
    }

    #[test]
    fn config_validation() {
        let relax = crate::relaxation::Cell::Cell2.relaxation(0.6).unwrap();
        let c = ScanConfig::new(relax, 0.0, PolarizationScheme::SigmaMinusPair, ExcitedLevel::Fp4, 1.0, 0.0, 0.0);
        assert!(matches!(c.validate(), Err(ScanError::InvalidConfig(_))));
        let mut c = ScanConfig::new(relax, 0.0, PolarizationScheme::SigmaMinusPair, ExcitedLevel::Fp4, 1.0, -1.0, 1.0);
        assert!(c.validate().is_ok());
        c.steps = 2;
        assert!(c.validate().is_err());
    }

    #[test]
    fn trap_sets_match_dark_states_of_sigma_minus() {
        let c = AtomicConstants::cesium_d1();
        let labels = |t| trap_set(&c, t).into_iter().map(|s| s.get()).collect::<Vec<_>>();
        assert_eq!(labels(ExcitedLevel::Fp4), vec![8]);
        assert_eq!(labels(ExcitedLevel::Fp3), vec![1, 8, 9]);
    }
}
