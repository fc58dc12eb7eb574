//! Run configuration: a TOML document with unit-suffixed keys, overridable
//! per key from `CPTSIM_<SECTION>__<KEY>` environment variables.

use std::f64::consts::TAU;
use std::path::PathBuf;

use cpt_core::atomic_model::ExcitedLevel;
use cpt_core::coupling::PolarizationScheme;
use cpt_core::relaxation::{Cell, M1Model, RelaxationConfig};
use cpt_core::scan::{IntensityMode, ObservableKind, ScanConfig};
use cpt_core::solver::SolveOptions;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const ENV_PREFIX: &str = "CPTSIM_";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds the randomized oracle configurations of `validate`.
    #[serde(default)]
    pub seed: u64,
    pub cell: CellSection,
    pub field: FieldSection,
    pub light: LightSection,
    pub scan: ScanSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lineshape: Option<LineshapeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSection>,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub validate: ValidateSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellName {
    Cell1,
    Cell2,
    Cell3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum M1Choice {
    #[default]
    Balanced,
    RowNormalized,
    RowNormalizedInterManifold,
}

/// Either a named cell (whose rates may still be overridden) or explicit
/// rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<CellName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_p_khz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_ghz: Option<f64>,
    pub r: f64,
    #[serde(default)]
    pub m1_model: M1Choice,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub b_ut: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeChoice {
    SigmaMinus,
    SigmaPlus,
    LinParallel,
    LinPerpendicular,
    /// Linear pair at `theta_deg`.
    LinLin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntensityChoice {
    #[default]
    PerLeg,
    Total,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightSection {
    pub scheme: SchemeChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_deg: Option<f64>,
    /// F' of the excited level the light is tuned to (3 or 4).
    pub excited_f: i32,
    #[serde(default)]
    pub common_offset_mhz: f64,
    pub intensity_uw_per_mm2: f64,
    #[serde(default)]
    pub intensity_mode: IntensityChoice,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableChoice {
    #[default]
    ExcitedPopulation,
    Transmittance,
}

fn default_steps() -> usize {
    601
}
fn default_refine() -> usize {
    3
}
fn default_threshold() -> f64 {
    1e-3
}
fn default_alpha() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub start_khz: f64,
    pub stop_khz: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_refine")]
    pub refine_levels: usize,
    #[serde(default = "default_threshold")]
    pub peak_threshold: f64,
    #[serde(default)]
    pub observable: ObservableChoice,
    /// Absorption scale of the transmittance observable.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// When set, only ±this window around each resonance predicted inside
    /// [start, stop] is sampled (overlapping windows merge), with `steps`
    /// points per window. Needed when resonances are much narrower than
    /// their spacing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focus_half_window_khz: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Intensity,
    TrapPopulation,
}

fn default_trap_window() -> f64 {
    3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub kind: SweepKind,
    pub intensities_uw_per_mm2: Vec<f64>,
    /// Intensity whose amplitude every curve is divided by.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalize_at_uw_per_mm2: Option<f64>,
    /// Search window for the resonance extremum of trap sweeps.
    #[serde(default = "default_trap_window")]
    pub half_window_khz: f64,
    pub curves: Vec<CurveSection>,
}

/// One curve of a sweep; scheme and level replace those of `[light]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSection {
    pub name: String,
    pub scheme: SchemeChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_deg: Option<f64>,
    pub excited_f: i32,
    /// (m_g, m_e).
    pub resonance: [i32; 2],
}

fn default_half_widths() -> f64 {
    12.0
}
fn default_lineshape_steps() -> usize {
    241
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineshapeSection {
    pub resonance: [i32; 2],
    /// Half span in units of the analytic Δ_width.
    #[serde(default = "default_half_widths")]
    pub half_window_widths: f64,
    #[serde(default = "default_lineshape_steps")]
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<PathBuf>,
    pub r_grid: Vec<f64>,
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    /// Multiplies every validation bound; below 1 tightens.
    #[serde(default = "default_scale")]
    pub tolerance_scale: f64,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self { tolerance_scale: 1.0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// Parses `text` after applying the environment overrides in `env`.
pub fn parse(text: &str, env: impl IntoIterator<Item = (String, String)>) -> Result<RunConfig, CliError> {
    let overrides: Vec<(String, String)> = env
        .into_iter()
        .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|path| (path.to_string(), v)))
        .collect();
    if overrides.is_empty() {
        // Direct deserialization keeps source spans in every error.
        return toml::from_str(text).map_err(|e: toml::de::Error| CliError::Config(e.to_string()));
    }
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    for (path, value) in &overrides {
        apply_override(&mut table, path, value)?;
    }
    table
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
}

/// `LIGHT__INTENSITY_UW_PER_MM2=3` sets `light.intensity_uw_per_mm2 = 3`.
/// Values are read as TOML literals, falling back to a plain string.
fn apply_override(table: &mut toml::Table, path: &str, raw: &str) -> Result<(), CliError> {
    let keys: Vec<String> = path.split("__").map(|k| k.to_ascii_lowercase()).collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("malformed override variable {ENV_PREFIX}{path}")));
    }
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let (last, parents) = keys.split_last().unwrap();
    let mut node = table;
    for key in parents {
        let entry = node
            .entry(key.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override {ENV_PREFIX}{path}: `{key}` is not a table")))?;
    }
    node.insert(last.clone(), value);
    Ok(())
}

pub fn scheme(choice: SchemeChoice, theta_deg: Option<f64>) -> Result<PolarizationScheme, CliError> {
    Ok(match (choice, theta_deg) {
        (SchemeChoice::SigmaMinus, None) => PolarizationScheme::SigmaMinusPair,
        (SchemeChoice::SigmaPlus, None) => PolarizationScheme::SigmaPlusPair,
        (SchemeChoice::LinParallel, None) => PolarizationScheme::lin_parallel(),
        (SchemeChoice::LinPerpendicular, None) => PolarizationScheme::lin_perpendicular(),
        (SchemeChoice::LinLin, Some(theta)) if theta.is_finite() => PolarizationScheme::lin_lin(theta.to_radians()),
        (SchemeChoice::LinLin, _) => return Err(CliError::Config("scheme lin_lin needs a finite theta_deg".into())),
        (_, Some(_)) => return Err(CliError::Config("theta_deg only applies to scheme lin_lin".into())),
    })
}

pub fn excited_level(f: i32) -> Result<ExcitedLevel, CliError> {
    ExcitedLevel::from_f(f).map_err(|_| CliError::Config(format!("excited_f must be 3 or 4, got {f}")))
}

impl RunConfig {
    pub fn relaxation(&self) -> Result<RelaxationConfig, CliError> {
        let c = &self.cell;
        let named = c.name.map(|n| match n {
            CellName::Cell1 => Cell::Cell1,
            CellName::Cell2 => Cell::Cell2,
            CellName::Cell3 => Cell::Cell3,
        });
        let gamma_p_khz = c
            .gamma_p_khz
            .or(named.map(Cell::gamma_p_khz))
            .ok_or_else(|| CliError::Config("[cell] needs `name` or `gamma_p_khz`".into()))?;
        let gamma_ghz = c
            .gamma_ghz
            .or(named.map(Cell::gamma_ghz))
            .ok_or_else(|| CliError::Config("[cell] needs `name` or `gamma_ghz`".into()))?;
        let m1 = match c.m1_model {
            M1Choice::Balanced => M1Model::Balanced,
            M1Choice::RowNormalized => M1Model::RowNormalized { within_manifold: true },
            M1Choice::RowNormalizedInterManifold => M1Model::RowNormalized { within_manifold: false },
        };
        RelaxationConfig::new(TAU * gamma_p_khz * 1e3, TAU * gamma_ghz * 1e9, c.r)
            .map(|r| r.with_m1(m1))
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// The scan described by `[cell]`, `[field]`, `[light]` and `[scan]`.
    pub fn scan_config(&self) -> Result<ScanConfig, CliError> {
        let light = &self.light;
        let mut config = ScanConfig::new(
            self.relaxation()?,
            self.field.b_ut * 1e-6,
            scheme(light.scheme, light.theta_deg)?,
            excited_level(light.excited_f)?,
            light.intensity_uw_per_mm2,
            TAU * self.scan.start_khz * 1e3,
            TAU * self.scan.stop_khz * 1e3,
        );
        config.common_offset = TAU * light.common_offset_mhz * 1e6;
        config.intensity_mode = match light.intensity_mode {
            IntensityChoice::PerLeg => IntensityMode::PerLeg,
            IntensityChoice::Total => IntensityMode::Total,
        };
        config.steps = self.scan.steps;
        config.refine_levels = self.scan.refine_levels;
        config.peak_threshold = self.scan.peak_threshold;
        config.observable = match self.scan.observable {
            ObservableChoice::ExcitedPopulation => ObservableKind::ExcitedPopulation,
            ObservableChoice::Transmittance => ObservableKind::Transmittance { alpha: self.scan.alpha },
        };
        config.solve = self.solver;
        if !(self.field.b_ut.is_finite() && self.field.b_ut >= 0.0) {
            return Err(CliError::Config(format!("field b_ut must be finite and non-negative, got {}", self.field.b_ut)));
        }
        config.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(config)
    }

    /// The scan for one sweep curve: `[light]` with the curve's scheme and level.
    pub fn curve_config(&self, curve: &CurveSection) -> Result<ScanConfig, CliError> {
        let mut config = self.scan_config()?;
        config.scheme = scheme(curve.scheme, curve.theta_deg)?;
        config.tuned = excited_level(curve.excited_f)?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [cell]
        name = "cell2"
        r = 0.6
        [field]
        b_ut = 22.7
        [light]
        scheme = "sigma_minus"
        excited_f = 4
        intensity_uw_per_mm2 = 6.6
        [scan]
        start_khz = -10
        stop_khz = 10
    "#;

    #[test]
    fn named_cell_supplies_rates() {
        let c = parse(MINIMAL, []).unwrap();
        let relax = c.relaxation().unwrap();
        assert!((relax.gamma_p / TAU - 107.0).abs() < 1e-9);
        assert!((relax.gamma / TAU - 0.51e9).abs() < 1e-3);
        let scan = c.scan_config().unwrap();
        assert_eq!(scan.steps, 601);
        assert!((scan.field - 22.7e-6).abs() < 1e-18);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("b_ut = 22.7", "b_ut = 22.7\nb_gauss = 0.2");
        let err = parse(&text, []).unwrap_err();
        assert!(err.to_string().contains("b_gauss"), "{err}");
    }

    #[test]
    fn unitless_field_key_is_rejected() {
        let text = MINIMAL.replace("b_ut = 22.7", "b = 22.7");
        assert!(parse(&text, []).is_err());
    }

    #[test]
    fn parse_errors_carry_line_and_column() {
        let err = parse("[cell]\nr = = 1\n", []).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn environment_overrides_any_key() {
        let env = [
            ("CPTSIM_LIGHT__INTENSITY_UW_PER_MM2".to_string(), "3.5".to_string()),
            ("CPTSIM_SCAN__OBSERVABLE".to_string(), "transmittance".to_string()),
            ("UNRELATED".to_string(), "x".to_string()),
        ];
        let c = parse(MINIMAL, env).unwrap();
        assert_eq!(c.light.intensity_uw_per_mm2, 3.5);
        assert_eq!(c.scan.observable, ObservableChoice::Transmittance);
    }

    #[test]
    fn unknown_override_is_rejected() {
        let env = [("CPTSIM_LIGHT__COLOR".to_string(), "blue".to_string())];
        assert!(parse(MINIMAL, env).is_err());
    }

    #[test]
    fn empty_range_is_a_config_error() {
        let text = MINIMAL.replace("stop_khz = 10", "stop_khz = -10");
        let err = parse(&text, []).unwrap().scan_config().unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn theta_requires_lin_lin() {
        assert!(scheme(SchemeChoice::SigmaMinus, Some(10.0)).is_err());
        assert!(scheme(SchemeChoice::LinLin, None).is_err());
        assert_eq!(
            scheme(SchemeChoice::LinLin, Some(90.0)).unwrap().theta(),
            PolarizationScheme::lin_perpendicular().theta()
        );
    }
}
