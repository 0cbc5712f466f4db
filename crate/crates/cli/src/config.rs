//! Run configuration: TOML (or JSON) file with one section per module.

use std::fmt;
use std::path::{Path, PathBuf};

use franson_dwdm::{
    DeltaSearch, DetectorModel, EdgeRule, Error, GridSpec, InterferometerPair, OffsetMode,
    OptimizationProblem, SellmeierModel, SellmeierTerm, SourceSpec, SpectralShape,
};
use serde::Deserialize;

/// A rejected configuration; `key` is the dotted path of the offending entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn at(key: &str, message: impl Into<String>) -> Self {
        Self {
            key: Some(key.to_owned()),
            message: message.into(),
        }
    }

    fn whole(message: impl Into<String>) -> Self {
        Self {
            key: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.key {
            Some(k) => write!(f, "config error at `{k}`: {}", self.message),
            None => write!(f, "config error: {}", self.message),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub source: SourceSection,
    #[serde(default)]
    pub fiber: FiberSection,
    #[serde(default)]
    pub interferometers: InterferometerSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub optimize: OptimizeSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// `[lo, hi]` in nm, or `"fwhm"` for the half-maximum band of the source.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum BandSetting {
    Range([f64; 2]),
    Keyword(Keyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Keyword {
    Fwhm,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceSection {
    pub pump_wavelength_nm: f64,
    pub shape: SpectralShape,
    pub fwhm_nm: f64,
    pub usable_band_nm: BandSetting,
}

impl Default for SourceSection {
    fn default() -> Self {
        let d = SourceSpec::default();
        let (lo, hi) = d.usable_band_nm.expect("default source has a usable band");
        Self {
            pump_wavelength_nm: d.pump_wavelength_nm,
            shape: d.shape,
            fwhm_nm: d.fwhm_nm,
            usable_band_nm: BandSetting::Range([lo, hi]),
        }
    }
}

/// Either a built-in `model`, or custom `terms` (`[B, C]` pairs, C in µm²)
/// with their `validity_nm`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiberSection {
    pub model: Option<String>,
    pub name: Option<String>,
    pub terms: Option<Vec<[f64; 2]>>,
    pub validity_nm: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PhaseOffsetSetting {
    Value(f64),
    Keyword(AutoKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoKeyword {
    Auto,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterferometerSection {
    pub delta_l_b_m: f64,
    pub detuning_um: f64,
    /// May instead be given under `[optimize]`, but not in both places.
    pub phase_offset: Option<PhaseOffsetSetting>,
    /// Alice wavelength where the phase is referenced; defaults to 2λ_p.
    pub calibration_nm: Option<f64>,
}

impl Default for InterferometerSection {
    fn default() -> Self {
        Self {
            delta_l_b_m: 0.067,
            detuning_um: 0.0,
            phase_offset: None,
            calibration_nm: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[allow(non_snake_case)]
pub struct GridSection {
    pub anchor_THz: f64,
    pub spacing_GHz: f64,
    /// Defaults to the spacing.
    pub passband_GHz: Option<f64>,
    pub edge_rule: EdgeRule,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = GridSpec::default();
        Self {
            anchor_THz: g.anchor_thz,
            spacing_GHz: g.spacing_ghz,
            passband_GHz: None,
            edge_rule: EdgeRule::Center,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub sweep_step_nm: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self { sweep_step_nm: 0.1 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeSection {
    pub delta_min_um: f64,
    pub delta_max_um: f64,
    pub delta_step_um: f64,
    pub phase_offset: Option<PhaseOffsetSetting>,
    pub threshold_phase_rad: f64,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        let d = DeltaSearch::default();
        Self {
            delta_min_um: d.min_m * 1e6,
            delta_max_um: d.max_m * 1e6,
            delta_step_um: d.step_m * 1e6,
            phase_offset: None,
            threshold_phase_rad: 0.14,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[allow(non_snake_case)]
pub struct SimulationSection {
    /// Pairs generated per channel pair.
    pub pairs: u64,
    pub seed: u64,
    pub shards: usize,
    pub eta_A: f64,
    pub eta_B: f64,
    pub dark_count_prob: f64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            pairs: 1_000_000,
            seed: 1,
            shards: 4,
            eta_A: 0.20,
            eta_B: 0.25,
            dark_count_prob: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub format: Format,
    pub header_timestamp: bool,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            format: Format::Csv,
            header_timestamp: true,
            out: None,
            svg: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationSettings {
    pub pairs: u64,
    pub seed: u64,
    pub shards: usize,
    pub alice: DetectorModel,
    pub bob: DetectorModel,
}

/// A configuration translated into validated library types.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub problem: OptimizationProblem,
    pub detuning_m: f64,
    pub offset: OffsetMode,
    pub sweep_step_nm: f64,
    pub simulation: SimulationSettings,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::whole(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text).map_err(|e| ConfigError::whole(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| ConfigError::whole(format!("{}: {e}", path.display())))
        }
    }

    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let source = self.source_spec()?;
        let fiber = self.fiber_model()?;
        let grid = self.grid_spec()?;

        let a = &self.analysis;
        let threshold = self.optimize.threshold_phase_rad;
        if !(threshold.is_finite() && threshold >= 0.0) {
            return Err(ConfigError::at("optimize.threshold_phase_rad", "must be a finite value ≥ 0"));
        }
        if !(a.sweep_step_nm.is_finite() && a.sweep_step_nm > 0.0) {
            return Err(ConfigError::at("analysis.sweep_step_nm", "must be > 0"));
        }

        let o = &self.optimize;
        let delta_search = DeltaSearch {
            min_m: o.delta_min_um / 1e6,
            max_m: o.delta_max_um / 1e6,
            step_m: o.delta_step_um / 1e6,
        };
        delta_search.validate().map_err(|e| {
            let key = match &e {
                Error::InvalidParameter { name: "delta_step", .. } => "optimize.delta_step_um",
                _ => "optimize.delta_min_um",
            };
            ConfigError::at(key, e.to_string())
        })?;

        let i = &self.interferometers;
        let detuning_m = i.detuning_um / 1e6;
        InterferometerPair::new(i.delta_l_b_m, detuning_m, fiber.clone()).map_err(|e| {
            let key = match &e {
                Error::InvalidParameter { name: "delta_l_b", .. } => "interferometers.delta_l_b_m",
                _ => "interferometers.detuning_um",
            };
            ConfigError::at(key, e.to_string())
        })?;
        let (setting, key) = match (i.phase_offset, self.optimize.phase_offset) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::at(
                    "optimize.phase_offset",
                    "already set under [interferometers]; give it in one place only",
                ))
            }
            (Some(s), None) => (s, "interferometers.phase_offset"),
            (None, Some(s)) => (s, "optimize.phase_offset"),
            (None, None) => (PhaseOffsetSetting::Value(0.0), "interferometers.phase_offset"),
        };
        let offset = match setting {
            PhaseOffsetSetting::Value(v) if v.is_finite() => OffsetMode::Fixed(v),
            PhaseOffsetSetting::Value(_) => return Err(ConfigError::at(key, "must be finite or \"auto\"")),
            PhaseOffsetSetting::Keyword(AutoKeyword::Auto) => OffsetMode::Auto,
        };
        if let Some(c) = i.calibration_nm {
            if !(c.is_finite() && c > source.pump_wavelength_nm) {
                return Err(ConfigError::at(
                    "interferometers.calibration_nm",
                    format!("must exceed the pump wavelength {} nm", source.pump_wavelength_nm),
                ));
            }
        }

        let s = &self.simulation;
        if s.pairs == 0 {
            return Err(ConfigError::at("simulation.pairs", "must be > 0"));
        }
        if s.shards == 0 {
            return Err(ConfigError::at("simulation.shards", "must be ≥ 1"));
        }
        let alice = DetectorModel::new(s.eta_A, s.dark_count_prob).map_err(|e| detector_key(e, "simulation.eta_A"))?;
        let bob = DetectorModel::new(s.eta_B, s.dark_count_prob).map_err(|e| detector_key(e, "simulation.eta_B"))?;

        let mut problem = OptimizationProblem::new(source, fiber);
        problem.grid = grid;
        problem.delta_l_b = i.delta_l_b_m;
        problem.threshold_phase = threshold;
        problem.delta_search = delta_search;
        problem.offset_mode = offset;
        problem.edge_rule = self.grid.edge_rule;
        problem.reference_nm = i.calibration_nm;
        problem.validate().map_err(|e| ConfigError::whole(e.to_string()))?;

        Ok(Resolved {
            problem,
            detuning_m,
            offset,
            sweep_step_nm: a.sweep_step_nm,
            simulation: SimulationSettings {
                pairs: s.pairs,
                seed: s.seed,
                shards: s.shards,
                alice,
                bob,
            },
            output: self.output.clone(),
        })
    }

    fn source_spec(&self) -> Result<SourceSpec, ConfigError> {
        let s = &self.source;
        let spec = SourceSpec {
            pump_wavelength_nm: s.pump_wavelength_nm,
            shape: s.shape,
            fwhm_nm: s.fwhm_nm,
            usable_band_nm: match s.usable_band_nm {
                BandSetting::Range([lo, hi]) => Some((lo, hi)),
                BandSetting::Keyword(Keyword::Fwhm) => None,
            },
        };
        spec.validate().map_err(|e| {
            let key = match &e {
                Error::InvalidParameter { name: "pump_wavelength", .. } => "source.pump_wavelength_nm",
                Error::InvalidParameter { name: "fwhm", .. } => "source.fwhm_nm",
                _ => "source.usable_band_nm",
            };
            ConfigError::at(key, e.to_string())
        })?;
        Ok(spec)
    }

    fn fiber_model(&self) -> Result<SellmeierModel, ConfigError> {
        let f = &self.fiber;
        match (&f.model, &f.terms) {
            (Some(_), Some(_)) => Err(ConfigError::at("fiber.terms", "give either `model` or `terms`, not both")),
            (Some(name), None) => {
                if f.validity_nm.is_some() {
                    return Err(ConfigError::at("fiber.validity_nm", "only allowed with custom `terms`"));
                }
                SellmeierModel::builtin(name).ok_or_else(|| {
                    ConfigError::at(
                        "fiber.model",
                        format!("unknown model `{name}`; built-ins: {}", SellmeierModel::BUILTIN_NAMES.join(", ")),
                    )
                })
            }
            (None, Some(terms)) => {
                let [lo, hi] = f
                    .validity_nm
                    .ok_or_else(|| ConfigError::at("fiber.validity_nm", "required with custom `terms`"))?;
                let terms = terms.iter().map(|&[b, c]| SellmeierTerm::new(b, c)).collect();
                let name = f.name.clone().unwrap_or_else(|| "custom".to_owned());
                SellmeierModel::new(name, terms, (lo, hi)).map_err(|e| {
                    let key = match &e {
                        Error::InvalidParameter { name: "validity_range", .. } => "fiber.validity_nm",
                        _ => "fiber.terms",
                    };
                    ConfigError::at(key, e.to_string())
                })
            }
            (None, None) => Ok(SellmeierModel::fused_silica()),
        }
    }

    fn grid_spec(&self) -> Result<GridSpec, ConfigError> {
        let g = &self.grid;
        let spec = GridSpec {
            anchor_thz: g.anchor_THz,
            spacing_ghz: g.spacing_GHz,
            passband_ghz: g.passband_GHz.unwrap_or(g.spacing_GHz),
        };
        spec.validate().map_err(|e| {
            let key = match &e {
                Error::InvalidParameter { name, .. } => format!("grid.{name}"),
                _ => "grid".to_owned(),
            };
            ConfigError::at(&key, e.to_string())
        })?;
        Ok(spec)
    }
}

fn detector_key(e: Error, efficiency_key: &str) -> ConfigError {
    match &e {
        Error::InvalidParameter { name: "efficiency", .. } => ConfigError::at(efficiency_key, e.to_string()),
        _ => ConfigError::at("simulation.dark_count_prob", e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Resolved, ConfigError> {
        toml::from_str::<RunConfig>(text)
            .map_err(|e| ConfigError::whole(e.to_string()))?
            .resolve()
    }

    #[test]
    fn empty_file_gives_library_defaults() {
        let r = parse("").unwrap();
        assert_eq!(r.problem.source, SourceSpec::default());
        assert_eq!(r.problem.grid, GridSpec::default());
        assert_eq!(r.offset, OffsetMode::Fixed(0.0));
        assert_eq!(r.problem.delta_search, DeltaSearch::default());
    }

    #[test]
    fn full_file_round_trips_units() {
        let r = parse(
            r#"
            [source]
            pump_wavelength_nm = 770.0
            shape = "gaussian"
            fwhm_nm = 40.0
            usable_band_nm = "fwhm"
            [fiber]
            model = "fused_silica"
            [interferometers]
            delta_l_b_m = 0.05
            detuning_um = -12.0
            phase_offset = "auto"
            calibration_nm = 1545.0
            [grid]
            anchor_THz = 193.1
            spacing_GHz = 50.0
            passband_GHz = 40.0
            edge_rule = "edges"
            [optimize]
            threshold_phase_rad = 0.2
            delta_min_um = -20
            delta_max_um = 5
            delta_step_um = 0.25
            [simulation]
            pairs = 1000
            seed = 9
            shards = 2
            eta_A = 0.5
            eta_B = 0.6
            dark_count_prob = 1e-4
            [output]
            format = "json"
            header_timestamp = false
            "#,
        )
        .unwrap();
        assert_eq!(r.problem.source.usable_band_nm, None);
        assert_eq!(r.problem.source.shape, SpectralShape::Gaussian);
        assert_eq!(r.offset, OffsetMode::Auto);
        assert!((r.detuning_m + 12e-6).abs() < 1e-18);
        assert_eq!(r.problem.grid.passband_ghz, 40.0);
        assert_eq!(r.problem.edge_rule, EdgeRule::Edges);
        assert_eq!(r.problem.threshold_phase, 0.2);
        assert!((r.problem.delta_search.step_m - 0.25e-6).abs() < 1e-18);
        assert_eq!(r.problem.reference_nm, Some(1545.0));
        assert_eq!(r.simulation.bob.efficiency, 0.6);
        assert_eq!(r.output.format, Format::Json);
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let e = toml::from_str::<RunConfig>("[grid]\nspacing_ghz = 100.0\n").unwrap_err();
        assert!(e.to_string().contains("spacing_ghz"), "{e}");
        let e = toml::from_str::<RunConfig>("[colour]\n").unwrap_err();
        assert!(e.to_string().contains("colour"), "{e}");
    }

    #[test]
    fn invalid_values_name_their_key() {
        let cases = [
            ("[grid]\npassband_GHz = 150.0\n", "grid.passband_GHz"),
            ("[source]\nfwhm_nm = -1.0\n", "source.fwhm_nm"),
            ("[source]\nusable_band_nm = [700.0, 800.0]\n", "source.usable_band_nm"),
            ("[optimize]\ndelta_step_um = 0.0\n", "optimize.delta_step_um"),
            ("[interferometers]\ndetuning_um = -70000.0\n", "interferometers.detuning_um"),
            ("[simulation]\neta_B = 1.5\n", "simulation.eta_B"),
            ("[simulation]\npairs = 0\n", "simulation.pairs"),
            ("[fiber]\nmodel = \"glass\"\n", "fiber.model"),
            ("[fiber]\nterms = [[0.7, 0.01]]\n", "fiber.validity_nm"),
            ("[optimize]\nthreshold_phase_rad = -0.1\n", "optimize.threshold_phase_rad"),
            (
                "[interferometers]\nphase_offset = 0.1\n[optimize]\nphase_offset = \"auto\"\n",
                "optimize.phase_offset",
            ),
        ];
        for (text, key) in cases {
            let e = parse(text).unwrap_err();
            assert_eq!(e.key.as_deref(), Some(key), "{text}: {e}");
        }
    }

    #[test]
    fn phase_offset_may_live_under_optimize() {
        let r = parse("[optimize]\nphase_offset = \"auto\"\n").unwrap();
        assert_eq!(r.offset, OffsetMode::Auto);
        let r = parse("[optimize]\nphase_offset = -0.25\n").unwrap();
        assert_eq!(r.offset, OffsetMode::Fixed(-0.25));
        assert!(parse("[optimize]\nphase_offset = \"manual\"\n").is_err());
    }

    #[test]
    fn custom_fiber_terms() {
        let r = parse("[fiber]\nname = \"toy\"\nterms = [[0.7, 0.0047]]\nvalidity_nm = [500.0, 2000.0]\n").unwrap();
        assert_eq!(r.problem.fiber.name(), "toy");
        assert_eq!(r.problem.fiber.terms().len(), 1);
    }
}
