//! Scenario file schema.
//!
//! Files are TOML unless the extension is `.json`. Unknown keys are rejected.
//! Parse errors carry the line and column reported by the parser; semantic
//! errors name the offending key path (`users[1].fading.mean_snr_db`).

use super::CliError;
use crate::cell_sim::{default_catalog, default_classes, CatalogEntry, CellScenario, PowerMode, QosClass};
use crate::fading::{db_to_linear, FadingDistribution};
use crate::profile::UserProfile;
use crate::qos::{QosTarget, DEFAULT_COHERENCE_TIME_S};
use crate::queue_sim::{DelayUnit, DEFAULT_BLOCKS};
use crate::rate_quality::RateQualityCurve;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub system: SystemSpec,
    #[serde(default)]
    pub users: Vec<UserSpec>,
    pub cell: Option<CellSpec>,
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub validate: ValidateSpec,
    pub admit: Option<AdmitSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub total_bandwidth_hz: f64,
    #[serde(default = "default_coherence")]
    pub coherence_time_s: f64,
}

fn default_coherence() -> f64 {
    DEFAULT_COHERENCE_TIME_S
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSpec {
    pub id: String,
    pub delay_bound_s: f64,
    pub violation_prob: f64,
    pub min_rate_bps: f64,
    pub fading: FadingSpec,
    pub curve: CurveSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FadingSpec {
    Rayleigh { mean_snr_db: f64 },
    Constant { snr_db: f64 },
    /// Equiprobable SNR samples, in dB unless `linear = true`.
    Empirical {
        samples: Vec<f64>,
        #[serde(default)]
        linear: bool,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveSpec {
    Logarithmic { scale: f64, ref_rate_bps: f64 },
    ShiftedPower { max_quality: f64, scale: f64, exponent: f64, ref_rate_bps: f64 },
    /// `[rate_bps, quality]` pairs.
    Tabulated { knots: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    pub cell_radius_m: Option<f64>,
    pub user_density_per_m2: Option<f64>,
    pub tx_power_w: Option<f64>,
    pub pathloss_const_db: Option<f64>,
    pub pathloss_exponent: Option<f64>,
    pub noise_psd_w_per_hz: Option<f64>,
    pub reference_bandwidth_hz: Option<f64>,
    pub min_distance_m: Option<f64>,
    pub power_mode: Option<PowerModeSpec>,
    pub seed: Option<u64>,
    pub classes: Option<Vec<ClassSpec>>,
    pub catalog: Option<Vec<CatalogSpec>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerModeSpec {
    PerUser,
    EqualSplit,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub name: String,
    pub delay_bound_s: f64,
    pub violation_prob: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogSpec {
    pub name: String,
    pub min_rate_bps: f64,
    #[serde(default = "one")]
    pub weight: f64,
    pub curve: CurveSpec,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub sse_grid: Option<SseGridSpec>,
    pub service_region: Option<RegionSpec>,
    pub density: Option<DensitySpec>,
}

/// SSE over a delay × probability grid at one mean SNR.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SseGridSpec {
    pub mean_snr_db: f64,
    pub delay_bounds_s: Vec<f64>,
    pub violation_probs: Vec<f64>,
}

/// Two-user service regions over a square SNR grid. The first two entries of
/// `users` supply the QoS targets and minimum rates.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub snr_min_db: f64,
    pub snr_max_db: f64,
    pub snr_step_db: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub densities_per_m2: Vec<f64>,
    pub realizations: usize,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSpec {
    #[serde(default = "default_blocks")]
    pub n_blocks: usize,
    #[serde(default = "one")]
    pub rate_scale: f64,
    #[serde(default)]
    pub delay_unit: DelayUnitSpec,
    /// Blocks written per user when `--trace` is given.
    #[serde(default = "default_trace_blocks")]
    pub trace_blocks: usize,
}

fn default_blocks() -> usize {
    DEFAULT_BLOCKS
}

fn default_trace_blocks() -> usize {
    10_000
}

impl Default for ValidateSpec {
    fn default() -> Self {
        ValidateSpec {
            n_blocks: default_blocks(),
            rate_scale: 1.0,
            delay_unit: DelayUnitSpec::default(),
            trace_blocks: default_trace_blocks(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayUnitSpec {
    #[default]
    CoherenceBlocks,
    Seconds,
}

impl From<DelayUnitSpec> for DelayUnit {
    fn from(s: DelayUnitSpec) -> Self {
        match s {
            DelayUnitSpec::CoherenceBlocks => DelayUnit::CoherenceBlocks,
            DelayUnitSpec::Seconds => DelayUnit::Seconds,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmitSpec {
    pub new_user: UserSpec,
}

fn schema(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Schema(format!("{path}: {msg}"))
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Deserializes `text` as JSON or TOML depending on `path`'s extension.
pub fn parse_as<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, CliError> {
    let shown = path.display();
    if is_json(path) {
        serde_json::from_str(text).map_err(|e| CliError::Schema(format!("{shown}: {e}")))
    } else {
        toml::from_str(text).map_err(|e| CliError::Schema(format!("{shown}: {}", e.to_string().trim_end())))
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let file: ScenarioFile = parse_as(path, &read_text(path)?)?;
        file.check()?;
        Ok(file)
    }

    pub fn parse(path_hint: &Path, text: &str) -> Result<Self, CliError> {
        let file: ScenarioFile = parse_as(path_hint, text)?;
        file.check()?;
        Ok(file)
    }

    /// Range and consistency checks that serde cannot express.
    fn check(&self) -> Result<(), CliError> {
        let b = self.system.total_bandwidth_hz;
        if !(b.is_finite() && b > 0.0) {
            return Err(schema("system.total_bandwidth_hz", format!("must be finite and > 0, got {b}")));
        }
        let t = self.system.coherence_time_s;
        if !(t.is_finite() && t > 0.0) {
            return Err(schema("system.coherence_time_s", format!("must be finite and > 0, got {t}")));
        }
        let mut seen = std::collections::HashSet::new();
        for (i, u) in self.users.iter().enumerate() {
            let key = format!("users[{i}]");
            if !seen.insert(u.id.as_str()) {
                return Err(schema(&format!("{key}.id"), format!("duplicate user id '{}'", u.id)));
            }
            u.check(&key)?;
        }
        if let Some(a) = &self.admit {
            a.new_user.check("admit.new_user")?;
            if seen.contains(a.new_user.id.as_str()) {
                return Err(schema("admit.new_user.id", format!("'{}' is already a user", a.new_user.id)));
            }
        }
        if self.validate.n_blocks < crate::queue_sim::MIN_BLOCKS {
            return Err(schema(
                "validate.n_blocks",
                format!("must be at least {}, got {}", crate::queue_sim::MIN_BLOCKS, self.validate.n_blocks),
            ));
        }
        if !(self.validate.rate_scale.is_finite() && self.validate.rate_scale >= 0.0) {
            return Err(schema("validate.rate_scale", "must be finite and >= 0"));
        }
        if let Some(sweep) = &self.sweep {
            if let Some(r) = &sweep.service_region {
                if self.users.len() < 2 {
                    return Err(schema("sweep.service_region", "needs at least two users for the templates"));
                }
                if !(r.snr_step_db > 0.0 && r.snr_min_db < r.snr_max_db) {
                    return Err(schema("sweep.service_region", "needs snr_min_db < snr_max_db and snr_step_db > 0"));
                }
            }
            if let Some(d) = &sweep.density {
                if d.realizations == 0 {
                    return Err(schema("sweep.density.realizations", "must be at least 1"));
                }
            }
        }
        Ok(())
    }

    /// QoS targets, fading and curves of every listed user, unsolved.
    pub fn user_inputs(&self) -> Result<Vec<UserInput>, CliError> {
        self.users.iter().enumerate().map(|(i, u)| u.to_input(&format!("users[{i}]"))).collect()
    }

    /// Cell parameters with defaults filled in; `seed` overrides the file.
    pub fn cell_scenario(&self, seed: Option<u64>) -> Result<CellScenario, CliError> {
        let spec = self.cell.clone().unwrap_or(CellSpec {
            cell_radius_m: None,
            user_density_per_m2: None,
            tx_power_w: None,
            pathloss_const_db: None,
            pathloss_exponent: None,
            noise_psd_w_per_hz: None,
            reference_bandwidth_hz: None,
            min_distance_m: None,
            power_mode: None,
            seed: None,
            classes: None,
            catalog: None,
        });
        let d = CellScenario::default();
        let classes = match &spec.classes {
            None => default_classes(),
            Some(list) => list
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let target = QosTarget::new(c.delay_bound_s, c.violation_prob)
                        .map_err(|e| schema(&format!("cell.classes[{i}]"), e))?;
                    Ok(QosClass { name: c.name.clone(), target, fraction: c.fraction })
                })
                .collect::<Result<_, CliError>>()?,
        };
        let catalog = match &spec.catalog {
            None => default_catalog(),
            Some(list) => list
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let key = format!("cell.catalog[{i}]");
                    let curve = c.curve.build(c.min_rate_bps).map_err(|e| schema(&format!("{key}.curve"), e))?;
                    Ok(CatalogEntry { name: c.name.clone(), curve, weight: c.weight })
                })
                .collect::<Result<_, CliError>>()?,
        };
        let scenario = CellScenario {
            cell_radius_m: spec.cell_radius_m.unwrap_or(d.cell_radius_m),
            user_density_per_m2: spec.user_density_per_m2.unwrap_or(d.user_density_per_m2),
            tx_power_w: spec.tx_power_w.unwrap_or(d.tx_power_w),
            pathloss_const_db: spec.pathloss_const_db.unwrap_or(d.pathloss_const_db),
            pathloss_exponent: spec.pathloss_exponent.unwrap_or(d.pathloss_exponent),
            noise_psd_w_per_hz: spec.noise_psd_w_per_hz.unwrap_or(d.noise_psd_w_per_hz),
            total_bandwidth_hz: self.system.total_bandwidth_hz,
            reference_bandwidth_hz: spec.reference_bandwidth_hz,
            min_distance_m: spec.min_distance_m.unwrap_or(d.min_distance_m),
            power_mode: match spec.power_mode {
                None | Some(PowerModeSpec::PerUser) => PowerMode::PerUser,
                Some(PowerModeSpec::EqualSplit) => PowerMode::EqualSplit,
            },
            coherence_time_s: self.system.coherence_time_s,
            classes,
            catalog,
            seed: seed.or(spec.seed).unwrap_or(d.seed),
        };
        scenario.validate().map_err(|e| schema("cell", e))?;
        Ok(scenario)
    }
}

/// A user as read from a file, before its QoS constants are solved.
#[derive(Debug, Clone)]
pub struct UserInput {
    pub id: String,
    pub target: QosTarget,
    pub dist: FadingDistribution,
    pub curve: RateQualityCurve,
}

impl UserInput {
    pub fn solve(&self, coherence_time_s: f64) -> crate::Result<UserProfile> {
        UserProfile::new(self.id.clone(), self.target, self.dist.clone(), self.curve.clone(), coherence_time_s)
    }
}

impl UserSpec {
    fn check(&self, key: &str) -> Result<(), CliError> {
        self.to_input(key).map(|_| ())
    }

    pub fn to_input(&self, key: &str) -> Result<UserInput, CliError> {
        if self.id.is_empty() || self.id.contains([',', '"', '\n', '/', '\\']) {
            return Err(schema(&format!("{key}.id"), "must be non-empty without commas, quotes, slashes or newlines"));
        }
        let target = QosTarget::new(self.delay_bound_s, self.violation_prob).map_err(|e| schema(key, e))?;
        let dist = self.fading.build().map_err(|e| schema(&format!("{key}.fading"), e))?;
        let curve = self.curve.build(self.min_rate_bps).map_err(|e| schema(&format!("{key}.curve"), e))?;
        Ok(UserInput { id: self.id.clone(), target, dist, curve })
    }
}

impl FadingSpec {
    pub fn build(&self) -> crate::Result<FadingDistribution> {
        match self {
            FadingSpec::Rayleigh { mean_snr_db } => FadingDistribution::rayleigh_db(*mean_snr_db),
            FadingSpec::Constant { snr_db } => FadingDistribution::constant(db_to_linear(*snr_db)),
            FadingSpec::Empirical { samples, linear } => {
                let lin = if *linear { samples.clone() } else { samples.iter().map(|&s| db_to_linear(s)).collect() };
                FadingDistribution::empirical(lin)
            }
        }
    }
}

impl CurveSpec {
    pub fn build(&self, min_rate_bps: f64) -> crate::Result<RateQualityCurve> {
        match *self {
            CurveSpec::Logarithmic { scale, ref_rate_bps } => {
                RateQualityCurve::logarithmic(scale, ref_rate_bps, min_rate_bps)
            }
            CurveSpec::ShiftedPower { max_quality, scale, exponent, ref_rate_bps } => {
                RateQualityCurve::shifted_power(max_quality, scale, exponent, ref_rate_bps, min_rate_bps)
            }
            CurveSpec::Tabulated { ref knots } => {
                RateQualityCurve::tabulated(knots.iter().map(|k| (k[0], k[1])).collect(), min_rate_bps)
            }
        }
    }
}
