//! JSON scenario configuration. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{
    generate_multibeam_channel, load_channel, BeamGeometry, ChannelMatrix, CsiErrorModel, NoiseModel,
};
use crate::linkmetrics::{grid_four_coloring, ModcodTable, PowerConvention, ReuseScheme, ThroughputParams};
use crate::precoding::{Normalization, OptlParams, PacParams};
use crate::seed::derive_seed;
use crate::{Error, Result};

/// Seed stream tags below the per-trial indices.
pub(crate) const CHANNEL_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSource {
    /// Square beam lattice, one user per beam centre.
    Grid {
        rows: usize,
        cols: usize,
        spacing_deg: f64,
        three_db_half_angle_deg: f64,
        #[serde(default = "one")]
        peak_gain: f64,
    },
    Geometry {
        geometry: BeamGeometry,
        /// Optional colour per beam for four-colour baselines.
        #[serde(default)]
        colors: Option<Vec<u8>>,
    },
    File {
        path: PathBuf,
        #[serde(default)]
        colors: Option<Vec<u8>>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecoderKind {
    /// Identity mapping of user k onto beam k.
    None,
    Zf,
    Mmse,
    MmsePac,
    Optl,
}

impl PrecoderKind {
    pub fn label(self) -> &'static str {
        match self {
            PrecoderKind::None => "NoPrecoding",
            PrecoderKind::Zf => "ZF",
            PrecoderKind::Mmse => "MMSE",
            PrecoderKind::MmsePac => "MMSE-PAC",
            PrecoderKind::Optl => "OPTL",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecoderSpec {
    pub kind: PrecoderKind,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub normalization: Option<Normalization>,
    /// MMSE-PAC per-antenna budget.
    #[serde(default)]
    pub phi: Option<f64>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub max_iterations: Option<usize>,
    /// OPTL SNIR target in dB, shared by all users.
    #[serde(default)]
    pub target_snir_db: Option<f64>,
    #[serde(default)]
    pub power_cap: Option<f64>,
}

impl PrecoderSpec {
    pub fn new(kind: PrecoderKind) -> Self {
        Self {
            kind,
            label: None,
            normalization: None,
            phi: None,
            tolerance: None,
            max_iterations: None,
            target_snir_db: None,
            power_cap: None,
        }
    }

    pub fn scheme_label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        let mut s = format!("FFR-{}", self.kind.label());
        match self.normalization {
            None => {}
            Some(Normalization::UnitRow) => s.push_str("-UnitRow"),
            Some(Normalization::Pac(_)) => s.push_str("-PACnorm"),
            Some(Normalization::Mpc(_)) => s.push_str("-MPC"),
            Some(Normalization::Par(_)) => s.push_str("-PAR"),
        }
        s
    }

    /// PAC parameters with the dual variables started at `initial_dual`.
    pub fn pac_params(&self, initial_dual: f64) -> PacParams {
        let d = PacParams::default();
        PacParams {
            phi: self.phi.unwrap_or(d.phi),
            tolerance: self.tolerance.unwrap_or(d.tolerance),
            max_iterations: self.max_iterations.unwrap_or(d.max_iterations),
            initial_dual,
        }
    }

    pub fn optl_params(&self, users: usize) -> OptlParams {
        let gamma = crate::linkmetrics::from_db(self.target_snir_db.unwrap_or(10.0));
        let mut p = OptlParams::with_targets(vec![gamma; users]);
        if let Some(t) = self.tolerance {
            p.tolerance = t;
        }
        if let Some(m) = self.max_iterations {
            p.max_iterations = m;
        }
        if let Some(c) = self.power_cap {
            p.power_cap = c;
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourColorSpec {
    pub power_convention: PowerConvention,
    #[serde(default)]
    pub per_beam_power_scale: Option<f64>,
    #[serde(default)]
    pub label: Option<String>,
}

impl FourColorSpec {
    pub fn scheme_label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| format!("4FR-{}", self.power_convention.label()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRange {
    pub min_dbw: f64,
    pub max_dbw: f64,
    pub step_db: f64,
}

impl SweepRange {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_dbw.is_finite() && self.max_dbw.is_finite() && self.min_dbw <= self.max_dbw) {
            return Err(Error::Config(format!(
                "sweep min {} > max {}",
                self.min_dbw, self.max_dbw
            )));
        }
        if !(self.step_db > 0.0) {
            return Err(Error::Config(format!("sweep step must be > 0, got {}", self.step_db)));
        }
        Ok(())
    }

    /// `min, min + step, ...` up to and including `max` (within 1e-9 of a step).
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.max_dbw - self.min_dbw) / self.step_db + 1e-9).floor() as usize;
        (0..=n).map(|i| self.min_dbw + i as f64 * self.step_db).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CsiEstimation {
    /// Start from the true channel; only the CSI error model perturbs it.
    #[default]
    Perfect,
    /// Estimate from unprecoded Hadamard pilots at the operating power.
    Pilots { pilot_length: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub channel: ChannelSource,
    /// Noise power over the full band, in the units of the transmit power.
    pub noise_variance: f64,
    #[serde(default = "CsiErrorModel::ideal")]
    pub csi_error: CsiErrorModel,
    #[serde(default)]
    pub csi_estimation: CsiEstimation,
    pub precoders: Vec<PrecoderSpec>,
    #[serde(default)]
    pub four_color: Vec<FourColorSpec>,
    #[serde(default)]
    pub modcod_table: Option<PathBuf>,
    #[serde(default = "default_margin")]
    pub acm_margin_db: f64,
    #[serde(default = "default_rate")]
    pub symbol_rate_msps: f64,
    /// Informational only.
    #[serde(default = "default_roll_off")]
    pub roll_off: f64,
    #[serde(default = "one")]
    pub polarization_factor: f64,
    pub psat_sweep: SweepRange,
    #[serde(default)]
    pub obo_db: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_margin() -> f64 {
    0.6
}
fn default_rate() -> f64 {
    20.0
}
fn default_roll_off() -> f64 {
    0.2
}
fn default_trials() -> usize {
    1
}

/// Operating point of the default scenario, in dBW.
pub const DEFAULT_OPERATING_POINT_DBW: f64 = 4.5;

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// 16 beams on a 4 x 4 lattice spaced at twice the 3 dB half-angle,
    /// one user per beam centre, placeholder "normal" CSI errors, FFR
    /// precoders against both four-colour conventions.
    pub fn default_16_beam() -> Self {
        let mut pac = PrecoderSpec::new(PrecoderKind::MmsePac);
        pac.phi = Some(1.0);
        let mut par = PrecoderSpec::new(PrecoderKind::Mmse);
        par.normalization = Some(Normalization::Par(1.0));
        let mut mpc = PrecoderSpec::new(PrecoderKind::Mmse);
        mpc.normalization = Some(Normalization::Mpc(1.0));
        let mut optl = PrecoderSpec::new(PrecoderKind::Optl);
        optl.normalization = Some(Normalization::UnitRow);
        optl.target_snir_db = Some(10.0);
        Self {
            channel: ChannelSource::Grid {
                rows: 4,
                cols: 4,
                spacing_deg: 0.8,
                three_db_half_angle_deg: 0.4,
                peak_gain: 1.0,
            },
            noise_variance: 0.1,
            csi_error: CsiErrorModel::normal(),
            csi_estimation: CsiEstimation::Perfect,
            precoders: vec![pac, par, mpc, optl],
            four_color: vec![
                FourColorSpec {
                    power_convention: PowerConvention::ConstPsd,
                    per_beam_power_scale: None,
                    label: None,
                },
                FourColorSpec {
                    power_convention: PowerConvention::ConstTotalPower,
                    per_beam_power_scale: None,
                    label: None,
                },
            ],
            modcod_table: None,
            acm_margin_db: 0.6,
            symbol_rate_msps: 20.0,
            roll_off: 0.2,
            polarization_factor: 1.0,
            psat_sweep: SweepRange {
                min_dbw: -10.0,
                max_dbw: 10.0,
                step_db: 0.5,
            },
            obo_db: 0.0,
            trials: 4,
            seed: 2024,
            base_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.psat_sweep.validate()?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::Config("noise_variance must be positive".into()));
        }
        if !(self.obo_db >= 0.0) {
            return Err(Error::Config("obo_db must be >= 0".into()));
        }
        if !(self.symbol_rate_msps > 0.0) || !(self.polarization_factor >= 1.0) {
            return Err(Error::Config(
                "symbol rate must be > 0 and polarization factor >= 1".into(),
            ));
        }
        self.csi_error.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.precoders.is_empty() && self.four_color.is_empty() {
            return Err(Error::Config("no schemes to evaluate".into()));
        }
        if let ChannelSource::Grid { rows, cols, .. } = self.channel {
            if rows == 0 || cols == 0 {
                return Err(Error::Config("grid must have at least one beam".into()));
            }
        }
        let mut labels: Vec<String> = self.precoders.iter().map(PrecoderSpec::scheme_label).collect();
        labels.extend(self.four_color.iter().map(FourColorSpec::scheme_label));
        let mut sorted = labels.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != labels.len() {
            return Err(Error::Config(format!("duplicate scheme labels in {labels:?}")));
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn channel_seed(&self) -> u64 {
        derive_seed(self.seed, CHANNEL_STREAM)
    }

    /// True channel of the scenario.
    pub fn build_channel(&self) -> Result<ChannelMatrix> {
        match &self.channel {
            ChannelSource::Grid {
                rows,
                cols,
                spacing_deg,
                three_db_half_angle_deg,
                peak_gain,
            } => {
                let g = BeamGeometry::grid(*rows, *cols, *spacing_deg, *three_db_half_angle_deg, *peak_gain);
                generate_multibeam_channel(&g, self.channel_seed())
            }
            ChannelSource::Geometry { geometry, .. } => generate_multibeam_channel(geometry, self.channel_seed()),
            ChannelSource::File { path, .. } => load_channel(&self.resolve(path)),
        }
    }

    pub fn beam_colors(&self, beams: usize) -> Result<Vec<u8>> {
        let colors = match &self.channel {
            ChannelSource::Grid { rows, cols, .. } => grid_four_coloring(*rows, *cols),
            ChannelSource::Geometry { colors, .. } | ChannelSource::File { colors, .. } => colors
                .clone()
                .ok_or_else(|| Error::Config("four-colour schemes need explicit beam colours".into()))?,
        };
        if colors.len() != beams {
            return Err(Error::Coloring(format!("{} colours for {beams} beams", colors.len())));
        }
        Ok(colors)
    }

    pub fn reuse_schemes(&self, beams: usize) -> Result<Vec<(String, ReuseScheme)>> {
        if self.four_color.is_empty() {
            return Ok(Vec::new());
        }
        let colors = self.beam_colors(beams)?;
        self.four_color
            .iter()
            .map(|spec| {
                let scale = spec
                    .per_beam_power_scale
                    .unwrap_or_else(|| spec.power_convention.default_scale());
                let scheme = ReuseScheme::four_color_scaled(colors.clone(), spec.power_convention, scale)?;
                Ok((spec.scheme_label(), scheme))
            })
            .collect()
    }

    pub fn modcods(&self) -> Result<ModcodTable> {
        match &self.modcod_table {
            Some(p) => ModcodTable::load(&self.resolve(p)).map_err(|e| Error::Config(e.to_string())),
            None => Ok(ModcodTable::default_dvbs2()),
        }
    }

    pub fn noise(&self) -> Result<NoiseModel> {
        NoiseModel::new(self.noise_variance)
    }

    pub fn throughput_params(&self) -> ThroughputParams {
        ThroughputParams {
            acm_margin_db: self.acm_margin_db,
            symbol_rate_msps: self.symbol_rate_msps,
            polarization_factor: self.polarization_factor,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_through_json() {
        let cfg = ScenarioConfig::default_16_beam();
        let back = ScenarioConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, back);
        assert!(cfg
            .psat_sweep
            .points()
            .iter()
            .any(|p| (p - DEFAULT_OPERATING_POINT_DBW).abs() < 1e-12));
    }

    #[test]
    fn unknown_keys_fail() {
        let mut v: serde_json::Value = serde_json::from_str(&ScenarioConfig::default_16_beam().to_json()).unwrap();
        v["colour"] = serde_json::json!(3);
        assert!(matches!(
            ScenarioConfig::from_json(&v.to_string()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn invalid_sweep_and_trials() {
        let mut cfg = ScenarioConfig::default_16_beam();
        cfg.psat_sweep.min_dbw = 20.0;
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::default_16_beam();
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::default_16_beam();
        cfg.psat_sweep.step_db = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sweep_points_include_endpoints() {
        let r = SweepRange {
            min_dbw: -1.0,
            max_dbw: 1.0,
            step_db: 0.5,
        };
        assert_eq!(r.points(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        let single = SweepRange {
            min_dbw: 3.0,
            max_dbw: 3.0,
            step_db: 1.0,
        };
        assert_eq!(single.points(), vec![3.0]);
    }
}
