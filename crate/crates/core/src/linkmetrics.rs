//! SNIR, power profiles, MODCOD throughput and frequency-reuse baselines.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelMatrix, NoiseModel};
use crate::precoding::PrecodingMatrix;
use crate::{CMatrix, Error, Result};

/// K x K effective channel `G = H W`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannel(CMatrix);

impl EffectiveChannel {
    pub fn new(g: CMatrix) -> Result<Self> {
        if g.nrows() != g.ncols() {
            return Err(Error::Dimension(format!("effective channel is {:?}", g.shape())));
        }
        if !crate::linalg::all_finite(&g) {
            return Err(Error::Value("effective channel is not finite".into()));
        }
        Ok(Self(g))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }
}

pub fn effective_channel(h: &ChannelMatrix, w: &PrecodingMatrix) -> Result<EffectiveChannel> {
    if h.feeds() != w.antennas() || h.users() != w.users() {
        return Err(Error::Dimension(format!(
            "H is {}x{}, W is {}x{}",
            h.users(),
            h.feeds(),
            w.antennas(),
            w.users()
        )));
    }
    EffectiveChannel::new(h.matrix() * w.matrix())
}

/// Linear SNIR per user with the transmit side scaled by `power_scale`.
pub fn snir(g: &EffectiveChannel, sigma2: f64, power_scale: f64) -> Vec<f64> {
    let m = g.matrix();
    (0..m.nrows())
        .map(|k| {
            let row = m.row(k);
            let desired = row[k].norm_sqr();
            let interference: f64 = row
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, z)| z.norm_sqr())
                .sum();
            power_scale * desired / (power_scale * interference + sigma2)
        })
        .collect()
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `(per_antenna, per_beam)` squared row and column norms.
pub fn power_profile(w: &PrecodingMatrix) -> (Vec<f64>, Vec<f64>) {
    (w.per_antenna_power(), w.per_beam_power())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModcodEntry {
    pub name: String,
    pub threshold_esn0_db: f64,
    pub spectral_efficiency: f64,
}

/// MODCOD ladder, strictly increasing in threshold and efficiency.
#[derive(Debug, Clone, PartialEq)]
pub struct ModcodTable {
    entries: Vec<ModcodEntry>,
}

/// Default ladder: monotone subset of the DVB-S2 normal-frame MODCODs with
/// their ideal AWGN Es/N0 requirements (ETSI EN 302 307-1, Table 13).
pub const DEFAULT_MODCOD_CSV: &str = include_str!("../data/dvbs2_modcods.csv");

impl ModcodTable {
    pub fn new(entries: Vec<ModcodEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Value("MODCOD table is empty".into()));
        }
        for e in &entries {
            if !(e.threshold_esn0_db.is_finite() && e.spectral_efficiency > 0.0 && e.spectral_efficiency.is_finite()) {
                return Err(Error::Value(format!("invalid MODCOD entry {e:?}")));
            }
        }
        for pair in entries.windows(2) {
            if !(pair[1].threshold_esn0_db > pair[0].threshold_esn0_db
                && pair[1].spectral_efficiency > pair[0].spectral_efficiency)
            {
                return Err(Error::Value(format!(
                    "MODCOD table not strictly increasing at {:?}",
                    pair[1].name
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[ModcodEntry] {
        &self.entries
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?;
        if headers.iter().collect::<Vec<_>>() != ["name", "threshold_esn0_db", "spectral_efficiency"] {
            return Err(Error::Parse {
                line: 1,
                msg: format!("unexpected MODCOD header {headers:?}"),
            });
        }
        let mut entries = Vec::new();
        for (i, rec) in reader.deserialize::<ModcodEntry>().enumerate() {
            entries.push(rec.map_err(|e| Error::Parse {
                line: i + 2,
                msg: e.to_string(),
            })?);
        }
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_csv(&std::fs::read_to_string(path)?)
    }

    pub fn default_dvbs2() -> Self {
        Self::parse_csv(DEFAULT_MODCOD_CSV).expect("bundled MODCOD table is valid")
    }

    /// Highest entry whose threshold does not exceed `esn0_db`.
    pub fn select(&self, esn0_db: f64) -> Option<&ModcodEntry> {
        self.entries.iter().rev().find(|e| e.threshold_esn0_db <= esn0_db)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerConvention {
    ConstPsd,
    ConstTotalPower,
}

impl PowerConvention {
    /// 4FR beam power relative to the FFR beam power. FFR beams run at half
    /// the 4FR power; constant total power additionally folds the 4x band
    /// concentration into the 4FR beam.
    pub fn default_scale(self) -> f64 {
        match self {
            PowerConvention::ConstPsd => 2.0,
            PowerConvention::ConstTotalPower => 8.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PowerConvention::ConstPsd => "ConstPSD",
            PowerConvention::ConstTotalPower => "ConstTotalPower",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReuseScheme {
    Ffr,
    FourColor {
        color_of_beam: Vec<u8>,
        power_convention: PowerConvention,
        per_beam_power_scale: f64,
    },
}

impl ReuseScheme {
    pub fn four_color(colors: Vec<u8>, convention: PowerConvention) -> Result<Self> {
        Self::four_color_scaled(colors, convention, convention.default_scale())
    }

    pub fn four_color_scaled(colors: Vec<u8>, convention: PowerConvention, scale: f64) -> Result<Self> {
        if let Some(c) = colors.iter().find(|c| **c >= 4) {
            return Err(Error::Coloring(format!("colour {c} outside 0..4")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Value(format!(
                "per-beam power scale must be positive, got {scale}"
            )));
        }
        Ok(ReuseScheme::FourColor {
            color_of_beam: colors,
            power_convention: convention,
            per_beam_power_scale: scale,
        })
    }

    pub fn bandwidth_fraction(&self) -> f64 {
        match self {
            ReuseScheme::Ffr => 1.0,
            ReuseScheme::FourColor { .. } => 0.25,
        }
    }
}

/// Checkerboard colouring of a row-major `rows x cols` beam lattice; no two
/// beams of one colour are horizontal, vertical or diagonal neighbours.
pub fn grid_four_coloring(rows: usize, cols: usize) -> Vec<u8> {
    (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (2 * (r % 2) + (c % 2)) as u8))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudgetPoint {
    pub psat_dbw: f64,
    pub obo_db: f64,
    pub per_beam_power_linear: f64,
}

impl LinkBudgetPoint {
    pub fn new(psat_dbw: f64, obo_db: f64) -> Result<Self> {
        if !(obo_db >= 0.0) || !psat_dbw.is_finite() {
            return Err(Error::Value(format!(
                "invalid link budget psat={psat_dbw} obo={obo_db}"
            )));
        }
        Ok(Self {
            psat_dbw,
            obo_db,
            per_beam_power_linear: from_db(psat_dbw - obo_db),
        })
    }
}

/// Unprecoded four-colour SNIR with user `k` served by beam `k`.
pub fn four_color_snir(
    h: &ChannelMatrix,
    scheme: &ReuseScheme,
    budget: &LinkBudgetPoint,
    noise: &NoiseModel,
) -> Result<Vec<f64>> {
    let ReuseScheme::FourColor {
        color_of_beam,
        per_beam_power_scale,
        ..
    } = scheme
    else {
        return Err(Error::Coloring("scheme is not four-colour".into()));
    };
    if color_of_beam.len() != h.feeds() {
        return Err(Error::Coloring(format!(
            "{} colours for {} beams",
            color_of_beam.len(),
            h.feeds()
        )));
    }
    let pb = budget.per_beam_power_linear * per_beam_power_scale;
    let noise_power = noise.variance_over(scheme.bandwidth_fraction());
    let m = h.matrix();
    Ok((0..h.users())
        .map(|k| {
            let interference: f64 = (0..h.feeds())
                .filter(|&j| j != k && color_of_beam[j] == color_of_beam[k])
                .map(|j| pb * m[(k, j)].norm_sqr())
                .sum();
            pb * m[(k, k)].norm_sqr() / (interference + noise_power)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThroughputParams {
    pub acm_margin_db: f64,
    pub symbol_rate_msps: f64,
    pub polarization_factor: f64,
}

impl Default for ThroughputParams {
    fn default() -> Self {
        Self {
            acm_margin_db: 0.6,
            symbol_rate_msps: 20.0,
            polarization_factor: 1.0,
        }
    }
}

/// Throughput in Mbps of the best MODCOD supported after the ACM margin.
pub fn throughput(
    snir_db: f64,
    table: &ModcodTable,
    acm_margin_db: f64,
    symbol_rate_msps: f64,
    bandwidth_fraction: f64,
    polarization_factor: f64,
) -> f64 {
    table.select(snir_db - acm_margin_db).map_or(0.0, |e| {
        e.spectral_efficiency * symbol_rate_msps * bandwidth_fraction * polarization_factor
    })
}

/// `(mean SNIR in dB, summed throughput)` over users.
pub fn aggregate_report(per_ut_snir_db: &[f64], per_ut_throughput_mbps: &[f64]) -> (f64, f64) {
    let avg = per_ut_snir_db.iter().sum::<f64>() / per_ut_snir_db.len() as f64;
    let system = per_ut_throughput_mbps.iter().sum::<f64>();
    (avg, system)
}
