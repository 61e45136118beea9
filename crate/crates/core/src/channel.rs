//! Multibeam forward-link channel: generation from a beam geometry, CSV I/O,
//! CSI error injection and the AWGN noise model.
//!
//! Beam gains follow the tapered-aperture Bessel pattern
//!
//! ```text
//! a(u) = J1(u) / (2u) + 36 J3(u) / u^3,     u = u3 * sin(theta) / sin(theta_3dB)
//! ```
//!
//! where `a(0) = 1` and `u3` is the root of `a(u)^2 = 1/2`, solved numerically
//! once so that a user sitting at the 3 dB half-angle receives exactly half of
//! the boresight power. Channel entries are `peak_gain * |a(u)| * e^{j psi}`
//! with `psi` uniform on `[0, 2pi)`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::seed::rng_from_seed;
use crate::{CMatrix, Complex64, Error, Result};

/// K x N complex channel; row `k` is user `k`, column `n` is feed `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix(CMatrix);

impl ChannelMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        let (k, n) = entries.shape();
        if k == 0 || n == 0 {
            return Err(Error::Dimension(format!("empty channel matrix {k}x{n}")));
        }
        if k > n {
            return Err(Error::Dimension(format!("more users than feeds ({k} > {n})")));
        }
        if !crate::linalg::all_finite(&entries) {
            return Err(Error::Value("channel contains NaN or Inf".into()));
        }
        Ok(Self(entries))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n, n))
    }

    /// Builds a channel from row-major real entries.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let k = rows.len();
        let n = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(CMatrix::from_fn(k, n, |i, j| Complex64::new(rows[i][j], 0.0)))
    }

    pub fn users(&self) -> usize {
        self.0.nrows()
    }

    pub fn feeds(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    /// `h_k` as a column vector, so that `H = [h_1 .. h_K]^H`.
    pub fn user_vector(&self, k: usize) -> nalgebra::DVector<Complex64> {
        self.0.row(k).adjoint()
    }
}

/// AWGN model over the full transponder band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub noise_variance_fullband: f64,
}

impl NoiseModel {
    pub fn new(noise_variance_fullband: f64) -> Result<Self> {
        if !(noise_variance_fullband > 0.0 && noise_variance_fullband.is_finite()) {
            return Err(Error::Value(format!(
                "noise variance must be positive, got {noise_variance_fullband}"
            )));
        }
        Ok(Self {
            noise_variance_fullband,
        })
    }

    pub fn from_psd(psd: f64, bandwidth: f64) -> Result<Self> {
        Self::new(psd * bandwidth)
    }

    /// Noise power over a fraction `f` of the band.
    pub fn variance_over(&self, fraction: f64) -> f64 {
        self.noise_variance_fullband * fraction
    }
}

/// Multiplicative amplitude/phase plus additive complex error on each entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsiErrorModel {
    pub profile_name: String,
    #[serde(default)]
    pub amplitude_error_std: f64,
    #[serde(default)]
    pub phase_error_std: f64,
    #[serde(default)]
    pub additive_error_std: f64,
}

impl CsiErrorModel {
    pub fn ideal() -> Self {
        Self::custom("ideal", 0.0, 0.0, 0.0)
    }

    /// Placeholder "normal receiver" profile. Not calibrated to any measurement.
    pub fn normal() -> Self {
        Self::custom("normal", 0.05, 0.05, 0.0)
    }

    /// Placeholder improved-receiver profile. Not calibrated to any measurement.
    pub fn ngw() -> Self {
        Self::custom("ngw", 0.02, 0.02, 0.0)
    }

    pub fn custom(name: &str, amplitude: f64, phase: f64, additive: f64) -> Self {
        Self {
            profile_name: name.to_string(),
            amplitude_error_std: amplitude,
            phase_error_std: phase,
            additive_error_std: additive,
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "ideal" => Some(Self::ideal()),
            "normal" => Some(Self::normal()),
            "ngw" => Some(Self::ngw()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let stds = [self.amplitude_error_std, self.phase_error_std, self.additive_error_std];
        if stds.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Value(format!(
                "CSI error stds must be finite and >= 0 in profile {:?}",
                self.profile_name
            )));
        }
        if self.profile_name == "ideal" && !self.is_noiseless() {
            return Err(Error::Value("profile \"ideal\" must have zero stds".into()));
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.amplitude_error_std == 0.0 && self.phase_error_std == 0.0 && self.additive_error_std == 0.0
    }
}

/// Beam centres and user positions in a local angular frame (degrees).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamGeometry {
    pub beam_centers: Vec<[f64; 2]>,
    pub three_db_half_angle_deg: f64,
    pub peak_gain: f64,
    pub user_positions: Vec<[f64; 2]>,
}

impl BeamGeometry {
    /// `rows x cols` square lattice of beams with one user at each beam centre.
    pub fn grid(rows: usize, cols: usize, spacing_deg: f64, half_angle_deg: f64, peak_gain: f64) -> Self {
        let centers: Vec<[f64; 2]> = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| [c as f64 * spacing_deg, r as f64 * spacing_deg]))
            .collect();
        Self {
            user_positions: centers.clone(),
            beam_centers: centers,
            three_db_half_angle_deg: half_angle_deg,
            peak_gain,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.beam_centers.len();
        let k = self.user_positions.len();
        if !(self.three_db_half_angle_deg > 0.0 && self.three_db_half_angle_deg < 90.0) {
            return Err(Error::InvalidGeometry(format!(
                "3 dB half-angle must be in (0, 90) degrees, got {}",
                self.three_db_half_angle_deg
            )));
        }
        if !(self.peak_gain > 0.0 && self.peak_gain.is_finite()) {
            return Err(Error::InvalidGeometry("peak gain must be positive".into()));
        }
        if n == 0 || k == 0 || k > n {
            return Err(Error::InvalidGeometry(format!(
                "need 1 <= users <= beams, got {k} users and {n} beams"
            )));
        }
        let all = self.beam_centers.iter().chain(&self.user_positions);
        if all.flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidGeometry("non-finite coordinate".into()));
        }
        for i in 0..n {
            for j in i + 1..n {
                if self.beam_centers[i] == self.beam_centers[j] {
                    return Err(Error::InvalidGeometry(format!("beams {i} and {j} share a centre")));
                }
            }
        }
        Ok(())
    }

    /// Off-axis angle in degrees between user `k` and the centre of beam `n`.
    pub fn off_axis_deg(&self, k: usize, n: usize) -> f64 {
        let [ux, uy] = self.user_positions[k];
        let [bx, by] = self.beam_centers[n];
        (ux - bx).hypot(uy - by)
    }
}

fn bessel_amplitude(u: f64) -> f64 {
    if u.abs() < 1e-8 {
        return 1.0;
    }
    libm::j1(u) / (2.0 * u) + 36.0 * libm::jn(3, u) / (u * u * u)
}

/// Pattern argument at which the power pattern drops to exactly one half.
pub fn half_power_argument() -> f64 {
    static ROOT: OnceLock<f64> = OnceLock::new();
    *ROOT.get_or_init(|| {
        let target = std::f64::consts::FRAC_1_SQRT_2;
        // The amplitude decreases monotonically on (0, 3), from 1 to below 1/sqrt(2).
        let (mut lo, mut hi) = (0.5_f64, 3.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if bessel_amplitude(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    })
}

/// Normalized amplitude pattern `|a(theta)|`, equal to 1 at boresight.
pub fn beam_amplitude(off_axis_deg: f64, half_angle_deg: f64) -> f64 {
    let u = half_power_argument() * off_axis_deg.to_radians().sin() / half_angle_deg.to_radians().sin();
    bessel_amplitude(u).abs()
}

/// Synthetic multibeam channel: pattern magnitudes with uniform random phases.
pub fn generate_multibeam_channel(geometry: &BeamGeometry, seed: u64) -> Result<ChannelMatrix> {
    geometry.validate()?;
    let k = geometry.user_positions.len();
    let n = geometry.beam_centers.len();
    let mut rng = rng_from_seed(seed);
    let mut h = CMatrix::zeros(k, n);
    for i in 0..k {
        for j in 0..n {
            let mag =
                geometry.peak_gain * beam_amplitude(geometry.off_axis_deg(i, j), geometry.three_db_half_angle_deg);
            let psi: f64 = rng.random_range(0.0..2.0 * PI);
            h[(i, j)] = Complex64::from_polar(mag, psi);
        }
    }
    ChannelMatrix::new(h)
}

/// `h' = h (1 + a) e^{j phi} + e` per entry, drawn in row-major order.
pub fn apply_csi_error(h: &ChannelMatrix, model: &CsiErrorModel, seed: u64) -> Result<ChannelMatrix> {
    model.validate()?;
    if model.is_noiseless() {
        return Ok(h.clone());
    }
    let mut rng = rng_from_seed(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let (k, n) = h.matrix().shape();
    let mut out = CMatrix::zeros(k, n);
    for i in 0..k {
        for j in 0..n {
            let hij = h.matrix()[(i, j)];
            let a = model.amplitude_error_std * std_normal.sample(&mut rng);
            let phi = model.phase_error_std * std_normal.sample(&mut rng);
            let sigma = model.additive_error_std * hij.norm() / 2f64.sqrt();
            let e = Complex64::new(sigma * std_normal.sample(&mut rng), sigma * std_normal.sample(&mut rng));
            out[(i, j)] = hij * Complex64::from_polar(1.0 + a, phi) + e;
        }
    }
    ChannelMatrix::new(out)
}

/// Random channel `I + coupling * G` (first `k` rows), `G` i.i.d. CN(0, 1/n).
///
/// Small couplings give well-conditioned test and benchmark channels.
pub fn random_coupled_channel(k: usize, n: usize, coupling: f64, seed: u64) -> Result<ChannelMatrix> {
    let mut rng = rng_from_seed(seed);
    let normal = Normal::new(0.0, (0.5 / n as f64).sqrt()).expect("finite std");
    let h = CMatrix::from_fn(k, n, |i, j| {
        let base = if i == j { 1.0 } else { 0.0 };
        Complex64::new(base, 0.0) + Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)) * coupling
    });
    ChannelMatrix::new(h)
}

/// Renders the channel in the `re;im` cell format (no header, '\n' endings).
pub fn channel_to_csv(h: &ChannelMatrix) -> String {
    let mut s = String::new();
    for row in h.matrix().row_iter() {
        let cells: Vec<String> = row.iter().map(|z| format!("{};{}", z.re, z.im)).collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

pub fn parse_channel_csv(text: &str) -> Result<ChannelMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        let mut row = Vec::with_capacity(record.len());
        for cell in record.iter() {
            let (re, im) = cell.trim().split_once(';').ok_or_else(|| Error::Parse {
                line,
                msg: format!("cell {cell:?} is not of the form re;im"),
            })?;
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    msg: format!("non-numeric field {s:?}"),
                })
            };
            let z = Complex64::new(parse(re)?, parse(im)?);
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::Value(format!("non-finite entry on line {line}")));
            }
            row.push(z);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Dimension(format!(
                    "line {line} has {} cells, expected {}",
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    let k = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    ChannelMatrix::new(CMatrix::from_fn(k, n, |i, j| rows[i][j]))
}

pub fn load_channel(path: &Path) -> Result<ChannelMatrix> {
    let text = std::fs::read_to_string(path)?;
    parse_channel_csv(&text)
}

pub fn save_channel(h: &ChannelMatrix, path: &Path) -> Result<()> {
    std::fs::write(path, channel_to_csv(h))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid16() -> BeamGeometry {
        BeamGeometry::grid(4, 4, 0.8, 0.4, 1.0)
    }

    #[test]
    fn half_power_point_is_exact() {
        // Independent check with a plain power-series Bessel evaluation.
        fn jn_series(n: i32, x: f64) -> f64 {
            let mut term = (x / 2.0).powi(n) / (1..=n).map(f64::from).product::<f64>();
            let mut sum = term;
            for m in 1..60 {
                term *= -(x * x / 4.0) / (m as f64 * (m + n) as f64);
                sum += term;
            }
            sum
        }
        let u = half_power_argument();
        let a = jn_series(1, u) / (2.0 * u) + 36.0 * jn_series(3, u) / u.powi(3);
        assert!((a * a - 0.5).abs() < 1e-12, "a^2 = {}", a * a);
        assert!((u - 2.07123).abs() < 1e-4);
    }

    #[test]
    fn user_at_half_angle_gets_half_power() {
        let mut g = BeamGeometry::grid(1, 2, 1.0, 0.35, 3.0);
        g.user_positions = vec![[0.35, 0.0]];
        let h = generate_multibeam_channel(&g, 1).unwrap();
        let p = h.matrix()[(0, 0)].norm_sqr();
        assert!((p / (9.0 / 2.0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn boresight_gain_is_peak() {
        let h = generate_multibeam_channel(&grid16(), 3).unwrap();
        for k in 0..16 {
            assert!((h.matrix()[(k, k)].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_multibeam_channel(&grid16(), 42).unwrap();
        let b = generate_multibeam_channel(&grid16(), 42).unwrap();
        let c = generate_multibeam_channel(&grid16(), 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn well_separated_grid_is_diagonally_dominant() {
        let h = generate_multibeam_channel(&grid16(), 9).unwrap();
        for k in 0..16 {
            for j in 0..16 {
                if j != k {
                    assert!(h.matrix()[(k, k)].norm() > h.matrix()[(k, j)].norm());
                }
            }
        }
    }

    #[test]
    fn invalid_geometries_are_rejected() {
        let mut g = grid16();
        g.three_db_half_angle_deg = 0.0;
        assert!(matches!(
            generate_multibeam_channel(&g, 0),
            Err(Error::InvalidGeometry(_))
        ));
        let mut g = grid16();
        g.beam_centers[3] = g.beam_centers[2];
        assert!(matches!(
            generate_multibeam_channel(&g, 0),
            Err(Error::InvalidGeometry(_))
        ));
    }

    #[test]
    fn csv_identity_and_ragged() {
        let h = parse_channel_csv("1,0;0,0\n0,0;1,0\n");
        // "1,0;0,0" splits into cells "1" and "0;0": not the documented format.
        assert!(matches!(h, Err(Error::Parse { .. })));
        let h = parse_channel_csv("1;0,0;0\n0;0,1;0\n").unwrap();
        assert_eq!(h, ChannelMatrix::identity(2));
        let ragged = parse_channel_csv("1;0,0;0,0;0\n0;0,1;0\n");
        assert!(matches!(ragged, Err(Error::Dimension(_))));
        assert!(matches!(
            parse_channel_csv("1;x,0;0\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_channel_csv("NaN;0,0;0\n0;0,1;0\n"),
            Err(Error::Value(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let h = generate_multibeam_channel(&grid16(), 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        save_channel(&h, &path).unwrap();
        let back = load_channel(&path).unwrap();
        assert!(crate::linalg::max_abs_diff(h.matrix(), back.matrix()) <= 1e-12);
    }

    #[test]
    fn ideal_error_is_identity() {
        let h = generate_multibeam_channel(&grid16(), 5).unwrap();
        assert_eq!(apply_csi_error(&h, &CsiErrorModel::ideal(), 1).unwrap(), h);
        let zero = CsiErrorModel::custom("zeros", 0.0, 0.0, 0.0);
        assert_eq!(apply_csi_error(&h, &zero, 1).unwrap(), h);
    }

    #[test]
    fn phase_only_error_keeps_magnitudes() {
        let h = generate_multibeam_channel(&grid16(), 5).unwrap();
        let model = CsiErrorModel::custom("phase", 0.0, 0.3, 0.0);
        let e = apply_csi_error(&h, &model, 11).unwrap();
        for (a, b) in h.matrix().iter().zip(e.matrix().iter()) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
        assert_ne!(e, h);
    }

    #[test]
    fn amplitude_error_std_monte_carlo() {
        let h = ChannelMatrix::from_real_rows(&[&[0.7]]).unwrap();
        let model = CsiErrorModel::custom("amp", 0.1, 0.0, 0.0);
        let draws = 100_000;
        let rel: Vec<f64> = (0..draws)
            .map(|t| {
                let e = apply_csi_error(&h, &model, crate::seed::derive_seed(99, t)).unwrap();
                e.matrix()[(0, 0)].norm() / 0.7 - 1.0
            })
            .collect();
        let mean = rel.iter().sum::<f64>() / draws as f64;
        let var = rel.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        assert!((var.sqrt() - 0.1).abs() < 0.005, "std {}", var.sqrt());
    }

    #[test]
    fn additive_error_has_requested_variance() {
        let h = ChannelMatrix::from_real_rows(&[&[2.0]]).unwrap();
        let model = CsiErrorModel::custom("add", 0.0, 0.0, 0.1);
        let draws = 20_000;
        let var = (0..draws)
            .map(|t| {
                let e = apply_csi_error(&h, &model, crate::seed::derive_seed(5, t)).unwrap();
                (e.matrix()[(0, 0)] - 2.0).norm_sqr()
            })
            .sum::<f64>()
            / draws as f64;
        // E|e|^2 = (0.1 * 2)^2
        assert!((var / 0.04 - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn noise_model_fraction() {
        let n = NoiseModel::new(0.2).unwrap();
        assert!((n.variance_over(0.25) - 0.05).abs() < 1e-15);
        assert!(NoiseModel::new(0.0).is_err());
        assert_eq!(NoiseModel::from_psd(0.01, 20.0).unwrap().noise_variance_fullband, 0.2);
    }
}
