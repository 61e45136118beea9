//! Symbol-level superframe with unprecoded reference fields.
//!
//! Each superframe carries three consecutive fields on every antenna:
//!
//! 1. SOSF: the same start-of-superframe marker on all antennas, a Walsh-Hadamard
//!    row (row 1 of the Sylvester matrix) chipped with a fixed scrambling
//!    sequence so that its aperiodic autocorrelation has low sidelobes.
//! 2. Pilots: antenna `n` sends row `n` of the Sylvester Hadamard matrix of
//!    order `pilot_length`, so terminals can separate every feed by correlation.
//! 3. Payload: the precoded symbols `W s_t`.
//!
//! Only the payload depends on the precoder.

use std::ops::Range;

use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::channel::ChannelMatrix;
use crate::precoding::PrecodingMatrix;
use crate::seed::{rng_from_seed, splitmix64, GOLDEN_GAMMA};
use crate::{CMatrix, Complex64, Error, Result};

/// Sylvester Hadamard matrix of the given order.
pub fn walsh_hadamard(order: usize) -> Result<DMatrix<f64>> {
    if order == 0 || !order.is_power_of_two() {
        return Err(Error::InvalidOrder(order));
    }
    let mut h = DMatrix::from_element(1, 1, 1.0);
    while h.nrows() < order {
        let m = h.nrows();
        let mut next = DMatrix::zeros(2 * m, 2 * m);
        next.view_mut((0, 0), (m, m)).copy_from(&h);
        next.view_mut((0, m), (m, m)).copy_from(&h);
        next.view_mut((m, 0), (m, m)).copy_from(&h);
        next.view_mut((m, m), (m, m)).copy_from(&(-&h));
        h = next;
    }
    Ok(h)
}

/// Entry `(row, col)` of the Sylvester Hadamard matrix, `(-1)^popcount(row & col)`.
fn hadamard_entry(row: usize, col: usize) -> f64 {
    if (row & col).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

const SCRAMBLING_SEED: u64 = 1;

/// Fixed pseudo-random +-1 chips, 64 per SplitMix64 word.
fn scrambling_chips(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| {
            let word = splitmix64(SCRAMBLING_SEED.wrapping_add(((i / 64) as u64).wrapping_mul(GOLDEN_GAMMA)));
            if (word >> (i % 64)) & 1 == 0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect()
}

/// Start-of-superframe marker of the given length (a power of two).
pub fn sosf_sequence(len: usize) -> Result<Vec<f64>> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::InvalidOrder(len));
    }
    let row = if len > 1 { 1 } else { 0 };
    Ok(scrambling_chips(len)
        .into_iter()
        .enumerate()
        .map(|(c, s)| s * hadamard_entry(row, c))
        .collect())
}

/// First `antennas` rows of the Hadamard matrix of order `pilot_length`.
pub fn pilot_matrix(antennas: usize, pilot_length: usize) -> Result<DMatrix<f64>> {
    if pilot_length < antennas {
        return Err(Error::Dimension(format!(
            "pilot length {pilot_length} cannot separate {antennas} antennas"
        )));
    }
    let h = walsh_hadamard(pilot_length)?;
    Ok(h.rows(0, antennas).into_owned())
}

/// Ring ratio of the 4+12 APSK constellation.
pub const APSK16_RING_RATIO: f64 = 2.85;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constellation {
    Qpsk,
    Psk8,
    Apsk16,
}

impl Constellation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Constellation::Qpsk => 2,
            Constellation::Psk8 => 3,
            Constellation::Apsk16 => 4,
        }
    }

    /// Unit-average-power points indexed by their bit label.
    ///
    /// QPSK and 8PSK are Gray labelled. 16APSK places labels 0..12 on the
    /// outer ring and 12..16 on the inner ring; neighbours on a ring mostly
    /// differ in one bit, which is not the DVB-S2 bit map.
    pub fn points(self) -> Vec<Complex64> {
        let gray = |m: usize| m ^ (m >> 1);
        match self {
            Constellation::Qpsk => (0..4)
                .map(|label| {
                    let s = std::f64::consts::FRAC_1_SQRT_2;
                    let re = if label & 0b10 == 0 { s } else { -s };
                    let im = if label & 0b01 == 0 { s } else { -s };
                    Complex64::new(re, im)
                })
                .collect(),
            Constellation::Psk8 => {
                let mut pts = vec![Complex64::new(0.0, 0.0); 8];
                for m in 0..8 {
                    let angle = std::f64::consts::PI / 4.0 * m as f64 + std::f64::consts::PI / 8.0;
                    pts[gray(m)] = Complex64::from_polar(1.0, angle);
                }
                pts
            }
            Constellation::Apsk16 => {
                let r1 = (16.0 / (4.0 + 12.0 * APSK16_RING_RATIO * APSK16_RING_RATIO)).sqrt();
                let r2 = APSK16_RING_RATIO * r1;
                let mut pts = vec![Complex64::new(0.0, 0.0); 16];
                let outer_order = [0usize, 1, 3, 2, 6, 7, 5, 4, 8, 9, 11, 10];
                for (m, label) in outer_order.iter().enumerate() {
                    let angle = std::f64::consts::PI / 6.0 * m as f64 + std::f64::consts::PI / 12.0;
                    pts[*label] = Complex64::from_polar(r2, angle);
                }
                for m in 0..4 {
                    let angle = std::f64::consts::FRAC_PI_2 * m as f64 + std::f64::consts::FRAC_PI_4;
                    pts[12 + gray(m)] = Complex64::from_polar(r1, angle);
                }
                pts
            }
        }
    }

    /// Label of the nearest point.
    pub fn demap(self, z: Complex64, points: &[Complex64]) -> usize {
        debug_assert_eq!(points.len(), 1 << self.bits_per_symbol());
        let mut best = (0, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    /// Uniformly random symbols as `(labels, points)`, both `rows x cols`.
    pub fn random_symbols(self, rows: usize, cols: usize, seed: u64) -> (DMatrix<usize>, CMatrix) {
        let pts = self.points();
        let mut rng = rng_from_seed(seed);
        let dist = Uniform::new(0, pts.len()).expect("non-empty constellation");
        let labels = DMatrix::from_fn(rows, cols, |_, _| dist.sample(&mut rng));
        let symbols = labels.map(|l| pts[l]);
        (labels, symbols)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperframeConfig {
    pub sosf_length: usize,
    pub pilot_length: usize,
    pub payload_length: usize,
    pub constellation: Constellation,
}

impl Default for SuperframeConfig {
    fn default() -> Self {
        Self {
            sosf_length: 256,
            pilot_length: 32,
            payload_length: 1024,
            constellation: Constellation::Qpsk,
        }
    }
}

impl SuperframeConfig {
    pub fn validate(&self, antennas: usize) -> Result<()> {
        if !self.sosf_length.is_power_of_two() {
            return Err(Error::InvalidOrder(self.sosf_length));
        }
        if !self.pilot_length.is_power_of_two() {
            return Err(Error::InvalidOrder(self.pilot_length));
        }
        if self.pilot_length < antennas {
            return Err(Error::Dimension(format!(
                "pilot length {} < {antennas} antennas",
                self.pilot_length
            )));
        }
        if self.payload_length == 0 {
            return Err(Error::Dimension("payload length must be >= 1".into()));
        }
        Ok(())
    }

    pub fn total_length(&self) -> usize {
        self.sosf_length + self.pilot_length + self.payload_length
    }
}

/// Equal-length symbol streams (one per row) with their field boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolStreams {
    pub samples: CMatrix,
    pub sosf: Range<usize>,
    pub pilots: Range<usize>,
    pub payload: Range<usize>,
}

impl SymbolStreams {
    pub fn streams(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }

    pub fn field(&self, range: &Range<usize>) -> CMatrix {
        self.samples.columns(range.start, range.len()).into_owned()
    }

    pub fn pilot_field(&self) -> CMatrix {
        self.field(&self.pilots)
    }

    pub fn payload_field(&self) -> CMatrix {
        self.field(&self.payload)
    }
}

/// Assembles `[SOSF | pilots | W s_t]` for every antenna.
pub fn build_superframe(
    payload_symbols: &CMatrix,
    w: &PrecodingMatrix,
    config: &SuperframeConfig,
) -> Result<SymbolStreams> {
    let n = w.antennas();
    config.validate(n)?;
    if payload_symbols.nrows() != w.users() || payload_symbols.ncols() != config.payload_length {
        return Err(Error::Dimension(format!(
            "payload is {:?}, expected {}x{}",
            payload_symbols.shape(),
            w.users(),
            config.payload_length
        )));
    }
    let sosf = sosf_sequence(config.sosf_length)?;
    let pilots = pilot_matrix(n, config.pilot_length)?;
    let s = config.sosf_length;
    let p = config.pilot_length;
    let mut samples = CMatrix::zeros(n, config.total_length());
    for a in 0..n {
        for (t, chip) in sosf.iter().enumerate() {
            samples[(a, t)] = Complex64::new(*chip, 0.0);
        }
        for t in 0..p {
            samples[(a, s + t)] = Complex64::new(pilots[(a, t)], 0.0);
        }
    }
    samples
        .columns_mut(s + p, config.payload_length)
        .copy_from(&(w.matrix() * payload_symbols));
    Ok(SymbolStreams {
        samples,
        sosf: 0..s,
        pilots: s..s + p,
        payload: s + p..s + p + config.payload_length,
    })
}

/// `r_t = H x_t + z_t` with circularly symmetric noise of variance `noise_variance`.
pub fn transmit(h: &ChannelMatrix, streams: &SymbolStreams, noise_variance: f64, seed: u64) -> Result<SymbolStreams> {
    if h.feeds() != streams.streams() {
        return Err(Error::Dimension(format!(
            "channel has {} feeds but {} streams were sent",
            h.feeds(),
            streams.streams()
        )));
    }
    if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
        return Err(Error::Value(format!("noise variance {noise_variance}")));
    }
    let mut rx = h.matrix() * &streams.samples;
    if noise_variance > 0.0 {
        add_awgn(&mut rx, noise_variance, seed);
    }
    Ok(SymbolStreams {
        samples: rx,
        sosf: streams.sosf.clone(),
        pilots: streams.pilots.clone(),
        payload: streams.payload.clone(),
    })
}

/// Adds complex Gaussian noise, drawn instant by instant (column-major).
pub fn add_awgn(m: &mut CMatrix, variance: f64, seed: u64) {
    let normal = Normal::new(0.0, (variance / 2.0).sqrt()).expect("finite std");
    let mut rng = rng_from_seed(seed);
    for z in m.iter_mut() {
        *z += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
    }
}

/// Lag maximizing the normalized cross-correlation with the marker.
pub fn detect_sosf(rx: &[Complex64], sosf: &[f64]) -> Result<usize> {
    let l = sosf.len();
    if l == 0 || rx.len() < l {
        return Err(Error::Dimension(format!(
            "received {} samples, marker has {l}",
            rx.len()
        )));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for lag in 0..=rx.len() - l {
        let window = &rx[lag..lag + l];
        let corr: Complex64 = window.iter().zip(sosf).map(|(r, s)| r * s).sum();
        let energy: f64 = window.iter().map(|r| r.norm_sqr()).sum();
        let score = if energy > 0.0 { corr.norm_sqr() / energy } else { 0.0 };
        if score > best.1 {
            best = (lag, score);
        }
    }
    Ok(best.0)
}

/// Correlation estimate `h_kn = <rx_k, pilot_n> / pilot_length`.
pub fn estimate_csi(rx_pilot_field: &CMatrix, pilot_matrix: &DMatrix<f64>) -> Result<ChannelMatrix> {
    let len = pilot_matrix.ncols();
    if rx_pilot_field.ncols() != len {
        return Err(Error::Dimension(format!(
            "pilot field has {} samples, pilots have {len}",
            rx_pilot_field.ncols()
        )));
    }
    if len < pilot_matrix.nrows() {
        return Err(Error::Dimension(format!(
            "pilot length {len} < {} antennas",
            pilot_matrix.nrows()
        )));
    }
    let p = crate::linalg::from_real(pilot_matrix);
    let est = rx_pilot_field * p.transpose() / Complex64::new(len as f64, 0.0);
    ChannelMatrix::new(est)
}

/// Sends the pilot field at per-antenna power `tx_power` over `h` and
/// returns the estimate of `h` (rescaled by `1 / sqrt(tx_power)`).
pub fn estimate_channel_via_pilots(
    h: &ChannelMatrix,
    pilot_length: usize,
    tx_power: f64,
    noise_variance: f64,
    seed: u64,
) -> Result<ChannelMatrix> {
    if !(tx_power > 0.0) {
        return Err(Error::Value(format!("pilot power must be positive, got {tx_power}")));
    }
    let pilots = pilot_matrix(h.feeds(), pilot_length)?;
    let amp = tx_power.sqrt();
    let mut rx = h.matrix() * crate::linalg::from_real(&pilots) * Complex64::new(amp, 0.0);
    if noise_variance > 0.0 {
        add_awgn(&mut rx, noise_variance, seed);
    }
    let est = estimate_csi(&rx, &pilots)?;
    ChannelMatrix::new(est.into_matrix() / Complex64::new(amp, 0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolErrorReport {
    pub ser: Vec<f64>,
    pub ber: Vec<f64>,
    pub evm: Vec<f64>,
}

/// Uncoded nearest-neighbour symbol and bit error rates plus EVM per user.
pub fn measure_ser(
    rx_payload: &CMatrix,
    tx_symbols: &CMatrix,
    constellation: Constellation,
) -> Result<SymbolErrorReport> {
    if rx_payload.shape() != tx_symbols.shape() {
        return Err(Error::Dimension(format!(
            "rx {:?} vs tx {:?}",
            rx_payload.shape(),
            tx_symbols.shape()
        )));
    }
    let pts = constellation.points();
    let bits = constellation.bits_per_symbol();
    let (k, l) = rx_payload.shape();
    let mut report = SymbolErrorReport {
        ser: Vec::with_capacity(k),
        ber: Vec::with_capacity(k),
        evm: Vec::with_capacity(k),
    };
    for u in 0..k {
        let mut sym_err = 0usize;
        let mut bit_err = 0u32;
        let mut err_pow = 0.0;
        let mut ref_pow = 0.0;
        for t in 0..l {
            let rx = rx_payload[(u, t)];
            let tx = tx_symbols[(u, t)];
            let a = constellation.demap(rx, &pts);
            let b = constellation.demap(tx, &pts);
            if a != b {
                sym_err += 1;
                bit_err += (a ^ b).count_ones();
            }
            err_pow += (rx - tx).norm_sqr();
            ref_pow += tx.norm_sqr();
        }
        let n = l.max(1) as f64;
        report.ser.push(sym_err as f64 / n);
        report.ber.push(bit_err as f64 / (n * bits as f64));
        report
            .evm
            .push(if ref_pow > 0.0 { (err_pow / ref_pow).sqrt() } else { 0.0 });
    }
    Ok(report)
}
