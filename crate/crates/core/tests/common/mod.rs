//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use mbprecode::channel::{random_coupled_channel, ChannelMatrix};
use mbprecode::{CMatrix, Complex64};
use nalgebra::{DMatrix, DVector};

/// Reference per-UT SNIR for FFR with MMSE, UT1..UT16, in dB.
pub const SNIR_FIXTURE_FFR_MMSE_DB: [f64; 16] = [
    11.77, 12.99, 12.54, 12.14, 13.61, 14.95, 12.16, 12.46, 13.57, 12.73, 11.95, 12.21, 13.61, 13.34, 12.14, 10.51,
];

/// Reference per-UT throughput for FFR with MMSE, in Mbps.
pub const RATE_FIXTURE_FFR_MMSE_MBPS: [f64; 16] = [
    16.11, 17.14, 17.14, 16.11, 17.14, 21.45, 16.11, 16.11, 17.14, 17.14, 16.11, 16.11, 17.14, 17.14, 16.11, 14.48,
];

/// Reference per-UT throughput for 4FR at constant PSD, in Mbps.
pub const RATE_FIXTURE_4FR_PSD_MBPS: [f64; 16] = [
    5.36, 6.01, 5.36, 5.36, 6.01, 6.01, 5.36, 5.36, 5.36, 5.36, 5.36, 5.36, 5.36, 5.36, 5.36, 5.36,
];

/// Reference per-UT throughput for 4FR at constant total power, in Mbps.
pub const RATE_FIXTURE_4FR_TOTAL_MBPS: [f64; 16] = [6.69; 16];

/// Stated system totals for the three throughput columns above.
pub const RATE_FIXTURE_SYSTEM: [f64; 3] = [268.70, 87.77, 107.10];

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Well-conditioned square channel with a mild path-loss scale.
pub fn scaled_channel(k: usize, coupling: f64, scale: f64, seed: u64) -> ChannelMatrix {
    let h = random_coupled_channel(k, k, coupling, seed).unwrap();
    ChannelMatrix::new(h.matrix() * c(scale, 0.0)).unwrap()
}

/// Triple-loop product, no BLAS-style kernels.
pub fn naive_product(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(a.nrows(), b.ncols());
    for i in 0..a.nrows() {
        for j in 0..b.ncols() {
            let mut acc = c(0.0, 0.0);
            for l in 0..a.ncols() {
                acc += a[(i, l)] * b[(l, j)];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Per-user SNIR of `G = H W` under noise `sigma2`, written out term by term.
pub fn snir_oracle(h: &CMatrix, w: &CMatrix, sigma2: f64) -> Vec<f64> {
    let g = naive_product(h, w);
    (0..g.nrows())
        .map(|k| {
            let desired = g[(k, k)].norm_sqr();
            let interference: f64 = (0..g.ncols()).filter(|j| *j != k).map(|j| g[(k, j)].norm_sqr()).sum();
            desired / (interference + sigma2)
        })
        .collect()
}

pub fn max_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Largest generalized eigenpair of the pencil `(a, b)` with `b` Hermitian PD,
/// by Cholesky whitening and a dense Hermitian eigensolve.
pub fn generalized_max_eig(a: &CMatrix, b: &CMatrix) -> (f64, DVector<Complex64>) {
    let l = b.clone().cholesky().expect("pencil B must be PD").l();
    let l_inv = l.clone().try_inverse().unwrap();
    let whitened = &l_inv * a * l_inv.adjoint();
    let herm = (&whitened + whitened.adjoint()) * c(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let (idx, val) =
        eig.eigenvalues.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc },
        );
    let v = eig.eigenvectors.column(idx).into_owned();
    let u = l_inv.adjoint() * v;
    let norm = u.norm();
    (val, u / c(norm, 0.0))
}

/// Exhaustive search over real unit beamformers `u_i = (cos t_i, sin t_i)` of
/// the minimum total downlink power meeting SNIR targets on a real 2x2
/// channel. `steps` grid points cover `[0, pi)` for each user.
pub fn brute_force_min_power_2x2(h: &[[f64; 2]; 2], gamma: [f64; 2], sigma2: f64, steps: usize) -> Option<f64> {
    let angles: Vec<(f64, f64)> = (0..steps)
        .map(|s| {
            let t = std::f64::consts::PI * s as f64 / steps as f64;
            (t.cos(), t.sin())
        })
        .collect();
    // proj[i][s] = h_i . u(t_s)
    let proj: Vec<Vec<f64>> = (0..2)
        .map(|i| angles.iter().map(|(cs, sn)| h[i][0] * cs + h[i][1] * sn).collect())
        .collect();
    let (g1, g2) = (gamma[0], gamma[1]);
    let mut best = f64::INFINITY;
    for s1 in 0..steps {
        let a11 = proj[0][s1].powi(2);
        let a21 = proj[1][s1].powi(2);
        for (q0, q1) in proj[0].iter().zip(&proj[1]) {
            let a22 = q1.powi(2);
            let a12 = q0.powi(2);
            let det = a11 * a22 - g1 * g2 * a12 * a21;
            if det <= 0.0 {
                continue;
            }
            let p1 = (g1 * sigma2 * a22 + g1 * a12 * g2 * sigma2) / det;
            let p2 = (a11 * g2 * sigma2 + g2 * a21 * g1 * sigma2) / det;
            if p1 > 0.0 && p2 > 0.0 && p1 + p2 < best {
                best = p1 + p2;
            }
        }
    }
    best.is_finite().then_some(best)
}

pub fn real_channel(rows: &[[f64; 2]; 2]) -> ChannelMatrix {
    let m = DMatrix::from_fn(2, 2, |i, j| c(rows[i][j], 0.0));
    ChannelMatrix::new(m).unwrap()
}

/// Standard normal tail probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}
