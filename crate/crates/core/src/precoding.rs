//! Linear precoders for the multibeam forward link.
//!
//! All precoders return an N x K matrix `W` whose rows map to feeds and whose
//! columns map to users, so that the effective channel is `H W`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::channel::ChannelMatrix;
use crate::linalg::{self, CONDITION_LIMIT};
use crate::{CMatrix, Complex64, Error, Result};

/// N x K precoding matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecodingMatrix(CMatrix);

impl PrecodingMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        if !linalg::all_finite(&entries) {
            return Err(Error::Value("precoder contains NaN or Inf".into()));
        }
        Ok(Self(entries))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn antennas(&self) -> usize {
        self.0.nrows()
    }

    pub fn users(&self) -> usize {
        self.0.ncols()
    }

    /// Squared row norms (per-antenna powers for unit-power symbols).
    pub fn per_antenna_power(&self) -> Vec<f64> {
        linalg::row_norms_sq(&self.0)
    }

    /// Squared column norms (per-beam powers for unit-power symbols).
    pub fn per_beam_power(&self) -> Vec<f64> {
        linalg::col_norms_sq(&self.0)
    }
}

/// `W = H^H (H H^H)^{-1}`.
pub fn zero_forcing(h: &ChannelMatrix) -> Result<PrecodingMatrix> {
    let hm = h.matrix();
    let gram = hm * hm.adjoint();
    let condition = linalg::condition_number(&gram);
    if condition > CONDITION_LIMIT {
        return Err(Error::RankDeficient { condition });
    }
    let x = linalg::solve_hpd(&gram, hm).ok_or(Error::RankDeficient { condition })?;
    PrecodingMatrix::new(x.adjoint())
}

/// Regularized inverse `W = H^H (H H^H + sigma2 I)^{-1}`; `sigma2 = 0` is ZF.
pub fn mmse(h: &ChannelMatrix, sigma2: f64) -> Result<PrecodingMatrix> {
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::Value(format!("sigma2 must be >= 0, got {sigma2}")));
    }
    if sigma2 == 0.0 {
        return zero_forcing(h);
    }
    let hm = h.matrix();
    let k = h.users();
    let gram = hm * hm.adjoint() + CMatrix::identity(k, k) * Complex64::new(sigma2, 0.0);
    // (H H^H + s I) is Hermitian PD, so W^H = (H H^H + s I)^{-1} H.
    let x = linalg::solve_hpd(&gram, hm)
        .ok_or_else(|| Error::NumericalBreakdown("regularized Gram matrix not PD".into()))?;
    PrecodingMatrix::new(x.adjoint())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacParams {
    /// Per-antenna power budget.
    pub phi: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Starting value for every dual variable.
    pub initial_dual: f64,
}

impl Default for PacParams {
    fn default() -> Self {
        Self {
            phi: 1.0,
            tolerance: 1e-6,
            max_iterations: 1000,
            initial_dual: 1.0,
        }
    }
}

impl PacParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.phi > 0.0
            && self.phi.is_finite()
            && self.tolerance > 0.0
            && self.tolerance < 1.0
            && self.max_iterations >= 1
            && self.initial_dual > 0.0
            && self.initial_dual.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Value(format!("invalid PAC parameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PacDiagnostics {
    pub iterations: usize,
    /// `max_n |rho_n / phi - 1|` at exit.
    pub mismatch: f64,
    /// `max_n lambda_n |rho_n - phi|` at exit.
    pub slackness_residual: f64,
    /// Antennas that ended with a vanishing dual and spare power.
    pub slack_antennas: usize,
}

#[derive(Debug, Clone)]
pub struct PacSolution {
    pub precoder: PrecodingMatrix,
    pub duals: Vec<f64>,
    pub diagnostics: PacDiagnostics,
}

fn pac_precoder(h: &CMatrix, duals: &[f64]) -> Option<CMatrix> {
    let n = h.ncols();
    let mut a = h.adjoint() * h;
    for (i, l) in duals.iter().enumerate().take(n) {
        a[(i, i)] += Complex64::new(*l, 0.0);
    }
    linalg::solve_hpd(&a, &h.adjoint())
}

/// Per-antenna power constrained MMSE, `W = (H^H H + Lambda)^{-1} H^H`.
///
/// The diagonal dual `Lambda` is found by the multiplicative fixed point
/// `lambda_n <- lambda_n * rho_n / phi`. The loop exits once every antenna
/// meets its budget within `tolerance`, or once the KKT conditions hold
/// within tolerance: no antenna above `phi (1 + tol)` and
/// `lambda_n |rho_n - phi| <= phi^2 tol` for every `n`. The second exit
/// covers budgets that ZF already satisfies, where the duals only decay
/// towards zero.
pub fn mmse_pac(h: &ChannelMatrix, params: &PacParams) -> Result<PacSolution> {
    params.validate()?;
    let hm = h.matrix();
    let phi = params.phi;
    let tol = params.tolerance;
    let mut duals = vec![params.initial_dual; h.feeds()];
    let mut mismatch = f64::INFINITY;
    for iteration in 1..=params.max_iterations {
        let w = pac_precoder(hm, &duals).ok_or_else(|| Error::NumericalBreakdown("H^H H + Lambda not PD".into()))?;
        let rho = linalg::row_norms_sq(&w);
        mismatch = rho.iter().map(|r| (r / phi - 1.0).abs()).fold(0.0, f64::max);
        let slackness = rho
            .iter()
            .zip(&duals)
            .map(|(r, l)| l * (r - phi).abs())
            .fold(0.0, f64::max);
        let feasible = rho.iter().all(|r| *r <= phi * (1.0 + tol));
        if mismatch <= tol || (feasible && slackness <= phi * phi * tol) {
            let slack_antennas = rho.iter().filter(|r| (*r / phi - 1.0).abs() > tol).count();
            return Ok(PacSolution {
                precoder: PrecodingMatrix::new(w)?,
                duals,
                diagnostics: PacDiagnostics {
                    iterations: iteration,
                    mismatch,
                    slackness_residual: slackness,
                    slack_antennas,
                },
            });
        }
        for (l, r) in duals.iter_mut().zip(&rho) {
            *l *= r / phi;
            if (*l == 0.0 && *r > phi) || !l.is_finite() {
                return Err(Error::NumericalBreakdown(format!(
                    "dual variable collapsed to {l} while antenna power {r} exceeds {phi}"
                )));
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: params.max_iterations,
        mismatch,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptlParams {
    /// Linear SNIR targets, one per user.
    pub targets: Vec<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Divergence guard on the virtual uplink powers.
    pub power_cap: f64,
}

impl OptlParams {
    pub fn with_targets(targets: Vec<f64>) -> Self {
        Self {
            targets,
            tolerance: 1e-8,
            max_iterations: 500,
            power_cap: 1e9,
        }
    }

    pub fn validate(&self, users: usize) -> Result<()> {
        if self.targets.len() != users {
            return Err(Error::Dimension(format!(
                "{} SNIR targets for {users} users",
                self.targets.len()
            )));
        }
        if self.targets.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(Error::Value("SNIR targets must be positive".into()));
        }
        if !(self.tolerance > 0.0 && self.max_iterations >= 1 && self.power_cap > 0.0) {
            return Err(Error::Value(format!("invalid OPTL parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OptlState {
    /// N x K, unit-norm columns `u_i`.
    pub beamformers: CMatrix,
    pub uplink_powers: Vec<f64>,
    pub achieved_ratios: Vec<f64>,
    pub downlink_powers: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    /// `max_i |mu_i / gamma_i - 1|` after every beamformer update.
    pub residual_history: Vec<f64>,
}

/// Virtual uplink beamformer update for fixed uplink powers.
///
/// With `B_i = I + sum_{j != i} p_j h_j h_j^H`, the maximizer of
/// `p_i |u^H h_i|^2 / (u^H B_i u)` is `u_i ∝ B_i^{-1} h_i` and its value is
/// `mu_i = p_i h_i^H B_i^{-1} h_i`.
pub fn beamformer_update(h: &ChannelMatrix, uplink_powers: &[f64]) -> Result<(CMatrix, Vec<f64>)> {
    let k = h.users();
    let n = h.feeds();
    if uplink_powers.len() != k {
        return Err(Error::Dimension(format!(
            "{} uplink powers for {k} users",
            uplink_powers.len()
        )));
    }
    if uplink_powers.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
        return Err(Error::Value("uplink powers must be finite and >= 0".into()));
    }
    let vecs: Vec<DVector<Complex64>> = (0..k).map(|i| h.user_vector(i)).collect();
    let mut total = CMatrix::identity(n, n);
    for (v, p) in vecs.iter().zip(uplink_powers) {
        total += v * v.adjoint() * Complex64::new(*p, 0.0);
    }
    let mut u = CMatrix::zeros(n, k);
    let mut mu = Vec::with_capacity(k);
    for (i, v) in vecs.iter().enumerate() {
        let b = &total - v * v.adjoint() * Complex64::new(uplink_powers[i], 0.0);
        let x = linalg::solve_hpd(&b, &CMatrix::from_column_slice(n, 1, v.as_slice()))
            .ok_or_else(|| Error::NumericalBreakdown("interference covariance not PD".into()))?;
        let quad = v.iter().zip(x.iter()).map(|(a, b)| a.conj() * b).sum::<Complex64>().re;
        mu.push(uplink_powers[i] * quad);
        let norm = x.norm();
        if norm > 0.0 {
            u.set_column(i, &(x.column(0) / Complex64::new(norm, 0.0)));
        }
    }
    Ok((u, mu))
}

/// `p_i <- (gamma_i / mu_i) p_i`.
pub fn power_control_update(
    uplink_powers: &[f64],
    achieved_ratios: &[f64],
    targets: &[f64],
    power_cap: f64,
) -> Result<Vec<f64>> {
    if uplink_powers.len() != achieved_ratios.len() || uplink_powers.len() != targets.len() {
        return Err(Error::Dimension("power control vectors differ in length".into()));
    }
    let mut out = Vec::with_capacity(uplink_powers.len());
    for ((p, mu), g) in uplink_powers.iter().zip(achieved_ratios).zip(targets) {
        if !(*mu > 0.0) {
            return Err(Error::NumericalBreakdown(format!(
                "achieved ratio {mu} is not positive"
            )));
        }
        let next = g / mu * p;
        if !(next <= power_cap) {
            return Err(Error::DivergenceDetected {
                power: next,
                cap: power_cap,
            });
        }
        out.push(next);
    }
    Ok(out)
}

/// Downlink powers meeting the SNIR targets exactly for fixed beamformers.
///
/// Solves `F p = q` with `q_i = gamma_i sigma2`, `F_ii = |h_i^H u_i|^2` and
/// `F_ij = -gamma_i |h_i^H u_j|^2`.
pub fn downlink_power_alloc(
    beamformers: &CMatrix,
    h: &ChannelMatrix,
    targets: &[f64],
    sigma2: f64,
) -> Result<Vec<f64>> {
    let k = h.users();
    if beamformers.shape() != (h.feeds(), k) || targets.len() != k {
        return Err(Error::Dimension(format!(
            "beamformers {:?} / targets {} do not match channel {}x{}",
            beamformers.shape(),
            targets.len(),
            k,
            h.feeds()
        )));
    }
    if targets.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::Value("SNIR targets must be positive".into()));
    }
    let gains = (h.matrix() * beamformers).map(|z| z.norm_sqr());
    let f = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            gains[(i, i)]
        } else {
            -targets[i] * gains[(i, j)]
        }
    });
    let q = DVector::from_iterator(k, targets.iter().map(|g| g * sigma2));
    let p = f
        .lu()
        .solve(&q)
        .ok_or_else(|| Error::InfeasibleTargets("coupling matrix is singular".into()))?;
    if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InfeasibleTargets(format!("user {i} needs power {v}")));
    }
    Ok(p.iter().copied().collect())
}

/// Optimal linear precoder by virtual uplink power iteration and
/// downlink power allocation. Returns `W` with columns `sqrt(p_i) u_i`.
pub fn optl(h: &ChannelMatrix, sigma2: f64, params: &OptlParams) -> Result<(PrecodingMatrix, OptlState)> {
    let k = h.users();
    params.validate(k)?;
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Value(format!("sigma2 must be positive, got {sigma2}")));
    }
    let mut p = vec![1.0; k];
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let (mut u, mut mu) = (CMatrix::zeros(h.feeds(), k), vec![0.0; k]);
    while iterations < params.max_iterations {
        (u, mu) = beamformer_update(h, &p)?;
        iterations += 1;
        let residual = mu
            .iter()
            .zip(&params.targets)
            .map(|(m, g)| (m / g - 1.0).abs())
            .fold(0.0, f64::max);
        history.push(residual);
        if residual <= params.tolerance {
            converged = true;
            break;
        }
        p = power_control_update(&p, &mu, &params.targets, params.power_cap)?;
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            mismatch: history.last().copied().unwrap_or(f64::INFINITY),
        });
    }
    let q = downlink_power_alloc(&u, h, &params.targets, sigma2)?;
    let mut w = u.clone();
    for (i, qi) in q.iter().enumerate() {
        w.column_mut(i).scale_mut(qi.sqrt());
    }
    let state = OptlState {
        beamformers: u,
        uplink_powers: p,
        achieved_ratios: mu,
        downlink_powers: q,
        iterations_used: iterations,
        converged,
        residual_history: history,
    };
    Ok((PrecodingMatrix::new(w)?, state))
}

/// Post-design rescaling applied before transmission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "phi")]
pub enum Normalization {
    /// Every row to unit norm.
    UnitRow,
    /// Every row to norm `sqrt(phi)`.
    Pac(f64),
    /// Whole matrix scaled so the strongest row has power `phi`.
    Mpc(f64),
    /// Per-antenna re-scaling after design; numerically the same as `Pac`.
    Par(f64),
}

/// Rows with norm below this fraction of the largest row norm are degenerate.
pub const DEGENERATE_ROW_EPS: f64 = 1e-15;

pub fn normalize(w: &PrecodingMatrix, mode: Normalization) -> Result<PrecodingMatrix> {
    let norms: Vec<f64> = w.per_antenna_power().iter().map(|p| p.sqrt()).collect();
    let max_norm = norms.iter().cloned().fold(0.0, f64::max);
    let target_norm = |phi: f64| -> Result<f64> {
        if phi > 0.0 && phi.is_finite() {
            Ok(phi.sqrt())
        } else {
            Err(Error::Value(format!("power budget must be positive, got {phi}")))
        }
    };
    let mut out = w.matrix().clone();
    match mode {
        Normalization::UnitRow | Normalization::Pac(_) | Normalization::Par(_) => {
            let target = match mode {
                Normalization::UnitRow => 1.0,
                Normalization::Pac(phi) | Normalization::Par(phi) => target_norm(phi)?,
                Normalization::Mpc(_) => unreachable!(),
            };
            for (n, norm) in norms.iter().enumerate() {
                if !(*norm > DEGENERATE_ROW_EPS * max_norm) {
                    return Err(Error::DegenerateRow { row: n, norm: *norm });
                }
                out.row_mut(n).scale_mut(target / norm);
            }
        }
        Normalization::Mpc(phi) => {
            let target = target_norm(phi)?;
            if !(max_norm > 0.0) {
                return Err(Error::DegenerateRow { row: 0, norm: max_norm });
            }
            out.scale_mut(target / max_norm);
        }
    }
    PrecodingMatrix::new(out)
}
