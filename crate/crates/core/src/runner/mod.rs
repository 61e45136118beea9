//! Scenario orchestration: every (P_sat point, trial) cell is computed
//! independently from its own derived seeds and merged in a fixed order.

pub mod bench;
pub mod config;
pub mod report;

use crate::channel::{apply_csi_error, ChannelMatrix};
use crate::linkmetrics::{
    effective_channel, four_color_snir, power_profile, snir, throughput, to_db, LinkBudgetPoint, ModcodTable,
    ReuseScheme, ThroughputParams,
};
use crate::precoding::{mmse, mmse_pac, normalize, optl, zero_forcing, PrecodingMatrix};
use crate::seed::derive_seed;
use crate::superframe::estimate_channel_via_pilots;
use crate::{CMatrix, Error, Result};

pub use bench::{benchmark_precoders, BenchReport, BenchRow};
pub use config::{
    ChannelSource, CsiEstimation, FourColorSpec, PrecoderKind, PrecoderSpec, ScenarioConfig, SweepRange,
    DEFAULT_OPERATING_POINT_DBW,
};
pub use report::{emit_report, summarize, SummaryRow};

const CSI_ERROR_STREAM: u64 = 1;
const PILOT_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverDiagnostics {
    pub iterations: Option<usize>,
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellData {
    pub snir_db: Vec<f64>,
    pub throughput_mbps: Vec<f64>,
    /// Per-antenna powers of the transmitted precoder, before scaling by P.
    pub per_antenna_power: Vec<f64>,
    pub per_beam_power: Vec<f64>,
    pub diagnostics: SolverDiagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellRecord {
    pub scheme: String,
    pub psat_dbw: f64,
    pub trial: usize,
    pub outcome: std::result::Result<CellData, CellFailure>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunReport {
    pub cells: Vec<CellRecord>,
}

/// One point of a per-scheme curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub psat_dbw: f64,
    pub avg_snir_db: f64,
    pub system_throughput_mbps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub scheme: String,
    pub points: Vec<CurvePoint>,
}

struct Context {
    h: ChannelMatrix,
    table: ModcodTable,
    tput: ThroughputParams,
    reuse: Vec<(String, ReuseScheme)>,
}

fn design_precoder(
    spec: &PrecoderSpec,
    h_hat: &ChannelMatrix,
    reg: f64,
) -> Result<(PrecodingMatrix, SolverDiagnostics)> {
    let (w, diag) = match spec.kind {
        PrecoderKind::None => {
            let (k, n) = (h_hat.users(), h_hat.feeds());
            (
                PrecodingMatrix::new(CMatrix::identity(n, k))?,
                SolverDiagnostics::default(),
            )
        }
        PrecoderKind::Zf => (zero_forcing(h_hat)?, SolverDiagnostics::default()),
        PrecoderKind::Mmse => (mmse(h_hat, reg)?, SolverDiagnostics::default()),
        PrecoderKind::MmsePac => {
            let sol = mmse_pac(h_hat, &spec.pac_params(reg))?;
            let d = SolverDiagnostics {
                iterations: Some(sol.diagnostics.iterations),
                residual: Some(sol.diagnostics.mismatch),
            };
            (sol.precoder, d)
        }
        PrecoderKind::Optl => {
            let (w, state) = optl(h_hat, reg, &spec.optl_params(h_hat.users()))?;
            let d = SolverDiagnostics {
                iterations: Some(state.iterations_used),
                residual: state.residual_history.last().copied(),
            };
            (w, d)
        }
    };
    let w = match spec.normalization {
        Some(mode) => normalize(&w, mode)?,
        None => w,
    };
    Ok((w, diag))
}

fn evaluate_link(
    ctx: &Context,
    cfg: &ScenarioConfig,
    w: &PrecodingMatrix,
    power: f64,
    fraction: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let g = effective_channel(&ctx.h, w)?;
    let lin = snir(&g, cfg.noise_variance, power);
    Ok(to_db_and_rate(ctx, &lin, fraction))
}

fn to_db_and_rate(ctx: &Context, lin: &[f64], fraction: f64) -> (Vec<f64>, Vec<f64>) {
    let db: Vec<f64> = lin.iter().map(|s| to_db(*s)).collect();
    let rate = db
        .iter()
        .map(|s| {
            throughput(
                *s,
                &ctx.table,
                ctx.tput.acm_margin_db,
                ctx.tput.symbol_rate_msps,
                fraction,
                ctx.tput.polarization_factor,
            )
        })
        .collect();
    (db, rate)
}

fn failure(e: &Error) -> CellFailure {
    CellFailure {
        code: e.code().to_string(),
        message: e.to_string(),
    }
}

fn run_cell(ctx: &Context, cfg: &ScenarioConfig, psat_dbw: f64, trial: usize) -> Vec<CellRecord> {
    let mut out = Vec::with_capacity(cfg.precoders.len() + ctx.reuse.len());
    let record = |scheme: String, outcome| CellRecord {
        scheme,
        psat_dbw,
        trial,
        outcome,
    };
    let budget = match LinkBudgetPoint::new(psat_dbw, cfg.obo_db) {
        Ok(b) => b,
        Err(e) => {
            let labels = cfg.precoders.iter().map(PrecoderSpec::scheme_label);
            for label in labels.chain(ctx.reuse.iter().map(|(l, _)| l.clone())) {
                out.push(record(label, Err(failure(&e))));
            }
            return out;
        }
    };
    let power = budget.per_beam_power_linear;
    let trial_seed = derive_seed(cfg.seed, trial as u64);
    let h_hat = (|| -> Result<ChannelMatrix> {
        let base = match cfg.csi_estimation {
            CsiEstimation::Perfect => ctx.h.clone(),
            CsiEstimation::Pilots { pilot_length } => {
                let seed = derive_seed(derive_seed(trial_seed, PILOT_STREAM), psat_dbw.to_bits());
                estimate_channel_via_pilots(&ctx.h, pilot_length, power, cfg.noise_variance, seed)?
            }
        };
        apply_csi_error(&base, &cfg.csi_error, derive_seed(trial_seed, CSI_ERROR_STREAM))
    })();
    let reg = cfg.noise_variance / power;
    for spec in &cfg.precoders {
        let outcome = h_hat.as_ref().map_err(Clone::clone).and_then(|h_hat| {
            let (w, diagnostics) = design_precoder(spec, h_hat, reg)?;
            let (snir_db, throughput_mbps) = evaluate_link(ctx, cfg, &w, power, 1.0)?;
            let (per_antenna_power, per_beam_power) = power_profile(&w);
            Ok(CellData {
                snir_db,
                throughput_mbps,
                per_antenna_power,
                per_beam_power,
                diagnostics,
            })
        });
        out.push(record(spec.scheme_label(), outcome.map_err(|e| failure(&e))));
    }
    let noise = cfg.noise();
    for (label, scheme) in &ctx.reuse {
        let outcome = noise
            .as_ref()
            .map_err(Clone::clone)
            .and_then(|noise| four_color_snir(&ctx.h, scheme, &budget, noise))
            .map(|lin| {
                let (snir_db, throughput_mbps) = to_db_and_rate(ctx, &lin, scheme.bandwidth_fraction());
                // Unprecoded: beam k carries user k at the scaled 4FR power.
                let scale = four_color_scale(scheme);
                CellData {
                    snir_db,
                    throughput_mbps,
                    per_antenna_power: vec![scale; ctx.h.feeds()],
                    per_beam_power: vec![scale; ctx.h.users()],
                    diagnostics: SolverDiagnostics::default(),
                }
            });
        out.push(record(label.clone(), outcome.map_err(|e| failure(&e))));
    }
    out
}

fn four_color_scale(scheme: &ReuseScheme) -> f64 {
    match scheme {
        ReuseScheme::Ffr => 1.0,
        ReuseScheme::FourColor {
            per_beam_power_scale, ..
        } => *per_beam_power_scale,
    }
}

/// Runs every (P_sat point, scheme, trial) cell of the scenario.
///
/// Solver failures are recorded in their cell; only configuration and
/// channel-loading problems abort the run.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunReport> {
    cfg.validate()?;
    let h = cfg.build_channel().map_err(|e| match e {
        Error::Io(m) => Error::Config(format!("channel file: {m}")),
        other => other,
    })?;
    let ctx = Context {
        reuse: cfg.reuse_schemes(h.feeds())?,
        table: cfg.modcods()?,
        tput: cfg.throughput_params(),
        h,
    };
    cfg.noise()?;
    let points = cfg.psat_sweep.points();
    let tasks: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..cfg.trials).map(move |t| (p, t)))
        .collect();

    #[cfg(feature = "parallel")]
    let per_task: Vec<Vec<CellRecord>> = {
        use rayon::prelude::*;
        tasks
            .par_iter()
            .map(|&(p, t)| run_cell(&ctx, cfg, points[p], t))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_task: Vec<Vec<CellRecord>> = tasks.iter().map(|&(p, t)| run_cell(&ctx, cfg, points[p], t)).collect();

    // Reorder to (point, scheme, trial).
    let schemes = cfg.precoders.len() + ctx.reuse.len();
    let mut cells = Vec::with_capacity(tasks.len() * schemes);
    for p in 0..points.len() {
        let point = &per_task[p * cfg.trials..(p + 1) * cfg.trials];
        for s in 0..schemes {
            cells.extend(point.iter().map(|trial| trial[s].clone()));
        }
    }
    Ok(RunReport { cells })
}

/// Per-scheme average SNIR and system throughput against P_sat.
pub fn sweep_psat(cfg: &ScenarioConfig, range: SweepRange) -> Result<(RunReport, Vec<Curve>)> {
    range.validate()?;
    let mut cfg = cfg.clone();
    cfg.psat_sweep = range;
    let report = run_scenario(&cfg)?;
    let mut curves: Vec<Curve> = Vec::new();
    for row in summarize(&report) {
        let point = CurvePoint {
            psat_dbw: row.psat_dbw,
            avg_snir_db: row.avg_snir_db,
            system_throughput_mbps: row.system_throughput_mbps,
        };
        match curves.iter_mut().find(|c| c.scheme == row.scheme) {
            Some(c) => c.points.push(point),
            None => curves.push(Curve {
                scheme: row.scheme,
                points: vec![point],
            }),
        }
    }
    Ok((report, curves))
}
