//! Browser bindings for the precoding simulator.
//!
//! Each exported function has a plain-Rust twin (`*_impl`) that returns
//! `Result<_, String>`, so the logic is testable off the browser.

use mbprecode::channel::{generate_multibeam_channel, random_coupled_channel, BeamGeometry};
use mbprecode::precoding::{optl, OptlParams};
use mbprecode::runner::{sweep_psat, ChannelSource, ScenarioConfig, SweepRange};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Largest grid side the page may request; keeps a sweep interactive.
pub const MAX_GRID_SIDE: usize = 6;

/// Channel power gains |h_kn|^2 in dB for a square beam grid, row-major
/// with `side * side` users by `side * side` feeds.
pub fn channel_gain_db_impl(side: usize, spacing_deg: f64, half_angle_deg: f64) -> Result<Vec<f64>, String> {
    if side == 0 || side > MAX_GRID_SIDE {
        return Err(format!("grid side must be 1..={MAX_GRID_SIDE}"));
    }
    let g = BeamGeometry::grid(side, side, spacing_deg, half_angle_deg, 1.0);
    let h = generate_multibeam_channel(&g, 0).map_err(|e| e.to_string())?;
    Ok(h.matrix()
        .transpose()
        .iter()
        .map(|z| 10.0 * z.norm_sqr().max(1e-30).log10())
        .collect())
}

/// Runs a P_sat sweep of the default scenario on a `side x side` grid and
/// returns the curves as JSON: `[{scheme, points: [{psat_dbw, avg_snir_db,
/// system_throughput_mbps}]}]`.
pub fn sweep_json_impl(
    side: usize,
    spacing_deg: f64,
    min_dbw: f64,
    max_dbw: f64,
    step_db: f64,
) -> Result<String, String> {
    if !(2..=MAX_GRID_SIDE).contains(&side) {
        return Err(format!("grid side must be 2..={MAX_GRID_SIDE}"));
    }
    let mut cfg = ScenarioConfig::default_16_beam();
    cfg.channel = ChannelSource::Grid {
        rows: side,
        cols: side,
        spacing_deg,
        three_db_half_angle_deg: 0.4,
        peak_gain: 1.0,
    };
    cfg.trials = 1;
    let range = SweepRange {
        min_dbw,
        max_dbw,
        step_db,
    };
    let (_, curves) = sweep_psat(&cfg, range).map_err(|e| e.to_string())?;
    let body: Vec<_> = curves
        .iter()
        .map(|c| {
            json!({
                "scheme": c.scheme,
                "points": c.points.iter().map(|p| json!({
                    "psat_dbw": p.psat_dbw,
                    "avg_snir_db": p.avg_snir_db,
                    "system_throughput_mbps": p.system_throughput_mbps,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    Ok(serde_json::Value::Array(body).to_string())
}

/// Runs the optimal linear precoder on a random coupled channel and
/// returns its convergence trace as JSON.
pub fn optl_trace_impl(users: usize, coupling: f64, target_db: f64, seed: u64) -> Result<String, String> {
    if !(2..=32).contains(&users) {
        return Err("users must be 2..=32".into());
    }
    let h = random_coupled_channel(users, users, coupling, seed).map_err(|e| e.to_string())?;
    let params = OptlParams::with_targets(vec![10f64.powf(target_db / 10.0); users]);
    let (_, state) = optl(&h, 0.1, &params).map_err(|e| e.to_string())?;
    Ok(json!({
        "iterations": state.iterations_used,
        "converged": state.converged,
        "residuals": state.residual_history,
        "downlink_powers": state.downlink_powers,
        "total_power": state.downlink_powers.iter().sum::<f64>(),
    })
    .to_string())
}

fn js_err(e: String) -> JsError {
    JsError::new(&e)
}

#[wasm_bindgen]
pub fn channel_gain_db(side: usize, spacing_deg: f64, half_angle_deg: f64) -> Result<Vec<f64>, JsError> {
    channel_gain_db_impl(side, spacing_deg, half_angle_deg).map_err(js_err)
}

#[wasm_bindgen]
pub fn sweep_json(side: usize, spacing_deg: f64, min_dbw: f64, max_dbw: f64, step_db: f64) -> Result<String, JsError> {
    sweep_json_impl(side, spacing_deg, min_dbw, max_dbw, step_db).map_err(js_err)
}

#[wasm_bindgen]
pub fn optl_trace(users: usize, coupling: f64, target_db: f64, seed: u64) -> Result<String, JsError> {
    optl_trace_impl(users, coupling, target_db, seed).map_err(js_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_has_peak_on_diagonal() {
        let g = channel_gain_db_impl(3, 0.8, 0.4).unwrap();
        assert_eq!(g.len(), 81);
        for k in 0..9 {
            let row = &g[k * 9..(k + 1) * 9];
            let best = row.iter().cloned().fold(f64::MIN, f64::max);
            assert_eq!(row[k], best);
        }
        assert!(channel_gain_db_impl(0, 0.8, 0.4).is_err());
        assert!(channel_gain_db_impl(MAX_GRID_SIDE + 1, 0.8, 0.4).is_err());
    }

    #[test]
    fn sweep_returns_one_curve_per_scheme() {
        let text = sweep_json_impl(2, 0.8, 0.0, 4.0, 2.0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let curves = v.as_array().unwrap();
        assert_eq!(curves.len(), 6);
        for c in curves {
            assert_eq!(c["points"].as_array().unwrap().len(), 3);
        }
        assert!(sweep_json_impl(2, 0.8, 4.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn optl_trace_converges() {
        let v: serde_json::Value = serde_json::from_str(&optl_trace_impl(4, 0.3, 3.0, 9).unwrap()).unwrap();
        assert_eq!(v["converged"], true);
        let n = v["iterations"].as_u64().unwrap() as usize;
        assert_eq!(v["residuals"].as_array().unwrap().len(), n);
        assert_eq!(v["downlink_powers"].as_array().unwrap().len(), 4);
        assert!(optl_trace_impl(1, 0.3, 3.0, 9).is_err());
    }
}
