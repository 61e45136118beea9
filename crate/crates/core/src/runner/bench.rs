//! Wall-clock benchmark of the precoder designs against the number of users.

use std::time::Instant;

use crate::channel::{random_coupled_channel, ChannelMatrix};
use crate::precoding::{mmse, mmse_pac, optl, zero_forcing, OptlParams, PacParams};
use crate::seed::derive_seed;
use crate::{Error, Result};

const BENCH_NOISE: f64 = 0.1;
const BENCH_COUPLING: f64 = 0.3;
const BENCH_TARGET: f64 = 2.0;

pub const BENCH_PRECODERS: [&str; 4] = ["zf", "mmse", "mmse_pac", "optl"];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub precoder: String,
    pub k: usize,
    pub median_seconds: f64,
    /// Mean solver iterations, for the iterative designs.
    pub mean_iterations: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Least-squares slope of log(time) against log(K), per precoder.
    pub exponents: Vec<(String, f64)>,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("precoder,k,median_seconds,mean_iterations\n");
        for r in &self.rows {
            let it = r.mean_iterations.map(|v| v.to_string()).unwrap_or_default();
            s.push_str(&format!("{},{},{},{}\n", r.precoder, r.k, r.median_seconds, it));
        }
        s
    }
}

fn run_one(name: &str, h: &ChannelMatrix) -> Result<Option<usize>> {
    match name {
        "zf" => zero_forcing(h).map(|_| None),
        "mmse" => mmse(h, BENCH_NOISE).map(|_| None),
        "mmse_pac" => {
            let params = PacParams {
                initial_dual: BENCH_NOISE,
                ..PacParams::default()
            };
            mmse_pac(h, &params).map(|s| Some(s.diagnostics.iterations))
        }
        "optl" => {
            let params = OptlParams::with_targets(vec![BENCH_TARGET; h.users()]);
            optl(h, BENCH_NOISE, &params).map(|(_, st)| Some(st.iterations_used))
        }
        other => Err(Error::Config(format!("unknown precoder {other}"))),
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

/// Slope of the least-squares line through (ln x, ln y).
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.max(1e-12).ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        f64::NAN
    }
}

/// Times each precoder on `reps` seeded square channels for every size.
///
/// Failed solves are still timed; their iterations are left out of the mean.
pub fn benchmark_precoders(sizes: &[usize], reps: usize, seed: u64) -> Result<BenchReport> {
    if sizes.iter().any(|&k| k < 2) {
        return Err(Error::Config("benchmark sizes must be at least 2".into()));
    }
    if reps == 0 {
        return Err(Error::Config("benchmark repetitions must be at least 1".into()));
    }
    let mut rows = Vec::new();
    for name in BENCH_PRECODERS {
        for &k in sizes {
            let mut times = Vec::with_capacity(reps);
            let mut iters = Vec::new();
            for r in 0..reps {
                let h = random_coupled_channel(k, k, BENCH_COUPLING, derive_seed(seed, (k * 1_000_003 + r) as u64))?;
                let start = Instant::now();
                let out = run_one(name, &h);
                times.push(start.elapsed().as_secs_f64());
                if let Ok(Some(it)) = out {
                    iters.push(it as f64);
                }
            }
            rows.push(BenchRow {
                precoder: name.to_string(),
                k,
                median_seconds: median(&mut times),
                mean_iterations: (!iters.is_empty()).then(|| iters.iter().sum::<f64>() / iters.len() as f64),
            });
        }
    }
    let exponents = BENCH_PRECODERS
        .iter()
        .filter(|_| sizes.len() >= 2)
        .map(|name| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|r| r.precoder == *name)
                .map(|r| (r.k as f64, r.median_seconds))
                .unzip();
            (name.to_string(), loglog_slope(&xs, &ys))
        })
        .collect();
    Ok(BenchReport { rows, exponents })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_sizes_give_three_rows_per_precoder() {
        let rep = benchmark_precoders(&[4, 8, 16], 2, 7).unwrap();
        assert_eq!(rep.rows.iter().filter(|r| r.precoder == "mmse").count(), 3);
        assert_eq!(rep.rows.len(), 12);
        assert_eq!(rep.exponents.len(), 4);
        assert!(rep.to_csv().starts_with("precoder,k,median_seconds,mean_iterations\n"));
    }

    #[test]
    fn optl_iterations_stay_under_cap_at_sixteen_users() {
        let rep = benchmark_precoders(&[16], 3, 11).unwrap();
        let row = rep.rows.iter().find(|r| r.precoder == "optl").unwrap();
        assert!(row.mean_iterations.unwrap() <= 500.0);
    }

    #[test]
    fn slope_of_exact_power_law() {
        let xs = [4.0, 8.0, 16.0, 32.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powi(3)).collect();
        assert!((loglog_slope(&xs, &ys) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_tiny_sizes() {
        assert!(benchmark_precoders(&[1], 1, 0).is_err());
    }
}
