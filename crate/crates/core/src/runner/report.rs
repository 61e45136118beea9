//! CSV report emission.
//!
//! Four files are written, all UTF-8 with '\n' line endings and floats in
//! shortest round-trip form:
//!
//! * `per_ut.csv`: scheme, psat_dbw, trial, ut_id, snir_db, throughput_mbps
//! * `summary.csv`: scheme, psat_dbw, avg_snir_db, system_throughput_mbps
//! * `power_profile.csv`: scheme, psat_dbw, trial, kind, index, power
//! * `diagnostics.csv`: scheme, psat_dbw, trial, status, iterations, residual, error_code, message
//!
//! Failed cells appear only in `diagnostics.csv`.

use std::path::Path;

use super::{Curve, RunReport};
use crate::linkmetrics::aggregate_report;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scheme: String,
    pub psat_dbw: f64,
    /// dB-domain mean over every user of every successful trial.
    pub avg_snir_db: f64,
    /// Sum over users, averaged over successful trials.
    pub system_throughput_mbps: f64,
    pub trials: usize,
}

/// Aggregates per (scheme, P_sat) in order of first appearance.
pub fn summarize(report: &RunReport) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, u64)> = Vec::new();
    for c in &report.cells {
        let key = (c.scheme.clone(), c.psat_dbw.to_bits());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .filter_map(|(scheme, bits)| {
            let mut snir = Vec::new();
            let mut rate = Vec::new();
            let mut trials = 0;
            for c in &report.cells {
                if c.scheme == scheme && c.psat_dbw.to_bits() == bits {
                    if let Ok(d) = &c.outcome {
                        snir.extend_from_slice(&d.snir_db);
                        rate.extend_from_slice(&d.throughput_mbps);
                        trials += 1;
                    }
                }
            }
            (trials > 0).then(|| {
                let (avg, total) = aggregate_report(&snir, &rate);
                SummaryRow {
                    scheme,
                    psat_dbw: f64::from_bits(bits),
                    avg_snir_db: avg,
                    system_throughput_mbps: total / trials as f64,
                    trials,
                }
            })
        })
        .collect()
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn io(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn emit_report(report: &RunReport, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;

    let mut per_ut = writer(&out_dir.join("per_ut.csv"))?;
    per_ut
        .write_record(["scheme", "psat_dbw", "trial", "ut_id", "snir_db", "throughput_mbps"])
        .map_err(io)?;
    let mut power = writer(&out_dir.join("power_profile.csv"))?;
    power
        .write_record(["scheme", "psat_dbw", "trial", "kind", "index", "power"])
        .map_err(io)?;
    let mut diag = writer(&out_dir.join("diagnostics.csv"))?;
    diag.write_record([
        "scheme",
        "psat_dbw",
        "trial",
        "status",
        "iterations",
        "residual",
        "error_code",
        "message",
    ])
    .map_err(io)?;

    for c in &report.cells {
        let psat = c.psat_dbw.to_string();
        let trial = c.trial.to_string();
        match &c.outcome {
            Ok(d) => {
                for (k, (s, t)) in d.snir_db.iter().zip(&d.throughput_mbps).enumerate() {
                    per_ut
                        .write_record([
                            &c.scheme,
                            &psat,
                            &trial,
                            &(k + 1).to_string(),
                            &s.to_string(),
                            &t.to_string(),
                        ])
                        .map_err(io)?;
                }
                let rows = d
                    .per_antenna_power
                    .iter()
                    .enumerate()
                    .map(|(i, p)| ("antenna", i, p))
                    .chain(d.per_beam_power.iter().enumerate().map(|(i, p)| ("beam", i, p)));
                for (kind, i, p) in rows {
                    power
                        .write_record([&c.scheme, &psat, &trial, kind, &(i + 1).to_string(), &p.to_string()])
                        .map_err(io)?;
                }
                diag.write_record([
                    c.scheme.as_str(),
                    &psat,
                    &trial,
                    "ok",
                    &opt(d.diagnostics.iterations),
                    &opt(d.diagnostics.residual),
                    "",
                    "",
                ])
                .map_err(io)?;
            }
            Err(f) => {
                diag.write_record([c.scheme.as_str(), &psat, &trial, "failed", "", "", &f.code, &f.message])
                    .map_err(io)?;
            }
        }
    }
    per_ut.flush()?;
    power.flush()?;
    diag.flush()?;

    let mut summary = writer(&out_dir.join("summary.csv"))?;
    summary
        .write_record(["scheme", "psat_dbw", "avg_snir_db", "system_throughput_mbps"])
        .map_err(io)?;
    for row in summarize(report) {
        summary
            .write_record([
                row.scheme,
                row.psat_dbw.to_string(),
                row.avg_snir_db.to_string(),
                row.system_throughput_mbps.to_string(),
            ])
            .map_err(io)?;
    }
    summary.flush()?;
    Ok(())
}

/// `curves.csv`: one row per (scheme, P_sat) point, in curve order.
pub fn emit_curves(curves: &[Curve], out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut w = writer(&out_dir.join("curves.csv"))?;
    w.write_record(["scheme", "psat_dbw", "avg_snir_db", "system_throughput_mbps"])
        .map_err(io)?;
    for c in curves {
        for p in &c.points {
            w.write_record([
                c.scheme.clone(),
                p.psat_dbw.to_string(),
                p.avg_snir_db.to_string(),
                p.system_throughput_mbps.to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::{CellData, CellFailure, CellRecord, SolverDiagnostics};

    fn cell(scheme: &str, trial: usize, snir: Vec<f64>, rate: Vec<f64>) -> CellRecord {
        CellRecord {
            scheme: scheme.into(),
            psat_dbw: 4.5,
            trial,
            outcome: Ok(CellData {
                per_antenna_power: vec![1.0; snir.len()],
                per_beam_power: vec![1.0; snir.len()],
                snir_db: snir,
                throughput_mbps: rate,
                diagnostics: SolverDiagnostics::default(),
            }),
        }
    }

    #[test]
    fn empty_report_gives_header_only_files() {
        let dir = tempfile::tempdir().unwrap();
        emit_report(&RunReport::default(), dir.path()).unwrap();
        for (f, header) in [
            ("per_ut.csv", "scheme,psat_dbw,trial,ut_id,snir_db,throughput_mbps\n"),
            ("summary.csv", "scheme,psat_dbw,avg_snir_db,system_throughput_mbps\n"),
            ("power_profile.csv", "scheme,psat_dbw,trial,kind,index,power\n"),
            (
                "diagnostics.csv",
                "scheme,psat_dbw,trial,status,iterations,residual,error_code,message\n",
            ),
        ] {
            assert_eq!(std::fs::read_to_string(dir.path().join(f)).unwrap(), header);
        }
    }

    #[test]
    fn summary_averages_trials_and_skips_failures() {
        let mut report = RunReport {
            cells: vec![
                cell("A", 0, vec![10.0, 12.0], vec![5.0, 7.0]),
                cell("A", 1, vec![14.0, 16.0], vec![9.0, 11.0]),
            ],
        };
        report.cells.push(CellRecord {
            scheme: "A".into(),
            psat_dbw: 4.5,
            trial: 2,
            outcome: Err(CellFailure {
                code: "NonConvergence".into(),
                message: "x, y".into(),
            }),
        });
        let rows = summarize(&report);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].avg_snir_db, 13.0);
        assert_eq!(rows[0].system_throughput_mbps, 16.0);
        assert_eq!(rows[0].trials, 2);

        let dir = tempfile::tempdir().unwrap();
        emit_report(&report, dir.path()).unwrap();
        let diag = std::fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
        assert!(diag.contains("A,4.5,2,failed,,,NonConvergence,\"x, y\""));
        let per_ut = std::fs::read_to_string(dir.path().join("per_ut.csv")).unwrap();
        assert_eq!(per_ut.lines().count(), 5);
    }
}
