use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::contraction::ContractionReport;
use super::decay::DecayFitReport;
use crate::closed_loop::TrajectoryRecord;
use crate::error::{Error, Result};

/// A trajectory with the label used for its file name.
#[derive(Debug, Clone)]
pub struct LabeledRecord {
    pub label: String,
    pub record: TrajectoryRecord,
}

/// Result of one experiment.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentReport {
    Decay(DecayFitReport),
    Contraction(ContractionReport),
}

/// File-name label of a run.
pub fn run_label(kind: &str, eps: f64, seed: u64) -> String {
    format!("{kind}_eps{eps}_seed{seed}")
}

const SUMMARY_HEADER: [&str; 11] = [
    "kind",
    "epsilon",
    "seed",
    "regime",
    "lambda_hat",
    "c_hat",
    "r_squared",
    "factor_m",
    "lhs",
    "rhs",
    "passed",
];

fn summary_rows(report: &ExperimentReport) -> Vec<[String; 11]> {
    let f = |v: f64| format!("{v:e}");
    match report {
        ExperimentReport::Decay(d) => vec![[
            "decay".into(),
            d.epsilon.to_string(),
            d.seed.to_string(),
            String::new(),
            f(d.lambda_hat),
            f(d.c_hat),
            f(d.r_squared),
            f(d.mean_factor_m()),
            String::new(),
            String::new(),
            String::new(),
        ]],
        ExperimentReport::Contraction(c) => c
            .cases
            .iter()
            .map(|k| {
                [
                    "contraction".into(),
                    c.epsilon.to_string(),
                    k.seed.to_string(),
                    k.regime.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    f(k.m_ratio),
                    f(k.lhs),
                    f(k.rhs),
                    k.passed.to_string(),
                ]
            })
            .collect(),
    }
}

fn text_summary(reports: &[ExperimentReport]) -> String {
    let mut out = String::new();
    if reports.is_empty() {
        out.push_str("no experiments\n");
    }
    for r in reports {
        match r {
            ExperimentReport::Decay(d) => {
                let _ = writeln!(
                    out,
                    "decay eps={} seed={}: lambda_hat={:.6e} C_hat={:.6e} R^2={:.6} \
                     shifted lambda={:.6e} mean M factor={:.8}",
                    d.epsilon,
                    d.seed,
                    d.lambda_hat,
                    d.c_hat,
                    d.r_squared,
                    d.lambda_shifted,
                    d.mean_factor_m()
                );
            }
            ExperimentReport::Contraction(c) => {
                let _ = writeln!(
                    out,
                    "contraction eps={} r_eps={:.3e}: rho1_hat={:.6e} rho2={:.6} delta_hat={:.6} {}",
                    c.epsilon,
                    c.r_eps,
                    c.rho1_hat,
                    c.rho2,
                    c.delta_hat,
                    if c.passed { "PASS" } else { "FAIL" }
                );
                for k in &c.cases {
                    let _ = writeln!(
                        out,
                        "  {} seed={}: lhs={:.6e} rhs={:.6e} M ratio={:.8} {}",
                        k.regime,
                        k.seed,
                        k.lhs,
                        k.rhs,
                        k.m_ratio,
                        if k.passed { "ok" } else { "violated" }
                    );
                }
            }
        }
    }
    out
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Writes `config.json`, one `traj_<label>.csv` per record and
/// `summary.{csv,ndjson,txt}` into `dir`. Returns the written paths.
pub fn emit_report(
    cfg: &ExperimentConfig,
    records: &[LabeledRecord],
    reports: &[ExperimentReport],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let path = dir.join("config.json");
    write_file(&path, (cfg.to_json() + "\n").as_bytes())?;
    written.push(path);

    for r in records {
        let path = dir.join(format!("traj_{}.csv", r.label));
        r.record.write_csv(&path)?;
        written.push(path);
    }

    let path = dir.join("summary.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(SUMMARY_HEADER).map_err(to_err)?;
    for row in reports.iter().flat_map(summary_rows) {
        w.write_record(&row).map_err(to_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    write_file(&path, &bytes)?;
    written.push(path);

    let path = dir.join("summary.ndjson");
    let mut nd = Vec::new();
    for r in reports {
        serde_json::to_writer(&mut nd, r).map_err(|e| Error::Format(e.to_string()))?;
        nd.push(b'\n');
    }
    write_file(&path, &nd)?;
    written.push(path);

    let path = dir.join("summary.txt");
    write_file(&path, text_summary(reports).as_bytes())?;
    written.push(path);
    Ok(written)
}
