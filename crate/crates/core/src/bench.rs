//! Multi-cell benchmark configuration and the results table.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{NtsdrError, Result};
use crate::metrics::ScoreReport;
use crate::simgen::{run_experiment, ExperimentOptions, MethodSpec, SimConfig};

pub const CSV_HEADER: [&str; 11] = [
    "setting", "design", "n", "p", "q", "method", "metric", "mean", "sd", "n_reps", "failures",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchCell {
    pub config: SimConfig,
    /// Empty means the per-setting defaults.
    #[serde(default)]
    pub methods: Vec<MethodSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default)]
    pub options: ExperimentOptions,
    pub cells: Vec<BenchCell>,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(NtsdrError::validation("cells", "at least one cell is required"));
        }
        for (i, c) in self.cells.iter().enumerate() {
            c.config
                .validate()
                .map_err(|e| NtsdrError::validation(format!("cells[{i}]"), e.to_string()))?;
        }
        self.options.grid.normalized()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub setting: String,
    pub design: String,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub method: String,
    pub metric: &'static str,
    pub score: Option<ScoreReport>,
    pub n_reps: usize,
    pub failures: usize,
}

impl BenchRow {
    fn fields(&self) -> Vec<String> {
        let (mean, sd) = match &self.score {
            Some(s) => (s.mean.to_string(), s.sd.to_string()),
            None => (String::new(), String::new()),
        };
        vec![
            self.setting.clone(),
            self.design.clone(),
            self.n.to_string(),
            self.p.to_string(),
            self.q.to_string(),
            self.method.clone(),
            self.metric.to_string(),
            mean,
            sd,
            self.n_reps.to_string(),
            self.failures.to_string(),
        ]
    }
}

/// Result of a benchmark run: table rows plus how many cells failed outright.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub failed_cells: usize,
}

/// Runs every cell in order; a cell that cannot run contributes rows with all
/// replications counted as failures.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut failed_cells = 0;
    for cell in &cfg.cells {
        let c = &cell.config;
        let methods = if cell.methods.is_empty() {
            MethodSpec::defaults_for(c.setting)
        } else {
            cell.methods.clone()
        };
        let row = |method: &str, metric: &'static str, score: Option<ScoreReport>, failures: usize| BenchRow {
            setting: String::from(c.setting),
            design: String::from(c.design),
            n: c.n,
            p: c.p,
            q: c.q,
            method: method.to_string(),
            metric,
            score,
            n_reps: c.n_reps,
            failures,
        };
        match run_experiment(c, &methods, &cfg.options) {
            Ok(report) => {
                if report.methods.iter().all(|m| m.failures == c.n_reps) {
                    failed_cells += 1;
                }
                for m in report.methods {
                    rows.push(row(&m.method, "response_dcor", m.response, m.failures));
                    if !m.method.starts_with("gsir") {
                        rows.push(row(&m.method, "structure_dcor", m.structure, m.failures));
                    }
                }
            }
            Err(e) => {
                log::warn!("cell {}/{} failed: {e}", String::from(c.setting), String::from(c.design));
                failed_cells += 1;
                for m in &methods {
                    rows.push(row(m.label(), "response_dcor", None, c.n_reps));
                }
            }
        }
    }
    Ok(BenchReport { rows, failed_cells })
}

pub fn write_bench_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| NtsdrError::Format(format!("results csv: {e}"));
    w.write_record(CSV_HEADER).map_err(err)?;
    for r in rows {
        w.write_record(r.fields()).map_err(err)?;
    }
    w.flush()?;
    Ok(())
}
