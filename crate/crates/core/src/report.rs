//! Per-iteration training metrics and their CSV serialisation.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REPORT_HEADER: [&str; 6] = [
    "iteration",
    "mean_reward",
    "mean_cost",
    "violation_rate",
    "lambda",
    "switch_rate",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub iteration: usize,
    pub mean_reward: f64,
    pub mean_cost: f64,
    pub violation_rate: f64,
    /// Multiplier after this iteration's (possible) dual update.
    pub lambda: f64,
    pub switch_rate: f64,
}

/// Same metrics from one agent's local perspective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRow {
    pub mean_reward: f64,
    pub mean_cost: f64,
    pub violation_rate: f64,
    pub lambda: f64,
    pub switch_rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingReport {
    pub rows: Vec<ReportRow>,
    /// `agents[i][row]`; empty for single-agent training.
    pub agents: Vec<Vec<AgentRow>>,
    /// Total steps executed, and how many of them came from the baseline.
    pub total_steps: usize,
    pub baseline_steps: usize,
}

impl TrainingReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.write_csv_to(File::create(path)?)
    }

    pub fn write_csv_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(REPORT_HEADER)?;
        for r in &self.rows {
            w.write_record(&[
                r.iteration.to_string(),
                r.mean_reward.to_string(),
                r.mean_cost.to_string(),
                r.violation_rate.to_string(),
                r.lambda.to_string(),
                r.switch_rate.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Per-agent columns `agent_<i>_<metric>`, one row per iteration.
    pub fn write_agents_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["iteration".to_string()];
        for i in 0..self.agents.len() {
            for m in &REPORT_HEADER[1..] {
                header.push(format!("agent_{i}_{m}"));
            }
        }
        w.write_record(&header)?;
        for (row_idx, row) in self.rows.iter().enumerate() {
            let mut rec = vec![row.iteration.to_string()];
            for agent in &self.agents {
                let a = &agent[row_idx];
                rec.extend([
                    a.mean_reward.to_string(),
                    a.mean_cost.to_string(),
                    a.violation_rate.to_string(),
                    a.lambda.to_string(),
                    a.switch_rate.to_string(),
                ]);
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv_to(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Reads a report written by [`TrainingReport::write_csv`]; a different header is a schema error.
pub fn read_report_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != REPORT_HEADER {
        return Err(Error::Schema(format!(
            "{}: expected header {:?}, found {:?}",
            path.display(),
            REPORT_HEADER,
            header
        )));
    }
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

/// Two-column `(epoch, loss)` CSV for behaviour-cloning traces.
pub fn write_loss_csv(path: &Path, losses: &[f64]) -> Result<()> {
    let mut f = File::create(path)?;
    writeln!(f, "epoch,bc_loss")?;
    for (i, l) in losses.iter().enumerate() {
        writeln!(f, "{},{}", i + 1, l)?;
    }
    Ok(())
}
