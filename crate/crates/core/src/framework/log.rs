//! Convergence logs: one header object followed by one record per evaluated
//! round, emitted as JSON lines (or CSV).

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::RunConfig;
use crate::data::DatasetStats;
use crate::subproblem::SpectralConstants;

pub const LOG_FORMAT: &str = "cocoa-log/1";

/// Parameters actually used by a run after presets and `auto` modes are applied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParams {
    pub gamma: f64,
    pub sigma_prime: f64,
    /// Local steps (or mini-batch size) per worker, indexed by worker.
    pub local_steps: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format: String,
    pub config: RunConfig,
    pub resolved: ResolvedParams,
    pub loss: String,
    pub lambda: f64,
    pub dataset: DatasetStats,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub spectral: Option<SpectralConstants>,
    pub warnings: Vec<String>,
}

/// One evaluated round. `gap` is clamped at zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub comm_vectors: usize,
    pub dual: f64,
    pub primal: f64,
    pub gap: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceLog {
    pub header: LogHeader,
    pub records: Vec<RoundRecord>,
}

impl ConvergenceLog {
    /// First logged round whose gap is at most `tol`.
    pub fn rounds_to_gap(&self, tol: f64) -> Option<usize> {
        self.records.iter().find(|r| r.gap <= tol).map(|r| r.round)
    }

    /// First logged round whose dual value is within `eps` of `dual_opt`.
    pub fn rounds_to_dual_suboptimality(&self, dual_opt: f64, eps: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| dual_opt - r.dual <= eps)
            .map(|r| r.round)
    }

    pub fn final_gap(&self) -> Option<f64> {
        self.records.last().map(|r| r.gap)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        serde_json::to_writer(&mut out, &self.header)?;
        out.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    /// Records only, as CSV with a header row.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parses a log written by [`ConvergenceLog::write_jsonl`].
    pub fn from_jsonl(text: &str) -> serde_json::Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: LogHeader = match lines.next() {
            Some(l) => serde_json::from_str(l)?,
            None => serde_json::from_str("")?,
        };
        let records = lines
            .map(serde_json::from_str)
            .collect::<serde_json::Result<Vec<RoundRecord>>>()?;
        Ok(Self { header, records })
    }
}
