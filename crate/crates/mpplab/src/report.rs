//! Experiment reports: named checks with thresholds, Monte Carlo estimates
//! with standard errors, residual quantiles, and lossless export.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ReportFormat};
use crate::error::{io_err, HarnessError, Result};

pub const REPORT_SCHEMA: &str = "mpplab-report-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    /// Pass iff `|statistic| <= threshold`.
    pub fn bounded(name: impl Into<String>, statistic: f64, threshold: f64) -> Check {
        Check {
            name: name.into(),
            statistic,
            threshold,
            pass: statistic.abs() <= threshold,
        }
    }

    /// Pass iff the statistic exceeds the threshold in absolute value
    /// (rejection-style checks).
    pub fn exceeds(name: impl Into<String>, statistic: f64, threshold: f64) -> Check {
        Check {
            name: name.into(),
            statistic,
            threshold,
            pass: statistic.abs() > threshold,
        }
    }

    /// Pass iff the statistic equals the threshold exactly.
    pub fn exact(name: impl Into<String>, statistic: f64, expected: f64) -> Check {
        Check {
            name: name.into(),
            statistic,
            threshold: expected,
            pass: statistic == expected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub name: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualQuantiles {
    pub q50: f64,
    pub q90: f64,
    pub q99: f64,
    pub max: f64,
}

impl ResidualQuantiles {
    /// Empirical quantiles of a residual sample (by sorting; the sample
    /// order does not matter).
    pub fn from_samples(samples: &[f64]) -> Option<ResidualQuantiles> {
        if samples.is_empty() {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let at = |q: f64| {
            let ix = ((sorted.len() as f64 - 1.0) * q).round() as usize;
            sorted[ix.min(sorted.len() - 1)]
        };
        Some(ResidualQuantiles {
            q50: at(0.5),
            q90: at(0.9),
            q99: at(0.99),
            max: sorted[sorted.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub checks: Vec<Check>,
    pub estimates: Vec<EstimateRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_quantiles: Option<ResidualQuantiles>,
    /// Files an experiment wrote (trajectories, compensators).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub artifacts: Vec<String>,
    pub duration_secs: f64,
    pub overall_pass: bool,
}

impl ExperimentReport {
    pub fn new(
        config: ExperimentConfig,
        checks: Vec<Check>,
        estimates: Vec<EstimateRecord>,
        residual_quantiles: Option<ResidualQuantiles>,
        artifacts: Vec<String>,
        duration_secs: f64,
    ) -> Result<ExperimentReport> {
        let mut seen = std::collections::HashSet::new();
        for check in &checks {
            if !seen.insert(check.name.as_str()) {
                return Err(HarnessError::Report(format!(
                    "duplicate check `{}`",
                    check.name
                )));
            }
        }
        let overall_pass = checks.iter().all(|c| c.pass);
        Ok(ExperimentReport {
            schema: REPORT_SCHEMA.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            checks,
            estimates,
            residual_quantiles,
            artifacts,
            duration_secs,
            overall_pass,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| HarnessError::Report(e.to_string()))
    }

    /// JSON with the wall-clock duration zeroed: every remaining numeric is
    /// a deterministic function of the configuration.
    pub fn numerics_json(&self) -> Result<String> {
        let mut clone = self.clone();
        clone.duration_secs = 0.0;
        serde_json::to_string_pretty(&clone).map_err(|e| HarnessError::Report(e.to_string()))
    }

    /// CSV with the documented six-column schema:
    /// `section,name,statistic,threshold,std_error,pass`.
    pub fn to_csv(&self) -> String {
        fn esc(name: &str) -> String {
            if name.contains(',') || name.contains('"') {
                format!("\"{}\"", name.replace('"', "\"\""))
            } else {
                name.to_string()
            }
        }
        let mut out = String::from("section,name,statistic,threshold,std_error,pass\n");
        for c in &self.checks {
            out.push_str(&format!(
                "check,{},{},{},,{}\n",
                esc(&c.name),
                c.statistic,
                c.threshold,
                c.pass
            ));
        }
        for e in &self.estimates {
            let se = e.std_error.map(|s| s.to_string()).unwrap_or_default();
            out.push_str(&format!("estimate,{},{},,{},\n", esc(&e.name), e.value, se));
        }
        if let Some(q) = &self.residual_quantiles {
            for (name, v) in [
                ("q50", q.q50),
                ("q90", q.q90),
                ("q99", q.q99),
                ("max", q.max),
            ] {
                out.push_str(&format!("residual-quantile,{name},{v},,,\n"));
            }
        }
        out.push_str(&format!(
            "summary,overall,{},,,{}\n",
            self.checks.len(),
            self.overall_pass
        ));
        out
    }

    pub fn render(&self, format: ReportFormat) -> Result<String> {
        match format {
            ReportFormat::Json => self.to_json(),
            ReportFormat::Csv => Ok(self.to_csv()),
        }
    }

    pub fn write_to(&self, path: &Path, format: ReportFormat) -> Result<()> {
        let text = self.render(format)?;
        fs::write(path, text).map_err(io_err(path.display().to_string()))?;
        Ok(())
    }
}
