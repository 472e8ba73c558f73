//! Experiment orchestration and machine-readable reports.
//!
//! Every experiment writes `report.json` plus its CSV tables into the output
//! directory. Output is a pure function of the config, so runs with the same
//! config and seed are byte-identical; a timestamp is only recorded when
//! `SOURCE_DATE_EPOCH` is set.

mod config;
mod experiments;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{Experiment, ExperimentConfig, Perturbation, SGridSpec, Spacing, Thresholds};
pub use experiments::{candidate_profile, interval_candidates};

use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: f64,
    pub units: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Less,
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">")]
    Greater,
    #[serde(rename = "==")]
    Equal,
}

impl Relation {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Relation::Less => value < threshold,
            Relation::AtMost => value <= threshold,
            Relation::Greater => value > threshold,
            Relation::Equal => value == threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub relation: Relation,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub seed: u64,
    /// `SOURCE_DATE_EPOCH`, when set.
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub inputs: ExperimentConfig,
    pub metrics: BTreeMap<String, Metric>,
    pub checks: Vec<Check>,
    /// Files written next to the report, relative to the output directory.
    pub outputs: Vec<String>,
    pub unconverged: bool,
    pub passed: bool,
    pub provenance: Provenance,
}

impl Report {
    fn new(experiment: Experiment, inputs: &ExperimentConfig) -> Self {
        Report {
            experiment: experiment.name().to_string(),
            inputs: inputs.clone(),
            metrics: BTreeMap::new(),
            checks: Vec::new(),
            outputs: Vec::new(),
            unconverged: false,
            passed: false,
            provenance: Provenance {
                version: env!("CARGO_PKG_VERSION").to_string(),
                seed: inputs.seed,
                timestamp: std::env::var("SOURCE_DATE_EPOCH").ok(),
            },
        }
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64, units: &str) {
        self.metrics.insert(
            name.into(),
            Metric {
                value,
                units: units.to_string(),
                uncertainty: None,
            },
        );
    }

    pub fn metric_pm(
        &mut self,
        name: impl Into<String>,
        value: f64,
        uncertainty: f64,
        units: &str,
    ) {
        self.metrics.insert(
            name.into(),
            Metric {
                value,
                units: units.to_string(),
                uncertainty: Some(uncertainty),
            },
        );
    }

    pub fn check(
        &mut self,
        name: impl Into<String>,
        value: f64,
        relation: Relation,
        threshold: f64,
    ) -> bool {
        let passed = relation.holds(value, threshold);
        self.checks.push(Check {
            name: name.into(),
            value,
            threshold,
            relation,
            passed,
        });
        passed
    }

    pub fn check_by_name(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn finish(&mut self) {
        self.passed = !self.unconverged && self.checks.iter().all(|c| c.passed);
    }

    /// 0 on a pass, 4 when a solve did not converge, 1 on a failed check.
    pub fn exit_code(&self) -> i32 {
        if self.unconverged {
            4
        } else if self.passed {
            0
        } else {
            1
        }
    }
}

/// Output directory writer that records every file it creates.
pub(crate) struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub(crate) fn write<F>(&mut self, name: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        body(&mut w)?;
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub(crate) fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }
}

/// Runs one experiment, writes its outputs and returns the report.
pub fn run(experiment: Experiment, cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()
        .map_err(|e| e.context(format!("{} config", experiment.name())))?;
    let mut out = Outputs::create(&cfg.out)?;
    let mut report = Report::new(experiment, cfg);
    let result = match experiment {
        Experiment::Dim => experiments::dim(cfg, &mut report, &mut out),
        Experiment::Solve => experiments::solve(cfg, &mut report, &mut out),
        Experiment::Sweep => experiments::sweep(cfg, &mut report, &mut out),
        Experiment::Growth => experiments::growth(cfg, &mut report, &mut out),
        Experiment::Convergence => experiments::convergence(cfg, &mut report, &mut out),
        Experiment::Density => experiments::density(cfg, &mut report, &mut out),
        Experiment::EnergyLimit => experiments::energy_limit(cfg, &mut report, &mut out),
        Experiment::IntervalCheck => experiments::interval_check(cfg, &mut report, &mut out),
    };
    result.map_err(|e| e.context(experiment.name()))?;
    report.finish();
    report.outputs = out.files.clone();
    report.outputs.push("report.json".to_string());
    out.json("report.json", &report)?;
    Ok(report)
}
