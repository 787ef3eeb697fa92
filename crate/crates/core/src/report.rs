//! On-disk run reports.
//!
//! A report directory holds `config.json`, `metrics.json`, `rounds.csv`,
//! `per_class.csv`, `timing.json`, `partition.json` and `history.json`. Every
//! JSON file carries `schema_version`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::balancing::BalancePlan;
use crate::error::{Error, Result};
use crate::federation::{FederationHistory, PartitionAudit, PartitionMode};
use crate::metrics::MetricsBundle;
use crate::pipeline::SplitSizes;

pub const SCHEMA_VERSION: u32 = 1;

/// What was run, as recorded in `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub scenario: String,
    pub model: String,
    pub balancing: String,
    pub clients: usize,
    pub partition: PartitionMode,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub schema_version: u32,
    #[serde(flatten)]
    pub run: RunInfo,
    pub rounds: usize,
    pub stop_reason: String,
    pub final_digest: String,
    pub split: SplitSizes,
    pub selected_features: Vec<String>,
    pub test: MetricsBundle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingFile {
    pub schema_version: u32,
    pub preprocessing_seconds: f64,
    pub training_seconds: f64,
    pub total_seconds: f64,
    pub total_minutes: f64,
    pub round_seconds: Vec<f64>,
    pub round_parallel_seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionFile {
    pub schema_version: u32,
    pub mode: PartitionMode,
    pub audit: PartitionAudit,
    pub balance: Vec<Option<BalancePlan>>,
}

/// Everything a report is built from.
pub struct ReportInput<'a> {
    pub run: RunInfo,
    pub config: &'a serde_json::Value,
    pub history: &'a FederationHistory,
    pub audit: &'a PartitionAudit,
    pub plans: Vec<Option<BalancePlan>>,
    pub split: SplitSizes,
    pub selected_features: Vec<String>,
    pub preprocessing_seconds: f64,
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn with_schema(value: &serde_json::Value) -> serde_json::Value {
    let mut v = value.clone();
    if let serde_json::Value::Object(m) = &mut v {
        m.insert("schema_version".into(), SCHEMA_VERSION.into());
    }
    v
}

pub fn write_per_class_csv(path: &Path, m: &MetricsBundle) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(["class", "index", "description", "precision", "recall", "f1", "support"])?;
    for c in m.per_class.iter().filter(|c| c.support > 0 || !c.precision_undefined) {
        w.write_record([
            c.class.abbreviation().to_string(),
            c.class.index().to_string(),
            c.class.description().to_string(),
            c.precision.to_string(),
            c.recall.to_string(),
            c.f1.to_string(),
            c.support.to_string(),
        ])?;
    }
    w.into_inner()
        .map_err(|e| Error::Serde(e.to_string()))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

/// Writes the report bundle into `dir`, creating it if needed.
pub fn make_report(dir: impl AsRef<Path>, input: &ReportInput<'_>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let h = input.history;
    write_json(dir, "config.json", &with_schema(input.config))?;
    write_json(
        dir,
        "metrics.json",
        &MetricsFile {
            schema_version: SCHEMA_VERSION,
            run: input.run.clone(),
            rounds: h.rounds.len(),
            stop_reason: h.stop_reason.clone(),
            final_digest: h.final_digest.clone(),
            split: input.split,
            selected_features: input.selected_features.clone(),
            test: h.test.clone(),
        },
    )?;
    h.write_rounds_csv(dir.join("rounds.csv"))?;
    write_per_class_csv(&dir.join("per_class.csv"), &h.test)?;
    let total = input.preprocessing_seconds + h.total_seconds;
    write_json(
        dir,
        "timing.json",
        &TimingFile {
            schema_version: SCHEMA_VERSION,
            preprocessing_seconds: input.preprocessing_seconds,
            training_seconds: h.total_seconds,
            total_seconds: total,
            total_minutes: total / 60.0,
            round_seconds: h.rounds.iter().map(|r| r.seconds).collect(),
            round_parallel_seconds: h.rounds.iter().map(|r| r.parallel_seconds).collect(),
        },
    )?;
    write_json(
        dir,
        "partition.json",
        &PartitionFile {
            schema_version: SCHEMA_VERSION,
            mode: input.run.partition,
            audit: input.audit.clone(),
            balance: input.plans.clone(),
        },
    )?;
    write_json(dir, "history.json", &with_schema(&serde_json::to_value(h)?))?;
    Ok(())
}

/// Reads `metrics.json` from a report directory.
pub fn read_metrics(dir: impl AsRef<Path>) -> Result<MetricsFile> {
    let path = dir.as_ref().join("metrics.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    match v.get("schema_version").and_then(serde_json::Value::as_u64) {
        Some(s) if s == u64::from(SCHEMA_VERSION) => Ok(serde_json::from_value(v)?),
        Some(s) => Err(Error::Schema(format!("{}: schema_version {s}, expected {SCHEMA_VERSION}", path.display()))),
        None => Err(Error::Schema(format!("{}: no schema_version", path.display()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::federation::{audit_partition, RoundLog};
    use crate::metrics::evaluate;

    fn history() -> FederationHistory {
        let round = |r: usize, f1: f64| RoundLog {
            round: r,
            clients: vec![],
            digest: "d".into(),
            accuracy: f1,
            precision: f1,
            recall: f1,
            f1,
            seconds: 1.5,
            parallel_seconds: 1.0,
        };
        FederationHistory {
            rounds: vec![round(1, 0.5), round(2, 0.75)],
            stop_reason: "reached 2 rounds".into(),
            test: evaluate(&[0, 0, 1, 1], &[0, 1, 1, 1]).unwrap(),
            final_digest: "abc".into(),
            total_seconds: 3.0,
            final_params: None,
        }
    }

    fn input<'a>(h: &'a FederationHistory, audit: &'a PartitionAudit, cfg: &'a serde_json::Value) -> ReportInput<'a> {
        ReportInput {
            run: RunInfo {
                scenario: "FL-IID".into(),
                model: "DNN".into(),
                balancing: "ROS+RUS".into(),
                clients: 2,
                partition: PartitionMode::Iid,
                seed: 1,
            },
            config: cfg,
            history: h,
            audit,
            plans: vec![None, None],
            split: SplitSizes { train: 4, val: 1, test: 1 },
            selected_features: vec!["age".into()],
            preprocessing_seconds: 57.0,
        }
    }

    #[test]
    fn bundle_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let h = history();
        let audit = audit_partition(&[0, 0, 1, 1], &[vec![0, 2], vec![1, 3]]);
        let cfg = serde_json::json!({"scenario": "FL-IID"});
        make_report(dir.path(), &input(&h, &audit, &cfg)).unwrap();
        let m = read_metrics(dir.path()).unwrap();
        assert_eq!(m.rounds, 2);
        assert_eq!(m.run.scenario, "FL-IID");
        assert!((m.test.f1 - 0.7333333333333333).abs() < 1e-12);
        let rounds = std::fs::read_to_string(dir.path().join("rounds.csv")).unwrap();
        assert_eq!(rounds.lines().count(), 3);
        let t: TimingFile = serde_json::from_str(&std::fs::read_to_string(dir.path().join("timing.json")).unwrap()).unwrap();
        assert_eq!(t.total_seconds, 60.0);
        assert_eq!(t.total_minutes, 1.0);
        let p: PartitionFile =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("partition.json")).unwrap()).unwrap();
        assert_eq!(p.audit.clients.len(), 2);
        let per_class = std::fs::read_to_string(dir.path().join("per_class.csv")).unwrap();
        assert_eq!(per_class.lines().count(), 3);
        let c: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("config.json")).unwrap()).unwrap();
        assert_eq!(c["schema_version"], 1);
    }

    #[test]
    fn schema_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("metrics.json"), r#"{"schema_version": 99}"#).unwrap();
        assert!(matches!(read_metrics(dir.path()), Err(Error::Schema(_))));
        assert!(matches!(read_metrics(dir.path().join("missing")), Err(Error::Io { .. })));
    }
}
