//! Experiment configuration and the `synth`, `run` and `compare` commands.
//!
//! A run is described by one TOML file:
//!
//! ```toml
//! scenario = "FL-IID"        # CL | FL-IID | FL-NonIID
//! clients = 4                # ignored for CL
//! rounds = 10
//! seed = 7
//! out = "runs/fl-iid"
//! sweep = [2, 4, 6, 8, 10]   # optional: one report per client count
//!
//! [data]
//! classes = ["NSR", "AF", "SB", "STach", "IAVB", "RBBB"]
//! per_class = 400            # or: manifest = "data/manifest.csv"
//!
//! [pipeline]
//! k = 120
//! beta = 1.0
//! balancing = "ROS+RUS"
//!
//! [model]
//! kind = "DNN"
//! ```
//!
//! Tables `[train]`, `[gbdt]` and `[federation]` override the remaining
//! defaults. Relative paths resolve against the config file's directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::balancing::{BalanceMode, DEFAULT_SMOTE_NEIGHBORS};
use crate::error::{Error, Result};
use crate::features::{FeatureRegistry, RegistryConfig};
use crate::federation::{run_federation, FederationConfig, FederationHistory, PartitionMode, SelectionMode};
use crate::nn::{ModelConfig, TrainConfig};
use crate::pipeline::{extract_table, prepare, Prepared, DEFAULT_FRACTIONS, TARGET_FS, TARGET_SECONDS};
use crate::report::{make_report, read_metrics, ReportInput, RunInfo};
use crate::selection::GbdtConfig;
use crate::signal::{load_dataset, synth_generate, write_dataset, Dataset, DiagnosisCode, SUPPORTED_CLASSES};
use crate::table::FeatureTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "CL")]
    Cl,
    #[serde(rename = "FL-IID")]
    FlIid,
    #[serde(rename = "FL-NonIID")]
    FlNonIid,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Cl => "CL",
            Scenario::FlIid => "FL-IID",
            Scenario::FlNonIid => "FL-NonIID",
        }
    }

    pub fn partition(self) -> PartitionMode {
        match self {
            Scenario::FlNonIid => PartitionMode::NonIid,
            _ => PartitionMode::Iid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Load recordings from a manifest instead of synthesizing them.
    pub manifest: Option<PathBuf>,
    pub classes: Vec<String>,
    pub per_class: usize,
    pub fs: f64,
    pub seconds: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            classes: SUPPORTED_CLASSES.iter().map(|c| c.abbreviation().to_string()).collect(),
            per_class: 200,
            fs: TARGET_FS,
            seconds: TARGET_SECONDS,
        }
    }
}

impl DataConfig {
    pub fn class_codes(&self) -> Result<Vec<DiagnosisCode>> {
        self.classes
            .iter()
            .map(|s| {
                let c: DiagnosisCode = s.parse()?;
                if SUPPORTED_CLASSES.contains(&c) {
                    Ok(c)
                } else {
                    Err(Error::Config(format!("class `{s}` has no synthetic generator")))
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub k: usize,
    pub beta: f64,
    pub balancing: BalanceMode,
    pub smote_neighbors: usize,
    pub selection: SelectionMode,
    pub fractions: [f64; 3],
    pub fs: f64,
    pub seconds: f64,
    pub include_signal_stats: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: 120,
            beta: 1.0,
            balancing: BalanceMode::RosRus,
            smote_neighbors: DEFAULT_SMOTE_NEIGHBORS,
            selection: SelectionMode::Federated,
            fractions: DEFAULT_FRACTIONS,
            fs: TARGET_FS,
            seconds: TARGET_SECONDS,
            include_signal_stats: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    pub delta: f64,
    pub patience: usize,
    pub parallel: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self { delta: 0.005, patience: 3, parallel: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub clients: usize,
    pub rounds: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub sweep: Vec<usize>,
    pub data: DataConfig,
    pub pipeline: PipelineConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub gbdt: GbdtConfig,
    pub federation: LoopConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Cl,
            clients: 4,
            rounds: 10,
            seed: 0,
            out: PathBuf::from("runs/latest"),
            sweep: Vec::new(),
            data: DataConfig::default(),
            pipeline: PipelineConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            gbdt: GbdtConfig::default(),
            federation: LoopConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    /// Parses the file and resolves relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(m) = &cfg.data.manifest {
            if m.is_relative() {
                cfg.data.manifest = Some(base.join(m));
            }
        }
        if cfg.out.is_relative() {
            cfg.out = base.join(&cfg.out);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        if self.scenario != Scenario::Cl && (self.clients == 0 || self.sweep.contains(&0)) {
            return Err(Error::Config("client counts must be at least 1".into()));
        }
        match &self.data.manifest {
            Some(m) if !m.exists() => {
                return Err(Error::Config(format!("manifest {} does not exist", m.display())));
            }
            Some(_) => {}
            None => {
                self.data.class_codes()?;
                if self.data.per_class == 0 || self.data.classes.is_empty() {
                    return Err(Error::Config("synthetic data needs classes and per_class > 0".into()));
                }
            }
        }
        self.federation_config(self.clients.max(1))?.validate()
    }

    /// Client counts to run: 1 for CL, the sweep if given, else `clients`.
    pub fn client_counts(&self) -> Vec<usize> {
        match self.scenario {
            Scenario::Cl => vec![1],
            _ if !self.sweep.is_empty() => self.sweep.clone(),
            _ => vec![self.clients],
        }
    }

    pub fn federation_config(&self, clients: usize) -> Result<FederationConfig> {
        Ok(FederationConfig {
            clients,
            partition: self.scenario.partition(),
            max_rounds: self.rounds,
            delta: self.federation.delta,
            patience: self.federation.patience,
            model: self.model.with_input_dim(self.pipeline.k),
            train: self.train,
            balance_mode: self.pipeline.balancing,
            beta: self.pipeline.beta,
            smote_neighbors: self.pipeline.smote_neighbors,
            k: self.pipeline.k,
            selection: self.pipeline.selection,
            gbdt: self.gbdt,
            seed: self.seed,
            parallel: self.federation.parallel,
        })
    }

    pub fn registry(&self) -> FeatureRegistry {
        FeatureRegistry::new(RegistryConfig { include_signal_stats: self.pipeline.include_signal_stats })
    }
}

/// Generates `per_class` recordings of each class. Record `i` of class `c`
/// uses its own seed, so the set is stable under changes to other classes.
pub fn synthesize(classes: &[DiagnosisCode], per_class: usize, fs: f64, seconds: f64, seed: u64) -> Result<Dataset> {
    let mut recs = Vec::with_capacity(classes.len() * per_class);
    for &c in classes {
        for i in 0..per_class {
            let s = crate::federation::derive_seed(seed, c.index() as u64, i as u64);
            let r = synth_generate(c, s, fs, seconds)?.recording;
            recs.push(r.with_id(format!("{}-{i:05}", c.abbreviation())));
        }
    }
    Dataset::new(recs, format!("synthetic seed {seed}"))
}

pub fn load_data(cfg: &ExperimentConfig) -> Result<Dataset> {
    match &cfg.data.manifest {
        Some(m) => {
            let report = load_dataset(m)?;
            for e in &report.rejected {
                log::warn!("[load] skipped {}: {}", e.id, e.error);
            }
            Ok(report.dataset)
        }
        None => synthesize(&cfg.data.class_codes()?, cfg.data.per_class, cfg.data.fs, cfg.data.seconds, cfg.seed),
    }
}

/// Writes a synthetic dataset and returns the manifest path and per-class counts.
pub fn cmd_synth(cfg: &DataConfig, seed: u64, out: impl AsRef<Path>) -> Result<(PathBuf, Vec<(DiagnosisCode, usize)>)> {
    let classes = cfg.class_codes()?;
    let ds = synthesize(&classes, cfg.per_class, cfg.fs, cfg.seconds, seed)?;
    let manifest = write_dataset(&ds, out)?;
    let counts = ds.class_counts();
    Ok((manifest, classes.iter().map(|&c| (c, counts[c.index()])).collect()))
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub info: RunInfo,
    pub history: FederationHistory,
    pub prepared: Prepared,
    pub preprocessing_seconds: f64,
    pub dir: Option<PathBuf>,
}

/// One scenario at one client count on already extracted features.
pub fn run_on_table(
    cfg: &ExperimentConfig,
    table: &FeatureTable,
    registry: &FeatureRegistry,
    clients: usize,
    extraction_seconds: f64,
) -> Result<RunOutcome> {
    let fcfg = cfg.federation_config(clients)?;
    let mut prepared = prepare(&fcfg, table, registry, cfg.pipeline.fractions)?;
    let history = run_federation(&fcfg, &mut prepared.clients, &prepared.val, &prepared.test)?;
    let info = RunInfo {
        scenario: cfg.scenario.name().to_string(),
        model: fcfg.model.architecture().to_string(),
        balancing: cfg.pipeline.balancing.to_string(),
        clients,
        partition: fcfg.partition,
        seed: cfg.seed,
    };
    log::info!(
        "[run] {} N={} test f1 {:.4} accuracy {:.4} after {} rounds",
        info.scenario,
        clients,
        history.test.f1,
        history.test.accuracy,
        history.rounds.len()
    );
    Ok(RunOutcome {
        info,
        preprocessing_seconds: extraction_seconds + prepared.seconds,
        history,
        prepared,
        dir: None,
    })
}

pub fn write_outcome(cfg: &ExperimentConfig, outcome: &mut RunOutcome, dir: &Path) -> Result<()> {
    let config = serde_json::to_value(cfg)?;
    let input = ReportInput {
        run: outcome.info.clone(),
        config: &config,
        history: &outcome.history,
        audit: &outcome.prepared.audit,
        plans: outcome.prepared.clients.iter().map(|c| c.plan.clone()).collect(),
        split: outcome.prepared.split,
        selected_features: outcome.prepared.registry.names().into_iter().map(String::from).collect(),
        preprocessing_seconds: outcome.preprocessing_seconds,
    };
    make_report(dir, &input)?;
    if let Some(p) = &outcome.history.final_params {
        p.save(dir, "model")?;
    }
    outcome.dir = Some(dir.to_path_buf());
    Ok(())
}

/// Runs the configured scenario, writing one report per client count into
/// `out` (or `out/N{n}` when sweeping).
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<Vec<RunOutcome>> {
    cfg.validate()?;
    let t = Instant::now();
    let ds = load_data(cfg)?;
    let registry = cfg.registry();
    let table = extract_table(&ds, &registry, cfg.pipeline.fs, cfg.pipeline.seconds)?;
    let extraction = t.elapsed().as_secs_f64();
    log::info!("[extract] {} records x {} features in {extraction:.1} s", table.len(), table.n_features());
    let counts = cfg.client_counts();
    let sweeping = cfg.scenario != Scenario::Cl && !cfg.sweep.is_empty();
    let mut out = Vec::new();
    for n in counts {
        let mut o = run_on_table(cfg, &table, &registry, n, extraction)?;
        let dir = if sweeping { cfg.out.join(format!("N{n}")) } else { cfg.out.clone() };
        write_outcome(cfg, &mut o, &dir)?;
        out.push(o);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub scenario: String,
    pub model: String,
    pub balancing: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "F1")]
    pub f1: f64,
    pub accuracy: f64,
    pub seconds: f64,
}

/// One row per report directory, ordered by (scenario, model, N).
pub fn cmd_compare<P: AsRef<Path>>(dirs: &[P], out_csv: impl AsRef<Path>) -> Result<Vec<CompareRow>> {
    if dirs.len() < 2 {
        return Err(Error::Argument("compare needs at least two report directories".into()));
    }
    let mut rows = Vec::with_capacity(dirs.len());
    for d in dirs {
        let m = read_metrics(d)?;
        let timing_path = d.as_ref().join("timing.json");
        let timing: crate::report::TimingFile = serde_json::from_str(
            &std::fs::read_to_string(&timing_path).map_err(|e| Error::io(&timing_path, e))?,
        )?;
        rows.push(CompareRow {
            scenario: m.run.scenario,
            model: m.run.model,
            balancing: m.run.balancing,
            n: m.run.clients,
            f1: m.test.f1,
            accuracy: m.test.accuracy,
            seconds: timing.total_seconds,
        });
    }
    rows.sort_by(|a, b| (&a.scenario, &a.model, a.n).cmp(&(&b.scenario, &b.model, b.n)));
    let path = out_csv.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        k => Error::Serde(format!("{k:?}")),
    })?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::DnnConfig;

    #[test]
    fn toml_defaults_and_overrides() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            scenario = "FL-NonIID"
            clients = 6
            [data]
            per_class = 3
            classes = ["NSR", "AF"]
            [pipeline]
            k = 30
            balancing = "SMOTE+RUS"
            [model]
            kind = "LSTM"
            units = 10
            "#,
        )
        .unwrap();
        assert_eq!(cfg.scenario, Scenario::FlNonIid);
        assert_eq!(cfg.rounds, 10);
        let f = cfg.federation_config(6).unwrap();
        assert_eq!(f.model.input_dim(), 30);
        assert_eq!(f.partition, PartitionMode::NonIid);
        assert_eq!(f.balance_mode, BalanceMode::SmoteRus);
        cfg.validate().unwrap();
        assert_eq!(cfg.client_counts(), [6]);
    }

    #[test]
    fn unknown_key_and_bad_class_rejected() {
        assert!(matches!(ExperimentConfig::from_toml("scenaro = \"CL\""), Err(Error::Config(_))));
        let cfg = ExperimentConfig::from_toml("[data]\nclasses = [\"LBBB\"]").unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = ExperimentConfig::from_toml("[data]\nmanifest = \"/nonexistent/m.csv\"").unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn cl_ignores_clients() {
        let cfg = ExperimentConfig { clients: 0, sweep: vec![2, 4], ..Default::default() };
        cfg.validate().unwrap();
        assert_eq!(cfg.client_counts(), [1]);
    }

    #[test]
    fn synthesize_is_deterministic() {
        let a = synthesize(&[DiagnosisCode::NSR, DiagnosisCode::AF], 2, 257.0, 4.0, 3).unwrap();
        let b = synthesize(&[DiagnosisCode::NSR, DiagnosisCode::AF], 2, 257.0, 4.0, 3).unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!(a.recordings(), b.recordings());
    }

    #[test]
    fn cl_equals_fl_single_client() {
        let mut cfg = ExperimentConfig {
            rounds: 2,
            seed: 4,
            data: DataConfig { per_class: 12, classes: vec!["NSR".into(), "AF".into(), "SB".into()], seconds: 8.0, ..Default::default() },
            pipeline: PipelineConfig { k: 8, fractions: [0.5, 0.25, 0.25], ..Default::default() },
            model: ModelConfig::Dnn(DnnConfig { hidden_layers: 1, hidden_units: 8, ..Default::default() }),
            gbdt: GbdtConfig { rounds: 2, ..Default::default() },
            ..Default::default()
        };
        let reg = cfg.registry();
        let table = extract_table(&load_data(&cfg).unwrap(), &reg, cfg.pipeline.fs, cfg.pipeline.seconds).unwrap();
        let cl = run_on_table(&cfg, &table, &reg, 1, 0.0).unwrap();
        cfg.scenario = Scenario::FlIid;
        let fl = run_on_table(&cfg, &table, &reg, 1, 0.0).unwrap();
        assert_eq!(cl.history.final_digest, fl.history.final_digest);
        assert_eq!(cl.history.test.per_class, fl.history.test.per_class);
        assert_eq!(cl.history.test.f1, fl.history.test.f1);
    }

    #[test]
    fn compare_orders_rows_and_needs_two() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(cmd_compare(&[dir.path()], dir.path().join("c.csv")), Err(Error::Argument(_))));
        let missing = dir.path().join("nope");
        assert!(cmd_compare(&[missing.clone(), missing], dir.path().join("c.csv")).is_err());
    }
}
