use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fedavg;
use crate::balancing::{BalanceMode, BalancePlan};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, MetricsBundle};
use crate::nn::{init_params, predict, train_local, ModelConfig, ModelParams, TrainConfig};
use crate::selection::GbdtConfig;
use crate::table::FeatureTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PartitionMode {
    #[serde(rename = "IID")]
    Iid,
    #[serde(rename = "NonIID")]
    NonIid,
}

impl std::fmt::Display for PartitionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PartitionMode::Iid => "IID",
            PartitionMode::NonIid => "NonIID",
        })
    }
}

/// How the top-k feature set is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    /// Clients rank features locally; the server averages the gains weighted
    /// by client size.
    Federated,
    /// One ranking over the pooled training set.
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FederationConfig {
    pub clients: usize,
    pub partition: PartitionMode,
    pub max_rounds: usize,
    /// Stop once |change in validation F1| < delta for `patience` rounds running.
    pub delta: f64,
    pub patience: usize,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub balance_mode: BalanceMode,
    pub beta: f64,
    pub smote_neighbors: usize,
    pub k: usize,
    pub selection: SelectionMode,
    pub gbdt: GbdtConfig,
    pub seed: u64,
    /// Train clients concurrently. Results are identical either way.
    pub parallel: bool,
}

impl Default for FederationConfig {
    fn default() -> Self {
        Self {
            clients: 4,
            partition: PartitionMode::Iid,
            max_rounds: 10,
            delta: 0.005,
            patience: 3,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            balance_mode: BalanceMode::RosRus,
            beta: 1.0,
            smote_neighbors: crate::balancing::DEFAULT_SMOTE_NEIGHBORS,
            k: 120,
            selection: SelectionMode::Federated,
            gbdt: GbdtConfig::default(),
            seed: 0,
            parallel: false,
        }
    }
}

impl FederationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clients == 0 {
            return Err(Error::Config("at least one client is required".into()));
        }
        if self.max_rounds == 0 {
            return Err(Error::Config("at least one round is required".into()));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::Config(format!("delta {} must be non-negative", self.delta)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta {} outside [0, 1]", self.beta)));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        self.model.validate()?;
        self.train.validate()
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of a sub-task derived from the master seed.
pub fn derive_seed(master: u64, a: u64, b: u64) -> u64 {
    mix(mix(mix(master) ^ a) ^ b)
}

/// Training seed of `client` (0-based) in `round` (1-based).
pub fn client_seed(master: u64, client: usize, round: usize) -> u64 {
    derive_seed(master, client as u64 + 1, round as u64)
}

/// Seed of the global model's initial weights.
pub fn init_seed(master: u64) -> u64 {
    derive_seed(master, 0, 0)
}

/// A client's post-pipeline training data.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientState {
    pub id: usize,
    pub data: FeatureTable,
    pub plan: Option<BalancePlan>,
    /// Weights after the client's most recent local training.
    pub params: Option<ModelParams>,
}

impl ClientState {
    pub fn new(id: usize, data: FeatureTable) -> Self {
        Self { id, data, plan: None, params: None }
    }

    pub fn n(&self) -> usize {
        self.data.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientRound {
    pub client: usize,
    pub n: usize,
    /// Mean loss of the last local epoch.
    pub loss: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub clients: Vec<ClientRound>,
    pub digest: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Measured wall-clock of the whole round.
    pub seconds: f64,
    /// Slowest client plus server time: the round's duration when every
    /// client runs on its own machine.
    pub parallel_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederationHistory {
    pub rounds: Vec<RoundLog>,
    pub stop_reason: String,
    pub test: MetricsBundle,
    pub final_digest: String,
    pub total_seconds: f64,
    #[serde(skip)]
    pub final_params: Option<ModelParams>,
}

impl FederationHistory {
    pub fn final_f1(&self) -> f64 {
        self.test.f1
    }

    pub fn write_rounds_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        w.write_record(["round", "accuracy", "precision", "recall", "f1", "seconds"])?;
        for r in &self.rounds {
            w.write_record([
                r.round.to_string(),
                r.accuracy.to_string(),
                r.precision.to_string(),
                r.recall.to_string(),
                r.f1.to_string(),
                r.seconds.to_string(),
            ])?;
        }
        w.into_inner()
            .map_err(|e| Error::Serde(e.to_string()))?
            .flush()
            .map_err(|e| Error::io(path, e))
    }
}

fn train_client(
    c: &ClientState,
    global: &ModelParams,
    cfg: &FederationConfig,
    round: usize,
) -> Result<(ModelParams, ClientRound)> {
    let t = Instant::now();
    let tcfg = TrainConfig { seed: client_seed(cfg.seed, c.id, round), ..cfg.train };
    let (p, hist) = train_local(global, &cfg.model, &tcfg, &c.data)?;
    Ok((
        p,
        ClientRound {
            client: c.id,
            n: c.n(),
            loss: hist.last().copied().unwrap_or(f64::NAN),
            seconds: t.elapsed().as_secs_f64(),
        },
    ))
}

/// The communication-round loop: local training on every client, FedAvg on
/// the server, validation of the global model, and the stopping rule. Test
/// metrics are computed once, after the loop.
pub fn run_federation(
    cfg: &FederationConfig,
    clients: &mut [ClientState],
    val: &FeatureTable,
    test: &FeatureTable,
) -> Result<FederationHistory> {
    cfg.validate()?;
    if clients.is_empty() {
        return Err(Error::Config("no clients".into()));
    }
    if let Some(c) = clients.iter().find(|c| c.data.is_empty()) {
        return Err(Error::Config(format!("client {} has no training data", c.id)));
    }
    if val.is_empty() || test.is_empty() {
        return Err(Error::Config("validation and test sets must be non-empty".into()));
    }
    let dim = cfg.model.input_dim();
    if clients.iter().any(|c| c.data.n_features() != dim) || val.n_features() != dim || test.n_features() != dim {
        return Err(Error::Config(format!("feature tables do not have {dim} columns")));
    }

    let start = Instant::now();
    let mut global = init_params(&cfg.model, init_seed(cfg.seed))?;
    let mut rounds: Vec<RoundLog> = Vec::new();
    let mut stable = 0;
    let mut stop_reason = format!("reached {} rounds", cfg.max_rounds);
    for round in 1..=cfg.max_rounds {
        let t = Instant::now();
        let results: Vec<Result<(ModelParams, ClientRound)>> = if cfg.parallel {
            clients.par_iter().map(|c| train_client(c, &global, cfg, round)).collect()
        } else {
            clients.iter().map(|c| train_client(c, &global, cfg, round)).collect()
        };
        let mut locals = Vec::with_capacity(clients.len());
        let mut logs = Vec::with_capacity(clients.len());
        for (c, r) in clients.iter_mut().zip(results) {
            let (p, log) = r?;
            c.params = Some(p.clone());
            locals.push(p);
            logs.push(log);
        }
        let server = Instant::now();
        let sizes: Vec<usize> = clients.iter().map(ClientState::n).collect();
        global = fedavg(&locals, &sizes)?;
        let pred = predict(&global, &cfg.model, val.x().view())?;
        let m = evaluate(val.labels(), &pred)?;
        let server_secs = server.elapsed().as_secs_f64();
        let slowest = logs.iter().map(|l| l.seconds).fold(0.0, f64::max);
        log::info!("[round {round}] val f1 {:.4} accuracy {:.4}", m.f1, m.accuracy);
        if let Some(prev) = rounds.last() {
            if (m.f1 - prev.f1).abs() < cfg.delta {
                stable += 1;
            } else {
                stable = 0;
            }
        }
        rounds.push(RoundLog {
            round,
            clients: logs,
            digest: global.digest(),
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            seconds: t.elapsed().as_secs_f64(),
            parallel_seconds: slowest + server_secs,
        });
        if cfg.patience > 0 && stable >= cfg.patience {
            stop_reason = format!("validation F1 stable for {} rounds", cfg.patience);
            break;
        }
    }
    let total_seconds = start.elapsed().as_secs_f64();
    let pred = predict(&global, &cfg.model, test.x().view())?;
    let mut test_metrics = evaluate(test.labels(), &pred)?;
    test_metrics.seconds = total_seconds;
    Ok(FederationHistory {
        rounds,
        stop_reason,
        test: test_metrics,
        final_digest: global.digest(),
        total_seconds,
        final_params: Some(global),
    })
}

/// The training schedule of a one-client federation without the federation:
/// `rounds` calls of [`train_local`], each with that round's seed.
pub fn train_centralized(
    cfg: &FederationConfig,
    data: &FeatureTable,
    rounds: usize,
) -> Result<ModelParams> {
    let mut p = init_params(&cfg.model, init_seed(cfg.seed))?;
    for round in 1..=rounds {
        let tcfg = TrainConfig { seed: client_seed(cfg.seed, 0, round), ..cfg.train };
        p = train_local(&p, &cfg.model, &tcfg, data)?.0;
    }
    Ok(p)
}
