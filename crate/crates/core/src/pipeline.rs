//! Preprocessing that runs once before the first round: split, partition,
//! federated scaling, feature selection and per-client balancing.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::balancing::{plan_balance, ros_rus, smote_rus, BalanceMode};
use crate::error::{Error, Result};
use crate::features::{extract_batch, standardize, FeatureRegistry};
use crate::federation::{
    audit_partition, derive_seed, iid_indices, noniid_indices, split_indices, ClientState,
    FederationConfig, PartitionAudit, PartitionMode, SelectionMode,
};
use crate::normalization::{apply_scaler_table, fit_robust_scaler, ClientValues, ScalerParams};
use crate::selection::{federated_importance, fit_gbdt, importance, select_top_k, ImportanceReport};
use crate::signal::Dataset;
use crate::table::FeatureTable;

pub const TARGET_FS: f64 = 257.0;
pub const TARGET_SECONDS: f64 = 16.0;
pub const DEFAULT_FRACTIONS: [f64; 3] = [0.9, 0.05, 0.05];

const SPLIT_STREAM: u64 = 1 << 40;
const PARTITION_STREAM: u64 = (1 << 40) + 1;
const BALANCE_STREAM: u64 = (1 << 40) + 2;

/// Standardizes every recording to `fs`/`seconds` and extracts the registry's
/// features. Rows follow dataset order.
pub fn extract_table(ds: &Dataset, registry: &FeatureRegistry, fs: f64, seconds: f64) -> Result<FeatureTable> {
    let recs = ds
        .recordings()
        .iter()
        .map(|r| standardize(r, fs, seconds))
        .collect::<Result<Vec<_>>>()?;
    let vectors = extract_batch(&recs, registry);
    let flagged = vectors.iter().filter(|v| !v.issues.is_empty()).count();
    if flagged > 0 {
        log::warn!("[extract] {flagged} of {} records had quality issues", vectors.len());
    }
    FeatureTable::from_vectors(&vectors, registry.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub clients: Vec<ClientState>,
    pub val: FeatureTable,
    pub test: FeatureTable,
    /// Scaler over the full registry.
    pub scaler: ScalerParams,
    /// Importance over the full registry.
    pub importance: ImportanceReport,
    /// Selected column indices into the full registry, best first.
    pub selected: Vec<usize>,
    pub registry: FeatureRegistry,
    pub audit: PartitionAudit,
    pub split: SplitSizes,
    pub seconds: f64,
}

/// Runs the static pipeline on an extracted feature table whose columns
/// follow `registry`.
pub fn prepare(
    cfg: &FederationConfig,
    table: &FeatureTable,
    registry: &FeatureRegistry,
    fractions: [f64; 3],
) -> Result<Prepared> {
    let start = Instant::now();
    cfg.validate()?;
    if table.n_features() != registry.len() {
        return Err(Error::Schema(format!(
            "table has {} columns, registry {}",
            table.n_features(),
            registry.len()
        )));
    }
    if cfg.k > registry.len() {
        return Err(Error::Config(format!("k = {} exceeds the {} available features", cfg.k, registry.len())));
    }

    let s = split_indices(table.labels(), fractions, derive_seed(cfg.seed, SPLIT_STREAM, 0))?;
    let (train, val, test) = (table.take_rows(&s.train), table.take_rows(&s.val), table.take_rows(&s.test));
    let split = SplitSizes { train: train.len(), val: val.len(), test: test.len() };
    log::info!("[split] train {} val {} test {}", split.train, split.val, split.test);

    let pseed = derive_seed(cfg.seed, PARTITION_STREAM, 0);
    let parts = match cfg.partition {
        PartitionMode::Iid => iid_indices(train.labels(), cfg.clients, pseed)?,
        PartitionMode::NonIid => noniid_indices(train.len(), cfg.clients, pseed)?,
    };
    let audit = audit_partition(train.labels(), &parts);
    let shards: Vec<FeatureTable> = parts.iter().map(|rows| train.take_rows(rows)).collect();
    log::info!("[partition] {} clients ({}), {} unused records", shards.len(), cfg.partition, audit.unused_records);

    let names = registry.names();
    let values: Vec<ClientValues> = shards.iter().map(|t| ClientValues::from_matrix(t.x(), &names)).collect();
    let scaler = fit_robust_scaler(&values, registry)?;
    let shards = shards
        .iter()
        .map(|t| apply_scaler_table(t, &scaler))
        .collect::<Result<Vec<_>>>()?;
    let (val, test) = (apply_scaler_table(&val, &scaler)?, apply_scaler_table(&test, &scaler)?);

    let importance = match cfg.selection {
        SelectionMode::Pooled => {
            let refs: Vec<&FeatureTable> = shards.iter().collect();
            let pooled = FeatureTable::concat(&refs)?;
            importance(&fit_gbdt(pooled.x(), pooled.labels(), &cfg.gbdt)?)
        }
        SelectionMode::Federated => {
            let mut reports = Vec::new();
            for (k, t) in shards.iter().enumerate() {
                match fit_gbdt(t.x(), t.labels(), &cfg.gbdt) {
                    Ok(m) => reports.push((importance(&m), t.len())),
                    Err(Error::Capability(msg)) => log::warn!("[selection] client {k} skipped: {msg}"),
                    Err(e) => return Err(e),
                }
            }
            if reports.is_empty() {
                return Err(Error::Capability("no client could fit a ranking model".into()));
            }
            federated_importance(&reports)?
        }
    };
    let selected = select_top_k(&importance, cfg.k)?;
    let val = val.select_columns(&selected)?;
    let test = test.select_columns(&selected)?;
    log::info!("[selection] kept {} of {} features", selected.len(), registry.len());

    let mut clients = Vec::with_capacity(shards.len());
    for (k, t) in shards.iter().enumerate() {
        let t = t.select_columns(&selected)?;
        let plan = plan_balance(&t.class_counts(), cfg.beta, cfg.balance_mode)?;
        let bseed = derive_seed(cfg.seed, BALANCE_STREAM, k as u64);
        let data = match cfg.balance_mode {
            BalanceMode::RosRus => ros_rus(&t, &plan, bseed)?,
            BalanceMode::SmoteRus => smote_rus(&t, &plan, cfg.smote_neighbors, bseed)?,
        };
        log::info!("[balance] client {k}: {} -> {} rows, {} operations", t.len(), data.len(), plan.executed());
        let mut c = ClientState::new(k, data);
        c.plan = Some(plan);
        clients.push(c);
    }

    Ok(Prepared {
        clients,
        val,
        test,
        scaler,
        importance,
        registry: registry.select(&selected)?,
        selected,
        audit,
        split,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{DnnConfig, ModelConfig, TrainConfig};
    use crate::signal::{synth_generate, SUPPORTED_CLASSES};

    fn synthetic(per_class: usize, classes: usize) -> Dataset {
        let recs = SUPPORTED_CLASSES[..classes]
            .iter()
            .flat_map(|&c| {
                (0..per_class).map(move |i| {
                    let r = synth_generate(c, i as u64 * 31 + c.index() as u64, TARGET_FS, 10.0).unwrap().recording;
                    r.with_id(format!("{}-{i}", c.abbreviation()))
                })
            })
            .collect();
        Dataset::new(recs, "synthetic").unwrap()
    }

    fn cfg(k: usize) -> FederationConfig {
        FederationConfig {
            clients: 2,
            k,
            model: ModelConfig::Dnn(DnnConfig { input_dim: k, hidden_layers: 1, hidden_units: 16, ..Default::default() }),
            train: TrainConfig { epochs: 3, batch_size: 16, learning_rate: 1e-2, ..Default::default() },
            gbdt: crate::selection::GbdtConfig { rounds: 3, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn prepares_balanced_clients_with_k_columns() {
        let ds = synthetic(20, 3);
        let reg = FeatureRegistry::default();
        let table = extract_table(&ds, &reg, TARGET_FS, TARGET_SECONDS).unwrap();
        assert_eq!(table.n_features(), 674);
        let p = prepare(&cfg(10), &table, &reg, [0.8, 0.1, 0.1]).unwrap();
        assert_eq!(p.clients.len(), 2);
        assert_eq!(p.registry.len(), 10);
        assert_eq!(p.split, SplitSizes { train: 48, val: 6, test: 6 });
        for c in &p.clients {
            assert_eq!(c.data.n_features(), 10);
            let counts: Vec<usize> = c.data.class_counts().into_iter().filter(|&n| n > 0).collect();
            assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        }
        assert_eq!(p.val.n_features(), 10);
        let again = prepare(&cfg(10), &table, &reg, [0.8, 0.1, 0.1]).unwrap();
        assert_eq!(again.selected, p.selected);
        assert_eq!(again.clients[1].data, p.clients[1].data);
    }

    #[test]
    fn k_too_large_is_config_error() {
        let reg = FeatureRegistry::default();
        let ds = synthetic(4, 2);
        let table = extract_table(&ds, &reg, TARGET_FS, TARGET_SECONDS).unwrap();
        assert!(matches!(prepare(&cfg(675), &table, &reg, DEFAULT_FRACTIONS), Err(Error::Config(_))));
    }
}
