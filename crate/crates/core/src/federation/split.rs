use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{Dataset, NUM_CLASSES};
use crate::table::FeatureTable;

/// Anything that can be split by label and re-assembled from row indices.
pub trait Partitionable: Sized {
    fn label_list(&self) -> Vec<usize>;
    /// Rows in order; repeated rows get distinct ids where the container
    /// requires it.
    fn take(&self, rows: &[usize]) -> Result<Self>;
}

impl Partitionable for FeatureTable {
    fn label_list(&self) -> Vec<usize> {
        self.labels().to_vec()
    }

    fn take(&self, rows: &[usize]) -> Result<Self> {
        Ok(self.take_rows(rows))
    }
}

impl Partitionable for Dataset {
    fn label_list(&self) -> Vec<usize> {
        self.labels()
    }

    fn take(&self, rows: &[usize]) -> Result<Self> {
        let mut seen = vec![0usize; self.len()];
        let recs = rows
            .iter()
            .map(|&r| {
                let rec = self.recordings()[r].clone();
                seen[r] += 1;
                if seen[r] > 1 {
                    let id = format!("{}#rep{}", rec.id(), seen[r] - 1);
                    rec.with_id(id)
                } else {
                    rec
                }
            })
            .collect();
        Dataset::new(recs, self.provenance())
    }
}

fn class_members(labels: &[usize]) -> Vec<Vec<usize>> {
    let mut m = vec![Vec::new(); NUM_CLASSES];
    for (i, &l) in labels.iter().enumerate() {
        m[l.min(NUM_CLASSES - 1)].push(i);
    }
    m
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Largest-remainder apportionment of `n` by `fractions`; leftover units go
/// to the largest remainders, ties to the lower position.
pub fn apportion(n: usize, fractions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut out: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut left = n.saturating_sub(out.iter().sum());
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(fractions.len() * 2) {
        if left == 0 {
            break;
        }
        out[i] += 1;
        left -= 1;
    }
    out
}

/// Index sets of a stratified train/validation/test split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per class: shuffle, then apportion by largest remainder. Classes with
/// fewer than 3 members go wholly to train.
pub fn split_indices(labels: &[usize], fractions: [f64; 3], seed: u64) -> Result<SplitIndices> {
    if labels.is_empty() {
        return Err(Error::Argument("cannot split an empty dataset".into()));
    }
    if fractions.iter().any(|f| !(*f >= 0.0)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Argument(format!("split fractions {fractions:?} must sum to 1")));
    }
    let mut out = SplitIndices { train: Vec::new(), val: Vec::new(), test: Vec::new() };
    for (c, mut members) in class_members(labels).into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 3 {
            log::warn!("class {c} has {} records; all go to train", members.len());
            out.train.extend(members);
            continue;
        }
        members.shuffle(&mut stream_rng(seed, c as u64));
        let sizes = apportion(members.len(), &fractions);
        out.train.extend_from_slice(&members[..sizes[0]]);
        out.val.extend_from_slice(&members[sizes[0]..sizes[0] + sizes[1]]);
        out.test.extend_from_slice(&members[sizes[0] + sizes[1]..]);
    }
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

pub fn split_train_val_test<T: Partitionable>(ds: &T, fractions: [f64; 3], seed: u64) -> Result<(T, T, T)> {
    let s = split_indices(&ds.label_list(), fractions, seed)?;
    Ok((ds.take(&s.train)?, ds.take(&s.val)?, ds.take(&s.test)?))
}

fn check_clients(n: usize, len: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Argument("need at least one client".into()));
    }
    if n > len {
        return Err(Error::Argument(format!("{n} clients for {len} records")));
    }
    Ok(())
}

/// Stratified equal shares: every class is shuffled and dealt round-robin,
/// the dealing position carrying over from one class to the next.
pub fn iid_indices(labels: &[usize], n: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    check_clients(n, labels.len())?;
    let mut clients = vec![Vec::new(); n];
    let mut cursor = 0;
    for (c, mut members) in class_members(labels).into_iter().enumerate() {
        members.shuffle(&mut stream_rng(seed, c as u64));
        for m in members {
            clients[cursor % n].push(m);
            cursor += 1;
        }
    }
    Ok(clients)
}

/// Each client draws `floor(len / n)` records uniformly with replacement.
pub fn noniid_indices(len: usize, n: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    check_clients(n, len)?;
    let per = len / n;
    Ok((0..n)
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            (0..per).map(|_| rng.random_range(0..len)).collect()
        })
        .collect())
}

pub fn partition_iid<T: Partitionable>(train: &T, n: usize, seed: u64) -> Result<Vec<T>> {
    iid_indices(&train.label_list(), n, seed)?
        .iter()
        .map(|rows| train.take(rows))
        .collect()
}

pub fn partition_noniid<T: Partitionable>(train: &T, n: usize, seed: u64) -> Result<Vec<T>> {
    noniid_indices(train.label_list().len(), n, seed)?
        .iter()
        .map(|rows| train.take(rows))
        .collect()
}

/// Label-distribution and coverage summary of a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionAudit {
    pub clients: Vec<ClientAudit>,
    pub global_histogram: Vec<usize>,
    /// Train records no client holds.
    pub unused_records: usize,
    /// Largest |client share - global share| over classes and clients.
    pub max_abs_deviation: f64,
    /// Largest relative deviation of a client share from the global share,
    /// over classes present globally.
    pub max_rel_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientAudit {
    pub client: usize,
    pub records: usize,
    pub distinct_records: usize,
    pub histogram: Vec<usize>,
}

pub fn audit_partition(labels: &[usize], parts: &[Vec<usize>]) -> PartitionAudit {
    let mut global = vec![0usize; NUM_CLASSES];
    for &l in labels {
        global[l] += 1;
    }
    let mut used = vec![false; labels.len()];
    let mut max_abs: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    let clients = parts
        .iter()
        .enumerate()
        .map(|(k, rows)| {
            let mut hist = vec![0usize; NUM_CLASSES];
            let mut distinct = std::collections::BTreeSet::new();
            for &r in rows {
                hist[labels[r]] += 1;
                used[r] = true;
                distinct.insert(r);
            }
            for c in 0..NUM_CLASSES {
                if global[c] == 0 || rows.is_empty() {
                    continue;
                }
                let g = global[c] as f64 / labels.len() as f64;
                let s = hist[c] as f64 / rows.len() as f64;
                max_abs = max_abs.max((s - g).abs());
                max_rel = max_rel.max((s - g).abs() / g);
            }
            ClientAudit { client: k, records: rows.len(), distinct_records: distinct.len(), histogram: hist }
        })
        .collect();
    PartitionAudit {
        clients,
        global_histogram: global,
        unused_records: used.iter().filter(|u| !**u).count(),
        max_abs_deviation: max_abs,
        max_rel_deviation: max_rel,
    }
}
