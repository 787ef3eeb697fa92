//! Boosted-tree total-gain importance and top-k feature selection.

mod gbdt;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use gbdt::{fit_gbdt, GbdtConfig, GbdtModel, Node, Tree};

use crate::error::{Error, Result};
use crate::features::FeatureRegistry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub gains: Vec<f64>,
    pub splits: Vec<usize>,
    /// Feature indices by descending gain, ties to the lower index.
    pub ranking: Vec<usize>,
}

impl ImportanceReport {
    /// Builds a report (and its ranking) from per-feature gains.
    pub fn from_gains(gains: Vec<f64>, splits: Vec<usize>) -> Result<Self> {
        if gains.len() != splits.len() {
            return Err(Error::Schema("gains and split counts differ in length".into()));
        }
        if gains.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
            return Err(Error::Argument("gains must be finite and non-negative".into()));
        }
        let mut ranking: Vec<usize> = (0..gains.len()).collect();
        ranking.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
        Ok(Self { gains, splits, ranking })
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    /// 1-based rank of each feature.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![0; self.len()];
        for (pos, &f) in self.ranking.iter().enumerate() {
            r[f] = pos + 1;
        }
        r
    }

    /// Writes `name,gain,rank` rows in ranking order.
    pub fn write_csv(&self, path: impl AsRef<Path>, registry: &FeatureRegistry) -> Result<()> {
        let path = path.as_ref();
        if registry.len() != self.len() {
            return Err(Error::Schema("registry does not match the report".into()));
        }
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        w.write_record(["name", "gain", "rank"])?;
        for (pos, &f) in self.ranking.iter().enumerate() {
            let name = &registry.entries()[f].name;
            w.write_record([name.as_str(), &self.gains[f].to_string(), &(pos + 1).to_string()])?;
        }
        w.into_inner()
            .map_err(|e| Error::Serde(e.to_string()))?
            .flush()
            .map_err(|e| Error::io(path, e))
    }
}

/// Total split gain per feature, summed over every tree.
pub fn importance(model: &GbdtModel) -> ImportanceReport {
    let mut gains = vec![0.0; model.n_features];
    let mut splits = vec![0; model.n_features];
    for tree in model.trees.iter().flatten() {
        for node in &tree.nodes {
            if let Node::Split { feature, gain, .. } = *node {
                gains[feature] += gain;
                splits[feature] += 1;
            }
        }
    }
    ImportanceReport::from_gains(gains, splits).expect("split gains are positive and finite")
}

/// Averages client reports weighted by their sample counts.
pub fn federated_importance(reports: &[(ImportanceReport, usize)]) -> Result<ImportanceReport> {
    let Some((first, _)) = reports.first() else {
        return Err(Error::Argument("no importance reports".into()));
    };
    let total: usize = reports.iter().map(|(_, n)| n).sum();
    if total == 0 {
        return Err(Error::Argument("reports carry no samples".into()));
    }
    let m = first.len();
    if reports.iter().any(|(r, _)| r.len() != m) {
        return Err(Error::Schema("reports cover different feature counts".into()));
    }
    let mut gains = vec![0.0; m];
    let mut splits = vec![0; m];
    for (r, n) in reports {
        let w = *n as f64 / total as f64;
        for f in 0..m {
            gains[f] += w * r.gains[f];
            splits[f] += r.splits[f];
        }
    }
    ImportanceReport::from_gains(gains, splits)
}

/// The `k` best features, by descending gain then ascending index.
pub fn select_top_k(report: &ImportanceReport, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > report.len() {
        return Err(Error::Argument(format!(
            "k = {k} outside 1..={}",
            report.len()
        )));
    }
    Ok(report.ranking[..k].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{concatenate, Array2, Axis};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn planted(seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 90;
        let x: Array2<f64> = Array2::from_shape_fn((n, 8), |_| rng.random_range(-1.0..1.0));
        let y = (0..n)
            .map(|i| (0..3).max_by(|&a, &b| x[[i, 2 * a]].total_cmp(&x[[i, 2 * b]])).unwrap())
            .collect();
        (x, y)
    }

    #[test]
    fn designated_features_rank_first() {
        let (x, y) = planted(11);
        let r = importance(&fit_gbdt(&x, &y, &GbdtConfig::default()).unwrap());
        let mut top: Vec<usize> = r.ranking[..3].to_vec();
        top.sort_unstable();
        assert_eq!(top, [0, 2, 4]);
    }

    #[test]
    fn leaf_only_model_has_zero_gain() {
        let x = Array2::from_elem((10, 3), 2.0);
        let y: Vec<usize> = (0..10).map(|i| i % 2).collect();
        let r = importance(&fit_gbdt(&x, &y, &GbdtConfig::default()).unwrap());
        assert!(r.gains.iter().all(|&g| g == 0.0));
        assert_eq!(select_top_k(&r, 2).unwrap(), [0, 1]);
    }

    #[test]
    fn top_k_bounds() {
        let r = ImportanceReport::from_gains(vec![0.5, 2.0, 2.0, 0.0], vec![1, 2, 2, 0]).unwrap();
        assert_eq!(r.ranking, [1, 2, 0, 3]);
        assert_eq!(select_top_k(&r, 4).unwrap(), r.ranking);
        assert!(matches!(select_top_k(&r, 0), Err(Error::Argument(_))));
        assert!(matches!(select_top_k(&r, 5), Err(Error::Argument(_))));
        assert_eq!(r.ranks(), [3, 1, 2, 4]);
    }

    #[test]
    fn default_registry_top_120() {
        let gains: Vec<f64> = (0..674).map(|i| ((i * 37) % 101) as f64).collect();
        let r = ImportanceReport::from_gains(gains, vec![0; 674]).unwrap();
        assert_eq!(select_top_k(&r, 120).unwrap().len(), 120);
    }

    #[test]
    fn duplicated_column_splits_gain() {
        let (x, y) = planted(4);
        let solo = importance(&fit_gbdt(&x, &y, &GbdtConfig::default()).unwrap());
        let dup = concatenate(Axis(1), &[x.view(), x.column(0).insert_axis(Axis(1))]).unwrap();
        let both = importance(&fit_gbdt(&dup, &y, &GbdtConfig::default()).unwrap());
        let (orig, copy) = (both.gains[0], both.gains[8]);
        assert!(orig + copy >= solo.gains[0] - 1e-9);
        assert!(orig <= solo.gains[0] + 1e-9 && copy <= solo.gains[0] + 1e-9);
    }

    #[test]
    fn federated_average_weights_by_size() {
        let a = ImportanceReport::from_gains(vec![1.0, 0.0], vec![1, 0]).unwrap();
        let b = ImportanceReport::from_gains(vec![0.0, 4.0], vec![0, 3]).unwrap();
        let f = federated_importance(&[(a, 3), (b, 1)]).unwrap();
        assert_eq!(f.gains, [0.75, 1.0]);
        assert_eq!(f.ranking, [1, 0]);
        assert_eq!(f.splits, [1, 3]);
    }

    #[test]
    fn csv_export() {
        let dir = tempfile::tempdir().unwrap();
        let reg = FeatureRegistry::default().select(&[0, 1]).unwrap();
        let r = ImportanceReport::from_gains(vec![1.0, 3.0], vec![1, 1]).unwrap();
        r.write_csv(dir.path().join("imp.csv"), &reg).unwrap();
        let text = std::fs::read_to_string(dir.path().join("imp.csv")).unwrap();
        assert_eq!(text, "name,gain,rank\nsex,3,1\nage,1,2\n");
    }

    proptest! {
        #[test]
        fn ranking_stable_under_permutation(gains in prop::collection::vec(0u8..5, 1..30), k in 1usize..30) {
            let g: Vec<f64> = gains.iter().map(|&v| f64::from(v)).collect();
            let r = ImportanceReport::from_gains(g.clone(), vec![0; g.len()]).unwrap();
            let k = k.min(g.len());
            let top = select_top_k(&r, k).unwrap();
            // any report with the same gains gives the same selection
            let again = ImportanceReport::from_gains(g.clone(), vec![1; g.len()]).unwrap();
            prop_assert_eq!(&top, &select_top_k(&again, k).unwrap());
            for w in top.windows(2) {
                prop_assert!(g[w[0]] > g[w[1]] || (g[w[0]] == g[w[1]] && w[0] < w[1]));
            }
        }
    }
}
