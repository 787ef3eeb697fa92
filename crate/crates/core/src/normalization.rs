//! Robust scaling `(x - median) / (q75 - q25)` with quantiles found by a
//! count-only bisection protocol, so no client reveals feature values.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureRegistry, FeatureVector, MISSING_AGE, MORPH_NAMES};
use crate::table::FeatureTable;

/// Bound-expansion attempts before giving up.
pub const MAX_EXPANSIONS: usize = 64;
/// Default search bounds and relative tolerance used by the scaler.
pub const DEFAULT_BOUNDS: (f64, f64) = (-1.0, 1.0);
pub const DEFAULT_REL_EPSILON: f64 = 1e-9;

/// What a client is able to answer: how many of its values of `feature`
/// are `<= threshold`.
pub trait CountOracle {
    fn count_le(&self, feature: usize, threshold: f64) -> usize;
}

/// Per-feature sorted values held privately by one client.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientValues {
    columns: Vec<Vec<f64>>,
}

impl ClientValues {
    /// Values of a single feature (index 0).
    pub fn single(values: Vec<f64>) -> Self {
        Self::from_columns(vec![values])
    }

    pub fn from_columns(mut columns: Vec<Vec<f64>>) -> Self {
        for c in &mut columns {
            c.sort_by(f64::total_cmp);
        }
        Self { columns }
    }

    /// Columns of a feature matrix; the age column drops missing-age
    /// sentinels so they do not bias its quantiles.
    pub fn from_matrix(x: &Array2<f64>, names: &[&str]) -> Self {
        let cols = x
            .columns()
            .into_iter()
            .enumerate()
            .map(|(j, c)| {
                let age = names.get(j) == Some(&MORPH_NAMES[0]);
                c.iter().copied().filter(|&v| !(age && v == MISSING_AGE)).collect()
            })
            .collect();
        Self::from_columns(cols)
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }
}

impl CountOracle for ClientValues {
    fn count_le(&self, feature: usize, threshold: f64) -> usize {
        self.columns
            .get(feature)
            .map_or(0, |c| c.partition_point(|&v| v <= threshold))
    }
}

/// One coordinator query and its reply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub threshold: f64,
    pub count: usize,
}

/// Everything that crossed each client boundary, in order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub per_client: Vec<Vec<Message>>,
}

impl Transcript {
    pub fn messages(&self) -> usize {
        self.per_client.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileQuery {
    pub feature: usize,
    pub q: f64,
    pub epsilon: f64,
    pub lo: f64,
    pub hi: f64,
}

impl QuantileQuery {
    pub fn new(feature: usize, q: f64, epsilon: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Argument(format!("quantile {q} not in (0, 1)")));
        }
        if !(epsilon > 0.0) {
            return Err(Error::Argument(format!("tolerance {epsilon} must be positive")));
        }
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Argument(format!("bad bounds [{lo}, {hi}]")));
        }
        Ok(Self { feature, q, epsilon, lo, hi })
    }
}

struct Coordinator<'a, C> {
    clients: &'a [C],
    feature: usize,
    log: Option<&'a mut Transcript>,
}

impl<C: CountOracle> Coordinator<'_, C> {
    fn count(&mut self, t: f64) -> usize {
        let mut total = 0;
        for (k, c) in self.clients.iter().enumerate() {
            let n = c.count_le(self.feature, t);
            if let Some(log) = self.log.as_deref_mut() {
                log.per_client[k].push(Message { threshold: t, count: n });
            }
            total += n;
        }
        total
    }

    /// Widens `[lo, hi]` by doubling until it holds every value.
    fn bracket(&mut self, mut lo: f64, mut hi: f64, total: usize) -> Result<(f64, f64)> {
        let mut tries = 0;
        while self.count(lo) > 0 {
            tries += 1;
            if tries > MAX_EXPANSIONS {
                return Err(Error::NonConvergence(format!(
                    "feature {}: lower bound still above data after {MAX_EXPANSIONS} expansions",
                    self.feature
                )));
            }
            lo -= (hi - lo).max(1.0);
        }
        while self.count(hi) < total {
            tries += 1;
            if tries > MAX_EXPANSIONS {
                return Err(Error::NonConvergence(format!(
                    "feature {}: upper bound still below data after {MAX_EXPANSIONS} expansions",
                    self.feature
                )));
            }
            hi += (hi - lo).max(1.0);
        }
        Ok((lo, hi))
    }

    /// Locates the order statistic of 0-based `rank`: the smallest value
    /// whose `<=` count exceeds `rank`. Assumes `count(lo) <= rank < count(hi)`.
    fn order_statistic(&mut self, rank: usize, mut lo: f64, mut hi: f64, eps: f64) -> f64 {
        while hi - lo > eps {
            let mid = lo + (hi - lo) / 2.0;
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count(mid) > rank {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo + (hi - lo) / 2.0
    }
}

fn quantiles_impl<C: CountOracle>(
    clients: &[C],
    feature: usize,
    qs: &[f64],
    epsilon: f64,
    bounds: (f64, f64),
    log: Option<&mut Transcript>,
) -> Result<Vec<f64>> {
    if clients.is_empty() {
        return Err(Error::Capability("empty federation".into()));
    }
    let mut co = Coordinator { clients, feature, log };
    if let Some(l) = co.log.as_deref_mut() {
        if l.per_client.len() != clients.len() {
            l.per_client = vec![Vec::new(); clients.len()];
        }
    }
    let total = co.count(f64::MAX);
    if total == 0 {
        return Err(Error::Capability(format!("no values for feature {feature}")));
    }
    let (lo, hi) = co.bracket(bounds.0, bounds.1, total)?;
    let mut cache: BTreeMap<usize, f64> = BTreeMap::new();
    let mut out = Vec::with_capacity(qs.len());
    for &q in qs {
        let h = (total - 1) as f64 * q;
        let (a, b) = (h.floor() as usize, h.ceil() as usize);
        let mut stat = |r: usize| -> f64 {
            if let Some(&v) = cache.get(&r) {
                return v;
            }
            let v = co.order_statistic(r, lo, hi, epsilon);
            cache.insert(r, v);
            v
        };
        let xa = stat(a);
        let xb = stat(b);
        out.push(xa + (h - a as f64) * (xb - xa));
    }
    Ok(out)
}

/// Quantile of the union of the clients' values (linear interpolation
/// between order statistics), learned only through `<=`-count queries.
pub fn federated_quantile<C: CountOracle>(clients: &[C], query: &QuantileQuery) -> Result<f64> {
    quantiles_impl(clients, query.feature, &[query.q], query.epsilon, (query.lo, query.hi), None)
        .map(|v| v[0])
}

/// As [`federated_quantile`], recording every message into `log`.
pub fn federated_quantile_logged<C: CountOracle>(
    clients: &[C],
    query: &QuantileQuery,
    log: &mut Transcript,
) -> Result<f64> {
    quantiles_impl(clients, query.feature, &[query.q], query.epsilon, (query.lo, query.hi), Some(log))
        .map(|v| v[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScale {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

impl FeatureScale {
    pub fn iqr(&self) -> f64 {
        self.q75 - self.q25
    }

    pub fn apply(&self, x: f64) -> f64 {
        let iqr = self.iqr();
        if iqr > 0.0 {
            (x - self.median) / iqr
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalerParams {
    names: Vec<String>,
    scales: Vec<FeatureScale>,
}

#[derive(Serialize, Deserialize)]
struct ScalerDoc {
    schema_version: u32,
    order: Vec<String>,
    features: BTreeMap<String, FeatureScale>,
}

impl ScalerParams {
    pub fn new(names: Vec<String>, scales: Vec<FeatureScale>) -> Result<Self> {
        if names.len() != scales.len() {
            return Err(Error::Schema("names and scales differ in length".into()));
        }
        Ok(Self { names, scales })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn scales(&self) -> &[FeatureScale] {
        &self.scales
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    /// Parameters restricted to the given features.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&i) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::Argument(format!("feature {i} out of range")));
        }
        Ok(Self {
            names: indices.iter().map(|&i| self.names[i].clone()).collect(),
            scales: indices.iter().map(|&i| self.scales[i]).collect(),
        })
    }

    fn scale_value(&self, j: usize, x: f64) -> f64 {
        let s = &self.scales[j];
        if self.names[j] == MORPH_NAMES[0] && x == MISSING_AGE {
            return 0.0;
        }
        s.apply(x)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ScalerDoc {
            schema_version: 1,
            order: self.names.clone(),
            features: self.names.iter().cloned().zip(self.scales.iter().copied()).collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ScalerDoc = serde_json::from_str(text)?;
        let scales = doc
            .order
            .iter()
            .map(|n| {
                doc.features
                    .get(n)
                    .copied()
                    .ok_or_else(|| Error::Schema(format!("no parameters for `{n}`")))
            })
            .collect::<Result<_>>()?;
        Self::new(doc.order, scales)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

/// Fits median and quartiles of every registry feature over the union of
/// the clients' values, to within `epsilon` (absolute).
///
/// A feature no client holds any value for (only possible for all-missing
/// age) gets an all-zero scale, which maps it to 0.0.
pub fn fit_robust_scaler_with<C: CountOracle + Sync>(
    clients: &[C],
    registry: &FeatureRegistry,
    bounds: (f64, f64),
    epsilon: f64,
    mut log: Option<&mut Transcript>,
) -> Result<ScalerParams> {
    if clients.is_empty() {
        return Err(Error::Capability("empty federation".into()));
    }
    let mut scales = Vec::with_capacity(registry.len());
    for f in 0..registry.len() {
        match quantiles_impl(clients, f, &[0.25, 0.5, 0.75], epsilon, bounds, log.as_deref_mut()) {
            Ok(v) => scales.push(FeatureScale { q25: v[0], median: v[1], q75: v[2] }),
            Err(Error::Capability(_)) => scales.push(FeatureScale { median: 0.0, q25: 0.0, q75: 0.0 }),
            Err(e) => return Err(e),
        }
    }
    ScalerParams::new(registry.names().into_iter().map(String::from).collect(), scales)
}

/// [`fit_robust_scaler_with`] at the default bounds and tolerance.
pub fn fit_robust_scaler<C: CountOracle + Sync>(
    clients: &[C],
    registry: &FeatureRegistry,
) -> Result<ScalerParams> {
    let eps = DEFAULT_REL_EPSILON * (DEFAULT_BOUNDS.1 - DEFAULT_BOUNDS.0);
    fit_robust_scaler_with(clients, registry, DEFAULT_BOUNDS, eps, None)
}

pub fn apply_scaler(v: &FeatureVector, p: &ScalerParams) -> Result<FeatureVector> {
    if v.values.len() != p.len() {
        return Err(Error::Schema(format!(
            "vector has {} values, scaler has {}",
            v.values.len(),
            p.len()
        )));
    }
    let mut out = v.clone();
    for (j, x) in out.values.iter_mut().enumerate() {
        *x = p.scale_value(j, *x);
    }
    Ok(out)
}

/// Scales every row of a table whose columns align with `p`.
pub fn apply_scaler_table(t: &FeatureTable, p: &ScalerParams) -> Result<FeatureTable> {
    if t.n_features() != p.len() {
        return Err(Error::Schema(format!(
            "table has {} features, scaler has {}",
            t.n_features(),
            p.len()
        )));
    }
    Ok(t.map_x(|x| {
        let mut y = x.clone();
        for mut row in y.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = p.scale_value(j, *v);
            }
        }
        y
    }))
}
