//! Hybrid over/under-sampling driven by `tau = (m_l - m_s) * beta`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::NUM_CLASSES;
use crate::table::FeatureTable;

pub const DEFAULT_SMOTE_NEIGHBORS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BalanceMode {
    #[serde(rename = "ROS+RUS")]
    RosRus,
    #[serde(rename = "SMOTE+RUS")]
    SmoteRus,
}

impl fmt::Display for BalanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BalanceMode::RosRus => "ROS+RUS",
            BalanceMode::SmoteRus => "SMOTE+RUS",
        })
    }
}

impl FromStr for BalanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ROS+RUS" | "ROS" => Ok(BalanceMode::RosRus),
            "SMOTE+RUS" | "SMOTE" => Ok(BalanceMode::SmoteRus),
            _ => Err(Error::Config(format!("unknown balancing mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancePlan {
    pub beta: f64,
    pub mode: BalanceMode,
    pub counts: Vec<usize>,
    pub targets: Vec<usize>,
    /// Mean count over present classes; classes below it grow, above it shrink.
    pub reference: f64,
    pub tau: usize,
}

impl BalancePlan {
    /// Sum of |T_c - n_c|: the duplications/interpolations plus eliminations
    /// actually carried out.
    pub fn executed(&self) -> usize {
        self.counts.iter().zip(&self.targets).map(|(&n, &t)| n.abs_diff(t)).sum()
    }

    pub fn is_noop(&self) -> bool {
        self.counts == self.targets
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            #[serde(flatten)]
            plan: &'a BalancePlan,
            executed: usize,
        }
        Ok(serde_json::to_string_pretty(&Doc { plan: self, executed: self.executed() })?)
    }
}

/// Computes per-class targets.
///
/// Each present class moves `beta * |n_c - mean|` records towards the mean.
/// The moves are rounded so that their total is the rounded real total:
/// every class takes the floor of its move, and the leftover units go to the
/// largest fractional parts (ties to the lower class index). With two classes
/// the executed count is therefore exactly `round((m_l - m_s) * beta)`.
pub fn plan_balance(counts: &[usize], beta: f64, mode: BalanceMode) -> Result<BalancePlan> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Argument(format!("beta = {beta} outside [0, 1]")));
    }
    let present: Vec<usize> = (0..counts.len()).filter(|&c| counts[c] > 0).collect();
    if present.is_empty() {
        return Err(Error::Argument("no class has any record".into()));
    }
    let total: usize = present.iter().map(|&c| counts[c]).sum();
    let k = present.len() as f64;
    let mean = total as f64 / k;
    let moves: Vec<f64> = present
        .iter()
        .map(|&c| beta * (counts[c] as f64 * k - total as f64).abs() / k)
        .collect();
    let mut units: Vec<usize> = moves.iter().map(|m| m.floor() as usize).collect();
    let want = moves.iter().sum::<f64>().round() as usize;
    let mut extra = want.saturating_sub(units.iter().sum());
    let mut by_fraction: Vec<usize> = (0..present.len()).collect();
    by_fraction.sort_by(|&a, &b| {
        let fa = moves[a] - moves[a].floor();
        let fb = moves[b] - moves[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in &by_fraction {
        if extra == 0 {
            break;
        }
        if moves[i] - moves[i].floor() > 0.0 {
            units[i] += 1;
            extra -= 1;
        }
    }

    let mut targets = counts.to_vec();
    for (i, &c) in present.iter().enumerate() {
        if (counts[c] as f64) < mean {
            targets[c] += units[i];
        } else {
            targets[c] -= units[i];
        }
    }
    let m_l = present.iter().map(|&c| counts[c]).max().unwrap_or(0);
    let m_s = present.iter().map(|&c| counts[c]).min().unwrap_or(0);
    Ok(BalancePlan {
        beta,
        mode,
        counts: counts.to_vec(),
        targets,
        reference: mean,
        tau: ((m_l - m_s) as f64 * beta).round() as usize,
    })
}

fn check_plan(t: &FeatureTable, plan: &BalancePlan) -> Result<()> {
    let counts = t.class_counts();
    let mut want = [0usize; NUM_CLASSES];
    for (c, &n) in plan.counts.iter().enumerate() {
        if c >= NUM_CLASSES {
            if n > 0 {
                return Err(Error::State(format!("plan has counts for class {c}")));
            }
            continue;
        }
        want[c] = n;
    }
    if counts != want {
        return Err(Error::State("plan was not computed from this dataset's counts".into()));
    }
    Ok(())
}

fn class_rng(seed: u64, class: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(class as u64);
    rng
}

/// Per class: rows kept (in table order) and new rows to append.
struct Resampled {
    keep: Vec<bool>,
    added: Vec<(String, Array1<f64>, usize)>,
}

fn resample(
    t: &FeatureTable,
    plan: &BalancePlan,
    seed: u64,
    mut grow: impl FnMut(usize, &[usize], usize, &mut ChaCha8Rng) -> Vec<(String, Array1<f64>)>,
) -> Result<FeatureTable> {
    check_plan(t, plan)?;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
    for (i, &l) in t.labels().iter().enumerate() {
        members[l].push(i);
    }
    let mut out = Resampled { keep: vec![true; t.len()], added: Vec::new() };
    for c in 0..plan.counts.len().min(NUM_CLASSES) {
        let (n, target) = (plan.counts[c], plan.targets[c]);
        let mut rng = class_rng(seed, c);
        if target < n {
            for j in sample(&mut rng, n, n - target) {
                out.keep[members[c][j]] = false;
            }
        } else if target > n {
            for (id, row) in grow(c, &members[c], target - n, &mut rng) {
                out.added.push((id, row, c));
            }
        }
    }
    let kept: Vec<usize> = (0..t.len()).filter(|&i| out.keep[i]).collect();
    let mut result = t.take_rows(&kept);
    for (id, row, c) in out.added {
        result.push(id, row.view(), c)?;
    }
    Ok(result)
}

/// Random oversampling (exact copies with fresh ids) plus random
/// undersampling (uniform, without replacement) to the plan's targets.
pub fn ros_rus(t: &FeatureTable, plan: &BalancePlan, seed: u64) -> Result<FeatureTable> {
    resample(t, plan, seed, |_, members, extra, rng| duplicate(t, members, extra, rng))
}

fn duplicate(
    t: &FeatureTable,
    members: &[usize],
    extra: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(String, Array1<f64>)> {
    (0..extra)
        .map(|j| {
            let r = members[rng.random_range(0..members.len())];
            (format!("{}#dup{j}", t.ids()[r]), t.row(r).to_owned())
        })
        .collect()
}

/// `x + u (nn - x)`.
pub fn smote_point(x: ArrayView1<'_, f64>, nn: ArrayView1<'_, f64>, u: f64) -> Array1<f64> {
    &x + &((&nn - &x) * u)
}

fn nearest(t: &FeatureTable, members: &[usize], who: usize, k: usize) -> Vec<usize> {
    let x = t.row(who);
    let mut d: Vec<(f64, usize)> = members
        .iter()
        .filter(|&&m| m != who)
        .map(|&m| {
            let dist: f64 = x.iter().zip(t.row(m).iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            (dist, m)
        })
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(_, m)| m).collect()
}

/// SMOTE interpolation towards one of the `k` nearest same-class
/// neighbours for under-represented classes, random undersampling for the
/// rest. Singleton classes fall back to duplication.
pub fn smote_rus(t: &FeatureTable, plan: &BalancePlan, k: usize, seed: u64) -> Result<FeatureTable> {
    if k == 0 {
        return Err(Error::Argument("SMOTE needs k >= 1".into()));
    }
    resample(t, plan, seed, |c, members, extra, rng| {
        if members.len() < 2 {
            log::warn!("class {c} has a single record; duplicating instead of interpolating");
            return duplicate(t, members, extra, rng);
        }
        let mut knn: HashMap<usize, Vec<usize>> = HashMap::new();
        (0..extra)
            .map(|j| {
                let r = members[rng.random_range(0..members.len())];
                let nn = knn.entry(r).or_insert_with(|| nearest(t, members, r, k));
                let other = nn[rng.random_range(0..nn.len())];
                let u: f64 = rng.random_range(0.0..1.0);
                (format!("{}#smote{j}", t.ids()[r]), smote_point(t.row(r), t.row(other), u))
            })
            .collect()
    })
}

/// Dispatches on the plan's mode.
pub fn balance(t: &FeatureTable, plan: &BalancePlan, seed: u64) -> Result<FeatureTable> {
    match plan.mode {
        BalanceMode::RosRus => ros_rus(t, plan, seed),
        BalanceMode::SmoteRus => smote_rus(t, plan, DEFAULT_SMOTE_NEIGHBORS, seed),
    }
}
