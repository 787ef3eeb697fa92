use std::cmp::Ordering;

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtConfig {
    pub rounds: usize,
    pub depth: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    /// Minimum hessian sum on each side of a split.
    pub min_child_weight: f64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        Self {
            rounds: 20,
            depth: 4,
            learning_rate: 0.3,
            lambda: 1.0,
            min_child_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        left: usize,
        right: usize,
    },
}

/// Binary regression tree; node 0 is the root. Rows with `x <= threshold`
/// go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: ArrayView1<'_, f64>) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn is_leaf_only(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn root_feature(&self) -> Option<usize> {
        match self.nodes[0] {
            Node::Split { feature, .. } => Some(feature),
            Node::Leaf { .. } => None,
        }
    }
}

/// One-vs-rest boosted trees: `trees[round][j]` scores `classes[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub classes: Vec<usize>,
    pub n_features: usize,
    pub config: GbdtConfig,
    pub trees: Vec<Vec<Tree>>,
    /// Mean one-vs-rest logistic loss on the training rows after each round.
    pub loss_history: Vec<f64>,
}

impl GbdtModel {
    /// Raw margins, one column per entry of `classes`.
    pub fn margins(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.classes.len()));
        for (i, row) in x.rows().into_iter().enumerate() {
            for round in &self.trees {
                for (j, t) in round.iter().enumerate() {
                    out[[i, j]] += t.predict(row);
                }
            }
        }
        out
    }

    /// Class index with the highest margin, ties to the lowest class.
    pub fn predict(&self, x: &Array2<f64>) -> Vec<usize> {
        self.margins(x)
            .rows()
            .into_iter()
            .map(|m| {
                let mut best = 0;
                for j in 1..m.len() {
                    if m[j] > m[best] {
                        best = j;
                    }
                }
                self.classes[best]
            })
            .collect()
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn log_loss(margin: f64, target: f64) -> f64 {
    // log(1 + e^z) - y z, computed stably
    let softplus = if margin > 0.0 {
        margin + (-margin).exp().ln_1p()
    } else {
        margin.exp().ln_1p()
    };
    softplus - target * margin
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    threshold: f64,
    feature: usize,
    left_g: f64,
    left_h: f64,
}

impl Candidate {
    /// Higher gain first, then lower threshold, then lower feature.
    fn better_than(&self, other: &Candidate) -> bool {
        match self.gain.total_cmp(&other.gain) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => match self.threshold.total_cmp(&other.threshold) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => self.feature < other.feature,
            },
        }
    }
}

struct Columns<'a> {
    /// values[f][i], rows in canonical order
    values: &'a [Vec<f64>],
    /// rows of each feature sorted by value (stable in canonical order)
    sorted: &'a [Vec<u32>],
}

struct OpenNode {
    id: usize,
    g: f64,
    h: f64,
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

fn build_tree(cols: &Columns<'_>, grad: &[f64], hess: &[f64], cfg: &GbdtConfig) -> Tree {
    let n = grad.len();
    let lambda = cfg.lambda;
    let leaf = |g: f64, h: f64| cfg.learning_rate * (-g / (h + lambda));
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    // slot of the open node each row sits in, or usize::MAX once finalized
    let mut slot = vec![0usize; n];
    let (g0, h0) = (grad.iter().sum::<f64>(), hess.iter().sum::<f64>());
    let mut open = vec![OpenNode { id: 0, g: g0, h: h0 }];

    for depth in 0..=cfg.depth {
        if open.is_empty() {
            break;
        }
        let mut best: Vec<Option<Candidate>> = vec![None; open.len()];
        if depth < cfg.depth {
            let mut gl = vec![0.0; open.len()];
            let mut hl = vec![0.0; open.len()];
            let mut prev: Vec<Option<f64>> = vec![None; open.len()];
            for (f, order) in cols.sorted.iter().enumerate() {
                gl.iter_mut().for_each(|v| *v = 0.0);
                hl.iter_mut().for_each(|v| *v = 0.0);
                prev.iter_mut().for_each(|v| *v = None);
                let col = &cols.values[f];
                for &r in order {
                    let r = r as usize;
                    let s = slot[r];
                    if s == usize::MAX {
                        continue;
                    }
                    let v = col[r];
                    if let Some(p) = prev[s] {
                        if v > p {
                            let node = &open[s];
                            let (gr, hr) = (node.g - gl[s], node.h - hl[s]);
                            if hl[s] >= cfg.min_child_weight && hr >= cfg.min_child_weight {
                                let gain = 0.5
                                    * (score(gl[s], hl[s], lambda) + score(gr, hr, lambda)
                                        - score(node.g, node.h, lambda));
                                if gain > 0.0 {
                                    let mut thr = p + (v - p) / 2.0;
                                    if thr >= v {
                                        thr = p;
                                    }
                                    let c = Candidate {
                                        gain,
                                        threshold: thr,
                                        feature: f,
                                        left_g: gl[s],
                                        left_h: hl[s],
                                    };
                                    if best[s].as_ref().is_none_or(|b| c.better_than(b)) {
                                        best[s] = Some(c);
                                    }
                                }
                            }
                        }
                    }
                    gl[s] += grad[r];
                    hl[s] += hess[r];
                    prev[s] = Some(v);
                }
            }
        }

        let mut next = Vec::new();
        let mut new_slot = vec![usize::MAX; open.len() * 2];
        for (s, node) in open.iter().enumerate() {
            match best[s] {
                Some(c) => {
                    let left = nodes.len();
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes[node.id] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        gain: c.gain,
                        left,
                        right: left + 1,
                    };
                    new_slot[2 * s] = next.len();
                    next.push(OpenNode { id: left, g: c.left_g, h: c.left_h });
                    new_slot[2 * s + 1] = next.len();
                    next.push(OpenNode { id: left + 1, g: node.g - c.left_g, h: node.h - c.left_h });
                }
                None => nodes[node.id] = Node::Leaf { value: leaf(node.g, node.h) },
            }
        }
        for r in 0..n {
            let s = slot[r];
            if s == usize::MAX {
                continue;
            }
            slot[r] = match best[s] {
                Some(c) => {
                    let goes_left = cols.values[c.feature][r] <= c.threshold;
                    new_slot[2 * s + usize::from(!goes_left)]
                }
                None => usize::MAX,
            };
        }
        open = next;
    }
    Tree { nodes }
}

/// Fits one-vs-rest logistic boosting with exact greedy splits.
///
/// Rows are put into a canonical order (label, then feature values) before
/// fitting, so the result does not depend on the order rows are supplied in.
pub fn fit_gbdt(x: &Array2<f64>, y: &[usize], cfg: &GbdtConfig) -> Result<GbdtModel> {
    if x.nrows() != y.len() {
        return Err(Error::Schema(format!("{} rows but {} labels", x.nrows(), y.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Schema("non-finite feature value".into()));
    }
    let mut classes: Vec<usize> = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Capability("boosting needs at least two classes".into()));
    }
    if !(cfg.lambda >= 0.0) || !(cfg.learning_rate >= 0.0) {
        return Err(Error::Argument("lambda and learning rate must be non-negative".into()));
    }

    let n = y.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        y[a].cmp(&y[b]).then_with(|| {
            x.row(a)
                .iter()
                .zip(x.row(b).iter())
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
    });
    let labels: Vec<usize> = order.iter().map(|&r| y[r]).collect();
    let values: Vec<Vec<f64>> = (0..x.ncols())
        .map(|f| order.iter().map(|&r| x[[r, f]]).collect())
        .collect();
    let sorted: Vec<Vec<u32>> = values
        .iter()
        .map(|col| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
            idx
        })
        .collect();
    let cols = Columns { values: &values, sorted: &sorted };

    let targets: Vec<Vec<f64>> = classes
        .iter()
        .map(|&c| labels.iter().map(|&l| f64::from(u8::from(l == c))).collect())
        .collect();
    let mut margins = vec![vec![0.0; n]; classes.len()];
    let mut trees = Vec::with_capacity(cfg.rounds);
    let mut loss_history = Vec::with_capacity(cfg.rounds);

    for _ in 0..cfg.rounds {
        let round: Vec<Tree> = (0..classes.len())
            .into_par_iter()
            .map(|j| {
                let (grad, hess): (Vec<f64>, Vec<f64>) = margins[j]
                    .iter()
                    .zip(&targets[j])
                    .map(|(&m, &t)| {
                        let p = sigmoid(m);
                        (p - t, (p * (1.0 - p)).max(1e-16))
                    })
                    .unzip();
                build_tree(&cols, &grad, &hess, cfg)
            })
            .collect();
        for (j, tree) in round.iter().enumerate() {
            for (i, m) in margins[j].iter_mut().enumerate() {
                *m += predict_canonical(tree, &values, i);
            }
        }
        let total: f64 = margins
            .iter()
            .zip(&targets)
            .flat_map(|(m, t)| m.iter().zip(t).map(|(&m, &t)| log_loss(m, t)))
            .sum();
        loss_history.push(total / (n * classes.len()) as f64);
        trees.push(round);
    }

    Ok(GbdtModel {
        classes,
        n_features: x.ncols(),
        config: *cfg,
        trees,
        loss_history,
    })
}

fn predict_canonical(tree: &Tree, values: &[Vec<f64>], row: usize) -> f64 {
    let mut i = 0;
    loop {
        match tree.nodes[i] {
            Node::Leaf { value } => return value,
            Node::Split { feature, threshold, left, right, .. } => {
                i = if values[feature][row] <= threshold { left } else { right };
            }
        }
    }
}
