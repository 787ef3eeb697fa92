use crate::error::{Error, Result};
use crate::nn::ModelParams;

/// `w = sum_k (n_k / n) w_k`.
///
/// Computed as `(sum_k n_k w_k) / n`. Terms are summed in a canonical order
/// (by `n_k`, then the weights themselves) so the result does not depend on the
/// order clients report in. When every client holds the same weights (in
/// particular with one client) those weights are returned unchanged.
pub fn fedavg(params: &[ModelParams], sizes: &[usize]) -> Result<ModelParams> {
    if params.is_empty() {
        return Err(Error::Argument("no client parameters to average".into()));
    }
    if params.len() != sizes.len() {
        return Err(Error::Argument(format!(
            "{} parameter sets but {} sizes",
            params.len(),
            sizes.len()
        )));
    }
    if sizes.contains(&0) {
        return Err(Error::Argument("client sizes must be positive".into()));
    }
    if params.iter().any(|p| !p.same_shape(&params[0])) {
        return Err(Error::Schema("clients hold differently shaped parameters".into()));
    }
    if params.iter().all(|p| p.values() == params[0].values()) {
        return Ok(params[0].clone());
    }
    let total = sizes.iter().sum::<usize>() as f64;
    let mut order: Vec<usize> = (0..params.len()).collect();
    order.sort_by(|&a, &b| {
        sizes[a].cmp(&sizes[b]).then_with(|| {
            params[a]
                .values()
                .iter()
                .zip(params[b].values())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });

    let mut acc = vec![0.0; params[0].len()];
    for &k in &order {
        let w = sizes[k] as f64;
        for (a, v) in acc.iter_mut().zip(params[k].values()) {
            *a += v * w;
        }
    }
    for a in &mut acc {
        *a /= total;
    }
    ModelParams::from_values(params[0].shape().clone(), acc)
}
