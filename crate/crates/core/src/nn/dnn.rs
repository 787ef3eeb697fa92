use ndarray::{Array2, ArrayView2, Axis};

use super::{loss_and_logit_grad, Architecture, DnnConfig, ModelParams, ShapeTable};
use crate::signal::NUM_CLASSES;

pub(super) fn shape(c: &DnnConfig) -> ShapeTable {
    let mut s = ShapeTable::new(Architecture::Dnn, c.input_dim, NUM_CLASSES);
    let mut fan_in = c.input_dim;
    for l in 1..=c.hidden_layers {
        s.push(&format!("dense_{l}/W"), &[fan_in, c.hidden_units]);
        s.push(&format!("dense_{l}/b"), &[c.hidden_units]);
        fan_in = c.hidden_units;
    }
    s.push("output/W", &[fan_in, NUM_CLASSES]);
    s.push("output/b", &[NUM_CLASSES]);
    s
}

fn affine(h: &ArrayView2<'_, f64>, p: &ModelParams, layer: &str) -> Array2<f64> {
    let mut z = h.dot(&p.matrix(&format!("{layer}/W")));
    z += &p.vector(&format!("{layer}/b"));
    z
}

pub(super) fn logits(p: &ModelParams, c: &DnnConfig, x: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut h = x.to_owned();
    for l in 1..=c.hidden_layers {
        h = affine(&h.view(), p, &format!("dense_{l}")).mapv_into(|v| c.activation.apply(v));
    }
    affine(&h.view(), p, "output")
}

pub(super) fn loss_and_grad(
    p: &ModelParams,
    c: &DnnConfig,
    x: ArrayView2<'_, f64>,
    y: &[usize],
) -> (f64, ModelParams) {
    // inputs to each layer and the hidden pre-activations
    let mut inputs = vec![x.to_owned()];
    let mut pre = Vec::with_capacity(c.hidden_layers);
    for l in 1..=c.hidden_layers {
        let z = affine(&inputs[l - 1].view(), p, &format!("dense_{l}"));
        inputs.push(z.mapv(|v| c.activation.apply(v)));
        pre.push(z);
    }
    let z = affine(&inputs[c.hidden_layers].view(), p, "output");
    let (loss, mut dz) = loss_and_logit_grad(&z, y, c.output);

    let mut grad = p.zeros_like();
    let names: Vec<String> = (1..=c.hidden_layers)
        .map(|l| format!("dense_{l}"))
        .chain(std::iter::once("output".to_string()))
        .collect();
    for layer in (0..names.len()).rev() {
        let name = &names[layer];
        let w = p.matrix(&format!("{name}/W"));
        grad.matrix_mut(&format!("{name}/W")).assign(&inputs[layer].t().dot(&dz));
        grad.vector_mut(&format!("{name}/b")).assign(&dz.sum_axis(Axis(0)));
        if layer == 0 {
            break;
        }
        let mut dh = dz.dot(&w.t());
        dh.zip_mut_with(&pre[layer - 1], |d, &z| *d *= c.activation.derivative(z));
        dz = dh;
    }
    (loss, grad)
}
