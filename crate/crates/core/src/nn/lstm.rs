use ndarray::{s, Array2, ArrayView2, Axis};

use super::{loss_and_logit_grad, Architecture, LstmConfig, ModelParams, ShapeTable};
use crate::signal::NUM_CLASSES;

// gate blocks inside the 4H columns, in this order
const I: usize = 0;
const F: usize = 1;
const G: usize = 2;
const O: usize = 3;

pub(super) fn shape(c: &LstmConfig) -> ShapeTable {
    let mut s = ShapeTable::new(Architecture::Lstm, c.input_dim, NUM_CLASSES);
    s.push("lstm/W", &[c.step_dim, 4 * c.units]);
    s.push("lstm/U", &[c.units, 4 * c.units]);
    s.push("lstm/b", &[4 * c.units]);
    s.push("output/W", &[c.units, NUM_CLASSES]);
    s.push("output/b", &[NUM_CLASSES]);
    s
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Step `t` of the zero-padded sequence view of `x`.
fn step_input(x: &ArrayView2<'_, f64>, c: &LstmConfig, t: usize) -> Array2<f64> {
    let start = t * c.step_dim;
    let end = (start + c.step_dim).min(c.input_dim);
    let mut xt = Array2::zeros((x.nrows(), c.step_dim));
    xt.slice_mut(s![.., ..end - start]).assign(&x.slice(s![.., start..end]));
    xt
}

struct Step {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    /// post-nonlinearity gates, candidate pre-activation, new cell state
    i: Array2<f64>,
    f: Array2<f64>,
    g: Array2<f64>,
    o: Array2<f64>,
    zg: Array2<f64>,
    c: Array2<f64>,
}

fn run(p: &ModelParams, c: &LstmConfig, x: &ArrayView2<'_, f64>, keep: bool) -> (Array2<f64>, Vec<Step>) {
    let (b, h) = (x.nrows(), c.units);
    let w = p.matrix("lstm/W");
    let u = p.matrix("lstm/U");
    let bias = p.vector("lstm/b");
    let act = c.activation;
    let mut h_t = Array2::zeros((b, h));
    let mut c_t = Array2::zeros((b, h));
    let mut steps = Vec::new();
    for t in 0..c.steps() {
        let xt = step_input(x, c, t);
        let mut z = xt.dot(&w) + h_t.dot(&u);
        z += &bias;
        let gate = |k: usize| z.slice(s![.., k * h..(k + 1) * h]).to_owned();
        let i = gate(I).mapv_into(sigmoid);
        let f = gate(F).mapv_into(sigmoid);
        let zg = gate(G);
        let g = zg.mapv(|v| act.apply(v));
        let o = gate(O).mapv_into(sigmoid);
        let c_new = &f * &c_t + &i * &g;
        let h_new = &o * &c_new.mapv(|v| act.apply(v));
        if keep {
            steps.push(Step { x: xt, h_prev: h_t, c_prev: c_t, i, f, g, o, zg, c: c_new.clone() });
        }
        h_t = h_new;
        c_t = c_new;
    }
    (h_t, steps)
}

pub(super) fn logits(p: &ModelParams, c: &LstmConfig, x: ArrayView2<'_, f64>) -> Array2<f64> {
    let (h, _) = run(p, c, &x, false);
    let mut z = h.dot(&p.matrix("output/W"));
    z += &p.vector("output/b");
    z
}

pub(super) fn loss_and_grad(
    p: &ModelParams,
    c: &LstmConfig,
    x: ArrayView2<'_, f64>,
    y: &[usize],
) -> (f64, ModelParams) {
    let (b, h) = (x.nrows(), c.units);
    let act = c.activation;
    let (h_last, steps) = run(p, c, &x, true);
    let mut z = h_last.dot(&p.matrix("output/W"));
    z += &p.vector("output/b");
    let (loss, dz_out) = loss_and_logit_grad(&z, y, c.output);

    let mut grad = p.zeros_like();
    grad.matrix_mut("output/W").assign(&h_last.t().dot(&dz_out));
    grad.vector_mut("output/b").assign(&dz_out.sum_axis(Axis(0)));

    let w = p.matrix("lstm/W");
    let u = p.matrix("lstm/U");
    let mut dw = Array2::<f64>::zeros(w.raw_dim());
    let mut du = Array2::<f64>::zeros(u.raw_dim());
    let mut db = ndarray::Array1::<f64>::zeros(4 * h);
    let mut dh = dz_out.dot(&p.matrix("output/W").t());
    let mut dc_next = Array2::<f64>::zeros((b, h));
    for st in steps.iter().rev() {
        let ac = st.c.mapv(|v| act.apply(v));
        let do_ = &dh * &ac;
        let dc = &dc_next + &(&dh * &st.o * &st.c.mapv(|v| act.derivative(v)));
        let di = &dc * &st.g;
        let df = &dc * &st.c_prev;
        let dg = &dc * &st.i;
        dc_next = &dc * &st.f;

        let mut dzt = Array2::<f64>::zeros((b, 4 * h));
        dzt.slice_mut(s![.., I * h..(I + 1) * h]).assign(&(&di * &st.i.mapv(|v| v * (1.0 - v))));
        dzt.slice_mut(s![.., F * h..(F + 1) * h]).assign(&(&df * &st.f.mapv(|v| v * (1.0 - v))));
        dzt.slice_mut(s![.., G * h..(G + 1) * h]).assign(&(&dg * &st.zg.mapv(|v| act.derivative(v))));
        dzt.slice_mut(s![.., O * h..(O + 1) * h]).assign(&(&do_ * &st.o.mapv(|v| v * (1.0 - v))));

        dw += &st.x.t().dot(&dzt);
        du += &st.h_prev.t().dot(&dzt);
        db += &dzt.sum_axis(Axis(0));
        dh = dzt.dot(&u.t());
    }
    grad.matrix_mut("lstm/W").assign(&dw);
    grad.matrix_mut("lstm/U").assign(&du);
    grad.vector_mut("lstm/b").assign(&db);
    (loss, grad)
}
