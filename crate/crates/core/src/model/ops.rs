//! Row-wise kernels and their reverse-mode derivatives.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

pub const LN_EPS: f64 = 1e-6;

/// Saved state of a row-wise layer norm.
#[derive(Debug, Clone)]
pub struct LayerNormCache {
    pub xhat: Array2<f64>,
    pub inv_std: Array1<f64>,
}

pub fn layer_norm(
    x: ArrayView2<f64>,
    gamma: ArrayView1<f64>,
    beta: ArrayView1<f64>,
) -> (Array2<f64>, LayerNormCache) {
    let d = x.ncols() as f64;
    let mut xhat = x.to_owned();
    let mut inv_std = Array1::zeros(x.nrows());
    for (mut row, s) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
        let mean = row.sum() / d;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|v| v * v).sum::<f64>() / d;
        *s = 1.0 / (var + LN_EPS).sqrt();
        let k = *s;
        row.mapv_inplace(|v| v * k);
    }
    let mut y = xhat.clone();
    Zip::from(y.rows_mut()).for_each(|mut row| {
        Zip::from(&mut row)
            .and(&gamma)
            .and(&beta)
            .for_each(|v, &g, &b| *v = *v * g + b);
    });
    (y, LayerNormCache { xhat, inv_std })
}

/// Returns `dx` and accumulates into `dgamma`, `dbeta`.
pub fn layer_norm_backward(
    dy: ArrayView2<f64>,
    cache: &LayerNormCache,
    gamma: ArrayView1<f64>,
    dgamma: &mut Array1<f64>,
    dbeta: &mut Array1<f64>,
) -> Array2<f64> {
    let d = dy.ncols() as f64;
    *dgamma += &(&dy * &cache.xhat).sum_axis(Axis(0));
    *dbeta += &dy.sum_axis(Axis(0));
    let mut dx = Array2::zeros(dy.raw_dim());
    for (((mut dxr, dyr), xh), &s) in dx
        .rows_mut()
        .into_iter()
        .zip(dy.rows())
        .zip(cache.xhat.rows())
        .zip(cache.inv_std.iter())
    {
        let dxhat: Array1<f64> = &dyr * &gamma;
        let mean_dxhat = dxhat.sum() / d;
        let mean_dxhat_xhat = dxhat.iter().zip(xh.iter()).map(|(a, b)| a * b).sum::<f64>() / d;
        Zip::from(&mut dxr)
            .and(&dxhat)
            .and(&xh)
            .for_each(|o, &g, &h| *o = s * (g - mean_dxhat - h * mean_dxhat_xhat));
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// Tanh-approximated GELU.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

pub fn softmax_rows_inplace(x: &mut Array2<f64>) {
    for mut row in x.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// `dS = P ⊙ (dP − rowsum(dP ⊙ P))`.
pub fn softmax_rows_backward(p: &Array2<f64>, dp: &Array2<f64>) -> Array2<f64> {
    let mut ds = dp.clone();
    for (mut dsr, pr) in ds.rows_mut().into_iter().zip(p.rows()) {
        let dot = dsr.iter().zip(pr.iter()).map(|(a, b)| a * b).sum::<f64>();
        Zip::from(&mut dsr)
            .and(&pr)
            .for_each(|g, &pv| *g = pv * (*g - dot));
    }
    ds
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
