//! Reverse-mode gradients through [`forward`](super::forward).

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use super::forward::{BlockTrace, Trace};
use super::ops::{gelu_grad, layer_norm_backward, softmax_rows_backward};
use super::params::{BlockParams, ModelParams};

fn outer_acc(acc: &mut Array2<f64>, a: ArrayView2<f64>, b: ArrayView2<f64>) {
    // acc += aᵀ b
    ndarray::linalg::general_mat_mul(1.0, &a.t(), &b, 1.0, acc);
}

fn block_backward(
    t: &BlockTrace,
    p: &BlockParams,
    g: &mut BlockParams,
    dout: Array2<f64>,
    n_heads: usize,
) -> Array2<f64> {
    let m = t.out_rows;
    let n = t.input.nrows();
    let d = t.input.ncols();
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();

    // out = mid + gelu(normed2 W1 + b1) W2 + b2
    g.b_fc2 += &dout.sum_axis(Axis(0));
    outer_acc(&mut g.w_fc2, t.act.view(), dout.view());
    let mut dpre = dout.dot(&p.w_fc2.t());
    dpre.zip_mut_with(&t.pre_act, |g, &x| *g *= gelu_grad(x));
    g.b_fc1 += &dpre.sum_axis(Axis(0));
    outer_acc(&mut g.w_fc1, t.normed2.view(), dpre.view());
    let dnormed2 = dpre.dot(&p.w_fc1.t());
    let dmid = dout
        + layer_norm_backward(
            dnormed2.view(),
            &t.ln2,
            p.ln2_gamma.view(),
            &mut g.ln2_gamma,
            &mut g.ln2_beta,
        );

    // mid = input[..m] + ctx Wo + bo
    let mut dx = Array2::zeros((n, d));
    dx.slice_mut(s![..m, ..]).assign(&dmid);
    g.b_o += &dmid.sum_axis(Axis(0));
    outer_acc(&mut g.w_o, t.ctx.view(), dmid.view());
    let dctx = dmid.dot(&p.w_o.t());

    let mut dq = Array2::zeros((m, d));
    let mut dk = Array2::zeros((n, d));
    let mut dv = Array2::zeros((n, d));
    for (h, attn) in t.attn.iter().enumerate() {
        let cols = s![.., h * dh..(h + 1) * dh];
        let dctx_h = dctx.slice(cols);
        let dp = dctx_h.dot(&t.v.slice(cols).t());
        dv.slice_mut(cols).assign(&attn.t().dot(&dctx_h));
        let mut ds = softmax_rows_backward(attn, &dp);
        ds.mapv_inplace(|v| v * scale);
        dq.slice_mut(cols).assign(&ds.dot(&t.k.slice(cols)));
        dk.slice_mut(cols).assign(&ds.t().dot(&t.q.slice(cols)));
    }

    let normed_q = t.normed.slice(s![..m, ..]);
    g.b_q += &dq.sum_axis(Axis(0));
    outer_acc(&mut g.w_q, normed_q, dq.view());
    g.b_k += &dk.sum_axis(Axis(0));
    outer_acc(&mut g.w_k, t.normed.view(), dk.view());
    g.b_v += &dv.sum_axis(Axis(0));
    outer_acc(&mut g.w_v, t.normed.view(), dv.view());

    let mut dnormed = dk.dot(&p.w_k.t());
    ndarray::linalg::general_mat_mul(1.0, &dv, &p.w_v.t(), 1.0, &mut dnormed);
    {
        let mut top = dnormed.slice_mut(s![..m, ..]);
        ndarray::linalg::general_mat_mul(1.0, &dq, &p.w_q.t(), 1.0, &mut top);
    }
    dx += &layer_norm_backward(
        dnormed.view(),
        &t.ln1,
        p.ln1_gamma.view(),
        &mut g.ln1_gamma,
        &mut g.ln1_beta,
    );
    dx
}

/// Gradient of the loss with respect to every trainable tensor, given the
/// loss gradient at the logits.
pub fn backward(trace: &Trace, params: &ModelParams, dlogits: [f64; 2]) -> ModelParams {
    let mut g = params.zeros_like();
    let dz = Array1::from(vec![dlogits[0], dlogits[1]]);
    g.head_b += &dz;
    outer_acc(
        &mut g.head_w,
        trace.embedding.view().insert_axis(Axis(0)),
        dz.view().insert_axis(Axis(0)),
    );
    let demb = params.head_w.dot(&dz).insert_axis(Axis(0));
    let mut dx = layer_norm_backward(
        demb.view(),
        &trace.lnf,
        params.lnf_gamma.view(),
        &mut g.lnf_gamma,
        &mut g.lnf_beta,
    );
    let n_heads = trace.blocks.first().map_or(1, |b| b.attn.len());
    for ((bt, bp), bg) in trace
        .blocks
        .iter()
        .zip(&params.blocks)
        .zip(g.blocks.iter_mut())
        .rev()
    {
        dx = block_backward(bt, bp, bg, dx, n_heads);
    }

    let n = trace.n_tokens;
    let mut pos = g.pos.slice_mut(s![..n, ..]);
    pos += &dx;
    g.cls += &dx.row(0);
    let de = dx.slice(s![1.., ..]);
    g.patch_b += &de.sum_axis(Axis(0));
    outer_acc(&mut g.patch_w, trace.patches.view(), de);
    g
}
