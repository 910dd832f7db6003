use ndarray::{s, Array1, Array2, ArrayView1};

use super::ops::{gelu, layer_norm, softmax, softmax_rows_inplace, LayerNormCache};
use super::params::{BlockParams, ModelParams};
use super::{patchify, ModelConfig};
use crate::augment::SoftLabel;
use crate::error::{Error, Result};
use crate::frontend::MelSpectrogram;

/// Intermediates of one encoder block.
///
/// Only the first `out_rows` positions are carried out of the block; the last
/// block keeps just the CLS row.
#[derive(Debug, Clone)]
pub struct BlockTrace {
    pub input: Array2<f64>,
    pub ln1: LayerNormCache,
    pub normed: Array2<f64>,
    pub q: Array2<f64>,
    pub k: Array2<f64>,
    pub v: Array2<f64>,
    /// Per head, `out_rows x n_tokens` attention weights.
    pub attn: Vec<Array2<f64>>,
    pub ctx: Array2<f64>,
    pub ln2: LayerNormCache,
    pub normed2: Array2<f64>,
    pub pre_act: Array2<f64>,
    pub act: Array2<f64>,
    pub out_rows: usize,
}

/// Everything [`backward`](super::backward) needs.
#[derive(Debug, Clone)]
pub struct Trace {
    pub patches: Array2<f64>,
    pub n_tokens: usize,
    pub blocks: Vec<BlockTrace>,
    pub lnf: LayerNormCache,
    pub embedding: Array1<f64>,
    pub logits: [f64; 2],
}

impl Trace {
    pub fn attention(&self) -> impl Iterator<Item = &Array2<f64>> {
        self.blocks.iter().flat_map(|b| b.attn.iter())
    }
}

fn block_forward(
    x: Array2<f64>,
    p: &BlockParams,
    out_rows: usize,
    n_heads: usize,
) -> (Array2<f64>, BlockTrace) {
    let d = x.ncols();
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();

    let (normed, ln1) = layer_norm(x.view(), p.ln1_gamma.view(), p.ln1_beta.view());
    let q = normed.slice(s![..out_rows, ..]).dot(&p.w_q) + &p.b_q;
    let k = normed.dot(&p.w_k) + &p.b_k;
    let v = normed.dot(&p.w_v) + &p.b_v;

    let mut ctx = Array2::zeros((out_rows, d));
    let mut attn = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let mut scores = q.slice(cols).dot(&k.slice(cols).t());
        scores.mapv_inplace(|v| v * scale);
        softmax_rows_inplace(&mut scores);
        ctx.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
        attn.push(scores);
    }

    let mid = &x.slice(s![..out_rows, ..]) + &(ctx.dot(&p.w_o) + &p.b_o);
    let (normed2, ln2) = layer_norm(mid.view(), p.ln2_gamma.view(), p.ln2_beta.view());
    let pre_act = normed2.dot(&p.w_fc1) + &p.b_fc1;
    let act = pre_act.mapv(gelu);
    let out = &mid + &(act.dot(&p.w_fc2) + &p.b_fc2);

    let trace = BlockTrace {
        input: x,
        ln1,
        normed,
        q,
        k,
        v,
        attn,
        ctx,
        ln2,
        normed2,
        pre_act,
        act,
        out_rows,
    };
    (out, trace)
}

/// Linear head on an embedding.
pub fn head(params: &ModelParams, embedding: ArrayView1<f64>) -> [f64; 2] {
    let z = embedding.dot(&params.head_w) + &params.head_b;
    [z[0], z[1]]
}

/// Run the encoder on pre-computed, already normalized patches.
pub fn forward_patches(
    patches: Array2<f64>,
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<Trace> {
    let n_tokens = patches.nrows() + 1;
    if n_tokens > params.pos.nrows() {
        return Err(Error::TokenOverflow {
            tokens: n_tokens,
            max_tokens: params.pos.nrows(),
        });
    }
    let d = config.embed_dim;
    let mut x = Array2::zeros((n_tokens, d));
    x.row_mut(0).assign(&params.cls);
    x.slice_mut(s![1.., ..])
        .assign(&(patches.dot(&params.patch_w) + &params.patch_b));
    x += &params.pos.slice(s![..n_tokens, ..]);

    let depth = params.blocks.len();
    let mut blocks = Vec::with_capacity(depth);
    for (i, bp) in params.blocks.iter().enumerate() {
        let out_rows = if i + 1 == depth { 1 } else { n_tokens };
        let (out, trace) = block_forward(x, bp, out_rows, config.n_heads);
        blocks.push(trace);
        x = out;
    }

    let (normed, lnf) = layer_norm(x.view(), params.lnf_gamma.view(), params.lnf_beta.view());
    let embedding = normed.row(0).to_owned();
    let logits = head(params, embedding.view());
    Ok(Trace {
        patches,
        n_tokens,
        blocks,
        lnf,
        embedding,
        logits,
    })
}

/// Patchify and apply the stored input normalization.
pub fn normalized_patches(
    spec: &MelSpectrogram,
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<Array2<f64>> {
    let mut patches = patchify(spec, config)?;
    let (mean, inv) = (params.input_mean, 1.0 / params.input_std);
    patches.mapv_inplace(|v| (v - mean) * inv);
    Ok(patches)
}

/// Logits (bonafide, fake) plus the trace for backpropagation.
pub fn forward(
    spec: &MelSpectrogram,
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<([f64; 2], Trace)> {
    let trace = forward_patches(normalized_patches(spec, params, config)?, params, config)?;
    Ok((trace.logits, trace))
}

/// The clip embedding: final-layer-normed CLS vector, i.e. the head's input.
pub fn embedding(
    spec: &MelSpectrogram,
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<Array1<f64>> {
    Ok(forward(spec, params, config)?.1.embedding)
}

/// Probability of the fake class.
pub fn p_fake(logits: [f64; 2]) -> f64 {
    softmax(&logits)[1]
}

/// Soft-target cross-entropy and its gradient with respect to the logits.
pub fn loss(logits: [f64; 2], label: SoftLabel) -> (f64, [f64; 2]) {
    let p = softmax(&logits);
    let y = label.p_fake();
    let value = -(y * p[1].max(1e-30).ln() + (1.0 - y) * p[0].max(1e-30).ln());
    (value, [p[0] - (1.0 - y), p[1] - y])
}
