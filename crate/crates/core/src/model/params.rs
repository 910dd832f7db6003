use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD};
use rand_distr::{Distribution, Normal};

use super::ModelConfig;
use crate::rng::Rng;

const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub ln1_gamma: Array1<f64>,
    pub ln1_beta: Array1<f64>,
    pub w_q: Array2<f64>,
    pub b_q: Array1<f64>,
    pub w_k: Array2<f64>,
    pub b_k: Array1<f64>,
    pub w_v: Array2<f64>,
    pub b_v: Array1<f64>,
    pub w_o: Array2<f64>,
    pub b_o: Array1<f64>,
    pub ln2_gamma: Array1<f64>,
    pub ln2_beta: Array1<f64>,
    pub w_fc1: Array2<f64>,
    pub b_fc1: Array1<f64>,
    pub w_fc2: Array2<f64>,
    pub b_fc2: Array1<f64>,
}

/// All trainable tensors plus the input-normalization statistics.
///
/// Gradients are stored in the same type; their normalization fields are
/// unused.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub patch_w: Array2<f64>,
    pub patch_b: Array1<f64>,
    pub cls: Array1<f64>,
    pub pos: Array2<f64>,
    pub blocks: Vec<BlockParams>,
    pub lnf_gamma: Array1<f64>,
    pub lnf_beta: Array1<f64>,
    pub head_w: Array2<f64>,
    pub head_b: Array1<f64>,
    pub input_mean: f64,
    pub input_std: f64,
}

fn trunc_normal(shape: (usize, usize), rng: &mut Rng) -> Array2<f64> {
    let normal = Normal::new(0.0, INIT_STD).expect("positive std");
    Array2::from_shape_simple_fn(shape, || loop {
        let v: f64 = normal.sample(rng);
        if v.abs() <= 2.0 * INIT_STD {
            break v;
        }
    })
}

macro_rules! tensor_list {
    ($p:expr, $view:ident, $iter:ident) => {{
        let mut out = vec![
            ("patch.weight".to_string(), $p.patch_w.$view().into_dyn()),
            ("patch.bias".to_string(), $p.patch_b.$view().into_dyn()),
            ("cls".to_string(), $p.cls.$view().into_dyn()),
            ("pos".to_string(), $p.pos.$view().into_dyn()),
        ];
        for (i, b) in $p.blocks.$iter().enumerate() {
            let name = |t: &str| format!("blocks.{i}.{t}");
            out.push((name("ln1.gamma"), b.ln1_gamma.$view().into_dyn()));
            out.push((name("ln1.beta"), b.ln1_beta.$view().into_dyn()));
            out.push((name("attn.q.weight"), b.w_q.$view().into_dyn()));
            out.push((name("attn.q.bias"), b.b_q.$view().into_dyn()));
            out.push((name("attn.k.weight"), b.w_k.$view().into_dyn()));
            out.push((name("attn.k.bias"), b.b_k.$view().into_dyn()));
            out.push((name("attn.v.weight"), b.w_v.$view().into_dyn()));
            out.push((name("attn.v.bias"), b.b_v.$view().into_dyn()));
            out.push((name("attn.out.weight"), b.w_o.$view().into_dyn()));
            out.push((name("attn.out.bias"), b.b_o.$view().into_dyn()));
            out.push((name("ln2.gamma"), b.ln2_gamma.$view().into_dyn()));
            out.push((name("ln2.beta"), b.ln2_beta.$view().into_dyn()));
            out.push((name("mlp.fc1.weight"), b.w_fc1.$view().into_dyn()));
            out.push((name("mlp.fc1.bias"), b.b_fc1.$view().into_dyn()));
            out.push((name("mlp.fc2.weight"), b.w_fc2.$view().into_dyn()));
            out.push((name("mlp.fc2.bias"), b.b_fc2.$view().into_dyn()));
        }
        out.push((
            "final_ln.gamma".to_string(),
            $p.lnf_gamma.$view().into_dyn(),
        ));
        out.push(("final_ln.beta".to_string(), $p.lnf_beta.$view().into_dyn()));
        out.push(("head.weight".to_string(), $p.head_w.$view().into_dyn()));
        out.push(("head.bias".to_string(), $p.head_b.$view().into_dyn()));
        out
    }};
}

impl ModelParams {
    /// Zero tensors shaped for `config` (the gradient accumulator layout).
    pub fn zeros(config: &ModelConfig) -> Self {
        let d = config.embed_dim;
        let h = config.hidden_dim();
        let block = BlockParams {
            ln1_gamma: Array1::zeros(d),
            ln1_beta: Array1::zeros(d),
            w_q: Array2::zeros((d, d)),
            b_q: Array1::zeros(d),
            w_k: Array2::zeros((d, d)),
            b_k: Array1::zeros(d),
            w_v: Array2::zeros((d, d)),
            b_v: Array1::zeros(d),
            w_o: Array2::zeros((d, d)),
            b_o: Array1::zeros(d),
            ln2_gamma: Array1::zeros(d),
            ln2_beta: Array1::zeros(d),
            w_fc1: Array2::zeros((d, h)),
            b_fc1: Array1::zeros(h),
            w_fc2: Array2::zeros((h, d)),
            b_fc2: Array1::zeros(d),
        };
        Self {
            patch_w: Array2::zeros((config.patch_len(), d)),
            patch_b: Array1::zeros(d),
            cls: Array1::zeros(d),
            pos: Array2::zeros((config.max_tokens, d)),
            blocks: vec![block; config.depth],
            lnf_gamma: Array1::zeros(d),
            lnf_beta: Array1::zeros(d),
            head_w: Array2::zeros((d, config.n_classes)),
            head_b: Array1::zeros(config.n_classes),
            input_mean: 0.0,
            input_std: 1.0,
        }
    }

    /// Truncated-normal (std 0.02) weights and positional table; zero biases
    /// and CLS; unit layer-norm scales.
    pub fn init(config: &ModelConfig, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(config);
        let d = config.embed_dim;
        let h = config.hidden_dim();
        p.patch_w = trunc_normal((config.patch_len(), d), rng);
        p.pos = trunc_normal((config.max_tokens, d), rng);
        for b in &mut p.blocks {
            b.ln1_gamma.fill(1.0);
            b.ln2_gamma.fill(1.0);
            b.w_q = trunc_normal((d, d), rng);
            b.w_k = trunc_normal((d, d), rng);
            b.w_v = trunc_normal((d, d), rng);
            b.w_o = trunc_normal((d, d), rng);
            b.w_fc1 = trunc_normal((d, h), rng);
            b.w_fc2 = trunc_normal((h, d), rng);
        }
        p.lnf_gamma.fill(1.0);
        p.head_w = trunc_normal((d, config.n_classes), rng);
        p
    }

    /// Zero tensors with this instance's shapes.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, mut t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z.input_mean = 0.0;
        z.input_std = 1.0;
        z
    }

    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        tensor_list!(self, view, iter)
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        tensor_list!(self, view_mut, iter_mut)
    }

    pub fn n_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// `self += other` over every trainable tensor.
    pub fn add_assign(&mut self, other: &ModelParams) {
        for ((_, mut a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a += &b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        for (_, mut t) in self.tensors_mut() {
            t.mapv_inplace(|v| v * k);
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .map(|(_, t)| t.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| v.is_finite()))
            && self.input_mean.is_finite()
            && self.input_std.is_finite()
    }

    /// Tensor shapes expected for `config`, in [`tensors`](Self::tensors) order.
    pub fn expected_shapes(config: &ModelConfig) -> Vec<(String, Vec<usize>)> {
        Self::zeros(config)
            .tensors()
            .into_iter()
            .map(|(n, t)| (n, t.shape().to_vec()))
            .collect()
    }
}
