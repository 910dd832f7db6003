//! Patch-based spectrogram transformer.
//!
//! A log-mel spectrogram is cut into non-overlapping 16x16 patches, each
//! projected to `embed_dim`; a learned CLS token is prepended, learned
//! positional embeddings added, and the sequence passes through pre-norm
//! encoder blocks. The final-layer-normed CLS vector is the clip embedding and
//! feeds a two-way linear head (index 0 = bonafide, 1 = fake).
//!
//! Gradients are computed by hand (see [`backward`]); the finite-difference
//! agreement is checked in the test suites.

pub mod backward;
pub mod checkpoint;
pub mod forward;
pub mod ops;
pub mod params;
pub mod train;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::MelSpectrogram;

pub use backward::backward;
pub use checkpoint::{load_checkpoint, load_checkpoint_for, save_checkpoint};
pub use forward::{embedding, forward, loss, p_fake, Trace};
pub use params::{BlockParams, ModelParams};
pub use train::{finetune, train, Example, OptimizerKind, TrainHyper, TrainLog, Trainer};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub n_mels: usize,
    pub patch_freq: usize,
    pub patch_time: usize,
    pub embed_dim: usize,
    pub depth: usize,
    pub n_heads: usize,
    pub mlp_ratio: usize,
    pub n_classes: usize,
    pub max_tokens: usize,
}

impl Default for ModelConfig {
    /// Desk-scale defaults (d = 64, 2 blocks, 4 heads).
    fn default() -> Self {
        Self {
            n_mels: 128,
            patch_freq: 16,
            patch_time: 16,
            embed_dim: 64,
            depth: 2,
            n_heads: 4,
            mlp_ratio: 4,
            n_classes: 2,
            max_tokens: 513,
        }
    }
}

impl ModelConfig {
    /// The original 768-wide, 12-block, 12-head configuration.
    pub fn full_scale() -> Self {
        Self {
            embed_dim: 768,
            depth: 12,
            n_heads: 12,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.patch_freq == 0
            || self.patch_time == 0
            || !self.n_mels.is_multiple_of(self.patch_freq)
        {
            return bad(format!(
                "patch height {} must divide {} mel bins",
                self.patch_freq, self.n_mels
            ));
        }
        if self.embed_dim == 0 || self.n_heads == 0 || !self.embed_dim.is_multiple_of(self.n_heads)
        {
            return bad(format!(
                "embed_dim {} not divisible by {} heads",
                self.embed_dim, self.n_heads
            ));
        }
        if self.depth == 0 || self.mlp_ratio == 0 {
            return bad("depth and mlp_ratio must be at least 1".into());
        }
        if self.n_classes != 2 {
            return bad(format!(
                "binary head required, got {} classes",
                self.n_classes
            ));
        }
        if self.max_tokens < 1 + self.freq_patches() {
            return bad(format!(
                "max_tokens {} below one patch column",
                self.max_tokens
            ));
        }
        Ok(())
    }

    pub fn patch_len(&self) -> usize {
        self.patch_freq * self.patch_time
    }

    pub fn freq_patches(&self) -> usize {
        self.n_mels / self.patch_freq
    }

    pub fn time_patches(&self, n_frames: usize) -> usize {
        n_frames.div_ceil(self.patch_time)
    }

    /// `1 + (n_mels / 16) * ceil(n_frames / 16)`.
    pub fn token_count(&self, n_frames: usize) -> usize {
        1 + self.freq_patches() * self.time_patches(n_frames)
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.n_heads
    }

    pub fn hidden_dim(&self) -> usize {
        self.embed_dim * self.mlp_ratio
    }
}

/// Split a spectrogram into flattened patches, one per row.
///
/// The time axis is padded to a multiple of `patch_time` with the log floor.
/// Patch `k` covers time column `k / F` and frequency row `k % F` (F =
/// frequency patches), so positions keep their meaning across clip lengths;
/// each patch is flattened row-major (frequency outer, time inner).
pub fn patchify(spec: &MelSpectrogram, config: &ModelConfig) -> Result<Array2<f64>> {
    if spec.n_mels() != config.n_mels {
        return Err(Error::ShapeMismatch(format!(
            "spectrogram has {} mel bins, model expects {}",
            spec.n_mels(),
            config.n_mels
        )));
    }
    let (pf, pt) = (config.patch_freq, config.patch_time);
    let nf = config.freq_patches();
    let nt = config.time_patches(spec.n_frames());
    let padded_frames = nt * pt;
    let mut padded = Array2::from_elem(
        (config.n_mels, padded_frames),
        spec.config.log_floor_value(),
    );
    padded
        .slice_mut(s![.., ..spec.n_frames()])
        .assign(&spec.values);

    let mut patches = Array2::zeros((nf * nt, pf * pt));
    for t in 0..nt {
        for f in 0..nf {
            let block = padded.slice(s![f * pf..(f + 1) * pf, t * pt..(t + 1) * pt]);
            let mut row = patches.row_mut(t * nf + f);
            for (dst, src) in row.iter_mut().zip(block.iter()) {
                *dst = *src;
            }
        }
    }
    Ok(patches)
}

/// Inverse of [`patchify`]: rebuild the padded spectrogram.
pub fn unpatchify(patches: &Array2<f64>, config: &ModelConfig) -> Array2<f64> {
    let (pf, pt) = (config.patch_freq, config.patch_time);
    let nf = config.freq_patches();
    let nt = patches.nrows() / nf;
    let mut out = Array2::zeros((config.n_mels, nt * pt));
    for k in 0..patches.nrows() {
        let (t, f) = (k / nf, k % nf);
        let row = patches.row(k);
        for i in 0..pf {
            for j in 0..pt {
                out[[f * pf + i, t * pt + j]] = row[i * pt + j];
            }
        }
    }
    out
}
