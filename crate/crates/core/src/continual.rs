//! Few-shot continual learning.
//!
//! A tiny labeled seed is drawn from an unlabeled pool, a boosted-tree
//! plugin is trained on the transformer's clip embeddings of that seed, the
//! plugin's most confident predictions over the rest of the pool become
//! pseudo-labels, and the transformer is fine-tuned on seed plus pseudo set.
//! [`baseline_finetune`] is the supervised comparison: the same seed, no
//! plugin.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::AugmentPolicy;
use crate::error::{Error, Result};
use crate::frontend::MelSpectrogram;
use crate::gbdt::{train_gbm, GbmConfig, TrainedGbm};
use crate::metrics::{self, Label, ScoreSet};
use crate::model::train::score_examples;
use crate::model::{embedding, finetune, Example, ModelConfig, ModelParams, TrainHyper};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinualConfig {
    pub seed_fraction: f64,
    pub accumulate_fraction: f64,
    pub confidence_low: f64,
    pub confidence_high: f64,
    pub min_seed_per_class: usize,
    pub gbm: GbmConfig,
    pub finetune_hyper: TrainHyper,
    pub finetune_augment: AugmentPolicy,
    /// Fine-tune on seed plus pseudo set (true) or pseudo set only.
    pub include_seed: bool,
    pub seed: u64,
}

impl Default for ContinualConfig {
    fn default() -> Self {
        Self {
            seed_fraction: 0.001,
            accumulate_fraction: 0.05,
            confidence_low: 0.1,
            confidence_high: 0.9,
            min_seed_per_class: 1,
            gbm: GbmConfig::default(),
            finetune_hyper: TrainHyper {
                epochs: 5,
                lr: 1e-4,
                ..TrainHyper::default()
            },
            finetune_augment: AugmentPolicy::none(),
            include_seed: true,
            seed: 0,
        }
    }
}

impl ContinualConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.seed_fraction > 0.0 && self.seed_fraction <= 1.0) {
            return bad("seed_fraction must lie in (0, 1]");
        }
        if !(self.accumulate_fraction > 0.0 && self.accumulate_fraction <= 1.0) {
            return bad("accumulate_fraction must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.confidence_low)
            || !(0.0..=1.0).contains(&self.confidence_high)
            || self.confidence_low > self.confidence_high
        {
            return bad("need 0 <= confidence_low <= confidence_high <= 1");
        }
        if self.min_seed_per_class == 0 {
            return bad("min_seed_per_class must be at least 1");
        }
        self.gbm.validate()?;
        self.finetune_hyper.validate()?;
        self.finetune_augment.validate()
    }
}

/// Random access to spectrograms by index.
pub trait SpecSource: Sync {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn id(&self, index: usize) -> String;
    fn spec(&self, index: usize) -> Result<MelSpectrogram>;
}

/// Spectrograms held in memory.
pub struct VecSource {
    pub ids: Vec<String>,
    pub specs: Vec<MelSpectrogram>,
}

impl SpecSource for VecSource {
    fn len(&self) -> usize {
        self.specs.len()
    }
    fn id(&self, index: usize) -> String {
        self.ids[index].clone()
    }
    fn spec(&self, index: usize) -> Result<MelSpectrogram> {
        Ok(self.specs[index].clone())
    }
}

/// Spectrograms computed on demand by a closure (from files, or by
/// re-synthesizing clips).
pub struct FnSource<F> {
    pub ids: Vec<String>,
    pub make: F,
}

impl<F> SpecSource for FnSource<F>
where
    F: Fn(usize) -> Result<MelSpectrogram> + Sync,
{
    fn len(&self) -> usize {
        self.ids.len()
    }
    fn id(&self, index: usize) -> String {
        self.ids[index].clone()
    }
    fn spec(&self, index: usize) -> Result<MelSpectrogram> {
        (self.make)(index)
    }
}

/// Unlabeled items whose ground truth stays inside this module: it is read
/// only to label the seed and to measure pseudo-label precision.
pub struct Pool<S> {
    source: S,
    labels: Vec<Label>,
}

impl<S: SpecSource> Pool<S> {
    pub fn new(source: S, labels: Vec<Label>) -> Result<Self> {
        if source.is_empty() {
            return Err(Error::EmptyInput("pool"));
        }
        if labels.len() != source.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} pool items, {} labels",
                source.len(),
                labels.len()
            )));
        }
        if !labels.contains(&Label::Fake) {
            return Err(Error::SingleClass("bonafide"));
        }
        if !labels.contains(&Label::Bonafide) {
            return Err(Error::SingleClass("fake"));
        }
        Ok(Self { source, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn source(&self) -> &S {
        &self.source
    }
}

/// Labeled seed drawn from a pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSet {
    pub indices: Vec<usize>,
    pub ids: Vec<String>,
    pub labels: Vec<Label>,
}

impl SeedSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Pool indices not in the seed, ascending.
    pub fn unlabeled(&self, pool_len: usize) -> Vec<usize> {
        let mut taken = vec![false; pool_len];
        for &i in &self.indices {
            taken[i] = true;
        }
        (0..pool_len).filter(|&i| !taken[i]).collect()
    }
}

/// `max(round(fraction * n), 2 * min_per_class)`.
pub fn seed_size(n: usize, cfg: &ContinualConfig) -> usize {
    ((cfg.seed_fraction * n as f64).round() as usize).max(2 * cfg.min_seed_per_class)
}

/// Uniform draw of [`seed_size`] items, adjusted so each class has at least
/// `min_seed_per_class` members.
///
/// Items are taken in the order of a seeded shuffle; if a class falls short,
/// its next items in that order replace the latest-drawn items of the other
/// class.
pub fn select_seed<S: SpecSource>(pool: &Pool<S>, cfg: &ContinualConfig) -> Result<SeedSet> {
    let n = pool.len();
    let k = seed_size(n, cfg);
    let min = cfg.min_seed_per_class;
    let available = |l: Label| pool.labels.iter().filter(|&&x| x == l).count();
    if k > n || available(Label::Fake) < min || available(Label::Bonafide) < min {
        return Err(Error::PoolTooSmall(format!(
            "{n} items cannot supply a seed of {k} with {min} per class"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(cfg.seed, "seed-select", 0));
    let mut chosen: Vec<usize> = order[..k].to_vec();
    for class in [Label::Fake, Label::Bonafide] {
        let have = chosen.iter().filter(|&&i| pool.labels[i] == class).count();
        if have >= min {
            continue;
        }
        let extra: Vec<usize> = order[k..]
            .iter()
            .copied()
            .filter(|&i| pool.labels[i] == class)
            .take(min - have)
            .collect();
        for add in extra {
            let pos = chosen
                .iter()
                .rposition(|&i| pool.labels[i] != class)
                .expect("other class present when this one is short");
            chosen[pos] = add;
        }
    }
    Ok(SeedSet {
        ids: chosen.iter().map(|&i| pool.source.id(i)).collect(),
        labels: chosen.iter().map(|&i| pool.labels[i]).collect(),
        indices: chosen,
    })
}

/// Clip embeddings, one row per index.
pub fn embed_items<S: SpecSource>(
    params: &ModelParams,
    config: &ModelConfig,
    source: &S,
    indices: &[usize],
) -> Result<Array2<f64>> {
    let rows: Vec<Vec<f64>> = indices
        .par_iter()
        .map(|&i| Ok(embedding(&source.spec(i)?, params, config)?.to_vec()))
        .collect::<Result<_>>()?;
    let d = config.embed_dim;
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((indices.len(), d), flat).expect("rows of embed_dim"))
}

/// Boosted trees on the seed's embeddings; also returns training accuracy.
pub fn train_plugin<S: SpecSource>(
    params: &ModelParams,
    config: &ModelConfig,
    pool: &Pool<S>,
    seed: &SeedSet,
    cfg: &ContinualConfig,
) -> Result<(TrainedGbm, f64)> {
    let x = embed_items(params, config, &pool.source, &seed.indices)?;
    let y: Vec<bool> = seed.labels.iter().map(|&l| l == Label::Fake).collect();
    let gbm = train_gbm(x.view(), &y, &cfg.gbm)?;
    let p = gbm.predict_proba_rows(x.view())?;
    let correct = p.iter().zip(&y).filter(|(&p, &l)| (p >= 0.5) == l).count();
    Ok((gbm, correct as f64 / y.len() as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoItem {
    pub index: usize,
    pub id: String,
    pub label: Label,
    /// Plugin probability of the fake class.
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PseudoLabeledSet {
    pub items: Vec<PseudoItem>,
    /// `round(accumulate_fraction * |pool|)`.
    pub target: usize,
    /// Items that passed a confidence threshold.
    pub candidates: usize,
}

/// Confidence-ranked selection from `(index, p_fake)` scores.
///
/// Items with `p >= high` become fake, `p <= low` bonafide (an item meeting
/// both goes to the side it is further into); candidates are ranked by
/// `|p - 0.5|` descending, ties (to 1e-12) in input order, and the first `target` kept.
pub fn select_pseudo(
    scores: &[(usize, f64)],
    target: usize,
    low: f64,
    high: f64,
) -> Vec<(usize, Label, f64)> {
    let mut cand: Vec<(usize, Label, f64)> = scores
        .iter()
        .filter_map(|&(i, p)| {
            let fake = p >= high;
            let bona = p <= low;
            match (fake, bona) {
                (true, true) => Some((
                    i,
                    if p >= 0.5 {
                        Label::Fake
                    } else {
                        Label::Bonafide
                    },
                    p,
                )),
                (true, false) => Some((i, Label::Fake, p)),
                (false, true) => Some((i, Label::Bonafide, p)),
                (false, false) => None,
            }
        })
        .collect();
    // Margins equal up to rounding count as ties, so mirror-image scores
    // from a symmetric ensemble interleave instead of one side winning.
    let margin = |p: f64| ((p - 0.5).abs() * 1e12).round();
    cand.sort_by(|a, b| margin(b.2).total_cmp(&margin(a.2)));
    cand.truncate(target);
    cand
}

/// Score the pool's unlabeled items with the plugin and keep the most
/// confident ones. Ground truth is never read.
///
/// Tree ensembles trained on a handful of points give few distinct scores, so
/// ties are common; they are broken by a seeded shuffle rather than pool order.
pub fn pseudo_label<S: SpecSource>(
    params: &ModelParams,
    config: &ModelConfig,
    plugin: &TrainedGbm,
    pool: &Pool<S>,
    unlabeled: &[usize],
    cfg: &ContinualConfig,
) -> Result<PseudoLabeledSet> {
    let x = embed_items(params, config, &pool.source, unlabeled)?;
    let p = plugin.predict_proba_rows(x.view())?;
    let mut scores: Vec<(usize, f64)> = unlabeled.iter().copied().zip(p).collect();
    scores.shuffle(&mut rng::stream(cfg.seed, "pseudo-ties", 0));
    Ok(pseudo_from_scores(pool, &scores, cfg))
}

fn pseudo_from_scores<S: SpecSource>(
    pool: &Pool<S>,
    scores: &[(usize, f64)],
    cfg: &ContinualConfig,
) -> PseudoLabeledSet {
    let target = (cfg.accumulate_fraction * pool.len() as f64).round() as usize;
    let candidates = scores
        .iter()
        .filter(|(_, p)| *p >= cfg.confidence_high || *p <= cfg.confidence_low)
        .count();
    let items = select_pseudo(scores, target, cfg.confidence_low, cfg.confidence_high)
        .into_iter()
        .map(|(index, label, confidence)| PseudoItem {
            index,
            id: pool.source.id(index),
            label,
            confidence,
        })
        .collect();
    PseudoLabeledSet {
        items,
        target,
        candidates,
    }
}

/// Fraction of pseudo-labels that agree with ground truth.
fn precision<S: SpecSource>(pool: &Pool<S>, set: &PseudoLabeledSet) -> Option<f64> {
    if set.items.is_empty() {
        return None;
    }
    let right = set
        .items
        .iter()
        .filter(|i| pool.labels[i.index] == i.label)
        .count();
    Some(right as f64 / set.items.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub eer: f64,
    pub auc: f64,
    pub accuracy: f64,
}

impl EvalSummary {
    pub fn of(scores: &ScoreSet) -> Result<Self> {
        Ok(Self {
            eer: metrics::eer(scores)?.eer,
            auc: metrics::auc(scores)?,
            accuracy: metrics::accuracy(scores, 0.5)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CycleMode {
    Ours,
    Supervised,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub mode: CycleMode,
    pub pool_size: usize,
    pub seed_size: usize,
    pub seed_fake: usize,
    pub seed_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_manifest_sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plugin_train_accuracy: Option<f64>,
    pub target: usize,
    pub collected: usize,
    pub collected_fake: usize,
    /// Agreement of pseudo-labels with the pool's hidden ground truth;
    /// measured for reporting only.
    pub pseudo_label_precision: Option<f64>,
    pub finetuned: bool,
    pub finetune_examples: usize,
    pub before: EvalSummary,
    pub after: EvalSummary,
}

pub struct CycleOutcome {
    pub params: ModelParams,
    pub report: CycleReport,
    pub seed: SeedSet,
    pub plugin: Option<TrainedGbm>,
    pub pseudo: PseudoLabeledSet,
    pub before: ScoreSet,
    pub after: ScoreSet,
}

fn examples<S: SpecSource>(pool: &Pool<S>, picks: &[(usize, Label)]) -> Result<Vec<Example>> {
    picks
        .par_iter()
        .map(|&(i, label)| {
            Ok(Example {
                id: pool.source.id(i),
                spec: pool.source.spec(i)?,
                label: label.soft(),
            })
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn finish<S: SpecSource>(
    mode: CycleMode,
    params: &ModelParams,
    config: &ModelConfig,
    pool: &Pool<S>,
    eval: &[Example],
    cfg: &ContinualConfig,
    seed: SeedSet,
    plugin: Option<(TrainedGbm, f64)>,
    pseudo: PseudoLabeledSet,
    train_on: Vec<(usize, Label)>,
    run_finetune: bool,
) -> Result<CycleOutcome> {
    let before = score_examples(params, config, eval)?;
    let mut finetune_examples = 0;
    let updated = if run_finetune && !train_on.is_empty() {
        let data = examples(pool, &train_on)?;
        finetune_examples = data.len();
        finetune(
            params.clone(),
            &data,
            config,
            &cfg.finetune_hyper,
            &cfg.finetune_augment,
            None,
        )?
        .0
    } else {
        params.clone()
    };
    let finetuned = finetune_examples > 0;
    let after = if finetuned {
        score_examples(&updated, config, eval)?
    } else {
        before.clone()
    };
    let report = CycleReport {
        mode,
        pool_size: pool.len(),
        seed_size: seed.len(),
        seed_fake: seed.labels.iter().filter(|&&l| l == Label::Fake).count(),
        seed_ids: seed.ids.clone(),
        seed_manifest_sha256: None,
        plugin_train_accuracy: plugin.as_ref().map(|p| p.1),
        target: pseudo.target,
        collected: pseudo.items.len(),
        collected_fake: pseudo
            .items
            .iter()
            .filter(|i| i.label == Label::Fake)
            .count(),
        pseudo_label_precision: precision(pool, &pseudo),
        finetuned,
        finetune_examples,
        before: EvalSummary::of(&before)?,
        after: EvalSummary::of(&after)?,
    };
    Ok(CycleOutcome {
        params: updated,
        report,
        seed,
        plugin: plugin.map(|p| p.0),
        pseudo,
        before,
        after,
    })
}

/// Seed selection, plugin training, pseudo-labeling and fine-tuning, with
/// before/after scores on `eval`.
///
/// If the plugin yields no confident items the model is left unchanged. When
/// the seed already covers the whole pool there is nothing to pseudo-label
/// and the cycle fine-tunes on the seed alone.
pub fn run_cycle<S: SpecSource>(
    params: &ModelParams,
    config: &ModelConfig,
    pool: &Pool<S>,
    eval: &[Example],
    cfg: &ContinualConfig,
) -> Result<CycleOutcome> {
    cfg.validate()?;
    let seed = select_seed(pool, cfg)?;
    let unlabeled = seed.unlabeled(pool.len());
    let (gbm, acc) = train_plugin(params, config, pool, &seed, cfg)?;
    let pseudo = if unlabeled.is_empty() {
        PseudoLabeledSet::default()
    } else {
        pseudo_label(params, config, &gbm, pool, &unlabeled, cfg)?
    };
    let run_finetune = !pseudo.items.is_empty() || unlabeled.is_empty();
    let mut train_on: Vec<(usize, Label)> = Vec::new();
    if cfg.include_seed || unlabeled.is_empty() {
        train_on.extend(
            seed.indices
                .iter()
                .copied()
                .zip(seed.labels.iter().copied()),
        );
    }
    train_on.extend(pseudo.items.iter().map(|i| (i.index, i.label)));
    finish(
        CycleMode::Ours,
        params,
        config,
        pool,
        eval,
        cfg,
        seed,
        Some((gbm, acc)),
        pseudo,
        train_on,
        run_finetune,
    )
}

/// Direct fine-tuning on the seed that [`run_cycle`] would draw.
pub fn baseline_finetune<S: SpecSource>(
    params: &ModelParams,
    config: &ModelConfig,
    pool: &Pool<S>,
    eval: &[Example],
    cfg: &ContinualConfig,
) -> Result<CycleOutcome> {
    cfg.validate()?;
    let seed = select_seed(pool, cfg)?;
    let train_on: Vec<(usize, Label)> = seed
        .indices
        .iter()
        .copied()
        .zip(seed.labels.iter().copied())
        .collect();
    finish(
        CycleMode::Supervised,
        params,
        config,
        pool,
        eval,
        cfg,
        seed,
        None,
        PseudoLabeledSet::default(),
        train_on,
        true,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::FrontendConfig;
    use crate::model::testutil::tiny_config;
    use rand::Rng as _;

    fn toy_spec(fake: bool, r: &mut rng::Rng) -> MelSpectrogram {
        MelSpectrogram {
            values: Array2::from_shape_fn((128, 16), |(m, _)| {
                let bump = if fake && m >= 64 { 3.0 } else { 0.0 };
                -4.0 + bump + r.random_range(-0.5..0.5)
            }),
            config: FrontendConfig::default(),
        }
    }

    fn toy_pool(n: usize, fake_every: usize) -> Pool<VecSource> {
        let mut r = rng::stream(1, "pool", 0);
        let labels: Vec<Label> = (0..n)
            .map(|i| {
                if i % fake_every == 0 {
                    Label::Fake
                } else {
                    Label::Bonafide
                }
            })
            .collect();
        let specs = labels
            .iter()
            .map(|&l| toy_spec(l == Label::Fake, &mut r))
            .collect();
        Pool::new(
            VecSource {
                ids: (0..n).map(|i| format!("p{i}")).collect(),
                specs,
            },
            labels,
        )
        .unwrap()
    }

    fn toy_eval() -> Vec<Example> {
        let mut r = rng::stream(2, "eval", 0);
        (0..8)
            .map(|i| {
                let fake = i % 2 == 0;
                Example {
                    id: format!("e{i}"),
                    spec: toy_spec(fake, &mut r),
                    label: if fake {
                        Label::Fake.soft()
                    } else {
                        Label::Bonafide.soft()
                    },
                }
            })
            .collect()
    }

    fn params() -> ModelParams {
        let mut p = ModelParams::init(&tiny_config(), &mut rng::stream(0, "init", 0));
        p.input_mean = -3.0;
        p.input_std = 2.0;
        p
    }

    #[test]
    fn seed_sizes_follow_fraction_and_floor() {
        let cfg = ContinualConfig::default();
        assert_eq!(seed_size(10_000, &cfg), 10);
        assert_eq!(seed_size(100, &cfg), 2);
        assert_eq!(seed_size(4000, &cfg), 4);
    }

    #[test]
    fn seed_is_stratified_and_reproducible() {
        // One fake in fifty: an unadjusted draw of two would usually miss it.
        let pool = toy_pool(200, 50);
        for s in 0..20 {
            let cfg = ContinualConfig {
                seed: s,
                ..Default::default()
            };
            let a = select_seed(&pool, &cfg).unwrap();
            assert_eq!(a.len(), 2);
            assert!(a.labels.contains(&Label::Fake) && a.labels.contains(&Label::Bonafide));
            assert_eq!(a, select_seed(&pool, &cfg).unwrap());
            assert_eq!(a.unlabeled(200).len(), 198);
        }
    }

    #[test]
    fn seed_larger_than_pool_rejected() {
        let pool = toy_pool(3, 2);
        let cfg = ContinualConfig {
            min_seed_per_class: 2,
            ..Default::default()
        };
        assert!(matches!(
            select_seed(&pool, &cfg),
            Err(Error::PoolTooSmall(_))
        ));
    }

    #[test]
    fn ground_truth_scores_give_perfect_pseudo_labels() {
        let pool = toy_pool(100, 3);
        let cfg = ContinualConfig::default();
        let scores: Vec<(usize, f64)> = (0..100)
            .map(|i| {
                (
                    i,
                    if pool.labels[i] == Label::Fake {
                        1.0
                    } else {
                        0.0
                    },
                )
            })
            .collect();
        let set = pseudo_from_scores(&pool, &scores, &cfg);
        assert_eq!(set.items.len(), 5);
        assert_eq!(precision(&pool, &set), Some(1.0));
    }

    #[test]
    fn midpoint_thresholds_admit_everything() {
        let pool = toy_pool(400, 4);
        let cfg = ContinualConfig {
            confidence_low: 0.5,
            confidence_high: 0.5,
            ..Default::default()
        };
        let mut r = rng::stream(3, "scores", 0);
        let scores: Vec<(usize, f64)> = (0..400).map(|i| (i, r.random_range(0.0..1.0))).collect();
        let set = pseudo_from_scores(&pool, &scores, &cfg);
        assert_eq!(set.candidates, 400);
        assert_eq!(set.items.len(), 20);
        // Ranked by distance from one half.
        let d: Vec<f64> = set
            .items
            .iter()
            .map(|i| (i.confidence - 0.5).abs())
            .collect();
        assert!(d.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn selection_respects_thresholds_and_bound() {
        let scores: Vec<(usize, f64)> = (0..50).map(|i| (i, i as f64 / 49.0)).collect();
        let picked = select_pseudo(&scores, 6, 0.1, 0.9);
        assert_eq!(picked.len(), 6);
        for (_, label, p) in &picked {
            assert!(*p >= 0.9 || *p <= 0.1);
            assert_eq!(*label == Label::Fake, *p >= 0.9);
        }
        // Equal distance from one half: lower index first.
        assert_eq!(picked[0].0, 0);
        assert_eq!(picked[1].0, 49);
    }

    #[test]
    fn selection_ignores_hidden_labels() {
        let cfg = ContinualConfig::default();
        let model_cfg = tiny_config();
        let p = params();
        let pool = toy_pool(60, 3);
        let seed = select_seed(&pool, &cfg).unwrap();
        let (gbm, _) = train_plugin(&p, &model_cfg, &pool, &seed, &cfg).unwrap();
        let unlabeled = seed.unlabeled(pool.len());
        let a = pseudo_label(&p, &model_cfg, &gbm, &pool, &unlabeled, &cfg).unwrap();
        let shuffled = Pool {
            source: VecSource {
                ids: pool.source.ids.clone(),
                specs: pool.source.specs.clone(),
            },
            labels: pool.labels.iter().rev().copied().collect(),
        };
        let b = pseudo_label(&p, &model_cfg, &gbm, &shuffled, &unlabeled, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.items.len() <= 3);
    }

    #[test]
    fn cycle_and_baseline_share_the_seed() {
        let model_cfg = tiny_config();
        let p = params();
        let pool = toy_pool(200, 2);
        let cfg = ContinualConfig {
            seed_fraction: 0.05,
            finetune_hyper: TrainHyper {
                epochs: 1,
                batch_size: 4,
                ..TrainHyper::default()
            },
            ..Default::default()
        };
        let ours = run_cycle(&p, &model_cfg, &pool, &toy_eval(), &cfg).unwrap();
        let sup = baseline_finetune(&p, &model_cfg, &pool, &toy_eval(), &cfg).unwrap();
        assert_eq!(ours.seed, sup.seed);
        assert_eq!(ours.report.seed_size, 10);
        assert!(ours.report.collected <= 10);
        assert_eq!(ours.report.before, sup.report.before);
        let json = serde_json::to_string(&ours.report).unwrap();
        assert!(json.contains("pseudo_label_precision"));
        let back: CycleReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ours.report);
    }

    #[test]
    fn zero_epoch_baseline_keeps_model() {
        let model_cfg = tiny_config();
        let p = params();
        let pool = toy_pool(50, 2);
        let cfg = ContinualConfig {
            finetune_hyper: TrainHyper {
                epochs: 0,
                ..TrainHyper::default()
            },
            ..Default::default()
        };
        let out = baseline_finetune(&p, &model_cfg, &pool, &toy_eval(), &cfg).unwrap();
        assert_eq!(out.params, p);
    }

    #[test]
    fn config_validation() {
        assert!(ContinualConfig::default().validate().is_ok());
        let bad = ContinualConfig {
            confidence_low: 0.8,
            confidence_high: 0.2,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ContinualConfig {
            seed_fraction: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
