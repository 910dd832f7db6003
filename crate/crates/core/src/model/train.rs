//! Mini-batch training and fine-tuning.
//!
//! Per-example gradients are computed in parallel and summed in batch order,
//! so results do not depend on the thread count.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::backward::backward;
use super::forward::{forward, loss, p_fake};
use super::params::ModelParams;
use super::ModelConfig;
use crate::augment::{apply_spectrogram_stage, AugmentPolicy, SoftLabel};
use crate::error::{Error, Result};
use crate::frontend::MelSpectrogram;
use crate::metrics::{self, Label, ScoreSet};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainHyper {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Rescale the batch gradient to at most this global L2 norm.
    pub grad_clip: Option<f64>,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 16,
            epochs: 10,
            optimizer: OptimizerKind::Adam,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            grad_clip: Some(1.0),
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0) || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "lr must be non-negative and batch_size positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || !(self.eps > 0.0)
        {
            return Err(Error::InvalidConfig("invalid Adam moments".into()));
        }
        Ok(())
    }
}

/// One labeled training or evaluation item.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub spec: MelSpectrogram,
    pub label: SoftLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heldout_eer: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heldout_auc: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainLog {
    /// One JSON object per epoch.
    pub fn to_jsonl(&self) -> String {
        self.epochs
            .iter()
            .map(|e| serde_json::to_string(e).expect("plain struct") + "\n")
            .collect()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.mean_loss)
    }
}

/// Mean loss, summed gradient (divided by the batch size) and the number of
/// items whose argmax agrees with the hard label.
pub fn batch_gradients(
    params: &ModelParams,
    config: &ModelConfig,
    batch: &[(MelSpectrogram, SoftLabel)],
) -> Result<(f64, ModelParams, usize)> {
    let per_item: Vec<(f64, ModelParams, bool)> = batch
        .par_iter()
        .map(|(spec, label)| {
            let (logits, trace) = forward(spec, params, config)?;
            let (l, dlogits) = loss(logits, *label);
            let correct = (logits[1] > logits[0]) == label.is_fake();
            Ok((l, backward(&trace, params, dlogits), correct))
        })
        .collect::<Result<_>>()?;
    let mut total = params.zeros_like();
    let mut loss_sum = 0.0;
    let mut correct = 0;
    for (l, g, c) in &per_item {
        loss_sum += l;
        total.add_assign(g);
        correct += usize::from(*c);
    }
    let n = batch.len() as f64;
    total.scale(1.0 / n);
    Ok((loss_sum / n, total, correct))
}

/// Optimizer state bound to a parameter set.
pub struct Trainer {
    pub params: ModelParams,
    config: ModelConfig,
    hyper: TrainHyper,
    first_moment: ModelParams,
    second_moment: ModelParams,
    step: u64,
}

impl Trainer {
    pub fn new(params: ModelParams, config: &ModelConfig, hyper: &TrainHyper) -> Result<Self> {
        config.validate()?;
        hyper.validate()?;
        let zeros = params.zeros_like();
        Ok(Self {
            first_moment: zeros.clone(),
            second_moment: zeros,
            params,
            config: config.clone(),
            hyper: hyper.clone(),
            step: 0,
        })
    }

    fn apply(&mut self, mut grads: ModelParams) {
        if let Some(clip) = self.hyper.grad_clip {
            let norm = grads.l2_norm();
            if norm > clip {
                grads.scale(clip / norm);
            }
        }
        self.step += 1;
        let lr = self.hyper.lr;
        match self.hyper.optimizer {
            OptimizerKind::Sgd => {
                for ((_, mut p), (_, g)) in
                    self.params.tensors_mut().into_iter().zip(grads.tensors())
                {
                    p.zip_mut_with(&g, |p, &g| *p -= lr * g);
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2, eps) = (self.hyper.beta1, self.hyper.beta2, self.hyper.eps);
                let c1 = 1.0 - b1.powi(self.step as i32);
                let c2 = 1.0 - b2.powi(self.step as i32);
                let params = self.params.tensors_mut();
                let ms = self.first_moment.tensors_mut();
                let vs = self.second_moment.tensors_mut();
                for ((((_, mut p), (_, mut m)), (_, mut v)), (_, g)) in
                    params.into_iter().zip(ms).zip(vs).zip(grads.tensors())
                {
                    ndarray::Zip::from(&mut p)
                        .and(&mut m)
                        .and(&mut v)
                        .and(&g)
                        .for_each(|p, m, v, &g| {
                            *m = b1 * *m + (1.0 - b1) * g;
                            *v = b2 * *v + (1.0 - b2) * g * g;
                            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                        });
                }
            }
        }
    }

    /// One optimizer step on a batch; returns `(mean loss, correct count)`.
    pub fn step(&mut self, batch: &[(MelSpectrogram, SoftLabel)]) -> Result<(f64, usize)> {
        let (l, grads, correct) = batch_gradients(&self.params, &self.config, batch)?;
        self.apply(grads);
        Ok((l, correct))
    }

    /// One pass over `data` in a seeded order, with spectrogram-stage
    /// augmentation per batch.
    pub fn run_epoch(
        &mut self,
        epoch: usize,
        data: &[Example],
        policy: &AugmentPolicy,
        heldout: Option<&[Example]>,
    ) -> Result<EpochLog> {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng::stream(self.hyper.seed, "shuffle", epoch as u64));
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for (b, chunk) in order.chunks(self.hyper.batch_size).enumerate() {
            let specs: Vec<MelSpectrogram> = chunk.iter().map(|&i| data[i].spec.clone()).collect();
            let labels: Vec<SoftLabel> = chunk.iter().map(|&i| data[i].label).collect();
            let mut r = rng::stream(
                self.hyper.seed ^ policy.rng_seed,
                "batch-augment",
                ((epoch as u64) << 32) | b as u64,
            );
            let batch = apply_spectrogram_stage(&specs, &labels, policy, &mut r)?;
            let (l, c) = self.step(&batch)?;
            loss_sum += l * chunk.len() as f64;
            correct += c;
        }
        let (heldout_eer, heldout_auc) = match heldout {
            Some(h) if !h.is_empty() => {
                let scores = score_examples(&self.params, &self.config, h)?;
                match (metrics::eer(&scores), metrics::auc(&scores)) {
                    (Ok(e), Ok(a)) => (Some(e.eer), Some(a)),
                    _ => (None, None),
                }
            }
            _ => (None, None),
        };
        Ok(EpochLog {
            epoch,
            mean_loss: loss_sum / data.len() as f64,
            train_accuracy: correct as f64 / data.len() as f64,
            heldout_eer,
            heldout_auc,
        })
    }

    pub fn run(
        &mut self,
        data: &[Example],
        policy: &AugmentPolicy,
        heldout: Option<&[Example]>,
    ) -> Result<TrainLog> {
        let mut log = TrainLog::default();
        for epoch in 0..self.hyper.epochs {
            log.epochs
                .push(self.run_epoch(epoch, data, policy, heldout)?);
        }
        Ok(log)
    }

    pub fn into_params(self) -> ModelParams {
        self.params
    }
}

fn check_classes(data: &[Example]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    let fakes = data.iter().filter(|e| e.label.is_fake()).count();
    if fakes == 0 {
        return Err(Error::SingleClass("bonafide"));
    }
    if fakes == data.len() {
        return Err(Error::SingleClass("fake"));
    }
    Ok(())
}

/// Global mean and standard deviation over every spectrogram cell.
pub fn input_statistics(data: &[Example]) -> (f64, f64) {
    let (mut n, mut sum, mut sq) = (0.0, 0.0, 0.0);
    for e in data {
        for &v in e.spec.values.iter() {
            n += 1.0;
            sum += v;
            sq += v * v;
        }
    }
    let mean = sum / n;
    let std = (sq / n - mean * mean).max(1e-12).sqrt();
    (mean, std)
}

/// Train from a fresh seeded initialization.
pub fn train(
    data: &[Example],
    config: &ModelConfig,
    hyper: &TrainHyper,
    policy: &AugmentPolicy,
    heldout: Option<&[Example]>,
) -> Result<(ModelParams, TrainLog)> {
    config.validate()?;
    check_classes(data)?;
    let mut params = ModelParams::init(config, &mut rng::stream(hyper.seed, "init", 0));
    let (mean, std) = input_statistics(data);
    params.input_mean = mean;
    params.input_std = std;
    let mut trainer = Trainer::new(params, config, hyper)?;
    let log = trainer.run(data, policy, heldout)?;
    Ok((trainer.into_params(), log))
}

/// Continue training from `params`, keeping its input normalization.
pub fn finetune(
    params: ModelParams,
    data: &[Example],
    config: &ModelConfig,
    hyper: &TrainHyper,
    policy: &AugmentPolicy,
    heldout: Option<&[Example]>,
) -> Result<(ModelParams, TrainLog)> {
    let expected = ModelParams::expected_shapes(config);
    let found: Vec<(String, Vec<usize>)> = params
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.shape().to_vec()))
        .collect();
    if expected != found {
        return Err(Error::ShapeMismatch(
            "parameters do not match the model configuration".into(),
        ));
    }
    check_classes(data)?;
    let mut trainer = Trainer::new(params, config, hyper)?;
    let log = trainer.run(data, policy, heldout)?;
    Ok((trainer.into_params(), log))
}

/// Fake-class probability for one spectrogram.
pub fn score(params: &ModelParams, config: &ModelConfig, spec: &MelSpectrogram) -> Result<f64> {
    Ok(p_fake(forward(spec, params, config)?.0))
}

/// Score labeled examples into a [`ScoreSet`].
pub fn score_examples(
    params: &ModelParams,
    config: &ModelConfig,
    data: &[Example],
) -> Result<ScoreSet> {
    let scores: Vec<f64> = data
        .par_iter()
        .map(|e| score(params, config, &e.spec))
        .collect::<Result<_>>()?;
    Ok(ScoreSet::new(
        data.iter()
            .zip(scores)
            .map(|(e, s)| (e.id.clone(), s, Label::from_soft(e.label)))
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testutil::tiny_config;
    use ndarray::Array2;
    use rand::Rng as _;

    /// Fakes carry extra energy in a band of mel rows; both classes are noisy.
    fn toy_set(n: usize, seed: u64) -> Vec<Example> {
        let mut r = rng::stream(seed, "toy", 0);
        (0..n)
            .map(|i| {
                let fake = i % 2 == 1;
                let values = Array2::from_shape_fn((128, 32), |(m, _)| {
                    let bump = if fake && (40..56).contains(&m) {
                        2.0
                    } else {
                        0.0
                    };
                    -4.0 + bump + r.random_range(-1.0..1.0)
                });
                Example {
                    id: format!("toy{i}"),
                    spec: MelSpectrogram {
                        values,
                        config: Default::default(),
                    },
                    label: if fake {
                        SoftLabel::FAKE
                    } else {
                        SoftLabel::BONAFIDE
                    },
                }
            })
            .collect()
    }

    fn quick_hyper(epochs: usize) -> TrainHyper {
        TrainHyper {
            lr: 3e-3,
            batch_size: 8,
            epochs,
            grad_clip: None,
            ..TrainHyper::default()
        }
    }

    #[test]
    fn overfits_sixteen_examples() {
        let cfg = tiny_config();
        let data = toy_set(16, 1);
        let (params, log) =
            train(&data, &cfg, &quick_hyper(200), &AugmentPolicy::none(), None).unwrap();
        let last = log.epochs.last().unwrap();
        assert!(last.mean_loss < 0.05, "loss {}", last.mean_loss);
        let scores = score_examples(&params, &cfg, &data).unwrap();
        assert_eq!(metrics::accuracy(&scores, 0.5).unwrap(), 1.0);
        assert_eq!(log.to_jsonl().lines().count(), 200);
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let cfg = tiny_config();
        let data = toy_set(8, 2);
        let init = ModelParams::init(&cfg, &mut rng::stream(0, "init", 0));
        for optimizer in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let hyper = TrainHyper {
                lr: 0.0,
                optimizer,
                ..quick_hyper(2)
            };
            let (p, _) = finetune(
                init.clone(),
                &data,
                &cfg,
                &hyper,
                &AugmentPolicy::none(),
                None,
            )
            .unwrap();
            assert_eq!(p, init);
        }
    }

    #[test]
    fn zero_epoch_finetune_is_identity() {
        let cfg = tiny_config();
        let data = toy_set(8, 3);
        let init = ModelParams::init(&cfg, &mut rng::stream(5, "init", 0));
        let (p, log) = finetune(
            init.clone(),
            &data,
            &cfg,
            &quick_hyper(0),
            &AugmentPolicy::default(),
            None,
        )
        .unwrap();
        assert_eq!(p, init);
        assert!(log.epochs.is_empty());
    }

    #[test]
    fn single_class_training_rejected() {
        let cfg = tiny_config();
        let data: Vec<Example> = toy_set(8, 4)
            .into_iter()
            .filter(|e| !e.label.is_fake())
            .collect();
        let err = train(&data, &cfg, &quick_hyper(1), &AugmentPolicy::none(), None).unwrap_err();
        assert!(matches!(err, Error::SingleClass(_)));
    }

    #[test]
    fn gradients_independent_of_thread_count() {
        let cfg = tiny_config();
        let params = ModelParams::init(&cfg, &mut rng::stream(1, "init", 0));
        let batch: Vec<(MelSpectrogram, SoftLabel)> = toy_set(6, 5)
            .into_iter()
            .map(|e| (e.spec, e.label))
            .collect();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| batch_gradients(&params, &cfg, &batch).unwrap())
        };
        let (l1, g1, _) = run(1);
        let (l3, g3, _) = run(3);
        assert_eq!(l1, l3);
        assert_eq!(g1, g3);
    }

    #[test]
    fn training_is_reproducible() {
        let cfg = tiny_config();
        let data = toy_set(8, 6);
        let policy = AugmentPolicy {
            specaug_max_time: 8,
            specaug_max_freq: 8,
            ..AugmentPolicy::default()
        };
        let a = train(&data, &cfg, &quick_hyper(2), &policy, None).unwrap();
        let b = train(&data, &cfg, &quick_hyper(2), &policy, None).unwrap();
        assert_eq!(a, b);
    }
}
