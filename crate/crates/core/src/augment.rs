//! Training-time augmentation.
//!
//! Waveform stage: band-pass filtering and three lossy-codec proxies, each
//! applied to its own seeded subset of a batch. Spectrogram stage: mixup with
//! Beta-distributed weights and one time plus one frequency SpecAugment mask.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use ndarray::s;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::audio::{resample, AudioClip};
use crate::dsp::{butterworth_qs, cascade, Biquad};
use crate::error::{Error, Result};
use crate::frontend::MelSpectrogram;
use crate::rng::{self, Rng};

/// Probability that a clip is fake. 1 = fake, 0 = bonafide.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SoftLabel(f64);

impl SoftLabel {
    pub const BONAFIDE: SoftLabel = SoftLabel(0.0);
    pub const FAKE: SoftLabel = SoftLabel(1.0);

    pub fn new(p_fake: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&p_fake) {
            Ok(Self(p_fake))
        } else {
            Err(Error::InvalidConfig(format!(
                "label {p_fake} outside [0, 1]"
            )))
        }
    }

    pub fn p_fake(self) -> f64 {
        self.0
    }

    pub fn is_fake(self) -> bool {
        self.0 >= 0.5
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", deny_unknown_fields)]
pub enum MixupMode {
    /// No mixing.
    Off,
    /// λ ~ Beta(α, α) with α = `mixup_alpha`.
    Beta,
    /// Constant λ.
    Fixed { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodecKind {
    MuLaw8bit,
    DownUp8k,
    Bitcrush6bit,
}

impl CodecKind {
    pub const ALL: [CodecKind; 3] = [
        CodecKind::MuLaw8bit,
        CodecKind::DownUp8k,
        CodecKind::Bitcrush6bit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CodecKind::MuLaw8bit => "mu_law_8bit",
            CodecKind::DownUp8k => "down_up_8k",
            CodecKind::Bitcrush6bit => "bitcrush_6bit",
        }
    }
}

impl fmt::Display for CodecKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CodecKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CodecKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownCodec(s.to_string()))
    }
}

/// A low-resolution waveform degradation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowResTechnique {
    Bandpass,
    MuLaw8bit,
    DownUp8k,
    Bitcrush6bit,
}

impl LowResTechnique {
    pub const ALL: [LowResTechnique; 4] = [
        LowResTechnique::Bandpass,
        LowResTechnique::MuLaw8bit,
        LowResTechnique::DownUp8k,
        LowResTechnique::Bitcrush6bit,
    ];

    pub fn codec(self) -> Option<CodecKind> {
        match self {
            LowResTechnique::Bandpass => None,
            LowResTechnique::MuLaw8bit => Some(CodecKind::MuLaw8bit),
            LowResTechnique::DownUp8k => Some(CodecKind::DownUp8k),
            LowResTechnique::Bitcrush6bit => Some(CodecKind::Bitcrush6bit),
        }
    }

    fn label(self) -> &'static str {
        match self {
            LowResTechnique::Bandpass => "bandpass",
            LowResTechnique::MuLaw8bit => "mu_law_8bit",
            LowResTechnique::DownUp8k => "down_up_8k",
            LowResTechnique::Bitcrush6bit => "bitcrush_6bit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentPolicy {
    pub mixup: MixupMode,
    pub mixup_alpha: f64,
    pub specaug_max_time: usize,
    pub specaug_max_freq: usize,
    /// Fraction of a batch handed to each low-resolution technique.
    pub lowres_fraction: f64,
    pub lowres_techniques: Vec<LowResTechnique>,
    /// Band-pass edges are drawn uniformly from these ranges (Hz).
    pub bandpass_low: [f64; 2],
    pub bandpass_high: [f64; 2],
    pub rng_seed: u64,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self {
            mixup: MixupMode::Beta,
            mixup_alpha: 0.5,
            specaug_max_time: 192,
            specaug_max_freq: 48,
            lowres_fraction: 0.10,
            lowres_techniques: LowResTechnique::ALL.to_vec(),
            bandpass_low: [100.0, 500.0],
            bandpass_high: [3000.0, 7000.0],
            rng_seed: 0,
        }
    }
}

impl AugmentPolicy {
    /// A policy that leaves every input untouched.
    pub fn none() -> Self {
        Self {
            mixup: MixupMode::Off,
            specaug_max_time: 0,
            specaug_max_freq: 0,
            lowres_fraction: 0.0,
            lowres_techniques: Vec::new(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lowres_fraction) {
            return Err(Error::InvalidConfig(format!(
                "lowres_fraction {} outside [0, 1]",
                self.lowres_fraction
            )));
        }
        if !(self.mixup_alpha > 0.0) {
            return Err(Error::InvalidConfig("mixup_alpha must be positive".into()));
        }
        if let MixupMode::Fixed { lambda } = self.mixup {
            if !(0.0..=1.0).contains(&lambda) {
                return Err(Error::InvalidConfig(format!(
                    "fixed mixup λ {lambda} outside [0, 1]"
                )));
            }
        }
        let ordered = |r: [f64; 2]| r[0] >= 0.0 && r[0] <= r[1];
        if !ordered(self.bandpass_low)
            || !ordered(self.bandpass_high)
            || self.bandpass_low[1] >= self.bandpass_high[0]
        {
            return Err(Error::InvalidConfig(
                "band-pass edge ranges must be ordered".into(),
            ));
        }
        Ok(())
    }
}

/// Convex blend of two spectrograms and their labels. The longer input is
/// cropped to the shorter one first.
pub fn mixup(
    a: &MelSpectrogram,
    b: &MelSpectrogram,
    la: SoftLabel,
    lb: SoftLabel,
    lambda: f64,
) -> Result<(MelSpectrogram, SoftLabel)> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidConfig(format!(
            "mixup λ {lambda} outside [0, 1]"
        )));
    }
    if a.n_mels() != b.n_mels() {
        return Err(Error::ShapeMismatch(format!(
            "mixup of {} and {} mel bins",
            a.n_mels(),
            b.n_mels()
        )));
    }
    let n = a.n_frames().min(b.n_frames());
    let mu = 1.0 - lambda;
    let mut values = a.values.slice(s![.., ..n]).to_owned();
    values.zip_mut_with(&b.values.slice(s![.., ..n]), |x, &y| {
        *x = lambda * *x + mu * y
    });
    let label = SoftLabel((lambda * la.0 + mu * lb.0).clamp(0.0, 1.0));
    Ok((
        MelSpectrogram {
            values,
            config: a.config.clone(),
        },
        label,
    ))
}

pub fn sample_mixup_lambda(policy: &AugmentPolicy, rng: &mut Rng) -> f64 {
    match policy.mixup {
        MixupMode::Off => 1.0,
        MixupMode::Fixed { lambda } => lambda,
        MixupMode::Beta => Beta::new(policy.mixup_alpha, policy.mixup_alpha)
            .expect("validated alpha")
            .sample(rng)
            .clamp(0.0, 1.0),
    }
}

/// Fill the given frame and bin ranges with the pre-mask mean.
pub fn apply_masks(s: &MelSpectrogram, time: Range<usize>, freq: Range<usize>) -> MelSpectrogram {
    let mean = s.mean();
    let mut out = s.clone();
    if !time.is_empty() {
        out.values.slice_mut(s![.., time]).fill(mean);
    }
    if !freq.is_empty() {
        out.values.slice_mut(s![freq, ..]).fill(mean);
    }
    out
}

/// Draw mask widths and offsets: time width `u ~ U{0..=min(max_time, n_frames)}`,
/// frequency width `v ~ U{0..=min(max_freq, n_mels)}`.
pub fn draw_masks(
    n_mels: usize,
    n_frames: usize,
    policy: &AugmentPolicy,
    rng: &mut Rng,
) -> (Range<usize>, Range<usize>) {
    let u = rng.random_range(0..=policy.specaug_max_time.min(n_frames));
    let t0 = rng.random_range(0..=n_frames - u);
    let v = rng.random_range(0..=policy.specaug_max_freq.min(n_mels));
    let f0 = rng.random_range(0..=n_mels - v);
    (t0..t0 + u, f0..f0 + v)
}

pub fn spec_augment(s: &MelSpectrogram, policy: &AugmentPolicy, rng: &mut Rng) -> MelSpectrogram {
    let (time, freq) = draw_masks(s.n_mels(), s.n_frames(), policy, rng);
    apply_masks(s, time, freq)
}

/// 4th-order Butterworth band-pass (high-pass and low-pass cascades). An edge
/// at 0 Hz or at Nyquist skips that half.
pub fn bandpass(clip: &AudioClip, low: f64, high: f64) -> Result<AudioClip> {
    let rate = f64::from(clip.sample_rate());
    let nyquist = rate / 2.0;
    if !(low >= 0.0 && low < high && high <= nyquist) {
        return Err(Error::InvalidBand {
            low,
            high,
            sample_rate: clip.sample_rate(),
        });
    }
    let qs = butterworth_qs(4);
    let mut sections = Vec::new();
    if low > 0.0 {
        sections.extend(qs.iter().map(|&q| Biquad::highpass(low, q, rate)));
    }
    if high < nyquist {
        sections.extend(qs.iter().map(|&q| Biquad::lowpass(high, q, rate)));
    }
    Ok(clip
        .with_samples(cascade(&sections, clip.samples()))
        .clipped())
}

const MU: f64 = 255.0;

fn mu_law(clip: &AudioClip) -> AudioClip {
    let ln1mu = (1.0 + MU).ln();
    clip.with_samples(
        clip.samples()
            .iter()
            .map(|&x| {
                let x = x.clamp(-1.0, 1.0);
                let y = x.signum() * (1.0 + MU * x.abs()).ln() / ln1mu;
                // 255-level mid-tread quantizer keeps zero exact
                let yq = (y * 127.0).round() / 127.0;
                yq.signum() * ((1.0 + MU).powf(yq.abs()) - 1.0) / MU
            })
            .collect(),
    )
}

fn bitcrush(clip: &AudioClip, bits: u32) -> AudioClip {
    // 2^bits-level mid-rise quantizer over [-1, 1]; error <= 2^-bits
    let half = f64::from(1u32 << (bits - 1));
    clip.with_samples(
        clip.samples()
            .iter()
            .map(|&x| ((x.clamp(-1.0, 1.0) * half).floor().clamp(-half, half - 1.0) + 0.5) / half)
            .collect(),
    )
}

fn down_up(clip: &AudioClip, mid_rate: u32) -> Result<AudioClip> {
    let down = resample(clip, mid_rate)?;
    let mut up = resample(&down, clip.sample_rate())?.into_samples();
    up.resize(clip.len(), 0.0);
    Ok(clip.with_samples(up).clipped())
}

/// Lossy-codec proxies.
pub fn codec_sim(clip: &AudioClip, kind: CodecKind) -> Result<AudioClip> {
    match kind {
        CodecKind::MuLaw8bit => Ok(mu_law(clip)),
        CodecKind::DownUp8k => down_up(clip, 8000),
        CodecKind::Bitcrush6bit => Ok(bitcrush(clip, 6)),
    }
}

/// Apply one low-resolution technique with parameters drawn from `rng`.
pub fn apply_lowres(
    clip: &AudioClip,
    technique: LowResTechnique,
    policy: &AugmentPolicy,
    rng: &mut Rng,
) -> Result<AudioClip> {
    match technique.codec() {
        Some(kind) => codec_sim(clip, kind),
        None => {
            let nyquist = f64::from(clip.sample_rate()) / 2.0;
            let low = rng.random_range(policy.bandpass_low[0]..=policy.bandpass_low[1]);
            let high = rng
                .random_range(policy.bandpass_high[0]..=policy.bandpass_high[1])
                .min(nyquist);
            bandpass(clip, low, high)
        }
    }
}

/// Indices touched by each technique: exactly `round(fraction * n)` items per
/// technique, chosen by a per-technique seeded shuffle.
pub fn lowres_selection(n: usize, policy: &AugmentPolicy) -> Vec<(LowResTechnique, Vec<usize>)> {
    let k = (policy.lowres_fraction * n as f64).round() as usize;
    policy
        .lowres_techniques
        .iter()
        .map(|&t| {
            let mut idx: Vec<usize> = (0..n).collect();
            let mut r = rng::stream(policy.rng_seed, t.label(), n as u64);
            idx.partial_shuffle(&mut r, k);
            let mut chosen = idx[..k].to_vec();
            chosen.sort_unstable();
            (t, chosen)
        })
        .collect()
}

/// Waveform stage over a batch. Techniques are applied in policy order; an
/// item picked by several techniques receives all of them.
pub fn apply_waveform_stage(clips: &[AudioClip], policy: &AugmentPolicy) -> Result<Vec<AudioClip>> {
    policy.validate()?;
    let mut out = clips.to_vec();
    for (technique, chosen) in lowres_selection(clips.len(), policy) {
        for i in chosen {
            let mut r = rng::stream(policy.rng_seed, technique.label(), 1_000_000 + i as u64);
            out[i] = apply_lowres(&out[i], technique, policy, &mut r)?;
        }
    }
    Ok(out)
}

/// Spectrogram stage over a batch: each item is mixed with a partner from a
/// seeded permutation, then masked.
pub fn apply_spectrogram_stage(
    specs: &[MelSpectrogram],
    labels: &[SoftLabel],
    policy: &AugmentPolicy,
    rng: &mut Rng,
) -> Result<Vec<(MelSpectrogram, SoftLabel)>> {
    if specs.len() != labels.len() {
        return Err(Error::ShapeMismatch(
            "spectrogram and label counts differ".into(),
        ));
    }
    let mut partners: Vec<usize> = (0..specs.len()).collect();
    if policy.mixup != MixupMode::Off {
        partners.shuffle(rng);
    }
    let mut out = Vec::with_capacity(specs.len());
    for i in 0..specs.len() {
        let lambda = sample_mixup_lambda(policy, rng);
        let (mixed, label) = if lambda == 1.0 {
            (specs[i].clone(), labels[i])
        } else {
            let j = partners[i];
            mixup(&specs[i], &specs[j], labels[i], labels[j], lambda)?
        };
        let masked = if policy.specaug_max_time == 0 && policy.specaug_max_freq == 0 {
            mixed
        } else {
            spec_augment(&mixed, policy, rng)
        };
        out.push((masked, label));
    }
    Ok(out)
}

/// Full policy over a labeled waveform batch.
pub fn apply_policy(
    clips: &[AudioClip],
    labels: &[SoftLabel],
    extractor: &crate::frontend::LogMelExtractor,
    policy: &AugmentPolicy,
) -> Result<Vec<(MelSpectrogram, SoftLabel)>> {
    if clips.is_empty() {
        return Err(Error::EmptyInput("augmentation batch"));
    }
    let degraded = apply_waveform_stage(clips, policy)?;
    let specs = degraded
        .iter()
        .map(|c| extractor.compute(c))
        .collect::<Result<Vec<_>>>()?;
    let mut r = rng::stream(policy.rng_seed, "spectrogram-stage", 0);
    apply_spectrogram_stage(&specs, labels, policy, &mut r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{band_power, peak_power_near, to_db};
    use crate::frontend::{FrontendConfig, LogMelExtractor};
    use ndarray::Array2;
    use rand::SeedableRng;
    use std::f64::consts::PI;

    fn constant(v: f64, frames: usize) -> MelSpectrogram {
        MelSpectrogram {
            values: Array2::from_elem((128, frames), v),
            config: FrontendConfig::default(),
        }
    }

    fn ramp(frames: usize, offset: f64) -> MelSpectrogram {
        MelSpectrogram {
            values: Array2::from_shape_fn((128, frames), |(f, t)| {
                offset + f as f64 * 0.01 - t as f64 * 0.1
            }),
            config: FrontendConfig::default(),
        }
    }

    fn tone(freq: f64, seconds: f64) -> AudioClip {
        let n = (16000.0 * seconds) as usize;
        AudioClip::new(
            (0..n)
                .map(|i| 0.5 * (2.0 * PI * freq * i as f64 / 16000.0).sin())
                .collect(),
            16000,
        )
        .unwrap()
    }

    fn noise(seconds: f64, seed: u64) -> AudioClip {
        let mut r = Rng::seed_from_u64(seed);
        let n = (16000.0 * seconds) as usize;
        AudioClip::new((0..n).map(|_| r.random_range(-0.5..0.5)).collect(), 16000).unwrap()
    }

    #[test]
    fn mixup_cases() {
        let a = ramp(20, 1.0);
        let b = ramp(20, -3.0);
        let (m, l) = mixup(&a, &b, SoftLabel::FAKE, SoftLabel::BONAFIDE, 1.0).unwrap();
        assert_eq!(m.values, a.values);
        assert_eq!(l, SoftLabel::FAKE);

        let (_, l) = mixup(&a, &b, SoftLabel::FAKE, SoftLabel::BONAFIDE, 0.5).unwrap();
        assert_eq!(l.p_fake(), 0.5);

        let (m, _) = mixup(
            &constant(4.0, 10),
            &constant(0.0, 10),
            SoftLabel::FAKE,
            SoftLabel::FAKE,
            0.25,
        )
        .unwrap();
        assert!(m.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn mixup_crops_to_shorter() {
        let (m, _) = mixup(
            &ramp(30, 0.0),
            &ramp(12, 0.0),
            SoftLabel::FAKE,
            SoftLabel::FAKE,
            0.3,
        )
        .unwrap();
        assert_eq!(m.n_frames(), 12);
        let short = MelSpectrogram {
            values: Array2::zeros((64, 12)),
            config: FrontendConfig::default(),
        };
        assert!(mixup(
            &ramp(12, 0.0),
            &short,
            SoftLabel::FAKE,
            SoftLabel::FAKE,
            0.3
        )
        .is_err());
    }

    #[test]
    fn beta_lambda_mean_and_determinism() {
        let policy = AugmentPolicy::default();
        let mut r = Rng::seed_from_u64(11);
        let draws: Vec<f64> = (0..10_000)
            .map(|_| sample_mixup_lambda(&policy, &mut r))
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 0.5).abs() <= 0.02, "mean {mean}");
        assert!(draws.iter().all(|l| (0.0..=1.0).contains(l)));
        let mut r2 = Rng::seed_from_u64(11);
        let again: Vec<f64> = (0..10_000)
            .map(|_| sample_mixup_lambda(&policy, &mut r2))
            .collect();
        assert_eq!(draws, again);
    }

    #[test]
    fn zero_width_masks_are_identity() {
        let s = ramp(50, 0.0);
        assert_eq!(apply_masks(&s, 0..0, 0..0), s);
        let policy = AugmentPolicy {
            specaug_max_time: 0,
            specaug_max_freq: 0,
            ..AugmentPolicy::default()
        };
        let mut r = Rng::seed_from_u64(1);
        assert_eq!(spec_augment(&s, &policy, &mut r), s);
    }

    #[test]
    fn frequency_mask_rows() {
        let s = ramp(40, 2.0);
        let mean = s.mean();
        let m = apply_masks(&s, 0..0, 10..20);
        for f in 10..20 {
            assert!(m.values.row(f).iter().all(|&v| v == mean));
        }
        assert_eq!(m.values.row(9), s.values.row(9));
        assert_eq!(m.values.row(20), s.values.row(20));
    }

    #[test]
    fn time_mask_bounded_by_clip_length() {
        let policy = AugmentPolicy::default();
        let mut r = Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let (time, freq) = draw_masks(128, 70, &policy, &mut r);
            assert!(time.len() <= 70 && time.end <= 70);
            assert!(freq.len() <= 48 && freq.end <= 128);
        }
    }

    #[test]
    fn bandpass_passes_and_stops() {
        let pass = tone(440.0, 1.0);
        let out = bandpass(&pass, 300.0, 3400.0).unwrap();
        let ratio_db = 20.0 * (out.rms() / pass.rms()).log10();
        assert!(ratio_db.abs() <= 3.0, "pass-band change {ratio_db} dB");

        let stop = tone(6000.0, 1.0);
        let out = bandpass(&stop, 300.0, 3400.0).unwrap();
        let att = to_db(
            peak_power_near(stop.samples(), 16000, 6000.0, 20.0)
                / peak_power_near(out.samples(), 16000, 6000.0, 20.0),
        );
        assert!(att >= 20.0, "stop-band attenuation {att} dB");
    }

    #[test]
    fn bandpass_wide_band_keeps_mid_spectrum() {
        let x = noise(2.0, 3);
        let y = bandpass(&x, 1.0, 7999.0).unwrap();
        for (lo, hi) in [(1000.0, 2000.0), (3000.0, 4000.0), (5000.0, 6000.0)] {
            let r = to_db(
                band_power(y.samples(), 16000, lo, hi) / band_power(x.samples(), 16000, lo, hi),
            );
            assert!(r.abs() < 1.0, "band {lo}-{hi}: {r} dB");
        }
    }

    #[test]
    fn bandpass_rejects_bad_band() {
        let x = tone(440.0, 0.1);
        assert!(matches!(
            bandpass(&x, 3000.0, 300.0),
            Err(Error::InvalidBand { .. })
        ));
        assert!(matches!(
            bandpass(&x, 0.0, 9000.0),
            Err(Error::InvalidBand { .. })
        ));
    }

    #[test]
    fn codec_cases() {
        let silence = AudioClip::new(vec![0.0; 1600], 16000).unwrap();
        assert_eq!(codec_sim(&silence, CodecKind::MuLaw8bit).unwrap(), silence);

        let t6k = tone(6000.0, 1.0);
        let out = codec_sim(&t6k, CodecKind::DownUp8k).unwrap();
        assert_eq!(out.len(), t6k.len());
        let att = to_db(t6k.rms().powi(2) / out.rms().powi(2));
        assert!(att >= 20.0, "6 kHz attenuation {att} dB");

        let x = noise(0.5, 9);
        let crushed = codec_sim(&x, CodecKind::Bitcrush6bit).unwrap();
        for (a, b) in x.samples().iter().zip(crushed.samples()) {
            assert!((a - b).abs() <= 1.0 / 64.0);
        }
        assert!("mp3".parse::<CodecKind>().is_err());
        assert_eq!(
            "down_up_8k".parse::<CodecKind>().unwrap(),
            CodecKind::DownUp8k
        );
    }

    #[test]
    fn waveform_augmentations_keep_length_and_range() {
        let x = noise(0.7, 4);
        let policy = AugmentPolicy::default();
        let mut r = Rng::seed_from_u64(2);
        for t in LowResTechnique::ALL {
            let y = apply_lowres(&x, t, &policy, &mut r).unwrap();
            assert!((y.len() as i64 - x.len() as i64).abs() <= 1);
            assert!(y.peak() <= 1.0);
        }
    }

    #[test]
    fn identity_policy_leaves_batch_unchanged() {
        let clips: Vec<AudioClip> = (0..4).map(|i| noise(0.3, i)).collect();
        let labels = vec![
            SoftLabel::FAKE,
            SoftLabel::BONAFIDE,
            SoftLabel::FAKE,
            SoftLabel::BONAFIDE,
        ];
        let ex = LogMelExtractor::new(&FrontendConfig::default(), 16000).unwrap();
        let policy = AugmentPolicy {
            mixup: MixupMode::Fixed { lambda: 1.0 },
            ..AugmentPolicy::none()
        };
        let out = apply_policy(&clips, &labels, &ex, &policy).unwrap();
        for ((s, l), (clip, label)) in out.iter().zip(clips.iter().zip(&labels)) {
            assert_eq!(s, &ex.compute(clip).unwrap());
            assert_eq!(l, label);
        }
    }

    #[test]
    fn selection_counts_and_determinism() {
        for seed in 0..5 {
            let policy = AugmentPolicy {
                rng_seed: seed,
                ..AugmentPolicy::default()
            };
            let sel = lowres_selection(1000, &policy);
            assert_eq!(sel.len(), 4);
            for (_, chosen) in &sel {
                assert!((chosen.len() as i64 - 100).abs() <= 20);
            }
            assert_eq!(sel, lowres_selection(1000, &policy));
        }
    }

    #[test]
    fn policy_runs_are_reproducible() {
        let clips: Vec<AudioClip> = (0..6).map(|i| noise(0.4, 10 + i)).collect();
        let labels = vec![SoftLabel::FAKE; 6];
        let ex = LogMelExtractor::new(&FrontendConfig::default(), 16000).unwrap();
        let policy = AugmentPolicy {
            lowres_fraction: 0.5,
            rng_seed: 77,
            ..AugmentPolicy::default()
        };
        let a = apply_policy(&clips, &labels, &ex, &policy).unwrap();
        let b = apply_policy(&clips, &labels, &ex, &policy).unwrap();
        assert_eq!(a, b);
    }
}
