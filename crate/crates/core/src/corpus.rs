//! Deterministic synthetic corpus: voice-like bonafide clips and three
//! artificial fake families, each derived from the bonafide clip of the same
//! seed so that only the artifact separates the classes.
//!
//! * `A_comb`: feed-forward comb `y[n] = x[n] - 0.9 x[n-32]`, notches every
//!   500 Hz.
//! * `B_bandlimit`: 8-bit quantization followed by an 8th-order Butterworth
//!   low-pass at 3.4 kHz.
//! * `C_vocoder_buzz`: 20 ms frames reduced to a smoothed spectral envelope,
//!   resynthesized with zero phase every 10 ms and overlap-added, which
//!   imposes a 100 Hz pulse train; a 0.95 pre-emphasis then flattens the
//!   excitation tilt the way an impulse-driven vocoder does.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::{write_wav, AudioClip, CANONICAL_RATE};
use crate::dsp::{butterworth_qs, cascade, Biquad};
use crate::error::{Error, Result};
use crate::metrics::Label;
use crate::rng;

pub const MIN_DURATION: f64 = 0.5;
pub const MAX_DURATION: f64 = 10.0;

pub const COMB_DELAY: usize = 32;
pub const COMB_GAIN: f64 = 0.9;
pub const BANDLIMIT_CUTOFF: f64 = 3400.0;
pub const BANDLIMIT_ORDER: usize = 8;
pub const BANDLIMIT_BITS: u32 = 8;
pub const VOCODER_FRAME: usize = 320;
pub const VOCODER_HOP: usize = 160;
/// Width (bins) of the moving average that reduces each frame to its envelope.
pub const VOCODER_SMOOTH: usize = 9;
/// First-order pre-emphasis standing in for the flat pulse excitation.
pub const VOCODER_EMPHASIS: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FakeSystem {
    #[serde(rename = "A_comb")]
    Comb,
    #[serde(rename = "B_bandlimit")]
    Bandlimit,
    #[serde(rename = "C_vocoder_buzz")]
    VocoderBuzz,
}

impl FakeSystem {
    pub const ALL: [FakeSystem; 3] = [
        FakeSystem::Comb,
        FakeSystem::Bandlimit,
        FakeSystem::VocoderBuzz,
    ];

    pub fn id(self) -> &'static str {
        match self {
            FakeSystem::Comb => "A_comb",
            FakeSystem::Bandlimit => "B_bandlimit",
            FakeSystem::VocoderBuzz => "C_vocoder_buzz",
        }
    }
}

impl fmt::Display for FakeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for FakeSystem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A_comb" | "A" => Ok(FakeSystem::Comb),
            "B_bandlimit" | "B" => Ok(FakeSystem::Bandlimit),
            "C_vocoder_buzz" | "C" => Ok(FakeSystem::VocoderBuzz),
            other => Err(Error::UnknownSystem(other.to_string())),
        }
    }
}

fn check_duration(duration_s: f64) -> Result<usize> {
    if !(MIN_DURATION..=MAX_DURATION).contains(&duration_s) {
        return Err(Error::InvalidConfig(format!(
            "duration {duration_s} s outside [{MIN_DURATION}, {MAX_DURATION}]"
        )));
    }
    Ok((duration_s * f64::from(CANONICAL_RATE)).round() as usize)
}

fn poly_blep(t: f64, dt: f64) -> f64 {
    if t < dt {
        let t = t / dt;
        2.0 * t - t * t - 1.0
    } else if t > 1.0 - dt {
        let t = (t - 1.0) / dt;
        t * t + 2.0 * t + 1.0
    } else {
        0.0
    }
}

/// Scale so the peak magnitude equals `peak` (silence stays silent).
fn normalize_peak(x: &mut [f64], peak: f64) {
    let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m > 0.0 {
        let k = peak / m;
        x.iter_mut().for_each(|v| *v *= k);
    }
}

/// Voice-like clip: band-limited sawtooth with a wandering F0 in 80-300 Hz,
/// vibrato, three formant resonances, a syllabic envelope and a breath-noise
/// floor. Peak-normalized below 0.99.
pub fn gen_bonafide(seed: u64, duration_s: f64) -> Result<AudioClip> {
    let n = check_duration(duration_s)?;
    let sr = f64::from(CANONICAL_RATE);
    let mut r = rng::stream(seed, "bonafide", 0);
    let gauss = Normal::new(0.0, 1.0).expect("unit normal");

    // F0 contour at a 100 Hz control rate: declining base, mean-reverting
    // log-drift, sinusoidal vibrato.
    let f0_base: f64 = r.random_range(100.0..240.0);
    let slope: f64 = r.random_range(-0.15..0.05);
    let vib_rate: f64 = r.random_range(4.0..6.5);
    let vib_depth: f64 = r.random_range(0.005..0.02);
    let vib_phase: f64 = r.random_range(0.0..2.0 * PI);
    let n_ctrl = n / 160 + 2;
    let mut drift: f64 = 0.0;
    let contour: Vec<f64> = (0..n_ctrl)
        .map(|k| {
            drift = 0.97 * drift + 0.01 * gauss.sample(&mut r);
            let t = k as f64 / 100.0;
            let f = f0_base
                * (1.0 + slope * t / duration_s)
                * drift.exp()
                * (1.0 + vib_depth * (2.0 * PI * vib_rate * t + vib_phase).sin());
            f.clamp(80.0, 300.0)
        })
        .collect();

    let mut phase: f64 = r.random_range(0.0..1.0);
    let source: Vec<f64> = (0..n)
        .map(|i| {
            let pos = i as f64 / 160.0;
            let k = pos.floor() as usize;
            let frac = pos - k as f64;
            let f0 = contour[k] * (1.0 - frac) + contour[k + 1] * frac;
            let dt = f0 / sr;
            let v = 2.0 * phase - 1.0 - poly_blep(phase, dt);
            phase += dt;
            if phase >= 1.0 {
                phase -= 1.0;
            }
            v
        })
        .collect();

    let formants = [
        (r.random_range(300.0..900.0), 90.0, 1.0),
        (r.random_range(900.0..2400.0), 130.0, 0.5),
        (r.random_range(2300.0..3500.0), 200.0, 0.25),
    ];
    let mut voiced = vec![0.0; n];
    for (freq, bw, gain) in formants {
        for (o, v) in voiced
            .iter_mut()
            .zip(Biquad::resonator(freq, bw, sr).process(&source))
        {
            *o += gain * v;
        }
    }

    // Syllables: raised-sine bumps separated by short pauses.
    let mut env = vec![0.0; n];
    let mut t = (r.random_range(0.0..0.08) * sr) as usize;
    while t < n {
        let len = (r.random_range(0.12..0.30) * sr) as usize;
        let amp: f64 = r.random_range(0.6..1.0);
        for j in 0..len.min(n - t) {
            env[t + j] = amp * (PI * j as f64 / len as f64).sin().powf(0.7);
        }
        t += len + (r.random_range(0.02..0.12) * sr) as usize;
    }

    let voiced_rms = (voiced
        .iter()
        .zip(&env)
        .map(|(v, e)| (v * e).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt()
        .max(1e-6);
    let breath = voiced_rms * r.random_range(0.03..0.08);
    let mut x: Vec<f64> = voiced
        .iter()
        .zip(&env)
        .map(|(v, e)| v * e + breath * (0.5 + e) * gauss.sample(&mut r))
        .collect();
    normalize_peak(&mut x, r.random_range(0.5..0.95));
    AudioClip::new(x, CANONICAL_RATE)
}

fn comb(x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            x[i] - if i >= COMB_DELAY {
                COMB_GAIN * x[i - COMB_DELAY]
            } else {
                0.0
            }
        })
        .collect()
}

fn bandlimit(x: &[f64]) -> Vec<f64> {
    let half = f64::from(1u32 << (BANDLIMIT_BITS - 1));
    let quantized: Vec<f64> = x
        .iter()
        .map(|&v| (v * half).round().clamp(-half, half - 1.0) / half)
        .collect();
    let sections: Vec<Biquad> = butterworth_qs(BANDLIMIT_ORDER)
        .into_iter()
        .map(|q| Biquad::lowpass(BANDLIMIT_CUTOFF, q, f64::from(CANONICAL_RATE)))
        .collect();
    cascade(&sections, &quantized)
}

fn vocoder_buzz(x: &[f64]) -> Vec<f64> {
    let (frame, hop) = (VOCODER_FRAME, VOCODER_HOP);
    let window: Vec<f64> = (0..frame)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / frame as f64).cos())
        .collect();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(frame);
    let inv = planner.plan_fft_inverse(frame);
    let padded: Vec<f64> = std::iter::repeat_n(0.0, hop)
        .chain(x.iter().copied())
        .chain(std::iter::repeat_n(0.0, frame))
        .collect();
    let mut out = vec![0.0; padded.len()];
    let mut buf = vec![Complex::new(0.0, 0.0); frame];
    let mut start = 0;
    while start + frame <= padded.len() {
        for i in 0..frame {
            buf[i] = Complex::new(padded[start + i] * window[i], 0.0);
        }
        fwd.process(&mut buf);
        // Envelope only, zero phase: every frame becomes a centred pulse.
        let mag: Vec<f64> = buf.iter().map(|c| c.norm()).collect();
        let half = VOCODER_SMOOTH / 2;
        for (k, c) in buf.iter_mut().enumerate() {
            let sum: f64 = (0..VOCODER_SMOOTH)
                .map(|d| mag[(k + frame + d - half) % frame])
                .sum();
            *c = Complex::new(sum / VOCODER_SMOOTH as f64, 0.0);
        }
        inv.process(&mut buf);
        for i in 0..frame {
            let centred = buf[(i + frame / 2) % frame].re / frame as f64;
            out[start + i] += centred * window[i];
        }
        start += hop;
    }
    let mut y = out[hop..hop + x.len()].to_vec();
    for i in (1..y.len()).rev() {
        y[i] -= VOCODER_EMPHASIS * y[i - 1];
    }
    y
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt()
}

/// Apply a family's artifact to an existing clip, matching its RMS level
/// (peak kept at or below 0.99).
pub fn apply_artifact(system: FakeSystem, clip: &AudioClip) -> AudioClip {
    let x = clip.samples();
    let mut y = match system {
        FakeSystem::Comb => comb(x),
        FakeSystem::Bandlimit => bandlimit(x),
        FakeSystem::VocoderBuzz => vocoder_buzz(x),
    };
    let (r_in, r_out) = (rms(x), rms(&y));
    if r_out > 0.0 {
        let k = r_in / r_out;
        y.iter_mut().for_each(|v| *v *= k);
    }
    let peak = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.99 {
        normalize_peak(&mut y, 0.99);
    }
    clip.with_samples(y)
}

/// The bonafide clip of `seed` passed through `system`'s artifact.
pub fn gen_fake(system: FakeSystem, seed: u64, duration_s: f64) -> Result<AudioClip> {
    Ok(apply_artifact(system, &gen_bonafide(seed, duration_s)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Pool,
    Eval,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Pool => "pool",
            Split::Eval => "eval",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "pool" => Ok(Split::Pool),
            "eval" => Ok(Split::Eval),
            other => Err(Error::InvalidConfig(format!("unknown split `{other}`"))),
        }
    }
}

/// Clip counts for one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitCounts {
    pub split: Split,
    pub bonafide: usize,
    #[serde(default)]
    pub fakes: BTreeMap<FakeSystem, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    pub out_dir: PathBuf,
    pub seed: u64,
    #[serde(default = "default_durations")]
    pub duration_range: [f64; 2],
    pub splits: Vec<SplitCounts>,
}

fn default_durations() -> [f64; 2] {
    [1.0, 4.0]
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.duration_range;
        if !(MIN_DURATION..=MAX_DURATION).contains(&lo) || !(lo..=MAX_DURATION).contains(&hi) {
            return Err(Error::InvalidConfig(format!(
                "duration_range [{lo}, {hi}] must lie within [{MIN_DURATION}, {MAX_DURATION}]"
            )));
        }
        let mut seen = Vec::new();
        for s in &self.splits {
            if seen.contains(&s.split) {
                return Err(Error::InvalidConfig(format!(
                    "split {} listed twice",
                    s.split
                )));
            }
            seen.push(s.split);
        }
        if self
            .splits
            .iter()
            .all(|s| s.bonafide + s.fakes.values().sum::<usize>() == 0)
        {
            return Err(Error::InvalidConfig("corpus spec requests no clips".into()));
        }
        Ok(())
    }
}

/// One planned clip; [`render`](CorpusItem::render) synthesizes it.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusItem {
    pub id: String,
    pub split: Split,
    pub system: Option<FakeSystem>,
    pub seed: u64,
    pub duration: f64,
}

impl CorpusItem {
    pub fn label(&self) -> Label {
        if self.system.is_some() {
            Label::Fake
        } else {
            Label::Bonafide
        }
    }

    pub fn system_id(&self) -> &'static str {
        self.system.map_or("bonafide", FakeSystem::id)
    }

    pub fn rel_path(&self) -> String {
        format!("{}/{}/{}.wav", self.split, self.system_id(), self.id)
    }

    pub fn render(&self) -> Result<AudioClip> {
        match self.system {
            None => gen_bonafide(self.seed, self.duration),
            Some(s) => gen_fake(s, self.seed, self.duration),
        }
    }
}

/// Every clip a `CorpusSpec` describes, in a fixed order, with derived seeds and
/// durations.
pub fn plan(spec: &CorpusSpec) -> Result<Vec<CorpusItem>> {
    spec.validate()?;
    let [lo, hi] = spec.duration_range;
    let mut items = Vec::new();
    for counts in &spec.splits {
        let groups = std::iter::once((None, counts.bonafide))
            .chain(counts.fakes.iter().map(|(&s, &c)| (Some(s), c)));
        for (system, count) in groups {
            for k in 0..count {
                let index = items.len() as u64;
                let seed = rng::derive_seed(spec.seed, "item", index);
                let mut r = rng::stream(spec.seed, "duration", index);
                let duration = if hi > lo { r.random_range(lo..=hi) } else { lo };
                let system_id = system.map_or("bonafide", FakeSystem::id);
                items.push(CorpusItem {
                    id: format!("{}_{}_{k:05}", counts.split, system_id),
                    split: counts.split,
                    system,
                    seed,
                    duration: (duration * 100.0).round() / 100.0,
                });
            }
        }
    }
    Ok(items)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub label: Label,
    /// `bonafide` or a fake family id.
    pub system: String,
    pub split: Split,
}

/// JSONL manifest: one entry per line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

pub const MANIFEST_NAME: &str = "manifest.jsonl";

impl Manifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let reader = BufReader::new(fs::File::open(path)?);
        let mut entries = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry = serde_json::from_str(&line).map_err(|e| {
                Error::InvalidConfig(format!("{} line {}: {e}", path.display(), n + 1))
            })?;
            entries.push(entry);
        }
        Ok(Self {
            root: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            entries,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let unwritable = |source| Error::Unwritable {
            path: path.to_path_buf(),
            source,
        };
        let mut f = fs::File::create(path).map_err(unwritable)?;
        for e in &self.entries {
            writeln!(f, "{}", serde_json::to_string(e)?).map_err(unwritable)?;
        }
        Ok(())
    }

    pub fn split(&self, split: Split) -> Vec<&ManifestEntry> {
        self.entries.iter().filter(|e| e.split == split).collect()
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }
}

/// Render every planned clip to `out_dir` as 16 kHz PCM16 WAV and write
/// `manifest.jsonl` next to them.
pub fn make_dataset(spec: &CorpusSpec) -> Result<Manifest> {
    let items = plan(spec)?;
    let out = &spec.out_dir;
    fs::create_dir_all(out).map_err(|source| Error::Unwritable {
        path: out.clone(),
        source,
    })?;
    let mut dirs: Vec<PathBuf> = items
        .iter()
        .map(|i| {
            out.join(i.rel_path())
                .parent()
                .expect("nested path")
                .to_path_buf()
        })
        .collect();
    dirs.dedup();
    for d in &dirs {
        fs::create_dir_all(d).map_err(|source| Error::Unwritable {
            path: d.clone(),
            source,
        })?;
    }
    items
        .par_iter()
        .map(|item| write_wav(&item.render()?, out.join(item.rel_path())))
        .collect::<Result<Vec<()>>>()?;
    let manifest = Manifest {
        root: out.clone(),
        entries: items
            .iter()
            .map(|i| ManifestEntry {
                path: i.rel_path(),
                label: i.label(),
                system: i.system_id().to_string(),
                split: i.split,
            })
            .collect(),
    };
    manifest.write(out.join(MANIFEST_NAME))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{band_power, power_spectrum, to_db};

    fn centroid(x: &[f64]) -> f64 {
        let spec = power_spectrum(x, true);
        let hz = f64::from(CANONICAL_RATE) / (2 * (spec.len() - 1)) as f64;
        let total: f64 = spec.iter().sum();
        spec.iter()
            .enumerate()
            .map(|(k, p)| k as f64 * hz * p)
            .sum::<f64>()
            / total
    }

    #[test]
    fn bonafide_is_deterministic_and_bounded() {
        let a = gen_bonafide(3, 1.5).unwrap();
        assert_eq!(a, gen_bonafide(3, 1.5).unwrap());
        assert_ne!(a, gen_bonafide(4, 1.5).unwrap());
        assert_eq!(a.len(), 24000);
        assert!(a.peak() <= 0.99);
    }

    #[test]
    fn bonafide_centroid_in_voice_range() {
        for seed in 0..100 {
            let c = centroid(gen_bonafide(seed, 1.0).unwrap().samples());
            assert!(c > 200.0 && c < 4000.0, "seed {seed}: centroid {c}");
        }
    }

    #[test]
    fn bandlimit_removes_high_band() {
        for seed in 0..10 {
            let bona = gen_bonafide(seed, 1.0).unwrap();
            let fake = gen_fake(FakeSystem::Bandlimit, seed, 1.0).unwrap();
            let ratio = band_power(fake.samples(), CANONICAL_RATE, 4000.0, 8001.0)
                / band_power(bona.samples(), CANONICAL_RATE, 4000.0, 8001.0);
            assert!(to_db(ratio) <= -20.0, "seed {seed}: {} dB", to_db(ratio));
        }
    }

    #[test]
    fn comb_leaves_cepstral_peak_at_delay() {
        // Real cepstrum of the long-term log spectrum.
        for seed in 0..5 {
            let x = gen_fake(FakeSystem::Comb, seed, 2.0).unwrap();
            let spec = power_spectrum(x.samples(), true);
            let n = 2 * (spec.len() - 1);
            let mut buf: Vec<Complex<f64>> = (0..n)
                .map(|k| {
                    let p = spec[if k <= n / 2 { k } else { n - k }];
                    Complex::new((p + 1e-12).ln(), 0.0)
                })
                .collect();
            FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
            let ceps: Vec<f64> = buf.iter().map(|c| c.re.abs()).collect();
            let at = ceps[COMB_DELAY];
            let neighbourhood = (20usize..45)
                .filter(|&q| q.abs_diff(COMB_DELAY) > 2)
                .map(|q| ceps[q]);
            let max_other = neighbourhood.fold(0.0, f64::max);
            assert!(at > 3.0 * max_other, "seed {seed}: {at} vs {max_other}");
        }
    }

    #[test]
    fn vocoder_buzz_adds_frame_rate_periodicity() {
        let x = gen_fake(FakeSystem::VocoderBuzz, 1, 2.0).unwrap();
        // Autocorrelation at the hop lag dominates nearby lags.
        let s = x.samples();
        let ac = |lag: usize| s.iter().zip(&s[lag..]).map(|(a, b)| a * b).sum::<f64>();
        let at_hop = ac(VOCODER_HOP);
        assert!(at_hop > 0.0);
        assert!(at_hop > ac(VOCODER_HOP - 40).abs());
        assert!(at_hop > ac(VOCODER_HOP + 40).abs());
    }

    #[test]
    fn vocoder_buzz_brightens_spectrum() {
        use crate::dsp::band_power;
        for seed in 0..5 {
            let b = gen_bonafide(seed, 1.0).unwrap();
            let c = apply_artifact(FakeSystem::VocoderBuzz, &b);
            let tilt = |x: &AudioClip| {
                band_power(x.samples(), 16000, 4000.0, 8000.0)
                    / band_power(x.samples(), 16000, 0.0, 1000.0)
            };
            assert!(tilt(&c) > 10.0 * tilt(&b), "seed {seed}");
        }
    }

    #[test]
    fn fakes_deterministic_and_bounded() {
        for s in FakeSystem::ALL {
            let a = gen_fake(s, 9, 1.0).unwrap();
            assert_eq!(a, gen_fake(s, 9, 1.0).unwrap());
            assert!(a.peak() <= 0.99 + 1e-12);
            assert_eq!(a.len(), 16000);
            assert!(a.samples().iter().all(|v| v.is_finite()));
        }
        assert!(matches!(
            "Z_other".parse::<FakeSystem>(),
            Err(Error::UnknownSystem(_))
        ));
        assert!(gen_bonafide(0, 0.2).is_err());
    }

    #[test]
    fn dataset_layout_and_regeneration() {
        let dir = tempfile::tempdir().unwrap();
        let spec = CorpusSpec {
            out_dir: dir.path().join("c"),
            seed: 5,
            duration_range: [0.5, 0.7],
            splits: vec![
                SplitCounts {
                    split: Split::Train,
                    bonafide: 3,
                    fakes: [(FakeSystem::Comb, 3)].into(),
                },
                SplitCounts {
                    split: Split::Eval,
                    bonafide: 1,
                    fakes: [(FakeSystem::VocoderBuzz, 2)].into(),
                },
            ],
        };
        let m = make_dataset(&spec).unwrap();
        assert_eq!(m.entries.len(), 9);
        let read = Manifest::read(spec.out_dir.join(MANIFEST_NAME)).unwrap();
        assert_eq!(read.entries, m.entries);
        for e in &m.entries {
            assert!(m.resolve(e).exists());
        }
        let train: Vec<_> = m
            .split(Split::Train)
            .iter()
            .map(|e| e.path.clone())
            .collect();
        assert!(m
            .split(Split::Eval)
            .iter()
            .all(|e| !train.contains(&e.path)));

        let bytes = fs::read(m.resolve(&m.entries[4])).unwrap();
        let manifest_bytes = fs::read(spec.out_dir.join(MANIFEST_NAME)).unwrap();
        make_dataset(&spec).unwrap();
        assert_eq!(fs::read(m.resolve(&m.entries[4])).unwrap(), bytes);
        assert_eq!(
            fs::read(spec.out_dir.join(MANIFEST_NAME)).unwrap(),
            manifest_bytes
        );
    }

    #[test]
    fn spec_rejects_bad_durations() {
        let spec = CorpusSpec {
            out_dir: "x".into(),
            seed: 0,
            duration_range: [0.1, 2.0],
            splits: vec![],
        };
        assert!(spec.validate().is_err());
    }
}
