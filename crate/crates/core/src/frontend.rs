//! Log-mel filterbank frontend.
//!
//! A clip of `t` seconds becomes an `n_mels x round(100 t)` matrix of natural-log
//! mel energies: Hamming-windowed STFT (25 ms window, 10 ms hop, reflect
//! centering), power spectrum, 128 triangular HTK-mel filters, floor, log.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrontendConfig {
    pub win_ms: f64,
    pub hop_ms: f64,
    pub n_mels: usize,
    pub n_fft: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub log_floor: f64,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            win_ms: 25.0,
            hop_ms: 10.0,
            n_mels: 128,
            n_fft: 512,
            fmin: 0.0,
            fmax: 8000.0,
            log_floor: 1e-10,
        }
    }
}

impl FrontendConfig {
    pub fn win_length(&self, sample_rate: u32) -> usize {
        (self.win_ms * f64::from(sample_rate) / 1000.0).round() as usize
    }

    pub fn hop_length(&self, sample_rate: u32) -> usize {
        (self.hop_ms * f64::from(sample_rate) / 1000.0).round() as usize
    }

    pub fn frame_rate(&self) -> f64 {
        1000.0 / self.hop_ms
    }

    /// `ln(log_floor)`, the smallest value a spectrogram can hold.
    pub fn log_floor_value(&self) -> f64 {
        self.log_floor.ln()
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.hop_ms > 0.0 && self.win_ms > self.hop_ms) {
            return bad(format!(
                "need win_ms > hop_ms > 0, got {} / {}",
                self.win_ms, self.hop_ms
            ));
        }
        if self.n_mels == 0 {
            return bad("n_mels must be positive".into());
        }
        let win = self.win_length(sample_rate);
        if self.n_fft < win {
            return bad(format!("n_fft {} shorter than window {win}", self.n_fft));
        }
        let nyquist = f64::from(sample_rate) / 2.0;
        if !(self.fmin >= 0.0 && self.fmin < self.fmax) {
            return bad(format!(
                "need 0 <= fmin < fmax, got {} / {}",
                self.fmin, self.fmax
            ));
        }
        if self.fmax > nyquist {
            return bad(format!("fmax {} beyond Nyquist {nyquist}", self.fmax));
        }
        if !(self.log_floor > 0.0) {
            return bad("log_floor must be positive".into());
        }
        Ok(())
    }
}

/// Log-mel energies, `n_mels` rows by `n_frames` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub values: Array2<f64>,
    pub config: FrontendConfig,
}

impl MelSpectrogram {
    pub fn n_mels(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_frames(&self) -> usize {
        self.values.ncols()
    }

    pub fn mean(&self) -> f64 {
        self.values.mean().unwrap_or(0.0)
    }

    /// Copy of the first `n` frames.
    pub fn cropped(&self, n: usize) -> Self {
        Self {
            values: self
                .values
                .slice(ndarray::s![.., ..n.min(self.n_frames())])
                .to_owned(),
            config: self.config.clone(),
        }
    }

    /// Write as a little-endian tensor file: `u32` rank, `u64` dims, then
    /// row-major `f64` values.
    pub fn write_tensor(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = Vec::with_capacity(20 + 8 * self.values.len());
        out.extend_from_slice(&2u32.to_le_bytes());
        out.extend_from_slice(&(self.n_mels() as u64).to_le_bytes());
        out.extend_from_slice(&(self.n_frames() as u64).to_le_bytes());
        for v in self.values.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::File::create(path)?.write_all(&out)?;
        Ok(())
    }
}

/// HTK mel scale.
pub fn mel_scale(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn inverse_mel_scale(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filterbank, `n_mels x (n_fft/2 + 1)`.
///
/// Centers are equally spaced in mel between `fmin` and `fmax`. Filters whose
/// mel-derived half-width is narrower than one FFT bin are widened to one bin
/// on each side so that no filter is empty.
pub fn mel_filterbank(config: &FrontendConfig, sample_rate: u32) -> Result<Array2<f64>> {
    config.validate(sample_rate)?;
    let n_bins = config.n_fft / 2 + 1;
    let bin_hz = f64::from(sample_rate) / config.n_fft as f64;
    let (mlo, mhi) = (mel_scale(config.fmin), mel_scale(config.fmax));
    let points: Vec<f64> = (0..config.n_mels + 2)
        .map(|i| inverse_mel_scale(mlo + (mhi - mlo) * i as f64 / (config.n_mels + 1) as f64))
        .collect();

    let mut bank = Array2::zeros((config.n_mels, n_bins));
    for m in 0..config.n_mels {
        let center = points[m + 1];
        let lower = points[m].min(center - bin_hz);
        let upper = points[m + 2].max(center + bin_hz);
        for k in 0..n_bins {
            let f = k as f64 * bin_hz;
            let w = if f > lower && f <= center {
                (f - lower) / (center - lower)
            } else if f > center && f < upper {
                (upper - f) / (upper - center)
            } else {
                0.0
            };
            bank[[m, k]] = w;
        }
    }
    Ok(bank)
}

/// Center frequency (Hz) of every filter in the bank.
pub fn filter_centers(config: &FrontendConfig) -> Vec<f64> {
    let (mlo, mhi) = (mel_scale(config.fmin), mel_scale(config.fmax));
    (1..=config.n_mels)
        .map(|i| inverse_mel_scale(mlo + (mhi - mlo) * i as f64 / (config.n_mels + 1) as f64))
        .collect()
}

fn reflect_index(i: i64, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as i64 - 1);
    let m = i.rem_euclid(period);
    if m >= n as i64 {
        (period - m) as usize
    } else {
        m as usize
    }
}

/// Number of frames for `len` samples: `round(len / hop)`, at least one.
pub fn frame_count(len: usize, hop: usize) -> usize {
    ((len + hop / 2) / hop).max(1)
}

/// Reusable analysis state: filterbank (as sparse rows), window and FFT plan.
pub struct LogMelExtractor {
    config: FrontendConfig,
    sample_rate: u32,
    window: Vec<f64>,
    hop: usize,
    filters: Vec<(usize, Vec<f64>)>,
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl LogMelExtractor {
    pub fn new(config: &FrontendConfig, sample_rate: u32) -> Result<Self> {
        let bank = mel_filterbank(config, sample_rate)?;
        let win = config.win_length(sample_rate);
        let window = (0..win)
            .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / (win - 1) as f64).cos())
            .collect();
        let filters = bank
            .rows()
            .into_iter()
            .map(|row| {
                let first = row.iter().position(|&w| w > 0.0).unwrap_or(0);
                let last = row.iter().rposition(|&w| w > 0.0).unwrap_or(0);
                (
                    first,
                    row.iter()
                        .skip(first)
                        .take(last + 1 - first)
                        .copied()
                        .collect(),
                )
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            sample_rate,
            window,
            hop: config.hop_length(sample_rate),
            filters,
            fft: FftPlanner::new().plan_fft_forward(config.n_fft),
        })
    }

    pub fn compute(&self, clip: &AudioClip) -> Result<MelSpectrogram> {
        if clip.is_empty() {
            return Err(Error::EmptyClip);
        }
        if clip.sample_rate() != self.sample_rate {
            return Err(Error::InvalidConfig(format!(
                "clip sampled at {} Hz, frontend expects {} Hz",
                clip.sample_rate(),
                self.sample_rate
            )));
        }
        let x = clip.samples();
        let win = self.window.len();
        let pad = (win / 2) as i64;
        let n_frames = frame_count(x.len(), self.hop);
        let n_fft = self.config.n_fft;
        let floor = self.config.log_floor;

        let mut values = Array2::zeros((self.config.n_mels, n_frames));
        let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut power = vec![0.0; n_fft / 2 + 1];
        for t in 0..n_frames {
            let start = (t * self.hop) as i64 - pad;
            for (i, slot) in buf.iter_mut().enumerate() {
                *slot = if i < win {
                    let v = x[reflect_index(start + i as i64, x.len())];
                    Complex::new(v * self.window[i], 0.0)
                } else {
                    Complex::new(0.0, 0.0)
                };
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (p, c) in power.iter_mut().zip(&buf) {
                *p = c.norm_sqr();
            }
            for (m, (first, weights)) in self.filters.iter().enumerate() {
                let e: f64 = weights
                    .iter()
                    .zip(&power[*first..])
                    .map(|(w, p)| w * p)
                    .sum();
                values[[m, t]] = e.max(floor).ln();
            }
        }
        Ok(MelSpectrogram {
            values,
            config: self.config.clone(),
        })
    }
}

/// Convenience wrapper building a one-off extractor.
pub fn compute_logmel(clip: &AudioClip, config: &FrontendConfig) -> Result<MelSpectrogram> {
    LogMelExtractor::new(config, clip.sample_rate())?.compute(clip)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(freq: f64, seconds: f64, amp: f64) -> AudioClip {
        let n = (16000.0 * seconds).round() as usize;
        AudioClip::new(
            (0..n)
                .map(|i| amp * (2.0 * PI * freq * i as f64 / 16000.0).sin())
                .collect(),
            16000,
        )
        .unwrap()
    }

    #[test]
    fn mel_scale_values() {
        assert_eq!(mel_scale(0.0), 0.0);
        assert!((mel_scale(700.0) - 2595.0 * 2f64.log10()).abs() < 1e-9);
        assert!((mel_scale(700.0) - 781.17).abs() < 0.01);
        for m in [100.0, 1000.0, 2500.0] {
            assert!((mel_scale(inverse_mel_scale(m)) - m).abs() <= 1e-9 * m);
        }
    }

    #[test]
    fn filterbank_rows_positive_unimodal() {
        let cfg = FrontendConfig::default();
        let bank = mel_filterbank(&cfg, 16000).unwrap();
        assert_eq!(bank.dim(), (128, 257));
        for row in bank.rows() {
            assert!(row.sum() > 0.0);
            assert!(row.iter().all(|&w| w >= 0.0));
            let peak = row
                .iter()
                .enumerate()
                .fold((0, -1.0), |b, (i, &w)| if w > b.1 { (i, w) } else { b })
                .0;
            for i in 1..=peak {
                assert!(row[i] >= row[i - 1]);
            }
            for i in peak + 1..row.len() {
                assert!(row[i] <= row[i - 1]);
            }
        }
    }

    #[test]
    fn bin_at_center_is_row_max() {
        // one filter whose center lands on bin 32 (1000 Hz at 31.25 Hz/bin)
        let cfg = FrontendConfig {
            n_mels: 1,
            fmax: inverse_mel_scale(2.0 * mel_scale(1000.0)),
            ..FrontendConfig::default()
        };
        assert!((filter_centers(&cfg)[0] - 1000.0).abs() < 1e-9);
        let bank = mel_filterbank(&cfg, 16000).unwrap();
        let row = bank.row(0);
        let max = row.iter().cloned().fold(0.0, f64::max);
        assert_eq!(row[32], max);
        assert!(row.iter().enumerate().all(|(k, &w)| k == 32 || w < max));
    }

    #[test]
    fn column_sums_positive_inside_band() {
        let cfg = FrontendConfig::default();
        let bank = mel_filterbank(&cfg, 16000).unwrap();
        for k in 1..256 {
            assert!(bank.column(k).sum() > 0.0, "bin {k}");
        }
    }

    #[test]
    fn fmax_beyond_nyquist_rejected() {
        let cfg = FrontendConfig {
            fmax: 9000.0,
            ..FrontendConfig::default()
        };
        assert!(matches!(
            mel_filterbank(&cfg, 16000),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn one_second_is_128_by_100() {
        let s = compute_logmel(&tone(440.0, 1.0, 0.5), &FrontendConfig::default()).unwrap();
        assert_eq!(s.values.dim(), (128, 100));
    }

    #[test]
    fn frame_count_law() {
        for t in [0.5, 1.0, 2.0, 3.17] {
            let s = compute_logmel(&tone(300.0, t, 0.3), &FrontendConfig::default()).unwrap();
            assert_eq!(s.n_frames(), (100.0 * t).round() as usize, "t = {t}");
        }
    }

    #[test]
    fn silence_hits_floor() {
        let clip = AudioClip::new(vec![0.0; 8000], 16000).unwrap();
        let cfg = FrontendConfig::default();
        let s = compute_logmel(&clip, &cfg).unwrap();
        assert!(s.values.iter().all(|&v| v == cfg.log_floor_value()));
    }

    #[test]
    fn tone_peaks_in_nearest_filter() {
        let cfg = FrontendConfig::default();
        let s = compute_logmel(&tone(440.0, 1.0, 0.5), &cfg).unwrap();
        let avg: Vec<f64> = s
            .values
            .rows()
            .into_iter()
            .map(|r| r.mean().unwrap())
            .collect();
        let argmax = avg
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
            .0;
        let nearest = filter_centers(&cfg)
            .iter()
            .enumerate()
            .fold((0, f64::MAX), |b, (i, &c)| {
                if (c - 440.0).abs() < b.1 {
                    (i, (c - 440.0).abs())
                } else {
                    b
                }
            })
            .0;
        assert_eq!(argmax, nearest);
    }

    #[test]
    fn louder_never_lower_and_deterministic() {
        let cfg = FrontendConfig::default();
        let quiet = tone(1234.0, 0.5, 0.2);
        let loud = quiet.with_samples(quiet.samples().iter().map(|s| 2.0 * s).collect());
        let a = compute_logmel(&quiet, &cfg).unwrap();
        let b = compute_logmel(&loud, &cfg).unwrap();
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            assert!(y >= x);
        }
        assert_eq!(a, compute_logmel(&quiet, &cfg).unwrap());
    }

    #[test]
    fn empty_and_tiny_clips() {
        let cfg = FrontendConfig::default();
        let empty = AudioClip::new(vec![], 16000).unwrap();
        assert!(matches!(
            compute_logmel(&empty, &cfg),
            Err(Error::EmptyClip)
        ));
        let tiny = AudioClip::new(vec![0.1, -0.2, 0.3], 16000).unwrap();
        let s = compute_logmel(&tiny, &cfg).unwrap();
        assert_eq!(s.n_frames(), 1);
        assert!(s.values.iter().all(|v| v.is_finite()));
    }
}
