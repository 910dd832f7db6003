//! Mono PCM audio: WAV reading and writing, and windowed-sinc resampling.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};

/// The sample rate every downstream stage assumes.
pub const CANONICAL_RATE: u32 = 16_000;

/// A mono waveform. Samples are doubles nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidSampleRate(sample_rate));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Same rate, new samples.
    pub fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            samples,
            sample_rate: self.sample_rate,
        }
    }

    /// Clamp every sample into `[-1, 1]`.
    pub fn clipped(mut self) -> Self {
        for s in &mut self.samples {
            *s = s.clamp(-1.0, 1.0);
        }
        self
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64).sqrt()
    }
}

/// Read a RIFF/WAVE file, downmixing stereo to mono and scaling integer PCM
/// into `[-1, 1]`.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let map_err = |e: hound::Error| match e {
        hound::Error::IoError(io) if io.kind() == std::io::ErrorKind::NotFound => {
            Error::MissingFile(path.to_path_buf())
        }
        hound::Error::IoError(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
            Error::MalformedHeader {
                path: path.to_path_buf(),
                reason: "unexpected end of file".into(),
            }
        }
        hound::Error::IoError(io) => Error::Io(io),
        hound::Error::FormatError(reason) => Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: reason.into(),
        },
        other => Error::UnsupportedCodec {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    };

    let reader = hound::WavReader::open(path).map_err(map_err)?;
    let spec = reader.spec();
    let channels = usize::from(spec.channels);
    if channels == 0 || channels > 2 {
        return Err(Error::UnsupportedCodec {
            path: path.to_path_buf(),
            reason: format!("{channels} channels (mono or stereo expected)"),
        });
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(map_err)?,
        (hound::SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) / scale))
                .collect::<Result<_, _>>()
                .map_err(map_err)?
        }
        (format, bits) => {
            return Err(Error::UnsupportedCodec {
                path: path.to_path_buf(),
                reason: format!("{format:?} with {bits} bits per sample"),
            })
        }
    };
    let samples = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(2)
            .map(|frame| 0.5 * (frame[0] + frame[1]))
            .collect()
    };
    AudioClip::new(samples, spec.sample_rate)
}

/// Write a clip as mono 16-bit PCM. Samples outside `[-1, 1]` are clamped.
pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if clip.is_empty() {
        return Err(Error::EmptyClip);
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let unwritable = |e: hound::Error| Error::Unwritable {
        path: path.to_path_buf(),
        source: match e {
            hound::Error::IoError(io) => io,
            other => std::io::Error::other(other.to_string()),
        },
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(unwritable)?;
    for &s in &clip.samples {
        writer.write_sample(pcm16(s)).map_err(unwritable)?;
    }
    writer.finalize().map_err(unwritable)
}

fn pcm16(s: f64) -> i16 {
    let s = if s.is_finite() {
        s.clamp(-1.0, 1.0)
    } else {
        0.0
    };
    (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Zero crossings of the resampling kernel on each side, measured at the lower
/// of the two rates (32 taps at that rate).
pub const RESAMPLE_ZERO_CROSSINGS: usize = 16;
/// Kernel cutoff as a fraction of the lower Nyquist frequency.
pub const RESAMPLE_CUTOFF: f64 = 0.9;

const MAX_CACHED_PHASES: u64 = 4096;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn blackman(x: f64) -> f64 {
    // x in [-1, 1], peak at 0
    let t = 0.5 * (x + 1.0);
    0.42 - 0.5 * (2.0 * PI * t).cos() + 0.08 * (4.0 * PI * t).cos()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

struct SincKernel {
    cutoff: f64,
    half_width: f64,
    reach: i64,
}

impl SincKernel {
    fn new(in_rate: u32, out_rate: u32) -> Self {
        let cutoff = RESAMPLE_CUTOFF * (f64::from(out_rate) / f64::from(in_rate)).min(1.0);
        let half_width = RESAMPLE_ZERO_CROSSINGS as f64 / cutoff;
        Self {
            cutoff,
            half_width,
            reach: half_width.ceil() as i64,
        }
    }

    /// Taps for an output located `frac` input samples after input index
    /// `base`; tap `i` multiplies input `base - reach + 1 + i`. Normalized to
    /// unit DC gain.
    fn taps(&self, frac: f64) -> Vec<f64> {
        let n = 2 * self.reach as usize;
        let mut taps = Vec::with_capacity(n);
        for i in 0..n {
            let offset = frac - (i as f64 - (self.reach - 1) as f64);
            let w = if offset.abs() < self.half_width {
                self.cutoff * sinc(self.cutoff * offset) * blackman(offset / self.half_width)
            } else {
                0.0
            };
            taps.push(w);
        }
        let sum: f64 = taps.iter().sum();
        if sum.abs() > 1e-12 {
            for t in &mut taps {
                *t /= sum;
            }
        }
        taps
    }
}

/// Band-limited resampling with a Blackman-windowed sinc kernel.
///
/// Output length is `round(len * target / source)`. Resampling to the clip's
/// own rate returns an identical copy.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if target_rate == 0 {
        return Err(Error::InvalidSampleRate(target_rate));
    }
    if target_rate == clip.sample_rate {
        return Ok(clip.clone());
    }
    let in_rate = u64::from(clip.sample_rate);
    let out_rate = u64::from(target_rate);
    let g = gcd(in_rate, out_rate);
    let (up, down) = (out_rate / g, in_rate / g);
    let out_len =
        ((clip.len() as u128 * out_rate as u128 + in_rate as u128 / 2) / in_rate as u128) as usize;

    let kernel = SincKernel::new(clip.sample_rate, target_rate);
    let cache: Option<Vec<Vec<f64>>> = (up <= MAX_CACHED_PHASES).then(|| {
        (0..up)
            .map(|phase| kernel.taps(phase as f64 / up as f64))
            .collect()
    });

    let x = &clip.samples;
    let n_in = x.len() as i64;
    let mut out = Vec::with_capacity(out_len);
    for j in 0..out_len as u64 {
        let pos = j as u128 * down as u128;
        let base = (pos / up as u128) as i64;
        let phase = (pos % up as u128) as u64;
        let owned;
        let taps: &[f64] = match &cache {
            Some(c) => &c[phase as usize],
            None => {
                owned = kernel.taps(phase as f64 / up as f64);
                &owned
            }
        };
        let first = base - kernel.reach + 1;
        let mut acc = 0.0;
        for (i, w) in taps.iter().enumerate() {
            let k = first + i as i64;
            if k >= 0 && k < n_in {
                acc += w * x[k as usize];
            }
        }
        out.push(acc);
    }
    AudioClip::new(out, target_rate)
}

/// Naive DFT magnitude spectrum helper used by measurement code: returns the
/// frequency (Hz) of the strongest bin of a Hann-windowed real FFT.
pub fn dominant_frequency(clip: &AudioClip) -> f64 {
    let spectrum = crate::dsp::power_spectrum(clip.samples(), true);
    let (idx, _) = spectrum
        .iter()
        .enumerate()
        .skip(1)
        .fold(
            (0, f64::MIN),
            |best, (i, &p)| if p > best.1 { (i, p) } else { best },
        );
    let n_fft = 2 * (spectrum.len() - 1);
    idx as f64 * f64::from(clip.sample_rate) / n_fft as f64
}
