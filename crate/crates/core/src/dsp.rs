//! Signal-processing helpers shared by the frontend, augmentation and corpus
//! generators.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// One-sided power spectrum `|X_k|^2` of a whole signal, zero-padded to the
/// next power of two. Optionally Hann-windowed.
pub fn power_spectrum(x: &[f64], hann: bool) -> Vec<f64> {
    let n_fft = x.len().max(2).next_power_of_two();
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let w = if hann && n > 1 {
                0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos()
            } else {
                1.0
            };
            Complex::new(v * w, 0.0)
        })
        .collect();
    buf.resize(n_fft, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n_fft).process(&mut buf);
    buf[..=n_fft / 2].iter().map(|c| c.norm_sqr()).collect()
}

/// Sum of spectral power in `[lo, hi)` Hz.
pub fn band_power(x: &[f64], sample_rate: u32, lo: f64, hi: f64) -> f64 {
    let spec = power_spectrum(x, true);
    let n_fft = 2 * (spec.len() - 1);
    let hz_per_bin = f64::from(sample_rate) / n_fft as f64;
    spec.iter()
        .enumerate()
        .filter(|(k, _)| {
            let f = *k as f64 * hz_per_bin;
            f >= lo && f < hi
        })
        .map(|(_, p)| p)
        .sum()
}

/// Peak spectral power within `±width` Hz of `freq`.
pub fn peak_power_near(x: &[f64], sample_rate: u32, freq: f64, width: f64) -> f64 {
    let spec = power_spectrum(x, true);
    let n_fft = 2 * (spec.len() - 1);
    let hz_per_bin = f64::from(sample_rate) / n_fft as f64;
    spec.iter()
        .enumerate()
        .filter(|(k, _)| (*k as f64 * hz_per_bin - freq).abs() <= width)
        .map(|(_, &p)| p)
        .fold(0.0, f64::max)
}

pub fn to_db(power_ratio: f64) -> f64 {
    10.0 * power_ratio.log10()
}

/// Direct-form-I second order section.
#[derive(Debug, Clone, Copy)]
pub struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn normalized(b0: f64, b1: f64, b2: f64, a0: f64, a1: f64, a2: f64) -> Self {
        Self {
            b: [b0 / a0, b1 / a0, b2 / a0],
            a: [a1 / a0, a2 / a0],
        }
    }

    /// Bilinear-transform low-pass section with quality `q`.
    pub fn lowpass(cutoff: f64, q: f64, sample_rate: f64) -> Self {
        let k = (PI * cutoff / sample_rate).tan();
        let k2 = k * k;
        Self::normalized(
            k2,
            2.0 * k2,
            k2,
            1.0 + k / q + k2,
            2.0 * (k2 - 1.0),
            1.0 - k / q + k2,
        )
    }

    /// Bilinear-transform high-pass section with quality `q`.
    pub fn highpass(cutoff: f64, q: f64, sample_rate: f64) -> Self {
        let k = (PI * cutoff / sample_rate).tan();
        let k2 = k * k;
        Self::normalized(
            1.0,
            -2.0,
            1.0,
            1.0 + k / q + k2,
            2.0 * (k2 - 1.0),
            1.0 - k / q + k2,
        )
    }

    /// Constant-peak-gain resonator (two-pole band-pass) at `freq` with
    /// bandwidth `bw` Hz.
    pub fn resonator(freq: f64, bw: f64, sample_rate: f64) -> Self {
        let w0 = 2.0 * PI * freq / sample_rate;
        let q = (freq / bw).max(0.1);
        let alpha = w0.sin() / (2.0 * q);
        Self::normalized(
            alpha,
            0.0,
            -alpha,
            1.0 + alpha,
            -2.0 * w0.cos(),
            1.0 - alpha,
        )
    }

    pub fn process(&self, x: &[f64]) -> Vec<f64> {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        x.iter()
            .map(|&x0| {
                let y0 = self.b[0] * x0 + self.b[1] * x1 + self.b[2] * x2
                    - self.a[0] * y1
                    - self.a[1] * y2;
                x2 = x1;
                x1 = x0;
                y2 = y1;
                y1 = y0;
                y0
            })
            .collect()
    }
}

/// Section qualities of an even-order Butterworth prototype.
pub fn butterworth_qs(order: usize) -> Vec<f64> {
    assert!(
        order >= 2 && order.is_multiple_of(2),
        "even Butterworth order required"
    );
    (0..order / 2)
        .map(|k| {
            let theta = PI * (2 * k + 1) as f64 / (2 * order) as f64;
            1.0 / (2.0 * theta.sin())
        })
        .collect()
}

pub fn cascade(sections: &[Biquad], x: &[f64]) -> Vec<f64> {
    sections
        .iter()
        .fold(x.to_vec(), |signal, section| section.process(&signal))
}
