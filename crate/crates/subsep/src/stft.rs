//! Forward and inverse short-time Fourier transform.
//!
//! Analysis uses a periodic window and zero-padding of `window_len / 2`
//! samples at both ends, so the frame count is deterministic in the input
//! length and the inverse transform reconstructs exactly after symmetric
//! trimming. Synthesis divides the overlap-add by the per-position sum of
//! squared analysis windows (the COLA denominator), which makes the round
//! trip exact for any config whose steady-state denominator is nonzero.

use ndarray::Array3;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Analysis window shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Hann,
}

/// STFT analysis configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    window_len: usize,
    hop: usize,
    window: WindowKind,
}

impl StftConfig {
    pub fn new(window_len: usize, hop: usize, window: WindowKind) -> Result<Self> {
        if window_len == 0 || window_len % 2 != 0 {
            return Err(Error::InvalidStftConfig(format!(
                "window_len must be a positive even integer, got {window_len}"
            )));
        }
        if hop == 0 || hop > window_len {
            return Err(Error::InvalidStftConfig(format!(
                "hop must satisfy 0 < hop <= window_len, got {hop}"
            )));
        }
        let cfg = StftConfig {
            window_len,
            hop,
            window,
        };
        // Steady-state COLA denominator must stay away from zero, otherwise
        // some sample positions are unrecoverable.
        let win = cfg.window_samples();
        for m in 0..hop {
            let mut den = 0.0;
            let mut j = m;
            while j < window_len {
                den += win[j] * win[j];
                j += hop;
            }
            if den <= 1e-6 {
                return Err(Error::InvalidStftConfig(format!(
                    "window/hop pair is not COLA-compliant (dead point at offset {m})"
                )));
            }
        }
        Ok(cfg)
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn window(&self) -> WindowKind {
        self.window
    }

    /// Number of one-sided frequency bins, `window_len / 2 + 1`.
    pub fn n_bins(&self) -> usize {
        self.window_len / 2 + 1
    }

    /// Frame count for a signal of `len` samples under the zero-padding
    /// policy (`window_len / 2` zeros at both ends).
    pub fn frame_count(&self, len: usize) -> usize {
        len / self.hop + 1
    }

    /// Periodic analysis window.
    pub(crate) fn window_samples(&self) -> Vec<f64> {
        let n = self.window_len;
        match self.window {
            WindowKind::Hann => (0..n)
                .map(|j| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * j as f64 / n as f64).cos()))
                .collect(),
        }
    }
}

impl Default for StftConfig {
    /// 2048-sample Hann window with 1024-sample hop.
    fn default() -> Self {
        StftConfig::new(2048, 1024, WindowKind::Hann).expect("default config is valid")
    }
}

/// Complex time-frequency tensor, indexed `(bin, frame, channel)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    data: Array3<Complex64>,
    sample_rate: u32,
}

impl Spectrogram {
    /// Validates shape and finiteness.
    pub fn new(data: Array3<Complex64>, sample_rate: u32) -> Result<Self> {
        let (f, t, c) = data.dim();
        if f == 0 || t == 0 || c == 0 {
            return Err(Error::ShapeMismatch(format!(
                "spectrogram dimensions must be positive, got ({f}, {t}, {c})"
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::ShapeMismatch(format!(
                "spectrogram contains a non-finite entry at flat index {bad}"
            )));
        }
        Ok(Spectrogram { data, sample_rate })
    }

    pub(crate) fn from_data(data: Array3<Complex64>, sample_rate: u32) -> Self {
        Spectrogram { data, sample_rate }
    }

    pub fn n_bins(&self) -> usize {
        self.data.dim().0
    }

    pub fn n_frames(&self) -> usize {
        self.data.dim().1
    }

    pub fn n_channels(&self) -> usize {
        self.data.dim().2
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn data(&self) -> &Array3<Complex64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array3<Complex64> {
        &mut self.data
    }

    /// Keeps only the first `n` channels.
    pub fn truncate_channels(&self, n: usize) -> Result<Spectrogram> {
        if n == 0 || n > self.n_channels() {
            return Err(Error::ShapeMismatch(format!(
                "cannot truncate {} channels to {n}",
                self.n_channels()
            )));
        }
        let data = self
            .data
            .slice(ndarray::s![.., .., ..n])
            .to_owned();
        Ok(Spectrogram {
            data,
            sample_rate: self.sample_rate,
        })
    }
}

/// Forward STFT of a multichannel signal (one `Vec<f64>` per channel).
pub fn stft(channels: &[Vec<f64>], cfg: &StftConfig, sample_rate: u32) -> Result<Spectrogram> {
    if channels.is_empty() || channels[0].is_empty() {
        return Err(Error::EmptySignal);
    }
    let len = channels[0].len();
    for (i, ch) in channels.iter().enumerate() {
        if ch.len() != len {
            return Err(Error::ChannelLengthMismatch {
                channel: i,
                got: ch.len(),
                expected: len,
            });
        }
    }
    if len < cfg.window_len() {
        return Err(Error::SignalTooShort {
            len,
            min: cfg.window_len(),
        });
    }

    let w = cfg.window_len();
    let hop = cfg.hop();
    let pad = w / 2;
    let n_frames = cfg.frame_count(len);
    let n_bins = cfg.n_bins();
    let win = cfg.window_samples();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(w);
    let mut buf = vec![Complex64::new(0.0, 0.0); w];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];

    let mut data = Array3::zeros((n_bins, n_frames, channels.len()));
    for (c, ch) in channels.iter().enumerate() {
        for t in 0..n_frames {
            let start = t * hop; // position in the padded signal
            for j in 0..w {
                let p = start + j;
                // padded[p] = ch[p - pad] where in range, else 0
                let sample = if p >= pad && p - pad < len {
                    ch[p - pad]
                } else {
                    0.0
                };
                buf[j] = Complex64::new(sample * win[j], 0.0);
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for f in 0..n_bins {
                data[[f, t, c]] = buf[f];
            }
        }
    }
    Ok(Spectrogram { data, sample_rate })
}

/// Inverse STFT; returns exactly `target_len` samples per channel.
pub fn istft(spec: &Spectrogram, cfg: &StftConfig, target_len: usize) -> Result<Vec<Vec<f64>>> {
    let w = cfg.window_len();
    let hop = cfg.hop();
    let pad = w / 2;
    if spec.n_bins() != cfg.n_bins() {
        return Err(Error::ShapeMismatch(format!(
            "spectrogram has {} bins but config implies {}",
            spec.n_bins(),
            cfg.n_bins()
        )));
    }
    let n_frames = spec.n_frames();
    let out_len = (n_frames - 1) * hop + w;
    if pad + target_len > out_len {
        return Err(Error::ShapeMismatch(format!(
            "target_len {target_len} exceeds the reconstructable span {}",
            out_len - pad
        )));
    }

    let win = cfg.window_samples();
    let mut den = vec![0.0f64; out_len];
    for t in 0..n_frames {
        let start = t * hop;
        for j in 0..w {
            den[start + j] += win[j] * win[j];
        }
    }

    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(w);
    let mut buf = vec![Complex64::new(0.0, 0.0); w];
    let mut scratch = vec![Complex64::new(0.0, 0.0); ifft.get_inplace_scratch_len()];
    let scale = 1.0 / w as f64;

    let mut out = Vec::with_capacity(spec.n_channels());
    for c in 0..spec.n_channels() {
        let mut acc = vec![0.0f64; out_len];
        for t in 0..n_frames {
            // Restore Hermitian symmetry from the one-sided bins.
            for f in 0..cfg.n_bins() {
                buf[f] = spec.data()[[f, t, c]];
            }
            for f in 1..w / 2 {
                buf[w - f] = spec.data()[[f, t, c]].conj();
            }
            ifft.process_with_scratch(&mut buf, &mut scratch);
            let start = t * hop;
            for j in 0..w {
                acc[start + j] += win[j] * buf[j].re * scale;
            }
        }
        let mut ch = vec![0.0f64; target_len];
        for (i, sample) in ch.iter_mut().enumerate() {
            let p = pad + i;
            if den[p] > f64::EPSILON {
                *sample = acc[p] / den[p];
            }
        }
        out.push(ch);
    }
    Ok(out)
}
