//! Frame encoding: standardized raw windows or per-channel statistics.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::sensors::Frame;

/// Mean, variance and normalized frequency of the strongest non-DC periodogram bin.
pub fn channel_stats(x: &[f64], planner: &mut FftPlanner<f64>) -> [f64; 3] {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let fft = planner.plan_fft_forward(n);
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v - mean, 0.0)).collect();
    fft.process(&mut buf);
    let mut best = (0usize, f64::NEG_INFINITY);
    for (k, c) in buf.iter().enumerate().take(n / 2 + 1).skip(1) {
        let pw = c.norm_sqr();
        if pw > best.1 {
            best = (k, pw);
        }
    }
    [mean, var, best.0 as f64 / n as f64]
}

/// Periodogram power at frequency bin `k`.
pub fn periodogram_power(x: &[f64], k: usize) -> f64 {
    let n = x.len();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft.process(&mut buf);
    buf[k].norm_sqr() / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncoderKind {
    /// Channel-major window, standardized per channel.
    Raw,
    /// Three statistics per channel, standardized per feature.
    Stats,
}

/// Input transformation fitted on training frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputEncoder {
    pub kind: EncoderKind,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Channels whose inputs are forced to zero.
    pub disabled: Vec<bool>,
}

fn floor_std(v: f64) -> f64 {
    if v > 1e-12 {
        v
    } else {
        1.0
    }
}

impl InputEncoder {
    pub fn fit(kind: EncoderKind, frames: &[&Frame], disabled: Vec<bool>) -> Self {
        let n_ch = frames.first().map_or(0, |f| f.samples.len());
        let (means, stds) = match kind {
            EncoderKind::Raw => {
                let mut s = vec![0.0; n_ch];
                let mut s2 = vec![0.0; n_ch];
                let mut n = 0.0;
                for f in frames {
                    for (c, ch) in f.samples.iter().enumerate() {
                        s[c] += ch.iter().sum::<f64>();
                        s2[c] += ch.iter().map(|v| v * v).sum::<f64>();
                    }
                    n += f.window_len() as f64;
                }
                let means: Vec<f64> = s.iter().map(|v| v / n).collect();
                let stds = s2
                    .iter()
                    .zip(&means)
                    .map(|(v, m)| floor_std((v / n - m * m).max(0.0).sqrt()))
                    .collect();
                (means, stds)
            }
            EncoderKind::Stats => {
                let mut planner = FftPlanner::new();
                let rows: Vec<Vec<f64>> = frames.iter().map(|f| stats_row(f, &mut planner)).collect();
                let d = 3 * n_ch;
                let n = rows.len().max(1) as f64;
                let means: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
                let stds = (0..d)
                    .map(|j| floor_std((rows.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / n).sqrt()))
                    .collect();
                (means, stds)
            }
        };
        Self {
            kind,
            means,
            stds,
            disabled: if disabled.is_empty() { vec![false; n_ch] } else { disabled },
        }
    }

    pub fn encode(&self, frame: &Frame) -> Vec<f64> {
        self.encode_with(frame, &mut FftPlanner::new())
    }

    pub fn encode_with(&self, frame: &Frame, planner: &mut FftPlanner<f64>) -> Vec<f64> {
        match self.kind {
            EncoderKind::Raw => {
                let mut out = Vec::with_capacity(frame.samples.len() * frame.window_len());
                for (c, ch) in frame.samples.iter().enumerate() {
                    if self.disabled[c] {
                        out.extend(std::iter::repeat_n(0.0, ch.len()));
                    } else {
                        out.extend(ch.iter().map(|v| (v - self.means[c]) / self.stds[c]));
                    }
                }
                out
            }
            EncoderKind::Stats => {
                let row = stats_row(frame, planner);
                row.iter()
                    .enumerate()
                    .map(|(j, v)| if self.disabled[j / 3] { 0.0 } else { (v - self.means[j]) / self.stds[j] })
                    .collect()
            }
        }
    }

    /// Per-channel standard deviation of the raw signal (raw encoder only).
    pub fn channel_stds(&self) -> Option<&[f64]> {
        (self.kind == EncoderKind::Raw).then_some(self.stds.as_slice())
    }
}

fn stats_row(frame: &Frame, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    frame.samples.iter().flat_map(|c| channel_stats(c, planner)).collect()
}

/// Per-channel standard deviation over a set of frames.
pub fn channel_std(frames: &[&Frame]) -> Vec<f64> {
    InputEncoder::fit(EncoderKind::Raw, frames, Vec::new()).stds
}
