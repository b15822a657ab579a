//! Short-time spectra and log-spectral distance.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{ensure_same_rate, DspError, Result, Waveform};

pub const LSD_WINDOW: usize = 1024;
pub const LSD_HOP: usize = 512;
pub const LSD_FLOOR: f64 = 1e-8;

fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()).collect()
}

/// Magnitude spectrogram: one row of `LSD_WINDOW / 2 + 1` bins per frame.
/// Frames start every `LSD_HOP` samples; the last frame is zero-padded.
pub fn stft_magnitudes(samples: &[f64]) -> Vec<Vec<f64>> {
    let frames = if samples.len() <= LSD_WINDOW { 1 } else { 1 + (samples.len() - LSD_WINDOW).div_ceil(LSD_HOP) };
    let window = hann(LSD_WINDOW);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(LSD_WINDOW);
    let mut buf = vec![Complex::new(0.0, 0.0); LSD_WINDOW];
    (0..frames)
        .map(|f| {
            let start = f * LSD_HOP;
            for (i, slot) in buf.iter_mut().enumerate() {
                let s = samples.get(start + i).copied().unwrap_or(0.0);
                *slot = Complex::new(s * window[i], 0.0);
            }
            fft.process(&mut buf);
            buf[..=LSD_WINDOW / 2].iter().map(|c| c.norm()).collect()
        })
        .collect()
}

fn padded_pair(a: &Waveform, b: &Waveform) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.is_empty() || b.is_empty() {
        return Err(DspError::Empty("LSD needs non-empty inputs".into()));
    }
    ensure_same_rate([a, b].into_iter())?;
    let n = a.len().max(b.len());
    let mut x = a.to_f64();
    let mut y = b.to_f64();
    x.resize(n, 0.0);
    y.resize(n, 0.0);
    Ok((x, y))
}

fn distance(x: &[f64], y: &[f64], bins: usize) -> f64 {
    let (sx, sy) = (stft_magnitudes(x), stft_magnitudes(y));
    let total: f64 = sx
        .iter()
        .zip(&sy)
        .map(|(fa, fb)| {
            let sum: f64 = fa[..bins]
                .iter()
                .zip(&fb[..bins])
                .map(|(&p, &q)| (p.max(LSD_FLOOR).log10() - q.max(LSD_FLOOR).log10()).powi(2))
                .sum();
            (sum / bins as f64).sqrt()
        })
        .sum();
    total / sx.len() as f64
}

/// Log-spectral distance over all bins.
pub fn lsd(a: &Waveform, b: &Waveform) -> Result<f64> {
    let (x, y) = padded_pair(a, b)?;
    Ok(distance(&x, &y, LSD_WINDOW / 2 + 1))
}

/// Log-spectral distance restricted to bins strictly below `max_hz`.
pub fn lsd_band_limited(a: &Waveform, b: &Waveform, max_hz: f64) -> Result<f64> {
    let (x, y) = padded_pair(a, b)?;
    let bin_hz = a.sample_rate as f64 / LSD_WINDOW as f64;
    let bins = ((max_hz / bin_hz).ceil() as usize).clamp(1, LSD_WINDOW / 2 + 1);
    Ok(distance(&x, &y, bins))
}

/// Share of spectral energy in each band `[edges[i], edges[i+1])` Hz,
/// averaged over frames. Returns zeros for silence.
pub fn band_energy(wav: &Waveform, edges: &[f64]) -> Vec<f64> {
    let bands = edges.len().saturating_sub(1);
    let mut energy = vec![0.0; bands];
    let bin_hz = wav.sample_rate as f64 / LSD_WINDOW as f64;
    for frame in stft_magnitudes(&wav.to_f64()) {
        for (k, m) in frame.iter().enumerate() {
            let f = k as f64 * bin_hz;
            if let Some(b) = (0..bands).find(|&b| f >= edges[b] && f < edges[b + 1]) {
                energy[b] += m * m;
            }
        }
    }
    let total: f64 = energy.iter().sum();
    if total > 0.0 {
        energy.iter_mut().for_each(|e| *e /= total);
    }
    energy
}
