//! Integrated loudness (ITU-R BS.1770-4, mono).

use thiserror::Error;

use super::{adjust_gain_db, resample, Waveform};

const RATE: u32 = 48_000;
const BLOCK: usize = 19_200;
const STEP: usize = 4_800;
const ABSOLUTE_GATE: f64 = -70.0;
const RELATIVE_GATE: f64 = -10.0;

// K-weighting at 48 kHz: high shelf, then high pass.
const SHELF_B: [f64; 3] = [1.535_124_859_586_97, -2.691_696_189_406_38, 1.198_392_810_852_85];
const SHELF_A: [f64; 3] = [1.0, -1.690_659_293_182_41, 0.732_480_774_215_85];
const HIGHPASS_B: [f64; 3] = [1.0, -2.0, 1.0];
const HIGHPASS_A: [f64; 3] = [1.0, -1.990_047_454_833_98, 0.990_072_250_366_21];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoudnessError {
    #[error("loudness needs at least 0.4 s of audio, got {0:.3} s")]
    TooShort(f64),
    #[error("signal is below the absolute gate")]
    BelowGate,
}

fn biquad(input: &[f64], b: &[f64; 3], a: &[f64; 3]) -> Vec<f64> {
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    input
        .iter()
        .map(|&x| {
            let y = b[0] * x + b[1] * x1 + b[2] * x2 - a[1] * y1 - a[2] * y2;
            x2 = x1;
            x1 = x;
            y2 = y1;
            y1 = y;
            y
        })
        .collect()
}

/// Integrated loudness in LUFS.
pub fn measure_lufs(wav: &Waveform) -> Result<f64, LoudnessError> {
    if wav.duration_seconds() < 0.4 {
        return Err(LoudnessError::TooShort(wav.duration_seconds()));
    }
    let at_48k = resample(wav, RATE);
    let weighted = biquad(&biquad(&at_48k.to_f64(), &SHELF_B, &SHELF_A), &HIGHPASS_B, &HIGHPASS_A);
    if weighted.len() < BLOCK {
        return Err(LoudnessError::TooShort(wav.duration_seconds()));
    }
    let powers: Vec<f64> = (0..=(weighted.len() - BLOCK) / STEP)
        .map(|k| {
            let block = &weighted[k * STEP..k * STEP + BLOCK];
            block.iter().map(|s| s * s).sum::<f64>() / BLOCK as f64
        })
        .collect();
    let loudness = |power: f64| -0.691 + 10.0 * power.log10();
    let above_absolute: Vec<f64> = powers.into_iter().filter(|&p| p > 0.0 && loudness(p) > ABSOLUTE_GATE).collect();
    if above_absolute.is_empty() {
        return Err(LoudnessError::BelowGate);
    }
    let mean = above_absolute.iter().sum::<f64>() / above_absolute.len() as f64;
    let threshold = loudness(mean) + RELATIVE_GATE;
    let gated: Vec<f64> = above_absolute.into_iter().filter(|&p| loudness(p) > threshold).collect();
    if gated.is_empty() {
        return Err(LoudnessError::BelowGate);
    }
    Ok(loudness(gated.iter().sum::<f64>() / gated.len() as f64))
}

/// Applies the uniform gain that brings `wav` to `target_lufs`.
pub fn normalize_lufs(wav: &Waveform, target_lufs: f64) -> super::Result<Waveform> {
    let current = measure_lufs(wav)?;
    adjust_gain_db(wav, target_lufs - current)
}
