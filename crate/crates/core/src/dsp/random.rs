//! Seeded randomness: parameter draws and additive noise.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{DspError, Result, Waveform};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub min: f64,
    pub max: f64,
}

impl ParamRange {
    pub fn new(min: f64, max: f64) -> ParamRange {
        ParamRange { min, max }
    }

    fn check(&self, what: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) || self.min > self.max {
            return Err(DspError::InvalidArgument(format!(
                "{what} range needs min <= max, got {} and {}",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

/// Uniform draw from `[min, max]`.
pub fn sample_range(range: ParamRange, rng: &mut impl Rng) -> Result<f64> {
    range.check("parameter")?;
    if range.min == range.max {
        return Ok(range.min);
    }
    Ok(rng.random_range(range.min..=range.max))
}

/// Draws a filter rolloff: a multiple of 6 dB/octave inside the range.
pub fn sample_rolloff(range: ParamRange, rng: &mut impl Rng) -> Result<u32> {
    range.check("rolloff")?;
    let lo = (range.min / 6.0).ceil().max(1.0) as u32;
    let hi = (range.max / 6.0).floor() as u32;
    if hi < lo {
        return Err(DspError::InvalidArgument(format!(
            "rolloff range [{}, {}] contains no multiple of 6",
            range.min, range.max
        )));
    }
    Ok(6 * rng.random_range(lo..=hi))
}

pub fn rms(samples: &[f32]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    (samples.iter().map(|&s| (s as f64) * (s as f64)).sum::<f64>() / samples.len() as f64).sqrt()
}

/// Adds gaussian noise scaled so the signal-to-noise ratio is `snr_db`.
pub fn add_noise_snr(wav: &Waveform, snr_db: f64, rng: &mut impl Rng) -> Result<Waveform> {
    if !snr_db.is_finite() {
        return Err(DspError::InvalidArgument(format!("SNR {snr_db} dB is not finite")));
    }
    let signal_rms = rms(&wav.samples);
    if signal_rms == 0.0 {
        return Err(DspError::InvalidArgument("cannot set an SNR against a silent signal".into()));
    }
    let noise: Vec<f64> = (0..wav.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let noise_rms = (noise.iter().map(|n| n * n).sum::<f64>() / noise.len() as f64).sqrt();
    let scale = signal_rms / 10f64.powf(snr_db / 20.0) / noise_rms;
    let out: Vec<f64> = wav.samples.iter().zip(&noise).map(|(&s, n)| s as f64 + n * scale).collect();
    Waveform::from_f64(&out, wav.sample_rate, "ADD_NOISE")
}
