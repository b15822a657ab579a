//! Signal processing on mono waveforms.

mod convolve;
mod edit;
mod filter;
mod loudness;
mod random;
mod resample;
mod room;
mod spectral;
mod wav;

use std::sync::Arc;

use thiserror::Error;

pub use convolve::{convolve_full, convolve_rir};
pub use edit::{adjust_gain_db, clip, concat, db_to_gain, length_seconds, mix, split};
pub use filter::{biquad_filter, butterworth_magnitude, FilterKind, FilterParams};
pub use loudness::{measure_lufs, normalize_lufs, LoudnessError};
pub use random::{add_noise_snr, rms, sample_range, sample_rolloff, ParamRange};
pub use resample::resample;
pub use room::{image_source_rir, simulate_room, RoomSpec, SPEED_OF_SOUND};
pub use spectral::{band_energy, lsd, lsd_band_limited, stft_magnitudes, LSD_FLOOR, LSD_HOP, LSD_WINDOW};
pub use wav::{read_wav, read_wav_native, write_wav};

/// Rate used for everything except super-resolution output.
pub const WORKING_RATE: u32 = 16_000;
/// Output rate of super-resolution.
pub const SR_RATE: u32 = 48_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DspError {
    #[error("empty input: {0}")]
    Empty(String),
    #[error("sample rates differ: {0} Hz vs {1} Hz")]
    RateMismatch(u32, u32),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("non-finite sample produced by {0}")]
    NonFinite(String),
    #[error(transparent)]
    Loudness(#[from] LoudnessError),
    #[error("wav: {0}")]
    Wav(String),
}

pub type Result<T> = std::result::Result<T, DspError>;

/// Mono audio at a fixed sample rate.
///
/// Samples are stored as `f32`, matching the on-the-wire and on-disk
/// encodings so that serialization never changes a value. Arithmetic is
/// carried out in `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    pub samples: Arc<[f32]>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Waveform {
        assert!(sample_rate > 0, "sample rate must be positive");
        Waveform { samples: samples.into(), sample_rate }
    }

    /// Builds a waveform from `f64` samples, rejecting non-finite values.
    pub fn from_f64(samples: &[f64], sample_rate: u32, what: &str) -> Result<Waveform> {
        let mut out = Vec::with_capacity(samples.len());
        for &s in samples {
            let v = s as f32;
            if !v.is_finite() {
                return Err(DspError::NonFinite(what.to_string()));
            }
            out.push(v);
        }
        Ok(Waveform::new(out, sample_rate))
    }

    pub fn silence(seconds: f64, sample_rate: u32) -> Waveform {
        Waveform::new(vec![0.0; seconds_to_samples(seconds, sample_rate)], sample_rate)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.samples.iter().map(|&s| s as f64).collect()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, &s| m.max((s as f64).abs()))
    }

    pub fn is_silent(&self) -> bool {
        self.samples.iter().all(|&s| s == 0.0)
    }

    /// Scales down so the absolute peak is at most `limit`.
    pub fn peak_limited(&self, limit: f64) -> Waveform {
        let peak = self.peak();
        if peak <= limit {
            return self.clone();
        }
        let scale = limit / peak;
        let samples = self.samples.iter().map(|&s| ((s as f64) * scale) as f32).collect();
        Waveform::new(samples, self.sample_rate)
    }
}

pub fn seconds_to_samples(seconds: f64, sample_rate: u32) -> usize {
    (seconds * sample_rate as f64).round().max(0.0) as usize
}

pub(crate) fn ensure_same_rate<'a>(mut waves: impl Iterator<Item = &'a Waveform>) -> Result<Option<u32>> {
    let Some(first) = waves.next() else { return Ok(None) };
    for w in waves {
        if w.sample_rate != first.sample_rate {
            return Err(DspError::RateMismatch(first.sample_rate, w.sample_rate));
        }
    }
    Ok(Some(first.sample_rate))
}
