//! Butterworth low/high-pass filters built from cascaded biquads.

use serde::{Deserialize, Serialize};

use super::{DspError, Result, Waveform};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    LowPass,
    HighPass,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    pub kind: FilterKind,
    pub cutoff_hz: f64,
    pub rolloff_db_per_octave: u32,
}

const MAX_ROLLOFF: u32 = 48;

impl FilterParams {
    fn order(&self) -> usize {
        (self.rolloff_db_per_octave / 6) as usize
    }

    fn check(&self, sample_rate: u32) -> Result<()> {
        let nyquist = sample_rate as f64 / 2.0;
        if !(self.cutoff_hz > 0.0 && self.cutoff_hz < nyquist) {
            return Err(DspError::InvalidArgument(format!(
                "cutoff {} Hz must lie in (0, {nyquist}) Hz",
                self.cutoff_hz
            )));
        }
        let r = self.rolloff_db_per_octave;
        if r == 0 || !r.is_multiple_of(6) || r > MAX_ROLLOFF {
            return Err(DspError::InvalidArgument(format!(
                "rolloff {r} dB/octave must be a multiple of 6 between 6 and {MAX_ROLLOFF}"
            )));
        }
        Ok(())
    }
}

/// Normalized coefficients `[b0, b1, b2, a1, a2]`.
type Section = [f64; 5];

fn sections(params: &FilterParams, sample_rate: u32) -> Vec<Section> {
    let n = params.order();
    let w0 = 2.0 * std::f64::consts::PI * params.cutoff_hz / sample_rate as f64;
    let (sin, cos) = w0.sin_cos();
    let mut out = Vec::with_capacity(n.div_ceil(2));
    for k in 0..n / 2 {
        let q = 1.0 / (2.0 * (std::f64::consts::PI * (2 * k + 1) as f64 / (2 * n) as f64).sin());
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        let (b0, b1, b2) = match params.kind {
            FilterKind::LowPass => ((1.0 - cos) / 2.0, 1.0 - cos, (1.0 - cos) / 2.0),
            FilterKind::HighPass => ((1.0 + cos) / 2.0, -(1.0 + cos), (1.0 + cos) / 2.0),
        };
        out.push([b0 / a0, b1 / a0, b2 / a0, -2.0 * cos / a0, (1.0 - alpha) / a0]);
    }
    if n % 2 == 1 {
        let k = (std::f64::consts::PI * params.cutoff_hz / sample_rate as f64).tan();
        let a1 = (k - 1.0) / (k + 1.0);
        let section = match params.kind {
            FilterKind::LowPass => [k / (1.0 + k), k / (1.0 + k), 0.0, a1, 0.0],
            FilterKind::HighPass => [1.0 / (1.0 + k), -1.0 / (1.0 + k), 0.0, a1, 0.0],
        };
        out.push(section);
    }
    out
}

fn run(section: &Section, signal: &mut [f64]) {
    let [b0, b1, b2, a1, a2] = *section;
    let (mut z1, mut z2) = (0.0, 0.0);
    for x in signal.iter_mut() {
        let input = *x;
        let y = b0 * input + z1;
        z1 = b1 * input - a1 * y + z2;
        z2 = b2 * input - a2 * y;
        *x = y;
    }
}

/// Filters `wav`; output length equals input length.
pub fn biquad_filter(wav: &Waveform, params: &FilterParams) -> Result<Waveform> {
    params.check(wav.sample_rate)?;
    let mut signal = wav.to_f64();
    for section in sections(params, wav.sample_rate) {
        run(&section, &mut signal);
    }
    Waveform::from_f64(&signal, wav.sample_rate, "filter")
}

/// Magnitude response of the digital Butterworth design at `freq_hz`.
pub fn butterworth_magnitude(params: &FilterParams, sample_rate: u32, freq_hz: f64) -> f64 {
    let warp = |f: f64| (std::f64::consts::PI * f / sample_rate as f64).tan();
    let ratio = warp(freq_hz) / warp(params.cutoff_hz);
    let n = params.order() as i32;
    match params.kind {
        FilterKind::LowPass => 1.0 / (1.0 + ratio.powi(2 * n)).sqrt(),
        FilterKind::HighPass => 1.0 / (1.0 + ratio.powi(-2 * n)).sqrt(),
    }
}
