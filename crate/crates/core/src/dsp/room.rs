//! Shoebox room impulse responses by the image-source method.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{convolve_rir, sample_range, DspError, ParamRange, Result, Waveform};

/// Metres per second.
pub const SPEED_OF_SOUND: f64 = 343.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    /// Room dimensions (x, y, z) in metres.
    pub size: [f64; 3],
    pub absorption: f64,
    pub source: [f64; 3],
    pub mic_distance: f64,
    /// Degrees, in the horizontal plane, from the +x axis.
    pub mic_azimuth: f64,
    /// Degrees above the horizontal plane.
    pub mic_elevation: f64,
}

impl RoomSpec {
    /// Draws a concrete room from ranges ordered as size x/y/z, absorption,
    /// source x/y/z, mic distance, azimuth, elevation.
    pub fn sample(ranges: &[ParamRange; 10], rng: &mut impl Rng) -> Result<RoomSpec> {
        let mut v = [0.0; 10];
        for (slot, range) in v.iter_mut().zip(ranges) {
            *slot = sample_range(*range, rng)?;
        }
        Ok(RoomSpec {
            size: [v[0], v[1], v[2]],
            absorption: v[3],
            source: [v[4], v[5], v[6]],
            mic_distance: v[7],
            mic_azimuth: v[8],
            mic_elevation: v[9],
        })
    }

    pub fn mic_position(&self) -> [f64; 3] {
        let (az, el) = (self.mic_azimuth.to_radians(), self.mic_elevation.to_radians());
        [
            self.source[0] + self.mic_distance * el.cos() * az.cos(),
            self.source[1] + self.mic_distance * el.cos() * az.sin(),
            self.source[2] + self.mic_distance * el.sin(),
        ]
    }

    pub fn check(&self) -> Result<()> {
        if self.size.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(DspError::InvalidArgument(format!("room size {:?} must be positive", self.size)));
        }
        if !(self.absorption > 0.0 && self.absorption <= 1.0) {
            return Err(DspError::InvalidArgument(format!("absorption {} must lie in (0, 1]", self.absorption)));
        }
        if self.mic_distance.is_nan() || self.mic_distance <= 0.0 {
            return Err(DspError::InvalidArgument(format!("mic distance {} must be positive", self.mic_distance)));
        }
        let inside = |p: &[f64; 3]| p.iter().zip(&self.size).all(|(&c, &l)| c > 0.0 && c < l);
        if !inside(&self.source) {
            return Err(DspError::OutOfRange(format!("source {:?} is outside room {:?}", self.source, self.size)));
        }
        let mic = self.mic_position();
        if !inside(&mic) {
            return Err(DspError::OutOfRange(format!("microphone {mic:?} is outside room {:?}", self.size)));
        }
        Ok(())
    }
}

/// Impulse response from the source to the microphone, including images up
/// to `max_order` wall reflections.
pub fn image_source_rir(spec: &RoomSpec, sample_rate: u32, max_order: u32) -> Result<Vec<f64>> {
    spec.check()?;
    let mic = spec.mic_position();
    let order = max_order as i64;
    let reflection = 1.0 - spec.absorption;
    // Per axis: (offset from mic, reflections) for every image coordinate.
    let axis = |a: usize| -> Vec<(f64, i64)> {
        let mut images = Vec::new();
        for n in -order..=order {
            for q in 0..=1i64 {
                let count = (n - q).abs() + n.abs();
                if count > order {
                    continue;
                }
                let coord = (1 - 2 * q) as f64 * spec.source[a] + 2.0 * n as f64 * spec.size[a];
                images.push((coord - mic[a], count));
            }
        }
        images
    };
    let (xs, ys, zs) = (axis(0), axis(1), axis(2));
    let mut taps: Vec<(usize, f64)> = Vec::new();
    for &(dx, ox) in &xs {
        for &(dy, oy) in &ys {
            if ox + oy > order {
                continue;
            }
            for &(dz, oz) in &zs {
                let total = ox + oy + oz;
                if total > order {
                    continue;
                }
                let gain = if total == 0 { 1.0 } else { reflection.powi(total as i32) };
                if gain == 0.0 {
                    continue;
                }
                let distance = (dx * dx + dy * dy + dz * dz).sqrt();
                let delay = (distance / SPEED_OF_SOUND * sample_rate as f64).round() as usize;
                taps.push((delay, gain / distance));
            }
        }
    }
    let length = taps.iter().map(|&(d, _)| d).max().unwrap_or(0) + 1;
    let mut ir = vec![0.0; length];
    for (delay, amplitude) in taps {
        ir[delay] += amplitude;
    }
    Ok(ir)
}

pub fn simulate_room(wav: &Waveform, spec: &RoomSpec, max_order: u32) -> Result<Waveform> {
    let ir = image_source_rir(spec, wav.sample_rate, max_order)?;
    let ir = Waveform::from_f64(&ir, wav.sample_rate, "room impulse response")?;
    convolve_rir(wav, &ir)
}
