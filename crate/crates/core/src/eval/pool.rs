//! Source clips for task synthesis: a built-in procedural pool or a
//! directory of WAV files.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dsp::{biquad_filter, read_wav, DspError, FilterKind, FilterParams, Waveform, WORKING_RATE};

#[derive(Clone, Debug, PartialEq)]
pub struct Clip {
    pub caption: String,
    pub wav: Waveform,
}

#[derive(Clone, Copy, Debug)]
enum Voice {
    /// Harmonic bursts: fundamental, burst seconds, gap seconds, vibrato depth.
    Harmonic(f64, f64, f64, f64),
    /// Band-passed noise between two frequencies, modulated at a rate.
    Noise(f64, f64, f64),
    /// Repeated sweeps from one frequency to another, each lasting a period.
    Sweep(f64, f64, f64),
    /// Decaying clicks at a rate with a resonance.
    Clicks(f64, f64),
}

const CATALOG: [(&str, Voice); 20] = [
    ("a dog barking", Voice::Harmonic(480.0, 0.18, 0.35, 0.05)),
    ("rain falling on a roof", Voice::Noise(1200.0, 7000.0, 0.0)),
    ("a bell ringing", Voice::Harmonic(830.0, 1.2, 0.3, 0.0)),
    ("a man speaking", Voice::Harmonic(120.0, 0.3, 0.12, 0.03)),
    ("a woman speaking", Voice::Harmonic(220.0, 0.28, 0.12, 0.03)),
    ("wind blowing", Voice::Noise(80.0, 900.0, 0.3)),
    ("a car engine idling", Voice::Harmonic(45.0, 4.0, 0.0, 0.01)),
    ("birds chirping", Voice::Sweep(2500.0, 4200.0, 0.15)),
    ("a clock ticking", Voice::Clicks(2.0, 3000.0)),
    ("a siren wailing", Voice::Sweep(600.0, 1300.0, 1.5)),
    ("water flowing in a stream", Voice::Noise(300.0, 2500.0, 0.8)),
    ("a piano playing", Voice::Harmonic(262.0, 0.45, 0.05, 0.0)),
    ("hammering on wood", Voice::Clicks(3.0, 700.0)),
    ("a crowd cheering", Voice::Noise(400.0, 4000.0, 2.0)),
    ("a drum beat", Voice::Clicks(4.0, 110.0)),
    ("a telephone ringing", Voice::Harmonic(440.0, 0.4, 0.2, 0.0)),
    ("footsteps on gravel", Voice::Clicks(1.8, 1800.0)),
    ("an airplane flying overhead", Voice::Noise(60.0, 3000.0, 0.1)),
    ("a baby crying", Voice::Harmonic(410.0, 0.6, 0.25, 0.08)),
    ("a violin playing", Voice::Harmonic(440.0, 1.0, 0.02, 0.02)),
];

/// Level of the broadband floor mixed under every clip, relative to its
/// peak, so no spectral bin is empty.
const FLOOR: f64 = 0.003;

pub const POOL_SIZE: usize = CATALOG.len();

fn band(samples: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let wav = Waveform::from_f64(samples, WORKING_RATE, "pool noise").expect("finite noise");
    let params = |kind, cutoff_hz| FilterParams { kind, cutoff_hz, rolloff_db_per_octave: 12 };
    let hp = biquad_filter(&wav, &params(FilterKind::HighPass, lo)).expect("valid cutoff");
    biquad_filter(&hp, &params(FilterKind::LowPass, hi)).expect("valid cutoff").to_f64()
}

fn render(voice: Voice, seconds: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let rate = WORKING_RATE as f64;
    let n = (seconds * rate).round() as usize;
    let mut out = vec![0.0; n];
    match voice {
        Voice::Harmonic(f0, burst, gap, vibrato) => {
            let period = burst + gap;
            let detune = rng.random_range(0.95..1.05);
            let mut phase = 0.0;
            for (i, slot) in out.iter_mut().enumerate() {
                let t = i as f64 / rate;
                let local = t % period;
                if local >= burst {
                    continue;
                }
                let env = (PI * local / burst).sin();
                let f = f0 * detune * (1.0 + vibrato * (2.0 * PI * 5.0 * t).sin());
                phase += 2.0 * PI * f / rate;
                let mut s = 0.0;
                for k in 1..=8 {
                    if f * k as f64 <= rate / 2.0 {
                        s += (k as f64 * phase).sin() / k as f64;
                    }
                }
                *slot = 0.3 * env * s;
            }
        }
        Voice::Noise(lo, hi, modulation) => {
            let raw: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let shaped = band(&raw, lo, hi);
            let offset = rng.random_range(0.0..2.0 * PI);
            for (i, (slot, s)) in out.iter_mut().zip(shaped).enumerate() {
                let t = i as f64 / rate;
                *slot = 0.3
                    * s
                    * (1.0 - 0.5 * modulation.min(1.0) * (1.0 + (2.0 * PI * modulation * t + offset).sin()) / 2.0);
            }
        }
        Voice::Sweep(from, to, length) => {
            let mut phase = 0.0;
            for (i, slot) in out.iter_mut().enumerate() {
                let t = i as f64 / rate;
                let x = (t % length) / length;
                let f = from + (to - from) * x;
                phase += 2.0 * PI * f / rate;
                *slot = 0.3 * (PI * x).sin() * phase.sin();
            }
        }
        Voice::Clicks(per_second, resonance) => {
            let spacing = rate / per_second;
            let jitter = rng.random_range(0.0..spacing / 4.0);
            let mut start = jitter;
            while (start as usize) < n {
                let s0 = start as usize;
                for (j, slot) in out[s0..].iter_mut().take((0.12 * rate) as usize).enumerate() {
                    let t = j as f64 / rate;
                    *slot += 0.6 * (-t * 40.0).exp() * (2.0 * PI * resonance * t).sin();
                }
                start += spacing;
            }
        }
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-3);
    for slot in out.iter_mut() {
        *slot += FLOOR * peak * rng.sample::<f64, _>(StandardNormal);
    }
    out
}

/// Catalog entry `index` (mod the catalog size) rendered at the working
/// rate.
pub fn procedural_clip(index: usize, seconds: f64, seed: u64) -> Clip {
    let (caption, voice) = CATALOG[index % CATALOG.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index as u64);
    let samples = render(voice, seconds, &mut rng);
    Clip {
        caption: caption.to_string(),
        wav: Waveform::from_f64(&samples, WORKING_RATE, caption).expect("finite clip"),
    }
}

/// The twenty built-in clips with durations between 3 and 5 seconds.
pub fn procedural_pool(seed: u64) -> Vec<Clip> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..CATALOG.len())
        .map(|i| {
            let seconds = (rng.random_range(300..=500) as f64) / 100.0;
            procedural_clip(i, seconds, seed)
        })
        .collect()
}

/// Every `.wav` file in `dir`, sorted by name, captioned by its file stem
/// with underscores read as spaces.
pub fn pool_from_dir(dir: &Path) -> Result<Vec<Clip>, DspError> {
    let entries = std::fs::read_dir(dir).map_err(|e| DspError::Wav(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|path| {
            let bytes = std::fs::read(path).map_err(|e| DspError::Wav(format!("{}: {e}", path.display())))?;
            let caption = path.file_stem().map(|s| s.to_string_lossy().replace('_', " ")).unwrap_or_default();
            Ok(Clip { caption, wav: read_wav(&bytes)? })
        })
        .collect()
}

/// Decaying noise with a unit direct path, for use as a room response.
pub fn impulse_response(seconds: f64, seed: u64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (seconds * WORKING_RATE as f64).round() as usize;
    let samples: Vec<f64> = (0..n)
        .map(|i| {
            if i == 0 {
                1.0
            } else {
                0.3 * (-(i as f64) / (0.05 * WORKING_RATE as f64)).exp() * rng.sample::<f64, _>(StandardNormal)
            }
        })
        .collect();
    Waveform::from_f64(&samples, WORKING_RATE, "impulse response").expect("finite response")
}

/// Inputs for running the worked examples: a 10 s scene, a 6 s musical
/// clip and a 0.25 s impulse response, truncated to `count`.
pub fn fixture_inputs(count: usize, seed: u64) -> Vec<Waveform> {
    let sum = |parts: &[Clip]| {
        let n = parts.iter().map(|c| c.wav.len()).max().unwrap_or(0);
        let mut out = vec![0.0; n];
        for clip in parts {
            for (o, s) in out.iter_mut().zip(clip.wav.samples.iter()) {
                *o += *s as f64;
            }
        }
        Waveform::from_f64(&out, WORKING_RATE, "fixture scene").expect("finite mixture")
    };
    let scene = sum(&[procedural_clip(3, 10.0, seed), procedural_clip(14, 10.0, seed), procedural_clip(6, 10.0, seed)]);
    let music = sum(&[procedural_clip(11, 6.0, seed), procedural_clip(4, 6.0, seed)]);
    let all = [scene, music, impulse_response(0.25, seed)];
    all.into_iter().take(count).collect()
}
