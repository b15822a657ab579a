//! Deterministic signal-processing stand-ins for the generative models.
//!
//! Every stub honours the output contract of its model (count, rate, length)
//! and is a pure function of the request, so runs replay bit for bit.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use sha2::{Digest, Sha256};

use super::{BackendError, GenerativeRequest, GenerativeResponse};
use crate::dsp::{
    band_energy, biquad_filter, resample, rms, seconds_to_samples, FilterKind, FilterParams, Waveform, SR_RATE,
    WORKING_RATE,
};
use crate::script::SPEAKERS;

const MAX_LENGTH_S: f64 = 600.0;
const WORD_S: f64 = 0.35;
const GAP_S: f64 = 0.15;
const CHORD_S: f64 = 0.5;
const CROSSFADE_S: f64 = 0.01;
const SPEAKER_PITCH: [f64; 4] = [110.0, 130.0, 210.0, 240.0];

pub fn run(request: &GenerativeRequest) -> Result<GenerativeResponse, BackendError> {
    let seed = request.seed().ok_or_else(|| invalid(format!("{} request carries no seed", request.op)))?;
    match request.op.as_str() {
        "TTA" => Ok(GenerativeResponse::new(vec![tta(request, seed)?])),
        "TTS" => Ok(GenerativeResponse::new(vec![tts(request, seed)?])),
        "TTM" => Ok(GenerativeResponse::new(vec![ttm(request, seed)?])),
        "TSS" => {
            let (fg, bg) = separate(single_input(request)?, text(request)?)?;
            Ok(GenerativeResponse::new(vec![fg, bg]))
        }
        "SR" => Ok(GenerativeResponse::new(vec![super_resolve(single_input(request)?, seed)?])),
        "INPAINT" => Ok(GenerativeResponse::new(vec![inpaint(request, seed)?])),
        "CAPTION" => {
            let mut response = GenerativeResponse::new(vec![]);
            response.meta.insert("caption".into(), caption(single_input(request)?).into());
            Ok(response)
        }
        other => Err(BackendError::Unregistered(other.to_string())),
    }
}

fn invalid(message: String) -> BackendError {
    BackendError::InvalidRequest(message)
}

fn text(request: &GenerativeRequest) -> Result<&str, BackendError> {
    match request.text.as_deref().map(str::trim) {
        Some(t) if !t.is_empty() => Ok(t),
        _ => Err(invalid(format!("{} needs a non-empty text prompt", request.op))),
    }
}

fn single_input(request: &GenerativeRequest) -> Result<&Waveform, BackendError> {
    match request.inputs.as_slice() {
        [wav] => Ok(wav),
        other => Err(invalid(format!("{} takes one input, got {}", request.op, other.len()))),
    }
}

fn length(request: &GenerativeRequest, default: f64) -> Result<f64, BackendError> {
    let length = request.num("length").unwrap_or(default);
    if !(length > 0.0 && length <= MAX_LENGTH_S) {
        return Err(invalid(format!("length {length} s must lie in (0, {MAX_LENGTH_S}]")));
    }
    Ok(length)
}

fn text_hash(text: &str) -> u64 {
    let digest = Sha256::digest(text.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn rng_for(seed: u64, text: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ text_hash(text))
}

/// Centre frequency the text maps to, log-uniform in 150..4800 Hz.
pub fn band_center(text: &str) -> f64 {
    let u = text_hash(text) as f64 / 2f64.powi(64);
    150.0 * (4800.0f64 / 150.0).powf(u)
}

fn band_pass(wav: &Waveform, center: f64, rolloff: u32) -> Result<Waveform, BackendError> {
    let nyquist = wav.sample_rate as f64 / 2.0;
    let low = (center / 1.5).min(nyquist * 0.45);
    let high = (center * 1.5).min(nyquist * 0.9);
    let hp = biquad_filter(
        wav,
        &FilterParams { kind: FilterKind::HighPass, cutoff_hz: low, rolloff_db_per_octave: rolloff },
    )?;
    Ok(biquad_filter(
        &hp,
        &FilterParams { kind: FilterKind::LowPass, cutoff_hz: high, rolloff_db_per_octave: rolloff },
    )?)
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn to_wave(samples: &[f64], rate: u32, what: &str) -> Result<Waveform, BackendError> {
    Ok(Waveform::from_f64(samples, rate, what)?)
}

/// Band-limited noise with a slow amplitude envelope.
fn band_noise(text: &str, rng: &mut ChaCha8Rng, n: usize, rate: u32) -> Result<Vec<f64>, BackendError> {
    let raw = to_wave(&gaussian(rng, n), rate, "noise")?;
    let shaped = band_pass(&raw, band_center(text), 12)?;
    let env_hz = rng.random_range(0.3..2.0);
    let phase = rng.random_range(0.0..2.0 * PI);
    Ok(shaped
        .samples
        .iter()
        .enumerate()
        .map(|(i, &s)| 0.1 * s as f64 * (0.6 + 0.4 * (2.0 * PI * env_hz * i as f64 / rate as f64 + phase).sin()))
        .collect())
}

fn tta(request: &GenerativeRequest, seed: u64) -> Result<Waveform, BackendError> {
    let text = text(request)?;
    let n = seconds_to_samples(length(request, 5.0)?, WORKING_RATE);
    let mut rng = rng_for(seed, text);
    to_wave(&band_noise(text, &mut rng, n, WORKING_RATE)?, WORKING_RATE, "TTA")
}

fn tone(out: &mut [f64], start: usize, n: usize, freq: f64, amplitude: f64, rate: u32) {
    for i in 0..n.min(out.len().saturating_sub(start)) {
        let t = i as f64 / rate as f64;
        let env = (PI * i as f64 / n as f64).sin().powi(2);
        let mut s = 0.0;
        for k in 1..=6 {
            let f = freq * k as f64;
            if f < rate as f64 / 2.0 {
                s += (2.0 * PI * f * t).sin() / k as f64;
            }
        }
        out[start + i] += amplitude * env * s;
    }
}

/// One harmonic burst per word, each followed by a silent gap.
fn tts(request: &GenerativeRequest, seed: u64) -> Result<Waveform, BackendError> {
    let text = text(request)?;
    let speaker = request.param_text("speaker").unwrap_or(SPEAKERS[0]);
    let index =
        SPEAKERS.iter().position(|s| *s == speaker).ok_or_else(|| invalid(format!("unknown speaker {speaker}")))?;
    let mut rng = rng_for(seed, text);
    let words = text.split_whitespace().count();
    let (word, gap) = (seconds_to_samples(WORD_S, WORKING_RATE), seconds_to_samples(GAP_S, WORKING_RATE));
    let mut out = vec![0.0; words * (word + gap)];
    for w in 0..words {
        let pitch = SPEAKER_PITCH[index] * rng.random_range(0.9..1.1);
        tone(&mut out, w * (word + gap), word, pitch, 0.2, WORKING_RATE);
    }
    to_wave(&out, WORKING_RATE, "TTS")
}

/// Pitch of a stretch of audio estimated from its zero-crossing rate.
fn zero_crossing_pitch(samples: &[f64], rate: u32) -> Option<f64> {
    let crossings = samples.windows(2).filter(|p| (p[0] < 0.0) != (p[1] < 0.0)).count();
    (crossings > 0).then(|| (crossings as f64 * rate as f64 / (2.0 * samples.len() as f64)).clamp(80.0, 1000.0))
}

/// Triads every half second, optionally following the melody's pitch.
fn ttm(request: &GenerativeRequest, seed: u64) -> Result<Waveform, BackendError> {
    let text = text(request)?;
    let melody = request.inputs.first().map(|m| resample(m, WORKING_RATE).to_f64());
    let default_length = melody.as_ref().map_or(10.0, |m| m.len() as f64 / WORKING_RATE as f64);
    let length = match request.num("length") {
        Some(_) => length(request, 10.0)?,
        None if default_length > 0.0 => default_length.min(MAX_LENGTH_S),
        None => 10.0,
    };
    let n = seconds_to_samples(length, WORKING_RATE);
    let chord = seconds_to_samples(CHORD_S, WORKING_RATE);
    let mut rng = rng_for(seed, text);
    let mut out = vec![0.0; n];
    for (k, start) in (0..n).step_by(chord).enumerate() {
        let from_melody = melody.as_ref().and_then(|m| {
            let seg = m.get(start..(start + chord).min(m.len()))?;
            (!seg.is_empty()).then(|| zero_crossing_pitch(seg, WORKING_RATE)).flatten()
        });
        let root = from_melody.unwrap_or_else(|| 130.81 * 2f64.powf(rng.random_range(0..12) as f64 / 12.0));
        let third = if (k + rng.random_range(0..2)) % 2 == 0 { 4.0 } else { 3.0 };
        for semitones in [0.0, third, 7.0] {
            tone(&mut out, start, chord, root * 2f64.powf(semitones / 12.0), 0.08, WORKING_RATE);
        }
    }
    to_wave(&out, WORKING_RATE, "TTM")
}

/// Spacing of the f32 grid around `x`.
fn ulp(x: f32) -> f64 {
    let exponent = ((x.to_bits() >> 23) & 0xff) as i32;
    if exponent == 0 {
        2f64.powi(-149)
    } else {
        2f64.powi(exponent - 127 - 23)
    }
}

/// Splits `wav` into a foreground near the text's band and the remainder.
/// Each foreground sample is a multiple of the input sample's ulp no larger
/// than the input in magnitude, so both parts are exact in f32 and sum to
/// the input exactly.
pub fn separate(wav: &Waveform, text: &str) -> Result<(Waveform, Waveform), BackendError> {
    if wav.is_empty() {
        return Ok((wav.clone(), wav.clone()));
    }
    let band = band_pass(wav, band_center(text), 24)?;
    let mut fg = Vec::with_capacity(wav.len());
    let mut bg = Vec::with_capacity(wav.len());
    for (&x, &b) in wav.samples.iter().zip(band.samples.iter()) {
        if x == 0.0 {
            fg.push(0.0);
            bg.push(0.0);
            continue;
        }
        let ratio = (b as f64 / x as f64).clamp(0.0, 1.0);
        let q = ulp(x);
        let f = (ratio * x as f64 / q).round() * q;
        fg.push(f as f32);
        bg.push((x as f64 - f) as f32);
    }
    Ok((Waveform::new(fg, wav.sample_rate), Waveform::new(bg, wav.sample_rate)))
}

/// Noise confined to `[from_hz, rate/2)`, via a brick-wall FFT mask.
fn high_band_noise(rng: &mut ChaCha8Rng, n: usize, rate: u32, from_hz: f64) -> Vec<f64> {
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = gaussian(rng, n).into_iter().map(|v| Complex::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let bin = k.min(n - k);
        if (bin as f64) * (rate as f64) / (n as f64) < from_hz {
            *c = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

fn super_resolve(wav: &Waveform, seed: u64) -> Result<Waveform, BackendError> {
    let up = resample(wav, SR_RATE);
    let signal_rms = rms(&up.samples);
    let original_nyquist = wav.sample_rate as f64 / 2.0;
    if up.is_empty() || signal_rms == 0.0 || original_nyquist >= SR_RATE as f64 / 2.0 {
        return Ok(up);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = high_band_noise(&mut rng, up.len(), SR_RATE, original_nyquist);
    let noise_rms = (noise.iter().map(|v| v * v).sum::<f64>() / noise.len() as f64).sqrt();
    if noise_rms == 0.0 {
        return Ok(up);
    }
    let scale = 1e-3 * signal_rms / noise_rms;
    let out: Vec<f64> = up.samples.iter().zip(&noise).map(|(&s, &v)| s as f64 + scale * v).collect();
    to_wave(&out, SR_RATE, "SR")
}

fn inpaint(request: &GenerativeRequest, seed: u64) -> Result<Waveform, BackendError> {
    let wav = single_input(request)?;
    let text = text(request)?;
    let rate = wav.sample_rate;
    let (onset, offset) = match (request.num("onset"), request.num("offset")) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(invalid("INPAINT needs onset and offset".into())),
    };
    let duration = wav.duration_seconds();
    let slack = 0.5 / rate as f64;
    if !(onset >= 0.0 && onset < offset && offset <= duration + slack) {
        return Err(invalid(format!("region [{onset}, {offset}] s does not fit a {duration} s input")));
    }
    if let Some(declared) = request.num("duration") {
        if (declared - duration).abs() > 1.0 / rate as f64 {
            return Err(invalid(format!("declared duration {declared} s differs from the input's {duration} s")));
        }
    }
    let start = seconds_to_samples(onset, rate).min(wav.len());
    let end = seconds_to_samples(offset, rate).min(wav.len());
    let mut out = wav.to_f64();
    if end <= start {
        return to_wave(&out, rate, "INPAINT");
    }
    let outside: Vec<f32> = wav.samples[..start].iter().chain(&wav.samples[end..]).copied().collect();
    let target = rms(&outside);
    let mut rng = rng_for(seed, text);
    let mut fill = band_noise(text, &mut rng, end - start, rate)?;
    let fill_rms = (fill.iter().map(|v| v * v).sum::<f64>() / fill.len() as f64).sqrt();
    let gain = if fill_rms > 0.0 { target / fill_rms } else { 0.0 };
    fill.iter_mut().for_each(|v| *v *= gain);
    let region = end - start;
    let fade = seconds_to_samples(CROSSFADE_S, rate).min(region / 2);
    for (i, f) in fill.iter().enumerate() {
        let original = out[start + i];
        // Equal-power weight of the fill: rises over the first `fade`
        // samples and falls over the last `fade`.
        let edge = i.min(region - 1 - i);
        let theta = if edge < fade { PI / 2.0 * (edge as f64 + 0.5) / fade as f64 } else { PI / 2.0 };
        out[start + i] = original * theta.cos() + f * theta.sin();
    }
    to_wave(&out, rate, "INPAINT")
}

/// Short description of level, duration and spectral balance.
pub fn caption(wav: &Waveform) -> String {
    if wav.is_silent() {
        return "silence".into();
    }
    let level_db = 20.0 * rms(&wav.samples).log10();
    let loudness = if level_db > -20.0 {
        "loud"
    } else if level_db > -35.0 {
        "moderate"
    } else {
        "quiet"
    };
    let nyquist = wav.sample_rate as f64 / 2.0;
    let shares = band_energy(wav, &[0.0, 300.0, 3000.0, nyquist + 1.0]);
    let band = match shares.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i) {
        Some(0) => "low",
        Some(1) => "mid",
        _ => "high",
    };
    format!("a {:.1} second {loudness} {band}-frequency sound", wav.duration_seconds())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{lsd_band_limited, testutil::noise, testutil::sine};
    use proptest::prelude::*;

    fn req(op: &str) -> GenerativeRequest {
        GenerativeRequest::new(op).with_num("seed", 7.0)
    }

    proptest! {
        #[test]
        fn separation_sums_exactly(samples in proptest::collection::vec(-2.0f32..2.0, 1..400), text in "[a-z ]{1,12}") {
            let wav = Waveform::new(samples, 16000);
            let (fg, bg) = separate(&wav, &text).unwrap();
            for i in 0..wav.len() {
                prop_assert_eq!(fg.samples[i] as f64 + bg.samples[i] as f64, wav.samples[i] as f64);
                prop_assert!(fg.samples[i].abs() <= wav.samples[i].abs());
            }
        }
    }

    #[test]
    fn separation_handles_subnormals_and_zero() {
        let wav = Waveform::new(vec![0.0, f32::MIN_POSITIVE / 8.0, -1e-40, 3.0e38], 16000);
        let (fg, bg) = separate(&wav, "x").unwrap();
        for i in 0..wav.len() {
            assert_eq!(fg.samples[i] as f64 + bg.samples[i] as f64, wav.samples[i] as f64);
        }
        assert_eq!((fg.samples[0], bg.samples[0]), (0.0, 0.0));
    }

    #[test]
    fn deterministic_given_seed() {
        let a = run(&req("TTA").with_text("rain")).unwrap();
        let b = run(&req("TTA").with_text("rain")).unwrap();
        assert_eq!(a, b);
        let c = run(&req("TTA").with_text("rain").with_num("seed", 8.0)).unwrap();
        assert_ne!(a.outputs, c.outputs);
    }

    #[test]
    fn tta_energy_sits_near_the_text_band() {
        let text = "a bird chirping";
        let fc = band_center(text);
        let out = &run(&req("TTA").with_text(text).with_num("length", 2.0)).unwrap().outputs[0];
        let shares = band_energy(out, &[0.0, fc / 3.0, fc * 3.0, 8001.0]);
        assert!(shares[1] > 0.8, "{fc}: {shares:?}");
    }

    #[test]
    fn band_center_range() {
        for text in ["", "dog", "rain on a tin roof", "x"] {
            let fc = band_center(text);
            assert!((150.0..4800.0).contains(&fc));
        }
    }

    #[test]
    fn tts_words_and_gaps() {
        let out = &run(&req("TTS").with_text("hello there world")).unwrap().outputs[0];
        assert_eq!(out.len(), 3 * 8000);
        for w in 0..3 {
            let gap = &out.samples[w * 8000 + 5600..(w + 1) * 8000];
            assert!(gap.iter().all(|&s| s == 0.0));
            assert!(rms(&out.samples[w * 8000..w * 8000 + 5600]) > 0.01);
        }
        let err = run(&req("TTS").with_text("  ")).unwrap_err();
        assert!(matches!(err, BackendError::InvalidRequest(_)));
        let female = &run(&req("TTS").with_text("hi").with_param_text("speaker", "Female1_En")).unwrap().outputs[0];
        let pitch = |w: &Waveform| zero_crossing_pitch(&w.to_f64()[1000..4600], 16000).unwrap();
        assert!(pitch(female) > pitch(out));
    }

    #[test]
    fn ttm_follows_melody() {
        let melody = sine(440.0, 0.5, 2.0, 16000);
        let out = &run(&req("TTM").with_text("piano").with_input(melody)).unwrap().outputs[0];
        assert_eq!(out.len(), 32000);
        let low = &run(&req("TTM").with_text("piano").with_input(sine(250.0, 0.5, 2.0, 16000))).unwrap().outputs[0];
        let share = |w: &Waveform| band_energy(w, &[0.0, 430.0, 450.0, 8001.0])[1];
        assert!(share(out) > 0.1 && share(low) < 0.01, "{} {}", share(out), share(low));
        assert_eq!(run(&req("TTM").with_text("piano")).unwrap().outputs[0].len(), 160000);
    }

    #[test]
    fn sr_preserves_low_band() {
        let wav = noise(5, 1.0, 16000, 0.3);
        let out = &run(&req("SR").with_input(wav.clone())).unwrap().outputs[0];
        assert_eq!(out.sample_rate, 48000);
        assert_eq!(out.len(), 48000);
        let back = resample(out, 16000);
        assert!(lsd_band_limited(&wav, &back, 4000.0).unwrap() < 0.1);
        // Above the resampler's transition band only the added noise remains.
        let high = band_energy(out, &[0.0, 9000.0, 24001.0]);
        assert!(high[1] > 0.0 && high[1] < 1e-4, "{high:?}");
        let silent = run(&req("SR").with_input(Waveform::silence(0.5, 16000))).unwrap();
        assert!(silent.outputs[0].is_silent());
    }

    #[test]
    fn inpaint_touches_only_the_region() {
        let wav = noise(6, 2.0, 16000, 0.4);
        let request =
            req("INPAINT").with_text("dog").with_input(wav.clone()).with_num("onset", 0.5).with_num("offset", 1.0);
        let out = &run(&request.clone().with_num("duration", 2.0)).unwrap().outputs[0];
        assert_eq!(out.len(), wav.len());
        assert_eq!(&out.samples[..8000], &wav.samples[..8000]);
        assert_eq!(&out.samples[16000..], &wav.samples[16000..]);
        assert_ne!(&out.samples[8000..16000], &wav.samples[8000..16000]);
        let ratio = rms(&out.samples[8200..15800]) / rms(&wav.samples[..8000]);
        assert!((ratio - 1.0).abs() < 0.05, "{ratio}");
        assert!(run(&request.clone().with_num("duration", 3.0)).is_err());
        let reversed = req("INPAINT").with_text("dog").with_input(wav).with_num("onset", 1.0).with_num("offset", 0.5);
        assert!(run(&reversed).is_err());
    }

    #[test]
    fn captions() {
        assert_eq!(caption(&Waveform::silence(1.0, 16000)), "silence");
        assert_eq!(caption(&sine(100.0, 0.5, 2.0, 16000)), "a 2.0 second loud low-frequency sound");
        assert_eq!(caption(&sine(1000.0, 0.05, 1.5, 16000)), "a 1.5 second moderate mid-frequency sound");
        assert_eq!(caption(&sine(5000.0, 0.001, 1.0, 16000)), "a 1.0 second quiet high-frequency sound");
        let response = run(&req("CAPTION").with_input(sine(100.0, 0.5, 2.0, 16000))).unwrap();
        assert!(response.outputs.is_empty());
        assert_eq!(response.caption(), Some("a 2.0 second loud low-frequency sound"));
    }
}
