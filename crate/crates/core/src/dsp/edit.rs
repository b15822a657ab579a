//! Sample-level editing: mixing, concatenation, cutting and gain.

use super::{ensure_same_rate, seconds_to_samples, DspError, Result, Waveform};

/// Sums entries sample-wise, each placed at its onset in seconds.
///
/// Accumulation happens in `f64` so the result does not depend on the
/// order of the entries. No clipping or normalization is applied.
pub fn mix(entries: &[(Waveform, f64)]) -> Result<Waveform> {
    if entries.is_empty() {
        return Err(DspError::Empty("MIX needs at least one entry".into()));
    }
    let rate = ensure_same_rate(entries.iter().map(|(w, _)| w))?.unwrap_or(super::WORKING_RATE);
    if let [(only, onset)] = entries {
        if *onset == 0.0 {
            return Ok(only.clone());
        }
    }
    let mut offsets = Vec::with_capacity(entries.len());
    let mut total = 0usize;
    for (wav, onset) in entries {
        if !onset.is_finite() || *onset < 0.0 {
            return Err(DspError::InvalidArgument(format!("MIX onset must be >= 0, got {onset}")));
        }
        let offset = seconds_to_samples(*onset, rate);
        total = total.max(offset + wav.len());
        offsets.push(offset);
    }
    let mut acc = vec![0.0f64; total];
    for ((wav, _), offset) in entries.iter().zip(offsets) {
        for (slot, &s) in acc[offset..offset + wav.len()].iter_mut().zip(wav.samples.iter()) {
            *slot += s as f64;
        }
    }
    Waveform::from_f64(&acc, rate, "MIX")
}

pub fn concat(wavs: &[Waveform]) -> Result<Waveform> {
    let Some(rate) = ensure_same_rate(wavs.iter())? else {
        return Err(DspError::Empty("CAT needs at least one wav".into()));
    };
    if wavs.len() == 1 {
        return Ok(wavs[0].clone());
    }
    let mut samples = Vec::with_capacity(wavs.iter().map(Waveform::len).sum());
    for wav in wavs {
        samples.extend_from_slice(&wav.samples);
    }
    Ok(Waveform::new(samples, rate))
}

/// Cuts `wav` at each break point, returning `break_points.len() + 1`
/// segments that partition the samples.
pub fn split(wav: &Waveform, break_points: &[f64]) -> Result<Vec<Waveform>> {
    let duration = wav.duration_seconds();
    let mut cuts = Vec::with_capacity(break_points.len() + 2);
    cuts.push(0usize);
    let mut previous = 0.0;
    for &t in break_points {
        if !t.is_finite() || t <= 0.0 || t >= duration {
            return Err(DspError::OutOfRange(format!("SPLIT break point {t} s outside (0, {duration}) s")));
        }
        if t <= previous {
            return Err(DspError::InvalidArgument("SPLIT break points must be strictly increasing".into()));
        }
        previous = t;
        cuts.push(seconds_to_samples(t, wav.sample_rate).min(wav.len()));
    }
    cuts.push(wav.len());
    Ok(cuts.windows(2).map(|w| Waveform::new(wav.samples[w[0]..w[1]].to_vec(), wav.sample_rate)).collect())
}

/// Samples in `[round(onset·rate), round(offset·rate))`.
pub fn clip(wav: &Waveform, onset: f64, offset: f64) -> Result<Waveform> {
    let duration = wav.duration_seconds();
    // Allow half a sample of slack so that e.g. LEN(w) round-trips.
    let slack = 0.5 / wav.sample_rate as f64;
    if !(onset.is_finite() && offset.is_finite()) || onset < 0.0 || onset >= offset || offset > duration + slack {
        return Err(DspError::OutOfRange(format!(
            "CLIP needs 0 <= onset < offset <= {duration}, got {onset} and {offset}"
        )));
    }
    let start = seconds_to_samples(onset, wav.sample_rate).min(wav.len());
    let end = seconds_to_samples(offset, wav.sample_rate).min(wav.len());
    Ok(Waveform::new(wav.samples[start..end].to_vec(), wav.sample_rate))
}

pub fn length_seconds(wav: &Waveform) -> f64 {
    wav.duration_seconds()
}

pub fn db_to_gain(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

pub fn adjust_gain_db(wav: &Waveform, gain_db: f64) -> Result<Waveform> {
    if !gain_db.is_finite() {
        return Err(DspError::InvalidArgument(format!("gain {gain_db} dB is not finite")));
    }
    if gain_db == 0.0 {
        return Ok(wav.clone());
    }
    let g = db_to_gain(gain_db);
    let samples: Vec<f64> = wav.samples.iter().map(|&s| s as f64 * g).collect();
    Waveform::from_f64(&samples, wav.sample_rate, "ADJUST_VOL")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::testutil::noise;
    use proptest::prelude::*;

    #[test]
    fn mix_with_onset_extends_length() {
        let a = Waveform::new(vec![0.25; 5 * 16000], 16000);
        let b = Waveform::new(vec![0.5; 4 * 16000], 16000);
        let out = mix(&[(a, 0.0), (b, 3.0)]).unwrap();
        assert_eq!(out.len(), 7 * 16000);
        assert_eq!(out.duration_seconds(), 7.0);
        assert_eq!(out.samples[3 * 16000 - 1], 0.25);
        assert_eq!(out.samples[3 * 16000], 0.75);
        assert_eq!(out.samples[5 * 16000 - 1], 0.75);
        assert_eq!(out.samples[5 * 16000], 0.5);
    }

    #[test]
    fn mix_of_impulses() {
        let mut impulse = vec![0.0; 100];
        impulse[0] = 1.0;
        let w = Waveform::new(impulse, 16000);
        let out = mix(&[(w.clone(), 0.0), (w, 1.0)]).unwrap();
        let nonzero: Vec<usize> = out.samples.iter().enumerate().filter(|(_, &s)| s != 0.0).map(|(i, _)| i).collect();
        assert_eq!(nonzero, vec![0, 16000]);
    }

    #[test]
    fn mix_errors() {
        assert!(mix(&[]).is_err());
        let a = Waveform::new(vec![0.0; 4], 16000);
        let b = Waveform::new(vec![0.0; 4], 48000);
        assert_eq!(mix(&[(a.clone(), 0.0), (b, 0.0)]), Err(DspError::RateMismatch(16000, 48000)));
        assert!(mix(&[(a, -1.0)]).is_err());
    }

    #[test]
    fn identities() {
        let w = noise(1, 0.5, 16000, 0.5);
        assert_eq!(mix(&[(w.clone(), 0.0)]).unwrap(), w);
        assert_eq!(concat(std::slice::from_ref(&w)).unwrap(), w);
        assert_eq!(split(&w, &[]).unwrap(), vec![w.clone()]);
        assert_eq!(clip(&w, 0.0, w.duration_seconds()).unwrap(), w);
        assert_eq!(adjust_gain_db(&w, 0.0).unwrap(), w);
    }

    #[test]
    fn concat_repetition() {
        let w = noise(2, 0.1, 16000, 0.5);
        let out = concat(&vec![w.clone(); 5]).unwrap();
        assert_eq!(out.len(), 5 * w.len());
        assert_eq!(&out.samples[3 * w.len()..4 * w.len()], &w.samples[..]);
    }

    #[test]
    fn split_example() {
        let w = Waveform::silence(10.0, 16000);
        let parts = split(&w, &[1.0, 5.0]).unwrap();
        let durations: Vec<f64> = parts.iter().map(Waveform::duration_seconds).collect();
        assert_eq!(durations, vec![1.0, 4.0, 5.0]);
        assert!(split(&w, &[5.0, 1.0]).is_err());
        assert!(split(&w, &[0.0]).is_err());
        assert!(split(&w, &[10.0]).is_err());
    }

    #[test]
    fn clip_bounds() {
        let w = Waveform::silence(10.0, 16000);
        assert_eq!(clip(&w, 2.0, 5.0).unwrap().duration_seconds(), 3.0);
        assert!(clip(&w, 5.0, 2.0).is_err());
        assert!(clip(&w, 2.0, 11.0).is_err());
    }

    #[test]
    fn gain_factors() {
        let w = Waveform::new(vec![1.0], 16000);
        let up = adjust_gain_db(&w, 5.0).unwrap();
        assert!((up.samples[0] as f64 - 1.778_279_41).abs() < 1e-6);
        let down = adjust_gain_db(&w, -3.0).unwrap();
        assert!((down.samples[0] as f64 - 0.707_945_78).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn concat_split_partitions(seed in any::<u64>(), len in 2usize..4000, raw in proptest::collection::vec(0.0f64..1.0, 0..6)) {
            let w = noise(seed, len as f64 / 16000.0, 16000, 0.9);
            let duration = w.duration_seconds();
            let mut points: Vec<f64> = raw.iter().map(|f| f * duration).filter(|&t| t > 0.0 && t < duration).collect();
            points.sort_by(f64::total_cmp);
            points.dedup();
            let parts = split(&w, &points).unwrap();
            prop_assert_eq!(parts.len(), points.len() + 1);
            prop_assert_eq!(parts.iter().map(Waveform::len).sum::<usize>(), w.len());
            prop_assert_eq!(concat(&parts).unwrap(), w);
        }

        #[test]
        fn gain_composes(seed in any::<u64>(), g1 in -30.0f64..30.0, g2 in -30.0f64..30.0) {
            let w = noise(seed, 0.01, 16000, 0.5);
            let twice = adjust_gain_db(&adjust_gain_db(&w, g1).unwrap(), g2).unwrap();
            let once = adjust_gain_db(&w, g1 + g2).unwrap();
            for (a, b) in twice.samples.iter().zip(once.samples.iter()) {
                prop_assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn mix_is_linear_and_order_free(seed in any::<u64>(), la in 1usize..500, lb in 1usize..500, onset in 0usize..300) {
            let a = noise(seed, la as f64 / 16000.0, 16000, 0.5);
            let b = noise(seed ^ 1, lb as f64 / 16000.0, 16000, 0.5);
            let c = noise(seed ^ 2, 0.01, 16000, 0.5);
            let t = onset as f64 / 16000.0;
            let forward = mix(&[(a.clone(), 0.0), (b.clone(), t), (c.clone(), 0.0)]).unwrap();
            let backward = mix(&[(c, 0.0), (b.clone(), t), (a.clone(), 0.0)]).unwrap();
            prop_assert_eq!(&forward, &backward);
            let pair = mix(&[(a.clone(), 0.0), (b.clone(), 0.0)]).unwrap();
            for i in 0..pair.len() {
                let expect = a.samples.get(i).copied().unwrap_or(0.0) as f64 + b.samples.get(i).copied().unwrap_or(0.0) as f64;
                prop_assert_eq!(pair.samples[i], expect as f32);
            }
        }
    }
}
