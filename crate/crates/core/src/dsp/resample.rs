//! Band-limited resampling with a Kaiser-windowed sinc kernel.

use super::Waveform;

/// Zero crossings of the sinc on each side of the kernel centre, counted at
/// the lower of the two rates.
const ZERO_CROSSINGS: f64 = 64.0;
const KAISER_BETA: f64 = 8.6;
/// Above this many phases the kernel is evaluated per output sample.
const MAX_TABLE_PHASES: u64 = 1024;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..200 {
        term *= (half / k as f64).powi(2);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

struct Kernel {
    /// Cutoff in cycles per input sample.
    cutoff: f64,
    half_width: f64,
    taps: i64,
    i0_beta: f64,
}

impl Kernel {
    fn new(old_rate: u32, new_rate: u32) -> Kernel {
        let cutoff = 0.5 * (new_rate as f64 / old_rate as f64).min(1.0);
        let half_width = ZERO_CROSSINGS / (2.0 * cutoff);
        Kernel { cutoff, half_width, taps: half_width.ceil() as i64, i0_beta: bessel_i0(KAISER_BETA) }
    }

    fn weight(&self, distance: f64) -> f64 {
        let r = distance / self.half_width;
        if r.abs() >= 1.0 {
            return 0.0;
        }
        let x = 2.0 * self.cutoff * distance;
        let sinc = if x == 0.0 { 1.0 } else { (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x) };
        sinc * bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / self.i0_beta
    }

    /// Weights for taps `base - taps + 1 ..= base + taps` at fractional
    /// position `frac`, normalized to unit sum.
    fn phase(&self, frac: f64) -> Vec<f64> {
        let mut weights: Vec<f64> = (-(self.taps - 1)..=self.taps).map(|j| self.weight(frac - j as f64)).collect();
        let sum: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= sum);
        weights
    }
}

/// Resamples to `new_rate`. Output length is `round(len · new / old)`.
pub fn resample(wav: &Waveform, new_rate: u32) -> Waveform {
    assert!(new_rate > 0, "sample rate must be positive");
    let old_rate = wav.sample_rate;
    if new_rate == old_rate {
        return wav.clone();
    }
    let g = gcd(old_rate as u64, new_rate as u64);
    let (up, down) = (new_rate as u64 / g, old_rate as u64 / g);
    let out_len = ((wav.len() as f64) * new_rate as f64 / old_rate as f64).round() as usize;
    let kernel = Kernel::new(old_rate, new_rate);
    let input = wav.to_f64();
    let table: Option<Vec<Vec<f64>>> =
        (up <= MAX_TABLE_PHASES).then(|| (0..up).map(|p| kernel.phase(p as f64 / up as f64)).collect());
    let len = input.len() as i64;
    let mut out = Vec::with_capacity(out_len);
    for n in 0..out_len as u64 {
        let position = n * down;
        let base = (position / up) as i64;
        let phase = position % up;
        let computed;
        let weights: &[f64] = match &table {
            Some(table) => &table[phase as usize],
            None => {
                computed = kernel.phase(phase as f64 / up as f64);
                &computed
            }
        };
        let first = base - kernel.taps + 1;
        let mut acc = 0.0;
        for (j, w) in weights.iter().enumerate() {
            let k = first + j as i64;
            if (0..len).contains(&k) {
                acc += w * input[k as usize];
            }
        }
        out.push(acc as f32);
    }
    Waveform::new(out, new_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::testutil::{rms_of, sine};

    fn peak_frequency(wav: &Waveform) -> f64 {
        use rustfft::{num_complex::Complex, FftPlanner};
        let n = wav.len();
        let mut buf: Vec<Complex<f64>> = wav.samples.iter().map(|&s| Complex::new(s as f64, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let (idx, _) = buf[..n / 2].iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap();
        idx as f64 * wav.sample_rate as f64 / n as f64
    }

    #[test]
    fn identity_is_exact() {
        let w = sine(440.0, 0.5, 0.1, 16000);
        assert_eq!(resample(&w, 16000), w);
    }

    #[test]
    fn upsampling_preserves_tone() {
        let w = sine(1000.0, 0.5, 1.0, 16000);
        let up = resample(&w, 48000);
        assert_eq!(up.len(), 48000);
        assert!((peak_frequency(&up) - 1000.0).abs() < 1.5);
        let interior = |v: &Waveform, rate: usize| rms_of(&v.to_f64()[rate / 10..v.len() - rate / 10]);
        let ratio = interior(&up, 48000) / interior(&w, 16000);
        assert!((ratio - 1.0).abs() < 0.005, "{ratio}");
    }

    #[test]
    fn passband_ripple() {
        // Tones up to 0.9 of the lower Nyquist stay within 0.1 dB.
        for (from, to) in [(16000, 8000), (8000, 48000), (48000, 16000), (16000, 44100)] {
            let nyquist = from.min(to) as f64 / 2.0;
            for frac in [0.1, 0.5, 0.9] {
                let w = sine(nyquist * frac, 0.5, 1.0, from);
                let out = resample(&w, to);
                let trim = |v: &Waveform| {
                    let r = v.sample_rate as usize;
                    rms_of(&v.to_f64()[r / 5..v.len() - r / 5])
                };
                let db = 20.0 * (trim(&out) / trim(&w)).log10();
                assert!(db.abs() < 0.1, "{from}->{to} at {frac}: {db} dB");
            }
        }
    }

    #[test]
    fn stopband_rejection() {
        let w = sine(6000.0, 0.5, 1.0, 16000);
        let out = resample(&w, 8000);
        let r = rms_of(&out.to_f64()[800..7200]);
        assert!(r < 0.5 * 1e-3, "{r}");
    }

    #[test]
    fn length_law() {
        for (len, from, to) in [(16001, 16000, 48000), (12345, 16000, 8000), (999, 44100, 16000), (7, 8000, 48000)] {
            let w = Waveform::new(vec![0.1; len], from);
            let out = resample(&w, to);
            assert_eq!(out.len(), (len as f64 * to as f64 / from as f64).round() as usize);
            assert!((out.duration_seconds() - w.duration_seconds()).abs() <= 1.0 / to as f64);
        }
    }
}
