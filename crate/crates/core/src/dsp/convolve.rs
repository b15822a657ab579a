use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{ensure_same_rate, DspError, Result, Waveform};

/// Above this many multiply-adds the FFT path is used.
const DIRECT_LIMIT: usize = 1 << 20;

/// Full linear convolution, length `len(x) + len(h) - 1`.
pub fn convolve_full(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let n = x.len() + h.len() - 1;
    if x.len().saturating_mul(h.len()) <= DIRECT_LIMIT {
        let mut out = vec![0.0; n];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, &hj) in out[i..i + h.len()].iter_mut().zip(h) {
                *o += xi * hj;
            }
        }
        return out;
    }
    let size = n.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(size);
    let inverse = planner.plan_fft_inverse(size);
    let pad = |v: &[f64]| {
        let mut buf: Vec<Complex<f64>> = v.iter().map(|&s| Complex::new(s, 0.0)).collect();
        buf.resize(size, Complex::new(0.0, 0.0));
        buf
    };
    let mut a = pad(x);
    let mut b = pad(h);
    forward.process(&mut a);
    forward.process(&mut b);
    for (p, q) in a.iter_mut().zip(&b) {
        *p *= q;
    }
    inverse.process(&mut a);
    a.truncate(n);
    a.into_iter().map(|c| c.re / size as f64).collect()
}

/// Convolves with an impulse response, keeps the input length and rescales
/// so the output peak equals the input peak.
pub fn convolve_rir(wav: &Waveform, ir: &Waveform) -> Result<Waveform> {
    if ir.is_empty() {
        return Err(DspError::Empty("impulse response has no samples".into()));
    }
    ensure_same_rate([wav, ir].into_iter())?;
    let mut out = convolve_full(&wav.to_f64(), &ir.to_f64());
    out.truncate(wav.len());
    let out_peak = out.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if out_peak > 0.0 {
        let scale = wav.peak() / out_peak;
        out.iter_mut().for_each(|s| *s *= scale);
    }
    Waveform::from_f64(&out, wav.sample_rate, "ADD_RIR")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::testutil::noise;
    use proptest::prelude::*;

    fn brute_force(x: &[f64], h: &[f64]) -> Vec<f64> {
        (0..x.len() + h.len() - 1)
            .map(|n| (0..h.len()).filter(|&k| n >= k && n - k < x.len()).map(|k| h[k] * x[n - k]).sum())
            .collect()
    }

    #[test]
    fn unit_impulse_is_identity() {
        let w = noise(4, 0.5, 16000, 0.7);
        let out = convolve_rir(&w, &Waveform::new(vec![1.0], 16000)).unwrap();
        for (a, b) in out.samples.iter().zip(w.samples.iter()) {
            assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn delayed_impulse_shifts() {
        let w = noise(5, 0.1, 16000, 0.7);
        let k = 37;
        let mut ir = vec![0.0; k + 1];
        ir[k] = 1.0;
        let out = convolve_rir(&w, &Waveform::new(ir, 16000)).unwrap();
        assert_eq!(out.len(), w.len());
        assert!(out.samples[..k].iter().all(|&s| s == 0.0));
        let scale = w.peak() / w.samples[..w.len() - k].iter().fold(0.0f64, |m, &s| m.max((s as f64).abs()));
        for i in k..w.len() {
            assert!((out.samples[i] as f64 - w.samples[i - k] as f64 * scale).abs() < 1e-6);
        }
    }

    #[test]
    fn fft_path_matches_direct() {
        let x = noise(6, 1.0, 16000, 0.5).to_f64();
        let h = noise(7, 0.1, 16000, 0.5).to_f64();
        assert!(x.len() * h.len() > DIRECT_LIMIT);
        let fast = convolve_full(&x, &h);
        assert_eq!(fast.len(), x.len() + h.len() - 1);
        let direct = brute_force(&x[..3000], &h);
        for (a, b) in fast[..3000].iter().zip(&direct) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_empty_ir_and_rate_mismatch() {
        let w = Waveform::silence(0.1, 16000);
        assert!(convolve_rir(&w, &Waveform::new(vec![], 16000)).is_err());
        assert!(convolve_rir(&w, &Waveform::new(vec![1.0], 8000)).is_err());
    }

    proptest! {
        #[test]
        fn full_length_law(x in proptest::collection::vec(-1.0f64..1.0, 1..60), h in proptest::collection::vec(-1.0f64..1.0, 1..60)) {
            let out = convolve_full(&x, &h);
            prop_assert_eq!(out.len(), x.len() + h.len() - 1);
            for (a, b) in out.iter().zip(brute_force(&x, &h)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
