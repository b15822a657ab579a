//! RIFF/WAVE encoding.

use std::io::Cursor;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{resample, DspError, Result, Waveform, WORKING_RATE};

fn wav_error(err: hound::Error) -> DspError {
    DspError::Wav(err.to_string())
}

/// Decodes PCM (8/16/24/32-bit) or 32-bit float WAV data, averaging
/// channels to mono, without changing the sample rate.
pub fn read_wav_native(bytes: &[u8]) -> Result<Waveform> {
    let mut reader = WavReader::new(Cursor::new(bytes)).map_err(wav_error)?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.sample_rate == 0 {
        return Err(DspError::Wav("header declares zero channels or zero sample rate".into()));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_error)?,
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 2f64.powi(bits as i32 - 1);
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(wav_error)?
        }
        (format, bits) => {
            return Err(DspError::Wav(format!("unsupported encoding: {format:?} with {bits} bits")));
        }
    };
    let channels = spec.channels as usize;
    let mono: Vec<f64> = if channels == 1 {
        interleaved
    } else {
        interleaved.chunks_exact(channels).map(|frame| frame.iter().sum::<f64>() / channels as f64).collect()
    };
    Waveform::from_f64(&mono, spec.sample_rate, "wav decoding")
}

/// Decodes WAV data and converts it to the working rate.
pub fn read_wav(bytes: &[u8]) -> Result<Waveform> {
    let native = read_wav_native(bytes)?;
    Ok(resample(&native, WORKING_RATE))
}

/// Encodes as mono 32-bit float WAV at the waveform's own rate.
pub fn write_wav(wav: &Waveform) -> Vec<u8> {
    let spec =
        WavSpec { channels: 1, sample_rate: wav.sample_rate, bits_per_sample: 32, sample_format: SampleFormat::Float };
    let mut cursor = Cursor::new(Vec::with_capacity(44 + 4 * wav.len()));
    {
        let mut writer = WavWriter::new(&mut cursor, spec).expect("writing to memory cannot fail");
        for &s in wav.samples.iter() {
            writer.write_sample(s).expect("writing to memory cannot fail");
        }
        writer.finalize().expect("writing to memory cannot fail");
    }
    cursor.into_inner()
}
