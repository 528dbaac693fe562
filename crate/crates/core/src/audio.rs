//! WAV input and short-time framing.

use std::path::Path;

use crate::{Error, Matrix, Result};

pub const SAMPLE_RATE: u32 = 16_000;
/// 25 ms at 16 kHz.
pub const FRAME_LENGTH: usize = 400;
/// 10 ms at 16 kHz.
pub const FRAME_SHIFT: usize = 160;
pub const DEFAULT_PREEMPHASIS: f64 = 0.97;

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Waveform {
            samples,
            sample_rate,
        }
    }

    pub fn num_frames(&self) -> usize {
        num_frames(self.samples.len())
    }
}

/// Windowed analysis frames, one row of [`FRAME_LENGTH`] samples per frame.
pub type FrameMatrix = Matrix;

/// Number of complete frames in a signal of `num_samples`; a trailing partial
/// frame is dropped.
pub fn num_frames(num_samples: usize) -> usize {
    if num_samples < FRAME_LENGTH {
        0
    } else {
        (num_samples - FRAME_LENGTH) / FRAME_SHIFT + 1
    }
}

/// Sample count of a signal holding exactly `frames` frames.
pub fn samples_for_frames(frames: usize) -> usize {
    if frames == 0 {
        0
    } else {
        (frames - 1) * FRAME_SHIFT + FRAME_LENGTH
    }
}

/// Reads a 16-bit PCM WAV at 16 kHz. Stereo is averaged down to mono and
/// samples are scaled by 1/32768.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let wav_err = |message: String| Error::Wav {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(source) => Error::io(path, source),
        other => wav_err(other.to_string()),
    })?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(wav_err(format!(
            "unsupported encoding: {:?} {}-bit",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    if spec.sample_rate != SAMPLE_RATE {
        return Err(Error::SampleRate(spec.sample_rate));
    }
    let channels = usize::from(spec.channels);
    if !(1..=2).contains(&channels) {
        return Err(wav_err(format!("unsupported channel count {channels}")));
    }
    let expected = reader.len() as usize;
    let raw = reader
        .samples::<i16>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| wav_err(format!("truncated sample data: {e}")))?;
    if raw.len() != expected || raw.len() % channels != 0 {
        return Err(wav_err(format!(
            "truncated sample data: header declares {expected} samples, found {}",
            raw.len()
        )));
    }
    let samples = raw
        .chunks_exact(channels)
        .map(|frame| {
            let sum: f64 = frame.iter().map(|&s| f64::from(s)).sum();
            sum / channels as f64 / 32768.0
        })
        .collect();
    Ok(Waveform::new(samples, spec.sample_rate))
}

/// Writes a mono 16-bit PCM WAV, clipping to the i16 range.
pub fn write_wav(path: impl AsRef<Path>, w: &Waveform) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let map = |e: hound::Error| match e {
        hound::Error::IoError(source) => Error::io(path, source),
        other => Error::Wav {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(map)?;
    for &s in &w.samples {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q).map_err(map)?;
    }
    writer.finalize().map_err(map)
}

/// Hamming window of length `n`.
pub fn hamming(n: usize) -> Vec<f64> {
    let denom = (n.max(2) - 1) as f64;
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / denom).cos())
        .collect()
}

/// Pre-emphasizes the whole signal, cuts 400-sample frames every 160 samples
/// and applies a Hamming window to each.
pub fn frame_and_window(w: &Waveform, preemphasis: f64) -> Result<FrameMatrix> {
    if w.sample_rate != SAMPLE_RATE {
        return Err(Error::SampleRate(w.sample_rate));
    }
    let x = &w.samples;
    let emphasized: Vec<f64> = (0..x.len())
        .map(|n| if n == 0 { x[0] } else { x[n] - preemphasis * x[n - 1] })
        .collect();
    let window = hamming(FRAME_LENGTH);
    let t = num_frames(x.len());
    let mut frames = Matrix::zeros(t, FRAME_LENGTH);
    for i in 0..t {
        let start = i * FRAME_SHIFT;
        let src = &emphasized[start..start + FRAME_LENGTH];
        for ((dst, &s), &h) in frames.row_mut(i).iter_mut().zip(src).zip(&window) {
            *dst = s * h;
        }
    }
    Ok(frames)
}
