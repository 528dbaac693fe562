//! Power spectrum, mel filterbank and the log-mel time-spectrum pattern that
//! both front-ends are built on.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::{FrameMatrix, SAMPLE_RATE};
use crate::{Error, Matrix, Result};

pub const NUM_BANDS: usize = 24;
pub const FFT_SIZE: usize = 512;
/// Energy floor applied before every logarithm.
pub const ENERGY_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

pub fn floored_ln(energy: f64) -> f64 {
    energy.max(ENERGY_FLOOR).ln()
}

/// `|FFT|²` of each frame, zero-padded to [`FFT_SIZE`]; bins `0..=FFT_SIZE/2`.
pub fn power_spectrum(frames: &FrameMatrix) -> Matrix {
    let bins = FFT_SIZE / 2 + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(FFT_SIZE);
    let mut buf = vec![Complex::new(0.0, 0.0); FFT_SIZE];
    let mut out = Matrix::zeros(frames.rows(), bins);
    for (t, frame) in frames.iter_rows().enumerate() {
        buf.fill(Complex::new(0.0, 0.0));
        for (b, &s) in buf.iter_mut().zip(frame.iter().take(FFT_SIZE)) {
            b.re = s;
        }
        fft.process(&mut buf);
        for (dst, c) in out.row_mut(t).iter_mut().zip(&buf[..bins]) {
            *dst = c.norm_sqr();
        }
    }
    out
}

/// A triangular filter stored as its first nonzero bin plus the weights from
/// there on.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangularFilter {
    pub start_bin: usize,
    pub weights: Vec<f64>,
    pub center_hz: f64,
}

impl TriangularFilter {
    pub fn apply(&self, spectrum: &[f64]) -> f64 {
        spectrum[self.start_bin..self.start_bin + self.weights.len()]
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| p * w)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    pub filters: Vec<TriangularFilter>,
    pub fft_size: usize,
    pub sample_rate: u32,
}

impl MelFilterbank {
    /// Triangular filters with `num_filters + 2` edges equally spaced in mel
    /// between 0 Hz and Nyquist. Filter `j` rises from edge `j` to a peak of
    /// 1.0 at edge `j + 1` and falls to zero at edge `j + 2`; weights are
    /// evaluated at bin center frequencies.
    pub fn new(num_filters: usize, sample_rate: u32, fft_size: usize) -> Result<Self> {
        if num_filters == 0 {
            return Err(Error::InvalidArgument("filterbank needs at least one filter".into()));
        }
        if fft_size < 2 {
            return Err(Error::InvalidArgument(format!("fft size {fft_size} too small")));
        }
        let nyquist = f64::from(sample_rate) / 2.0;
        let top = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..num_filters + 2)
            .map(|i| mel_to_hz(top * i as f64 / (num_filters + 1) as f64))
            .collect();
        let bin_hz = f64::from(sample_rate) / fft_size as f64;
        let bins = fft_size / 2 + 1;
        let mut filters = Vec::with_capacity(num_filters);
        for j in 0..num_filters {
            let (lo, mid, hi) = (edges[j], edges[j + 1], edges[j + 2]);
            let full: Vec<f64> = (0..bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect();
            let first = full.iter().position(|&w| w > 0.0).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "fft size {fft_size} too small: mel filter {j} covers no frequency bin"
                ))
            })?;
            let last = full.iter().rposition(|&w| w > 0.0).unwrap_or(first);
            filters.push(TriangularFilter {
                start_bin: first,
                weights: full[first..=last].to_vec(),
                center_hz: mid,
            });
        }
        Ok(MelFilterbank {
            filters,
            fft_size,
            sample_rate,
        })
    }

    /// The 24-band, 16 kHz, 512-point bank shared by both front-ends.
    pub fn standard() -> Self {
        Self::new(NUM_BANDS, SAMPLE_RATE, FFT_SIZE).expect("standard filterbank is valid")
    }

    pub fn num_filters(&self) -> usize {
        self.filters.len()
    }

    pub fn center_frequencies(&self) -> Vec<f64> {
        self.filters.iter().map(|f| f.center_hz).collect()
    }
}

/// Log-mel spectrogram (`ts`, frames × bands) plus per-frame log power.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSpectrumPattern {
    pub ts: Matrix,
    pub log_power: Vec<f64>,
}

impl TimeSpectrumPattern {
    pub fn num_frames(&self) -> usize {
        self.ts.rows()
    }
}

pub fn time_spectrum_pattern(frames: &FrameMatrix, fb: &MelFilterbank) -> TimeSpectrumPattern {
    let spectrum = power_spectrum(frames);
    let mut ts = Matrix::zeros(frames.rows(), fb.num_filters());
    for (t, row) in spectrum.iter_rows().enumerate() {
        for (dst, filter) in ts.row_mut(t).iter_mut().zip(&fb.filters) {
            *dst = floored_ln(filter.apply(row));
        }
    }
    let log_power = frames
        .iter_rows()
        .map(|f| floored_ln(f.iter().map(|s| s * s).sum()))
        .collect();
    TimeSpectrumPattern { ts, log_power }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{frame_and_window, Waveform};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// Power spectrum straight from the DFT definition.
    fn dft_power(frame: &[f64]) -> Vec<f64> {
        (0..=FFT_SIZE / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (n, &x) in frame.iter().enumerate() {
                    let a = -2.0 * PI * (k * n) as f64 / FFT_SIZE as f64;
                    re += x * a.cos();
                    im += x * a.sin();
                }
                re * re + im * im
            })
            .collect()
    }

    #[test]
    fn zero_frame_has_zero_spectrum() {
        let p = power_spectrum(&Matrix::zeros(2, 400));
        assert!(p.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(p.cols(), 257);
    }

    #[test]
    fn bin_16_tone_peaks_at_bin_16() {
        // bin 16 of a 512-point FFT at 16 kHz is 16 * 31.25 = 500 Hz
        let window = crate::audio::hamming(400);
        let frame: Vec<f64> = (0..400)
            .map(|n| (2.0 * PI * 16.0 * n as f64 / 512.0).cos() * window[n])
            .collect();
        let m = Matrix::from_rows(400, [&frame]).unwrap();
        let p = power_spectrum(&m);
        let oracle = dft_power(&frame);
        let argmax = |v: &[f64]| {
            v.iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0
        };
        assert_eq!(argmax(p.row(0)), 16);
        assert_eq!(argmax(&oracle), 16);
    }

    #[test]
    fn parseval_and_dft_agreement() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let frame: Vec<f64> = (0..400).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p = power_spectrum(&Matrix::from_rows(400, [&frame]).unwrap());
        let row = p.row(0);
        let oracle = dft_power(&frame);
        for (a, b) in row.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1e-9));
        }
        let doubled: f64 = row
            .iter()
            .enumerate()
            .map(|(k, v)| if k == 0 || k == 256 { *v } else { 2.0 * v })
            .sum();
        let energy: f64 = frame.iter().map(|x| x * x).sum();
        assert!((doubled - 512.0 * energy).abs() <= 1e-6 * 512.0 * energy);
    }

    #[test]
    fn mel_formula() {
        assert_eq!(hz_to_mel(0.0), 0.0);
        let expected = 2595.0 * 2f64.log10();
        assert!((hz_to_mel(700.0) - expected).abs() < 1e-12);
        assert!((hz_to_mel(700.0) - 781.17).abs() < 0.01);
        assert!((mel_to_hz(hz_to_mel(1234.5)) - 1234.5).abs() < 1e-9);
    }

    #[test]
    fn standard_filterbank_shape() {
        let fb = MelFilterbank::standard();
        assert_eq!(fb.num_filters(), 24);
        for (j, f) in fb.filters.iter().enumerate() {
            assert!(f.weights.iter().all(|&w| w >= 0.0));
            assert!(f.weights.iter().any(|&w| w > 0.0), "filter {j} empty");
            // contiguous support: interior weights strictly positive
            assert!(f.weights.iter().all(|&w| w > 0.0));
            assert!(f.weights.iter().all(|&w| w <= 1.0));
        }
        for pair in fb.filters.windows(2) {
            let a_end = pair[0].start_bin + pair[0].weights.len();
            assert!(pair[1].start_bin < a_end, "adjacent filters must overlap");
        }
    }

    #[test]
    fn tiny_fft_is_rejected() {
        assert!(MelFilterbank::new(24, 16000, 16).is_err());
        assert!(MelFilterbank::new(0, 16000, 512).is_err());
    }

    #[test]
    fn silence_is_floored() {
        let frames = Matrix::zeros(3, 400);
        let tsp = time_spectrum_pattern(&frames, &MelFilterbank::standard());
        let floor = ENERGY_FLOOR.ln();
        assert!(tsp.ts.as_slice().iter().all(|&v| v == floor));
        assert!(tsp.log_power.iter().all(|&v| v == floor));
    }

    fn noise_wave(seed: u64, gain: f64) -> Waveform {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Waveform::new((0..4000).map(|_| gain * rng.gen_range(-0.3..0.3)).collect(), 16000)
    }

    #[test]
    fn doubling_amplitude_adds_two_ln_two() {
        let fb = MelFilterbank::standard();
        let a = time_spectrum_pattern(&frame_and_window(&noise_wave(9, 1.0), 0.97).unwrap(), &fb);
        let b = time_spectrum_pattern(&frame_and_window(&noise_wave(9, 2.0), 0.97).unwrap(), &fb);
        let shift = 2.0 * 2f64.ln();
        for (x, y) in a.ts.as_slice().iter().zip(b.ts.as_slice()) {
            assert!((y - x - shift).abs() < 1e-9);
        }
        for (x, y) in a.log_power.iter().zip(&b.log_power) {
            assert!((y - x - shift).abs() < 1e-9);
        }
    }

    #[test]
    fn tone_at_band_center_lands_in_that_band() {
        let fb = MelFilterbank::standard();
        let f0 = fb.filters[5].center_hz;
        let w = Waveform::new(
            (0..4000).map(|n| 0.3 * (2.0 * PI * f0 * n as f64 / 16000.0).sin()).collect(),
            16000,
        );
        let tsp = time_spectrum_pattern(&frame_and_window(&w, 0.97).unwrap(), &fb);
        for row in tsp.ts.iter_rows() {
            let best = (0..24).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            assert_eq!(best, 5);
        }
    }

    proptest! {
        #[test]
        fn shape_and_finiteness(samples in prop::collection::vec(prop_oneof![Just(0.0), -1.0f64..1.0], 0..2000)) {
            let w = Waveform::new(samples, 16000);
            let frames = frame_and_window(&w, 0.97).unwrap();
            let tsp = time_spectrum_pattern(&frames, &MelFilterbank::standard());
            prop_assert_eq!(tsp.ts.rows(), frames.rows());
            prop_assert_eq!(tsp.ts.cols(), 24);
            prop_assert!(tsp.ts.as_slice().iter().all(|v| v.is_finite()));
            prop_assert!(tsp.log_power.iter().all(|v| v.is_finite()));
        }

        #[test]
        fn louder_frames_never_lower_ts(seed in 0u64..1000, gain in 1.0f64..4.0) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let frame: Vec<f64> = (0..400).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let louder: Vec<f64> = frame.iter().map(|x| x * gain).collect();
            let fb = MelFilterbank::standard();
            let a = time_spectrum_pattern(&Matrix::from_rows(400, [&frame]).unwrap(), &fb);
            let b = time_spectrum_pattern(&Matrix::from_rows(400, [&louder]).unwrap(), &fb);
            for (x, y) in a.ts.as_slice().iter().zip(b.ts.as_slice()) {
                prop_assert!(y >= x);
            }
        }

        #[test]
        fn impulses_stay_finite(pos in 0usize..400, amp in -1.0f64..1.0) {
            let mut frame = vec![0.0; 400];
            frame[pos] = amp;
            let tsp = time_spectrum_pattern(&Matrix::from_rows(400, [&frame]).unwrap(), &MelFilterbank::standard());
            prop_assert!(tsp.ts.as_slice().iter().all(|v| v.is_finite()));
        }
    }
}
