//! 25-dimensional local features: slopes of the log-mel pattern along time
//! and along frequency, each compressed 24 → 12 with a DCT, plus the time
//! slope of log power.
//!
//! Row layout: `[0..12)` DCT of the time slopes, `[12..24)` DCT of the
//! frequency slopes, `[24]` ΔP.

use std::f64::consts::PI;

use crate::spectral::{TimeSpectrumPattern, NUM_BANDS};
use crate::{Error, Matrix, Result};

pub const LF_DIM: usize = 25;
/// Coefficients kept from each 24-point DCT.
pub const LF_DCT_KEEP: usize = 12;

/// Three-point least-squares slope along `x`, replicating the edges:
/// `(x[i+1] - x[i-1]) / 2`.
fn three_point_slope(x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for i in 0..n {
        let next = x[(i + 1).min(n - 1)];
        let prev = x[i.saturating_sub(1)];
        out[i] = (next - prev) / 2.0;
    }
}

/// Slope of every band along the time axis.
pub fn three_point_lr_time(ts: &Matrix) -> Matrix {
    let (rows, cols) = (ts.rows(), ts.cols());
    let mut out = Matrix::zeros(rows, cols);
    if rows == 0 {
        return out;
    }
    let mut column = vec![0.0; rows];
    let mut slope = vec![0.0; rows];
    for j in 0..cols {
        for (t, c) in column.iter_mut().enumerate() {
            *c = ts.get(t, j);
        }
        three_point_slope(&column, &mut slope);
        for (t, &s) in slope.iter().enumerate() {
            out.set(t, j, s);
        }
    }
    out
}

/// Slope of every frame along the band axis.
pub fn three_point_lr_freq(ts: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(ts.rows(), ts.cols());
    if ts.cols() == 0 {
        return out;
    }
    for t in 0..ts.rows() {
        three_point_slope(ts.row(t), out.row_mut(t));
    }
    out
}

/// ΔP: the time slope of log power.
pub fn delta_log_power(log_power: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; log_power.len()];
    if !log_power.is_empty() {
        three_point_slope(log_power, &mut out);
    }
    out
}

/// Orthonormal DCT-II of `x`, all `x.len()` coefficients.
pub fn dct_ii(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let nf = n as f64;
    (0..n)
        .map(|k| {
            let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            let sum: f64 = x
                .iter()
                .enumerate()
                .map(|(i, &v)| v * (PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf)).cos())
                .sum();
            scale * sum
        })
        .collect()
}

/// Keeps DCT coefficients 0..12 of a 24-band row.
pub fn dct_compress_24_to_12(row: &[f64]) -> Result<[f64; LF_DCT_KEEP]> {
    if row.len() != NUM_BANDS {
        return Err(Error::dim(NUM_BANDS, row.len()));
    }
    let full = dct_ii(row);
    let mut out = [0.0; LF_DCT_KEEP];
    out.copy_from_slice(&full[..LF_DCT_KEEP]);
    Ok(out)
}

pub fn extract_lf(tsp: &TimeSpectrumPattern) -> Matrix {
    assert_eq!(tsp.ts.cols(), NUM_BANDS, "time-spectrum pattern must have 24 bands");
    let dt = three_point_lr_time(&tsp.ts);
    let df = three_point_lr_freq(&tsp.ts);
    let dp = delta_log_power(&tsp.log_power);
    let mut out = Matrix::zeros(tsp.num_frames(), LF_DIM);
    for t in 0..tsp.num_frames() {
        let a = dct_compress_24_to_12(dt.row(t)).expect("24 bands");
        let b = dct_compress_24_to_12(df.row(t)).expect("24 bands");
        let row = out.row_mut(t);
        row[..12].copy_from_slice(&a);
        row[12..24].copy_from_slice(&b);
        row[24] = dp[t];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn random_ts(seed: u64, rows: usize) -> Matrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_vec(rows, 24, (0..rows * 24).map(|_| rng.gen_range(-20.0..5.0)).collect())
            .unwrap()
    }

    /// Least-squares slope over offsets -1, 0, 1 with replicated edges,
    /// written as Σ k·x[t+k] / Σ k².
    fn lr_oracle(x: &[f64], t: usize) -> f64 {
        let n = x.len() as isize;
        let at = |i: isize| x[i.clamp(0, n - 1) as usize];
        let t = t as isize;
        let num: f64 = [-1isize, 0, 1].iter().map(|&k| k as f64 * at(t + k)).sum();
        num / 2.0
    }

    #[test]
    fn time_slope_of_ramp() {
        let ts = Matrix::from_vec(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(three_point_lr_time(&ts).as_slice(), &[0.5, 1.0, 0.5]);
    }

    #[test]
    fn constant_has_zero_slopes() {
        let ts = Matrix::from_vec(4, 24, vec![3.25; 96]).unwrap();
        assert!(three_point_lr_time(&ts).as_slice().iter().all(|&v| v == 0.0));
        assert!(three_point_lr_freq(&ts).as_slice().iter().all(|&v| v == 0.0));
        assert!(delta_log_power(&[2.0; 5]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn freq_slope_of_ramp() {
        let ramp: Vec<f64> = (1..=24).map(|i| 2.0 * i as f64).collect();
        let ts = Matrix::from_rows(24, [&ramp]).unwrap();
        let out = three_point_lr_freq(&ts);
        let row = out.row(0);
        assert!(row[1..23].iter().all(|&v| v == 2.0));
        assert_eq!(row[0], 1.0);
        assert_eq!(row[23], 1.0);
    }

    #[test]
    fn slopes_match_least_squares_oracle() {
        let ts = random_ts(11, 9);
        let dt = three_point_lr_time(&ts);
        let df = three_point_lr_freq(&ts);
        let tr = ts.transpose();
        for t in 0..9 {
            for j in 0..24 {
                assert!((dt.get(t, j) - lr_oracle(tr.row(j), t)).abs() <= 1e-12);
                assert!((df.get(t, j) - lr_oracle(ts.row(t), j)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn freq_is_transposed_time() {
        let ts = random_ts(5, 7);
        let via_time = three_point_lr_time(&ts.transpose()).transpose();
        assert_eq!(three_point_lr_freq(&ts), via_time);
    }

    #[test]
    fn delta_power_examples() {
        assert_eq!(delta_log_power(&[0.0, 1.0, 2.0]), vec![0.5, 1.0, 0.5]);
        let p = vec![0.3, -1.0, 4.0, 2.5];
        let as_column = Matrix::from_vec(4, 1, p.clone()).unwrap();
        assert_eq!(delta_log_power(&p), three_point_lr_time(&as_column).into_vec());
    }

    #[test]
    fn dct_of_constant_is_dc_only() {
        let y = dct_compress_24_to_12(&[1.0; 24]).unwrap();
        assert!((y[0] - 24f64.sqrt()).abs() < 1e-12);
        assert!((y[0] - 4.89898).abs() < 1e-5);
        assert!(y[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn dct_of_basis_vector() {
        let x: Vec<f64> = (0..24)
            .map(|n| (PI * (2 * n + 1) as f64 * 3.0 / 48.0).cos())
            .collect();
        let y = dct_compress_24_to_12(&x).unwrap();
        for (k, v) in y.iter().enumerate() {
            if k == 3 {
                assert!((v - 12f64.sqrt()).abs() < 1e-12);
            } else {
                assert!(v.abs() < 1e-12, "coefficient {k} = {v}");
            }
        }
    }

    #[test]
    fn dct_wrong_length() {
        assert!(dct_compress_24_to_12(&[0.0; 23]).is_err());
    }

    #[test]
    fn dct_parseval() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..24).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let y = dct_ii(&x);
        let ex: f64 = x.iter().map(|v| v * v).sum();
        let ey: f64 = y.iter().map(|v| v * v).sum();
        assert!((ex - ey).abs() <= 1e-9 * ex);
    }

    fn tsp_from(ts: Matrix, log_power: Vec<f64>) -> TimeSpectrumPattern {
        TimeSpectrumPattern { ts, log_power }
    }

    #[test]
    fn silence_gives_zero_lf() {
        let floor = 1e-10f64.ln();
        let tsp = tsp_from(Matrix::from_vec(5, 24, vec![floor; 120]).unwrap(), vec![floor; 5]);
        let lf = extract_lf(&tsp);
        assert_eq!(lf.cols(), 25);
        assert!(lf.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lf_layout_matches_parts() {
        let ts = random_ts(2, 6);
        let lp: Vec<f64> = (0..6).map(|i| (i * i) as f64 * 0.3).collect();
        let lf = extract_lf(&tsp_from(ts.clone(), lp.clone()));
        let dt = three_point_lr_time(&ts);
        let df = three_point_lr_freq(&ts);
        let dp = delta_log_power(&lp);
        for t in 0..6 {
            assert_eq!(&lf.row(t)[..12], &dct_compress_24_to_12(dt.row(t)).unwrap());
            assert_eq!(&lf.row(t)[12..24], &dct_compress_24_to_12(df.row(t)).unwrap());
            assert_eq!(lf.get(t, 24), dp[t]);
        }
    }

    #[test]
    fn time_reversal_negates_time_slopes() {
        let ts = random_ts(8, 10);
        let rev = Matrix::from_rows(24, (0..10).rev().map(|t| ts.row(t).to_vec())).unwrap();
        let a = three_point_lr_time(&ts);
        let b = three_point_lr_time(&rev);
        let fa = three_point_lr_freq(&ts);
        let fb = three_point_lr_freq(&rev);
        for t in 1..9 {
            for j in 0..24 {
                assert!((a.get(t, j) + b.get(9 - t, j)).abs() < 1e-12);
                assert!((fa.get(t, j).abs() - fb.get(9 - t, j).abs()).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn offset_invariance(seed in 0u64..10_000, offset in -50.0f64..50.0, rows in 1usize..12) {
            let ts = random_ts(seed, rows);
            let lp: Vec<f64> = ts.iter_rows().map(|r| r[0]).collect();
            let shifted = Matrix::from_vec(rows, 24, ts.as_slice().iter().map(|v| v + offset).collect()).unwrap();
            let lp_shifted: Vec<f64> = lp.iter().map(|v| v + offset).collect();
            let a = extract_lf(&tsp_from(ts, lp));
            let b = extract_lf(&tsp_from(shifted, lp_shifted));
            prop_assert_eq!(b.cols(), 25);
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                prop_assert!((x - y).abs() <= 1e-9, "{} vs {}", x, y);
                prop_assert!(y.is_finite());
            }
        }
    }
}
