//! 39-dimensional MFCC front-end.
//!
//! Row layout: `[c1..c12, P, Δc1..Δc12, ΔP, ΔΔc1..ΔΔc12, ΔΔP]`, where `P` is
//! the same floored log frame energy used by the local features.

use crate::lf::dct_ii;
use crate::spectral::{TimeSpectrumPattern, NUM_BANDS};
use crate::Matrix;

pub const MFCC_DIM: usize = 39;
pub const NUM_CEPSTRA: usize = 12;
pub const DEFAULT_DELTA_WINDOW: usize = 2;

/// Cepstral coefficients 1..=12 of each log-mel row (c0 dropped).
pub fn cepstra(tsp: &TimeSpectrumPattern) -> Matrix {
    assert_eq!(tsp.ts.cols(), NUM_BANDS, "time-spectrum pattern must have 24 bands");
    let mut out = Matrix::zeros(tsp.num_frames(), NUM_CEPSTRA);
    for (t, row) in tsp.ts.iter_rows().enumerate() {
        let c = dct_ii(row);
        out.row_mut(t).copy_from_slice(&c[1..=NUM_CEPSTRA]);
    }
    out
}

/// Regression deltas over ±`window` frames with edge replication:
/// `d[t] = Σ_k k·(x[t+k] − x[t−k]) / (2·Σ_k k²)`.
pub fn deltas(x: &Matrix, window: usize) -> Matrix {
    assert!(window >= 1, "delta window must be at least 1");
    let (rows, cols) = (x.rows(), x.cols());
    let mut out = Matrix::zeros(rows, cols);
    if rows == 0 {
        return out;
    }
    let norm: f64 = 2.0 * (1..=window).map(|k| (k * k) as f64).sum::<f64>();
    let last = rows as isize - 1;
    let at = |t: isize| x.row(t.clamp(0, last) as usize);
    for t in 0..rows {
        let dst = out.row_mut(t);
        for k in 1..=window {
            let (ahead, behind) = (at((t + k) as isize), at(t as isize - k as isize));
            for j in 0..cols {
                dst[j] += k as f64 * (ahead[j] - behind[j]);
            }
        }
        for v in dst.iter_mut() {
            *v /= norm;
        }
    }
    out
}

pub fn extract_mfcc(tsp: &TimeSpectrumPattern) -> Matrix {
    extract_mfcc_with_window(tsp, DEFAULT_DELTA_WINDOW)
}

pub fn extract_mfcc_with_window(tsp: &TimeSpectrumPattern, window: usize) -> Matrix {
    let c = cepstra(tsp);
    let p = Matrix::from_vec(tsp.num_frames(), 1, tsp.log_power.clone())
        .expect("one log power per frame");
    let statics = Matrix::hstack(&[&c, &p]).expect("equal frame counts");
    let d = deltas(&statics, window);
    let dd = deltas(&d, window);
    Matrix::hstack(&[&statics, &d, &dd]).expect("equal frame counts")
}
