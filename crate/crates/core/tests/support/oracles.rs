//! Independent reference implementations used only by tests: exhaustive
//! HMM path enumeration and a distance-only Levenshtein.
#![allow(dead_code)]

use tandem_core::hmm::{HmmSet, NUM_EMITTING};
use tandem_core::Matrix;

/// Mixture log density evaluated in the linear domain.
pub fn emission(set: &HmmSet, phoneme: usize, state: usize, x: &[f64]) -> f64 {
    let mut p = 0.0;
    for c in &set.models[phoneme].states[state].components {
        let mut density = c.weight;
        for d in 0..x.len() {
            let v = c.variance[d];
            density *= (-(x[d] - c.mean[d]).powi(2) / (2.0 * v)).exp()
                / (2.0 * std::f64::consts::PI * v).sqrt();
        }
        p += density;
    }
    p.ln()
}

fn log_sum(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Calls `visit` with every sequence in `0..states` of length `len`.
fn for_each_sequence(states: usize, len: usize, mut visit: impl FnMut(&[usize])) {
    let mut seq = vec![0usize; len];
    loop {
        visit(&seq);
        let mut i = len;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            seq[i] += 1;
            if seq[i] < states {
                break;
            }
            seq[i] = 0;
        }
    }
}

/// Log-sum over every legal state path through the concatenation of
/// `transcription`'s models, found by enumerating all state sequences.
pub fn forward_by_enumeration(set: &HmmSet, transcription: &[usize], obs: &Matrix) -> f64 {
    let chain: Vec<(usize, usize)> = transcription
        .iter()
        .flat_map(|&p| (0..NUM_EMITTING).map(move |i| (p, i)))
        .collect();
    let s_len = chain.len();
    let t_len = obs.rows();
    let mut scores = Vec::new();
    for_each_sequence(s_len, t_len, |seq| {
        if seq[0] != 0 || seq[t_len - 1] != s_len - 1 {
            return;
        }
        let mut score = 0.0;
        for t in 0..t_len {
            let (p, i) = chain[seq[t]];
            if t > 0 {
                let prev = seq[t - 1];
                let (pp, pi) = chain[prev];
                let m = &set.models[pp];
                if seq[t] == prev {
                    score += m.transitions[pi + 1][pi + 1].ln();
                } else if seq[t] == prev + 1 {
                    score += m.transitions[pi + 1][pi + 2].ln();
                } else {
                    return;
                }
            }
            score += emission(set, p, i, obs.row(t));
        }
        let (lp, li) = chain[s_len - 1];
        score += set.models[lp].transitions[li + 1][li + 2].ln();
        scores.push(score);
    });
    log_sum(&scores)
}

/// Score of one phone-loop path given as per-frame (phoneme, state) pairs,
/// or `None` if the path is illegal.
pub fn phone_loop_path_score(set: &HmmSet, obs: &Matrix, path: &[(usize, usize)], penalty: f64) -> Option<f64> {
    let n = set.models.len();
    let entry = -(n as f64).ln() + penalty;
    let t_len = obs.rows();
    if path[0].1 != 0 || path[t_len - 1].1 != NUM_EMITTING - 1 {
        return None;
    }
    let mut score = entry;
    for t in 0..t_len {
        let (p, i) = path[t];
        if t > 0 {
            let (pp, pi) = path[t - 1];
            let m = &set.models[pp];
            if (p, i) == (pp, pi) {
                score += m.transitions[pi + 1][pi + 1].ln();
            } else if p == pp && i == pi + 1 {
                score += m.transitions[pi + 1][pi + 2].ln();
            } else if pi == NUM_EMITTING - 1 && i == 0 {
                score += m.transitions[pi + 1][pi + 2].ln() + entry;
            } else {
                return None;
            }
        }
        score += emission(set, p, i, obs.row(t));
    }
    let (lp, li) = path[t_len - 1];
    Some(score + set.models[lp].transitions[li + 1][li + 2].ln())
}

/// Collapses a legal phone-loop path into phoneme strings with boundaries.
pub fn segments(path: &[(usize, usize)]) -> (Vec<usize>, Vec<(usize, usize)>) {
    let mut phonemes = Vec::new();
    let mut starts = Vec::new();
    for (t, &(p, i)) in path.iter().enumerate() {
        let entering = i == 0 && (t == 0 || path[t - 1] != (p, 0));
        if entering {
            phonemes.push(p);
            starts.push(t);
        }
    }
    let bounds = starts
        .iter()
        .enumerate()
        .map(|(k, &s)| (s, starts.get(k + 1).copied().unwrap_or(path.len())))
        .collect();
    (phonemes, bounds)
}

/// Best phone-loop path by exhaustive enumeration: (score, phonemes, bounds).
pub fn viterbi_by_enumeration(set: &HmmSet, obs: &Matrix, penalty: f64) -> (f64, Vec<usize>, Vec<(usize, usize)>) {
    let n = set.models.len();
    let states = n * NUM_EMITTING;
    let mut best = (f64::NEG_INFINITY, Vec::new(), Vec::new());
    let mut path = vec![(0, 0); obs.rows()];
    for_each_sequence(states, obs.rows(), |seq| {
        for (dst, &s) in path.iter_mut().zip(seq) {
            *dst = (s / NUM_EMITTING, s % NUM_EMITTING);
        }
        if let Some(score) = phone_loop_path_score(set, obs, &path, penalty) {
            if score > best.0 {
                let (p, b) = segments(&path);
                best = (score, p, b);
            }
        }
    });
    best
}

/// Best score among enumerated paths that produce exactly the given
/// segmentation.
pub fn best_score_for_segmentation(
    set: &HmmSet,
    obs: &Matrix,
    penalty: f64,
    phonemes: &[usize],
    bounds: &[(usize, usize)],
) -> f64 {
    let states = set.models.len() * NUM_EMITTING;
    let mut best = f64::NEG_INFINITY;
    let mut path = vec![(0, 0); obs.rows()];
    for_each_sequence(states, obs.rows(), |seq| {
        for (dst, &s) in path.iter_mut().zip(seq) {
            *dst = (s / NUM_EMITTING, s % NUM_EMITTING);
        }
        if let Some(score) = phone_loop_path_score(set, obs, &path, penalty) {
            let (p, b) = segments(&path);
            if p == phonemes && b == bounds {
                best = best.max(score);
            }
        }
    });
    best
}

/// Plain Levenshtein distance, two-row DP.
pub fn levenshtein(a: &[usize], b: &[usize]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(x != y)).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}
