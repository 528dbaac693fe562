mod support;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use support::oracles;
use tandem_core::hmm::{
    forward_loglik, split_mixtures, train_embedded, viterbi_decode, DecodeConfig, EmConfig, GaussianComponent,
    GmmState, HmmSet, PhonemeHmm, NUM_EMITTING,
};
use tandem_core::Matrix;

fn random_set(rng: &mut ChaCha8Rng, n: usize, dim: usize, mixtures: usize) -> HmmSet {
    HmmSet {
        models: (0..n)
            .map(|p| {
                let mut m = PhonemeHmm::flat(p, &vec![0.0; dim], &vec![1.0; dim]);
                for i in 0..NUM_EMITTING {
                    let stay = rng.gen_range(0.05..0.95);
                    m.transitions[i + 1][i + 1] = stay;
                    m.transitions[i + 1][i + 2] = 1.0 - stay;
                    let raw: Vec<f64> = (0..mixtures).map(|_| rng.gen_range(0.2..1.0)).collect();
                    let total: f64 = raw.iter().sum();
                    m.states[i] = GmmState {
                        components: raw
                            .iter()
                            .map(|w| GaussianComponent {
                                weight: w / total,
                                mean: (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect(),
                                variance: (0..dim).map(|_| rng.gen_range(0.2..2.0)).collect(),
                            })
                            .collect(),
                    };
                }
                m
            })
            .collect(),
    }
}

fn random_obs(rng: &mut ChaCha8Rng, t: usize, dim: usize) -> Matrix {
    Matrix::from_vec(t, dim, (0..t * dim).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap()
}

#[test]
fn forward_matches_path_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let dim = rng.gen_range(1..=2);
        let mixtures = rng.gen_range(1..=2);
        let set = random_set(&mut rng, 2, dim, mixtures);
        let phonemes = rng.gen_range(1..=2);
        let transcription: Vec<usize> = (0..phonemes).map(|_| rng.gen_range(0..2)).collect();
        let t = rng.gen_range(3 * phonemes..=6);
        let obs = random_obs(&mut rng, t, dim);
        let fast = forward_loglik(&set, &transcription, &obs).unwrap();
        let slow = oracles::forward_by_enumeration(&set, &transcription, &obs);
        assert!((fast - slow).abs() <= 1e-9, "{fast} vs {slow}");
    }
}

#[test]
fn forward_five_frames_one_phoneme() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let set = random_set(&mut rng, 1, 2, 1);
    let obs = random_obs(&mut rng, 5, 2);
    let fast = forward_loglik(&set, &[0], &obs).unwrap();
    assert!((fast - oracles::forward_by_enumeration(&set, &[0], &obs)).abs() <= 1e-9);
}

#[test]
fn forward_dominates_any_single_alignment() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let set = random_set(&mut rng, 2, 1, 1);
    let obs = random_obs(&mut rng, 6, 1);
    let total = forward_loglik(&set, &[0, 1], &obs).unwrap();
    // the forced 3 + 3 alignment of two phonemes
    let path: Vec<(usize, usize)> = (0..6).map(|t| (t / 3, t % 3)).collect();
    let single = oracles::phone_loop_path_score(&set, &obs, &path, 0.0).unwrap();
    // remove the phone-loop entry weights, which the forced model does not use
    let single = single + 2.0 * 2f64.ln();
    assert!(total >= single - 1e-12);
}

#[test]
fn viterbi_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..100 {
        let dim = rng.gen_range(1..=2);
        let mixtures = rng.gen_range(1..=2);
        let set = random_set(&mut rng, 2, dim, mixtures);
        let t = rng.gen_range(3..=6);
        let obs = random_obs(&mut rng, t, dim);
        let penalty = if case % 3 == 0 { -rng.gen_range(0.0..3.0) } else { 0.0 };
        let config = DecodeConfig { insertion_penalty: penalty };
        let got = viterbi_decode(&set, &obs, &config).unwrap();
        let (best, _, _) = oracles::viterbi_by_enumeration(&set, &obs, penalty);
        assert!((got.log_score - best).abs() <= 1e-9, "case {case}: {} vs {best}", got.log_score);
        let achieved =
            oracles::best_score_for_segmentation(&set, &obs, penalty, &got.phonemes, &got.boundaries);
        assert!((achieved - best).abs() <= 1e-9, "case {case}: decoded path scores {achieved}");
    }
}

#[test]
fn hand_set_two_phoneme_system() {
    // phoneme 0 emits around -1, phoneme 1 around +1; d = 1, T = 4
    let mut a = PhonemeHmm::flat(0, &[-1.0], &[0.5]);
    let mut b = PhonemeHmm::flat(1, &[1.0], &[0.5]);
    for m in [&mut a, &mut b] {
        for i in 0..3 {
            m.transitions[i + 1][i + 1] = 0.5;
            m.transitions[i + 1][i + 2] = 0.5;
        }
    }
    let set = HmmSet { models: vec![a, b] };
    let obs = Matrix::from_vec(4, 1, vec![1.1, 0.9, 1.0, 0.8]).unwrap();
    let got = viterbi_decode(&set, &obs, &DecodeConfig::default()).unwrap();
    let (best, phonemes, bounds) = oracles::viterbi_by_enumeration(&set, &obs, 0.0);
    assert_eq!(got.phonemes, vec![1]);
    assert_eq!(got.phonemes, phonemes);
    assert_eq!(got.boundaries, bounds);
    assert!((got.log_score - best).abs() < 1e-12);
}

#[test]
fn insertion_penalty_never_adds_phonemes() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let set = random_set(&mut rng, 4, 2, 1);
        let obs = random_obs(&mut rng, 60, 2);
        let mut last = usize::MAX;
        for k in 0..12 {
            let penalty = -(k as f64) * 1.5;
            let n = viterbi_decode(&set, &obs, &DecodeConfig { insertion_penalty: penalty })
                .unwrap()
                .phonemes
                .len();
            assert!(n <= last, "penalty {penalty}: {n} > {last}");
            last = n;
        }
    }
}

/// Draws one observation sequence from a phoneme string's model.
fn sample_utterance(set: &HmmSet, transcription: &[usize], rng: &mut ChaCha8Rng) -> Matrix {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::new();
    for &p in transcription {
        let m = &set.models[p];
        for i in 0..NUM_EMITTING {
            loop {
                let comps = &m.states[i].components;
                let mut u = rng.gen_range(0.0..1.0);
                let c = comps
                    .iter()
                    .find(|c| {
                        u -= c.weight;
                        u <= 0.0
                    })
                    .unwrap_or(comps.last().unwrap());
                rows.push(
                    c.mean
                        .iter()
                        .zip(&c.variance)
                        .map(|(mu, v)| mu + v.sqrt() * normal.sample(rng))
                        .collect::<Vec<f64>>(),
                );
                if rng.gen_range(0.0..1.0) >= m.transitions[i + 1][i + 1] {
                    break;
                }
            }
        }
    }
    Matrix::from_rows(set.dim(), rows).unwrap()
}

fn mean_distance(a: &HmmSet, b: &HmmSet) -> f64 {
    let mut d = 0.0;
    for (ma, mb) in a.models.iter().zip(&b.models) {
        for (sa, sb) in ma.states.iter().zip(&mb.states) {
            for (x, y) in sa.components[0].mean.iter().zip(&sb.components[0].mean) {
                d += (x - y).powi(2);
            }
        }
    }
    d.sqrt()
}

#[test]
fn em_recovers_generating_means() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut truth = random_set(&mut rng, 2, 2, 1);
    for (k, m) in truth.models.iter_mut().enumerate() {
        for (i, s) in m.states.iter_mut().enumerate() {
            let c = &mut s.components[0];
            c.mean = vec![3.0 * k as f64 - 1.5, i as f64 - 1.0];
            c.variance = vec![0.05, 0.05];
        }
    }
    let transcription = vec![0, 1, 0];
    let corpus: Vec<(Matrix, Vec<usize>)> = (0..40)
        .map(|_| (sample_utterance(&truth, &transcription, &mut rng), transcription.clone()))
        .collect();
    let mut model = HmmSet::flat_start(2, corpus.iter().map(|c| &c.0), 1e-4).unwrap();
    let mut distances = vec![mean_distance(&model, &truth)];
    let mut trace = Vec::new();
    for _ in 0..5 {
        trace.extend(train_embedded(&mut model, &corpus, 1, &EmConfig::default()).unwrap());
        distances.push(mean_distance(&model, &truth));
    }
    assert!(distances[5] < distances[1], "{distances:?}");
    assert!(distances[5] < 0.25 * distances[0], "{distances:?}");
    for w in trace.windows(2) {
        assert!(w[1] >= w[0] - 1e-8, "{trace:?}");
    }
}

#[test]
fn em_monotone_across_mixture_ladder() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let truth = random_set(&mut rng, 3, 3, 2);
    let corpus: Vec<(Matrix, Vec<usize>)> = (0..30)
        .map(|_| {
            let t: Vec<usize> = vec![0, 1, 2, 1];
            (sample_utterance(&truth, &t, &mut rng), t)
        })
        .collect();
    let mut model = HmmSet::flat_start(3, corpus.iter().map(|c| &c.0), 1e-4).unwrap();
    for rung in 0..3 {
        if rung > 0 {
            split_mixtures(&mut model).unwrap();
        }
        let trace = train_embedded(&mut model, &corpus, 5, &EmConfig::default()).unwrap();
        assert_eq!(trace.len(), 5);
        for w in trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-8, "rung {rung}: {trace:?}");
        }
    }
    assert_eq!(model.num_components(), 4);
}

#[test]
fn em_reports_one_value_per_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let truth = random_set(&mut rng, 1, 1, 1);
    let corpus = vec![(sample_utterance(&truth, &[0], &mut rng), vec![0])];
    let mut model = HmmSet::flat_start(1, corpus.iter().map(|c| &c.0), 1e-4).unwrap();
    assert_eq!(train_embedded(&mut model, &corpus, 1, &EmConfig::default()).unwrap().len(), 1);
}
