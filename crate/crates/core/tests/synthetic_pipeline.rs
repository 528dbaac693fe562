use tandem_core::corpus::{default_profiles, generate_synthetic_corpus, random_utterance_specs};
use tandem_core::mln::{train, Mln, MlnTopology, Normalizer, TrainConfig, UtteranceFrames};
use tandem_core::{analyze, FrontEnd, Matrix, Waveform};

fn corpus(count: usize, seed: u64) -> Vec<(Waveform, Vec<usize>)> {
    let specs = random_utterance_specs(count, 5, seed);
    generate_synthetic_corpus(&default_profiles(5), &specs, seed)
        .unwrap()
        .into_iter()
        .map(|(w, r)| (w, r.frame_labels.unwrap()))
        .collect()
}

#[test]
fn front_end_shapes_on_synthetic_audio() {
    for (w, labels) in corpus(3, 1) {
        let tsp = analyze(&w, 0.97).unwrap();
        assert_eq!(tsp.num_frames(), labels.len());
        for fe in [FrontEnd::Mfcc39, FrontEnd::Lf25] {
            let f = fe.extract(&tsp, 2);
            assert_eq!((f.rows(), f.cols()), (labels.len(), fe.dim()));
            assert!(f.as_slice().iter().all(|v| v.is_finite()));
        }
    }
}

#[test]
fn mfcc_gain_invariance() {
    let (w, _) = corpus(1, 2).remove(0);
    let louder = Waveform::new(w.samples.iter().map(|s| s * 1.5).collect(), w.sample_rate);
    let a = FrontEnd::Mfcc39.extract(&analyze(&w, 0.97).unwrap(), 2);
    let b = FrontEnd::Mfcc39.extract(&analyze(&louder, 0.97).unwrap(), 2);
    for (ra, rb) in a.iter_rows().zip(b.iter_rows()) {
        for blk in [0..12, 13..25, 26..38] {
            for j in blk {
                assert!((ra[j] - rb[j]).abs() < 1e-9, "column {j}");
            }
        }
        assert!((rb[12] - ra[12] - 2.0 * 1.5f64.ln()).abs() < 1e-9);
    }
}

#[test]
fn synthetic_phonemes_peak_in_their_band() {
    let profiles = default_profiles(5);
    let specs = vec![tandem_core::UtteranceSpec { phonemes: vec![3], durations: vec![12] }];
    let (w, _) = generate_synthetic_corpus(&profiles, &specs, 0).unwrap().remove(0);
    let tsp = analyze(&w, 0.0).unwrap();
    let primary = (0..24)
        .max_by(|&a, &b| profiles[3].band_energies[a].total_cmp(&profiles[3].band_energies[b]))
        .unwrap();
    for row in tsp.ts.iter_rows().skip(2).take(8) {
        let best = (0..24).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        assert_eq!(best, primary);
    }
}

#[test]
fn trained_network_recognizes_training_frames() {
    let data = corpus(40, 7);
    let feats: Vec<Matrix> = data
        .iter()
        .map(|(w, _)| FrontEnd::Lf25.extract(&analyze(w, 0.97).unwrap(), 2))
        .collect();
    let labels: Vec<Vec<usize>> = data.iter().map(|(_, l)| l.clone()).collect();
    let norm = Normalizer::fit(&feats).unwrap();
    let normed: Vec<Matrix> = feats.iter().map(|f| norm.apply(f).unwrap()).collect();
    let frames = UtteranceFrames::new(normed, labels.clone()).unwrap();
    let mut net = Mln::new(&MlnTopology::standard(25, 6), 3).with_normalizer(norm).unwrap();
    let config = TrainConfig { learning_rate: 0.5, epochs: 8, minibatch: 4, seed: 3 };
    let trace = train(&mut net, &frames, &config).unwrap();
    assert!(trace.last().unwrap() < &trace[0]);
    let (mut right, mut total) = (0, 0);
    for (f, l) in feats.iter().zip(&labels) {
        let post = net.posteriors(f).unwrap();
        assert!(post.as_slice().iter().all(|&y| y > 0.0 && y < 1.0));
        for (row, &label) in post.iter_rows().zip(l) {
            let best = (0..6).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            right += usize::from(best == label);
            total += 1;
        }
    }
    let acc = right as f64 / total as f64;
    assert!(acc > 0.8, "frame accuracy {acc}");
}
