//! Synthetic corpus: `sil` plus a handful of tone-template phonemes, written
//! as WAV files with manifests, an inventory and a ready-to-run config.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use tandem_core::audio::write_wav;
use tandem_core::corpus::{default_profiles, generate_synthetic_corpus, random_utterance_specs};
use tandem_core::PhonemeInventory;

use crate::config::{ExperimentConfig, HmmConfig, MlnConfig};
use crate::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub train: usize,
    pub test: usize,
    /// Phonemes besides `sil`.
    pub phonemes: usize,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            train: 200,
            test: 50,
            phonemes: 5,
            seed: 1,
        }
    }
}

pub const CONFIG_NAME: &str = "experiment.toml";

/// The inventory of a synthetic corpus: `sil`, then `p1..=pN`.
pub fn inventory(phonemes: usize) -> PhonemeInventory {
    let symbols = std::iter::once("sil".to_string()).chain((1..=phonemes).map(|p| format!("p{p}")));
    PhonemeInventory::new(symbols).expect("distinct symbols")
}

/// Config for a synthetic corpus. The toy data needs far fewer updates than
/// real speech, so the network trains with a larger step and fewer epochs.
pub fn default_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        train_manifest: "train.tsv".into(),
        test_manifest: Some("test.tsv".into()),
        inventory: Some("inventory.txt".into()),
        output_dir: "out".into(),
        mln: MlnConfig {
            learning_rate: 0.5,
            epochs: 8,
            minibatch: 4,
            seed,
            ..MlnConfig::default()
        },
        hmm: HmmConfig {
            mixtures: vec![1, 2, 4],
            ..HmmConfig::default()
        },
        ..ExperimentConfig::default()
    }
}

/// Writes the corpus under `out` and returns the path of its config.
pub fn write_corpus(out: &Path, opts: &SynthOptions) -> Result<PathBuf> {
    if opts.phonemes < 2 {
        bail!("a synthetic corpus needs at least two phonemes besides sil");
    }
    if opts.train == 0 {
        bail!("a synthetic corpus needs training utterances");
    }
    let inv = inventory(opts.phonemes);
    let profiles = default_profiles(opts.phonemes);
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    inv.save(out.join("inventory.txt"))?;

    // independent streams for the two sets
    let sets = [
        (Dataset::Train, opts.train, opts.seed.wrapping_mul(2)),
        (Dataset::Test, opts.test, opts.seed.wrapping_mul(2).wrapping_add(1)),
    ];
    for (ds, count, seed) in sets {
        let specs = random_utterance_specs(count, opts.phonemes, seed);
        let corpus = generate_synthetic_corpus(&profiles, &specs, seed)?;
        let dir = out.join(ds.name());
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut manifest = String::new();
        for (index, (wave, mut record)) in corpus.into_iter().enumerate() {
            record.id = format!("{ds}{index:05}");
            record.audio_path = PathBuf::from(ds.name()).join(format!("{}.wav", record.id));
            write_wav(out.join(&record.audio_path), &wave)?;
            manifest.push_str(&record.to_manifest_line(&inv));
            manifest.push('\n');
        }
        let path = out.join(format!("{ds}.tsv"));
        std::fs::write(&path, manifest).with_context(|| format!("writing {}", path.display()))?;
    }

    let mut config = default_config(opts.seed);
    if opts.test == 0 {
        config.test_manifest = None;
    }
    let path = out.join(CONFIG_NAME);
    std::fs::write(&path, config.to_toml()).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
