//! Phoneme inventory, corpus manifests and the synthetic corpus generator.
//!
//! Inventory files hold one symbol per line; blank lines and lines starting
//! with `#` are ignored. Manifests hold one utterance per line:
//!
//! ```text
//! <id>\t<audio_path>\t<space-separated transcription>[\t<space-separated frame labels>]
//! ```
//!
//! Relative audio paths are resolved against the manifest's directory.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::audio::{num_frames, samples_for_frames, Waveform, FRAME_LENGTH, FRAME_SHIFT, SAMPLE_RATE};
use crate::spectral::{MelFilterbank, NUM_BANDS};
use crate::{Error, Result};

const DEFAULT_INVENTORY: &str = include_str!("../data/inventory.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhonemeInventory {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl PhonemeInventory {
    pub fn new<S: Into<String>>(symbols: impl IntoIterator<Item = S>) -> Result<Self> {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(Error::DuplicateSymbol(s.clone()));
            }
        }
        Ok(PhonemeInventory { symbols, index })
    }

    /// The shipped 53-symbol Bangla monophone set (51 phonemes, `sil`, `sp`).
    pub fn bangla() -> Self {
        Self::parse(DEFAULT_INVENTORY, Path::new("<builtin>")).expect("builtin inventory is valid")
    }

    fn parse(text: &str, path: &Path) -> Result<Self> {
        let symbols: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        if symbols.is_empty() {
            return Err(Error::EmptyInventory {
                path: path.to_path_buf(),
            });
        }
        Self::new(symbols)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.symbols {
            out.push_str(s);
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn id(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    pub fn symbol(&self, id: usize) -> Option<&str> {
        self.symbols.get(id).map(String::as_str)
    }

    /// FNV-1a over the newline-joined symbols; stored in model files so a
    /// model is never decoded against a different inventory.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_text().bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h
    }

    pub fn ids_to_symbols(&self, ids: &[usize]) -> Vec<&str> {
        ids.iter().map(|&i| self.symbols[i].as_str()).collect()
    }
}

pub fn load_inventory(path: impl AsRef<Path>) -> Result<PhonemeInventory> {
    PhonemeInventory::load(path)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtteranceRecord {
    pub id: String,
    pub audio_path: PathBuf,
    pub transcription: Vec<usize>,
    pub frame_labels: Option<Vec<usize>>,
}

impl UtteranceRecord {
    /// One manifest line (no trailing newline). `audio_path` is written as is.
    pub fn to_manifest_line(&self, inv: &PhonemeInventory) -> String {
        let mut line = format!(
            "{}\t{}\t{}",
            self.id,
            self.audio_path.display(),
            inv.ids_to_symbols(&self.transcription).join(" ")
        );
        if let Some(labels) = &self.frame_labels {
            line.push('\t');
            line.push_str(&inv.ids_to_symbols(labels).join(" "));
        }
        line
    }
}

fn wav_frame_count(path: &Path) -> Result<usize> {
    let reader = hound::WavReader::open(path).map_err(|e| Error::Wav {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let per_channel = reader.len() as usize / usize::from(reader.spec().channels.max(1));
    Ok(num_frames(per_channel))
}

pub fn load_manifest(path: impl AsRef<Path>, inv: &PhonemeInventory) -> Result<Vec<UtteranceRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| Error::Malformed {
            path: path.to_path_buf(),
            line: lineno + 1,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(malformed(format!("expected 3 or 4 tab-separated fields, found {}", fields.len())));
        }
        let id = fields[0].trim();
        if id.is_empty() {
            return Err(malformed("empty utterance id".into()));
        }
        let to_ids = |field: &str| -> Result<Vec<usize>> {
            field
                .split_whitespace()
                .map(|s| {
                    inv.id(s).ok_or_else(|| Error::UnknownSymbol {
                        utterance: id.to_string(),
                        symbol: s.to_string(),
                    })
                })
                .collect()
        };
        let transcription = to_ids(fields[2])?;
        if transcription.is_empty() {
            return Err(malformed("empty transcription".into()));
        }
        let frame_labels = fields.get(3).map(|f| to_ids(f)).transpose()?;
        let audio_path = base.join(fields[1].trim());
        if !audio_path.is_file() {
            return Err(Error::MissingAudio {
                utterance: id.to_string(),
                path: audio_path,
            });
        }
        if let Some(labels) = &frame_labels {
            let frames = wav_frame_count(&audio_path)?;
            if labels.len() != frames {
                return Err(malformed(format!(
                    "{} frame labels for audio with {frames} frames",
                    labels.len()
                )));
            }
        }
        records.push(UtteranceRecord {
            id: id.to_string(),
            audio_path,
            transcription,
            frame_labels,
        });
    }
    Ok(records)
}

/// Splits `total_frames` into one contiguous block per phoneme; block sizes
/// differ by at most one and the earlier phonemes take the remainder.
pub fn uniform_segment_labels(transcription: &[usize], total_frames: usize) -> Result<Vec<usize>> {
    let n = transcription.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty transcription".into()));
    }
    if total_frames < n {
        return Err(Error::TooShort {
            frames: total_frames,
            required: n,
        });
    }
    let (base, extra) = (total_frames / n, total_frames % n);
    let mut labels = Vec::with_capacity(total_frames);
    for (i, &p) in transcription.iter().enumerate() {
        let len = base + usize::from(i < extra);
        labels.extend(std::iter::repeat(p).take(len));
    }
    Ok(labels)
}

/// Mel-band energy template used to synthesize one phoneme.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPhonemeProfile {
    pub phoneme_id: usize,
    pub band_energies: [f64; NUM_BANDS],
    pub noise_level: f64,
}

impl SyntheticPhonemeProfile {
    pub fn validate(&self) -> Result<()> {
        if self.band_energies.iter().any(|&e| !(e >= 0.0)) || !self.band_energies.iter().any(|&e| e > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "profile for phoneme {}: band energies must be nonnegative with one positive",
                self.phoneme_id
            )));
        }
        if !(self.noise_level >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "profile for phoneme {}: negative noise level",
                self.phoneme_id
            )));
        }
        Ok(())
    }
}

/// Profiles for `sil` (id 0) and phonemes `1..=num_phonemes`. Each phoneme
/// has a distinct primary band and a secondary band over a weak floor; `sil`
/// is near-silent.
pub fn default_profiles(num_phonemes: usize) -> Vec<SyntheticPhonemeProfile> {
    let mut out = vec![SyntheticPhonemeProfile {
        phoneme_id: 0,
        band_energies: [1e-4; NUM_BANDS],
        noise_level: 0.002,
    }];
    for p in 1..=num_phonemes {
        let primary = (2 + 4 * (p - 1) + (p - 1) / 6) % NUM_BANDS;
        let secondary = (primary + 9 + 2 * p) % NUM_BANDS;
        let mut e = [0.01; NUM_BANDS];
        for (band, level) in [(secondary, 0.4), (primary, 1.0)] {
            e[band] = level;
            for nb in [band.wrapping_sub(1), band + 1] {
                if nb < NUM_BANDS && e[nb] < level * 0.3 {
                    e[nb] = level * 0.3;
                }
            }
        }
        out.push(SyntheticPhonemeProfile {
            phoneme_id: p,
            band_energies: e,
            noise_level: 0.002,
        });
    }
    out
}

/// Phoneme sequence and per-phoneme durations (in frames) of one synthetic
/// utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtteranceSpec {
    pub phonemes: Vec<usize>,
    pub durations: Vec<usize>,
}

impl UtteranceSpec {
    pub fn total_frames(&self) -> usize {
        self.durations.iter().sum()
    }

    pub fn frame_labels(&self) -> Vec<usize> {
        self.phonemes
            .iter()
            .zip(&self.durations)
            .flat_map(|(&p, &d)| std::iter::repeat(p).take(d))
            .collect()
    }
}

/// Random utterances framed by `sil` (id 0): 3 to 6 phonemes from
/// `1..=num_phonemes` with no immediate repeats.
pub fn random_utterance_specs(count: usize, num_phonemes: usize, seed: u64) -> Vec<UtteranceSpec> {
    assert!(num_phonemes >= 2, "need at least two phonemes");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(3..=6);
            let mut phonemes = vec![0];
            let mut durations = vec![rng.gen_range(8..=14)];
            for _ in 0..n {
                let prev = *phonemes.last().unwrap();
                let p = loop {
                    let p = rng.gen_range(1..=num_phonemes);
                    if p != prev {
                        break p;
                    }
                };
                phonemes.push(p);
                durations.push(rng.gen_range(6..=12));
            }
            phonemes.push(0);
            durations.push(rng.gen_range(8..=14));
            UtteranceSpec { phonemes, durations }
        })
        .collect()
}

/// Peak amplitude of a unit-energy band tone.
const TONE_SCALE: f64 = 0.08;

/// Synthesizes each utterance as a sum of tones at the mel band centers,
/// weighted by the active phoneme's template, plus Gaussian noise. Frame `t`
/// owns the 160 samples centered in its analysis window, so the frame labels
/// follow the durations exactly. Utterance `i` draws from stream `i` of a
/// ChaCha generator seeded with `seed`.
pub fn generate_synthetic_corpus(
    profiles: &[SyntheticPhonemeProfile],
    specs: &[UtteranceSpec],
    seed: u64,
) -> Result<Vec<(Waveform, UtteranceRecord)>> {
    let mut by_id: HashMap<usize, &SyntheticPhonemeProfile> = HashMap::new();
    for p in profiles {
        p.validate()?;
        by_id.insert(p.phoneme_id, p);
    }
    for spec in specs {
        if spec.phonemes.len() != spec.durations.len() || spec.phonemes.is_empty() {
            return Err(Error::InvalidArgument(
                "utterance spec needs one duration per phoneme".into(),
            ));
        }
        if spec.durations.contains(&0) {
            return Err(Error::InvalidArgument("phoneme durations must be at least one frame".into()));
        }
        if let Some(&missing) = spec.phonemes.iter().find(|p| !by_id.contains_key(p)) {
            return Err(Error::UnknownPhonemeId(missing));
        }
    }
    let centers = MelFilterbank::standard().center_frequencies();
    specs
        .par_iter()
        .enumerate()
        .map(|(index, spec)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index as u64);
            let labels = spec.frame_labels();
            let frames = labels.len();
            let n_samples = samples_for_frames(frames);
            let phases: Vec<f64> = (0..NUM_BANDS)
                .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
                .collect();
            let gain = rng.gen_range(0.7..1.3);
            let jitter: Vec<f64> = (0..NUM_BANDS).map(|_| rng.gen_range(0.8..1.2)).collect();
            let amplitudes: HashMap<usize, Vec<f64>> = spec
                .phonemes
                .iter()
                .map(|&p| {
                    let e = &by_id[&p].band_energies;
                    (p, (0..NUM_BANDS).map(|j| gain * TONE_SCALE * jitter[j] * e[j].sqrt()).collect())
                })
                .collect();
            let normal = Normal::new(0.0, 1.0).expect("unit normal");
            let center_offset = (FRAME_LENGTH - FRAME_SHIFT) / 2;
            let samples = (0..n_samples)
                .map(|n| {
                    let t = (n.saturating_sub(center_offset) / FRAME_SHIFT).min(frames - 1);
                    let p = labels[t];
                    let time = n as f64 / f64::from(SAMPLE_RATE);
                    let tone: f64 = amplitudes[&p]
                        .iter()
                        .zip(&centers)
                        .zip(&phases)
                        .map(|((a, f), ph)| a * (std::f64::consts::TAU * f * time + ph).sin())
                        .sum();
                    let noise = by_id[&p].noise_level * gain * normal.sample(&mut rng);
                    (tone + noise).clamp(-1.0, 1.0)
                })
                .collect();
            let id = format!("synth{index:05}");
            let record = UtteranceRecord {
                audio_path: PathBuf::from(format!("{id}.wav")),
                id,
                transcription: spec.phonemes.clone(),
                frame_labels: Some(labels),
            };
            Ok((Waveform::new(samples, SAMPLE_RATE), record))
        })
        .collect()
}
