//! The pipeline stages.

use std::collections::HashMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use log::{error, info, warn};
use rayon::prelude::*;
use tandem_core::corpus::{load_manifest, uniform_segment_labels};
use tandem_core::hmm::{self, DecodeConfig, EmConfig, NUM_EMITTING};
use tandem_core::mln::{self, MlnTopology, Normalizer, TrainConfig, UtteranceFrames};
use tandem_core::scoring::{self, Confusion};
use tandem_core::{analyze, read_wav, FrontEnd, HmmSet, Matrix, Mln, PhonemeInventory, UtteranceRecord};

use crate::results::{confusion_tsv, ResultRow, ResultTable};
use crate::{tpf, write_trace, Dataset, ExperimentConfig, Layout};

/// A loaded configuration together with its inventory and manifests.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub inventory: PhonemeInventory,
    pub front_ends: Vec<FrontEnd>,
    pub train: Vec<UtteranceRecord>,
    pub test: Option<Vec<UtteranceRecord>>,
    pub layout: Layout,
}

impl Experiment {
    pub fn load(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let inventory = match &config.inventory {
            Some(p) => PhonemeInventory::load(p)?,
            None => PhonemeInventory::bangla(),
        };
        let train = load_manifest(&config.train_manifest, &inventory)?;
        let test = config
            .test_manifest
            .as_ref()
            .map(|p| load_manifest(p, &inventory))
            .transpose()?;
        for records in std::iter::once(&train).chain(&test) {
            for r in records {
                if r.id.is_empty() || r.id.contains(['/', '\\']) || r.id.starts_with('.') {
                    bail!("utterance id `{}` cannot be used as a file name", r.id);
                }
            }
        }
        Ok(Experiment {
            front_ends: config.front_ends()?,
            layout: Layout::new(&config.output_dir),
            config,
            inventory,
            train,
            test,
        })
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        Self::load(ExperimentConfig::load(path, overrides)?)
    }

    pub fn datasets(&self) -> Vec<(Dataset, &[UtteranceRecord])> {
        let mut out = vec![(Dataset::Train, self.train.as_slice())];
        if let Some(test) = &self.test {
            out.push((Dataset::Test, test.as_slice()));
        }
        out
    }

    fn observations(&self, fe: FrontEnd, ds: Dataset, r: &UtteranceRecord) -> Result<Matrix> {
        let path = self.layout.posteriors(fe, ds, &r.id);
        if !path.exists() {
            bail!("missing posteriors {} (run `tandem posteriors` first)", path.display());
        }
        let post = tpf::read(&path)?;
        if post.cols() != self.inventory.len() {
            bail!(
                "posteriors {} have {} columns, the inventory has {} phonemes",
                path.display(),
                post.cols(),
                self.inventory.len()
            );
        }
        Ok(if self.config.hmm.log_posteriors {
            hmm::log_transform(&post)
        } else {
            post
        })
    }

    fn features(&self, fe: FrontEnd, ds: Dataset, r: &UtteranceRecord) -> Result<Matrix> {
        let path = self.layout.features(fe, ds, &r.id);
        if !path.exists() {
            bail!("missing features {} (run `tandem extract` first)", path.display());
        }
        let f = tpf::read(&path)?;
        if f.cols() != fe.dim() {
            bail!("features {} have dimension {}, {fe} needs {}", path.display(), f.cols(), fe.dim());
        }
        Ok(f)
    }
}

/// Runs `f` on every utterance in parallel. Failures are logged with the
/// utterance id; the run continues and the failed count is returned.
fn per_utterance<T: Send>(
    stage: &str,
    records: &[UtteranceRecord],
    f: impl Fn(&UtteranceRecord) -> Result<T> + Sync,
) -> (Vec<Option<T>>, usize) {
    let results: Vec<Option<T>> = records
        .par_iter()
        .map(|r| match f(r) {
            Ok(v) => Some(v),
            Err(e) => {
                error!("{stage}: utterance {}: {e:#}", r.id);
                None
            }
        })
        .collect();
    let failed = results.iter().filter(|r| r.is_none()).count();
    (results, failed)
}

fn all_or_bail<T>(stage: &str, results: Vec<Option<T>>, failed: usize) -> Result<Vec<T>> {
    if failed > 0 {
        bail!("{stage}: {failed} utterance(s) failed");
    }
    Ok(results.into_iter().map(|r| r.expect("no failures")).collect())
}

pub fn extract(exp: &Experiment) -> Result<()> {
    let mut failed = 0;
    for (ds, records) in exp.datasets() {
        info!("extract: {} {ds} utterances", records.len());
        let (_, n) = per_utterance("extract", records, |r| {
            let wave = read_wav(&r.audio_path)?;
            let tsp = analyze(&wave, exp.config.preemphasis)?;
            for &fe in &exp.front_ends {
                let feats = fe.extract(&tsp, exp.config.delta_window);
                tpf::write(&exp.layout.features(fe, ds, &r.id), &feats)?;
            }
            Ok(())
        });
        failed += n;
    }
    if failed > 0 {
        bail!("extract: {failed} utterance(s) failed");
    }
    Ok(())
}

fn frame_labels(r: &UtteranceRecord, frames: usize) -> Result<Vec<usize>> {
    let labels = match &r.frame_labels {
        Some(l) => l.clone(),
        None => uniform_segment_labels(&r.transcription, frames)?,
    };
    if labels.len() != frames {
        bail!("{} frame labels for {frames} frames", labels.len());
    }
    Ok(labels)
}

pub fn train_mln(exp: &Experiment) -> Result<()> {
    let cfg = &exp.config.mln;
    for &fe in &exp.front_ends {
        let (loaded, failed) = per_utterance("train-mln", &exp.train, |r| {
            let f = exp.features(fe, Dataset::Train, r)?;
            let labels = frame_labels(r, f.rows())?;
            Ok((f, labels))
        });
        let loaded = all_or_bail("train-mln", loaded, failed)?;
        let (feats, labels): (Vec<Matrix>, Vec<Vec<usize>>) = loaded.into_iter().unzip();
        let norm = Normalizer::fit(&feats)?;
        let normed = feats.iter().map(|f| norm.apply(f)).collect::<tandem_core::Result<Vec<_>>>()?;
        let frames = UtteranceFrames::new(normed, labels)?;

        let mut sizes = vec![3 * fe.dim()];
        sizes.extend(&cfg.hidden);
        sizes.push(exp.inventory.len());
        let topology = MlnTopology::new(sizes, exp.config.loss()?)?;
        let mut net = Mln::new(&topology, cfg.seed).with_normalizer(norm)?;
        info!(
            "train-mln {fe}: {} frames, {} parameters, {} epochs",
            mln::FrameSource::len(&frames),
            net.num_parameters(),
            cfg.epochs
        );
        let trace = mln::train(
            &mut net,
            &frames,
            &TrainConfig {
                learning_rate: cfg.learning_rate,
                epochs: cfg.epochs,
                minibatch: cfg.minibatch,
                seed: cfg.seed,
            },
        )?;
        info!("train-mln {fe}: loss {:.5} -> {:.5}", trace[0], trace[trace.len() - 1]);
        let path = exp.layout.mln(fe);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        net.save(&path)?;
        write_trace(&exp.layout.mln_loss(fe), &trace)?;
    }
    Ok(())
}

fn load_mln(exp: &Experiment, fe: FrontEnd) -> Result<Mln> {
    let path = exp.layout.mln(fe);
    if !path.exists() {
        bail!("missing network {} (run `tandem train-mln` first)", path.display());
    }
    let net = Mln::load(&path)?;
    if net.input_dim() != 3 * fe.dim() {
        bail!(
            "network {} takes {} inputs, {fe} context windows have {}",
            path.display(),
            net.input_dim(),
            3 * fe.dim()
        );
    }
    if net.output_dim() != exp.inventory.len() {
        bail!(
            "network {} has {} outputs, the inventory has {} phonemes",
            path.display(),
            net.output_dim(),
            exp.inventory.len()
        );
    }
    Ok(net)
}

pub fn posteriors(exp: &Experiment) -> Result<()> {
    let mut failed = 0;
    for &fe in &exp.front_ends {
        let net = load_mln(exp, fe)?;
        for (ds, records) in exp.datasets() {
            info!("posteriors {fe}: {} {ds} utterances", records.len());
            let (_, n) = per_utterance("posteriors", records, |r| {
                let post = net.posteriors(&exp.features(fe, ds, r)?)?;
                tpf::write(&exp.layout.posteriors(fe, ds, &r.id), &post)
            });
            failed += n;
        }
    }
    if failed > 0 {
        bail!("posteriors: {failed} utterance(s) failed");
    }
    Ok(())
}

pub fn train_hmm(exp: &Experiment) -> Result<()> {
    let cfg = &exp.config.hmm;
    let em = EmConfig {
        variance_floor: cfg.variance_floor,
    };
    let top = *cfg.mixtures.last().expect("validated ladder");
    for &fe in &exp.front_ends {
        let (loaded, failed) = per_utterance("train-hmm", &exp.train, |r| {
            Ok((exp.observations(fe, Dataset::Train, r)?, r.transcription.clone()))
        });
        let loaded = all_or_bail("train-hmm", loaded, failed)?;
        let mut corpus = Vec::with_capacity(loaded.len());
        for ((obs, trans), r) in loaded.into_iter().zip(&exp.train) {
            if obs.rows() < NUM_EMITTING * trans.len() {
                warn!(
                    "train-hmm {fe}: skipping {}: {} frames cannot cover {} phonemes",
                    r.id,
                    obs.rows(),
                    trans.len()
                );
                continue;
            }
            corpus.push((obs, trans));
        }
        if corpus.is_empty() {
            bail!("train-hmm {fe}: no usable training utterances");
        }
        let mut set = HmmSet::flat_start(exp.inventory.len(), corpus.iter().map(|(o, _)| o), cfg.variance_floor)?;
        let mut mixtures = 1;
        loop {
            let trace = hmm::train_embedded(&mut set, &corpus, cfg.em_iterations, &em)?;
            info!(
                "train-hmm {fe} mix{mixtures}: loglik/frame {:.4} -> {:.4}",
                trace[0] / corpus_frames(&corpus),
                trace[trace.len() - 1] / corpus_frames(&corpus)
            );
            if trace.windows(2).any(|w| w[1] < w[0] - 1e-8 * w[0].abs().max(1.0)) {
                warn!("train-hmm {fe} mix{mixtures}: log-likelihood decreased: {trace:?}");
            }
            if cfg.mixtures.contains(&mixtures) {
                let path = exp.layout.hmm(fe, mixtures);
                if let Some(dir) = path.parent() {
                    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                }
                set.save(&path, &exp.inventory)?;
                write_trace(&exp.layout.hmm_trace(fe, mixtures), &trace)?;
            }
            if mixtures == top {
                break;
            }
            hmm::split_mixtures(&mut set)?;
            mixtures *= 2;
        }
    }
    Ok(())
}

fn corpus_frames(corpus: &[(Matrix, Vec<usize>)]) -> f64 {
    corpus.iter().map(|(o, _)| o.rows()).sum::<usize>() as f64
}

pub fn decode(exp: &Experiment) -> Result<()> {
    let config = DecodeConfig {
        insertion_penalty: exp.config.hmm.insertion_penalty,
    };
    let mut failed = 0;
    for &fe in &exp.front_ends {
        for &m in &exp.config.hmm.mixtures {
            let path = exp.layout.hmm(fe, m);
            if !path.exists() {
                bail!("missing model {} (run `tandem train-hmm` first)", path.display());
            }
            let set = HmmSet::load(&path, &exp.inventory)?;
            for (ds, records) in exp.datasets() {
                let (results, n) = per_utterance("decode", records, |r| {
                    let obs = exp.observations(fe, ds, r)?;
                    Ok(hmm::viterbi_decode(&set, &obs, &config)?.phonemes)
                });
                failed += n;
                let mut text = String::new();
                for (r, hyp) in records.iter().zip(&results) {
                    if let Some(hyp) = hyp {
                        text.push_str(&r.id);
                        text.push('\t');
                        text.push_str(&exp.inventory.ids_to_symbols(hyp).join(" "));
                        text.push('\n');
                    }
                }
                tpf::write_atomic(&exp.layout.decode(fe, m, ds), text.as_bytes())?;
                info!("decode {fe} mix{m} {ds}: {} utterances", records.len() - n);
            }
        }
    }
    if failed > 0 {
        bail!("decode: {failed} utterance(s) failed");
    }
    Ok(())
}

/// Reads a decode file into id → phoneme ids.
pub fn read_decode(path: &Path, inv: &PhonemeInventory) -> Result<HashMap<String, Vec<usize>>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let (id, hyp) = line
            .split_once('\t')
            .ok_or_else(|| anyhow!("{}:{}: expected `id<TAB>phonemes`", path.display(), i + 1))?;
        let ids = hyp
            .split_whitespace()
            .map(|s| {
                inv.id(s)
                    .ok_or_else(|| anyhow!("{}:{}: unknown phoneme `{s}`", path.display(), i + 1))
            })
            .collect::<Result<Vec<_>>>()?;
        if out.insert(id.to_string(), ids).is_some() {
            bail!("{}:{}: duplicate utterance {id}", path.display(), i + 1);
        }
    }
    Ok(out)
}

fn score_cell(
    exp: &Experiment,
    fe: FrontEnd,
    m: usize,
    ds: Dataset,
    records: &[UtteranceRecord],
) -> Result<ResultRow> {
    let path = exp.layout.decode(fe, m, ds);
    if !path.exists() {
        bail!("missing decode {}", path.display());
    }
    let hyps = read_decode(&path, &exp.inventory)?;
    let mut counts = Vec::with_capacity(records.len());
    let mut confusion = Confusion::new(exp.inventory.len());
    for r in records {
        let hyp = hyps
            .get(&r.id)
            .ok_or_else(|| anyhow!("{} has no hypothesis for {}", path.display(), r.id))?;
        let (c, ops) = scoring::align_detailed(&r.transcription, hyp).with_context(|| format!("utterance {}", r.id))?;
        confusion.add(&ops);
        counts.push(c);
    }
    let total = counts
        .iter()
        .fold(tandem_core::AlignmentResult::default(), |acc, c| acc.merge(c));
    Ok(ResultRow {
        front_end: fe,
        mixtures: m,
        dataset: ds,
        pcr: scoring::pcr(&counts)?,
        acc: scoring::accuracy(&counts)?,
        counts: total,
        confusion,
    })
}

/// Scores every requested cell and writes `results.csv`. Missing cells are
/// listed and the partial table is still written, but the stage fails.
pub fn score(exp: &Experiment) -> Result<ResultTable> {
    let mut table = ResultTable::default();
    let mut missing = Vec::new();
    for &fe in &exp.front_ends {
        for (ds, records) in exp.datasets() {
            for &m in &exp.config.hmm.mixtures {
                match score_cell(exp, fe, m, ds, records) {
                    Ok(row) => {
                        let tsv = confusion_tsv(&row.confusion, exp.inventory.symbols());
                        tpf::write_atomic(&exp.layout.confusion(fe, m, ds), tsv.as_bytes())?;
                        info!("score {fe} mix{m} {ds}: pcr {:.2} acc {:.2}", row.pcr, row.acc);
                        table.rows.push(row);
                    }
                    Err(e) => {
                        warn!("score: cell {fe}/mix{m}/{ds} unavailable: {e:#}");
                        missing.push(format!("{fe}/mix{m}/{ds}"));
                    }
                }
            }
        }
    }
    table.sort(&exp.front_ends);
    tpf::write_atomic(&exp.layout.results(), table.to_csv().as_bytes())?;
    if !missing.is_empty() {
        warn!("score: partial table written to {}", exp.layout.results().display());
        bail!("score: {} missing cell(s): {}", missing.len(), missing.join(", "));
    }
    Ok(table)
}

pub fn run_all(exp: &Experiment) -> Result<ResultTable> {
    extract(exp)?;
    train_mln(exp)?;
    posteriors(exp)?;
    train_hmm(exp)?;
    decode(exp)?;
    score(exp)
}
