//! Experiment configuration: a TOML key-value file plus `key=value` overrides.
//!
//! ```toml
//! train_manifest = "train.tsv"
//! test_manifest = "test.tsv"
//! inventory = "inventory.txt"   # omit for the bundled 53-symbol set
//! output_dir = "out"
//! front_ends = ["mfcc39", "lf25"]
//!
//! [mln]
//! learning_rate = 0.05
//! epochs = 30
//!
//! [hmm]
//! mixtures = [1, 2, 4, 8, 16]
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use tandem_core::hmm::{DEFAULT_VARIANCE_FLOOR, MAX_MIXTURES};
use tandem_core::mln::{Loss, DEFAULT_HIDDEN};
use tandem_core::FrontEnd;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub train_manifest: PathBuf,
    pub test_manifest: Option<PathBuf>,
    pub inventory: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub front_ends: Vec<String>,
    pub preemphasis: f64,
    /// Regression half-width of the MFCC deltas.
    pub delta_window: usize,
    pub mln: MlnConfig,
    pub hmm: HmmConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlnConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
    /// `sse` or `xent`.
    pub loss: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HmmConfig {
    pub mixtures: Vec<usize>,
    pub em_iterations: usize,
    pub variance_floor: f64,
    pub insertion_penalty: f64,
    /// Model log posteriors instead of the raw network outputs.
    pub log_posteriors: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            train_manifest: PathBuf::from("train.tsv"),
            test_manifest: None,
            inventory: None,
            output_dir: PathBuf::from("out"),
            front_ends: vec!["mfcc39".into(), "lf25".into()],
            preemphasis: tandem_core::audio::DEFAULT_PREEMPHASIS,
            delta_window: tandem_core::mfcc::DEFAULT_DELTA_WINDOW,
            mln: MlnConfig::default(),
            hmm: HmmConfig::default(),
        }
    }
}

impl Default for MlnConfig {
    fn default() -> Self {
        MlnConfig {
            learning_rate: 0.05,
            epochs: 30,
            minibatch: 1,
            seed: 1,
            hidden: DEFAULT_HIDDEN.to_vec(),
            loss: "sse".into(),
        }
    }
}

impl Default for HmmConfig {
    fn default() -> Self {
        HmmConfig {
            mixtures: vec![1, 2, 4, 8, 16],
            em_iterations: 5,
            variance_floor: DEFAULT_VARIANCE_FLOOR,
            insertion_penalty: 0.0,
            log_posteriors: false,
        }
    }
}

impl ExperimentConfig {
    /// Reads `path`, applies `overrides` (`dotted.key=value`, value in TOML
    /// syntax or a bare string), resolves relative paths and validates.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut table: toml::Table = text
            .parse()
            .with_context(|| format!("parsing config {}", path.display()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut config: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.train_manifest);
        fix(&mut self.output_dir);
        if let Some(p) = self.test_manifest.as_mut() {
            fix(p);
        }
        if let Some(p) = self.inventory.as_mut() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fes = self.front_ends()?;
        if fes.is_empty() {
            bail!("front_ends is empty");
        }
        for (i, fe) in fes.iter().enumerate() {
            if fes[..i].contains(fe) {
                bail!("front-end {fe} listed twice");
            }
        }
        let ladder = &self.hmm.mixtures;
        if ladder.is_empty() {
            bail!("hmm.mixtures is empty");
        }
        for &m in ladder {
            if !m.is_power_of_two() || m > MAX_MIXTURES {
                bail!("mixture count {m} is not one of 1, 2, 4, 8, 16");
            }
        }
        if ladder.windows(2).any(|w| w[0] >= w[1]) {
            bail!("hmm.mixtures must be strictly ascending, got {ladder:?}");
        }
        if self.hmm.em_iterations == 0 {
            bail!("hmm.em_iterations must be positive");
        }
        if !(self.hmm.variance_floor > 0.0) {
            bail!("hmm.variance_floor must be positive");
        }
        if !self.hmm.insertion_penalty.is_finite() {
            bail!("hmm.insertion_penalty must be finite");
        }
        self.loss()?;
        if self.mln.minibatch == 0 || self.mln.epochs == 0 {
            bail!("mln.minibatch and mln.epochs must be positive");
        }
        if !(self.mln.learning_rate > 0.0) {
            bail!("mln.learning_rate must be positive");
        }
        if self.mln.hidden.contains(&0) {
            bail!("mln.hidden layer sizes must be positive");
        }
        if self.delta_window == 0 {
            bail!("delta_window must be positive");
        }
        if !(0.0..1.0).contains(&self.preemphasis) {
            bail!("preemphasis must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn front_ends(&self) -> Result<Vec<FrontEnd>> {
        self.front_ends
            .iter()
            .map(|s| s.parse::<FrontEnd>().map_err(Into::into))
            .collect()
    }

    pub fn loss(&self) -> Result<Loss> {
        Ok(self.mln.loss.parse::<Loss>()?)
    }
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let Some((key, raw)) = assignment.split_once('=') else {
        bail!("override `{assignment}` is not key=value");
    };
    let key = key.trim();
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("bad override key `{key}`");
    }
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = match entry {
            toml::Value::Table(t) => t,
            _ => bail!("override `{key}`: `{part}` is not a table"),
        };
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
