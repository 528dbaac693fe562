//! Experiment runner: every stage reads the previous stage's artifacts from
//! the output directory and writes its own, so any stage can be rerun alone.
//!
//! ```text
//! <output_dir>/features/<fe>/<dataset>/<id>.tpf
//!              mln/<fe>.mln, mln/<fe>.loss.txt
//!              posteriors/<fe>/<dataset>/<id>.tpf
//!              hmm/<fe>/mix<M>.hmm, hmm/<fe>/mix<M>.loglik.txt
//!              decode/<fe>/mix<M>/<dataset>.txt
//!              confusion/<fe>/mix<M>/<dataset>.tsv
//!              results.csv
//! ```

pub mod config;
pub mod pipeline;
pub mod results;
pub mod synth;
pub mod tpf;

use std::path::{Path, PathBuf};

use tandem_core::FrontEnd;

pub use config::ExperimentConfig;
pub use pipeline::Experiment;
pub use results::{ResultRow, ResultTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dataset {
    Train,
    Test,
}

impl Dataset {
    pub fn name(self) -> &'static str {
        match self {
            Dataset::Train => "train",
            Dataset::Test => "test",
        }
    }
}

impl std::fmt::Display for Dataset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Dataset {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s {
            "train" => Ok(Dataset::Train),
            "test" => Ok(Dataset::Test),
            other => anyhow::bail!("unknown dataset `{other}`"),
        }
    }
}

/// Where each artifact lives under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn features(&self, fe: FrontEnd, ds: Dataset, id: &str) -> PathBuf {
        self.root.join("features").join(fe.name()).join(ds.name()).join(format!("{id}.tpf"))
    }

    pub fn mln(&self, fe: FrontEnd) -> PathBuf {
        self.root.join("mln").join(format!("{fe}.mln"))
    }

    pub fn mln_loss(&self, fe: FrontEnd) -> PathBuf {
        self.root.join("mln").join(format!("{fe}.loss.txt"))
    }

    pub fn posteriors(&self, fe: FrontEnd, ds: Dataset, id: &str) -> PathBuf {
        self.root.join("posteriors").join(fe.name()).join(ds.name()).join(format!("{id}.tpf"))
    }

    pub fn hmm(&self, fe: FrontEnd, mixtures: usize) -> PathBuf {
        self.root.join("hmm").join(fe.name()).join(format!("mix{mixtures}.hmm"))
    }

    pub fn hmm_trace(&self, fe: FrontEnd, mixtures: usize) -> PathBuf {
        self.root.join("hmm").join(fe.name()).join(format!("mix{mixtures}.loglik.txt"))
    }

    pub fn decode(&self, fe: FrontEnd, mixtures: usize, ds: Dataset) -> PathBuf {
        self.root
            .join("decode")
            .join(fe.name())
            .join(format!("mix{mixtures}"))
            .join(format!("{ds}.txt"))
    }

    pub fn confusion(&self, fe: FrontEnd, mixtures: usize, ds: Dataset) -> PathBuf {
        self.root
            .join("confusion")
            .join(fe.name())
            .join(format!("mix{mixtures}"))
            .join(format!("{ds}.tsv"))
    }

    pub fn results(&self) -> PathBuf {
        self.root.join("results.csv")
    }
}

/// One value per line in Rust's shortest round-trip form.
pub fn write_trace(path: &Path, values: &[f64]) -> anyhow::Result<()> {
    let text: String = values.iter().map(|v| format!("{v}\n")).collect();
    tpf::write_atomic(path, text.as_bytes())
}

pub fn read_trace(path: &Path) -> anyhow::Result<Vec<f64>> {
    use anyhow::Context;
    std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?
        .lines()
        .map(|l| l.trim().parse::<f64>().with_context(|| format!("bad value `{l}` in {}", path.display())))
        .collect()
}
