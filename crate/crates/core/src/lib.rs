//! Tandem phoneme recognition: acoustic front-ends (MFCC and local features),
//! a multilayer network producing per-frame phoneme scores, Gaussian-mixture
//! HMMs over those scores, and phoneme correct rate scoring.
//!
//! The pipeline for one utterance is
//!
//! ```text
//! Waveform -> FrameMatrix -> TimeSpectrumPattern -> { MFCC39 | LF25 }
//!          -> context window -> MLN posteriors -> phone-loop Viterbi -> phonemes
//! ```

pub mod audio;
pub mod corpus;
mod error;
pub mod lf;
pub mod matrix;
pub mod mfcc;
pub mod mln;
pub mod hmm;
pub mod scoring;
pub mod spectral;

pub use audio::{frame_and_window, read_wav, FrameMatrix, Waveform, FRAME_LENGTH, FRAME_SHIFT, SAMPLE_RATE};
pub use corpus::{PhonemeInventory, SyntheticPhonemeProfile, UtteranceRecord, UtteranceSpec};
pub use error::{Error, Result};
pub use hmm::{DecodeResult, GaussianComponent, GmmState, HmmSet, PhonemeHmm};
pub use lf::{extract_lf, LF_DIM};
pub use matrix::Matrix;
pub use mfcc::{extract_mfcc, MFCC_DIM};
pub use mln::{Mln, MlnTopology};
pub use scoring::AlignmentResult;
pub use spectral::{MelFilterbank, TimeSpectrumPattern, NUM_BANDS};

/// Acoustic front-end feeding the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrontEnd {
    Mfcc39,
    Lf25,
}

impl FrontEnd {
    pub fn dim(self) -> usize {
        match self {
            FrontEnd::Mfcc39 => MFCC_DIM,
            FrontEnd::Lf25 => LF_DIM,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FrontEnd::Mfcc39 => "mfcc39",
            FrontEnd::Lf25 => "lf25",
        }
    }

    /// Runs the front-end on a time-spectrum pattern.
    pub fn extract(self, tsp: &TimeSpectrumPattern, delta_window: usize) -> Matrix {
        match self {
            FrontEnd::Mfcc39 => mfcc::extract_mfcc_with_window(tsp, delta_window),
            FrontEnd::Lf25 => extract_lf(tsp),
        }
    }
}

/// Frames, windows and analyzes a 16 kHz waveform into its log-mel pattern
/// using the standard 24-band filterbank.
pub fn analyze(w: &Waveform, preemphasis: f64) -> Result<TimeSpectrumPattern> {
    let frames = frame_and_window(w, preemphasis)?;
    Ok(spectral::time_spectrum_pattern(&frames, &MelFilterbank::standard()))
}

impl std::str::FromStr for FrontEnd {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mfcc39" => Ok(FrontEnd::Mfcc39),
            "lf25" => Ok(FrontEnd::Lf25),
            other => Err(Error::InvalidArgument(format!("unknown front-end `{other}`"))),
        }
    }
}

impl std::fmt::Display for FrontEnd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
