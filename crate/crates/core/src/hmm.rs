//! Left-to-right monophone HMMs with diagonal-covariance Gaussian mixture
//! emissions: embedded Baum-Welch training, mixture splitting and
//! phone-loop Viterbi decoding.
//!
//! Every phoneme model has five states: a non-emitting entry, three emitting
//! states with self-loops, and a non-emitting exit. Allowed arcs are
//! entry→e1, eᵢ→eᵢ, eᵢ→eᵢ₊₁ and e3→exit; there are no skips, so a phoneme
//! occupies at least three frames.
//!
//! # Model file format
//!
//! Little-endian throughout:
//!
//! ```text
//! b"THMM" | u32 version (=1) | u64 inventory fingerprint | u32 n_models | u32 dim
//! | per model: u32 phoneme_id | f64 transitions[5 × 5] (row-major)
//! |   per emitting state: u32 n_components
//! |     per component: f64 weight | f64 mean[dim] | f64 variance[dim]
//! ```

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::{Error, Matrix, PhonemeInventory, Result};

pub const NUM_STATES: usize = 5;
pub const NUM_EMITTING: usize = 3;
pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-4;
pub const MAX_MIXTURES: usize = 16;
/// Initial self-loop probability of every emitting state.
pub const FLAT_LOOP_PROB: f64 = 0.6;
/// Mean offset, in standard deviations, applied when splitting a component.
pub const SPLIT_OFFSET: f64 = 0.2;
const WEIGHT_FLOOR: f64 = 1e-12;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn ln_prob(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        f64::NEG_INFINITY
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl GaussianComponent {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// `ln N(x; mean, diag(variance))`.
pub fn log_gaussian(comp: &GaussianComponent, x: &[f64]) -> Result<f64> {
    if x.len() != comp.dim() {
        return Err(Error::dim(comp.dim(), x.len()));
    }
    Ok(log_gaussian_unchecked(comp, x))
}

fn log_gaussian_unchecked(comp: &GaussianComponent, x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((&xd, &m), &v) in x.iter().zip(&comp.mean).zip(&comp.variance) {
        let diff = xd - m;
        acc += LN_2PI + v.ln() + diff * diff / v;
    }
    -0.5 * acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmState {
    pub components: Vec<GaussianComponent>,
}

impl GmmState {
    pub fn single(mean: Vec<f64>, variance: Vec<f64>) -> Self {
        GmmState {
            components: vec![GaussianComponent {
                weight: 1.0,
                mean,
                variance,
            }],
        }
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    /// `ln Σ_m w_m N_m(x)`, accumulated in the log domain.
    pub fn log_likelihood(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::dim(self.dim(), x.len()));
        }
        Ok(self.log_likelihood_unchecked(x))
    }

    fn log_likelihood_unchecked(&self, x: &[f64]) -> f64 {
        if let [only] = self.components.as_slice() {
            return only.weight.ln() + log_gaussian_unchecked(only, x);
        }
        self.components
            .iter()
            .map(|c| c.weight.ln() + log_gaussian_unchecked(c, x))
            .fold(f64::NEG_INFINITY, log_sum_exp)
    }

    fn component_logs(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.components.iter().map(|c| c.weight.ln() + log_gaussian_unchecked(c, x)));
    }
}

pub fn log_gmm(state: &GmmState, x: &[f64]) -> Result<f64> {
    state.log_likelihood(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhonemeHmm {
    pub phoneme_id: usize,
    /// The three emitting states e1..e3 (model states 1..=3).
    pub states: Vec<GmmState>,
    /// Row-major 5×5; row `i` holds the outgoing probabilities of state `i`.
    pub transitions: [[f64; NUM_STATES]; NUM_STATES],
}

impl PhonemeHmm {
    /// Every emitting state gets one Gaussian with the given statistics;
    /// self-loops are [`FLAT_LOOP_PROB`].
    pub fn flat(phoneme_id: usize, mean: &[f64], variance: &[f64]) -> Self {
        let mut transitions = [[0.0; NUM_STATES]; NUM_STATES];
        transitions[0][1] = 1.0;
        for s in 1..=NUM_EMITTING {
            transitions[s][s] = FLAT_LOOP_PROB;
            transitions[s][s + 1] = 1.0 - FLAT_LOOP_PROB;
        }
        PhonemeHmm {
            phoneme_id,
            states: (0..NUM_EMITTING)
                .map(|_| GmmState::single(mean.to_vec(), variance.to_vec()))
                .collect(),
            transitions,
        }
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn num_components(&self) -> usize {
        self.states[0].num_components()
    }

    /// Self-loop probability of emitting state `i` (0-based).
    pub fn loop_prob(&self, i: usize) -> f64 {
        self.transitions[i + 1][i + 1]
    }

    /// Probability of leaving emitting state `i` forward.
    pub fn advance_prob(&self, i: usize) -> f64 {
        self.transitions[i + 1][i + 2]
    }

    fn set_loop(&mut self, i: usize, p: f64) {
        self.transitions[i + 1][i + 1] = p;
        self.transitions[i + 1][i + 2] = 1.0 - p;
    }
}

/// One model per inventory entry; `models[i].phoneme_id == i`.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmSet {
    pub models: Vec<PhonemeHmm>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    pub variance_floor: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            variance_floor: DEFAULT_VARIANCE_FLOOR,
        }
    }
}

impl HmmSet {
    /// Flat start: the global mean and (floored) variance of all observations
    /// in every emitting state of every model.
    pub fn flat_start<'a>(
        num_models: usize,
        observations: impl IntoIterator<Item = &'a Matrix>,
        variance_floor: f64,
    ) -> Result<Self> {
        let mut sum: Vec<f64> = Vec::new();
        let mut sq: Vec<f64> = Vec::new();
        let mut n = 0usize;
        for obs in observations {
            if sum.is_empty() {
                sum = vec![0.0; obs.cols()];
                sq = vec![0.0; obs.cols()];
            } else if obs.cols() != sum.len() {
                return Err(Error::dim(sum.len(), obs.cols()));
            }
            for row in obs.iter_rows() {
                for ((s, q), &x) in sum.iter_mut().zip(sq.iter_mut()).zip(row) {
                    *s += x;
                    *q += x * x;
                }
            }
            n += obs.rows();
        }
        if n == 0 {
            return Err(Error::InvalidArgument("flat start needs at least one frame".into()));
        }
        let nf = n as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
        let var: Vec<f64> = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| (q / nf - m * m).max(variance_floor))
            .collect();
        Ok(HmmSet {
            models: (0..num_models).map(|p| PhonemeHmm::flat(p, &mean, &var)).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.models[0].dim()
    }

    pub fn num_components(&self) -> usize {
        self.models[0].num_components()
    }

    fn model(&self, phoneme: usize) -> Result<&PhonemeHmm> {
        self.models.get(phoneme).ok_or(Error::UnknownPhonemeId(phoneme))
    }

    pub fn save(&self, path: impl AsRef<Path>, inv: &PhonemeInventory) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_to(&mut buf, inv.fingerprint()).expect("writing to memory");
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    /// Loads a model set, rejecting files trained against another inventory.
    pub fn load(path: impl AsRef<Path>, inv: &PhonemeInventory) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let (fingerprint, set) = Self::read_from(&mut bytes.as_slice())
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if fingerprint != inv.fingerprint() {
            return Err(Error::Format(format!(
                "{}: models were trained with a different phoneme inventory",
                path.display()
            )));
        }
        if set.models.len() != inv.len() {
            return Err(Error::dim(inv.len(), set.models.len()));
        }
        Ok(set)
    }

    pub fn write_to(&self, w: &mut impl Write, fingerprint: u64) -> std::io::Result<()> {
        let put_u32 = |w: &mut dyn Write, v: usize| w.write_all(&(v as u32).to_le_bytes());
        w.write_all(MAGIC)?;
        put_u32(w, 1)?;
        w.write_all(&fingerprint.to_le_bytes())?;
        put_u32(w, self.models.len())?;
        put_u32(w, self.dim())?;
        for m in &self.models {
            put_u32(w, m.phoneme_id)?;
            for v in m.transitions.iter().flatten() {
                w.write_all(&v.to_le_bytes())?;
            }
            for s in &m.states {
                put_u32(w, s.components.len())?;
                for c in &s.components {
                    w.write_all(&c.weight.to_le_bytes())?;
                    for v in c.mean.iter().chain(&c.variance) {
                        w.write_all(&v.to_le_bytes())?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> std::result::Result<(u64, Self), String> {
        fn take<const N: usize>(r: &mut impl Read) -> std::result::Result<[u8; N], String> {
            let mut b = [0u8; N];
            r.read_exact(&mut b).map_err(|e| e.to_string())?;
            Ok(b)
        }
        let u32le = |r: &mut dyn Read| -> std::result::Result<usize, String> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(|e| e.to_string())?;
            Ok(u32::from_le_bytes(b) as usize)
        };
        let f64le = |r: &mut dyn Read| -> std::result::Result<f64, String> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b).map_err(|e| e.to_string())?;
            Ok(f64::from_le_bytes(b))
        };
        if &take::<4>(r)? != MAGIC {
            return Err("not an HMM model file".into());
        }
        let version = u32le(r)?;
        if version != 1 {
            return Err(format!("unsupported model version {version}"));
        }
        let fingerprint = u64::from_le_bytes(take::<8>(r)?);
        let n_models = u32le(r)?;
        let dim = u32le(r)?;
        if n_models == 0 || dim == 0 {
            return Err("empty model set".into());
        }
        let mut models = Vec::with_capacity(n_models);
        for expected in 0..n_models {
            let phoneme_id = u32le(r)?;
            if phoneme_id != expected {
                return Err(format!("model {expected} has phoneme id {phoneme_id}"));
            }
            let mut transitions = [[0.0; NUM_STATES]; NUM_STATES];
            for v in transitions.iter_mut().flatten() {
                *v = f64le(r)?;
            }
            let mut states = Vec::with_capacity(NUM_EMITTING);
            for _ in 0..NUM_EMITTING {
                let n = u32le(r)?;
                if !(1..=MAX_MIXTURES).contains(&n) {
                    return Err(format!("bad component count {n}"));
                }
                let mut components = Vec::with_capacity(n);
                for _ in 0..n {
                    let weight = f64le(r)?;
                    let mean = (0..dim).map(|_| f64le(r)).collect::<std::result::Result<_, _>>()?;
                    let variance = (0..dim).map(|_| f64le(r)).collect::<std::result::Result<_, _>>()?;
                    components.push(GaussianComponent { weight, mean, variance });
                }
                states.push(GmmState { components });
            }
            models.push(PhonemeHmm {
                phoneme_id,
                states,
                transitions,
            });
        }
        Ok((fingerprint, HmmSet { models }))
    }
}

const MAGIC: &[u8; 4] = b"THMM";

/// Elementwise `ln(max(y, 1e-6))`, an optional transform of network scores
/// before they reach the Gaussians.
pub fn log_transform(obs: &Matrix) -> Matrix {
    let data = obs.as_slice().iter().map(|&y| y.max(1e-6).ln()).collect();
    Matrix::from_vec(obs.rows(), obs.cols(), data).expect("same shape")
}

/// Left-to-right chain of emitting states for a transcription.
struct Chain<'a> {
    states: Vec<(&'a PhonemeHmm, usize)>,
    log_loop: Vec<f64>,
    log_adv: Vec<f64>,
}

impl<'a> Chain<'a> {
    fn new(set: &'a HmmSet, transcription: &[usize]) -> Result<Self> {
        if transcription.is_empty() {
            return Err(Error::InvalidArgument("empty transcription".into()));
        }
        let mut states = Vec::with_capacity(transcription.len() * NUM_EMITTING);
        for &p in transcription {
            let m = set.model(p)?;
            states.extend((0..NUM_EMITTING).map(|i| (m, i)));
        }
        let log_loop = states.iter().map(|(m, i)| ln_prob(m.loop_prob(*i))).collect();
        let log_adv = states.iter().map(|(m, i)| ln_prob(m.advance_prob(*i))).collect();
        Ok(Chain {
            states,
            log_loop,
            log_adv,
        })
    }

    fn len(&self) -> usize {
        self.states.len()
    }

    fn emissions(&self, obs: &Matrix) -> Result<Matrix> {
        let dim = self.states[0].0.dim();
        if obs.cols() != dim {
            return Err(Error::dim(dim, obs.cols()));
        }
        if obs.rows() < self.len() {
            return Err(Error::TooShort {
                frames: obs.rows(),
                required: self.len(),
            });
        }
        let mut b = Matrix::zeros(obs.rows(), self.len());
        for (t, x) in obs.iter_rows().enumerate() {
            for (s, (m, i)) in self.states.iter().enumerate() {
                b.set(t, s, m.states[*i].log_likelihood_unchecked(x));
            }
        }
        Ok(b)
    }

    fn forward(&self, b: &Matrix) -> (Matrix, f64) {
        let (t_len, s_len) = (b.rows(), self.len());
        let mut alpha = Matrix::from_vec(t_len, s_len, vec![f64::NEG_INFINITY; t_len * s_len]).unwrap();
        alpha.set(0, 0, b.get(0, 0));
        for t in 1..t_len {
            // only the first t + 1 chain states are reachable at time t
            for s in 0..s_len.min(t + 1) {
                let stay = alpha.get(t - 1, s) + self.log_loop[s];
                let enter = if s > 0 {
                    alpha.get(t - 1, s - 1) + self.log_adv[s - 1]
                } else {
                    f64::NEG_INFINITY
                };
                alpha.set(t, s, log_sum_exp(stay, enter) + b.get(t, s));
            }
        }
        let ll = alpha.get(t_len - 1, s_len - 1) + self.log_adv[s_len - 1];
        (alpha, ll)
    }

    fn backward(&self, b: &Matrix) -> Matrix {
        let (t_len, s_len) = (b.rows(), self.len());
        let mut beta = Matrix::from_vec(t_len, s_len, vec![f64::NEG_INFINITY; t_len * s_len]).unwrap();
        beta.set(t_len - 1, s_len - 1, self.log_adv[s_len - 1]);
        for t in (0..t_len - 1).rev() {
            for s in 0..s_len {
                let stay = self.log_loop[s] + b.get(t + 1, s) + beta.get(t + 1, s);
                let next = if s + 1 < s_len {
                    self.log_adv[s] + b.get(t + 1, s + 1) + beta.get(t + 1, s + 1)
                } else {
                    f64::NEG_INFINITY
                };
                beta.set(t, s, log_sum_exp(stay, next));
            }
        }
        beta
    }
}

/// `ln P(obs | transcription)` under the concatenated phoneme models.
pub fn forward_loglik(set: &HmmSet, transcription: &[usize], obs: &Matrix) -> Result<f64> {
    let chain = Chain::new(set, transcription)?;
    let b = chain.emissions(obs)?;
    Ok(chain.forward(&b).1)
}

#[derive(Debug, Clone, PartialEq)]
struct ComponentAcc {
    occ: f64,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
struct ModelAcc {
    /// Per emitting state, per component.
    components: Vec<Vec<ComponentAcc>>,
    loops: [f64; NUM_EMITTING],
    advances: [f64; NUM_EMITTING],
}

impl ModelAcc {
    fn new(model: &PhonemeHmm) -> Self {
        let d = model.dim();
        ModelAcc {
            components: model
                .states
                .iter()
                .map(|s| {
                    (0..s.num_components())
                        .map(|_| ComponentAcc {
                            occ: 0.0,
                            sum: vec![0.0; d],
                            sum_sq: vec![0.0; d],
                        })
                        .collect()
                })
                .collect(),
            loops: [0.0; NUM_EMITTING],
            advances: [0.0; NUM_EMITTING],
        }
    }

    fn merge(&mut self, other: &ModelAcc) {
        for (a, b) in self.components.iter_mut().flatten().zip(other.components.iter().flatten()) {
            a.occ += b.occ;
            a.sum.iter_mut().zip(&b.sum).for_each(|(x, y)| *x += y);
            a.sum_sq.iter_mut().zip(&b.sum_sq).for_each(|(x, y)| *x += y);
        }
        for i in 0..NUM_EMITTING {
            self.loops[i] += other.loops[i];
            self.advances[i] += other.advances[i];
        }
    }
}

/// Sufficient statistics of one or more utterances. Accumulators for
/// disjoint utterance sets merge associatively (up to float reassociation).
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    models: Vec<Option<ModelAcc>>,
    pub log_likelihood: f64,
    pub frames: usize,
}

impl Accumulator {
    pub fn new(set: &HmmSet) -> Self {
        Accumulator {
            models: vec![None; set.models.len()],
            log_likelihood: 0.0,
            frames: 0,
        }
    }

    pub fn merge(&mut self, other: &Accumulator) {
        for (a, b) in self.models.iter_mut().zip(&other.models) {
            match (a.as_mut(), b) {
                (Some(a), Some(b)) => a.merge(b),
                (None, Some(b)) => *a = Some(b.clone()),
                _ => {}
            }
        }
        self.log_likelihood += other.log_likelihood;
        self.frames += other.frames;
    }

    /// Forward-backward over one utterance's concatenated model.
    pub fn accumulate(&mut self, set: &HmmSet, obs: &Matrix, transcription: &[usize]) -> Result<()> {
        let chain = Chain::new(set, transcription)?;
        let b = chain.emissions(obs)?;
        let (alpha, ll) = chain.forward(&b);
        if !ll.is_finite() {
            return Err(Error::InvalidArgument("utterance has zero likelihood under the models".into()));
        }
        let beta = chain.backward(&b);
        let (t_len, s_len) = (obs.rows(), chain.len());
        let mut comp_logs = Vec::new();
        for (s, &(model, i)) in chain.states.iter().enumerate() {
            let acc = self.models[model.phoneme_id].get_or_insert_with(|| ModelAcc::new(model));
            let state = &model.states[i];
            for t in 0..t_len {
                let log_gamma = alpha.get(t, s) + beta.get(t, s) - ll;
                if log_gamma == f64::NEG_INFINITY {
                    continue;
                }
                let gamma = log_gamma.exp();
                let x = obs.row(t);
                state.component_logs(x, &mut comp_logs);
                let total = b.get(t, s);
                for (c, &lc) in acc.components[i].iter_mut().zip(&comp_logs) {
                    let g = gamma * (lc - total).exp();
                    c.occ += g;
                    for ((sum, sq), &xd) in c.sum.iter_mut().zip(c.sum_sq.iter_mut()).zip(x) {
                        *sum += g * xd;
                        *sq += g * xd * xd;
                    }
                }
                if t + 1 < t_len {
                    let stay = alpha.get(t, s) + chain.log_loop[s] + b.get(t + 1, s) + beta.get(t + 1, s) - ll;
                    acc.loops[i] += stay.exp();
                    if s + 1 < s_len {
                        let go = alpha.get(t, s) + chain.log_adv[s] + b.get(t + 1, s + 1) + beta.get(t + 1, s + 1) - ll;
                        acc.advances[i] += go.exp();
                    }
                }
            }
            if s + 1 == s_len {
                // the final exit is taken with certainty
                acc.advances[i] += 1.0;
            }
        }
        self.log_likelihood += ll;
        self.frames += t_len;
        Ok(())
    }

    /// Maximum-likelihood re-estimation. States and components without
    /// occupancy keep their parameters.
    pub fn apply(&self, set: &mut HmmSet, config: &EmConfig) {
        for (model, acc) in set.models.iter_mut().zip(&self.models) {
            let Some(acc) = acc else { continue };
            for i in 0..NUM_EMITTING {
                let visits = acc.loops[i] + acc.advances[i];
                if visits > 0.0 {
                    model.set_loop(i, acc.loops[i] / visits);
                }
                let state = &mut model.states[i];
                let comps = &acc.components[i];
                let occ: f64 = comps.iter().map(|c| c.occ).sum();
                if occ <= 0.0 {
                    continue;
                }
                for (comp, a) in state.components.iter_mut().zip(comps) {
                    comp.weight = (a.occ / occ).max(WEIGHT_FLOOR);
                    if a.occ > 0.0 {
                        for d in 0..comp.mean.len() {
                            let mean = a.sum[d] / a.occ;
                            let var = a.sum_sq[d] / a.occ - mean * mean;
                            comp.mean[d] = mean;
                            comp.variance[d] = var.max(config.variance_floor);
                        }
                    }
                }
                let wsum: f64 = state.components.iter().map(|c| c.weight).sum();
                state.components.iter_mut().for_each(|c| c.weight /= wsum);
            }
        }
    }
}

/// Utterances per accumulation chunk; chunk results are merged in corpus
/// order so the totals are independent of the thread count.
const EM_CHUNK: usize = 8;
/// Chunks in flight at once, bounding accumulator memory.
const EM_WAVE: usize = 16;

/// One E-step over the corpus.
pub fn accumulate_corpus(set: &HmmSet, corpus: &[(Matrix, Vec<usize>)]) -> Result<Accumulator> {
    let mut total = Accumulator::new(set);
    for wave in corpus.chunks(EM_CHUNK * EM_WAVE) {
        let parts = wave
            .par_chunks(EM_CHUNK)
            .map(|chunk| {
                let mut acc = Accumulator::new(set);
                for (obs, trans) in chunk {
                    acc.accumulate(set, obs, trans)?;
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()?;
        for p in &parts {
            total.merge(p);
        }
    }
    Ok(total)
}

/// Embedded Baum-Welch re-estimation. Returns the corpus log-likelihood
/// measured in each iteration's E-step, i.e. under the parameters that
/// iteration started from.
pub fn train_embedded(
    set: &mut HmmSet,
    corpus: &[(Matrix, Vec<usize>)],
    iterations: usize,
    config: &EmConfig,
) -> Result<Vec<f64>> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("empty training corpus".into()));
    }
    let mut trace = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let acc = accumulate_corpus(set, corpus)?;
        acc.apply(set, config);
        trace.push(acc.log_likelihood);
    }
    Ok(trace)
}

/// Doubles every state's component count: each component becomes two with
/// half the weight, means shifted by ∓0.2 standard deviations per dimension
/// and the variance copied.
pub fn split_mixtures(set: &mut HmmSet) -> Result<()> {
    if set.num_components() >= MAX_MIXTURES {
        return Err(Error::InvalidArgument(format!(
            "cannot split beyond {MAX_MIXTURES} components"
        )));
    }
    for state in set.models.iter_mut().flat_map(|m| m.states.iter_mut()) {
        let mut next = Vec::with_capacity(2 * state.components.len());
        for c in &state.components {
            for sign in [-1.0, 1.0] {
                next.push(GaussianComponent {
                    weight: c.weight / 2.0,
                    mean: c
                        .mean
                        .iter()
                        .zip(&c.variance)
                        .map(|(m, v)| m + sign * SPLIT_OFFSET * v.sqrt())
                        .collect(),
                    variance: c.variance.clone(),
                });
            }
        }
        state.components = next;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub phonemes: Vec<usize>,
    /// Half-open frame range of each decoded phoneme.
    pub boundaries: Vec<(usize, usize)>,
    pub log_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DecodeConfig {
    /// Log-domain score added at every phoneme entry, on top of the uniform
    /// phoneme prior.
    pub insertion_penalty: f64,
}

#[derive(Clone, Copy)]
enum Back {
    Start,
    Stay,
    Advance,
    /// Entered from the exit of the given phoneme.
    Enter(u32),
}

/// Exact Viterbi through an unconstrained phone loop: the exit of any model
/// connects to the entry of every model with weight `ln(1/N) + penalty`.
pub fn viterbi_decode(set: &HmmSet, obs: &Matrix, config: &DecodeConfig) -> Result<DecodeResult> {
    let t_len = obs.rows();
    if t_len < NUM_EMITTING {
        return Err(Error::TooShort {
            frames: t_len,
            required: NUM_EMITTING,
        });
    }
    if obs.cols() != set.dim() {
        return Err(Error::dim(set.dim(), obs.cols()));
    }
    let n = set.models.len();
    let s_len = n * NUM_EMITTING;
    let entry = -(n as f64).ln() + config.insertion_penalty;
    let log_loop: Vec<f64> = (0..s_len).map(|s| ln_prob(set.models[s / 3].loop_prob(s % 3))).collect();
    let log_adv: Vec<f64> = (0..s_len).map(|s| ln_prob(set.models[s / 3].advance_prob(s % 3))).collect();

    let mut back = vec![Back::Start; t_len * s_len];
    let mut prev = vec![f64::NEG_INFINITY; s_len];
    let mut cur = vec![f64::NEG_INFINITY; s_len];
    let emit = |t: usize, s: usize| set.models[s / 3].states[s % 3].log_likelihood_unchecked(obs.row(t));
    for p in 0..n {
        prev[p * 3] = entry + emit(0, p * 3);
    }
    for t in 1..t_len {
        let (mut best_exit, mut best_from) = (f64::NEG_INFINITY, 0);
        for p in 0..n {
            let s = p * 3 + 2;
            let v = prev[s] + log_adv[s];
            if v > best_exit {
                best_exit = v;
                best_from = p;
            }
        }
        for s in 0..s_len {
            let stay = prev[s] + log_loop[s];
            let (score, how) = if s % 3 == 0 {
                let enter = best_exit + entry;
                if enter > stay {
                    (enter, Back::Enter(best_from as u32))
                } else {
                    (stay, Back::Stay)
                }
            } else {
                let adv = prev[s - 1] + log_adv[s - 1];
                if adv > stay {
                    (adv, Back::Advance)
                } else {
                    (stay, Back::Stay)
                }
            };
            cur[s] = if score == f64::NEG_INFINITY {
                score
            } else {
                score + emit(t, s)
            };
            back[t * s_len + s] = how;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let (mut best, mut state) = (f64::NEG_INFINITY, 2);
    for p in 0..n {
        let s = p * 3 + 2;
        let v = prev[s] + log_adv[s];
        if v > best {
            best = v;
            state = s;
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument("no path through the phone loop".into()));
    }
    let mut phonemes = vec![state / 3];
    let mut starts = Vec::new();
    let mut t = t_len - 1;
    loop {
        match back[t * s_len + state] {
            Back::Start => {
                starts.push(0);
                break;
            }
            Back::Stay => {}
            Back::Advance => state -= 1,
            Back::Enter(from) => {
                starts.push(t);
                state = from as usize * 3 + 2;
                phonemes.push(from as usize);
            }
        }
        t -= 1;
    }
    phonemes.reverse();
    starts.reverse();
    let boundaries = starts
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, starts.get(i + 1).copied().unwrap_or(t_len)))
        .collect();
    Ok(DecodeResult {
        phonemes,
        boundaries,
        log_score: best,
    })
}
