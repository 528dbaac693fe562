//! Multilayer network mapping context-windowed acoustic features to one
//! sigmoid score per phoneme, trained by backpropagation.
//!
//! Each output unit is an independent sigmoid; rows are not normalized to
//! sum to one.
//!
//! # Checkpoint format
//!
//! All integers are little-endian `u32`, all reals little-endian `f64`:
//!
//! ```text
//! b"TMLN" | version (=1) | loss (0 = squared error, 1 = cross-entropy)
//! | n_sizes | sizes[n_sizes]            input, hidden..., output
//! | norm_dim | mean[norm_dim] | scale[norm_dim]
//! | for each layer: weights[out × in] (row-major) | bias[out]
//! ```

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::{Error, Matrix, Result};

/// Frames on each side of the current one fed to the network.
pub const CONTEXT_OFFSET: usize = 3;
pub const DEFAULT_HIDDEN: [usize; 3] = [400, 200, 100];

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Concatenates frames `t − 3`, `t` and `t + 3` (clamped to the utterance).
pub fn context_window(features: &Matrix) -> Matrix {
    let (t_len, d) = (features.rows(), features.cols());
    let mut out = Matrix::zeros(t_len, 3 * d);
    for t in 0..t_len {
        write_context(features, t, out.row_mut(t));
    }
    out
}

fn write_context(features: &Matrix, t: usize, dst: &mut [f64]) {
    let d = features.cols();
    let last = features.rows() - 1;
    let rows = [t.saturating_sub(CONTEXT_OFFSET), t, (t + CONTEXT_OFFSET).min(last)];
    for (slot, r) in rows.into_iter().enumerate() {
        dst[slot * d..(slot + 1) * d].copy_from_slice(features.row(r));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Loss {
    /// One half of the summed squared error over the outputs.
    #[default]
    SquaredError,
    /// Summed per-output binary cross-entropy.
    CrossEntropy,
}

impl Loss {
    fn code(self) -> u32 {
        match self {
            Loss::SquaredError => 0,
            Loss::CrossEntropy => 1,
        }
    }

    fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Loss::SquaredError),
            1 => Some(Loss::CrossEntropy),
            _ => None,
        }
    }

    pub fn value(self, output: &[f64], target: &[f64]) -> f64 {
        match self {
            Loss::SquaredError => 0.5 * output.iter().zip(target).map(|(y, t)| (y - t) * (y - t)).sum::<f64>(),
            Loss::CrossEntropy => -output
                .iter()
                .zip(target)
                .map(|(&y, &t)| t * y.ln() + (1.0 - t) * (1.0 - y).ln())
                .sum::<f64>(),
        }
    }
}

impl std::str::FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sse" | "squared-error" => Ok(Loss::SquaredError),
            "xent" | "cross-entropy" => Ok(Loss::CrossEntropy),
            other => Err(Error::InvalidArgument(format!("unknown loss `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlnTopology {
    /// Layer widths from input to output.
    pub sizes: Vec<usize>,
    pub loss: Loss,
}

impl MlnTopology {
    /// `3·feature_dim → 400 → 200 → 100 → outputs`.
    pub fn standard(feature_dim: usize, outputs: usize) -> Self {
        let mut sizes = vec![3 * feature_dim];
        sizes.extend(DEFAULT_HIDDEN);
        sizes.push(outputs);
        MlnTopology {
            sizes,
            loss: Loss::default(),
        }
    }

    pub fn new(sizes: Vec<usize>, loss: Loss) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(MlnTopology { sizes, loss })
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least two layers")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs × inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn activate(&self, input: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out.iter_mut().zip(self.weights.chunks_exact(self.inputs).zip(&self.bias)) {
            let z: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b;
            *o = sigmoid(z);
        }
    }
}

/// Per-dimension affine input normalization `(x − mean) · scale`, fitted on
/// training features before windowing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalizer {
    /// Zero mean, unit variance per column; constant columns get scale 1.
    pub fn fit<'a>(features: impl IntoIterator<Item = &'a Matrix>) -> Result<Self> {
        let mut count = 0usize;
        let mut sum: Vec<f64> = Vec::new();
        let mut sq: Vec<f64> = Vec::new();
        for m in features {
            if sum.is_empty() {
                sum = vec![0.0; m.cols()];
                sq = vec![0.0; m.cols()];
            } else if m.cols() != sum.len() {
                return Err(Error::dim(sum.len(), m.cols()));
            }
            for row in m.iter_rows() {
                for ((s, q), &x) in sum.iter_mut().zip(sq.iter_mut()).zip(row) {
                    *s += x;
                    *q += x * x;
                }
            }
            count += m.rows();
        }
        if count == 0 {
            return Err(Error::InvalidArgument("cannot fit a normalizer on no frames".into()));
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let scale = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let var = (q / n - m * m).max(0.0);
                if var > 1e-12 {
                    1.0 / var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Normalizer { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, features: &Matrix) -> Result<Matrix> {
        if self.mean.is_empty() {
            return Ok(features.clone());
        }
        if features.cols() != self.dim() {
            return Err(Error::dim(self.dim(), features.cols()));
        }
        let mut out = features.clone();
        for t in 0..out.rows() {
            for ((x, m), s) in out.row_mut(t).iter_mut().zip(&self.mean).zip(&self.scale) {
                *x = (*x - m) * s;
            }
        }
        Ok(out)
    }
}

/// Network weights plus the input normalizer and loss they were trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Mln {
    pub layers: Vec<Layer>,
    pub loss: Loss,
    pub normalizer: Normalizer,
}

/// Gradient with the same shapes as the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub layers: Vec<Layer>,
}

impl Gradient {
    pub fn zeros_like(mln: &Mln) -> Self {
        Gradient {
            layers: mln.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect(),
        }
    }

    pub fn add(&mut self, other: &Gradient) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.iter_mut().zip(&b.weights).for_each(|(x, y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
    }

    /// Flattened view in checkpoint order (weights then bias per layer).
    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }
}

fn flatten_layers(layers: &[Layer]) -> Vec<f64> {
    layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
        .collect()
}

impl Mln {
    /// Uniform Glorot initialization `±sqrt(6 / (fan_in + fan_out))`, biases
    /// zero.
    pub fn new(topology: &MlnTopology, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = topology
            .sizes
            .windows(2)
            .map(|w| {
                let (inputs, outputs) = (w[0], w[1]);
                let a = (6.0 / (inputs + outputs) as f64).sqrt();
                let mut layer = Layer::zeros(inputs, outputs);
                layer.weights.iter_mut().for_each(|x| *x = rng.gen_range(-a..=a));
                layer
            })
            .collect();
        Mln {
            layers,
            loss: topology.loss,
            normalizer: Normalizer::default(),
        }
    }

    pub fn with_normalizer(mut self, normalizer: Normalizer) -> Result<Self> {
        if normalizer.dim() != 0 && 3 * normalizer.dim() != self.input_dim() {
            return Err(Error::dim(self.input_dim(), 3 * normalizer.dim()));
        }
        self.normalizer = normalizer;
        Ok(self)
    }

    pub fn topology(&self) -> MlnTopology {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        MlnTopology {
            sizes,
            loss: self.loss,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").outputs
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn parameters(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    /// Overwrites parameters from a vector in [`Mln::parameters`] order.
    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_parameters() {
            return Err(Error::dim(self.num_parameters(), params.len()));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|x| *x = it.next().unwrap());
        }
        Ok(())
    }

    fn activations(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        for l in &self.layers {
            let mut out = vec![0.0; l.outputs];
            l.activate(acts.last().unwrap(), &mut out);
            acts.push(out);
        }
        acts
    }

    /// Output scores for one already-windowed, already-normalized input.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::dim(self.input_dim(), input.len()));
        }
        Ok(self.activations(input).pop().unwrap())
    }

    /// Loss and its exact gradient for one (input, target) pair.
    pub fn backprop_gradient(&self, input: &[f64], target: &[f64]) -> Result<(f64, Gradient)> {
        let mut grad = Gradient::zeros_like(self);
        let loss = self.accumulate_gradient(input, target, &mut grad)?;
        Ok((loss, grad))
    }

    /// Adds the gradient for one pair into `grad` and returns its loss.
    pub fn accumulate_gradient(&self, input: &[f64], target: &[f64], grad: &mut Gradient) -> Result<f64> {
        if input.len() != self.input_dim() {
            return Err(Error::dim(self.input_dim(), input.len()));
        }
        if target.len() != self.output_dim() {
            return Err(Error::dim(self.output_dim(), target.len()));
        }
        let acts = self.activations(input);
        let output = acts.last().unwrap();
        let loss = self.loss.value(output, target);
        let mut delta: Vec<f64> = match self.loss {
            Loss::SquaredError => output
                .iter()
                .zip(target)
                .map(|(y, t)| (y - t) * y * (1.0 - y))
                .collect(),
            Loss::CrossEntropy => output.iter().zip(target).map(|(y, t)| y - t).collect(),
        };
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let below = &acts[li];
            let g = &mut grad.layers[li];
            for (o, &d) in delta.iter().enumerate() {
                g.bias[o] += d;
                if d != 0.0 {
                    let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    row.iter_mut().zip(below).for_each(|(w, x)| *w += d * x);
                }
            }
            if li > 0 {
                let mut next = vec![0.0; layer.inputs];
                for (o, &d) in delta.iter().enumerate() {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    next.iter_mut().zip(row).for_each(|(n, w)| *n += w * d);
                }
                next.iter_mut().zip(below).for_each(|(n, a)| *n *= a * (1.0 - a));
                delta = next;
            }
        }
        Ok(loss)
    }

    fn step(&mut self, grad: &Gradient, rate: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grad.layers) {
            l.weights.iter_mut().zip(&g.weights).for_each(|(w, d)| *w -= rate * d);
            l.bias.iter_mut().zip(&g.bias).for_each(|(b, d)| *b -= rate * d);
        }
    }

    /// Normalizes, windows and scores every frame of an utterance.
    pub fn posteriors(&self, features: &Matrix) -> Result<Matrix> {
        if 3 * features.cols() != self.input_dim() {
            return Err(Error::dim(self.input_dim(), 3 * features.cols()));
        }
        let windowed = context_window(&self.normalizer.apply(features)?);
        let rows: Vec<Vec<f64>> = windowed
            .iter_rows()
            .map(|r| self.activations(r).pop().unwrap())
            .collect();
        Matrix::from_rows(self.output_dim(), rows)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut bytes.as_slice())
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        let u32le = |w: &mut dyn Write, v: usize| w.write_all(&(v as u32).to_le_bytes());
        w.write_all(MAGIC)?;
        u32le(w, 1)?;
        u32le(w, self.loss.code() as usize)?;
        let sizes = self.topology().sizes;
        u32le(w, sizes.len())?;
        for s in sizes {
            u32le(w, s)?;
        }
        u32le(w, self.normalizer.dim())?;
        for v in self.normalizer.mean.iter().chain(&self.normalizer.scale) {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in self.parameters() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> std::result::Result<Self, String> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|e| e.to_string())?;
        if &magic != MAGIC {
            return Err("not an MLN checkpoint".into());
        }
        let mut u32le = || -> std::result::Result<usize, String> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(|e| e.to_string())?;
            Ok(u32::from_le_bytes(b) as usize)
        };
        let version = u32le()?;
        if version != 1 {
            return Err(format!("unsupported checkpoint version {version}"));
        }
        let loss = Loss::from_code(u32le()? as u32).ok_or("unknown loss code")?;
        let n = u32le()?;
        if !(2..=64).contains(&n) {
            return Err(format!("implausible layer count {n}"));
        }
        let sizes = (0..n).map(|_| u32le()).collect::<std::result::Result<Vec<_>, _>>()?;
        let norm_dim = u32le()?;
        let topology = MlnTopology::new(sizes, loss).map_err(|e| e.to_string())?;
        let mut mln = Mln::new(&topology, 0);
        let mut read_f64s = |count: usize| -> std::result::Result<Vec<f64>, String> {
            let mut bytes = vec![0u8; count * 8];
            r.read_exact(&mut bytes).map_err(|e| e.to_string())?;
            Ok(bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect())
        };
        let mean = read_f64s(norm_dim)?;
        let scale = read_f64s(norm_dim)?;
        let params = read_f64s(mln.num_parameters())?;
        mln.set_parameters(&params).map_err(|e| e.to_string())?;
        mln.with_normalizer(Normalizer { mean, scale }).map_err(|e| e.to_string())
    }
}

const MAGIC: &[u8; 4] = b"TMLN";

/// Indexed supply of training frames: windowed network input plus label.
pub trait FrameSource: Sync {
    fn len(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn input(&self, index: usize, out: &mut [f64]);
    fn label(&self, index: usize) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Pre-windowed inputs, one row per frame.
pub struct WindowedFrames<'a> {
    pub inputs: &'a Matrix,
    pub labels: &'a [usize],
}

impl FrameSource for WindowedFrames<'_> {
    fn len(&self) -> usize {
        self.labels.len()
    }

    fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    fn input(&self, index: usize, out: &mut [f64]) {
        out.copy_from_slice(self.inputs.row(index));
    }

    fn label(&self, index: usize) -> usize {
        self.labels[index]
    }
}

/// Frames of whole utterances, windowed on demand.
pub struct UtteranceFrames {
    features: Vec<Matrix>,
    labels: Vec<Vec<usize>>,
    index: Vec<(u32, u32)>,
}

impl UtteranceFrames {
    /// `features` should already be normalized. Every utterance must have one
    /// label per frame.
    pub fn new(features: Vec<Matrix>, labels: Vec<Vec<usize>>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::dim(features.len(), labels.len()));
        }
        let mut index = Vec::new();
        for (u, (f, l)) in features.iter().zip(&labels).enumerate() {
            if f.rows() != l.len() {
                return Err(Error::dim(f.rows(), l.len()));
            }
            index.extend((0..f.rows()).map(|t| (u as u32, t as u32)));
        }
        Ok(UtteranceFrames {
            features,
            labels,
            index,
        })
    }
}

impl FrameSource for UtteranceFrames {
    fn len(&self) -> usize {
        self.index.len()
    }

    fn input_dim(&self) -> usize {
        3 * self.features.first().map_or(0, Matrix::cols)
    }

    fn input(&self, index: usize, out: &mut [f64]) {
        let (u, t) = self.index[index];
        write_context(&self.features[u as usize], t as usize, out);
    }

    fn label(&self, index: usize) -> usize {
        let (u, t) = self.index[index];
        self.labels[u as usize][t as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 30,
            minibatch: 1,
            seed: 0,
        }
    }
}

/// Samples per parallel gradient chunk. Chunks are merged in order, so the
/// summed gradient does not depend on the thread count.
const GRADIENT_CHUNK: usize = 8;

/// Minibatch gradient descent on one-hot targets, stepping by
/// `learning_rate` times the batch-mean gradient. Returns the mean per-frame
/// loss of each epoch, measured on the fly before each update.
pub fn train(mln: &mut Mln, data: &dyn FrameSource, config: &TrainConfig) -> Result<Vec<f64>> {
    let n = data.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if data.input_dim() != mln.input_dim() {
        return Err(Error::dim(mln.input_dim(), data.input_dim()));
    }
    if config.minibatch == 0 {
        return Err(Error::InvalidArgument("minibatch size must be positive".into()));
    }
    let outputs = mln.output_dim();
    if let Some(bad) = (0..n).map(|i| data.label(i)).find(|&l| l >= outputs) {
        return Err(Error::UnknownPhonemeId(bad));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut losses = vec![0.0; n];
    let mut trace = Vec::with_capacity(config.epochs);
    let mut input = vec![0.0; mln.input_dim()];
    let mut target = vec![0.0; outputs];
    let mut grad = Gradient::zeros_like(mln);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.minibatch) {
            if batch.len() <= GRADIENT_CHUNK {
                grad.layers.iter_mut().for_each(|l| {
                    l.weights.fill(0.0);
                    l.bias.fill(0.0);
                });
                for &i in batch {
                    data.input(i, &mut input);
                    target.fill(0.0);
                    target[data.label(i)] = 1.0;
                    losses[i] = mln.accumulate_gradient(&input, &target, &mut grad)?;
                }
                mln.step(&grad, config.learning_rate / batch.len() as f64);
            } else {
                let model = &*mln;
                let parts: Vec<(Gradient, Vec<(usize, f64)>)> = batch
                    .par_chunks(GRADIENT_CHUNK)
                    .map(|chunk| {
                        let mut g = Gradient::zeros_like(model);
                        let mut input = vec![0.0; model.input_dim()];
                        let mut target = vec![0.0; outputs];
                        let mut l = Vec::with_capacity(chunk.len());
                        for &i in chunk {
                            data.input(i, &mut input);
                            target.fill(0.0);
                            target[data.label(i)] = 1.0;
                            let loss = model
                                .accumulate_gradient(&input, &target, &mut g)
                                .expect("shapes checked");
                            l.push((i, loss));
                        }
                        (g, l)
                    })
                    .collect();
                let mut total = Gradient::zeros_like(model);
                for (g, l) in &parts {
                    total.add(g);
                    for &(i, loss) in l {
                        losses[i] = loss;
                    }
                }
                mln.step(&total, config.learning_rate / batch.len() as f64);
            }
        }
        trace.push(losses.iter().sum::<f64>() / n as f64);
    }
    Ok(trace)
}
