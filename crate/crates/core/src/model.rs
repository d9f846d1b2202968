//! Fully connected suggestion networks.
//!
//! Two topologies share one implementation: the label-only baseline
//! (24 -> 156, no hidden layer) and the context model (180 -> 150 -> 156).
//! The output layer is always an elementwise sigmoid trained with binary
//! cross-entropy and Adam; training is single-threaded and bit-reproducible
//! for a given seed, data order and configuration.
//!
//! # Model file format (version 1)
//!
//! ```text
//! offset  size  content
//! 0       8     magic "FWMODEL\0"
//! 8       4     format version, u32 little-endian
//! 12      4     header length N, u32 little-endian
//! 16      N     header, UTF-8 JSON (topology, activation, input layout,
//!               layer shapes, seed, training config and its hash)
//! 16+N    ...   for each layer in order: weights as f64 little-endian,
//!               row-major with one row per output unit, then the biases
//! ```
//!
//! The file ends exactly after the last bias; anything else is corrupt.

use std::fs;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::encoding::{EncodedPair, CONTEXT_INPUT_WIDTH, DIAGRAM_WIDTH, INPUT_LAYOUT_TAG, LABEL_WIDTH};

pub const FORMAT_VERSION: u32 = 1;
pub const HIDDEN_WIDTH: usize = 150;
const MAGIC: &[u8; 8] = b"FWMODEL\0";
const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("input width {found} does not match the model (expected {expected})")]
    WidthMismatch { expected: usize, found: usize },
    #[error("training and validation sets must be non-empty")]
    EmptySplit,
    #[error("corrupt model file: {0}")]
    CorruptFile(String),
    #[error("unsupported model format version {found} (this build reads version {FORMAT_VERSION})")]
    VersionMismatch { found: u32 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// Label only, 24 inputs, no hidden layer.
    Baseline,
    /// Previous diagram and label, 180 inputs, one hidden layer of 150.
    Full,
}

impl Topology {
    pub fn input_width(self) -> usize {
        match self {
            Topology::Baseline => LABEL_WIDTH,
            Topology::Full => CONTEXT_INPUT_WIDTH,
        }
    }

    pub fn hidden_widths(self) -> &'static [usize] {
        match self {
            Topology::Baseline => &[],
            Topology::Full => &[HIDDEN_WIDTH],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Topology::Baseline => "baseline",
            Topology::Full => "full",
        }
    }
}

impl std::str::FromStr for Topology {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Topology::Baseline),
            "full" => Ok(Topology::Full),
            other => Err(format!("unknown topology {other:?} (expected baseline or full)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative expressed through the activation output `y`.
    fn derivative(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Mean binary cross-entropy with logs clamped at 1e-12.
pub fn bce_loss(pred: &[f64], target: &[f64]) -> f64 {
    assert_eq!(pred.len(), target.len());
    let total: f64 = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| -(t * p.max(LOG_CLAMP).ln() + (1.0 - t) * (1.0 - p).max(LOG_CLAMP).ln()))
        .sum();
    total / pred.len() as f64
}

/// Dense layer `y = W x + b`, `W` stored row-major with one row per output.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    fn glorot<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs).map(|_| rng.random_range(-limit..limit)).collect();
        Dense { inputs, outputs, weights, bias: vec![0.0; outputs] }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.bias.iter().copied());
        for (o, row) in out.iter_mut().zip(self.weights.chunks_exact(self.inputs)) {
            // inputs are mostly one-hot, skip zeros
            for (&w, &xi) in row.iter().zip(x) {
                if xi != 0.0 {
                    *o += w * xi;
                }
            }
        }
    }
}

/// A stack of dense layers: hidden layers use `hidden_activation`, the
/// last layer a sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub hidden_activation: Activation,
}

/// Gradients with the same shapes as the layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng>(widths: &[usize], hidden_activation: Activation, rng: &mut R) -> Self {
        let layers = widths.windows(2).map(|w| Dense::glorot(w[0], w[1], rng)).collect();
        Mlp { layers, hidden_activation }
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("at least one layer").outputs
    }

    /// Activations of every layer, input first.
    fn activations(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.outputs);
            layer.forward(&acts[i], &mut z);
            if i == last {
                z.iter_mut().for_each(|v| *v = sigmoid(*v));
            } else {
                z.iter_mut().for_each(|v| *v = self.hidden_activation.apply(*v));
            }
            acts.push(z);
        }
        acts
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, ModelError> {
        if input.len() != self.input_width() {
            return Err(ModelError::WidthMismatch { expected: self.input_width(), found: input.len() });
        }
        Ok(self.activations(input).pop().expect("output layer"))
    }

    /// Mean loss over `batch` and its gradient with respect to every
    /// parameter.
    pub fn loss_and_gradients(&self, batch: &[EncodedPair]) -> (f64, Gradients) {
        let mut grads = Gradients { layers: self.layers.iter().map(|l| Dense::zeros(l.inputs, l.outputs)).collect() };
        let mut total = 0.0;
        let scale = 1.0 / batch.len() as f64;
        for pair in batch {
            let acts = self.activations(&pair.input);
            let out = acts.last().expect("output");
            total += bce_loss(out, &pair.target);
            // sigmoid + BCE: dL/dz = (p - t) / n
            let n = out.len() as f64;
            let mut delta: Vec<f64> = out.iter().zip(&pair.target).map(|(p, t)| (p - t) / n * scale).collect();
            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let x = &acts[li];
                let g = &mut grads.layers[li];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    g.bias[o] += d;
                    let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (gw, &xi) in row.iter_mut().zip(x) {
                        if xi != 0.0 {
                            *gw += d * xi;
                        }
                    }
                }
                if li == 0 {
                    break;
                }
                let mut prev = vec![0.0; layer.inputs];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (p, &w) in prev.iter_mut().zip(row) {
                        *p += d * w;
                    }
                }
                for (p, &y) in prev.iter_mut().zip(x) {
                    *p *= self.hidden_activation.derivative(y);
                }
                delta = prev;
            }
        }
        (total * scale, grads)
    }

    pub fn mean_loss(&self, pairs: &[EncodedPair]) -> f64 {
        let total: f64 =
            pairs.iter().map(|p| bce_loss(&self.activations(&p.input).pop().expect("output"), &p.target)).sum();
        total / pairs.len() as f64
    }

    pub fn parameters(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }
}

impl Gradients {
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Minimum validation-loss improvement that resets patience.
    pub early_stop_delta: f64,
    /// Consecutive epochs without such an improvement before stopping.
    pub early_stop_patience: u32,
    /// Examples per Adam step; 0 means the whole training set.
    pub batch_size: usize,
    pub max_epochs: u32,
    pub seed: u64,
    pub hidden_activation: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            early_stop_delta: 0.001,
            early_stop_patience: 2,
            batch_size: 16,
            max_epochs: 300,
            seed: 0,
            hidden_activation: Activation::Relu,
        }
    }
}

impl TrainConfig {
    /// Short, stable fingerprint of the configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Patience counter over validation losses.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    delta: f64,
    patience: u32,
    best: f64,
    stale: u32,
}

impl EarlyStopping {
    pub fn new(delta: f64, patience: u32) -> Self {
        EarlyStopping { delta, patience, best: f64::INFINITY, stale: 0 }
    }

    /// Records one epoch's validation loss; returns true when training
    /// should stop.
    pub fn observe(&mut self, val_loss: f64) -> bool {
        if self.best - val_loss >= self.delta {
            self.best = val_loss;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        self.patience > 0 && self.stale >= self.patience
    }
}

struct Adam {
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    learning_rate: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    fn new(cfg: &TrainConfig, parameters: usize) -> Self {
        Adam {
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            learning_rate: cfg.learning_rate,
            m: vec![0.0; parameters],
            v: vec![0.0; parameters],
            step: 0,
        }
    }

    fn update(&mut self, net: &mut Mlp, grads: &Gradients) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (((p, &g), m), v) in net.parameters_mut().zip(grads.values()).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u32,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub topology: Topology,
    pub config: TrainConfig,
    pub train_examples: usize,
    pub validation_examples: usize,
    pub epochs: Vec<EpochRecord>,
    pub stopped_early: bool,
}

/// Where the training data came from; kept in the model header so that
/// evaluation can rebuild the same partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub split_seed: Option<u64>,
    pub split_index: Option<u32>,
    pub augmented: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub input_layout: String,
    pub seed: u64,
    pub config: TrainConfig,
    pub config_hash: String,
    #[serde(default)]
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuggestionModel {
    pub topology: Topology,
    pub network: Mlp,
    pub meta: ModelMeta,
}

impl SuggestionModel {
    pub fn new_initialized(topology: Topology, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut widths = vec![topology.input_width()];
        widths.extend_from_slice(topology.hidden_widths());
        widths.push(DIAGRAM_WIDTH);
        SuggestionModel {
            topology,
            network: Mlp::init(&widths, cfg.hidden_activation, rng),
            meta: ModelMeta {
                input_layout: INPUT_LAYOUT_TAG.to_string(),
                seed: cfg.seed,
                config: cfg.clone(),
                config_hash: cfg.hash(),
                provenance: Provenance::default(),
            },
        }
    }

    /// 156 per-slot probabilities, each in (0, 1).
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.network.forward(input)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        SuggestionModel::from_bytes(&fs::read(path)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = FileHeader {
            topology: self.topology,
            hidden_activation: self.network.hidden_activation,
            layers: self.network.layers.iter().map(|l| [l.inputs, l.outputs]).collect(),
            meta: self.meta.clone(),
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + header.len() + 8 * self.network.parameters().count());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for p in self.network.parameters() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let corrupt = |msg: &str| ModelError::CorruptFile(msg.to_string());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(corrupt("missing magic"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(ModelError::VersionMismatch { found: version });
        }
        let header_len = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
        let body = bytes.get(16..16 + header_len).ok_or_else(|| corrupt("truncated header"))?;
        let header: FileHeader =
            serde_json::from_slice(body).map_err(|e| ModelError::CorruptFile(format!("bad header: {e}")))?;

        let mut expected = vec![header.topology.input_width()];
        expected.extend_from_slice(header.topology.hidden_widths());
        expected.push(DIAGRAM_WIDTH);
        let shapes: Vec<[usize; 2]> = expected.windows(2).map(|w| [w[0], w[1]]).collect();
        if header.layers != shapes {
            return Err(corrupt("layer shapes do not match topology"));
        }
        if header.meta.input_layout != INPUT_LAYOUT_TAG {
            return Err(corrupt("unknown input layout"));
        }

        let mut values = bytes[16 + header_len..].chunks_exact(8);
        if !values.remainder().is_empty() {
            return Err(corrupt("trailing bytes"));
        }
        let mut layers = Vec::with_capacity(shapes.len());
        for [inputs, outputs] in shapes {
            let mut layer = Dense::zeros(inputs, outputs);
            for p in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                let chunk = values.next().ok_or_else(|| corrupt("truncated weights"))?;
                *p = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
            }
            layers.push(layer);
        }
        if values.next().is_some() {
            return Err(corrupt("trailing bytes"));
        }
        Ok(SuggestionModel {
            topology: header.topology,
            network: Mlp { layers, hidden_activation: header.hidden_activation },
            meta: header.meta,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct FileHeader {
    topology: Topology,
    hidden_activation: Activation,
    layers: Vec<[usize; 2]>,
    meta: ModelMeta,
}

/// Trains a fresh model with Adam on `train`, stopping early on the
/// validation loss.
pub fn train(
    topology: Topology,
    train: &[EncodedPair],
    validation: &[EncodedPair],
    cfg: &TrainConfig,
) -> Result<(SuggestionModel, TrainReport), ModelError> {
    if train.is_empty() || validation.is_empty() {
        return Err(ModelError::EmptySplit);
    }
    let width = topology.input_width();
    if let Some(bad) = train.iter().chain(validation).find(|p| p.input.len() != width) {
        return Err(ModelError::WidthMismatch { expected: width, found: bad.input.len() });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = SuggestionModel::new_initialized(topology, cfg, &mut rng);
    let mut adam = Adam::new(cfg, model.network.parameters().count());
    let mut stopper = EarlyStopping::new(cfg.early_stop_delta, cfg.early_stop_patience);
    let batch_size = if cfg.batch_size == 0 { train.len() } else { cfg.batch_size };

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut batch = Vec::with_capacity(batch_size);
    let mut epochs = Vec::new();
    let mut stopped_early = false;
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut running = 0.0;
        for chunk in order.chunks(batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train[i].clone()));
            let (loss, grads) = model.network.loss_and_gradients(&batch);
            running += loss * chunk.len() as f64;
            adam.update(&mut model.network, &grads);
        }
        let val_loss = model.network.mean_loss(validation);
        epochs.push(EpochRecord { epoch, train_loss: running / train.len() as f64, val_loss });
        if stopper.observe(val_loss) {
            stopped_early = true;
            break;
        }
    }

    let report = TrainReport {
        topology,
        config: cfg.clone(),
        train_examples: train.len(),
        validation_examples: validation.len(),
        epochs,
        stopped_early,
    };
    Ok((model, report))
}
