//! Mini-PointNet classifier with hand-written backpropagation.
//!
//! Every point passes through the same MLP (ReLU after each layer); a
//! max-pool over points gives a global feature, and a small fully connected
//! head produces class logits. Gradients of the max-pool go to the arg-max
//! point of each feature, lowest index on ties.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::linalg::{gemm, Layout};
use crate::optim::{Adam, AdamConfig};
use crate::Point;

/// Floor applied to `p_y` in the untargeted loss.
pub const UNTARGETED_PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    /// Widths of the shared per-point layers; input width is 3.
    pub point_widths: Vec<usize>,
    /// Widths of the head layers; the last one equals `num_classes`.
    pub head_widths: Vec<usize>,
    pub num_classes: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// `[64, 128, 256]` point MLP and a `[64, c]` head.
    pub fn new(num_classes: usize, seed: u64) -> Self {
        Self::with_widths(&[64, 128, 256], 64, num_classes, seed)
    }

    pub fn with_widths(point_widths: &[usize], hidden: usize, num_classes: usize, seed: u64) -> Self {
        Self {
            point_widths: point_widths.to_vec(),
            head_widths: vec![hidden, num_classes],
            num_classes,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 1 {
            return Err(Error::InvalidConfig(String::from("need at least one class")));
        }
        if self.point_widths.is_empty() || self.head_widths.is_empty() {
            return Err(Error::InvalidConfig(String::from("layer lists must be non-empty")));
        }
        if self.point_widths.iter().chain(&self.head_widths).any(|&w| w == 0) {
            return Err(Error::InvalidConfig(String::from("layer widths must be at least 1")));
        }
        if self.head_widths.last() != Some(&self.num_classes) {
            return Err(Error::InvalidConfig(format!(
                "final head width {:?} must equal class count {}",
                self.head_widths.last(),
                self.num_classes
            )));
        }
        Ok(())
    }

    fn layer_shapes(&self) -> (Vec<LayerShape>, Vec<LayerShape>) {
        let mut offset = 0;
        let mut make = |fan_in: usize, fan_out: usize| {
            let shape = LayerShape { fan_in, fan_out, offset };
            offset += fan_in * fan_out + fan_out;
            shape
        };
        let mut point = Vec::new();
        let mut fan_in = 3;
        for &w in &self.point_widths {
            point.push(make(fan_in, w));
            fan_in = w;
        }
        let mut head = Vec::new();
        for &w in &self.head_widths {
            head.push(make(fan_in, w));
            fan_in = w;
        }
        (point, head)
    }
}

/// Location of one dense layer inside the flat parameter vector: a
/// `fan_in × fan_out` weight block followed by `fan_out` biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerShape {
    fan_in: usize,
    fan_out: usize,
    offset: usize,
}

impl LayerShape {
    fn weights<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.offset..self.offset + self.fan_in * self.fan_out]
    }

    fn bias<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        let start = self.offset + self.fan_in * self.fan_out;
        &params[start..start + self.fan_out]
    }

    fn end(&self) -> usize {
        self.offset + self.fan_in * self.fan_out + self.fan_out
    }
}

/// Classifier weights and architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    config: ModelConfig,
    point_layers: Vec<LayerShape>,
    head_layers: Vec<LayerShape>,
    params: Vec<f64>,
}

/// Logits and softmax probabilities for one cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl Prediction {
    /// Arg-max class, lowest index on ties.
    pub fn label(&self) -> usize {
        argmax(&self.logits)
    }
}

/// Classification objective for a single cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossMode {
    /// `-log p_target`; with the true label this is ordinary cross-entropy.
    Targeted(usize),
    /// `log p_true`, floored at `log(1e-12)`.
    Untargeted(usize),
}

impl LossMode {
    fn label(self) -> usize {
        match self {
            LossMode::Targeted(l) | LossMode::Untargeted(l) => l,
        }
    }

    /// Loss value and its gradient with respect to the logits.
    pub fn evaluate(self, logits: &[f64]) -> (f64, Vec<f64>) {
        let logp = log_softmax(logits);
        let p: Vec<f64> = logp.iter().map(|&l| libm::exp(l)).collect();
        match self {
            LossMode::Targeted(t) => {
                let mut g = p;
                g[t] -= 1.0;
                (-logp[t], g)
            }
            LossMode::Untargeted(y) => {
                let floor = libm::log(UNTARGETED_PROB_FLOOR);
                if logp[y] < floor {
                    return (floor, vec![0.0; logits.len()]);
                }
                let mut g: Vec<f64> = p.iter().map(|v| -v).collect();
                g[y] += 1.0;
                (logp[y], g)
            }
        }
    }
}

/// Loss, input gradient and logits at one cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct InputGradient {
    pub loss: f64,
    pub gradient: Vec<Point>,
    pub logits: Vec<f64>,
}

/// Discrete state of every ReLU and max-pool decision; two inputs with
/// equal patterns lie in the same linear region of the network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationPattern {
    active: Vec<bool>,
    argmax: Vec<usize>,
}

struct Pass {
    n: usize,
    /// Post-ReLU activations entering each point layer; `[0]` is the input.
    point_inputs: Vec<Vec<f64>>,
    pooled: Vec<f64>,
    argmax: Vec<usize>,
    /// Inputs to each head layer; `[0]` is the pooled feature.
    head_inputs: Vec<Vec<f64>>,
    logits: Vec<f64>,
}

impl Classifier {
    /// Fresh model with He-uniform weights (`±sqrt(6 / fan_in)`; the logit
    /// layer uses `±sqrt(3 / fan_in)`) and zero biases.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let (point_layers, head_layers) = config.layer_shapes();
        let total = head_layers.last().map(|l| l.end()).unwrap_or(0);
        let mut params = vec![0.0; total];
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let last = head_layers.len() - 1;
        for (i, layer) in point_layers.iter().chain(&head_layers).enumerate() {
            let gain = if i == point_layers.len() + last { 3.0 } else { 6.0 };
            let bound = libm::sqrt(gain / layer.fan_in as f64);
            for w in &mut params[layer.offset..layer.offset + layer.fan_in * layer.fan_out] {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(Self { config, point_layers, head_layers, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward(&self, points: &[Point]) -> Prediction {
        let logits = self.run(points).logits;
        let probabilities = log_softmax(&logits).iter().map(|&l| libm::exp(l)).collect();
        Prediction { logits, probabilities }
    }

    pub fn predict(&self, points: &[Point]) -> usize {
        argmax(&self.run(points).logits)
    }

    /// Loss under `mode` and its gradient with respect to every coordinate.
    pub fn grad_input(&self, points: &[Point], mode: LossMode) -> Result<InputGradient> {
        self.check_label(Some(mode.label()))?;
        let pass = self.run(points);
        let (loss, dlogits) = mode.evaluate(&pass.logits);
        let gradient = self.backward(&pass, &dlogits, None);
        Ok(InputGradient { loss, gradient, logits: pass.logits })
    }

    pub fn activation_pattern(&self, points: &[Point]) -> ActivationPattern {
        let pass = self.run(points);
        let mut active: Vec<bool> = Vec::new();
        for acts in pass.point_inputs.iter().skip(1) {
            active.extend(acts.iter().map(|&a| a > 0.0));
        }
        active.extend(pass.pooled.iter().map(|&a| a > 0.0));
        for acts in pass.head_inputs.iter().skip(1) {
            active.extend(acts.iter().map(|&a| a > 0.0));
        }
        ActivationPattern { active, argmax: pass.argmax }
    }

    fn check_label(&self, label: Option<usize>) -> Result<()> {
        match label {
            Some(l) if l < self.config.num_classes => Ok(()),
            _ => Err(Error::BadLabel { label, classes: self.config.num_classes }),
        }
    }

    fn run(&self, points: &[Point]) -> Pass {
        let n = points.len();
        let mut point_inputs = Vec::with_capacity(self.point_layers.len());
        point_inputs.push(points.iter().flat_map(|p| p.iter().copied()).collect::<Vec<f64>>());
        let last = self.point_layers.len() - 1;
        let mut pooled = Vec::new();
        let mut argmax_idx = Vec::new();
        for (li, layer) in self.point_layers.iter().enumerate() {
            let input = point_inputs.last().expect("input layer present");
            let bias = layer.bias(&self.params);
            let mut out = Vec::with_capacity(n * layer.fan_out);
            for _ in 0..n {
                out.extend_from_slice(bias);
            }
            gemm(
                n,
                layer.fan_in,
                layer.fan_out,
                input,
                Layout::RowMajor,
                layer.weights(&self.params),
                Layout::RowMajor,
                &mut out,
                true,
            );
            out.iter_mut().for_each(|v| *v = v.max(0.0));
            if li == last {
                let (p, a) = max_pool(&out, n, layer.fan_out);
                pooled = p;
                argmax_idx = a;
            } else {
                point_inputs.push(out);
            }
        }

        let mut head_inputs = Vec::with_capacity(self.head_layers.len());
        head_inputs.push(pooled.clone());
        let mut logits = Vec::new();
        let last = self.head_layers.len() - 1;
        for (li, layer) in self.head_layers.iter().enumerate() {
            let input = head_inputs.last().expect("head input present");
            let mut out = dense(layer, &self.params, input);
            if li == last {
                logits = out;
            } else {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
                head_inputs.push(out);
            }
        }
        Pass { n, point_inputs, pooled, argmax: argmax_idx, head_inputs, logits }
    }

    /// Backpropagates `dlogits`; returns the input gradient and, when
    /// `param_grads` is given, accumulates parameter gradients into it.
    fn backward(&self, pass: &Pass, dlogits: &[f64], mut param_grads: Option<&mut [f64]>) -> Vec<Point> {
        let params = &self.params;

        // Head, top to bottom.
        let mut delta = dlogits.to_vec();
        for (li, layer) in self.head_layers.iter().enumerate().rev() {
            let input = &pass.head_inputs[li];
            if let Some(g) = param_grads.as_deref_mut() {
                accumulate_dense_grads(layer, g, input, &delta);
            }
            let w = layer.weights(params);
            let mut d_in = vec![0.0; layer.fan_in];
            for (i, d) in d_in.iter_mut().enumerate() {
                let row = &w[i * layer.fan_out..(i + 1) * layer.fan_out];
                *d = row.iter().zip(&delta).map(|(a, b)| a * b).sum();
            }
            // ReLU sits between head layers; the pooled feature is already
            // post-ReLU and handled with the point layers below.
            if li > 0 {
                for (d, &a) in d_in.iter_mut().zip(input) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            delta = d_in;
        }

        // Max-pool: gradient goes to one point per feature, and only where
        // the final point-layer ReLU is open.
        let last = self.point_layers.len() - 1;
        let top = self.point_layers[last];
        let mut touched: Vec<usize> = Vec::new();
        let mut routes: Vec<(usize, usize, f64)> = Vec::new();
        for f in 0..top.fan_out {
            if pass.pooled[f] > 0.0 && delta[f] != 0.0 {
                let p = pass.argmax[f];
                routes.push((p, f, delta[f]));
                touched.push(p);
            }
        }
        touched.sort_unstable();
        touched.dedup();
        let slot = |p: usize| touched.binary_search(&p).expect("touched point");

        let n_touched = touched.len();
        let mut grad_points = vec![[0.0; 3]; pass.n];

        // Top layer: each route touches one weight column only.
        let fan_in = top.fan_in;
        let input = &pass.point_inputs[last];
        let w = top.weights(params);
        let mut deltas = vec![0.0; n_touched * fan_in];
        if let Some(g) = param_grads.as_deref_mut() {
            for &(p, f, gv) in &routes {
                let x = &input[p * fan_in..(p + 1) * fan_in];
                for (i, &xi) in x.iter().enumerate() {
                    g[top.offset + i * top.fan_out + f] += xi * gv;
                }
                g[top.offset + fan_in * top.fan_out + f] += gv;
            }
        }
        for &(p, f, gv) in &routes {
            let row = &mut deltas[slot(p) * fan_in..(slot(p) + 1) * fan_in];
            for (i, d) in row.iter_mut().enumerate() {
                *d += gv * w[i * top.fan_out + f];
            }
        }
        mask_inactive(&mut deltas, &touched, input, fan_in, last > 0);

        // Remaining layers are dense over the touched points.
        let mut width = fan_in;
        for li in (0..last).rev() {
            let layer = self.point_layers[li];
            let input = &pass.point_inputs[li];
            let fan_in = layer.fan_in;
            if let Some(g) = param_grads.as_deref_mut() {
                let mut gathered = Vec::with_capacity(n_touched * fan_in);
                for &p in &touched {
                    gathered.extend_from_slice(&input[p * fan_in..(p + 1) * fan_in]);
                }
                let w_grad = &mut g[layer.offset..layer.offset + fan_in * width];
                gemm(fan_in, n_touched, width, &gathered, Layout::Transposed, &deltas, Layout::RowMajor, w_grad, true);
                let b_start = layer.offset + fan_in * width;
                let b_grad = &mut g[b_start..b_start + width];
                for d in deltas.chunks_exact(width) {
                    b_grad.iter_mut().zip(d).for_each(|(b, &dv)| *b += dv);
                }
            }
            let mut next = vec![0.0; n_touched * fan_in];
            gemm(n_touched, width, fan_in, &deltas, Layout::RowMajor, layer.weights(params), Layout::Transposed, &mut next, false);
            mask_inactive(&mut next, &touched, input, fan_in, li > 0);
            deltas = next;
            width = fan_in;
        }
        for (s, &p) in touched.iter().enumerate() {
            grad_points[p] = [deltas[s * 3], deltas[s * 3 + 1], deltas[s * 3 + 2]];
        }
        grad_points
    }

    /// Loss and parameter gradient (accumulated into `grads`) for one cloud.
    fn accumulate_param_grads(&self, points: &[Point], mode: LossMode, grads: &mut [f64]) -> (f64, usize) {
        let pass = self.run(points);
        let (loss, dlogits) = mode.evaluate(&pass.logits);
        self.backward(&pass, &dlogits, Some(grads));
        (loss, argmax(&pass.logits))
    }

    /// Serializes to the versioned little-endian checkpoint layout:
    /// magic, version, length-prefixed UTF-8 metadata, parameter count and
    /// the raw `f64` parameters.
    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = format!(
            "classes={};point={};head={};seed={}",
            self.config.num_classes,
            join(&self.config.point_widths),
            join(&self.config.head_widths),
            self.config.seed
        );
        let mut out = Vec::with_capacity(32 + meta.len() + 8 * self.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(meta.as_bytes());
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| Error::CorruptModel(String::from(m));
        if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
            return Err(Error::VersionMismatch(String::from("missing model magic bytes")));
        }
        let mut at = MAGIC.len();
        let version = u32::from_le_bytes(take::<4>(bytes, &mut at).ok_or_else(|| corrupt("truncated version"))?);
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch(format!(
                "checkpoint version {version}, expected {FORMAT_VERSION}"
            )));
        }
        let meta_len = u32::from_le_bytes(take::<4>(bytes, &mut at).ok_or_else(|| corrupt("truncated header"))?) as usize;
        let meta = bytes.get(at..at + meta_len).ok_or_else(|| corrupt("truncated metadata"))?;
        at += meta_len;
        let meta = core::str::from_utf8(meta).map_err(|_| corrupt("metadata is not UTF-8"))?;
        let config = parse_meta(meta).ok_or_else(|| corrupt("unreadable metadata"))?;
        let count = u64::from_le_bytes(take::<8>(bytes, &mut at).ok_or_else(|| corrupt("truncated count"))?) as usize;
        let mut model = Classifier::new(config)?;
        if count != model.params.len() {
            return Err(corrupt("parameter count does not match architecture"));
        }
        if bytes.len() != at + 8 * count {
            return Err(corrupt("payload length does not match parameter count"));
        }
        for (p, chunk) in model.params.iter_mut().zip(bytes[at..].chunks_exact(8)) {
            let mut raw = [0u8; 8];
            raw.copy_from_slice(chunk);
            *p = f64::from_le_bytes(raw);
        }
        if model.params.iter().any(|p| !p.is_finite()) {
            return Err(corrupt("non-finite parameter"));
        }
        Ok(model)
    }
}

const MAGIC: &[u8; 8] = b"GSDAMODL";
const FORMAT_VERSION: u32 = 1;

fn take<const N: usize>(bytes: &[u8], at: &mut usize) -> Option<[u8; N]> {
    let slice = bytes.get(*at..*at + N)?;
    *at += N;
    let mut out = [0u8; N];
    out.copy_from_slice(slice);
    Some(out)
}

fn join(v: &[usize]) -> String {
    let mut s = String::new();
    for (i, w) in v.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(&format!("{w}"));
    }
    s
}

fn parse_meta(meta: &str) -> Option<ModelConfig> {
    let mut classes = None;
    let mut point = None;
    let mut head = None;
    let mut seed = None;
    let widths = |v: &str| v.split(',').map(|w| w.parse::<usize>().ok()).collect::<Option<Vec<_>>>();
    for field in meta.split(';') {
        let (key, value) = field.split_once('=')?;
        match key {
            "classes" => classes = value.parse().ok(),
            "point" => point = widths(value),
            "head" => head = widths(value),
            "seed" => seed = value.parse().ok(),
            _ => return None,
        }
    }
    Some(ModelConfig { point_widths: point?, head_widths: head?, num_classes: classes?, seed: seed? })
}

fn dense(layer: &LayerShape, params: &[f64], input: &[f64]) -> Vec<f64> {
    let mut out = layer.bias(params).to_vec();
    let w = layer.weights(params);
    for (i, &x) in input.iter().enumerate() {
        if x != 0.0 {
            let row = &w[i * layer.fan_out..(i + 1) * layer.fan_out];
            out.iter_mut().zip(row).for_each(|(o, &wv)| *o += x * wv);
        }
    }
    out
}

fn accumulate_dense_grads(layer: &LayerShape, grads: &mut [f64], input: &[f64], delta: &[f64]) {
    let fan_out = layer.fan_out;
    for (i, &x) in input.iter().enumerate() {
        if x != 0.0 {
            let start = layer.offset + i * fan_out;
            grads[start..start + fan_out].iter_mut().zip(delta).for_each(|(g, &d)| *g += x * d);
        }
    }
    let b = layer.offset + layer.fan_in * fan_out;
    grads[b..b + fan_out].iter_mut().zip(delta).for_each(|(g, &d)| *g += d);
}

/// Zeroes deltas whose input activation was clipped by a ReLU. The raw
/// coordinates feeding the first layer pass through unmasked.
fn mask_inactive(deltas: &mut [f64], touched: &[usize], input: &[f64], width: usize, has_relu: bool) {
    if !has_relu {
        return;
    }
    for (row, &p) in deltas.chunks_exact_mut(width).zip(touched) {
        let x = &input[p * width..(p + 1) * width];
        row.iter_mut().zip(x).for_each(|(d, &a)| {
            if a <= 0.0 {
                *d = 0.0;
            }
        });
    }
}

/// Column-wise max over `n` rows of width `w`; first row wins ties.
fn max_pool(values: &[f64], n: usize, w: usize) -> (Vec<f64>, Vec<usize>) {
    let mut best = values[..w].to_vec();
    let mut idx = vec![0usize; w];
    for p in 1..n {
        let row = &values[p * w..(p + 1) * w];
        for f in 0..w {
            if row[f] > best[f] {
                best[f] = row[f];
                idx[f] = p;
            }
        }
    }
    (best, idx)
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&z| libm::exp(z - m)).sum();
    let lse = m + libm::log(sum);
    logits.iter().map(|&z| z - lse).collect()
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 30, batch_size: 16, learning_rate: 1e-3, weight_decay: 1e-4, seed: 0 }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidConfig(format!("bad training configuration {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    /// Present when an evaluation set was supplied.
    pub eval_accuracy: Option<f64>,
}

/// Mini-batch Adam on mean cross-entropy with L2 weight decay.
///
/// Batches are drawn from a ChaCha shuffle seeded by `config.seed`, so a
/// single-threaded run is bit-reproducible. Zero epochs leaves the model
/// untouched.
pub fn train(
    model: &mut Classifier,
    data: &[PointCloud],
    config: &TrainConfig,
    eval: Option<&[PointCloud]>,
) -> Result<Vec<EpochStats>> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for cloud in data {
        model.check_label(cloud.label())?;
    }
    let adam_config = AdamConfig { lr: config.learning_rate, ..AdamConfig::default() };
    let mut adam = Adam::new(adam_config, model.params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grads = vec![0.0; model.params.len()];
    let decay_mask = weight_mask(model);
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for batch in order.chunks(config.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let cloud = &data[i];
                let label = cloud.label().expect("labels checked");
                let (loss, pred) = model.accumulate_param_grads(cloud.points(), LossMode::Targeted(label), &mut grads);
                loss_sum += loss;
                correct += usize::from(pred == label);
            }
            let scale = 1.0 / batch.len() as f64;
            for ((g, &p), &is_weight) in grads.iter_mut().zip(&model.params).zip(&decay_mask) {
                *g *= scale;
                if is_weight {
                    *g += config.weight_decay * p;
                }
            }
            adam.step(&mut model.params, &grads);
        }
        history.push(EpochStats {
            epoch,
            loss: loss_sum / data.len() as f64,
            train_accuracy: correct as f64 / data.len() as f64,
            eval_accuracy: eval.map(|e| accuracy(model, e)),
        });
    }
    Ok(history)
}

fn weight_mask(model: &Classifier) -> Vec<bool> {
    let mut mask = vec![false; model.params.len()];
    for layer in model.point_layers.iter().chain(&model.head_layers) {
        mask[layer.offset..layer.offset + layer.fan_in * layer.fan_out].iter_mut().for_each(|m| *m = true);
    }
    mask
}

/// Fraction of labelled clouds classified correctly; unlabelled clouds
/// count as errors.
pub fn accuracy(model: &Classifier, clouds: &[PointCloud]) -> f64 {
    if clouds.is_empty() {
        return 0.0;
    }
    let correct = clouds.iter().filter(|c| c.label() == Some(model.predict(c.points()))).count();
    correct as f64 / clouds.len() as f64
}

/// Mean cross-entropy over labelled clouds.
pub fn mean_loss(model: &Classifier, clouds: &[PointCloud]) -> Result<f64> {
    if clouds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for c in clouds {
        model.check_label(c.label())?;
        let logits = model.forward(c.points()).logits;
        total += LossMode::Targeted(c.label().expect("checked")).evaluate(&logits).0;
    }
    Ok(total / clouds.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(seed: u64) -> Classifier {
        Classifier::new(ModelConfig::with_widths(&[8, 16], 8, 3, seed)).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(Classifier::new(ModelConfig::with_widths(&[8, 0], 8, 3, 0)).is_err());
        let mut c = ModelConfig::new(8, 0);
        c.head_widths = vec![64, 7];
        assert!(c.validate().is_err());
        let m = Classifier::new(ModelConfig::new(8, 0)).unwrap();
        assert_eq!(m.forward(&[[0.1, 0.2, 0.3]]).logits.len(), 8);
    }

    #[test]
    fn init_is_deterministic() {
        assert_eq!(tiny(4).parameters(), tiny(4).parameters());
        assert_ne!(tiny(4).parameters(), tiny(5).parameters());
    }

    #[test]
    fn softmax_sums_to_one() {
        let m = tiny(1);
        let p = m.forward(&[[0.3, -0.2, 0.9], [0.0, 1.0, -1.0]]).probabilities;
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn saturated_target_has_zero_loss_and_gradient() {
        let mut m = tiny(2);
        let last = *m.head_layers.last().unwrap();
        let b = last.offset + last.fan_in * last.fan_out;
        m.params[b + 1] = 1e4;
        let g = m.grad_input(&[[0.1, 0.5, -0.3], [0.2, 0.1, 0.0]], LossMode::Targeted(1)).unwrap();
        assert_eq!(g.loss, 0.0);
        assert!(g.gradient.iter().all(|p| *p == [0.0; 3]));
    }

    #[test]
    fn untargeted_loss_is_floored() {
        let (loss, grad) = LossMode::Untargeted(0).evaluate(&[-100.0, 0.0, 0.0]);
        assert_eq!(loss, libm::log(UNTARGETED_PROB_FLOOR));
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn bad_labels_rejected() {
        let m = tiny(0);
        assert_eq!(
            m.grad_input(&[[0.0; 3]], LossMode::Targeted(3)),
            Err(Error::BadLabel { label: Some(3), classes: 3 })
        );
    }

    #[test]
    fn checkpoint_round_trip_and_header_checks() {
        let m = tiny(9);
        let bytes = m.to_bytes();
        let back = Classifier::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Classifier::from_bytes(&bad), Err(Error::VersionMismatch(_))));
        let mut bad = bytes.clone();
        bad[8] = 2;
        assert!(matches!(Classifier::from_bytes(&bad), Err(Error::VersionMismatch(_))));
        assert!(matches!(
            Classifier::from_bytes(&bytes[..bytes.len() - 3]),
            Err(Error::CorruptModel(_))
        ));
    }

    #[test]
    fn zero_epochs_leave_model_unchanged() {
        let mut m = tiny(3);
        let before = m.clone();
        let data = [PointCloud::new(vec![[0.0, 0.0, 1.0]; 4]).unwrap().with_label(0)];
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        assert!(train(&mut m, &data, &cfg, None).unwrap().is_empty());
        assert_eq!(m, before);
        assert_eq!(train(&mut m, &[], &cfg, None), Err(Error::EmptyDataset));
    }
}
