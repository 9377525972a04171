//! Feed-forward ReLU network with analytic backpropagation and Adam.
//!
//! Parameters are stored layer by layer, each layer as a row-major
//! `outputs × inputs` weight block followed by its bias vector; gradients and
//! Adam moments use the same flat order.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("a network needs at least an input and an output layer, got {0} sizes")]
    TooFewLayers(usize),
    #[error("layer {0} has zero width")]
    ZeroWidth(usize),
    #[error("expected a vector of length {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Dot product with eight independent accumulators; the summation order is
/// fixed, so results do not depend on the target's vector width.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Per-coordinate affine map `x ↦ (x − mean) / std`.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub const MIN_SPREAD: f64 = 1e-6;

    pub fn identity(n: usize) -> Self {
        Self {
            mean: vec![0.0; n],
            std: vec![1.0; n],
        }
    }

    /// Population statistics. Coordinates whose spread is below
    /// [`Standardizer::MIN_SPREAD`] get scale 1; solver outputs pinned at a
    /// bound differ only by tolerance noise.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let Some(first) = rows.first() else {
            return Self::identity(0);
        };
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            axpy(&mut mean, 1.0, r);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for j in 0..d {
                let e = r[j] - mean[j];
                var[j] += e * e;
            }
        }
        let std = var
            .iter()
            .map(|v| {
                let s = libm::sqrt(v / n);
                if s > Self::MIN_SPREAD {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.inputs)
                .zip(&self.biases)
                .map(|(row, b)| dot(row, x) + b),
        );
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub layers: Vec<Layer>,
}

impl Mlp {
    /// Weights uniform in `±√(6 / fan_in)`, biases zero.
    pub fn init(sizes: &[usize], seed: u64) -> Result<Self, NnError> {
        if sizes.len() < 2 {
            return Err(NnError::TooFewLayers(sizes.len()));
        }
        if let Some(i) = sizes.iter().position(|&s| s == 0) {
            return Err(NnError::ZeroWidth(i));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = libm::sqrt(6.0 / fan_in as f64);
                Layer {
                    inputs: fan_in,
                    outputs: fan_out,
                    weights: (0..fan_in * fan_out)
                        .map(|_| rng.random_range(-bound..bound))
                        .collect(),
                    biases: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(Self {
            sizes: sizes.to_vec(),
            layers,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        self.sizes[self.sizes.len() - 1]
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            p.extend_from_slice(&l.weights);
            p.extend_from_slice(&l.biases);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<(), NnError> {
        if p.len() != self.n_params() {
            return Err(NnError::Dimension {
                expected: self.n_params(),
                got: p.len(),
            });
        }
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&p[at..at + nw]);
            at += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&p[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NnError> {
        if x.len() != self.input_dim() {
            return Err(NnError::Dimension {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Affine–ReLU chain with an affine last layer.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            layer.affine(&cur, &mut next);
            if k < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            core::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Accumulates `∂L/∂θ` into `grad` for one sample. `out_grad` receives the
    /// network output and writes `∂L/∂output`, returning the sample's loss.
    fn accumulate<F>(&self, x: &[f64], grad: &mut [f64], out_grad: F) -> f64
    where
        F: FnOnce(&[f64], &mut [f64]) -> f64,
    {
        let last = self.layers.len() - 1;
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::new();
            layer.affine(&acts[k], &mut z);
            if k < last {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(z);
        }
        let mut delta = vec![0.0; self.output_dim()];
        let loss = out_grad(&acts[last + 1], &mut delta);

        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut at = 0;
        for l in &self.layers {
            offsets.push(at);
            at += l.weights.len() + l.biases.len();
        }
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let input = &acts[k];
            let off = offsets[k];
            let (gw, gb) = grad[off..off + layer.weights.len() + layer.outputs].split_at_mut(layer.weights.len());
            for (o, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    axpy(&mut gw[o * layer.inputs..(o + 1) * layer.inputs], d, input);
                    gb[o] += d;
                }
            }
            if k > 0 {
                let mut prev = vec![0.0; layer.inputs];
                for (o, &d) in delta.iter().enumerate() {
                    if d != 0.0 {
                        axpy(&mut prev, d, &layer.weights[o * layer.inputs..(o + 1) * layer.inputs]);
                    }
                }
                // ReLU derivative, taken as 0 at 0
                for (p, &a) in prev.iter_mut().zip(input) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        loss
    }
}

/// Mean of squared differences over every coordinate.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> f64 {
    assert_eq!(pred.len(), target.len());
    if pred.is_empty() {
        return 0.0;
    }
    pred.iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64
}

/// Loss and gradient of `mse_loss` of the raw network output over a batch,
/// averaged over samples and output coordinates.
pub fn backward(net: &Mlp, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let scale = 1.0 / (inputs.len() * net.output_dim()) as f64;
    let mut grad = vec![0.0; net.n_params()];
    let mut loss = 0.0;
    for (x, t) in inputs.iter().zip(targets) {
        loss += net.accumulate(x, &mut grad, |out, d| {
            let mut l = 0.0;
            for j in 0..out.len() {
                let e = out[j] - t[j];
                l += e * e;
                d[j] = 2.0 * e * scale;
            }
            l * scale
        });
    }
    (loss, grad)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }
}

/// Bias-corrected Adam step applied in place.
pub fn adam_update(params: &mut [f64], grad: &[f64], state: &mut AdamState, cfg: &AdamConfig) {
    assert_eq!(params.len(), grad.len());
    assert_eq!(params.len(), state.m.len());
    state.step += 1;
    let t = state.step as f64;
    let c1 = 1.0 - libm::pow(cfg.beta1, t);
    let c2 = 1.0 - libm::pow(cfg.beta2, t);
    for i in 0..params.len() {
        let g = grad[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let mh = state.m[i] / c1;
        let vh = state.v[i] / c2;
        params[i] -= cfg.learning_rate * mh / (libm::sqrt(vh) + cfg.eps);
    }
}

/// How one network output becomes a physical quantity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OutputHead {
    /// `lo + (hi − lo)·σ(o)`
    Bounded { lo: f64, hi: f64 },
    /// `mean + std·o`
    Affine { mean: f64, std: f64 },
}

impl OutputHead {
    fn eval(&self, o: f64) -> (f64, f64) {
        match *self {
            OutputHead::Bounded { lo, hi } => {
                let s = 1.0 / (1.0 + libm::exp(-o));
                (lo + (hi - lo) * s, (hi - lo) * s * (1.0 - s))
            }
            OutputHead::Affine { mean, std } => (mean + std * o, std),
        }
    }
}

/// Network plus the scalers and heads that connect it to physical units.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    pub net: Mlp,
    pub input_scaler: Standardizer,
    /// Target statistics; the loss is the MSE of standardized targets.
    pub output_scaler: Standardizer,
    pub heads: Vec<OutputHead>,
    pub init_seed: u64,
    pub adam: AdamState,
}

impl MlpModel {
    /// `bounds[j] = Some((lo, hi))` squashes output `j` into `[lo, hi]`;
    /// `None` un-standardizes it with the output scaler.
    pub fn new(
        sizes: &[usize],
        seed: u64,
        input_scaler: Standardizer,
        output_scaler: Standardizer,
        bounds: &[Option<(f64, f64)>],
    ) -> Result<Self, NnError> {
        let net = Mlp::init(sizes, seed)?;
        let check = |expected: usize, got: usize| {
            if expected == got {
                Ok(())
            } else {
                Err(NnError::Dimension { expected, got })
            }
        };
        check(net.input_dim(), input_scaler.len())?;
        check(net.output_dim(), output_scaler.len())?;
        check(net.output_dim(), bounds.len())?;
        let heads = bounds
            .iter()
            .enumerate()
            .map(|(j, b)| match *b {
                Some((lo, hi)) => OutputHead::Bounded { lo, hi },
                None => OutputHead::Affine {
                    mean: output_scaler.mean[j],
                    std: output_scaler.std[j],
                },
            })
            .collect();
        let adam = AdamState::new(net.n_params());
        Ok(Self {
            net,
            input_scaler,
            output_scaler,
            heads,
            init_seed: seed,
            adam,
        })
    }

    /// Physical outputs for an already standardized feature vector.
    pub fn predict_scaled(&self, features: &[f64]) -> Result<Vec<f64>, NnError> {
        let raw = self.net.forward(features)?;
        Ok(raw.iter().zip(&self.heads).map(|(&o, h)| h.eval(o).0).collect())
    }

    /// Physical outputs for a raw feature vector.
    pub fn predict(&self, raw: &[f64]) -> Result<Vec<f64>, NnError> {
        if raw.len() != self.input_scaler.len() {
            return Err(NnError::Dimension {
                expected: self.input_scaler.len(),
                got: raw.len(),
            });
        }
        self.predict_scaled(&self.input_scaler.apply(raw))
    }

    /// Batch loss `mean_j mean_b ((head_j(o) − y_j) / std_j)²` and its
    /// parameter gradient. Inputs are standardized, targets physical.
    pub fn loss_and_gradient(&self, inputs: &[&[f64]], targets: &[&[f64]]) -> (f64, Vec<f64>) {
        let d = self.net.output_dim();
        let scale = 1.0 / (inputs.len() * d) as f64;
        let mut grad = vec![0.0; self.net.n_params()];
        let mut loss = 0.0;
        for (x, y) in inputs.iter().zip(targets) {
            loss += self.net.accumulate(x, &mut grad, |out, delta| {
                let mut l = 0.0;
                for j in 0..d {
                    let (v, dv) = self.heads[j].eval(out[j]);
                    let s = self.output_scaler.std[j];
                    let e = (v - y[j]) / s;
                    l += e * e;
                    delta[j] = 2.0 * e / s * dv * scale;
                }
                l * scale
            });
        }
        (loss, grad)
    }

    pub fn loss(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
        if inputs.is_empty() {
            return 0.0;
        }
        let d = self.net.output_dim();
        let mut total = 0.0;
        for (x, y) in inputs.iter().zip(targets) {
            let pred = self.predict_scaled(x).expect("input dimension checked by caller");
            for j in 0..d {
                let e = (pred[j] - y[j]) / self.output_scaler.std[j];
                total += e * e;
            }
        }
        total / (inputs.len() * d) as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub adam: AdamConfig,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 50,
            max_epochs: 4000,
            adam: AdamConfig::default(),
            shuffle_seed: 0,
        }
    }
}

/// Standardized inputs and physical targets.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainSet {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl TrainSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Sample-weighted mean of the minibatch losses seen during the epoch.
    pub train: f64,
    /// Loss on the validation set after the epoch; NaN when it is empty.
    pub validation: f64,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("training set is empty")]
    Empty,
    #[error("batch size must be at least 1")]
    ZeroBatch,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
}

/// Seeded-shuffle minibatch Adam for `cfg.max_epochs` epochs. The shuffle
/// generator is seeded once, so epoch `e` always sees the same permutation.
pub fn train(
    model: &mut MlpModel,
    train_set: &TrainSet,
    validation: &TrainSet,
    cfg: &TrainConfig,
) -> Result<Vec<EpochLoss>, TrainError> {
    if train_set.is_empty() {
        return Err(TrainError::Empty);
    }
    if cfg.batch_size == 0 {
        return Err(TrainError::ZeroBatch);
    }
    let n = train_set.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut params = model.net.params();
    let mut history = Vec::with_capacity(cfg.max_epochs);
    for epoch in 0..cfg.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let xs: Vec<&[f64]> = chunk.iter().map(|&i| train_set.inputs[i].as_slice()).collect();
            let ys: Vec<&[f64]> = chunk.iter().map(|&i| train_set.targets[i].as_slice()).collect();
            let (loss, grad) = model.loss_and_gradient(&xs, &ys);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(TrainError::NonFinite { epoch, batch: b });
            }
            weighted += loss * chunk.len() as f64;
            adam_update(&mut params, &grad, &mut model.adam, &cfg.adam);
            model
                .net
                .set_params(&params)
                .expect("parameter count is fixed");
        }
        let validation_loss = if validation.is_empty() {
            f64::NAN
        } else {
            model.loss(&validation.inputs, &validation.targets)
        };
        history.push(EpochLoss {
            epoch,
            train: weighted / n as f64,
            validation: validation_loss,
        });
    }
    Ok(history)
}
