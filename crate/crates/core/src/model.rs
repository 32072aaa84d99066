//! Factorization machine plus multilayer perceptron, merged into a single
//! logit and trained on binary cross-entropy with hand-derived gradients.
//!
//! `Z_FM = <w,x> + 1/2 sum_f [(sum_m y_mf x_m)^2 - sum_m y_mf^2 x_m^2]`,
//! `Z_MLP` is the output of a ReLU network on `x`, and the logit is
//! `c * Z_FM + <head, Z_MLP> + head_bias` with `c = 1` under [`Merge::Sum`]
//! and learned under [`Merge::Concat`].

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;

/// Logits are clamped to this magnitude before the sigmoid and the loss.
pub const LOGIT_CLAMP: f64 = 30.0;
const WEIGHTS_FORMAT: &str = "edgecast-weights";
const WEIGHTS_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Merge {
    /// `Z_FM + <head, Z_MLP> + bias`.
    #[default]
    Sum,
    /// Like `Sum` with a learned coefficient on `Z_FM`.
    Concat,
}

/// Dense layer `a = relu(W^T x + b)`, `W` stored input-major so that a
/// sparse input touches contiguous rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// `w[i * outputs + o]`.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            inputs,
            outputs,
            w: vec![0.0; inputs * outputs],
            b: vec![0.0; outputs],
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.w[i * self.outputs..(i + 1) * self.outputs]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelWeights {
    pub dim: usize,
    pub k: usize,
    pub w: Vec<f64>,
    /// Latent factors, `y[m * k + f]`.
    pub y: Vec<f64>,
    pub layers: Vec<Layer>,
    pub head: Vec<f64>,
    pub head_bias: f64,
    pub fm_coef: f64,
    pub merge: Merge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub k: usize,
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub patience: usize,
    /// Half-width of the uniform initialization.
    pub init_scale: f64,
    pub merge: Merge,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k: 16,
            hidden: vec![32, 16],
            learning_rate: 0.01,
            batch_size: 8,
            max_epochs: 40,
            seed: 0,
            patience: 2,
            init_scale: 0.01,
            merge: Merge::Sum,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("k", self.k as f64),
            ("batch_size", self.batch_size as f64),
            ("max_epochs", self.max_epochs as f64),
            ("patience", self.patience as f64),
            ("learning_rate", self.learning_rate),
            ("init_scale", self.init_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("model.{name}"), "must be positive"));
            }
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("model.hidden", "layer sizes must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: FeatureVector,
    pub label: f64,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// `sum_m y_mf x_m` per factor.
    pub factor_sums: Vec<f64>,
    pub z_fm: f64,
    /// Post-activation output of every layer.
    pub activations: Vec<Vec<f64>>,
    pub z_mlp: Vec<f64>,
    pub logit: f64,
}

pub fn sigmoid(z: f64) -> f64 {
    let z = z.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
    1.0 / (1.0 + (-z).exp())
}

/// Cross-entropy of one clamped logit: `softplus(z) - r z`.
fn logit_loss(z: f64, label: f64) -> f64 {
    let z = z.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
    let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
    softplus - label * z
}

/// Mean binary cross-entropy of probabilities against labels.
pub fn log_loss(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: predictions.len(),
            got: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::Domain("loss of an empty set".into()));
    }
    let lo = sigmoid(-LOGIT_CLAMP);
    let total: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(&p, &r)| {
            let p = p.clamp(lo, 1.0 - lo);
            -(r * p.ln() + (1.0 - r) * (-p).ln_1p())
        })
        .sum();
    Ok(total / predictions.len() as f64)
}

impl ModelWeights {
    pub fn zeros(dim: usize, k: usize, hidden: &[usize], merge: Merge) -> Self {
        let mut layers = Vec::with_capacity(hidden.len());
        let mut inputs = dim;
        for &h in hidden {
            layers.push(Layer::zeros(inputs, h));
            inputs = h;
        }
        ModelWeights {
            dim,
            k,
            w: vec![0.0; dim],
            y: vec![0.0; dim * k],
            layers,
            head: vec![0.0; inputs],
            head_bias: 0.0,
            fm_coef: 1.0,
            merge,
        }
    }

    /// Every trainable entry drawn uniformly from `[-scale, scale]`.
    pub fn random(dim: usize, k: usize, hidden: &[usize], merge: Merge, scale: f64, seed: u64) -> Self {
        let mut m = Self::zeros(dim, k, hidden, merge);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        m.for_each_param_mut(|p| *p = rng.random_range(-scale..=scale));
        m.fm_coef = 1.0;
        m
    }

    pub fn mlp_output_dim(&self) -> usize {
        self.layers.last().map_or(self.dim, |l| l.outputs)
    }

    fn check_shapes(&self) -> Result<()> {
        let mismatch = |expected, got| Err(Error::DimensionMismatch { expected, got });
        if self.k == 0 {
            return Err(Error::Domain("latent dimension must be at least 1".into()));
        }
        if self.w.len() != self.dim {
            return mismatch(self.dim, self.w.len());
        }
        if self.y.len() != self.dim * self.k {
            return mismatch(self.dim * self.k, self.y.len());
        }
        let mut inputs = self.dim;
        for l in &self.layers {
            if l.inputs != inputs {
                return mismatch(inputs, l.inputs);
            }
            if l.w.len() != l.inputs * l.outputs || l.b.len() != l.outputs {
                return mismatch(l.inputs * l.outputs, l.w.len());
            }
            inputs = l.outputs;
        }
        if self.head.len() != inputs {
            return mismatch(inputs, self.head.len());
        }
        Ok(())
    }

    fn check_input(&self, x: &FeatureVector) -> Result<()> {
        let need = x.min_dim();
        if need > self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: need,
            });
        }
        Ok(())
    }

    /// Visits every trainable scalar in a fixed order.
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        self.w.iter_mut().for_each(&mut f);
        self.y.iter_mut().for_each(&mut f);
        for l in &mut self.layers {
            l.w.iter_mut().for_each(&mut f);
            l.b.iter_mut().for_each(&mut f);
        }
        self.head.iter_mut().for_each(&mut f);
        f(&mut self.head_bias);
        if self.merge == Merge::Concat {
            f(&mut self.fm_coef);
        }
    }

    pub fn params(&self) -> Vec<f64> {
        let mut copy = self.clone();
        let mut out = Vec::new();
        copy.for_each_param_mut(|p| out.push(*p));
        out
    }

    pub fn set_params(&mut self, values: &[f64]) {
        let mut it = values.iter();
        self.for_each_param_mut(|p| *p = *it.next().expect("parameter count"));
    }

    pub fn fm_forward(&self, x: &FeatureVector) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.fm_parts(x).1)
    }

    fn fm_parts(&self, x: &FeatureVector) -> (Vec<f64>, f64) {
        let k = self.k;
        let mut sums = vec![0.0; k];
        let mut squares = 0.0;
        let mut linear = 0.0;
        for (i, v) in x.entries() {
            linear += self.w[i] * v;
            let yi = &self.y[i * k..(i + 1) * k];
            for f in 0..k {
                let t = yi[f] * v;
                sums[f] += t;
                squares += t * t;
            }
        }
        let cross: f64 = sums.iter().map(|s| s * s).sum::<f64>() - squares;
        (sums, linear + 0.5 * cross)
    }

    pub fn mlp_forward(&self, x: &FeatureVector) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.mlp_parts(x).1)
    }

    fn mlp_parts(&self, x: &FeatureVector) -> (Vec<Vec<f64>>, Vec<f64>) {
        let Some(first) = self.layers.first() else {
            return (Vec::new(), x.to_dense(self.dim));
        };
        let mut acts = Vec::with_capacity(self.layers.len());
        let mut a = first.b.clone();
        for (i, v) in x.entries() {
            for (o, &wio) in a.iter_mut().zip(first.row(i)) {
                *o += wio * v;
            }
        }
        a.iter_mut().for_each(|z| *z = z.max(0.0));
        acts.push(a);
        for l in &self.layers[1..] {
            let input = acts.last().unwrap();
            let mut a = l.b.clone();
            for (i, &v) in input.iter().enumerate() {
                if v != 0.0 {
                    for (o, &wio) in a.iter_mut().zip(l.row(i)) {
                        *o += wio * v;
                    }
                }
            }
            a.iter_mut().for_each(|z| *z = z.max(0.0));
            acts.push(a);
        }
        let out = acts.last().unwrap().clone();
        (acts, out)
    }

    pub fn forward(&self, x: &FeatureVector) -> Result<Forward> {
        self.check_input(x)?;
        let (factor_sums, z_fm) = self.fm_parts(x);
        let (activations, z_mlp) = self.mlp_parts(x);
        let coef = match self.merge {
            Merge::Sum => 1.0,
            Merge::Concat => self.fm_coef,
        };
        let logit = coef * z_fm
            + self.head.iter().zip(&z_mlp).map(|(h, z)| h * z).sum::<f64>()
            + self.head_bias;
        Ok(Forward {
            factor_sums,
            z_fm,
            activations,
            z_mlp,
            logit,
        })
    }

    /// Predicted interest `sigmoid(logit)` in `(0, 1)`.
    pub fn predict(&self, x: &FeatureVector) -> Result<f64> {
        Ok(sigmoid(self.forward(x)?.logit))
    }

    /// Predictions for many rows, computed in parallel, in input order.
    pub fn predict_many(&self, xs: &[FeatureVector]) -> Result<Vec<f64>> {
        xs.par_iter().map(|x| self.predict(x)).collect()
    }

    /// Mean cross-entropy over `samples`.
    pub fn mean_loss(&self, samples: &[Sample]) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::Domain("loss of an empty set".into()));
        }
        let total: f64 = samples
            .par_iter()
            .map(|s| Ok(logit_loss(self.forward(&s.x)?.logit, s.label)))
            .collect::<Result<Vec<f64>>>()?
            .iter()
            .sum();
        Ok(total / samples.len() as f64)
    }

    /// Gradient of the mean loss over `batch`, shaped like `self`.
    pub fn gradients(&self, batch: &[Sample]) -> Result<ModelWeights> {
        self.check_shapes()?;
        if batch.is_empty() {
            return Err(Error::Domain("gradient of an empty batch".into()));
        }
        let mut acc = GradAccumulator::new(self);
        for s in batch {
            acc.add(self, s, 1.0 / batch.len() as f64)?;
        }
        let mut g = ModelWeights::zeros(self.dim, self.k, &[], self.merge);
        g.layers = acc.layers.clone();
        g.w = acc.w;
        g.y = acc.y;
        g.head = acc.head;
        g.head_bias = acc.head_bias;
        g.fm_coef = acc.fm_coef;
        Ok(g)
    }

    pub fn to_file(&self, schema_hash: &str, config: &TrainConfig) -> WeightsFile {
        WeightsFile {
            format: WEIGHTS_FORMAT.to_string(),
            version: WEIGHTS_VERSION,
            schema_hash: schema_hash.to_string(),
            provenance: String::new(),
            config: config.clone(),
            weights: self.clone(),
        }
    }
}

/// Gradient buffers with a list of the input rows touched since the last
/// reset, so sparse updates cost `O(active features)`.
struct GradAccumulator {
    w: Vec<f64>,
    y: Vec<f64>,
    layers: Vec<Layer>,
    head: Vec<f64>,
    head_bias: f64,
    fm_coef: f64,
    touched: Vec<usize>,
    marked: Vec<bool>,
}

impl GradAccumulator {
    fn new(m: &ModelWeights) -> Self {
        GradAccumulator {
            w: vec![0.0; m.dim],
            y: vec![0.0; m.dim * m.k],
            layers: m.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect(),
            head: vec![0.0; m.head.len()],
            head_bias: 0.0,
            fm_coef: 0.0,
            touched: Vec::new(),
            marked: vec![false; m.dim],
        }
    }

    /// Adds `scale * dLoss/dparams` of one sample. Returns its loss.
    fn add(&mut self, m: &ModelWeights, s: &Sample, scale: f64) -> Result<f64> {
        let fw = m.forward(&s.x)?;
        let loss = logit_loss(fw.logit, s.label);
        // The clamp makes the loss flat outside [-30, 30].
        if fw.logit.abs() >= LOGIT_CLAMP {
            return Ok(loss);
        }
        let dz = (sigmoid(fw.logit) - s.label) * scale;
        let k = m.k;

        for (i, _) in s.x.entries() {
            if !self.marked[i] {
                self.marked[i] = true;
                self.touched.push(i);
            }
        }

        let coef = match m.merge {
            Merge::Sum => 1.0,
            Merge::Concat => {
                self.fm_coef += dz * fw.z_fm;
                m.fm_coef
            }
        };
        let g_fm = dz * coef;
        for (i, v) in s.x.entries() {
            self.w[i] += g_fm * v;
            let yi = &m.y[i * k..(i + 1) * k];
            let gi = &mut self.y[i * k..(i + 1) * k];
            for f in 0..k {
                gi[f] += g_fm * v * (fw.factor_sums[f] - yi[f] * v);
            }
        }

        self.head_bias += dz;
        for (g, z) in self.head.iter_mut().zip(&fw.z_mlp) {
            *g += dz * z;
        }
        if m.layers.is_empty() {
            return Ok(loss);
        }
        // delta of the last layer's pre-activation.
        let last = fw.activations.len() - 1;
        let mut delta: Vec<f64> = m
            .head
            .iter()
            .zip(&fw.activations[last])
            .map(|(h, &a)| if a > 0.0 { dz * h } else { 0.0 })
            .collect();
        for l in (0..m.layers.len()).rev() {
            let layer = &m.layers[l];
            let grad = &mut self.layers[l];
            for (gb, d) in grad.b.iter_mut().zip(&delta) {
                *gb += d;
            }
            if l == 0 {
                for (i, v) in s.x.entries() {
                    let row = &mut grad.w[i * layer.outputs..(i + 1) * layer.outputs];
                    for (g, d) in row.iter_mut().zip(&delta) {
                        *g += v * d;
                    }
                }
                break;
            }
            let input = &fw.activations[l - 1];
            let mut next = vec![0.0; layer.inputs];
            for (i, &a) in input.iter().enumerate() {
                let row = layer.row(i);
                let grow = &mut grad.w[i * layer.outputs..(i + 1) * layer.outputs];
                let mut back = 0.0;
                for o in 0..layer.outputs {
                    grow[o] += a * delta[o];
                    back += row[o] * delta[o];
                }
                next[i] = if a > 0.0 { back } else { 0.0 };
            }
            delta = next;
        }
        Ok(loss)
    }

    /// `params -= lr * grad`, then clears the buffers.
    fn apply(&mut self, m: &mut ModelWeights, lr: f64) {
        let k = m.k;
        let first_out = m.layers.first().map_or(0, |l| l.outputs);
        for &i in &self.touched {
            m.w[i] -= lr * self.w[i];
            self.w[i] = 0.0;
            for f in i * k..(i + 1) * k {
                m.y[f] -= lr * self.y[f];
                self.y[f] = 0.0;
            }
            if let (Some(layer), Some(grad)) = (m.layers.first_mut(), self.layers.first_mut()) {
                for o in i * first_out..(i + 1) * first_out {
                    layer.w[o] -= lr * grad.w[o];
                    grad.w[o] = 0.0;
                }
            }
            self.marked[i] = false;
        }
        self.touched.clear();
        for (l, (layer, grad)) in m.layers.iter_mut().zip(&mut self.layers).enumerate() {
            if l > 0 {
                for (p, g) in layer.w.iter_mut().zip(grad.w.iter_mut()) {
                    *p -= lr * *g;
                    *g = 0.0;
                }
            }
            for (p, g) in layer.b.iter_mut().zip(grad.b.iter_mut()) {
                *p -= lr * *g;
                *g = 0.0;
            }
        }
        for (p, g) in m.head.iter_mut().zip(self.head.iter_mut()) {
            *p -= lr * *g;
            *g = 0.0;
        }
        m.head_bias -= lr * self.head_bias;
        self.head_bias = 0.0;
        if m.merge == Merge::Concat {
            m.fm_coef -= lr * self.fm_coef;
        }
        self.fm_coef = 0.0;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: ModelWeights,
    /// Epoch 0 holds the losses of the initial weights.
    pub trace: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Mini-batch gradient descent with early stopping on validation loss.
///
/// Training stops once the validation loss has failed to improve on the
/// previous epoch `patience` times in a row, or after `max_epochs`. The
/// weights of the epoch with the lowest validation loss are returned.
pub fn train(train: &[Sample], validation: &[Sample], dim: usize, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_observed(train, validation, dim, cfg, |_, _| Ok(()))
}

/// [`train`], calling `on_epoch` with each epoch's record and weights,
/// epoch 0 included.
pub fn train_observed(
    train: &[Sample],
    validation: &[Sample],
    dim: usize,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord, &ModelWeights) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() || validation.is_empty() {
        return Err(Error::Domain("training and validation sets must be nonempty".into()));
    }
    let mut model = ModelWeights::random(dim, cfg.k, &cfg.hidden, cfg.merge, cfg.init_scale, cfg.seed);
    for s in train.iter().chain(validation) {
        model.check_input(&s.x)?;
    }
    let mut acc = GradAccumulator::new(&model);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let first = EpochRecord {
        epoch: 0,
        train_loss: model.mean_loss(train)?,
        val_loss: model.mean_loss(validation)?,
    };
    on_epoch(&first, &model)?;
    let mut best = (first.val_loss, 0, model.clone());
    let mut trace = vec![first];
    let mut strikes = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            for &j in batch {
                acc.add(&model, &train[j], scale)?;
            }
            acc.apply(&mut model, cfg.learning_rate);
        }
        let rec = EpochRecord {
            epoch,
            train_loss: model.mean_loss(train)?,
            val_loss: model.mean_loss(validation)?,
        };
        if !rec.train_loss.is_finite() {
            return Err(Error::Divergence { epoch, what: "training loss" });
        }
        if !rec.val_loss.is_finite() {
            return Err(Error::Divergence { epoch, what: "validation loss" });
        }
        log::info!(
            "epoch {epoch}: train loss {:.5}, validation loss {:.5}",
            rec.train_loss,
            rec.val_loss
        );
        on_epoch(&rec, &model)?;
        let previous = trace.last().unwrap().val_loss;
        if rec.val_loss < best.0 {
            best = (rec.val_loss, epoch, model.clone());
        }
        strikes = if rec.val_loss >= previous { strikes + 1 } else { 0 };
        trace.push(rec);
        if strikes >= cfg.patience {
            break;
        }
    }
    Ok(TrainOutcome {
        weights: best.2,
        trace,
        best_epoch: best.1,
    })
}

/// Area under the ROC curve, ties credited one half.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Average ranks over tie groups (Mann-Whitney U).
    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && scores[idx[end]] == scores[idx[start]] {
            end += 1;
        }
        let avg_rank = (start + end + 1) as f64 / 2.0;
        for &j in &idx[start..end] {
            if labels[j] >= 0.5 {
                rank_sum_pos += avg_rank;
            }
        }
        start = end;
    }
    let pos = labels.iter().filter(|&&r| r >= 0.5).count() as f64;
    let neg = labels.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return Err(Error::UndefinedMetric("AUC needs both classes in the test set".into()));
    }
    Ok((rank_sum_pos - pos * (pos + 1.0) / 2.0) / (pos * neg))
}

/// Fraction of rows whose thresholded score `score >= delta` matches the label.
pub fn accuracy(scores: &[f64], labels: &[f64], delta: f64) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::UndefinedMetric("accuracy of an empty set".into()));
    }
    let (mut tp, mut tn) = (0usize, 0usize);
    for (&s, &r) in scores.iter().zip(labels) {
        match (s >= delta, r >= 0.5) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            _ => {}
        }
    }
    Ok((tp + tn) as f64 / scores.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    /// `None` when the set holds a single class.
    pub auc: Option<f64>,
    pub acc: f64,
}

pub fn evaluate(weights: &ModelWeights, test: &[Sample], delta: f64) -> Result<Evaluation> {
    let xs: Vec<FeatureVector> = test.iter().map(|s| s.x.clone()).collect();
    let scores = weights.predict_many(&xs)?;
    let labels: Vec<f64> = test.iter().map(|s| s.label).collect();
    let auc = match auc(&scores, &labels) {
        Ok(a) => Some(a),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(Evaluation {
        auc,
        acc: accuracy(&scores, &labels, delta)?,
    })
}

/// Persisted model: weights, training config and the hash of the encoding
/// schema they were trained against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsFile {
    pub format: String,
    pub version: u32,
    pub schema_hash: String,
    /// Free-form origin note, such as the producing run's config header.
    #[serde(default)]
    pub provenance: String,
    pub config: TrainConfig,
    pub weights: ModelWeights,
}

impl WeightsFile {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: WeightsFile = serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if file.format != WEIGHTS_FORMAT || file.version != WEIGHTS_VERSION {
            return Err(Error::Format(format!(
                "{}: expected {WEIGHTS_FORMAT} v{WEIGHTS_VERSION}, found {} v{}",
                path.display(),
                file.format,
                file.version
            )));
        }
        file.weights.check_shapes()?;
        Ok(file)
    }

    /// Fails unless the weights were trained against the schema with `hash`.
    pub fn check_schema(&self, hash: &str) -> Result<()> {
        if self.schema_hash != hash {
            return Err(Error::Integrity(format!(
                "weights were trained with schema {}, not {hash}",
                self.schema_hash
            )));
        }
        Ok(())
    }
}
