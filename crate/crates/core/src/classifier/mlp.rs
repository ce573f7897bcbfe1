//! Feed-forward network with a sigmoid output, trained on the log loss with
//! mini-batch Adam.
//!
//! Parameters live in one flat vector. Layer `l` maps `n_l` inputs to
//! `n_{l+1}` outputs and stores its weights row-major (`out × in`) followed
//! by its biases.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use super::{FeatureEncoder, FitReport, ProbabilisticClassifier};
use crate::error::{domain, Error, Result};
use crate::rng::{self, Rng};
use crate::space::{LabeledSet, SearchSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Activation {
    Relu,
    Elu,
}

impl Activation {
    /// `elu` for spaces with at most two dimensions, `relu` otherwise.
    pub fn default_for_dim(dim: usize) -> Self {
        if dim <= 2 {
            Activation::Elu
        } else {
            Activation::Relu
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Elu => {
                if v > 0.0 {
                    v
                } else {
                    libm::expm1(v)
                }
            }
        }
    }

    fn derivative(self, v: f64) -> f64 {
        match self {
            Activation::Relu => {
                if v > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Elu => {
                if v > 0.0 {
                    1.0
                } else {
                    libm::exp(v)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct MlpConfig {
    pub hidden_widths: Vec<usize>,
    /// `None` picks [`Activation::default_for_dim`].
    pub activation: Option<Activation>,
    pub batch_size: usize,
    pub steps_per_iteration: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden_widths: vec![32, 32],
            activation: None,
            batch_size: 64,
            steps_per_iteration: 100,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_widths.is_empty() || self.hidden_widths.contains(&0) {
            return Err(domain("mlp needs at least one hidden layer of positive width"));
        }
        if self.batch_size == 0 || self.steps_per_iteration == 0 {
            return Err(domain("batch size and steps per iteration must be positive"));
        }
        let a = &self.adam;
        if !(a.learning_rate > 0.0
            && (0.0..1.0).contains(&a.beta1)
            && (0.0..1.0).contains(&a.beta2)
            && a.epsilon > 0.0)
        {
            return Err(domain("invalid adam settings"));
        }
        Ok(())
    }

    pub fn resolved_activation(&self, dim: usize) -> Activation {
        self.activation.unwrap_or_else(|| Activation::default_for_dim(dim))
    }
}

/// Steps per epoch `M = ceil(N/B)` and effective epochs `E = floor(S/M)`
/// when training for `S` mini-batch steps on `N` points.
pub fn epochs_for_iteration(steps: usize, batch_size: usize, n: usize) -> Result<(usize, usize)> {
    if steps == 0 || batch_size == 0 || n == 0 {
        return Err(domain("steps, batch size and dataset size must be positive"));
    }
    let m = n.div_ceil(batch_size);
    Ok((m, steps / m))
}

fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + libm::exp(-a))
    } else {
        let e = libm::exp(a);
        e / (1.0 + e)
    }
}

/// `-[z log σ(a) + (1-z) log(1-σ(a))]` evaluated without overflow.
fn logit_loss(a: f64, z: bool) -> f64 {
    let t = if z { 1.0 } else { 0.0 };
    a.max(0.0) - a * t + libm::log1p(libm::exp(-libm::fabs(a)))
}

#[derive(Debug, Clone, Copy)]
struct LayerShape {
    n_in: usize,
    n_out: usize,
    offset: usize,
}

impl LayerShape {
    fn bias_offset(&self) -> usize {
        self.offset + self.n_in * self.n_out
    }
}

#[derive(Debug, Clone)]
struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

/// Per-sample forward buffers.
#[derive(Debug, Default)]
struct Workspace {
    pre: Vec<Vec<f64>>,
    act: Vec<Vec<f64>>,
    delta: Vec<f64>,
    next_delta: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MlpClassifier {
    encoder: FeatureEncoder,
    activation: Activation,
    layers: Vec<LayerShape>,
    params: Vec<f64>,
    config: MlpConfig,
    adam: AdamState,
    rng: Rng,
}

impl MlpClassifier {
    /// Fan-in scaled normal weights on hidden layers, zeros on the output
    /// layer, so a fresh classifier predicts 0.5 everywhere.
    pub fn new(space: &SearchSpace, config: MlpConfig) -> Result<Self> {
        config.validate()?;
        let encoder = FeatureEncoder::new(space);
        let activation = config.resolved_activation(space.len());
        let mut sizes = vec![encoder.width()];
        sizes.extend_from_slice(&config.hidden_widths);
        sizes.push(1);

        let mut layers = Vec::with_capacity(sizes.len() - 1);
        let mut offset = 0;
        for w in sizes.windows(2) {
            layers.push(LayerShape {
                n_in: w[0],
                n_out: w[1],
                offset,
            });
            offset += w[0] * w[1] + w[1];
        }

        let mut rng = rng::from_seed(config.seed);
        let mut params = vec![0.0; offset];
        let hidden = layers.len() - 1;
        for layer in &layers[..hidden] {
            let std = libm::sqrt(2.0 / layer.n_in as f64);
            for w in &mut params[layer.offset..layer.bias_offset()] {
                let z: f64 = StandardNormal.sample(&mut rng);
                *w = std * z;
            }
        }

        Ok(MlpClassifier {
            encoder,
            activation,
            adam: AdamState {
                m: vec![0.0; offset],
                v: vec![0.0; offset],
                t: 0,
            },
            layers,
            params,
            config,
            rng,
        })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn num_parameters(&self) -> usize {
        self.params.len()
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                found: params.len(),
            });
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    fn workspace(&self) -> Workspace {
        let mut ws = Workspace::default();
        ws.act.push(Vec::with_capacity(self.encoder.width()));
        for layer in &self.layers {
            ws.pre.push(vec![0.0; layer.n_out]);
            ws.act.push(vec![0.0; layer.n_out]);
        }
        ws
    }

    /// Fills `ws.act[0]` with features beforehand; returns the output logit.
    fn forward(&self, ws: &mut Workspace) -> f64 {
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (head, tail) = ws.act.split_at_mut(l + 1);
            let input = &head[l];
            let out = &mut tail[0];
            let pre = &mut ws.pre[l];
            let w = &self.params[layer.offset..layer.bias_offset()];
            let b = &self.params[layer.bias_offset()..layer.bias_offset() + layer.n_out];
            for o in 0..layer.n_out {
                let row = &w[o * layer.n_in..(o + 1) * layer.n_in];
                let s: f64 = row.iter().zip(input.iter()).map(|(a, b)| a * b).sum::<f64>() + b[o];
                pre[o] = s;
                out[o] = if l == last { s } else { self.activation.apply(s) };
            }
        }
        ws.pre[last][0]
    }

    /// Back-propagates `dlogit` through the cached forward pass, adding
    /// parameter gradients into `grad` (if given) and returning the
    /// gradient with respect to the input features.
    fn backward(&self, ws: &mut Workspace, dlogit: f64, mut grad: Option<&mut [f64]>) -> Vec<f64> {
        ws.delta.clear();
        ws.delta.push(dlogit);
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input = &ws.act[l];
            if let Some(g) = grad.as_deref_mut() {
                for o in 0..layer.n_out {
                    let d = ws.delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &mut g[layer.offset + o * layer.n_in..layer.offset + (o + 1) * layer.n_in];
                    for (gi, &a) in row.iter_mut().zip(input.iter()) {
                        *gi += d * a;
                    }
                    g[layer.bias_offset() + o] += d;
                }
            }
            let w = &self.params[layer.offset..layer.bias_offset()];
            ws.next_delta.clear();
            ws.next_delta.resize(layer.n_in, 0.0);
            for o in 0..layer.n_out {
                let d = ws.delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &w[o * layer.n_in..(o + 1) * layer.n_in];
                for (nd, &wi) in ws.next_delta.iter_mut().zip(row) {
                    *nd += d * wi;
                }
            }
            if l > 0 {
                let pre = &ws.pre[l - 1];
                for (nd, &p) in ws.next_delta.iter_mut().zip(pre.iter()) {
                    *nd *= self.activation.derivative(p);
                }
            }
            core::mem::swap(&mut ws.delta, &mut ws.next_delta);
        }
        ws.delta.clone()
    }

    /// Output logit at a raw point.
    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        let mut ws = self.workspace();
        self.encoder.encode_into(x, &mut ws.act[0])?;
        Ok(self.forward(&mut ws))
    }

    fn encode_all(&self, data: &LabeledSet) -> Result<Vec<Vec<f64>>> {
        data.xs().iter().map(|x| self.encoder.encode(x)).collect()
    }

    fn loss_on(&self, feats: &[Vec<f64>], zs: &[bool], idx: &[usize], ws: &mut Workspace) -> f64 {
        let mut total = 0.0;
        for &i in idx {
            ws.act[0].clone_from(&feats[i]);
            total += logit_loss(self.forward(ws), zs[i]);
        }
        total / idx.len() as f64
    }

    fn gradient_on(
        &self,
        feats: &[Vec<f64>],
        zs: &[bool],
        idx: &[usize],
        ws: &mut Workspace,
        grad: &mut [f64],
    ) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let scale = 1.0 / idx.len() as f64;
        for &i in idx {
            ws.act[0].clone_from(&feats[i]);
            let a = self.forward(ws);
            let t = if zs[i] { 1.0 } else { 0.0 };
            self.backward(ws, (sigmoid(a) - t) * scale, Some(grad));
        }
    }

    /// Mean log loss on `data`, computed from logits.
    pub fn loss(&self, data: &LabeledSet) -> Result<f64> {
        if data.is_empty() {
            return Err(domain("log loss of an empty dataset"));
        }
        let feats = self.encode_all(data)?;
        let idx: Vec<usize> = (0..data.len()).collect();
        Ok(self.loss_on(&feats, data.zs(), &idx, &mut self.workspace()))
    }

    /// Exact gradient of [`loss`](Self::loss) with respect to the flat parameters.
    pub fn gradient(&self, batch: &LabeledSet) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Err(domain("gradient of an empty batch"));
        }
        let feats = self.encode_all(batch)?;
        let idx: Vec<usize> = (0..batch.len()).collect();
        let mut grad = vec![0.0; self.params.len()];
        self.gradient_on(&feats, batch.zs(), &idx, &mut self.workspace(), &mut grad);
        Ok(grad)
    }

    fn adam_step(&mut self, grad: &[f64]) {
        let cfg = self.config.adam;
        let st = &mut self.adam;
        st.t += 1;
        let bc1 = 1.0 - libm::pow(cfg.beta1, st.t as f64);
        let bc2 = 1.0 - libm::pow(cfg.beta2, st.t as f64);
        for (((p, &g), m), v) in self
            .params
            .iter_mut()
            .zip(grad)
            .zip(st.m.iter_mut())
            .zip(st.v.iter_mut())
        {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= cfg.learning_rate * m_hat / (libm::sqrt(v_hat) + cfg.epsilon);
        }
    }
}

impl ProbabilisticClassifier for MlpClassifier {
    /// Runs exactly `steps_per_iteration` Adam steps over mini-batches of a
    /// permutation that is redrawn every epoch. Parameters and optimizer
    /// moments carry over from the previous call.
    fn fit(&mut self, data: &LabeledSet) -> Result<FitReport> {
        data.require_both_classes()?;
        let feats = self.encode_all(data)?;
        let n = data.len();
        let all: Vec<usize> = (0..n).collect();
        let mut ws = self.workspace();
        let initial_loss = self.loss_on(&feats, data.zs(), &all, &mut ws);

        let b = self.config.batch_size.min(n);
        let mut perm = all.clone();
        let mut cursor = n;
        let mut grad = vec![0.0; self.params.len()];
        for _ in 0..self.config.steps_per_iteration {
            if cursor >= n {
                perm.shuffle(&mut self.rng);
                cursor = 0;
            }
            let end = (cursor + b).min(n);
            self.gradient_on(&feats, data.zs(), &perm[cursor..end], &mut ws, &mut grad);
            cursor = end;
            self.adam_step(&grad);
        }

        let final_loss = self.loss_on(&feats, data.zs(), &all, &mut ws);
        Ok(FitReport {
            initial_loss,
            final_loss,
        })
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        let p = sigmoid(self.logit(x)?);
        Ok(p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
    }

    fn is_differentiable(&self) -> bool {
        self.encoder.is_affine()
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        if !self.encoder.is_affine() {
            return Err(Error::Unsupported(
                "input gradients are undefined for categorical dimensions".into(),
            ));
        }
        let mut ws = self.workspace();
        self.encoder.encode_into(x, &mut ws.act[0])?;
        let a = self.forward(&mut ws);
        let p = sigmoid(a);
        let feature_grad = self.backward(&mut ws, p * (1.0 - p), None);
        Ok((p, self.encoder.pull_back(&feature_grad)?))
    }
}
