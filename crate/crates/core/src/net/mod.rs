//! A small differentiable classifier runtime.
//!
//! Activations are `channels × length` buffers. A model is an ordered list
//! of layers ending in `num_classes` logits; probabilities are the softmax
//! of those logits. A trailing [`Layer::Softmax`] is accepted and is purely
//! declarative.

mod arch;
mod backward;
mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

pub use arch::Arch;
pub(crate) use backward::Rule;
pub use train::{train, Optimizer, TrainConfig, TrainReport};

/// Which model output an attribution or gradient targets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    /// Softmax probability of the target class.
    #[default]
    Probability,
    /// Pre-softmax logit of the target class.
    Logit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    Dense {
        in_features: usize,
        out_features: usize,
        /// Row-major `out_features × in_features`.
        weight: Vec<f64>,
        bias: Vec<f64>,
    },
    Conv1d {
        channels_in: usize,
        channels_out: usize,
        kernel_len: usize,
        /// Row-major `channels_out × channels_in × kernel_len`. Stride 1, same padding.
        weight: Vec<f64>,
        bias: Vec<f64>,
    },
    Relu,
    GlobalAvgPool,
    /// `body(x) + shortcut(x)`; an empty shortcut is the identity.
    ResidualAdd {
        body: Vec<Layer>,
        #[serde(default)]
        shortcut: Vec<Layer>,
    },
    BatchNormInference {
        channels: usize,
        gamma: Vec<f64>,
        beta: Vec<f64>,
        running_mean: Vec<f64>,
        running_var: Vec<f64>,
        #[serde(default = "default_bn_eps")]
        eps: f64,
    },
    Softmax,
}

fn default_bn_eps() -> f64 {
    1e-5
}

impl Layer {
    pub fn dense(
        in_features: usize,
        out_features: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
    ) -> Self {
        Layer::Dense {
            in_features,
            out_features,
            weight,
            bias,
        }
    }

    pub fn conv1d(
        channels_in: usize,
        channels_out: usize,
        kernel_len: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
    ) -> Self {
        Layer::Conv1d {
            channels_in,
            channels_out,
            kernel_len,
            weight,
            bias,
        }
    }

    pub fn batch_norm(channels: usize) -> Self {
        Layer::BatchNormInference {
            channels,
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            eps: default_bn_eps(),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Layer::Dense { .. } => "dense",
            Layer::Conv1d { .. } => "conv1d",
            Layer::Relu => "relu",
            Layer::GlobalAvgPool => "global_avg_pool",
            Layer::ResidualAdd { .. } => "residual_add",
            Layer::BatchNormInference { .. } => "batch_norm_inference",
            Layer::Softmax => "softmax",
        }
    }

    /// Output shape for an input of `shape`, validating parameters.
    fn out_shape(&self, shape: (usize, usize), path: &str) -> Result<(usize, usize)> {
        let (c, t) = shape;
        let mismatch = |msg: String| {
            Err(Error::ShapeMismatch(format!(
                "{path} ({}): {msg}",
                self.name()
            )))
        };
        match self {
            Layer::Dense {
                in_features,
                out_features,
                weight,
                bias,
            } => {
                if c * t != *in_features {
                    return mismatch(format!("expects {in_features} inputs, got {}", c * t));
                }
                if weight.len() != in_features * out_features || bias.len() != *out_features {
                    return mismatch(format!(
                        "weight {} / bias {} do not match {out_features}x{in_features}",
                        weight.len(),
                        bias.len()
                    ));
                }
                Ok((*out_features, 1))
            }
            Layer::Conv1d {
                channels_in,
                channels_out,
                kernel_len,
                weight,
                bias,
            } => {
                if c != *channels_in {
                    return mismatch(format!("expects {channels_in} channels, got {c}"));
                }
                if *kernel_len == 0
                    || weight.len() != channels_out * channels_in * kernel_len
                    || bias.len() != *channels_out
                {
                    return mismatch(format!(
                        "weight {} / bias {} do not match {channels_out}x{channels_in}x{kernel_len}",
                        weight.len(),
                        bias.len()
                    ));
                }
                Ok((*channels_out, t))
            }
            Layer::Relu => Ok(shape),
            Layer::GlobalAvgPool => Ok((c, 1)),
            Layer::BatchNormInference {
                channels,
                gamma,
                beta,
                running_mean,
                running_var,
                eps,
            } => {
                if c != *channels {
                    return mismatch(format!("expects {channels} channels, got {c}"));
                }
                if [gamma, beta, running_mean, running_var]
                    .iter()
                    .any(|v| v.len() != *channels)
                {
                    return mismatch("parameter lengths differ from channel count".into());
                }
                if running_var.iter().any(|v| *v < 0.0) || *eps <= 0.0 {
                    return mismatch("variance must be non-negative and eps positive".into());
                }
                Ok(shape)
            }
            Layer::ResidualAdd { body, shortcut } => {
                let b = chain_shape(body, shape, &format!("{path}.body"))?;
                let s = chain_shape(shortcut, shape, &format!("{path}.shortcut"))?;
                if b != s {
                    return mismatch(format!("branch shapes differ: {b:?} vs {s:?}"));
                }
                Ok(b)
            }
            Layer::Softmax => Ok(shape),
        }
    }

    fn for_each_param(&self, f: &mut impl FnMut(&[f64])) {
        match self {
            Layer::Dense { weight, bias, .. } | Layer::Conv1d { weight, bias, .. } => {
                f(weight);
                f(bias);
            }
            Layer::BatchNormInference { gamma, beta, .. } => {
                f(gamma);
                f(beta);
            }
            Layer::ResidualAdd { body, shortcut } => {
                for l in body.iter().chain(shortcut) {
                    l.for_each_param(f);
                }
            }
            _ => {}
        }
    }

    fn for_each_param_mut(&mut self, f: &mut impl FnMut(&mut [f64])) {
        match self {
            Layer::Dense { weight, bias, .. } | Layer::Conv1d { weight, bias, .. } => {
                f(weight);
                f(bias);
            }
            Layer::BatchNormInference { gamma, beta, .. } => {
                f(gamma);
                f(beta);
            }
            Layer::ResidualAdd { body, shortcut } => {
                for l in body.iter_mut().chain(shortcut.iter_mut()) {
                    l.for_each_param_mut(f);
                }
            }
            _ => {}
        }
    }

    /// Number of trainable tensors (each visited by `for_each_param`).
    fn param_tensors(&self) -> usize {
        match self {
            Layer::Dense { .. } | Layer::Conv1d { .. } | Layer::BatchNormInference { .. } => 2,
            Layer::ResidualAdd { body, shortcut } => {
                body.iter().chain(shortcut).map(Layer::param_tensors).sum()
            }
            _ => 0,
        }
    }

    fn all_finite(&self) -> bool {
        let mut ok = true;
        self.for_each_param(&mut |p| ok &= p.iter().all(|v| v.is_finite()));
        if let Layer::BatchNormInference {
            running_mean,
            running_var,
            eps,
            ..
        } = self
        {
            ok &= running_mean
                .iter()
                .chain(running_var)
                .all(|v| v.is_finite())
                && eps.is_finite();
        }
        ok
    }
}

fn chain_shape(layers: &[Layer], mut shape: (usize, usize), path: &str) -> Result<(usize, usize)> {
    for (i, l) in layers.iter().enumerate() {
        if matches!(l, Layer::Softmax) {
            return Err(Error::ShapeMismatch(format!(
                "{path}[{i}]: softmax is only allowed as the final layer"
            )));
        }
        shape = l.out_shape(shape, &format!("{path}[{i}]"))?;
    }
    Ok(shape)
}

/// Activation buffer, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Act {
    pub c: usize,
    pub t: usize,
    pub v: Vec<f64>,
}

impl Act {
    pub fn input(x: &[f64]) -> Self {
        Act {
            c: 1,
            t: x.len(),
            v: x.to_vec(),
        }
    }

    pub fn zeros(c: usize, t: usize) -> Self {
        Act {
            c,
            t,
            v: vec![0.0; c * t],
        }
    }
}

/// Per-layer record of a forward pass.
#[derive(Debug, Clone)]
pub(crate) enum Cache {
    Input(Act),
    Residual {
        input: Act,
        body: Vec<Cache>,
        shortcut: Vec<Cache>,
    },
}

impl Cache {
    pub fn input(&self) -> &Act {
        match self {
            Cache::Input(a) | Cache::Residual { input: a, .. } => a,
        }
    }
}

/// Normalization in effect for one batch-norm layer: `y = x * scale + shift`.
pub(crate) fn bn_affine(
    gamma: &[f64],
    beta: &[f64],
    mean: &[f64],
    var: &[f64],
    eps: f64,
) -> (Vec<f64>, Vec<f64>) {
    let scale: Vec<f64> = gamma
        .iter()
        .zip(var)
        .map(|(g, v)| g / (v + eps).sqrt())
        .collect();
    let shift = beta
        .iter()
        .zip(mean)
        .zip(&scale)
        .map(|((b, m), s)| b - m * s)
        .collect();
    (scale, shift)
}

pub(crate) fn layer_forward(layer: &Layer, x: &Act) -> (Act, Cache) {
    let out = match layer {
        Layer::Dense {
            in_features,
            out_features,
            weight,
            bias,
        } => {
            let mut y = Act::zeros(*out_features, 1);
            for o in 0..*out_features {
                let row = &weight[o * in_features..(o + 1) * in_features];
                y.v[o] = bias[o] + row.iter().zip(&x.v).map(|(w, v)| w * v).sum::<f64>();
            }
            y
        }
        Layer::Conv1d {
            channels_in,
            channels_out,
            kernel_len,
            weight,
            bias,
        } => {
            let t_len = x.t;
            let pad = (kernel_len - 1) / 2;
            let mut y = Act::zeros(*channels_out, t_len);
            for o in 0..*channels_out {
                let yo = &mut y.v[o * t_len..(o + 1) * t_len];
                yo.fill(bias[o]);
                for i in 0..*channels_in {
                    let xi = &x.v[i * t_len..(i + 1) * t_len];
                    let w = &weight[(o * channels_in + i) * kernel_len
                        ..(o * channels_in + i + 1) * kernel_len];
                    for (k, &wk) in w.iter().enumerate() {
                        // output t reads input t + k - pad
                        let lo = pad.saturating_sub(k);
                        let hi = (t_len + pad).saturating_sub(k).min(t_len);
                        for t in lo..hi {
                            yo[t] += wk * xi[t + k - pad];
                        }
                    }
                }
            }
            y
        }
        Layer::Relu => Act {
            c: x.c,
            t: x.t,
            v: x.v.iter().map(|v| v.max(0.0)).collect(),
        },
        Layer::GlobalAvgPool => {
            let mut y = Act::zeros(x.c, 1);
            for c in 0..x.c {
                y.v[c] = x.v[c * x.t..(c + 1) * x.t].iter().sum::<f64>() / x.t as f64;
            }
            y
        }
        Layer::BatchNormInference {
            gamma,
            beta,
            running_mean,
            running_var,
            eps,
            ..
        } => {
            let (scale, shift) = bn_affine(gamma, beta, running_mean, running_var, *eps);
            apply_affine(x, &scale, &shift)
        }
        Layer::ResidualAdd { body, shortcut } => {
            let (b, bc) = chain_forward(body, x.clone());
            let (s, sc) = chain_forward(shortcut, x.clone());
            let mut y = b;
            for (a, v) in y.v.iter_mut().zip(&s.v) {
                *a += v;
            }
            return (
                y,
                Cache::Residual {
                    input: x.clone(),
                    body: bc,
                    shortcut: sc,
                },
            );
        }
        Layer::Softmax => x.clone(),
    };
    (out, Cache::Input(x.clone()))
}

pub(crate) fn apply_affine(x: &Act, scale: &[f64], shift: &[f64]) -> Act {
    let mut y = x.clone();
    for c in 0..x.c {
        for v in &mut y.v[c * x.t..(c + 1) * x.t] {
            *v = *v * scale[c] + shift[c];
        }
    }
    y
}

pub(crate) fn chain_forward(layers: &[Layer], mut x: Act) -> (Act, Vec<Cache>) {
    let mut caches = Vec::with_capacity(layers.len());
    for l in layers {
        let (y, cache) = layer_forward(l, &x);
        caches.push(cache);
        x = y;
    }
    (x, caches)
}

/// Forward record of a whole model.
#[derive(Debug, Clone)]
pub(crate) struct Trace {
    pub caches: Vec<Cache>,
    pub logits: Vec<f64>,
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct Model {
    input_len: usize,
    num_classes: usize,
    layers: Vec<Layer>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    input_len: usize,
    num_classes: usize,
    layers: Vec<Layer>,
}

impl From<Model> for ModelFile {
    fn from(m: Model) -> Self {
        ModelFile {
            input_len: m.input_len,
            num_classes: m.num_classes,
            layers: m.layers,
        }
    }
}

impl TryFrom<ModelFile> for Model {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        Model::new(f.input_len, f.num_classes, f.layers)
    }
}

impl Model {
    pub fn new(input_len: usize, num_classes: usize, layers: Vec<Layer>) -> Result<Self> {
        if input_len == 0 || num_classes == 0 {
            return Err(Error::ShapeMismatch(
                "input_len and num_classes must be positive".into(),
            ));
        }
        let body = match layers.split_last() {
            Some((Layer::Softmax, rest)) => rest,
            _ => &layers[..],
        };
        let (c, t) = chain_shape(body, (1, input_len), "layers")?;
        if c * t != num_classes {
            return Err(Error::ShapeMismatch(format!(
                "final layer produces {} outputs, expected {num_classes} logits",
                c * t
            )));
        }
        if let Some(i) = layers.iter().position(|l| !l.all_finite()) {
            return Err(Error::InvalidParams(format!(
                "layer {i} has non-finite parameters"
            )));
        }
        Ok(Self {
            input_len,
            num_classes,
            layers,
        })
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Layers that produce logits (without a trailing softmax).
    pub(crate) fn body(&self) -> &[Layer] {
        match self.layers.split_last() {
            Some((Layer::Softmax, rest)) => rest,
            _ => &self.layers,
        }
    }

    pub(crate) fn layers_mut(&mut self) -> &mut Vec<Layer> {
        &mut self.layers
    }

    pub(crate) fn trace(&self, x: &[f64]) -> Result<Trace> {
        check_len(self.input_len, x.len())?;
        let (out, caches) = chain_forward(self.body(), Act::input(x));
        if out.v.iter().any(|v| !v.is_finite()) {
            let layer = caches
                .iter()
                .position(|c| c.input().v.iter().any(|v| !v.is_finite()))
                .map_or(caches.len() - 1, |i| i.saturating_sub(1));
            return Err(Error::NonFinite { layer });
        }
        Ok(Trace {
            caches,
            logits: out.v,
        })
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(x)?.logits)
    }

    /// Softmax class probabilities.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(x)?))
    }

    pub fn predict_class(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }

    /// Scalar model output for `class`.
    pub fn score(&self, x: &[f64], class: usize, output: Output) -> Result<f64> {
        self.check_class(class)?;
        let logits = self.logits(x)?;
        Ok(match output {
            Output::Logit => logits[class],
            Output::Probability => softmax(&logits)[class],
        })
    }

    pub(crate) fn check_class(&self, class: usize) -> Result<()> {
        if class < self.num_classes {
            Ok(())
        } else {
            Err(Error::InvalidClass {
                class,
                num_classes: self.num_classes,
            })
        }
    }

    /// `∂M_c(x)/∂x` by reverse-mode differentiation, softmax included.
    pub fn input_gradient(&self, x: &[f64], class: usize) -> Result<Vec<f64>> {
        self.gradient(x, class, Output::Probability)
    }

    pub fn gradient(&self, x: &[f64], class: usize, output: Output) -> Result<Vec<f64>> {
        self.backprop(x, None, class, output, Rule::Gradient)
    }

    pub(crate) fn backprop(
        &self,
        x: &[f64],
        reference: Option<&[f64]>,
        class: usize,
        output: Output,
        rule: Rule,
    ) -> Result<Vec<f64>> {
        self.check_class(class)?;
        let trace = self.trace(x)?;
        let ref_trace = reference.map(|r| self.trace(r)).transpose()?;
        Ok(backward::input_multipliers(
            self,
            &trace,
            ref_trace.as_ref(),
            class,
            output,
            rule,
        ))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(self).expect("model serializes");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        // Parse structurally first so that shape problems surface as
        // ShapeMismatch rather than a generic parse failure.
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::MalformedFile(e.to_string()))?;
        Model::try_from(file)
    }

    pub(crate) fn param_tensors(&self) -> usize {
        self.body().iter().map(Layer::param_tensors).sum()
    }

    pub(crate) fn params(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for l in self.body() {
            l.for_each_param(&mut |p| out.push(p.to_vec()));
        }
        out
    }
}

pub fn save_model(m: &Model, path: impl AsRef<Path>) -> Result<()> {
    m.save(path)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    Model::load(path)
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
