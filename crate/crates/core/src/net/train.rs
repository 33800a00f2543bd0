use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::backward::{chain_backward, Rule};
use super::{
    apply_affine, bn_affine, chain_forward, layer_forward, softmax, Act, Arch, Layer, Model,
};
use crate::error::{Error, Result};
use crate::Series;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Fraction of the data held out for validation accuracy.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 16,
            learning_rate: 0.01,
            seed: 0,
            optimizer: Optimizer::Adam,
            validation_fraction: 0.0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParams(
                "epochs and batch_size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidParams(
                "learning_rate must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidParams(
                "validation_fraction must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: Model,
    pub train_accuracy: f64,
    pub validation_accuracy: Option<f64>,
}

const BN_MOMENTUM: f64 = 0.1;
const ADAM_B1: f64 = 0.9;
const ADAM_B2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Per-layer batch statistics, in the traversal order of `visit_bn`.
type Stats = Vec<(Vec<f64>, Vec<f64>)>;

fn batch_stats(layers: &[Layer], mut batch: Vec<Act>, stats: &mut Stats) -> Vec<Act> {
    for layer in layers {
        batch = match layer {
            Layer::BatchNormInference {
                gamma, beta, eps, ..
            } => {
                let (c, t) = (batch[0].c, batch[0].t);
                let count = (batch.len() * t) as f64;
                let mut mean = vec![0.0; c];
                let mut var = vec![0.0; c];
                for a in &batch {
                    for (m, chunk) in mean.iter_mut().zip(a.v.chunks(t)) {
                        *m += chunk.iter().sum::<f64>();
                    }
                }
                mean.iter_mut().for_each(|m| *m /= count);
                for a in &batch {
                    for ch in 0..c {
                        var[ch] += a.v[ch * t..(ch + 1) * t]
                            .iter()
                            .map(|v| (v - mean[ch]).powi(2))
                            .sum::<f64>();
                    }
                }
                var.iter_mut().for_each(|v| *v /= count);
                let (scale, shift) = bn_affine(gamma, beta, &mean, &var, *eps);
                stats.push((mean, var));
                batch
                    .iter()
                    .map(|a| apply_affine(a, &scale, &shift))
                    .collect()
            }
            Layer::ResidualAdd { body, shortcut } => {
                let b = batch_stats(body, batch.clone(), stats);
                let s = batch_stats(shortcut, batch, stats);
                b.into_iter()
                    .zip(s)
                    .map(|(mut x, y)| {
                        x.v.iter_mut().zip(&y.v).for_each(|(a, b)| *a += b);
                        x
                    })
                    .collect()
            }
            other => batch.iter().map(|a| layer_forward(other, a).0).collect(),
        };
    }
    batch
}

fn visit_bn(layers: &mut [Layer], f: &mut impl FnMut(&mut Vec<f64>, &mut Vec<f64>)) {
    for layer in layers {
        match layer {
            Layer::BatchNormInference {
                running_mean,
                running_var,
                ..
            } => f(running_mean, running_var),
            Layer::ResidualAdd { body, shortcut } => {
                visit_bn(body, f);
                visit_bn(shortcut, f);
            }
            _ => {}
        }
    }
}

fn accuracy(model: &Model, data: &[&Series]) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0;
    for s in data {
        if Some(model.predict_class(s.values())?) == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Trains `arch` with softmax cross-entropy. Deterministic given `cfg.seed`.
///
/// Batch-norm layers normalize with per-batch statistics during training
/// (statistics treated as constants in the backward pass) while running
/// statistics are tracked; the returned model uses the running statistics.
pub fn train(dataset: &[Series], arch: &Arch, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let first = dataset.first().ok_or(Error::EmptyDataset)?;
    let n = first.len();
    let mut num_classes = 0;
    for s in dataset {
        if s.len() != n {
            return Err(Error::InconsistentLengths {
                expected: n,
                found: s.len(),
            });
        }
        let label = s
            .label
            .ok_or_else(|| Error::InvalidSeries("training series must be labeled".into()))?;
        num_classes = num_classes.max(label + 1);
    }
    let num_classes = num_classes.max(2);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = arch.build(n, num_classes, &mut rng)?;

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((dataset.len() as f64) * cfg.validation_fraction).floor() as usize;
    let n_val = n_val.min(dataset.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let val: Vec<&Series> = val_idx.iter().map(|&i| &dataset[i]).collect();
    let mut train_idx = train_idx.to_vec();

    let tensors = model.param_tensors();
    let shapes: Vec<usize> = model.params().iter().map(Vec::len).collect();
    let mut m1: Vec<Vec<f64>> = shapes.iter().map(|&l| vec![0.0; l]).collect();
    let mut m2 = m1.clone();
    let mut step = 0i32;
    let has_bn = {
        let mut found = false;
        visit_bn(model.layers_mut(), &mut |_, _| found = true);
        found
    };

    for _epoch in 0..cfg.epochs {
        train_idx.shuffle(&mut rng);
        for batch in train_idx.chunks(cfg.batch_size) {
            // Network whose batch-norm layers carry this batch's statistics.
            let mut working = model.clone();
            if has_bn {
                let inputs: Vec<Act> = batch
                    .iter()
                    .map(|&i| Act::input(dataset[i].values()))
                    .collect();
                let mut stats = Stats::new();
                batch_stats(model.body(), inputs, &mut stats);
                let mut it = stats.iter();
                visit_bn(working.layers_mut(), &mut |m, v| {
                    let (bm, bv) = it.next().expect("stat per batch-norm layer");
                    m.clone_from(bm);
                    v.clone_from(bv);
                });
                let mut it = stats.iter();
                visit_bn(model.layers_mut(), &mut |m, v| {
                    let (bm, bv) = it.next().expect("stat per batch-norm layer");
                    for (r, b) in m.iter_mut().zip(bm) {
                        *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * b;
                    }
                    for (r, b) in v.iter_mut().zip(bv) {
                        *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * b;
                    }
                });
            }

            let mut grads: Vec<Vec<f64>> = shapes.iter().map(|&l| vec![0.0; l]).collect();
            debug_assert_eq!(grads.len(), tensors);
            for &i in batch {
                let s = &dataset[i];
                let (out, caches) = chain_forward(working.body(), Act::input(s.values()));
                let mut g = softmax(&out.v);
                g[s.label.expect("checked above")] -= 1.0;
                chain_backward(
                    working.body(),
                    &caches,
                    None,
                    g,
                    Rule::Gradient,
                    Some(&mut grads),
                );
            }
            let scale = 1.0 / batch.len() as f64;
            step += 1;
            let lr = cfg.learning_rate;
            let mut k = 0;
            for layer in model.layers_mut().iter_mut() {
                if matches!(layer, Layer::Softmax) {
                    continue;
                }
                layer.for_each_param_mut(&mut |p| {
                    let g = &grads[k];
                    match cfg.optimizer {
                        Optimizer::Sgd => {
                            for (w, gi) in p.iter_mut().zip(g) {
                                *w -= lr * gi * scale;
                            }
                        }
                        Optimizer::Adam => {
                            let (a, b) = (&mut m1[k], &mut m2[k]);
                            let c1 = 1.0 - ADAM_B1.powi(step);
                            let c2 = 1.0 - ADAM_B2.powi(step);
                            for j in 0..p.len() {
                                let gj = g[j] * scale;
                                a[j] = ADAM_B1 * a[j] + (1.0 - ADAM_B1) * gj;
                                b[j] = ADAM_B2 * b[j] + (1.0 - ADAM_B2) * gj * gj;
                                p[j] -= lr * (a[j] / c1) / ((b[j] / c2).sqrt() + ADAM_EPS);
                            }
                        }
                    }
                    k += 1;
                });
            }
        }
    }

    let train_refs: Vec<&Series> = train_idx.iter().map(|&i| &dataset[i]).collect();
    let train_accuracy = accuracy(&model, &train_refs)?;
    let validation_accuracy = if val.is_empty() {
        None
    } else {
        Some(accuracy(&model, &val)?)
    };
    Ok(TrainReport {
        model,
        train_accuracy,
        validation_accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn toy(n: usize, per_class: usize, seed: u64) -> Vec<Series> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.5).unwrap();
        (0..2 * per_class)
            .map(|i| {
                let label = i % 2;
                let mean = if label == 0 { 1.0 } else { -1.0 };
                let v = (0..n).map(|_| mean + noise.sample(&mut rng)).collect();
                Series::labeled(v, label).unwrap()
            })
            .collect()
    }

    #[test]
    fn separable_toy_reaches_high_accuracy() {
        let data = toy(8, 50, 3);
        let cfg = TrainConfig {
            epochs: 20,
            ..Default::default()
        };
        let report = train(&data, &Arch::Linear, &cfg).unwrap();
        assert!(report.train_accuracy >= 0.99, "{}", report.train_accuracy);
    }

    #[test]
    fn training_is_deterministic() {
        let data = toy(16, 20, 4);
        let cfg = TrainConfig {
            epochs: 3,
            ..Default::default()
        };
        let arch: Arch = "resnet".parse().unwrap();
        let a = train(&data, &arch, &cfg).unwrap().model;
        let b = train(&data, &arch, &cfg).unwrap().model;
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn empty_and_ragged_inputs() {
        let cfg = TrainConfig::default();
        assert!(matches!(
            train(&[], &Arch::Linear, &cfg),
            Err(Error::EmptyDataset)
        ));
        let data = vec![
            Series::labeled(vec![0.0; 4], 0).unwrap(),
            Series::labeled(vec![0.0; 5], 1).unwrap(),
        ];
        assert!(matches!(
            train(&data, &Arch::Linear, &cfg),
            Err(Error::InconsistentLengths { .. })
        ));
    }

    #[test]
    fn resnet_with_batch_norm_learns() {
        let data = toy(16, 40, 5);
        let cfg = TrainConfig {
            epochs: 10,
            ..Default::default()
        };
        let report = train(&data, &"resnet".parse().unwrap(), &cfg).unwrap();
        assert!(report.train_accuracy >= 0.95, "{}", report.train_accuracy);
    }
}
