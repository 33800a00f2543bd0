//! Random models and inputs shared by the integration tests.

#![allow(dead_code)]

use rand::Rng;
use rand_distr::{Distribution, Normal};
use xspace::net::Arch;
use xspace::spaces::{default_frame_len, SpaceConfig};
use xspace::{Layer, Model, Space, SpaceKind};

pub fn normal_vec(rng: &mut impl Rng, n: usize, sd: f64) -> Vec<f64> {
    let d = Normal::new(0.0, sd).expect("finite sd");
    (0..n).map(|_| d.sample(rng)).collect()
}

fn randomize(layer: Layer, rng: &mut impl Rng) -> Layer {
    match layer {
        Layer::Dense {
            in_features,
            out_features,
            weight,
            bias,
        } => Layer::Dense {
            in_features,
            out_features,
            weight,
            bias: normal_vec(rng, bias.len(), 0.3),
        },
        Layer::Conv1d {
            channels_in,
            channels_out,
            kernel_len,
            weight,
            bias,
        } => Layer::Conv1d {
            channels_in,
            channels_out,
            kernel_len,
            weight,
            bias: normal_vec(rng, bias.len(), 0.3),
        },
        Layer::BatchNormInference { channels, eps, .. } => Layer::BatchNormInference {
            channels,
            gamma: (0..channels).map(|_| rng.random_range(0.5..1.5)).collect(),
            beta: normal_vec(rng, channels, 0.3),
            running_mean: normal_vec(rng, channels, 0.3),
            running_var: (0..channels).map(|_| rng.random_range(0.5..2.0)).collect(),
            eps,
        },
        Layer::ResidualAdd { body, shortcut } => Layer::ResidualAdd {
            body: body.into_iter().map(|l| randomize(l, rng)).collect(),
            shortcut: shortcut.into_iter().map(|l| randomize(l, rng)).collect(),
        },
        other => other,
    }
}

/// A small model of a random architecture with random biases and
/// batch-norm statistics.
pub fn random_model(rng: &mut impl Rng, input_len: usize, num_classes: usize) -> Model {
    let arch = match rng.random_range(0..4) {
        0 => Arch::Linear,
        1 => Arch::Mlp {
            hidden: rng.random_range(2..10),
        },
        2 => Arch::Conv {
            channels: rng.random_range(1..5),
            kernel_len: rng.random_range(1..6),
            depth: rng.random_range(1..3),
        },
        _ => Arch::Resnet {
            channels: rng.random_range(1..4),
            kernel_len: rng.random_range(1..5),
            blocks: 1,
        },
    };
    let base = arch
        .build(input_len, num_classes, rng)
        .expect("valid template");
    let layers = base
        .layers()
        .iter()
        .cloned()
        .map(|l| randomize(l, rng))
        .collect();
    Model::new(input_len, num_classes, layers).expect("valid layers")
}

/// A space of `kind` with randomly drawn valid parameters.
pub fn random_space(rng: &mut impl Rng, kind: SpaceKind, n: usize) -> Space {
    let cfg = SpaceConfig::new(kind, n);
    let cfg = match kind {
        SpaceKind::TimeFrequency => {
            let divisors: Vec<usize> = (1..=n).filter(|d| n.is_multiple_of(*d)).collect();
            let w = if rng.random_bool(0.5) {
                divisors[rng.random_range(0..divisors.len())]
            } else {
                default_frame_len(n)
            };
            cfg.with_frame_len(w)
        }
        SpaceKind::Decomposition => {
            let l = rng.random_range(2..=(n / 2).clamp(2, 48));
            let k = rng.random_range(1..=l.min(5));
            cfg.with_decomposition(l, k)
        }
        _ => cfg,
    };
    cfg.build().expect("valid space")
}
