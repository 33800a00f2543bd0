use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Layer, Model};
use crate::error::{Error, Result};

/// Desk-scale architecture templates used by [`super::train`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Arch {
    /// A single dense layer on the raw series.
    Linear,
    Mlp {
        hidden: usize,
    },
    /// Stacked `conv → relu`, global average pooling, dense head.
    Conv {
        channels: usize,
        kernel_len: usize,
        depth: usize,
    },
    /// Stem `conv → bn → relu`, residual blocks `conv → bn → relu → conv → bn`
    /// with identity shortcut followed by relu, then pooling and a dense head.
    Resnet {
        channels: usize,
        kernel_len: usize,
        blocks: usize,
    },
}

impl Default for Arch {
    fn default() -> Self {
        Arch::Conv {
            channels: 8,
            kernel_len: 7,
            depth: 2,
        }
    }
}

impl FromStr for Arch {
    type Err = Error;

    /// Accepts a bare name (`linear`, `mlp`, `conv`, `resnet`) or a JSON object.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            return serde_json::from_str(s).map_err(|e| Error::InvalidParams(format!("arch: {e}")));
        }
        Ok(match s {
            "linear" => Arch::Linear,
            "mlp" => Arch::Mlp { hidden: 32 },
            "conv" => Arch::default(),
            "resnet" => Arch::Resnet {
                channels: 8,
                kernel_len: 7,
                blocks: 1,
            },
            other => {
                return Err(Error::InvalidParams(format!(
                    "unknown architecture {other:?}"
                )))
            }
        })
    }
}

fn uniform(rng: &mut impl Rng, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
}

fn dense(rng: &mut impl Rng, fan_in: usize, fan_out: usize, relu_follows: bool) -> Layer {
    let bound = if relu_follows {
        (6.0 / fan_in as f64).sqrt()
    } else {
        (6.0 / (fan_in + fan_out) as f64).sqrt()
    };
    Layer::dense(
        fan_in,
        fan_out,
        uniform(rng, fan_in * fan_out, bound),
        vec![0.0; fan_out],
    )
}

fn conv(rng: &mut impl Rng, cin: usize, cout: usize, k: usize) -> Layer {
    let bound = (6.0 / (cin * k) as f64).sqrt();
    Layer::conv1d(
        cin,
        cout,
        k,
        uniform(rng, cout * cin * k, bound),
        vec![0.0; cout],
    )
}

impl Arch {
    pub fn build(&self, input_len: usize, num_classes: usize, rng: &mut impl Rng) -> Result<Model> {
        let layers = match *self {
            Arch::Linear => vec![dense(rng, input_len, num_classes, false)],
            Arch::Mlp { hidden } => vec![
                dense(rng, input_len, hidden, true),
                Layer::Relu,
                dense(rng, hidden, num_classes, false),
            ],
            Arch::Conv {
                channels,
                kernel_len,
                depth,
            } => {
                let mut layers = Vec::new();
                let mut cin = 1;
                for _ in 0..depth.max(1) {
                    layers.push(conv(rng, cin, channels, kernel_len));
                    layers.push(Layer::Relu);
                    cin = channels;
                }
                layers.push(Layer::GlobalAvgPool);
                layers.push(dense(rng, channels, num_classes, false));
                layers
            }
            Arch::Resnet {
                channels,
                kernel_len,
                blocks,
            } => {
                let mut layers = vec![
                    conv(rng, 1, channels, kernel_len),
                    Layer::batch_norm(channels),
                    Layer::Relu,
                ];
                for _ in 0..blocks {
                    layers.push(Layer::ResidualAdd {
                        body: vec![
                            conv(rng, channels, channels, kernel_len),
                            Layer::batch_norm(channels),
                            Layer::Relu,
                            conv(rng, channels, channels, kernel_len),
                            Layer::batch_norm(channels),
                        ],
                        shortcut: vec![],
                    });
                    layers.push(Layer::Relu);
                }
                layers.push(Layer::GlobalAvgPool);
                layers.push(dense(rng, channels, num_classes, false));
                layers
            }
        };
        Model::new(input_len, num_classes, layers)
    }
}
