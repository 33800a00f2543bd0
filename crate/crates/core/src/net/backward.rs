//! Reverse passes: plain gradients, guided backpropagation and DeepLIFT
//! Rescale multipliers share one traversal and differ only in the ReLU rule
//! and in how the softmax head is handled.

use super::{bn_affine, softmax, Cache, Layer, Model, Output, Trace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Rule {
    Gradient,
    /// ReLU passes `g · 1[x>0] · 1[g>0]`.
    Guided,
    /// DeepLIFT Rescale: ReLU multiplier `Δout/Δin` when `|Δin| > delta`.
    Rescale {
        delta: f64,
    },
}

// 8-point Gauss–Legendre nodes and weights on [-1, 1].
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];
const HEAD_PANELS: usize = 16;

/// `∂p_c/∂l` at logits `l`.
fn softmax_row(logits: &[f64], class: usize) -> Vec<f64> {
    let p = softmax(logits);
    p.iter()
        .enumerate()
        .map(|(k, &pk)| p[class] * (if k == class { 1.0 } else { 0.0 } - pk))
        .collect()
}

/// Multipliers of the scalar target with respect to the logits.
///
/// Under the Rescale rule the softmax head is a multi-input nonlinearity;
/// its multipliers are the path average of its Jacobian row between the
/// reference and actual logits, which makes `Σ m_k Δl_k = Δp_c` hold to
/// quadrature precision.
fn head(
    logits: &[f64],
    reference: Option<&[f64]>,
    class: usize,
    output: Output,
    rule: Rule,
) -> Vec<f64> {
    match output {
        Output::Logit => {
            let mut g = vec![0.0; logits.len()];
            g[class] = 1.0;
            g
        }
        Output::Probability => match (rule, reference) {
            (Rule::Rescale { .. }, Some(r)) => {
                let mut acc = vec![0.0; logits.len()];
                let panel = 1.0 / HEAD_PANELS as f64;
                let mut point = vec![0.0; logits.len()];
                for p in 0..HEAD_PANELS {
                    for (node, weight) in GL_NODES.iter().zip(GL_WEIGHTS) {
                        let alpha = panel * (p as f64 + 0.5 * (node + 1.0));
                        for ((pt, l), rl) in point.iter_mut().zip(logits).zip(r) {
                            *pt = rl + alpha * (l - rl);
                        }
                        for (a, j) in acc.iter_mut().zip(softmax_row(&point, class)) {
                            *a += 0.5 * panel * weight * j;
                        }
                    }
                }
                acc
            }
            _ => softmax_row(logits, class),
        },
    }
}

pub(crate) fn input_multipliers(
    model: &Model,
    trace: &Trace,
    reference: Option<&Trace>,
    class: usize,
    output: Output,
    rule: Rule,
) -> Vec<f64> {
    let g = head(
        &trace.logits,
        reference.map(|r| r.logits.as_slice()),
        class,
        output,
        rule,
    );
    chain_backward(
        model.body(),
        &trace.caches,
        reference.map(|r| r.caches.as_slice()),
        g,
        rule,
        None,
    )
}

/// Backpropagate `g` (gradient w.r.t. the chain output) to the chain input.
/// When `grads` is given, parameter gradients are accumulated into it in
/// the order of `Layer::for_each_param`.
pub(crate) fn chain_backward(
    layers: &[Layer],
    caches: &[Cache],
    reference: Option<&[Cache]>,
    mut g: Vec<f64>,
    rule: Rule,
    mut grads: Option<&mut [Vec<f64>]>,
) -> Vec<f64> {
    let mut offsets = Vec::with_capacity(layers.len());
    let mut off = 0;
    for l in layers {
        offsets.push(off);
        off += l.param_tensors();
    }
    for i in (0..layers.len()).rev() {
        let slot = grads
            .as_deref_mut()
            .map(|gr| &mut gr[offsets[i]..offsets[i] + layers[i].param_tensors()]);
        g = layer_backward(
            &layers[i],
            &caches[i],
            reference.map(|r| &r[i]),
            g,
            rule,
            slot,
        );
    }
    g
}

fn layer_backward(
    layer: &Layer,
    cache: &Cache,
    reference: Option<&Cache>,
    g: Vec<f64>,
    rule: Rule,
    grads: Option<&mut [Vec<f64>]>,
) -> Vec<f64> {
    let x = cache.input();
    match layer {
        Layer::Dense {
            in_features,
            out_features,
            weight,
            ..
        } => {
            let mut gin = vec![0.0; *in_features];
            for o in 0..*out_features {
                let row = &weight[o * in_features..(o + 1) * in_features];
                for (gi, w) in gin.iter_mut().zip(row) {
                    *gi += w * g[o];
                }
            }
            if let Some(gr) = grads {
                let (gw, rest) = gr.split_at_mut(1);
                for o in 0..*out_features {
                    for j in 0..*in_features {
                        gw[0][o * in_features + j] += g[o] * x.v[j];
                    }
                    rest[0][o] += g[o];
                }
            }
            gin
        }
        Layer::Conv1d {
            channels_in,
            channels_out,
            kernel_len,
            weight,
            ..
        } => {
            let t_len = x.t;
            let pad = (kernel_len - 1) / 2;
            let mut gin = vec![0.0; channels_in * t_len];
            let mut grads = grads;
            for o in 0..*channels_out {
                let go = &g[o * t_len..(o + 1) * t_len];
                for i in 0..*channels_in {
                    let widx = (o * channels_in + i) * kernel_len;
                    let xi = &x.v[i * t_len..(i + 1) * t_len];
                    for k in 0..*kernel_len {
                        let lo = pad.saturating_sub(k);
                        let hi = (t_len + pad).saturating_sub(k).min(t_len);
                        let wk = weight[widx + k];
                        let gi = &mut gin[i * t_len..(i + 1) * t_len];
                        let mut dw = 0.0;
                        for t in lo..hi {
                            gi[t + k - pad] += wk * go[t];
                            dw += go[t] * xi[t + k - pad];
                        }
                        if let Some(gr) = grads.as_deref_mut() {
                            gr[0][widx + k] += dw;
                        }
                    }
                }
                if let Some(gr) = grads.as_deref_mut() {
                    gr[1][o] += go.iter().sum::<f64>();
                }
            }
            gin
        }
        Layer::Relu => {
            let xr = reference.map(|r| &r.input().v);
            g.iter()
                .enumerate()
                .map(|(i, &gi)| {
                    let xi = x.v[i];
                    let local = if xi > 0.0 { 1.0 } else { 0.0 };
                    match (rule, xr) {
                        (Rule::Gradient, _) => gi * local,
                        (Rule::Guided, _) => {
                            if gi > 0.0 {
                                gi * local
                            } else {
                                0.0
                            }
                        }
                        (Rule::Rescale { delta }, Some(xr)) => {
                            let dx = xi - xr[i];
                            if dx.abs() > delta {
                                gi * (xi.max(0.0) - xr[i].max(0.0)) / dx
                            } else {
                                gi * local
                            }
                        }
                        (Rule::Rescale { .. }, None) => gi * local,
                    }
                })
                .collect()
        }
        Layer::GlobalAvgPool => {
            let mut gin = vec![0.0; x.c * x.t];
            for c in 0..x.c {
                let share = g[c] / x.t as f64;
                gin[c * x.t..(c + 1) * x.t].fill(share);
            }
            gin
        }
        Layer::BatchNormInference {
            gamma,
            beta,
            running_mean,
            running_var,
            eps,
            ..
        } => {
            let (scale, _) = bn_affine(gamma, beta, running_mean, running_var, *eps);
            let mut gin = g.clone();
            for c in 0..x.c {
                for v in &mut gin[c * x.t..(c + 1) * x.t] {
                    *v *= scale[c];
                }
            }
            if let Some(gr) = grads {
                for c in 0..x.c {
                    let inv_std = 1.0 / (running_var[c] + eps).sqrt();
                    for t in 0..x.t {
                        let idx = c * x.t + t;
                        gr[0][c] += g[idx] * (x.v[idx] - running_mean[c]) * inv_std;
                        gr[1][c] += g[idx];
                    }
                }
            }
            gin
        }
        Layer::ResidualAdd { body, shortcut } => {
            let Cache::Residual {
                body: bc,
                shortcut: sc,
                ..
            } = cache
            else {
                unreachable!("residual layer recorded without branch caches")
            };
            let (rb, rs) = match reference {
                Some(Cache::Residual { body, shortcut, .. }) => {
                    (Some(body.as_slice()), Some(shortcut.as_slice()))
                }
                _ => (None, None),
            };
            let nb: usize = body.iter().map(Layer::param_tensors).sum();
            let (gb_params, gs_params) = match grads {
                Some(gr) => {
                    let (a, b) = gr.split_at_mut(nb);
                    (Some(a), Some(b))
                }
                None => (None, None),
            };
            let mut gin = chain_backward(body, bc, rb, g.clone(), rule, gb_params);
            let gs = chain_backward(shortcut, sc, rs, g, rule, gs_params);
            for (a, b) in gin.iter_mut().zip(gs) {
                *a += b;
            }
            gin
        }
        Layer::Softmax => g,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        let s: f64 = GL_WEIGHTS.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        // exact for degree-15 polynomials
        let integral: f64 = GL_NODES
            .iter()
            .zip(GL_WEIGHTS)
            .map(|(x, w)| w * x.powi(14))
            .sum();
        assert!((integral - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn softmax_head_path_average_is_exact() {
        let l = [2.0, -1.0, 0.5];
        let r = [-3.0, 4.0, 0.0];
        let m = head(
            &l,
            Some(&r),
            0,
            Output::Probability,
            Rule::Rescale { delta: 1e-7 },
        );
        let dl: f64 = m
            .iter()
            .zip(l.iter().zip(&r))
            .map(|(mi, (a, b))| mi * (a - b))
            .sum();
        let dp = softmax(&l)[0] - softmax(&r)[0];
        assert!((dl - dp).abs() < 1e-12, "{dl} vs {dp}");
    }
}
