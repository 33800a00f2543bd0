use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{preflight, Attribution, Method, MethodConfig};
use crate::error::Result;
use crate::net::Rule;
use crate::series::std_dev;
use crate::wrap::WrappedClassifier;

/// `|∂M'_c/∂z|`.
pub fn saliency(
    w: &WrappedClassifier,
    z: &[f64],
    class: usize,
    cfg: &MethodConfig,
) -> Result<Attribution> {
    preflight(w, z, class, cfg)?;
    let g = w.gradient(z, class, cfg.output)?;
    Ok(Attribution::new(
        w,
        Method::Saliency,
        class,
        g.iter().map(|v| v.abs()).collect(),
    ))
}

/// `z ⊙ ∂M'_c/∂z`.
pub fn input_x_gradient(
    w: &WrappedClassifier,
    z: &[f64],
    class: usize,
    cfg: &MethodConfig,
) -> Result<Attribution> {
    preflight(w, z, class, cfg)?;
    let g = w.gradient(z, class, cfg.output)?;
    let scores = z.iter().zip(&g).map(|(a, b)| a * b).collect();
    Ok(Attribution::new(w, Method::InputXGradient, class, scores))
}

/// Trapezoidal path integral of the gradient from the baseline to `z`.
pub fn integrated_gradients(
    w: &WrappedClassifier,
    z: &[f64],
    class: usize,
    cfg: &MethodConfig,
) -> Result<Attribution> {
    preflight(w, z, class, cfg)?;
    let b = cfg.baseline_for(z.len())?;
    let m = cfg.ig_steps;
    let mut avg = vec![0.0; z.len()];
    let mut point = vec![0.0; z.len()];
    for j in 0..=m {
        let alpha = j as f64 / m as f64;
        let weight = if j == 0 || j == m { 0.5 } else { 1.0 } / m as f64;
        for ((p, zi), bi) in point.iter_mut().zip(z).zip(&b) {
            *p = bi + alpha * (zi - bi);
        }
        let g = w.gradient(&point, class, cfg.output)?;
        for (a, gi) in avg.iter_mut().zip(g) {
            *a += weight * gi;
        }
    }
    let scores = avg
        .iter()
        .zip(z.iter().zip(&b))
        .map(|(g, (zi, bi))| (zi - bi) * g)
        .collect();
    Ok(Attribution::new(
        w,
        Method::IntegratedGradients,
        class,
        scores,
    ))
}

/// Monte-Carlo expected gradients around noisy baselines.
pub fn gradient_shap(
    w: &WrappedClassifier,
    z: &[f64],
    class: usize,
    cfg: &MethodConfig,
) -> Result<Attribution> {
    preflight(w, z, class, cfg)?;
    let base = cfg.baseline_for(z.len())?;
    let sd = cfg.gs_noise_sigma * std_dev(z);
    let noise = Normal::new(0.0, sd.max(0.0)).expect("finite std");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut acc = vec![0.0; z.len()];
    let mut b = vec![0.0; z.len()];
    let mut point = vec![0.0; z.len()];
    for _ in 0..cfg.gs_samples {
        for (bi, b0) in b.iter_mut().zip(&base) {
            *bi = b0
                + if sd > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    0.0
                };
        }
        let alpha: f64 = rng.random();
        for ((p, zi), bi) in point.iter_mut().zip(z).zip(&b) {
            *p = bi + alpha * (zi - bi);
        }
        let g = w.gradient(&point, class, cfg.output)?;
        for (((a, gi), zi), bi) in acc.iter_mut().zip(g).zip(z).zip(&b) {
            *a += (zi - bi) * gi;
        }
    }
    let n = cfg.gs_samples as f64;
    let scores = acc.into_iter().map(|a| a / n).collect();
    Ok(Attribution::new(w, Method::GradientShap, class, scores))
}

/// Gradient with ReLUs passing only positive upstream signal on active units.
pub fn guided_backprop(
    w: &WrappedClassifier,
    z: &[f64],
    class: usize,
    cfg: &MethodConfig,
) -> Result<Attribution> {
    preflight(w, z, class, cfg)?;
    let g = w.backprop(z, None, class, cfg.output, Rule::Guided)?;
    Ok(Attribution::new(w, Method::GuidedBackprop, class, g))
}

/// DeepLIFT with the Rescale rule; scores sum to `M'_c(z) − M'_c(baseline)`.
pub fn deeplift(
    w: &WrappedClassifier,
    z: &[f64],
    class: usize,
    cfg: &MethodConfig,
) -> Result<Attribution> {
    preflight(w, z, class, cfg)?;
    let b = cfg.baseline_for(z.len())?;
    let m = w.backprop(
        z,
        Some(&b),
        class,
        cfg.output,
        Rule::Rescale {
            delta: cfg.deeplift_delta,
        },
    )?;
    let scores = m
        .iter()
        .zip(z.iter().zip(&b))
        .map(|(mi, (zi, bi))| mi * (zi - bi))
        .collect();
    Ok(Attribution::new(w, Method::DeepLift, class, scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Layer, Model, Output};
    use crate::spaces::{SpaceConfig, SpaceKind};
    use crate::wrap::wrap;

    fn time_wrap(m: Model) -> WrappedClassifier {
        let n = m.input_len();
        wrap(m, SpaceConfig::new(SpaceKind::Time, n).build().unwrap()).unwrap()
    }

    fn linear(w0: &[f64], w1: &[f64]) -> WrappedClassifier {
        let n = w0.len();
        let weight = [w0, w1].concat();
        time_wrap(Model::new(n, 2, vec![Layer::dense(n, 2, weight, vec![0.0, 0.0])]).unwrap())
    }

    fn logit_cfg() -> MethodConfig {
        MethodConfig {
            output: Output::Logit,
            ..Default::default()
        }
    }

    #[test]
    fn constant_model_gives_zero_saliency() {
        let w = linear(&[0.0; 3], &[0.0; 3]);
        let a = saliency(&w, &[1.0, 2.0, 3.0], 0, &MethodConfig::default()).unwrap();
        assert!(a.scores.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn saliency_matches_softmax_closed_form() {
        let w0 = [0.5, -1.0, 2.0];
        let w1 = [1.0, 0.3, -0.7];
        let w = linear(&w0, &w1);
        let z = [0.2, -0.4, 0.9];
        let l0: f64 = w0.iter().zip(&z).map(|(a, b)| a * b).sum();
        let l1: f64 = w1.iter().zip(&z).map(|(a, b)| a * b).sum();
        let p0 = 1.0 / (1.0 + (l1 - l0).exp());
        let p1 = 1.0 - p0;
        let a = saliency(&w, &z, 0, &MethodConfig::default()).unwrap();
        for i in 0..3 {
            let expected = (p0 * (w0[i] - (p0 * w0[i] + p1 * w1[i]))).abs();
            assert!((a.scores[i] - expected).abs() < 1e-12);
            assert!(a.scores[i] >= 0.0);
        }
    }

    #[test]
    fn input_x_gradient_properties() {
        let w = linear(&[0.5, -1.0, 2.0], &[1.0, 0.3, -0.7]);
        let zero = input_x_gradient(&w, &[0.0; 3], 1, &MethodConfig::default()).unwrap();
        assert!(zero.scores.iter().all(|s| *s == 0.0));
        let z = [0.4, -2.0, 1.5];
        let ixg = input_x_gradient(&w, &z, 1, &MethodConfig::default()).unwrap();
        let sal = saliency(&w, &z, 1, &MethodConfig::default()).unwrap();
        let g = w.gradient(&z, 1, Output::Probability).unwrap();
        for i in 0..3 {
            assert!((ixg.scores[i] - sal.scores[i] * g[i].signum() * z[i]).abs() < 1e-15);
        }
        let ixg = input_x_gradient(&w, &z, 0, &logit_cfg()).unwrap();
        for (i, wi) in [0.5, -1.0, 2.0].iter().enumerate() {
            assert!((ixg.scores[i] - wi * z[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn integrated_gradients_basics() {
        let w = linear(&[0.5, -1.0, 2.0], &[1.0, 0.3, -0.7]);
        let z = [0.4, -2.0, 1.5];
        let cfg = MethodConfig {
            baseline: Some(z.to_vec()),
            ..Default::default()
        };
        let a = integrated_gradients(&w, &z, 0, &cfg).unwrap();
        assert!(a.scores.iter().all(|s| *s == 0.0));
        for steps in [1, 3, 64] {
            let cfg = MethodConfig {
                ig_steps: steps,
                ..logit_cfg()
            };
            let a = integrated_gradients(&w, &z, 0, &cfg).unwrap();
            for (i, wi) in [0.5, -1.0, 2.0].iter().enumerate() {
                assert!((a.scores[i] - wi * z[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn integrated_gradients_completeness() {
        let w = time_wrap(
            Model::new(
                3,
                2,
                vec![
                    Layer::dense(
                        3,
                        4,
                        vec![
                            0.5, -1.0, 0.3, 0.8, 0.2, -0.4, -0.6, 0.9, 0.1, 0.7, -0.3, 0.5,
                        ],
                        vec![0.1, -0.2, 0.0, 0.3],
                    ),
                    Layer::Relu,
                    Layer::dense(
                        4,
                        2,
                        vec![1.0, -0.5, 0.7, 0.2, -0.3, 0.8, -1.1, 0.4],
                        vec![0.0, 0.0],
                    ),
                ],
            )
            .unwrap(),
        );
        let z = [1.2, -0.7, 0.4];
        let cfg = MethodConfig {
            ig_steps: 512,
            ..Default::default()
        };
        let a = integrated_gradients(&w, &z, 1, &cfg).unwrap();
        let delta = w.predict(&z).unwrap()[1] - w.predict(&[0.0; 3]).unwrap()[1];
        let total: f64 = a.scores.iter().sum();
        assert!((total - delta).abs() <= 1e-3 * delta.abs());
    }

    #[test]
    fn gradient_shap_limits() {
        let w = linear(&[0.5, -1.0, 2.0], &[1.0, 0.3, -0.7]);
        let z = [0.4, -2.0, 1.5];
        let cfg = MethodConfig {
            baseline: Some(z.to_vec()),
            gs_noise_sigma: 1e-12,
            ..Default::default()
        };
        let a = gradient_shap(&w, &z, 0, &cfg).unwrap();
        assert!(a.scores.iter().all(|s| s.abs() < 1e-9));

        let cfg = MethodConfig {
            gs_samples: 10_000,
            seed: 11,
            ..logit_cfg()
        };
        let a = gradient_shap(&w, &z, 0, &cfg).unwrap();
        for (i, wi) in [0.5f64, -1.0, 2.0].iter().enumerate() {
            let expected = wi * z[i];
            assert!(
                (a.scores[i] - expected).abs() <= 0.05 * expected.abs(),
                "{i}"
            );
        }
        let again = gradient_shap(&w, &z, 0, &cfg).unwrap();
        assert_eq!(a, again);
    }

    #[test]
    fn guided_backprop_blocks_negative_paths() {
        // hidden h1 = relu(x0), h2 = relu(x0); logit0 = h1 - h2; x1 unused.
        // Plain gradient: 1 - 1 = 0. Guided: the h2 path carries a negative
        // upstream signal and is dropped, leaving 1.
        let m = Model::new(
            2,
            2,
            vec![
                Layer::dense(2, 2, vec![1.0, 0.0, 1.0, 0.0], vec![0.0, 0.0]),
                Layer::Relu,
                Layer::dense(2, 2, vec![1.0, -1.0, 0.0, 0.0], vec![0.0, 0.0]),
            ],
        )
        .unwrap();
        let w = time_wrap(m);
        let cfg = logit_cfg();
        let plain = w.gradient(&[0.5, 3.0], 0, Output::Logit).unwrap();
        assert_eq!(plain, vec![0.0, 0.0]);
        let guided = guided_backprop(&w, &[0.5, 3.0], 0, &cfg).unwrap();
        assert_eq!(guided.scores, vec![1.0, 0.0]);
        // inactive units pass nothing
        let guided = guided_backprop(&w, &[-0.5, 3.0], 0, &cfg).unwrap();
        assert_eq!(guided.scores, vec![0.0, 0.0]);
    }

    #[test]
    fn guided_equals_gradient_without_relu() {
        let w = linear(&[0.5, -1.0, 2.0], &[1.0, 0.3, -0.7]);
        let z = [0.4, -2.0, 1.5];
        let g = guided_backprop(&w, &z, 0, &MethodConfig::default()).unwrap();
        assert_eq!(g.scores, w.gradient(&z, 0, Output::Probability).unwrap());
        let zero = linear(&[0.0; 3], &[0.0; 3]);
        let g = guided_backprop(&zero, &z, 0, &MethodConfig::default()).unwrap();
        assert!(g.scores.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn deeplift_linear_matches_ig_and_zero_path() {
        let w = linear(&[0.5, -1.0, 2.0], &[1.0, 0.3, -0.7]);
        let z = [0.4, -2.0, 1.5];
        let d = deeplift(&w, &z, 0, &logit_cfg()).unwrap();
        let ig = integrated_gradients(&w, &z, 0, &logit_cfg()).unwrap();
        for (a, b) in d.scores.iter().zip(&ig.scores) {
            assert!((a - b).abs() < 1e-12);
        }
        let cfg = MethodConfig {
            baseline: Some(z.to_vec()),
            ..Default::default()
        };
        let d = deeplift(&w, &z, 0, &cfg).unwrap();
        assert!(d.scores.iter().all(|s| *s == 0.0));
    }
}
