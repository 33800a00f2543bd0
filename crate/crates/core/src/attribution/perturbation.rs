//! Perturbation-based methods: occlusion, KernelSHAP and LIME.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{preflight, Attribution, Method, MethodConfig};
use crate::error::{Error, Result};
use crate::wrap::WrappedClassifier;

/// Sliding-window occlusion. Each placement replaces the window with the
/// baseline; a coordinate's score is the mean confidence drop over all
/// placements covering it. A final placement is aligned to the end when
/// the stride would otherwise leave a tail uncovered.
pub fn occlusion(
    w: &WrappedClassifier,
    z: &[f64],
    class: usize,
    cfg: &MethodConfig,
) -> Result<Attribution> {
    preflight(w, z, class, cfg)?;
    let dim = z.len();
    let window = cfg.occlusion_window.unwrap_or((dim / 20).max(1));
    if window > dim {
        return Err(Error::WindowTooLarge { window, dim });
    }
    let b = cfg.baseline_for(dim)?;
    let full = w.score(z, class, cfg.output)?;
    let mut starts: Vec<usize> = (0..=dim - window).step_by(cfg.occlusion_stride).collect();
    if starts.last() != Some(&(dim - window)) {
        starts.push(dim - window);
    }
    let mut total = vec![0.0; dim];
    let mut count = vec![0usize; dim];
    let mut masked = z.to_vec();
    for &s in &starts {
        masked[s..s + window].copy_from_slice(&b[s..s + window]);
        let drop = full - w.score(&masked, class, cfg.output)?;
        masked[s..s + window].copy_from_slice(&z[s..s + window]);
        for i in s..s + window {
            total[i] += drop;
            count[i] += 1;
        }
    }
    let scores = total
        .iter()
        .zip(&count)
        .map(|(t, &c)| if c == 0 { 0.0 } else { t / c as f64 })
        .collect();
    Ok(Attribution::new(w, Method::Occlusion, class, scores))
}

/// Contiguous partition of `0..dim` into `count` near-equal segments.
pub fn segments(dim: usize, count: usize) -> Vec<std::ops::Range<usize>> {
    (0..count)
        .map(|j| j * dim / count..(j + 1) * dim / count)
        .collect()
}

fn segment_count(dim: usize, cfg: &MethodConfig) -> Result<usize> {
    let g = cfg.shap_segments.unwrap_or(dim.min(32));
    if g > dim {
        return Err(Error::InvalidParams(format!(
            "{g} segments exceed dimension {dim}"
        )));
    }
    Ok(g)
}

/// Evaluates the target with segments outside `keep` set to the baseline.
struct Masker<'a> {
    w: &'a WrappedClassifier,
    z: &'a [f64],
    baseline: Vec<f64>,
    segments: Vec<std::ops::Range<usize>>,
    class: usize,
    cfg: &'a MethodConfig,
    buf: Vec<f64>,
}

impl Masker<'_> {
    fn eval(&mut self, keep: &[bool]) -> Result<f64> {
        for (seg, &k) in self.segments.iter().zip(keep) {
            let src = if k { self.z } else { &self.baseline };
            self.buf[seg.clone()].copy_from_slice(&src[seg.clone()]);
        }
        self.w.score(&self.buf, self.class, self.cfg.output)
    }

    /// Spreads per-segment values evenly over member coordinates.
    fn expand(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.z.len()];
        for (seg, v) in self.segments.iter().zip(values) {
            let share = v / seg.len() as f64;
            out[seg.clone()].fill(share);
        }
        out
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Shapley kernel weight for a coalition of size `s` out of `g`.
pub(crate) fn shapley_kernel(g: usize, s: usize) -> f64 {
    (g - 1) as f64 / (binomial(g, s) * s as f64 * (g - s) as f64)
}

/// KernelSHAP over contiguous segments with the efficiency constraint
/// enforced exactly. When every non-trivial coalition fits in the budget
/// they are enumerated with kernel weights, which yields exact Shapley
/// values; otherwise coalitions are sampled from the kernel distribution.
pub fn kernel_shap(
    w: &WrappedClassifier,
    z: &[f64],
    class: usize,
    cfg: &MethodConfig,
) -> Result<Attribution> {
    preflight(w, z, class, cfg)?;
    let dim = z.len();
    let g = segment_count(dim, cfg)?;
    let mut masker = Masker {
        w,
        z,
        baseline: cfg.baseline_for(dim)?,
        segments: segments(dim, g),
        class,
        cfg,
        buf: vec![0.0; dim],
    };
    let f_full = masker.eval(&vec![true; g])?;
    let f_null = masker.eval(&vec![false; g])?;
    let delta = f_full - f_null;
    if g == 1 {
        let scores = masker.expand(&[delta]);
        return Ok(Attribution::new(w, Method::KernelShap, class, scores));
    }

    let mut coalitions: Vec<(Vec<bool>, f64)> = Vec::new();
    let exhaustive = g < 63 && (1u64 << g) - 2 <= cfg.shap_coalitions as u64;
    if exhaustive {
        for bits in 1u64..(1u64 << g) - 1 {
            let keep: Vec<bool> = (0..g).map(|i| bits >> i & 1 == 1).collect();
            let s = bits.count_ones() as usize;
            coalitions.push((keep, shapley_kernel(g, s)));
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        // P(size = s) ∝ π(s)·C(g,s) = (g-1)/(s(g-s))
        let size_mass: Vec<f64> = (1..g).map(|s| 1.0 / (s * (g - s)) as f64).collect();
        let total: f64 = size_mass.iter().sum();
        for _ in 0..cfg.shap_coalitions {
            let mut u = rng.random::<f64>() * total;
            let mut s = g - 1;
            for (i, m) in size_mass.iter().enumerate() {
                if u < *m {
                    s = i + 1;
                    break;
                }
                u -= m;
            }
            let mut keep = vec![false; g];
            for i in sample(&mut rng, g, s) {
                keep[i] = true;
            }
            coalitions.push((keep, 1.0));
        }
    }

    // Eliminate the last segment: φ_g = Δ − Σ_{i<g} φ_i.
    let p = g - 1;
    let mut xtwx = DMatrix::<f64>::zeros(p, p);
    let mut xtwy = DVector::<f64>::zeros(p);
    for (keep, weight) in &coalitions {
        let y = masker.eval(keep)? - f_null - if keep[p] { delta } else { 0.0 };
        let last = if keep[p] { 1.0 } else { 0.0 };
        let row: Vec<f64> = (0..p)
            .map(|i| if keep[i] { 1.0 } else { 0.0 } - last)
            .collect();
        for i in 0..p {
            if row[i] == 0.0 {
                continue;
            }
            xtwy[i] += weight * row[i] * y;
            for j in 0..p {
                xtwx[(i, j)] += weight * row[i] * row[j];
            }
        }
    }
    let beta = xtwx
        .lu()
        .solve(&xtwy)
        .filter(|b| b.iter().all(|v| v.is_finite()))
        .ok_or_else(|| {
            Error::DegenerateRegression(format!(
                "{} coalitions do not determine {g} segment values",
                coalitions.len()
            ))
        })?;
    let mut phi: Vec<f64> = beta.iter().copied().collect();
    phi.push(delta - phi.iter().sum::<f64>());
    let scores = masker.expand(&phi);
    Ok(Attribution::new(w, Method::KernelShap, class, scores))
}

const LIME_RIDGE: f64 = 1e-3;

/// LIME with Bernoulli(0.5) segment masks, an exponential kernel on the
/// masked fraction and a ridge-regularized weighted linear surrogate.
pub fn lime(
    w: &WrappedClassifier,
    z: &[f64],
    class: usize,
    cfg: &MethodConfig,
) -> Result<Attribution> {
    preflight(w, z, class, cfg)?;
    let dim = z.len();
    let g = segment_count(dim, cfg)?;
    let mut masker = Masker {
        w,
        z,
        baseline: cfg.baseline_for(dim)?,
        segments: segments(dim, g),
        class,
        cfg,
        buf: vec![0.0; dim],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let p = g + 1; // intercept first
    let mut xtwx = DMatrix::<f64>::zeros(p, p);
    let mut xtwy = DVector::<f64>::zeros(p);
    let mut row = vec![0.0; p];
    for sample_idx in 0..cfg.lime_samples {
        // the unperturbed instance anchors the surrogate
        let keep: Vec<bool> = if sample_idx == 0 {
            vec![true; g]
        } else {
            (0..g).map(|_| rng.random_bool(0.5)).collect()
        };
        let masked = keep.iter().filter(|k| !**k).count() as f64 / g as f64;
        let weight = (-(masked * masked) / (cfg.lime_kernel_width * cfg.lime_kernel_width)).exp();
        let y = masker.eval(&keep)?;
        row[0] = 1.0;
        for (r, k) in row[1..].iter_mut().zip(&keep) {
            *r = if *k { 1.0 } else { 0.0 };
        }
        for i in 0..p {
            xtwy[i] += weight * row[i] * y;
            for j in 0..p {
                xtwx[(i, j)] += weight * row[i] * row[j];
            }
        }
    }
    for i in 1..p {
        xtwx[(i, i)] += LIME_RIDGE;
    }
    let beta = xtwx
        .lu()
        .solve(&xtwy)
        .filter(|b| b.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::DegenerateRegression("LIME surrogate system is singular".into()))?;
    let coef: Vec<f64> = beta.iter().skip(1).copied().collect();
    let scores = masker.expand(&coef);
    Ok(Attribution::new(w, Method::Lime, class, scores))
}
