//! Evaluation metrics for explanations: robustness of the classifier and of
//! the explainer, label-flip faithfulness, length-aware sparsity and
//! Shannon entropy.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::attribution::{attribute, Method, MethodConfig};
use crate::error::{check_len, Error, Result};
use crate::net::Output;
use crate::series::std_dev;
use crate::spaces::Space;
use crate::wrap::WrappedClassifier;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobustnessConfig {
    pub lambda: f64,
    pub num_perturbations: usize,
    pub seed: u64,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            num_perturbations: 10,
            seed: 0,
        }
    }
}

impl RobustnessConfig {
    /// `lambda = 0` is accepted so the noise-free limit can be evaluated.
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParams(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        if self.num_perturbations == 0 {
            return Err(Error::InvalidParams(
                "num_perturbations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaithfulnessConfig {
    /// Threshold on min-max normalized absolute scores.
    pub threshold_eps: f64,
    pub mask_value: f64,
}

impl Default for FaithfulnessConfig {
    fn default() -> Self {
        Self {
            threshold_eps: 0.05,
            mask_value: 0.0,
        }
    }
}

impl FaithfulnessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_eps > 0.0 && self.threshold_eps < 1.0) {
            return Err(Error::InvalidParams(format!(
                "threshold_eps must lie in (0, 1), got {}",
                self.threshold_eps
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SparsityConfig {
    pub beta: f64,
}

impl Default for SparsityConfig {
    fn default() -> Self {
        Self { beta: 2.0 }
    }
}

impl SparsityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 1.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParams(format!(
                "beta must exceed 1, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Draws `λ·ε` with `ε ~ N(0, σ²)` per coordinate, σ the standard deviation of `z`.
fn perturbations<'a>(z: &'a [f64], cfg: &RobustnessConfig) -> impl Iterator<Item = Vec<f64>> + 'a {
    let sigma = std_dev(z);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let scale = cfg.lambda * sigma;
    (0..cfg.num_perturbations).map(move |_| {
        z.iter()
            .map(|v| v + scale * normal.sample(&mut rng))
            .collect()
    })
}

/// Mean absolute change of the predicted-class probability under small
/// Gaussian perturbations of `z`. Lower is better.
pub fn classifier_robustness(
    w: &WrappedClassifier,
    z: &[f64],
    cfg: &RobustnessConfig,
) -> Result<f64> {
    cfg.validate()?;
    check_len(w.dim(), z.len())?;
    let probs = w.predict(z)?;
    let c = crate::net::argmax(&probs);
    let mut total = 0.0;
    for zp in perturbations(z, cfg) {
        total += (probs[c] - w.score(&zp, c, Output::Probability)?).abs();
    }
    Ok(total / cfg.num_perturbations as f64)
}

/// Mean of `‖E(z) − E(z + λε)‖₂ / |z|` over perturbations, for an arbitrary
/// explainer `explain`. Lower is better.
pub fn xai_robustness_with<F>(z: &[f64], cfg: &RobustnessConfig, mut explain: F) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    cfg.validate()?;
    let reference = explain(z)?;
    check_len(z.len(), reference.len())?;
    let mut total = 0.0;
    for zp in perturbations(z, cfg) {
        let e = explain(&zp)?;
        check_len(reference.len(), e.len())?;
        let dist = reference
            .iter()
            .zip(&e)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        total += dist / z.len() as f64;
    }
    Ok(total / cfg.num_perturbations as f64)
}

/// [`xai_robustness_with`] for a built-in method explaining the predicted
/// class of `z`. The method seed is held fixed across perturbations.
pub fn xai_robustness(
    w: &WrappedClassifier,
    z: &[f64],
    method: Method,
    method_cfg: &MethodConfig,
    cfg: &RobustnessConfig,
) -> Result<f64> {
    check_len(w.dim(), z.len())?;
    let class = w.predict_class(z)?;
    xai_robustness_with(z, cfg, |v| {
        Ok(attribute(w, v, class, method, method_cfg)?.scores)
    })
}

/// Min-max normalized absolute values. A constant input maps to all ones.
fn min_max_abs(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v.abs()), hi.max(v.abs()))
        });
    if hi > lo {
        values.iter().map(|v| (v.abs() - lo) / (hi - lo)).collect()
    } else {
        vec![1.0; values.len()]
    }
}

/// Whether masking the non-negligible coordinates of `z` changes the
/// predicted label. The placeholder coordinate of a min-zero space is
/// never masked.
pub fn faithfulness_flip(
    w: &WrappedClassifier,
    z: &[f64],
    scores: &[f64],
    cfg: &FaithfulnessConfig,
) -> Result<bool> {
    cfg.validate()?;
    check_len(w.dim(), z.len())?;
    check_len(z.len(), scores.len())?;
    let placeholder = w.space().placeholder();
    let idx: Vec<usize> = (0..z.len()).filter(|i| Some(*i) != placeholder).collect();
    let selected: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
    let mut masked = z.to_vec();
    if selected.iter().any(|s| *s != 0.0) {
        for (&i, a) in idx.iter().zip(min_max_abs(&selected)) {
            if a > cfg.threshold_eps {
                masked[i] = cfg.mask_value;
            }
        }
    }
    Ok(w.predict_class(&masked)? != w.predict_class(z)?)
}

/// Length-aware sparsity of raw scores.
///
/// Absolute scores are divided by their maximum, so `a'` lies in `[0, 1]`
/// with zero scores anchored at 0, and the result is
/// `(Σ(1 − a'ᵢ) / (n − 1))^β`. A constant (including all-zero) input is
/// treated as all ones and scores 0.
pub fn sparsity_values(scores: &[f64], cfg: &SparsityConfig) -> Result<f64> {
    cfg.validate()?;
    let n = scores.len();
    if n < 2 {
        return Err(Error::TooShort(n));
    }
    let peak = scores.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let uniform = scores.iter().all(|v| v.abs() == peak);
    let spread: f64 = if uniform {
        0.0
    } else {
        scores.iter().map(|v| 1.0 - v.abs() / peak).sum()
    };
    Ok((spread / (n - 1) as f64).clamp(0.0, 1.0).powf(cfg.beta))
}

/// Sparsity of an attribution in `space`, ignoring the min-zero placeholder.
pub fn sparsity(scores: &[f64], space: &Space, cfg: &SparsityConfig) -> Result<f64> {
    check_len(space.dim(), scores.len())?;
    match space.placeholder() {
        Some(p) => {
            let kept: Vec<f64> = scores
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != p)
                .map(|(_, v)| *v)
                .collect();
            sparsity_values(&kept, cfg)
        }
        None => sparsity_values(scores, cfg),
    }
}

/// Shannon entropy (natural log) of the normalized absolute scores.
pub fn shannon_entropy(scores: &[f64]) -> Result<f64> {
    let total: f64 = scores.iter().map(|v| v.abs()).sum();
    if !(total > 0.0) {
        return Err(Error::AllZeroAttribution);
    }
    Ok(scores
        .iter()
        .map(|v| v.abs() / total)
        .filter(|p| *p > 0.0)
        .map(|p| -p * p.ln())
        .sum::<f64>()
        .max(0.0))
}

/// Faithfulness below this percentage suppresses the sparsity cell.
pub const SUPPRESSION_PCT: f64 = 50.0;

/// One aggregated (dataset, space, method) result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub dataset: String,
    pub space: String,
    pub method: String,
    pub faithfulness_pct: f64,
    /// `None` when suppressed.
    pub sparsity: Option<f64>,
    pub cls_robustness: f64,
    pub xai_robustness: f64,
    /// `None` when every attribution was identically zero.
    pub shannon_entropy: Option<f64>,
    pub beta: f64,
    pub eps: f64,
    pub lambda: f64,
}

impl MetricRow {
    /// Clears the sparsity value when faithfulness is below 50%.
    pub fn apply_suppression(&mut self) {
        if self.faithfulness_pct < SUPPRESSION_PCT {
            self.sparsity = None;
        }
    }

    pub fn is_suppressed(&self) -> bool {
        self.sparsity.is_none()
    }
}

pub fn write_rows_csv<W: Write>(rows: &[MetricRow], out: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    let csv_err = |e: csv::Error| Error::MalformedFile(e.to_string());
    wtr.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        wtr.serialize(r).map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv>", e))
}

pub const CSV_HEADER: [&str; 11] = [
    "dataset",
    "space",
    "method",
    "faithfulness_pct",
    "sparsity",
    "cls_robustness",
    "xai_robustness",
    "shannon_entropy",
    "beta",
    "eps",
    "lambda",
];

pub fn read_rows_csv(path: impl AsRef<Path>) -> Result<Vec<MetricRow>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| Error::MalformedFile(format!("{}: {e}", path.display())))?;
    rdr.deserialize()
        .collect::<std::result::Result<Vec<MetricRow>, _>>()
        .map_err(|e| Error::MalformedFile(format!("{}: {e}", path.display())))
}
