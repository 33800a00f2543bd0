//! Experiment runner: explains a model in several spaces with several
//! methods and aggregates the evaluation metrics.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{load_ucr_files, Dataset};
use super::synth::{synth_dataset, SynthSpec};
use crate::attribution::{attribute, calibrate_decomposition, derive_seed, Method, MethodConfig};
use crate::error::{Error, Result};
use crate::metrics::{
    classifier_robustness, faithfulness_flip, shannon_entropy, sparsity, xai_robustness_with,
    FaithfulnessConfig, MetricRow, RobustnessConfig, SparsityConfig,
};
use crate::net::{load_model, train, Arch, Model, TrainConfig};
use crate::spaces::{make_space, Space, SpaceKind, SpaceParams};
use crate::wrap::WrappedClassifier;
use crate::Series;

/// Where the evaluated series come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetRef {
    Synth {
        synth: SynthSpec,
    },
    Files {
        test: PathBuf,
        #[serde(default)]
        train: Option<PathBuf>,
    },
}

/// A saved model file, or a template trained on the dataset's train split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Path(PathBuf),
    Train {
        #[serde(default)]
        arch: Arch,
        #[serde(default)]
        train: TrainConfig,
    },
}

/// A space kind with optional parameters; the input length comes from the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "SpaceEntryRepr")]
pub struct SpaceEntry {
    pub kind: SpaceKind,
    #[serde(flatten)]
    pub params: SpaceParams,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SpaceEntryRepr {
    Name(SpaceKind),
    Full {
        kind: SpaceKind,
        #[serde(flatten)]
        params: SpaceParams,
    },
}

impl From<SpaceEntryRepr> for SpaceEntry {
    fn from(r: SpaceEntryRepr) -> Self {
        match r {
            SpaceEntryRepr::Name(kind) => SpaceEntry {
                kind,
                params: SpaceParams::default(),
            },
            SpaceEntryRepr::Full { kind, params } => SpaceEntry { kind, params },
        }
    }
}

impl From<SpaceKind> for SpaceEntry {
    fn from(kind: SpaceKind) -> Self {
        SpaceEntry {
            kind,
            params: SpaceParams::default(),
        }
    }
}

/// When to rescale decomposition-space attributions by block importance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMode {
    /// Backpropagation methods only.
    #[default]
    Auto,
    Always,
    Never,
}

impl CalibrationMode {
    pub fn applies(self, space: &Space, method: Method) -> bool {
        space.kind() == SpaceKind::Decomposition
            && match self {
                CalibrationMode::Auto => method.is_backprop(),
                CalibrationMode::Always => true,
                CalibrationMode::Never => false,
            }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Write one CSV of per-sample scores per (space, method).
    pub attributions: bool,
    /// Number of samples per (space, method) rendered as SVG.
    pub plots: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            attributions: true,
            plots: 1,
        }
    }
}

fn default_name() -> String {
    "dataset".into()
}

fn default_sample_limit() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub dataset: DatasetRef,
    pub model: ModelRef,
    pub spaces: Vec<SpaceEntry>,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub method_config: MethodConfig,
    #[serde(default)]
    pub robustness: RobustnessConfig,
    #[serde(default)]
    pub faithfulness: FaithfulnessConfig,
    #[serde(default)]
    pub sparsity: SparsityConfig,
    #[serde(default)]
    pub calibration: CalibrationMode,
    #[serde(default = "default_sample_limit")]
    pub sample_limit: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let invalid = |m: &str| Err(Error::ConfigInvalid(m.into()));
        if self.spaces.is_empty() {
            return invalid("spaces must not be empty");
        }
        if self.methods.is_empty() {
            return invalid("methods must not be empty");
        }
        if self.sample_limit == 0 {
            return invalid("sample_limit must be at least 1");
        }
        let wrap = |e: Error| Error::ConfigInvalid(e.to_string());
        self.method_config.validate().map_err(wrap)?;
        self.robustness.validate().map_err(wrap)?;
        self.faithfulness.validate().map_err(wrap)?;
        self.sparsity.validate().map_err(wrap)
    }

    /// Reads a JSON config. Relative paths inside it resolve against the
    /// config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::ConfigInvalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DatasetRef::Files { test, train } = &mut self.dataset {
            fix(test);
            if let Some(t) = train {
                fix(t);
            }
        }
        if let ModelRef::Path(p) = &mut self.model {
            fix(p);
        }
        if let Some(d) = &mut self.output.dir {
            fix(d);
        }
    }
}

/// Per-sample scores kept for attribution files and plots.
#[derive(Debug, Clone)]
pub struct SampleAttribution {
    pub index: usize,
    pub label: Option<usize>,
    pub predicted: usize,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AttributionSet {
    pub space: Space,
    pub method: Method,
    pub samples: Vec<SampleAttribution>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub rows: Vec<MetricRow>,
    pub attributions: Vec<AttributionSet>,
    /// Evaluated test samples, in order.
    pub samples: Vec<Series>,
}

fn load_dataset(r: &DatasetRef) -> Result<Dataset> {
    match r {
        DatasetRef::Synth { synth } => synth_dataset(synth),
        DatasetRef::Files { test, train } => {
            let mut paths = vec![test.as_path()];
            if let Some(t) = train {
                paths.push(t.as_path());
            }
            let mut sets = load_ucr_files(&paths)?;
            let train = if sets.len() > 1 {
                sets.pop().unwrap_or_default()
            } else {
                Vec::new()
            };
            let test = sets.pop().unwrap_or_default();
            Ok(Dataset { train, test })
        }
    }
}

fn load_or_train(r: &ModelRef, data: &Dataset) -> Result<Model> {
    match r {
        ModelRef::Path(p) => load_model(p),
        ModelRef::Train { arch, train: cfg } => {
            if data.train.is_empty() {
                return Err(Error::ConfigInvalid(
                    "training a model needs a train split".into(),
                ));
            }
            Ok(train(&data.train, arch, cfg)?.model)
        }
    }
}

/// Produces the attribution used for evaluation, calibrated when `calibrate`.
pub fn explain(
    w: &WrappedClassifier,
    z: &[f64],
    class: usize,
    method: Method,
    cfg: &MethodConfig,
    calibrate: bool,
) -> Result<Vec<f64>> {
    let a = attribute(w, z, class, method, cfg)?;
    if calibrate {
        Ok(calibrate_decomposition(w, z, class, &a, cfg)?.scores)
    } else {
        Ok(a.scores)
    }
}

struct SampleMetrics {
    flip: bool,
    sparsity: f64,
    entropy: Option<f64>,
    xai_robustness: f64,
    attribution: SampleAttribution,
}

/// Loads data and model, then evaluates every (space, method) pair.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let data = load_dataset(&cfg.dataset).map_err(|e| e.context("loading dataset"))?;
    let model = load_or_train(&cfg.model, &data).map_err(|e| e.context("loading model"))?;
    run_with_model(cfg, &model, &data.test)
}

/// Evaluates `model` on the first `sample_limit` series of `test`.
pub fn run_with_model(
    cfg: &ExperimentConfig,
    model: &Model,
    test: &[Series],
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let n = model.input_len();
    let samples: Vec<Series> = test.iter().take(cfg.sample_limit).cloned().collect();
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(s) = samples.iter().find(|s| s.len() != n) {
        return Err(Error::ConfigInvalid(format!(
            "model expects series of length {n}, dataset has length {}",
            s.len()
        )));
    }
    let mut rows = Vec::new();
    let mut attributions = Vec::new();
    let rob_seed = derive_seed(cfg.seed, u64::MAX);
    for entry in &cfg.spaces {
        let space = make_space(entry.kind, n, entry.params)
            .map_err(|e| e.context(format!("space {}", entry.kind)))?;
        let space_id = space.id();
        let w = WrappedClassifier::new(model.clone(), space.clone())?;
        let zs: Vec<Vec<f64>> = samples
            .iter()
            .map(|s| space.forward(s.values()))
            .collect::<Result<_>>()?;
        let cls_rob: Vec<f64> = zs
            .par_iter()
            .enumerate()
            .map(|(i, z)| {
                let rcfg = RobustnessConfig {
                    seed: derive_seed(rob_seed, i as u64),
                    ..cfg.robustness.clone()
                };
                classifier_robustness(&w, z, &rcfg)
                    .map_err(|e| e.context(format!("space {space_id}, sample {i}")))
            })
            .collect::<Result<_>>()?;
        let cls_mean = cls_rob.iter().sum::<f64>() / cls_rob.len() as f64;

        for &method in &cfg.methods {
            let calibrate = cfg.calibration.applies(&space, method);
            let per_sample: Vec<SampleMetrics> = zs
                .par_iter()
                .enumerate()
                .map(|(i, z)| {
                    let ctx = |e: Error| {
                        e.context(format!("space {space_id}, method {method}, sample {i}"))
                    };
                    let mcfg = cfg.method_config.with_seed(derive_seed(cfg.seed, i as u64));
                    let class = w.predict_class(z).map_err(ctx)?;
                    let scores = explain(&w, z, class, method, &mcfg, calibrate).map_err(ctx)?;
                    let flip = faithfulness_flip(&w, z, &scores, &cfg.faithfulness).map_err(ctx)?;
                    let spars = sparsity(&scores, &space, &cfg.sparsity).map_err(ctx)?;
                    let entropy = shannon_entropy(&scores).ok();
                    let rcfg = RobustnessConfig {
                        seed: derive_seed(rob_seed, i as u64),
                        ..cfg.robustness.clone()
                    };
                    let xai = xai_robustness_with(z, &rcfg, |v| {
                        explain(&w, v, class, method, &mcfg, calibrate)
                    })
                    .map_err(ctx)?;
                    Ok(SampleMetrics {
                        flip,
                        sparsity: spars,
                        entropy,
                        xai_robustness: xai,
                        attribution: SampleAttribution {
                            index: i,
                            label: samples[i].label,
                            predicted: class,
                            scores,
                        },
                    })
                })
                .collect::<Result<_>>()?;
            let count = per_sample.len() as f64;
            let entropies: Vec<f64> = per_sample.iter().filter_map(|m| m.entropy).collect();
            let mut row = MetricRow {
                dataset: cfg.name.clone(),
                space: space_id.clone(),
                method: method.as_str().into(),
                faithfulness_pct: 100.0 * per_sample.iter().filter(|m| m.flip).count() as f64
                    / count,
                sparsity: Some(per_sample.iter().map(|m| m.sparsity).sum::<f64>() / count),
                cls_robustness: cls_mean,
                xai_robustness: per_sample.iter().map(|m| m.xai_robustness).sum::<f64>() / count,
                shannon_entropy: (!entropies.is_empty())
                    .then(|| entropies.iter().sum::<f64>() / entropies.len() as f64),
                beta: cfg.sparsity.beta,
                eps: cfg.faithfulness.threshold_eps,
                lambda: cfg.robustness.lambda,
            };
            row.apply_suppression();
            rows.push(row);
            attributions.push(AttributionSet {
                space: space.clone(),
                method,
                samples: per_sample.into_iter().map(|m| m.attribution).collect(),
            });
        }
    }
    Ok(ExperimentReport {
        rows,
        attributions,
        samples,
    })
}
