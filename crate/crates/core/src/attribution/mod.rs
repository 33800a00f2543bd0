//! Attribution methods that operate on a [`WrappedClassifier`], so each one
//! runs unchanged in every explanation space.

mod calibrate;
mod gradient;
mod perturbation;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::net::Output;
use crate::wrap::WrappedClassifier;

pub use calibrate::calibrate_decomposition;
pub use gradient::{
    deeplift, gradient_shap, guided_backprop, input_x_gradient, integrated_gradients, saliency,
};
pub use perturbation::{kernel_shap, lime, occlusion, segments};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[serde(rename = "deeplift")]
    DeepLift,
    GradientShap,
    GuidedBackprop,
    #[serde(alias = "ixg")]
    InputXGradient,
    #[serde(alias = "ig")]
    IntegratedGradients,
    KernelShap,
    Lime,
    Occlusion,
    Saliency,
}

impl Method {
    /// Column order used in reports.
    pub const ALL: [Method; 9] = [
        Method::DeepLift,
        Method::GradientShap,
        Method::GuidedBackprop,
        Method::InputXGradient,
        Method::IntegratedGradients,
        Method::KernelShap,
        Method::Lime,
        Method::Occlusion,
        Method::Saliency,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::DeepLift => "deeplift",
            Method::GradientShap => "gradient_shap",
            Method::GuidedBackprop => "guided_backprop",
            Method::InputXGradient => "input_x_gradient",
            Method::IntegratedGradients => "integrated_gradients",
            Method::KernelShap => "kernel_shap",
            Method::Lime => "lime",
            Method::Occlusion => "occlusion",
            Method::Saliency => "saliency",
        }
    }

    /// Table heading.
    pub fn display_name(self) -> &'static str {
        match self {
            Method::DeepLift => "DeepLIFT",
            Method::GradientShap => "GradientSHAP",
            Method::GuidedBackprop => "G. Backprop",
            Method::InputXGradient => "I×G",
            Method::IntegratedGradients => "IG",
            Method::KernelShap => "Kernel SHAP",
            Method::Lime => "LIME",
            Method::Occlusion => "Occlusion",
            Method::Saliency => "Saliency",
        }
    }

    /// Methods that distribute relevance by backpropagation. In a
    /// decomposition space these assign identical multipliers to every
    /// block and therefore need calibration.
    pub fn is_backprop(self) -> bool {
        !matches!(self, Method::Occlusion | Method::KernelShap | Method::Lime)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == key)
            .or(match key.as_str() {
                "ig" => Some(Method::IntegratedGradients),
                "ixg" => Some(Method::InputXGradient),
                _ => None,
            })
            .ok_or_else(|| Error::InvalidParams(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodConfig {
    /// Reference input in explanation space; all zeros when unset.
    pub baseline: Option<Vec<f64>>,
    pub ig_steps: usize,
    pub gs_samples: usize,
    pub gs_noise_sigma: f64,
    /// Defaults to `max(1, dim / 20)`.
    pub occlusion_window: Option<usize>,
    pub occlusion_stride: usize,
    /// Defaults to `min(dim, 32)`.
    pub shap_segments: Option<usize>,
    pub shap_coalitions: usize,
    pub lime_samples: usize,
    pub lime_kernel_width: f64,
    pub deeplift_delta: f64,
    pub seed: u64,
    pub output: Output,
    /// Clamp negative confidence drops to zero during decomposition calibration.
    pub clamp_calibration: bool,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            baseline: None,
            ig_steps: 64,
            gs_samples: 50,
            gs_noise_sigma: 1.0,
            occlusion_window: None,
            occlusion_stride: 1,
            shap_segments: None,
            shap_coalitions: 500,
            lime_samples: 500,
            lime_kernel_width: 0.25,
            deeplift_delta: 1e-7,
            seed: 0,
            output: Output::Probability,
            clamp_calibration: false,
        }
    }
}

impl MethodConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("ig_steps", self.ig_steps),
            ("gs_samples", self.gs_samples),
            ("occlusion_stride", self.occlusion_stride),
            ("shap_coalitions", self.shap_coalitions),
            ("lime_samples", self.lime_samples),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidParams(format!("{name} must be at least 1")));
            }
        }
        if self.occlusion_window == Some(0) || self.shap_segments == Some(0) {
            return Err(Error::InvalidParams(
                "window and segment counts must be at least 1".into(),
            ));
        }
        if !(self.gs_noise_sigma > 0.0) || !(self.lime_kernel_width > 0.0) {
            return Err(Error::InvalidParams(
                "sigma and kernel width must be positive".into(),
            ));
        }
        if !(self.deeplift_delta >= 0.0) {
            return Err(Error::InvalidParams(
                "deeplift_delta must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn baseline_for(&self, dim: usize) -> Result<Vec<f64>> {
        match &self.baseline {
            Some(b) => {
                check_len(dim, b.len())?;
                Ok(b.clone())
            }
            None => Ok(vec![0.0; dim]),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// Relevance scores aligned with an explanation-space vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub scores: Vec<f64>,
    pub space_id: String,
    pub method: Method,
    pub target_class: usize,
    #[serde(default)]
    pub calibrated: bool,
}

impl Attribution {
    pub(crate) fn new(
        w: &WrappedClassifier,
        method: Method,
        class: usize,
        scores: Vec<f64>,
    ) -> Self {
        Self {
            scores,
            space_id: w.space().id(),
            method,
            target_class: class,
            calibrated: false,
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Mixes a global seed with a sample index so that parallel and serial
/// evaluation draw identical random streams (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn preflight(
    w: &WrappedClassifier,
    z: &[f64],
    class: usize,
    cfg: &MethodConfig,
) -> Result<()> {
    cfg.validate()?;
    check_len(w.dim(), z.len())?;
    w.base().check_class(class)
}

/// Runs `method` on `z` for `class`.
pub fn attribute(
    w: &WrappedClassifier,
    z: &[f64],
    class: usize,
    method: Method,
    cfg: &MethodConfig,
) -> Result<Attribution> {
    let a = match method {
        Method::Saliency => saliency(w, z, class, cfg),
        Method::InputXGradient => input_x_gradient(w, z, class, cfg),
        Method::IntegratedGradients => integrated_gradients(w, z, class, cfg),
        Method::GradientShap => gradient_shap(w, z, class, cfg),
        Method::GuidedBackprop => guided_backprop(w, z, class, cfg),
        Method::DeepLift => deeplift(w, z, class, cfg),
        Method::Occlusion => occlusion(w, z, class, cfg),
        Method::KernelShap => kernel_shap(w, z, class, cfg),
        Method::Lime => lime(w, z, class, cfg),
    }?;
    debug_assert!(a.scores.iter().all(|s| s.is_finite()));
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_roundtrip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.as_str()));
        }
        assert_eq!("IG".parse::<Method>().unwrap(), Method::IntegratedGradients);
        assert!("deepshap".parse::<Method>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(MethodConfig::default().validate().is_ok());
        let bad = MethodConfig {
            ig_steps: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = MethodConfig {
            gs_noise_sigma: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn seeds_differ_per_index() {
        assert_ne!(derive_seed(7, 0), derive_seed(7, 1));
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }
}
