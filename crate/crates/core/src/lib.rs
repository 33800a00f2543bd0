//! Explain time-series classifiers in alternative, invertible
//! representation spaces.
//!
//! A model trained on the time domain is wrapped as `M'(z) = M(F⁻¹(z))` for
//! an explanation space `F`, so that any attribution method can run on `z`
//! unchanged. The crate also provides the evaluation metrics used to compare
//! explanations across spaces and a small experiment harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attribution;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod net;
pub mod series;
pub mod spaces;
pub mod wrap;

pub use attribution::{Attribution, Method, MethodConfig};
pub use error::{Error, Result};
pub use net::{Layer, Model, TrainConfig};
pub use series::Series;
pub use spaces::{make_space, Space, SpaceConfig, SpaceKind, SpaceParams, SpaceVector};
pub use wrap::WrappedClassifier;
