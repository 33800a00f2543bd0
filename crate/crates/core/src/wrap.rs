//! `M'(z) = M(F⁻¹(z))`: a base model composed with a space's inverse.

use crate::error::{check_len, Error, Result};
use crate::net::{Model, Output, Rule};
use crate::spaces::Space;

#[derive(Debug, Clone)]
pub struct WrappedClassifier {
    base: Model,
    space: Space,
}

pub fn wrap(m: Model, s: Space) -> Result<WrappedClassifier> {
    WrappedClassifier::new(m, s)
}

impl WrappedClassifier {
    pub fn new(base: Model, space: Space) -> Result<Self> {
        if base.input_len() != space.input_len() {
            return Err(Error::LengthMismatch {
                expected: base.input_len(),
                actual: space.input_len(),
            });
        }
        Ok(Self { base, space })
    }

    pub fn base(&self) -> &Model {
        &self.base
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn num_classes(&self) -> usize {
        self.base.num_classes()
    }

    /// Explanation-space dimension accepted by this classifier.
    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    fn to_time(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), z.len())?;
        self.space.inverse(z)
    }

    pub fn predict(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.base.predict(&self.to_time(z)?)
    }

    pub fn predict_class(&self, z: &[f64]) -> Result<usize> {
        self.base.predict_class(&self.to_time(z)?)
    }

    pub fn score(&self, z: &[f64], class: usize, output: Output) -> Result<f64> {
        self.base.score(&self.to_time(z)?, class, output)
    }

    /// `∂M'_c/∂z = A · ∂M_c/∂x` via the transpose of the inverse operator.
    pub fn gradient(&self, z: &[f64], class: usize, output: Output) -> Result<Vec<f64>> {
        let g = self.base.gradient(&self.to_time(z)?, class, output)?;
        self.space.inverse_transpose(&g)
    }

    pub fn input_gradient(&self, z: &[f64], class: usize) -> Result<Vec<f64>> {
        self.gradient(z, class, Output::Probability)
    }

    pub(crate) fn backprop(
        &self,
        z: &[f64],
        reference: Option<&[f64]>,
        class: usize,
        output: Output,
        rule: Rule,
    ) -> Result<Vec<f64>> {
        let x = self.to_time(z)?;
        let r = reference.map(|r| self.to_time(r)).transpose()?;
        let g = self.base.backprop(&x, r.as_deref(), class, output, rule)?;
        self.space.inverse_transpose(&g)
    }
}
