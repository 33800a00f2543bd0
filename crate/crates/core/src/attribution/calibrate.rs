use super::{Attribution, MethodConfig};
use crate::error::{check_len, Error, Result};
use crate::spaces::SpaceKind;
use crate::wrap::WrappedClassifier;

/// Rescales a decomposition-space attribution by how much each component
/// matters to the model.
///
/// Each block is occluded (set to zero) on its own and the confidence drop
/// `M'_c(z) − M'_c(z without block k)` multiplies that block's scores. The
/// result is divided by its largest magnitude, so blocks with no effect
/// stay exactly zero and the output lies in `[-1, 1]`.
pub fn calibrate_decomposition(
    w: &WrappedClassifier,
    z: &[f64],
    class: usize,
    raw: &Attribution,
    cfg: &MethodConfig,
) -> Result<Attribution> {
    if w.space().kind() != SpaceKind::Decomposition {
        return Err(Error::SpaceMismatch(format!(
            "calibration needs a decomposition space, got {}",
            w.space().id()
        )));
    }
    check_len(w.dim(), z.len())?;
    check_len(w.dim(), raw.scores.len())?;
    let n = w.space().input_len();
    let full = w.score(z, class, cfg.output)?;
    let mut scores = Vec::with_capacity(raw.scores.len());
    let mut masked = z.to_vec();
    for (k, block) in raw.scores.chunks(n).enumerate() {
        let range = k * n..(k + 1) * n;
        masked[range.clone()].fill(0.0);
        let mut drop = full - w.score(&masked, class, cfg.output)?;
        masked[range.clone()].copy_from_slice(&z[range]);
        if cfg.clamp_calibration {
            drop = drop.max(0.0);
        }
        scores.extend(block.iter().map(|s| s * drop));
    }
    let peak = scores.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak > 0.0 {
        scores.iter_mut().for_each(|s| *s /= peak);
    }
    Ok(Attribution {
        scores,
        space_id: raw.space_id.clone(),
        method: raw.method,
        target_class: class,
        calibrated: true,
    })
}
