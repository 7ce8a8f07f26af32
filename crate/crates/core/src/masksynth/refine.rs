//! Refinement filters applied to candidate samples before they enter the
//! synthetic dataset.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{remove_small_components, MaskedSample, RefineConfig};

/// Which filter rejected a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    /// Foreground fraction exceeded `max_area_fraction`.
    Area,
    /// Mean |delta| fell below `min_mean_abs_change`.
    LowContrast,
}

#[derive(Debug)]
pub enum RefineOutcome {
    Accepted(MaskedSample),
    Rejected(RejectReason),
}

/// Applies the filters in order: area, contrast, small-component removal.
/// Component removal only shrinks the mask, so the area bound needs no
/// re-check.
pub fn refine(mut sample: MaskedSample, delta: &Array2<f64>, cfg: &RefineConfig) -> RefineOutcome {
    assert_eq!(
        delta.dim(),
        (sample.mask.height(), sample.mask.width()),
        "delta and mask shapes must agree"
    );

    if sample.mask.foreground_fraction() > cfg.max_area_fraction {
        return RefineOutcome::Rejected(RejectReason::Area);
    }

    let mean_abs = delta.iter().map(|v| v.abs()).sum::<f64>() / delta.len() as f64;
    if mean_abs < cfg.min_mean_abs_change {
        return RefineOutcome::Rejected(RejectReason::LowContrast);
    }

    let before = sample.mask.count_foreground();
    let cleaned = remove_small_components(&sample.mask, cfg.min_component_fraction, cfg.connectivity);
    sample.meta.components_removed_pixels = before - cleaned.count_foreground();
    sample.mask = cleaned;
    RefineOutcome::Accepted(sample)
}
