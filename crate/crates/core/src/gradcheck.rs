//! Central finite-difference oracle for analytic gradients.

use crate::error::Result;
use crate::graph::GradMap;
use crate::param::ParamSet;

/// Compares `analytic` against central finite differences of `f` over every
/// trainable coordinate of `params`. Returns the max over coordinates of
/// `|analytic - numeric| / max(1, |analytic|)`. A failing or non-finite
/// evaluation of `f` yields infinity so callers treat it as a failure.
pub fn finite_difference_check<F>(params: &ParamSet, analytic: &GradMap, eps: f64, mut f: F) -> f64
where
    F: FnMut(&ParamSet) -> Result<f64>,
{
    assert!(eps > 0.0, "eps must be positive");
    let mut worst: f64 = 0.0;
    for p in params.iter() {
        if !p.trainable {
            continue;
        }
        for coord in 0..p.value.numel() {
            let mut probe = |delta: f64| -> Option<f64> {
                let mut shifted = params.clone();
                let mut v = p.value.clone();
                v.data_mut()[coord] += delta;
                shifted.set_value(&p.name, v).ok()?;
                match f(&shifted) {
                    Ok(y) if y.is_finite() => Some(y),
                    _ => None,
                }
            };
            let (hi, lo) = match (probe(eps), probe(-eps)) {
                (Some(hi), Some(lo)) => (hi, lo),
                _ => return f64::INFINITY,
            };
            let numeric = (hi - lo) / (2.0 * eps);
            let a = analytic.get(&p.name).map_or(0.0, |t| t.data()[coord]);
            let err = (a - numeric).abs() / a.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    worst
}
