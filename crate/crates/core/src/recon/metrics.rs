use crate::block::{BlockVector, C64};
use crate::error::{Error, Result};

/// Closed-form global phase `θ = arg⟨estimate, reference⟩` minimizing
/// `‖reference − e^{iθ}·estimate‖`, and the rotated estimate.
///
/// A zero estimate (or one orthogonal to the reference) gives `θ = 0`.
pub fn global_phase_align(
    estimate: &BlockVector,
    reference: &BlockVector,
) -> Result<(f64, BlockVector)> {
    estimate.check_shape(reference)?;
    let ip = estimate.inner(reference);
    let theta = if ip.norm() == 0.0 { 0.0 } else { ip.arg() };
    Ok((theta, estimate.scaled(C64::from_polar(1.0, theta))))
}

/// `‖reference − estimate‖ / ‖reference‖`, optionally after phase alignment.
pub fn relative_error(estimate: &BlockVector, reference: &BlockVector, align: bool) -> Result<f64> {
    estimate.check_shape(reference)?;
    let denom = reference.norm();
    if denom == 0.0 {
        return Err(Error::InvalidParameter(
            "relative error against a zero reference".into(),
        ));
    }
    let diff = if align {
        let (_, aligned) = global_phase_align(estimate, reference)?;
        reference.sub(&aligned)
    } else {
        reference.sub(estimate)
    };
    Ok(diff.norm() / denom)
}
