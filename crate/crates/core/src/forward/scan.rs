//! Scan patterns.

use std::f64::consts::PI;

use super::model::{Shift, ShiftSet};
use crate::error::{Error, Result};

/// Golden angle `2π (2/(1+√5))²` in radians.
pub const GOLDEN_ANGLE: f64 = 2.0 * PI * 0.381_966_011_250_105_1;

/// A point of the Fermat spiral in polar form, relative to the grid center.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpiralPoint {
    pub k: usize,
    pub radius: f64,
    pub angle: f64,
}

/// Spiral points `r_k = c_sp √k`, `φ_k = k φ_0` for `0 ≤ k ≤ ⌈((n − δ)/c_sp)²/2⌉`.
pub fn fermat_spiral_points(
    side: usize,
    probe_side: usize,
    spacing: f64,
) -> Result<Vec<SpiralPoint>> {
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "spiral spacing {spacing} must be positive"
        )));
    }
    if probe_side == 0 || probe_side > side {
        return Err(Error::InvalidParameter(format!(
            "probe side {probe_side} must lie in 1..={side}"
        )));
    }
    let span = (side - probe_side) as f64 / spacing;
    let last = (0.5 * span * span).ceil() as usize;
    Ok((0..=last)
        .map(|k| SpiralPoint {
            k,
            radius: spacing * (k as f64).sqrt(),
            angle: k as f64 * GOLDEN_ANGLE,
        })
        .collect())
}

/// Round half away from zero.
fn round_half_away(v: f64) -> i64 {
    v.round() as i64
}

/// Fermat-spiral scan.
///
/// Each spiral point is the probe center relative to the grid center
/// `(n/2, n/2)`. The probe center sits at `((δ−1)/2, (δ−1)/2)` inside its
/// `δ × δ` support, so the shift is `round(center − (δ−1)/2)` with
/// half-away-from-zero rounding. Shifts whose support leaves the grid are
/// dropped and duplicates removed, keeping spiral order.
pub fn fermat_shifts(side: usize, probe_side: usize, spacing: f64) -> Result<ShiftSet> {
    let half = side as f64 / 2.0;
    let offset = (probe_side as f64 - 1.0) / 2.0;
    let max = (side - probe_side.min(side)) as i64;
    let mut shifts: Vec<Shift> = Vec::new();
    for p in fermat_spiral_points(side, probe_side, spacing)? {
        let row = round_half_away(p.radius * p.angle.cos() + half - offset);
        let col = round_half_away(p.radius * p.angle.sin() + half - offset);
        if (0..=max).contains(&row) && (0..=max).contains(&col) && !shifts.contains(&(row, col)) {
            shifts.push((row, col));
        }
    }
    if shifts.is_empty() {
        return Err(Error::Empty("Fermat scan"));
    }
    ShiftSet::new(side, probe_side, shifts)
}

/// Regular grid scan with the given step, always including the far edge.
pub fn raster_shifts(side: usize, probe_side: usize, step: usize) -> Result<ShiftSet> {
    if step == 0 || probe_side == 0 || probe_side > side {
        return Err(Error::InvalidParameter(format!(
            "raster scan needs step >= 1 and 1 <= probe side {probe_side} <= {side}"
        )));
    }
    let max = side - probe_side;
    let mut axis: Vec<usize> = (0..=max).step_by(step).collect();
    if *axis.last().unwrap() != max {
        axis.push(max);
    }
    let shifts = axis
        .iter()
        .flat_map(|&r| axis.iter().map(move |&c| (r as i64, c as i64)))
        .collect();
    ShiftSet::new(side, probe_side, shifts)
}
