//! Probe generators. Probes live in the top-left `δ × δ` corner of an `n × n` grid.

use crate::block::{BlockVector, C64};
use crate::error::{Error, Result};

/// Default Gaussian variance `δ²/20`.
pub fn default_probe_variance(probe_side: usize) -> f64 {
    (probe_side * probe_side) as f64 / 20.0
}

fn check_sizes(side: usize, probe_side: usize) -> Result<()> {
    if probe_side == 0 || probe_side > side {
        return Err(Error::InvalidParameter(format!(
            "probe side {probe_side} must lie in 1..={side}"
        )));
    }
    Ok(())
}

/// Squared distance of pixel `(r, c)` from the support center `((δ−1)/2, (δ−1)/2)`.
fn dist_sqr(r: usize, c: usize, probe_side: usize) -> f64 {
    let mu = (probe_side as f64 - 1.0) / 2.0;
    (r as f64 - mu).powi(2) + (c as f64 - mu).powi(2)
}

/// Stacks `scales[ℓ]·g/‖g‖` for a template `g` on `[δ]²`.
fn stack_from_template(
    side: usize,
    probe_side: usize,
    template: &[f64],
    scales: &[f64],
) -> Result<BlockVector> {
    let norm = template.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut w = BlockVector::zeros(scales.len(), side);
    for (l, s) in scales.iter().enumerate() {
        for r in 0..probe_side {
            for c in 0..probe_side {
                w.set(
                    l,
                    r,
                    c,
                    C64::new(s * template[r * probe_side + c] / norm, 0.0),
                );
            }
        }
    }
    Ok(w)
}

/// Unnormalized Gaussian `g_k = exp(−‖k − μ‖²/2σ²)` on `[δ]²`, row-major.
pub fn gaussian_template(probe_side: usize, variance: f64) -> Vec<f64> {
    (0..probe_side * probe_side)
        .map(|i| (-dist_sqr(i / probe_side, i % probe_side, probe_side) / (2.0 * variance)).exp())
        .collect()
}

/// Gaussian probe `w_ℓ = √σ_ℓ g/‖g‖`, so that `‖w_ℓ‖² = σ_ℓ`.
///
/// `spectral_weights` must be positive and sum to one.
pub fn gaussian_probe(
    side: usize,
    probe_side: usize,
    spectral_weights: &[f64],
    variance: f64,
) -> Result<BlockVector> {
    check_sizes(side, probe_side)?;
    if spectral_weights.is_empty() {
        return Err(Error::Empty("spectral weights"));
    }
    if spectral_weights
        .iter()
        .any(|&s| !(s.is_finite() && s > 0.0))
    {
        return Err(Error::InvalidParameter(format!(
            "spectral weights must be positive: {spectral_weights:?}"
        )));
    }
    let total: f64 = spectral_weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "spectral weights sum to {total}, not 1"
        )));
    }
    if !(variance.is_finite() && variance > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "probe variance {variance} must be positive"
        )));
    }
    let scales: Vec<f64> = spectral_weights.iter().map(|s| s.sqrt()).collect();
    stack_from_template(
        side,
        probe_side,
        &gaussian_template(probe_side, variance),
        &scales,
    )
}

/// Stepped-disk starting probe `w⁰_ℓ = L^{-1/2} g⁰/‖g⁰‖` with levels
/// 2.3 (radius ≤ √0.3·δ/2), 1.3 (≤ √0.6·δ/2) and 0.3 on the rest of `[δ]²`.
pub fn stepped_disk_init(side: usize, probe_side: usize, channels: usize) -> Result<BlockVector> {
    check_sizes(side, probe_side)?;
    if channels == 0 {
        return Err(Error::Empty("channel list"));
    }
    let half = probe_side as f64 / 2.0;
    let (inner, outer) = (0.3 * half * half, 0.6 * half * half);
    let template: Vec<f64> = (0..probe_side * probe_side)
        .map(|i| {
            let r2 = dist_sqr(i / probe_side, i % probe_side, probe_side);
            if r2 <= inner {
                2.3
            } else if r2 <= outer {
                1.3
            } else {
                0.3
            }
        })
        .collect();
    let s = (channels as f64).sqrt().recip();
    stack_from_template(side, probe_side, &template, &vec![s; channels])
}
