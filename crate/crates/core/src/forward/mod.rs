//! Discretized polychromatic ptychography.
//!
//! Each of `L` wavelengths `λ_1 < … < λ_L` illuminates the object `x_ℓ`
//! through a probe `w_ℓ`; the detector records, for every probe shift `m`
//! and frequency `k ∈ [n]²`,
//!
//! ```text
//! y_{m,k} = Σ_ℓ λ_ℓ^{-2} |(F^ℓ ψ_ℓ^m)_k|²,   ψ_ℓ^m[p] = x_ℓ[p] · w_ℓ[p − m]
//! ```
//!
//! where the probe is cut (not wrapped) at the grid boundary.

mod dft;
mod model;
mod noise;
mod oracle;
mod phantom;
mod probe;
mod scan;

pub use dft::{Rect, ScaledDftPlan};
pub use model::{exit_wave, MeasurementStack, PtychoModel, Role, Shift, ShiftSet};
pub use noise::{poisson_corrupt, relative_amplitude_noise};
pub use oracle::{dense_measurement_sum, quad_form_oracle, QuadForm};
pub use phantom::{shepp_logan, structured_image, synthetic_object, ObjectParams};
pub use probe::{default_probe_variance, gaussian_probe, stepped_disk_init};
pub use scan::{fermat_shifts, fermat_spiral_points, raster_shifts, SpiralPoint, GOLDEN_ANGLE};

use serde::{Deserialize, Serialize};

use crate::block::BlockVector;
use crate::error::{Error, Result};

/// Object stack `x`, one `n × n` grid per wavelength.
pub type ObjectStack = BlockVector;

/// Probe stack `w`, one `n × n` grid per wavelength.
pub type ProbeStack = BlockVector;

/// Strictly increasing wavelengths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WavelengthSpec {
    lambdas: Vec<f64>,
}

impl WavelengthSpec {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::Empty("wavelength list"));
        }
        if lambdas.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "wavelengths must be positive: {lambdas:?}"
            )));
        }
        if lambdas.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::InvalidParameter(format!(
                "wavelengths must be strictly increasing: {lambdas:?}"
            )));
        }
        Ok(Self { lambdas })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// `ρ_ℓ = λ_1 / λ_ℓ`; the first ratio is exactly 1.
    pub fn ratios(&self) -> Vec<f64> {
        let l1 = self.lambdas[0];
        self.lambdas
            .iter()
            .enumerate()
            .map(|(i, &l)| if i == 0 { 1.0 } else { l1 / l })
            .collect()
    }

    /// Channel weights `λ_ℓ^{-2}`.
    pub fn weights(&self) -> Vec<f64> {
        self.lambdas.iter().map(|l| 1.0 / (l * l)).collect()
    }
}
