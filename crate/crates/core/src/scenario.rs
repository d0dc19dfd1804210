//! Synthetic experiment setups: wavelengths, scan, probe, object and noisy data.

use serde::{Deserialize, Serialize};

use crate::block::{BlockVector, C64};
use crate::error::{Error, Result};
use crate::forward::{
    default_probe_variance, fermat_shifts, gaussian_probe, poisson_corrupt, stepped_disk_init,
    synthetic_object, MeasurementStack, ObjectParams, PtychoModel, WavelengthSpec,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    /// Grid side `n`.
    pub side: usize,
    /// Probe support side `δ`.
    pub probe_side: usize,
    /// Increasing wavelengths; only their ratios enter the transforms.
    pub lambdas: Vec<f64>,
    /// Per-wavelength probe energies, summing to one.
    pub spectral_weights: Vec<f64>,
    /// Fermat spiral spacing.
    pub spacing: f64,
    /// Gaussian probe variance, `δ²/20` when unset.
    #[serde(default)]
    pub probe_variance: Option<f64>,
    pub object: ObjectParams,
    /// Expected photon count for Poisson noise; noiseless when unset.
    #[serde(default)]
    pub photons: Option<f64>,
    pub noise_seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self::full()
    }
}

impl Scenario {
    /// `n = 100`, `δ = 40`, three wavelengths, 49 spiral positions, `10⁶` photons.
    pub fn full() -> Self {
        Self {
            side: 100,
            probe_side: 40,
            lambdas: vec![1.0, 1.25, 1.5],
            spectral_weights: vec![0.2, 0.5, 0.3],
            spacing: 4.9,
            probe_variance: None,
            object: ObjectParams::default(),
            photons: Some(1e6),
            noise_seed: 1,
        }
    }

    /// Noiseless `n = 32`, `δ = 12` version of [`Scenario::full`] with a
    /// similar number of scan positions (46).
    pub fn desk() -> Self {
        Self {
            side: 32,
            probe_side: 12,
            spacing: 1.75,
            photons: None,
            ..Self::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.side < 16 {
            return Err(Error::InvalidParameter(format!(
                "side {} is below the minimum of 16",
                self.side
            )));
        }
        if self.lambdas.len() != self.spectral_weights.len() {
            return Err(Error::Shape(format!(
                "{} wavelengths but {} spectral weights",
                self.lambdas.len(),
                self.spectral_weights.len()
            )));
        }
        if let Some(p) = self.photons {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "photon count {p} must be > 0"
                )));
            }
        }
        if let Some(v) = self.probe_variance {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "probe variance {v} must be > 0"
                )));
            }
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        self.lambdas.len()
    }

    pub fn model(&self) -> Result<PtychoModel> {
        self.validate()?;
        let spec = WavelengthSpec::new(self.lambdas.clone())?;
        let shifts = fermat_shifts(self.side, self.probe_side, self.spacing)?;
        Ok(PtychoModel::new(spec, shifts))
    }

    pub fn probe(&self) -> Result<BlockVector> {
        let var = self
            .probe_variance
            .unwrap_or_else(|| default_probe_variance(self.probe_side));
        gaussian_probe(self.side, self.probe_side, &self.spectral_weights, var)
    }

    pub fn object(&self) -> Result<BlockVector> {
        synthetic_object(self.side, self.channels(), self.object)
    }

    /// Flat object start, every pixel of every block equal to one.
    pub fn flat_start(&self) -> BlockVector {
        BlockVector::filled(self.channels(), self.side, C64::new(1.0, 0.0))
    }

    /// Stepped-disk probe start.
    pub fn probe_start(&self) -> Result<BlockVector> {
        stepped_disk_init(self.side, self.probe_side, self.channels())
    }

    /// Builds the model, ground truth and measurements.
    pub fn build(&self) -> Result<Instance> {
        let model = self.model()?;
        let object = self.object()?;
        let probe = self.probe()?;
        let clean = model.simulate(&object, &probe)?;
        let data = match self.photons {
            Some(p) => poisson_corrupt(&clean, p, self.noise_seed)?,
            None => clean.clone(),
        };
        Ok(Instance {
            model,
            object,
            probe,
            clean,
            data,
        })
    }
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub model: PtychoModel,
    pub object: BlockVector,
    pub probe: BlockVector,
    pub clean: MeasurementStack,
    /// `clean` with noise applied, if any.
    pub data: MeasurementStack,
}
