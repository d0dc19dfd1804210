use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::model::MeasurementStack;
use crate::error::{Error, Result};

/// Shot noise `ỹ = (d/N_p)·Pois(N_p y/d)` with `d = n²` pixels per pattern.
///
/// Draws come from a ChaCha8 stream seeded with `seed`, one per entry in
/// storage order, using `rand_distr`'s Poisson sampler (inversion for small
/// means, rejection for large ones), so the result is reproducible.
pub fn poisson_corrupt(y: &MeasurementStack, photons: f64, seed: u64) -> Result<MeasurementStack> {
    if !(photons.is_finite() && photons > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "photon count {photons} must be positive"
        )));
    }
    let d = (y.side() * y.side()) as f64;
    let scale = photons / d;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = y
        .as_slice()
        .iter()
        .map(|&v| {
            let mean = scale * v;
            if mean <= 0.0 {
                return Ok(0.0);
            }
            let dist = Poisson::new(mean)
                .map_err(|e| Error::InvalidParameter(format!("Poisson mean {mean}: {e}")))?;
            let count: f64 = dist.sample(&mut rng);
            Ok(count / scale)
        })
        .collect::<Result<Vec<f64>>>()?;
    MeasurementStack::new(y.shift_count(), y.side(), data)
}

/// `‖√ỹ − √y‖ / ‖√y‖`.
pub fn relative_amplitude_noise(noisy: &MeasurementStack, clean: &MeasurementStack) -> Result<f64> {
    if noisy.len() != clean.len() {
        return Err(Error::Shape(format!(
            "{} noisy vs {} clean intensities",
            noisy.len(),
            clean.len()
        )));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (&a, &b) in noisy.as_slice().iter().zip(clean.as_slice()) {
        num += (a.sqrt() - b.sqrt()).powi(2);
        den += b;
    }
    if den == 0.0 {
        return Err(Error::InvalidParameter(
            "clean measurements are identically zero".into(),
        ));
    }
    Ok((num / den).sqrt())
}
