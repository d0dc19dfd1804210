use nalgebra::DMatrix;

use crate::block::{BlockVector, C64};
use crate::error::{Error, Result};
use crate::forward::{dense_measurement_sum, PtychoModel, Role};
use crate::objective::{QuadraticFamily, DENSE_LIMIT};

/// Ptychographic measurements as quadratic forms in one argument, the other held fixed.
///
/// With [`Role::Object`] the variable is the object and `partner` the probe
/// (`y = z*Q^w z`); with [`Role::Window`] it is the reverse (`y = w*Q^x w`).
/// Both roles run through the same per-shift kernel, so their intensities agree
/// bit for bit.
pub struct PtychoFamily<'a> {
    model: &'a PtychoModel,
    partner: &'a BlockVector,
    role: Role,
}

impl<'a> PtychoFamily<'a> {
    pub fn new(model: &'a PtychoModel, partner: &'a BlockVector, role: Role) -> Result<Self> {
        model.check_stack(partner)?;
        Ok(Self {
            model,
            partner,
            role,
        })
    }

    pub fn role(&self) -> Role {
        self.role
    }

    fn pair<'b>(&'b self, v: &'b BlockVector) -> (&'b BlockVector, &'b BlockVector) {
        match self.role {
            Role::Object => (v, self.partner),
            Role::Window => (self.partner, v),
        }
    }
}

impl QuadraticFamily for PtychoFamily<'_> {
    fn layout(&self) -> (usize, usize) {
        (self.model.channels(), self.model.side())
    }

    fn count(&self) -> usize {
        self.model.measurement_count()
    }

    fn quad_values(&self, z: &BlockVector) -> Vec<f64> {
        let (x, w) = self.pair(z);
        self.model.intensities(x, w)
    }

    fn weighted_backproject(&self, z: &BlockVector, c: &[f64]) -> BlockVector {
        let (x, w) = self.pair(z);
        self.model
            .backproject(c, x, w, self.role)
            .expect("iterate layout must match the model")
    }

    fn quad_and_backproject(
        &self,
        z: &BlockVector,
        coeff: &(dyn Fn(usize, f64) -> f64 + Sync),
    ) -> (Vec<f64>, BlockVector) {
        let (x, w) = self.pair(z);
        self.model.intensities_and_gradient(x, w, self.role, coeff)
    }

    fn sum_norm_bound(&self) -> Option<f64> {
        Some(measurement_norm_bound(self.model, self.partner, self.role))
    }

    fn dense_sum(&self) -> Option<Result<DMatrix<C64>>> {
        let (l, n) = self.layout();
        if l * n * n > DENSE_LIMIT {
            return Some(Err(Error::TooLarge {
                dim: l * n * n,
                limit: DENSE_LIMIT,
            }));
        }
        Some(dense_measurement_sum(self.model, self.partner, self.role))
    }
}

/// `max_ℓ λ_ℓ^{-2} ‖F_ℓ‖² · max_p Σ_m |partner_ℓ|²` over the shifted positions.
pub fn measurement_norm_bound(model: &PtychoModel, partner: &BlockVector, role: Role) -> f64 {
    let overlap = model.max_overlap(partner, role);
    (0..model.channels())
        .map(|l| {
            let f = model.plan().spectral_norm(l);
            model.channel_weights()[l] * f * f * overlap[l]
        })
        .fold(0.0, f64::max)
}

/// Step bound `B(w)` for the object subproblem with probe `w`; `alpha = α_T + α_S‖K‖`.
pub fn bound_b_object(model: &PtychoModel, w: &BlockVector, alpha: f64) -> Result<f64> {
    model.check_stack(w)?;
    Ok(measurement_norm_bound(model, w, Role::Object) + alpha)
}

/// Step bound `B(x)` for the probe subproblem with object `x`; `beta = β_T + β_S‖K‖`.
pub fn bound_b_window(model: &PtychoModel, x: &BlockVector, beta: f64) -> Result<f64> {
    model.check_stack(x)?;
    Ok(measurement_norm_bound(model, x, Role::Window) + beta)
}
