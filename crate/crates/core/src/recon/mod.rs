//! Object, probe and blind reconstruction by amplitude flow.

mod blind;
mod family;
mod metrics;

pub use blind::{
    blind_advance, blind_af, blind_af_with, blind_start, check_blind_certificates,
    rate_certificate, BlindRecord, BlindState,
};
pub use family::{bound_b_object, bound_b_window, measurement_norm_bound, PtychoFamily};
pub use metrics::{global_phase_align, relative_error};

use serde::{Deserialize, Serialize};

use crate::block::BlockVector;
use crate::error::{Error, Result};
use crate::forward::{PtychoModel, Role};
use crate::objective::{k_matrix_norm, AmplitudeObjective, RegularizerWeights};
use crate::optimizer::{descend_with, DescentOptions, DescentTrace, StepRecord, StepRule};

/// Hyperparameters shared by all reconstructions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconConfig {
    pub eps: f64,
    /// Object Tikhonov weight `α_T`.
    pub alpha_t: f64,
    /// Object smoothness weight `α_S`.
    pub alpha_s: f64,
    /// Probe Tikhonov weight `β_T`.
    pub beta_t: f64,
    /// Probe smoothness weight `β_S`.
    pub beta_s: f64,
    /// Coupling weights `κ_ℓ` (length `L − 1`); all ones when absent.
    pub kappa: Option<Vec<f64>>,
    /// Outer iterations `T` (plain gradient steps for the non-blind problems).
    pub iterations: usize,
    /// Object steps per outer iteration `I_z`.
    pub object_steps: usize,
    /// Probe steps per outer iteration `I_w`.
    pub window_steps: usize,
    /// Use AGA instead of the constant step `μ_c`.
    pub line_search: bool,
    /// AGA decrease factor `τ`.
    pub tau: f64,
    /// AGA trial exponent `N`.
    pub trials: u32,
    /// Stop a descent early once `‖∇‖²` falls below this value.
    pub grad_tol: Option<f64>,
    /// Enforce certificates in optimized builds too; always on with debug assertions.
    pub check: bool,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            eps: 1e-8,
            alpha_t: 1e-2,
            alpha_s: 0.1,
            beta_t: 10.0,
            beta_s: 0.0,
            kappa: None,
            iterations: 1000,
            object_steps: 1,
            window_steps: 1,
            line_search: true,
            tau: 0.5,
            trials: 1,
            grad_tol: None,
            check: false,
        }
    }
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "eps = {} must be > 0",
                self.eps
            )));
        }
        for (name, v) in [
            ("alpha_t", self.alpha_t),
            ("alpha_s", self.alpha_s),
            ("beta_t", self.beta_t),
            ("beta_s", self.beta_s),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} must be nonnegative"
                )));
            }
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tau = {} not in (0, 1)",
                self.tau
            )));
        }
        if self.object_steps == 0 || self.window_steps == 0 {
            return Err(Error::InvalidParameter(
                "inner step counts must be >= 1".into(),
            ));
        }
        if let Some(k) = &self.kappa {
            if let Some(v) = k.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidParameter(format!(
                    "kappa entry {v} must be > 0"
                )));
            }
        }
        Ok(())
    }

    pub fn checks_enabled(&self) -> bool {
        self.check || cfg!(debug_assertions)
    }

    pub fn kappa_for(&self, channels: usize) -> Result<Vec<f64>> {
        let k = self
            .kappa
            .clone()
            .unwrap_or_else(|| vec![1.0; channels.saturating_sub(1)]);
        if k.len() + 1 != channels {
            return Err(Error::Shape(format!(
                "kappa has {} entries for {channels} wavelengths",
                k.len()
            )));
        }
        Ok(k)
    }

    /// Object regularizer `(ε, α_T, α_S, κ)`.
    pub fn object_weights(&self, channels: usize) -> Result<RegularizerWeights> {
        RegularizerWeights::new(
            self.eps,
            self.alpha_t,
            self.alpha_s,
            self.kappa_for(channels)?,
        )
    }

    /// Probe regularizer `(ε, β_T, β_S, κ)`.
    pub fn window_weights(&self, channels: usize) -> Result<RegularizerWeights> {
        RegularizerWeights::new(
            self.eps,
            self.beta_t,
            self.beta_s,
            self.kappa_for(channels)?,
        )
    }

    /// `α = α_T + α_S‖K‖`.
    pub fn alpha(&self, channels: usize) -> Result<f64> {
        Ok(self.alpha_t + self.alpha_s * k_matrix_norm(&self.kappa_for(channels)?))
    }

    /// `β = β_T + β_S‖K‖`.
    pub fn beta(&self, channels: usize) -> Result<f64> {
        Ok(self.beta_t + self.beta_s * k_matrix_norm(&self.kappa_for(channels)?))
    }

    pub fn step_rule(&self, mu_c: f64) -> Result<StepRule> {
        if self.line_search {
            StepRule::aga(mu_c, self.tau, self.trials)
        } else {
            StepRule::constant(mu_c)
        }
    }

    fn descent_options(&self) -> DescentOptions {
        DescentOptions {
            check: self.checks_enabled(),
            grad_tol: self.grad_tol,
        }
    }
}

/// Result of a non-blind reconstruction.
#[derive(Clone, Debug)]
pub struct NonblindRun {
    pub estimate: BlockVector,
    pub trace: DescentTrace,
    /// The bound `B` and minimal step `μ_c = 1/B` that were used.
    pub bound: f64,
    pub mu_c: f64,
}

fn check_data(model: &PtychoModel, y: &[f64]) -> Result<()> {
    if y.len() != model.measurement_count() {
        return Err(Error::Shape(format!(
            "{} intensities for a model with {} measurements",
            y.len(),
            model.measurement_count()
        )));
    }
    if let Some(v) = y.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "intensity {v} is not finite and nonnegative"
        )));
    }
    Ok(())
}

fn nonblind<F>(
    model: &PtychoModel,
    y: &[f64],
    partner: &BlockVector,
    start: &BlockVector,
    cfg: &ReconConfig,
    role: Role,
    observe: F,
) -> Result<NonblindRun>
where
    F: FnMut(&StepRecord, &BlockVector),
{
    cfg.validate()?;
    check_data(model, y)?;
    model.check_stack(start)?;
    let l = model.channels();
    let (weights, bound) = match role {
        Role::Object => (
            cfg.object_weights(l)?,
            bound_b_object(model, partner, cfg.alpha(l)?)?,
        ),
        Role::Window => (
            cfg.window_weights(l)?,
            bound_b_window(model, partner, cfg.beta(l)?)?,
        ),
    };
    if !(bound > 0.0) {
        return Err(Error::InvalidParameter(
            "step bound is zero: empty partner and no Tikhonov weight".into(),
        ));
    }
    let mu_c = 1.0 / bound;
    let family = PtychoFamily::new(model, partner, role)?;
    let obj = AmplitudeObjective::new(&family, y, weights)?;
    let (estimate, trace) = descend_with(
        &obj,
        start,
        cfg.iterations,
        cfg.step_rule(mu_c)?,
        cfg.descent_options(),
        observe,
    )?;
    Ok(NonblindRun {
        estimate,
        trace,
        bound,
        mu_c,
    })
}

/// Recovers the object for a known probe `w`, starting from `z0`.
pub fn nonblind_object(
    model: &PtychoModel,
    y: &[f64],
    w: &BlockVector,
    z0: &BlockVector,
    cfg: &ReconConfig,
) -> Result<NonblindRun> {
    nonblind(model, y, w, z0, cfg, Role::Object, |_, _| {})
}

/// [`nonblind_object`] with a per-step observer `(record, z^t)`.
pub fn nonblind_object_with<F>(
    model: &PtychoModel,
    y: &[f64],
    w: &BlockVector,
    z0: &BlockVector,
    cfg: &ReconConfig,
    observe: F,
) -> Result<NonblindRun>
where
    F: FnMut(&StepRecord, &BlockVector),
{
    nonblind(model, y, w, z0, cfg, Role::Object, observe)
}

/// Recovers the probe for a known object `x`, starting from `w0`.
pub fn nonblind_window(
    model: &PtychoModel,
    y: &[f64],
    x: &BlockVector,
    w0: &BlockVector,
    cfg: &ReconConfig,
) -> Result<NonblindRun> {
    nonblind(model, y, x, w0, cfg, Role::Window, |_, _| {})
}

/// [`nonblind_window`] with a per-step observer `(record, w^t)`.
pub fn nonblind_window_with<F>(
    model: &PtychoModel,
    y: &[f64],
    x: &BlockVector,
    w0: &BlockVector,
    cfg: &ReconConfig,
    observe: F,
) -> Result<NonblindRun>
where
    F: FnMut(&StepRecord, &BlockVector),
{
    nonblind(model, y, x, w0, cfg, Role::Window, observe)
}
