//! Alternating amplitude flow for unknown object and probe.
//!
//! Each outer iteration `t` takes `I_z` object steps on
//! `𝔍(·, w^{t−1})` with `μ_c = 1/B(w^{t−1})`, then `I_w` probe steps on
//! `𝔍(z^t, ·)` with `ν_c = 1/B(z^t)`, where
//!
//! ```text
//! 𝔍(z, w) = L_ε(z; w) + α_T T(z) + α_S S(z) + β_T T(w) + β_S S(w).
//! ```

use serde::{Deserialize, Serialize};

use super::family::{bound_b_object, bound_b_window, PtychoFamily};
use super::ReconConfig;
use crate::block::BlockVector;
use crate::error::{Error, Result};
use crate::forward::{PtychoModel, Role};
use crate::objective::{eval_s, eval_t, AmplitudeObjective, RegularizerWeights};
use crate::optimizer::{descend_with, sufficient_decrease, Objective, DECREASE_SLACK};

/// One object or probe gradient step of the alternating scheme.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlindRecord {
    /// Outer iteration `t`, 1-based.
    pub outer: usize,
    /// Step index within the phase, 1-based.
    pub sub: usize,
    /// Which variable moved.
    pub var: Role,
    /// `𝔍` after the step.
    pub value: f64,
    /// `L_ε` after the step.
    pub l_eps: f64,
    /// Squared gradient norm at the point the step was taken from.
    pub grad_norm_sq: f64,
    pub step: f64,
    pub trials: usize,
    /// Minimal step of the phase and the bound it came from.
    pub mu_c: f64,
    pub bound: f64,
    /// `‖w‖²` after the step.
    pub window_energy: f64,
}

/// Iterates, counters and trace of a blind run; enough to resume it exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlindState {
    pub z: BlockVector,
    pub w: BlockVector,
    /// Completed outer iterations.
    pub completed: usize,
    /// `𝔍(z⁰, w⁰)`.
    pub j0: f64,
    pub records: Vec<BlindRecord>,
}

fn regularizer(v: &BlockVector, w: &RegularizerWeights) -> Result<f64> {
    let mut r = w.tikhonov * eval_t(v);
    if w.smoothness != 0.0 {
        r += w.smoothness * eval_s(v, &w.kappa)?;
    }
    Ok(r)
}

struct Setup {
    object: RegularizerWeights,
    window: RegularizerWeights,
    alpha: f64,
    beta: f64,
}

fn setup(model: &PtychoModel, y: &[f64], cfg: &ReconConfig) -> Result<Setup> {
    cfg.validate()?;
    super::check_data(model, y)?;
    let l = model.channels();
    Ok(Setup {
        object: cfg.object_weights(l)?,
        window: cfg.window_weights(l)?,
        alpha: cfg.alpha(l)?,
        beta: cfg.beta(l)?,
    })
}

/// Initial state with `𝔍(z⁰, w⁰)` evaluated.
pub fn blind_start(
    model: &PtychoModel,
    y: &[f64],
    z0: &BlockVector,
    w0: &BlockVector,
    cfg: &ReconConfig,
) -> Result<BlindState> {
    let s = setup(model, y, cfg)?;
    model.check_stack(z0)?;
    model.check_stack(w0)?;
    let family = PtychoFamily::new(model, w0, Role::Object)?;
    let obj =
        AmplitudeObjective::new(&family, y, s.object)?.with_offset(regularizer(w0, &s.window)?);
    let j0 = obj.value(z0);
    if !j0.is_finite() {
        return Err(Error::NonFinite {
            what: "objective",
            step: 0,
        });
    }
    Ok(BlindState {
        z: z0.clone(),
        w: w0.clone(),
        completed: 0,
        j0,
        records: Vec::new(),
    })
}

/// Runs `outer` more outer iterations on `state`.
///
/// `observe` sees every step record with the current `(z, w)`. With checks
/// enabled, a violated certificate aborts with the full state attached.
pub fn blind_advance<F>(
    model: &PtychoModel,
    y: &[f64],
    state: &mut BlindState,
    cfg: &ReconConfig,
    outer: usize,
    mut observe: F,
) -> Result<()>
where
    F: FnMut(&BlindRecord, &BlockVector, &BlockVector),
{
    let s = setup(model, y, cfg)?;
    let opts = cfg.descent_options();
    for _ in 0..outer {
        let t = state.completed + 1;
        let first_new = state.records.len();

        let bound = bound_b_object(model, &state.w, s.alpha)?;
        let mu_c = 1.0 / bound;
        let w_reg = regularizer(&state.w, &s.window)?;
        let w_energy = state.w.norm_sqr();
        let family = PtychoFamily::new(model, &state.w, Role::Object)?;
        let obj = AmplitudeObjective::new(&family, y, s.object.clone())?.with_offset(w_reg);
        let mut fresh = Vec::with_capacity(cfg.object_steps);
        let run = descend_with(
            &obj,
            &state.z,
            cfg.object_steps,
            cfg.step_rule(mu_c)?,
            opts,
            |rec, z| {
                let l_eps = rec.value - w_reg - regularizer(z, &s.object).unwrap_or(f64::NAN);
                let r = BlindRecord {
                    outer: t,
                    sub: rec.t,
                    var: Role::Object,
                    value: rec.value,
                    l_eps,
                    grad_norm_sq: rec.grad_norm_sq,
                    step: rec.step,
                    trials: rec.trials,
                    mu_c,
                    bound,
                    window_energy: w_energy,
                };
                observe(&r, z, &state.w);
                fresh.push(r);
            },
        );
        let (z_new, _) = run.map_err(|e| certificate_error(e, state))?;
        state.z = z_new;
        state.records.extend(fresh);

        let bound = bound_b_window(model, &state.z, s.beta)?;
        let nu_c = 1.0 / bound;
        let z_reg = regularizer(&state.z, &s.object)?;
        let family = PtychoFamily::new(model, &state.z, Role::Window)?;
        let obj = AmplitudeObjective::new(&family, y, s.window.clone())?.with_offset(z_reg);
        let mut fresh = Vec::with_capacity(cfg.window_steps);
        let run = descend_with(
            &obj,
            &state.w,
            cfg.window_steps,
            cfg.step_rule(nu_c)?,
            opts,
            |rec, w| {
                let l_eps = rec.value - z_reg - regularizer(w, &s.window).unwrap_or(f64::NAN);
                let r = BlindRecord {
                    outer: t,
                    sub: rec.t,
                    var: Role::Window,
                    value: rec.value,
                    l_eps,
                    grad_norm_sq: rec.grad_norm_sq,
                    step: rec.step,
                    trials: rec.trials,
                    mu_c: nu_c,
                    bound,
                    window_energy: w.norm_sqr(),
                };
                observe(&r, &state.z, w);
                fresh.push(r);
            },
        );
        let (w_new, _) = run.map_err(|e| certificate_error(e, state))?;
        state.w = w_new;
        state.records.extend(fresh);
        state.completed = t;

        if cfg.checks_enabled() {
            let prev = if first_new == 0 {
                state.j0
            } else {
                state.records[first_new - 1].value
            };
            if let Err(msg) = check_records(&state.records[first_new..], prev, state.j0, cfg) {
                return Err(Error::BlindCertificate {
                    message: format!("outer iteration {t}: {msg}"),
                    state: Box::new(state.clone()),
                });
            }
        }
    }
    Ok(())
}

fn certificate_error(e: Error, state: &BlindState) -> Error {
    match e {
        Error::Certificate(message) => Error::BlindCertificate {
            message,
            state: Box::new(state.clone()),
        },
        other => other,
    }
}

/// Per-record certificate checks against the previous value `prev`.
fn check_records(
    records: &[BlindRecord],
    mut prev: f64,
    j0: f64,
    cfg: &ReconConfig,
) -> std::result::Result<(), String> {
    let tau_pow = cfg.tau.powi(-(cfg.trials as i32));
    let ceiling = |w: f64| {
        if cfg.line_search {
            tau_pow / w
        } else {
            1.0 / w
        }
    };
    for r in records {
        if !sufficient_decrease(prev, r.value, r.step, r.grad_norm_sq, DECREASE_SLACK) {
            return Err(format!(
                "{:?} step {}: value went from {prev:e} to {:e} (step {:e}, |grad|^2 {:e})",
                r.var, r.sub, r.value, r.step, r.grad_norm_sq
            ));
        }
        let (weight, name) = match r.var {
            Role::Object => (cfg.alpha_t, "alpha_t"),
            Role::Window => (cfg.beta_t, "beta_t"),
        };
        if weight > 0.0 && r.step > ceiling(weight) {
            return Err(format!(
                "{:?} step {}: step {:e} exceeds tau^-N/{name} = {:e}",
                r.var,
                r.sub,
                r.step,
                ceiling(weight)
            ));
        }
        if (r.mu_c * r.bound - 1.0).abs() > 4.0 * f64::EPSILON {
            return Err(format!(
                "minimal step {:e} is not 1/B for B = {:e}",
                r.mu_c, r.bound
            ));
        }
        if cfg.beta_t > 0.0 && cfg.beta_t * r.window_energy > j0 * (1.0 + DECREASE_SLACK) {
            return Err(format!(
                "probe energy {:e} exceeds J0/beta_t = {:e}",
                r.window_energy,
                j0 / cfg.beta_t
            ));
        }
        prev = r.value;
    }
    Ok(())
}

/// Checks every certificate on a completed trace: sufficient decrease and
/// monotonicity across all steps, step ceilings `τ^{−N}/α_T` and `τ^{−N}/β_T`,
/// probe energy `β_T‖w‖² ≤ 𝔍⁰`, `μ_c·B = 1`, and the telescoping budget
/// `Σ μ‖∇‖² ≤ 𝔍⁰`.
pub fn check_blind_certificates(state: &BlindState, cfg: &ReconConfig) -> Result<()> {
    check_records(&state.records, state.j0, state.j0, cfg).map_err(Error::Certificate)?;
    let spent: f64 = state.records.iter().map(|r| r.step * r.grad_norm_sq).sum();
    if spent > state.j0 * (1.0 + DECREASE_SLACK) + DECREASE_SLACK {
        return Err(Error::Certificate(format!(
            "telescoping budget {spent:e} exceeds J0 = {:e}",
            state.j0
        )));
    }
    Ok(())
}

/// Runs the full alternating scheme for `cfg.iterations` outer iterations.
pub fn blind_af(
    model: &PtychoModel,
    y: &[f64],
    z0: &BlockVector,
    w0: &BlockVector,
    cfg: &ReconConfig,
) -> Result<BlindState> {
    blind_af_with(model, y, z0, w0, cfg, |_, _, _| {})
}

/// [`blind_af`] with a per-step observer.
pub fn blind_af_with<F>(
    model: &PtychoModel,
    y: &[f64],
    z0: &BlockVector,
    w0: &BlockVector,
    cfg: &ReconConfig,
    observe: F,
) -> Result<BlindState>
where
    F: FnMut(&BlindRecord, &BlockVector, &BlockVector),
{
    let mut state = blind_start(model, y, z0, w0, cfg)?;
    blind_advance(model, y, &mut state, cfg, cfg.iterations, observe)?;
    Ok(state)
}

/// Returns `(min_t s_t, bound)` with
/// `s_t = max{min_i ‖∇_z 𝔍‖², min_j ‖∇_w 𝔍‖²}` and
/// `bound = [max(1/α_T, 1/β_T)·𝔍⁰²·max_ℓ λ_ℓ^{-2}‖F_ℓ‖² + 𝔍⁰·max(α, β)] / (T·min(I_z, I_w))`.
pub fn rate_certificate(
    state: &BlindState,
    cfg: &ReconConfig,
    model: &PtychoModel,
) -> Result<(f64, f64)> {
    if !(cfg.alpha_t > 0.0 && cfg.beta_t > 0.0) {
        return Err(Error::InvalidParameter(
            "the rate certificate needs alpha_t > 0 and beta_t > 0".into(),
        ));
    }
    if state.completed == 0 {
        return Err(Error::Empty("blind trace"));
    }
    let mut min_s = f64::INFINITY;
    for t in 1..=state.completed {
        let (mut gz, mut gw, mut nz, mut nw) = (f64::INFINITY, f64::INFINITY, 0, 0);
        for r in state.records.iter().filter(|r| r.outer == t) {
            match r.var {
                Role::Object => {
                    gz = gz.min(r.grad_norm_sq);
                    nz += 1;
                }
                Role::Window => {
                    gw = gw.min(r.grad_norm_sq);
                    nw += 1;
                }
            }
        }
        if nz != cfg.object_steps || nw != cfg.window_steps {
            return Err(Error::Certificate(format!(
                "incomplete trace at outer iteration {t}: {nz} object and {nw} probe steps"
            )));
        }
        min_s = min_s.min(gz.max(gw));
    }
    let l = model.channels();
    let f_max = (0..l)
        .map(|i| model.channel_weights()[i] * model.plan().spectral_norm(i).powi(2))
        .fold(0.0, f64::max);
    let (alpha, beta) = (cfg.alpha(l)?, cfg.beta(l)?);
    let j0 = state.j0;
    let numer = (1.0 / cfg.alpha_t).max(1.0 / cfg.beta_t) * j0 * j0 * f_max + j0 * alpha.max(beta);
    let denom = state.completed as f64 * cfg.object_steps.min(cfg.window_steps) as f64;
    Ok((min_s, numer / denom))
}
