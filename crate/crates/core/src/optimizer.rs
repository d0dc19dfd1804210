//! Wirtinger gradient descent with constant or Armijo-Goldstein (AGA) steps.
//!
//! All gradients are Wirtinger gradients `∇_z f = (∂_z f)^*`. For a real-valued
//! `f`, the directional derivative along `u` is `2·Re⟨∇_z f(z), u⟩`, and the
//! update is `z⁺ = z − μ ∇_z f(z)`.
//!
//! The AGA tests the steps `μ_j = μ_c τ^{j−N}`, `j = 0..=N`, largest first, and
//! accepts the first one with `f(z − μ∇f) − f(z) ≤ −μ‖∇f‖²`. When `μ_c ≤ 1/B`
//! for a bound `B` on the Wirtinger Hessian, the last trial always succeeds.

use serde::{Deserialize, Serialize};

use crate::block::BlockVector;
use crate::error::{Error, Result};

/// Relative slack for floating-point decrease comparisons.
pub const DECREASE_SLACK: f64 = 1e-12;

/// A real-valued, nonnegative objective over a [`BlockVector`].
pub trait Objective {
    fn value(&self, z: &BlockVector) -> f64;

    /// Wirtinger gradient `(∂_z f)^*`, same layout as `z`.
    fn wgrad(&self, z: &BlockVector) -> BlockVector;

    /// Value and gradient together. Implementations that share work between the
    /// two should override this.
    fn value_and_wgrad(&self, z: &BlockVector) -> (f64, BlockVector) {
        (self.value(z), self.wgrad(z))
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn value(&self, z: &BlockVector) -> f64 {
        (**self).value(z)
    }
    fn wgrad(&self, z: &BlockVector) -> BlockVector {
        (**self).wgrad(z)
    }
    fn value_and_wgrad(&self, z: &BlockVector) -> (f64, BlockVector) {
        (**self).value_and_wgrad(z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum StepRule {
    Constant { mu_c: f64 },
    Aga { mu_c: f64, tau: f64, n: u32 },
}

impl StepRule {
    pub fn constant(mu_c: f64) -> Result<Self> {
        check_mu(mu_c)?;
        Ok(StepRule::Constant { mu_c })
    }

    pub fn aga(mu_c: f64, tau: f64, n: u32) -> Result<Self> {
        check_mu(mu_c)?;
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tau = {tau} not in (0, 1)"
            )));
        }
        Ok(StepRule::Aga { mu_c, tau, n })
    }

    pub fn mu_c(&self) -> f64 {
        match *self {
            StepRule::Constant { mu_c } | StepRule::Aga { mu_c, .. } => mu_c,
        }
    }

    /// Same rule with a different minimal step.
    pub fn with_mu_c(&self, mu_c: f64) -> Result<Self> {
        match *self {
            StepRule::Constant { .. } => Self::constant(mu_c),
            StepRule::Aga { tau, n, .. } => Self::aga(mu_c, tau, n),
        }
    }

    /// Largest step the rule can accept, `μ_c τ^{−N}`.
    pub fn max_step(&self) -> f64 {
        match *self {
            StepRule::Constant { mu_c } => mu_c,
            StepRule::Aga { mu_c, tau, n } => mu_c * tau.powi(-(n as i32)),
        }
    }
}

fn check_mu(mu_c: f64) -> Result<()> {
    if mu_c > 0.0 && mu_c.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "mu_c = {mu_c} must be positive and finite"
        )))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based step index `t`.
    pub t: usize,
    /// `f(z^t)` after the step.
    pub value: f64,
    /// `‖∇_z f(z^{t−1})‖²` at the point the step was taken from.
    pub grad_norm_sq: f64,
    /// Accepted step `μ_t`.
    pub step: f64,
    /// Number of AGA trials evaluated (1 for a constant rule).
    pub trials: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DescentTrace {
    /// `f(z^0)`.
    pub f0: f64,
    pub steps: Vec<StepRecord>,
}

impl DescentTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(self.f0).chain(self.steps.iter().map(|s| s.value))
    }

    pub fn final_value(&self) -> f64 {
        self.steps.last().map_or(self.f0, |s| s.value)
    }

    /// First step that violates `f(z^t) − f(z^{t−1}) ≤ −μ_t‖∇f‖²` beyond the
    /// relative slack, if any.
    pub fn first_decrease_violation(&self, slack: f64) -> Option<usize> {
        let mut prev = self.f0;
        for s in &self.steps {
            if !sufficient_decrease(prev, s.value, s.step, s.grad_norm_sq, slack) {
                return Some(s.t);
            }
            prev = s.value;
        }
        None
    }
}

/// The sufficient-decrease inequality with a slack relative to `max(1, f_prev)`.
pub fn sufficient_decrease(
    f_prev: f64,
    f_next: f64,
    step: f64,
    grad_norm_sq: f64,
    slack: f64,
) -> bool {
    f_next - f_prev <= -step * grad_norm_sq + slack * f_prev.abs().max(1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgaOutcome {
    pub step: f64,
    pub trials: usize,
    /// The accepted iterate `z − μ g`.
    pub next: BlockVector,
    /// `f` at the accepted iterate.
    pub next_value: f64,
}

/// Selects a step via AGA and returns `(μ, trials)`.
///
/// `g` must be the Wirtinger gradient of `obj` at `z`.
pub fn aga_select<O: Objective + ?Sized>(
    obj: &O,
    z: &BlockVector,
    g: &BlockVector,
    mu_c: f64,
    tau: f64,
    n: u32,
) -> Result<(f64, usize)> {
    let rule = StepRule::aga(mu_c, tau, n)?;
    let f_z = obj.value(z);
    let out = select_step(obj, z, f_z, g, g.norm_sqr(), &rule)?;
    Ok((out.step, out.trials))
}

/// Step selection given the already-evaluated `f(z)` and `‖g‖²`.
///
/// Trials above `μ_c` use the exact inequality; the final `μ_c` trial allows the
/// relative floating-point slack, since theory guarantees it.
pub fn select_step<O: Objective + ?Sized>(
    obj: &O,
    z: &BlockVector,
    f_z: f64,
    g: &BlockVector,
    g_norm_sq: f64,
    rule: &StepRule,
) -> Result<AgaOutcome> {
    let (mu_c, tau, n) = match *rule {
        StepRule::Constant { mu_c } => (mu_c, 0.5, 0),
        StepRule::Aga { mu_c, tau, n } => (mu_c, tau, n),
    };
    let mut last_step = mu_c;
    for j in 0..=n {
        let step = if j == n {
            mu_c
        } else {
            mu_c * tau.powi(j as i32 - n as i32)
        };
        last_step = step;
        let next = z.stepped(step, g);
        let f_next = obj.value(&next);
        if !f_next.is_finite() {
            if j == n {
                return Err(Error::NonFinite {
                    what: "objective",
                    step: 0,
                });
            }
            continue;
        }
        let slack = if j == n { DECREASE_SLACK } else { 0.0 };
        if sufficient_decrease(f_z, f_next, step, g_norm_sq, slack) {
            return Ok(AgaOutcome {
                step,
                trials: j as usize + 1,
                next,
                next_value: f_next,
            });
        }
        if matches!(rule, StepRule::Constant { .. }) {
            // a constant rule takes μ_c unconditionally; decrease is checked by the caller
            return Ok(AgaOutcome {
                step,
                trials: 1,
                next,
                next_value: f_next,
            });
        }
    }
    Err(Error::AgaExhausted {
        trials: n as usize + 1,
        last_step,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DescentOptions {
    /// Fail as soon as a step violates sufficient decrease.
    pub check: bool,
    /// Stop early once `‖∇f‖²` drops below this value.
    pub grad_tol: Option<f64>,
}

impl DescentOptions {
    pub fn checked() -> Self {
        Self {
            check: true,
            grad_tol: None,
        }
    }
}

/// Runs `steps` gradient steps from `z0`.
pub fn descend<O: Objective + ?Sized>(
    obj: &O,
    z0: &BlockVector,
    steps: usize,
    rule: StepRule,
) -> Result<(BlockVector, DescentTrace)> {
    descend_with(obj, z0, steps, rule, DescentOptions::checked(), |_, _| {})
}

/// [`descend`] with options and a per-step observer `(record, z^t)`.
pub fn descend_with<O, F>(
    obj: &O,
    z0: &BlockVector,
    steps: usize,
    rule: StepRule,
    opts: DescentOptions,
    mut observe: F,
) -> Result<(BlockVector, DescentTrace)>
where
    O: Objective + ?Sized,
    F: FnMut(&StepRecord, &BlockVector),
{
    let mut z = z0.clone();
    if steps == 0 {
        return Ok((
            z,
            DescentTrace {
                f0: obj.value(z0),
                steps: vec![],
            },
        ));
    }
    let (mut f, mut g) = obj.value_and_wgrad(&z);
    if !f.is_finite() {
        return Err(Error::NonFinite {
            what: "objective",
            step: 0,
        });
    }
    let mut trace = DescentTrace {
        f0: f,
        steps: Vec::with_capacity(steps),
    };
    for t in 1..=steps {
        if !g.is_finite() {
            return Err(Error::NonFinite {
                what: "gradient",
                step: t - 1,
            });
        }
        let g_norm_sq = g.norm_sqr();
        if let Some(tol) = opts.grad_tol {
            if g_norm_sq <= tol {
                break;
            }
        }
        let out = select_step(obj, &z, f, &g, g_norm_sq, &rule).map_err(|e| match e {
            Error::NonFinite { what, .. } => Error::NonFinite { what, step: t },
            other => other,
        })?;
        let record = StepRecord {
            t,
            value: out.next_value,
            grad_norm_sq: g_norm_sq,
            step: out.step,
            trials: out.trials,
        };
        if opts.check
            && !sufficient_decrease(f, out.next_value, out.step, g_norm_sq, DECREASE_SLACK)
        {
            return Err(Error::Certificate(format!(
                "step {t}: f went from {f:e} to {:e} with step {:e} and |grad|^2 {g_norm_sq:e}",
                out.next_value, out.step
            )));
        }
        z = out.next;
        observe(&record, &z);
        trace.steps.push(record);
        if t < steps || opts.grad_tol.is_some() {
            let (f_new, g_new) = obj.value_and_wgrad(&z);
            f = f_new;
            g = g_new;
        }
    }
    Ok((z, trace))
}

/// Returns `(min_t ‖∇f(z^t)‖², f0 / (μ_c (T+1)))` where `T + 1` is the number
/// of recorded gradients.
pub fn min_grad_certificate(trace: &DescentTrace, mu_c: f64, f0: f64) -> Result<(f64, f64)> {
    if trace.is_empty() {
        return Err(Error::Empty("descent trace"));
    }
    check_mu(mu_c)?;
    let lhs = trace
        .steps
        .iter()
        .map(|s| s.grad_norm_sq)
        .fold(f64::INFINITY, f64::min);
    let rhs = f0 / (mu_c * trace.len() as f64);
    Ok((lhs, rhs))
}
