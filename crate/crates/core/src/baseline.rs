//! Ptychographical information multiplexing (PIM), an ePIE-style reference method.
//!
//! For each shift the channel spectra are rescaled so that the total
//! intensity `Σ_ℓ λ_ℓ^{-2}|Ψ_ℓ|²` matches the measurement, and the change is
//! propagated back with `F^*/n²` (the exact inverse for the first channel, an
//! approximate one for the scaled transforms). The object and, in blind mode,
//! the probe are then corrected with the usual ePIE weights. There is no
//! step-size theory behind these updates.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::block::{BlockVector, C64};
use crate::error::{Error, Result};
use crate::forward::{PtychoModel, Rect};

/// Guard for the intensity in the amplitude projection.
pub const INTENSITY_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftOrder {
    Sequential,
    /// A fresh permutation per sweep drawn from the seed.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PimConfig {
    /// Step size `α`.
    pub alpha: f64,
    pub sweeps: usize,
    /// Also update the probe.
    pub blind: bool,
    pub order: ShiftOrder,
    pub seed: u64,
    /// `ε` of the reported `L_ε`.
    pub eps: f64,
}

impl Default for PimConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            sweeps: 1000,
            blind: false,
            order: ShiftOrder::Sequential,
            seed: 0,
            eps: 1e-8,
        }
    }
}

impl PimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "PIM step {} must be > 0",
                self.alpha
            )));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "eps = {} must be > 0",
                self.eps
            )));
        }
        Ok(())
    }

    /// Shift visiting order of sweep `sweep` (0-based).
    pub fn shift_order(&self, sweep: usize, count: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..count).collect();
        if self.order == ShiftOrder::Random {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(sweep as u64);
            order.shuffle(&mut rng);
        }
        order
    }
}

fn max_abs_sqr(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max)
}

/// One pass over the shifts in `order`, updating `z` (and `w` when blind) in place.
pub fn pim_sweep(
    model: &PtychoModel,
    y: &[f64],
    z: &mut BlockVector,
    w: &mut BlockVector,
    cfg: &PimConfig,
    order: &[usize],
) -> Result<()> {
    cfg.validate()?;
    model.check_stack(z)?;
    model.check_stack(w)?;
    if y.len() != model.measurement_count() {
        return Err(Error::Shape(format!(
            "{} intensities for {} measurements",
            y.len(),
            model.measurement_count()
        )));
    }
    let n = model.side();
    let d = n * n;
    let inv_d = 1.0 / d as f64;
    let shifts = model.shifts().shifts();
    for &i in order {
        let m = *shifts
            .get(i)
            .ok_or_else(|| Error::InvalidParameter(format!("shift index {i} out of range")))?;
        let (q, spectra) = model.shift_forward(z, w, m);
        let yi = &y[i * d..(i + 1) * d];
        let gain: Vec<f64> = q
            .iter()
            .zip(yi)
            .map(|(&qk, &yk)| yk.sqrt() / qk.max(INTENSITY_FLOOR).sqrt() - 1.0)
            .collect();
        // shifts are nonnegative, so the probe overlaps rows m.0.. and columns m.1..
        let (r0, c0) = (m.0 as usize, m.1 as usize);
        let ov = Rect {
            r0,
            r1: n,
            c0,
            c1: n,
        };
        for (l, spec) in spectra.into_iter().enumerate() {
            let Some(mut spec) = spec else { continue };
            for (s, g) in spec.iter_mut().zip(&gain) {
                *s *= g;
            }
            let dpsi = model.plan().adjoint(l, &spec, ov);
            let w_scale = max_abs_sqr(w.block(l));
            let z_scale = max_abs_sqr(z.block(l));
            let z_old: Vec<C64> = if cfg.blind {
                window_cut(z.block(l), n, ov)
            } else {
                Vec::new()
            };
            if w_scale > 0.0 {
                let a = cfg.alpha * inv_d / w_scale;
                let wl = w.block(l).to_vec();
                let zl = z.block_mut(l);
                for p_r in ov.r0..ov.r1 {
                    for p_c in ov.c0..ov.c1 {
                        let wv = wl[(p_r - r0) * n + p_c - c0];
                        zl[p_r * n + p_c] += wv.conj() * dpsi[p_r * n + p_c] * a;
                    }
                }
            }
            if cfg.blind && z_scale > 0.0 {
                let a = cfg.alpha * inv_d / z_scale;
                let width = ov.c1 - ov.c0;
                let wl = w.block_mut(l);
                for p_r in ov.r0..ov.r1 {
                    for p_c in ov.c0..ov.c1 {
                        let zv = z_old[(p_r - ov.r0) * width + p_c - ov.c0];
                        wl[(p_r - r0) * n + p_c - c0] += zv.conj() * dpsi[p_r * n + p_c] * a;
                    }
                }
            }
        }
    }
    Ok(())
}

fn window_cut(block: &[C64], n: usize, r: Rect) -> Vec<C64> {
    (r.r0..r.r1)
        .flat_map(|row| block[row * n + r.c0..row * n + r.c1].iter().copied())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PimRecord {
    /// 1-based sweep index.
    pub sweep: usize,
    /// `L_ε` after the sweep.
    pub l_eps: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PimRun {
    pub z: BlockVector,
    pub w: BlockVector,
    /// `L_ε` at the start.
    pub l_eps0: f64,
    pub records: Vec<PimRecord>,
}

fn l_eps(model: &PtychoModel, y: &[f64], z: &BlockVector, w: &BlockVector, eps: f64) -> f64 {
    model
        .intensities(z, w)
        .iter()
        .zip(y)
        .map(|(&q, &yj)| ((q.max(0.0) + eps).sqrt() - (yj + eps).sqrt()).powi(2))
        .sum()
}

/// Runs `cfg.sweeps` sweeps from `(z0, w0)`.
pub fn pim_reconstruct(
    model: &PtychoModel,
    y: &[f64],
    z0: &BlockVector,
    w0: &BlockVector,
    cfg: &PimConfig,
) -> Result<PimRun> {
    pim_reconstruct_with(model, y, z0, w0, cfg, |_, _, _| {})
}

/// [`pim_reconstruct`] with an observer called after every sweep with `(record, z, w)`.
pub fn pim_reconstruct_with<F>(
    model: &PtychoModel,
    y: &[f64],
    z0: &BlockVector,
    w0: &BlockVector,
    cfg: &PimConfig,
    mut observe: F,
) -> Result<PimRun>
where
    F: FnMut(&PimRecord, &BlockVector, &BlockVector),
{
    cfg.validate()?;
    model.check_stack(z0)?;
    model.check_stack(w0)?;
    let (mut z, mut w) = (z0.clone(), w0.clone());
    let l_eps0 = l_eps(model, y, &z, &w, cfg.eps);
    let mut records = Vec::with_capacity(cfg.sweeps);
    for s in 0..cfg.sweeps {
        let order = cfg.shift_order(s, model.shifts().len());
        pim_sweep(model, y, &mut z, &mut w, cfg, &order)?;
        if !(z.is_finite() && w.is_finite()) {
            return Err(Error::NonFinite {
                what: "PIM iterate",
                step: s + 1,
            });
        }
        let rec = PimRecord {
            sweep: s + 1,
            l_eps: l_eps(model, y, &z, &w, cfg.eps),
        };
        observe(&rec, &z, &w);
        records.push(rec);
    }
    Ok(PimRun {
        z,
        w,
        l_eps0,
        records,
    })
}
