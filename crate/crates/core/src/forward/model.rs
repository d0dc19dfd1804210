use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dft::{Rect, ScaledDftPlan};
use super::WavelengthSpec;
use crate::block::{BlockVector, C64};
use crate::error::{Error, Result};

/// Integer probe shift `(row, col)`.
pub type Shift = (i64, i64);

/// Which argument of the bilinear measurement map is the variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Variable is the object, partner is the probe (`z*Q^w z`).
    Object,
    /// Variable is the probe, partner is the object (`w*Q^x w`).
    Window,
}

impl Role {
    pub fn other(self) -> Self {
        match self {
            Role::Object => Role::Window,
            Role::Window => Role::Object,
        }
    }
}

/// Ordered, duplicate-free probe shifts that keep a `δ × δ` probe inside the grid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftSet {
    side: usize,
    probe_side: usize,
    shifts: Vec<Shift>,
}

impl ShiftSet {
    pub fn new(side: usize, probe_side: usize, shifts: Vec<Shift>) -> Result<Self> {
        if probe_side == 0 || probe_side > side {
            return Err(Error::InvalidParameter(format!(
                "probe side {probe_side} must lie in 1..={side}"
            )));
        }
        if shifts.is_empty() {
            return Err(Error::Empty("shift set"));
        }
        let max = (side - probe_side) as i64;
        for (i, &(r, c)) in shifts.iter().enumerate() {
            if r < 0 || c < 0 || r > max || c > max {
                return Err(Error::ShiftOutOfRange(r, c));
            }
            if shifts[..i].contains(&(r, c)) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate shift ({r}, {c})"
                )));
            }
        }
        Ok(Self {
            side,
            probe_side,
            shifts,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn probe_side(&self) -> usize {
        self.probe_side
    }

    pub fn shifts(&self) -> &[Shift] {
        &self.shifts
    }

    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }
}

/// Intensities `y_{m,k}`, stored shift-major: entry `j = i·n² + k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementStack {
    shifts: usize,
    side: usize,
    data: Vec<f64>,
}

impl MeasurementStack {
    pub fn new(shifts: usize, side: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != shifts * side * side {
            return Err(Error::Shape(format!(
                "{} intensities for {shifts} shifts of {side}x{side}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "intensity {v} is not a finite nonnegative value"
            )));
        }
        Ok(Self { shifts, side, data })
    }

    pub fn shift_count(&self) -> usize {
        self.shifts
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Diffraction pattern of shift `i`.
    pub fn pattern(&self, i: usize) -> &[f64] {
        let d = self.side * self.side;
        &self.data[i * d..(i + 1) * d]
    }

    pub fn get(&self, i: usize, row: usize, col: usize) -> f64 {
        self.data[(i * self.side + row) * self.side + col]
    }
}

/// Object-grid rectangle where the shifted probe overlaps the grid.
fn overlap(n: usize, m: Shift) -> Rect {
    let n_i = n as i64;
    let lo = |s: i64| s.max(0) as usize;
    let hi = |s: i64| (n_i + s.min(0)).max(0) as usize;
    Rect {
        r0: lo(m.0),
        r1: hi(m.0),
        c0: lo(m.1),
        c1: hi(m.1),
    }
}

fn check_shift(n: usize, m: Shift) -> Result<()> {
    let n_i = n as i64;
    if m.0.abs() >= n_i || m.1.abs() >= n_i {
        Err(Error::ShiftOutOfRange(m.0, m.1))
    } else {
        Ok(())
    }
}

/// `ψ[p] = x[p]·w[p − m]` on `rect`, written into `out` (zero elsewhere).
/// Returns the bounding box of the nonzero entries.
fn fill_exit_wave(x: &[C64], w: &[C64], n: usize, m: Shift, rect: Rect, out: &mut [C64]) -> Rect {
    let mut bbox = Rect {
        r0: n,
        r1: 0,
        c0: n,
        c1: 0,
    };
    for p_r in rect.r0..rect.r1 {
        let a_r = (p_r as i64 - m.0) as usize;
        for p_c in rect.c0..rect.c1 {
            let a_c = (p_c as i64 - m.1) as usize;
            let v = x[p_r * n + p_c] * w[a_r * n + a_c];
            out[p_r * n + p_c] = v;
            if v.re != 0.0 || v.im != 0.0 {
                bbox.r0 = bbox.r0.min(p_r);
                bbox.r1 = bbox.r1.max(p_r + 1);
                bbox.c0 = bbox.c0.min(p_c);
                bbox.c1 = bbox.c1.max(p_c + 1);
            }
        }
    }
    bbox
}

/// Exit wave `x_ℓ[p]·w_ℓ[p − m]` with the probe cut at the grid boundary.
pub fn exit_wave(x: &[C64], w: &[C64], side: usize, m: Shift) -> Result<Vec<C64>> {
    let d = side * side;
    if x.len() != d || w.len() != d {
        return Err(Error::Shape(format!(
            "exit wave needs two {side}x{side} grids, got lengths {} and {}",
            x.len(),
            w.len()
        )));
    }
    check_shift(side, m)?;
    let mut out = vec![C64::new(0.0, 0.0); d];
    fill_exit_wave(x, w, side, m, overlap(side, m), &mut out);
    Ok(out)
}

/// Gradient contribution of one shift: `(channel, rect in variable coordinates, values)`.
type Patch = (usize, Rect, Vec<C64>);

/// Forward model for a fixed wavelength set and scan.
#[derive(Clone, Debug)]
pub struct PtychoModel {
    spec: WavelengthSpec,
    shifts: ShiftSet,
    plan: ScaledDftPlan,
    weights: Vec<f64>,
}

impl PtychoModel {
    pub fn new(spec: WavelengthSpec, shifts: ShiftSet) -> Self {
        let plan = ScaledDftPlan::new(shifts.side(), &spec.ratios());
        let weights = spec.weights();
        Self {
            spec,
            shifts,
            plan,
            weights,
        }
    }

    pub fn spec(&self) -> &WavelengthSpec {
        &self.spec
    }

    pub fn shifts(&self) -> &ShiftSet {
        &self.shifts
    }

    pub fn plan(&self) -> &ScaledDftPlan {
        &self.plan
    }

    pub fn side(&self) -> usize {
        self.shifts.side()
    }

    pub fn channels(&self) -> usize {
        self.spec.len()
    }

    /// `λ_ℓ^{-2}`.
    pub fn channel_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total number of intensities `|M|·n²`.
    pub fn measurement_count(&self) -> usize {
        self.shifts.len() * self.side() * self.side()
    }

    pub fn check_stack(&self, v: &BlockVector) -> Result<()> {
        if v.blocks() != self.channels() || v.side() != self.side() {
            return Err(Error::Shape(format!(
                "stack is {}x{}x{}, model expects {}x{}x{}",
                v.blocks(),
                v.side(),
                v.side(),
                self.channels(),
                self.side(),
                self.side()
            )));
        }
        Ok(())
    }

    /// All intensities `y_{m,k}` for object `x` and probe `w`.
    pub fn simulate(&self, x: &BlockVector, w: &BlockVector) -> Result<MeasurementStack> {
        self.check_stack(x)?;
        self.check_stack(w)?;
        let mut data = self.intensities(x, w);
        // clear the sign of exact zeros so that stored data are canonical
        data.iter_mut().for_each(|v| *v = v.max(0.0));
        MeasurementStack::new(self.shifts.len(), self.side(), data)
    }

    /// Flat intensities without shape checks; callers guarantee layouts.
    pub fn intensities(&self, x: &BlockVector, w: &BlockVector) -> Vec<f64> {
        let per_shift: Vec<Vec<f64>> = self
            .shifts
            .shifts()
            .par_iter()
            .map(|&m| self.shift_forward(x, w, m).0)
            .collect();
        per_shift.concat()
    }

    /// Intensities together with `Σ_{m,k} coeff(j, y_j) Q_{m,k} v` where `v`
    /// is the argument selected by `role`.
    pub fn intensities_and_gradient(
        &self,
        x: &BlockVector,
        w: &BlockVector,
        role: Role,
        coeff: &(dyn Fn(usize, f64) -> f64 + Sync),
    ) -> (Vec<f64>, BlockVector) {
        let d = self.side() * self.side();
        let partner_supports = self.supports(match role {
            Role::Object => w,
            Role::Window => x,
        });
        let results: Vec<(Vec<f64>, Vec<Patch>)> = self
            .shifts
            .shifts()
            .par_iter()
            .enumerate()
            .map(|(i, &m)| {
                let (q, spectra) = self.shift_forward(x, w, m);
                let c: Vec<f64> = q
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| coeff(i * d + k, v))
                    .collect();
                let patches = self.shift_backward(x, w, m, role, &c, spectra, &partner_supports);
                (q, patches)
            })
            .collect();
        let mut values = Vec::with_capacity(self.measurement_count());
        let mut grad = BlockVector::zeros(self.channels(), self.side());
        for (q, patches) in results {
            values.extend(q);
            add_patches(&mut grad, patches);
        }
        (values, grad)
    }

    /// `Σ_{m,k} c_{m,k} Q_{m,k} v` for the argument selected by `role`.
    pub fn backproject(
        &self,
        c: &[f64],
        x: &BlockVector,
        w: &BlockVector,
        role: Role,
    ) -> Result<BlockVector> {
        self.check_stack(x)?;
        self.check_stack(w)?;
        if c.len() != self.measurement_count() {
            return Err(Error::Shape(format!(
                "{} coefficients for {} measurements",
                c.len(),
                self.measurement_count()
            )));
        }
        let d = self.side() * self.side();
        let partner_supports = self.supports(match role {
            Role::Object => w,
            Role::Window => x,
        });
        let results: Vec<Vec<Patch>> = self
            .shifts
            .shifts()
            .par_iter()
            .enumerate()
            .map(|(i, &m)| {
                let (_, spectra) = self.shift_forward(x, w, m);
                self.shift_backward(
                    x,
                    w,
                    m,
                    role,
                    &c[i * d..(i + 1) * d],
                    spectra,
                    &partner_supports,
                )
            })
            .collect();
        let mut grad = BlockVector::zeros(self.channels(), self.side());
        for patches in results {
            add_patches(&mut grad, patches);
        }
        Ok(grad)
    }

    /// Per-channel `max_p Σ_m |partner|²` over the positions the variable can occupy:
    /// `Σ_m |w_ℓ[p − m]|²` for the object role, `Σ_m |x_ℓ[a + m]|²` for the window role.
    pub fn max_overlap(&self, partner: &BlockVector, role: Role) -> Vec<f64> {
        let n = self.side();
        (0..self.channels())
            .map(|l| {
                let g = partner.block(l);
                let mut acc = vec![0.0; n * n];
                for &m in self.shifts.shifts() {
                    let ov = overlap(n, m);
                    for p_r in ov.r0..ov.r1 {
                        let a_r = (p_r as i64 - m.0) as usize;
                        for p_c in ov.c0..ov.c1 {
                            let a_c = (p_c as i64 - m.1) as usize;
                            match role {
                                Role::Object => acc[p_r * n + p_c] += g[a_r * n + a_c].norm_sqr(),
                                Role::Window => acc[a_r * n + a_c] += g[p_r * n + p_c].norm_sqr(),
                            }
                        }
                    }
                }
                acc.into_iter().fold(0.0, f64::max)
            })
            .collect()
    }

    fn supports(&self, v: &BlockVector) -> Vec<Rect> {
        (0..self.channels())
            .map(|l| Rect::support(v.block(l), self.side()))
            .collect()
    }

    /// Intensities of one shift and the channel spectra `F^ℓ ψ_ℓ`
    /// (`None` for channels whose exit wave vanishes).
    pub fn shift_forward(
        &self,
        x: &BlockVector,
        w: &BlockVector,
        m: Shift,
    ) -> (Vec<f64>, Vec<Option<Vec<C64>>>) {
        let n = self.side();
        let ov = overlap(n, m);
        let mut q = vec![0.0; n * n];
        let mut spectra = Vec::with_capacity(self.channels());
        let mut psi = vec![C64::new(0.0, 0.0); n * n];
        for l in 0..self.channels() {
            psi.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            let support = fill_exit_wave(x.block(l), w.block(l), n, m, ov, &mut psi);
            if support.is_empty() {
                spectra.push(None);
                continue;
            }
            let spec = self.plan.forward(l, &psi, support);
            let wl = self.weights[l];
            for (qk, s) in q.iter_mut().zip(&spec) {
                *qk += wl * s.norm_sqr();
            }
            spectra.push(Some(spec));
        }
        (q, spectra)
    }

    #[allow(clippy::too_many_arguments)]
    fn shift_backward(
        &self,
        x: &BlockVector,
        w: &BlockVector,
        m: Shift,
        role: Role,
        c: &[f64],
        spectra: Vec<Option<Vec<C64>>>,
        partner_supports: &[Rect],
    ) -> Vec<Patch> {
        let n = self.side();
        let ov = overlap(n, m);
        let mut patches = Vec::new();
        for (l, spec) in spectra.into_iter().enumerate() {
            let Some(mut spec) = spec else { continue };
            // partner support expressed in object coordinates
            let ps = partner_supports[l];
            let region = match role {
                Role::Object => ov.intersect(&shift_rect(ps, m)),
                Role::Window => ov.intersect(&ps),
            };
            if region.is_empty() {
                continue;
            }
            for (s, &ck) in spec.iter_mut().zip(c) {
                *s *= ck;
            }
            let phi = self.plan.adjoint(l, &spec, region);
            let wl = self.weights[l];
            let (xl, wv) = (x.block(l), w.block(l));
            let mut vals = Vec::with_capacity((region.r1 - region.r0) * (region.c1 - region.c0));
            for p_r in region.r0..region.r1 {
                let a_r = (p_r as i64 - m.0) as usize;
                for p_c in region.c0..region.c1 {
                    let a_c = (p_c as i64 - m.1) as usize;
                    let partner = match role {
                        Role::Object => wv[a_r * n + a_c],
                        Role::Window => xl[p_r * n + p_c],
                    };
                    vals.push(partner.conj() * phi[p_r * n + p_c] * wl);
                }
            }
            let target = match role {
                Role::Object => region,
                Role::Window => shift_rect(region, (-m.0, -m.1)),
            };
            patches.push((l, target, vals));
        }
        patches
    }
}

/// `r + m`, assuming the result stays within non-negative indices.
fn shift_rect(r: Rect, m: Shift) -> Rect {
    if r.is_empty() {
        return Rect {
            r0: 0,
            r1: 0,
            c0: 0,
            c1: 0,
        };
    }
    let mv = |v: usize, s: i64| (v as i64 + s).max(0) as usize;
    Rect {
        r0: mv(r.r0, m.0),
        r1: mv(r.r1, m.0),
        c0: mv(r.c0, m.1),
        c1: mv(r.c1, m.1),
    }
}

fn add_patches(grad: &mut BlockVector, patches: Vec<Patch>) {
    let n = grad.side();
    for (l, rect, vals) in patches {
        let block = grad.block_mut(l);
        let width = rect.c1 - rect.c0;
        for r in rect.r0..rect.r1 {
            let src = &vals[(r - rect.r0) * width..(r - rect.r0 + 1) * width];
            for (dst, v) in block[r * n + rect.c0..r * n + rect.c1].iter_mut().zip(src) {
                *dst += v;
            }
        }
    }
}
