//! Dense quadratic-form assembly of single measurements, for small test instances.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::model::{PtychoModel, Role, Shift};
use crate::block::{BlockVector, C64};
use crate::error::{Error, Result};
use crate::objective::DENSE_LIMIT;

/// One measurement `y_{m,k}` as an explicit Hermitian PSD matrix.
#[derive(Clone, Debug)]
pub struct QuadForm {
    /// `v*Qv` for the variable selected by the role.
    pub value: f64,
    /// Block-diagonal `Q` with rank-one blocks `λ_ℓ^{-2} a a*`.
    pub matrix: DMatrix<C64>,
}

/// Rank-one generator of block `ℓ`: for the object role
/// `a[p] = conj(w[p−m]) e^{+2πiρ k·p/n}`, for the window role
/// `v[a] = conj(x[a+m]) e^{+2πiρ k·a/n}`, zero where the partner index leaves the grid.
fn generator(
    partner: &[C64],
    n: usize,
    m: Shift,
    k: (usize, usize),
    rho: f64,
    role: Role,
) -> DVector<C64> {
    let ni = n as i64;
    let inside = |r: i64, c: i64| (0..ni).contains(&r) && (0..ni).contains(&c);
    DVector::from_fn(n * n, |idx, _| {
        let (r, c) = ((idx / n) as i64, (idx % n) as i64);
        let (pr, pc) = match role {
            Role::Object => (r - m.0, c - m.1),
            Role::Window => (r + m.0, c + m.1),
        };
        if !inside(pr, pc) {
            return C64::new(0.0, 0.0);
        }
        let phase = 2.0 * PI * rho * (k.0 as f64 * r as f64 + k.1 as f64 * c as f64) / n as f64;
        partner[(pr * ni + pc) as usize].conj() * C64::from_polar(1.0, phase)
    })
}

fn check_dense(model: &PtychoModel) -> Result<usize> {
    let dim = model.channels() * model.side() * model.side();
    if dim > DENSE_LIMIT {
        Err(Error::TooLarge {
            dim,
            limit: DENSE_LIMIT,
        })
    } else {
        Ok(dim)
    }
}

/// Dense `Q_{m,k}` in the given role and its value at the variable.
///
/// `x` and `w` are the object and probe; the partner of `role` defines the
/// matrix and the other stack is the point at which it is evaluated.
pub fn quad_form_oracle(
    model: &PtychoModel,
    x: &BlockVector,
    w: &BlockVector,
    m: Shift,
    k: (usize, usize),
    role: Role,
) -> Result<QuadForm> {
    let dim = check_dense(model)?;
    model.check_stack(x)?;
    model.check_stack(w)?;
    let n = model.side();
    if k.0 >= n || k.1 >= n {
        return Err(Error::InvalidParameter(format!(
            "frequency {k:?} outside [{n}]^2"
        )));
    }
    let (partner, var) = match role {
        Role::Object => (w, x),
        Role::Window => (x, w),
    };
    let d = n * n;
    let ratios = model.spec().ratios();
    let weights = model.channel_weights();
    let mut matrix = DMatrix::<C64>::zeros(dim, dim);
    for l in 0..model.channels() {
        let a = generator(partner.block(l), n, m, k, ratios[l], role);
        let block = &a * a.adjoint() * C64::new(weights[l], 0.0);
        matrix.view_mut((l * d, l * d), (d, d)).copy_from(&block);
    }
    let v = DVector::from_column_slice(var.as_slice());
    let value = (v.adjoint() * &matrix * &v)[(0, 0)].re;
    Ok(QuadForm { value, matrix })
}

/// Dense `Σ_{m,k} Q_{m,k}` for a fixed partner stack.
pub fn dense_measurement_sum(
    model: &PtychoModel,
    partner: &BlockVector,
    role: Role,
) -> Result<DMatrix<C64>> {
    let dim = check_dense(model)?;
    model.check_stack(partner)?;
    let n = model.side();
    let d = n * n;
    let ratios = model.spec().ratios();
    let weights = model.channel_weights();
    let mut sum = DMatrix::<C64>::zeros(dim, dim);
    for &m in model.shifts().shifts() {
        for k0 in 0..n {
            for k1 in 0..n {
                for l in 0..model.channels() {
                    let a = generator(partner.block(l), n, m, (k0, k1), ratios[l], role);
                    let block = &a * a.adjoint() * C64::new(weights[l], 0.0);
                    let mut view = sum.view_mut((l * d, l * d), (d, d));
                    view += block;
                }
            }
        }
    }
    Ok(sum)
}
