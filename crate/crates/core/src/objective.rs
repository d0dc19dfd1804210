//! The regularized amplitude loss
//!
//! ```text
//! J(z; ε, α_T, α_S) = L_ε(z) + α_T T(z) + α_S S(z)
//! L_ε(z) = Σ_j [√(z*Q_j z + ε) − √(y_j + ε)]²
//! T(z)   = ‖z‖²
//! S(z)   = Σ_ℓ κ_ℓ ‖z_{ℓ+1} − z_ℓ‖² = z*(K ⊗ I_d)z
//! ```
//!
//! over an abstract family of PSD quadratic measurements `z*Q_j z`, together
//! with exact Wirtinger gradients and the Hessian bound `B = ‖Σ Q_j‖ + α`,
//! `α = α_T + α_S ‖K‖`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::block::{BlockVector, C64};
use crate::error::{Error, Result};
use crate::optimizer::Objective;

/// Largest `d·L` for which dense matrices are assembled.
pub const DENSE_LIMIT: usize = 4096;

/// A family of PSD quadratic forms `z ↦ z*Q_j z` on block vectors.
pub trait QuadraticFamily: Sync {
    /// `(L, n)` of the block vectors the family acts on.
    fn layout(&self) -> (usize, usize);

    /// Number of measurements `J`.
    fn count(&self) -> usize;

    /// All `z*Q_j z`.
    fn quad_values(&self, z: &BlockVector) -> Vec<f64>;

    /// `Σ_j c_j Q_j z`.
    fn weighted_backproject(&self, z: &BlockVector, c: &[f64]) -> BlockVector;

    /// Quadratic values together with `Σ_j coeff(j, q_j) Q_j z`.
    ///
    /// Families that can compute both in one pass should override this.
    fn quad_and_backproject(
        &self,
        z: &BlockVector,
        coeff: &(dyn Fn(usize, f64) -> f64 + Sync),
    ) -> (Vec<f64>, BlockVector) {
        let q = self.quad_values(z);
        let c: Vec<f64> = q.iter().enumerate().map(|(j, &v)| coeff(j, v)).collect();
        let g = self.weighted_backproject(z, &c);
        (q, g)
    }

    /// An analytic upper bound on `‖Σ_j Q_j‖`, when the family knows one.
    fn sum_norm_bound(&self) -> Option<f64> {
        None
    }

    /// Dense `Σ_j Q_j`, when the family can assemble it.
    fn dense_sum(&self) -> Option<Result<DMatrix<C64>>> {
        None
    }
}

/// A quadratic family given by explicit Hermitian PSD matrices.
#[derive(Clone, Debug)]
pub struct DenseFamily {
    blocks: usize,
    side: usize,
    mats: Vec<DMatrix<C64>>,
}

impl DenseFamily {
    pub fn new(blocks: usize, side: usize, mats: Vec<DMatrix<C64>>) -> Result<Self> {
        let dim = blocks * side * side;
        if dim > DENSE_LIMIT {
            return Err(Error::TooLarge {
                dim,
                limit: DENSE_LIMIT,
            });
        }
        for m in &mats {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::Shape(format!(
                    "measurement matrix is {}x{}, expected {dim}x{dim}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(Self { blocks, side, mats })
    }

    pub fn matrices(&self) -> &[DMatrix<C64>] {
        &self.mats
    }
}

fn to_dvector(z: &BlockVector) -> DVector<C64> {
    DVector::from_column_slice(z.as_slice())
}

impl QuadraticFamily for DenseFamily {
    fn layout(&self) -> (usize, usize) {
        (self.blocks, self.side)
    }

    fn count(&self) -> usize {
        self.mats.len()
    }

    fn quad_values(&self, z: &BlockVector) -> Vec<f64> {
        let v = to_dvector(z);
        self.mats.iter().map(|q| v.dotc(&(q * &v)).re).collect()
    }

    fn weighted_backproject(&self, z: &BlockVector, c: &[f64]) -> BlockVector {
        let v = to_dvector(z);
        let mut acc = DVector::<C64>::zeros(v.len());
        for (q, &cj) in self.mats.iter().zip(c) {
            acc += (q * &v) * C64::new(cj, 0.0);
        }
        BlockVector::from_vec(self.blocks, self.side, acc.as_slice().to_vec()).expect("layout")
    }

    fn dense_sum(&self) -> Option<Result<DMatrix<C64>>> {
        let dim = self.blocks * self.side * self.side;
        let mut sum = DMatrix::<C64>::zeros(dim, dim);
        for q in &self.mats {
            sum += q;
        }
        Some(Ok(sum))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularizerWeights {
    pub eps: f64,
    pub tikhonov: f64,
    pub smoothness: f64,
    /// Coupling weights `κ_ℓ`, length `L − 1`.
    pub kappa: Vec<f64>,
}

impl RegularizerWeights {
    pub fn new(eps: f64, tikhonov: f64, smoothness: f64, kappa: Vec<f64>) -> Result<Self> {
        let w = Self {
            eps,
            tikhonov,
            smoothness,
            kappa,
        };
        w.validate()?;
        Ok(w)
    }

    /// Pure `L_ε` with `κ ≡ 1`.
    pub fn loss_only(eps: f64, blocks: usize) -> Self {
        Self {
            eps,
            tikhonov: 0.0,
            smoothness: 0.0,
            kappa: vec![1.0; blocks.saturating_sub(1)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "eps = {} must be > 0",
                self.eps
            )));
        }
        if !(self.tikhonov >= 0.0 && self.smoothness >= 0.0) {
            return Err(Error::InvalidParameter(
                "regularization weights must be nonnegative".into(),
            ));
        }
        if let Some(k) = self.kappa.iter().find(|k| !(**k > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "kappa entry {k} must be > 0"
            )));
        }
        Ok(())
    }

    pub fn check_blocks(&self, blocks: usize) -> Result<()> {
        check_kappa(&self.kappa, blocks)
    }
}

fn check_kappa(kappa: &[f64], blocks: usize) -> Result<()> {
    if kappa.len() + 1 != blocks {
        return Err(Error::Shape(format!(
            "kappa has {} entries, expected L - 1 = {}",
            kappa.len(),
            blocks.saturating_sub(1)
        )));
    }
    Ok(())
}

fn check_measurements<F: QuadraticFamily + ?Sized>(
    z: &BlockVector,
    ops: &F,
    y: &[f64],
) -> Result<()> {
    let (l, n) = ops.layout();
    if z.blocks() != l || z.side() != n {
        return Err(Error::Shape(format!(
            "iterate is {}x{}x{}, operators act on {l}x{n}x{n}",
            z.blocks(),
            z.side(),
            z.side()
        )));
    }
    if y.len() != ops.count() {
        return Err(Error::Shape(format!(
            "{} measurements for {} quadratic forms",
            y.len(),
            ops.count()
        )));
    }
    Ok(())
}

fn l_eps_from_quads(q: &[f64], y: &[f64], eps: f64) -> f64 {
    q.iter()
        .zip(y)
        .map(|(&qj, &yj)| {
            let r = (qj.max(0.0) + eps).sqrt() - (yj + eps).sqrt();
            r * r
        })
        .sum()
}

/// Coefficient `1 − √(y_j + ε)/√(z*Q_j z + ε)` of `Q_j z` in `∇_z L_ε`.
#[inline]
pub fn residual_coefficient(q: f64, y: f64, eps: f64) -> f64 {
    1.0 - ((y + eps) / (q.max(0.0) + eps)).sqrt()
}

/// `L_ε(z)`.
pub fn eval_l_eps<F: QuadraticFamily + ?Sized>(
    z: &BlockVector,
    ops: &F,
    y: &[f64],
    eps: f64,
) -> Result<f64> {
    check_measurements(z, ops, y)?;
    Ok(l_eps_from_quads(&ops.quad_values(z), y, eps))
}

/// `∇_z L_ε(z) = Σ_j [1 − √(y_j+ε)/√(z*Q_j z+ε)] Q_j z`.
pub fn grad_l_eps<F: QuadraticFamily + ?Sized>(
    z: &BlockVector,
    ops: &F,
    y: &[f64],
    eps: f64,
) -> Result<BlockVector> {
    check_measurements(z, ops, y)?;
    let coeff = |j: usize, q: f64| residual_coefficient(q, y[j], eps);
    Ok(ops.quad_and_backproject(z, &coeff).1)
}

/// `T(z) = ‖z‖²`.
pub fn eval_t(z: &BlockVector) -> f64 {
    z.norm_sqr()
}

/// `∇_z T = z`.
pub fn grad_t(z: &BlockVector) -> BlockVector {
    z.clone()
}

/// `S(z) = Σ_ℓ κ_ℓ ‖z_{ℓ+1} − z_ℓ‖²`.
pub fn eval_s(z: &BlockVector, kappa: &[f64]) -> Result<f64> {
    check_kappa(kappa, z.blocks())?;
    let mut s = 0.0;
    for (l, &k) in kappa.iter().enumerate() {
        let d: f64 = z
            .block(l + 1)
            .iter()
            .zip(z.block(l))
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        s += k * d;
    }
    Ok(s)
}

/// `∇_z S = (K ⊗ I_d) z`.
pub fn grad_s(z: &BlockVector, kappa: &[f64]) -> Result<BlockVector> {
    check_kappa(kappa, z.blocks())?;
    let mut g = BlockVector::zeros(z.blocks(), z.side());
    for (l, &k) in kappa.iter().enumerate() {
        let (lo, hi) = (z.block(l), z.block(l + 1));
        let diff: Vec<C64> = lo.iter().zip(hi).map(|(a, b)| (a - b) * k).collect();
        for (gi, di) in g.block_mut(l).iter_mut().zip(&diff) {
            *gi += di;
        }
        for (gi, di) in g.block_mut(l + 1).iter_mut().zip(&diff) {
            *gi -= di;
        }
    }
    Ok(g)
}

/// The tridiagonal coupling matrix `K` with `S(z) = z*(K ⊗ I_d)z`.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothnessCoupling {
    pub matrix: DMatrix<f64>,
    pub spectral_norm: f64,
}

impl SmoothnessCoupling {
    pub fn new(kappa: &[f64]) -> Self {
        let matrix = k_matrix(kappa);
        let spectral_norm = spectral_norm_symmetric(&matrix);
        Self {
            matrix,
            spectral_norm,
        }
    }
}

/// `K_{kk} = κ_{k−1}[k > 1] + κ_k[k < L]`, `K_{k,k±1} = −κ`.
pub fn k_matrix(kappa: &[f64]) -> DMatrix<f64> {
    let l = kappa.len() + 1;
    let mut k = DMatrix::<f64>::zeros(l, l);
    for (i, &kp) in kappa.iter().enumerate() {
        k[(i, i)] += kp;
        k[(i + 1, i + 1)] += kp;
        k[(i, i + 1)] = -kp;
        k[(i + 1, i)] = -kp;
    }
    k
}

fn spectral_norm_symmetric(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `‖K‖` via a symmetric eigen-solve.
pub fn k_matrix_norm(kappa: &[f64]) -> f64 {
    spectral_norm_symmetric(&k_matrix(kappa))
}

/// Spectral norm of a Hermitian PSD matrix.
pub fn hermitian_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `B = ‖Σ Q_j‖ + α_T + α_S ‖K‖`.
///
/// Uses the family's analytic bound when it has one, otherwise a dense
/// assembly (limited to `d·L ≤ 4096`).
pub fn hessian_bound<F: QuadraticFamily + ?Sized>(
    ops: &F,
    weights: &RegularizerWeights,
) -> Result<f64> {
    let (l, n) = ops.layout();
    weights.check_blocks(l)?;
    let alpha = weights.tikhonov + weights.smoothness * k_matrix_norm(&weights.kappa);
    if ops.count() == 0 {
        return Ok(alpha);
    }
    let q_norm = match ops.sum_norm_bound() {
        Some(b) => b,
        None => {
            let dim = l * n * n;
            if dim > DENSE_LIMIT {
                return Err(Error::TooLarge {
                    dim,
                    limit: DENSE_LIMIT,
                });
            }
            match ops.dense_sum() {
                Some(sum) => hermitian_norm(&sum?),
                None => {
                    return Err(Error::InvalidParameter(
                        "family offers neither an analytic bound nor a dense assembly".into(),
                    ))
                }
            }
        }
    };
    Ok(q_norm + alpha)
}

/// The components of `J` at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub l_eps: f64,
    pub tikhonov: f64,
    pub smoothness: f64,
}

impl LossParts {
    pub fn total(&self, w: &RegularizerWeights) -> f64 {
        self.l_eps + w.tikhonov * self.tikhonov + w.smoothness * self.smoothness
    }
}

/// `J(·; ε, α_T, α_S)` for fixed measurements, as an [`Objective`].
///
/// `offset` is a constant added to every value; the blind loss uses it to carry
/// the regularizer of the variable held fixed.
pub struct AmplitudeObjective<'a, F: QuadraticFamily + ?Sized> {
    pub ops: &'a F,
    pub y: &'a [f64],
    pub weights: RegularizerWeights,
    pub offset: f64,
}

impl<'a, F: QuadraticFamily + ?Sized> AmplitudeObjective<'a, F> {
    pub fn new(ops: &'a F, y: &'a [f64], weights: RegularizerWeights) -> Result<Self> {
        weights.validate()?;
        let (l, _) = ops.layout();
        weights.check_blocks(l)?;
        if y.len() != ops.count() {
            return Err(Error::Shape(format!(
                "{} measurements for {} quadratic forms",
                y.len(),
                ops.count()
            )));
        }
        Ok(Self {
            ops,
            y,
            weights,
            offset: 0.0,
        })
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn parts(&self, z: &BlockVector) -> LossParts {
        LossParts {
            l_eps: l_eps_from_quads(&self.ops.quad_values(z), self.y, self.weights.eps),
            tikhonov: eval_t(z),
            smoothness: self.smoothness(z),
        }
    }

    fn smoothness(&self, z: &BlockVector) -> f64 {
        if self.weights.smoothness == 0.0 {
            0.0
        } else {
            eval_s(z, &self.weights.kappa).expect("kappa checked at construction")
        }
    }

    fn add_regularizer_grad(&self, z: &BlockVector, g: &mut BlockVector) {
        if self.weights.tikhonov != 0.0 {
            g.axpy(C64::new(self.weights.tikhonov, 0.0), z);
        }
        if self.weights.smoothness != 0.0 {
            let gs = grad_s(z, &self.weights.kappa).expect("kappa checked at construction");
            g.axpy(C64::new(self.weights.smoothness, 0.0), &gs);
        }
    }
}

impl<F: QuadraticFamily + ?Sized> Objective for AmplitudeObjective<'_, F> {
    fn value(&self, z: &BlockVector) -> f64 {
        self.parts(z).total(&self.weights) + self.offset
    }

    fn wgrad(&self, z: &BlockVector) -> BlockVector {
        self.value_and_wgrad(z).1
    }

    fn value_and_wgrad(&self, z: &BlockVector) -> (f64, BlockVector) {
        let eps = self.weights.eps;
        let y = self.y;
        let coeff = |j: usize, q: f64| residual_coefficient(q, y[j], eps);
        let (q, mut g) = self.ops.quad_and_backproject(z, &coeff);
        self.add_regularizer_grad(z, &mut g);
        let parts = LossParts {
            l_eps: l_eps_from_quads(&q, y, eps),
            tikhonov: eval_t(z),
            smoothness: self.smoothness(z),
        };
        (parts.total(&self.weights) + self.offset, g)
    }
}

/// `J(z)` as a plain function.
pub fn eval_j<F: QuadraticFamily + ?Sized>(
    z: &BlockVector,
    ops: &F,
    y: &[f64],
    weights: &RegularizerWeights,
) -> Result<f64> {
    check_measurements(z, ops, y)?;
    let obj = AmplitudeObjective::new(ops, y, weights.clone())?;
    Ok(obj.value(z))
}

/// `∇_z J(z)`.
pub fn grad_j<F: QuadraticFamily + ?Sized>(
    z: &BlockVector,
    ops: &F,
    y: &[f64],
    weights: &RegularizerWeights,
) -> Result<BlockVector> {
    check_measurements(z, ops, y)?;
    let obj = AmplitudeObjective::new(ops, y, weights.clone())?;
    Ok(obj.wgrad(z))
}
