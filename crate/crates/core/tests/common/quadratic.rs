use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use polyptych::optimizer::Objective;
use polyptych::BlockVector;
use rand::Rng;

use super::rng;

/// `f(z) = (z − b)* A (z − b)` with `A` Hermitian PSD; its Hessian bound is `‖A‖`.
pub struct Quadratic {
    pub a: DMatrix<C64>,
    b: DVector<C64>,
    blocks: usize,
    side: usize,
}

impl Quadratic {
    pub fn random(seed: u64, blocks: usize, side: usize) -> Self {
        let mut rng = rng(seed);
        let d = blocks * side * side;
        let g = DMatrix::from_fn(d, d, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let b = DVector::from_fn(d, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        Self {
            a: g.adjoint() * g,
            b,
            blocks,
            side,
        }
    }

    fn residual(&self, z: &BlockVector) -> DVector<C64> {
        DVector::from_column_slice(z.as_slice()) - &self.b
    }
}

impl Objective for Quadratic {
    fn value(&self, z: &BlockVector) -> f64 {
        let r = self.residual(z);
        (r.adjoint() * &self.a * &r)[(0, 0)].re
    }

    fn wgrad(&self, z: &BlockVector) -> BlockVector {
        let g = &self.a * self.residual(z);
        BlockVector::from_vec(self.blocks, self.side, g.iter().copied().collect()).unwrap()
    }
}
