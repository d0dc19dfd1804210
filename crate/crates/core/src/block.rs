//! Stacks of `L` complex `n × n` grids, one per wavelength.
//!
//! A [`BlockVector`] is the vector in `ℂ^{dL}` (`d = n²`) that every loss and
//! gradient in this crate operates on. Storage is a single row-major buffer
//! ordered `(block, row, col)`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockVector {
    blocks: usize,
    side: usize,
    data: Vec<C64>,
}

impl BlockVector {
    pub fn zeros(blocks: usize, side: usize) -> Self {
        Self::filled(blocks, side, C64::new(0.0, 0.0))
    }

    pub fn filled(blocks: usize, side: usize, value: C64) -> Self {
        assert!(
            blocks >= 1 && side >= 1,
            "block vector needs L >= 1 and n >= 1"
        );
        Self {
            blocks,
            side,
            data: vec![value; blocks * side * side],
        }
    }

    pub fn from_vec(blocks: usize, side: usize, data: Vec<C64>) -> Result<Self> {
        if blocks == 0 || side == 0 {
            return Err(Error::Shape(format!(
                "invalid block layout L={blocks}, n={side}"
            )));
        }
        if data.len() != blocks * side * side {
            return Err(Error::Shape(format!(
                "buffer of length {} does not hold {blocks} blocks of {side}x{side}",
                data.len()
            )));
        }
        Ok(Self { blocks, side, data })
    }

    /// Builds a stack from individual row-major `n × n` grids.
    pub fn from_blocks(side: usize, grids: Vec<Vec<C64>>) -> Result<Self> {
        let blocks = grids.len();
        let mut data = Vec::with_capacity(blocks * side * side);
        for g in grids {
            if g.len() != side * side {
                return Err(Error::Shape(format!(
                    "grid of length {} is not {side}x{side}",
                    g.len()
                )));
            }
            data.extend(g);
        }
        Self::from_vec(blocks, side, data)
    }

    /// Entries with independent standard normal real and imaginary parts.
    pub fn random<R: Rng + ?Sized>(blocks: usize, side: usize, rng: &mut R) -> Self {
        let mut v = Self::zeros(blocks, side);
        for c in v.data.iter_mut() {
            let re: f64 = rng.sample(rand_distr::StandardNormal);
            let im: f64 = rng.sample(rand_distr::StandardNormal);
            *c = C64::new(re, im);
        }
        v
    }

    /// Number of blocks `L`.
    pub fn blocks(&self) -> usize {
        self.blocks
    }

    /// Grid side length `n`.
    pub fn side(&self) -> usize {
        self.side
    }

    /// Pixels per block, `d = n²`.
    pub fn block_len(&self) -> usize {
        self.side * self.side
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.blocks == other.blocks && self.side == other.side
    }

    pub fn check_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "block layouts differ: {}x{}x{} vs {}x{}x{}",
                self.blocks, self.side, self.side, other.blocks, other.side, other.side
            )))
        }
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn block(&self, l: usize) -> &[C64] {
        let d = self.block_len();
        &self.data[l * d..(l + 1) * d]
    }

    pub fn block_mut(&mut self, l: usize) -> &mut [C64] {
        let d = self.block_len();
        &mut self.data[l * d..(l + 1) * d]
    }

    pub fn get(&self, l: usize, row: usize, col: usize) -> C64 {
        self.data[(l * self.side + row) * self.side + col]
    }

    pub fn set(&mut self, l: usize, row: usize, col: usize, value: C64) {
        let n = self.side;
        self.data[(l * n + row) * n + col] = value;
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn block_norm_sqr(&self, l: usize) -> f64 {
        self.block(l).iter().map(|c| c.norm_sqr()).sum()
    }

    /// `⟨self, other⟩ = self^* other`, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> C64 {
        debug_assert!(self.same_shape(other));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `self += a · other`.
    pub fn axpy(&mut self, a: C64, other: &Self) {
        debug_assert!(self.same_shape(other));
        for (s, o) in self.data.iter_mut().zip(&other.data) {
            *s += a * o;
        }
    }

    /// `self − step · direction`, the gradient update.
    pub fn stepped(&self, step: f64, direction: &Self) -> Self {
        debug_assert!(self.same_shape(direction));
        let data = self
            .data
            .iter()
            .zip(&direction.data)
            .map(|(z, g)| z - g * step)
            .collect();
        Self {
            blocks: self.blocks,
            side: self.side,
            data,
        }
    }

    pub fn scaled(&self, a: C64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    pub fn scale(&mut self, a: C64) {
        for c in self.data.iter_mut() {
            *c *= a;
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert!(self.same_shape(other));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Self {
            blocks: self.blocks,
            side: self.side,
            data,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }
}
