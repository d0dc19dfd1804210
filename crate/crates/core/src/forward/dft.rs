//! Separable scaled DFTs `(F^ℓ)_{k,a} = exp(−2πi ρ_ℓ k·a / n)`, `ρ_ℓ = λ_1/λ_ℓ`.
//!
//! `F^ℓ = E^ℓ ⊗ E^ℓ` for the 1-D matrix `(E^ℓ)_{k,a} = exp(−2πi ρ_ℓ k a / n)`, so a
//! 2-D transform is a row pass followed by a column pass, and `‖F^ℓ‖ = ‖E^ℓ‖²`.
//! The transforms accept a rectangle outside of which the input (forward) or
//! the requested output (adjoint) is zero; probes with small support make
//! this the difference between `O(n³)` and `O(n²δ)`.

use std::f64::consts::PI;

use crate::block::C64;

/// Half-open index rectangle `[r0, r1) × [c0, c1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rect {
    pub r0: usize,
    pub r1: usize,
    pub c0: usize,
    pub c1: usize,
}

impl Rect {
    pub fn full(n: usize) -> Self {
        Self {
            r0: 0,
            r1: n,
            c0: 0,
            c1: n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.r0 >= self.r1 || self.c0 >= self.c1
    }

    pub fn intersect(&self, other: &Rect) -> Rect {
        Rect {
            r0: self.r0.max(other.r0),
            r1: self.r1.min(other.r1),
            c0: self.c0.max(other.c0),
            c1: self.c1.min(other.c1),
        }
    }

    /// Bounding box of the nonzero entries of a row-major `n × n` grid.
    pub fn support(grid: &[C64], n: usize) -> Rect {
        let mut r = Rect {
            r0: n,
            r1: 0,
            c0: n,
            c1: 0,
        };
        for row in 0..n {
            for col in 0..n {
                let v = grid[row * n + col];
                if v.re != 0.0 || v.im != 0.0 {
                    r.r0 = r.r0.min(row);
                    r.r1 = r.r1.max(row + 1);
                    r.c0 = r.c0.min(col);
                    r.c1 = r.c1.max(col + 1);
                }
            }
        }
        r
    }
}

#[derive(Clone, Debug)]
pub struct ScaledDftPlan {
    side: usize,
    ratios: Vec<f64>,
    /// `E^ℓ`, row-major `[k][a]`.
    fwd: Vec<Vec<C64>>,
    /// `(E^ℓ)^*`, row-major `[a][k]`.
    adj: Vec<Vec<C64>>,
    norms: Vec<f64>,
}

impl ScaledDftPlan {
    /// One transform per ratio `ρ_ℓ`.
    pub fn new(side: usize, ratios: &[f64]) -> Self {
        let n = side;
        let mut fwd = Vec::with_capacity(ratios.len());
        let mut adj = Vec::with_capacity(ratios.len());
        let mut norms = Vec::with_capacity(ratios.len());
        for &rho in ratios {
            let mut e = vec![C64::new(0.0, 0.0); n * n];
            let mut eh = vec![C64::new(0.0, 0.0); n * n];
            for k in 0..n {
                for a in 0..n {
                    let v = C64::from_polar(1.0, -2.0 * PI * rho * (k * a) as f64 / n as f64);
                    e[k * n + a] = v;
                    eh[a * n + k] = v.conj();
                }
            }
            let e_norm = spectral_norm_1d(&e, n);
            norms.push(e_norm * e_norm);
            fwd.push(e);
            adj.push(eh);
        }
        Self {
            side,
            ratios: ratios.to_vec(),
            fwd,
            adj,
            norms,
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn channels(&self) -> usize {
        self.ratios.len()
    }

    pub fn ratio(&self, l: usize) -> f64 {
        self.ratios[l]
    }

    /// The 1-D matrix `E^ℓ`, row-major.
    pub fn matrix_1d(&self, l: usize) -> &[C64] {
        &self.fwd[l]
    }

    /// `‖F^ℓ‖ = ‖E^ℓ‖²`.
    pub fn spectral_norm(&self, l: usize) -> f64 {
        self.norms[l]
    }

    /// `F^ℓ X` for a grid whose nonzeros lie inside `support`.
    pub fn forward(&self, l: usize, field: &[C64], support: Rect) -> Vec<C64> {
        let n = self.side;
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        if support.is_empty() {
            return out;
        }
        let e = &self.fwd[l];
        let (r0, r1, c0, c1) = (support.r0, support.r1, support.c0, support.c1);
        // row pass: T[a1][k2] = Σ_{a2} X[a1][a2] E[k2][a2]
        let mut tmp = vec![C64::new(0.0, 0.0); (r1 - r0) * n];
        for a1 in r0..r1 {
            let xrow = &field[a1 * n + c0..a1 * n + c1];
            let trow = &mut tmp[(a1 - r0) * n..(a1 - r0 + 1) * n];
            for (k2, t) in trow.iter_mut().enumerate() {
                let erow = &e[k2 * n + c0..k2 * n + c1];
                *t = dot(xrow, erow);
            }
        }
        // column pass: out[k1][:] = Σ_{a1} E[k1][a1] T[a1][:]
        for k1 in 0..n {
            let orow = &mut out[k1 * n..(k1 + 1) * n];
            for a1 in r0..r1 {
                axpy(orow, e[k1 * n + a1], &tmp[(a1 - r0) * n..(a1 - r0 + 1) * n]);
            }
        }
        out
    }

    /// `(F^ℓ)^* Y`, evaluated only inside `region` (zero elsewhere).
    pub fn adjoint(&self, l: usize, spectrum: &[C64], region: Rect) -> Vec<C64> {
        let n = self.side;
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        if region.is_empty() {
            return out;
        }
        let eh = &self.adj[l];
        let (r0, r1, c0, c1) = (region.r0, region.r1, region.c0, region.c1);
        let w = c1 - c0;
        // T[k1][a2] = Σ_{k2} Y[k1][k2] conj(E[k2][a2])
        let mut tmp = vec![C64::new(0.0, 0.0); n * w];
        for k1 in 0..n {
            let yrow = &spectrum[k1 * n..(k1 + 1) * n];
            for a2 in c0..c1 {
                tmp[k1 * w + a2 - c0] = dot(yrow, &eh[a2 * n..(a2 + 1) * n]);
            }
        }
        // X[a1][a2] = Σ_{k1} conj(E[k1][a1]) T[k1][a2]
        for a1 in r0..r1 {
            let orow = &mut out[a1 * n + c0..a1 * n + c1];
            for k1 in 0..n {
                axpy(orow, eh[a1 * n + k1], &tmp[k1 * w..(k1 + 1) * w]);
            }
        }
        out
    }
}

#[inline]
fn dot(a: &[C64], b: &[C64]) -> C64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re - x.im * y.im;
        im += x.re * y.im + x.im * y.re;
    }
    C64::new(re, im)
}

#[inline]
fn axpy(acc: &mut [C64], a: C64, x: &[C64]) {
    for (o, v) in acc.iter_mut().zip(x) {
        o.re += a.re * v.re - a.im * v.im;
        o.im += a.re * v.im + a.im * v.re;
    }
}

/// Largest singular value of the row-major `n × n` matrix `e`.
///
/// The leading singular values of scaled DFTs are nearly degenerate, which
/// stalls power iteration, so this uses a dense SVD.
fn spectral_norm_1d(e: &[C64], n: usize) -> f64 {
    let m = nalgebra::DMatrix::from_row_slice(n, n, e);
    m.singular_values().max()
}
