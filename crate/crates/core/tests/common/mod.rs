#![allow(dead_code)]

pub mod checks;
pub mod quadratic;

use num_complex::Complex64 as C64;
use polyptych::forward::{PtychoModel, ShiftSet, WavelengthSpec};
use polyptych::BlockVector;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Wavelengths starting at 1 with random increments.
pub fn random_spec(rng: &mut impl Rng, channels: usize) -> WavelengthSpec {
    let mut lambdas = vec![1.0];
    for _ in 1..channels {
        let last = *lambdas.last().unwrap();
        lambdas.push(last + rng.random_range(0.1..0.6));
    }
    WavelengthSpec::new(lambdas).unwrap()
}

/// Up to `count` distinct valid shifts for a probe of side `probe_side`.
pub fn random_shifts(rng: &mut impl Rng, side: usize, probe_side: usize, count: usize) -> ShiftSet {
    let top = (side - probe_side) as i64;
    let mut all: Vec<(i64, i64)> = (0..=top)
        .flat_map(|r| (0..=top).map(move |c| (r, c)))
        .collect();
    all.shuffle(rng);
    all.truncate(count.max(1));
    ShiftSet::new(side, probe_side, all).unwrap()
}

pub fn random_model(
    rng: &mut impl Rng,
    side: usize,
    channels: usize,
    probe_side: usize,
    count: usize,
) -> PtychoModel {
    let spec = random_spec(rng, channels);
    let shifts = random_shifts(rng, side, probe_side, count);
    PtychoModel::new(spec, shifts)
}

/// Random stack vanishing outside the top-left `probe_side` square.
pub fn random_probe(
    rng: &mut impl Rng,
    channels: usize,
    side: usize,
    probe_side: usize,
) -> BlockVector {
    let mut w = BlockVector::random(channels, side, rng);
    for l in 0..channels {
        for r in 0..side {
            for c in 0..side {
                if r >= probe_side || c >= probe_side {
                    w.set(l, r, c, C64::new(0.0, 0.0));
                }
            }
        }
    }
    w
}

pub fn random_stack(rng: &mut impl Rng, channels: usize, side: usize) -> BlockVector {
    BlockVector::random(channels, side, rng)
}

/// Directional derivative `d/dt f(z + t u)` at `t = 0` by Richardson-extrapolated
/// central differences.
pub fn directional_fd(
    f: impl Fn(&BlockVector) -> f64,
    z: &BlockVector,
    u: &BlockVector,
    h: f64,
) -> f64 {
    let central = |h: f64| {
        let mut plus = z.clone();
        plus.axpy(C64::new(h, 0.0), u);
        let mut minus = z.clone();
        minus.axpy(C64::new(-h, 0.0), u);
        (f(&plus) - f(&minus)) / (2.0 * h)
    };
    (4.0 * central(h / 2.0) - central(h)) / 3.0
}

/// Directional derivative predicted by a Wirtinger gradient: `2 Re⟨g, u⟩`.
pub fn wirtinger_directional(g: &BlockVector, u: &BlockVector) -> f64 {
    2.0 * g.inner(u).re
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
