//! Synthetic test objects.

use serde::{Deserialize, Serialize};

use crate::block::{BlockVector, C64};
use crate::error::{Error, Result};

/// Modified Shepp-Logan ellipses: intensity, semi-axes `(a, b)`, center `(x0, y0)`, tilt in degrees.
const SHEPP_LOGAN: [[f64; 6]; 10] = [
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
    [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
    [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
    [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
    [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
    [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
    [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
    [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
    [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
];

/// Pixel center in `[-1, 1]²` with `y` pointing up.
fn unit_coords(r: usize, c: usize, n: usize) -> (f64, f64) {
    let x = (2.0 * c as f64 + 1.0) / n as f64 - 1.0;
    let y = 1.0 - (2.0 * r as f64 + 1.0) / n as f64;
    (x, y)
}

/// Modified Shepp-Logan phantom on an `n × n` grid, values in `[0, 1]`.
pub fn shepp_logan(n: usize) -> Vec<f64> {
    let mut img = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            let (x, y) = unit_coords(r, c, n);
            let mut v = 0.0;
            for [amp, a, b, x0, y0, tilt] in SHEPP_LOGAN {
                let (s, co) = tilt.to_radians().sin_cos();
                let (dx, dy) = (x - x0, y - y0);
                let u = dx * co + dy * s;
                let w = -dx * s + dy * co;
                if (u / a).powi(2) + (w / b).powi(2) <= 1.0 {
                    v += amp;
                }
            }
            img[r * n + c] = v.clamp(0.0, 1.0);
        }
    }
    img
}

/// Structured grayscale test image: a diagonal ramp with a disk, a square and
/// a ring on top, values in `[0, 1]`.
pub fn structured_image(n: usize) -> Vec<f64> {
    let nf = n as f64;
    let mut img = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            let (rf, cf) = ((r as f64 + 0.5) / nf, (c as f64 + 0.5) / nf);
            let mut v = 0.15 + 0.3 * (rf + cf) / 2.0;
            if (rf - 0.35).powi(2) + (cf - 0.62).powi(2) <= 0.18 * 0.18 {
                v += 0.4;
            }
            if (0.58..0.82).contains(&rf) && (0.18..0.44).contains(&cf) {
                v += 0.3;
            }
            let rad = ((rf - 0.5).powi(2) + (cf - 0.5).powi(2)).sqrt();
            if (0.36..0.42).contains(&rad) {
                v += 0.25;
            }
            img[r * n + c] = v.clamp(0.0, 1.0);
        }
    }
    img
}

/// Parameters of [`synthetic_object`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectParams {
    /// Overall scale applied to both parts.
    pub amplitude: f64,
    /// Strength `p` of the per-wavelength modulation.
    pub perturbation: f64,
}

impl Default for ObjectParams {
    fn default() -> Self {
        Self {
            amplitude: 1.35,
            perturbation: 0.2,
        }
    }
}

/// Object stack with real part from the phantom and imaginary part from the
/// structured image.
///
/// Block `ℓ` is `A·[re·(1 + p s_ℓ) + i·im·(1 − p s_ℓ)]` with `s_ℓ` spread
/// evenly over `[−1/2, 1/2]`, so neighboring wavelengths differ slightly and
/// in opposite directions for the two parts.
pub fn synthetic_object(n: usize, channels: usize, params: ObjectParams) -> Result<BlockVector> {
    if n < 16 {
        return Err(Error::InvalidParameter(format!(
            "synthetic object needs n >= 16, got {n}"
        )));
    }
    if channels == 0 {
        return Err(Error::Empty("channel list"));
    }
    if !(params.amplitude.is_finite() && params.amplitude > 0.0 && params.perturbation.is_finite())
    {
        return Err(Error::InvalidParameter(format!(
            "invalid object parameters {params:?}"
        )));
    }
    let re = shepp_logan(n);
    let im = structured_image(n);
    let grids = (0..channels)
        .map(|l| {
            let s = if channels == 1 {
                0.0
            } else {
                l as f64 / (channels - 1) as f64 - 0.5
            };
            let (fr, fi) = (1.0 + params.perturbation * s, 1.0 - params.perturbation * s);
            re.iter()
                .zip(&im)
                .map(|(a, b)| C64::new(a * fr, b * fi) * params.amplitude)
                .collect()
        })
        .collect();
    BlockVector::from_blocks(n, grids)
}
