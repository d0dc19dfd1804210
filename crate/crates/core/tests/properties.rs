mod common;

use common::quadratic::Quadratic;
use common::*;
use num_complex::Complex64 as C64;
use polyptych::forward::{poisson_corrupt, relative_amplitude_noise, MeasurementStack};
use polyptych::objective::{hermitian_norm, k_matrix_norm};
use polyptych::optimizer::{aga_select, Objective};
use polyptych::recon::{global_phase_align, relative_error};
use polyptych::BlockVector;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn aga_step_lies_between_floor_and_ceiling(
        seed in any::<u64>(),
        blocks in 1usize..3,
        side in 1usize..4,
        shrink in 0.05f64..=1.0,
        tau in 0.1f64..0.9,
        n in 0u32..6,
    ) {
        let f = Quadratic::random(seed, blocks, side);
        let z = BlockVector::random(blocks, side, &mut rng(seed ^ 0x5eed));
        let g = f.wgrad(&z);
        let mu_c = shrink / hermitian_norm(&f.a);
        let (mu, trials) = aga_select(&f, &z, &g, mu_c, tau, n).unwrap();
        prop_assert!(mu >= mu_c && mu <= mu_c * tau.powi(-(n as i32)) * (1.0 + 1e-15));
        prop_assert!(trials >= 1 && trials <= n as usize + 1);
        prop_assert_eq!(mu, if trials == n as usize + 1 { mu_c } else { mu_c * tau.powi(trials as i32 - 1 - n as i32) });
        if n == 0 {
            prop_assert_eq!(mu, mu_c);
        }
    }

    #[test]
    fn intensities_ignore_global_phases(seed in any::<u64>(), theta in 0.0f64..6.3, phi in 0.0f64..6.3) {
        let mut rng = rng(seed);
        let model = random_model(&mut rng, 6, 2, 3, 3);
        let x = random_stack(&mut rng, 2, 6);
        let w = random_probe(&mut rng, 2, 6, 3);
        let y = model.intensities(&x, &w);
        let rotated = model.intensities(&x.scaled(C64::from_polar(1.0, theta)), &w.scaled(C64::from_polar(1.0, phi)));
        for (a, b) in y.iter().zip(&rotated) {
            prop_assert!(rel_diff(*a, *b) < 1e-12);
        }
    }

    #[test]
    fn intensities_scale_quadratically(seed in any::<u64>(), s in 0.1f64..10.0) {
        let mut rng = rng(seed);
        let model = random_model(&mut rng, 5, 3, 2, 2);
        let x = random_stack(&mut rng, 3, 5);
        let w = random_probe(&mut rng, 3, 5, 2);
        let y = model.intensities(&x, &w);
        let scaled = model.intensities(&x.scaled(C64::new(s, 0.0)), &w);
        for (a, b) in y.iter().zip(&scaled) {
            prop_assert!(rel_diff(s * s * a, *b) < 1e-12);
        }
    }

    #[test]
    fn aligned_error_never_exceeds_raw(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let r = random_stack(&mut rng, 2, 3);
        let e = random_stack(&mut rng, 2, 3);
        let raw = relative_error(&e, &r, false).unwrap();
        let aligned = relative_error(&e, &r, true).unwrap();
        prop_assert!(aligned <= raw + 1e-15);
        let (_, rotated) = global_phase_align(&e, &r).unwrap();
        prop_assert!(rotated.inner(&r).im.abs() <= 1e-12 * rotated.norm() * r.norm());
    }

    #[test]
    fn smoothness_norm_is_homogeneous(kappa in prop::collection::vec(0.01f64..5.0, 1..6), c in 0.1f64..10.0) {
        let scaled: Vec<f64> = kappa.iter().map(|k| k * c).collect();
        prop_assert!(rel_diff(k_matrix_norm(&scaled), c * k_matrix_norm(&kappa)) < 1e-10);
    }

    #[test]
    fn poisson_noise_is_seeded_and_nonnegative(seed in any::<u64>(), photons in 1e2f64..1e8) {
        let data: Vec<f64> = (0..32).map(|i| (i % 7) as f64 * 0.3).collect();
        let y = MeasurementStack::new(2, 4, data).unwrap();
        let a = poisson_corrupt(&y, photons, seed).unwrap();
        let b = poisson_corrupt(&y, photons, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.as_slice().iter().all(|v| *v >= 0.0));
        prop_assert!(relative_amplitude_noise(&y, &y).unwrap() == 0.0);
    }
}
