use affinepr_core::ensemble::{gen_cdp, gen_gaussian, measure};
use affinepr_core::newton::lift;
use affinepr_core::rng::rng_from_seed;
use affinepr_core::{linalg, oracle, wirtinger, SignalVector, C64};
use proptest::prelude::*;

fn instance(n: usize, m: usize, seed: u64, b: (f64, f64)) -> (affinepr_core::MeasurementEnsemble, affinepr_core::ObservationSet, SignalVector) {
    let mut rng = rng_from_seed(seed);
    let ens = gen_gaussian(n, m, seed ^ 0xABCD).unwrap().with_offset(C64::new(b.0, b.1));
    let x = oracle::random_unit_signal(n, &mut rng);
    let z = oracle::random_complex(n, &mut rng);
    let obs = measure(&ens, &x).unwrap();
    (ens, obs, z)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hessian_is_hermitian_with_symmetric_q(n in 1usize..7, k in 1usize..6, seed in any::<u64>(), br in -5.0..5.0f64, bi in -5.0..5.0f64) {
        let (ens, obs, z) = instance(n, n * k, seed, (br, bi));
        let h = wirtinger::hessian(&ens, &obs, &z).unwrap();
        let scale = 1.0 + h.p().camax();
        prop_assert!(linalg::hermitian_defect(&h.assemble()) <= 1e-12 * scale);
        prop_assert!((h.q() - h.q().transpose()).camax() <= 1e-12 * scale);
    }

    #[test]
    fn gradient_lower_half_is_conjugate(n in 1usize..7, seed in any::<u64>()) {
        let (ens, obs, z) = instance(n, 4 * n, seed, (2.0, 1.0));
        let g = wirtinger::gradient(&ens, &obs, &z).unwrap();
        let stacked = g.stacked();
        for i in 0..n {
            prop_assert_eq!(stacked[n + i], stacked[i].conj());
        }
        prop_assert!((g.norm() - stacked.norm()).abs() <= 1e-12 * (1.0 + g.norm()));
    }

    #[test]
    fn hessian_apply_matches_dense(n in 1usize..6, seed in any::<u64>()) {
        let (ens, obs, z) = instance(n, 3 * n, seed, (1.0, -1.0));
        let v = lift(&oracle::random_complex(n, &mut rng_from_seed(seed.wrapping_add(1))));
        let dense = wirtinger::hessian(&ens, &obs, &z).unwrap().mul_vec(&v).unwrap();
        let free = wirtinger::hessian_apply(&ens, &obs, &z, &v).unwrap();
        prop_assert!((dense - &free).norm() <= 1e-10 * (1.0 + free.norm()));
    }

    #[test]
    fn measurements_are_nonnegative(n in 1usize..9, l in 1usize..5, seed in any::<u64>(), br in -3.0..3.0f64) {
        let x = oracle::random_complex(n, &mut rng_from_seed(seed));
        let ens = gen_cdp(n, l, seed).unwrap().with_offset(C64::new(br, 0.5));
        let obs = measure(&ens, &x).unwrap();
        prop_assert_eq!(obs.len(), n * l);
        prop_assert!(obs.y.iter().all(|&y| y >= 0.0 && y.is_finite()));
    }

    #[test]
    fn objective_is_nonnegative_and_zero_at_truth(n in 1usize..6, seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let x = oracle::random_unit_signal(n, &mut rng);
        let ens = gen_gaussian(n, 5 * n, seed).unwrap().with_offset(C64::new(3.0, 0.0));
        let obs = measure(&ens, &x).unwrap();
        prop_assert!(wirtinger::eval_f(&ens, &obs, &x).unwrap() <= 1e-20);
        let z = oracle::random_complex(n, &mut rng);
        prop_assert!(wirtinger::eval_f(&ens, &obs, &z).unwrap() >= 0.0);
    }
}
