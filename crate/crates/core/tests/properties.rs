use isac_core::channel::{CovarianceMatrix, SystemParams};
use isac_core::detection::{detection_prob, false_alarm, threshold_for_pfa};
use isac_core::estimation::mmse_filter;
use isac_core::numerics::{cscg_matrix, frobenius, hermitian_eig};
use isac_core::optimizer::{gain_lower_bound, power_lower_bound};
use isac_core::pilot::{mi_optimal_pilot, mse_optimal_pilot, water_fill};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_cov(seed: u64, n: usize, rank: usize) -> CovarianceMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = cscg_matrix(&mut rng, n, rank, 1.0);
    CovarianceMatrix::new(&a * a.adjoint()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn threshold_round_trip(k in 1usize..65, exp in -8.0f64..-0.2) {
        let p = 10f64.powf(exp);
        let g = threshold_for_pfa(k, p).unwrap();
        prop_assert!((false_alarm(k, g) - p).abs() <= 1e-10 * p);
    }

    #[test]
    fn detection_increases_with_noncentrality(k in 1usize..40, g in 0.5f64..60.0, s in 0.0f64..30.0, ds in 0.01f64..5.0) {
        let (lo, hi) = (detection_prob(k, s, g), detection_prob(k, s + ds, g));
        prop_assert!(hi >= lo);
        if hi < 1.0 - 1e-12 {
            prop_assert!(hi > lo);
        }
    }

    #[test]
    fn water_fill_spends_budget(seed in 0u64..1000, m in 1usize..8, budget in 0.01f64..100.0, sp in 0.01f64..10.0) {
        let mut eigs: Vec<f64> = hermitian_eig(random_cov(seed, m, m).matrix()).unwrap().values.iter().copied().collect();
        eigs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let p = water_fill(&eigs, sp, budget).unwrap();
        prop_assert!(p.powers.iter().all(|&x| x >= 0.0));
        prop_assert!((p.total() - budget).abs() <= 1e-9 * budget);
        prop_assert!(p.powers.windows(2).all(|w| w[0] >= w[1] - 1e-12 * budget));
    }

    #[test]
    fn mse_nonincreasing_in_length(seed in 0u64..1000, n in 2usize..7, sp in 0.05f64..3.0) {
        let r = random_cov(seed, n, n);
        let mse: Vec<f64> = (1..=2 * n)
            .map(|l| {
                let (x, _) = mse_optimal_pilot(&r, l, sp, l as f64).unwrap();
                mmse_filter(&r, &x, sp).unwrap().mse
            })
            .collect();
        prop_assert!(mse.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)));
    }

    #[test]
    fn mse_flat_beyond_rank_at_fixed_energy(seed in 0u64..1000, n in 3usize..8, rank in 1usize..3, sp in 0.05f64..3.0) {
        let r = random_cov(seed, n, rank);
        let mse: Vec<f64> = (rank..=n + 2)
            .map(|l| {
                let (x, _) = mse_optimal_pilot(&r, l, sp, 5.0).unwrap();
                mmse_filter(&r, &x, sp).unwrap().mse
            })
            .collect();
        prop_assert!(mse.iter().all(|&v| (v - mse[0]).abs() <= 1e-6 * mse[0]));
    }

    #[test]
    fn isotropic_channel_unifies_pilots(n in 1usize..7, l in 1usize..10, scale in 0.1f64..5.0, sp in 0.1f64..2.0) {
        let eye = isac_core::numerics::ComplexMatrix::identity(n, n) * Complex64::new(scale, 0.0);
        let r = CovarianceMatrix::new(eye).unwrap();
        let (mse_pilot, _) = mse_optimal_pilot(&r, l, sp, l as f64).unwrap();
        let mi_pilot = mi_optimal_pilot(n, l, l as f64);
        let a = mse_pilot.block().adjoint() * mse_pilot.block();
        let b = mi_pilot.block().adjoint() * mi_pilot.block();
        prop_assert!(frobenius(&(a - b)) <= 1e-10 * l as f64);
    }

    #[test]
    fn decomposition_of_channel_covariance(seed in 0u64..1000, n in 1usize..7, l in 1usize..9, sp in 0.01f64..3.0) {
        let r = random_cov(seed, n, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let x = isac_core::estimation::PilotMatrix::new(cscg_matrix(&mut rng, l, n, 1.0));
        let rep = mmse_filter(&r, &x, sp).unwrap();
        let sum = rep.err_cov.matrix() + rep.est_cov.matrix();
        prop_assert!(frobenius(&(sum - r.matrix())) <= 1e-8 * frobenius(r.matrix()).max(1.0));
    }

    #[test]
    fn linearized_bounds_are_tight(seed in 0u64..1000, n in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = random_cov(seed, n, n);
        let w = isac_core::numerics::cscg_vector(&mut rng, n, 1.0);
        let v = isac_core::numerics::cscg_vector(&mut rng, n, 1.0);
        let quad = w.dotc(&(r.matrix() * &w)).re;
        prop_assert!((power_lower_bound(&w, &w) - w.norm_squared()).abs() <= 1e-12 * w.norm_squared());
        prop_assert!((gain_lower_bound(r.matrix(), &w, &w) - quad).abs() <= 1e-12 * quad.max(1e-300));
        prop_assert!(power_lower_bound(&w, &v) <= v.norm_squared() + 1e-12);
        prop_assert!(gain_lower_bound(r.matrix(), &w, &v) <= v.dotc(&(r.matrix() * &v)).re + 1e-12 * quad);
    }

    #[test]
    fn params_round_trip_json(n_tx in 1usize..64, rician in prop_oneof![Just(f64::NEG_INFINITY), -10.0f64..20.0, Just(f64::INFINITY)]) {
        let p = SystemParams { n_tx, rician_db: rician, ..SystemParams::default() };
        let text = serde_json::to_string(&p).unwrap();
        let back: SystemParams = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(p, back);
    }
}
