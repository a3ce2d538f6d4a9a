use proptest::prelude::*;

use sparc_core::bounds::{coherent_spb, noncentral_t_cdf, SpbConfig};
use sparc_core::decoders::{bomp, mbomp, ml_bruteforce, mlmp, pmlmp, DecoderConfig};
use sparc_core::dictionary::{build_mub_prime, partition_sections};
use sparc_core::harness::{fmt_float, generate_trial, sigma_v_sq_for, wilson_interval};
use sparc_core::samp::{section_weights, CMatrix};
use sparc_core::StreamKey;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decoders_ignore_per_antenna_phases(seed in any::<u64>(), db in -2.0f64..10.0, phases in prop::collection::vec(0.0f64..6.3, 3)) {
        let dict = build_mub_prime(7).unwrap().partitioned(2).unwrap();
        let sigma_v_sq = sigma_v_sq_for(&dict, db);
        let data = generate_trial(&dict, StreamKey::new(seed, 0, 0), 3, 1.0 / 3.0, sigma_v_sq).unwrap();
        let rotated = data.y.rotate_antennas(&phases);
        let cfg = DecoderConfig::new(1.0 / 3.0, sigma_v_sq, 1).unwrap();
        let p4 = cfg.with_paths(4);
        prop_assert_eq!(mlmp(&data.y, &dict, &cfg).unwrap().support, mlmp(&rotated, &dict, &cfg).unwrap().support);
        prop_assert_eq!(pmlmp(&data.y, &dict, &p4).unwrap().support, pmlmp(&rotated, &dict, &p4).unwrap().support);
        prop_assert_eq!(bomp(&data.y, &dict, &cfg).unwrap().support, bomp(&rotated, &dict, &cfg).unwrap().support);
        prop_assert_eq!(mbomp(&data.y, &dict, &cfg).unwrap().support, mbomp(&rotated, &dict, &cfg).unwrap().support);
        prop_assert_eq!(ml_bruteforce(&data.y, &dict, &cfg).unwrap().support, ml_bruteforce(&rotated, &dict, &cfg).unwrap().support);
    }

    #[test]
    fn brute_force_metric_dominates_greedy(seed in any::<u64>(), db in -2.0f64..10.0) {
        let dict = build_mub_prime(5).unwrap().partitioned(2).unwrap();
        let sigma_v_sq = sigma_v_sq_for(&dict, db);
        let data = generate_trial(&dict, StreamKey::new(seed, 1, 0), 2, 0.5, sigma_v_sq).unwrap();
        let cfg = DecoderConfig::new(0.5, sigma_v_sq, 1).unwrap();
        let best = ml_bruteforce(&data.y, &dict, &cfg).unwrap().metric;
        for r in [mlmp(&data.y, &dict, &cfg).unwrap(), bomp(&data.y, &dict, &cfg).unwrap(), mbomp(&data.y, &dict, &cfg).unwrap()] {
            prop_assert!(r.metric <= best + 1e-9 * best.abs().max(1.0));
        }
    }

    #[test]
    fn csv_floats_keep_ten_digits(x in prop::num::f64::NORMAL) {
        let back: f64 = fmt_float(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-10 * x.abs(), "{} -> {}", x, fmt_float(x));
    }

    #[test]
    fn wilson_interval_brackets_the_estimate(trials in 1u64..100_000, frac in 0.0f64..=1.0) {
        let errors = (frac * trials as f64).floor() as u64;
        let (lo, hi) = wilson_interval(errors, trials, 1.96);
        let p = errors as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }

    #[test]
    fn partitions_fit_and_are_powers_of_two(l in 1usize..100_000, k in 1usize..40) {
        prop_assume!(k <= l);
        let plan = partition_sections(l, k).unwrap();
        prop_assert_eq!(plan.n_sections(), k);
        prop_assert!(plan.total_cols() <= l);
        prop_assert!(plan.sizes().iter().all(|s| s.is_power_of_two()));
        prop_assert!(plan.sizes().windows(2).all(|w| w[0] >= w[1]));
        // Doubling any section would overflow the budget.
        let smallest = *plan.sizes().last().unwrap();
        prop_assert!(plan.total_cols() + smallest > l);
    }

    #[test]
    fn section_weights_are_distributions(seed in any::<u64>(), tau_sq in 0.01f64..5.0, scale in 0.1f64..20.0) {
        let dict = build_mub_prime(7).unwrap().partitioned(3).unwrap();
        let mut rng = StreamKey::new(seed, 0, 0).rng();
        let b = CMatrix::from_fn(49, 2, |_, _| sparc_core::channel::complex_normal(&mut rng, scale));
        let w = section_weights(&b, tau_sq, &dict, 0.5).unwrap();
        for range in dict.sections() {
            let total: f64 = w[range.clone()].iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(w[range.clone()].iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn nctcdf_is_a_monotone_distribution(t in -20.0f64..20.0, step in 0.0f64..5.0, delta in -10.0f64..10.0, nu in 1.0f64..300.0) {
        let a = noncentral_t_cdf(t, delta, nu);
        let b = noncentral_t_cdf(t + step, delta, nu);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(a <= b + 1e-10, "F({}) = {} > F({}) = {}", t, a, t + step, b);
        // Reflection: F(t; delta) = 1 - F(-t; -delta).
        prop_assert!((a + noncentral_t_cdf(-t, -delta, nu) - 1.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sphere_packing_bound_is_a_decreasing_probability(power in 0.01f64..3.0, factor in 1.0f64..4.0, d in 1usize..6) {
        let cfg = SpbConfig { n_complex: 32, log2_m: 20.0, power, antennas: d, quad_points: 32 };
        let a = coherent_spb(&cfg).unwrap();
        let b = coherent_spb(&SpbConfig { power: power * factor, ..cfg }).unwrap();
        let c = coherent_spb(&SpbConfig { antennas: d + 1, ..cfg }).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a + 1e-9 && c <= a + 1e-9, "P: {} -> {}, D: {} -> {}", a, b, a, c);
    }
}
