//! Property tests for the invariants of each module.

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wickfield::fields::{estimate_laplace, estimate_moment, field_complex, mean_value_defect};
use wickfield::sampler::{birth_acceptance, death_acceptance, ChainState};
use wickfield::{ComplexPoint, Configuration, GroupElement, KernelSpec, PotentialSpec, Profile, SamplerConfig, TestFunction, Window};

fn complex_point(dim: usize) -> impl Strategy<Value = ComplexPoint> {
    prop::collection::vec((-2.0..2.0f64, -1.0..1.0f64), dim).prop_map(|v| ComplexPoint(v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()))
}

fn points(dim: usize, max: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(lo..hi, dim), 0..max)
}

fn config(dim: usize, max: usize) -> impl Strategy<Value = Configuration> {
    points(dim, max, 0.0, 4.0).prop_map(move |p| Configuration::from_points(dim, &p).unwrap())
}

fn isometry(dim: usize) -> impl Strategy<Value = GroupElement> {
    any::<u64>().prop_map(move |s| GroupElement::random_isometry(dim, 3.0, &mut ChaCha8Rng::seed_from_u64(s)))
}

fn sq_dist(a: &ComplexPoint, b: &ComplexPoint) -> Complex64 {
    a.coords().iter().zip(b.coords()).map(|(x, y)| (x - y) * (x - y)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn group_composition_is_associative(g in isometry(3), h in isometry(3), k in isometry(3), z in complex_point(3)) {
        let left = g.compose(&h).unwrap().compose(&k).unwrap().apply(&z).unwrap();
        let right = g.compose(&h.compose(&k).unwrap()).unwrap().apply(&z).unwrap();
        prop_assert!(left.distance(&right) < 1e-11);
    }

    #[test]
    fn inverse_undoes_the_action(g in isometry(2), z in complex_point(2)) {
        let back = g.inverse().apply(&g.apply(&z).unwrap()).unwrap();
        prop_assert!(back.distance(&z) < 1e-12);
    }

    #[test]
    fn isometries_preserve_the_bilinear_form(g in isometry(3), z in complex_point(3), w in complex_point(3)) {
        let before = sq_dist(&z, &w);
        let after = sq_dist(&g.apply(&z).unwrap(), &g.apply(&w).unwrap());
        prop_assert!((before - after).norm() < 1e-11);
    }

    #[test]
    fn action_commutes_with_conjugation(g in isometry(2), z in complex_point(2)) {
        let a = g.apply(&z.conj()).unwrap();
        let b = g.apply(&z).unwrap().conj();
        prop_assert!(a.distance(&b) < 1e-13);
    }

    #[test]
    fn pairing_and_counts_are_additive(eta in config(1, 8), gamma in config(1, 8), c in 0.5..3.5f64) {
        let h = TestFunction::cosine_bump(vec![c], 1.0, 1.0).unwrap();
        let sum = eta.union(&gamma).unwrap();
        prop_assert!((sum.pair(&h) - eta.pair(&h) - gamma.pair(&h)).abs() < 1e-12);
        let a = Window::cube(1, 1.0, 2.5).unwrap();
        prop_assert_eq!(sum.count_in(&a), eta.count_in(&a) + gamma.count_in(&a));
        prop_assert_eq!(sum.len(), eta.len() + gamma.len());
    }

    #[test]
    fn measure_order_is_a_partial_order(eta in config(2, 6), gamma in config(2, 6)) {
        let sum = eta.union(&gamma).unwrap();
        prop_assert!(eta.leq(&eta));
        prop_assert!(eta.leq(&sum));
        prop_assert!(gamma.leq(&sum));
        if !gamma.is_empty() {
            prop_assert!(!sum.leq(&eta));
        }
        let swapped = gamma.union(&eta).unwrap();
        prop_assert!(sum.leq(&swapped) && swapped.leq(&sum));
        prop_assert_eq!(sum.canonical(), swapped.canonical());
    }

    #[test]
    fn gaussian_kernel_is_invariant(g in isometry(2), z in complex_point(2), x in prop::collection::vec(-2.0..2.0f64, 2)) {
        let k = KernelSpec::gaussian(2).unwrap();
        let a = k.eval_complex(&g.apply(&z).unwrap(), &g.apply_real(&x).unwrap()).unwrap();
        let b = k.eval_complex(&z, &x).unwrap();
        prop_assert!((a - b).norm() <= 1e-9 * b.norm().max(1.0));
    }

    #[test]
    fn gaussian_kernel_is_holomorphic(z in complex_point(2), axis in 0..2usize) {
        let k = KernelSpec::gaussian(2).unwrap();
        let defect = mean_value_defect(|w| k.eval_complex(w, &[0.1, -0.2]), &z, axis, 0.25, 32).unwrap();
        prop_assert!(defect < 1e-12);
    }

    #[test]
    fn field_is_linear_in_the_configuration(eta in config(1, 6), gamma in config(1, 6), z in complex_point(1)) {
        let k = KernelSpec::gaussian(1).unwrap();
        let sum = field_complex(&eta.union(&gamma).unwrap(), &k, &z).unwrap();
        let parts = field_complex(&eta, &k, &z).unwrap() + field_complex(&gamma, &k, &z).unwrap();
        prop_assert!((sum - parts).norm() <= 1e-12 * sum.norm().max(1.0));
    }

    #[test]
    fn field_is_increasing_at_real_points(eta in config(1, 6), gamma in config(1, 6), x in 0.0..4.0f64) {
        let k = KernelSpec::gaussian(1).unwrap();
        let z = ComplexPoint::from_real(&[x]);
        let small = field_complex(&eta, &k, &z).unwrap();
        let big = field_complex(&eta.union(&gamma).unwrap(), &k, &z).unwrap();
        prop_assert!(small.re <= big.re + 1e-14);
        prop_assert_eq!(small.im, 0.0);
    }

    #[test]
    fn field_conjugation_relation(eta in config(1, 8), z in complex_point(1)) {
        let k = KernelSpec::gaussian(1).unwrap();
        let a = field_complex(&eta, &k, &z.conj()).unwrap();
        let b = field_complex(&eta, &k, &z).unwrap().conj();
        prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
    }

    #[test]
    fn moment_estimates_are_permutation_symmetric(seed in any::<u64>(), zs in prop::collection::vec(complex_point(1), 3), flags in prop::collection::vec(any::<bool>(), 3)) {
        let k = KernelSpec::gaussian(1).unwrap();
        let w = Window::cube(1, 0.0, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<Configuration> = (0..64).map(|_| Configuration::sample_poisson(&w, 1.0, &mut rng).unwrap()).collect();
        let a = estimate_moment(&samples, &k, &zs, &flags).unwrap();
        let order = [2, 0, 1];
        let p: Vec<ComplexPoint> = order.iter().map(|&i| zs[i].clone()).collect();
        let f: Vec<bool> = order.iter().map(|&i| flags[i]).collect();
        let b = estimate_moment(&samples, &k, &p, &f).unwrap();
        prop_assert_eq!(a.value.re.to_bits(), b.value.re.to_bits());
        prop_assert_eq!(a.value.im.to_bits(), b.value.im.to_bits());
    }

    #[test]
    fn laplace_estimate_decreases_in_t(seed in any::<u64>(), t in 0.1..3.0f64) {
        let w = Window::cube(1, 0.0, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<Configuration> = (0..64).map(|_| Configuration::sample_poisson(&w, 1.0, &mut rng).unwrap()).collect();
        let h = TestFunction::cosine_bump(vec![2.0], 1.0, 1.0).unwrap();
        let a = estimate_laplace(&samples, &h.scaled(t)).unwrap();
        let b = estimate_laplace(&samples, &h.scaled(t * 1.5)).unwrap();
        prop_assert!(b.value.re <= a.value.re);
        prop_assert!(a.value.re > 0.0 && a.value.re <= 1.0);
    }

    #[test]
    fn acceptance_ratios_satisfy_detailed_balance(p in 0.01..10.0f64, sigma in 0.1..20.0f64, n in 0usize..40) {
        let birth = birth_acceptance(p, sigma, n);
        let death = death_acceptance(p, sigma, n + 1);
        prop_assert!((0.0..=1.0).contains(&birth) && (0.0..=1.0).contains(&death));
        // pi(n+1) / pi(n) = p sigma / (n + 1) for the birth-death pair.
        prop_assert!((birth / death - p * sigma / (n + 1) as f64).abs() <= 1e-12 * (p * sigma / (n + 1) as f64).max(1.0));
    }
}

fn wr() -> PotentialSpec {
    PotentialSpec::new(Profile::WidomRowlinson, 1.0, KernelSpec::gaussian(1).unwrap(), Window::cube(1, 0.0, 3.0).unwrap(), None).unwrap()
}

fn in_window() -> impl Strategy<Value = Configuration> {
    points(1, 6, 0.0, 3.0).prop_map(|p| Configuration::from_points(1, &p).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn energy_difference_matches_potential(eta in in_window(), x in 0.0..3.0f64) {
        let p = wr();
        let mut bigger = eta.clone();
        bigger.push(&[x]).unwrap();
        let direct = p.potential(&bigger) - p.potential(&eta);
        let diff = p.energy_diff(&[x], &eta);
        prop_assert!((direct - diff).abs() < 1e-10);
    }

    #[test]
    fn papangelou_is_increasing(eta in in_window(), gamma in in_window(), x in 0.0..3.0f64) {
        let p = wr();
        let big = eta.union(&gamma).unwrap();
        prop_assert!(p.papangelou(&[x], &eta) <= p.papangelou(&[x], &big) * (1.0 + 1e-12));
        prop_assert!(p.papangelou(&[x], &eta) <= 1.0 + 1e-12);
    }

    #[test]
    fn energy_is_stable(eta in in_window()) {
        let p = wr();
        let u = p.potential(&eta);
        prop_assert!(u >= -1e-12);
        prop_assert!(u <= p.stability_bound() * eta.len() as f64 + 1e-9);
    }

    #[test]
    fn sampler_cache_stays_consistent(seed in any::<u64>()) {
        let p = wr();
        let cfg = SamplerConfig { intensity: 2.0, ..Default::default() };
        let mut st = ChainState::new(&p, seed, 0);
        for _ in 0..300 {
            st.step(&p, &cfg).unwrap();
        }
        let cached = st.energy(&p);
        let drift = st.refresh(&p).unwrap();
        prop_assert!(drift < 1e-9);
        prop_assert!((cached - p.potential(st.configuration())).abs() < 1e-9);
    }
}
