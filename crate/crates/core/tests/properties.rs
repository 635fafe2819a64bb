use proptest::prelude::*;

use mfe_core::fixed_point::apply_operator;
use mfe_core::inner_opt::greedy_policy;
use mfe_core::mfe_average::sub_kernel_row;
use mfe_core::model::{builtin_congestion_model, CongestionParams, StateSpace};
use mfe_core::sampling::{indexed_rng, random_lipschitz};
use mfe_core::{
    estimate_constants, minimize_f, pushforward, sample_pair, w1_distance, w1_dual_certificate, Criterion,
    FEvaluator, GreedyPolicy, Model, StateMeasure,
};

fn measure(n: usize) -> impl Strategy<Value = StateMeasure> {
    prop::collection::vec(0.0..1.0_f64, n).prop_filter_map("zero mass", |w| StateMeasure::from_weights(&w).ok())
}

/// Planar points, so that W1 goes through the transportation LP.
fn planar_space() -> impl Strategy<Value = StateSpace> {
    prop::collection::vec((-3.0..3.0_f64, -3.0..3.0_f64), 2..8).prop_filter_map("duplicate points", |pts| {
        StateSpace::from_coords(pts.into_iter().map(|(a, b)| vec![a, b]).collect()).ok()
    })
}

fn space_and_measures(k: usize) -> impl Strategy<Value = (StateSpace, Vec<StateMeasure>)> {
    planar_space().prop_flat_map(move |s| {
        let n = s.len();
        (Just(s), prop::collection::vec(measure(n), k))
    })
}

fn line_and_measures() -> impl Strategy<Value = (StateSpace, StateMeasure, StateMeasure)> {
    prop::collection::vec(-10.0..10.0_f64, 2..30)
        .prop_filter_map("duplicate points", |xs| StateSpace::from_coords(xs.into_iter().map(|x| vec![x]).collect()).ok())
        .prop_flat_map(|s| {
            let n = s.len();
            (Just(s), measure(n), measure(n))
        })
}

fn box_model(criterion: Criterion) -> Model {
    CongestionParams {
        n_states: 10,
        n_actions: 9,
        box_actions: true,
        c_move: 2.0,
        c_crowd: 0.05,
        reversion: 0.7,
        attenuation: 0.3,
        spread: 0.3,
        ..CongestionParams::default()
    }
    .build(criterion, (criterion == Criterion::Discounted).then_some(0.8))
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn w1_is_a_metric((space, ms) in space_and_measures(3)) {
        let (a, b, c) = (&ms[0], &ms[1], &ms[2]);
        let ab = w1_distance(a, b, &space).unwrap();
        let ba = w1_distance(b, a, &space).unwrap();
        let ac = w1_distance(a, c, &space).unwrap();
        let cb = w1_distance(c, b, &space).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-9);
        prop_assert!(ab <= ac + cb + 1e-9);
        prop_assert!(w1_distance(a, a, &space).unwrap() <= 1e-9);
        let max_gap = a.probs().iter().zip(b.probs()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        if max_gap > 1e-6 {
            prop_assert!(ab > 0.0);
        }
    }

    #[test]
    fn line_formula_equals_lp((space, a, b) in line_and_measures()) {
        let fast = w1_distance(&a, &b, &space).unwrap();
        let lp = w1_distance(&a, &b, &space.without_line_structure()).unwrap();
        prop_assert!((fast - lp).abs() <= 1e-9, "{} vs {}", fast, lp);
    }

    #[test]
    fn dual_value_never_exceeds_primal((space, ms) in space_and_measures(2), seed in any::<u64>()) {
        let mut rng = indexed_rng(seed, "test-potential", 0);
        let g = random_lipschitz(&space, 1.0, 5.0, &mut rng);
        let dual = w1_dual_certificate(&ms[0], &ms[1], &space, &g).unwrap();
        prop_assert!(dual <= w1_distance(&ms[0], &ms[1], &space).unwrap() + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pushforward_stays_on_simplex(mu in measure(20), picks in prop::collection::vec(0usize..5, 20)) {
        let model = builtin_congestion_model(20, 5, 0.1, (1.0, 2.0)).unwrap();
        let policy = GreedyPolicy::new(picks.iter().map(|&k| model.actions().lattice()[k].clone()).collect());
        let out = pushforward(&mu, &policy, &model);
        prop_assert!(out.probs().iter().all(|p| *p >= 0.0));
        prop_assert!((out.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn kernel_rows_are_probability_vectors(mu in measure(10), x in 0usize..10, a in -1.0..1.0_f64) {
        let model = box_model(Criterion::Discounted);
        let row = model.kernel_row(x, &[a], &mu);
        prop_assert!(row.iter().all(|p| *p >= 0.0));
        prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn sub_kernel_rows_have_complementary_mass(mu in measure(10), x in 0usize..10, a in -1.0..1.0_f64) {
        let model = box_model(Criterion::Average);
        let lam = estimate_constants(&model, 4, 0).unwrap().lambda.unwrap();
        let mass: f64 = lam.iter().sum();
        let row = sub_kernel_row(&model, x, &[a], &mu, &lam);
        prop_assert!(row.iter().all(|p| *p >= 0.0));
        prop_assert!((row.iter().sum::<f64>() - (1.0 - mass)).abs() <= 1e-12);
    }

    #[test]
    fn minimizer_beats_sampled_actions(mu in measure(10), seed in any::<u64>(), probes in prop::collection::vec(-1.0..1.0_f64, 16)) {
        let model = box_model(Criterion::Discounted);
        let mut rng = indexed_rng(seed, "test-value", 0);
        let v = random_lipschitz(model.states(), 1.0, 5.0, &mut rng);
        let ev = FEvaluator::for_model(&model, &v, &mu, None).unwrap();
        for x in [0, 4, 9] {
            let (a, fa) = minimize_f(&ev, x).unwrap();
            for p in &probes {
                prop_assert!(fa <= ev.value(x, &[*p]) + 1e-12);
            }
            // First-order condition at the returned point.
            let h = 1e-6;
            let lo = ev.value(x, &[(a[0] - h).max(-1.0)]);
            let hi = ev.value(x, &[(a[0] + h).min(1.0)]);
            let slope = (hi - lo) / ((a[0] + h).min(1.0) - (a[0] - h).max(-1.0));
            let interior = a[0] > -1.0 && a[0] < 1.0;
            prop_assert!(!interior || slope.abs() <= 1e-5, "slope {} at {}", slope, a[0]);
            prop_assert!(a[0] != -1.0 || slope >= -1e-5);
            prop_assert!(a[0] != 1.0 || slope <= 1e-5);
        }
        prop_assert_eq!(greedy_policy(&ev).unwrap(), greedy_policy(&ev).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn constants_grow_with_probe_count(n in 2usize..6, extra in 1usize..6, seed in 0u64..1000) {
        let model = builtin_congestion_model(8, 3, 0.2, (1.0, 2.0)).unwrap();
        let few = estimate_constants(&model, n, seed).unwrap();
        let more = estimate_constants(&model, n + extra, seed).unwrap();
        for (a, b) in [
            (few.l1, more.l1),
            (few.l2, more.l2),
            (few.k1_action, more.k1_action),
            (few.k1_measure, more.k1_measure),
            (few.k2_state, more.k2_state),
            (few.m, more.m),
            (few.alpha, more.alpha),
        ] {
            prop_assert!(b >= a, "{} < {}", b, a);
        }
    }

    #[test]
    fn stored_modulus_is_a_function_of_stored_constants(seed in 0u64..1000, average in any::<bool>()) {
        let criterion = if average { Criterion::Average } else { Criterion::Discounted };
        let model = box_model(criterion);
        let c = estimate_constants(&model, 4, seed).unwrap();
        prop_assert_eq!(c.recompute_modulus().to_bits(), c.modulus().to_bits());
    }

    #[test]
    fn operator_maps_class_into_itself(seed in 0u64..1000, average in any::<bool>()) {
        let criterion = if average { Criterion::Average } else { Criterion::Discounted };
        let model = box_model(criterion);
        let c = estimate_constants(&model, 8, 0).unwrap();
        let mut rng = indexed_rng(seed, "test-class", 0);
        let pair = sample_pair(&model, &c, &mut rng).unwrap();
        prop_assert!(pair.q.membership(&model, c.value_bound, c.lip_bound).inside);
        let (image, _) = apply_operator(&model, &pair, c.lambda.as_deref()).unwrap();
        let m = image.q.membership(&model, c.value_bound, c.lip_bound);
        prop_assert!(m.inside, "{:?}", m);
        prop_assert!((image.mu.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}
