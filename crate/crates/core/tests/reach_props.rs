mod common;

use common::{brute_force_cost, random_belief, random_graph, random_weights};
use dronereach::reachability::{
    max_reach_probability, probabilistic_reachable_set, true_reachable_from_weights, ReachMode, SuccessProbability,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn probability_rises_with_budget(b in 0.0..100.0f64, extra in 0.0..50.0f64, known in 0.0..40.0f64, mu in 0.0..40.0f64, var in 0.0..30.0f64) {
        let lo = SuccessProbability::evaluate(b, known, mu, var).value;
        let hi = SuccessProbability::evaluate(b + extra, known, mu, var).value;
        prop_assert!(hi >= lo);
        prop_assert!((0.0..=1.0).contains(&lo));
    }

    #[test]
    fn probability_falls_with_mean(b in 0.0..100.0f64, known in 0.0..40.0f64, mu in 0.0..40.0f64, extra in 0.0..20.0f64, var in 0.0..30.0f64) {
        let lo = SuccessProbability::evaluate(b, known, mu + extra, var).value;
        let hi = SuccessProbability::evaluate(b, known, mu, var).value;
        prop_assert!(hi >= lo);
    }

    #[test]
    fn true_set_matches_enumeration(seed in any::<u64>(), n in 2usize..=8, extra in 0usize..10, budget in 2.0..40.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, n, extra);
        let out = random_weights(&mut rng, &g);
        let back = random_weights(&mut rng, &g);
        let set = true_reachable_from_weights(&g, &out, &back, budget).unwrap();
        for &v in g.destinations() {
            let best = brute_force_cost(&g, &out, 0, v).unwrap() + brute_force_cost(&g, &back, v, 0).unwrap();
            prop_assert_eq!(set.contains(&v), best <= budget, "destination {}", v);
        }
    }

    #[test]
    fn reachable_set_shrinks_with_phi(seed in any::<u64>(), n in 2usize..=8, budget in 5.0..40.0f64, p1 in 0.0..1.0f64, p2 in 0.0..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, n, 6);
        let bl = random_belief(&mut rng, &g, 0.5);
        let b0 = random_belief(&mut rng, &g, 0.5);
        let (lo, hi) = (p1.min(p2), p1.max(p2));
        for mode in [ReachMode::Exact, ReachMode::Surrogate] {
            let loose = probabilistic_reachable_set(&g, &bl, &b0, budget, lo, mode).unwrap();
            let strict = probabilistic_reachable_set(&g, &bl, &b0, budget, hi, mode).unwrap();
            prop_assert!(strict.members.is_subset(&loose.members));
        }
    }

    #[test]
    fn exact_dominates_surrogate(seed in any::<u64>(), n in 2usize..=7, budget in 5.0..40.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, n, 6);
        let bl = random_belief(&mut rng, &g, 0.6);
        let b0 = random_belief(&mut rng, &g, 0.6);
        for &v in g.destinations() {
            let exact = max_reach_probability(&g, &bl, &b0, v, budget, ReachMode::Exact).unwrap();
            let surrogate = max_reach_probability(&g, &bl, &b0, v, budget, ReachMode::Surrogate).unwrap();
            prop_assert!(exact.probability.value >= surrogate.probability.value - 1e-12);
            prop_assert!(exact.trip.unwrap().is_valid(&g));
        }
    }
}
