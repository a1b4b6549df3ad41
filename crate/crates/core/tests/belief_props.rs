use dronereach::beliefmodel::{BeliefParams, BeliefStore, ConfigGrid, ConfigRanges, GaussianBelief};
use dronereach::graphmap::generate_grid_map;
use dronereach::truthmodel::{edge_energies, PhysicsConstants};
use dronereach::simharness::sample_config;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #[test]
    fn incremental_moments_equal_batch(
        mu0 in 0.1..50.0f64, var0 in 0.0..20.0f64, w0 in 0.1..5.0f64,
        updates in prop::collection::vec((0.1..80.0f64, 0.0..3.0f64), 0..=100),
    ) {
        let mut b = GaussianBelief::new(mu0, var0, w0);
        let mut history = vec![(mu0, var0 + mu0 * mu0, w0)];
        for &(h, w) in &updates {
            b.absorb(h, w);
            history.push((h, h * h, w));
            let total: f64 = history.iter().map(|x| x.2).sum();
            let mean = history.iter().map(|x| x.2 * x.0).sum::<f64>() / total;
            let second = history.iter().map(|x| x.2 * x.1).sum::<f64>() / total;
            prop_assert!(rel_close(b.mu, mean), "mu {} vs {}", b.mu, mean);
            prop_assert!(rel_close(b.eta2, second), "eta2 {} vs {}", b.eta2, second);
            prop_assert!(rel_close(b.weight, total));
            prop_assert!(b.sigma2 >= 0.0);
        }
    }

    #[test]
    fn store_updates_keep_invariants(seed in any::<u64>(), cross in any::<bool>(), steps in 1usize..40) {
        let g = generate_grid_map(3, 3, 100.0).unwrap();
        let ranges = ConfigRanges::default();
        let params = BeliefParams { cross_bin_transfer: cross, ..BeliefParams::default() };
        let mut store = BeliefStore::new(&g, ConfigGrid::standard(&ranges).unwrap(), params, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = PhysicsConstants::default();
        for _ in 0..steps {
            let before = store.clone();
            let config = sample_config(&mut rng, &ranges);
            let e = rng.random_range(0..g.edge_count());
            let energy = edge_energies(&g, &config, &k).unwrap()[e];
            store.record(e, &config, energy).unwrap();
            prop_assert_eq!(store.belief(store.bin_of(&config)).known_energy(e), Some(energy));
            for (old, new) in before.beliefs().iter().zip(store.beliefs()) {
                let unknown = (0..g.edge_count()).filter(|&x| !new.is_known(x)).count();
                prop_assert_eq!(new.unknown_count(), unknown);
                prop_assert_eq!(new.unknown_edges().count(), unknown);
                for x in 0..g.edge_count() {
                    prop_assert!(!(old.is_known(x) && !new.is_known(x)), "known edges stay known");
                    if let (Some(a), Some(b)) = (old.belief(x), new.belief(x)) {
                        prop_assert!(b.sigma2 >= 0.0);
                        prop_assert!(b.weight >= a.weight);
                    }
                }
            }
        }
    }
}
