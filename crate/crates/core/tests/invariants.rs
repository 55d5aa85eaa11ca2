use ctxmatch::hamiltonian::{delta_swap, hamiltonian};
use ctxmatch::model::sample_instance;
use ctxmatch::partition::{log_partition, PosteriorTable};
use ctxmatch::rng::{stream_rng, Stream};
use ctxmatch::{ModelParams, Permutation, TOLERANCES};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = ModelParams> {
    (1usize..=20, 1usize..=8, -0.99f64..0.99, -0.99f64..0.99)
        .prop_map(|(n, d, rho, eta)| ModelParams::new(n, d, rho, eta).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn identity_energy_is_exactly_zero(p in params(), seed in any::<u64>()) {
        let inst = sample_instance(p, seed).unwrap().relabel_to_identity();
        let h = hamiltonian(&inst, &Permutation::identity(p.n)).unwrap();
        prop_assert_eq!(h.v, 0.0);
        prop_assert_eq!([h.v_star_g, h.v_g, h.v_star_f, h.v_f], [0.0; 4]);
    }

    #[test]
    fn breakdown_assembles_v(p in params(), seed in any::<u64>()) {
        let inst = sample_instance(p, seed).unwrap().relabel_to_identity();
        let mut rng = stream_rng(seed, Stream::Auxiliary);
        let q = Permutation::random(p.n, &mut rng);
        let h = hamiltonian(&inst, &q).unwrap();
        let cg = p.rho / (1.0 - p.rho * p.rho);
        let cf = p.eta / (1.0 - p.eta * p.eta);
        let v = cg * (h.v_star_g - h.v_g) + cf * (h.v_star_f - h.v_f);
        prop_assert!((h.v - v).abs() <= 1e-12 * (1.0 + v.abs()));
    }

    #[test]
    fn swap_updates_match_recompute(p in params(), seed in any::<u64>(), i in 0usize..20, j in 0usize..20) {
        prop_assume!(p.n >= 2);
        let (i, j) = (i % p.n, j % p.n);
        prop_assume!(i != j);
        let inst = sample_instance(p, seed).unwrap().relabel_to_identity();
        let mut rng = stream_rng(seed ^ 1, Stream::Auxiliary);
        let q = Permutation::random(p.n, &mut rng);
        let h = hamiltonian(&inst, &q).unwrap();
        let updated = delta_swap(&inst, &q, &h, i, j).unwrap();
        let mut swapped = q.as_slice().to_vec();
        swapped.swap(i, j);
        let full = hamiltonian(&inst, &Permutation::new(swapped).unwrap()).unwrap();
        prop_assert!((updated.v - full.v).abs() <= TOLERANCES.delta * (1.0 + full.v.abs()));
    }

    #[test]
    fn log_partition_is_nonnegative(n in 1usize..=6, seed in any::<u64>(), rho in -0.999f64..0.999, eta in -0.999f64..0.999) {
        let p = ModelParams::new(n, 3, rho, eta).unwrap();
        let inst = sample_instance(p, seed).unwrap().relabel_to_identity();
        prop_assert!(log_partition(&inst).unwrap().log_z >= 0.0);
    }

    #[test]
    fn posterior_sums_to_one(n in 1usize..=6, seed in any::<u64>()) {
        let p = ModelParams::new(n, 2, 0.7, 0.5).unwrap();
        let inst = sample_instance(p, seed).unwrap().relabel_to_identity();
        let t = PosteriorTable::new(&inst, 7).unwrap();
        let total: f64 = (0..t.len()).map(|k| t.probability(k)).sum();
        prop_assert!((total - 1.0).abs() <= TOLERANCES.normalization);
        // the full ball has mass one
        if n > 1 {
            let r = 1.0 - 1.0 / n as f64;
            let outside: f64 = (0..t.len())
                .filter(|&k| t.permutation(k).overlap(&t.permutation(0)).unwrap() == 0)
                .map(|k| t.probability(k))
                .sum();
            prop_assert!((t.ball_mass(0, r).unwrap() + outside - 1.0).abs() <= 1e-10);
        }
    }
}
