//! Monte Carlo checks of the sampler and of the expectations of the
//! aligned sums in the identity frame.

use ctxmatch::hamiltonian::hamiltonian;
use ctxmatch::model::sample_instance;
use ctxmatch::rng::{stream_rng, Stream};
use ctxmatch::{ModelParams, Permutation};

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

#[test]
fn aligned_sums_have_expected_means() {
    let params = ModelParams::new(7, 4, 0.45, -0.3).unwrap();
    let mut rng = stream_rng(11, Stream::Auxiliary);
    // one fixed π per orbit size, unknown to the sampler
    let probes: Vec<Permutation> = [2, 4, 7]
        .iter()
        .map(|&t| Permutation::random_with_unfixed(7, t, &mut rng).unwrap())
        .collect();
    let mut g = vec![Vec::new(); probes.len()];
    let mut f = vec![Vec::new(); probes.len()];
    for seed in 0..10_000 {
        let inst = sample_instance(params, seed).unwrap().relabel_to_identity();
        for (k, p) in probes.iter().enumerate() {
            let h = hamiltonian(&inst, p).unwrap();
            g[k].push(h.v_star_g);
            f[k].push(h.v_star_f);
        }
    }
    for (k, p) in probes.iter().enumerate() {
        let expected_g = params.rho * p.num_unfixed_edges() as f64;
        let expected_f = params.eta * (params.d * p.num_unfixed_points()) as f64;
        let (mg, sg) = mean_se(&g[k]);
        let (mf, sf) = mean_se(&f[k]);
        assert!(
            (mg - expected_g).abs() <= 5.0 * sg,
            "V*_G: {mg} vs {expected_g} (se {sg})"
        );
        assert!(
            (mf - expected_f).abs() <= 5.0 * sf,
            "V*_F: {mf} vs {expected_f} (se {sf})"
        );
    }
}

#[test]
fn hidden_permutation_is_uniform_on_s4() {
    let params = ModelParams::new(4, 1, 0.0, 0.0).unwrap();
    let draws = 24_000;
    let mut counts = std::collections::HashMap::new();
    for seed in 0..draws {
        let inst = sample_instance(params, seed).unwrap();
        *counts
            .entry(inst.pi_star.as_slice().to_vec())
            .or_insert(0usize) += 1;
    }
    assert_eq!(counts.len(), 24);
    let expected = draws as f64 / 24.0;
    let chi2: f64 = counts
        .values()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    // 23 degrees of freedom; 0.999 quantile ≈ 49.7
    assert!(chi2 < 49.7, "chi-square {chi2}");
}

#[test]
fn marginals_are_standard_normal() {
    let params = ModelParams::new(120, 30, 0.6, 0.8).unwrap();
    let inst = sample_instance(params, 5).unwrap();
    let check = |name: &str, xs: &[f64]| {
        let (mean, se) = mean_se(xs);
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!(mean.abs() <= 5.0 * se, "{name} mean {mean}");
        // sd of the sample variance of N(0,1) is √(2/m)
        let tol = 5.0 * (2.0 / xs.len() as f64).sqrt();
        assert!((var - 1.0).abs() <= tol, "{name} variance {var}");
    };
    check("A", inst.a.upper());
    check("B", inst.b.upper());
    check("X", inst.x.data());
    check("Y", inst.y.data());
}

#[test]
fn symmetric_storage_has_zero_diagonal() {
    let inst = sample_instance(ModelParams::new(9, 2, 0.3, 0.3).unwrap(), 1).unwrap();
    for m in [&inst.a, &inst.b] {
        for i in 0..9 {
            assert_eq!(m.get(i, i), 0.0);
            for j in 0..9 {
                assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
    }
}
