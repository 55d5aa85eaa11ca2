//! Exact partition function and posterior probabilities by enumeration of
//! `S_n` (small `n` only).

use num_bigint::BigUint;

use crate::combinatorics::factorial;
use crate::error::{check_cap, Error, Result, ENUMERATION_CAP};
use crate::hamiltonian::EnergyTable;
use crate::model::Instance;
use crate::permutation::{for_each_by_swaps, lexicographic, overlap_slices, Permutation};

#[derive(Debug, Clone, PartialEq)]
pub struct LogPartition {
    pub log_z: f64,
    pub n_terms: BigUint,
}

/// Streaming log-sum-exp. Starts from the identity term `exp(-V(id)) = 1`,
/// so the running sum never drops below one and the result is `≥ 0`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogSumExp {
    max: f64,
    scaled: f64,
}

impl LogSumExp {
    pub(crate) fn with_identity_term() -> Self {
        LogSumExp {
            max: 0.0,
            scaled: 1.0,
        }
    }

    #[inline]
    pub(crate) fn push(&mut self, x: f64) {
        if x > self.max {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.scaled += (x - self.max).exp();
        }
    }

    pub(crate) fn value(&self) -> f64 {
        self.max + self.scaled.ln()
    }
}

/// `log Z` with `Z = Σ_{π ∈ S_n} exp(-V(π))`, enumerating all `n!` terms.
pub fn log_partition(inst: &Instance) -> Result<LogPartition> {
    log_partition_capped(inst, ENUMERATION_CAP)
}

pub fn log_partition_capped(inst: &Instance, cap: usize) -> Result<LogPartition> {
    let n = inst.n();
    check_cap(n, cap)?;
    let table = EnergyTable::new(inst)?;
    let mut acc = LogSumExp::with_identity_term();
    let mut v = 0.0;
    for_each_by_swaps(n, |a, swap| {
        if let Some((i, j)) = swap {
            // `a` is already swapped; swapping back costs -delta.
            v -= table.swap_delta(a, i, j);
            acc.push(-v);
        }
    });
    let log_z = acc.value();
    assert!(
        log_z >= 0.0,
        "log Z = {log_z} < 0 contradicts the identity term"
    );
    Ok(LogPartition {
        log_z,
        n_terms: factorial(n as u64),
    })
}

fn check_radius(r: f64) -> Result<()> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::param("r", format!("{r} is outside [0, 1)")));
    }
    Ok(())
}

/// Largest number of disagreeing positions allowed by radius `r` on `n`
/// points: `d(p, q) = (n - ov)/n ≤ r`.
pub(crate) fn max_disagreements(n: usize, r: f64) -> usize {
    ((r * n as f64) + 1e-9).floor() as usize
}

/// `P_post(p) = exp(-V(p) - log Z)`.
pub fn posterior(inst: &Instance, p: &Permutation) -> Result<f64> {
    let lz = log_partition(inst)?;
    let table = EnergyTable::new(inst)?;
    check_len(inst, p)?;
    Ok((-table.value(p.as_slice()) - lz.log_z).exp())
}

/// Posterior mass of the closed ball `{q : d(p, q) ≤ r}`.
pub fn posterior_ball_mass(inst: &Instance, p: &Permutation, r: f64) -> Result<f64> {
    check_radius(r)?;
    check_len(inst, p)?;
    let lz = log_partition(inst)?;
    let table = EnergyTable::new(inst)?;
    let n = inst.n();
    let min_overlap = n - max_disagreements(n, r);
    let center = p.as_slice();
    let mut mass = 0.0;
    for q in lexicographic(n) {
        if overlap_slices(center, &q) >= min_overlap {
            mass += (-table.value(&q) - lz.log_z).exp();
        }
    }
    Ok(mass)
}

fn check_len(inst: &Instance, p: &Permutation) -> Result<()> {
    if p.len() != inst.n() {
        return Err(Error::Dimension(format!(
            "permutation of length {} for n = {}",
            p.len(),
            inst.n()
        )));
    }
    Ok(())
}

/// Every permutation of `S_n` in lexicographic order with its energy and
/// posterior probability.
#[derive(Debug, Clone)]
pub struct PosteriorTable {
    n: usize,
    perms: Vec<Vec<u8>>,
    energies: Vec<f64>,
    probs: Vec<f64>,
    log_z: f64,
}

impl PosteriorTable {
    pub fn new(inst: &Instance, cap: usize) -> Result<Self> {
        let n = inst.n();
        check_cap(n, cap.min(ENUMERATION_CAP))?;
        let table = EnergyTable::new(inst)?;
        let mut perms = Vec::new();
        let mut energies = Vec::new();
        for q in lexicographic(n) {
            energies.push(table.value(&q));
            perms.push(q.into_iter().map(|v| v as u8).collect());
        }
        let mut acc = LogSumExp::with_identity_term();
        // index 0 is the identity, already counted
        for &v in &energies[1..] {
            acc.push(-v);
        }
        let log_z = acc.value();
        let probs = energies.iter().map(|v| (-v - log_z).exp()).collect();
        Ok(PosteriorTable {
            n,
            perms,
            energies,
            probs,
            log_z,
        })
    }

    pub fn len(&self) -> usize {
        self.perms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perms.is_empty()
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn permutation(&self, k: usize) -> Permutation {
        Permutation::from_vec_unchecked(self.perms[k].iter().map(|&v| v as usize).collect())
    }

    pub fn energy(&self, k: usize) -> f64 {
        self.energies[k]
    }

    pub fn probability(&self, k: usize) -> f64 {
        self.probs[k]
    }

    /// Ball mass around the `k`-th permutation.
    pub fn ball_mass(&self, k: usize, r: f64) -> Result<f64> {
        check_radius(r)?;
        Ok(self.ball_mass_unchecked(k, self.n - max_disagreements(self.n, r)))
    }

    fn ball_mass_unchecked(&self, k: usize, min_overlap: usize) -> f64 {
        let center = &self.perms[k];
        self.perms
            .iter()
            .zip(&self.probs)
            .filter(|(q, _)| overlap_slices(center, q) >= min_overlap)
            .map(|(_, p)| p)
            .sum()
    }

    /// Index of the permutation with the largest ball mass; ties go to the
    /// lexicographically smallest.
    pub fn argmax_ball_mass(&self, r: f64) -> Result<usize> {
        check_radius(r)?;
        let min_overlap = self.n - max_disagreements(self.n, r);
        let mut best = (0, f64::NEG_INFINITY);
        for k in 0..self.len() {
            let m = self.ball_mass_unchecked(k, min_overlap);
            if m > best.1 {
                best = (k, m);
            }
        }
        Ok(best.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_instance, ModelParams};

    fn id_frame(n: usize, d: usize, rho: f64, eta: f64, seed: u64) -> Instance {
        sample_instance(ModelParams::new(n, d, rho, eta).unwrap(), seed)
            .unwrap()
            .relabel_to_identity()
    }

    fn ln_factorial(n: usize) -> f64 {
        (1..=n).map(|k| (k as f64).ln()).sum()
    }

    #[test]
    fn single_node_has_zero_log_partition() {
        let lz = log_partition(&id_frame(1, 3, 0.7, 0.7, 0)).unwrap();
        assert_eq!(lz.log_z, 0.0);
        assert_eq!(lz.n_terms, BigUint::from(1u32));
    }

    #[test]
    fn no_signal_gives_log_factorial() {
        for n in 1..=8 {
            let lz = log_partition(&id_frame(n, 2, 0.0, 0.0, n as u64)).unwrap();
            assert!((lz.log_z - ln_factorial(n)).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn matches_naive_summation() {
        let inst = id_frame(5, 3, 0.6, 0.4, 77);
        let table = EnergyTable::new(&inst).unwrap();
        let naive: f64 = lexicographic(5).map(|q| (-table.value(&q)).exp()).sum();
        let lz = log_partition(&inst).unwrap();
        assert!((lz.log_z - naive.ln()).abs() <= 1e-10 * naive.ln().abs());
    }

    #[test]
    fn two_nodes_have_two_terms() {
        let inst = id_frame(2, 4, 0.5, 0.5, 9);
        let tau = Permutation::transposition(2, 0, 1).unwrap();
        let v = crate::hamiltonian::hamiltonian(&inst, &tau).unwrap().v;
        let lz = log_partition(&inst).unwrap();
        assert!((lz.log_z - (1.0 + (-v).exp()).ln()).abs() < 1e-14);
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let inst = id_frame(11, 1, 0.1, 0.1, 0);
        let err = log_partition(&inst).unwrap_err();
        assert!(err.to_string().contains("n ≤ 10"), "{err}");
        assert!(matches!(
            posterior(&inst, &Permutation::identity(11)),
            Err(Error::EnumerationCap { cap: 10, .. })
        ));
    }

    #[test]
    fn large_energies_do_not_overflow() {
        let inst = id_frame(6, 50, 0.99, 0.99, 4);
        let lz = log_partition(&inst).unwrap();
        assert!(lz.log_z.is_finite() && lz.log_z >= 0.0);
    }

    #[test]
    fn uniform_posterior_without_signal() {
        let inst = id_frame(4, 2, 0.0, 0.0, 1);
        for q in lexicographic(4) {
            let p = posterior(&inst, &Permutation::new(q).unwrap()).unwrap();
            assert!((p - 1.0 / 24.0).abs() < 1e-15);
        }
    }

    #[test]
    fn ball_masses_match_direct_summation() {
        let inst = id_frame(4, 3, 0.5, 0.5, 21);
        let table = EnergyTable::new(&inst).unwrap();
        let weights: Vec<(Vec<usize>, f64)> = lexicographic(4)
            .map(|q| {
                let w = (-table.value(&q)).exp();
                (q, w)
            })
            .collect();
        let z: f64 = weights.iter().map(|(_, w)| w).sum();
        let center = Permutation::new(vec![1, 0, 2, 3]).unwrap();
        for (r, max_dis) in [(0.0, 0), (0.25, 1), (0.5, 2), (0.75, 3)] {
            let direct: f64 = weights
                .iter()
                .filter(|(q, _)| 4 - overlap_slices(center.as_slice(), q) <= max_dis)
                .map(|(_, w)| w / z)
                .sum();
            let got = posterior_ball_mass(&inst, &center, r).unwrap();
            assert!((got - direct).abs() < 1e-10, "r = {r}: {got} vs {direct}");
        }
        // r = 1 - 1/n covers every q sharing at least one position with the center
        let cover = posterior_ball_mass(&inst, &center, 0.75).unwrap();
        let outside: f64 = weights
            .iter()
            .filter(|(q, _)| overlap_slices(center.as_slice(), q) == 0)
            .map(|(_, w)| w / z)
            .sum();
        assert!((cover + outside - 1.0).abs() < 1e-12);
        assert!(posterior_ball_mass(&inst, &center, 1.0).is_err());
        assert!(posterior_ball_mass(&inst, &center, -0.1).is_err());
    }

    #[test]
    fn posterior_table_is_normalized() {
        for n in 3..=7 {
            let inst = id_frame(n, 4, 0.6, 0.3, 100 + n as u64);
            let t = PosteriorTable::new(&inst, 7).unwrap();
            let total: f64 = (0..t.len()).map(|k| t.probability(k)).sum();
            assert!((total - 1.0).abs() < 1e-8);
            let lz = log_partition(&inst).unwrap();
            assert!((t.log_z() - lz.log_z).abs() < 1e-9);
        }
    }
}
