//! Matchers: exhaustive MAP, feature-only assignment, 2-swap local search,
//! posterior ball-mass maximization, and the transposition failure count.
//!
//! Estimators see only the observed data `(A, B, X, Y)`; the hidden
//! permutation is used afterwards to score the estimate. Energies are
//! evaluated relative to the identity labeling of the observed data, which
//! differs from the true-frame Hamiltonian by a constant, so the argmin and
//! the posterior are unchanged. Ties are broken toward the lexicographically
//! smallest mapping.

use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment;
use crate::error::{check_cap, Error, Result, ENUMERATION_CAP};
use crate::hamiltonian::{hamiltonian, EnergyTable};
use crate::model::Instance;
use crate::partition::PosteriorTable;
use crate::permutation::{for_each_by_swaps, Permutation};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::TOLERANCES;

/// Largest `n` for the ball-mass estimator, which needs all `(n!)²` overlaps.
pub const BALL_CAP: usize = 7;

/// Channel weight standing in for `c/(1-c²)` when `|c| = 1` during local
/// search; dominates any finite-noise channel at desk scale.
pub const NOISE_FREE_WEIGHT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Exhaustive,
    Feature,
    Local,
    Ball,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Exhaustive => "exhaustive",
            EstimatorKind::Feature => "feature",
            EstimatorKind::Local => "local",
            EstimatorKind::Ball => "ball",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "exhaustive" | "map" => Ok(EstimatorKind::Exhaustive),
            "feature" => Ok(EstimatorKind::Feature),
            "local" | "local_search" => Ok(EstimatorKind::Local),
            "ball" | "bayes_ball" => Ok(EstimatorKind::Ball),
            other => Err(Error::param(
                "estimator",
                format!("unknown estimator {other:?}"),
            )),
        }
    }

    /// Largest `n` the estimator accepts.
    pub fn max_n(self) -> Option<usize> {
        match self {
            EstimatorKind::Exhaustive => Some(ENUMERATION_CAP),
            EstimatorKind::Ball => Some(BALL_CAP),
            EstimatorKind::Feature | EstimatorKind::Local => None,
        }
    }
}

/// Result of a local-search run: whether the returned permutation admits no
/// strictly improving 2-swap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwapCertificate {
    pub locally_optimal: bool,
    /// Smallest `V(p ∘ (i j)) - V(p)` over all swaps (search energy).
    pub min_swap_delta: f64,
    pub sweeps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub estimate: Permutation,
    pub overlap_with_truth: usize,
    pub exact: bool,
    /// Hamiltonian of the estimate in the identity frame. In noise-free mode
    /// singular channels are left out of this value.
    pub objective: f64,
    pub estimator_name: EstimatorKind,
    pub wall_time: Duration,
    pub certificate: Option<SwapCertificate>,
}

#[derive(Serialize)]
struct MatchResultJson<'a> {
    estimator: &'static str,
    exact: bool,
    overlap: usize,
    n: usize,
    objective: f64,
    wall_time_ms: f64,
    mapping: &'a [usize],
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<SwapCertificate>,
}

impl MatchResult {
    fn scored(
        inst: &Instance,
        estimate: Permutation,
        kind: EstimatorKind,
        started: Instant,
        certificate: Option<SwapCertificate>,
    ) -> Result<Self> {
        let overlap_with_truth = estimate.overlap(&inst.pi_star)?;
        let objective = identity_frame_objective(inst, &estimate)?;
        Ok(MatchResult {
            exact: overlap_with_truth == inst.n(),
            overlap_with_truth,
            objective,
            estimate,
            estimator_name: kind,
            wall_time: started.elapsed(),
            certificate,
        })
    }

    pub fn overlap_fraction(&self) -> f64 {
        self.overlap_with_truth as f64 / self.estimate.len() as f64
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(MatchResultJson {
            estimator: self.estimator_name.name(),
            exact: self.exact,
            overlap: self.overlap_with_truth,
            n: self.estimate.len(),
            objective: self.objective,
            wall_time_ms: self.wall_time.as_secs_f64() * 1e3,
            mapping: self.estimate.as_slice(),
            certificate: self.certificate,
        })
        .expect("match result serializes")
    }
}

fn masked_coefficient(c: f64) -> f64 {
    if c.abs() >= 1.0 {
        0.0
    } else {
        c / (1.0 - c * c)
    }
}

fn identity_frame_objective(inst: &Instance, estimate: &Permutation) -> Result<f64> {
    let sigma = inst.to_identity_frame(estimate)?;
    let framed = inst.relabel_to_identity();
    if inst.params.is_noise_free() {
        let t = EnergyTable::with_coefficients(
            &framed,
            masked_coefficient(inst.params.rho),
            masked_coefficient(inst.params.eta),
        );
        Ok(t.value(sigma.as_slice()))
    } else {
        Ok(hamiltonian(&framed, &sigma)?.v)
    }
}

/// Keeps the smallest `(value, mapping)` pair seen.
struct Best {
    value: f64,
    mapping: Vec<usize>,
}

impl Best {
    fn new() -> Self {
        Best {
            value: f64::INFINITY,
            mapping: Vec::new(),
        }
    }

    #[inline]
    fn offer(&mut self, value: f64, mapping: &[usize]) {
        if value < self.value || (value == self.value && mapping < self.mapping.as_slice()) {
            self.value = value;
            self.mapping.clear();
            self.mapping.extend_from_slice(mapping);
        }
    }
}

/// Whether `p` reproduces every noise-free channel exactly.
fn matches_noise_free(inst: &Instance, p: &[usize]) -> bool {
    let n = inst.n();
    let rho = inst.params.rho;
    if rho.abs() == 1.0 {
        for i in 0..n {
            for j in i + 1..n {
                if inst.b.get(p[i], p[j]) != rho * inst.a.get(i, j) {
                    return false;
                }
            }
        }
    }
    let eta = inst.params.eta;
    if eta.abs() == 1.0 {
        for i in 0..n {
            let (x, y) = (inst.x.row(i), inst.y.row(p[i]));
            if x.iter().zip(y).any(|(x, y)| *y != eta * x) {
                return false;
            }
        }
    }
    true
}

/// MAP estimate: argmin of `V` over all of `S_n`.
///
/// In noise-free mode (`|ρ| = 1` or `|η| = 1`) only permutations that
/// reproduce the noise-free channels exactly are eligible, and the remaining
/// finite-noise channel (if any) ranks them.
pub fn map_exhaustive(inst: &Instance) -> Result<MatchResult> {
    let started = Instant::now();
    let n = inst.n();
    check_cap(n, ENUMERATION_CAP)?;
    let noise_free = inst.params.is_noise_free();
    let table = if noise_free {
        EnergyTable::with_coefficients(
            inst,
            masked_coefficient(inst.params.rho),
            masked_coefficient(inst.params.eta),
        )
    } else {
        EnergyTable::new(inst)?
    };

    let mut best = Best::new();
    let mut v = 0.0;
    for_each_by_swaps(n, |a, swap| {
        if let Some((i, j)) = swap {
            v -= table.swap_delta(a, i, j);
        }
        if !noise_free || matches_noise_free(inst, a) {
            best.offer(v, a);
        }
    });
    if best.mapping.is_empty() && n > 0 {
        let channel = if inst.params.rho.abs() == 1.0 {
            "graph"
        } else {
            "feature"
        };
        return Err(Error::NoExactMatch(channel));
    }
    let estimate = Permutation::from_vec_unchecked(best.mapping);
    MatchResult::scored(inst, estimate, EstimatorKind::Exhaustive, started, None)
}

/// Feature-only estimate: maximizes `Σ_i ⟨X_i, Y_{π(i)}⟩` by linear assignment,
/// ignoring the graphs. The objective is not sign-flipped for `η < 0`.
pub fn feature_map(inst: &Instance) -> Result<MatchResult> {
    let started = Instant::now();
    let estimate = feature_assignment(inst);
    MatchResult::scored(inst, estimate, EstimatorKind::Feature, started, None)
}

fn feature_assignment(inst: &Instance) -> Permutation {
    let n = inst.n();
    let mut score = vec![0.0; n * n];
    for i in 0..n {
        let x = inst.x.row(i);
        for k in 0..n {
            score[i * n + k] = crate::model::dot(x, inst.y.row(k));
        }
    }
    Permutation::from_vec_unchecked(assignment::solve_max(n, &score))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    Identity,
    Feature,
    Random,
    /// Start from a caller-supplied permutation.
    Given(Permutation),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anneal {
    pub t0: f64,
    pub cooling: f64,
}

impl Default for Anneal {
    fn default() -> Self {
        Anneal {
            t0: 1.0,
            cooling: 0.97,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalSearchConfig {
    pub init: Init,
    pub restarts: usize,
    pub max_sweeps: usize,
    pub anneal: Option<Anneal>,
    pub seed: u64,
}

impl Default for LocalSearchConfig {
    fn default() -> Self {
        LocalSearchConfig {
            init: Init::Feature,
            restarts: 8,
            max_sweeps: 200,
            anneal: None,
            seed: 0,
        }
    }
}

impl LocalSearchConfig {
    fn validate(&self, n: usize) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::param("restarts", "must be positive"));
        }
        if self.max_sweeps == 0 {
            return Err(Error::param("max_sweeps", "must be positive"));
        }
        if let Some(a) = self.anneal {
            if !(a.t0 > 0.0) {
                return Err(Error::param("t0", format!("{} must be positive", a.t0)));
            }
            if !(a.cooling > 0.0 && a.cooling < 1.0) {
                return Err(Error::param(
                    "cooling",
                    format!("{} is outside (0, 1)", a.cooling),
                ));
            }
        }
        if let Init::Given(p) = &self.init {
            if p.len() != n {
                return Err(Error::Dimension(format!(
                    "initial permutation of length {} for n = {n}",
                    p.len()
                )));
            }
        }
        Ok(())
    }
}

fn search_table(inst: &Instance) -> EnergyTable {
    let weight = |c: f64| {
        if c.abs() >= 1.0 {
            c.signum() * NOISE_FREE_WEIGHT
        } else {
            c / (1.0 - c * c)
        }
    };
    EnergyTable::with_coefficients(inst, weight(inst.params.rho), weight(inst.params.eta))
}

#[inline]
fn improvement_threshold(v: f64) -> f64 {
    -TOLERANCES.improvement * (1.0 + v.abs())
}

/// First-improvement 2-swap descent. Returns the number of sweeps and
/// whether the last sweep found no improving swap.
fn descend(table: &EnergyTable, p: &mut [usize], v: &mut f64, max_sweeps: usize) -> (usize, bool) {
    let n = p.len();
    for sweep in 0..max_sweeps {
        let mut improved = false;
        for i in 0..n {
            for j in i + 1..n {
                let d = table.swap_delta(p, i, j);
                if d < improvement_threshold(*v) {
                    p.swap(i, j);
                    *v += d;
                    improved = true;
                }
            }
        }
        *v = table.value(p);
        if !improved {
            return (sweep + 1, true);
        }
    }
    (max_sweeps, false)
}

fn certify(table: &EnergyTable, p: &[usize], v: f64, sweeps: usize) -> SwapCertificate {
    let n = p.len();
    let mut min_delta = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            min_delta = min_delta.min(table.swap_delta(p, i, j));
        }
    }
    SwapCertificate {
        locally_optimal: !(min_delta < improvement_threshold(v)),
        min_swap_delta: if n < 2 { 0.0 } else { min_delta },
        sweeps,
    }
}

fn anneal(
    table: &EnergyTable,
    p: &mut Vec<usize>,
    v: &mut f64,
    schedule: Anneal,
    sweeps: usize,
    rng: &mut impl Rng,
) {
    let n = p.len();
    if n < 2 {
        return;
    }
    let proposals = n * (n - 1) / 2;
    let mut best = Best::new();
    best.offer(*v, p);
    let mut temp = schedule.t0;
    for _ in 0..sweeps {
        for _ in 0..proposals {
            let i = rng.gen_range(0..n);
            let j = (i + rng.gen_range(1..n)) % n;
            let d = table.swap_delta(p, i, j);
            if d <= 0.0 || rng.gen::<f64>() < (-d / temp).exp() {
                p.swap(i, j);
                *v += d;
                best.offer(*v, p);
            }
        }
        *v = table.value(p);
        temp *= schedule.cooling;
    }
    p.copy_from_slice(&best.mapping);
    *v = table.value(p);
}

/// Heuristic minimizer of `V` by 2-swap descent or simulated annealing.
///
/// Restart 0 starts from `config.init`; later restarts start from uniform
/// random permutations drawn from per-restart derived seeds. Annealed runs
/// finish with a pure descent, so every returned permutation carries a
/// local-optimality certificate.
pub fn local_search_map(inst: &Instance, config: &LocalSearchConfig) -> Result<MatchResult> {
    let started = Instant::now();
    let n = inst.n();
    config.validate(n)?;
    let table = search_table(inst);

    let start_for = |restart: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Vec<usize> {
        if restart > 0 {
            return Permutation::random(n, rng).as_slice().to_vec();
        }
        match &config.init {
            Init::Identity => (0..n).collect(),
            Init::Feature => feature_assignment(inst).as_slice().to_vec(),
            Init::Random => Permutation::random(n, rng).as_slice().to_vec(),
            Init::Given(p) => p.as_slice().to_vec(),
        }
    };

    let runs: Vec<(f64, Vec<usize>, SwapCertificate)> = (0..config.restarts)
        .into_par_iter()
        .map(|restart| {
            let mut rng = stream_rng(
                derive_seed(config.seed, &[restart as u64]),
                Stream::Auxiliary,
            );
            let mut p = start_for(restart, &mut rng);
            let mut v = table.value(&p);
            if let Some(schedule) = config.anneal {
                anneal(
                    &table,
                    &mut p,
                    &mut v,
                    schedule,
                    config.max_sweeps,
                    &mut rng,
                );
            }
            let (sweeps, _) = descend(&table, &mut p, &mut v, config.max_sweeps);
            let cert = certify(&table, &p, v, sweeps);
            (v, p, cert)
        })
        .collect();

    let mut best = Best::new();
    let mut best_cert = None;
    for (v, p, cert) in &runs {
        let before = best.mapping.clone();
        best.offer(*v, p);
        if best.mapping != before {
            best_cert = Some(*cert);
        }
    }
    let estimate = Permutation::from_vec_unchecked(best.mapping);
    MatchResult::scored(inst, estimate, EstimatorKind::Local, started, best_cert)
}

/// Argmax of the posterior mass of the closed ball of radius `r`
/// (`r = 0` is the MAP estimate).
pub fn bayes_ball_estimator(inst: &Instance, r: f64) -> Result<MatchResult> {
    let started = Instant::now();
    check_cap(inst.n(), BALL_CAP)?;
    let table = PosteriorTable::new(inst, BALL_CAP)?;
    let k = table.argmax_ball_mass(r)?;
    MatchResult::scored(
        inst,
        table.permutation(k),
        EstimatorKind::Ball,
        started,
        None,
    )
}

/// Number of transpositions `τ` with `V(τ) < 0` in the identity frame. Each
/// `V(τ)` is the swap delta from the identity, where `V(id) = 0`.
pub fn transposition_failure_count(inst: &Instance) -> Result<usize> {
    let framed = inst.relabel_to_identity();
    let table = EnergyTable::new(&framed)?;
    let n = framed.n();
    let id: Vec<usize> = (0..n).collect();
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .filter(|&j| table.swap_delta(&id, i, j) < 0.0)
                .count()
        })
        .sum())
}

/// Dispatch by kind with default settings for the tuning knobs.
pub fn run_estimator(
    inst: &Instance,
    kind: EstimatorKind,
    r: f64,
    local: &LocalSearchConfig,
) -> Result<MatchResult> {
    match kind {
        EstimatorKind::Exhaustive => map_exhaustive(inst),
        EstimatorKind::Feature => feature_map(inst),
        EstimatorKind::Local => local_search_map(inst, local),
        EstimatorKind::Ball => bayes_ball_estimator(inst, r),
    }
}
