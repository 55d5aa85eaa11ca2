//! Posterior Gibbs energy of a candidate alignment.
//!
//! With the data expressed in the frame where the hidden permutation is the
//! identity (see [`Instance::relabel_to_identity`]), the posterior over `S_n`
//! is proportional to `exp(-V(π))` with
//!
//! ```text
//! V(π) = ρ/(1-ρ²)·(V*_G - V_G) + η/(1-η²)·(V*_F - V_F)
//! V*_G = Σ_{ {i,j} ∈ D^E_π } B[i,j]·A[i,j]       V_G = Σ_{ {i,j} ∈ D^E_π } B[π(i),π(j)]·A[i,j]
//! V*_F = Σ_{ i ∈ D_π, k } Y[i,k]·X[i,k]          V_F = Σ_{ i ∈ D_π, k } Y[π(i),k]·X[i,k]
//! ```
//!
//! Evaluated on data in any other frame the same formula gives the energy
//! relative to the identity labeling, which differs from the true-frame `V`
//! by a constant and so induces the same posterior.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dot, Instance};
use crate::permutation::Permutation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianBreakdown {
    pub v_star_g: f64,
    pub v_g: f64,
    pub v_star_f: f64,
    pub v_f: f64,
    pub v: f64,
    pub coeff_g: f64,
    pub coeff_f: f64,
}

impl HamiltonianBreakdown {
    fn assemble(coeff_g: f64, coeff_f: f64, sums: [f64; 4]) -> Self {
        let [v_star_g, v_g, v_star_f, v_f] = sums;
        HamiltonianBreakdown {
            v_star_g,
            v_g,
            v_star_f,
            v_f,
            v: coeff_g * (v_star_g - v_g) + coeff_f * (v_star_f - v_f),
            coeff_g,
            coeff_f,
        }
    }

    /// The four component sums and `v`, as printed by `match --explain`.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "v": self.v,
            "v_star_g": self.v_star_g,
            "v_g": self.v_g,
            "v_star_f": self.v_star_f,
            "v_f": self.v_f,
        })
    }
}

fn check_perm(inst: &Instance, p: &Permutation) -> Result<()> {
    if p.len() != inst.n() {
        return Err(Error::Dimension(format!(
            "permutation of length {} for n = {}",
            p.len(),
            inst.n()
        )));
    }
    Ok(())
}

/// Full evaluation of the four sums, `O(n² + |D_p|·d)`.
pub fn hamiltonian(inst: &Instance, p: &Permutation) -> Result<HamiltonianBreakdown> {
    let coeff_g = inst.params.coeff_g()?;
    let coeff_f = inst.params.coeff_f()?;
    check_perm(inst, p)?;
    let n = inst.n();

    let (mut v_star_g, mut v_g) = (0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            if p.fixes_edge(i, j) {
                continue;
            }
            let a = inst.a.get(i, j);
            v_star_g += inst.b.get(i, j) * a;
            v_g += inst.b.get(p.apply(i), p.apply(j)) * a;
        }
    }

    let (mut v_star_f, mut v_f) = (0.0, 0.0);
    for i in 0..n {
        let pi = p.apply(i);
        if pi == i {
            continue;
        }
        let x = inst.x.row(i);
        v_star_f += dot(inst.y.row(i), x);
        v_f += dot(inst.y.row(pi), x);
    }

    Ok(HamiltonianBreakdown::assemble(
        coeff_g,
        coeff_f,
        [v_star_g, v_g, v_star_f, v_f],
    ))
}

/// Breakdown for `p ∘ (i j)` given the breakdown for `p`, in `O(n + d)`.
///
/// Only edges incident to `i` or `j` and the feature rows `i`, `j` change
/// their contribution; the edge `{i, j}` keeps its image set.
pub fn delta_swap(
    inst: &Instance,
    p: &Permutation,
    current: &HamiltonianBreakdown,
    i: usize,
    j: usize,
) -> Result<HamiltonianBreakdown> {
    check_perm(inst, p)?;
    let n = inst.n();
    if i == j {
        return Err(Error::param(
            "swap",
            format!("positions must differ (got {i} twice)"),
        ));
    }
    if i >= n || j >= n {
        return Err(Error::param(
            "swap",
            format!("({i} {j}) out of range for n = {n}"),
        ));
    }
    let [mut vsg, mut vg, mut vsf, mut vf] =
        [current.v_star_g, current.v_g, current.v_star_f, current.v_f];
    let (pi, pj) = (p.apply(i), p.apply(j));

    for k in 0..n {
        if k == i || k == j {
            continue;
        }
        let pk = p.apply(k);
        for (node, old_img, new_img) in [(i, pi, pj), (j, pj, pi)] {
            let a = inst.a.get(node, k);
            let b_own = inst.b.get(node, k);
            let old_fixed = same_pair(old_img, pk, node, k);
            let new_fixed = same_pair(new_img, pk, node, k);
            if !old_fixed {
                vsg -= b_own * a;
                vg -= inst.b.get(old_img, pk) * a;
            }
            if !new_fixed {
                vsg += b_own * a;
                vg += inst.b.get(new_img, pk) * a;
            }
        }
    }

    for (node, old_img, new_img) in [(i, pi, pj), (j, pj, pi)] {
        let x = inst.x.row(node);
        let own = if old_img != node || new_img != node {
            dot(inst.y.row(node), x)
        } else {
            0.0
        };
        if old_img != node {
            vsf -= own;
            vf -= dot(inst.y.row(old_img), x);
        }
        if new_img != node {
            vsf += own;
            vf += dot(inst.y.row(new_img), x);
        }
    }

    Ok(HamiltonianBreakdown::assemble(
        current.coeff_g,
        current.coeff_f,
        [vsg, vg, vsf, vf],
    ))
}

#[inline]
fn same_pair(a: usize, b: usize, c: usize, d: usize) -> bool {
    (a == c && b == d) || (a == d && b == c)
}

/// Precomputed tables for evaluating `V` alone: dense copies of `A`, `B`
/// and the feature cross-products `F[i][k] = ⟨X_i, Y_k⟩`.
///
/// `V(π) = c_g·Σ_{i<j} A[i,j](B[i,j] - B[π(i),π(j)]) + c_f·Σ_i (F[i][i] - F[i][π(i)])`,
/// which equals the breakdown form because fixed edges and fixed points
/// contribute zero. A swap update costs `O(n)`.
#[derive(Debug, Clone)]
pub struct EnergyTable {
    n: usize,
    coeff_g: f64,
    coeff_f: f64,
    a: Vec<f64>,
    b: Vec<f64>,
    f: Vec<f64>,
}

impl EnergyTable {
    pub fn new(inst: &Instance) -> Result<Self> {
        Ok(Self::with_coefficients(
            inst,
            inst.params.coeff_g()?,
            inst.params.coeff_f()?,
        ))
    }

    /// Table with caller-chosen channel weights. Used for noise-free data,
    /// where a singular channel is handled by exact matching and dropped
    /// from the energy (weight 0).
    pub fn with_coefficients(inst: &Instance, coeff_g: f64, coeff_f: f64) -> Self {
        let n = inst.n();
        let mut f = vec![0.0; n * n];
        for i in 0..n {
            let x = inst.x.row(i);
            for k in 0..n {
                f[i * n + k] = dot(x, inst.y.row(k));
            }
        }
        EnergyTable {
            n,
            coeff_g,
            coeff_f,
            a: inst.a.to_dense(),
            b: inst.b.to_dense(),
            f,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeff_g(&self) -> f64 {
        self.coeff_g
    }

    pub fn coeff_f(&self) -> f64 {
        self.coeff_f
    }

    /// Feature cross-product `⟨X_i, Y_k⟩`.
    #[inline]
    pub fn feature_score(&self, i: usize, k: usize) -> f64 {
        self.f[i * self.n + k]
    }

    pub fn value(&self, p: &[usize]) -> f64 {
        let n = self.n;
        let mut g = 0.0;
        for i in 0..n {
            let pi = p[i];
            for j in i + 1..n {
                g += self.a[i * n + j] * (self.b[i * n + j] - self.b[pi * n + p[j]]);
            }
        }
        let mut h = 0.0;
        for (i, &pi) in p.iter().enumerate() {
            h += self.f[i * n + i] - self.f[i * n + pi];
        }
        self.coeff_g * g + self.coeff_f * h
    }

    /// `V(p ∘ (i j)) - V(p)`.
    #[inline]
    pub fn swap_delta(&self, p: &[usize], i: usize, j: usize) -> f64 {
        let n = self.n;
        let (pi, pj) = (p[i], p[j]);
        let (ra, rb) = (&self.a[i * n..(i + 1) * n], &self.a[j * n..(j + 1) * n]);
        let (bi, bj) = (&self.b[pi * n..(pi + 1) * n], &self.b[pj * n..(pj + 1) * n]);
        let mut dg = 0.0;
        for k in 0..n {
            if k == i || k == j {
                continue;
            }
            let pk = p[k];
            dg += (ra[k] - rb[k]) * (bj[pk] - bi[pk]);
        }
        let dh = self.f[i * n + pj] + self.f[j * n + pi] - self.f[i * n + pi] - self.f[j * n + pj];
        -self.coeff_g * dg - self.coeff_f * dh
    }
}
