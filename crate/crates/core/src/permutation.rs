//! Permutations of `{0, …, n-1}` and the set utilities built on them:
//! overlap, unfixed points and unfixed edges.

use std::fmt;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A bijection on `{0, …, n-1}` stored as its image sequence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    map: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(map: Vec<usize>) -> Result<Self> {
        Permutation::new(map)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.map
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.map)
    }
}

impl Permutation {
    /// Validates that `map` hits every value of `0..map.len()` exactly once.
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &v in &map {
            if v >= n || seen[v] {
                return Err(Error::param(
                    "permutation",
                    format!("{map:?} is not a bijection of 0..{n}"),
                ));
            }
            seen[v] = true;
        }
        Ok(Permutation { map })
    }

    pub(crate) fn from_vec_unchecked(map: Vec<usize>) -> Self {
        debug_assert!(Permutation::new(map.clone()).is_ok());
        Permutation { map }
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            map: (0..n).collect(),
        }
    }

    /// The transposition exchanging `i` and `j` on `n` points.
    pub fn transposition(n: usize, i: usize, j: usize) -> Result<Self> {
        if i >= n || j >= n {
            return Err(Error::param(
                "transposition",
                format!("({i} {j}) out of range for n = {n}"),
            ));
        }
        let mut p = Permutation::identity(n);
        p.map.swap(i, j);
        Ok(p)
    }

    /// Uniform draw from `S_n` by Fisher–Yates shuffle.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        map.shuffle(rng);
        Permutation { map }
    }

    /// Uniform draw from `S_{n,t}`, the permutations moving exactly `t` points.
    ///
    /// The moved set is a uniform `t`-subset and the permutation restricted to
    /// it is a uniform derangement (rejection sampling, acceptance ≈ 1/e).
    pub fn random_with_unfixed<R: Rng + ?Sized>(n: usize, t: usize, rng: &mut R) -> Result<Self> {
        if t == 1 || t > n {
            return Err(Error::param("t", format!("S_{{{n},{t}}} is empty")));
        }
        let mut support = index::sample(rng, n, t).into_vec();
        support.sort_unstable();
        let mut images = support.clone();
        loop {
            images.shuffle(rng);
            if images.iter().zip(&support).all(|(a, b)| a != b) {
                break;
            }
        }
        let mut map: Vec<usize> = (0..n).collect();
        for (&from, &to) in support.iter().zip(&images) {
            map[from] = to;
        }
        Ok(Permutation { map })
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &v)| i == v)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (i, &v) in self.map.iter().enumerate() {
            inv[v] = i;
        }
        Permutation { map: inv }
    }

    /// `self ∘ other`, i.e. `k ↦ self(other(k))`.
    pub fn compose(&self, other: &Permutation) -> Result<Self> {
        check_len(self, other)?;
        Ok(Permutation {
            map: other.map.iter().map(|&k| self.map[k]).collect(),
        })
    }

    /// Replaces `self` by `self ∘ (i j)`: the images of `i` and `j` trade places.
    pub fn swap_positions(&mut self, i: usize, j: usize) {
        self.map.swap(i, j);
    }

    /// Number of indices where `self` and `other` agree.
    pub fn overlap(&self, other: &Permutation) -> Result<usize> {
        check_len(self, other)?;
        Ok(overlap_slices(&self.map, &other.map))
    }

    /// `1 - overlap / n`.
    pub fn distance(&self, other: &Permutation) -> Result<f64> {
        let ov = self.overlap(other)?;
        Ok(if self.is_empty() {
            0.0
        } else {
            1.0 - ov as f64 / self.len() as f64
        })
    }

    /// `D_p`: the points moved by `p`, ascending.
    pub fn unfixed_points(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.map[i] != i).collect()
    }

    /// `F_p`: the points fixed by `p`, ascending.
    pub fn fixed_points(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.map[i] == i).collect()
    }

    pub fn num_unfixed_points(&self) -> usize {
        self.map
            .iter()
            .enumerate()
            .filter(|(i, v)| *i != **v)
            .count()
    }

    /// Whether `{p(i), p(j)} = {i, j}` as unordered pairs.
    #[inline]
    pub fn fixes_edge(&self, i: usize, j: usize) -> bool {
        let (a, b) = (self.map[i], self.map[j]);
        (a == i && b == j) || (a == j && b == i)
    }

    /// `D^E_p`: unordered pairs `{i, j}` (as `i < j`) whose image set differs
    /// from `{i, j}`, in row-major order.
    pub fn unfixed_edges(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if !self.fixes_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// `|D^E_p|` without materializing the set.
    ///
    /// A pair is fixed iff both endpoints are fixed points or the pair is a
    /// 2-cycle of `p`.
    pub fn num_unfixed_edges(&self) -> usize {
        let n = self.len();
        let f = n - self.num_unfixed_points();
        let two_cycles = (0..n)
            .filter(|&i| {
                let j = self.map[i];
                j > i && self.map[j] == i
            })
            .count();
        n * n.saturating_sub(1) / 2 - f * f.saturating_sub(1) / 2 - two_cycles
    }
}

#[inline]
pub(crate) fn overlap_slices<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x == y).count()
}

fn check_len(p: &Permutation, q: &Permutation) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::Dimension(format!(
            "permutations of length {} and {}",
            p.len(),
            q.len()
        )));
    }
    Ok(())
}

/// All permutations of `0..n` in lexicographic order.
pub fn lexicographic(n: usize) -> Lexicographic {
    Lexicographic {
        next: Some((0..n).collect()),
    }
}

pub struct Lexicographic {
    next: Option<Vec<usize>>,
}

impl Iterator for Lexicographic {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut a = current.clone();
        // standard next-permutation step
        if let Some(i) = (1..a.len()).rev().find(|&i| a[i - 1] < a[i]) {
            let pivot = i - 1;
            let j = (i..a.len()).rev().find(|&j| a[j] > a[pivot]).unwrap();
            a.swap(pivot, j);
            a[i..].reverse();
            self.next = Some(a);
        }
        Some(current)
    }
}

/// Visits every permutation of `0..n` exactly once, starting from the
/// identity, where consecutive permutations differ by one position swap
/// (Heap's algorithm).
///
/// `visit` receives the current image sequence and, for every permutation
/// after the first, the pair of positions `(i, j)` swapped to reach it.
pub fn for_each_by_swaps<F>(n: usize, mut visit: F)
where
    F: FnMut(&[usize], Option<(usize, usize)>),
{
    let mut a: Vec<usize> = (0..n).collect();
    visit(&a, None);
    let mut c = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if c[i] < i {
            let (x, y) = if i % 2 == 0 { (0, i) } else { (c[i], i) };
            a.swap(x, y);
            visit(&a, Some((x, y)));
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}
