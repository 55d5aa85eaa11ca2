//! Model parameters, sampled instances and their JSON form.
//!
//! An instance holds two symmetric weight matrices `A`, `B` and two feature
//! matrices `X`, `Y`. For the hidden permutation `π*`,
//! `B[π*(i), π*(j)] = ρ·A[i, j] + √(1-ρ²)·Z[i, j]` and
//! `Y[π*(i), :] = η·X[i, :] + √(1-η²)·Z'[i, :]` with all base entries
//! i.i.d. standard normal.

use std::fmt::Write as _;
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::permutation::Permutation;
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub d: usize,
    pub rho: f64,
    pub eta: f64,
}

impl ModelParams {
    pub fn new(n: usize, d: usize, rho: f64, eta: f64) -> Result<Self> {
        let p = ModelParams { n, d, rho, eta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::param("n", "must be at least 1"));
        }
        if self.d < 1 {
            return Err(Error::param("d", "must be at least 1"));
        }
        for (name, v) in [("rho", self.rho), ("eta", self.eta)] {
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::param(name, format!("{v} is outside [-1, 1]")));
            }
        }
        Ok(())
    }

    /// `ρ / (1 - ρ²)`, or an error when `|ρ| = 1`.
    pub fn coeff_g(&self) -> Result<f64> {
        gibbs_coefficient(self.rho, "rho")
    }

    /// `η / (1 - η²)`, or an error when `|η| = 1`.
    pub fn coeff_f(&self) -> Result<f64> {
        gibbs_coefficient(self.eta, "eta")
    }

    pub fn is_noise_free(&self) -> bool {
        self.rho.abs() == 1.0 || self.eta.abs() == 1.0
    }
}

fn gibbs_coefficient(c: f64, channel: &'static str) -> Result<f64> {
    if c.abs() >= 1.0 {
        Err(Error::CoefficientSingularity { channel })
    } else {
        Ok(c / (1.0 - c * c))
    }
}

/// Symmetric `n × n` matrix with zero diagonal, stored as its strict upper
/// triangle in row-major order: `(0,1), (0,2), …, (0,n-1), (1,2), …`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    upper: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            upper: vec![0.0; n * n.saturating_sub(1) / 2],
        }
    }

    pub fn from_upper(n: usize, upper: Vec<f64>) -> Result<Self> {
        let expected = n * n.saturating_sub(1) / 2;
        if upper.len() != expected {
            return Err(Error::Dimension(format!(
                "upper triangle of length {} for n = {n} (expected {expected})",
                upper.len()
            )));
        }
        Ok(SymMatrix { n, upper })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Position of the pair `i < j` in the upper-triangle vector.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n);
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    /// Symmetric accessor; the diagonal reads as zero.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.upper[self.index(i, j)],
            std::cmp::Ordering::Greater => self.upper[self.index(j, i)],
            std::cmp::Ordering::Equal => 0.0,
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(i != j, "diagonal is fixed at zero");
        let k = if i < j {
            self.index(i, j)
        } else {
            self.index(j, i)
        };
        self.upper[k] = v;
    }

    /// Dense row-major copy with explicit symmetry.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = self.upper[self.index(i, j)];
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        out
    }

    /// `M'[i, j] = M[p(i), p(j)]`.
    pub fn permuted(&self, p: &Permutation) -> SymMatrix {
        let mut out = SymMatrix::zeros(self.n);
        for i in 0..self.n {
            for j in i + 1..self.n {
                let k = out.index(i, j);
                out.upper[k] = self.get(p.apply(i), p.apply(j));
            }
        }
        out
    }
}

/// Dense row-major `rows × cols` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} values for a {rows}×{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Row `i` of the result is row `p(i)` of `self`.
    pub fn rows_permuted(&self, p: &Permutation) -> Matrix {
        let mut out = Matrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            out.row_mut(i).copy_from_slice(self.row(p.apply(i)));
        }
        out
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One sampled problem: observed data plus the hidden permutation.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub params: ModelParams,
    pub a: SymMatrix,
    pub b: SymMatrix,
    pub x: Matrix,
    pub y: Matrix,
    pub pi_star: Permutation,
    pub seed: u64,
}

/// Draw an instance. Deterministic in `(params, seed)`; see [`crate::rng`]
/// for the stream layout.
pub fn sample_instance(params: ModelParams, seed: u64) -> Result<Instance> {
    params.validate()?;
    let ModelParams { n, d, rho, eta } = params;

    let pi_star = Permutation::random(n, &mut stream_rng(seed, Stream::PiStar));

    let mut a_rng = stream_rng(seed, Stream::EdgesA);
    let mut z_rng = stream_rng(seed, Stream::EdgeNoise);
    let edge_noise = (1.0 - rho * rho).sqrt();
    let mut a = SymMatrix::zeros(n);
    let mut b = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            let aij: f64 = a_rng.sample(StandardNormal);
            let zij: f64 = z_rng.sample(StandardNormal);
            a.set(i, j, aij);
            b.set(
                pi_star.apply(i),
                pi_star.apply(j),
                rho * aij + edge_noise * zij,
            );
        }
    }

    let mut x_rng = stream_rng(seed, Stream::FeaturesX);
    let mut zp_rng = stream_rng(seed, Stream::FeatureNoise);
    let feature_noise = (1.0 - eta * eta).sqrt();
    let mut x = Matrix::zeros(n, d);
    let mut y = Matrix::zeros(n, d);
    for i in 0..n {
        let target = pi_star.apply(i);
        for j in 0..d {
            let xij: f64 = x_rng.sample(StandardNormal);
            let zij: f64 = zp_rng.sample(StandardNormal);
            x.data[i * d + j] = xij;
            y.data[target * d + j] = eta * xij + feature_noise * zij;
        }
    }

    Ok(Instance {
        params,
        a,
        b,
        x,
        y,
        pi_star,
        seed,
    })
}

impl Instance {
    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn d(&self) -> usize {
        self.params.d
    }

    /// Relabels `B` and `Y` by `(π*)⁻¹` so that the hidden permutation
    /// becomes the identity: `B'[i,j] = B[π*(i), π*(j)]`, `Y'[i] = Y[π*(i)]`.
    pub fn relabel_to_identity(&self) -> Instance {
        Instance {
            params: self.params,
            a: self.a.clone(),
            b: self.b.permuted(&self.pi_star),
            x: self.x.clone(),
            y: self.y.rows_permuted(&self.pi_star),
            pi_star: Permutation::identity(self.n()),
            seed: self.seed,
        }
    }

    /// Map an estimate of `π*` to the identity frame: `σ = (π*)⁻¹ ∘ π̂`.
    pub fn to_identity_frame(&self, estimate: &Permutation) -> Result<Permutation> {
        self.pi_star.inverse().compose(estimate)
    }

    fn check_shapes(&self) -> Result<()> {
        let (n, d) = (self.n(), self.d());
        if self.a.n() != n || self.b.n() != n {
            return Err(Error::Dimension("edge matrices do not match n".into()));
        }
        if self.x.rows != n || self.y.rows != n || self.x.cols != d || self.y.cols != d {
            return Err(Error::Dimension(
                "feature matrices do not match (n, d)".into(),
            ));
        }
        if self.pi_star.len() != n {
            return Err(Error::Dimension("pi_star does not match n".into()));
        }
        Ok(())
    }

    /// JSON document with fixed field order and every float written with 17
    /// significant digits.
    pub fn to_json(&self) -> String {
        let mut s = String::new();
        let p = &self.params;
        write!(
            s,
            "{{\"n\":{},\"d\":{},\"rho\":{},\"eta\":{},\"seed\":{},\"pi_star\":[",
            p.n,
            p.d,
            fmt_f64(p.rho),
            fmt_f64(p.eta),
            self.seed
        )
        .unwrap();
        for (k, v) in self.pi_star.as_slice().iter().enumerate() {
            if k > 0 {
                s.push(',');
            }
            write!(s, "{v}").unwrap();
        }
        s.push(']');
        for (key, values) in [
            ("a", self.a.upper()),
            ("b", self.b.upper()),
            ("x", self.x.data()),
            ("y", self.y.data()),
        ] {
            write!(s, ",\"{key}\":[").unwrap();
            for (k, v) in values.iter().enumerate() {
                if k > 0 {
                    s.push(',');
                }
                s.push_str(&fmt_f64(*v));
            }
            s.push(']');
        }
        s.push_str("}\n");
        s
    }

    pub fn from_json(text: &str) -> Result<Instance> {
        let raw: InstanceJson = serde_json::from_str(text)?;
        let params = ModelParams::new(raw.n, raw.d, raw.rho, raw.eta)?;
        let inst = Instance {
            params,
            a: SymMatrix::from_upper(raw.n, raw.a)?,
            b: SymMatrix::from_upper(raw.n, raw.b)?,
            x: Matrix::from_row_major(raw.n, raw.d, raw.x)?,
            y: Matrix::from_row_major(raw.n, raw.d, raw.y)?,
            pi_star: raw.pi_star,
            seed: raw.seed,
        };
        inst.check_shapes()?;
        Ok(inst)
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_json().as_bytes())?;
        Ok(())
    }

    pub fn read_json<R: Read>(mut r: R) -> Result<Instance> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        Instance::from_json(&text)
    }
}

#[derive(Deserialize)]
struct InstanceJson {
    n: usize,
    d: usize,
    rho: f64,
    eta: f64,
    seed: u64,
    pi_star: Permutation,
    a: Vec<f64>,
    b: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
}

/// 17 significant digits in scientific notation; parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    assert!(
        v.is_finite(),
        "non-finite value {v} cannot be written as JSON"
    );
    format!("{v:.16e}")
}
