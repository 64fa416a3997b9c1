//! 2-jets `(r, p, A)`, linear functionals on them, and the identification
//! of J² with a Euclidean R^d.
//!
//! The coordinate order is `(r, p_1..p_n, packed A)`. Off-diagonal entries
//! of the symmetric block carry a factor √2 so that the Euclidean dot product
//! of two coordinate vectors equals the trace pairing `⟨a, A⟩ = tr(aA)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Dimension of J² over R^n: `1 + n + n(n+1)/2`.
pub fn jet_dim(n: usize) -> usize {
    1 + n + packed_len(n)
}

pub fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Symmetric matrix stored as its packed upper triangle, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid("symmetric matrix of dimension 0".into()));
        }
        if entries.len() != packed_len(n) {
            return Err(Error::DimensionMismatch { expected: packed_len(n), got: entries.len() });
        }
        Ok(Self { n, entries })
    }

    pub fn zeros(n: usize) -> Self {
        Self { n, entries: vec![0.0; packed_len(n)] }
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, v) in d.iter().enumerate() {
            m.set(i, i, *v);
        }
        m
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Builds from the upper triangle of a full row-major matrix.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Invalid("matrix is not square".into()));
        }
        if n == 0 {
            return Err(Error::Invalid("symmetric matrix of dimension 0".into()));
        }
        Ok(Self::from_fn(n, |i, j| rows[i][j]))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn packed(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[self.offset(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.offset(i, j);
        self.entries[k] = v;
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // row i starts after n + (n-1) + ... + (n-i+1) entries
        i * self.n - i * (i.saturating_sub(1)) / 2 + (j - i)
    }

    /// Full row-major `n x n` matrix.
    pub fn full(&self) -> Vec<f64> {
        let n = self.n;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = self.get(i, j);
            }
        }
        m
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// `⟨self, other⟩ = tr(self · other)`.
    pub fn trace_inner(&self, other: &SymMatrix) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                let w = if i == j { 1.0 } else { 2.0 };
                s += w * self.get(i, j) * other.get(i, j);
            }
        }
        s
    }

    pub fn scaled(&self, s: f64) -> SymMatrix {
        SymMatrix { n: self.n, entries: self.entries.iter().map(|x| x * s).collect() }
    }

    pub fn plus(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix {
            n: self.n,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum()).collect()
    }

    /// `vᵀ M v`
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        linalg::dot(v, &self.mul_vec(v))
    }

    /// Coordinates in R^{n(n+1)/2} with √2-weighted off-diagonals.
    pub fn to_coords(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.entries.len());
        for i in 0..self.n {
            for j in i..self.n {
                out.push(if i == j { self.get(i, j) } else { SQRT2 * self.get(i, j) });
            }
        }
        out
    }

    pub fn from_coords(n: usize, c: &[f64]) -> Result<Self> {
        if c.len() != packed_len(n) {
            return Err(Error::DimensionMismatch { expected: packed_len(n), got: c.len() });
        }
        let mut m = Self::zeros(n);
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                m.set(i, j, if i == j { c[k] } else { c[k] / SQRT2 });
                k += 1;
            }
        }
        Ok(m)
    }

    pub fn eigen(&self) -> linalg::SymEigen {
        linalg::jacobi_eigen(&self.full(), self.n, 1e-13)
    }
}

/// Smallest eigenvalue by Jacobi rotations.
pub fn min_eigenvalue(m: &SymMatrix) -> f64 {
    m.eigen().values[0]
}

/// `P_e = e eᵀ` for a unit vector `e`.
pub fn rank_one_projector(e: &[f64]) -> Result<SymMatrix> {
    let nrm = linalg::norm(e);
    if (nrm - 1.0).abs() > 1e-10 {
        return Err(Error::NotUnit(nrm));
    }
    if e.is_empty() {
        return Err(Error::Invalid("empty vector".into()));
    }
    Ok(SymMatrix::from_fn(e.len(), |i, j| e[i] * e[j]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jet2 {
    pub r: f64,
    pub p: Vec<f64>,
    pub a: SymMatrix,
}

impl Jet2 {
    pub fn new(r: f64, p: Vec<f64>, a: SymMatrix) -> Result<Self> {
        if p.len() != a.n() {
            return Err(Error::DimensionMismatch { expected: a.n(), got: p.len() });
        }
        if !r.is_finite() || p.iter().chain(a.packed()).any(|x| !x.is_finite()) {
            return Err(Error::Invalid("jet entries must be finite".into()));
        }
        Ok(Self { r, p, a })
    }

    /// The pure second-order jet `(0, 0, A)`.
    pub fn hessian(a: SymMatrix) -> Self {
        let n = a.n();
        Self { r: 0.0, p: vec![0.0; n], a }
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(jet_dim(self.n()));
        v.push(self.r);
        v.extend_from_slice(&self.p);
        v.extend(self.a.to_coords());
        v
    }

    pub fn from_vector(n: usize, v: &[f64]) -> Result<Self> {
        if v.len() != jet_dim(n) {
            return Err(Error::DimensionMismatch { expected: jet_dim(n), got: v.len() });
        }
        Ok(Self { r: v[0], p: v[1..=n].to_vec(), a: SymMatrix::from_coords(n, &v[1 + n..])? })
    }
}

/// `L = (c, b, a)` acting on jets by `⟨a, A⟩ + ⟨b, p⟩ + c r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetOperator {
    pub c: f64,
    pub b: Vec<f64>,
    pub a: SymMatrix,
}

impl JetOperator {
    pub fn new(c: f64, b: Vec<f64>, a: SymMatrix) -> Result<Self> {
        if b.len() != a.n() {
            return Err(Error::DimensionMismatch { expected: a.n(), got: b.len() });
        }
        if !c.is_finite() || b.iter().chain(a.packed()).any(|x| !x.is_finite()) {
            return Err(Error::Invalid("operator entries must be finite".into()));
        }
        Ok(Self { c, b, a })
    }

    /// The pure second-order operator `A ↦ ⟨a, A⟩`.
    pub fn second_order(a: SymMatrix) -> Self {
        let n = a.n();
        Self { c: 0.0, b: vec![0.0; n], a }
    }

    /// The Laplacian `A ↦ tr A`.
    pub fn laplacian(n: usize) -> Self {
        Self::second_order(SymMatrix::identity(n))
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn is_zero(&self) -> bool {
        self.c == 0.0 && self.b.iter().chain(self.a.packed()).all(|x| *x == 0.0)
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(jet_dim(self.n()));
        v.push(self.c);
        v.extend_from_slice(&self.b);
        v.extend(self.a.to_coords());
        v
    }

    pub fn from_vector(n: usize, v: &[f64]) -> Result<Self> {
        let j = Jet2::from_vector(n, v)?;
        Ok(Self { c: j.r, b: j.p, a: j.a })
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { c: self.c * s, b: linalg::scale(&self.b, s), a: self.a.scaled(s) }
    }

    pub fn plus(&self, other: &Self) -> Self {
        Self { c: self.c + other.c, b: linalg::add(&self.b, &other.b), a: self.a.plus(&other.a) }
    }
}

/// Principal symbol `σ(L) = a`.
pub fn symbol(op: &JetOperator) -> SymMatrix {
    op.a.clone()
}

pub fn pair(op: &JetOperator, jet: &Jet2) -> Result<f64> {
    if op.n() != jet.n() {
        return Err(Error::DimensionMismatch { expected: op.n(), got: jet.n() });
    }
    Ok(op.a.trace_inner(&jet.a) + linalg::dot(&op.b, &jet.p) + op.c * jet.r)
}

/// `H(L, λ) = {J : pair(L, J) ≥ λ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetHalfSpace {
    pub operator: JetOperator,
    pub lambda: f64,
}

impl JetHalfSpace {
    pub fn new(operator: JetOperator, lambda: f64) -> Result<Self> {
        if operator.is_zero() {
            return Err(Error::ZeroVector);
        }
        if !lambda.is_finite() {
            return Err(Error::Invalid("threshold must be finite".into()));
        }
        Ok(Self { operator, lambda })
    }

    pub fn slack(&self, jet: &Jet2) -> Result<f64> {
        Ok(pair(&self.operator, jet)? - self.lambda)
    }
}
