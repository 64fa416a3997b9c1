//! Convex geometry in a finite-dimensional inner-product space R^d.
//!
//! Three representations of a closed convex set are supported: a list of
//! half-spaces `{v : ⟨w_i, v⟩ ≥ λ_i}`, generators (convex hull of points
//! plus the cone on rays plus the span of lines), and a membership oracle
//! with a sampling box. Polyhedral representations are handled exactly
//! through small linear programs; oracle sets go through seeded sampling and
//! line searches, see [`oracle`].

mod ops;
pub mod oracle;
pub(crate) mod polyhedral;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::lp::{Cmp, LinearProgram, LpOutcome};

pub use ops::*;
pub use oracle::OracleSet;

/// `H(w, λ) = {v : ⟨w, v⟩ ≥ λ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub w: Vec<f64>,
    pub lambda: f64,
}

impl HalfSpace {
    pub fn new(w: Vec<f64>, lambda: f64) -> Result<Self> {
        if linalg::norm(&w) <= 1e-12 {
            return Err(Error::ZeroVector);
        }
        if !lambda.is_finite() || w.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("half-space entries must be finite".into()));
        }
        Ok(Self { w, lambda })
    }

    pub fn slack(&self, v: &[f64]) -> f64 {
        linalg::dot(&self.w, v) - self.lambda
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpaceList {
    d: usize,
    items: Vec<HalfSpace>,
}

impl HalfSpaceList {
    pub fn new(d: usize, items: Vec<HalfSpace>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Invalid("ambient dimension 0".into()));
        }
        for h in &items {
            if h.w.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: h.w.len() });
            }
        }
        Ok(Self { d, items })
    }

    pub fn whole_space(d: usize) -> Self {
        Self { d, items: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn items(&self) -> &[HalfSpace] {
        &self.items
    }

    pub fn normals(&self) -> Vec<Vec<f64>> {
        self.items.iter().map(|h| h.w.clone()).collect()
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        self.items.iter().all(|h| h.slack(v) >= -tol * linalg::norm(&h.w).max(1.0))
    }

    /// Minimum slack over all items (`+∞` for the whole space).
    pub fn min_slack(&self, v: &[f64]) -> f64 {
        self.items.iter().map(|h| h.slack(v)).fold(f64::INFINITY, f64::min)
    }

    /// Some point of the set, or `None` when empty.
    pub fn feasible_point(&self) -> Option<Vec<f64>> {
        polyhedral::feasible_point(self)
    }

    pub fn is_empty(&self) -> bool {
        self.feasible_point().is_none()
    }
}

/// `conv(points) + cone(rays) + span(lines)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generators {
    pub d: usize,
    pub points: Vec<Vec<f64>>,
    pub rays: Vec<Vec<f64>>,
    pub lines: Vec<Vec<f64>>,
}

impl Generators {
    pub fn new(d: usize, points: Vec<Vec<f64>>, rays: Vec<Vec<f64>>, lines: Vec<Vec<f64>>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Invalid("ambient dimension 0".into()));
        }
        for v in points.iter().chain(&rays).chain(&lines) {
            if v.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: v.len() });
            }
        }
        if rays.iter().chain(&lines).any(|r| linalg::norm(r) <= 1e-12) {
            return Err(Error::ZeroVector);
        }
        Ok(Self { d, points, rays, lines })
    }

    pub fn points(d: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(d, points, Vec::new(), Vec::new())
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        polyhedral::generated_residual(self, v).is_some_and(|r| r <= tol * (1.0 + linalg::norm(v)))
    }
}

/// `{Σ μ_i g_i : μ_i ≥ 0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedCone {
    pub d: usize,
    pub rays: Vec<Vec<f64>>,
}

impl GeneratedCone {
    pub fn new(d: usize, rays: Vec<Vec<f64>>) -> Result<Self> {
        Generators::new(d, vec![vec![0.0; d]], rays.clone(), Vec::new())?;
        Ok(Self { d, rays })
    }

    pub fn to_generators(&self) -> Generators {
        Generators { d: self.d, points: vec![vec![0.0; self.d]], rays: self.rays.clone(), lines: Vec::new() }
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        self.to_generators().contains(v, tol)
    }
}

#[derive(Debug, Clone)]
pub enum ConvexSetRep {
    HRep(HalfSpaceList),
    VRep(Generators),
    Oracle(OracleSet),
}

impl ConvexSetRep {
    pub fn dim(&self) -> usize {
        match self {
            ConvexSetRep::HRep(h) => h.dim(),
            ConvexSetRep::VRep(g) => g.d,
            ConvexSetRep::Oracle(o) => o.dim(),
        }
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        match self {
            ConvexSetRep::HRep(h) => h.contains(v, tol),
            ConvexSetRep::VRep(g) => g.contains(v, tol),
            ConvexSetRep::Oracle(o) => o.contains(v),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ConvexSetRep::HRep(_) => "halfspace_list",
            ConvexSetRep::VRep(_) => "generated",
            ConvexSetRep::Oracle(_) => "oracle",
        }
    }
}

impl From<HalfSpaceList> for ConvexSetRep {
    fn from(h: HalfSpaceList) -> Self {
        ConvexSetRep::HRep(h)
    }
}

impl From<Generators> for ConvexSetRep {
    fn from(g: Generators) -> Self {
        ConvexSetRep::VRep(g)
    }
}

impl From<GeneratedCone> for ConvexSetRep {
    fn from(c: GeneratedCone) -> Self {
        ConvexSetRep::VRep(c.to_generators())
    }
}

impl From<OracleSet> for ConvexSetRep {
    fn from(o: OracleSet) -> Self {
        ConvexSetRep::Oracle(o)
    }
}

/// A linear subspace of R^d with an orthonormal basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subspace {
    pub d: usize,
    pub basis: Vec<Vec<f64>>,
}

impl Subspace {
    pub fn zero(d: usize) -> Self {
        Self { d, basis: Vec::new() }
    }

    pub fn full(d: usize) -> Self {
        Self { d, basis: (0..d).map(|i| linalg::unit(d, i)).collect() }
    }

    pub fn spanned_by(d: usize, vectors: &[Vec<f64>]) -> Self {
        Self { d, basis: linalg::span_basis(vectors, d, 1e-10) }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for b in &self.basis {
            out = linalg::axpy(&out, linalg::dot(b, v), b);
        }
        out
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        linalg::norm(&linalg::sub(v, &self.project(v))) <= tol * linalg::norm(v).max(1.0)
    }

    pub fn complement(&self) -> Subspace {
        Subspace { d: self.d, basis: linalg::complement(&self.basis, self.d) }
    }

    /// Sine of the largest principal angle; 1 when dimensions differ.
    pub fn distance(&self, other: &Subspace) -> f64 {
        if self.dim() != other.dim() || self.d != other.d {
            return 1.0;
        }
        self.basis
            .iter()
            .map(|b| linalg::norm(&linalg::sub(b, &other.project(b))))
            .fold(0.0, f64::max)
    }
}

/// `C₊(F) = {(w, λ) : F ⊂ H(w, λ)}` for a polyhedral `F`, as the cone on the
/// listed `(w_i, λ_i)` together with `(0, −1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainingCone {
    pub d: usize,
    pub generators: Vec<(Vec<f64>, f64)>,
}

impl ContainingCone {
    /// Farkas membership: `w = Σ μ_i w_i`, `λ ≤ Σ μ_i λ_i`, `μ ≥ 0`.
    pub fn contains(&self, w: &[f64], lambda: f64) -> bool {
        let m = self.generators.len();
        let mut lp = LinearProgram::feasibility(m);
        for k in 0..self.d {
            lp.constrain(self.generators.iter().map(|g| g.0[k]).collect(), Cmp::Eq, w[k]);
        }
        lp.constrain(self.generators.iter().map(|g| g.1).collect(), Cmp::Eq, lambda);
        matches!(lp.solve(), LpOutcome::Optimal { .. })
    }
}

/// Tolerances and sampling controls shared by the cone operations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeConfig {
    /// Relative-interior threshold on the LP optimum `t*`.
    pub rel_interior_tol: f64,
    /// Oracle stability perturbation, relative to `|w|`.
    pub perturbation: f64,
    pub seed: u64,
    /// Sample count for oracle probes.
    pub samples: usize,
}

impl Default for ConeConfig {
    fn default() -> Self {
        Self { rel_interior_tol: 1e-9, perturbation: 1e-4, seed: 0x5eed, samples: 256 }
    }
}

impl ConeConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }
}
