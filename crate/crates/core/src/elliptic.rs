//! Linear uniformly elliptic operators: disc kernels for the Laplacian in
//! the plane, finite-difference Dirichlet solves, the classical comparison
//! check, and a harness comparing the three notions of subharmonicity.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{operator_stencil, GridFunction};
use crate::jet_space::{min_eigenvalue, JetHalfSpace, JetOperator, SymMatrix};
use crate::linalg;
use crate::subequation::SubequationSpec;
use crate::subharmonic::{
    distributional_check, ess_limsup, viscosity_check, DistributionalConfig, ProbeDictionary,
};

/// Values below this (including −∞) are clamped before comparison solves.
pub const CAP: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Coefficient {
    Constant(SymMatrix),
    /// One matrix per node of a grid with this shape.
    Field { shape: Vec<usize>, values: Vec<SymMatrix> },
}

/// `L u = tr(a D²u) + b·∇u + c u` with threshold `λ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipticOperator {
    pub n: usize,
    pub a: Coefficient,
    pub b: Vec<f64>,
    pub c: f64,
    pub lambda: f64,
    /// Required lower bound on the eigenvalues of `a`.
    pub floor: f64,
}

impl EllipticOperator {
    pub fn new(a: Coefficient, b: Vec<f64>, c: f64, lambda: f64, floor: f64) -> Result<Self> {
        let n = b.len();
        let op = Self { n, a, b, c, lambda, floor };
        op.validate()?;
        Ok(op)
    }

    pub fn laplacian(n: usize) -> Self {
        Self { n, a: Coefficient::Constant(SymMatrix::identity(n)), b: vec![0.0; n], c: 0.0, lambda: 0.0, floor: 0.5 }
    }

    /// Constant principal part `a`, no lower-order terms.
    pub fn principal(a: SymMatrix, floor: f64) -> Result<Self> {
        let n = a.n();
        Self::new(Coefficient::Constant(a), vec![0.0; n], 0.0, 0.0, floor)
    }

    fn validate(&self) -> Result<()> {
        if !(self.floor > 0.0 && self.floor.is_finite()) {
            return Err(Error::Invalid(format!("ellipticity floor {} must be positive", self.floor)));
        }
        if !(self.c <= 0.0) || !self.lambda.is_finite() || self.b.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("need finite b, λ and c ≤ 0".into()));
        }
        let mats: Vec<&SymMatrix> = match &self.a {
            Coefficient::Constant(a) => vec![a],
            Coefficient::Field { shape, values } => {
                if values.len() != shape.iter().product::<usize>() {
                    return Err(Error::DimensionMismatch { expected: shape.iter().product(), got: values.len() });
                }
                values.iter().collect()
            }
        };
        for a in mats {
            if a.n() != self.n {
                return Err(Error::DimensionMismatch { expected: self.n, got: a.n() });
            }
            let m = min_eigenvalue(a);
            if !(m >= self.floor) {
                return Err(Error::NotElliptic { min_eig: m, floor: self.floor });
            }
        }
        Ok(())
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.a, Coefficient::Constant(_))
    }

    pub fn a_at(&self, idx: usize) -> &SymMatrix {
        match &self.a {
            Coefficient::Constant(a) => a,
            Coefficient::Field { values, .. } => &values[idx],
        }
    }

    pub fn jet_operator_at(&self, idx: usize) -> JetOperator {
        JetOperator { c: self.c, b: self.b.clone(), a: self.a_at(idx).clone() }
    }

    /// The single half-space subequation `{L ≥ λ}`; constant coefficients only.
    pub fn spec(&self) -> Result<SubequationSpec> {
        let Coefficient::Constant(a) = &self.a else {
            return Err(Error::Unsupported("variable coefficients have no constant subequation".into()));
        };
        let op = JetOperator::new(self.c, self.b.clone(), a.clone())?;
        SubequationSpec::from_halfspaces(self.n, &[JetHalfSpace::new(op, self.lambda)?], "H(L,λ)")
    }

    /// Parses the JSON operator file. `a` is a matrix (list of rows) or
    /// `{"grids": [...]}` naming one grid file per upper-triangle entry,
    /// resolved through `load`.
    pub fn parse_json(text: &str, load: &dyn Fn(&str) -> Result<GridFunction>) -> Result<Self> {
        let file: OperatorFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let n = file.n;
        let a = match file.a {
            CoefficientFile::Matrix(rows) => Coefficient::Constant(symmetric_from_rows(n, &rows)?),
            CoefficientFile::Grids { grids } => {
                if grids.len() != n * (n + 1) / 2 {
                    return Err(Error::DimensionMismatch { expected: n * (n + 1) / 2, got: grids.len() });
                }
                let fields = grids.iter().map(|p| load(p)).collect::<Result<Vec<_>>>()?;
                let shape = fields[0].shape().to_vec();
                if fields.iter().any(|f| f.shape() != shape.as_slice() || f.has_neg_inf()) {
                    return Err(Error::Invalid("coefficient grids must share a shape and be finite".into()));
                }
                let values = (0..fields[0].len())
                    .map(|i| SymMatrix::new(n, fields.iter().map(|f| f.value(i)).collect()))
                    .collect::<Result<Vec<_>>>()?;
                Coefficient::Field { shape, values }
            }
        };
        Self::new(a, file.b.unwrap_or_else(|| vec![0.0; n]), file.c, file.lambda, file.floor)
    }
}

fn symmetric_from_rows(n: usize, rows: &[Vec<f64>]) -> Result<SymMatrix> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: rows.len() });
    }
    for i in 0..n {
        for j in 0..i {
            if (rows[i][j] - rows[j][i]).abs() > 1e-12 * (1.0 + rows[i][j].abs()) {
                return Err(Error::Invalid("coefficient matrix is not symmetric".into()));
            }
        }
    }
    SymMatrix::from_rows(rows)
}

fn default_floor() -> f64 {
    1e-6
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorFile {
    n: usize,
    a: CoefficientFile,
    b: Option<Vec<f64>>,
    #[serde(default)]
    c: f64,
    #[serde(default)]
    lambda: f64,
    #[serde(default = "default_floor", alias = "ellipticity_floor")]
    floor: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CoefficientFile {
    Matrix(Vec<Vec<f64>>),
    Grids { grids: Vec<String> },
}

/// A disc with `m` uniform boundary samples and an interior grid of spacing `h`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscMesh {
    pub center: [f64; 2],
    pub radius: f64,
    pub m: usize,
    pub h: f64,
}

impl DiscMesh {
    pub fn new(center: [f64; 2], radius: f64, m: usize, h: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Invalid(format!("radius {radius} must be positive")));
        }
        if m < 64 {
            return Err(Error::Invalid(format!("{m} boundary samples, need at least 64")));
        }
        if !(h > 0.0 && h <= radius / 16.0 * (1.0 + 1e-12)) {
            return Err(Error::Invalid(format!("spacing {h} must lie in (0, R/16]")));
        }
        Ok(Self { center, radius, m, h })
    }

    pub fn boundary_point(&self, j: usize) -> [f64; 2] {
        let t = 2.0 * PI * j as f64 / self.m as f64;
        [self.center[0] + self.radius * t.cos(), self.center[1] + self.radius * t.sin()]
    }

    /// Arc length per boundary sample.
    pub fn arc(&self) -> f64 {
        2.0 * PI * self.radius / self.m as f64
    }

    /// Node grid covering the closed disc, centred on it.
    pub fn template(&self) -> Result<GridFunction> {
        let k = (self.radius / self.h).ceil() as usize;
        let side = 2 * k + 1;
        let origin = vec![self.center[0] - k as f64 * self.h, self.center[1] - k as f64 * self.h];
        GridFunction::new(vec![side, side], origin, self.h, vec![0.0; side * side])
    }

    fn local(&self, x: &[f64]) -> [f64; 2] {
        [x[0] - self.center[0], x[1] - self.center[1]]
    }
}

fn norm2(x: [f64; 2]) -> f64 {
    x[0].hypot(x[1])
}

/// Poisson kernel of the disc of radius `R` about the origin.
pub fn poisson_kernel(x: [f64; 2], y: [f64; 2], radius: f64) -> Result<f64> {
    let rx = norm2(x);
    if rx >= radius {
        return Err(Error::OnBoundary);
    }
    if (norm2(y) - radius).abs() > 1e-9 * radius {
        return Err(Error::Invalid("y must lie on the boundary circle".into()));
    }
    let d = norm2([x[0] - y[0], x[1] - y[1]]);
    Ok((radius * radius - rx * rx) / (2.0 * PI * radius * d * d))
}

/// `Σ_j P(x, y_j) g_j Δσ`, divided by the discrete kernel mass, at interior nodes; nodes within `h/2` of the circle
/// or outside it take the boundary data interpolated in angle.
pub fn harmonic_extension(g: &[f64], mesh: &DiscMesh) -> Result<GridFunction> {
    if g.len() != mesh.m {
        return Err(Error::DimensionMismatch { expected: mesh.m, got: g.len() });
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("boundary data must be finite".into()));
    }
    let t = mesh.template()?;
    let ys: Vec<[f64; 2]> = (0..mesh.m).map(|j| mesh.local(&mesh.boundary_point(j))).collect();
    let vals: Vec<f64> = (0..t.len())
        .into_par_iter()
        .map(|i| {
            let x = mesh.local(&t.point(i));
            if norm2(x) < mesh.radius - mesh.h / 2.0 {
                // normalizing by the discrete kernel mass keeps constants exact
                // next to the circle, where the trapezoid rule loses accuracy
                let (mut num, mut mass) = (0.0, 0.0);
                for (y, gj) in ys.iter().zip(g) {
                    let p = poisson_kernel(x, *y, mesh.radius).expect("interior");
                    num += p * gj;
                    mass += p;
                }
                num / mass
            } else {
                angular_interp(g, x[1].atan2(x[0]))
            }
        })
        .collect();
    t.with_values(vals)
}

fn angular_interp(g: &[f64], theta: f64) -> f64 {
    let m = g.len();
    let s = theta.rem_euclid(2.0 * PI) / (2.0 * PI) * m as f64;
    let j = (s.floor() as usize) % m;
    let f = s - s.floor();
    (1.0 - f) * g[j] + f * g[(j + 1) % m]
}

fn circle_values(u: &GridFunction, mesh: &DiscMesh) -> Result<Vec<f64>> {
    (0..mesh.m)
        .map(|j| {
            u.interpolate(&mesh.boundary_point(j))
                .ok_or_else(|| Error::Invalid("disc leaves the grid".into()))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscGap {
    pub center: [f64; 2],
    pub radius: f64,
    pub nodes: usize,
    /// `max (u(x) − Poisson integral(x))` over the tested nodes.
    pub gap: f64,
    pub at: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubPoissonReport {
    pub pass: bool,
    pub tol: f64,
    pub discs: Vec<DiscGap>,
}

/// `u(x) ≤ ∫_{∂B} P(x, y) u(y) dσ(y) + tol` at the nodes at least one cell
/// inside each disc, with `u` on the circle interpolated from the grid.
pub fn sub_poisson_check(u: &GridFunction, discs: &[DiscMesh], tol: f64) -> Result<SubPoissonReport> {
    if u.n() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: u.n() });
    }
    let mut out = Vec::with_capacity(discs.len());
    for mesh in discs {
        let bvals = circle_values(u, mesh)?;
        let ys: Vec<[f64; 2]> = (0..mesh.m).map(|j| mesh.local(&mesh.boundary_point(j))).collect();
        let arc = mesh.arc();
        let nodes: Vec<usize> = (0..u.len())
            .filter(|&i| norm2(mesh.local(&u.point(i))) <= mesh.radius - u.h())
            .collect();
        let gaps: Vec<(f64, usize)> = nodes
            .par_iter()
            .map(|&i| {
                let x = mesh.local(&u.point(i));
                let pi: f64 = ys
                    .iter()
                    .zip(&bvals)
                    .map(|(y, v)| {
                        let p = poisson_kernel(x, *y, mesh.radius).expect("interior");
                        if p == 0.0 { 0.0 } else { p * v }
                    })
                    .sum::<f64>()
                    * arc;
                let ux = u.value(i);
                (if ux == f64::NEG_INFINITY { f64::NEG_INFINITY } else { ux - pi }, i)
            })
            .collect();
        let worst = gaps.iter().fold((f64::NEG_INFINITY, None), |acc, &(g, i)| if g > acc.0 { (g, Some(i)) } else { acc });
        out.push(DiscGap {
            center: mesh.center,
            radius: mesh.radius,
            nodes: nodes.len(),
            gap: worst.0,
            at: worst.1.map(|i| u.point(i)),
        });
    }
    Ok(SubPoissonReport { pass: out.iter().all(|d| d.gap <= tol), tol, discs: out })
}

#[derive(Debug, Clone, Serialize)]
pub struct AveragedReport {
    pub pass: bool,
    pub value: f64,
    pub average: f64,
    pub gap: f64,
}

/// `u(x₀) ≤ (1/κ) ∫_{r₀}^{r₀+κ} (mean of u over ∂B_r(x₀)) dr + tol`, the
/// Poisson integral at the centre being the circle mean.
pub fn averaged_sub_poisson(u: &GridFunction, x0: [f64; 2], r0: f64, kappa: f64, m: usize, tol: f64) -> Result<AveragedReport> {
    if u.n() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: u.n() });
    }
    if !(r0 > 0.0 && kappa > 0.0) || m < 64 {
        return Err(Error::Invalid("need r₀ > 0, κ > 0 and m ≥ 64".into()));
    }
    let outer = r0 + kappa;
    for k in 0..2 {
        let lo = u.origin()[k];
        let hi = lo + (u.shape()[k] - 1) as f64 * u.h();
        if x0[k] - outer < lo || x0[k] + outer > hi {
            return Err(Error::Invalid("annulus exits the domain".into()));
        }
    }
    let value = u.interpolate(&x0).expect("inside");
    let nr = 32;
    let mut total = 0.0;
    for k in 0..nr {
        let r = r0 + kappa * (k as f64 + 0.5) / nr as f64;
        let mesh = DiscMesh { center: x0, radius: r, m, h: r / 16.0 };
        let vals = circle_values(u, &mesh)?;
        total += vals.iter().sum::<f64>() / m as f64;
    }
    let average = total / nr as f64;
    let gap = value - average;
    Ok(AveragedReport { pass: gap <= tol, value, average, gap })
}

/// Dirichlet Green kernel of the disc of radius `R` about the origin, with
/// the convention `G ≤ 0`.
pub fn green_kernel(x: [f64; 2], y: [f64; 2], radius: f64) -> Result<f64> {
    let rx = norm2(x);
    let ry = norm2(y);
    if rx.max(ry) > radius * (1.0 + 1e-12) {
        return Err(Error::Invalid("points must lie in the disc".into()));
    }
    let d = norm2([x[0] - y[0], x[1] - y[1]]);
    if d == 0.0 {
        return Err(Error::Coincident);
    }
    // |y|/R · |x − R² y/|y|²| = | (|y|/R) x − (R/|y|) y |
    let image = if ry == 0.0 {
        radius
    } else {
        norm2([ry / radius * x[0] - radius / ry * y[0], ry / radius * x[1] - radius / ry * y[1]])
    };
    Ok(((d / image).ln() / (2.0 * PI)).min(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Support at distance ≥ 2h from the boundary of `mesh`.
    pub fn new(points: Vec<[f64; 2]>, weights: Vec<f64>, mesh: &DiscMesh) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), got: weights.len() });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Invalid("weights must be finite and nonnegative".into()));
        }
        if points.iter().any(|p| norm2(mesh.local(p)) > mesh.radius - 2.0 * mesh.h) {
            return Err(Error::Invalid("support must stay 2h inside the disc".into()));
        }
        Ok(Self { points, weights })
    }

    pub fn zero() -> Self {
        Self { points: Vec::new(), weights: Vec::new() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GreenPotential {
    pub v: GridFunction,
    /// Truncation levels `n` of `G_n = max(G, −n)`.
    pub levels: Vec<f64>,
    pub stack: Vec<GridFunction>,
}

/// Number of truncation levels `1, 2, 4, …`.
pub const TRUNCATION_LEVELS: usize = 12;

/// `v(x) = Σ w_j G(x, y_j)` on the disc's node grid (zero outside the
/// disc), with −∞ at support nodes of positive weight.
pub fn green_potential(mu: &DiscreteMeasure, mesh: &DiscMesh) -> Result<GreenPotential> {
    let t = mesh.template()?;
    green_potential_on(mu, mesh, &t)
}

/// As [`green_potential`], on the nodes of an arbitrary planar grid.
pub fn green_potential_on(mu: &DiscreteMeasure, mesh: &DiscMesh, grid: &GridFunction) -> Result<GreenPotential> {
    if grid.n() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: grid.n() });
    }
    let levels: Vec<f64> = (0..TRUNCATION_LEVELS).map(|k| 2f64.powi(k as i32)).collect();
    // per node: kernel values against each support point (None = coincident)
    let kernels: Vec<Vec<Option<f64>>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = mesh.local(&grid.point(i));
            if norm2(x) > mesh.radius {
                return vec![Some(0.0); mu.points.len()];
            }
            mu.points
                .iter()
                .map(|y| match green_kernel(x, mesh.local(y), mesh.radius) {
                    Ok(g) => Some(g),
                    Err(_) => None,
                })
                .collect()
        })
        .collect();
    let combine = |cut: Option<f64>| -> Vec<f64> {
        kernels
            .iter()
            .map(|ks| {
                let mut s = 0.0;
                for (k, w) in ks.iter().zip(&mu.weights) {
                    if *w == 0.0 {
                        continue;
                    }
                    let g = match (k, cut) {
                        (Some(g), Some(n)) => g.max(-n),
                        (None, Some(n)) => -n,
                        (Some(g), None) => *g,
                        (None, None) => f64::NEG_INFINITY,
                    };
                    s += w * g;
                }
                s
            })
            .collect()
    };
    let v = grid.with_values(combine(None))?;
    let stack = levels.iter().map(|&n| grid.with_values(combine(Some(n)))).collect::<Result<Vec<_>>>()?;
    Ok(GreenPotential { v, levels, stack })
}

/// Compact subset of a grid for the comparison check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Region {
    /// Nodes with `lo ≤ index ≤ hi` per axis; the faces are the boundary.
    Box { lo: Vec<usize>, hi: Vec<usize> },
    /// Nodes within `radius − h/2` of the centre are interior.
    Disc { center: Vec<f64>, radius: f64 },
}

impl Region {
    /// Interior nodes, ascending.
    pub fn interior(&self, g: &GridFunction) -> Result<Vec<usize>> {
        match self {
            Region::Box { lo, hi } => {
                if lo.len() != g.n() || hi.len() != g.n() {
                    return Err(Error::DimensionMismatch { expected: g.n(), got: lo.len() });
                }
                if lo.iter().zip(hi).zip(g.shape()).any(|((l, h), s)| h >= s || h < &(l + 2)) {
                    return Err(Error::Invalid("box must fit the grid and have an interior".into()));
                }
                let inner_lo: Vec<usize> = lo.iter().map(|l| l + 1).collect();
                let inner_hi: Vec<usize> = hi.iter().map(|h| h - 1).collect();
                Ok(box_nodes(g, &inner_lo, &inner_hi))
            }
            Region::Disc { center, radius } => {
                if center.len() != g.n() {
                    return Err(Error::DimensionMismatch { expected: g.n(), got: center.len() });
                }
                let cut = radius - g.h() / 2.0;
                let bound = |k: usize, sign: f64| ((center[k] + sign * cut - g.origin()[k]) / g.h()).floor();
                let mut lo = vec![0; g.n()];
                let mut hi = vec![0; g.n()];
                for k in 0..g.n() {
                    let top = (g.shape()[k] - 2) as f64;
                    let l = (bound(k, -1.0) - 1.0).clamp(1.0, top);
                    let h = (bound(k, 1.0) + 1.0).clamp(1.0, top);
                    lo[k] = l as usize;
                    hi[k] = h as usize;
                }
                Ok(box_nodes(g, &lo, &hi)
                    .into_iter()
                    .filter(|&i| linalg::norm(&linalg::sub(&g.point(i), center)) < cut)
                    .collect())
            }
        }
    }
}

/// Nodes with `lo ≤ index ≤ hi` per axis, ascending.
fn box_nodes(g: &GridFunction, lo: &[usize], hi: &[usize]) -> Vec<usize> {
    let n = g.n();
    if lo.iter().zip(hi).any(|(l, h)| l > h) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur = lo.to_vec();
    loop {
        out.push(g.ravel(&cur));
        let mut k = n;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            cur[k] += 1;
            if cur[k] <= hi[k] {
                break;
            }
            cur[k] = lo[k];
        }
    }
}

/// Boxes of 4, 8, 16, … cells at half-size strides, the whole grid, and in
/// the plane a few discs.
pub fn default_regions(g: &GridFunction) -> Vec<Region> {
    let n = g.n();
    let min_side = *g.shape().iter().min().expect("nonempty") - 1;
    let mut out = Vec::new();
    let mut s = 4;
    while s < min_side {
        let stride = (s / 2).max(2);
        let counts: Vec<usize> = g.shape().iter().map(|&m| (m - 1 - s) / stride + 1).collect();
        let total: usize = counts.iter().product();
        for k in 0..total {
            let mut rest = k;
            let mut lo = vec![0; n];
            for a in (0..n).rev() {
                lo[a] = (rest % counts[a]) * stride;
                rest /= counts[a];
            }
            let hi = lo.iter().map(|l| l + s).collect();
            out.push(Region::Box { lo, hi });
        }
        s *= 2;
    }
    out.push(Region::Box { lo: vec![0; n], hi: g.shape().iter().map(|m| m - 1).collect() });
    if n == 2 {
        let mid: Vec<f64> = (0..2).map(|k| g.origin()[k] + (g.shape()[k] - 1) as f64 * g.h() / 2.0).collect();
        let ext = min_side as f64 * g.h();
        for f in [0.125, 0.25, 0.375, 0.49] {
            out.push(Region::Disc { center: mid.clone(), radius: f * ext });
        }
        for (sx, sy) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)] {
            let c = vec![mid[0] + sx * ext / 4.0, mid[1] + sy * ext / 4.0];
            out.push(Region::Disc { center: c, radius: ext / 8.0 });
        }
    }
    out
}

/// Sweep cap of the SOR iteration.
pub const MAX_SWEEPS: usize = 1_000_000;

/// Solves `L_h φ = λ` on the interior of `region` with `φ = g` elsewhere,
/// by SOR until the residual, scaled by the centre weight (so measured in
/// units of `φ`), is at most `tol` in max-norm.
pub fn fd_dirichlet_solve(op: &EllipticOperator, g: &GridFunction, region: &Region, tol: f64) -> Result<GridFunction> {
    if g.n() != op.n {
        return Err(Error::DimensionMismatch { expected: op.n, got: g.n() });
    }
    if let Coefficient::Field { shape, .. } = &op.a {
        if shape.as_slice() != g.shape() {
            return Err(Error::Invalid("coefficient field and grid shapes differ".into()));
        }
    }
    let interior = region.interior(g)?;
    let strides: Vec<isize> = {
        let mut s = vec![1isize; g.n()];
        for k in (0..g.n().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * g.shape()[k + 1] as isize;
        }
        s
    };
    let mut rows: Vec<(usize, f64, Vec<(usize, f64)>)> = Vec::with_capacity(interior.len());
    let mut cached: Option<(Vec<(Vec<isize>, f64)>, bool)> = None;
    for &i in &interior {
        if g.boundary_cells(i) < 1 {
            return Err(Error::Invalid("region touches the grid edge".into()));
        }
        let (terms, monotone) = match (&cached, op.is_constant()) {
            (Some(c), true) => c.clone(),
            _ => {
                let st = operator_stencil(&op.jet_operator_at(i), g.h());
                let c = (st.terms, st.monotone);
                if op.is_constant() {
                    cached = Some(c.clone());
                }
                c
            }
        };
        if !monotone {
            return Err(Error::NotDiagonallyDominant(i));
        }
        let mut centre = 0.0;
        let mut nb = Vec::with_capacity(terms.len());
        for (o, w) in &terms {
            let delta: isize = o.iter().zip(&strides).map(|(a, b)| a * b).sum();
            if delta == 0 {
                centre += w;
            } else {
                nb.push(((i as isize + delta) as usize, *w));
            }
        }
        if !(centre < 0.0) {
            return Err(Error::NotDiagonallyDominant(i));
        }
        rows.push((i, centre, nb));
    }
    let mut u = g.values().to_vec();
    for (_, _, nb) in &rows {
        if nb.iter().any(|(j, _)| !u[*j].is_finite()) {
            return Err(Error::Invalid("boundary data must be finite".into()));
        }
    }
    for (i, _, _) in &rows {
        if !u[*i].is_finite() {
            u[*i] = 0.0;
        }
    }
    let extent = match region {
        Region::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| h - l).max().unwrap_or(2) as f64,
        Region::Disc { radius, .. } => 2.0 * radius / g.h(),
    }
    .max(2.0);
    let omega_opt = 2.0 / (1.0 + (PI / extent).sin());
    let rhs = op.lambda;
    let residual = |u: &[f64]| {
        rows.iter()
            .map(|(i, c, nb)| ((nb.iter().map(|(j, w)| w * u[*j]).sum::<f64>() + c * u[*i] - rhs) / c).abs())
            .fold(0.0, f64::max)
    };
    let start = u.clone();
    for omega in [omega_opt, 1.0] {
        u.copy_from_slice(&start);
        let r0 = residual(&u).max(1.0);
        let mut sweeps = 0;
        loop {
            let r = residual(&u);
            if r <= tol {
                return g.with_values(u);
            }
            if !r.is_finite() || r > 1e6 * r0 {
                break;
            }
            if sweeps >= MAX_SWEEPS {
                return Err(Error::NoConvergence(sweeps));
            }
            for _ in 0..8 {
                for (i, c, nb) in &rows {
                    let s: f64 = nb.iter().map(|(j, w)| w * u[*j]).sum();
                    let target = (rhs - s) / c;
                    u[*i] += omega * (target - u[*i]);
                }
            }
            sweeps += 8;
        }
    }
    Err(Error::NoConvergence(0))
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassicalConfig {
    pub tol: f64,
    /// Allowance per region relative to the oscillation of `u` on it,
    /// absorbing the truncation error of the discrete comparison.
    pub rel_tol: f64,
    pub solve_tol: f64,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        Self { tol: 1e-9, rel_tol: 2e-2, solve_tol: 1e-11 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassicalViolation {
    pub region: usize,
    pub point: Vec<f64>,
    pub gap: f64,
    pub allowance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassicalReport {
    pub pass: bool,
    pub regions_checked: usize,
    /// Largest `max_K (u − φ) / allowance_K`.
    pub worst_ratio: f64,
    pub violation: Option<ClassicalViolation>,
}

/// For each region `K`, solves `L_h φ = λ` with `φ = u` on `∂K` and requires
/// `u ≤ φ + tol + rel_tol·osc_K(u)` on `K`. Values are clamped to `±1e9`.
pub fn classical_check(u: &GridFunction, op: &EllipticOperator, regions: &[Region], cfg: &ClassicalConfig) -> Result<ClassicalReport> {
    let capped = u.with_values(u.values().iter().map(|v| v.clamp(-CAP, CAP)).collect())?;
    let results: Vec<(usize, f64, f64, Option<usize>)> = regions
        .par_iter()
        .enumerate()
        .map(|(k, region)| {
            let phi = fd_dirichlet_solve(op, &capped, region, cfg.solve_tol)?;
            let interior = region.interior(&capped)?;
            let closure = closure_nodes(&capped, region, &interior);
            let (lo, hi) = closure
                .iter()
                .map(|&i| capped.value(i))
                .filter(|v| *v > -CAP)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            let osc = if hi >= lo { hi - lo } else { 0.0 };
            let allowance = cfg.tol + cfg.rel_tol * osc;
            let mut worst = (f64::NEG_INFINITY, None);
            for &i in &interior {
                let d = capped.value(i) - phi.value(i);
                if d > worst.0 {
                    worst = (d, Some(i));
                }
            }
            Ok((k, worst.0, allowance, worst.1))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut worst_ratio = f64::NEG_INFINITY;
    let mut violation = None;
    for (k, gap, allowance, at) in results {
        let ratio = gap / allowance;
        if ratio > worst_ratio {
            worst_ratio = ratio;
        }
        if gap > allowance {
            let replace = match &violation {
                None => true,
                Some(ClassicalViolation { gap: g, allowance: a, .. }) => gap - allowance > g - a,
            };
            if replace {
                violation = Some(ClassicalViolation { region: k, point: u.point(at.expect("nonempty")), gap, allowance });
            }
        }
    }
    Ok(ClassicalReport { pass: violation.is_none(), regions_checked: regions.len(), worst_ratio, violation })
}

/// Interior nodes plus their stencil neighbours.
fn closure_nodes(g: &GridFunction, region: &Region, interior: &[usize]) -> Vec<usize> {
    if let Region::Box { lo, hi } = region {
        return box_nodes(g, lo, hi);
    }
    let n = g.n();
    let mut cube: Vec<Vec<isize>> = vec![vec![]];
    for _ in 0..n {
        cube = cube.into_iter().flat_map(|p| (-1..=1).map(move |d| [p.clone(), vec![d]].concat())).collect();
    }
    let deltas: Vec<isize> = cube.iter().map(|o| g.linear_delta(o)).collect();
    let mut out: Vec<usize> = interior.iter().flat_map(|&i| deltas.iter().map(move |&d| (i as isize + d) as usize)).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// A named grid function with its expected verdict and the data for the
/// regularization round trip.
#[derive(Debug, Clone, Serialize)]
pub struct BatteryMember {
    pub name: String,
    pub u: GridFunction,
    pub expected: bool,
    /// Lipschitz bound on the round-trip region.
    pub lip: f64,
    /// Nodes where the round-trip error is measured.
    #[serde(skip)]
    pub roundtrip_mask: Vec<bool>,
}

/// Nodes per axis and spacing of the shipped battery grid.
pub const BATTERY_NODES: usize = 128;
pub const BATTERY_H: f64 = 1.0 / 64.0;

/// Cell-centred grid on `[−1, 1]²` (no node at the origin) carrying the
/// Green potential of `δ₀`, `max(x₁, 0)`, `|x|²`, three harmonic
/// polynomials and their negations, composed with `x ↦ a^{−1/2} x` so that
/// `tr(a D²)` acts as the Laplacian in the new variables.
pub fn shipped_battery(op: &EllipticOperator) -> Result<Vec<BatteryMember>> {
    let Coefficient::Constant(a) = &op.a else {
        return Err(Error::Unsupported("the battery needs constant coefficients".into()));
    };
    if op.n != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: op.n });
    }
    let eig = a.eigen();
    let mut t = [[0.0; 2]; 2];
    for (val, vec) in eig.values.iter().zip(&eig.vectors) {
        for i in 0..2 {
            for j in 0..2 {
                t[i][j] += vec[i] * vec[j] / val.sqrt();
            }
        }
    }
    let tnorm = 1.0 / eig.values[0].sqrt();
    let h = BATTERY_H;
    let o = -1.0 + h / 2.0;
    let template = GridFunction::new(vec![BATTERY_NODES; 2], vec![o, o], h, vec![0.0; BATTERY_NODES * BATTERY_NODES])?;
    let ys: Vec<[f64; 2]> = (0..template.len())
        .map(|i| {
            let x = template.point(i);
            [t[0][0] * x[0] + t[0][1] * x[1], t[1][0] * x[0] + t[1][1] * x[1]]
        })
        .collect();
    let ymax = ys.iter().map(|y| norm2(*y)).fold(0.0, f64::max);
    let radius = (1.05 * ymax).max(1.5);
    let r_min = 2.0 * h;
    let pole_cut = 0.25;
    let all = vec![true; template.len()];
    let away: Vec<bool> = ys.iter().map(|y| norm2(*y) >= pole_cut).collect();
    let green_lip = 1.0 / (2.0 * PI * (pole_cut - r_min * tnorm));

    type Member = (&'static str, Box<dyn Fn([f64; 2]) -> f64>, bool, f64, bool);
    let members: Vec<Member> = vec![
        ("green", Box::new(move |y| green_kernel(y, [0.0, 0.0], radius).unwrap_or(0.0)), true, green_lip, true),
        ("max(x1,0)", Box::new(|y: [f64; 2]| y[0].max(0.0)), true, 1.0, false),
        ("|x|^2", Box::new(|y: [f64; 2]| y[0] * y[0] + y[1] * y[1]), true, 2.0 * ymax, false),
        ("x1^2-x2^2", Box::new(|y: [f64; 2]| y[0] * y[0] - y[1] * y[1]), true, 2.0 * ymax, false),
        ("x1*x2", Box::new(|y: [f64; 2]| y[0] * y[1]), true, ymax, false),
        ("x1^3-3x1*x2^2", Box::new(|y: [f64; 2]| y[0].powi(3) - 3.0 * y[0] * y[1] * y[1]), true, 3.0 * ymax * ymax, false),
    ];
    let mut out = Vec::new();
    for (name, f, expected, lip_y, pole) in members {
        let harmonic = name.starts_with('x');
        let vals: Vec<f64> = ys.iter().map(|y| f(*y)).collect();
        let mask = if pole { away.clone() } else { all.clone() };
        let lip = lip_y * tnorm;
        out.push(BatteryMember {
            name: name.to_string(),
            u: template.with_values(vals.clone())?,
            expected,
            lip,
            roundtrip_mask: mask.clone(),
        });
        out.push(BatteryMember {
            name: if pole { format!("-{name}") } else { format!("-({name})") },
            u: template.with_values(vals.iter().map(|v| -v).collect())?,
            expected: harmonic,
            lip,
            roundtrip_mask: mask,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct HarnessConfig {
    /// Mollifier radius in cells.
    pub eps_cells: f64,
    pub seed: u64,
    pub samples: usize,
    pub viscosity_tol: f64,
    pub classical: ClassicalConfig,
    /// Regularization radii in cells, decreasing.
    pub radii_cells: Vec<f64>,
}

impl HarnessConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            eps_cells: 6.0,
            seed,
            samples: 16,
            viscosity_tol: 1e-6,
            classical: ClassicalConfig::default(),
            radii_cells: vec![4.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MemberVerdict {
    pub name: String,
    pub expected: bool,
    pub viscosity: bool,
    pub classical: bool,
    pub distributional: bool,
    pub agree: bool,
    pub roundtrip_error: f64,
    pub roundtrip_bound: f64,
    pub roundtrip_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HarnessReport {
    pub pass: bool,
    pub members: Vec<MemberVerdict>,
}

/// Runs the viscosity, classical and distributional checks for `{L ≥ λ}`
/// on every member, plus the essential-limsup round trip; any disagreement
/// or round-trip excess fails the report.
pub fn equivalence_harness(battery: &[BatteryMember], op: &EllipticOperator, cfg: &HarnessConfig) -> Result<HarnessReport> {
    let spec = op.spec()?;
    let probes = ProbeDictionary::standard(op.n);
    let mut members = Vec::with_capacity(battery.len());
    for m in battery {
        let h = m.u.h();
        let viscosity = viscosity_check(&m.u, &spec, &probes, cfg.viscosity_tol)?.pass;
        let regions = default_regions(&m.u);
        let classical = classical_check(&m.u, op, &regions, &cfg.classical)?.pass;
        let mut dcfg = DistributionalConfig::new(cfg.eps_cells * h, cfg.seed);
        dcfg.samples = cfg.samples;
        let distributional = distributional_check(&m.u, &spec, &dcfg)?.pass;
        let radii: Vec<f64> = cfg.radii_cells.iter().map(|r| r * h).collect();
        let ess = ess_limsup(&m.u, &radii)?;
        let roundtrip_error = ess
            .finest()
            .values()
            .iter()
            .zip(m.u.values())
            .zip(&m.roundtrip_mask)
            .filter(|(_, keep)| **keep)
            .map(|((a, b), _)| (a - b).abs())
            .fold(0.0, f64::max);
        let roundtrip_bound = m.lip * ess.r_min() * (1.0 + 1e-12);
        members.push(MemberVerdict {
            name: m.name.clone(),
            expected: m.expected,
            viscosity,
            classical,
            distributional,
            agree: viscosity == classical && classical == distributional,
            roundtrip_error,
            roundtrip_bound,
            roundtrip_ok: roundtrip_error <= roundtrip_bound,
        });
    }
    let pass = members.iter().all(|m| m.agree && m.roundtrip_ok);
    Ok(HarnessReport { pass, members })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn poisson_kernel_examples() {
        let r = 1.3;
        for j in 0..8 {
            let t = j as f64;
            let y = [r * t.cos(), r * t.sin()];
            assert!((poisson_kernel([0.0, 0.0], y, r).unwrap() - 1.0 / (2.0 * PI * r)).abs() < 1e-14);
        }
        let mesh = DiscMesh::new([0.0, 0.0], 1.0, 512, 1.0 / 16.0).unwrap();
        for x in [[0.3, -0.2], [0.7, 0.1], [-0.5, 0.5]] {
            let mass: f64 = (0..512).map(|j| poisson_kernel(x, mesh.boundary_point(j), 1.0).unwrap()).sum::<f64>() * mesh.arc();
            assert!((mass - 1.0).abs() < 1e-6);
        }
        let y = [1.0, 0.0];
        let mut last = 0.0;
        for s in [0.9, 0.99, 0.999, 0.9999] {
            let p = poisson_kernel([s, 0.0], y, 1.0).unwrap();
            assert!(p > last);
            last = p;
        }
        assert!(last > 1e3);
        assert_eq!(poisson_kernel([1.0, 0.0], [0.0, 1.0], 1.0), Err(Error::OnBoundary));
    }

    #[test]
    fn harmonic_extension_examples() {
        let mesh = DiscMesh::new([0.0, 0.0], 1.0, 512, 1.0 / 32.0).unwrap();
        let ones = vec![1.0; 512];
        let h1 = harmonic_extension(&ones, &mesh).unwrap();
        assert!(h1.values().iter().all(|v| (v - 1.0).abs() < 1e-6));
        let tests: [(Box<dyn Fn([f64; 2]) -> f64>, f64); 2] =
            [(Box::new(|y| y[0]), 1e-6), (Box::new(|y| y[0] * y[0] - y[1] * y[1]), 1e-6)];
        for (f, tol) in tests {
            let g: Vec<f64> = (0..512).map(|j| f(mesh.boundary_point(j))).collect();
            let ext = harmonic_extension(&g, &mesh).unwrap();
            for i in 0..ext.len() {
                let x = ext.point(i);
                if norm2([x[0], x[1]]) < 0.9 {
                    assert!((ext.value(i) - f([x[0], x[1]])).abs() < tol);
                }
            }
        }
    }

    fn square(h: f64, half: f64, f: impl Fn(&[f64]) -> f64) -> GridFunction {
        let k = (half / h).round() as usize;
        GridFunction::sample(vec![2 * k + 1; 2], vec![-(k as f64) * h; 2], h, f).unwrap()
    }

    #[test]
    fn sub_poisson_examples() {
        let h = 1.0 / 64.0;
        let discs: Vec<DiscMesh> = [([0.0, 0.0], 0.5), ([0.2, -0.1], 0.3), ([-0.3, 0.3], 0.4)]
            .iter()
            .map(|&(c, r)| DiscMesh::new(c, r, 512, h).unwrap())
            .collect();
        let u = square(h, 1.0, |x| x[0] * x[0] + x[1] * x[1]);
        assert!(sub_poisson_check(&u, &discs, 1e-9).unwrap().pass);
        let v = square(h, 1.0, |x| -(x[0] * x[0] + x[1] * x[1]));
        let r = sub_poisson_check(&v, &discs, 1e-9).unwrap();
        assert!(!r.pass);
        // at the centre the gap is the circle mean of |y − c|², i.e. R²
        let d0 = &r.discs[0];
        assert!((d0.gap - 0.25).abs() < 1e-3, "{d0:?}");
        let w = square(h, 1.0, |x| x[0].powi(3) - 3.0 * x[0] * x[1] * x[1]);
        let r = sub_poisson_check(&w, &discs, 1e-3).unwrap();
        assert!(r.pass && r.discs.iter().all(|d| d.gap.abs() < 1e-3));
    }

    #[test]
    fn averaged_examples() {
        let h = 1.0 / 64.0;
        let u = square(h, 1.0, |x| x[0] * x[0] + 2.0 * x[1] * x[1]);
        let r = averaged_sub_poisson(&u, [0.0, 0.0], 0.2, 0.3, 256, 1e-9).unwrap();
        assert!(r.pass && r.gap < 0.0);
        let mut bumped = u.values().to_vec();
        let c = u.nearest(&[0.0, 0.0]);
        bumped[c] += 1.0;
        let r = averaged_sub_poisson(&u.with_values(bumped).unwrap(), [0.0, 0.0], 0.2, 0.3, 256, 1e-9).unwrap();
        assert!(!r.pass);
        let harm = square(h, 1.0, |x| x[0] * x[1] + x[0]);
        let r = averaged_sub_poisson(&harm, [0.1, 0.1], 0.2, 0.3, 256, 1e-3).unwrap();
        assert!(r.gap.abs() < 1e-3);
        assert!(averaged_sub_poisson(&u, [0.6, 0.0], 0.2, 0.3, 256, 1e-9).is_err());
    }

    #[test]
    fn green_kernel_examples() {
        let r = 1.0;
        for x in [[0.3, 0.1], [-0.5, 0.2], [0.01, 0.0]] {
            let g = green_kernel(x, [0.0, 0.0], r).unwrap();
            assert!((g - (norm2(x) / r).ln() / (2.0 * PI)).abs() < 1e-14);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let point = |rng: &mut ChaCha8Rng| loop {
            let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            if norm2(p) < 1.0 {
                return p;
            }
        };
        for _ in 0..200 {
            let x = point(&mut rng);
            let y = point(&mut rng);
            let gxy = green_kernel(x, y, r).unwrap();
            assert!(gxy <= 0.0);
            assert!((gxy - green_kernel(y, x, r).unwrap()).abs() < 1e-10);
            let t = rng.gen_range(0.0..2.0 * PI);
            assert!(green_kernel([t.cos(), t.sin()], y, r).unwrap().abs() < 1e-10);
            assert!(green_kernel(y, [t.cos(), t.sin()], r).unwrap().abs() < 1e-10);
        }
        assert_eq!(green_kernel([0.2, 0.2], [0.2, 0.2], r), Err(Error::Coincident));
    }

    #[test]
    fn green_potential_examples() {
        let mesh = DiscMesh::new([0.0, 0.0], 1.0, 64, 1.0 / 16.0).unwrap();
        let delta = DiscreteMeasure::new(vec![[0.0, 0.0]], vec![1.0], &mesh).unwrap();
        let gp = green_potential(&delta, &mesh).unwrap();
        let c = gp.v.nearest(&[0.0, 0.0]);
        assert_eq!(gp.v.value(c), f64::NEG_INFINITY);
        for i in 0..gp.v.len() {
            let x = gp.v.point(i);
            let r = norm2([x[0], x[1]]);
            if r > 0.0 && r <= 1.0 {
                assert!((gp.v.value(i) - r.ln() / (2.0 * PI)).abs() < 1e-13);
            }
        }
        for w in gp.stack.windows(2) {
            assert!(w[1].values().iter().zip(w[0].values()).all(|(a, b)| a <= b));
        }
        let last = gp.stack.last().unwrap();
        for i in 0..last.len() {
            if i != c {
                assert_eq!(last.value(i), gp.v.value(i));
            }
        }

        let zero = green_potential(&DiscreteMeasure::zero(), &mesh).unwrap();
        assert!(zero.v.values().iter().all(|v| *v == 0.0));

        assert!(DiscreteMeasure::new(vec![[0.95, 0.0]], vec![1.0], &mesh).is_err());
        assert!(DiscreteMeasure::new(vec![[0.0, 0.0]], vec![-1.0], &mesh).is_err());
    }

    #[test]
    fn superposition_everywhere() {
        let mesh = DiscMesh::new([0.0, 0.0], 1.0, 64, 1.0 / 16.0).unwrap();
        let p = [[0.3, 0.2], [-0.4, -0.1]];
        let two = green_potential(&DiscreteMeasure::new(p.to_vec(), vec![0.5, 2.0], &mesh).unwrap(), &mesh).unwrap();
        let a = green_potential(&DiscreteMeasure::new(vec![p[0]], vec![0.5], &mesh).unwrap(), &mesh).unwrap();
        let b = green_potential(&DiscreteMeasure::new(vec![p[1]], vec![2.0], &mesh).unwrap(), &mesh).unwrap();
        for i in 0..two.v.len() {
            assert!((two.v.value(i) - a.v.value(i) - b.v.value(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn fd_solve_examples() {
        let h = 1.0 / 16.0;
        let lap = EllipticOperator::laplacian(2);
        let full = Region::Box { lo: vec![0, 0], hi: vec![32, 32] };
        let disc = Region::Disc { center: vec![0.0, 0.0], radius: 0.8 };
        for f in [
            &(|x: &[f64]| 2.0 * x[0] - x[1] + 0.5) as &dyn Fn(&[f64]) -> f64,
            &|x: &[f64]| x[0] * x[0] - x[1] * x[1],
            &|_: &[f64]| 3.0,
        ] {
            let exact = square(h, 1.0, f);
            let g = exact.with_values(exact.values().iter().enumerate().map(|(i, v)| if exact.boundary_cells(i) == 0 { *v } else { 0.0 }).collect()).unwrap();
            let sol = fd_dirichlet_solve(&lap, &g, &full, 1e-12).unwrap();
            let err = sol.values().iter().zip(exact.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-9, "{err}");
            let sol = fd_dirichlet_solve(&lap, &exact, &disc, 1e-12).unwrap();
            let err = sol.values().iter().zip(exact.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-9, "{err}");
        }
        let skew = EllipticOperator::principal(SymMatrix::from_rows(&[vec![1.0, 1.2], vec![1.2, 2.0]]).unwrap(), 0.05).unwrap();
        let g = square(h, 1.0, |_| 0.0);
        let r = fd_dirichlet_solve(&skew, &g, &full, 1e-10);
        assert!(matches!(r, Err(Error::NotDiagonallyDominant(_))), "{r:?}");
    }

    #[test]
    fn fd_solve_with_absorption_stays_below_one() {
        let h = 1.0 / 16.0;
        let op = EllipticOperator::new(
            Coefficient::Constant(SymMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap()),
            vec![0.3, -1.0],
            -2.0,
            0.0,
            0.1,
        )
        .unwrap();
        let g = square(h, 1.0, |_| 1.0);
        let sol = fd_dirichlet_solve(&op, &g, &Region::Box { lo: vec![0, 0], hi: vec![32, 32] }, 1e-12).unwrap();
        assert!(sol.values().iter().all(|v| *v <= 1.0 + 1e-12));
        assert!(sol.values().iter().any(|v| *v < 0.99));
    }

    #[test]
    fn operator_validation_and_parsing() {
        assert!(matches!(
            EllipticOperator::principal(SymMatrix::diag(&[1.0, 0.0]), 1e-3),
            Err(Error::NotElliptic { .. })
        ));
        assert!(EllipticOperator::new(Coefficient::Constant(SymMatrix::identity(2)), vec![0.0, 0.0], 1.0, 0.0, 0.1).is_err());
        let none = |_: &str| -> Result<GridFunction> { Err(Error::Invalid("no files".into())) };
        let op = EllipticOperator::parse_json(r#"{"n": 2, "a": [[2, 0.5], [0.5, 1]], "c": -1, "floor": 0.1}"#, &none).unwrap();
        assert_eq!(op.c, -1.0);
        assert!(EllipticOperator::parse_json(r#"{"n": 2, "a": [[1, 0], [0, 1]], "bogus": 1}"#, &none).is_err());
        assert!(EllipticOperator::parse_json(r#"{"n": 2, "a": [[1, 2], [0, 1]]}"#, &none).is_err());
        let field = square(0.25, 1.0, |x| 1.0 + x[0] * x[0]);
        let zero = field.with_values(vec![0.0; field.len()]).unwrap();
        let load = |p: &str| -> Result<GridFunction> { Ok(if p == "off" { zero.clone() } else { field.clone() }) };
        let op = EllipticOperator::parse_json(r#"{"n": 2, "a": {"grids": ["d", "off", "d"]}, "floor": 0.5}"#, &load).unwrap();
        assert!(!op.is_constant());
        assert!(op.spec().is_err());
    }

    #[test]
    fn classical_examples() {
        let h = 1.0 / 32.0;
        let o = -1.0 + h / 2.0;
        let grid = |f: &dyn Fn(&[f64]) -> f64| GridFunction::sample(vec![64, 64], vec![o, o], h, f).unwrap();
        let lap = EllipticOperator::laplacian(2);
        let green = grid(&|x| (x[0].hypot(x[1])).ln() / (2.0 * PI));
        let regions = default_regions(&green);
        let cfg = ClassicalConfig::default();
        assert!(classical_check(&green, &lap, &regions, &cfg).unwrap().pass);
        let anti = grid(&|x| -(x[0].hypot(x[1])).ln() / (2.0 * PI));
        let r = classical_check(&anti, &lap, &regions, &cfg).unwrap();
        assert!(!r.pass);
        let harm = grid(&|x| x[0] * x[1] - x[0] * x[0] + x[1] * x[1]);
        let r = classical_check(&harm, &lap, &regions, &cfg).unwrap();
        assert!(r.pass && r.worst_ratio < 1.0);
    }

    #[test]
    fn regions_cover_small_and_large() {
        let g = GridFunction::new(vec![33, 33], vec![0.0, 0.0], 0.1, vec![0.0; 33 * 33]).unwrap();
        let regions = default_regions(&g);
        assert!(regions.contains(&Region::Box { lo: vec![0, 0], hi: vec![4, 4] }));
        assert!(regions.contains(&Region::Box { lo: vec![0, 0], hi: vec![32, 32] }));
        assert!(regions.iter().all(|r| !r.interior(&g).unwrap().is_empty()));
    }
}
