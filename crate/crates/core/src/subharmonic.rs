//! Grid-level checks of classical, viscosity and distributional
//! subharmonicity for constant-coefficient subequations, and the
//! essential-limsup regularization.

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::cone::ConvexSetRep;
use crate::error::{Error, Result};
use crate::grid::{operator_stencil, GridFunction};
use crate::jet_space::{jet_dim, rank_one_projector, Jet2, SymMatrix};
use crate::linalg;
use crate::subequation::{sample_stable, SubequationSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JetWitness {
    pub point: Vec<f64>,
    pub jet: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct C2Report {
    pub pass: bool,
    pub checked: usize,
    pub failures: usize,
    pub tol: f64,
    pub first_failure: Option<JetWitness>,
}

fn check_dims(u: &GridFunction, spec: &SubequationSpec) -> Result<()> {
    if u.n() != spec.n {
        return Err(Error::DimensionMismatch { expected: spec.n, got: u.n() });
    }
    Ok(())
}

/// Central-difference 2-jet at a node one cell away from the boundary.
pub fn difference_jet(u: &GridFunction, idx: usize) -> Option<Jet2> {
    let n = u.n();
    let h = u.h();
    let at = |o: &[isize]| u.offset(idx, o).map(|j| u.value(j));
    let c = u.value(idx);
    let mut p = vec![0.0; n];
    let mut a = SymMatrix::zeros(n);
    for i in 0..n {
        let mut o = vec![0isize; n];
        o[i] = 1;
        let fwd = at(&o)?;
        o[i] = -1;
        let bwd = at(&o)?;
        p[i] = (fwd - bwd) / (2.0 * h);
        a.set(i, i, (fwd - 2.0 * c + bwd) / (h * h));
        for j in i + 1..n {
            let mut q = vec![0isize; n];
            let mut v = 0.0;
            for (si, sj, s) in [(1, 1, 1.0), (-1, -1, 1.0), (1, -1, -1.0), (-1, 1, -1.0)] {
                q[i] = si;
                q[j] = sj;
                v += s * at(&q)?;
            }
            a.set(i, j, v / (4.0 * h * h));
        }
    }
    Jet2::new(c, p, a).ok()
}

/// Membership of `(r, p, A + push·I)`; for half-space lists the push acts as
/// a slack allowance instead.
fn jet_member(spec: &SubequationSpec, jet: &Jet2, push: f64) -> bool {
    match &spec.rep {
        ConvexSetRep::HRep(h) => {
            let v = jet.to_vector();
            h.items().iter().all(|it| it.slack(&v) >= -push)
        }
        rep => {
            let shifted = Jet2 { r: jet.r, p: jet.p.clone(), a: jet.a.plus(&SymMatrix::identity(jet.n()).scaled(push)) };
            rep.contains(&shifted.to_vector(), 0.0)
        }
    }
}

/// Pointwise membership of the difference jets; `tol` defaults to
/// `10 h² max(1, max|u|)`.
pub fn c2_membership(u: &GridFunction, spec: &SubequationSpec, tol: Option<f64>) -> Result<C2Report> {
    check_dims(u, spec)?;
    if u.has_neg_inf() {
        return Err(Error::Invalid("classical membership needs finite values".into()));
    }
    let tol = tol.unwrap_or(10.0 * u.h() * u.h() * u.max_abs_finite().max(1.0));
    let fails: Vec<(usize, Jet2)> = (0..u.len())
        .into_par_iter()
        .filter(|&i| u.boundary_cells(i) >= 1)
        .filter_map(|i| {
            let jet = difference_jet(u, i)?;
            (!jet_member(spec, &jet, tol)).then_some((i, jet))
        })
        .collect();
    let checked = (0..u.len()).filter(|&i| u.boundary_cells(i) >= 1).count();
    Ok(C2Report {
        pass: fails.is_empty(),
        checked,
        failures: fails.len(),
        tol,
        first_failure: fails.first().map(|(i, j)| JetWitness { point: u.point(*i), jet: j.to_vector() }),
    })
}

/// Upper test quadratics `φ(y) = u(x₀) + ⟨p, y − x₀⟩ + ½⟨A(y − x₀), y − x₀⟩`.
///
/// Gradients always include the central and one-sided difference quotients
/// (all per-axis combinations); `gradients` adds fixed ones. With `harvest`
/// the least-squares quadratic fit over the contact window contributes its
/// gradient and curvature.
#[derive(Debug, Clone)]
pub struct ProbeDictionary {
    pub curvatures: Vec<SymMatrix>,
    pub gradients: Vec<Vec<f64>>,
    pub harvest: bool,
    /// Contact radius in cells.
    pub radius: usize,
}

impl ProbeDictionary {
    /// Shapes `I`, `P_e` and `P_e − P_{e⊥}` scaled by `±2^k`, `k = −4..4`.
    pub fn standard(n: usize) -> Self {
        let mut dirs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        if n == 2 {
            for k in 0..8 {
                let t = std::f64::consts::PI * k as f64 / 8.0;
                dirs.push((vec![t.cos(), t.sin()], vec![-t.sin(), t.cos()]));
            }
        } else {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            for i in 0..n {
                for j in i + 1..n {
                    dirs.push((linalg::unit(n, i), linalg::unit(n, j)));
                    let mut a = vec![0.0; n];
                    let mut b = vec![0.0; n];
                    a[i] = s;
                    a[j] = s;
                    b[i] = s;
                    b[j] = -s;
                    dirs.push((a, b));
                }
            }
            if n == 1 {
                dirs.push((vec![1.0], vec![0.0]));
            }
        }
        let mut shapes = vec![SymMatrix::identity(n)];
        for (e, f) in &dirs {
            let pe = rank_one_projector(e).expect("unit");
            shapes.push(pe.clone());
            if let Ok(pf) = rank_one_projector(f) {
                shapes.push(pe.plus(&pf.scaled(-1.0)));
            }
        }
        let mut curvatures = Vec::new();
        for s in &shapes {
            for k in -4..=4 {
                let m = 2f64.powi(k);
                curvatures.push(s.scaled(m));
                curvatures.push(s.scaled(-m));
            }
        }
        Self { curvatures, gradients: Vec::new(), harvest: true, radius: 2 }
    }

    pub fn is_empty(&self) -> bool {
        self.curvatures.is_empty() && !self.harvest
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadraticProbe {
    pub center: Vec<f64>,
    pub gradient: Vec<f64>,
    pub curvature: Vec<f64>,
    pub radius: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ViscosityReport {
    pub pass: bool,
    pub points_checked: usize,
    /// Probe jets outside `F` whose contact was tested.
    pub outside_probes: usize,
    /// First touching probe (in grid order) whose jet lies outside `F`.
    pub counterexample: Option<QuadraticProbe>,
    pub counterexample_jet: Option<Vec<f64>>,
}

/// Least-squares quadratic fit over a fixed window: maps the window values
/// (minus the centre) to `(p, A)`.
struct QuadraticFit {
    n: usize,
    /// Rows: coefficient index; columns: window position.
    pinv: Vec<Vec<f64>>,
}

impl QuadraticFit {
    fn new(n: usize, window: &[Vec<isize>], h: f64) -> Option<Self> {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
        let m = n + pairs.len();
        let rows: Vec<Vec<f64>> = window
            .iter()
            .map(|o| {
                let z: Vec<f64> = o.iter().map(|&x| x as f64 * h).collect();
                let mut r: Vec<f64> = z.clone();
                for &(i, j) in &pairs {
                    r.push(if i == j { 0.5 * z[i] * z[i] } else { z[i] * z[j] });
                }
                r
            })
            .collect();
        let mut ata = vec![0.0; m * m];
        for r in &rows {
            for a in 0..m {
                for b in 0..m {
                    ata[a * m + b] += r[a] * r[b];
                }
            }
        }
        let mut pinv = vec![vec![0.0; rows.len()]; m];
        for (k, r) in rows.iter().enumerate() {
            let col = linalg::solve(&ata, m, r)?;
            for a in 0..m {
                pinv[a][k] = col[a];
            }
        }
        Some(Self { n, pinv })
    }

    fn fit(&self, d: &[f64]) -> (Vec<f64>, SymMatrix) {
        let coef: Vec<f64> = self.pinv.iter().map(|row| linalg::dot(row, d)).collect();
        let p = coef[..self.n].to_vec();
        let mut a = SymMatrix::zeros(self.n);
        let mut k = self.n;
        for i in 0..self.n {
            for j in i..self.n {
                a.set(i, j, coef[k]);
                k += 1;
            }
        }
        (p, a)
    }
}

/// Searches for upper test quadratics touching `u` whose jet (with
/// `A + tol·I`) lies outside `F`. Touching means
/// `u(y) ≤ φ(y) + tol|y − x₀|²` on the grid points within the contact
/// radius; −∞ nodes are never contact points.
pub fn viscosity_check(u: &GridFunction, spec: &SubequationSpec, probes: &ProbeDictionary, tol: f64) -> Result<ViscosityReport> {
    check_dims(u, spec)?;
    if probes.is_empty() {
        return Err(Error::Invalid("empty probe dictionary".into()));
    }
    let n = u.n();
    let h = u.h();
    let rho = probes.radius.max(2);
    let window = ball_offsets(n, rho as f64);
    let zs: Vec<Vec<f64>> = window.iter().map(|o| o.iter().map(|&x| x as f64 * h).collect()).collect();
    // axis neighbours first for an early exit
    let mut order: Vec<usize> = (0..window.len()).collect();
    order.sort_by_key(|&k| window[k].iter().map(|x| x * x).sum::<isize>());
    let fit = if probes.harvest { QuadraticFit::new(n, &window, h) } else { None };
    let push = SymMatrix::identity(n).scaled(tol);
    let linear = spec.halfspaces();
    // per curvature: (A + tol·I, its pairings with half-space normals, and
    // ½⟨Az, z⟩ + tol|z|² over the window)
    let prepare = |a: &SymMatrix| {
        let shifted = a.plus(&push);
        let coords = shifted.to_coords();
        let pairings: Vec<f64> = linear
            .as_ref()
            .map(|hs| hs.iter().map(|it| linalg::dot(&it.operator.a.to_coords(), &coords)).collect())
            .unwrap_or_default();
        let quad: Vec<f64> = zs.iter().map(|z| 0.5 * a.quad_form(z) + tol * linalg::dot(z, z)).collect();
        (shifted, pairings, quad)
    };
    let prepared: Vec<_> = probes.curvatures.iter().map(|a| (a.clone(), prepare(a))).collect();
    let outside = |r: f64, p: &[f64], shifted: &SymMatrix, pairings: &[f64]| match &linear {
        Some(hs) => hs
            .iter()
            .zip(pairings)
            .any(|(it, pa)| it.operator.c * r + linalg::dot(&it.operator.b, p) + pa - it.lambda < 0.0),
        None => !jet_member(spec, &Jet2 { r, p: p.to_vec(), a: shifted.clone() }, 0.0),
    };
    let deltas: Vec<isize> = window.iter().map(|o| u.linear_delta(o)).collect();

    let points: Vec<usize> = (0..u.len()).filter(|&i| u.boundary_cells(i) >= rho && u.value(i).is_finite()).collect();
    let results: Vec<(usize, usize, Option<(QuadraticProbe, Vec<f64>)>)> = points
        .par_iter()
        .map(|&idx| {
            let c = u.value(idx);
            let d: Vec<f64> = deltas.iter().map(|&dl| u.value((idx as isize + dl) as usize) - c).collect();
            let mut grads = difference_gradients(u, idx);
            grads.extend(probes.gradients.iter().cloned());
            let mut harvested = None;
            if let Some(f) = &fit {
                if d.iter().all(|v| v.is_finite()) {
                    let (p, a) = f.fit(&d);
                    grads.push(p);
                    let prep = prepare(&a);
                    harvested = Some((a, prep));
                }
            }
            let mut tested = 0;
            for p in &grads {
                let lin: Vec<f64> = zs.iter().map(|z| linalg::dot(p, z)).collect();
                for (a, (shifted, pairings, quad)) in prepared.iter().chain(harvested.iter()) {
                    if !outside(c, p, shifted, pairings) {
                        continue;
                    }
                    tested += 1;
                    if order.iter().all(|&k| d[k] <= lin[k] + quad[k]) {
                        let probe = QuadraticProbe {
                            center: u.point(idx),
                            gradient: p.clone(),
                            curvature: a.to_coords(),
                            radius: rho,
                        };
                        let jet = Jet2 { r: c, p: p.clone(), a: shifted.clone() };
                        return (idx, tested, Some((probe, jet.to_vector())));
                    }
                }
            }
            (idx, tested, None)
        })
        .collect();
    let outside_probes = results.iter().map(|r| r.1).sum();
    let first = results.into_iter().find_map(|r| r.2);
    Ok(ViscosityReport {
        pass: first.is_none(),
        points_checked: points.len(),
        outside_probes,
        counterexample_jet: first.as_ref().map(|f| f.1.clone()),
        counterexample: first.map(|f| f.0),
    })
}

/// Central, forward and backward difference quotients, combined per axis.
fn difference_gradients(u: &GridFunction, idx: usize) -> Vec<Vec<f64>> {
    let n = u.n();
    let h = u.h();
    let c = u.value(idx);
    let mut per_axis: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let o: Vec<isize> = (0..n).map(|k| (k == i) as isize).collect();
        let step = u.linear_delta(&o);
        let f = u.value((idx as isize + step) as usize);
        let b = u.value((idx as isize - step) as usize);
        let mut opts = Vec::new();
        if f.is_finite() {
            opts.push((f - c) / h);
        }
        if b.is_finite() {
            opts.push((c - b) / h);
        }
        if f.is_finite() && b.is_finite() {
            opts.push((f - b) / (2.0 * h));
        }
        if opts.is_empty() {
            opts.push(0.0);
        }
        per_axis.push(opts);
    }
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for opts in per_axis {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                opts.iter().map(move |&v| {
                    let mut q = prefix.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

/// Nonzero integer offsets with `|o| ≤ r`.
fn ball_offsets(n: usize, r: f64) -> Vec<Vec<isize>> {
    let m = r.floor() as isize;
    let mut out = Vec::new();
    let mut cur = vec![-m; n];
    loop {
        let r2: isize = cur.iter().map(|x| x * x).sum();
        if r2 > 0 && (r2 as f64) <= r * r + 1e-9 {
            out.push(cur.clone());
        }
        let mut k = 0;
        loop {
            if k == n {
                return out;
            }
            cur[k] += 1;
            if cur[k] <= m {
                break;
            }
            cur[k] = -m;
            k += 1;
        }
    }
}

/// Bump `exp(−1/(1 − |z|²/ε²))` tabulated on the grid and normalized to unit
/// discrete mass.
#[derive(Debug, Clone, Serialize)]
pub struct MollifierKernel {
    pub eps: f64,
    pub h: f64,
    pub n: usize,
    pub half_width: usize,
    /// Row-major over offsets `−half_width..=half_width` per axis.
    pub values: Vec<f64>,
}

impl MollifierKernel {
    pub fn new(n: usize, eps: f64, h: f64) -> Result<Self> {
        if !(eps > h && h > 0.0) {
            return Err(Error::Invalid(format!("mollifier radius {eps} must exceed the spacing {h}")));
        }
        let m = (eps / h).ceil() as usize;
        let side = 2 * m + 1;
        let len = side.pow(n as u32);
        let mut values = vec![0.0; len];
        for (k, v) in values.iter_mut().enumerate() {
            let t2: f64 = offsets_of(k, n, m).iter().map(|&o| (o as f64 * h / eps).powi(2)).sum();
            if t2 < 1.0 {
                *v = (-1.0 / (1.0 - t2)).exp();
            }
        }
        let mass: f64 = values.iter().sum::<f64>() * h.powi(n as i32);
        values.iter_mut().for_each(|v| *v /= mass);
        Ok(Self { eps, h, n, half_width: m, values })
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.h.powi(self.n as i32)
    }

    pub fn get(&self, offset: &[isize]) -> f64 {
        let m = self.half_width as isize;
        if offset.iter().any(|&o| o.abs() > m) {
            return 0.0;
        }
        let side = 2 * m + 1;
        let k = offset.iter().fold(0isize, |acc, &o| acc * side + (o + m));
        self.values[k as usize]
    }

    /// Nonzero entries as `(offset, value)`.
    pub fn support(&self) -> Vec<(Vec<isize>, f64)> {
        (0..self.values.len())
            .filter(|&k| self.values[k] > 0.0)
            .map(|k| (offsets_of(k, self.n, self.half_width), self.values[k]))
            .collect()
    }
}

fn offsets_of(mut k: usize, n: usize, m: usize) -> Vec<isize> {
    let side = 2 * m + 1;
    let mut out = vec![0isize; n];
    for slot in out.iter_mut().rev() {
        *slot = (k % side) as isize - m as isize;
        k /= side;
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct DistributionalConfig {
    pub eps: f64,
    /// Absolute allowance.
    pub tol: f64,
    /// Allowance relative to `Σ |u(y) − u(x)| |K(x − y)| hⁿ`, the size of the
    /// terms that cancel in the discrete convolution.
    pub rel_tol: f64,
    pub samples: usize,
    pub seed: u64,
    /// Replacement floor for −∞ nodes without finite neighbours.
    pub floor: f64,
}

impl DistributionalConfig {
    pub fn new(eps: f64, seed: u64) -> Self {
        Self { eps, tol: 1e-9, rel_tol: 1e-2, samples: 16, seed, floor: -1e9 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DistributionalViolation {
    pub point: Vec<f64>,
    pub sample: usize,
    pub value: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistributionalReport {
    pub pass: bool,
    pub samples: usize,
    pub points_checked: usize,
    pub neg_inf_fraction: f64,
    pub worst: Option<DistributionalViolation>,
}

/// Replaces −∞ nodes by `max(floor, min of finite values in the 3ⁿ block)`.
fn fill_neg_inf(u: &GridFunction, floor: f64) -> Result<(GridFunction, f64)> {
    let count = u.values().iter().filter(|v| **v == f64::NEG_INFINITY).count();
    let frac = count as f64 / u.len() as f64;
    if count == 0 {
        return Ok((u.clone(), 0.0));
    }
    if frac >= 0.1 {
        return Err(Error::Invalid(format!("−∞ on {:.1}% of the cells", 100.0 * frac)));
    }
    if frac > 1e-3 {
        warn!("replacing −∞ on {:.3}% of the cells", 100.0 * frac);
    }
    let block = {
        let mut b = ball_offsets(u.n(), (u.n() as f64).sqrt());
        b.retain(|o| o.iter().all(|x| x.abs() <= 1));
        b
    };
    let vals: Vec<f64> = (0..u.len())
        .map(|i| {
            let v = u.value(i);
            if v.is_finite() {
                return v;
            }
            let m = block
                .iter()
                .filter_map(|o| u.offset(i, o))
                .map(|j| u.value(j))
                .filter(|v| v.is_finite())
                .fold(f64::INFINITY, f64::min);
            if m.is_finite() { m.max(floor) } else { floor }
        })
        .collect();
    Ok((u.with_values(vals)?, frac))
}

/// Checks `L(u ⋆ ρ_ε) ≥ λ_L` for sampled stable half-spaces. Derivatives
/// fall on the kernel: `L(u ⋆ ρ) = u ⋆ (L_h ρ)` with `L_h` the grid stencil
/// of `L`, a single discrete convolution per sample.
pub fn distributional_check(u: &GridFunction, spec: &SubequationSpec, cfg: &DistributionalConfig) -> Result<DistributionalReport> {
    check_dims(u, spec)?;
    let h = u.h();
    if cfg.eps < 3.0 * h - 1e-12 {
        return Err(Error::Invalid(format!("ε = {} below 3h = {}", cfg.eps, 3.0 * h)));
    }
    if !matches!(spec.rep, ConvexSetRep::HRep(_)) && spec.kind != crate::subequation::SpecKind::BuiltinPsd {
        return Err(Error::Unsupported("distributional check needs a half-space list or the PSD builtin".into()));
    }
    let (u, frac) = fill_neg_inf(u, cfg.floor)?;
    let n = u.n();
    let rho = MollifierKernel::new(n, cfg.eps, h)?;
    let stable = sample_stable(spec, cfg.samples, cfg.seed)?;
    let reach = rho.half_width + 1;
    let points: Vec<usize> = (0..u.len())
        .filter(|&i| u.boundary_cells(i) >= reach && u.boundary_cells(i) as f64 * h > cfg.eps)
        .collect();
    let hn = h.powi(n as i32);
    let support = rho.support();

    let mut worst: Option<DistributionalViolation> = None;
    let mut worst_margin = f64::INFINITY;
    for (s_idx, s) in stable.iter().enumerate() {
        let stencil = operator_stencil(&s.operator, h);
        // K(z) = Σ_k w_k ρ(z + o_k)
        let mut kernel: std::collections::BTreeMap<Vec<isize>, f64> = std::collections::BTreeMap::new();
        for (z, rv) in &support {
            for (o, w) in &stencil.terms {
                let key: Vec<isize> = z.iter().zip(o).map(|(a, b)| a - b).collect();
                *kernel.entry(key).or_insert(0.0) += w * rv;
            }
        }
        let kernel: Vec<(isize, f64)> =
            kernel.into_iter().filter(|(_, v)| *v != 0.0).map(|(z, v)| (-u.linear_delta(&z), v)).collect();
        let res: Vec<(f64, usize, f64, f64)> = points
            .par_iter()
            .map(|&i| {
                let c = u.value(i);
                let mut v = 0.0;
                let mut scale = 0.0;
                for &(dl, k) in &kernel {
                    let y = u.value((i as isize + dl) as usize);
                    v += y * k;
                    scale += (y - c).abs() * k.abs();
                }
                v *= hn;
                scale *= hn;
                let threshold = s.lambda - cfg.tol - cfg.rel_tol * scale;
                (v - threshold, i, v, threshold)
            })
            .collect();
        for (margin, i, v, threshold) in res {
            if margin < worst_margin {
                worst_margin = margin;
                if margin < 0.0 {
                    worst = Some(DistributionalViolation { point: u.point(i), sample: s_idx, value: v, threshold });
                }
            }
        }
    }
    Ok(DistributionalReport {
        pass: worst.is_none(),
        samples: stable.len(),
        points_checked: points.len(),
        neg_inf_fraction: frac,
        worst,
    })
}

/// `u ⋆ ρ_ε` where the kernel fits inside the grid; `u` elsewhere.
pub fn mollify(u: &GridFunction, eps: f64) -> Result<GridFunction> {
    if u.has_neg_inf() {
        return Err(Error::Invalid("mollification needs finite values".into()));
    }
    let rho = MollifierKernel::new(u.n(), eps, u.h())?;
    let support: Vec<(isize, f64)> = rho.support().into_iter().map(|(z, w)| (-u.linear_delta(&z), w)).collect();
    let hn = u.h().powi(u.n() as i32);
    let vals: Vec<f64> = (0..u.len())
        .into_par_iter()
        .map(|i| {
            if u.boundary_cells(i) < rho.half_width {
                return u.value(i);
            }
            support
                .iter()
                .map(|&(dl, w)| u.value((i as isize + dl) as usize) * w)
                .sum::<f64>()
                * hn
        })
        .collect();
    u.with_values(vals)
}

/// `U_r(x) = max_{|y − x| ≤ r} u(y)` for each radius, largest first.
#[derive(Debug, Clone, Serialize)]
pub struct EssLimsup {
    pub radii: Vec<f64>,
    pub stack: Vec<GridFunction>,
}

impl EssLimsup {
    /// `U` at the smallest radius.
    pub fn finest(&self) -> &GridFunction {
        self.stack.last().expect("at least one radius")
    }

    pub fn r_min(&self) -> f64 {
        *self.radii.last().expect("at least one radius")
    }
}

pub fn ess_limsup(u: &GridFunction, radii: &[f64]) -> Result<EssLimsup> {
    if radii.is_empty() {
        return Err(Error::Invalid("no radii given".into()));
    }
    let min = 2.0 * u.h();
    for w in radii.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::Invalid("radii must be strictly decreasing".into()));
        }
    }
    if let Some(&r) = radii.iter().find(|&&r| r < min * (1.0 - 1e-12)) {
        return Err(Error::RadiusTooSmall { radius: r, min });
    }
    let stack = radii.iter().map(|&r| max_filter(u, r)).collect::<Result<Vec<_>>>()?;
    Ok(EssLimsup { radii: radii.to_vec(), stack })
}

fn max_filter(u: &GridFunction, r: f64) -> Result<GridFunction> {
    let mut offs = ball_offsets(u.n(), r / u.h());
    offs.push(vec![0; u.n()]);
    let reach = (r / u.h()).floor() as usize;
    let deltas: Vec<isize> = offs.iter().map(|o| u.linear_delta(o)).collect();
    let vals: Vec<f64> = (0..u.len())
        .into_par_iter()
        .map(|i| {
            if u.boundary_cells(i) >= reach {
                deltas.iter().map(|&dl| u.value((i as isize + dl) as usize)).fold(f64::NEG_INFINITY, f64::max)
            } else {
                offs.iter().filter_map(|o| u.offset(i, o)).map(|j| u.value(j)).fold(f64::NEG_INFINITY, f64::max)
            }
        })
        .collect();
    u.with_values(vals)
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularizationReport {
    /// `r ≤ r′ ⇒ U_r ≤ U_{r′}` everywhere.
    pub radius_monotone: bool,
    /// `U ≤ v + modulus` for the supplied representative.
    pub dominated: Option<bool>,
    /// Largest `U − v` seen.
    pub max_excess: Option<f64>,
    /// `u(x) ≤ U(x) + 1e-12` at the supplied continuity points.
    pub lebesgue_points: bool,
}

/// Checks the regularization inequalities. `representative` is an upper
/// semi-continuous `v` with the modulus to allow at `r_min`.
pub fn regularization_properties(
    u: &GridFunction,
    ess: &EssLimsup,
    representative: Option<(&GridFunction, f64)>,
    continuity_points: &[usize],
) -> RegularizationReport {
    let radius_monotone = ess.stack.windows(2).all(|w| {
        w[0].values().iter().zip(w[1].values()).all(|(big, small)| small <= big)
    });
    let finest = ess.finest();
    let (dominated, max_excess) = match representative {
        Some((v, modulus)) => {
            let excess = finest
                .values()
                .iter()
                .zip(v.values())
                .map(|(a, b)| if *a == f64::NEG_INFINITY { f64::NEG_INFINITY } else { a - b })
                .fold(f64::NEG_INFINITY, f64::max);
            (Some(excess <= modulus), Some(excess))
        }
        None => (None, None),
    };
    let lebesgue_points = continuity_points.iter().all(|&i| u.value(i) <= finest.value(i) + 1e-12);
    RegularizationReport { radius_monotone, dominated, max_excess, lebesgue_points }
}

/// Jet dimension check used by callers that build specs for a grid.
pub fn spec_matches_grid(u: &GridFunction, spec: &SubequationSpec) -> bool {
    spec.n == u.n() && spec.rep.dim() == jet_dim(u.n())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet_space::{JetHalfSpace, JetOperator};

    fn grid(n_side: usize, h: f64, f: impl Fn(&[f64]) -> f64) -> GridFunction {
        let o = -(n_side as f64 - 1.0) * h / 2.0;
        GridFunction::sample(vec![n_side, n_side], vec![o, o], h, f).unwrap()
    }

    #[test]
    fn c2_examples() {
        let lap = SubequationSpec::laplacian(2);
        let u = grid(21, 0.05, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        assert!(c2_membership(&u, &lap, None).unwrap().pass);
        let v = grid(21, 0.05, |x| -(x[0] * x[0] + x[1] * x[1]));
        let r = c2_membership(&v, &lap, None).unwrap();
        assert_eq!(r.failures, r.checked);

        // u = x₁³ on {A₁₁ ≥ 0}: u₁₁ = 6x₁ exactly
        let a11 = SubequationSpec::diagonal(2, &[0]).unwrap();
        let w = grid(21, 0.05, |x| x[0].powi(3));
        let tol = 1e-3;
        let r = c2_membership(&w, &a11, Some(tol)).unwrap();
        let expected = (0..w.len())
            .filter(|&i| w.boundary_cells(i) >= 1 && 6.0 * w.point(i)[0] < -tol)
            .count();
        assert_eq!(r.failures, expected);
        let mut bad = w.values().to_vec();
        bad[0] = f64::NEG_INFINITY;
        assert!(c2_membership(&w.with_values(bad).unwrap(), &a11, None).is_err());
    }

    #[test]
    fn viscosity_examples() {
        let psd = SubequationSpec::builtin_psd(2);
        let probes = ProbeDictionary::standard(2);
        let u = grid(17, 1.0 / 16.0, |x| x[0].abs());
        assert!(viscosity_check(&u, &psd, &probes, 1e-6).unwrap().pass);
        let v = grid(17, 1.0 / 16.0, |x| -x[0].abs());
        let r = viscosity_check(&v, &psd, &probes, 1e-6).unwrap();
        assert!(!r.pass);
        let probe = r.counterexample.unwrap();
        assert!(probe.center[0].abs() < 1e-12);
        let a = SymMatrix::from_coords(2, &probe.curvature).unwrap();
        assert!(crate::jet_space::min_eigenvalue(&a) < 0.0);

        let lap = SubequationSpec::laplacian(2);
        let c = grid(9, 0.1, |_| 3.0);
        assert!(viscosity_check(&c, &lap, &probes, 1e-6).unwrap().pass);
        let empty = ProbeDictionary { curvatures: vec![], gradients: vec![], harvest: false, radius: 2 };
        assert!(viscosity_check(&c, &lap, &empty, 1e-6).is_err());
    }

    #[test]
    fn viscosity_neg_inf_is_never_contact() {
        let lap = SubequationSpec::laplacian(2);
        let probes = ProbeDictionary::standard(2);
        let h = 1.0 / 16.0;
        let u = grid(33, h, |x| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if r == 0.0 { f64::NEG_INFINITY } else { r.ln() }
        });
        assert!(u.has_neg_inf());
        assert!(viscosity_check(&u, &lap, &probes, 1e-6).unwrap().pass);
    }

    #[test]
    fn max_of_subharmonic_quadratics_passes() {
        let both = SubequationSpec::diagonal(2, &[0, 1]).unwrap();
        let probes = ProbeDictionary::standard(2);
        let q1 = |x: &[f64]| x[0] * x[0] + 0.5 * x[1] * x[1] + x[0] * x[1];
        let q2 = |x: &[f64]| 0.2 * x[0] * x[0] + x[1] * x[1] - 0.3 * x[0] + 0.1;
        for f in [&q1 as &dyn Fn(&[f64]) -> f64, &q2] {
            assert!(viscosity_check(&grid(33, 1.0 / 16.0, f), &both, &probes, 1e-6).unwrap().pass);
        }
        let m = grid(33, 1.0 / 16.0, |x| q1(x).max(q2(x)));
        assert!(viscosity_check(&m, &both, &probes, 1e-6).unwrap().pass);
    }

    #[test]
    fn mollifier_mass_and_support() {
        for (n, eps, h) in [(1, 0.3, 0.05), (2, 6.0 / 64.0, 1.0 / 64.0), (3, 0.4, 0.1)] {
            let k = MollifierKernel::new(n, eps, h).unwrap();
            assert!((k.mass() - 1.0).abs() < 1e-8);
            assert!(k.values.iter().all(|v| *v >= 0.0));
            for (o, _) in k.support() {
                let r: f64 = o.iter().map(|&x| (x as f64 * h).powi(2)).sum::<f64>().sqrt();
                assert!(r < eps);
            }
        }
    }

    #[test]
    fn distributional_examples() {
        let both = SubequationSpec::diagonal(2, &[0, 1]).unwrap();
        let h = 1.0 / 32.0;
        let cfg = DistributionalConfig::new(4.0 * h, 7);
        let u = grid(41, h, |x| x[0].abs());
        assert!(distributional_check(&u, &both, &cfg).unwrap().pass);
        let v = grid(41, h, |x| -x[0].abs());
        let r = distributional_check(&v, &both, &cfg).unwrap();
        assert!(!r.pass);
        assert!(r.worst.unwrap().point[0].abs() < 4.0 * h);
        // smooth quadratics agree with the classical verdict
        let lap = SubequationSpec::laplacian(2);
        for (a, b, c) in [(1.0, 0.5, -0.3), (-1.0, 0.2, 0.1), (0.3, -0.2, 0.0)] {
            let q = grid(41, h, |x| a * x[0] * x[0] + b * x[1] * x[1] + c * x[0] * x[1]);
            assert_eq!(
                distributional_check(&q, &lap, &cfg).unwrap().pass,
                c2_membership(&q, &lap, None).unwrap().pass
            );
        }
        assert!(distributional_check(&u, &both, &DistributionalConfig::new(2.0 * h, 1)).is_err());
    }

    #[test]
    fn distributional_green_pole_on_node() {
        let lap = SubequationSpec::laplacian(2);
        let h = 1.0 / 32.0;
        let u = grid(65, h, |x| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if r == 0.0 { f64::NEG_INFINITY } else { r.ln() }
        });
        let cfg = DistributionalConfig::new(6.0 * h, 3);
        let r = distributional_check(&u, &lap, &cfg).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.neg_inf_fraction > 0.0);
    }

    #[test]
    fn ess_limsup_examples() {
        let h = 0.05;
        let u = grid(41, h, |x| (3.0 * x[0]).sin() + x[1]);
        let e = ess_limsup(&u, &[0.2, 0.1]).unwrap();
        let lip = (9.0f64 + 1.0).sqrt();
        let err = e.finest().values().iter().zip(u.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= lip * 0.1 + 1e-12);

        let step = grid(41, h, |x| if x[0] < 0.0 { 1.0 } else { 0.0 });
        let e = ess_limsup(&step, &[2.0 * h]).unwrap();
        for i in 0..step.len() {
            let x = step.point(i);
            if x[0] >= 0.0 && x[0] <= 2.0 * h - 1e-12 {
                assert_eq!(e.finest().value(i), 1.0);
            }
        }

        let lg = grid(41, h, |x| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if r == 0.0 { f64::NEG_INFINITY } else { r.ln() }
        });
        let r_min = 2.0 * h;
        let e = ess_limsup(&lg, &[r_min]).unwrap();
        let centre = lg.nearest(&[0.0, 0.0]);
        assert!((e.finest().value(centre) - r_min.ln()).abs() < 1e-12);

        assert!(matches!(ess_limsup(&u, &[h]), Err(Error::RadiusTooSmall { .. })));
        assert!(ess_limsup(&u, &[0.1, 0.2]).is_err());
    }

    #[test]
    fn regularization_examples() {
        let h = 0.05;
        let c = grid(21, h, |_| 2.5);
        let e = ess_limsup(&c, &[0.3, 0.2, 0.1]).unwrap();
        assert!(e.stack.iter().all(|g| g.values().iter().all(|v| *v == 2.5)));

        let u = grid(21, h, |x| x[0] + 0.5 * x[1]);
        let e = ess_limsup(&u, &[0.3, 0.2, 0.1]).unwrap();
        let lip = (1.25f64).sqrt();
        let r = regularization_properties(&u, &e, Some((&u, lip * e.r_min() + 1e-12)), &[0, 50, 200]);
        assert!(r.radius_monotone && r.dominated == Some(true) && r.lebesgue_points);

        let mut vals = vec![1.0; 21 * 21];
        vals[220] = -5.0;
        let spike = grid(21, h, |_| 1.0).with_values(vals).unwrap();
        let e = ess_limsup(&spike, &[2.0 * h]).unwrap();
        assert_eq!(e.finest().value(220), 1.0);

        // U_r ≤ U_r(U_r) ≤ U_{2r}
        let w = grid(21, h, |x| (5.0 * x[0]).cos() * x[1]);
        let r1 = 0.1;
        let once = ess_limsup(&w, &[r1]).unwrap();
        let twice = ess_limsup(once.finest(), &[r1]).unwrap();
        let double = ess_limsup(&w, &[2.0 * r1]).unwrap();
        for i in 0..w.len() {
            assert!(once.finest().value(i) <= twice.finest().value(i));
            assert!(twice.finest().value(i) <= double.finest().value(i) + 1e-15);
        }
    }

    #[test]
    fn monotone_in_the_subequation() {
        let h = 1.0 / 16.0;
        let u = grid(17, h, |x| x[0] * x[0] - 0.5 * x[1] * x[1]);
        let small = SubequationSpec::diagonal(2, &[0, 1]).unwrap();
        let big = SubequationSpec::diagonal(2, &[0]).unwrap();
        let probes = ProbeDictionary::standard(2);
        assert!(!viscosity_check(&u, &small, &probes, 1e-6).unwrap().pass);
        assert!(viscosity_check(&u, &big, &probes, 1e-6).unwrap().pass);
        let first = SubequationSpec::from_halfspaces(
            2,
            &[JetHalfSpace::new(JetOperator::second_order(SymMatrix::diag(&[1.0, 0.0])), 0.0).unwrap()],
            "a11",
        )
        .unwrap();
        assert!(viscosity_check(&u, &first, &probes, 1e-6).unwrap().pass);
    }
}
