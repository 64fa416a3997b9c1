use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::oracle::{OracleSet, SupportValue};
use super::polyhedral;
use super::{ConeConfig, ContainingCone, ConvexSetRep, GeneratedCone, Generators, HalfSpace, HalfSpaceList, Subspace};
use crate::error::{Error, Result};
use crate::linalg;

/// Recession cone in whichever representation the input allowed.
#[derive(Debug, Clone)]
pub enum RecessionCone {
    HRep(HalfSpaceList),
    Generated(GeneratedCone),
    /// Ray-test membership from a fixed base point (oracle inputs, d > 2).
    Oracle(OracleSet),
}

impl RecessionCone {
    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        match self {
            RecessionCone::HRep(h) => h.contains(v, tol),
            RecessionCone::Generated(g) => g.contains(v, tol),
            RecessionCone::Oracle(o) => o.contains(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProbeResult {
    Holds,
    Witness(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SupportVerdict {
    Supporting { lambda: f64, contact: Vec<f64> },
    StrictlyContaining { lambda: f64 },
    NotContaining,
}

/// A strictly separating half-space `H(w, λ)`: the set lies in its
/// interior, the separated point outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Separator {
    pub w: Vec<f64>,
    pub lambda: f64,
    /// Distance from the separated point to its projection.
    pub gap: f64,
}

fn rng(cfg: &ConeConfig, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn ensure_nonempty(f: &ConvexSetRep, cfg: &ConeConfig) -> Result<()> {
    let empty = match f {
        ConvexSetRep::HRep(h) => h.is_empty(),
        ConvexSetRep::VRep(g) => g.is_empty(),
        ConvexSetRep::Oracle(o) => o.interior_point(&mut rng(cfg, 1)).is_err(),
    };
    if empty {
        Err(Error::EmptySet)
    } else {
        Ok(())
    }
}

/// Polar `{w : ⟨w, g⟩ ≥ 0 ∀ g}` of a finitely generated cone.
pub fn polar_cone(c: &GeneratedCone) -> HalfSpaceList {
    let items = c.rays.iter().map(|g| HalfSpace { w: g.clone(), lambda: 0.0 }).collect();
    HalfSpaceList::new(c.d, items).expect("rays share the ambient dimension")
}

/// Polar `F⁰ = {w : ⟨w, x⟩ ≥ −1 ∀ x ∈ F}`.
pub fn polar_set(f: &ConvexSetRep, cfg: &ConeConfig) -> Result<ConvexSetRep> {
    ensure_nonempty(f, cfg)?;
    match f {
        ConvexSetRep::VRep(g) => {
            let mut items = Vec::new();
            for p in &g.points {
                if linalg::norm(p) > 1e-15 {
                    items.push(HalfSpace { w: p.clone(), lambda: -1.0 });
                }
            }
            for r in &g.rays {
                items.push(HalfSpace { w: r.clone(), lambda: 0.0 });
            }
            for l in &g.lines {
                items.push(HalfSpace { w: l.clone(), lambda: 0.0 });
                items.push(HalfSpace { w: linalg::scale(l, -1.0), lambda: 0.0 });
            }
            Ok(ConvexSetRep::HRep(HalfSpaceList::new(g.d, items)?))
        }
        ConvexSetRep::HRep(h) if h.items().iter().all(|it| it.lambda <= 0.0) => {
            // 0 ∈ F: F⁰ = conv({0} ∪ {w_i / −λ_i}) + cone{w_i : λ_i = 0}
            let d = h.dim();
            let mut points = vec![vec![0.0; d]];
            let mut rays = Vec::new();
            for it in h.items() {
                if it.lambda < 0.0 {
                    points.push(linalg::scale(&it.w, -1.0 / it.lambda));
                } else {
                    rays.push(it.w.clone());
                }
            }
            Ok(ConvexSetRep::VRep(Generators::new(d, points, rays, Vec::new())?))
        }
        ConvexSetRep::HRep(h) => {
            let h = h.clone();
            let d = h.dim();
            let o = OracleSet::new(
                d,
                move |w: &[f64]| {
                    if linalg::norm(w) == 0.0 {
                        return true;
                    }
                    match polyhedral::support(&h, w) {
                        Ok(Some((v, _))) => v >= -1.0 - 1e-12,
                        _ => false,
                    }
                },
                vec![-1.0; d],
                vec![1.0; d],
                "polar",
            )?;
            Ok(ConvexSetRep::Oracle(o))
        }
        ConvexSetRep::Oracle(o) => {
            let inner = o.clone();
            let seed = cfg.seed;
            let d = o.dim();
            let polar = OracleSet::new(
                d,
                move |w: &[f64]| {
                    if linalg::norm(w) == 0.0 {
                        return true;
                    }
                    match inner.support_search(w, seed) {
                        Ok(s) => s.value() >= -1.0 - 1e-9,
                        Err(_) => false,
                    }
                },
                vec![-1.0; d],
                vec![1.0; d],
                format!("polar({})", o.name),
            )?;
            Ok(ConvexSetRep::Oracle(polar))
        }
    }
}

/// `(F⁰)⁰`, which is the closed convex hull of `F ∪ {0}`.
pub fn bipolar_roundtrip(f: &ConvexSetRep, cfg: &ConeConfig) -> Result<ConvexSetRep> {
    polar_set(&polar_set(f, cfg)?, cfg)
}

/// Membership in the polar of `g` evaluated through the support function
/// of `g`; independent of the representation `polar_set` would build.
pub fn polar_contains(g: &ConvexSetRep, v: &[f64], cfg: &ConeConfig) -> Result<bool> {
    if linalg::norm(v) == 0.0 {
        return Ok(true);
    }
    Ok(support_infimum(g, v, cfg)?.value() >= -1.0 - 1e-9)
}

/// `C₊(F)` for a nonempty half-space list.
pub fn containing_cone(f: &HalfSpaceList) -> Result<ContainingCone> {
    if f.is_empty() {
        return Err(Error::EmptySet);
    }
    let d = f.dim();
    let mut generators: Vec<(Vec<f64>, f64)> = f.items().iter().map(|it| (it.w.clone(), it.lambda)).collect();
    generators.push((vec![0.0; d], -1.0));
    Ok(ContainingCone { d, generators })
}

/// `(w, λ) ∈ C₊(F)` decided through the support function.
pub fn contains_pair(f: &ConvexSetRep, w: &[f64], lambda: f64, cfg: &ConeConfig) -> Result<bool> {
    if linalg::norm(w) == 0.0 {
        return Ok(lambda <= 0.0);
    }
    Ok(support_infimum(f, w, cfg)?.value() >= lambda - 1e-9 * (1.0 + lambda.abs()))
}

/// Largest subspace `E` with `F + E ⊂ F`.
pub fn edge(f: &ConvexSetRep, cfg: &ConeConfig) -> Result<Subspace> {
    ensure_nonempty(f, cfg)?;
    match f {
        ConvexSetRep::HRep(h) => Ok(Subspace::spanned_by(h.dim(), &h.normals()).complement()),
        ConvexSetRep::VRep(g) => {
            let mut lin: Vec<Vec<f64>> = g.lines.clone();
            for r in &g.rays {
                if polyhedral::in_cone_plus_span(&g.rays, &g.lines, &linalg::scale(r, -1.0), g.d) {
                    lin.push(r.clone());
                }
            }
            Ok(Subspace::spanned_by(g.d, &lin))
        }
        ConvexSetRep::Oracle(o) => {
            let base = o.interior_point(&mut rng(cfg, 2))?;
            Ok(edge_from(o, &base))
        }
    }
}

/// Oracle edge from a given base point: coordinate lines, then sums and
/// differences of coordinate pairs that individually failed.
pub fn edge_from(o: &OracleSet, base: &[f64]) -> Subspace {
    let d = o.dim();
    let line = |v: &[f64]| o.ray_stays(base, v) && o.ray_stays(base, &linalg::scale(v, -1.0));
    let mut passing = Vec::new();
    let mut failing = Vec::new();
    for i in 0..d {
        let e = linalg::unit(d, i);
        if line(&e) {
            passing.push(e);
        } else {
            failing.push(i);
        }
    }
    for (a, &i) in failing.iter().enumerate() {
        for &j in &failing[a + 1..] {
            for s in [1.0, -1.0] {
                let mut v = linalg::unit(d, i);
                v[j] = s;
                if line(&v) {
                    passing.push(v);
                }
            }
        }
    }
    Subspace::spanned_by(d, &passing)
}

/// Dual span `S_F = Edge(F)^⊥`.
pub fn dual_span(f: &ConvexSetRep, cfg: &ConeConfig) -> Result<Subspace> {
    Ok(edge(f, cfg)?.complement())
}

pub fn recession_cone(f: &ConvexSetRep, cfg: &ConeConfig) -> Result<RecessionCone> {
    ensure_nonempty(f, cfg)?;
    match f {
        ConvexSetRep::HRep(h) => {
            let items = h.items().iter().map(|it| HalfSpace { w: it.w.clone(), lambda: 0.0 }).collect();
            Ok(RecessionCone::HRep(HalfSpaceList::new(h.dim(), items)?))
        }
        ConvexSetRep::VRep(g) => {
            let mut rays = g.rays.clone();
            for l in &g.lines {
                rays.push(l.clone());
                rays.push(linalg::scale(l, -1.0));
            }
            Ok(RecessionCone::Generated(GeneratedCone::new(g.d, rays)?))
        }
        ConvexSetRep::Oracle(o) if o.dim() == 2 => planar_recession(o, cfg).map(RecessionCone::Generated),
        ConvexSetRep::Oracle(o) => {
            let base = o.interior_point(&mut rng(cfg, 3))?;
            Ok(RecessionCone::Oracle(ray_test_oracle(o, base)?))
        }
    }
}

/// Recession cone of an oracle set as ray-test membership from `base`.
pub fn ray_test_oracle(o: &OracleSet, base: Vec<f64>) -> Result<OracleSet> {
    let inner = o.clone();
    let d = o.dim();
    OracleSet::new(d, move |v: &[f64]| inner.ray_stays(&base, v), vec![-1.0; d], vec![1.0; d], format!("rec({})", o.name))
}

/// Planar recession cone as the polar of the cone of directions with a
/// finite infimum: the finite arc is located by a coarse angular scan and
/// bisection on its end points.
fn planar_recession(o: &OracleSet, cfg: &ConeConfig) -> Result<GeneratedCone> {
    let dir = |t: f64| vec![t.cos(), t.sin()];
    let finite = |t: f64| -> Result<bool> { Ok(o.support_search(&dir(t), cfg.seed)?.is_finite()) };
    const K: usize = 32;
    let angles: Vec<f64> = (0..K).map(|k| 2.0 * PI * k as f64 / K as f64).collect();
    let flags: Vec<bool> = angles.iter().map(|&t| finite(t)).collect::<Result<_>>()?;
    let full_plane = || GeneratedCone::new(2, vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]]);
    if flags.iter().all(|f| *f) {
        return GeneratedCone::new(2, Vec::new());
    }
    let Some(start) = (0..K).find(|&k| flags[k] && !flags[(k + K - 1) % K]) else {
        // no finite direction on the scan; a line-shaped P₊ would sit
        // orthogonal to the edge
        let e = edge(&ConvexSetRep::Oracle(o.clone()), cfg)?;
        if e.dim() == 1 {
            let l = &e.basis[0];
            let n = [-l[1], l[0]];
            let plus = o.support_search(&n, cfg.seed)?.is_finite();
            let minus = o.support_search(&[-n[0], -n[1]], cfg.seed)?.is_finite();
            if plus || minus {
                let mut rays = vec![l.clone(), linalg::scale(l, -1.0)];
                if plus && !minus {
                    rays.push(n.to_vec());
                } else if minus && !plus {
                    rays.push(vec![-n[0], -n[1]]);
                }
                return GeneratedCone::new(2, rays);
            }
        }
        return full_plane();
    };
    let mut end = start;
    while flags[(end + 1) % K] {
        end = (end + 1) % K;
    }
    let step = 2.0 * PI / K as f64;
    let bisect = |inside: f64, outside: f64| -> Result<f64> {
        let (mut a, mut b) = (inside, outside);
        for _ in 0..40 {
            let m = 0.5 * (a + b);
            if finite(m)? {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(a)
    };
    let phi1 = bisect(angles[start], angles[start] - step)?;
    let mut phi2_in = angles[end];
    if phi2_in < phi1 {
        phi2_in += 2.0 * PI;
    }
    let phi2 = bisect(phi2_in, phi2_in + step)?;
    // rec = {v : ⟨v, w⟩ ≥ 0 for every w with angle in [φ1, φ2]}
    let lo = phi2 - PI / 2.0;
    let hi = phi1 + PI / 2.0;
    if hi - lo < 1e-5 {
        GeneratedCone::new(2, vec![dir(0.5 * (lo + hi))])
    } else if hi > lo {
        GeneratedCone::new(2, vec![dir(lo), dir(hi)])
    } else {
        GeneratedCone::new(2, Vec::new())
    }
}

/// Samples `k` boundary-biased points of `f` and checks `x + v ∈ f`.
pub fn monotonicity_probe(f: &ConvexSetRep, v: &[f64], k: usize, cfg: &ConeConfig) -> Result<ProbeResult> {
    if linalg::norm(v) == 0.0 {
        return Ok(ProbeResult::Holds);
    }
    let o = as_oracle(f, cfg)?;
    let samples = o.boundary_biased_samples(&mut rng(cfg, 4), k)?;
    let tol = 1e-9;
    for x in samples {
        if !f.contains(&linalg::add(&x, v), tol) {
            return Ok(ProbeResult::Witness(x));
        }
    }
    Ok(ProbeResult::Holds)
}

/// View of any representation as a membership oracle with a sampling box
/// around a known member.
pub fn as_oracle(f: &ConvexSetRep, cfg: &ConeConfig) -> Result<OracleSet> {
    match f {
        ConvexSetRep::Oracle(o) => Ok(o.clone()),
        ConvexSetRep::HRep(h) => {
            let (center, radius) = match polyhedral::inner_radius(h) {
                Some((s, c)) if s > 0.0 => (c, s.min(1.0)),
                _ => (h.feasible_point().ok_or(Error::EmptySet)?, 1.0),
            };
            let hh = h.clone();
            OracleSet::new(
                h.dim(),
                move |v: &[f64]| hh.contains(v, 1e-12),
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
                "halfspace_list",
            )
        }
        ConvexSetRep::VRep(g) => {
            if g.points.is_empty() {
                return Err(Error::EmptySet);
            }
            let d = g.d;
            let mut lo = vec![f64::INFINITY; d];
            let mut hi = vec![f64::NEG_INFINITY; d];
            for p in &g.points {
                for i in 0..d {
                    lo[i] = lo[i].min(p[i] - 0.5);
                    hi[i] = hi[i].max(p[i] + 0.5);
                }
            }
            let gg = g.clone();
            let _ = cfg;
            OracleSet::new(d, move |v: &[f64]| gg.contains(v, 1e-10), lo, hi, "generated")
        }
    }
}

/// `inf_{x ∈ F} ⟨w, x⟩`, possibly `−∞`.
pub fn support_infimum(f: &ConvexSetRep, w: &[f64], cfg: &ConeConfig) -> Result<SupportValue> {
    if linalg::norm(w) == 0.0 {
        return Err(Error::ZeroVector);
    }
    match f {
        ConvexSetRep::HRep(h) => match polyhedral::support(h, w) {
            Ok(Some((value, argmin))) => Ok(SupportValue::Finite { value, argmin }),
            Ok(None) => Ok(SupportValue::NegInfinity { witness: h.feasible_point().unwrap_or_default() }),
            Err(()) => Err(Error::EmptySet),
        },
        ConvexSetRep::VRep(g) => {
            if g.points.is_empty() {
                return Err(Error::EmptySet);
            }
            let unbounded = g.rays.iter().any(|r| linalg::dot(w, r) < -1e-12 * linalg::norm(r))
                || g.lines.iter().any(|l| linalg::dot(w, l).abs() > 1e-12 * linalg::norm(l));
            if unbounded {
                return Ok(SupportValue::NegInfinity { witness: g.points[0].clone() });
            }
            let (value, argmin) = g
                .points
                .iter()
                .map(|p| (linalg::dot(w, p), p.clone()))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .expect("nonempty");
            Ok(SupportValue::Finite { value, argmin })
        }
        ConvexSetRep::Oracle(o) => o.support_search(w, cfg.seed),
    }
}

/// `w ∈ Stab(F)`, the relative interior of the containing directions.
pub fn stab_membership(w: &[f64], f: &ConvexSetRep, cfg: &ConeConfig) -> Result<bool> {
    let wn = linalg::norm(w);
    if wn == 0.0 {
        return Err(Error::ZeroVector);
    }
    ensure_nonempty(f, cfg)?;
    match f {
        ConvexSetRep::HRep(h) => Ok(polyhedral::cone_interior_margin(&h.normals(), w)
            .is_some_and(|t| t > cfg.rel_interior_tol)),
        ConvexSetRep::VRep(g) => {
            // P₊ = {w : ⟨w, r⟩ ≥ 0, ⟨w, l⟩ = 0}; relative interior is strict
            // on every ray outside the lineality space
            let lin = edge(f, cfg)?;
            let tol = cfg.rel_interior_tol;
            if lin.basis.iter().any(|b| linalg::dot(b, w).abs() > tol * wn) {
                return Ok(false);
            }
            Ok(g.rays
                .iter()
                .filter(|r| !lin.contains(r, 1e-9))
                .all(|r| linalg::dot(w, r) > tol * wn * linalg::norm(r)))
        }
        ConvexSetRep::Oracle(o) => {
            if !o.support_search(w, cfg.seed)?.is_finite() {
                return Ok(false);
            }
            let span = dual_span(f, cfg)?;
            let delta = cfg.perturbation * wn;
            for s in &span.basis {
                for sign in [1.0, -1.0] {
                    let wp = linalg::axpy(w, sign * delta, s);
                    if !o.support_search(&wp, cfg.seed)?.is_finite() {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        }
    }
}

/// Classifies `w` as a supporting, merely containing or non-containing
/// direction.
pub fn supporting_test(w: &[f64], f: &ConvexSetRep, cfg: &ConeConfig) -> Result<SupportVerdict> {
    let s = support_infimum(f, w, cfg)?;
    Ok(match (s, f) {
        (SupportValue::NegInfinity { .. }, _) => SupportVerdict::NotContaining,
        (SupportValue::Finite { value, argmin }, ConvexSetRep::Oracle(o)) => {
            // a minimizer drifting off to the scale cap indicates an infimum
            // that is approached but not attained
            let far = linalg::norm(&linalg::sub(&argmin, &o.center())) > o.scale_cap.sqrt() * o.diameter().max(1.0);
            if !far && o.contains(&argmin) {
                SupportVerdict::Supporting { lambda: value, contact: argmin }
            } else {
                SupportVerdict::StrictlyContaining { lambda: value }
            }
        }
        (SupportValue::Finite { value, argmin }, _) => SupportVerdict::Supporting { lambda: value, contact: argmin },
    })
}

/// Strict separation of an exterior point from `F`.
pub fn separate(z: &[f64], f: &ConvexSetRep, cfg: &ConeConfig) -> Result<Separator> {
    if z.len() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: z.len() });
    }
    ensure_nonempty(f, cfg)?;
    if f.contains(z, 1e-12) {
        return Err(Error::PointInside);
    }
    let from_projection = |p: Vec<f64>| -> Result<Separator> {
        let diff = linalg::sub(&p, z);
        let gap = linalg::norm(&diff);
        let w = linalg::normalized(&diff).ok_or(Error::PointInside)?;
        let mid = linalg::scale(&linalg::add(&p, z), 0.5);
        Ok(Separator { lambda: linalg::dot(&w, &mid), w, gap })
    };
    match f {
        ConvexSetRep::HRep(h) => from_projection(polyhedral::dykstra_projection(h, z)),
        ConvexSetRep::Oracle(o) => from_projection(o.nearest_point(z, cfg.seed)?),
        ConvexSetRep::VRep(g) => {
            let (w, margin) = polyhedral::generated_separator(g, z).ok_or(Error::PointInside)?;
            let nw = linalg::norm(&w);
            let w = linalg::scale(&w, 1.0 / nw);
            let m = margin / nw;
            Ok(Separator { lambda: linalg::dot(&w, z) + 0.5 * m, w, gap: m })
        }
    }
}
