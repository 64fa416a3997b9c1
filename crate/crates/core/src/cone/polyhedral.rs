//! LP-backed routines for half-space lists and generator lists.

use super::{Generators, HalfSpaceList};
use crate::linalg;
use crate::lp::{Cmp, LinearProgram, LpOutcome};

pub(crate) fn feasible_point(h: &HalfSpaceList) -> Option<Vec<f64>> {
    let d = h.dim();
    if h.items().is_empty() {
        return Some(vec![0.0; d]);
    }
    let mut lp = LinearProgram::feasibility(d);
    lp.all_free();
    for it in h.items() {
        lp.constrain(it.w.clone(), Cmp::Ge, it.lambda);
    }
    match lp.solve() {
        LpOutcome::Optimal { x, .. } => Some(x),
        _ => None,
    }
}

/// `inf ⟨w, x⟩` over the set; `Ok(None)` means unbounded below,
/// `Err(())` means the set is empty.
pub(crate) fn support(h: &HalfSpaceList, w: &[f64]) -> Result<Option<(f64, Vec<f64>)>, ()> {
    let d = h.dim();
    let mut lp = LinearProgram::minimize(w.to_vec());
    lp.all_free();
    for it in h.items() {
        lp.constrain(it.w.clone(), Cmp::Ge, it.lambda);
    }
    match lp.solve() {
        LpOutcome::Optimal { x, value } => Ok(Some((value, x))),
        LpOutcome::Unbounded => {
            // distinguish emptiness from unboundedness
            if feasible_point(h).is_some() {
                Ok(None)
            } else {
                Err(())
            }
        }
        LpOutcome::Infeasible => {
            let _ = d;
            Err(())
        }
    }
}

/// Largest `s ≤ 1` such that some ball of radius `s` fits inside the set,
/// with its center.
pub(crate) fn inner_radius(h: &HalfSpaceList) -> Option<(f64, Vec<f64>)> {
    let d = h.dim();
    let mut obj = vec![0.0; d + 1];
    obj[d] = 1.0;
    let mut lp = LinearProgram::maximize(obj);
    lp.all_free();
    for it in h.items() {
        let mut row = it.w.clone();
        row.push(-linalg::norm(&it.w));
        lp.constrain(row, Cmp::Ge, it.lambda);
    }
    let mut cap = vec![0.0; d + 1];
    cap[d] = 1.0;
    lp.constrain(cap, Cmp::Le, 1.0);
    match lp.solve() {
        LpOutcome::Optimal { x, value } => Some((value, x[..d].to_vec())),
        _ => None,
    }
}

/// Relative-interior certificate for `w` in `cone(gens)`: the optimum of
/// `max t` subject to `Σ μ_i ĝ_i = ŵ`, `μ_i ≥ t`, `t ≤ 1` (hats denote
/// normalization). `None` when `w` is not in the cone at all.
pub(crate) fn cone_interior_margin(gens: &[Vec<f64>], w: &[f64]) -> Option<f64> {
    let d = w.len();
    let w = linalg::normalized(w)?;
    let gens: Vec<Vec<f64>> = gens.iter().filter_map(|g| linalg::normalized(g)).collect();
    let m = gens.len();
    if m == 0 {
        return None;
    }
    // variables: μ_1..μ_m, t (all ≥ 0)
    let mut obj = vec![0.0; m + 1];
    obj[m] = 1.0;
    let mut lp = LinearProgram::maximize(obj);
    for k in 0..d {
        let mut row: Vec<f64> = gens.iter().map(|g| g[k]).collect();
        row.push(0.0);
        lp.constrain(row, Cmp::Eq, w[k]);
    }
    for i in 0..m {
        let mut row = vec![0.0; m + 1];
        row[i] = 1.0;
        row[m] = -1.0;
        lp.constrain(row, Cmp::Ge, 0.0);
    }
    let mut cap = vec![0.0; m + 1];
    cap[m] = 1.0;
    lp.constrain(cap, Cmp::Le, 1.0);
    lp.solve().value()
}

/// L1 distance from `v` to the generated set (`None` when the set is empty).
pub(crate) fn generated_residual(g: &Generators, v: &[f64]) -> Option<f64> {
    if g.points.is_empty() {
        return None;
    }
    let d = g.d;
    let (np, nr, nl) = (g.points.len(), g.rays.len(), g.lines.len());
    // variables: α (np), β (nr), γ⁺ γ⁻ (2 nl), e⁺ e⁻ (2 d)
    let nv = np + nr + 2 * nl + 2 * d;
    let mut obj = vec![0.0; nv];
    obj[np + nr + 2 * nl..].iter_mut().for_each(|c| *c = 1.0);
    let mut lp = LinearProgram::minimize(obj);
    for k in 0..d {
        let mut row = vec![0.0; nv];
        for (i, p) in g.points.iter().enumerate() {
            row[i] = p[k];
        }
        for (i, r) in g.rays.iter().enumerate() {
            row[np + i] = r[k];
        }
        for (i, l) in g.lines.iter().enumerate() {
            row[np + nr + 2 * i] = l[k];
            row[np + nr + 2 * i + 1] = -l[k];
        }
        row[np + nr + 2 * nl + 2 * k] = 1.0;
        row[np + nr + 2 * nl + 2 * k + 1] = -1.0;
        lp.constrain(row, Cmp::Eq, v[k]);
    }
    let mut conv = vec![0.0; nv];
    conv[..np].iter_mut().for_each(|c| *c = 1.0);
    lp.constrain(conv, Cmp::Eq, 1.0);
    lp.solve().value()
}

/// Whether `v` lies in `cone(rays) + span(lines)`.
pub(crate) fn in_cone_plus_span(rays: &[Vec<f64>], lines: &[Vec<f64>], v: &[f64], d: usize) -> bool {
    let g = Generators { d, points: vec![vec![0.0; d]], rays: rays.to_vec(), lines: lines.to_vec() };
    generated_residual(&g, v).is_some_and(|r| r <= 1e-9 * (1.0 + linalg::norm(v)))
}

/// Nearest point of the half-space intersection to `z` by Dykstra's
/// cyclic projections; stops once an entire cycle moves less than `1e-10`.
pub(crate) fn dykstra_projection(h: &HalfSpaceList, z: &[f64]) -> Vec<f64> {
    let items = h.items();
    let mut x = z.to_vec();
    let mut incr = vec![vec![0.0; z.len()]; items.len()];
    for _ in 0..200_000 {
        let prev = x.clone();
        for (it, p) in items.iter().zip(incr.iter_mut()) {
            let y = linalg::add(&x, p);
            let s = it.slack(&y);
            let nx = if s < 0.0 {
                linalg::axpy(&y, -s / linalg::dot(&it.w, &it.w), &it.w)
            } else {
                y.clone()
            };
            *p = linalg::sub(&y, &nx);
            x = nx;
        }
        if linalg::norm(&linalg::sub(&x, &prev)) < 1e-10 {
            break;
        }
    }
    x
}

/// Max-margin separator of `z` from a generated set, with `|w|_∞ ≤ 1`.
/// Returns `(w, margin)` where `⟨w, x − z⟩ ≥ margin` on the set.
pub(crate) fn generated_separator(g: &Generators, z: &[f64]) -> Option<(Vec<f64>, f64)> {
    let d = g.d;
    // variables: w (free, d), s (free)
    let mut obj = vec![0.0; d + 1];
    obj[d] = 1.0;
    let mut lp = LinearProgram::maximize(obj);
    lp.all_free();
    for p in &g.points {
        let mut row = linalg::sub(p, z);
        row.push(-1.0);
        lp.constrain(row, Cmp::Ge, 0.0);
    }
    for r in &g.rays {
        let mut row = r.clone();
        row.push(0.0);
        lp.constrain(row, Cmp::Ge, 0.0);
    }
    for l in &g.lines {
        let mut row = l.clone();
        row.push(0.0);
        lp.constrain(row, Cmp::Eq, 0.0);
    }
    for k in 0..d {
        let mut row = vec![0.0; d + 1];
        row[k] = 1.0;
        lp.constrain(row.clone(), Cmp::Le, 1.0);
        lp.constrain(row, Cmp::Ge, -1.0);
    }
    match lp.solve() {
        LpOutcome::Optimal { x, value } if value > 0.0 => Some((x[..d].to_vec(), value)),
        _ => None,
    }
}
