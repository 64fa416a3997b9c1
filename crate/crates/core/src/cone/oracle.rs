//! Membership-oracle sets and the sampling machinery behind them.
//!
//! Everything here is seeded and deterministic. Oracle conclusions are
//! one-sided where possible: an infimum is declared `−∞` only after an
//! actual member with `⟨w, x⟩ < −scale_cap` has been found, and a ray is
//! accepted only when its far point at distance `scale_cap²` is a member.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::jet_space::{jet_dim, min_eigenvalue, Jet2};
use crate::linalg;

pub type Membership = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

#[derive(Clone)]
pub struct OracleSet {
    d: usize,
    membership: Membership,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub scale_cap: f64,
    pub name: String,
}

impl fmt::Debug for OracleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OracleSet")
            .field("name", &self.name)
            .field("d", &self.d)
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("scale_cap", &self.scale_cap)
            .finish()
    }
}

/// Result of an infimum search.
#[derive(Debug, Clone, PartialEq)]
pub enum SupportValue {
    Finite { value: f64, argmin: Vec<f64> },
    NegInfinity { witness: Vec<f64> },
}

impl SupportValue {
    pub fn value(&self) -> f64 {
        match self {
            SupportValue::Finite { value, .. } => *value,
            SupportValue::NegInfinity { .. } => f64::NEG_INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, SupportValue::Finite { .. })
    }
}

impl OracleSet {
    pub fn new(
        d: usize,
        membership: impl Fn(&[f64]) -> bool + Send + Sync + 'static,
        lo: Vec<f64>,
        hi: Vec<f64>,
        name: impl Into<String>,
    ) -> Result<Self> {
        if lo.len() != d || hi.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: lo.len().min(hi.len()) });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::Invalid("sampling box must have positive extent".into()));
        }
        Ok(Self { d, membership: Arc::new(membership), lo, hi, scale_cap: 1e6, name: name.into() })
    }

    pub fn with_scale_cap(mut self, cap: f64) -> Self {
        self.scale_cap = cap;
        self
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        (self.membership)(v)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn diameter(&self) -> f64 {
        linalg::norm(&linalg::sub(&self.hi, &self.lo))
    }

    /// Length of the far point used by ray tests.
    pub fn ray_reach(&self) -> f64 {
        self.scale_cap * self.scale_cap
    }

    /// Uniform members of the sampling box, widening the box by powers of
    /// two when the box itself yields none.
    pub fn sample_box_members(&self, rng: &mut ChaCha8Rng, k: usize) -> Vec<Vec<f64>> {
        let c = self.center();
        let mut out = Vec::new();
        for level in 0..=14 {
            let s = (1u64 << level) as f64;
            for _ in 0..(200 * k.max(1)) {
                let x: Vec<f64> = (0..self.d)
                    .map(|i| c[i] + s * (rng.gen::<f64>() - 0.5) * (self.hi[i] - self.lo[i]))
                    .collect();
                if self.contains(&x) {
                    out.push(x);
                    if out.len() >= k {
                        return out;
                    }
                }
            }
            if !out.is_empty() {
                return out;
            }
        }
        out
    }

    /// Centroid of sampled members, or the first member if the centroid
    /// is rejected.
    pub fn interior_point(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let members = self.sample_box_members(rng, 64);
        if members.is_empty() {
            return Err(Error::EmptySet);
        }
        let mut c = vec![0.0; self.d];
        for m in &members {
            c = linalg::add(&c, m);
        }
        let c = linalg::scale(&c, 1.0 / members.len() as f64);
        if self.contains(&c) {
            Ok(c)
        } else {
            Ok(members[0].clone())
        }
    }

    /// Largest `t ≤ reach` with `x + t·dir` a member, for a member `x`.
    /// The flag reports whether `reach` itself was accepted.
    pub fn exit_distance(&self, x: &[f64], dir: &[f64], reach: f64) -> (f64, bool) {
        if self.contains(&linalg::axpy(x, reach, dir)) {
            return (reach, true);
        }
        let mut lo = 0.0;
        let mut t = 1e-3 * self.diameter().max(1e-12) / linalg::norm(dir).max(1e-300);
        while t < reach && self.contains(&linalg::axpy(x, t, dir)) {
            lo = t;
            t *= 2.0;
        }
        let mut hi = t.min(reach);
        for _ in 0..80 {
            if hi - lo <= 1e-14 * (1.0 + hi) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.contains(&linalg::axpy(x, mid, dir)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo, false)
    }

    /// Whether the ray from member `base` along `dir` stays in the set.
    pub fn ray_stays(&self, base: &[f64], dir: &[f64]) -> bool {
        match linalg::normalized(dir) {
            None => true,
            Some(u) => self.contains(&linalg::axpy(base, self.ray_reach(), &u)),
        }
    }

    /// Infimum of `⟨w, ·⟩`: expanding-radius sampling followed by a
    /// line-search descent over a direction ladder that tilts `−w` towards
    /// coordinate and random directions.
    pub fn support_search(&self, w: &[f64], seed: u64) -> Result<SupportValue> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let wn = linalg::normalized(w).ok_or(Error::ZeroVector)?;
        let cap = self.scale_cap;
        let mut x = self.interior_point(&mut rng)?;
        let mut cur = linalg::dot(w, &x);
        let c = self.center();
        let diam = self.diameter();

        for level in 0..=14 {
            let r = (1u64 << level) as f64 * diam;
            for _ in 0..64 {
                let y: Vec<f64> = (0..self.d).map(|i| c[i] + r * (2.0 * rng.gen::<f64>() - 1.0)).collect();
                if self.contains(&y) {
                    let v = linalg::dot(w, &y);
                    if v < cur {
                        cur = v;
                        x = y;
                    }
                }
            }
            if cur < -cap {
                return Ok(SupportValue::NegInfinity { witness: x });
            }
        }

        let reach = self.ray_reach();
        let mut stall = 0;
        let mut xb = x.clone();
        for _ in 0..2000 {
            let mut tilts: Vec<Vec<f64>> = Vec::new();
            for i in 0..self.d {
                tilts.push(linalg::unit(self.d, i));
                tilts.push(linalg::scale(&linalg::unit(self.d, i), -1.0));
            }
            for _ in 0..6 {
                let g: Vec<f64> = (0..self.d).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
                if let Some(u) = linalg::normalized(&g) {
                    tilts.push(u);
                }
            }
            let mut dirs = vec![linalg::scale(&wn, -1.0)];
            for v in &tilts {
                let mut eta = 1.0;
                for _ in 0..=16 {
                    if let Some(dv) = linalg::normalized(&linalg::axpy(v, -eta, &wn)) {
                        if linalg::dot(&dv, &wn) < 0.0 {
                            dirs.push(dv);
                        }
                    }
                    eta *= 0.25;
                }
            }
            // the iterate stays strictly inside (half chords) so that
            // tangential progress remains possible; exit points are recorded
            let mut best = linalg::dot(w, &x);
            let mut best_step = None;
            for dv in &dirs {
                let (t, _) = self.exit_distance(&x, dv, reach);
                if t <= 0.0 {
                    continue;
                }
                let v = linalg::dot(w, &linalg::axpy(&x, t, dv));
                if v < best {
                    best = v;
                    best_step = Some((t, dv.clone()));
                }
            }
            let Some((t, dv)) = best_step else { break };
            if best < cur - 1e-13 * (1.0 + cur.abs()) {
                stall = 0;
            } else {
                stall += 1;
            }
            if best < cur {
                cur = best;
                xb = linalg::axpy(&x, t, &dv);
            }
            x = linalg::axpy(&x, 0.5 * t, &dv);
            if stall >= 8 {
                break;
            }
            if cur < -cap {
                return Ok(SupportValue::NegInfinity { witness: xb });
            }
        }
        Ok(SupportValue::Finite { value: cur, argmin: xb })
    }

    /// Approximate nearest member to `z` by line-searched descent on
    /// `|x − z|²` from an interior point.
    pub fn nearest_point(&self, z: &[f64], seed: u64) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = self.interior_point(&mut rng)?;
        let dist = |y: &[f64]| linalg::norm(&linalg::sub(y, z));
        let mut cur = dist(&x);
        let mut stall = 0;
        for _ in 0..2000 {
            let mut dirs: Vec<Vec<f64>> = Vec::new();
            if let Some(u) = linalg::normalized(&linalg::sub(z, &x)) {
                dirs.push(u);
            }
            for i in 0..self.d {
                dirs.push(linalg::unit(self.d, i));
                dirs.push(linalg::scale(&linalg::unit(self.d, i), -1.0));
            }
            for _ in 0..8 {
                let g: Vec<f64> = (0..self.d).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
                if let Some(u) = linalg::normalized(&g) {
                    dirs.push(u);
                }
            }
            let mut best = cur;
            let mut best_x = None;
            for dv in &dirs {
                // unconstrained minimizer along the line, clipped to the chord
                let t_star = linalg::dot(&linalg::sub(z, &x), dv);
                if t_star <= 0.0 {
                    continue;
                }
                let (t_exit, _) = self.exit_distance(&x, dv, t_star);
                let y = linalg::axpy(&x, t_exit.min(t_star), dv);
                let v = dist(&y);
                if v < best {
                    best = v;
                    best_x = Some(y);
                }
            }
            match best_x {
                Some(y) if best < cur - 1e-14 * (1.0 + cur) => {
                    cur = best;
                    x = y;
                    stall = 0;
                }
                _ => {
                    stall += 1;
                    if stall >= 4 {
                        break;
                    }
                }
            }
        }
        Ok(x)
    }

    /// Hit-and-run chain with chord endpoints favoured, reaching out to the
    /// scale cap; used for boundary-biased sampling.
    pub fn boundary_biased_samples(&self, rng: &mut ChaCha8Rng, k: usize) -> Result<Vec<Vec<f64>>> {
        let mut x = self.interior_point(rng)?;
        let mut out = Vec::with_capacity(k);
        let cap = self.scale_cap;
        while out.len() < k {
            let g: Vec<f64> = (0..self.d).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
            let Some(u) = linalg::normalized(&g) else { continue };
            let (tp, _) = self.exit_distance(&x, &u, cap);
            let (tm, _) = self.exit_distance(&x, &linalg::scale(&u, -1.0), cap);
            let roll: f64 = rng.gen();
            let t = if roll < 0.35 {
                tp
            } else if roll < 0.7 {
                -tm
            } else {
                -tm + rng.gen::<f64>() * (tp + tm)
            };
            let y = linalg::axpy(&x, t, &u);
            if self.contains(&y) {
                out.push(y.clone());
                x = y;
            }
        }
        Ok(out)
    }
}

/// `{(x, y) : y ≥ x²/2}` in R².
pub fn parabola_a9() -> OracleSet {
    OracleSet::new(2, |v: &[f64]| v[1] - 0.5 * v[0] * v[0] >= 0.0, vec![-2.0, -0.5], vec![2.0, 3.5], "parabola_a9")
        .expect("static box")
}

/// Closed Euclidean unit ball.
pub fn unit_ball(d: usize) -> OracleSet {
    OracleSet::new(d, |v: &[f64]| linalg::dot(v, v) <= 1.0, vec![-1.5; d], vec![1.5; d], "unit_ball")
        .expect("static box")
}

/// `R × Rⁿ × {A ⪰ 0}` in jet coordinates.
pub fn psd_jets(n: usize) -> OracleSet {
    let d = jet_dim(n);
    OracleSet::new(
        d,
        move |v: &[f64]| match Jet2::from_vector(n, v) {
            Ok(j) => min_eigenvalue(&j.a) >= -1e-12 * (1.0 + j.a.trace().abs()),
            Err(_) => false,
        },
        vec![-1.0; d],
        vec![1.0; d],
        "builtin_psd",
    )
    .expect("static box")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_distance_on_ball() {
        let b = unit_ball(2);
        let (t, capped) = b.exit_distance(&[0.0, 0.0], &[1.0, 0.0], 1e12);
        assert!(!capped);
        assert!((t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn support_search_finite_and_divergent() {
        let p = parabola_a9();
        let up = p.support_search(&[0.0, 1.0], 1).unwrap();
        assert!(up.is_finite());
        assert!(up.value().abs() < 1e-6, "{up:?}");
        let tilted = p.support_search(&[1.0, 1.0], 2).unwrap();
        assert!((tilted.value() + 0.5).abs() < 1e-6, "{tilted:?}");
        let side = p.support_search(&[1.0, 0.0], 3).unwrap();
        assert!(!side.is_finite());
        let ball = unit_ball(3).support_search(&[0.0, 2.0, 0.0], 4).unwrap();
        assert!((ball.value() + 2.0).abs() < 1e-9);
    }

    #[test]
    fn nearest_point_on_disc() {
        let p = unit_ball(2).nearest_point(&[2.0, 0.0], 9).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-6 && p[1].abs() < 1e-4, "{p:?}");
    }
}
