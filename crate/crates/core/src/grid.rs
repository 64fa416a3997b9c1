//! Uniform grids on boxes in Rⁿ and finite-difference stencils.
//!
//! Text format:
//!
//! ```text
//! dim 2
//! shape 5 5
//! origin -1 -1
//! spacing 0.5
//! values
//! 0 1 2 ... (row-major, last axis fastest; `-inf` for −∞)
//! ```

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet_space::JetOperator;

/// Finite values must stay below this magnitude.
pub const VALUE_CAP: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFunction {
    shape: Vec<usize>,
    origin: Vec<f64>,
    h: f64,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(shape: Vec<usize>, origin: Vec<f64>, h: f64, values: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::Invalid("grid needs at least one axis".into()));
        }
        if origin.len() != shape.len() {
            return Err(Error::DimensionMismatch { expected: shape.len(), got: origin.len() });
        }
        if let Some(&s) = shape.iter().find(|&&s| s < 5) {
            return Err(Error::Invalid(format!("axis count {s} below the minimum of 5")));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Invalid(format!("spacing {h} must be positive")));
        }
        let len: usize = shape.iter().product();
        if values.len() != len {
            return Err(Error::DimensionMismatch { expected: len, got: values.len() });
        }
        for &v in &values {
            if v != f64::NEG_INFINITY && !(v.is_finite() && v.abs() < VALUE_CAP) {
                return Err(Error::Invalid(format!("grid value {v} out of range")));
            }
        }
        Ok(Self { shape, origin, h, values })
    }

    /// Samples `f` at every node.
    pub fn sample(shape: Vec<usize>, origin: Vec<f64>, h: f64, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let len: usize = shape.iter().product();
        let mut g = Self { shape, origin, h, values: vec![0.0; len] };
        let values = (0..len).map(|i| f(&g.point(i))).collect();
        g = g.with_values(values)?;
        Ok(g)
    }

    /// Same geometry, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.shape.clone(), self.origin.clone(), self.h, values)
    }

    pub fn n(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn has_neg_inf(&self) -> bool {
        self.values.iter().any(|v| *v == f64::NEG_INFINITY)
    }

    pub fn max_abs_finite(&self) -> f64 {
        self.values.iter().filter(|v| v.is_finite()).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn unravel(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.n()];
        for k in (0..self.n()).rev() {
            out[k] = idx % self.shape[k];
            idx /= self.shape[k];
        }
        out
    }

    pub fn ravel(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.shape).fold(0, |acc, (&m, &s)| acc * s + m)
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.unravel(idx).iter().zip(&self.origin).map(|(&m, &o)| o + m as f64 * self.h).collect()
    }

    /// Change of linear index for a displacement of `delta` cells; only
    /// meaningful when the displaced node stays on the grid.
    pub fn linear_delta(&self, delta: &[isize]) -> isize {
        delta.iter().zip(&self.shape).fold(0isize, |acc, (&d, &s)| acc * s as isize + d)
    }

    /// Index of the node displaced by `delta` cells, if on the grid.
    pub fn offset(&self, idx: usize, delta: &[isize]) -> Option<usize> {
        let multi = self.unravel(idx);
        let mut out = 0usize;
        for k in 0..self.n() {
            let m = multi[k] as isize + delta[k];
            if m < 0 || m >= self.shape[k] as isize {
                return None;
            }
            out = out * self.shape[k] + m as usize;
        }
        Some(out)
    }

    /// Cells between the node and the nearest face of the box.
    pub fn boundary_cells(&self, idx: usize) -> usize {
        self.unravel(idx).iter().zip(&self.shape).map(|(&m, &s)| m.min(s - 1 - m)).min().unwrap_or(0)
    }

    /// Nearest node to `x` (clamped to the box).
    pub fn nearest(&self, x: &[f64]) -> usize {
        let multi: Vec<usize> = x
            .iter()
            .zip(&self.origin)
            .zip(&self.shape)
            .map(|((&xi, &o), &s)| (((xi - o) / self.h).round().max(0.0) as usize).min(s - 1))
            .collect();
        self.ravel(&multi)
    }

    /// Multilinear interpolation; `None` outside the box. A −∞ corner with
    /// positive weight gives −∞.
    pub fn interpolate(&self, x: &[f64]) -> Option<f64> {
        let n = self.n();
        let mut base = vec![0usize; n];
        let mut frac = vec![0.0; n];
        for k in 0..n {
            let t = (x[k] - self.origin[k]) / self.h;
            let last = (self.shape[k] - 1) as f64;
            if !(t >= -1e-9 && t <= last + 1e-9) {
                return None;
            }
            let t = t.clamp(0.0, last);
            let b = (t.floor() as usize).min(self.shape[k] - 2);
            base[k] = b;
            frac[k] = t - b as f64;
        }
        let mut acc = 0.0;
        for corner in 0..1usize << n {
            let mut w = 1.0;
            let mut multi = base.clone();
            for k in 0..n {
                if corner >> k & 1 == 1 {
                    multi[k] += 1;
                    w *= frac[k];
                } else {
                    w *= 1.0 - frac[k];
                }
            }
            if w > 0.0 {
                acc += w * self.values[self.ravel(&multi)];
            }
        }
        Some(acc)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut dim = None;
        let mut shape = None;
        let mut origin = None;
        let mut spacing = None;
        let mut values = Vec::new();
        let mut in_values = false;
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut toks = line.split_whitespace();
            let head = toks.next().expect("nonempty line");
            if !in_values {
                let rest: Vec<&str> = toks.collect();
                match head {
                    "dim" => dim = Some(parse_usize(rest.first().copied())?),
                    "shape" => shape = Some(rest.iter().map(|t| parse_usize(Some(t))).collect::<Result<Vec<_>>>()?),
                    "origin" => origin = Some(rest.iter().map(|t| parse_f64(t)).collect::<Result<Vec<_>>>()?),
                    "spacing" => spacing = Some(parse_f64(rest.first().copied().unwrap_or(""))?),
                    "values" => {
                        in_values = true;
                        for t in rest {
                            values.push(parse_f64(t)?);
                        }
                    }
                    _ => {
                        in_values = true;
                        values.push(parse_f64(head)?);
                        for t in rest {
                            values.push(parse_f64(t)?);
                        }
                    }
                }
            } else {
                values.push(parse_f64(head)?);
                for t in toks {
                    values.push(parse_f64(t)?);
                }
            }
        }
        let missing = |k: &str| Error::Parse(format!("missing `{k}` header"));
        let dim = dim.ok_or_else(|| missing("dim"))?;
        let shape = shape.ok_or_else(|| missing("shape"))?;
        let origin = origin.ok_or_else(|| missing("origin"))?;
        let spacing = spacing.ok_or_else(|| missing("spacing"))?;
        if shape.len() != dim || origin.len() != dim {
            return Err(Error::Parse(format!("header lengths disagree with dim {dim}")));
        }
        Self::new(shape, origin, spacing, values)
    }

    pub fn to_text(&self) -> String {
        let join = |v: &[String]| v.join(" ");
        let mut s = String::new();
        let _ = writeln!(s, "dim {}", self.n());
        let _ = writeln!(s, "shape {}", join(&self.shape.iter().map(|x| x.to_string()).collect::<Vec<_>>()));
        let _ = writeln!(s, "origin {}", join(&self.origin.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>()));
        let _ = writeln!(s, "spacing {:e}", self.h);
        s.push_str("values\n");
        let row = *self.shape.last().expect("nonempty shape");
        for chunk in self.values.chunks(row) {
            let line: Vec<String> = chunk
                .iter()
                .map(|v| if *v == f64::NEG_INFINITY { "-inf".to_string() } else { format!("{v:e}") })
                .collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }
}

fn parse_usize(t: Option<&str>) -> Result<usize> {
    let t = t.ok_or_else(|| Error::Parse("missing integer".into()))?;
    t.parse().map_err(|_| Error::Parse(format!("bad integer `{t}`")))
}

fn parse_f64(t: &str) -> Result<f64> {
    if t == "-inf" {
        return Ok(f64::NEG_INFINITY);
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse(format!("bad number `{t}`"))),
    }
}

/// `Lu(x) ≈ Σ w_k u(x + o_k h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub terms: Vec<(Vec<isize>, f64)>,
    /// Nonnegative off-centre weights (discrete maximum principle holds).
    pub monotone: bool,
}

impl Stencil {
    pub fn apply(&self, u: &GridFunction, idx: usize) -> Option<f64> {
        let mut s = 0.0;
        for (o, w) in &self.terms {
            s += w * u.value(u.offset(idx, o)?);
        }
        Some(s)
    }

    pub fn centre_weight(&self) -> f64 {
        self.terms.iter().filter(|(o, _)| o.iter().all(|&x| x == 0)).map(|(_, w)| w).sum()
    }
}

/// Second-order stencil of `L = tr(a D²) + b·∇ + c` at spacing `h`.
///
/// When `a` is diagonally dominant the mixed derivatives are written as
/// second differences along `e_i ± e_j`, which keeps every off-centre
/// weight nonnegative; first-order terms are central where that keeps the
/// weights nonnegative and upwind otherwise. Without diagonal dominance the
/// standard four-point cross difference is used.
pub fn operator_stencil(op: &JetOperator, h: f64) -> Stencil {
    let n = op.n();
    let a = &op.a;
    let h2 = h * h;
    let mut terms: Vec<(Vec<isize>, f64)> = Vec::new();
    let unit = |i: usize, s: isize| {
        let mut o = vec![0isize; n];
        o[i] = s;
        o
    };
    let dominant = (0..n).all(|i| a.get(i, i) - (0..n).filter(|&j| j != i).map(|j| a.get(i, j).abs()).sum::<f64>() >= 0.0);
    let mut centre = op.c;
    let mut monotone = dominant;
    if dominant {
        for i in 0..n {
            let d = a.get(i, i) - (0..n).filter(|&j| j != i).map(|j| a.get(i, j).abs()).sum::<f64>();
            let b = op.b[i];
            let (mut wp, mut wm) = (d / h2, d / h2);
            centre -= 2.0 * d / h2;
            if d / h2 >= b.abs() / (2.0 * h) {
                wp += b / (2.0 * h);
                wm -= b / (2.0 * h);
            } else if b > 0.0 {
                wp += b / h;
                centre -= b / h;
            } else {
                wm -= b / h;
                centre += b / h;
            }
            terms.push((unit(i, 1), wp));
            terms.push((unit(i, -1), wm));
        }
        for i in 0..n {
            for j in i + 1..n {
                let aij = a.get(i, j);
                if aij == 0.0 {
                    continue;
                }
                let s: isize = if aij > 0.0 { 1 } else { -1 };
                let mut o = vec![0isize; n];
                o[i] = 1;
                o[j] = s;
                let neg: Vec<isize> = o.iter().map(|x| -x).collect();
                terms.push((o, aij.abs() / h2));
                terms.push((neg, aij.abs() / h2));
                centre -= 2.0 * aij.abs() / h2;
            }
        }
    } else {
        for i in 0..n {
            let d = a.get(i, i);
            let b = op.b[i];
            terms.push((unit(i, 1), d / h2 + b / (2.0 * h)));
            terms.push((unit(i, -1), d / h2 - b / (2.0 * h)));
            centre -= 2.0 * d / h2;
            if d / h2 < b.abs() / (2.0 * h) {
                monotone = false;
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let w = 2.0 * a.get(i, j) / (4.0 * h2);
                if w == 0.0 {
                    continue;
                }
                for (si, sj, sign) in [(1, 1, 1.0), (-1, -1, 1.0), (1, -1, -1.0), (-1, 1, -1.0)] {
                    let mut o = vec![0isize; n];
                    o[i] = si;
                    o[j] = sj;
                    terms.push((o, sign * w));
                }
            }
        }
    }
    terms.push((vec![0; n], centre));
    if terms.iter().any(|(o, w)| o.iter().any(|&x| x != 0) && *w < 0.0) {
        monotone = false;
    }
    Stencil { terms, monotone }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet_space::SymMatrix;

    #[test]
    fn text_round_trip() {
        let g = GridFunction::sample(vec![5, 6], vec![-1.0, 0.5], 0.25, |x| x[0] * 3.0 - x[1]).unwrap();
        let mut v = g.values().to_vec();
        v[7] = f64::NEG_INFINITY;
        let g = g.with_values(v).unwrap();
        let back = GridFunction::parse(&g.to_text()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn parse_rejects_bad_input() {
        assert!(matches!(GridFunction::parse("dim 1\nshape 5\norigin 0\nvalues 1 2 3 4 5"), Err(Error::Parse(_))));
        assert!(matches!(
            GridFunction::parse("dim 1\nshape 5\norigin 0\nspacing 1\n1 2 3 4"),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(GridFunction::parse("dim 1\nshape 4\norigin 0\nspacing 1\n1 2 3 4").is_err());
        assert!(GridFunction::parse("dim 1\nshape 5\norigin 0\nspacing 1\n1 2 inf 4 5").is_err());
    }

    #[test]
    fn indexing_is_row_major() {
        let g = GridFunction::sample(vec![5, 7], vec![0.0, 0.0], 1.0, |x| x[0] * 10.0 + x[1]).unwrap();
        assert_eq!(g.value(1), 1.0);
        assert_eq!(g.value(7), 10.0);
        let i = g.ravel(&[2, 3]);
        assert_eq!(g.unravel(i), vec![2, 3]);
        assert_eq!(g.offset(i, &[1, -1]), Some(g.ravel(&[3, 2])));
        assert_eq!(g.offset(g.ravel(&[4, 0]), &[1, 0]), None);
        assert_eq!(g.boundary_cells(i), 2);
    }

    #[test]
    fn stencils_exact_on_quadratics() {
        let h = 0.1;
        let u = GridFunction::sample(vec![7, 7], vec![-0.3, -0.3], h, |x| {
            1.0 + 2.0 * x[0] - x[1] + 1.5 * x[0] * x[0] + 0.4 * x[0] * x[1] + 0.7 * x[1] * x[1]
        })
        .unwrap();
        let centre = u.ravel(&[3, 3]);
        for (a, b, c) in [
            (SymMatrix::new(2, vec![1.0, 0.3, 2.0]).unwrap(), vec![0.5, -0.2], -1.0),
            (SymMatrix::new(2, vec![1.0, -0.9, 1.0]).unwrap(), vec![0.0, 0.0], 0.0),
            (SymMatrix::new(2, vec![1.0, 1.5, 3.0]).unwrap(), vec![1.0, 1.0], 0.0),
        ] {
            let op = JetOperator::new(c, b.clone(), a.clone()).unwrap();
            let s = operator_stencil(&op, h);
            // Hessian [[3, .4], [.4, 1.4]], gradient at 0 = (2, -1), value 1
            let exact = a.get(0, 0) * 3.0 + 2.0 * a.get(0, 1) * 0.4 + a.get(1, 1) * 1.4 + b[0] * 2.0 - b[1] + c;
            assert!((s.apply(&u, centre).unwrap() - exact).abs() < 1e-9);
        }
        let dd = operator_stencil(&JetOperator::new(0.0, vec![0.0, 0.0], SymMatrix::new(2, vec![1.0, -0.9, 1.0]).unwrap()).unwrap(), h);
        assert!(dd.monotone);
        let nd = operator_stencil(&JetOperator::new(0.0, vec![0.0, 0.0], SymMatrix::new(2, vec![1.0, 1.5, 3.0]).unwrap()).unwrap(), h);
        assert!(!nd.monotone);
        // large drift switches to upwind and stays monotone
        let up = operator_stencil(&JetOperator::new(0.0, vec![100.0, 0.0], SymMatrix::identity(2)).unwrap(), h);
        assert!(up.monotone);
    }
}
