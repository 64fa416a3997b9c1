//! Small dense linear algebra: vector helpers, the cyclic Jacobi eigensolver
//! and orthonormal bases.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `a + s * b`
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    if n > 1e-300 {
        Some(scale(a, 1.0 / n))
    } else {
        None
    }
}

pub fn unit(d: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[i] = 1.0;
    e
}

/// Eigen-decomposition of a dense symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

/// Cyclic Jacobi rotations on a row-major `n x n` symmetric matrix. Sweeps
/// continue until the off-diagonal Frobenius norm drops below `tol`
/// (relative to the matrix scale once that exceeds one).
pub fn jacobi_eigen(m: &[f64], n: usize, tol: f64) -> SymEigen {
    assert_eq!(m.len(), n * n);
    let mut a = m.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    let off = |a: &[f64]| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };
    for _sweep in 0..100 {
        if off(&a) < tol * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    SymEigen {
        values: order.iter().map(|&i| a[i * n + i]).collect(),
        vectors: order
            .iter()
            .map(|&i| (0..n).map(|k| v[k * n + i]).collect())
            .collect(),
    }
}

/// Orthonormalizes `vectors` by modified Gram-Schmidt, dropping those whose
/// residual norm falls below `tol`.
pub fn orthonormalize(vectors: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut r = v.clone();
        // two passes for stability
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&r, b);
                r = axpy(&r, -c, b);
            }
        }
        let nr = norm(&r);
        let scale = norm(v).max(1.0);
        if nr > tol * scale {
            basis.push(self::scale(&r, 1.0 / nr));
        }
    }
    basis
}

/// Orthonormal basis of the span of `vectors` in R^d, computed from the
/// eigenvectors of the Gram operator sum v v^T.
pub fn span_basis(vectors: &[Vec<f64>], d: usize, tol: f64) -> Vec<Vec<f64>> {
    let (range, _) = range_and_kernel(vectors, d, tol);
    range
}

/// Splits R^d into the range and kernel of sum v v^T (over normalized v).
pub fn range_and_kernel(vectors: &[Vec<f64>], d: usize, tol: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut g = vec![0.0; d * d];
    for v in vectors {
        let Some(u) = normalized(v) else { continue };
        for i in 0..d {
            for j in 0..d {
                g[i * d + j] += u[i] * u[j];
            }
        }
    }
    let eig = jacobi_eigen(&g, d, 1e-14);
    let mut range = Vec::new();
    let mut kernel = Vec::new();
    for (val, vec) in eig.values.iter().zip(eig.vectors) {
        if *val > tol {
            range.push(vec);
        } else {
            kernel.push(vec);
        }
    }
    (range, kernel)
}

/// Orthonormal basis of the complement of span(basis) in R^d.
pub fn complement(basis: &[Vec<f64>], d: usize) -> Vec<Vec<f64>> {
    let mut all: Vec<Vec<f64>> = basis.to_vec();
    let start = all.len();
    all.extend((0..d).map(|i| unit(d, i)));
    // `basis` is orthonormal, so it survives intact as the leading block
    orthonormalize(&all, 1e-9).into_iter().skip(start).collect()
}

/// Solves the dense system `a x = b` (row-major `n × n`) by Gaussian
/// elimination with partial pivoting; `None` when singular.
pub fn solve(a: &[f64], n: usize, b: &[f64]) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))?;
        if m[piv * n + col].abs() <= 1e-14 * scale {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(piv * n + k, col * n + k);
            }
            x.swap(piv, col);
        }
        for row in col + 1..n {
            let f = m[row * n + col] / m[col * n + col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[row * n + k] -= f * m[col * n + k];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let s: f64 = (col + 1..n).map(|k| m[col * n + k] * x[k]).sum();
        x[col] = (x[col] - s) / m[col * n + col];
    }
    Some(x)
}
