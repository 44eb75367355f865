//! Cyclic Jacobi eigendecomposition of real symmetric matrices.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Largest asymmetry tolerated on input, and the magnitude below which a
/// negative eigenvalue is treated as rounding noise and clamped to zero
/// (both relative to the largest entry).
pub const EPS_SYM: f64 = 1e-10;

/// Sweeps stop once the off-diagonal Frobenius norm falls below this
/// fraction of the full Frobenius norm.
pub const OFF_DIAGONAL_TOL: f64 = 1e-12;

pub const MAX_SWEEPS: usize = 100;

/// Eigenvalues in descending order with matching orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSpectrum {
    eigenvalues: Vec<f64>,
    eigenvectors: Matrix,
    total_variance: f64,
}

impl EigenSpectrum {
    /// Descending eigenvalues.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Column `k` pairs with `eigenvalues()[k]`.
    pub fn eigenvectors(&self) -> &Matrix {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        self.eigenvectors.column(k)
    }

    /// Sum of the eigenvalues.
    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn mean_eigenvalue(&self) -> f64 {
        self.total_variance / self.eigenvalues.len() as f64
    }
}

/// Decompose a symmetric matrix as `V Λ Vᵀ`.
///
/// Eigenvalues come back in descending order; equal eigenvalues keep the
/// order of the Jacobi diagonal. Each eigenvector is signed so that its
/// entry of largest magnitude is positive.
pub fn symmetric_eigen(a: &Matrix) -> Result<EigenSpectrum> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::DimensionMismatch(a.rows(), a.cols()));
    }
    let scale = a.as_slice().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (a[(i, j)] - a[(j, i)]).abs();
            if gap > EPS_SYM * scale.max(1.0) {
                return Err(Error::NotSymmetric { i, j, gap });
            }
        }
    }

    let mut m = a.clone();
    // symmetrize away sub-tolerance asymmetry
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let mut v = Matrix::identity(n);
    let norm = m.frobenius_norm();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&m) <= OFF_DIAGONAL_TOL * norm {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
    }
    if !converged && off_diagonal_norm(&m) > OFF_DIAGONAL_TOL * norm {
        return Err(Error::ConvergenceFailure { what: "Jacobi eigensolver", iterations: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable: ties keep diagonal order
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));

    let clamp = EPS_SYM * scale;
    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = Matrix::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        let mut lambda = m[(src, src)];
        if lambda < 0.0 && lambda > -clamp {
            lambda = 0.0;
        }
        eigenvalues.push(lambda);
        let mut col: Vec<f64> = (0..n).map(|i| v[(i, src)]).collect();
        let mut pivot = 0;
        for i in 1..n {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            col.iter_mut().for_each(|x| *x = -*x);
        }
        for (i, x) in col.into_iter().enumerate() {
            eigenvectors[(i, k)] = x;
        }
    }
    let total_variance = eigenvalues.iter().sum();
    Ok(EigenSpectrum { eigenvalues, eigenvectors, total_variance })
}

fn off_diagonal_norm(m: &Matrix) -> f64 {
    let n = m.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Zero `m[p][q]` with a Givens rotation, accumulating it into `v`.
fn rotate(m: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = m[(p, q)];
    if apq == 0.0 {
        return;
    }
    let app = m[(p, p)];
    let aqq = m[(q, q)];
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let tau = s / (1.0 + c);
    let n = m.rows();

    m[(p, p)] = app - t * apq;
    m[(q, q)] = aqq + t * apq;
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let arp = m[(r, p)];
        let arq = m[(r, q)];
        let new_rp = arp - s * (arq + tau * arp);
        let new_rq = arq + s * (arp - tau * arq);
        m[(r, p)] = new_rp;
        m[(p, r)] = new_rp;
        m[(r, q)] = new_rq;
        m[(q, r)] = new_rq;
    }
    for r in 0..n {
        let vrp = v[(r, p)];
        let vrq = v[(r, q)];
        v[(r, p)] = vrp - s * (vrq + tau * vrp);
        v[(r, q)] = vrq + s * (vrp - tau * vrq);
    }
}
