//! Determinant, inverse, Householder QR and one-sided Jacobi SVD.

use super::{ComplexMatrix, ComplexVector, C64, ONE, ZERO};
use crate::error::{Error, Result};

/// Relative pivot threshold below which a matrix is treated as singular.
const SINGULAR_RTOL: f64 = 1e-13;
/// Sweep cap for the Jacobi SVD.
const MAX_SWEEPS: usize = 64;

impl ComplexMatrix {
    /// Determinant. Closed form up to 3x3, LU with partial pivoting above.
    pub fn det(&self) -> Result<C64> {
        self.require_square("det")?;
        let a = |i, j| self[(i, j)];
        Ok(match self.rows() {
            1 => a(0, 0),
            2 => a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0),
            3 => {
                a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1))
                    - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
                    + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0))
            }
            _ => lu_det(self),
        })
    }

    /// Inverse. Adjugate formula up to 3x3, Gauss-Jordan with partial
    /// pivoting above. Fails with [`Error::Singular`] when a pivot (or the
    /// determinant, for the closed forms) is negligible against `‖A‖_F`.
    pub fn inverse(&self) -> Result<ComplexMatrix> {
        self.require_square("inverse")?;
        let n = self.rows();
        let scale = self.fro_norm();
        if scale == 0.0 {
            return Err(Error::Singular { pivot: 0.0 });
        }
        if n <= 3 {
            let det = self.det()?;
            if det.norm() <= SINGULAR_RTOL * scale.powi(n as i32) {
                return Err(Error::Singular { pivot: det.norm() });
            }
            let adj = adjugate(self);
            return Ok(adj.scale(ONE / det));
        }
        gauss_jordan_inverse(self, scale)
    }
}

fn adjugate(m: &ComplexMatrix) -> ComplexMatrix {
    let a = |i, j| m[(i, j)];
    match m.rows() {
        1 => ComplexMatrix::identity(1),
        2 => ComplexMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => a(1, 1),
            (0, 1) => -a(0, 1),
            (1, 0) => -a(1, 0),
            _ => a(0, 0),
        }),
        3 => {
            // adj(A)_ij = cofactor_ji
            ComplexMatrix::from_fn(3, 3, |i, j| {
                let (r0, r1) = others(j);
                let (c0, c1) = others(i);
                let minor = a(r0, c0) * a(r1, c1) - a(r0, c1) * a(r1, c0);
                if (i + j) % 2 == 0 {
                    minor
                } else {
                    -minor
                }
            })
        }
        _ => unreachable!("adjugate used only for n <= 3"),
    }
}

fn others(k: usize) -> (usize, usize) {
    match k {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

fn lu_det(m: &ComplexMatrix) -> C64 {
    let n = m.rows();
    let mut a: Vec<C64> = m.as_slice().to_vec();
    let mut det = ONE;
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i * n + k].norm().total_cmp(&a[j * n + k].norm()))
            .unwrap();
        if a[p * n + k] == ZERO {
            return ZERO;
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            det = -det;
        }
        let pivot = a[k * n + k];
        det *= pivot;
        for i in k + 1..n {
            let f = a[i * n + k] / pivot;
            for j in k..n {
                let t = a[k * n + j];
                a[i * n + j] -= f * t;
            }
        }
    }
    det
}

fn gauss_jordan_inverse(m: &ComplexMatrix, scale: f64) -> Result<ComplexMatrix> {
    let n = m.rows();
    let mut a: Vec<C64> = m.as_slice().to_vec();
    let mut inv: Vec<C64> = ComplexMatrix::identity(n).as_slice().to_vec();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i * n + k].norm().total_cmp(&a[j * n + k].norm()))
            .unwrap();
        let pivot_mag = a[p * n + k].norm();
        if pivot_mag < SINGULAR_RTOL * scale {
            return Err(Error::Singular { pivot: pivot_mag });
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
                inv.swap(k * n + j, p * n + j);
            }
        }
        let r = ONE / a[k * n + k];
        for j in 0..n {
            a[k * n + j] *= r;
            inv[k * n + j] *= r;
        }
        for i in 0..n {
            if i == k {
                continue;
            }
            let f = a[i * n + k];
            if f == ZERO {
                continue;
            }
            for j in 0..n {
                let (ak, ik) = (a[k * n + j], inv[k * n + j]);
                a[i * n + j] -= f * ak;
                inv[i * n + j] -= f * ik;
            }
        }
    }
    ComplexMatrix::new(n, n, inv)
}

/// Result of a QR factorization `A = Q R`.
#[derive(Clone, Debug)]
pub struct QrResult {
    pub q: ComplexMatrix,
    pub r: ComplexMatrix,
}

/// Householder QR of an `m x n` matrix with `m >= n`. `Q` is `m x m`
/// unitary, `R` is `m x n` upper triangular with complex diagonal.
pub fn qr(a: &ComplexMatrix) -> Result<QrResult> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::invalid("qr", format!("needs rows >= cols, got {m}x{n}")));
    }
    let mut r = a.clone();
    let mut q = ComplexMatrix::identity(m);
    for k in 0..n.min(m - 1) {
        let norm_x = (k..m).map(|i| r[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm_x == 0.0 {
            continue;
        }
        let x0 = r[(k, k)];
        let phase = if x0.norm() == 0.0 { ONE } else { x0 / x0.norm() };
        let alpha = -phase * norm_x;
        let mut v: Vec<C64> = (k..m).map(|i| r[(i, k)]).collect();
        v[0] -= alpha;
        let v_norm2: f64 = v.iter().map(C64::norm_sqr).sum();
        if v_norm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / v_norm2;
        // R <- (I - beta v v†) R
        for j in 0..n {
            let s: C64 = v
                .iter()
                .enumerate()
                .map(|(t, vt)| vt.conj() * r[(k + t, j)])
                .sum();
            for (t, vt) in v.iter().enumerate() {
                r[(k + t, j)] -= beta * vt * s;
            }
        }
        // Q <- Q (I - beta v v†)
        for i in 0..m {
            let s: C64 = v
                .iter()
                .enumerate()
                .map(|(t, vt)| q[(i, k + t)] * vt)
                .sum();
            for (t, vt) in v.iter().enumerate() {
                q[(i, k + t)] -= beta * s * vt.conj();
            }
        }
        for i in k + 1..m {
            r[(i, k)] = ZERO;
        }
    }
    Ok(QrResult { q, r })
}

/// Singular value decomposition `A = U diag(σ) V†` of a square matrix.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub u: ComplexMatrix,
    /// Nonnegative, sorted in descending order.
    pub singular_values: Vec<f64>,
    pub v: ComplexMatrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let sigma: Vec<C64> = self
            .singular_values
            .iter()
            .map(|&s| C64::new(s, 0.0))
            .collect();
        &(&self.u * &ComplexMatrix::from_diag(&sigma)) * &self.v.dagger()
    }
}

/// One-sided (Hestenes) Jacobi SVD.
///
/// Column pairs of a working copy `W = A V` are rotated until every pair is
/// orthogonal relative to its norms, `|w_p† w_q| <= tol ‖w_p‖ ‖w_q‖`. At
/// that point `σ_j = ‖w_j‖` and `u_j = w_j / σ_j`. Exactly-zero columns get
/// an orthonormal completion so `U` is always unitary.
pub fn svd(a: &ComplexMatrix) -> Result<SvdResult> {
    a.require_square("svd")?;
    let n = a.rows();
    let mut w = a.clone();
    let mut v = ComplexMatrix::identity(n);
    let tol = 4.0 * n as f64 * f64::EPSILON;

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = ZERO;
                for i in 0..n {
                    let (wp, wq) = (w[(i, p)], w[(i, q)]);
                    alpha += wp.norm_sqr();
                    beta += wq.norm_sqr();
                    gamma += wp.conj() * wq;
                }
                let g = gamma.norm();
                if g == 0.0 || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s, phase);
                rotate(&mut v, p, q, c, s, phase);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let mut u = ComplexMatrix::zeros(n, n);
    let mut v_sorted = ComplexMatrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    let mut filled = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        let sigma = norms[j];
        v_sorted.set_column(k, &v.column(j));
        if sigma > f64::MIN_POSITIVE {
            u.set_column(k, &w.column(j).scale(C64::new(1.0 / sigma, 0.0)));
            filled.push(k);
            singular_values.push(sigma);
        } else {
            singular_values.push(0.0);
        }
    }
    if filled.len() < n {
        complete_basis(&mut u, &mut filled);
    }
    Ok(SvdResult {
        u,
        singular_values,
        v: v_sorted,
    })
}

/// Right-multiplies columns `p`, `q` of `m` by the 2x2 unitary
/// `[[c, s e^{iφ}], [-s e^{-iφ}, c]]`.
fn rotate(m: &mut ComplexMatrix, p: usize, q: usize, c: f64, s: f64, phase: C64) {
    for i in 0..m.rows() {
        let (xp, xq) = (m[(i, p)], m[(i, q)]);
        m[(i, p)] = xp * c - phase.conj() * xq * s;
        m[(i, q)] = phase * xp * s + xq * c;
    }
}

/// Fills the columns of `u` missing from `filled` with unit vectors
/// orthogonal to the existing ones (Gram-Schmidt on the standard basis,
/// applied twice).
fn complete_basis(u: &mut ComplexMatrix, filled: &mut Vec<usize>) {
    let n = u.rows();
    let missing: Vec<usize> = (0..n).filter(|k| !filled.contains(k)).collect();
    let mut candidates = 0..n;
    for k in missing {
        loop {
            let e = candidates.next().expect("standard basis spans the space");
            let mut x = ComplexVector::zeros(n);
            x[e] = ONE;
            for _ in 0..2 {
                for &j in filled.iter() {
                    let col = u.column(j);
                    let proj = col.inner(&x);
                    for i in 0..n {
                        x[i] -= proj * col[i];
                    }
                }
            }
            let norm = x.norm();
            if norm > 0.5 {
                u.set_column(k, &x.scale(C64::new(1.0 / norm, 0.0)));
                filled.push(k);
                break;
            }
        }
    }
}
