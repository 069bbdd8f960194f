//! Dense complex linear algebra for the small matrices (2 <= n <= 8) that
//! describe a unitary MIMO channel and its estimates.
//!
//! Storage is row-major `Vec<Complex64>`. Everything here is pure; random
//! sampling takes the caller's stream explicitly.

mod decomp;
mod random;

pub use decomp::{qr, svd, QrResult, SvdResult};
pub use random::{cgauss, haar_unitary, sample_cgauss_matrix, sample_cgauss_vector};

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, rejecting empty shapes and
    /// non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("shape", format!("{rows}x{cols} is empty")));
        }
        if data.len() != rows * cols {
            return Err(Error::invalid(
                "data",
                format!("expected {} entries, got {}", rows * cols, data.len()),
            ));
        }
        if let Some(k) = data.iter().position(|z| !z.is_finite()) {
            return Err(Error::NonFinite {
                row: k / cols,
                col: k % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::invalid("rows", "ragged row lengths"));
        }
        Self::new(r, c, rows.concat())
    }

    /// Real-valued convenience constructor, mostly for tests and examples.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix shape {rows}x{cols}");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| ZERO)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { diag[i] } else { ZERO })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.is_finite())
    }

    pub fn column(&self, j: usize) -> ComplexVector {
        ComplexVector {
            data: (0..self.rows).map(|i| self[(i, j)]).collect(),
        }
    }

    pub fn set_column(&mut self, j: usize, v: &ComplexVector) {
        assert_eq!(v.dim(), self.rows, "column length mismatch");
        for i in 0..self.rows {
            self[(i, j)] = v[i];
        }
    }

    /// Matrix product, checking inner dimensions.
    pub fn matmul(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                op: "matmul",
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        Ok(self.mul_unchecked(rhs))
    }

    fn mul_unchecked(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = vec![ZERO; self.rows * rhs.cols];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let dst = &mut out[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in row.iter().enumerate() {
                let src = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        ComplexMatrix {
            rows: self.rows,
            cols: rhs.cols,
            data: out,
        }
    }

    /// `self * rhs†` without forming the adjoint.
    pub fn mul_adjoint(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != rhs.cols {
            return Err(Error::DimensionMismatch {
                op: "mul_adjoint",
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        Ok(ComplexMatrix::from_fn(self.rows, rhs.rows, |i, j| {
            let a = &self.data[i * self.cols..(i + 1) * self.cols];
            let b = &rhs.data[j * rhs.cols..(j + 1) * rhs.cols];
            a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
        }))
    }

    /// `self† * rhs` without forming the adjoint.
    pub fn adjoint_mul(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.rows != rhs.rows {
            return Err(Error::DimensionMismatch {
                op: "adjoint_mul",
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        Ok(ComplexMatrix::from_fn(self.cols, rhs.cols, |i, j| {
            (0..self.rows)
                .map(|k| self[(k, i)].conj() * rhs[(k, j)])
                .sum()
        }))
    }

    pub fn apply(&self, v: &ComplexVector) -> Result<ComplexVector> {
        if self.cols != v.dim() {
            return Err(Error::DimensionMismatch {
                op: "apply",
                left: self.shape(),
                right: (v.dim(), 1),
            });
        }
        Ok(ComplexVector {
            data: (0..self.rows)
                .map(|i| {
                    self.data[i * self.cols..(i + 1) * self.cols]
                        .iter()
                        .zip(&v.data)
                        .map(|(a, b)| a * b)
                        .sum()
                })
                .collect(),
        })
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn trace(&self) -> Result<C64> {
        self.require_square("trace")?;
        Ok((0..self.rows).map(|i| self[(i, i)]).sum())
    }

    pub fn fro_norm_sqr(&self) -> f64 {
        self.data.iter().map(C64::norm_sqr).sum()
    }

    pub fn fro_norm(&self) -> f64 {
        self.fro_norm_sqr().sqrt()
    }

    pub fn scale(&self, s: C64) -> ComplexMatrix {
        self.map(|z| z * s)
    }

    pub fn scale_real(&self, s: f64) -> ComplexMatrix {
        self.map(|z| z * s)
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn checked_add(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.zip_with(rhs, "add", |a, b| a + b)
    }

    pub fn checked_sub(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.zip_with(rhs, "sub", |a, b| a - b)
    }

    fn zip_with(
        &self,
        rhs: &ComplexMatrix,
        op: &'static str,
        f: impl Fn(C64, C64) -> C64,
    ) -> Result<ComplexMatrix> {
        if self.shape() != rhs.shape() {
            return Err(Error::DimensionMismatch {
                op,
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        Ok(ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// `‖A A† − I‖_F`; zero exactly for a unitary matrix.
    pub fn unitarity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let g = self.mul_unchecked(&self.dagger());
        (&g - &ComplexMatrix::identity(self.rows)).fro_norm()
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    /// `‖A − A†‖_F`.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (self - &self.dagger()).fro_norm()
    }

    /// Hermitian positive semidefinite test, via a Cholesky factorization
    /// that tolerates zero pivots. `tol` is relative to `‖A‖_F`.
    pub fn is_hermitian_psd(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.fro_norm().max(f64::MIN_POSITIVE);
        if self.hermitian_defect() > tol * scale {
            return false;
        }
        let n = self.rows;
        let eps = tol * scale;
        let mut l = ComplexMatrix::zeros(n, n);
        for k in 0..n {
            let d = self[(k, k)].re - (0..k).map(|j| l[(k, j)].norm_sqr()).sum::<f64>();
            if d < -eps {
                return false;
            }
            if d <= eps {
                // Zero pivot: the rest of the column must vanish too.
                for i in k + 1..n {
                    let r = self[(i, k)] - (0..k).map(|j| l[(i, j)] * l[(k, j)].conj()).sum::<C64>();
                    if r.norm() > eps.sqrt() * scale.sqrt() {
                        return false;
                    }
                }
                continue;
            }
            let lkk = d.sqrt();
            l[(k, k)] = C64::new(lkk, 0.0);
            for i in k + 1..n {
                let r = self[(i, k)] - (0..k).map(|j| l[(i, j)] * l[(k, j)].conj()).sum::<C64>();
                l[(i, k)] = r / lkk;
            }
        }
        true
    }

    pub(crate) fn require_square(&self, op: &'static str) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::NotSquare {
                op,
                rows: self.rows,
                cols: self.cols,
            })
        }
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

// Operator forms panic on shape mismatch; use the `checked_*`/`matmul`
// methods where shapes come from user input.
impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.checked_add(rhs).expect("matrix add")
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.checked_sub(rhs).expect("matrix sub")
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("matrix product")
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn neg(self) -> ComplexMatrix {
        self.map(|z| -z)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Dense complex column vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVector {
    data: Vec<C64>,
}

impl ComplexVector {
    pub fn new(data: Vec<C64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid("dim", "vector must have at least one entry"));
        }
        if let Some(k) = data.iter().position(|z| !z.is_finite()) {
            return Err(Error::NonFinite { row: k, col: 0 });
        }
        Ok(Self { data })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0);
        Self {
            data: vec![ZERO; dim],
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(C64::norm_sqr).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `self† other`.
    pub fn inner(&self, other: &ComplexVector) -> C64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scale(&self, s: C64) -> ComplexVector {
        ComplexVector {
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }
}

impl Index<usize> for ComplexVector {
    type Output = C64;

    #[inline]
    fn index(&self, i: usize) -> &C64 {
        &self.data[i]
    }
}

impl IndexMut<usize> for ComplexVector {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.data[i]
    }
}
