use rand::Rng;
use rand_distr::StandardNormal;

use super::{qr, ComplexMatrix, ComplexVector, C64};
use crate::error::{Error, Result};

/// One circularly symmetric complex Gaussian draw with `E|z|² = variance`.
#[inline]
pub fn cgauss<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// i.i.d. `CN(0, variance)` entries.
pub fn sample_cgauss_vector<R: Rng + ?Sized>(
    n: usize,
    variance_per_entry: f64,
    rng: &mut R,
) -> Result<ComplexVector> {
    check_variance(variance_per_entry)?;
    ComplexVector::new((0..n).map(|_| cgauss(rng, variance_per_entry)).collect())
}

pub fn sample_cgauss_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    variance_per_entry: f64,
    rng: &mut R,
) -> Result<ComplexMatrix> {
    check_variance(variance_per_entry)?;
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("shape", format!("{rows}x{cols} is empty")));
    }
    Ok(ComplexMatrix::from_fn(rows, cols, |_, _| {
        cgauss(rng, variance_per_entry)
    }))
}

fn check_variance(v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("variance", format!("must be positive, got {v}")))
    }
}

/// Haar-distributed `n x n` unitary: QR of a standard complex Ginibre
/// matrix with the phases of `R`'s diagonal moved into `Q`, so that
/// `R` has a positive diagonal and `Q` is uniquely determined.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    assert!(n >= 1, "haar_unitary needs n >= 1");
    loop {
        let g = ComplexMatrix::from_fn(n, n, |_, _| cgauss(rng, 1.0));
        let Ok(f) = qr(&g) else { continue };
        let diag: Vec<f64> = (0..n).map(|k| f.r[(k, k)].norm()).collect();
        // Degenerate draw (probability zero); resample.
        if diag.iter().any(|&d| d < 1e-12) {
            continue;
        }
        let mut q = f.q;
        for k in 0..n {
            let phase = f.r[(k, k)] / diag[k];
            for i in 0..n {
                q[(i, k)] *= phase;
            }
        }
        return q;
    }
}
