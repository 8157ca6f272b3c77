//! Internal helpers for Hermitian matrix work and compensated summation.

use nalgebra::{Cholesky, DMatrix, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest entrywise deviation from Hermitian symmetry.
pub(crate) fn hermitian_residual(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Overwrites `m` with (m + m^H)/2, leaving an exactly Hermitian matrix with
/// real diagonal. Used after matrix products that are Hermitian in exact
/// arithmetic but carry rounding noise.
pub(crate) fn hermitianize(m: &mut DMatrix<Complex64>) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

/// Cholesky factorization of a Hermitian positive definite matrix.
///
/// nalgebra's complex Cholesky takes principal square roots, so a negative
/// pivot turns into a purely imaginary diagonal entry instead of a failure.
/// Genuine positive definiteness leaves every pivot real positive (up to
/// rounding), so the factor's diagonal is inspected after the sweep.
pub(crate) fn hpd_cholesky(
    m: DMatrix<Complex64>,
    context: &str,
) -> Result<Cholesky<Complex64, Dyn>> {
    let fail = || Error::FactorizationFailed(context.to_string());
    let chol = Cholesky::new(m).ok_or_else(fail)?;
    let packed = chol.l_dirty();
    for i in 0..packed.nrows() {
        let d = packed[(i, i)];
        if !(d.re > 0.0 && d.im.abs() <= 1e-8 * d.re) {
            return Err(fail());
        }
    }
    Ok(chol)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub(crate) fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut vals: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

/// Spectral norm of a Hermitian matrix: the largest absolute eigenvalue.
pub(crate) fn spectral_norm_hermitian(m: &DMatrix<Complex64>) -> f64 {
    hermitian_eigenvalues(m)
        .into_iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// tr(AB) for Hermitian A and B. Equals the Frobenius inner product
/// sum_ij A_ij * conj(B_ij), which is real for Hermitian arguments; rounding
/// leaves a negligible imaginary part that is discarded.
pub(crate) fn trace_product_hermitian(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    debug_assert_eq!(a.nrows(), b.nrows());
    let mut acc = CompensatedSum::new();
    for (x, y) in a.iter().zip(b.iter()) {
        acc.add((x * y.conj()).re);
    }
    acc.value()
}

/// tr(AB) for general square complex matrices: sum_{i,k} A_ik B_ki.
pub(crate) fn trace_product_general(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Complex64 {
    debug_assert_eq!(a.nrows(), b.nrows());
    let n = a.nrows();
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for i in 0..n {
        for k in 0..n {
            let v = a[(i, k)] * b[(k, i)];
            re.add(v.re);
            im.add(v.im);
        }
    }
    Complex64::new(re.value(), im.value())
}

/// Neumaier-compensated accumulator. Summing per-trial values in index order
/// through this keeps sweep outputs bit-identical across thread schedules.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}
