//! Independent numerical oracles used only by unit tests. These deliberately
//! avoid the library's own linear-algebra paths so agreement is evidence,
//! not tautology.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Eigenvalues of a Hermitian matrix by cyclic complex Jacobi sweeps,
/// sorted descending.
pub(crate) fn jacobi_eigenvalues(a: &DMatrix<Complex64>) -> Vec<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() < 1e-13 * m.norm() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let r = apq.norm();
                if r < 1e-300 {
                    continue;
                }
                // Phase u makes the pivot real; a real rotation then
                // annihilates it.
                let u = apq / r;
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let cth = 1.0 / (1.0 + t * t).sqrt();
                let sth = t * cth;
                let su = sth * u;
                for i in 0..n {
                    let mip = m[(i, p)];
                    let miq = m[(i, q)];
                    m[(i, p)] = cth * mip - su.conj() * miq;
                    m[(i, q)] = su * mip + cth * miq;
                }
                for j in 0..n {
                    let mpj = m[(p, j)];
                    let mqj = m[(q, j)];
                    m[(p, j)] = cth * mpj - su * mqj;
                    m[(q, j)] = su.conj() * mpj + cth * mqj;
                }
            }
        }
    }
    let mut vals: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    vals
}
