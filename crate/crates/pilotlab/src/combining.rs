//! Receive combining and instantaneous SINR evaluation.
//!
//! Three schemes: maximum ratio (use the estimate as-is), single-cell MMSE
//! (suppress only own-cell estimated channels, treat other cells as
//! covariance-level noise), and multicell MMSE (suppress every estimated
//! channel). None of them normalizes the weights; the SINR is invariant to
//! combiner scale, so the raw solve output is reported.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermitianize, hpd_cholesky};

/// Combining scheme identifier used in outputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Scheme {
    #[serde(rename = "MRC")]
    Mrc,
    #[serde(rename = "S-MMSE")]
    SMmse,
    #[serde(rename = "M-MMSE")]
    MMmse,
}

impl Scheme {
    /// Display form used in result files.
    pub fn label(&self) -> &'static str {
        match self {
            Scheme::Mrc => "MRC",
            Scheme::SMmse => "S-MMSE",
            Scheme::MMmse => "M-MMSE",
        }
    }

    pub const ALL: [Scheme; 3] = [Scheme::MMmse, Scheme::SMmse, Scheme::Mrc];
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Scheme> {
        match s.to_ascii_uppercase().replace('_', "-").as_str() {
            "MRC" => Ok(Scheme::Mrc),
            "S-MMSE" | "SMMSE" => Ok(Scheme::SMmse),
            "M-MMSE" | "MMMSE" => Ok(Scheme::MMmse),
            other => Err(Error::InvalidParameter(format!("unknown combining scheme '{other}'"))),
        }
    }
}

/// Combining weights for one target user.
#[derive(Clone, Debug)]
pub struct CombinerWeights {
    pub scheme: Scheme,
    /// Index of the target estimate within the group passed to the builder.
    pub target: usize,
    pub vector: DVector<Complex64>,
}

impl CombinerWeights {
    /// True when the solve degenerated to the zero vector (zero target
    /// estimate). Monte Carlo callers score such trials as SINR zero.
    pub fn is_degenerate(&self) -> bool {
        self.vector.iter().all(|z| *z == Complex64::ZERO)
    }
}

/// Deterministic part of the interference seen by a combiner: estimation
/// error covariances (plus, for S-MMSE, whole other-cell covariances) and
/// the noise diagonal. Always positive definite because of the (1/ρ)I term.
#[derive(Clone, Debug)]
pub struct InterferenceCore {
    z: DMatrix<Complex64>,
    chol: Cholesky<Complex64, Dyn>,
    rho: f64,
}

impl InterferenceCore {
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.z
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn dim(&self) -> usize {
        self.z.nrows()
    }

    /// Z⁻¹·y by triangular solves.
    pub fn solve(&self, y: &DVector<Complex64>) -> DVector<Complex64> {
        self.chol.solve(y)
    }

    /// Z⁻¹·B by triangular solves, column by column.
    pub fn solve_matrix(&self, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        self.chol.solve(b)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "data SNR rho must be positive and finite, got {rho}"
        )));
    }
    Ok(())
}

fn finish_core(mut z: DMatrix<Complex64>, rho: f64, context: &str) -> Result<InterferenceCore> {
    let m = z.nrows();
    let inv_rho = Complex64::new(1.0 / rho, 0.0);
    for i in 0..m {
        z[(i, i)] += inv_rho;
    }
    hermitianize(&mut z);
    let chol = hpd_cholesky(z.clone(), context)?;
    Ok(InterferenceCore { z, chol, rho })
}

fn accumulate(acc: &mut DMatrix<Complex64>, term: &DMatrix<Complex64>) -> Result<()> {
    if term.nrows() != acc.nrows() || term.ncols() != acc.ncols() {
        return Err(Error::DimensionMismatch { expected: acc.nrows(), got: term.nrows().max(term.ncols()) });
    }
    *acc += term;
    Ok(())
}

/// Core for MRC and multicell MMSE: Z = Σ (R_i − Φ_i) + (1/ρ)·I over every
/// user whose channel the BS estimates. Pass the error covariances R − Φ.
pub fn interference_core(err_covs: &[&DMatrix<Complex64>], rho: f64) -> Result<InterferenceCore> {
    check_rho(rho)?;
    let m = match err_covs.first() {
        Some(e) => e.nrows(),
        None => return Err(Error::InvalidParameter("interference core needs at least one user".into())),
    };
    let mut z = DMatrix::from_element(m, m, Complex64::ZERO);
    for e in err_covs {
        accumulate(&mut z, e)?;
    }
    finish_core(z, rho, "interference core")
}

/// Core for single-cell MMSE: own-cell users contribute their estimation
/// error covariance, other-cell users their whole covariance (their
/// estimates are never computed), plus the noise diagonal.
pub fn smmse_core(
    own_err_covs: &[&DMatrix<Complex64>],
    other_covs: &[&DMatrix<Complex64>],
    rho: f64,
) -> Result<InterferenceCore> {
    check_rho(rho)?;
    let m = match own_err_covs.first().or_else(|| other_covs.first()) {
        Some(e) => e.nrows(),
        None => return Err(Error::InvalidParameter("interference core needs at least one user".into())),
    };
    let mut z = DMatrix::from_element(m, m, Complex64::ZERO);
    for e in own_err_covs {
        accumulate(&mut z, e)?;
    }
    for r in other_covs {
        accumulate(&mut z, r)?;
    }
    finish_core(z, rho, "single-cell interference core")
}

/// Solves A·x = b from a Cholesky factor of A, running one iterative
/// refinement pass when the relative residual exceeds 1e−8.
fn solve_refined(
    a: &DMatrix<Complex64>,
    chol: &Cholesky<Complex64, Dyn>,
    b: &DVector<Complex64>,
) -> DVector<Complex64> {
    let mut x = chol.solve(b);
    let b_norm = b.norm();
    if b_norm > 0.0 {
        let residual = b - a * &x;
        if residual.norm() > 1e-8 * b_norm {
            x += chol.solve(&residual);
        }
    }
    x
}

/// Maximum ratio combining: the estimate itself.
pub fn mrc_combiner(h_hat_target: &DVector<Complex64>, target: usize) -> CombinerWeights {
    CombinerWeights { scheme: Scheme::Mrc, target, vector: h_hat_target.clone() }
}

/// MMSE combining over a set of estimated channels:
/// v = (Σ ĥ_iĥ_iᴴ + Z)⁻¹ ĥ_target. With every estimated channel in the
/// sum this is the multicell scheme; it maximizes the instantaneous SINR.
pub fn mmse_combiner(
    est_group: &[&DVector<Complex64>],
    core: &InterferenceCore,
    target: usize,
) -> Result<CombinerWeights> {
    let weights = solve_gram_plus_core(est_group, core, target, Scheme::MMmse)?;
    Ok(weights)
}

/// Single-cell MMSE combining: identical solve shape, but only own-cell
/// estimates appear in the outer-product sum (the core must be the matching
/// single-cell variant). Coincides with multicell MMSE when there is a
/// single isolated cell.
pub fn smmse_combiner(
    own_cell_ests: &[&DVector<Complex64>],
    core: &InterferenceCore,
    target: usize,
) -> Result<CombinerWeights> {
    let weights = solve_gram_plus_core(own_cell_ests, core, target, Scheme::SMmse)?;
    Ok(weights)
}

fn solve_gram_plus_core(
    ests: &[&DVector<Complex64>],
    core: &InterferenceCore,
    target: usize,
    scheme: Scheme,
) -> Result<CombinerWeights> {
    let m = core.dim();
    if target >= ests.len() {
        return Err(Error::InvalidParameter(format!(
            "target index {target} out of range for {} estimates",
            ests.len()
        )));
    }
    let mut a = core.z.clone();
    for h in ests {
        if h.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: h.len() });
        }
        // Rank-1 Hermitian update; outer products are exactly Hermitian.
        a.gerc(Complex64::ONE, h, h, Complex64::ONE);
    }
    let chol = hpd_cholesky(a.clone(), "combiner system matrix")?;
    let vector = solve_refined(&a, &chol, ests[target]);
    Ok(CombinerWeights { scheme, target, vector })
}

/// Instantaneous SINR of a combiner against a set of estimated channels:
/// γ = |vᴴĥ_t|² / (Σ_{i≠t} |vᴴĥ_i|² + vᴴZv). The denominator is the
/// conditional interference-plus-noise power given the estimates.
pub fn instantaneous_sinr(
    v: &DVector<Complex64>,
    est_group: &[&DVector<Complex64>],
    core: &InterferenceCore,
    target: usize,
) -> Result<f64> {
    if v.iter().all(|z| *z == Complex64::ZERO) {
        return Err(Error::DegenerateCombiner("zero combining vector has no SINR".into()));
    }
    if target >= est_group.len() {
        return Err(Error::InvalidParameter(format!(
            "target index {target} out of range for {} estimates",
            est_group.len()
        )));
    }
    let mut interference = 0.0f64;
    let mut signal = 0.0f64;
    for (i, h) in est_group.iter().enumerate() {
        let power = v.dotc(h).norm_sqr();
        if i == target {
            signal = power;
        } else {
            interference += power;
        }
    }
    let zv = &core.z * v;
    let quad = v.dotc(&zv).re;
    Ok(signal / (interference + quad))
}

/// The multicell-MMSE SINR for a two-user instance, evaluated two ways:
/// directly as ĥ₁ᴴ(ĥ₂ĥ₂ᴴ + Z)⁻¹ĥ₁, and through the rank-1 inversion
/// identity that only solves against Z. Agreement of the two validates
/// both code paths.
pub fn mmse_sinr_two_forms(
    h1_hat: &DVector<Complex64>,
    h2_hat: &DVector<Complex64>,
    core: &InterferenceCore,
) -> Result<(f64, f64)> {
    let m = core.dim();
    if h1_hat.len() != m || h2_hat.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: h1_hat.len().max(h2_hat.len()) });
    }

    // Direct: factor Z + h2 h2^H and take the quadratic form.
    let mut b = core.z.clone();
    b.gerc(Complex64::ONE, h2_hat, h2_hat, Complex64::ONE);
    let chol = hpd_cholesky(b.clone(), "rank-one updated core")?;
    let direct = h1_hat.dotc(&solve_refined(&b, &chol, h1_hat)).re;

    // Rank-1 identity on 1/M-scaled quadratic forms.
    let mf = m as f64;
    let z1 = core.solve(h1_hat);
    let z2 = core.solve(h2_hat);
    let q11 = h1_hat.dotc(&z1).re / mf;
    let q22 = h2_hat.dotc(&z2).re / mf;
    let q12 = h1_hat.dotc(&z2) / mf;
    let rank1 = mf * (q11 - q12.norm_sqr() / (1.0 / mf + q22));

    Ok((direct, rank1))
}
