//! Deterministic large-array machinery for the two-user model.
//!
//! The multicell-MMSE SINR scales like M·δ, where δ is built from three
//! normalized traces of estimation statistics against the interference
//! core. δ > 0 that stays bounded away from zero as M grows is the
//! signature of unbounded SINR growth despite pilot contamination; δ = 0
//! (proportional covariances) pins the SINR at a finite ceiling. This
//! module computes δ three ways (coefficient form, direct trace at the
//! minimizing λ, and a covariance-only Frobenius relaxation), evaluates
//! the supporting trace inequalities, and turns a doubling grid of
//! statistics into a growth verdict.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::combining::InterferenceCore;
use crate::covariance::Covariance;
use crate::error::{Error, Result};
use crate::estimation::PilotGram;
use crate::linalg::{spectral_norm_hermitian, trace_product_general};

/// Normalized trace coefficients for one two-user instance at array size M.
///
/// `delta` is `beta11 − beta12²/beta22` whenever `beta22 > 0`, and NaN for
/// the degenerate case of an absent second user (use [`asymptotic_delta`]
/// for a checked accessor).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AsymptoticCoefficients {
    pub beta11: f64,
    pub beta22: f64,
    pub beta12: f64,
    pub delta: f64,
    pub m: usize,
}

/// Takes the real part of a trace, rejecting a non-negligible imaginary
/// residue: traces of Hermitian-product chains are real in exact
/// arithmetic, so a large residue means the solve went numerically wrong.
fn real_trace(value: Complex64, what: &str) -> Result<f64> {
    if value.im.abs() >= 1e-10 * value.re.abs().max(1.0) {
        return Err(Error::Numerical(format!(
            "{what} should be real, got imaginary residue {:.3e}",
            value.im
        )));
    }
    Ok(value.re)
}

/// The three β-coefficients: β₁₁ = tr(Φ₁Z⁻¹)/M, β₂₂ = tr(Φ₂Z⁻¹)/M,
/// β₁₂ = tr(Υ₁₂Z⁻¹)/M, evaluated through linear solves against Q and Z
/// (never explicit inverses). With A_i = Q⁻¹R_i and B_i = Z⁻¹R_i the
/// cyclic identities give tr(Φ₁Z⁻¹) = tr(A₁B₁), tr(Φ₂Z⁻¹) = tr(A₂B₂),
/// tr(Υ₁₂Z⁻¹) = tr(A₂B₁).
pub fn beta_coefficients(
    r1: &DMatrix<Complex64>,
    r2: &DMatrix<Complex64>,
    q: &PilotGram,
    z: &InterferenceCore,
) -> Result<AsymptoticCoefficients> {
    let m = q.dim();
    if r1.nrows() != m || r2.nrows() != m || z.dim() != m {
        return Err(Error::DimensionMismatch { expected: m, got: r1.nrows().max(r2.nrows()).max(z.dim()) });
    }
    let mf = m as f64;
    let a1 = q.solve_matrix(r1);
    let a2 = q.solve_matrix(r2);
    let b1 = z.solve_matrix(r1);
    let b2 = z.solve_matrix(r2);
    let beta11 = real_trace(trace_product_general(&a1, &b1), "tr(Phi1 Z^-1)")? / mf;
    let beta22 = real_trace(trace_product_general(&a2, &b2), "tr(Phi2 Z^-1)")? / mf;
    let beta12 = real_trace(trace_product_general(&a2, &b1), "tr(Ups12 Z^-1)")? / mf;
    let delta = if beta22 > 0.0 { beta11 - beta12 * beta12 / beta22 } else { f64::NAN };
    Ok(AsymptoticCoefficients { beta11, beta22, beta12, delta, m })
}

/// δ = β₁₁ − β₁₂²/β₂₂, the asymptotic SINR slope: the quadratic
/// β₁₁ + λ²β₂₂ − 2λβ₁₂ minimized at λ* = β₁₂/β₂₂.
pub fn asymptotic_delta(coeffs: &AsymptoticCoefficients) -> Result<f64> {
    // NaN lands in the error branch along with nonpositive values.
    if coeffs.beta22 <= 0.0 || coeffs.beta22.is_nan() {
        return Err(Error::DegenerateScenario(
            "beta22 is not positive; the interfering user is absent".into(),
        ));
    }
    Ok(coeffs.beta11 - coeffs.beta12 * coeffs.beta12 / coeffs.beta22)
}

/// The covariance-distinguishability statistic
/// min_λ (1/M)·tr(Q⁻¹(R₁−λR₂)Z⁻¹(R₁−λR₂)), evaluated directly at the
/// closed-form minimizer λ* = β₁₂/β₂₂. Equals δ in exact arithmetic, so
/// the pair gives two independent routes to one number.
pub fn distinguishability_statistic(
    r1: &DMatrix<Complex64>,
    r2: &DMatrix<Complex64>,
    q: &PilotGram,
    z: &InterferenceCore,
) -> Result<f64> {
    let coeffs = beta_coefficients(r1, r2, q, z)?;
    // NaN lands in the error branch along with nonpositive values.
    if coeffs.beta22 <= 0.0 || coeffs.beta22.is_nan() {
        return Err(Error::DegenerateScenario(
            "beta22 is not positive; the interfering user is absent".into(),
        ));
    }
    let lambda = coeffs.beta12 / coeffs.beta22;
    let diff = r1 - r2 * Complex64::new(lambda, 0.0);
    let qd = q.solve_matrix(&diff);
    let zd = z.solve_matrix(&diff);
    let value = real_trace(trace_product_general(&qd, &zd), "distinguishability trace")?;
    Ok(value / coeffs.m as f64)
}

/// Covariance-only sufficient statistic min_λ (1/M)·‖R₁ − λR₂‖_F² with its
/// minimizer. Closed forms: λ* = tr(R₁R₂)/‖R₂‖_F² and
/// value = (‖R₁‖_F²·‖R₂‖_F² − tr(R₁R₂)²) / (M·‖R₂‖_F²).
/// Zero exactly when the covariances are proportional; a strictly positive
/// value that persists as M grows certifies unbounded SINR growth.
/// Diagonal inputs evaluate in O(M), so very large arrays are cheap.
pub fn frobenius_independence_statistic(r1: &Covariance, r2: &Covariance) -> Result<(f64, f64)> {
    if r1.dim() != r2.dim() {
        return Err(Error::DimensionMismatch { expected: r1.dim(), got: r2.dim() });
    }
    let f22 = r2.frobenius_sq();
    if f22 <= 0.0 || f22.is_nan() {
        return Err(Error::DegenerateScenario("reference covariance is zero".into()));
    }
    let f11 = r1.frobenius_sq();
    let cross = r1.trace_product(r2);
    let lambda_star = cross / f22;
    let value = (f11 * f22 - cross * cross) / (r1.dim() as f64 * f22);
    Ok((value, lambda_star))
}

/// Which way the noise terms enter the denominators of the trace
/// lower bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DenominatorConvention {
    /// Denominators (ρᵗʳ + ‖R₁+R₂‖₂)·(ρ + ‖Z − (1/ρ)I‖₂), the SNRs entering directly.
    Direct,
    /// Denominators (1/ρᵗʳ + ‖R₁+R₂‖₂)·(1/ρ + ‖Z − (1/ρ)I‖₂), the form
    /// the two trace-bound applications actually produce.
    Reciprocal,
}

/// Lower bound chain for the distinguishability trace at a fixed λ:
/// lhs = (1/M)·tr(Q⁻¹(R₁−λR₂)Z⁻¹(R₁−λR₂)) and
/// rhs = (1/M)·‖R₁−λR₂‖_F² / (d_Q·d_Z) with the denominators picked by
/// `convention`. The bound lhs ≥ rhs follows from applying the trace
/// inequality tr((I+A)⁻¹B) ≥ tr(B)/(1+‖A‖₂) to Q and to Z in turn.
pub fn distinguishability_lower_bound(
    r1: &DMatrix<Complex64>,
    r2: &DMatrix<Complex64>,
    q: &PilotGram,
    z: &InterferenceCore,
    lambda: f64,
    convention: DenominatorConvention,
) -> Result<(f64, f64)> {
    let m = q.dim();
    if r1.nrows() != m || r2.nrows() != m || z.dim() != m {
        return Err(Error::DimensionMismatch { expected: m, got: r1.nrows().max(r2.nrows()).max(z.dim()) });
    }
    let mf = m as f64;
    let diff = r1 - r2 * Complex64::new(lambda, 0.0);
    let qd = q.solve_matrix(&diff);
    let zd = z.solve_matrix(&diff);
    let lhs = real_trace(trace_product_general(&qd, &zd), "distinguishability trace")? / mf;

    let sum_norm = spectral_norm_hermitian(&(r1 + r2));
    let mut s = z.matrix().clone();
    let inv_rho = Complex64::new(1.0 / z.rho(), 0.0);
    for i in 0..m {
        s[(i, i)] -= inv_rho;
    }
    let s_norm = spectral_norm_hermitian(&s);
    let (dq, dz) = match convention {
        DenominatorConvention::Direct => (q.rho_tr() + sum_norm, z.rho() + s_norm),
        DenominatorConvention::Reciprocal => (1.0 / q.rho_tr() + sum_norm, 1.0 / z.rho() + s_norm),
    };
    let fro_sq = diff.iter().map(|e| e.norm_sqr()).sum::<f64>();
    let rhs = fro_sq / (mf * dq * dz);
    Ok((lhs, rhs))
}

/// SINR ceiling for proportional covariances R₁ = ηR₂: the multicell-MMSE
/// SINR converges to η² instead of growing with M.
pub fn linear_dependence_limit(eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "proportionality factor eta must be positive and finite, got {eta}"
        )));
    }
    Ok(eta * eta)
}

/// Growth classification from a doubling grid of distinguishability
/// statistics (sorted by ascending M).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    /// The statistic stays bounded away from zero: SINR growth without
    /// limit is consistent with the data.
    #[serde(rename = "unbounded-growth-consistent")]
    UnboundedGrowthConsistent,
    /// The statistic vanishes (exactly, or by more than 2× per doubling
    /// across the top three grid points): the SINR saturates.
    #[serde(rename = "contamination-limited")]
    ContaminationLimited,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::UnboundedGrowthConsistent => f.write_str("unbounded-growth-consistent"),
            Verdict::ContaminationLimited => f.write_str("contamination-limited"),
        }
    }
}

/// Applies the finite-sample decay rule to per-M statistics on a doubling
/// grid: vanishing if the top value is below 1e−12, or if the statistic
/// decays by more than 2× per doubling across the top three points.
pub fn growth_verdict(stats_by_ascending_m: &[f64]) -> Result<Verdict> {
    let k = stats_by_ascending_m.len();
    if k < 3 {
        return Err(Error::InvalidParameter(format!(
            "growth verdict needs at least 3 grid points, got {k}"
        )));
    }
    let a = stats_by_ascending_m[k - 3];
    let b = stats_by_ascending_m[k - 2];
    let c = stats_by_ascending_m[k - 1];
    let vanishing = c < 1e-12 || (a > 2.0 * b && b > 2.0 * c);
    Ok(if vanishing { Verdict::ContaminationLimited } else { Verdict::UnboundedGrowthConsistent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combining::interference_core;
    use crate::covariance::{exp_corr_cov, scaled_identity_cov, Model};
    use crate::estimation::{estimate_cov, pilot_gram};
    use crate::rng::{complex_gaussian, scenario_rng};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use nalgebra::DVector;
    use rand::Rng;

    /// Two-user statistics with rho = rho_tr: Q, Z from the library path.
    fn two_user_setup(
        r1: &DMatrix<Complex64>,
        r2: &DMatrix<Complex64>,
        rho: f64,
    ) -> (PilotGram, InterferenceCore) {
        let gram = pilot_gram(&[r1, r2], rho).unwrap();
        let (_, e1) = estimate_cov(r1, &gram);
        let (_, e2) = estimate_cov(r2, &gram);
        let core = interference_core(&[&e1, &e2], rho).unwrap();
        (gram, core)
    }

    /// Two-level diagonal pair: R1 = blkdiag(2I_N, I_{M−N}), R2 = I_M.
    fn block_gain_pair(m: usize, n: usize) -> (Covariance, Covariance) {
        let d = DVector::from_fn(m, |i, _| if i < n { 2.0 } else { 1.0 });
        let r1 = Covariance::from_diagonal(d, Model::Custom).unwrap();
        let r2 = scaled_identity_cov(m, 1.0).unwrap();
        (r1, r2)
    }

    #[test]
    fn identical_identity_covariances_have_equal_betas_and_zero_delta() {
        let m = 4;
        let i = DMatrix::identity(m, m);
        let (gram, core) = two_user_setup(&i, &i, 1.0);
        let coeffs = beta_coefficients(&i, &i, &gram, &core).unwrap();
        assert_abs_diff_eq!(coeffs.beta11, 1.0 / 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(coeffs.beta22, 1.0 / 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(coeffs.beta12, 1.0 / 7.0, epsilon = 1e-12);
        let delta = asymptotic_delta(&coeffs).unwrap();
        assert_abs_diff_eq!(delta, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(coeffs.delta, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn absent_second_user_is_degenerate() {
        let m = 3;
        let r1 = exp_corr_cov(m, 1.0, 0.5, 0.2).unwrap().to_dense();
        let zero = DMatrix::from_element(m, m, Complex64::ZERO);
        let gram = pilot_gram(&[&r1, &zero], 1.0).unwrap();
        let (_, e1) = estimate_cov(&r1, &gram);
        let core = interference_core(&[&e1], 1.0).unwrap();
        let coeffs = beta_coefficients(&r1, &zero, &gram, &core).unwrap();
        assert_eq!(coeffs.beta22, 0.0);
        assert_eq!(coeffs.beta12, 0.0);
        assert!(coeffs.delta.is_nan());
        assert!(matches!(asymptotic_delta(&coeffs), Err(Error::DegenerateScenario(_))));
        assert!(matches!(
            distinguishability_statistic(&r1, &zero, &gram, &core),
            Err(Error::DegenerateScenario(_))
        ));
    }

    #[test]
    fn betas_match_explicit_inverse_oracle() {
        let m = 64;
        let r1 = exp_corr_cov(m, 1.0, 0.5, 0.7).unwrap().to_dense();
        let r2 = exp_corr_cov(m, 1.0, 0.9, -0.3).unwrap().to_dense();
        let (gram, core) = two_user_setup(&r1, &r2, 1.0);
        let coeffs = beta_coefficients(&r1, &r2, &gram, &core).unwrap();

        // Oracle: explicit inverses and direct matrix products.
        let qi = gram.matrix().clone().try_inverse().unwrap();
        let zi = core.matrix().clone().try_inverse().unwrap();
        let phi1 = &r1 * &qi * &r1;
        let phi2 = &r2 * &qi * &r2;
        let ups = &r1 * &qi * &r2;
        let tr = |x: &DMatrix<Complex64>| -> f64 {
            let p = x * &zi;
            (0..m).map(|i| p[(i, i)].re).sum::<f64>()
        };
        assert_relative_eq!(coeffs.beta11, tr(&phi1) / m as f64, epsilon = 1e-10);
        assert_relative_eq!(coeffs.beta22, tr(&phi2) / m as f64, epsilon = 1e-10);
        assert_relative_eq!(coeffs.beta12, tr(&ups) / m as f64, epsilon = 1e-10);
    }

    #[test]
    fn proportional_covariances_zero_delta_and_statistic() {
        let m = 32;
        let base = exp_corr_cov(m, 1.0, 0.6, 0.4).unwrap().to_dense();
        let r1 = &base * Complex64::new(2.0, 0.0);
        let (gram, core) = two_user_setup(&r1, &base, 1.0);
        let coeffs = beta_coefficients(&r1, &base, &gram, &core).unwrap();
        let delta = asymptotic_delta(&coeffs).unwrap();
        assert_abs_diff_eq!(delta, 0.0, epsilon = 1e-10);
        let stat = distinguishability_statistic(&r1, &base, &gram, &core).unwrap();
        assert_abs_diff_eq!(stat, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn block_gain_pair_has_positive_delta_matching_direct_statistic() {
        let m = 64;
        let (r1c, r2c) = block_gain_pair(m, m / 2);
        let r1 = r1c.to_dense();
        let r2 = r2c.to_dense();
        let (gram, core) = two_user_setup(&r1, &r2, 1.0);
        let coeffs = beta_coefficients(&r1, &r2, &gram, &core).unwrap();
        let delta = asymptotic_delta(&coeffs).unwrap();
        assert!(delta > 1e-4, "delta should be positive, got {delta}");
        let stat = distinguishability_statistic(&r1, &r2, &gram, &core).unwrap();
        assert_relative_eq!(stat, delta, epsilon = 1e-10);
    }

    #[test]
    fn orthogonal_supports_make_delta_equal_beta11() {
        let d1 = DMatrix::from_diagonal(&DVector::from_vec(vec![Complex64::ONE, Complex64::ZERO]));
        let d2 = DMatrix::from_diagonal(&DVector::from_vec(vec![Complex64::ZERO, Complex64::ONE]));
        let (gram, core) = two_user_setup(&d1, &d2, 1.0);
        let coeffs = beta_coefficients(&d1, &d2, &gram, &core).unwrap();
        assert_abs_diff_eq!(coeffs.beta12, 0.0, epsilon = 1e-14);
        let delta = asymptotic_delta(&coeffs).unwrap();
        assert_relative_eq!(delta, coeffs.beta11, epsilon = 1e-14);
    }

    #[test]
    fn statistic_equals_delta_on_random_instances() {
        for (i, (ra, rb)) in [(0.3, 0.8), (0.5, 0.9), (0.2, 0.4), (0.7, 0.95), (0.6, 0.1)]
            .iter()
            .enumerate()
        {
            let m = 16;
            let r1 = exp_corr_cov(m, 1.0 + i as f64 * 0.3, *ra, 0.5 - i as f64).unwrap().to_dense();
            let r2 = exp_corr_cov(m, 0.8, *rb, -0.9 + i as f64 * 0.7).unwrap().to_dense();
            let (gram, core) = two_user_setup(&r1, &r2, 1.0 + i as f64 * 0.5);
            let coeffs = beta_coefficients(&r1, &r2, &gram, &core).unwrap();
            let delta = asymptotic_delta(&coeffs).unwrap();
            let stat = distinguishability_statistic(&r1, &r2, &gram, &core).unwrap();
            assert_relative_eq!(stat, delta, epsilon = 1e-10);
            assert!(delta >= -1e-12);
        }
    }

    #[test]
    fn closed_form_minimizer_agrees_with_grid_search_oracle() {
        let m = 16;
        let r1 = exp_corr_cov(m, 1.2, 0.5, 0.3).unwrap().to_dense();
        let r2 = exp_corr_cov(m, 0.9, 0.8, -0.4).unwrap().to_dense();
        let (gram, core) = two_user_setup(&r1, &r2, 1.0);

        // Oracle trace constants from explicit inverses: the statistic as a
        // function of lambda is t11 − 2λ·Re(t12) + λ²·t22.
        let qi = gram.matrix().clone().try_inverse().unwrap();
        let zi = core.matrix().clone().try_inverse().unwrap();
        let tr = |a: &DMatrix<Complex64>, b: &DMatrix<Complex64>| {
            let p = &qi * a * &zi * b;
            (0..m).map(|i| p[(i, i)]).sum::<Complex64>()
        };
        let t11 = tr(&r1, &r1).re;
        let t22 = tr(&r2, &r2).re;
        let t12 = tr(&r1, &r2).re;
        let eval = |lambda: f64| (t11 - 2.0 * lambda * t12 + lambda * lambda * t22) / m as f64;

        let mut best = f64::INFINITY;
        let mut lambda = -10.0;
        while lambda <= 10.0 {
            best = best.min(eval(lambda));
            lambda += 1e-4;
        }
        let stat = distinguishability_statistic(&r1, &r2, &gram, &core).unwrap();
        assert_abs_diff_eq!(stat, best, epsilon = 1e-6);
    }

    #[test]
    fn frobenius_statistic_two_level_closed_form() {
        for (m, n) in [(8usize, 2usize), (64, 32), (1000, 300)] {
            let (r1, r2) = block_gain_pair(m, n);
            let (value, lambda) = frobenius_independence_statistic(&r1, &r2).unwrap();
            let expected = ((m - n) * n) as f64 / (m * m) as f64;
            assert_abs_diff_eq!(value, expected, epsilon = 1e-12);
            assert_abs_diff_eq!(lambda, 1.0 + n as f64 / m as f64, epsilon = 1e-12);
        }
        // N = αM with α = 0.3 lands exactly on α(1−α).
        let (r1, r2) = block_gain_pair(1000, 300);
        let (value, _) = frobenius_independence_statistic(&r1, &r2).unwrap();
        assert_abs_diff_eq!(value, 0.3 * 0.7, epsilon = 1e-12);
    }

    #[test]
    fn frobenius_statistic_random_diagonal_concentrates_at_gain_variance() {
        let m = 100_000usize;
        let mut rng = scenario_rng(21, 0);
        let d = DVector::from_fn(m, |_, _| 1.0 + rng.random::<f64>());
        let r1 = Covariance::from_diagonal(d, Model::Custom).unwrap();
        let r2 = scaled_identity_cov(m, 1.0).unwrap();
        let (value, _) = frobenius_independence_statistic(&r1, &r2).unwrap();
        // Standard error of the sample variance of U(0,1):
        // Var(s²) ≈ (μ₄ − σ⁴)/M = (1/80 − 1/144)/M = 1/(180·M).
        let se = (1.0 / (180.0 * m as f64)).sqrt();
        assert!(
            (value - 1.0 / 12.0).abs() <= 3.0 * se,
            "value {value} vs 1/12 (3se = {})",
            3.0 * se
        );
    }

    #[test]
    fn frobenius_statistic_scale_covariance() {
        let m = 12;
        let r1 = exp_corr_cov(m, 1.0, 0.5, 0.3).unwrap();
        let r2 = exp_corr_cov(m, 0.7, 0.8, -0.2).unwrap();
        let (v, l) = frobenius_independence_statistic(&r1, &r2).unwrap();
        let scaled = r1.scaled(3.0).unwrap();
        let (v3, l3) = frobenius_independence_statistic(&scaled, &r2).unwrap();
        assert_relative_eq!(v3, 9.0 * v, epsilon = 1e-12);
        assert_relative_eq!(l3, 3.0 * l, epsilon = 1e-12);
    }

    #[test]
    fn frobenius_statistic_zero_iff_proportional() {
        let m = 10;
        let r2 = exp_corr_cov(m, 1.0, 0.6, 0.2).unwrap();
        let r1 = r2.scaled(2.5).unwrap();
        let (value, lambda) = frobenius_independence_statistic(&r1, &r2).unwrap();
        assert_abs_diff_eq!(value, 0.0, epsilon = 1e-12);
        assert_relative_eq!(lambda, 2.5, epsilon = 1e-12);

        let r1b = exp_corr_cov(m, 1.0, 0.3, 0.2).unwrap();
        let (value_b, _) = frobenius_independence_statistic(&r1b, &r2).unwrap();
        assert!(value_b > 1e-6);
    }

    #[test]
    fn lower_bound_trivial_and_two_level_cases() {
        let m = 32;
        let (r1c, r2c) = block_gain_pair(m, m / 2);
        let r1 = r1c.to_dense();
        let r2 = r2c.to_dense();
        let (gram, core) = two_user_setup(&r1, &r2, 1.0);

        // Proportional pair at the annihilating lambda: both sides zero.
        let (gram_p, core_p) = two_user_setup(&r2, &r2, 1.0);
        for conv in [DenominatorConvention::Direct, DenominatorConvention::Reciprocal] {
            let (lhs, rhs) = distinguishability_lower_bound(&r2, &r2, &gram_p, &core_p, 1.0, conv).unwrap();
            assert_abs_diff_eq!(lhs, 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(rhs, 0.0, epsilon = 1e-14);
        }

        // Two-level pair at the Frobenius minimizer.
        let (_, lambda) = frobenius_independence_statistic(&r1c, &r2c).unwrap();
        for conv in [DenominatorConvention::Direct, DenominatorConvention::Reciprocal] {
            let (lhs, rhs) = distinguishability_lower_bound(&r1, &r2, &gram, &core, lambda, conv).unwrap();
            assert!(lhs >= rhs - 1e-12, "bound violated: {lhs} < {rhs}");
        }
    }

    #[test]
    fn lower_bound_randomized_spot_check() {
        // Small randomized sweep; the acceptance suite runs the full set.
        let m = 8;
        let mut k = 0u64;
        for (ra, rb) in [(0.4, 0.75), (0.6, 0.2), (0.85, 0.5)] {
            let r1 = exp_corr_cov(m, 1.0, ra, 0.9).unwrap().to_dense();
            let r2 = exp_corr_cov(m, 1.4, rb, -0.6).unwrap().to_dense();
            let rho = 1.0 + (k % 5) as f64;
            let (gram, core) = two_user_setup(&r1, &r2, rho);
            for lambda in [-2.0, -0.5, 0.3, 1.8] {
                k += 1;
                for conv in [DenominatorConvention::Direct, DenominatorConvention::Reciprocal] {
                    let (lhs, rhs) = distinguishability_lower_bound(&r1, &r2, &gram, &core, lambda, conv).unwrap();
                    assert!(lhs >= rhs - 1e-12, "bound violated at lambda {lambda}: {lhs} < {rhs}");
                }
            }
        }
    }

    #[test]
    fn linear_dependence_limit_is_eta_squared() {
        assert_eq!(linear_dependence_limit(1.0).unwrap(), 1.0);
        assert_eq!(linear_dependence_limit(2.0).unwrap(), 4.0);
        assert_eq!(linear_dependence_limit(0.5).unwrap(), 0.25);
        assert!(linear_dependence_limit(0.0).is_err());
        assert!(linear_dependence_limit(-1.0).is_err());
    }

    #[test]
    fn growth_verdict_rules() {
        // Fast decay (more than 2x per doubling) on the top three points.
        assert_eq!(
            growth_verdict(&[0.9, 0.4, 0.1, 0.02]).unwrap(),
            Verdict::ContaminationLimited
        );
        // Exactly zero at the top.
        assert_eq!(growth_verdict(&[0.0, 0.0, 0.0]).unwrap(), Verdict::ContaminationLimited);
        // Flat positive statistic.
        assert_eq!(
            growth_verdict(&[0.2, 0.21, 0.2, 0.2]).unwrap(),
            Verdict::UnboundedGrowthConsistent
        );
        // Slow decay (less than 2x per doubling).
        assert_eq!(
            growth_verdict(&[0.4, 0.3, 0.22]).unwrap(),
            Verdict::UnboundedGrowthConsistent
        );
        assert!(growth_verdict(&[0.1, 0.2]).is_err());
    }

    #[test]
    fn quadratic_forms_concentrate_around_normalized_trace() {
        // x ~ CN(0, I/M) against a fixed embedded matrix A = diag(I_8, 0):
        // the deviation |x^H A x − tr(A)/M| shrinks much faster than M
        // doubles, so the MAD at M = 4096 is far below 1/4 of the MAD at
        // M = 256.
        let sample_mad = |m: usize, seed: u64| -> f64 {
            let mut rng = scenario_rng(seed, 7);
            let samples = 201;
            let mut devs: Vec<f64> = (0..samples)
                .map(|_| {
                    let quad: f64 = (0..8)
                        .map(|_| complex_gaussian(&mut rng).norm_sqr() / m as f64)
                        .sum();
                    // Remaining M−8 coordinates multiply zero entries.
                    for _ in 8..m.min(64) {
                        let _ = complex_gaussian(&mut rng);
                    }
                    (quad - 8.0 / m as f64).abs()
                })
                .collect();
            devs.sort_by(|a, b| a.total_cmp(b));
            devs[samples / 2]
        };
        let mad_small = sample_mad(256, 1);
        let mad_big = sample_mad(4096, 1);
        assert!(
            mad_big < 0.25 * mad_small,
            "MAD did not shrink: {mad_big} vs {mad_small}"
        );
    }

    #[test]
    fn verdict_serializes_to_kebab_case() {
        let s = serde_json::to_string(&Verdict::UnboundedGrowthConsistent).unwrap();
        assert_eq!(s, "\"unbounded-growth-consistent\"");
        let v: Verdict = serde_json::from_str("\"contamination-limited\"").unwrap();
        assert_eq!(v, Verdict::ContaminationLimited);
    }
}
