//! MMSE channel estimation from shared pilots.
//!
//! Every user in a pilot group transmits the same unit-norm pilot, so the
//! base station sees the superposition of their channels. All second-order
//! statistics of the estimates (estimate covariance, error covariance, and
//! the cross-correlation that pilot contamination induces between co-pilot
//! users) follow from one Gram matrix per group.
//!
//! The despread observation `y = Σ_group h + n/√ρᵗʳ` is used throughout
//! instead of the raw M×τ_p pilot block: a unit-norm pilot makes despreading
//! lossless and keeps the noise white.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{hermitianize, hpd_cholesky};
use crate::rng::complex_gaussian_vector;

/// Pilot allocation: which users share a pilot, and at what pilot SNR.
#[derive(Clone, Debug)]
pub struct PilotModel {
    rho_tr: f64,
    groups: Vec<Vec<usize>>,
}

impl PilotModel {
    /// Creates a pilot model over users `0..n_users`. `groups` must
    /// partition that index set; every member of a group transmits the same
    /// pilot sequence.
    pub fn new(rho_tr: f64, groups: Vec<Vec<usize>>, n_users: usize) -> Result<PilotModel> {
        if !(rho_tr > 0.0 && rho_tr.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "pilot SNR rho_tr must be positive and finite, got {rho_tr}"
            )));
        }
        let mut seen = vec![false; n_users];
        for group in &groups {
            for &u in group {
                if u >= n_users || seen[u] {
                    return Err(Error::InvalidParameter(format!(
                        "pilot groups must partition users 0..{n_users}; index {u} repeated or out of range"
                    )));
                }
                seen[u] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidParameter(format!(
                "pilot groups must cover all users 0..{n_users}"
            )));
        }
        Ok(PilotModel { rho_tr, groups })
    }

    pub fn rho_tr(&self) -> f64 {
        self.rho_tr
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }
}

/// Gram matrix of a pilot group's despread observation,
/// Q = Σ_group R + (1/ρᵗʳ)·I, held together with its Cholesky factor so
/// estimates solve linear systems instead of forming Q⁻¹.
#[derive(Clone, Debug)]
pub struct PilotGram {
    q: DMatrix<Complex64>,
    chol: Cholesky<Complex64, Dyn>,
    rho_tr: f64,
}

impl PilotGram {
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.q
    }

    pub fn rho_tr(&self) -> f64 {
        self.rho_tr
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    /// Q⁻¹·y by triangular solves.
    pub fn whiten(&self, y: &DVector<Complex64>) -> DVector<Complex64> {
        self.chol.solve(y)
    }

    /// Q⁻¹·B by triangular solves, column by column.
    pub fn solve_matrix(&self, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        self.chol.solve(b)
    }
}

/// Builds the pilot-group Gram matrix Q = Σ R + (1/ρᵗʳ)·I. The noise
/// diagonal makes Q positive definite whenever ρᵗʳ is finite.
pub fn pilot_gram(r_group: &[&DMatrix<Complex64>], rho_tr: f64) -> Result<PilotGram> {
    if !(rho_tr > 0.0 && rho_tr.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "pilot SNR rho_tr must be positive and finite, got {rho_tr}"
        )));
    }
    let m = match r_group.first() {
        Some(r) => r.nrows(),
        None => {
            return Err(Error::InvalidParameter("pilot group must contain at least one user".into()))
        }
    };
    let mut q = DMatrix::from_element(m, m, Complex64::ZERO);
    for r in r_group {
        if r.nrows() != m || r.ncols() != m {
            return Err(Error::DimensionMismatch { expected: m, got: r.nrows().max(r.ncols()) });
        }
        q += *r;
    }
    let inv_rho = Complex64::new(1.0 / rho_tr, 0.0);
    for i in 0..m {
        q[(i, i)] += inv_rho;
    }
    hermitianize(&mut q);
    let chol = hpd_cholesky(q.clone(), "pilot gram matrix")?;
    Ok(PilotGram { q, chol, rho_tr })
}

/// F with F·Fᴴ = R for a raw Hermitian PSD matrix: eigendecomposition with
/// negative rounding noise clamped to zero. Rejects genuinely indefinite
/// input (below −ε_psd relative to the spectral norm).
pub fn dense_sqrt_factor(r: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let eig = r.clone().symmetric_eigen();
    let max_abs = eig.eigenvalues.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -crate::covariance::EPS_PSD * max_abs {
        return Err(Error::NotPositiveSemidefinite {
            min_eigenvalue: min,
            tolerance: crate::covariance::EPS_PSD * max_abs,
        });
    }
    let mut factor = eig.eigenvectors;
    for (j, lambda) in eig.eigenvalues.iter().enumerate() {
        factor.column_mut(j).scale_mut(lambda.max(0.0).sqrt());
    }
    Ok(factor)
}

/// Draws one channel h = F·w with w standard complex Gaussian, given a
/// square-root factor of the covariance.
pub fn draw_channel<R: Rng + ?Sized>(
    factor: &crate::covariance::SqrtFactor,
    rng: &mut R,
) -> DVector<Complex64> {
    let m = match factor {
        crate::covariance::SqrtFactor::Dense(f) => f.nrows(),
        crate::covariance::SqrtFactor::Diagonal(d) => d.len(),
    };
    factor.apply(&complex_gaussian_vector(rng, m))
}

/// Draws h ~ CN(0, R) for each covariance in the list, consuming the RNG in
/// list order.
pub fn draw_channels<R: Rng + ?Sized>(
    r_list: &[&DMatrix<Complex64>],
    rng: &mut R,
) -> Result<Vec<DVector<Complex64>>> {
    let mut out = Vec::with_capacity(r_list.len());
    for r in r_list {
        let f = dense_sqrt_factor(r)?;
        out.push(&f * complex_gaussian_vector(rng, r.nrows()));
    }
    Ok(out)
}

/// Despread pilot observation for one group: Σ h + (1/√ρᵗʳ)·n with
/// n ~ CN(0, I).
pub fn simulate_pilot_obs<R: Rng + ?Sized>(
    h_group: &[&DVector<Complex64>],
    rho_tr: f64,
    rng: &mut R,
) -> Result<DVector<Complex64>> {
    if !(rho_tr > 0.0 && rho_tr.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "pilot SNR rho_tr must be positive and finite, got {rho_tr}"
        )));
    }
    let m = match h_group.first() {
        Some(h) => h.len(),
        None => {
            return Err(Error::InvalidParameter("pilot group must contain at least one user".into()))
        }
    };
    let mut y = complex_gaussian_vector(rng, m) / Complex64::new(rho_tr.sqrt(), 0.0);
    for h in h_group {
        if h.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: h.len() });
        }
        y += *h;
    }
    Ok(y)
}

/// MMSE estimate ĥ = R·Q⁻¹·y from the group's despread observation y.
/// Estimates for every user in a group reuse the same whitened observation.
pub fn mmse_estimate(
    r: &DMatrix<Complex64>,
    gram: &PilotGram,
    despread_obs: &DVector<Complex64>,
) -> DVector<Complex64> {
    r * gram.whiten(despread_obs)
}

/// Estimate covariance Φ = R·Q⁻¹·R and error covariance R − Φ. Both are
/// Hermitian PSD; the error covariance is returned as the entrywise
/// difference so the pair always sums back to R.
pub fn estimate_cov(
    r: &DMatrix<Complex64>,
    gram: &PilotGram,
) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let mut phi = r * gram.solve_matrix(r);
    hermitianize(&mut phi);
    let err = r - &phi;
    (phi, err)
}

/// Cross-correlation of co-pilot estimates: Υ = R_i·Q⁻¹·R_k. Nonzero Υ is
/// exactly the coupling that pilot sharing induces.
pub fn cross_cov(
    r_i: &DMatrix<Complex64>,
    r_k: &DMatrix<Complex64>,
    gram: &PilotGram,
) -> DMatrix<Complex64> {
    r_i * gram.solve_matrix(r_k)
}

/// One simulated coherence block for a set of users: true channels,
/// estimates, and the second-order statistics they were estimated under.
#[derive(Clone, Debug)]
pub struct ChannelSet {
    pub true_channels: Vec<DVector<Complex64>>,
    pub estimates: Vec<DVector<Complex64>>,
    /// Φ per user.
    pub est_covs: Vec<DMatrix<Complex64>>,
    /// R − Φ per user.
    pub err_covs: Vec<DMatrix<Complex64>>,
    /// Q per pilot group, aligned with the pilot model's group order.
    pub grams: Vec<PilotGram>,
}

impl ChannelSet {
    /// Draws channels for all users, simulates each group's despread
    /// observation, and estimates every channel from its group observation.
    pub fn simulate<R: Rng + ?Sized>(
        r_list: &[&DMatrix<Complex64>],
        pilot: &PilotModel,
        rng: &mut R,
    ) -> Result<ChannelSet> {
        let n = r_list.len();
        let mut grams = Vec::with_capacity(pilot.groups().len());
        for group in pilot.groups() {
            let rs: Vec<&DMatrix<Complex64>> = group.iter().map(|&u| r_list[u]).collect();
            grams.push(pilot_gram(&rs, pilot.rho_tr())?);
        }
        let true_channels = draw_channels(r_list, rng)?;
        let mut estimates = vec![DVector::zeros(0); n];
        let mut est_covs = vec![DMatrix::zeros(0, 0); n];
        let mut err_covs = vec![DMatrix::zeros(0, 0); n];
        for (group, gram) in pilot.groups().iter().zip(&grams) {
            let hs: Vec<&DVector<Complex64>> = group.iter().map(|&u| &true_channels[u]).collect();
            let y = simulate_pilot_obs(&hs, pilot.rho_tr(), rng)?;
            let whitened = gram.whiten(&y);
            for &u in group {
                estimates[u] = r_list[u] * &whitened;
                let (phi, err) = estimate_cov(r_list[u], gram);
                est_covs[u] = phi;
                err_covs[u] = err;
            }
        }
        Ok(ChannelSet { true_channels, estimates, est_covs, err_covs, grams })
    }

    /// Estimation error h − ĥ for one user.
    pub fn error(&self, user: usize) -> DVector<Complex64> {
        &self.true_channels[user] - &self.estimates[user]
    }
}
