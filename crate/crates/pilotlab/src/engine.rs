//! Monte Carlo estimation of uplink spectral efficiency per combining
//! scheme, plus the deterministic large-array diagnostics that accompany
//! the sweeps.
//!
//! Reproducibility contract: every trial draws from its own counter-based
//! stream keyed by (master seed, grid index, trial index), trials are
//! gathered in index order, and aggregation uses compensated summation over
//! that order. Outputs are therefore bit-identical for a fixed seed no
//! matter how trials are scheduled across threads.
//!
//! Per-trial draw order is fixed: one channel per link in link order, then
//! one pilot noise vector per group in group order. Anything that changes
//! this order changes the streams and breaks seed compatibility.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    beta_coefficients, frobenius_independence_statistic, growth_verdict, AsymptoticCoefficients,
    Verdict,
};
use crate::combining::{
    instantaneous_sinr, interference_core, mmse_combiner, mmse_sinr_two_forms, mrc_combiner,
    smmse_combiner, smmse_core, InterferenceCore, Scheme,
};
use crate::covariance::{Covariance, SqrtFactor};
use crate::error::{Error, Result};
use crate::estimation::{draw_channel, estimate_cov, pilot_gram, simulate_pilot_obs, PilotGram};
use crate::linalg::CompensatedSum;
use crate::rng::trial_rng;
use crate::scenario::Scenario;

/// One (sweep value, scheme) cell of an SE table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub sweep_value: f64,
    pub scheme: Scheme,
    /// Sample mean of log₂(1 + γ) over the trials, in bit/s/Hz.
    pub se_bits: f64,
    /// 95% confidence half-width from the per-trial sample variance; NaN
    /// when a single trial leaves the variance undefined.
    pub half_width: f64,
    pub trials: usize,
    pub seed: u64,
}

/// An SE table over one sweep variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SECurve {
    pub sweep_name: String,
    pub points: Vec<SweepPoint>,
}

/// Everything about a (scenario, M) pair that does not depend on the
/// trial: covariances, channel factors, pilot Grams, estimation
/// statistics, and the two interference cores.
struct Workspace {
    rho_tr: f64,
    dense: Vec<DMatrix<Complex64>>,
    factors: Vec<SqrtFactor>,
    groups: Vec<Vec<usize>>,
    grams: Vec<PilotGram>,
    mcore: InterferenceCore,
    score: InterferenceCore,
    own_links: Vec<usize>,
    target: usize,
    target_in_own: usize,
}

impl Workspace {
    fn build(scenario: &Scenario, m: usize) -> Result<Workspace> {
        let covs = scenario.materialize(m)?;
        let dense: Vec<DMatrix<Complex64>> = covs.iter().map(Covariance::to_dense).collect();
        let factors: Vec<SqrtFactor> = covs.iter().map(Covariance::sqrt_factor).collect();
        let groups = scenario.groups().to_vec();

        let mut grams = Vec::with_capacity(groups.len());
        for members in &groups {
            let rs: Vec<&DMatrix<Complex64>> = members.iter().map(|&l| &dense[l]).collect();
            grams.push(pilot_gram(&rs, scenario.rho_tr())?);
        }

        let mut err_covs = Vec::with_capacity(dense.len());
        for (l, r) in dense.iter().enumerate() {
            let g = scenario.links()[l].pilot_group();
            let (_, err) = estimate_cov(r, &grams[g]);
            err_covs.push(err);
        }

        let err_refs: Vec<&DMatrix<Complex64>> = err_covs.iter().collect();
        let mcore = interference_core(&err_refs, scenario.rho())?;

        let own_links: Vec<usize> = (0..dense.len())
            .filter(|&l| scenario.links()[l].own_cell())
            .collect();
        let own_err: Vec<&DMatrix<Complex64>> =
            own_links.iter().map(|&l| &err_covs[l]).collect();
        let other_cov: Vec<&DMatrix<Complex64>> = (0..dense.len())
            .filter(|&l| !scenario.links()[l].own_cell())
            .map(|l| &dense[l])
            .collect();
        let score = smmse_core(&own_err, &other_cov, scenario.rho())?;

        let target = scenario.target();
        let target_in_own =
            own_links.iter().position(|&l| l == target).expect("target is own-cell by validation");

        Ok(Workspace {
            rho_tr: scenario.rho_tr(),
            dense,
            factors,
            groups,
            grams,
            mcore,
            score,
            own_links,
            target,
            target_in_own,
        })
    }

    /// Draws one coherence block and returns the target's estimated
    /// channels alongside everyone else's.
    fn draw_estimates(&self, rng: &mut rand_chacha::ChaCha8Rng) -> Result<Vec<DVector<Complex64>>> {
        let h: Vec<DVector<Complex64>> =
            self.factors.iter().map(|f| draw_channel(f, rng)).collect();
        let mut ests = vec![DVector::zeros(0); self.dense.len()];
        for (g, members) in self.groups.iter().enumerate() {
            let hs: Vec<&DVector<Complex64>> = members.iter().map(|&l| &h[l]).collect();
            let y = simulate_pilot_obs(&hs, self.rho_tr, rng)?;
            let w = self.grams[g].whiten(&y);
            for &l in members {
                ests[l] = &self.dense[l] * &w;
            }
        }
        Ok(ests)
    }

    /// SINR of the target under each requested scheme for one trial.
    fn trial_sinrs(&self, schemes: &[Scheme], rng: &mut rand_chacha::ChaCha8Rng) -> Result<Vec<f64>> {
        let ests = self.draw_estimates(rng)?;
        let est_refs: Vec<&DVector<Complex64>> = ests.iter().collect();
        let own_refs: Vec<&DVector<Complex64>> =
            self.own_links.iter().map(|&l| &ests[l]).collect();

        schemes
            .iter()
            .map(|scheme| {
                let v = match scheme {
                    Scheme::Mrc => mrc_combiner(&ests[self.target], self.target).vector,
                    Scheme::MMmse => {
                        mmse_combiner(&est_refs, &self.mcore, self.target)?.vector
                    }
                    Scheme::SMmse => {
                        smmse_combiner(&own_refs, &self.score, self.target_in_own)?.vector
                    }
                };
                instantaneous_sinr(&v, &est_refs, &self.mcore, self.target)
            })
            .collect()
    }
}

fn check_trials_and_schemes(trials: usize, schemes: &[Scheme]) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is required".into()));
    }
    if schemes.is_empty() {
        return Err(Error::InvalidParameter("at least one combining scheme is required".into()));
    }
    Ok(())
}

fn check_grid<T: PartialOrd + std::fmt::Debug>(grid: &[T], what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config(format!("{what} grid is empty")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("{what} grid must be strictly increasing: {grid:?}")));
    }
    Ok(())
}

/// Per-trial SINR samples of the target link, indexed `[scheme][trial]`.
/// Trials run in parallel but are returned in trial order; the result is
/// independent of the thread schedule.
pub fn collect_sinrs(
    scenario: &Scenario,
    m: usize,
    schemes: &[Scheme],
    trials: usize,
    master_seed: u64,
    grid_index: u32,
) -> Result<Vec<Vec<f64>>> {
    check_trials_and_schemes(trials, schemes)?;
    let ws = Workspace::build(scenario, m)?;
    let per_trial: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(master_seed, grid_index, t as u64);
            ws.trial_sinrs(schemes, &mut rng)
        })
        .collect::<Result<_>>()?;

    let mut by_scheme = vec![Vec::with_capacity(trials); schemes.len()];
    for trial in per_trial {
        for (k, gamma) in trial.into_iter().enumerate() {
            by_scheme[k].push(gamma);
        }
    }
    Ok(by_scheme)
}

/// Sample mean and 95% half-width, accumulated in index order with
/// compensated sums.
fn mean_and_half_width(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mut acc = CompensatedSum::default();
    for x in xs {
        acc.add(*x);
    }
    let mean = acc.value() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let mut sq = CompensatedSum::default();
    for x in xs {
        let d = x - mean;
        sq.add(d * d);
    }
    let var = sq.value() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

fn run_point(
    scenario: &Scenario,
    m: usize,
    sweep_value: f64,
    schemes: &[Scheme],
    trials: usize,
    master_seed: u64,
    grid_index: u32,
) -> Result<Vec<SweepPoint>> {
    let sinrs = collect_sinrs(scenario, m, schemes, trials, master_seed, grid_index)?;
    Ok(schemes
        .iter()
        .zip(&sinrs)
        .map(|(scheme, gammas)| {
            let rates: Vec<f64> = gammas.iter().map(|g| (1.0 + g).log2()).collect();
            let (se_bits, half_width) = mean_and_half_width(&rates);
            SweepPoint { sweep_value, scheme: *scheme, se_bits, half_width, trials, seed: master_seed }
        })
        .collect())
}

/// Ergodic SE of the target link at one array size: per scheme, the sample
/// mean of log₂(1 + γ) with its 95% half-width.
pub fn run_uplink_se(
    scenario: &Scenario,
    m: usize,
    schemes: &[Scheme],
    trials: usize,
    master_seed: u64,
) -> Result<Vec<SweepPoint>> {
    run_point(scenario, m, m as f64, schemes, trials, master_seed, 0)
}

/// SE as a function of the number of antennas. Covariances are rebuilt at
/// every grid point from the same frozen scenario draws.
pub fn sweep_antennas(
    scenario: &Scenario,
    m_grid: &[usize],
    schemes: &[Scheme],
    trials: usize,
    master_seed: u64,
) -> Result<SECurve> {
    check_grid(m_grid, "antenna")?;
    if m_grid[0] == 0 {
        return Err(Error::Config("antenna counts must be positive".into()));
    }
    let mut points = Vec::with_capacity(m_grid.len() * schemes.len());
    for (i, &m) in m_grid.iter().enumerate() {
        points.extend(run_point(scenario, m, m as f64, schemes, trials, master_seed, i as u32)?);
    }
    Ok(SECurve { sweep_name: "antennas".into(), points })
}

/// SE as a function of the per-antenna gain spread σ at a fixed array
/// size. Every link must use the per-antenna-gain model; the underlying
/// normal draws are frozen, so the sweep varies only the spread.
pub fn sweep_sigma(
    scenario: &Scenario,
    sigma_grid: &[f64],
    m: usize,
    schemes: &[Scheme],
    trials: usize,
    master_seed: u64,
) -> Result<SECurve> {
    check_grid(sigma_grid, "sigma")?;
    let mut points = Vec::with_capacity(sigma_grid.len() * schemes.len());
    for (i, &sigma) in sigma_grid.iter().enumerate() {
        let varied = scenario.with_sigma(sigma)?;
        points.extend(run_point(&varied, m, sigma, schemes, trials, master_seed, i as u32)?);
    }
    Ok(SECurve { sweep_name: "sigma".into(), points })
}

/// Two-user statistics at one array size: the materialized pair with its
/// pilot Gram, interference core, and asymptotic numbers.
struct TwoUserStats {
    r_target: DMatrix<Complex64>,
    r_other: DMatrix<Complex64>,
    factors: [SqrtFactor; 2],
    gram: PilotGram,
    mcore: InterferenceCore,
    coeffs: AsymptoticCoefficients,
    frob_stat: f64,
    lambda_star: f64,
}

fn require_two_user(scenario: &Scenario) -> Result<()> {
    if !scenario.is_two_user() {
        return Err(Error::Config(
            "this analysis needs a two-user scenario: exactly two links sharing one pilot".into(),
        ));
    }
    Ok(())
}

fn two_user_stats(scenario: &Scenario, m: usize) -> Result<TwoUserStats> {
    let covs = scenario.materialize(m)?;
    let target = scenario.target();
    let other = 1 - target;
    let dense: Vec<DMatrix<Complex64>> = covs.iter().map(Covariance::to_dense).collect();
    let gram = pilot_gram(&[&dense[0], &dense[1]], scenario.rho_tr())?;
    let (_, e0) = estimate_cov(&dense[0], &gram);
    let (_, e1) = estimate_cov(&dense[1], &gram);
    let mcore = interference_core(&[&e0, &e1], scenario.rho())?;
    let coeffs = beta_coefficients(&dense[target], &dense[other], &gram, &mcore)?;
    let (frob_stat, lambda_star) = frobenius_independence_statistic(&covs[target], &covs[other])?;
    Ok(TwoUserStats {
        r_target: dense[target].clone(),
        r_other: dense[other].clone(),
        factors: [covs[0].sqrt_factor(), covs[1].sqrt_factor()],
        gram,
        mcore,
        coeffs,
        frob_stat,
        lambda_star,
    })
}

/// Asymptotic diagnostics for one array size of a two-user scenario.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    pub m: usize,
    pub beta11: f64,
    pub beta12: f64,
    pub beta22: f64,
    /// SINR slope β₁₁ − β₁₂²/β₂₂ at this M.
    pub delta: f64,
    /// Covariance-only distinguishability min_λ ‖R₁ − λR₂‖_F²/M.
    pub frob_stat: f64,
    /// Minimizer of the Frobenius statistic.
    pub lambda_star: f64,
    /// The overall growth verdict, echoed per record.
    pub verdict: Verdict,
}

/// Doubling-grid diagnostics with the growth classification.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub records: Vec<DiagnosticRecord>,
    pub verdict: Verdict,
}

/// Computes δ and the Frobenius statistic for a two-user scenario on an
/// ascending antenna grid and classifies SINR growth from the δ sequence.
/// The grid needs at least three points for the decay rule.
pub fn asymptotic_diagnostics(scenario: &Scenario, m_grid: &[usize]) -> Result<DiagnosticsReport> {
    require_two_user(scenario)?;
    check_grid(m_grid, "antenna")?;
    if m_grid[0] == 0 {
        return Err(Error::Config("antenna counts must be positive".into()));
    }
    let stats: Vec<TwoUserStats> =
        m_grid.iter().map(|&m| two_user_stats(scenario, m)).collect::<Result<_>>()?;
    let deltas: Vec<f64> = stats.iter().map(|s| s.coeffs.delta).collect();
    let verdict = growth_verdict(&deltas)?;
    let records = m_grid
        .iter()
        .zip(&stats)
        .map(|(&m, s)| DiagnosticRecord {
            m,
            beta11: s.coeffs.beta11,
            beta12: s.coeffs.beta12,
            beta22: s.coeffs.beta22,
            delta: s.coeffs.delta,
            frob_stat: s.frob_stat,
            lambda_star: s.lambda_star,
            verdict,
        })
        .collect();
    Ok(DiagnosticsReport { records, verdict })
}

/// Monte Carlo SINR growth of the two-user target under multicell MMSE at
/// one array size.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TwoUserLimitRecord {
    pub m: usize,
    pub trials: usize,
    /// Sample mean of the target's M-MMSE SINR.
    pub mean_gamma: f64,
    /// The same mean divided by M, the quantity that converges to δ.
    pub mean_gamma_over_m: f64,
    pub delta: f64,
    pub frob_stat: f64,
    pub lambda_star: f64,
}

/// SINR growth table for a two-user scenario.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TwoUserLimitReport {
    pub seed: u64,
    pub records: Vec<TwoUserLimitRecord>,
}

/// Mean M-MMSE SINR of the two-user target across an antenna grid, next to
/// the deterministic statistics it should track: γ/M approaches δ when the
/// covariances are distinguishable, while proportional pairs pin γ at the
/// squared proportionality factor.
///
/// Trials evaluate the SINR through the rank-one identity against the
/// cached interference factorization, so each costs O(M²) and large arrays
/// stay affordable.
pub fn two_user_limit(
    scenario: &Scenario,
    m_grid: &[usize],
    trials: usize,
    master_seed: u64,
) -> Result<TwoUserLimitReport> {
    require_two_user(scenario)?;
    check_grid(m_grid, "antenna")?;
    if m_grid[0] == 0 {
        return Err(Error::Config("antenna counts must be positive".into()));
    }
    check_trials_and_schemes(trials, &[Scheme::MMmse])?;

    let mut records = Vec::with_capacity(m_grid.len());
    for (i, &m) in m_grid.iter().enumerate() {
        let stats = two_user_stats(scenario, m)?;
        let gammas: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = trial_rng(master_seed, i as u32, t as u64);
                // Same draw order as the generic engine: channels in link
                // order, then the shared pilot observation.
                let h0 = draw_channel(&stats.factors[0], &mut rng);
                let h1 = draw_channel(&stats.factors[1], &mut rng);
                let y = simulate_pilot_obs(&[&h0, &h1], scenario.rho_tr(), &mut rng)?;
                let w = stats.gram.whiten(&y);
                let est_target = &stats.r_target * &w;
                let est_other = &stats.r_other * &w;
                let (_, rank1) = mmse_sinr_two_forms(&est_target, &est_other, &stats.mcore)?;
                Ok(rank1)
            })
            .collect::<Result<_>>()?;
        let (mean_gamma, _) = mean_and_half_width(&gammas);
        records.push(TwoUserLimitRecord {
            m,
            trials,
            mean_gamma,
            mean_gamma_over_m: mean_gamma / m as f64,
            delta: stats.coeffs.delta,
            frob_stat: stats.frob_stat,
            lambda_star: stats.lambda_star,
        });
    }
    Ok(TwoUserLimitReport { seed: master_seed, records })
}
