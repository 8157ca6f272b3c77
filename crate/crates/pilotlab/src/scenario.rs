//! Scenario assembly: from a serialized description of links into the
//! center base station to materialized covariance matrices at a given
//! array size.
//!
//! A scenario is a list of links, each one UE whose channel the center BS
//! estimates: an average SNR in dB, a spatial covariance model, a pilot
//! group, and whether the UE belongs to the center cell. Angles enter in
//! degrees here and are converted to radians exactly once, when the
//! scenario is built; the rest of the crate is radians-only.
//!
//! Normalization: pilot and data transmit powers are equal and fixed at
//! ρ = ρᵗʳ = 1, and each link's covariance is rescaled so that
//! tr(R)/M equals the configured linear SNR. The average per-antenna SNR
//! is then exactly the configured value at every array size.
//!
//! Model angles left unspecified are drawn once per scenario from
//! U[−π, π) with the scenario seed and then frozen: re-materializing at a
//! different M reuses the same angles, so antenna sweeps vary only the
//! array geometry, never the propagation directions.

use serde::{Deserialize, Serialize};

use crate::covariance::{
    exp_corr_cov, lognormal_diag_cov, one_ring_cov, scaled_identity_cov, Covariance, Model,
};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, scenario_rng, uniform_angle};
use nalgebra::DVector;

/// Covariance model selector as it appears in config files. Angles are in
/// degrees; `theta_deg` may be omitted where shown optional, in which case
/// the angle is drawn from the scenario seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Local scattering ring at azimuth `theta_deg` with angular spread
    /// `delta_deg` on each side.
    OneRing {
        delta_deg: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta_deg: Option<f64>,
    },
    /// Exponential spatial correlation with magnitude `r` and phase from
    /// the azimuth angle.
    ExpCorr {
        r: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta_deg: Option<f64>,
    },
    /// Independent per-antenna gains, log-normal with standard deviation
    /// `sigma` (dB scale).
    LognormalDiag { sigma: f64 },
    /// No spatial structure at all.
    ScaledIdentity,
    /// Two-level diagonal: the first round(fraction·M) antennas get gain
    /// `high`, the rest `low`.
    BlockGain { fraction: f64, high: f64, low: f64 },
    /// Explicit diagonal; the entry count must equal the requested M.
    Diagonal { entries: Vec<f64> },
}

impl ModelSpec {
    /// Stable identifier used in output files.
    pub fn tag(&self) -> &'static str {
        match self {
            ModelSpec::OneRing { .. } => "one_ring",
            ModelSpec::ExpCorr { .. } => "exp_corr",
            ModelSpec::LognormalDiag { .. } => "lognormal_diag",
            ModelSpec::ScaledIdentity => "scaled_identity",
            ModelSpec::BlockGain { .. } => "block_gain",
            ModelSpec::Diagonal { .. } => "diagonal",
        }
    }

    /// Whether building this model twice from different seeds can differ.
    pub fn is_random(&self) -> bool {
        match self {
            ModelSpec::OneRing { theta_deg, .. } | ModelSpec::ExpCorr { theta_deg, .. } => {
                theta_deg.is_none()
            }
            ModelSpec::LognormalDiag { sigma } => *sigma != 0.0,
            _ => false,
        }
    }
}

/// One uplink channel into the center BS, as configured.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    /// Average per-antenna SNR at the center BS, in dB.
    pub snr_db: f64,
    /// True for UEs served by the center cell (they feed the single-cell
    /// combiner's estimate set).
    pub own_cell: bool,
    /// Pilot group index; links sharing a group share a pilot sequence.
    pub pilot_group: usize,
    pub model: ModelSpec,
}

/// Serialized scenario: the shape consumed from config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub links: Vec<LinkSpec>,
    /// Index of the link whose SE/SINR is reported. Defaults to 0.
    #[serde(default)]
    pub target_link: usize,
    /// Seed for the scenario-level draws (angles, per-antenna gains).
    /// Defaults to the run's master seed when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Model with every random parameter pinned, angles in radians.
#[derive(Clone, Debug)]
enum ResolvedModel {
    OneRing { theta: f64, delta: f64 },
    ExpCorr { r: f64, theta: f64 },
    LognormalDiag { sigma: f64, seed: u64 },
    ScaledIdentity,
    BlockGain { fraction: f64, high: f64, low: f64 },
    Diagonal { entries: Vec<f64> },
}

/// Converts a model spec to its pinned form: degrees become radians, a
/// missing angle is drawn from the scenario stream `stream`, and gain
/// models get a per-stream sub-seed.
fn resolve_model(spec: &ModelSpec, seed: u64, stream: u64) -> ResolvedModel {
    let draw_angle = || uniform_angle(&mut scenario_rng(seed, stream));
    match spec {
        ModelSpec::OneRing { delta_deg, theta_deg } => ResolvedModel::OneRing {
            theta: theta_deg.map_or_else(draw_angle, f64::to_radians),
            delta: delta_deg.to_radians(),
        },
        ModelSpec::ExpCorr { r, theta_deg } => ResolvedModel::ExpCorr {
            r: *r,
            theta: theta_deg.map_or_else(draw_angle, f64::to_radians),
        },
        ModelSpec::LognormalDiag { sigma } => {
            ResolvedModel::LognormalDiag { sigma: *sigma, seed: derive_seed(seed, stream) }
        }
        ModelSpec::ScaledIdentity => ResolvedModel::ScaledIdentity,
        ModelSpec::BlockGain { fraction, high, low } => {
            ResolvedModel::BlockGain { fraction: *fraction, high: *high, low: *low }
        }
        ModelSpec::Diagonal { entries } => ResolvedModel::Diagonal { entries: entries.clone() },
    }
}

impl ResolvedModel {
    /// Builds the covariance at size `m` with unit average gain before SNR
    /// scaling (the caller renormalizes the trace).
    fn build(&self, m: usize) -> Result<Covariance> {
        match self {
            ResolvedModel::OneRing { theta, delta } => one_ring_cov(m, 1.0, *theta, *delta),
            ResolvedModel::ExpCorr { r, theta } => exp_corr_cov(m, 1.0, *r, *theta),
            ResolvedModel::LognormalDiag { sigma, seed } => {
                lognormal_diag_cov(m, 1.0, *sigma, *seed)
            }
            ResolvedModel::ScaledIdentity => scaled_identity_cov(m, 1.0),
            ResolvedModel::BlockGain { fraction, high, low } => {
                if !(*fraction >= 0.0 && *fraction <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "block gain fraction must lie in [0, 1], got {fraction}"
                    )));
                }
                let n = ((fraction * m as f64).round() as usize).min(m);
                let d = DVector::from_fn(m, |i, _| if i < n { *high } else { *low });
                Covariance::from_diagonal(d, Model::Custom)
            }
            ResolvedModel::Diagonal { entries } => {
                if entries.len() != m {
                    return Err(Error::DimensionMismatch { expected: m, got: entries.len() });
                }
                Covariance::from_diagonal(DVector::from_row_slice(entries), Model::Custom)
            }
        }
    }
}

/// One link with both its configured and its pinned state.
#[derive(Clone, Debug)]
pub struct Link {
    snr_db: f64,
    own_cell: bool,
    pilot_group: usize,
    model: ResolvedModel,
}

impl Link {
    pub fn snr_db(&self) -> f64 {
        self.snr_db
    }

    /// Linear average per-antenna SNR; equals tr(R)/M after
    /// materialization.
    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    pub fn own_cell(&self) -> bool {
        self.own_cell
    }

    pub fn pilot_group(&self) -> usize {
        self.pilot_group
    }
}

/// A validated scenario with all random parameters pinned, ready to
/// materialize at any array size.
#[derive(Clone, Debug)]
pub struct Scenario {
    name: String,
    links: Vec<Link>,
    groups: Vec<Vec<usize>>,
    target: usize,
    seed: u64,
}

/// Validates the description and pins its scenario-level randomness. Angle draws
/// use per-link streams, so adding a link never changes the angles of the
/// others.
pub fn build_scenario(spec: &ScenarioSpec, default_seed: u64) -> Result<Scenario> {
    if spec.links.is_empty() {
        return Err(Error::Config("scenario has no links".into()));
    }
    if spec.target_link >= spec.links.len() {
        return Err(Error::Config(format!(
            "target link {} out of range for {} links",
            spec.target_link,
            spec.links.len()
        )));
    }
    if !spec.links[spec.target_link].own_cell {
        return Err(Error::Config("the target link must belong to the center cell".into()));
    }
    for (i, link) in spec.links.iter().enumerate() {
        if !link.snr_db.is_finite() {
            return Err(Error::Config(format!("link {i} has non-finite SNR {}", link.snr_db)));
        }
    }

    let n_groups = spec.links.iter().map(|l| l.pilot_group + 1).max().unwrap_or(0);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n_groups];
    for (i, link) in spec.links.iter().enumerate() {
        groups[link.pilot_group].push(i);
    }
    for (g, members) in groups.iter().enumerate() {
        if members.is_empty() {
            return Err(Error::Config(format!(
                "pilot group indices must be contiguous; group {g} is empty"
            )));
        }
        let own = members.iter().filter(|&&i| spec.links[i].own_cell).count();
        if own > 1 {
            return Err(Error::Config(format!(
                "pilot group {g} has {own} center-cell links; at most one is allowed"
            )));
        }
    }

    let seed = spec.seed.unwrap_or(default_seed);
    let links = spec
        .links
        .iter()
        .enumerate()
        .map(|(i, l)| Link {
            snr_db: l.snr_db,
            own_cell: l.own_cell,
            pilot_group: l.pilot_group,
            model: resolve_model(&l.model, seed, i as u64),
        })
        .collect();

    Ok(Scenario {
        name: spec.name.clone().unwrap_or_else(|| "scenario".into()),
        links,
        groups,
        target: spec.target_link,
        seed,
    })
}

impl Scenario {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    /// Pilot groups as index lists into `links`, in group order.
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Data SNR ρ. The SNR normalization folds per-link power into the
    /// covariance traces, so the nominal transmit power is always one.
    pub fn rho(&self) -> f64 {
        1.0
    }

    /// Pilot SNR ρᵗʳ, equal to the data SNR by construction.
    pub fn rho_tr(&self) -> f64 {
        1.0
    }

    /// True when the scenario is the canonical two-user form: two links on
    /// one shared pilot.
    pub fn is_two_user(&self) -> bool {
        self.links.len() == 2 && self.groups.len() == 1
    }

    /// Instantiates every link's covariance at array size `m`, rescaled so
    /// tr(R)/m equals the link's linear SNR.
    pub fn materialize(&self, m: usize) -> Result<Vec<Covariance>> {
        self.links
            .iter()
            .map(|link| {
                let cov = link.model.build(m)?;
                let target_trace = link.snr_linear() * m as f64;
                cov.scaled(target_trace / cov.trace())
            })
            .collect()
    }

    /// A copy with the gain spread of every per-antenna-gain link replaced
    /// by `sigma`. Fails unless all links use that model, so a σ-sweep
    /// cannot silently leave other links untouched.
    pub fn with_sigma(&self, sigma: f64) -> Result<Scenario> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gain standard deviation must be nonnegative and finite, got {sigma}"
            )));
        }
        let mut out = self.clone();
        for link in &mut out.links {
            match &mut link.model {
                ResolvedModel::LognormalDiag { sigma: s, .. } => *s = sigma,
                _ => {
                    return Err(Error::InvalidParameter(
                        "sigma sweeps need every link to use the lognormal_diag model".into(),
                    ))
                }
            }
        }
        Ok(out)
    }
}

/// Eigenvalues of the model covariance at size `m` with average gain
/// `beta`, sorted descending and averaged entrywise over `draws`
/// independent draws of the model's random parameters. Deterministic
/// models are built once regardless of `draws`.
pub fn averaged_eigen_spectrum(
    model: &ModelSpec,
    m: usize,
    beta: f64,
    draws: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if draws == 0 {
        return Err(Error::InvalidParameter("spectrum averaging needs at least one draw".into()));
    }
    let effective = if model.is_random() { draws } else { 1 };
    let mut acc = vec![0.0f64; m];
    for d in 0..effective {
        let cov = resolve_model(model, seed, d as u64).build(m)?.scaled(beta)?;
        for (a, v) in acc.iter_mut().zip(cov.eigen_spectrum().values.iter()) {
            *a += v;
        }
    }
    for a in &mut acc {
        *a /= effective as f64;
    }
    Ok(acc)
}
