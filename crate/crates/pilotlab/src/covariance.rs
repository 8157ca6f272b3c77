//! Channel covariance models for a uniform linear array.
//!
//! Three structured models (one-ring scattering, exponential correlation,
//! log-normal diagonal) plus a scaled identity baseline and custom matrices.
//! Diagonal models use O(M) storage so very large arrays stay cheap.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, hermitian_residual, hermitianize, CompensatedSum};
use crate::rng::scenario_rng;

/// Tolerance for the positive-semidefinite gate, relative to the spectral
/// norm. Inputs below −EPS_PSD·‖R‖₂ are rejected; small negative rounding
/// noise inside the band is left untouched (no clipping), since downstream
/// inverses always add a positive noise diagonal.
pub const EPS_PSD: f64 = 1e-10;

/// Stream index for log-normal gain draws, disjoint from the per-link
/// scenario streams which are small integers.
const LOGNORMAL_STREAM: u64 = 1 << 62;

/// How a covariance matrix was produced, with the generating parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    /// Scatterers uniform on [θ−Δ, θ+Δ] around a ULA; Toeplitz.
    OneRing { beta: f64, theta: f64, delta: f64 },
    /// [R]_{m,n} = β r^{|n−m|} e^{i(n−m)θ}; Toeplitz.
    ExpCorr { beta: f64, r: f64, theta: f64 },
    /// Independent per-antenna large-scale fading, diagonal.
    LognormalDiag { beta: f64, sigma: f64, seed: u64 },
    /// β·I, the i.i.d. fading baseline.
    ScaledIdentity { beta: f64 },
    /// Loaded or assembled from raw entries.
    Custom,
}

impl Model {
    /// Short lowercase tag used in file output.
    pub fn tag(&self) -> &'static str {
        match self {
            Model::OneRing { .. } => "one_ring",
            Model::ExpCorr { .. } => "exp_corr",
            Model::LognormalDiag { .. } => "lognormal_diag",
            Model::ScaledIdentity { .. } => "scaled_identity",
            Model::Custom => "custom",
        }
    }

    fn scaled(&self, factor: f64) -> Model {
        match *self {
            Model::OneRing { beta, theta, delta } => Model::OneRing { beta: beta * factor, theta, delta },
            Model::ExpCorr { beta, r, theta } => Model::ExpCorr { beta: beta * factor, r, theta },
            Model::LognormalDiag { beta, sigma, seed } => {
                Model::LognormalDiag { beta: beta * factor, sigma, seed }
            }
            Model::ScaledIdentity { beta } => Model::ScaledIdentity { beta: beta * factor },
            Model::Custom => Model::Custom,
        }
    }
}

#[derive(Clone, Debug)]
enum Storage {
    Dense(DMatrix<Complex64>),
    /// Real diagonal; off-diagonal entries are exactly zero.
    Diagonal(DVector<f64>),
}

/// Hermitian positive semidefinite channel covariance with positive trace.
#[derive(Clone, Debug)]
pub struct Covariance {
    storage: Storage,
    model: Model,
}

/// Eigenvalues of a covariance matrix, sorted descending.
#[derive(Clone, Debug)]
pub struct EigenSpectrum {
    /// Descending real eigenvalues.
    pub values: Vec<f64>,
    /// True once values have been divided by the average pathloss tr(R)/M.
    pub normalized: bool,
}

impl EigenSpectrum {
    /// Divides all eigenvalues by the average pathloss tr(R)/M so spectra of
    /// different models are comparable on one plot.
    pub fn normalize(mut self) -> Self {
        let m = self.values.len().max(1) as f64;
        let beta = self.values.iter().sum::<f64>() / m;
        if beta > 0.0 {
            for v in &mut self.values {
                *v /= beta;
            }
        }
        self.normalized = true;
        self
    }

    /// Fraction of eigenvalues below `rel_threshold` times the largest one.
    pub fn fraction_below(&self, rel_threshold: f64) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        let cut = rel_threshold * self.values[0];
        let n = self.values.iter().filter(|&&v| v < cut).count();
        n as f64 / self.values.len() as f64
    }
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {value}")));
    }
    Ok(())
}

fn check_dim(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidParameter("array size M must be at least 1".into()));
    }
    Ok(())
}

/// Gauss-Legendre nodes and weights on [−1, 1] for a fixed panel order.
/// Newton iteration on the Legendre recurrence; cached after first use.
const GL_ORDER: usize = 32;

fn gauss_legendre_panel() -> &'static (Vec<f64>, Vec<f64>) {
    static PANEL: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    PANEL.get_or_init(|| {
        let n = GL_ORDER;
        let mut nodes = vec![0.0f64; n];
        let mut weights = vec![0.0f64; n];
        for i in 0..n {
            // Chebyshev-based initial guess for the i-th root of P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                // Evaluate P_n(x) and P_n'(x) by upward recurrence.
                let (mut p0, mut p1) = (1.0f64, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / dp;
                x -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

/// Integrates `f` over [a, b] with composite Gauss-Legendre using at least
/// `min_nodes` total nodes.
fn integrate_complex(a: f64, b: f64, min_nodes: usize, f: impl Fn(f64) -> Complex64) -> Complex64 {
    let (nodes, weights) = gauss_legendre_panel();
    let panels = min_nodes.div_ceil(GL_ORDER).max(1);
    let h = (b - a) / panels as f64;
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        let half = 0.5 * h;
        for (x, w) in nodes.iter().zip(weights.iter()) {
            let v = f(mid + half * x) * (w * half);
            re.add(v.re);
            im.add(v.im);
        }
    }
    Complex64::new(re.value(), im.value())
}

/// Builds a Hermitian Toeplitz matrix from first-row entries c_0..c_{M−1}:
/// entry(row, col) = c_{col−row} above the diagonal, conjugate below.
fn toeplitz_from_first_row(c: &[Complex64]) -> DMatrix<Complex64> {
    let m = c.len();
    DMatrix::from_fn(m, m, |row, col| {
        if col >= row {
            c[col - row]
        } else {
            c[row - col].conj()
        }
    })
}

/// One-ring scattering model: scatterers uniform on [θ−Δ, θ+Δ] seen by a
/// half-wavelength ULA. Entry (m,n) is (β/2Δ)·∫ e^{πi(n−m)sin(θ+δ)} dδ.
///
/// The integral is evaluated by composite Gauss-Legendre with at least
/// max(64, 8·M) nodes per entry; the integrand oscillates like π|n−m| ≤ πM,
/// so the node count must scale with M. The diagonal is set to β exactly.
pub fn one_ring_cov(m: usize, beta: f64, theta: f64, delta: f64) -> Result<Covariance> {
    check_dim(m)?;
    check_positive("beta", beta)?;
    if !(delta > 0.0 && delta <= PI) {
        return Err(Error::InvalidParameter(format!(
            "angular spread delta must lie in (0, pi], got {delta}"
        )));
    }
    let min_nodes = (8 * m).max(64);
    let scale = beta / (2.0 * delta);
    let mut c = vec![Complex64::ZERO; m];
    c[0] = Complex64::new(beta, 0.0);
    for (k, ck) in c.iter_mut().enumerate().skip(1) {
        let freq = PI * k as f64;
        *ck = scale
            * integrate_complex(-delta, delta, min_nodes, |d| {
                let phase = freq * (theta + d).sin();
                Complex64::new(phase.cos(), phase.sin())
            });
    }
    Ok(Covariance {
        storage: Storage::Dense(toeplitz_from_first_row(&c)),
        model: Model::OneRing { beta, theta, delta },
    })
}

/// Exponential correlation model: entry (m,n) = β r^{|n−m|} e^{i(n−m)θ}.
pub fn exp_corr_cov(m: usize, beta: f64, r: f64, theta: f64) -> Result<Covariance> {
    check_dim(m)?;
    check_positive("beta", beta)?;
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidParameter(format!(
            "correlation magnitude r must lie in [0, 1], got {r}"
        )));
    }
    let mut c = vec![Complex64::ZERO; m];
    for (k, ck) in c.iter_mut().enumerate() {
        let mag = beta * r.powi(k as i32);
        let phase = k as f64 * theta;
        *ck = mag * Complex64::new(phase.cos(), phase.sin());
    }
    Ok(Covariance {
        storage: Storage::Dense(toeplitz_from_first_row(&c)),
        model: Model::ExpCorr { beta, r, theta },
    })
}

/// Independent log-normal large-scale fading over the array:
/// R = β·diag(10^{f_1/10}, …, 10^{f_M/10}) with f_m ~ N(0, σ²) in dB.
///
/// Draws are reproducible for a fixed seed, and the underlying standard
/// normals do not depend on σ, so sweeping σ with one seed varies the
/// spread smoothly rather than resampling the pattern.
pub fn lognormal_diag_cov(m: usize, beta: f64, sigma: f64, seed: u64) -> Result<Covariance> {
    check_dim(m)?;
    check_positive("beta", beta)?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "standard deviation sigma must be nonnegative, got {sigma}"
        )));
    }
    let mut rng = scenario_rng(seed, LOGNORMAL_STREAM);
    let values = DVector::from_iterator(
        m,
        (0..m).map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            beta * 10f64.powf(sigma * z / 10.0)
        }),
    );
    Ok(Covariance {
        storage: Storage::Diagonal(values),
        model: Model::LognormalDiag { beta, sigma, seed },
    })
}

/// The i.i.d. fading baseline β·I_M.
pub fn scaled_identity_cov(m: usize, beta: f64) -> Result<Covariance> {
    check_dim(m)?;
    check_positive("beta", beta)?;
    Ok(Covariance {
        storage: Storage::Diagonal(DVector::from_element(m, beta)),
        model: Model::ScaledIdentity { beta },
    })
}

impl Covariance {
    /// Wraps a dense Hermitian PSD matrix, validating both properties.
    /// Entries are stored as given; a Hermitian residual within rounding
    /// noise of the entry scale is symmetrized away, larger ones are errors.
    pub fn from_dense(matrix: DMatrix<Complex64>, model: Model) -> Result<Covariance> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), got: matrix.ncols() });
        }
        check_dim(matrix.nrows())?;
        let scale = matrix.iter().fold(0.0f64, |acc, z| acc.max(z.norm())).max(f64::MIN_POSITIVE);
        let residual = hermitian_residual(&matrix);
        let mut matrix = matrix;
        if residual > 0.0 {
            if residual > 1e-10 * scale {
                return Err(Error::NotHermitian { residual });
            }
            hermitianize(&mut matrix);
        }
        let cov = Covariance { storage: Storage::Dense(matrix), model };
        cov.check_psd_and_trace()?;
        Ok(cov)
    }

    /// Wraps a real nonnegative diagonal as a covariance matrix.
    pub fn from_diagonal(values: DVector<f64>, model: Model) -> Result<Covariance> {
        check_dim(values.len())?;
        if values.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "diagonal covariance entries must be finite and nonnegative".into(),
            ));
        }
        let cov = Covariance { storage: Storage::Diagonal(values), model };
        cov.check_psd_and_trace()?;
        Ok(cov)
    }

    fn check_psd_and_trace(&self) -> Result<()> {
        let trace = self.trace();
        if trace <= 0.0 || trace.is_nan() {
            return Err(Error::InvalidParameter("covariance must have positive trace".into()));
        }
        let (min, max_abs) = match &self.storage {
            Storage::Diagonal(v) => {
                let min = v.iter().copied().fold(f64::INFINITY, f64::min);
                let max = v.iter().copied().fold(0.0f64, |a, b| a.max(b.abs()));
                (min, max)
            }
            Storage::Dense(m) => {
                let eig = hermitian_eigenvalues(m);
                let min = *eig.first().unwrap();
                let max = eig.iter().fold(0.0f64, |a, b| a.max(b.abs()));
                (min, max)
            }
        };
        if min < -EPS_PSD * max_abs {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min, tolerance: EPS_PSD * max_abs });
        }
        Ok(())
    }

    /// Re-checks the Hermitian/PSD/positive-trace invariants.
    pub fn validate(&self) -> Result<()> {
        if let Storage::Dense(m) = &self.storage {
            let residual = hermitian_residual(m);
            if residual > 0.0 {
                return Err(Error::NotHermitian { residual });
            }
        }
        self.check_psd_and_trace()
    }

    pub fn dim(&self) -> usize {
        match &self.storage {
            Storage::Dense(m) => m.nrows(),
            Storage::Diagonal(v) => v.len(),
        }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// True when off-diagonal entries are structurally zero.
    pub fn is_diagonal(&self) -> bool {
        matches!(self.storage, Storage::Diagonal(_))
    }

    /// The diagonal for structurally diagonal matrices.
    pub fn diagonal_values(&self) -> Option<&DVector<f64>> {
        match &self.storage {
            Storage::Diagonal(v) => Some(v),
            Storage::Dense(_) => None,
        }
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        match &self.storage {
            Storage::Dense(m) => m[(row, col)],
            Storage::Diagonal(v) => {
                if row == col {
                    Complex64::new(v[row], 0.0)
                } else {
                    Complex64::ZERO
                }
            }
        }
    }

    pub fn trace(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        match &self.storage {
            Storage::Dense(m) => {
                for i in 0..m.nrows() {
                    acc.add(m[(i, i)].re);
                }
            }
            Storage::Diagonal(v) => {
                for x in v.iter() {
                    acc.add(*x);
                }
            }
        }
        acc.value()
    }

    /// Squared Frobenius norm, Σ|entries|².
    pub fn frobenius_sq(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        match &self.storage {
            Storage::Dense(m) => {
                for z in m.iter() {
                    acc.add(z.norm_sqr());
                }
            }
            Storage::Diagonal(v) => {
                for x in v.iter() {
                    acc.add(x * x);
                }
            }
        }
        acc.value()
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_norm(&self) -> f64 {
        match &self.storage {
            Storage::Dense(m) => crate::linalg::spectral_norm_hermitian(m),
            Storage::Diagonal(v) => v.iter().fold(0.0f64, |a, b| a.max(b.abs())),
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        match &self.storage {
            Storage::Dense(m) => *hermitian_eigenvalues(m).first().unwrap(),
            Storage::Diagonal(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// tr(self · other) for Hermitian operands; O(M) when either side is
    /// diagonal.
    pub fn trace_product(&self, other: &Covariance) -> f64 {
        assert_eq!(self.dim(), other.dim(), "trace_product dimension mismatch");
        let mut acc = CompensatedSum::new();
        match (&self.storage, &other.storage) {
            (Storage::Diagonal(a), Storage::Diagonal(b)) => {
                for (x, y) in a.iter().zip(b.iter()) {
                    acc.add(x * y);
                }
                acc.value()
            }
            (Storage::Diagonal(d), Storage::Dense(m)) | (Storage::Dense(m), Storage::Diagonal(d)) => {
                for (i, x) in d.iter().enumerate() {
                    acc.add(x * m[(i, i)].re);
                }
                acc.value()
            }
            (Storage::Dense(a), Storage::Dense(b)) => crate::linalg::trace_product_hermitian(a, b),
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Diagonal(v) => {
                DMatrix::from_fn(v.len(), v.len(), |r, c| {
                    if r == c {
                        Complex64::new(v[r], 0.0)
                    } else {
                        Complex64::ZERO
                    }
                })
            }
        }
    }

    /// Returns the same matrix scaled by a positive factor. Model parameters
    /// keep their meaning because every model is linear in β.
    pub fn scaled(&self, factor: f64) -> Result<Covariance> {
        check_positive("scale factor", factor)?;
        let storage = match &self.storage {
            Storage::Dense(m) => Storage::Dense(m.map(|z| z * factor)),
            Storage::Diagonal(v) => Storage::Diagonal(v.map(|x| x * factor)),
        };
        Ok(Covariance { storage, model: self.model.scaled(factor) })
    }

    /// Eigenvalues sorted descending. The sum reproduces tr(R) up to
    /// eigensolver rounding.
    pub fn eigen_spectrum(&self) -> EigenSpectrum {
        let mut values = match &self.storage {
            Storage::Dense(m) => hermitian_eigenvalues(m),
            Storage::Diagonal(v) => {
                let mut vals: Vec<f64> = v.iter().copied().collect();
                vals.sort_by(|a, b| a.total_cmp(b));
                vals
            }
        };
        values.reverse();
        EigenSpectrum { values, normalized: false }
    }

    /// A factor F with F·Fᴴ = R, for drawing correlated channel vectors.
    /// Dense matrices use the eigendecomposition with negative rounding
    /// noise in the spectrum floored at zero; diagonal ones take entrywise
    /// square roots.
    pub fn sqrt_factor(&self) -> SqrtFactor {
        match &self.storage {
            Storage::Diagonal(v) => SqrtFactor::Diagonal(v.map(|x| x.max(0.0).sqrt())),
            Storage::Dense(m) => {
                let eig = m.clone().symmetric_eigen();
                let mut factor = eig.eigenvectors;
                for (j, lambda) in eig.eigenvalues.iter().enumerate() {
                    let s = lambda.max(0.0).sqrt();
                    factor.column_mut(j).scale_mut(s);
                }
                SqrtFactor::Dense(factor)
            }
        }
    }
}

/// Square-root factor of a covariance matrix: R = F·Fᴴ.
#[derive(Clone, Debug)]
pub enum SqrtFactor {
    Dense(DMatrix<Complex64>),
    Diagonal(DVector<f64>),
}

impl SqrtFactor {
    /// Applies the factor to a vector: F·x.
    pub fn apply(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        match self {
            SqrtFactor::Dense(f) => f * x,
            SqrtFactor::Diagonal(d) => {
                DVector::from_iterator(d.len(), d.iter().zip(x.iter()).map(|(s, z)| z * *s))
            }
        }
    }
}
