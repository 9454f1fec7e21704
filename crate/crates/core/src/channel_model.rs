//! Uniform linear array channel model.
//!
//! A user's link to a base station is described by an [`AngularProfile`]:
//! the nominal angle of arrival, the half-width of the spread in the
//! electrical-angle (ω) domain and the spread law. From it we build the
//! structured covariance `R = D_a B D_aᴴ`, where `D_a = diag(a(ω̄))` and `B`
//! is the Toeplitz spread kernel, and draw correlated Rayleigh channels
//! `h ~ CN(0, α R)`.
//!
//! Electrical angle and physical angle are related by `ω = 2π d sin θ` with
//! the element spacing `d` expressed in wavelengths.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};

/// Channel realization seen at an M-element array.
pub type ChannelVector = CVec;

/// Tolerance used when checking the PSD invariant, relative to λ_max.
pub const PSD_TOLERANCE: f64 = 1e-10;
/// Tolerance on the Hermitian defect of a covariance.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

/// Distribution of the electrical angle around its nominal value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpreadLaw {
    /// ω ~ N(ω̄, σ_ω²) with σ_ω = √3 δ_ω.
    GaussianSpread,
    /// ω ~ U[ω̄ − δ_ω, ω̄ + δ_ω].
    UniformSpread,
}

/// Angular parameters of one user-to-base-station link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularProfile {
    /// Nominal angle of arrival θ in radians, within [−π/2, π/2].
    pub theta: f64,
    /// Half-width δ_ω of the ω-domain spread, radians.
    pub delta_omega: f64,
    pub law: SpreadLaw,
    /// Element spacing in wavelengths.
    pub spacing: f64,
}

impl AngularProfile {
    pub fn new(theta: f64, delta_omega: f64, law: SpreadLaw, spacing: f64) -> Result<Self> {
        if !(theta.is_finite() && (-PI / 2.0..=PI / 2.0).contains(&theta)) {
            return Err(Error::InvalidParameter(format!(
                "angle of arrival {theta} outside [-pi/2, pi/2]"
            )));
        }
        if !(delta_omega.is_finite() && delta_omega >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "spread half-width {delta_omega} must be >= 0"
            )));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "antenna spacing {spacing} must be > 0"
            )));
        }
        Ok(Self {
            theta,
            delta_omega,
            law,
            spacing,
        })
    }

    /// Profile for a user whose paths arrive uniformly from the physical
    /// sector `[θ − Δ, θ + Δ]`. The ω-domain half-width is the exact image of
    /// that sector, `π d |sin(θ + Δ) − sin(θ − Δ)|`.
    pub fn from_sector(theta: f64, half_width: f64, law: SpreadLaw, spacing: f64) -> Result<Self> {
        if !(half_width.is_finite() && half_width >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sector half-width {half_width} must be >= 0"
            )));
        }
        let delta_omega =
            PI * spacing * ((theta + half_width).sin() - (theta - half_width).sin()).abs();
        Self::new(theta, delta_omega, law, spacing)
    }

    /// Nominal electrical angle ω̄ = 2π d sin θ.
    pub fn mean_omega(&self) -> f64 {
        2.0 * PI * self.spacing * self.theta.sin()
    }

    /// Standard deviation of the Gaussian law, σ_ω = √3 δ_ω.
    pub fn sigma_omega(&self) -> f64 {
        3f64.sqrt() * self.delta_omega
    }

    /// Entry of the spread kernel B at lag `m − n`.
    pub fn kernel(&self, lag: i64) -> f64 {
        if lag == 0 {
            return 1.0;
        }
        let k = lag as f64;
        match self.law {
            SpreadLaw::UniformSpread => {
                let x = k * self.delta_omega;
                if x == 0.0 {
                    1.0
                } else {
                    x.sin() / x
                }
            }
            SpreadLaw::GaussianSpread => {
                let x = k * self.sigma_omega();
                (-x * x / 2.0).exp()
            }
        }
    }

    /// Draw one electrical angle from the profile's law.
    pub fn sample_omega<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let center = self.mean_omega();
        match self.law {
            SpreadLaw::UniformSpread => {
                if self.delta_omega == 0.0 {
                    center
                } else {
                    rng.random_range(center - self.delta_omega..=center + self.delta_omega)
                }
            }
            SpreadLaw::GaussianSpread => {
                let z: f64 = rng.sample(StandardNormal);
                center + self.sigma_omega() * z
            }
        }
    }
}

/// Hermitian PSD channel covariance `R` together with its attenuation α.
/// The channel it describes is `CN(0, α R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    entries: CMat,
    attenuation: f64,
}

impl CovarianceMatrix {
    /// Validates the Hermitian and PSD invariants.
    pub fn new(entries: CMat, attenuation: f64) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(Error::InvalidDimension(format!(
                "covariance must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if !(attenuation.is_finite() && attenuation >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "attenuation {attenuation} must be >= 0"
            )));
        }
        if entries
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NumericalDomain(
                "covariance has non-finite entries".into(),
            ));
        }
        let scale = entries.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(1.0);
        if linalg::hermitian_defect(&entries) > HERMITIAN_TOLERANCE * scale {
            return Err(Error::NumericalDomain("covariance is not Hermitian".into()));
        }
        let (values, _) = linalg::hermitian_eigen(&entries);
        let top = values.first().copied().unwrap_or(0.0).max(0.0);
        if values
            .iter()
            .any(|&v| v < -PSD_TOLERANCE * top.max(f64::MIN_POSITIVE))
        {
            return Err(Error::NumericalDomain(
                "covariance is not positive semidefinite".into(),
            ));
        }
        Ok(Self {
            entries,
            attenuation,
        })
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn from_trusted(entries: CMat, attenuation: f64) -> Self {
        Self {
            entries,
            attenuation,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_trusted(CMat::zeros(dim, dim), 1.0)
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_trusted(linalg::identity(dim), 1.0)
    }

    /// Sum of the effective covariances `Σ α_i R_i`, returned with unit attenuation.
    pub fn sum<'a, I>(dim: usize, items: I) -> Self
    where
        I: IntoIterator<Item = &'a CovarianceMatrix>,
    {
        let mut acc = CMat::zeros(dim, dim);
        for c in items {
            acc += c.matrix();
        }
        Self::from_trusted(acc, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// The unscaled structure `R`.
    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn attenuation(&self) -> f64 {
        self.attenuation
    }

    pub fn with_attenuation(mut self, attenuation: f64) -> Self {
        self.attenuation = attenuation;
        self
    }

    /// The effective covariance `α R`.
    pub fn matrix(&self) -> CMat {
        if self.attenuation == 1.0 {
            self.entries.clone()
        } else {
            linalg::real_scale(&self.entries, self.attenuation)
        }
    }

    /// tr(α R).
    pub fn trace(&self) -> f64 {
        self.attenuation * linalg::trace_re(&self.entries)
    }

    /// Eigenvalues of `α R` in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigen(&self.matrix()).0
    }
}

/// ULA response `a(ω) = [1, e^{−jω}, …, e^{−j(M−1)ω}]ᵀ`.
pub fn steering_vector(omega: f64, antennas: usize) -> Result<ChannelVector> {
    if antennas == 0 {
        return Err(Error::InvalidDimension("antenna count must be >= 1".into()));
    }
    Ok(CVec::from_fn(antennas, |k, _| {
        if k == 0 {
            linalg::ONE
        } else {
            Complex64::from_polar(1.0, -(k as f64) * omega)
        }
    }))
}

/// Structured covariance `D_a B D_aᴴ` of a link with the given profile.
///
/// The diagonal is exactly one and the result is exactly Hermitian. With
/// `δ_ω = 0` the result is the rank-one `a(ω̄) a(ω̄)ᴴ`.
pub fn spread_covariance(profile: &AngularProfile, antennas: usize) -> Result<CovarianceMatrix> {
    let a = steering_vector(profile.mean_omega(), antennas)?;
    let kernel: Vec<f64> = (0..antennas as i64)
        .map(|lag| profile.kernel(lag))
        .collect();
    let mut r = CMat::zeros(antennas, antennas);
    for m in 0..antennas {
        r[(m, m)] = linalg::ONE;
        for n in 0..m {
            let v = a[m] * a[n].conj() * kernel[m - n];
            r[(m, n)] = v;
            r[(n, m)] = v.conj();
        }
    }
    Ok(CovarianceMatrix::from_trusted(r, 1.0))
}

/// Square-root factor for drawing `CN(0, α R)` channels.
///
/// The factor is `V diag(√λ⁺)` from the eigendecomposition of `α R`, with
/// slightly negative eigenvalues clipped to zero, so rank-deficient
/// covariances sample correctly.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    factor: CMat,
}

impl ChannelSampler {
    pub fn new(cov: &CovarianceMatrix) -> Result<Self> {
        let effective = cov.matrix();
        let n = effective.nrows();
        let (values, vectors) = linalg::hermitian_eigen(&effective);
        let top = values.first().copied().unwrap_or(0.0).max(0.0);
        if values
            .iter()
            .any(|&v| v < -PSD_TOLERANCE * top.max(f64::MIN_POSITIVE))
        {
            return Err(Error::NumericalDomain(
                "cannot sample from a covariance that is not PSD".into(),
            ));
        }
        let mut factor = vectors;
        for (c, &v) in values.iter().enumerate() {
            let s = v.max(0.0).sqrt();
            for r in 0..n {
                factor[(r, c)] *= s;
            }
        }
        Ok(Self { factor })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelVector {
        let w = linalg::complex_gaussian(self.factor.ncols(), 1.0, rng);
        &self.factor * w
    }
}

/// Draw one channel `h ~ CN(0, α R)`.
pub fn sample_channel<R: Rng + ?Sized>(
    cov: &CovarianceMatrix,
    rng: &mut R,
) -> Result<ChannelVector> {
    Ok(ChannelSampler::new(cov)?.sample(rng))
}

/// Deterministic multipath sum `Σ γ_i a(ω_i)`.
pub fn multipath_sum(
    gains: &[Complex64],
    omegas: &[f64],
    antennas: usize,
) -> Result<ChannelVector> {
    if gains.len() != omegas.len() {
        return Err(Error::InvalidDimension(format!(
            "{} gains for {} path angles",
            gains.len(),
            omegas.len()
        )));
    }
    let mut h = CVec::zeros(antennas);
    for (&g, &w) in gains.iter().zip(omegas) {
        h += steering_vector(w, antennas)? * g;
    }
    Ok(h)
}

/// Draw a Q-path channel with gains `γ_i ~ CN(0, 1/Q)` and path angles from
/// the profile's law. Its covariance converges to [`spread_covariance`].
pub fn multipath_channel<R: Rng + ?Sized>(
    profile: &AngularProfile,
    antennas: usize,
    paths: usize,
    rng: &mut R,
) -> Result<ChannelVector> {
    if paths == 0 {
        return Err(Error::InvalidParameter("path count must be >= 1".into()));
    }
    let gains = linalg::complex_gaussian(paths, 1.0 / paths as f64, rng);
    let omegas: Vec<f64> = (0..paths).map(|_| profile.sample_omega(rng)).collect();
    multipath_sum(gains.as_slice(), &omegas, antennas)
}

/// Fraction of dimensions needed to hold `energy_threshold` of the trace:
/// the count of largest eigenvalues whose sum reaches the threshold, over M.
pub fn effective_rank_fraction(cov: &CovarianceMatrix, energy_threshold: f64) -> Result<f64> {
    if !(energy_threshold > 0.0 && energy_threshold < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "energy threshold {energy_threshold} must lie in (0, 1)"
        )));
    }
    let values = cov.eigenvalues();
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
    let m = values.len();
    if total <= 0.0 {
        return Ok(0.0);
    }
    let target = energy_threshold * total * (1.0 - 1e-12);
    let mut acc = 0.0;
    for (i, v) in values.iter().enumerate() {
        acc += v.max(0.0);
        if acc >= target {
            return Ok((i + 1) as f64 / m as f64);
        }
    }
    Ok(1.0)
}

/// Asymptotic normalized rank `min{1, |d sin(θ − Δ) − d sin(θ + Δ)|}` of a
/// link whose paths span the physical sector `θ ± Δ`.
pub fn asymptotic_rank_fraction(spacing: f64, theta: f64, half_width: f64) -> f64 {
    (spacing * (theta - half_width).sin() - spacing * (theta + half_width).sin())
        .abs()
        .min(1.0)
}
