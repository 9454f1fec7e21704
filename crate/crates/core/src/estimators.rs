//! Linear MMSE-family channel estimators in the matched-filter domain.
//!
//! Every filter here is an `M × M` matrix applied to the compressed
//! observation `z = h_target + Σ h_interferer + ñ`, `ñ ~ CN(0, σ²/P_t I)`.
//! With unit-power pilot symbols `P_t = τ`, so the effective noise level is
//! the familiar `σ²/τ`. Functions below take that training energy as
//! `pilot_energy`.
//!
//! Three estimators are provided:
//!
//! - NMMSE ignores interference: `G = R_t (R_t + σ²/τ I)⁻¹`.
//! - MMSE knows the co-pilot interference: `G = R_t (R_t + R_Σ + σ²/τ I)⁻¹`.
//! - CMMSE limits how much interference leaks into the estimate. It searches
//!   the family `G(ζ₁) = γ R_t (R_t + ζ₁ R_Σ + ζ₂ I)⁻¹` for the smallest
//!   multiplier ζ₁ that meets the contamination threshold, then scales by
//!   γ so the filter uses its whole power budget.

use serde::{Deserialize, Serialize};

use crate::channel_model::{ChannelVector, CovarianceMatrix};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "NMMSE")]
    Nmmse,
    #[serde(rename = "MMSE")]
    Mmse,
    #[serde(rename = "CMMSE")]
    Cmmse,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [
        EstimatorKind::Nmmse,
        EstimatorKind::Mmse,
        EstimatorKind::Cmmse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Nmmse => "NMMSE",
            EstimatorKind::Mmse => "MMSE",
            EstimatorKind::Cmmse => "CMMSE",
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "NMMSE" => Ok(EstimatorKind::Nmmse),
            "MMSE" => Ok(EstimatorKind::Mmse),
            "CMMSE" => Ok(EstimatorKind::Cmmse),
            other => Err(Error::InvalidParameter(format!(
                "unknown estimator {other:?}"
            ))),
        }
    }
}

/// An `M × M` estimation filter plus the multipliers that produced it.
///
/// For NMMSE and MMSE, `gamma = 1` and both multipliers are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorFilter {
    pub matrix: CMat,
    pub gamma: f64,
    pub zeta1: f64,
    pub zeta2: f64,
    pub kind: EstimatorKind,
    /// Set when ζ₂ hit its positivity floor during the multiplier search.
    pub zeta2_clamped: bool,
}

impl EstimatorFilter {
    fn unconstrained(matrix: CMat, kind: EstimatorKind) -> Self {
        Self {
            matrix,
            gamma: 1.0,
            zeta1: 0.0,
            zeta2: 0.0,
            kind,
            zeta2_clamped: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// The matrix actually applied to `z`, i.e. `γ⁻¹ G`.
    pub fn effective_matrix(&self) -> CMat {
        if self.gamma == 1.0 {
            self.matrix.clone()
        } else {
            linalg::real_scale(&self.matrix, 1.0 / self.gamma)
        }
    }

    /// tr(G Gᴴ).
    pub fn power(&self) -> f64 {
        linalg::frobenius_sq(&self.matrix)
    }
}

/// Settings of the contamination-constrained estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CmmseConfig {
    /// C_th, the contamination the primary base station tolerates.
    pub contamination_threshold: f64,
    /// Filter power budget P in `tr(G Gᴴ) ≤ P`. `None` selects `M / σ²`,
    /// which makes the ζ₁ = 0 member of the family the NMMSE filter.
    pub filter_power_budget: Option<f64>,
    /// Relative slack allowed between the achieved contamination and C_th
    /// when the constraint is active.
    pub multiplier_tolerance: f64,
    pub max_bisection_iters: usize,
}

impl Default for CmmseConfig {
    fn default() -> Self {
        Self {
            contamination_threshold: 10.0,
            filter_power_budget: None,
            multiplier_tolerance: 1e-6,
            max_bisection_iters: 200,
        }
    }
}

impl CmmseConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.contamination_threshold) {
            return Err(Error::InvalidParameter(
                "contamination threshold must be > 0".into(),
            ));
        }
        if let Some(p) = self.filter_power_budget {
            if !positive(p) {
                return Err(Error::InvalidParameter(
                    "filter power budget must be > 0".into(),
                ));
            }
        }
        if !positive(self.multiplier_tolerance) || self.max_bisection_iters == 0 {
            return Err(Error::InvalidParameter(
                "multiplier tolerance and iteration budget must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn power_budget(&self, antennas: usize, noise_var: f64) -> f64 {
        self.filter_power_budget
            .unwrap_or(antennas as f64 / noise_var)
    }
}

fn check_noise(noise_var: f64, pilot_energy: f64) -> Result<f64> {
    if !(noise_var.is_finite() && noise_var > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise variance {noise_var} must be > 0"
        )));
    }
    if !(pilot_energy.is_finite() && pilot_energy > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "pilot energy {pilot_energy} must be > 0"
        )));
    }
    Ok(noise_var / pilot_energy)
}

fn check_same_dim(a: &CovarianceMatrix, b: &CovarianceMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::InvalidDimension(format!(
            "covariances of size {} and {} do not match",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// `R_t (R_t + ζ₁ R_Σ + ζ₂ I)⁻¹`, computed as `((A⁻¹ R_t))ᴴ` with A Hermitian.
pub fn filter_family(
    r_target: &CMat,
    r_interference: &CMat,
    zeta1: f64,
    zeta2: f64,
) -> Result<CMat> {
    let n = r_target.nrows();
    let mut a = r_target + linalg::real_scale(r_interference, zeta1);
    for i in 0..n {
        a[(i, i)] += zeta2;
    }
    Ok(linalg::solve_hermitian(&a, r_target)?.adjoint())
}

/// NMMSE: `R (R + σ²/τ I)⁻¹`.
pub fn nmmse_filter(
    r_target: &CovarianceMatrix,
    noise_var: f64,
    pilot_energy: f64,
) -> Result<EstimatorFilter> {
    let s = check_noise(noise_var, pilot_energy)?;
    let r = r_target.matrix();
    let g = filter_family(&r, &CMat::zeros(r.nrows(), r.ncols()), 0.0, s)?;
    Ok(EstimatorFilter::unconstrained(g, EstimatorKind::Nmmse))
}

/// MMSE: `R_t (R_t + R_Σ + σ²/τ I)⁻¹`.
pub fn mmse_filter(
    r_target: &CovarianceMatrix,
    r_interference: &CovarianceMatrix,
    noise_var: f64,
    pilot_energy: f64,
) -> Result<EstimatorFilter> {
    check_same_dim(r_target, r_interference)?;
    let s = check_noise(noise_var, pilot_energy)?;
    let g = filter_family(&r_target.matrix(), &r_interference.matrix(), 1.0, s)?;
    Ok(EstimatorFilter::unconstrained(g, EstimatorKind::Mmse))
}

/// ζ₂ tied to ζ₁: `(M σ² − 2 C_th ζ₁) / (σ² τ P)`.
pub fn zeta2_for(
    zeta1: f64,
    antennas: usize,
    noise_var: f64,
    pilot_energy: f64,
    threshold: f64,
    power_budget: f64,
) -> f64 {
    // ζ₁ first so a huge C_th at ζ₁ = 0 gives 0, not ∞ · 0.
    (antennas as f64 * noise_var - zeta1 * threshold * 2.0)
        / (noise_var * pilot_energy * power_budget)
}

/// Contamination the filter lets through: `τ tr(G R_Σ Gᴴ)`.
pub fn contamination_level(
    filter: &EstimatorFilter,
    r_interference: &CovarianceMatrix,
    pilot_energy: f64,
) -> f64 {
    matrix_contamination(&filter.matrix, &r_interference.matrix(), pilot_energy)
}

fn matrix_contamination(g: &CMat, r_interference: &CMat, pilot_energy: f64) -> f64 {
    let inner = g * r_interference * g.adjoint();
    pilot_energy * linalg::trace_re(&inner)
}

/// State of the multiplier search at one value of ζ₁.
struct FamilyPoint {
    unscaled: CMat,
    zeta2: f64,
    clamped: bool,
    /// Contamination after scaling to the power budget.
    level: f64,
}

struct CmmseProblem {
    r_target: CMat,
    r_interference: CMat,
    antennas: usize,
    noise_var: f64,
    pilot_energy: f64,
    threshold: f64,
    power_budget: f64,
    zeta2_floor: f64,
}

impl CmmseProblem {
    fn at(&self, zeta1: f64) -> Result<FamilyPoint> {
        let raw = zeta2_for(
            zeta1,
            self.antennas,
            self.noise_var,
            self.pilot_energy,
            self.threshold,
            self.power_budget,
        );
        let (zeta2, clamped) = if raw < self.zeta2_floor {
            (self.zeta2_floor, true)
        } else {
            (raw, false)
        };
        let unscaled = filter_family(&self.r_target, &self.r_interference, zeta1, zeta2)?;
        let power = linalg::frobenius_sq(&unscaled);
        let level = if power > 0.0 {
            self.power_budget / power
                * matrix_contamination(&unscaled, &self.r_interference, self.pilot_energy)
        } else {
            0.0
        };
        Ok(FamilyPoint {
            unscaled,
            zeta2,
            clamped,
            level,
        })
    }

    fn finish(&self, zeta1: f64, point: FamilyPoint, clamped_seen: bool) -> EstimatorFilter {
        let power = linalg::frobenius_sq(&point.unscaled);
        let gamma = (self.power_budget / power).sqrt();
        EstimatorFilter {
            matrix: linalg::real_scale(&point.unscaled, gamma),
            gamma,
            zeta1,
            zeta2: point.zeta2,
            kind: EstimatorKind::Cmmse,
            zeta2_clamped: clamped_seen || point.clamped,
        }
    }
}

/// Contamination-constrained MMSE filter.
///
/// Returns ζ₁ = 0 when the ζ₁ = 0 member already meets C_th. Otherwise the
/// upper end of the bracket `[0, 1]` is doubled (at most 64 times) until the
/// constraint holds, and bisection then narrows ζ₁ until the contamination
/// is within `multiplier_tolerance` of C_th from below.
pub fn cmmse_filter(
    r_target: &CovarianceMatrix,
    r_interference: &CovarianceMatrix,
    noise_var: f64,
    pilot_energy: f64,
    cfg: &CmmseConfig,
) -> Result<EstimatorFilter> {
    check_same_dim(r_target, r_interference)?;
    check_noise(noise_var, pilot_energy)?;
    cfg.validate()?;
    let antennas = r_target.dim();
    let target_trace = r_target.trace();
    if target_trace <= 0.0 {
        // Nothing to estimate: the zero filter is optimal and leaks nothing.
        return Ok(EstimatorFilter {
            matrix: CMat::zeros(antennas, antennas),
            gamma: 1.0,
            zeta1: 0.0,
            zeta2: 0.0,
            kind: EstimatorKind::Cmmse,
            zeta2_clamped: false,
        });
    }
    let problem = CmmseProblem {
        r_target: r_target.matrix(),
        r_interference: r_interference.matrix(),
        antennas,
        noise_var,
        pilot_energy,
        threshold: cfg.contamination_threshold,
        power_budget: cfg.power_budget(antennas, noise_var),
        zeta2_floor: 1e-8 * target_trace / antennas as f64,
    };
    let threshold = cfg.contamination_threshold;

    let origin = problem.at(0.0)?;
    if origin.level <= threshold {
        return Ok(problem.finish(0.0, origin, false));
    }

    let mut clamped_seen = origin.clamped;
    let mut lower = 0.0;
    let mut upper = 1.0;
    let mut upper_point = problem.at(upper)?;
    let mut doublings = 0;
    while upper_point.level > threshold {
        clamped_seen |= upper_point.clamped;
        if doublings == 64 {
            return Err(Error::Convergence {
                lower,
                upper,
                iterations: doublings,
            });
        }
        lower = upper;
        upper *= 2.0;
        upper_point = problem.at(upper)?;
        doublings += 1;
    }

    for _ in 0..cfg.max_bisection_iters {
        if threshold - upper_point.level <= cfg.multiplier_tolerance * threshold {
            return Ok(problem.finish(upper, upper_point, clamped_seen));
        }
        let mid = 0.5 * (lower + upper);
        if mid <= lower || mid >= upper {
            break;
        }
        let point = problem.at(mid)?;
        clamped_seen |= point.clamped;
        if point.level <= threshold {
            upper = mid;
            upper_point = point;
        } else {
            lower = mid;
        }
    }
    Err(Error::Convergence {
        lower,
        upper,
        iterations: cfg.max_bisection_iters,
    })
}

/// Constraint function `f = tr((τ P R_Σ − C_th I) G Gᴴ)` for the power-scaled
/// filter; `f ≤ 0` exactly when the contamination constraint holds.
pub fn constraint_function(
    filter: &EstimatorFilter,
    r_interference: &CovarianceMatrix,
    pilot_energy: f64,
    threshold: f64,
    power_budget: f64,
) -> f64 {
    let n = filter.dim();
    let mut weight = linalg::real_scale(&r_interference.matrix(), pilot_energy * power_budget);
    for i in 0..n {
        weight[(i, i)] -= threshold;
    }
    let gram = &filter.matrix * filter.matrix.adjoint();
    linalg::trace_product_re(&weight, &gram) / filter.power().max(f64::MIN_POSITIVE)
}

/// Apply a filter: `ĥ = γ⁻¹ G z`.
pub fn estimate(filter: &EstimatorFilter, z: &ChannelVector) -> Result<ChannelVector> {
    if z.len() != filter.dim() {
        return Err(Error::InvalidDimension(format!(
            "observation has {} entries, filter expects {}",
            z.len(),
            filter.dim()
        )));
    }
    let h = &filter.matrix * z;
    Ok(if filter.gamma == 1.0 {
        h
    } else {
        h.unscale(filter.gamma)
    })
}

fn mmse_error_trace(r_target: &CMat, total: &CMat) -> Result<f64> {
    // tr(R_t − R_t A⁻¹ R_t)
    let x = linalg::solve_hermitian(total, r_target)?;
    Ok(linalg::trace_re(r_target) - linalg::trace_product_re(r_target, &x))
}

fn regularized(mut m: CMat, s: f64) -> CMat {
    for i in 0..m.nrows() {
        m[(i, i)] += s;
    }
    m
}

/// Trace MSE of MMSE estimation at the primary base station,
/// `tr(R_t − R_t² (R_t + R_Σ + σ²/τ I)⁻¹)`.
pub fn analytic_mse_primary(
    r_target: &CovarianceMatrix,
    r_interference: &CovarianceMatrix,
    noise_var: f64,
    pilot_energy: f64,
) -> Result<f64> {
    check_same_dim(r_target, r_interference)?;
    let s = check_noise(noise_var, pilot_energy)?;
    let rt = r_target.matrix();
    let total = regularized(&rt + r_interference.matrix(), s);
    Ok(mmse_error_trace(&rt, &total)?.max(0.0))
}

/// Sum trace MSE over the cognitive users sharing the pilot,
/// `Σ_j tr(R_j − R_j² (R_PS + Σ_l R_l + σ²/τ I)⁻¹)`.
pub fn analytic_mse_cognitive(
    targets: &[CovarianceMatrix],
    r_primary_at_cbs: &CovarianceMatrix,
    noise_var: f64,
    pilot_energy: f64,
) -> Result<f64> {
    if targets.is_empty() {
        return Ok(0.0);
    }
    for t in targets {
        check_same_dim(t, r_primary_at_cbs)?;
    }
    let s = check_noise(noise_var, pilot_energy)?;
    let mut total = r_primary_at_cbs.matrix();
    for t in targets {
        total += t.matrix();
    }
    let total = regularized(total, s);
    let mut sum = 0.0;
    for t in targets {
        sum += mmse_error_trace(&t.matrix(), &total)?.max(0.0);
    }
    Ok(sum)
}

/// Trace MSE as a function of the optimal multiplier,
/// `tr(R_t − R_t² (R_t + ζ* R_Σ + σ²/τ I)⁻¹)`.
pub fn analytic_mse_cmmse(
    r_target: &CovarianceMatrix,
    r_interference: &CovarianceMatrix,
    zeta_star: f64,
    noise_var: f64,
    pilot_energy: f64,
) -> Result<f64> {
    check_same_dim(r_target, r_interference)?;
    if !(zeta_star.is_finite() && zeta_star >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "multiplier {zeta_star} must be >= 0"
        )));
    }
    let s = check_noise(noise_var, pilot_energy)?;
    let rt = r_target.matrix();
    let total = regularized(
        &rt + linalg::real_scale(&r_interference.matrix(), zeta_star),
        s,
    );
    Ok(mmse_error_trace(&rt, &total)?.max(0.0))
}

/// Exact trace MSE `E‖h − W z‖²` of an arbitrary linear filter `W` applied
/// to `z = h + i + ñ` with `h ~ CN(0, R_t)`, `i ~ CN(0, R_Σ)`:
/// `tr((I − W) R_t (I − W)ᴴ) + tr(W (R_Σ + σ²/τ I) Wᴴ)`.
pub fn linear_filter_mse(
    applied: &CMat,
    r_target: &CovarianceMatrix,
    r_interference: &CovarianceMatrix,
    noise_var: f64,
    pilot_energy: f64,
) -> Result<f64> {
    check_same_dim(r_target, r_interference)?;
    if applied.nrows() != r_target.dim() || applied.ncols() != r_target.dim() {
        return Err(Error::InvalidDimension(
            "filter and covariance sizes differ".into(),
        ));
    }
    let s = check_noise(noise_var, pilot_energy)?;
    let n = r_target.dim();
    let residual = linalg::identity(n) - applied;
    let bias = &residual * r_target.matrix() * residual.adjoint();
    let leak = applied * regularized(r_interference.matrix(), s) * applied.adjoint();
    Ok(linalg::trace_re(&bias) + linalg::trace_re(&leak))
}
