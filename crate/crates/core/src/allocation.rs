//! Pilot allocation: which cognitive users (CUs) reuse the primary user's pilot.
//!
//! Four strategies are implemented:
//!
//! - **RPA** picks a uniformly random subset.
//! - **MPA** grows a candidate pool greedily by the primary estimation error,
//!   then selects from the pool greedily by the cognitive estimation error.
//! - **HPA** admits CUs whose subspace overlap with the primary user at the
//!   primary base station is below a threshold, then selects the CUs that
//!   overlap least with each other (and the primary user) at the cognitive
//!   base station.
//! - **UGPA** groups users by chordal distance between their dominant
//!   eigenspaces and a fixed set of group subspaces, then draws CUs from the
//!   groups farthest from the primary user's group.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel_model::{spread_covariance, AngularProfile, CovarianceMatrix};
use crate::error::{Error, Result};
use crate::estimators::{analytic_mse_cognitive, analytic_mse_primary};
use crate::linalg::{self, CMat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AllocatorKind {
    #[serde(rename = "RPA")]
    Rpa,
    #[serde(rename = "MPA")]
    Mpa,
    #[serde(rename = "HPA")]
    Hpa,
    #[serde(rename = "UGPA")]
    Ugpa,
}

impl AllocatorKind {
    pub const ALL: [AllocatorKind; 4] = [
        AllocatorKind::Rpa,
        AllocatorKind::Mpa,
        AllocatorKind::Hpa,
        AllocatorKind::Ugpa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AllocatorKind::Rpa => "RPA",
            AllocatorKind::Mpa => "MPA",
            AllocatorKind::Hpa => "HPA",
            AllocatorKind::Ugpa => "UGPA",
        }
    }
}

impl std::fmt::Display for AllocatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AllocatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RPA" => Ok(AllocatorKind::Rpa),
            "MPA" => Ok(AllocatorKind::Mpa),
            "HPA" => Ok(AllocatorKind::Hpa),
            "UGPA" => Ok(AllocatorKind::Ugpa),
            other => Err(Error::InvalidParameter(format!(
                "unknown allocator {other:?}"
            ))),
        }
    }
}

/// Second-order statistics of one user towards both base stations.
#[derive(Debug, Clone, PartialEq)]
pub struct UserLinks {
    pub pbs: CovarianceMatrix,
    pub cbs: CovarianceMatrix,
}

/// The primary user plus the cognitive users, indexed `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSet {
    pub primary: UserLinks,
    pub cognitive: Vec<UserLinks>,
}

impl UserSet {
    pub fn new(primary: UserLinks, cognitive: Vec<UserLinks>) -> Result<Self> {
        let m = primary.pbs.dim();
        let ok = std::iter::once(&primary)
            .chain(&cognitive)
            .all(|u| u.pbs.dim() == m && u.cbs.dim() == m);
        if !ok {
            return Err(Error::InvalidDimension(
                "all user covariances must share one antenna count".into(),
            ));
        }
        Ok(Self { primary, cognitive })
    }

    pub fn antennas(&self) -> usize {
        self.primary.pbs.dim()
    }

    pub fn num_cognitive(&self) -> usize {
        self.cognitive.len()
    }

    /// Σ_{j∈set} R_SP,j: what the listed CUs inject at the primary base station.
    pub fn interference_at_pbs(&self, set: &[usize]) -> CovarianceMatrix {
        CovarianceMatrix::sum(self.antennas(), set.iter().map(|&j| &self.cognitive[j].pbs))
    }

    /// R_PS + Σ_{l∈set, l≠target} R_SS,l: interference seen when estimating
    /// CU `target` at the cognitive base station.
    pub fn interference_at_cbs(&self, set: &[usize], target: usize) -> CovarianceMatrix {
        CovarianceMatrix::sum(
            self.antennas(),
            std::iter::once(&self.primary.cbs).chain(
                set.iter()
                    .filter(|&&l| l != target)
                    .map(|&l| &self.cognitive[l].cbs),
            ),
        )
    }

    /// Primary trace MSE with the given set sharing the pilot.
    pub fn primary_mse(&self, set: &[usize], noise_var: f64, pilot_energy: f64) -> Result<f64> {
        analytic_mse_primary(
            &self.primary.pbs,
            &self.interference_at_pbs(set),
            noise_var,
            pilot_energy,
        )
    }

    /// Cognitive sum trace MSE with the given set sharing the pilot.
    pub fn cognitive_mse(&self, set: &[usize], noise_var: f64, pilot_energy: f64) -> Result<f64> {
        let targets: Vec<CovarianceMatrix> =
            set.iter().map(|&j| self.cognitive[j].cbs.clone()).collect();
        analytic_mse_cognitive(&targets, &self.primary.cbs, noise_var, pilot_energy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Candidate admitted to protect the primary base station.
    PrimaryProtection,
    /// CU selected for the cognitive base station.
    CognitiveSelection,
    /// CU picked from a user group.
    GroupSelection,
    Random,
}

/// One step of an allocation run. `metric` is the quantity the step
/// minimized (or maximized, for group selection).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationStep {
    pub phase: Phase,
    pub user: usize,
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// CUs that reuse the primary pilot, in selection order.
    pub shared_set: Vec<usize>,
    pub algorithm: AllocatorKind,
    pub diagnostics: Vec<AllocationStep>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Subspace overlap `tr(R_a R_b) / (tr R_a · tr R_b)`, in [0, 1].
pub fn overlap_metric(a: &CovarianceMatrix, b: &CovarianceMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::InvalidDimension(format!(
            "covariances of size {} and {} do not match",
            a.dim(),
            b.dim()
        )));
    }
    let (ta, tb) = (a.trace(), b.trace());
    if ta <= 0.0 || tb <= 0.0 {
        return Err(Error::UndefinedMetric(
            "overlap of a zero-trace covariance".into(),
        ));
    }
    let cross = linalg::trace_product_re(&a.matrix(), &b.matrix());
    Ok((cross / (ta * tb)).clamp(0.0, 1.0))
}

/// Overlap of `r` with the sum of `interferers`; zero when there are none.
pub fn aggregate_overlap<'a, I>(r: &CovarianceMatrix, interferers: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a CovarianceMatrix>,
{
    let items: Vec<&CovarianceMatrix> = interferers.into_iter().collect();
    if items.is_empty() {
        return Ok(0.0);
    }
    let total = CovarianceMatrix::sum(r.dim(), items);
    overlap_metric(r, &total)
}

const BASIS_TOLERANCE: f64 = 1e-8;

fn check_basis(u: &CMat) -> Result<()> {
    let gram = u.ad_mul(u);
    let defect = (gram - linalg::identity(u.ncols()))
        .iter()
        .fold(0.0f64, |m, z| m.max(z.norm()));
    if defect > BASIS_TOLERANCE {
        return Err(Error::InvalidBasis(format!(
            "columns are not orthonormal (defect {defect:.3e})"
        )));
    }
    Ok(())
}

/// Chordal distance `‖U Uᴴ − V Vᴴ‖_F²` between two orthonormal bases.
pub fn chordal_distance(u: &CMat, v: &CMat) -> Result<f64> {
    if u.shape() != v.shape() {
        return Err(Error::InvalidDimension(format!(
            "bases of shape {:?} and {:?} differ",
            u.shape(),
            v.shape()
        )));
    }
    check_basis(u)?;
    check_basis(v)?;
    Ok(linalg::frobenius_sq(&(u * u.adjoint() - v * v.adjoint())))
}

/// The `rank` eigenvectors of the largest eigenvalues, as columns.
pub fn dominant_eigenbasis(cov: &CovarianceMatrix, rank: usize) -> Result<CMat> {
    if rank == 0 || rank > cov.dim() {
        return Err(Error::InvalidParameter(format!(
            "basis rank {rank} must lie in 1..={}",
            cov.dim()
        )));
    }
    let (_, vectors) = linalg::hermitian_eigen(&cov.matrix());
    Ok(vectors.columns(0, rank).into_owned())
}

/// Smallest rank holding `energy` of the trace, capped at `max_rank`.
pub fn dominant_rank(cov: &CovarianceMatrix, energy: f64, max_rank: usize) -> usize {
    let values = cov.eigenvalues();
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
    let mut acc = 0.0;
    let mut rank = values.len();
    for (i, v) in values.iter().enumerate() {
        acc += v.max(0.0);
        if acc >= energy * total {
            rank = i + 1;
            break;
        }
    }
    rank.clamp(1, max_rank.max(1))
}

/// Pick `groups` subspaces from candidate sector profiles by greedy
/// max-min chordal distance, seeded with the first candidate.
pub fn select_group_subspaces(
    candidates: &[AngularProfile],
    antennas: usize,
    groups: usize,
    rank: usize,
) -> Result<Vec<CMat>> {
    if groups == 0 {
        return Err(Error::InvalidParameter("group count must be >= 1".into()));
    }
    if candidates.len() < groups {
        return Err(Error::InvalidParameter(format!(
            "{} candidate profiles cannot provide {groups} groups",
            candidates.len()
        )));
    }
    let bases = candidates
        .iter()
        .map(|p| dominant_eigenbasis(&spread_covariance(p, antennas)?, rank))
        .collect::<Result<Vec<_>>>()?;
    let mut chosen = vec![0usize];
    let mut nearest: Vec<f64> = bases
        .iter()
        .map(|b| chordal_distance(b, &bases[0]))
        .collect::<Result<_>>()?;
    while chosen.len() < groups {
        let mut best: Option<(usize, f64)> = None;
        for (i, &d) in nearest.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        let (pick, _) = best.expect("enough candidates checked above");
        chosen.push(pick);
        for (i, b) in bases.iter().enumerate() {
            nearest[i] = nearest[i].min(chordal_distance(b, &bases[pick])?);
        }
    }
    Ok(chosen.into_iter().map(|i| bases[i].clone()).collect())
}

/// Assign each user basis to the group subspace at minimum chordal distance
/// (ties to the lowest group index).
pub fn group_users(user_bases: &[CMat], group_subspaces: &[CMat]) -> Result<Vec<usize>> {
    if group_subspaces.is_empty() {
        return Err(Error::InvalidParameter("no group subspaces given".into()));
    }
    user_bases
        .iter()
        .map(|u| {
            let mut best = (0usize, f64::INFINITY);
            for (g, q) in group_subspaces.iter().enumerate() {
                let d = chordal_distance(u, q)?;
                if d < best.1 {
                    best = (g, d);
                }
            }
            Ok(best.0)
        })
        .collect()
}

/// Grouping of all users relative to one base station.
#[derive(Debug, Clone, PartialEq)]
pub struct SideGrouping {
    pub subspaces: Vec<CMat>,
    pub primary_group: usize,
    /// Group index of each CU.
    pub cognitive_groups: Vec<usize>,
}

impl SideGrouping {
    fn build(
        primary: &CovarianceMatrix,
        cognitive: &[&CovarianceMatrix],
        subspaces: Vec<CMat>,
    ) -> Result<Self> {
        let rank = subspaces
            .first()
            .map(|q| q.ncols())
            .ok_or_else(|| Error::InvalidParameter("no group subspaces given".into()))?;
        let primary_basis = dominant_eigenbasis(primary, rank)?;
        let primary_group = group_users(std::slice::from_ref(&primary_basis), &subspaces)?[0];
        let bases = cognitive
            .iter()
            .map(|c| dominant_eigenbasis(c, rank))
            .collect::<Result<Vec<_>>>()?;
        let cognitive_groups = group_users(&bases, &subspaces)?;
        Ok(Self {
            subspaces,
            primary_group,
            cognitive_groups,
        })
    }

    pub fn num_groups(&self) -> usize {
        self.subspaces.len()
    }

    /// CUs in group `g`, ascending.
    pub fn members(&self, g: usize) -> Vec<usize> {
        self.cognitive_groups
            .iter()
            .enumerate()
            .filter(|(_, &gg)| gg == g)
            .map(|(j, _)| j)
            .collect()
    }
}

/// User groups at the primary (SP) and cognitive (SS) base stations.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupingResult {
    pub sp: SideGrouping,
    pub ss: SideGrouping,
}

impl GroupingResult {
    pub fn build(
        users: &UserSet,
        sp_subspaces: Vec<CMat>,
        ss_subspaces: Vec<CMat>,
    ) -> Result<Self> {
        let at_pbs: Vec<&CovarianceMatrix> = users.cognitive.iter().map(|u| &u.pbs).collect();
        let at_cbs: Vec<&CovarianceMatrix> = users.cognitive.iter().map(|u| &u.cbs).collect();
        Ok(Self {
            sp: SideGrouping::build(&users.primary.pbs, &at_pbs, sp_subspaces)?,
            ss: SideGrouping::build(&users.primary.cbs, &at_cbs, ss_subspaces)?,
        })
    }
}

fn check_reuse(users: &UserSet, reuse_count: usize) -> Result<()> {
    if reuse_count > users.num_cognitive() {
        return Err(Error::InvalidParameter(format!(
            "reuse count {reuse_count} exceeds the {} cognitive users",
            users.num_cognitive()
        )));
    }
    Ok(())
}

/// Uniformly random `reuse_count`-subset of the CUs.
pub fn allocate_rpa<R: Rng + ?Sized>(
    users: &UserSet,
    reuse_count: usize,
    rng: &mut R,
) -> Result<Allocation> {
    check_reuse(users, reuse_count)?;
    let mut set = rand::seq::index::sample(rng, users.num_cognitive(), reuse_count).into_vec();
    set.sort_unstable();
    let diagnostics = set
        .iter()
        .map(|&user| AllocationStep {
            phase: Phase::Random,
            user,
            metric: f64::NAN,
        })
        .collect();
    Ok(Allocation {
        shared_set: set,
        algorithm: AllocatorKind::Rpa,
        diagnostics,
        notes: Vec::new(),
    })
}

/// Index and value of the smallest score; ties go to the earliest entry.
fn argmin<I: IntoIterator<Item = (usize, f64)>>(scores: I) -> Option<(usize, f64)> {
    scores.into_iter().fold(None, |best, (i, s)| match best {
        Some((_, bs)) if s.partial_cmp(&bs) != Some(Ordering::Less) => best,
        _ => Some((i, s)),
    })
}

/// Greedy MSE-driven allocation with the candidate pool capped at
/// `reuse_count`.
pub fn allocate_mpa(
    users: &UserSet,
    reuse_count: usize,
    zeta_th: f64,
    noise_var: f64,
    pilot_energy: f64,
) -> Result<Allocation> {
    allocate_mpa_pooled(
        users,
        reuse_count,
        zeta_th,
        reuse_count,
        noise_var,
        pilot_energy,
    )
}

/// Greedy MSE-driven allocation.
///
/// Phase 1 grows the pool 𝒰 one CU at a time, always adding the CU that
/// keeps the primary trace MSE η_p lowest, until the pool holds `pool_limit`
/// CUs, candidates run out, or the best addition would reach `zeta_th`.
/// Phase 2 picks up to `reuse_count` CUs from 𝒰, each time the one that
/// keeps the cognitive sum MSE η_s of the selection lowest.
pub fn allocate_mpa_pooled(
    users: &UserSet,
    reuse_count: usize,
    zeta_th: f64,
    pool_limit: usize,
    noise_var: f64,
    pilot_energy: f64,
) -> Result<Allocation> {
    let mut diagnostics = Vec::new();

    let mut pool: Vec<usize> = Vec::new();
    let mut remaining: Vec<usize> = (0..users.num_cognitive()).collect();
    while pool.len() < pool_limit && !remaining.is_empty() {
        let scores = remaining
            .iter()
            .map(|&j| {
                let mut trial = pool.clone();
                trial.push(j);
                Ok((j, users.primary_mse(&trial, noise_var, pilot_energy)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let (best, eta) = argmin(scores).expect("remaining is non-empty");
        if eta >= zeta_th {
            break;
        }
        pool.push(best);
        remaining.retain(|&j| j != best);
        diagnostics.push(AllocationStep {
            phase: Phase::PrimaryProtection,
            user: best,
            metric: eta,
        });
    }

    let mut selected: Vec<usize> = Vec::new();
    let mut candidates = pool;
    while selected.len() < reuse_count && !candidates.is_empty() {
        let scores = candidates
            .iter()
            .map(|&k| {
                let mut trial = selected.clone();
                trial.push(k);
                Ok((k, users.cognitive_mse(&trial, noise_var, pilot_energy)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let (best, eta) = argmin(scores).expect("candidates is non-empty");
        selected.push(best);
        candidates.retain(|&k| k != best);
        diagnostics.push(AllocationStep {
            phase: Phase::CognitiveSelection,
            user: best,
            metric: eta,
        });
    }

    Ok(Allocation {
        shared_set: selected,
        algorithm: AllocatorKind::Mpa,
        diagnostics,
        notes: Vec::new(),
    })
}

/// Threshold-based heuristic allocation.
///
/// The pool holds every CU whose overlap with the primary user at the
/// primary base station is at most `delta_p`. From the pool, CUs are added
/// one at a time by least aggregate overlap, at the cognitive base station,
/// with the primary user and the CUs already chosen; ties go to the smaller
/// primary-side overlap, then the lower index.
pub fn allocate_hpa(users: &UserSet, reuse_count: usize, delta_p: f64) -> Result<Allocation> {
    if !(0.0..=1.0).contains(&delta_p) {
        return Err(Error::InvalidParameter(format!(
            "overlap threshold {delta_p} must lie in [0, 1]"
        )));
    }
    let mut diagnostics = Vec::new();
    let mut pool: Vec<(usize, f64)> = Vec::new();
    for (j, u) in users.cognitive.iter().enumerate() {
        let delta = overlap_metric(&users.primary.pbs, &u.pbs)?;
        if delta <= delta_p {
            pool.push((j, delta));
            diagnostics.push(AllocationStep {
                phase: Phase::PrimaryProtection,
                user: j,
                metric: delta,
            });
        }
    }

    let mut selected: Vec<usize> = Vec::new();
    while selected.len() < reuse_count && !pool.is_empty() {
        let mut best: Option<(usize, f64, f64)> = None;
        for (slot, &(k, delta)) in pool.iter().enumerate() {
            let others = std::iter::once(&users.primary.cbs)
                .chain(selected.iter().map(|&l| &users.cognitive[l].cbs));
            let score = aggregate_overlap(&users.cognitive[k].cbs, others)?;
            let better = match best {
                None => true,
                Some((_, bs, bd)) => score < bs || (score == bs && delta < bd),
            };
            if better {
                best = Some((slot, score, delta));
            }
        }
        let (slot, score, _) = best.expect("pool is non-empty");
        let (user, _) = pool.remove(slot);
        selected.push(user);
        diagnostics.push(AllocationStep {
            phase: Phase::CognitiveSelection,
            user,
            metric: score,
        });
    }

    Ok(Allocation {
        shared_set: selected,
        algorithm: AllocatorKind::Hpa,
        diagnostics,
        notes: Vec::new(),
    })
}

/// Group-based allocation.
///
/// CUs in the primary user's group at the primary base station are
/// excluded. The remaining groups are ranked by chordal distance of their
/// subspace to the primary group's subspace, farthest first, and CUs are
/// drawn round-robin over that ranking. Within a group the pick is the
/// lowest-index CU whose group at the cognitive base station is not yet
/// occupied by the primary user or an earlier pick; failing that, the
/// lowest-index CU left.
pub fn allocate_ugpa(
    users: &UserSet,
    grouping: &GroupingResult,
    reuse_count: usize,
) -> Result<Allocation> {
    check_reuse(users, reuse_count)?;
    let (sp, ss) = (&grouping.sp, &grouping.ss);
    if sp.cognitive_groups.len() != users.num_cognitive()
        || ss.cognitive_groups.len() != users.num_cognitive()
    {
        return Err(Error::InvalidParameter(
            "grouping does not cover every cognitive user".into(),
        ));
    }
    let home = &sp.subspaces[sp.primary_group];
    let mut ranked: Vec<(f64, Vec<usize>)> = Vec::new();
    for g in 0..sp.num_groups() {
        if g == sp.primary_group {
            continue;
        }
        let members = sp.members(g);
        if !members.is_empty() {
            ranked.push((chordal_distance(&sp.subspaces[g], home)?, members));
        }
    }
    // Stable sort keeps the lower group index first among equal distances.
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut occupied = vec![false; ss.num_groups()];
    occupied[ss.primary_group] = true;
    let mut selected = Vec::new();
    let mut diagnostics = Vec::new();
    while selected.len() < reuse_count && ranked.iter().any(|(_, m)| !m.is_empty()) {
        for (distance, members) in ranked.iter_mut() {
            if selected.len() == reuse_count {
                break;
            }
            if members.is_empty() {
                continue;
            }
            let slot = members
                .iter()
                .position(|&j| !occupied[ss.cognitive_groups[j]])
                .unwrap_or(0);
            let user = members.remove(slot);
            occupied[ss.cognitive_groups[user]] = true;
            selected.push(user);
            diagnostics.push(AllocationStep {
                phase: Phase::GroupSelection,
                user,
                metric: *distance,
            });
        }
    }

    Ok(Allocation {
        shared_set: selected,
        algorithm: AllocatorKind::Ugpa,
        diagnostics,
        notes: vec!["groups ranked by maximum chordal distance to the primary group".into()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{CVec, ONE, ZERO};
    use crate::rng::seeded;
    use num_complex::Complex64;

    fn diag(vals: &[f64]) -> CovarianceMatrix {
        let d = CVec::from_iterator(vals.len(), vals.iter().map(|&v| Complex64::new(v, 0.0)));
        CovarianceMatrix::new(CMat::from_diagonal(&d), 1.0).unwrap()
    }

    fn unit(m: usize, k: usize) -> CMat {
        CMat::from_fn(m, 1, |i, _| if i == k { ONE } else { ZERO })
    }

    fn links(pbs: &[f64], cbs: &[f64]) -> UserLinks {
        UserLinks {
            pbs: diag(pbs),
            cbs: diag(cbs),
        }
    }

    #[test]
    fn overlap_examples() {
        let e1 = diag(&[1.0, 0.0]);
        let e2 = diag(&[0.0, 1.0]);
        assert!((overlap_metric(&e1, &e1).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(overlap_metric(&e1, &e2).unwrap(), 0.0);
        let eye = CovarianceMatrix::identity(2);
        assert!((overlap_metric(&eye, &eye).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            overlap_metric(&CovarianceMatrix::zeros(2), &eye),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn aggregate_overlap_examples() {
        let p = diag(&[1.0, 1.0, 0.0]);
        let i = diag(&[0.0, 2.0, 1.0]);
        let single = aggregate_overlap(&p, [&i]).unwrap();
        assert!((single - overlap_metric(&p, &i).unwrap()).abs() < 1e-15);
        assert!((aggregate_overlap(&p, [&i, &i]).unwrap() - single).abs() < 1e-15);
        assert_eq!(
            aggregate_overlap(&p, [&diag(&[0.0, 0.0, 1.0])]).unwrap(),
            0.0
        );
        assert_eq!(aggregate_overlap(&p, []).unwrap(), 0.0);
    }

    #[test]
    fn chordal_examples() {
        let e1 = unit(2, 0);
        let e2 = unit(2, 1);
        assert!(chordal_distance(&e1, &e1).unwrap().abs() < 1e-15);
        assert!((chordal_distance(&e1, &e2).unwrap() - 2.0).abs() < 1e-15);
        let mix = (unit(2, 0) + unit(2, 1)).unscale(2f64.sqrt());
        assert!((chordal_distance(&e1, &mix).unwrap() - 1.0).abs() < 1e-12);
        let bad = unit(2, 0).scale(1.5);
        assert!(matches!(
            chordal_distance(&bad, &e1),
            Err(Error::InvalidBasis(_))
        ));
    }

    #[test]
    fn dominant_basis_of_diagonal() {
        let b = dominant_eigenbasis(&diag(&[3.0, 2.0, 1.0]), 2).unwrap();
        let mut proj = CMat::zeros(3, 3);
        proj[(0, 0)] = ONE;
        proj[(1, 1)] = ONE;
        assert!((&b * b.adjoint() - proj).norm() < 1e-12);
        assert!(dominant_eigenbasis(&diag(&[1.0]), 2).is_err());
    }

    #[test]
    fn group_selection_examples() {
        use crate::channel_model::SpreadLaw;
        let p = AngularProfile::new(0.0, 0.0, SpreadLaw::UniformSpread, 0.5).unwrap();
        let one = select_group_subspaces(&[p], 4, 1, 1).unwrap();
        assert_eq!(one.len(), 1);
        assert!(select_group_subspaces(&[p], 4, 2, 1).is_err());
    }

    #[test]
    fn grouping_nearest_subspace() {
        let groups = vec![unit(2, 0), unit(2, 1)];
        let tilted = CMat::from_column_slice(2, 1, &[ONE, Complex64::new(0.1, 0.0)]);
        let tilted = tilted.unscale(tilted.norm());
        let assigned = group_users(&[unit(2, 1), tilted, unit(2, 0)], &groups).unwrap();
        assert_eq!(assigned, vec![1, 0, 0]);
    }

    fn five_cus() -> UserSet {
        let cu = |k: usize| {
            let mut v = [0.0; 5];
            v[k] = 1.0;
            links(&v, &v)
        };
        UserSet::new(
            links(&[1.0, 0.0, 0.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0, 0.0]),
            (0..5).map(cu).collect(),
        )
        .unwrap()
    }

    #[test]
    fn rpa_edges() {
        let users = five_cus();
        let all = allocate_rpa(&users, 5, &mut seeded(1)).unwrap();
        assert_eq!(all.shared_set, vec![0, 1, 2, 3, 4]);
        assert!(allocate_rpa(&users, 0, &mut seeded(1))
            .unwrap()
            .shared_set
            .is_empty());
        assert!(allocate_rpa(&users, 6, &mut seeded(1)).is_err());
    }

    #[test]
    fn rpa_is_uniform() {
        let users = five_cus();
        let mut rng = seeded(42);
        let mut counts = [0usize; 5];
        let draws = 10_000;
        for _ in 0..draws {
            for j in allocate_rpa(&users, 2, &mut rng).unwrap().shared_set {
                counts[j] += 1;
            }
        }
        for c in counts {
            assert!((c as f64 / draws as f64 - 0.4).abs() < 0.02);
        }
    }

    fn orthogonal_vs_overlapping() -> UserSet {
        UserSet::new(
            links(&[1.0, 0.0], &[1.0, 0.0]),
            vec![
                links(&[1.0, 0.0], &[1.0, 0.0]),
                links(&[0.0, 1.0], &[0.0, 1.0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn mpa_prefers_orthogonal_cu() {
        let users = orthogonal_vs_overlapping();
        // η_p: alone 0.1/1.1; with CU 1 unchanged; with CU 0: 1 - 1/2.1.
        let alloc = allocate_mpa(&users, 1, f64::INFINITY, 0.1, 1.0).unwrap();
        assert_eq!(alloc.shared_set, vec![1]);
        assert_eq!(alloc.diagnostics[0].user, 1);
        assert!((alloc.diagnostics[0].metric - (1.0 - 1.0 / 1.1)).abs() < 1e-12);
    }

    #[test]
    fn mpa_threshold_below_floor_is_empty() {
        let users = orthogonal_vs_overlapping();
        let floor = users.primary_mse(&[], 0.1, 1.0).unwrap();
        let alloc = allocate_mpa(&users, 2, 0.5 * floor, 0.1, 1.0).unwrap();
        assert!(alloc.shared_set.is_empty());
    }

    #[test]
    fn mpa_respects_threshold() {
        let users = orthogonal_vs_overlapping();
        let zeta = 0.5;
        let alloc = allocate_mpa(&users, 2, zeta, 0.1, 1.0).unwrap();
        assert_eq!(alloc.shared_set, vec![1]);
        assert!(users.primary_mse(&alloc.shared_set, 0.1, 1.0).unwrap() < zeta);
    }

    #[test]
    fn hpa_pool_thresholds() {
        let users = five_cus();
        let all = allocate_hpa(&users, 5, 1.0).unwrap();
        assert_eq!(all.shared_set.len(), 5);
        let strict = allocate_hpa(&users, 5, 0.0).unwrap();
        let mut set = strict.shared_set.clone();
        set.sort_unstable();
        assert_eq!(set, vec![1, 2, 3, 4]);
        assert!(allocate_hpa(&users, 1, 1.5).is_err());
    }

    #[test]
    fn hpa_picks_mutually_orthogonal_pair_first() {
        // PU on e1 everywhere; CUs 0 and 1 share e2 at the CBS, CU 2 sits on e3.
        let users = UserSet::new(
            links(&[1.0, 0.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0]),
            vec![
                links(&[0.0, 1.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0]),
                links(&[0.0, 0.0, 0.0, 1.0], &[0.0, 1.0, 0.0, 0.0]),
                links(&[0.0, 0.0, 1.0, 0.0], &[0.0, 0.0, 1.0, 0.0]),
            ],
        )
        .unwrap();
        let alloc = allocate_hpa(&users, 2, 0.5).unwrap();
        let mut first_two = alloc.shared_set.clone();
        first_two.sort_unstable();
        assert!(
            first_two == vec![0, 2] || first_two == vec![1, 2],
            "{first_two:?}"
        );
    }

    #[test]
    fn ugpa_prefers_far_group() {
        let m = 3;
        let users = UserSet::new(
            links(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]),
            vec![
                links(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]),
                links(&[0.0, 1.0, 0.0], &[0.0, 1.0, 0.0]),
                links(&[0.0, 0.0, 1.0], &[0.0, 0.0, 1.0]),
                links(&[0.0, 0.0, 1.0], &[0.0, 0.0, 1.0]),
            ],
        )
        .unwrap();
        // Group 0 = e1 (primary), group 1 = e2 (orthogonal), group 2 = near e1 and e3.
        let near = CMat::from_column_slice(
            m,
            1,
            &[Complex64::new(0.6, 0.0), ZERO, Complex64::new(0.8, 0.0)],
        );
        let subspaces = vec![unit(m, 0), unit(m, 1), near];
        let grouping = GroupingResult::build(&users, subspaces.clone(), subspaces).unwrap();
        assert_eq!(grouping.sp.primary_group, 0);
        assert_eq!(grouping.sp.cognitive_groups, vec![0, 1, 2, 2]);
        let one = allocate_ugpa(&users, &grouping, 1).unwrap();
        assert_eq!(one.shared_set, vec![1]);
        let all = allocate_ugpa(&users, &grouping, 4).unwrap();
        assert_eq!(all.shared_set, vec![1, 2, 3]);
        assert!(!all.shared_set.contains(&0));
    }

    #[test]
    fn ugpa_spreads_picks_over_cbs_groups() {
        // Both CUs sit in the far PBS group; CU 0 shares the primary user's
        // CBS group, CU 1 does not.
        let users = UserSet::new(
            links(&[1.0, 0.0], &[1.0, 0.0]),
            vec![
                links(&[0.0, 1.0], &[1.0, 0.0]),
                links(&[0.0, 1.0], &[0.0, 1.0]),
            ],
        )
        .unwrap();
        let subspaces = vec![unit(2, 0), unit(2, 1)];
        let grouping = GroupingResult::build(&users, subspaces.clone(), subspaces).unwrap();
        assert_eq!(
            allocate_ugpa(&users, &grouping, 1).unwrap().shared_set,
            vec![1]
        );
        assert_eq!(
            allocate_ugpa(&users, &grouping, 2).unwrap().shared_set,
            vec![1, 0]
        );
    }

    #[test]
    fn ugpa_single_group_is_empty() {
        let users = five_cus();
        let subspaces = vec![unit(5, 0)];
        let grouping = GroupingResult::build(&users, subspaces.clone(), subspaces).unwrap();
        assert!(allocate_ugpa(&users, &grouping, 3)
            .unwrap()
            .shared_set
            .is_empty());
    }
}
