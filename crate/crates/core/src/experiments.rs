//! Scenario construction, Monte Carlo trials, SNR sweeps and reports.
//!
//! A sweep walks `drops` random user geometries. For each drop, SNR point
//! and configured allocator it computes one allocation, then runs `trials`
//! channel realizations for every configured estimator. Trial `t` of a
//! given drop and SNR point uses the same random stream for every
//! (allocator, estimator) pair, so the pairs are compared on common random
//! numbers. All streams derive from the config seed and the indices of the
//! work item, which makes the report independent of the worker count.

use std::f64::consts::LN_10;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::allocation::{
    allocate_hpa, allocate_mpa_pooled, allocate_rpa, allocate_ugpa, dominant_rank,
    select_group_subspaces, Allocation, AllocatorKind, GroupingResult, UserLinks, UserSet,
};
use crate::channel_model::{
    spread_covariance, AngularProfile, ChannelSampler, ChannelVector, SpreadLaw,
};
use crate::error::{Error, Result};
use crate::estimators::{
    cmmse_filter, estimate, mmse_filter, nmmse_filter, CmmseConfig, EstimatorFilter, EstimatorKind,
};
use crate::pilot_signaling::{
    make_pilot, matched_filter, received_uplink, training_matrix, PilotKind, PilotSequence,
    TrainingMatrix,
};
use crate::rng::{stream, SimRng};

const GEOMETRY_STREAM: u64 = 1;
const ALLOCATION_STREAM: u64 = 2;
const TRIAL_STREAM: u64 = 3;

fn one_or_many<'de, D, T>(d: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Either<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(match Either::deserialize(d)? {
        Either::One(x) => vec![x],
        Either::Many(v) => v,
    })
}

/// Everything that defines a sweep. Field names are the JSON config keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Antennas per base station.
    #[serde(rename = "M")]
    pub antennas: usize,
    pub num_cognitive_users: usize,
    /// K, the number of CUs sharing the primary pilot.
    pub reuse_count: usize,
    /// Pilot length τ.
    pub tau: usize,
    /// P_t. `None` means `τ`, i.e. unit-power symbols.
    pub total_pilot_power: Option<f64>,
    pub pilot_kind: PilotKind,
    /// Element spacing in wavelengths.
    pub antenna_spacing: f64,
    pub spread_law: SpreadLaw,
    pub sector_width_deg: f64,
    pub sector_overlap_deg: f64,
    pub serving_sector_deg: f64,
    /// Give each user one nominal angle seen by both base stations. By
    /// default the two geometries are drawn independently.
    pub shared_bs_geometry: bool,
    /// Explicit `[PBS, CBS]` nominal angles in degrees, primary user first.
    /// Replaces random placement when set.
    pub user_angles_deg: Option<Vec<[f64; 2]>>,
    /// Reuse the geometry of drop 0 for every drop.
    pub fixed_drop: bool,
    pub snr_grid_db: Vec<f64>,
    /// Trials per drop and SNR point.
    pub trials: usize,
    pub drops: usize,
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    #[serde(deserialize_with = "one_or_many")]
    pub allocator: Vec<AllocatorKind>,
    #[serde(deserialize_with = "one_or_many")]
    pub estimator: Vec<EstimatorKind>,
    pub cmmse: Option<CmmseConfig>,
    /// Absolute η_p threshold for MPA's first phase. When unset, the
    /// threshold is the larger of `mpa_target_db` (as a normalized primary
    /// MSE) and `mpa_zeta_margin_db` above the contamination-free η_p.
    pub mpa_zeta_th: Option<f64>,
    pub mpa_target_db: f64,
    pub mpa_zeta_margin_db: f64,
    /// Cap on MPA's candidate pool; `None` lets it grow to every CU.
    pub mpa_pool_size: Option<usize>,
    pub hpa_delta_p: f64,
    pub ugpa_groups: usize,
    /// Energy fraction that fixes the common group-subspace rank.
    pub ugpa_energy: f64,
    /// Cap on that rank; `None` means `M / 2`.
    pub ugpa_max_rank: Option<usize>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            antennas: 10,
            num_cognitive_users: 20,
            reuse_count: 3,
            tau: 10,
            total_pilot_power: None,
            pilot_kind: PilotKind::Constant,
            antenna_spacing: 0.5,
            spread_law: SpreadLaw::UniformSpread,
            sector_width_deg: 30.0,
            sector_overlap_deg: 6.0,
            serving_sector_deg: 120.0,
            shared_bs_geometry: false,
            user_angles_deg: None,
            fixed_drop: false,
            snr_grid_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            trials: 10_000,
            drops: 1,
            seed: 1,
            workers: 0,
            allocator: AllocatorKind::ALL.to_vec(),
            estimator: vec![EstimatorKind::Mmse],
            cmmse: None,
            mpa_zeta_th: None,
            mpa_target_db: -10.0,
            mpa_zeta_margin_db: 3.0,
            mpa_pool_size: None,
            hpa_delta_p: 0.1,
            ugpa_groups: 4,
            ugpa_energy: 0.95,
            ugpa_max_rank: None,
        }
    }
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ScenarioConfig {
    pub fn pilot_power(&self) -> f64 {
        self.total_pilot_power.unwrap_or(self.tau as f64)
    }

    pub fn cmmse_config(&self) -> CmmseConfig {
        self.cmmse.unwrap_or_default()
    }

    /// σ² at a cell-edge SNR: `P_t / 10^{snr/10}` with unit edge attenuation.
    pub fn noise_var(&self, snr_db: f64) -> f64 {
        self.pilot_power() / 10f64.powf(snr_db / 10.0)
    }

    /// (allocator, estimator) pairs in report order.
    pub fn pairs(&self) -> Vec<(AllocatorKind, EstimatorKind)> {
        self.allocator
            .iter()
            .flat_map(|&a| self.estimator.iter().map(move |&e| (a, e)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("M", self.antennas),
            ("num_cognitive_users", self.num_cognitive_users),
            ("reuse_count", self.reuse_count),
            ("tau", self.tau),
            ("trials", self.trials),
            ("drops", self.drops),
            ("ugpa_groups", self.ugpa_groups),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(config_error(format!("{name} must be positive")));
            }
        }
        if self.reuse_count > self.num_cognitive_users {
            return Err(config_error(format!(
                "reuse_count {} exceeds num_cognitive_users {}",
                self.reuse_count, self.num_cognitive_users
            )));
        }
        if !(self.pilot_power().is_finite() && self.pilot_power() > 0.0) {
            return Err(config_error("total_pilot_power must be > 0"));
        }
        if self.snr_grid_db.is_empty() || self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(config_error(
                "snr_grid_db must be a non-empty list of finite values",
            ));
        }
        if !(self.antenna_spacing.is_finite() && self.antenna_spacing > 0.0) {
            return Err(config_error("antenna_spacing must be > 0"));
        }
        if !(self.sector_width_deg.is_finite() && self.sector_width_deg > 0.0) {
            return Err(config_error("sector_width_deg must be > 0"));
        }
        if !(0.0..=self.sector_width_deg).contains(&self.sector_overlap_deg) {
            return Err(config_error(format!(
                "sector_overlap_deg {} must lie in [0, sector_width_deg]",
                self.sector_overlap_deg
            )));
        }
        if !(self.serving_sector_deg.is_finite() && self.serving_sector_deg > 0.0) {
            return Err(config_error("serving_sector_deg must be > 0"));
        }
        if self.serving_sector_deg / 2.0 + self.sector_width_deg / 2.0 > 90.0 {
            return Err(config_error(format!(
                "sectors of width {}° cannot be packed into a {}° serving sector",
                self.sector_width_deg, self.serving_sector_deg
            )));
        }
        if let Some(angles) = &self.user_angles_deg {
            if angles.len() != 1 + self.num_cognitive_users {
                return Err(config_error(format!(
                    "user_angles_deg lists {} users, expected {}",
                    angles.len(),
                    1 + self.num_cognitive_users
                )));
            }
            if angles.iter().flatten().any(|a| !(-90.0..=90.0).contains(a)) {
                return Err(config_error(
                    "user_angles_deg entries must lie in [-90, 90]",
                ));
            }
        }
        if self.allocator.is_empty() || self.estimator.is_empty() {
            return Err(config_error(
                "at least one allocator and one estimator are required",
            ));
        }
        if !(0.0..=1.0).contains(&self.hpa_delta_p) {
            return Err(config_error("hpa_delta_p must lie in [0, 1]"));
        }
        if !(self.mpa_zeta_margin_db.is_finite() && self.mpa_zeta_margin_db >= 0.0) {
            return Err(config_error("mpa_zeta_margin_db must be >= 0"));
        }
        if !self.mpa_target_db.is_finite() {
            return Err(config_error("mpa_target_db must be finite"));
        }
        if self
            .mpa_zeta_th
            .is_some_and(|z| !(z.is_finite() && z > 0.0))
        {
            return Err(config_error("mpa_zeta_th must be > 0"));
        }
        if !(self.ugpa_energy > 0.0 && self.ugpa_energy <= 1.0) {
            return Err(config_error("ugpa_energy must lie in (0, 1]"));
        }
        if self.ugpa_max_rank == Some(0) {
            return Err(config_error("ugpa_max_rank must be positive"));
        }
        self.cmmse_config()
            .validate()
            .map_err(|e| config_error(format!("cmmse: {e}")))?;
        Ok(())
    }
}

/// Nominal angles, in degrees, for the packing slots in `order`.
///
/// Slot `k` sits at `offset + k·(width − overlap)`, wrapped into
/// `[−serving/2, serving/2)`.
pub fn packing_angles(cfg: &ScenarioConfig, offset_deg: f64, order: &[usize]) -> Vec<f64> {
    let step = cfg.sector_width_deg - cfg.sector_overlap_deg;
    let half = cfg.serving_sector_deg / 2.0;
    order
        .iter()
        .map(|&k| (offset_deg + k as f64 * step + half).rem_euclid(cfg.serving_sector_deg) - half)
        .collect()
}

fn draw_angles<R: Rng + ?Sized>(cfg: &ScenarioConfig, users: usize, rng: &mut R) -> Vec<f64> {
    let half = cfg.serving_sector_deg / 2.0;
    let offset = rng.random_range(-half..half);
    let mut order: Vec<usize> = (0..users).collect();
    order.shuffle(rng);
    packing_angles(cfg, offset, &order)
}

/// One drop: user geometry, covariances and the shared pilot.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub users: UserSet,
    pub pilot: PilotSequence,
    pub training: TrainingMatrix,
    /// `[PBS, CBS]` nominal angles in degrees; index 0 is the primary user.
    pub angles_deg: Vec<[f64; 2]>,
    pub profiles: Vec<[AngularProfile; 2]>,
    pub grouping: GroupingResult,
    samplers: Vec<[ChannelSampler; 2]>,
}

impl Scenario {
    pub fn antennas(&self) -> usize {
        self.users.antennas()
    }

    pub fn pilot_energy(&self) -> f64 {
        self.training.energy()
    }
}

/// Group subspaces for UGPA: sector profiles on a 1° grid across the
/// serving sector, thinned to `ugpa_groups` by max-min chordal distance.
fn group_subspaces(cfg: &ScenarioConfig) -> Result<Vec<crate::linalg::CMat>> {
    let half_width = cfg.sector_width_deg.to_radians() / 2.0;
    let reference =
        AngularProfile::from_sector(0.0, half_width, cfg.spread_law, cfg.antenna_spacing)?;
    let max_rank = cfg
        .ugpa_max_rank
        .unwrap_or((cfg.antennas / 2).max(1))
        .min(cfg.antennas);
    let rank = dominant_rank(
        &spread_covariance(&reference, cfg.antennas)?,
        cfg.ugpa_energy,
        max_rank,
    );
    let half = cfg.serving_sector_deg / 2.0;
    let steps = cfg.serving_sector_deg.floor() as usize;
    let candidates = (0..=steps)
        .map(|i| {
            let theta = (-half + i as f64).min(half).to_radians();
            AngularProfile::from_sector(theta, half_width, cfg.spread_law, cfg.antenna_spacing)
        })
        .collect::<Result<Vec<_>>>()?;
    let groups = cfg.ugpa_groups.min(candidates.len());
    select_group_subspaces(&candidates, cfg.antennas, groups, rank)
}

pub fn build_scenario<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<Scenario> {
    cfg.validate()?;
    let count = 1 + cfg.num_cognitive_users;
    let (at_pbs, at_cbs) = match &cfg.user_angles_deg {
        Some(angles) => angles.iter().map(|&[p, c]| (p, c)).unzip(),
        None => {
            let at_pbs = draw_angles(cfg, count, rng);
            let at_cbs = if cfg.shared_bs_geometry {
                at_pbs.clone()
            } else {
                draw_angles(cfg, count, rng)
            };
            (at_pbs, at_cbs)
        }
    };
    let half_width = cfg.sector_width_deg.to_radians() / 2.0;
    let profile = |deg: f64| {
        AngularProfile::from_sector(
            deg.to_radians(),
            half_width,
            cfg.spread_law,
            cfg.antenna_spacing,
        )
    };

    let mut angles_deg = Vec::with_capacity(count);
    let mut profiles = Vec::with_capacity(count);
    let mut links = Vec::with_capacity(count);
    let mut samplers = Vec::with_capacity(count);
    for (&p, &c) in at_pbs.iter().zip(&at_cbs) {
        let pair = [profile(p)?, profile(c)?];
        let pbs = spread_covariance(&pair[0], cfg.antennas)?;
        let cbs = spread_covariance(&pair[1], cfg.antennas)?;
        samplers.push([ChannelSampler::new(&pbs)?, ChannelSampler::new(&cbs)?]);
        links.push(UserLinks { pbs, cbs });
        profiles.push(pair);
        angles_deg.push([p, c]);
    }
    let primary = links.remove(0);
    let users = UserSet::new(primary, links)?;
    let subspaces = group_subspaces(cfg)?;
    let grouping = GroupingResult::build(&users, subspaces.clone(), subspaces)?;
    let pilot = make_pilot(cfg.tau, cfg.pilot_power(), cfg.pilot_kind)?;
    let training = training_matrix(&pilot, cfg.antennas)?;
    Ok(Scenario {
        users,
        pilot,
        training,
        angles_deg,
        profiles,
        grouping,
        samplers,
    })
}

/// Run the configured allocator on one drop at one SNR point.
pub fn allocate<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    scenario: &Scenario,
    kind: AllocatorKind,
    snr_db: f64,
    rng: &mut R,
) -> Result<Allocation> {
    let users = &scenario.users;
    let k = cfg.reuse_count;
    match kind {
        AllocatorKind::Rpa => allocate_rpa(users, k, rng),
        AllocatorKind::Mpa => {
            let noise = cfg.noise_var(snr_db);
            let energy = scenario.pilot_energy();
            let zeta = match cfg.mpa_zeta_th {
                Some(z) => z,
                None => {
                    let target = users.primary.pbs.trace() * 10f64.powf(cfg.mpa_target_db / 10.0);
                    let floor = users.primary_mse(&[], noise, energy)?;
                    target.max(floor * 10f64.powf(cfg.mpa_zeta_margin_db / 10.0))
                }
            };
            let pool = cfg.mpa_pool_size.unwrap_or(users.num_cognitive());
            allocate_mpa_pooled(users, k, zeta, pool, noise, energy)
        }
        AllocatorKind::Hpa => allocate_hpa(users, k, cfg.hpa_delta_p),
        AllocatorKind::Ugpa => allocate_ugpa(users, &scenario.grouping, k),
    }
}

/// Squared errors and channel energies of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub primary_error: f64,
    pub primary_norm: f64,
    /// One entry per CU in the allocation, in allocation order.
    pub cognitive_errors: Vec<f64>,
    pub cognitive_norms: Vec<f64>,
}

impl TrialOutcome {
    /// `‖ĥ_PP − h_PP‖² / ‖h_PP‖²`.
    pub fn primary_ratio(&self) -> f64 {
        self.primary_error / self.primary_norm
    }

    /// `Σ_j ‖ĥ_SS,j − h_SS,j‖² / Σ_j ‖h_SS,j‖²`; `None` without pilot sharers.
    pub fn cognitive_ratio(&self) -> Option<f64> {
        if self.cognitive_errors.is_empty() {
            return None;
        }
        Some(self.cognitive_errors.iter().sum::<f64>() / self.cognitive_norms.iter().sum::<f64>())
    }
}

/// Filters for one (drop, SNR, allocation, estimator), reused across trials.
///
/// CMMSE only changes the primary base station's filter; the cognitive base
/// station always uses MMSE under CMMSE.
#[derive(Debug, Clone)]
pub struct TrialPlan<'a> {
    scenario: &'a Scenario,
    shared: Vec<usize>,
    noise_var: f64,
    pub primary_filter: EstimatorFilter,
    pub cognitive_filters: Vec<EstimatorFilter>,
}

impl<'a> TrialPlan<'a> {
    pub fn new(
        scenario: &'a Scenario,
        shared: &[usize],
        kind: EstimatorKind,
        snr_db: f64,
        cmmse: &CmmseConfig,
    ) -> Result<Self> {
        let users = &scenario.users;
        if let Some(&bad) = shared.iter().find(|&&j| j >= users.num_cognitive()) {
            return Err(Error::InvalidParameter(format!(
                "allocation names CU {bad}, scenario has {}",
                users.num_cognitive()
            )));
        }
        let noise_var = scenario.pilot_energy() / 10f64.powf(snr_db / 10.0);
        let energy = scenario.pilot_energy();
        let at_pbs = users.interference_at_pbs(shared);
        let primary_filter = match kind {
            EstimatorKind::Nmmse => nmmse_filter(&users.primary.pbs, noise_var, energy)?,
            EstimatorKind::Mmse => mmse_filter(&users.primary.pbs, &at_pbs, noise_var, energy)?,
            EstimatorKind::Cmmse => {
                cmmse_filter(&users.primary.pbs, &at_pbs, noise_var, energy, cmmse)?
            }
        };
        let cognitive_filters = shared
            .iter()
            .map(|&j| {
                let target = &users.cognitive[j].cbs;
                match kind {
                    EstimatorKind::Nmmse => nmmse_filter(target, noise_var, energy),
                    _ => mmse_filter(
                        target,
                        &users.interference_at_cbs(shared, j),
                        noise_var,
                        energy,
                    ),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            scenario,
            shared: shared.to_vec(),
            noise_var,
            primary_filter,
            cognitive_filters,
        })
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// One trial. Every channel of the drop is drawn in a fixed order before
    /// the noise, whatever the allocation, so plans fed the same stream see
    /// the same realization.
    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TrialOutcome> {
        let channels: Vec<[ChannelVector; 2]> = self
            .scenario
            .samplers
            .iter()
            .map(|[p, c]| [p.sample(rng), c.sample(rng)])
            .collect();
        let training = &self.scenario.training;

        let primary = &channels[0];
        let at_pbs: Vec<ChannelVector> = self
            .shared
            .iter()
            .map(|&j| channels[j + 1][0].clone())
            .collect();
        let y_p = received_uplink(&primary[0], &at_pbs, training, self.noise_var, rng)?;
        let at_cbs: Vec<ChannelVector> = self
            .shared
            .iter()
            .map(|&j| channels[j + 1][1].clone())
            .collect();
        let y_c = received_uplink(&primary[1], &at_cbs, training, self.noise_var, rng)?;

        let z_p = matched_filter(&y_p, training)?;
        let h_hat = estimate(&self.primary_filter, &z_p)?;
        let primary_error = (h_hat - &primary[0]).norm_squared();
        let primary_norm = primary[0].norm_squared();

        let z_c = matched_filter(&y_c, training)?;
        let mut cognitive_errors = Vec::with_capacity(self.shared.len());
        let mut cognitive_norms = Vec::with_capacity(self.shared.len());
        for (filter, h) in self.cognitive_filters.iter().zip(&at_cbs) {
            cognitive_errors.push((estimate(filter, &z_c)? - h).norm_squared());
            cognitive_norms.push(h.norm_squared());
        }
        Ok(TrialOutcome {
            primary_error,
            primary_norm,
            cognitive_errors,
            cognitive_norms,
        })
    }
}

/// Plan and run one trial in a single call.
pub fn run_trial<R: Rng + ?Sized>(
    scenario: &Scenario,
    allocation: &Allocation,
    kind: EstimatorKind,
    snr_db: f64,
    cmmse: &CmmseConfig,
    rng: &mut R,
) -> Result<TrialOutcome> {
    TrialPlan::new(scenario, &allocation.shared_set, kind, snr_db, cmmse)?.run(rng)
}

/// Running sums of a scalar sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Moments) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    /// Standard error of the mean; zero with fewer than two samples.
    pub fn stderr(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let var = ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }

    pub fn mean_db(&self) -> f64 {
        10.0 * self.mean().log10()
    }

    /// Standard error of `mean_db` by the delta method.
    pub fn stderr_db(&self) -> f64 {
        10.0 / LN_10 * self.stderr() / self.mean()
    }
}

/// Trial statistics of one (SNR, allocator, estimator) cell within one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct DropCell {
    pub snr_db: f64,
    pub allocator: AllocatorKind,
    pub estimator: EstimatorKind,
    pub shared_set: Vec<usize>,
    pub primary: Moments,
    pub cognitive: Moments,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropResult {
    pub drop: usize,
    /// SNR-major, then allocator, then estimator, as in the config.
    pub cells: Vec<DropCell>,
}

/// The scenario of drop `drop`, as a sweep builds it.
pub fn drop_scenario(cfg: &ScenarioConfig, drop: usize) -> Result<Scenario> {
    let drop = if cfg.fixed_drop { 0 } else { drop };
    build_scenario(cfg, &mut stream(cfg.seed, &[GEOMETRY_STREAM, drop as u64]))
}

/// The allocation a sweep uses for `cfg.allocator[index]` on drop `drop`.
pub fn drop_allocation(
    cfg: &ScenarioConfig,
    scenario: &Scenario,
    drop: usize,
    index: usize,
    snr_db: f64,
) -> Result<Allocation> {
    let kind = *cfg.allocator.get(index).ok_or_else(|| {
        Error::InvalidParameter(format!("config lists no allocator at index {index}"))
    })?;
    let mut rng = stream(cfg.seed, &[ALLOCATION_STREAM, drop as u64, kind as u64]);
    allocate(cfg, scenario, kind, snr_db, &mut rng)
}

/// All cells of one drop. Trials run on the current rayon pool.
pub fn run_drop(cfg: &ScenarioConfig, drop: usize) -> Result<DropResult> {
    let scenario = drop_scenario(cfg, drop)?;
    let cmmse = cfg.cmmse_config();
    let mut cells = Vec::new();
    for (s, &snr_db) in cfg.snr_grid_db.iter().enumerate() {
        let mut plans = Vec::new();
        let mut meta = Vec::new();
        for (a, &allocator) in cfg.allocator.iter().enumerate() {
            let allocation = drop_allocation(cfg, &scenario, drop, a, snr_db)?;
            for &estimator in &cfg.estimator {
                plans.push(TrialPlan::new(
                    &scenario,
                    &allocation.shared_set,
                    estimator,
                    snr_db,
                    &cmmse,
                )?);
                meta.push((allocator, estimator, allocation.shared_set.clone()));
            }
        }
        let outcomes: Vec<Vec<(f64, Option<f64>)>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let key = [TRIAL_STREAM, drop as u64, s as u64, t as u64];
                plans
                    .iter()
                    .map(|plan| {
                        let mut rng: SimRng = stream(cfg.seed, &key);
                        let out = plan.run(&mut rng)?;
                        Ok((out.primary_ratio(), out.cognitive_ratio()))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        for (p, (allocator, estimator, shared_set)) in meta.into_iter().enumerate() {
            let mut primary = Moments::default();
            let mut cognitive = Moments::default();
            for trial in &outcomes {
                primary.push(trial[p].0);
                if let Some(c) = trial[p].1 {
                    cognitive.push(c);
                }
            }
            cells.push(DropCell {
                snr_db,
                allocator,
                estimator,
                shared_set,
                primary,
                cognitive,
            });
        }
    }
    Ok(DropResult { drop, cells })
}

fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| config_error(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(job))
}

/// Per-drop results for every drop in the config.
pub fn run_drops(cfg: &ScenarioConfig) -> Result<Vec<DropResult>> {
    cfg.validate()?;
    with_workers(cfg.workers, || {
        (0..cfg.drops).map(|d| run_drop(cfg, d)).collect()
    })?
}

/// Round to 9 significant digits.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub snr_db: f64,
    pub allocator: AllocatorKind,
    pub estimator: EstimatorKind,
    pub primary_mse_db: f64,
    /// `None` when the allocation shares the pilot with no CU.
    pub cognitive_mse_db: Option<f64>,
    pub trials: u64,
    pub stderr_primary: f64,
    pub stderr_cognitive: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub version: String,
}

impl Provenance {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        Self {
            config: cfg.clone(),
            seed: cfg.seed,
            version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseReport {
    pub rows: Vec<ReportRow>,
    pub provenance: Provenance,
}

impl MseReport {
    /// Pool the trials of every drop into one row per cell.
    pub fn from_drops(cfg: &ScenarioConfig, drops: &[DropResult]) -> Self {
        let cells = drops.first().map_or(0, |d| d.cells.len());
        let rows = (0..cells)
            .map(|i| {
                let head = &drops[0].cells[i];
                let mut primary = Moments::default();
                let mut cognitive = Moments::default();
                for d in drops {
                    primary.merge(&d.cells[i].primary);
                    cognitive.merge(&d.cells[i].cognitive);
                }
                let has_cognitive = cognitive.count > 0;
                ReportRow {
                    snr_db: head.snr_db,
                    allocator: head.allocator,
                    estimator: head.estimator,
                    primary_mse_db: round_sig9(primary.mean_db()),
                    cognitive_mse_db: has_cognitive.then(|| round_sig9(cognitive.mean_db())),
                    trials: primary.count,
                    stderr_primary: round_sig9(primary.stderr_db()),
                    stderr_cognitive: has_cognitive.then(|| round_sig9(cognitive.stderr_db())),
                }
            })
            .collect();
        Self {
            rows,
            provenance: Provenance::new(cfg),
        }
    }
}

pub fn sweep(cfg: &ScenarioConfig) -> Result<MseReport> {
    Ok(MseReport::from_drops(cfg, &run_drops(cfg)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(config_error(format!("unknown report format {other:?}"))),
        }
    }
}

pub const CSV_HEADER: &str =
    "snr_db,allocator,estimator,primary_mse_db,cognitive_mse_db,trials,stderr_primary,stderr_cognitive";

fn optional(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn render_report(report: &MseReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => {
            let mut out = String::from(CSV_HEADER);
            out.push('\n');
            for r in &report.rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    round_sig9(r.snr_db),
                    r.allocator,
                    r.estimator,
                    round_sig9(r.primary_mse_db),
                    optional(r.cognitive_mse_db.map(round_sig9)),
                    r.trials,
                    round_sig9(r.stderr_primary),
                    optional(r.stderr_cognitive.map(round_sig9)),
                )
                .expect("writing to a String cannot fail");
            }
            Ok(out)
        }
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report)?;
            s.push('\n');
            Ok(s)
        }
    }
}

pub fn write_report(report: &MseReport, path: &Path, format: ReportFormat) -> Result<()> {
    let body = render_report(report, format)?;
    std::fs::write(path, body).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Read back a JSON report.
pub fn read_report(path: &Path) -> Result<MseReport> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// Load a JSON config file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
}
