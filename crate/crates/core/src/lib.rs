//! Pilot decontamination for a cognitive MISO uplink.
//!
//! A primary base station and a cognitive base station, each with a
//! uniform linear array, estimate the channels of users that may share one
//! training sequence. The crate models spatially correlated channels,
//! builds linear channel estimators (NMMSE, MMSE and a contamination
//! constrained MMSE), decides which cognitive users reuse the primary pilot,
//! and sweeps normalized estimation error over SNR by Monte Carlo.

pub mod allocation;
pub mod channel_model;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod linalg;
pub mod pilot_signaling;
pub mod rng;

pub use allocation::{
    allocate_hpa, allocate_mpa, allocate_mpa_pooled, allocate_rpa, allocate_ugpa, Allocation,
    AllocatorKind, GroupingResult, UserLinks, UserSet,
};
pub use channel_model::{spread_covariance, AngularProfile, CovarianceMatrix, SpreadLaw};
pub use error::{Error, Result};
pub use estimators::{
    cmmse_filter, mmse_filter, nmmse_filter, CmmseConfig, EstimatorFilter, EstimatorKind,
};
pub use experiments::{
    build_scenario, run_trial, sweep, write_report, MseReport, ReportFormat, Scenario,
    ScenarioConfig,
};
pub use pilot_signaling::{
    make_pilot, matched_filter, received_uplink, training_matrix, PilotKind,
};
