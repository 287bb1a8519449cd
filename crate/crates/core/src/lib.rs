//! Multiple hypothesis tracking across a network of cameras with disjoint
//! fields of view.
//!
//! Single-camera tracks ("observations") are linked into multi-camera tracks
//! by growing one hypothesis tree per observation, scoring every branch with
//! an appearance and kinematic log-likelihood ratio, selecting the best set of
//! compatible branches with an exact maximum weighted independent set solver,
//! and keeping the trees small with N-scan pruning.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod domain;
pub mod error;
pub mod forest;
pub mod gating;
pub mod metrics;
pub mod mwis;
pub mod par;
pub mod scoring;
pub mod simulator;
pub mod stream;
pub mod tracker;

pub use domain::{
    observation_speed, validate_config, CameraId, CameraNetworkModel, EntryExitPoint, Execution, Feature, ObsId,
    Observation, PointId, TrackPoint, TrackerConfig, TrackingMode, Transition, Violation,
};
pub use error::{Error, Result};
pub use forest::{GlobalHypothesis, HypothesisForest, Status};
pub use tracker::Tracker;
