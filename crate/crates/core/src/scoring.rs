//! Log-likelihood-ratio scoring of track hypotheses.
//!
//! A branch's score starts at the initiation score `c0` and grows by one
//! increment per associated observation:
//!
//! ```text
//! Δ = w_A · ln(p_A / c2) + w_X · ln(p_X / c1),   w_X = 1 − w_A
//! ```
//!
//! `p_A` compares the candidate's appearance with the running mean appearance
//! of the branch; `p_X` is the transition-time density (image plane) or the
//! travel-distance density (ground plane).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::domain::{observation_speed, CameraNetworkModel, Feature, Observation, TrackerConfig, TrackingMode};
use crate::error::{Error, Result};
use crate::gating::{gap_seconds, mixed_distance};

/// Running score and appearance model of one branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchScoreState {
    pub log_score: f64,
    pub assoc_count: u32,
    pub mean_feature: Feature,
}

impl BranchScoreState {
    /// State of a branch holding only its root observation.
    pub fn initial(feature: Feature, cfg: &TrackerConfig) -> Self {
        Self {
            log_score: cfg.c0,
            assoc_count: 1,
            mean_feature: feature,
        }
    }

    /// Associates one more observation: adds `increment` and folds its feature
    /// into the mean.
    pub fn extend(&self, increment: f64, feature: &Feature) -> Result<Self> {
        let mut next = update_mean_feature(self, feature)?;
        next.log_score = self.log_score + increment;
        Ok(next)
    }
}

/// Bhattacharyya coefficient of two probability vectors.
pub fn appearance_similarity(a: &Feature, b: &Feature) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    let bc: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x * y).sqrt()).sum();
    Ok(bc.min(1.0))
}

/// Folds `new_feature` into the branch mean as the next of `assoc_count + 1`
/// observations. The score is left untouched.
pub fn update_mean_feature(state: &BranchScoreState, new_feature: &Feature) -> Result<BranchScoreState> {
    let mean = state.mean_feature.as_slice();
    let new = new_feature.as_slice();
    if mean.len() != new.len() {
        return Err(Error::DimensionMismatch(mean.len(), new.len()));
    }
    let k = f64::from(state.assoc_count + 1);
    let keep = (k - 1.0) / k;
    let values: Vec<f64> = mean.iter().zip(new).map(|(m, x)| keep * m + x / k).collect();
    Ok(BranchScoreState {
        log_score: state.log_score,
        assoc_count: state.assoc_count + 1,
        mean_feature: Feature::from_arc_unchecked(values.into()),
    })
}

/// Gaussian density `N(x; mean, variance)`.
pub fn gaussian_density(x: f64, mean: f64, variance: f64) -> f64 {
    let r = x - mean;
    (-0.5 * r * r / variance).exp() / (2.0 * PI * variance).sqrt()
}

/// Density of a cross-camera transition time.
pub fn kinematic_likelihood_temporal(dt: f64, mu: f64, sigma: f64) -> f64 {
    gaussian_density(dt, mu, sigma * sigma)
}

/// Density of the mismatch between the distance `last` would cover at its own
/// speed during the gap and the distance actually separating the two
/// observations. The variance is `speed / gamma`.
pub fn kinematic_likelihood_distance(last: &Observation, cand: &Observation, cfg: &TrackerConfig) -> Result<f64> {
    let speed = observation_speed(last)?;
    let (Some(from), Some(to)) = (last.last_point().ground_pos, cand.first_point().ground_pos) else {
        return Err(Error::MissingGroundPosition(cand.id));
    };
    let predicted = speed * gap_seconds(last, cand);
    let actual = mixed_distance(to, from, cfg.beta);
    if speed == 0.0 {
        return Ok(if predicted == actual { 1.0 } else { 0.0 });
    }
    Ok(gaussian_density(predicted - actual, 0.0, speed / cfg.gamma))
}

/// Kinematic likelihood for the network's tracking mode.
pub fn kinematic_likelihood(
    last: &Observation,
    cand: &Observation,
    net: &CameraNetworkModel,
    cfg: &TrackerConfig,
) -> Result<f64> {
    match net.mode {
        TrackingMode::GroundPlane => kinematic_likelihood_distance(last, cand, cfg),
        TrackingMode::ImagePlane => {
            let (Some(exit), Some(entry)) = (last.exit_point, cand.entry_point) else {
                return Err(Error::GatePrecondition(format!(
                    "entry/exit points unresolved for {} -> {}",
                    last.id, cand.id
                )));
            };
            let t = net
                .transition(exit, entry)
                .ok_or_else(|| Error::GatePrecondition(format!("no transition {exit}->{entry}")))?;
            let (Some(mu), Some(sigma)) = (t.mean, t.std) else {
                return Err(Error::MissingTransitionStats(exit, entry));
            };
            Ok(kinematic_likelihood_temporal(gap_seconds(last, cand), mu, sigma))
        }
    }
}

fn weighted_log_ratio(weight: f64, p: f64, false_alarm: f64) -> f64 {
    if weight == 0.0 {
        0.0
    } else {
        weight * (p / false_alarm).ln()
    }
}

/// Combines the two likelihoods into one score increment. A zero likelihood
/// with nonzero weight yields negative infinity.
pub fn combine_increment(p_appearance: f64, p_kinematic: f64, cfg: &TrackerConfig) -> f64 {
    weighted_log_ratio(cfg.w_a, p_appearance, cfg.c2) + weighted_log_ratio(cfg.w_x(), p_kinematic, cfg.c1)
}

/// Score increment for extending the branch summarized by `state`, whose
/// last observation is `last`, with `cand`.
pub fn delta_log_score(
    state: &BranchScoreState,
    last: &Observation,
    cand: &Observation,
    net: &CameraNetworkModel,
    cfg: &TrackerConfig,
) -> Result<f64> {
    let p_a = appearance_similarity(&cand.feature, &state.mean_feature)?;
    let p_x = kinematic_likelihood(last, cand, net, cfg)?;
    Ok(combine_increment(p_a, p_x, cfg))
}

/// Score of a branch from its increments.
pub fn total_log_score(increments: &[f64], cfg: &TrackerConfig) -> f64 {
    cfg.c0 + increments.iter().sum::<f64>()
}
