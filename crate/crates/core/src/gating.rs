//! Observation-to-track gating and the searching-to-ended timeout.
//!
//! Two schemes are supported. With a calibrated ground plane the implied
//! travel speed through the blind region must lie strictly between
//! `g_speed_min` and `g_speed_max`. Without one, the candidate must enter
//! through an entry point reachable from the track's exit point, inside the
//! learned transition-time window.

use serde::{Deserialize, Serialize};

use crate::domain::{observation_speed, CameraNetworkModel, Observation, TrackerConfig, TrackingMode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateReason {
    Pass,
    TooFast,
    TooSlow,
    NoTransition,
    TimeOutOfWindow,
    ModeMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GateDecision {
    pub admissible: bool,
    pub reason: GateReason,
}

impl From<GateReason> for GateDecision {
    fn from(reason: GateReason) -> Self {
        Self {
            admissible: reason == GateReason::Pass,
            reason,
        }
    }
}

/// Blend of Euclidean (weight `beta`) and Manhattan distance.
pub fn mixed_distance(a: [f64; 2], b: [f64; 2], beta: f64) -> f64 {
    let dx = (b[0] - a[0]).abs();
    let dy = (b[1] - a[1]).abs();
    beta * (dx * dx + dy * dy).sqrt() + (1.0 - beta) * (dx + dy)
}

/// Time between the end of `last` and the start of `cand`.
pub fn gap_seconds(last: &Observation, cand: &Observation) -> f64 {
    cand.start_time() - last.end_time()
}

pub fn speed_gate(last: &Observation, cand: &Observation, cfg: &TrackerConfig) -> Result<GateDecision> {
    if !last.closed {
        return Err(Error::GatePrecondition(format!("{} is still open", last.id)));
    }
    let dt = gap_seconds(last, cand);
    if !(dt > 0.0) {
        return Err(Error::GatePrecondition(format!(
            "{} does not start after {} ends (gap {dt} s)",
            cand.id, last.id
        )));
    }
    let (Some(from), Some(to)) = (last.last_point().ground_pos, cand.first_point().ground_pos) else {
        return Ok(GateReason::ModeMismatch.into());
    };
    let speed = mixed_distance(to, from, cfg.beta) / dt;
    let reason = if !(speed > cfg.g_speed_min) {
        GateReason::TooSlow
    } else if !(speed < cfg.g_speed_max) {
        GateReason::TooFast
    } else {
        GateReason::Pass
    };
    Ok(reason.into())
}

/// Open interval of admissible transition times for one transition.
pub fn temporal_window(mean: f64, std: f64, cfg: &TrackerConfig) -> (f64, f64) {
    (
        cfg.g_time_min.unwrap_or(mean - cfg.g_time_alpha_lo * std),
        cfg.g_time_max.unwrap_or(mean + cfg.g_time_alpha_hi * std),
    )
}

pub fn temporal_gate(
    last: &Observation,
    cand: &Observation,
    net: &CameraNetworkModel,
    cfg: &TrackerConfig,
) -> Result<GateDecision> {
    if net.mode != TrackingMode::ImagePlane {
        return Ok(GateReason::ModeMismatch.into());
    }
    let (Some(exit), Some(entry)) = (last.exit_point, cand.entry_point) else {
        return Err(Error::GatePrecondition(format!(
            "entry/exit points unresolved for {} -> {}",
            last.id, cand.id
        )));
    };
    let Some(transition) = net.transition(exit, entry) else {
        return Ok(GateReason::NoTransition.into());
    };
    let (Some(mean), Some(std)) = (transition.mean, transition.std) else {
        return Err(Error::MissingTransitionStats(exit, entry));
    };
    let (lo, hi) = temporal_window(mean, std, cfg);
    let dt = gap_seconds(last, cand);
    let reason = if lo < dt && dt < hi {
        GateReason::Pass
    } else {
        GateReason::TimeOutOfWindow
    };
    Ok(reason.into())
}

/// Applies the gate matching the network's tracking mode.
pub fn gate(
    last: &Observation,
    cand: &Observation,
    net: &CameraNetworkModel,
    cfg: &TrackerConfig,
) -> Result<GateDecision> {
    match net.mode {
        TrackingMode::GroundPlane => speed_gate(last, cand, cfg),
        TrackingMode::ImagePlane => temporal_gate(last, cand, net, cfg),
    }
}

/// Seconds a searching track may stay unmatched after `o` ends before it is
/// declared ended. A stationary target never times out.
pub fn end_of_track_deadline(o: &Observation, net: &CameraNetworkModel, cfg: &TrackerConfig) -> Result<f64> {
    if !o.closed {
        return Err(Error::GatePrecondition(format!("{} is still open", o.id)));
    }
    match net.mode {
        TrackingMode::ImagePlane => Ok(cfg.g_end_fixed),
        TrackingMode::GroundPlane => {
            let area = net
                .ground_area
                .ok_or_else(|| Error::InvalidConfig(vec!["ground_area is required".into()]))?;
            let speed = observation_speed(o)?;
            if speed == 0.0 {
                Ok(f64::INFINITY)
            } else {
                Ok(area.sqrt() / speed)
            }
        }
    }
}
