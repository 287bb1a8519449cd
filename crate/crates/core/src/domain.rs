//! Core value types shared by every stage of the tracker: observations produced
//! by single-camera trackers, the camera-network model and tracker parameters.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the sum of an appearance feature.
pub const FEATURE_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObsId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CameraId(pub u32);

/// Identifier of an entry/exit point of the camera network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointId(pub u32);

impl fmt::Display for ObsId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "o{}", self.0)
    }
}

impl fmt::Display for CameraId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cam{}", self.0)
    }
}

impl fmt::Display for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// Normalized, nonnegative appearance vector. Cloning is cheap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Feature(Arc<[f64]>);

impl Feature {
    /// Wraps `values` after checking they form a probability vector.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidFeature("empty feature vector".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidFeature(format!("entry {bad} is negative or not finite")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > FEATURE_SUM_TOLERANCE {
            return Err(Error::InvalidFeature(format!("entries sum to {sum}, expected 1")));
        }
        Ok(Self(values.into()))
    }

    /// Clips negatives to zero and rescales to unit sum.
    pub fn normalized(mut values: Vec<f64>) -> Result<Self> {
        for v in values.iter_mut() {
            if !v.is_finite() || *v < 0.0 {
                *v = 0.0;
            }
        }
        let sum: f64 = values.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidFeature("feature has no positive mass".into()));
        }
        values.iter_mut().for_each(|v| *v /= sum);
        Ok(Self(values.into()))
    }

    pub fn uniform(dim: usize) -> Self {
        Self(vec![1.0 / dim as f64; dim].into())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub(crate) fn from_arc_unchecked(values: Arc<[f64]>) -> Self {
        Self(values)
    }
}

impl TryFrom<Vec<f64>> for Feature {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Feature::new(values)
    }
}

impl From<Feature> for Vec<f64> {
    fn from(f: Feature) -> Self {
        f.0.to_vec()
    }
}

/// One sample of a single-camera track.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub time: f64,
    pub image_pos: [f64; 2],
    pub image_size: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_pos: Option<[f64; 2]>,
}

/// A contiguous single-camera track of one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub id: ObsId,
    pub camera: CameraId,
    pub entry_point: Option<PointId>,
    pub exit_point: Option<PointId>,
    pub history: Vec<TrackPoint>,
    pub feature: Feature,
    pub closed: bool,
}

impl Observation {
    /// Starts a new, open observation from its first sample.
    pub fn open(id: ObsId, camera: CameraId, first: TrackPoint, feature: Feature) -> Self {
        Self {
            id,
            camera,
            entry_point: None,
            exit_point: None,
            history: vec![first],
            feature,
            closed: false,
        }
    }

    pub fn first_point(&self) -> &TrackPoint {
        &self.history[0]
    }

    pub fn last_point(&self) -> &TrackPoint {
        self.history.last().expect("observation history is never empty")
    }

    pub fn start_time(&self) -> f64 {
        self.first_point().time
    }

    pub fn end_time(&self) -> f64 {
        self.last_point().time
    }

    pub fn duration(&self) -> f64 {
        self.end_time() - self.start_time()
    }

    /// Appends a sample; time must strictly increase.
    pub fn push_point(&mut self, point: TrackPoint) -> Result<()> {
        if self.closed {
            return Err(Error::Ingest(format!("{} is already closed", self.id)));
        }
        if !(point.time > self.end_time()) {
            return Err(Error::Ingest(format!(
                "{}: time {} does not follow {}",
                self.id,
                point.time,
                self.end_time()
            )));
        }
        if point.ground_pos.is_some() != self.first_point().ground_pos.is_some() {
            return Err(Error::Ingest(format!(
                "{}: ground positions must be given for all points or none",
                self.id
            )));
        }
        self.history.push(point);
        Ok(())
    }

    /// Fills missing entry/exit points from the nearest point of the camera.
    pub fn resolve_points(&mut self, net: &CameraNetworkModel) {
        if self.entry_point.is_none() {
            self.entry_point = net.nearest_point(self.camera, self.first_point().image_pos);
        }
        if self.closed && self.exit_point.is_none() {
            self.exit_point = net.nearest_point(self.camera, self.last_point().image_pos);
        }
    }

    /// Checks the structural invariants of an observation.
    pub fn check(&self) -> Result<()> {
        if self.history.is_empty() {
            return Err(Error::Ingest(format!("{} has an empty history", self.id)));
        }
        for w in self.history.windows(2) {
            if !(w[1].time > w[0].time) {
                return Err(Error::Ingest(format!("{} history is not time ordered", self.id)));
            }
        }
        let grounded = self.history[0].ground_pos.is_some();
        if self.history.iter().any(|p| p.ground_pos.is_some() != grounded) {
            return Err(Error::Ingest(format!("{} mixes ground and image-only points", self.id)));
        }
        if self.exit_point.is_some() && !self.closed {
            return Err(Error::Ingest(format!(
                "{} has an exit point but is still open",
                self.id
            )));
        }
        Ok(())
    }
}

/// Average of per-step ground-plane speeds over the observation's history.
pub fn observation_speed(o: &Observation) -> Result<f64> {
    if o.history.len() < 2 {
        return Err(Error::UndefinedSpeed(o.id));
    }
    let mut total = 0.0;
    for w in o.history.windows(2) {
        let (a, b) = match (w[0].ground_pos, w[1].ground_pos) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::MissingGroundPosition(o.id)),
        };
        let dist = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        total += dist / (w[1].time - w[0].time);
    }
    Ok(total / (o.history.len() - 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackingMode {
    /// Targets can be located on a common ground plane; speed gating applies.
    GroundPlane,
    /// Only image coordinates are available; temporal gating applies.
    ImagePlane,
}

impl fmt::Display for TrackingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrackingMode::GroundPlane => "ground_plane",
            TrackingMode::ImagePlane => "image_plane",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryExitPoint {
    pub id: PointId,
    pub camera: CameraId,
    /// Pixel location used to snap track endpoints onto this point.
    pub image_pos: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_pos: Option<[f64; 2]>,
}

/// An allowed transition between two entry/exit points, with its
/// transition-time statistics in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: PointId,
    pub to: PointId,
    #[serde(default)]
    pub mean: Option<f64>,
    #[serde(default)]
    pub std: Option<f64>,
}

/// Static description of the camera network.
///
/// The transition matrix is stored sparsely: a pair is allowed exactly when
/// it appears in `transitions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraNetworkModel {
    pub mode: TrackingMode,
    #[serde(default)]
    pub cameras: Vec<CameraId>,
    #[serde(default)]
    pub entry_exit_points: Vec<EntryExitPoint>,
    #[serde(default)]
    pub transitions: Vec<Transition>,
    #[serde(default)]
    pub ground_area: Option<f64>,
}

impl CameraNetworkModel {
    pub fn ground_plane(cameras: Vec<CameraId>, ground_area: f64) -> Self {
        Self {
            mode: TrackingMode::GroundPlane,
            cameras,
            entry_exit_points: Vec::new(),
            transitions: Vec::new(),
            ground_area: Some(ground_area),
        }
    }

    pub fn point(&self, id: PointId) -> Option<&EntryExitPoint> {
        self.entry_exit_points.iter().find(|p| p.id == id)
    }

    pub fn transition(&self, from: PointId, to: PointId) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.from == from && t.to == to)
    }

    /// Entry of the transition matrix.
    pub fn allows(&self, from: PointId, to: PointId) -> bool {
        self.transition(from, to).is_some()
    }

    /// Dense 0/1 transition matrix, rows and columns ordered like `entry_exit_points`.
    pub fn transition_matrix(&self) -> Vec<Vec<u8>> {
        self.entry_exit_points
            .iter()
            .map(|a| {
                self.entry_exit_points
                    .iter()
                    .map(|b| u8::from(self.allows(a.id, b.id)))
                    .collect()
            })
            .collect()
    }

    pub fn nearest_point(&self, camera: CameraId, image_pos: [f64; 2]) -> Option<PointId> {
        self.entry_exit_points
            .iter()
            .filter(|p| p.camera == camera)
            .map(|p| {
                let d = (p.image_pos[0] - image_pos[0]).powi(2) + (p.image_pos[1] - image_pos[1]).powi(2);
                (d, p.id)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, id)| id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

/// Tracker parameters. Field defaults are the ground-plane settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Depth of the N-scan pruning window, counted in scans that received observations.
    pub n_scan: usize,
    /// Disables N-scan pruning altogether when false.
    pub prune: bool,
    pub w_a: f64,
    /// Track-initiation log score.
    pub c0: f64,
    /// Kinematic false-alarm probability.
    pub c1: f64,
    /// Appearance false-alarm probability.
    pub c2: f64,
    pub scan_seconds: f64,
    pub beta: f64,
    pub g_speed_min: f64,
    pub g_speed_max: f64,
    pub g_time_alpha_lo: f64,
    pub g_time_alpha_hi: f64,
    /// Absolute temporal gate bounds; override the mean/std window when set.
    pub g_time_min: Option<f64>,
    pub g_time_max: Option<f64>,
    /// End-of-track timeout used for every observation in image-plane mode.
    pub g_end_fixed: f64,
    /// Precision of the ground-plane travel-distance likelihood.
    pub gamma: f64,
    pub execution: Execution,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self::ground_plane_defaults()
    }
}

impl TrackerConfig {
    pub fn ground_plane_defaults() -> Self {
        Self {
            n_scan: 10,
            prune: true,
            w_a: 0.8,
            c0: 0.001,
            c1: 0.3,
            c2: 0.75,
            scan_seconds: 1.0,
            beta: 0.7,
            g_speed_min: 0.5,
            g_speed_max: 2.0,
            g_time_alpha_lo: 2.5,
            g_time_alpha_hi: 2.5,
            g_time_min: None,
            g_time_max: None,
            g_end_fixed: 60.0,
            gamma: 1.0,
            execution: Execution::default(),
        }
    }

    pub fn image_plane_defaults() -> Self {
        Self {
            w_a: 0.815,
            c0: 0.005,
            c1: 0.1,
            ..Self::ground_plane_defaults()
        }
    }

    /// Kinematic weight; appearance and kinematic weights sum to one.
    pub fn w_x(&self) -> f64 {
        1.0 - self.w_a
    }

    /// Scan index containing time `t`.
    pub fn scan_of(&self, t: f64) -> i64 {
        (t / self.scan_seconds).floor() as i64
    }
}

/// One failed invariant of a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation(pub String);

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Lists every invariant violated by the configuration and network model.
pub fn validate_config(cfg: &TrackerConfig, net: &CameraNetworkModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut bad = |msg: String| out.push(Violation(msg));
    let in_open_unit = |x: f64| x > 0.0 && x < 1.0;

    if cfg.n_scan == 0 {
        bad("n_scan must be positive".into());
    }
    if !(0.0..=1.0).contains(&cfg.w_a) {
        bad("w_A out of [0,1]".into());
    }
    if !cfg.c0.is_finite() {
        bad("c0 must be finite".into());
    }
    if !in_open_unit(cfg.c1) {
        bad("c1 out of (0,1)".into());
    }
    if !in_open_unit(cfg.c2) {
        bad("c2 out of (0,1)".into());
    }
    if !(cfg.scan_seconds > 0.0 && cfg.scan_seconds.is_finite()) {
        bad("scan_seconds must be positive".into());
    }
    if !(0.0..=1.0).contains(&cfg.beta) {
        bad("beta out of [0,1]".into());
    }
    if !(cfg.g_speed_min >= 0.0) {
        bad("g_speed_min must be nonnegative".into());
    }
    if !(cfg.g_speed_min < cfg.g_speed_max) {
        bad("g_speed_min must be below g_speed_max".into());
    }
    if !(cfg.g_time_alpha_lo >= 0.0 && cfg.g_time_alpha_hi >= 0.0) {
        bad("temporal gate multiples must be nonnegative".into());
    }
    if let (Some(lo), Some(hi)) = (cfg.g_time_min, cfg.g_time_max) {
        if !(lo < hi) {
            bad("g_time_min must be below g_time_max".into());
        }
    }
    if !(cfg.g_end_fixed > 0.0) {
        bad("g_end_fixed must be positive".into());
    }
    if !(cfg.gamma > 0.0 && cfg.gamma.is_finite()) {
        bad("gamma must be positive".into());
    }

    match net.mode {
        TrackingMode::GroundPlane => match net.ground_area {
            Some(a) if a > 0.0 && a.is_finite() => {}
            Some(_) => bad("ground_area must be positive".into()),
            None => bad("ground_plane mode requires ground_area".into()),
        },
        TrackingMode::ImagePlane => {
            if net.entry_exit_points.is_empty() {
                bad("image_plane mode requires entry/exit points".into());
            }
            if net.transitions.is_empty() {
                bad("image_plane mode requires transitions".into());
            }
        }
    }

    let mut seen = std::collections::BTreeSet::new();
    for p in &net.entry_exit_points {
        if !seen.insert(p.id) {
            bad(format!("duplicate entry/exit point {}", p.id));
        }
        if !net.cameras.is_empty() && !net.cameras.contains(&p.camera) {
            bad(format!(
                "entry/exit point {} references unknown camera {}",
                p.id, p.camera
            ));
        }
    }
    let mut pairs = std::collections::BTreeSet::new();
    for t in &net.transitions {
        if net.point(t.from).is_none() || net.point(t.to).is_none() {
            bad(format!("transition {}->{} references an unknown point", t.from, t.to));
        }
        if !pairs.insert((t.from, t.to)) {
            bad(format!("duplicate transition {}->{}", t.from, t.to));
        }
        match (t.mean, t.std) {
            (Some(m), Some(s)) => {
                if !m.is_finite() {
                    bad(format!("transition {}->{} mean is not finite", t.from, t.to));
                }
                if !(s > 0.0 && s.is_finite()) {
                    bad(format!("transition {}->{} std must be positive", t.from, t.to));
                }
            }
            _ => bad(format!("transition {}->{} lacks mean/std", t.from, t.to)),
        }
    }
    out
}
