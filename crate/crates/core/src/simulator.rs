//! Deterministic synthetic scenarios with ground truth.
//!
//! Single-camera tracking is simulated as perfect by default: every
//! contiguous presence of a target in a camera yields exactly one
//! observation, sampled every `sample_interval` seconds.
//!
//! # Draw order
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64(seed)` with separate
//! streams (`set_stream`):
//!
//! * stream 0, palette: for each target in order, up to `palette_attempts`
//!   tries of `index::sample(dim, k)` bins (`k = max(1, dim / 4)`) followed by
//!   one `Exp1` weight per chosen bin in sampled order; a try is kept when its
//!   Bhattacharyya coefficient with every earlier target is at most
//!   `max_base_similarity`.
//! * stream `2 + 2i`, route of target `i`:
//!   1. arrival time `gen_range(0..duration)`,
//!   2. speed `gen_range(lo..hi)`,
//!   3. start point `gen_range(0..sources)`, where sources are the points
//!      without incoming transitions whose camera has another point with
//!      outgoing transitions, in point-id order,
//!   4. per camera visit: exit point `gen_range(0..others)` over the other
//!      points of the camera in id order (the entry point itself when there
//!      is none); in image-plane mode a dwell time `gen_range(dwell_range)`;
//!      when `fragmentation_prob > 0` a `gen::<f64>()` compared against it;
//!      then, if the exit point has outgoing transitions and fewer than
//!      `max_visits` visits were made: when `exit_prob > 0` a `gen::<f64>()`
//!      that ends the route if below it, otherwise a transition
//!      `gen_range(0..outgoing)` in destination-id order and, in image-plane
//!      mode with `transition_jitter > 0`, one `Normal(μ, σ·jitter)` transit
//!      time clipped to `[max(μ − 4σ, min_transit), μ + 4σ]`.
//! * stream `3 + 2i`, appearance of target `i`: one `Normal(0, feature_noise)`
//!   per bin per observation, in time order (none when the noise is zero).
//! * stream 1, clutter: a `Poisson(clutter_rate · duration)` count, then per
//!   clutter observation: camera, entry point, start time, speed, the visit
//!   draws above, base feature, then its noise.
//!
//! In ground-plane mode a target walks in a straight line between the
//! ground positions of its entry and exit points at constant speed, and the
//! blind transit takes `mixed_distance(exit, entry, 0.7) / speed` seconds.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::domain::{
    CameraId, CameraNetworkModel, EntryExitPoint, Feature, ObsId, PointId, TrackPoint, TrackerConfig, TrackingMode,
    Transition,
};
use crate::error::{Error, Result};
use crate::gating::mixed_distance;
use crate::scoring::appearance_similarity;
use crate::stream::{EventKind, ObsEvent, TrackRecord, TruthRecord};

/// Mixing weight used when turning blind-region geometry into travel time.
pub const TRANSIT_BETA: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub mode: TrackingMode,
    /// Explicit network; a chain of `chain_cameras` cameras when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<CameraNetworkModel>,
    #[serde(default = "default_chain")]
    pub chain_cameras: usize,
    pub n_targets: usize,
    /// Arrival window in seconds.
    pub duration: f64,
    pub speed_range: (f64, f64),
    pub feature_dim: usize,
    pub feature_noise: f64,
    pub transition_jitter: f64,
    #[serde(default = "default_sample_interval")]
    pub sample_interval: f64,
    /// Dwell time range in image-plane mode, seconds.
    #[serde(default = "default_dwell")]
    pub dwell_range: (f64, f64),
    #[serde(default)]
    pub exit_prob: f64,
    #[serde(default = "default_max_visits")]
    pub max_visits: usize,
    #[serde(default)]
    pub fragmentation_prob: f64,
    /// Clutter observations per second over the whole network.
    #[serde(default)]
    pub clutter_rate: f64,
    #[serde(default = "default_similarity")]
    pub max_base_similarity: f64,
    #[serde(default = "default_attempts")]
    pub palette_attempts: usize,
    #[serde(default = "default_min_transit")]
    pub min_transit: f64,
}

fn default_chain() -> usize {
    4
}
fn default_sample_interval() -> f64 {
    0.5
}
fn default_dwell() -> (f64, f64) {
    (6.0, 12.0)
}
fn default_max_visits() -> usize {
    8
}
fn default_similarity() -> f64 {
    0.5
}
fn default_attempts() -> usize {
    1000
}
fn default_min_transit() -> f64 {
    0.5
}

impl ScenarioSpec {
    /// A chain scenario with the given seed, mode and size.
    pub fn chain(seed: u64, mode: TrackingMode, cameras: usize, n_targets: usize, duration: f64) -> Self {
        Self {
            seed,
            mode,
            network: None,
            chain_cameras: cameras,
            n_targets,
            duration,
            speed_range: (0.8, 1.6),
            feature_dim: 16,
            feature_noise: 0.03,
            transition_jitter: 0.5,
            sample_interval: default_sample_interval(),
            dwell_range: default_dwell(),
            exit_prob: 0.0,
            max_visits: default_max_visits(),
            fragmentation_prob: 0.0,
            clutter_rate: 0.0,
            max_base_similarity: default_similarity(),
            palette_attempts: default_attempts(),
            min_transit: default_min_transit(),
        }
    }

    /// Reads a TOML spec and applies `key=value` overrides.
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let table = crate::config::overridden_table(text, overrides, None)?;
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidScenario(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn network_model(&self) -> CameraNetworkModel {
        self.network
            .clone()
            .unwrap_or_else(|| chain_network(self.chain_cameras, self.mode))
    }

    /// Tracker settings matching this scenario's mode.
    pub fn tracker_defaults(&self) -> TrackerConfig {
        match self.mode {
            TrackingMode::GroundPlane => TrackerConfig::ground_plane_defaults(),
            TrackingMode::ImagePlane => TrackerConfig::image_plane_defaults(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        let (lo, hi) = self.speed_range;
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
            return bad(format!("speed_range ({lo}, {hi}) must satisfy 0 < lo < hi"));
        }
        if !(self.feature_noise >= 0.0 && self.feature_noise.is_finite()) {
            return bad("feature_noise must be finite and >= 0".into());
        }
        if self.feature_dim == 0 {
            return bad("feature_dim must be positive".into());
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return bad("duration must be finite and >= 0".into());
        }
        if !(self.sample_interval > 0.0) {
            return bad("sample_interval must be positive".into());
        }
        if !(self.transition_jitter >= 0.0) {
            return bad("transition_jitter must be >= 0".into());
        }
        let (dlo, dhi) = self.dwell_range;
        if !(0.0 < dlo && dlo < dhi && dhi.is_finite()) {
            return bad("dwell_range must satisfy 0 < lo < hi".into());
        }
        for (name, p) in [
            ("exit_prob", self.exit_prob),
            ("fragmentation_prob", self.fragmentation_prob),
            ("max_base_similarity", self.max_base_similarity),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.clutter_rate >= 0.0 && self.clutter_rate.is_finite()) {
            return bad("clutter_rate must be finite and >= 0".into());
        }
        if self.max_visits == 0 {
            return bad("max_visits must be positive".into());
        }
        let net = self.network_model();
        if net.mode != self.mode {
            return bad(format!(
                "network mode {} differs from scenario mode {}",
                net.mode, self.mode
            ));
        }
        if net.transitions.is_empty() {
            return bad("the network allows no transitions".into());
        }
        for t in &net.transitions {
            if net.point(t.from).is_none() || net.point(t.to).is_none() {
                return bad(format!("transition {} -> {} names an unknown point", t.from, t.to));
            }
            if self.mode == TrackingMode::ImagePlane
                && !matches!((t.mean, t.std), (Some(m), Some(s)) if m > 0.0 && s > 0.0)
            {
                return bad(format!("transition {} -> {} needs positive mean and std", t.from, t.to));
            }
        }
        if self.mode == TrackingMode::GroundPlane {
            for p in &net.entry_exit_points {
                let Some(g) = p.ground_pos else {
                    return bad(format!("point {} lacks a ground position", p.id));
                };
                for q in net
                    .entry_exit_points
                    .iter()
                    .filter(|q| q.camera == p.camera && q.id != p.id)
                {
                    if q.ground_pos == Some(g) {
                        return bad(format!("points {} and {} coincide", p.id, q.id));
                    }
                }
                if net.entry_exit_points.iter().filter(|q| q.camera == p.camera).count() < 2 {
                    return bad(format!("camera {} needs two points in ground-plane mode", p.camera));
                }
            }
        }
        if sources(&net).is_empty() && self.n_targets > 0 {
            return bad("no point can start a route".into());
        }
        Ok(())
    }
}

/// Which identity produced each observation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Identity to its observations in time order.
    pub identities: BTreeMap<u64, Vec<ObsId>>,
    pub durations: BTreeMap<ObsId, f64>,
}

impl GroundTruth {
    pub fn records(&self) -> Vec<TruthRecord> {
        let mut out: Vec<TruthRecord> = self
            .identities
            .iter()
            .flat_map(|(&identity, obs)| {
                obs.iter().map(move |&o| TruthRecord {
                    identity,
                    obs_id: o,
                    duration: 0.0,
                })
            })
            .collect();
        for r in &mut out {
            r.duration = self.durations.get(&r.obs_id).copied().unwrap_or(0.0);
        }
        out.sort_by_key(|r| r.obs_id);
        out
    }

    pub fn from_records(records: &[TruthRecord]) -> Self {
        let mut t = Self::default();
        for r in records {
            t.identities.entry(r.identity).or_default().push(r.obs_id);
            t.durations.insert(r.obs_id, r.duration);
        }
        t
    }

    pub fn observation_count(&self) -> usize {
        self.durations.len()
    }
}

/// The tracks a perfect tracker would output.
pub fn perfect_tracks(truth: &GroundTruth) -> Vec<TrackRecord> {
    truth
        .identities
        .iter()
        .filter(|(_, obs)| !obs.is_empty())
        .enumerate()
        .map(|(i, (_, obs))| TrackRecord {
            identity: i as u64,
            obs_ids: obs.clone(),
            score: None,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub network: CameraNetworkModel,
    pub events: Vec<ObsEvent>,
    pub truth: GroundTruth,
}

/// One planned presence of a target in a camera.
#[derive(Debug, Clone, Copy)]
struct Visit {
    camera: CameraId,
    entry: PointId,
    exit: PointId,
    t_in: f64,
    t_out: f64,
    fragmented: bool,
}

struct Route {
    speed: f64,
    visits: Vec<Visit>,
}

struct SimObservation {
    identity: u64,
    camera: CameraId,
    samples: Vec<TrackPoint>,
    feature: Feature,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Route-start points in id order.
pub fn sources(net: &CameraNetworkModel) -> Vec<PointId> {
    let mut pts: Vec<&EntryExitPoint> = net.entry_exit_points.iter().collect();
    pts.sort_by_key(|p| p.id);
    pts.iter()
        .filter(|p| !net.transitions.iter().any(|t| t.to == p.id))
        .filter(|p| {
            pts.iter()
                .any(|q| q.camera == p.camera && q.id != p.id && net.transitions.iter().any(|t| t.from == q.id))
        })
        .map(|p| p.id)
        .collect()
}

fn other_points(net: &CameraNetworkModel, entry: &EntryExitPoint) -> Vec<PointId> {
    let mut v: Vec<PointId> = net
        .entry_exit_points
        .iter()
        .filter(|q| q.camera == entry.camera && q.id != entry.id)
        .map(|q| q.id)
        .collect();
    v.sort();
    v
}

fn outgoing(net: &CameraNetworkModel, from: PointId) -> Vec<&Transition> {
    let mut v: Vec<&Transition> = net.transitions.iter().filter(|t| t.from == from).collect();
    v.sort_by_key(|t| t.to);
    v
}

fn l2(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn point(net: &CameraNetworkModel, id: PointId) -> &EntryExitPoint {
    net.point(id).expect("validated point")
}

/// Duration of a visit and whether it is fragmented, drawing in the
/// documented order.
fn plan_visit(
    spec: &ScenarioSpec,
    net: &CameraNetworkModel,
    rng: &mut ChaCha8Rng,
    entry: PointId,
    t_in: f64,
    speed: f64,
) -> Visit {
    let e = point(net, entry);
    let others = other_points(net, e);
    let exit = if others.is_empty() {
        entry
    } else {
        others[rng.gen_range(0..others.len())]
    };
    let dwell = match spec.mode {
        TrackingMode::GroundPlane => {
            l2(
                e.ground_pos.expect("validated"),
                point(net, exit).ground_pos.expect("validated"),
            ) / speed
        }
        TrackingMode::ImagePlane => rng.gen_range(spec.dwell_range.0..spec.dwell_range.1),
    };
    let fragmented = spec.fragmentation_prob > 0.0 && rng.gen::<f64>() < spec.fragmentation_prob;
    Visit {
        camera: e.camera,
        entry,
        exit,
        t_in,
        t_out: t_in + dwell,
        fragmented,
    }
}

fn plan_route(spec: &ScenarioSpec, net: &CameraNetworkModel, starts: &[PointId], target: u64) -> Route {
    let mut rng = rng_for(spec.seed, 2 + 2 * target);
    let mut t = if spec.duration > 0.0 {
        rng.gen_range(0.0..spec.duration)
    } else {
        0.0
    };
    let speed = draw_speed(&mut rng, spec.speed_range);
    let mut at = starts[rng.gen_range(0..starts.len())];
    let mut visits = Vec::new();
    loop {
        let v = plan_visit(spec, net, &mut rng, at, t, speed);
        visits.push(v);
        let outs = outgoing(net, v.exit);
        if outs.is_empty() || visits.len() >= spec.max_visits {
            break;
        }
        if spec.exit_prob > 0.0 && rng.gen::<f64>() < spec.exit_prob {
            break;
        }
        let tr = outs[rng.gen_range(0..outs.len())];
        let transit = match spec.mode {
            TrackingMode::GroundPlane => {
                let a = point(net, tr.from).ground_pos.expect("validated");
                let b = point(net, tr.to).ground_pos.expect("validated");
                mixed_distance(a, b, TRANSIT_BETA) / speed
            }
            TrackingMode::ImagePlane => {
                let (mu, sigma) = (tr.mean.expect("validated"), tr.std.expect("validated"));
                let sd = sigma * spec.transition_jitter;
                let raw = if sd > 0.0 {
                    Normal::new(mu, sd).expect("positive std").sample(&mut rng)
                } else {
                    mu
                };
                raw.clamp((mu - 4.0 * sigma).max(spec.min_transit), mu + 4.0 * sigma)
            }
        };
        t = v.t_out + transit;
        at = tr.to;
    }
    Route { speed, visits }
}

/// Speed strictly inside the open range.
fn draw_speed(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    let s = rng.gen_range(lo..hi);
    if s > lo {
        s
    } else {
        0.5 * (lo + hi)
    }
}

fn random_base(rng: &mut ChaCha8Rng, dim: usize) -> Feature {
    let k = (dim / 4).max(1);
    let bins = index::sample(rng, dim, k);
    let mut v = vec![0.0; dim];
    for b in bins.iter() {
        let w: f64 = Exp1.sample(rng);
        v[b] = w + 1e-3;
    }
    Feature::normalized(v).expect("positive weights")
}

/// Base appearance of every target, in target order.
pub fn base_features(spec: &ScenarioSpec) -> Result<Vec<Feature>> {
    let mut rng = rng_for(spec.seed, 0);
    let mut out: Vec<Feature> = Vec::with_capacity(spec.n_targets);
    for i in 0..spec.n_targets {
        let mut accepted = None;
        for _ in 0..spec.palette_attempts.max(1) {
            let f = random_base(&mut rng, spec.feature_dim);
            let mut ok = true;
            for g in &out {
                if appearance_similarity(&f, g)? > spec.max_base_similarity {
                    ok = false;
                    break;
                }
            }
            if ok {
                accepted = Some(f);
                break;
            }
        }
        out.push(accepted.ok_or_else(|| {
            Error::InvalidScenario(format!(
                "could not find a base feature for target {i} within similarity {}",
                spec.max_base_similarity
            ))
        })?);
    }
    Ok(out)
}

fn sample_times(t_in: f64, t_out: f64, step: f64) -> Vec<f64> {
    let mut ts = Vec::new();
    let mut k = 0u64;
    loop {
        let t = t_in + k as f64 * step;
        if t >= t_out - 1e-9 {
            break;
        }
        ts.push(t);
        k += 1;
    }
    ts.push(t_out);
    ts
}

fn noisy(base: &Feature, noise: f64, rng: &mut ChaCha8Rng) -> Feature {
    if noise <= 0.0 {
        return base.clone();
    }
    let n = Normal::new(0.0, noise).expect("positive std");
    let v: Vec<f64> = base.as_slice().iter().map(|&b| (b + n.sample(rng)).max(0.0)).collect();
    Feature::normalized(v).unwrap_or_else(|_| base.clone())
}

/// Turns one visit into one or two observations.
fn realize(
    spec: &ScenarioSpec,
    net: &CameraNetworkModel,
    identity: u64,
    v: &Visit,
    base: &Feature,
    rng: &mut ChaCha8Rng,
) -> Vec<SimObservation> {
    let e = point(net, v.entry);
    let x = point(net, v.exit);
    let times = sample_times(v.t_in, v.t_out, spec.sample_interval);
    let span = v.t_out - v.t_in;
    let lerp = |a: [f64; 2], b: [f64; 2], f: f64| [a[0] + (b[0] - a[0]) * f, a[1] + (b[1] - a[1]) * f];
    let mut samples = Vec::with_capacity(times.len());
    for &t in &times {
        let f = if span > 0.0 { (t - v.t_in) / span } else { 0.0 };
        samples.push(TrackPoint {
            time: t,
            image_pos: lerp(e.image_pos, x.image_pos, f),
            image_size: [40.0, 100.0],
            ground_pos: match spec.mode {
                TrackingMode::GroundPlane => Some(lerp(
                    e.ground_pos.expect("validated"),
                    x.ground_pos.expect("validated"),
                    f,
                )),
                TrackingMode::ImagePlane => None,
            },
        });
    }
    let pieces = if v.fragmented && samples.len() >= 5 {
        let mid = samples.len() / 2;
        vec![samples[..mid].to_vec(), samples[mid + 1..].to_vec()]
    } else {
        vec![samples]
    };
    pieces
        .into_iter()
        .map(|samples| SimObservation {
            identity,
            camera: v.camera,
            samples,
            feature: noisy(base, spec.feature_noise, rng),
        })
        .collect()
}

fn clutter(spec: &ScenarioSpec, net: &CameraNetworkModel) -> Vec<SimObservation> {
    if spec.clutter_rate <= 0.0 || spec.duration <= 0.0 || net.cameras.is_empty() {
        return Vec::new();
    }
    let mut rng = rng_for(spec.seed, 1);
    let count = Poisson::new(spec.clutter_rate * spec.duration)
        .map(|p| p.sample(&mut rng) as u64)
        .unwrap_or(0);
    let mut out = Vec::new();
    for j in 0..count {
        let cam = net.cameras[rng.gen_range(0..net.cameras.len())];
        let mut pts: Vec<PointId> = net
            .entry_exit_points
            .iter()
            .filter(|p| p.camera == cam)
            .map(|p| p.id)
            .collect();
        pts.sort();
        if pts.is_empty() {
            continue;
        }
        let entry = pts[rng.gen_range(0..pts.len())];
        let t_in = rng.gen_range(0.0..spec.duration);
        let speed = draw_speed(&mut rng, spec.speed_range);
        let mut v = plan_visit(spec, net, &mut rng, entry, t_in, speed);
        v.fragmented = false;
        let base = random_base(&mut rng, spec.feature_dim);
        out.extend(realize(spec, net, (spec.n_targets as u64) + j, &v, &base, &mut rng));
    }
    out
}

/// Number of observations each target produces, from routes alone.
pub fn planned_observation_counts(spec: &ScenarioSpec) -> Result<Vec<usize>> {
    spec.validate()?;
    let net = spec.network_model();
    let starts = sources(&net);
    Ok((0..spec.n_targets as u64)
        .map(|i| {
            plan_route(spec, &net, &starts, i)
                .visits
                .iter()
                .map(|v| {
                    let n = sample_times(v.t_in, v.t_out, spec.sample_interval).len();
                    if v.fragmented && n >= 5 {
                        2
                    } else {
                        1
                    }
                })
                .sum()
        })
        .collect())
}

/// Generates the event stream and ground truth of `spec`.
pub fn generate(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let net = spec.network_model();
    let starts = sources(&net);
    let bases = base_features(spec)?;
    let mut sims: Vec<SimObservation> = Vec::new();
    for (i, base) in bases.iter().enumerate() {
        let route = plan_route(spec, &net, &starts, i as u64);
        debug_assert!(route.speed > spec.speed_range.0 && route.speed < spec.speed_range.1);
        let mut rng = rng_for(spec.seed, 3 + 2 * i as u64);
        for v in &route.visits {
            sims.extend(realize(spec, &net, i as u64, v, base, &mut rng));
        }
    }
    sims.extend(clutter(spec, &net));
    sims.sort_by(|a, b| {
        a.samples[0]
            .time
            .total_cmp(&b.samples[0].time)
            .then(a.identity.cmp(&b.identity))
            .then(a.camera.cmp(&b.camera))
    });

    let mut truth = GroundTruth::default();
    let mut keyed: Vec<(f64, u64, u8, ObsEvent)> = Vec::new();
    for (k, s) in sims.iter().enumerate() {
        let id = ObsId(k as u64 + 1);
        truth.identities.entry(s.identity).or_default().push(id);
        let first = &s.samples[0];
        let last = s.samples.last().expect("non-empty");
        truth.durations.insert(id, last.time - first.time);
        let mut start = ObsEvent::from_point(EventKind::Start, id, s.camera, first);
        start.feature = Some(s.feature.clone());
        keyed.push((first.time, id.0, 0, start));
        for p in &s.samples[1..s.samples.len() - 1] {
            keyed.push((
                p.time,
                id.0,
                1,
                ObsEvent::from_point(EventKind::Extend, id, s.camera, p),
            ));
        }
        let mut end = ObsEvent::from_point(EventKind::End, id, s.camera, last);
        end.feature = Some(s.feature.clone());
        keyed.push((last.time, id.0, 2, end));
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    Ok(Scenario {
        network: net,
        events: keyed.into_iter().map(|k| k.3).collect(),
        truth,
    })
}

/// Chain of cameras along the x axis, each with a left and a right
/// entry/exit point, joined right-to-left between neighbours in both
/// directions. Neighbouring cameras alternate in y so that blind paths are
/// diagonal.
pub fn chain_network(cameras: usize, mode: TrackingMode) -> CameraNetworkModel {
    const SPACING: f64 = 30.0;
    const HALF_WIDTH: f64 = 5.0;
    const TRANSIT_MEAN: f64 = 20.0;
    const TRANSIT_STD: f64 = 2.0;
    let mut net = CameraNetworkModel {
        mode,
        cameras: (0..cameras as u32).map(CameraId).collect(),
        entry_exit_points: Vec::new(),
        transitions: Vec::new(),
        ground_area: match mode {
            TrackingMode::GroundPlane => Some((cameras as f64 * SPACING).powi(2)),
            TrackingMode::ImagePlane => None,
        },
    };
    for c in 0..cameras as u32 {
        let cx = c as f64 * SPACING;
        let cy = if c % 2 == 0 { 0.0 } else { 10.0 };
        for (k, dx, u) in [(0, -HALF_WIDTH, 100.0), (1, HALF_WIDTH, 540.0)] {
            net.entry_exit_points.push(EntryExitPoint {
                id: PointId(2 * c + k),
                camera: CameraId(c),
                image_pos: [u, 240.0],
                ground_pos: match mode {
                    TrackingMode::GroundPlane => Some([cx + dx, cy]),
                    TrackingMode::ImagePlane => None,
                },
            });
        }
    }
    for c in 0..cameras.saturating_sub(1) as u32 {
        let right = PointId(2 * c + 1);
        let next_left = PointId(2 * (c + 1));
        let (mean, std) = match mode {
            // Walking time at a nominal 1.2 m/s; the tracker does not use it.
            TrackingMode::GroundPlane => {
                let a = point(&net, right).ground_pos.expect("set above");
                let b = point(&net, next_left).ground_pos.expect("set above");
                let m = mixed_distance(a, b, TRANSIT_BETA) / 1.2;
                (m, 0.25 * m)
            }
            TrackingMode::ImagePlane => (TRANSIT_MEAN, TRANSIT_STD),
        };
        for (from, to) in [(right, next_left), (next_left, right)] {
            net.transitions.push(Transition {
                from,
                to,
                mean: Some(mean),
                std: Some(std),
            });
        }
    }
    net
}

/// A small worked example with four observations in three cameras,
/// ten-second scans and purely temporal gating:
///
/// * `o1` in camera 0 during scans 0-1,
/// * `o2` (camera 1) and `o3` (camera 2) start in scan 2 and end in scan 3,
/// * `o4` in camera 0 starts in scan 4 and ends in scan 5.
///
/// `o1`, `o2` and `o4` share an appearance; `o3` looks different.
pub fn walkthrough() -> Scenario {
    let pt = |id: u32, cam: u32, u: f64| EntryExitPoint {
        id: PointId(id),
        camera: CameraId(cam),
        image_pos: [u, 240.0],
        ground_pos: None,
    };
    let tr = |from: u32, to: u32| Transition {
        from: PointId(from),
        to: PointId(to),
        mean: Some(11.0),
        std: Some(1.0),
    };
    let network = CameraNetworkModel {
        mode: TrackingMode::ImagePlane,
        cameras: vec![CameraId(0), CameraId(1), CameraId(2)],
        entry_exit_points: vec![pt(0, 0, 320.0), pt(1, 1, 320.0), pt(2, 2, 320.0)],
        transitions: vec![tr(0, 1), tr(0, 2), tr(1, 0), tr(2, 0)],
        ground_area: None,
    };
    let red = Feature::new(vec![0.7, 0.1, 0.1, 0.1]).expect("normalized");
    let blue = Feature::new(vec![0.1, 0.1, 0.1, 0.7]).expect("normalized");
    let spans = [
        (1, 0, 1.0, 12.0, &red),
        (2, 1, 22.0, 33.0, &red),
        (3, 2, 24.0, 35.0, &blue),
        (4, 0, 45.0, 55.0, &red),
    ];
    let mut keyed = Vec::new();
    let mut truth = GroundTruth::default();
    for (id, cam, t0, t1, f) in spans {
        let obs = ObsId(id);
        let p = |t: f64| TrackPoint {
            time: t,
            image_pos: [320.0, 240.0],
            image_size: [40.0, 100.0],
            ground_pos: None,
        };
        let mut s = ObsEvent::from_point(EventKind::Start, obs, CameraId(cam), &p(t0));
        s.feature = Some(f.clone());
        keyed.push((t0, s));
        let mut e = ObsEvent::from_point(EventKind::End, obs, CameraId(cam), &p(t1));
        e.feature = Some(f.clone());
        keyed.push((t1, e));
        let identity = if id == 3 { 1 } else { 0 };
        truth.identities.entry(identity).or_default().push(obs);
        truth.durations.insert(obs, t1 - t0);
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    Scenario {
        network,
        events: keyed.into_iter().map(|k| k.1).collect(),
        truth,
    }
}

/// Tracker settings for [`walkthrough`].
pub fn walkthrough_config() -> TrackerConfig {
    TrackerConfig {
        scan_seconds: 10.0,
        g_end_fixed: 17.5,
        ..TrackerConfig::image_plane_defaults()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::observations_from_events;

    #[test]
    fn same_seed_same_stream() {
        let spec = ScenarioSpec::chain(5, TrackingMode::GroundPlane, 3, 4, 60.0);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a, b);
        let c = generate(&ScenarioSpec { seed: 6, ..spec }).unwrap();
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn spec_round_trips_through_toml_with_overrides() {
        let spec = ScenarioSpec::chain(5, TrackingMode::ImagePlane, 3, 4, 60.0);
        assert_eq!(ScenarioSpec::parse_with_overrides(&spec.to_toml(), &[]).unwrap(), spec);
        let changed =
            ScenarioSpec::parse_with_overrides(&spec.to_toml(), &["seed=9".into(), "n_targets=0".into()]).unwrap();
        assert_eq!((changed.seed, changed.n_targets), (9, 0));
        assert!(ScenarioSpec::parse_with_overrides(&spec.to_toml(), &["seeds=9".into()]).is_err());
    }

    #[test]
    fn one_target_one_transition_gives_two_observations() {
        let mut net = chain_network(2, TrackingMode::GroundPlane);
        net.transitions.retain(|t| t.from == PointId(1));
        let spec = ScenarioSpec {
            network: Some(net),
            ..ScenarioSpec::chain(1, TrackingMode::GroundPlane, 2, 1, 10.0)
        };
        let s = generate(&spec).unwrap();
        assert_eq!(s.truth.identities, BTreeMap::from([(0, vec![ObsId(1), ObsId(2)])]));
    }

    #[test]
    fn network_without_transitions_is_rejected() {
        let mut net = chain_network(2, TrackingMode::GroundPlane);
        net.transitions.clear();
        let spec = ScenarioSpec {
            network: Some(net),
            ..ScenarioSpec::chain(1, TrackingMode::GroundPlane, 2, 1, 10.0)
        };
        assert!(matches!(generate(&spec), Err(Error::InvalidScenario(_))));
    }

    #[test]
    fn streams_rebuild_into_valid_observations() {
        for mode in [TrackingMode::GroundPlane, TrackingMode::ImagePlane] {
            let spec = ScenarioSpec {
                fragmentation_prob: 0.2,
                clutter_rate: 0.02,
                exit_prob: 0.2,
                ..ScenarioSpec::chain(9, mode, 4, 6, 120.0)
            };
            let s = generate(&spec).unwrap();
            let obs = observations_from_events(&s.events).unwrap();
            assert_eq!(obs.len(), s.truth.observation_count());
            assert!(obs.values().all(|o| o.closed && o.check().is_ok()));
            assert!(s.events.windows(2).all(|w| w[0].time <= w[1].time));
        }
    }

    #[test]
    fn perfect_tracks_partition_the_truth() {
        let s = generate(&ScenarioSpec::chain(2, TrackingMode::ImagePlane, 4, 5, 100.0)).unwrap();
        let tracks = perfect_tracks(&s.truth);
        let mut all: Vec<ObsId> = tracks.iter().flat_map(|t| t.obs_ids.clone()).collect();
        all.sort();
        assert_eq!(all, s.truth.durations.keys().copied().collect::<Vec<_>>());
    }

    #[test]
    fn chain_sources_are_the_two_ends() {
        let net = chain_network(4, TrackingMode::GroundPlane);
        assert_eq!(sources(&net), vec![PointId(0), PointId(7)]);
    }
}
