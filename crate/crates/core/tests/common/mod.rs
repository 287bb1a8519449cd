#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use mht_core::domain::{CameraId, Feature, ObsId, Observation, TrackPoint, TrackingMode};
use mht_core::forest::HypothesisForest;
use mht_core::mwis::ConflictGraph;
use mht_core::simulator::ScenarioSpec;
use mht_core::stream::{TrackRecord, TruthRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random graph with up to `max_n` vertices and weights in (-1, 5).
pub fn random_graph(seed: u64, max_n: usize) -> ConflictGraph {
    let mut r = rng(seed);
    let n = r.gen_range(0..=max_n);
    let p: f64 = r.gen_range(0.05..0.7);
    let weights: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..5.0)).collect();
    let mut g = ConflictGraph::with_weights(&weights);
    for a in 0..n {
        for b in a + 1..n {
            if r.gen::<f64>() < p {
                g.add_edge(a, b);
            }
        }
    }
    g
}

/// Best set of pairwise observation-disjoint branches, by enumerating every
/// subset of leaves. Returns the total score and the chosen observation lists.
pub fn exhaustive_best_branches(forest: &HypothesisForest) -> (f64, BTreeSet<Vec<ObsId>>) {
    let leaves = forest.leaves();
    assert!(leaves.len() <= 22, "too many leaves for exhaustive search");
    let branches: Vec<(Vec<ObsId>, f64)> = leaves
        .iter()
        .map(|&l| (forest.branch_observations(l), forest.node(l).score.log_score))
        .collect();
    let mut best = (0.0, BTreeSet::new());
    for mask in 0u32..(1 << branches.len()) {
        let mut used = BTreeSet::new();
        let mut total = 0.0;
        let mut ok = true;
        for (i, (obs, w)) in branches.iter().enumerate() {
            if mask >> i & 1 == 1 {
                ok &= obs.iter().all(|o| used.insert(*o));
                total += w;
            }
        }
        if ok && total > best.0 + 1e-12 {
            best = (
                total,
                (0..branches.len())
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| branches[i].0.clone())
                    .collect(),
            );
        }
    }
    best
}

pub fn pairwise_disjoint<'a>(tracks: impl IntoIterator<Item = &'a Vec<ObsId>>) -> bool {
    let mut seen = BTreeSet::new();
    tracks.into_iter().flatten().all(|o| seen.insert(*o))
}

pub fn random_feature(r: &mut ChaCha8Rng, dim: usize) -> Feature {
    let v: Vec<f64> = (0..dim).map(|_| r.gen_range(0.0..1.0)).collect();
    Feature::normalized(v).unwrap()
}

/// Closed ground-plane observation walking from `from` to `to` over
/// `[t0, t1]` in `steps` equal steps.
pub fn walk(id: u64, t0: f64, t1: f64, from: [f64; 2], to: [f64; 2], steps: usize, feature: Feature) -> Observation {
    let p = |k: usize| {
        let f = k as f64 / steps as f64;
        TrackPoint {
            time: t0 + (t1 - t0) * f,
            image_pos: [0.0, 0.0],
            image_size: [1.0, 1.0],
            ground_pos: Some([from[0] + (to[0] - from[0]) * f, from[1] + (to[1] - from[1]) * f]),
        }
    };
    let mut o = Observation::open(ObsId(id), CameraId(id as u32 % 4), p(0), feature);
    for k in 1..=steps {
        o.push_point(p(k)).unwrap();
    }
    o.closed = true;
    o
}

/// Random truth with up to `max_ids` identities and a random computed
/// partition of a subset of its observations.
pub fn random_truth_and_tracks(seed: u64, max_ids: usize) -> (Vec<TruthRecord>, Vec<TrackRecord>) {
    let mut r = rng(seed);
    let ids = r.gen_range(1..=max_ids) as u64;
    let n_obs = r.gen_range(1..=20u64);
    let truth: Vec<TruthRecord> = (1..=n_obs)
        .map(|o| TruthRecord {
            identity: r.gen_range(0..ids),
            obs_id: ObsId(o),
            duration: f64::from(r.gen_range(1..=40u32)) * 0.25,
        })
        .collect();
    let n_tracks = r.gen_range(1..=10u64);
    let mut groups: BTreeMap<u64, Vec<ObsId>> = BTreeMap::new();
    for t in &truth {
        if r.gen::<f64>() < 0.85 {
            // Mostly follow the truth, sometimes scatter.
            let g = if r.gen::<f64>() < 0.6 {
                t.identity % n_tracks
            } else {
                r.gen_range(0..n_tracks)
            };
            groups.entry(g).or_default().push(t.obs_id);
        }
    }
    let tracks = groups
        .into_iter()
        .map(|(g, obs_ids)| TrackRecord {
            identity: 100 + g,
            obs_ids,
            score: None,
        })
        .collect();
    (truth, tracks)
}

/// Small chain scenario: at most `2 * max_visits` observations.
pub fn small_spec(seed: u64, mode: TrackingMode) -> ScenarioSpec {
    let mut r = rng(seed ^ 0x5eed);
    ScenarioSpec {
        exit_prob: 0.2,
        max_visits: 5,
        feature_noise: r.gen_range(0.0..0.08),
        ..ScenarioSpec::chain(
            seed,
            mode,
            r.gen_range(2..=4),
            r.gen_range(1..=2),
            r.gen_range(5.0..40.0),
        )
    }
}
