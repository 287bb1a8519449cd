//! Scan-by-scan pipeline: ingest, best-hypothesis selection, pruning.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::domain::{validate_config, CameraNetworkModel, ObsId, TrackerConfig};
use crate::error::{Error, Result};
use crate::forest::{GlobalHypothesis, HypothesisForest, PruneSummary, ScanSummary};
use crate::mwis::best_global_hypothesis;
use crate::stream::{check_disjoint, ObsEvent, TrackRecord};

/// Cost and size of one processed scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanTiming {
    pub scan: i64,
    /// Wall time of ingest, selection and pruning together.
    pub seconds: f64,
    pub grew: bool,
    pub leaves: usize,
    pub nodes: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub scans: usize,
    pub mean_seconds: f64,
    pub max_seconds: f64,
    pub peak_leaves: usize,
}

impl TimingStats {
    pub fn from_timings(t: &[ScanTiming]) -> Self {
        if t.is_empty() {
            return Self::default();
        }
        Self {
            scans: t.len(),
            mean_seconds: t.iter().map(|s| s.seconds).sum::<f64>() / t.len() as f64,
            max_seconds: t.iter().map(|s| s.seconds).fold(0.0, f64::max),
            peak_leaves: t.iter().map(|s| s.leaves).max().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScanReport {
    pub ingest: ScanSummary,
    pub best: Option<GlobalHypothesis>,
    pub prune: PruneSummary,
}

pub struct Tracker {
    cfg: TrackerConfig,
    net: CameraNetworkModel,
    forest: Option<HypothesisForest>,
    timings: Vec<ScanTiming>,
    check_each_scan: bool,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig, net: CameraNetworkModel) -> Result<Self> {
        let violations = validate_config(&cfg, &net);
        if !violations.is_empty() {
            return Err(Error::InvalidConfig(violations.into_iter().map(|v| v.0).collect()));
        }
        Ok(Self {
            cfg,
            net,
            forest: None,
            timings: Vec::new(),
            check_each_scan: false,
        })
    }

    /// Runs the full structural self-check after every scan (slow).
    pub fn with_invariant_checks(mut self, on: bool) -> Self {
        self.check_each_scan = on;
        self
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn network(&self) -> &CameraNetworkModel {
        &self.net
    }

    pub fn forest(&self) -> Option<&HypothesisForest> {
        self.forest.as_ref()
    }

    pub fn timings(&self) -> &[ScanTiming] {
        &self.timings
    }

    /// Index of the next scan to process, once the first one is known.
    pub fn next_scan(&self) -> Option<i64> {
        self.forest.as_ref().map(HypothesisForest::scan_counter)
    }

    /// Processes one scan. The first call fixes the scan index from the
    /// earliest event (or from `first_scan` if there are none).
    pub fn process_scan(&mut self, first_scan: i64, events: &[ObsEvent]) -> Result<ScanReport> {
        let started = Instant::now();
        let cfg = &self.cfg;
        let forest = self.forest.get_or_insert_with(|| {
            let scan = events.first().map_or(first_scan, |e| cfg.scan_of(e.time));
            HypothesisForest::starting_at(scan, scan as f64 * cfg.scan_seconds)
        });
        let ingest = forest.ingest_scan(events, &self.net, cfg)?;
        let mut report = ScanReport {
            ingest,
            ..ScanReport::default()
        };
        if report.ingest.grew {
            let best = best_global_hypothesis(forest, cfg.execution)?;
            report.prune = forest.n_scan_prune(&best, cfg)?;
            report.best = Some(best);
        }
        if self.check_each_scan {
            forest.check_invariants()?;
        }
        self.timings.push(ScanTiming {
            scan: report.ingest.scan,
            seconds: started.elapsed().as_secs_f64(),
            grew: report.ingest.grew,
            leaves: forest.leaves().len(),
            nodes: forest.node_count(),
        });
        Ok(report)
    }

    /// Replays a whole time-ordered stream, one scan at a time, including
    /// scans without events.
    pub fn run(&mut self, events: &[ObsEvent]) -> Result<()> {
        self.run_until(events, i64::MAX)
    }

    /// Like [`Tracker::run`] but stops after scan `last_scan`.
    pub fn run_until(&mut self, events: &[ObsEvent], last_scan: i64) -> Result<()> {
        let groups = group_by_scan(events, &self.cfg)?;
        let Some(&(first, _)) = groups.first() else {
            return Ok(());
        };
        let end = groups.last().map_or(first, |g| g.0).min(last_scan);
        let mut scan = self.next_scan().unwrap_or(first);
        let mut gi = groups.partition_point(|g| g.0 < scan);
        while scan <= end {
            let batch: &[ObsEvent] = match groups.get(gi) {
                Some((s, evs)) if *s == scan => {
                    gi += 1;
                    evs
                }
                _ => &[],
            };
            self.process_scan(scan, batch)?;
            scan += 1;
        }
        Ok(())
    }

    /// Current best tracks. Observations not covered by the selected
    /// branches are reported as single-observation tracks. Tracks are ordered
    /// by the start time of their first observation; identities are indices.
    pub fn final_tracks(&self) -> Result<Vec<TrackRecord>> {
        let Some(forest) = &self.forest else {
            return Ok(Vec::new());
        };
        let mut tracks: Vec<(Vec<ObsId>, f64)> = Vec::new();
        if !forest.is_empty() {
            let best = best_global_hypothesis(forest, self.cfg.execution)?;
            let covered = best.covered();
            tracks.extend(best.tracks.into_iter().zip(best.scores));
            for id in forest.observations().keys() {
                if !covered.contains(id) {
                    tracks.push((vec![*id], self.cfg.c0));
                }
            }
        }
        let start = |t: &(Vec<ObsId>, f64)| forest.observation(t.0[0]).map_or(f64::INFINITY, |o| o.start_time());
        tracks.sort_by(|a, b| start(a).total_cmp(&start(b)).then(a.0.cmp(&b.0)));
        let out: Vec<TrackRecord> = tracks
            .into_iter()
            .enumerate()
            .map(|(i, (obs_ids, score))| TrackRecord {
                identity: i as u64,
                obs_ids,
                score: Some(score),
            })
            .collect();
        check_disjoint(&out)?;
        Ok(out)
    }
}

/// Splits a time-ordered stream into `(scan, events)` batches.
pub fn group_by_scan(events: &[ObsEvent], cfg: &TrackerConfig) -> Result<Vec<(i64, Vec<ObsEvent>)>> {
    let mut out: Vec<(i64, Vec<ObsEvent>)> = Vec::new();
    let mut last_time = f64::NEG_INFINITY;
    for e in events {
        if !e.time.is_finite() {
            return Err(Error::Ingest(format!("{} has a non-finite timestamp", e.obs_id)));
        }
        if e.time < last_time {
            return Err(Error::Ingest(format!(
                "events out of time order at {} (t={} after t={last_time})",
                e.obs_id, e.time
            )));
        }
        last_time = e.time;
        let scan = cfg.scan_of(e.time);
        match out.last_mut() {
            Some((s, batch)) if *s == scan => batch.push(e.clone()),
            _ => out.push((scan, vec![e.clone()])),
        }
    }
    Ok(out)
}

/// Convenience wrapper: replays `events` and returns the final tracks.
pub fn track_stream(cfg: &TrackerConfig, net: &CameraNetworkModel, events: &[ObsEvent]) -> Result<Vec<TrackRecord>> {
    let mut t = Tracker::new(cfg.clone(), net.clone())?;
    t.run(events)?;
    t.final_tracks()
}
