//! Line-delimited JSON file formats: the observation event stream, ground
//! truth and computed tracks.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::domain::{CameraId, Feature, ObsId, Observation, PointId, TrackPoint};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Start,
    Extend,
    End,
}

/// One single-camera tracker event. Every event carries a track sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsEvent {
    pub event: EventKind,
    pub obs_id: ObsId,
    pub camera: CameraId,
    pub time: f64,
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<Feature>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_point: Option<PointId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_point: Option<PointId>,
}

impl ObsEvent {
    pub fn point(&self) -> Result<TrackPoint> {
        let ground_pos = match (self.x, self.y) {
            (Some(x), Some(y)) => Some([x, y]),
            (None, None) => None,
            _ => {
                return Err(Error::Ingest(format!(
                    "{} at t={}: x and y must be given together",
                    self.obs_id, self.time
                )))
            }
        };
        Ok(TrackPoint {
            time: self.time,
            image_pos: [self.u, self.v],
            image_size: [self.w, self.h],
            ground_pos,
        })
    }

    pub fn from_point(event: EventKind, obs_id: ObsId, camera: CameraId, p: &TrackPoint) -> Self {
        Self {
            event,
            obs_id,
            camera,
            time: p.time,
            u: p.image_pos[0],
            v: p.image_pos[1],
            w: p.image_size[0],
            h: p.image_size[1],
            x: p.ground_pos.map(|g| g[0]),
            y: p.ground_pos.map(|g| g[1]),
            feature: None,
            entry_point: None,
            exit_point: None,
        }
    }
}

/// Ground-truth membership of one observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub identity: u64,
    pub obs_id: ObsId,
    /// Weight of the observation in identity metrics, in seconds.
    #[serde(default = "default_duration")]
    pub duration: f64,
}

fn default_duration() -> f64 {
    1.0
}

/// One computed multi-camera track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub identity: u64,
    pub obs_ids: Vec<ObsId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

/// Reads one JSON record per non-blank line.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(reader: R, path: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let rec = serde_json::from_str(trimmed).map_err(|e| Error::Parse {
            path: path.to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize, W: Write>(mut writer: W, records: &[T]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r).map_err(std::io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_events_file(path: &std::path::Path) -> Result<Vec<ObsEvent>> {
    let f = std::fs::File::open(path)?;
    read_jsonl(std::io::BufReader::new(f), &path.display().to_string())
}

/// Rejects track lists in which an observation appears twice.
pub fn check_disjoint(tracks: &[TrackRecord]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for t in tracks {
        for o in &t.obs_ids {
            if !seen.insert(*o) {
                return Err(Error::Consistency(format!("{o} appears in more than one track")));
            }
        }
    }
    Ok(())
}

/// Rebuilds complete observations from an event stream, checking the same
/// invariants the tracker enforces.
pub fn observations_from_events(events: &[ObsEvent]) -> Result<BTreeMap<ObsId, Observation>> {
    let mut out: BTreeMap<ObsId, Observation> = BTreeMap::new();
    for e in events {
        let p = e.point()?;
        match e.event {
            EventKind::Start => {
                if out.contains_key(&e.obs_id) {
                    return Err(Error::Ingest(format!("{} started twice", e.obs_id)));
                }
                let feature = e
                    .feature
                    .clone()
                    .ok_or_else(|| Error::Ingest(format!("start of {} lacks a feature", e.obs_id)))?;
                let mut o = Observation::open(e.obs_id, e.camera, p, feature);
                o.entry_point = e.entry_point;
                out.insert(e.obs_id, o);
            }
            EventKind::Extend | EventKind::End => {
                let o = out.get_mut(&e.obs_id).ok_or(Error::UnknownObservation(e.obs_id))?;
                o.push_point(p)?;
                if let Some(f) = &e.feature {
                    o.feature = f.clone();
                }
                if e.event == EventKind::End {
                    o.closed = true;
                    o.exit_point = e.exit_point;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "{\"identity\":0,\"obs_id\":1}\n\nnot json\n";
        let err = read_jsonl::<TruthRecord, _>(text.as_bytes(), "truth.jsonl").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truth_duration_defaults_to_one() {
        let recs: Vec<TruthRecord> = read_jsonl("{\"identity\":2,\"obs_id\":7}".as_bytes(), "t").unwrap();
        assert_eq!(recs[0].duration, 1.0);
    }

    #[test]
    fn overlapping_tracks_are_rejected() {
        let tracks = vec![
            TrackRecord {
                identity: 0,
                obs_ids: vec![ObsId(1), ObsId(2)],
                score: None,
            },
            TrackRecord {
                identity: 1,
                obs_ids: vec![ObsId(2)],
                score: None,
            },
        ];
        assert!(check_disjoint(&tracks).is_err());
    }

    #[test]
    fn event_requires_paired_ground_coordinates() {
        let mut e = ObsEvent::from_point(
            EventKind::Start,
            ObsId(1),
            CameraId(0),
            &TrackPoint {
                time: 0.0,
                image_pos: [0.0, 0.0],
                image_size: [1.0, 1.0],
                ground_pos: None,
            },
        );
        e.x = Some(1.0);
        assert!(e.point().is_err());
    }
}
