//! Identity measures (IDP, IDR, IDF1) at observation granularity.
//!
//! Each observation counts with its duration. Truth identities and computed
//! tracks are matched one-to-one so that the total duration of observations
//! they agree on is maximal; that duration is the number of identity true
//! positives.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};

use crate::domain::ObsId;
use crate::error::{Error, Result};
use crate::stream::{check_disjoint, TrackRecord, TruthRecord};

/// Largest number of truth identities [`brute_force_evaluate`] accepts.
pub const BRUTE_FORCE_IDENTITIES: usize = 8;

/// Durations are matched as integer microseconds.
const SCALE: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdReport {
    pub idp: f64,
    pub idr: f64,
    pub idf1: f64,
    pub idtp: f64,
    pub truth_duration: f64,
    pub computed_duration: f64,
    /// Truth identity to matched computed track identity.
    pub matching: BTreeMap<u64, u64>,
}

impl IdReport {
    fn new(idtp: f64, truth_duration: f64, computed_duration: f64, matching: BTreeMap<u64, u64>) -> Self {
        let ratio = |a: f64, b: f64| if b > 0.0 { (a / b).clamp(0.0, 1.0) } else { 0.0 };
        let idp = ratio(idtp, computed_duration);
        let idr = ratio(idtp, truth_duration);
        let idf1 = if idp + idr > 0.0 {
            2.0 * idp * idr / (idp + idr)
        } else {
            0.0
        };
        Self {
            idp,
            idr,
            idf1,
            idtp,
            truth_duration,
            computed_duration,
            matching,
        }
    }

    /// `key=value` lines with stable key names.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "idf1={:.6}", self.idf1);
        let _ = writeln!(s, "idp={:.6}", self.idp);
        let _ = writeln!(s, "idr={:.6}", self.idr);
        let _ = writeln!(s, "idtp={:.6}", self.idtp);
        let _ = writeln!(s, "truth_duration={:.6}", self.truth_duration);
        let _ = writeln!(s, "computed_duration={:.6}", self.computed_duration);
        let _ = writeln!(s, "matched_identities={}", self.matching.len());
        s
    }
}

/// Overlap table between truth identities (rows) and computed tracks (columns).
struct Overlap {
    truth_ids: Vec<u64>,
    track_ids: Vec<u64>,
    cells: Vec<Vec<f64>>,
    truth_duration: f64,
    computed_duration: f64,
}

fn overlap(computed: &[TrackRecord], truth: &[TruthRecord]) -> Result<Overlap> {
    check_disjoint(computed).map_err(|e| Error::Evaluation(e.to_string()))?;
    let mut owner: BTreeMap<ObsId, (u64, f64)> = BTreeMap::new();
    for r in truth {
        if !(r.duration.is_finite() && r.duration >= 0.0) {
            return Err(Error::Evaluation(format!(
                "{} has invalid duration {}",
                r.obs_id, r.duration
            )));
        }
        if owner.insert(r.obs_id, (r.identity, r.duration)).is_some() {
            return Err(Error::Evaluation(format!("{} appears twice in the truth", r.obs_id)));
        }
    }
    let truth_ids: Vec<u64> = truth
        .iter()
        .map(|r| r.identity)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let row: BTreeMap<u64, usize> = truth_ids.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let mut cells = vec![vec![0.0; computed.len()]; truth_ids.len()];
    let mut computed_duration = 0.0;
    for (j, t) in computed.iter().enumerate() {
        for o in &t.obs_ids {
            let (identity, d) = owner
                .get(o)
                .ok_or_else(|| Error::Evaluation(format!("computed track {} refers to unknown {o}", t.identity)))?;
            cells[row[identity]][j] += d;
            computed_duration += d;
        }
    }
    Ok(Overlap {
        truth_ids,
        track_ids: computed.iter().map(|t| t.identity).collect(),
        cells,
        truth_duration: truth.iter().map(|r| r.duration).sum(),
        computed_duration,
    })
}

fn report_from_pairs(ov: &Overlap, pairs: &[(usize, usize)]) -> IdReport {
    let mut idtp = 0.0;
    let mut matching = BTreeMap::new();
    for &(i, j) in pairs {
        if ov.cells[i][j] > 0.0 {
            idtp += ov.cells[i][j];
            matching.insert(ov.truth_ids[i], ov.track_ids[j]);
        }
    }
    IdReport::new(idtp, ov.truth_duration, ov.computed_duration, matching)
}

/// Identity measures of `computed` against `truth`, using an optimal
/// assignment.
pub fn evaluate(computed: &[TrackRecord], truth: &[TruthRecord]) -> Result<IdReport> {
    let ov = overlap(computed, truth)?;
    let n = ov.truth_ids.len().max(ov.track_ids.len());
    if n == 0 {
        return Ok(report_from_pairs(&ov, &[]));
    }
    let mut m = Matrix::new(n, n, 0i64);
    for (i, row) in ov.cells.iter().enumerate() {
        for (j, &d) in row.iter().enumerate() {
            m[(i, j)] = (d * SCALE).round() as i64;
        }
    }
    let (_, assignment) = kuhn_munkres(&m);
    let pairs: Vec<(usize, usize)> = assignment
        .into_iter()
        .enumerate()
        .filter(|&(i, j)| i < ov.truth_ids.len() && j < ov.track_ids.len())
        .collect();
    Ok(report_from_pairs(&ov, &pairs))
}

/// Exhaustive matching over all one-to-one assignments; the test oracle for
/// [`evaluate`].
pub fn brute_force_evaluate(computed: &[TrackRecord], truth: &[TruthRecord]) -> Result<IdReport> {
    let ov = overlap(computed, truth)?;
    if ov.truth_ids.len() > BRUTE_FORCE_IDENTITIES {
        return Err(Error::Evaluation(format!(
            "{} truth identities exceed the exhaustive limit of {BRUTE_FORCE_IDENTITIES}",
            ov.truth_ids.len()
        )));
    }
    fn go(
        ov: &Overlap,
        i: usize,
        used: &mut Vec<bool>,
        cur: &mut Vec<(usize, usize)>,
        best: &mut (f64, Vec<(usize, usize)>),
    ) {
        if i == ov.truth_ids.len() {
            let total: f64 = cur.iter().map(|&(a, b)| ov.cells[a][b]).sum();
            if total > best.0 {
                *best = (total, cur.clone());
            }
            return;
        }
        go(ov, i + 1, used, cur, best);
        for j in 0..ov.track_ids.len() {
            if !used[j] && ov.cells[i][j] > 0.0 {
                used[j] = true;
                cur.push((i, j));
                go(ov, i + 1, used, cur, best);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (0.0, Vec::new());
    go(&ov, 0, &mut vec![false; ov.track_ids.len()], &mut Vec::new(), &mut best);
    Ok(report_from_pairs(&ov, &best.1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth(rows: &[(u64, u64, f64)]) -> Vec<TruthRecord> {
        rows.iter()
            .map(|&(identity, o, duration)| TruthRecord {
                identity,
                obs_id: ObsId(o),
                duration,
            })
            .collect()
    }

    fn track(identity: u64, obs: &[u64]) -> TrackRecord {
        TrackRecord {
            identity,
            obs_ids: obs.iter().map(|&o| ObsId(o)).collect(),
            score: None,
        }
    }

    #[test]
    fn perfect_tracks_score_one() {
        let t = truth(&[(0, 1, 2.0), (0, 2, 3.0), (1, 3, 1.0)]);
        let r = evaluate(&[track(0, &[1, 2]), track(1, &[3])], &t).unwrap();
        assert_eq!((r.idp, r.idr, r.idf1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn no_tracks_recalls_nothing() {
        let t = truth(&[(0, 1, 2.0)]);
        let r = evaluate(&[], &t).unwrap();
        assert_eq!((r.idr, r.idf1), (0.0, 0.0));
    }

    #[test]
    fn split_identity_matches_the_longer_piece() {
        // Identity 0 = {1, 2} split in two; identity 1 = {3, 4} intact.
        let t = truth(&[(0, 1, 1.0), (0, 2, 3.0), (1, 3, 1.0), (1, 4, 1.0)]);
        let c = [track(0, &[1]), track(1, &[2]), track(2, &[3, 4])];
        let r = evaluate(&c, &t).unwrap();
        // Matched: 0 -> track 1 (3.0), 1 -> track 2 (2.0), total 6.
        assert_eq!(r.idtp, 5.0);
        assert!((r.idp - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(r.matching, BTreeMap::from([(0, 1), (1, 2)]));
        assert_eq!(r, brute_force_evaluate(&c, &t).unwrap());
    }

    #[test]
    fn preconditions() {
        let t = truth(&[(0, 1, 1.0)]);
        assert!(evaluate(&[track(0, &[1]), track(1, &[1])], &t).is_err());
        assert!(evaluate(&[track(0, &[9])], &t).is_err());
    }

    #[test]
    fn key_value_rendering() {
        let t = truth(&[(0, 1, 1.0)]);
        let kv = evaluate(&[track(0, &[1])], &t).unwrap().to_key_values();
        assert!(kv.starts_with("idf1=1.000000\nidp=1.000000\nidr=1.000000\n"));
    }
}
