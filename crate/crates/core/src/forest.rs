//! Track-hypothesis trees.
//!
//! Every observation roots a tree. A root-to-leaf path (a branch) is one
//! candidate multi-camera track; dummy nodes repeat their parent's
//! observation and mean "not extended in this scan". Leaves carry a status:
//!
//! * `w1` tracking: the observation is still visible in its camera,
//! * `w2` searching: it has left the camera and may be continued elsewhere,
//! * `w3` ended: the search timed out; only dummies are appended.
//!
//! Trees grow only in scans that deliver new observations, so tree depth
//! counts such scans and the N-scan window is measured in them too.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::domain::{CameraNetworkModel, ObsId, Observation, TrackerConfig, TrackingMode};
use crate::error::{Error, Result};
use crate::gating::{end_of_track_deadline, gate};
use crate::par;
use crate::scoring::{delta_log_score, update_mean_feature, BranchScoreState};
use crate::stream::{EventKind, ObsEvent};

/// Stable identifier of a hypothesis node, unique for the forest's lifetime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

/// Arena slot of a live node. Slots are recycled after deletion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeRef(u32);

impl NodeRef {
    fn idx(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Status {
    #[serde(rename = "w1_tracking")]
    Tracking,
    #[serde(rename = "w2_searching")]
    Searching,
    #[serde(rename = "w3_end")]
    Ended,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Tracking => "w1",
            Status::Searching => "w2",
            Status::Ended => "w3",
        })
    }
}

#[derive(Debug, Clone)]
pub struct HypNode {
    pub id: NodeId,
    pub obs_id: ObsId,
    pub dummy: bool,
    pub parent: Option<NodeRef>,
    pub children: Vec<NodeRef>,
    /// Meaningful on leaves only.
    pub status: Status,
    pub score: BranchScoreState,
    pub search_started_at: Option<f64>,
    /// Number of edges from the root.
    pub depth: u32,
}

impl HypNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// A leaf as referenced by a global hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LeafHandle {
    pub slot: NodeRef,
    pub node: NodeId,
}

/// A set of mutually compatible branches: the current multi-camera tracks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GlobalHypothesis {
    pub branches: Vec<LeafHandle>,
    /// Observation sequence of each branch, dummies elided.
    pub tracks: Vec<Vec<ObsId>>,
    pub scores: Vec<f64>,
    pub total_score: f64,
}

impl GlobalHypothesis {
    /// No observation may belong to two tracks.
    pub fn check_disjoint(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for t in &self.tracks {
            for o in t {
                if !seen.insert(*o) {
                    return Err(Error::Consistency(format!("{o} is shared by two selected tracks")));
                }
            }
        }
        Ok(())
    }

    pub fn covered(&self) -> BTreeSet<ObsId> {
        self.tracks.iter().flatten().copied().collect()
    }
}

/// What a call to [`HypothesisForest::ingest_scan`] did.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScanSummary {
    pub scan: i64,
    pub new_observations: Vec<ObsId>,
    pub ended_observations: Vec<ObsId>,
    pub nodes_added: usize,
    pub leaves_expired: usize,
    /// True when the trees were extended (the scan had new observations).
    pub grew: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PruneSummary {
    pub nodes_removed: usize,
    pub trees_removed: usize,
}

/// Staged observations, then the ids started and the ids ended this scan.
type StagedScan = (BTreeMap<ObsId, Observation>, Vec<ObsId>, Vec<ObsId>);

/// The set of track-hypothesis trees plus the observations they refer to.
#[derive(Debug, Clone)]
pub struct HypothesisForest {
    nodes: Vec<Option<HypNode>>,
    free: Vec<u32>,
    roots: Vec<NodeRef>,
    obs_index: BTreeMap<ObsId, Vec<NodeRef>>,
    observations: BTreeMap<ObsId, Observation>,
    feature_dim: Option<usize>,
    deadlines: HashMap<ObsId, f64>,
    scan_counter: i64,
    clock: f64,
    growth_scans: u64,
    next_id: u64,
}

impl Default for HypothesisForest {
    fn default() -> Self {
        Self::starting_at(0, 0.0)
    }
}

/// Real children to attach below one searching leaf.
struct Extension {
    leaf: NodeRef,
    children: Vec<(ObsId, BranchScoreState)>,
}

impl HypothesisForest {
    /// Empty forest whose next scan is `scan`; `clock` is that scan's start time.
    pub fn starting_at(scan: i64, clock: f64) -> Self {
        Self {
            nodes: Vec::new(),
            free: Vec::new(),
            roots: Vec::new(),
            obs_index: BTreeMap::new(),
            observations: BTreeMap::new(),
            feature_dim: None,
            deadlines: HashMap::new(),
            scan_counter: scan,
            clock,
            growth_scans: 0,
            next_id: 0,
        }
    }

    pub fn scan_counter(&self) -> i64 {
        self.scan_counter
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    /// Number of scans in which the trees were extended.
    pub fn growth_scans(&self) -> u64 {
        self.growth_scans
    }

    pub fn roots(&self) -> &[NodeRef] {
        &self.roots
    }

    pub fn node(&self, r: NodeRef) -> &HypNode {
        self.nodes[r.idx()].as_ref().expect("dangling node reference")
    }

    fn node_mut(&mut self, r: NodeRef) -> &mut HypNode {
        self.nodes[r.idx()].as_mut().expect("dangling node reference")
    }

    pub fn get(&self, h: LeafHandle) -> Option<&HypNode> {
        self.nodes.get(h.slot.idx())?.as_ref().filter(|n| n.id == h.node)
    }

    pub fn handle(&self, r: NodeRef) -> LeafHandle {
        LeafHandle {
            slot: r,
            node: self.node(r).id,
        }
    }

    pub fn observation(&self, id: ObsId) -> Option<&Observation> {
        self.observations.get(&id)
    }

    pub fn observations(&self) -> &BTreeMap<ObsId, Observation> {
        &self.observations
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len() - self.free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    /// Non-dummy nodes referring to `obs`.
    pub fn nodes_for(&self, obs: ObsId) -> &[NodeRef] {
        self.obs_index.get(&obs).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All leaves in depth-first order, trees in creation order.
    pub fn leaves(&self) -> Vec<NodeRef> {
        let mut out = Vec::new();
        let mut stack = Vec::new();
        for &root in &self.roots {
            stack.push(root);
            while let Some(r) = stack.pop() {
                let n = self.node(r);
                if n.is_leaf() {
                    out.push(r);
                } else {
                    stack.extend(n.children.iter().rev());
                }
            }
        }
        out
    }

    pub fn root_of(&self, mut r: NodeRef) -> NodeRef {
        while let Some(p) = self.node(r).parent {
            r = p;
        }
        r
    }

    /// Observations along the branch ending at `leaf`, root first, with
    /// dummy repeats collapsed.
    pub fn branch_observations(&self, leaf: NodeRef) -> Vec<ObsId> {
        let mut out = Vec::new();
        let mut cur = Some(leaf);
        while let Some(r) = cur {
            let n = self.node(r);
            if !n.dummy {
                out.push(n.obs_id);
            }
            cur = n.parent;
        }
        out.reverse();
        out
    }

    /// True when the two branches share an observation.
    pub fn conflict(&self, a: NodeRef, b: NodeRef) -> bool {
        let xs: BTreeSet<ObsId> = self.branch_observations(a).into_iter().collect();
        self.branch_observations(b).iter().any(|o| xs.contains(o))
    }

    fn alloc(&mut self, node: HypNode) -> NodeRef {
        let obs = node.obs_id;
        let dummy = node.dummy;
        let r = match self.free.pop() {
            Some(slot) => {
                self.nodes[slot as usize] = Some(node);
                NodeRef(slot)
            }
            None => {
                self.nodes.push(Some(node));
                NodeRef((self.nodes.len() - 1) as u32)
            }
        };
        if !dummy {
            self.obs_index.entry(obs).or_default().push(r);
        }
        r
    }

    fn fresh_id(&mut self) -> NodeId {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        id
    }

    fn initial_status(o: &Observation) -> (Status, Option<f64>) {
        if o.closed {
            (Status::Searching, Some(o.end_time()))
        } else {
            (Status::Tracking, None)
        }
    }

    fn add_root(&mut self, obs: ObsId, cfg: &TrackerConfig) -> NodeRef {
        let o = &self.observations[&obs];
        let (status, since) = Self::initial_status(o);
        let score = BranchScoreState::initial(o.feature.clone(), cfg);
        let id = self.fresh_id();
        let r = self.alloc(HypNode {
            id,
            obs_id: obs,
            dummy: false,
            parent: None,
            children: Vec::new(),
            status,
            score,
            search_started_at: since,
            depth: 0,
        });
        self.roots.push(r);
        r
    }

    fn add_child(&mut self, parent: NodeRef, obs: ObsId, score: BranchScoreState) -> NodeRef {
        let (status, since) = Self::initial_status(&self.observations[&obs]);
        let depth = self.node(parent).depth + 1;
        let id = self.fresh_id();
        let r = self.alloc(HypNode {
            id,
            obs_id: obs,
            dummy: false,
            parent: Some(parent),
            children: Vec::new(),
            status,
            score,
            search_started_at: since,
            depth,
        });
        self.node_mut(parent).children.push(r);
        r
    }

    fn add_dummy(&mut self, parent: NodeRef) -> NodeRef {
        let p = self.node(parent);
        let node = HypNode {
            id: NodeId(0),
            obs_id: p.obs_id,
            dummy: true,
            parent: Some(parent),
            children: Vec::new(),
            status: p.status,
            score: p.score.clone(),
            search_started_at: p.search_started_at,
            depth: p.depth + 1,
        };
        let id = self.fresh_id();
        let r = self.alloc(HypNode { id, ..node });
        self.node_mut(parent).children.push(r);
        r
    }

    fn set_status(&mut self, r: NodeRef, status: Status) -> Result<()> {
        let n = self.node_mut(r);
        if status < n.status {
            return Err(Error::Consistency(format!(
                "node {} status would move backward from {} to {}",
                n.id.0, n.status, status
            )));
        }
        n.status = status;
        Ok(())
    }

    /// Applies the events of the current scan to copies of the affected
    /// observations; nothing is committed on error.
    fn stage_events(&self, events: &[ObsEvent], net: &CameraNetworkModel, cfg: &TrackerConfig) -> Result<StagedScan> {
        let mut staged: BTreeMap<ObsId, Observation> = BTreeMap::new();
        let mut started = Vec::new();
        let mut ended = Vec::new();
        let mut dim = self.feature_dim;
        let mut last_time = f64::NEG_INFINITY;
        for e in events {
            let scan = cfg.scan_of(e.time);
            if scan != self.scan_counter {
                return Err(Error::Ingest(format!(
                    "event for {} at t={} belongs to scan {scan}, expected scan {}",
                    e.obs_id, e.time, self.scan_counter
                )));
            }
            if e.time < last_time {
                return Err(Error::Ingest(format!("events out of time order at t={}", e.time)));
            }
            last_time = e.time;
            let point = e.point()?;
            if net.mode == TrackingMode::GroundPlane && point.ground_pos.is_none() {
                return Err(Error::Ingest(format!(
                    "{} at t={} lacks ground coordinates in ground_plane mode",
                    e.obs_id, e.time
                )));
            }
            if let Some(f) = &e.feature {
                match dim {
                    Some(d) if d != f.dim() => return Err(Error::DimensionMismatch(d, f.dim())),
                    _ => dim = Some(f.dim()),
                }
            }
            match e.event {
                EventKind::Start => {
                    if self.observations.contains_key(&e.obs_id) || staged.contains_key(&e.obs_id) {
                        return Err(Error::Ingest(format!("{} started twice", e.obs_id)));
                    }
                    let feature = e
                        .feature
                        .clone()
                        .ok_or_else(|| Error::Ingest(format!("start of {} lacks a feature", e.obs_id)))?;
                    let mut o = Observation::open(e.obs_id, e.camera, point, feature);
                    o.entry_point = e.entry_point;
                    staged.insert(e.obs_id, o);
                    started.push(e.obs_id);
                }
                EventKind::Extend | EventKind::End => {
                    let o = match staged.entry(e.obs_id) {
                        Entry::Occupied(slot) => slot.into_mut(),
                        Entry::Vacant(slot) => slot.insert(
                            self.observations
                                .get(&e.obs_id)
                                .ok_or(Error::UnknownObservation(e.obs_id))?
                                .clone(),
                        ),
                    };
                    if o.camera != e.camera {
                        return Err(Error::Ingest(format!("{} changed camera", e.obs_id)));
                    }
                    o.push_point(point)?;
                    if let Some(f) = &e.feature {
                        o.feature = f.clone();
                    }
                    if e.event == EventKind::End {
                        o.closed = true;
                        o.exit_point = e.exit_point;
                        ended.push(e.obs_id);
                    }
                }
            }
        }
        for o in staged.values_mut() {
            o.resolve_points(net);
            if net.mode == TrackingMode::ImagePlane && (o.entry_point.is_none() || (o.closed && o.exit_point.is_none()))
            {
                return Err(Error::Ingest(format!(
                    "{} has no entry/exit point on camera {}",
                    o.id, o.camera
                )));
            }
        }
        Ok((staged, started, ended))
    }

    /// Consumes the events of the next scan and updates the trees:
    ///
    /// 1. tracking leaves whose observation ended become searching,
    /// 2. if the scan brought new observations, every new observation roots a
    ///    tree, every searching leaf gains one child per gated candidate, and
    ///    every pre-existing leaf gains a dummy child,
    /// 3. searching leaves whose timeout elapsed by the end of the scan end.
    pub fn ingest_scan(
        &mut self,
        events: &[ObsEvent],
        net: &CameraNetworkModel,
        cfg: &TrackerConfig,
    ) -> Result<ScanSummary> {
        let (staged, started, ended) = self.stage_events(events, net, cfg)?;
        for o in staged.values() {
            if self.feature_dim.is_none() {
                self.feature_dim = Some(o.feature.dim());
            }
        }
        self.observations.extend(staged);

        let mut summary = ScanSummary {
            scan: self.scan_counter,
            new_observations: started.clone(),
            ended_observations: ended.clone(),
            ..ScanSummary::default()
        };

        let new_set: BTreeSet<ObsId> = started.iter().copied().collect();
        for &obs in &ended {
            if !new_set.contains(&obs) {
                self.close_observation(obs)?;
            }
        }

        if !started.is_empty() {
            let mut fresh = started.clone();
            fresh.sort_by(|a, b| {
                let (oa, ob) = (&self.observations[a], &self.observations[b]);
                oa.start_time().total_cmp(&ob.start_time()).then(a.cmp(b))
            });
            summary.nodes_added = self.grow(&fresh, net, cfg)?;
            self.growth_scans += 1;
            summary.grew = true;
        }

        let scan_end = (self.scan_counter + 1) as f64 * cfg.scan_seconds;
        summary.leaves_expired = self.expire(scan_end, net, cfg)?;
        self.scan_counter += 1;
        self.clock = scan_end;
        Ok(summary)
    }

    /// Switches every tracking leaf of `obs` to searching and refreshes the
    /// branch appearance with the observation's final feature.
    fn close_observation(&mut self, obs: ObsId) -> Result<()> {
        let o = &self.observations[&obs];
        let end = o.end_time();
        let feature = o.feature.clone();
        for r in self.nodes_for(obs).to_vec() {
            let n = self.node(r);
            let refreshed = match n.parent {
                Some(p) => update_mean_feature(&self.node(p).score, &feature)?.mean_feature,
                None => feature.clone(),
            };
            // The subtree below a tracking node is a chain of dummies.
            let mut cur = Some(r);
            while let Some(c) = cur {
                let node = self.node_mut(c);
                node.score.mean_feature = refreshed.clone();
                let next = node.children.first().copied();
                if node.children.len() > 1 {
                    return Err(Error::Consistency(format!("tracking node {} has branched", node.id.0)));
                }
                if node.is_leaf() && node.status == Status::Tracking {
                    node.search_started_at = Some(end);
                    self.set_status(c, Status::Searching)?;
                }
                cur = next;
            }
        }
        Ok(())
    }

    fn grow(&mut self, fresh: &[ObsId], net: &CameraNetworkModel, cfg: &TrackerConfig) -> Result<usize> {
        let prior = self.leaves();
        let searching: Vec<NodeRef> = prior
            .iter()
            .copied()
            .filter(|&r| self.node(r).status == Status::Searching)
            .collect();

        let extensions: Vec<Extension> = par::try_map(cfg.execution, &searching, |&leaf| {
            let n = self.node(leaf);
            let last = &self.observations[&n.obs_id];
            let mut children = Vec::new();
            for id in fresh {
                let cand = &self.observations[id];
                if cand.start_time() <= last.end_time() {
                    continue;
                }
                if !gate(last, cand, net, cfg)?.admissible {
                    continue;
                }
                let inc = delta_log_score(&n.score, last, cand, net, cfg)?;
                if !inc.is_finite() {
                    continue;
                }
                children.push((*id, n.score.extend(inc, &cand.feature)?));
            }
            Ok::<_, Error>(Extension { leaf, children })
        })?;

        let before = self.node_count();
        let mut ext = extensions.into_iter().peekable();
        for leaf in prior {
            if ext.peek().is_some_and(|e| e.leaf == leaf) {
                let e = ext.next().expect("peeked");
                for (obs, score) in e.children {
                    self.add_child(leaf, obs, score);
                }
            }
            self.add_dummy(leaf);
        }
        for &obs in fresh {
            self.add_root(obs, cfg);
        }
        Ok(self.node_count() - before)
    }

    fn deadline(&mut self, obs: ObsId, net: &CameraNetworkModel, cfg: &TrackerConfig) -> Result<f64> {
        if let Some(&d) = self.deadlines.get(&obs) {
            return Ok(d);
        }
        let d = end_of_track_deadline(&self.observations[&obs], net, cfg)?;
        self.deadlines.insert(obs, d);
        Ok(d)
    }

    fn expire(&mut self, now: f64, net: &CameraNetworkModel, cfg: &TrackerConfig) -> Result<usize> {
        let mut expired = 0;
        for leaf in self.leaves() {
            let n = self.node(leaf);
            if n.status != Status::Searching {
                continue;
            }
            let (obs, since) = (
                n.obs_id,
                n.search_started_at.expect("searching leaves record their start"),
            );
            if now - since > self.deadline(obs, net, cfg)? {
                self.set_status(leaf, Status::Ended)?;
                expired += 1;
            }
        }
        Ok(expired)
    }

    fn remove_subtree(&mut self, top: NodeRef) -> usize {
        let mut removed = 0;
        let mut stack = vec![top];
        while let Some(r) = stack.pop() {
            let n = self.nodes[r.idx()].take().expect("dangling node reference");
            if !n.dummy {
                if let Some(list) = self.obs_index.get_mut(&n.obs_id) {
                    list.retain(|&x| x != r);
                    if list.is_empty() {
                        self.obs_index.remove(&n.obs_id);
                    }
                }
            }
            stack.extend(n.children);
            self.free.push(r.0);
            removed += 1;
        }
        removed
    }

    /// N-scan pruning against the best global hypothesis.
    ///
    /// From every selected leaf the decision node is found `n_scan` levels up;
    /// its children that do not lead to the selected leaf are deleted. Leaves
    /// with fewer than `n_scan` ancestors are left alone. Afterwards, trees
    /// without a selected leaf are deleted when their root observation lies on
    /// the committed (unbranched) prefix of a tree holding a selected leaf.
    pub fn n_scan_prune(&mut self, best: &GlobalHypothesis, cfg: &TrackerConfig) -> Result<PruneSummary> {
        let mut summary = PruneSummary::default();
        if !cfg.prune {
            return Ok(summary);
        }
        let mut selected = Vec::with_capacity(best.branches.len());
        for h in &best.branches {
            if self.get(*h).is_none_or(|n| !n.is_leaf()) {
                return Err(Error::Consistency(format!(
                    "selected node {} is not a live leaf",
                    h.node.0
                )));
            }
            selected.push(h.slot);
        }

        for &leaf in &selected {
            let mut on_path = leaf;
            let mut decision = None;
            for step in 0..cfg.n_scan {
                match self.node(on_path).parent {
                    Some(p) if step + 1 == cfg.n_scan => decision = Some(p),
                    Some(p) => on_path = p,
                    None => break,
                }
            }
            let Some(decision) = decision else { continue };
            let doomed: Vec<NodeRef> = self
                .node(decision)
                .children
                .iter()
                .copied()
                .filter(|&c| c != on_path)
                .collect();
            for c in doomed {
                summary.nodes_removed += self.remove_subtree(c);
            }
            self.node_mut(decision).children.retain(|&c| c == on_path);
        }

        let selected_roots: BTreeSet<NodeRef> = selected.iter().map(|&l| self.root_of(l)).collect();
        let mut committed = BTreeSet::new();
        for &root in &selected_roots {
            let mut cur = root;
            loop {
                let n = self.node(cur);
                if !n.dummy {
                    committed.insert(n.obs_id);
                }
                if n.children.len() != 1 {
                    break;
                }
                cur = n.children[0];
            }
        }
        let doomed: Vec<NodeRef> = self
            .roots
            .iter()
            .copied()
            .filter(|r| !selected_roots.contains(r) && committed.contains(&self.node(*r).obs_id))
            .collect();
        for r in &doomed {
            summary.nodes_removed += self.remove_subtree(*r);
            summary.trees_removed += 1;
        }
        let doomed: BTreeSet<NodeRef> = doomed.into_iter().collect();
        self.roots.retain(|r| !doomed.contains(r));
        Ok(summary)
    }

    /// Indented text rendering with one node per line:
    /// `#<node_id> <obs_id> <real|dummy> <status> <score>`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "scan {} clock {:.3} growth {} trees {} nodes {}",
            self.scan_counter,
            self.clock,
            self.growth_scans,
            self.roots.len(),
            self.node_count()
        );
        for &root in &self.roots {
            let mut stack = vec![root];
            while let Some(r) = stack.pop() {
                let n = self.node(r);
                let _ = writeln!(
                    s,
                    "{:indent$}#{} {} {} {} {:.6}",
                    "",
                    n.id.0,
                    n.obs_id,
                    if n.dummy { "dummy" } else { "real" },
                    n.status,
                    n.score.log_score,
                    indent = 2 * n.depth as usize
                );
                stack.extend(n.children.iter().rev());
            }
        }
        s
    }

    /// Full structural self-check: parent/child links, the observation
    /// index, dummy labels, time ordering along every branch, and that every
    /// ingested observation is still on some branch.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Consistency(m));
        let mut index: BTreeMap<ObsId, BTreeSet<NodeRef>> = BTreeMap::new();
        let mut reached = 0usize;
        for &root in &self.roots {
            if self.node(root).parent.is_some() {
                return fail(format!("root {} has a parent", self.node(root).id.0));
            }
            let mut stack = vec![root];
            while let Some(r) = stack.pop() {
                reached += 1;
                let n = self.node(r);
                if !n.dummy {
                    index.entry(n.obs_id).or_default().insert(r);
                }
                for &c in &n.children {
                    let child = self.node(c);
                    if child.parent != Some(r) {
                        return fail(format!("node {} has a wrong parent link", child.id.0));
                    }
                    if child.dummy && child.obs_id != n.obs_id {
                        return fail(format!("dummy {} does not repeat its parent", child.id.0));
                    }
                    if child.depth != n.depth + 1 {
                        return fail(format!("node {} has a wrong depth", child.id.0));
                    }
                }
                stack.extend(n.children.iter().copied());
            }
        }
        if reached != self.node_count() {
            return fail(format!("{} nodes are unreachable", self.node_count() - reached));
        }
        let actual: BTreeMap<ObsId, BTreeSet<NodeRef>> = self
            .obs_index
            .iter()
            .map(|(k, v)| (*k, v.iter().copied().collect()))
            .collect();
        if actual != index {
            return fail("observation index disagrees with the trees".into());
        }
        if let Some(lost) = self.observations.keys().find(|o| !index.contains_key(o)) {
            return fail(format!("{lost} is on no surviving branch"));
        }
        for leaf in self.leaves() {
            let obs = self.branch_observations(leaf);
            let mut seen = BTreeSet::new();
            for w in obs.windows(2) {
                let (a, b) = (&self.observations[&w[0]], &self.observations[&w[1]]);
                if !(b.start_time() > a.end_time()) {
                    return fail(format!("branch {} -> {} is not time ordered", a.id, b.id));
                }
            }
            if !obs.iter().all(|o| seen.insert(*o)) {
                return fail(format!(
                    "branch ending at node {} repeats an observation",
                    self.node(leaf).id.0
                ));
            }
        }
        Ok(())
    }
}
