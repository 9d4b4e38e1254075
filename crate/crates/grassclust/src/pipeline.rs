//! The three clustering tasks, composed from feature extraction, manifold
//! clustering, and label post-processing.
//!
//! State clustering labels whole-network snapshots along the horizon and
//! parcellates time into intervals. Community detection reruns the feature
//! extraction per node inside each discovered state. Subnetwork tracking
//! pools those per-state nodal features into one clustering so a label can
//! persist across states.

use std::collections::BTreeMap;

use crate::config::StageConfig;
use crate::egct::{self, EgctParams, EgctResult};
use crate::error::{Error, Result};
use crate::grassmann::GrassmannPoint;
use crate::karma::{self, TimeSeriesMatrix};
use crate::louvain::ClusterAssignment;

/// Disjoint, ordered, gap-free time intervals with state labels. A state
/// may recur, so several intervals can carry one label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatePartition {
    intervals: Vec<(usize, usize, usize)>,
}

impl StatePartition {
    /// `intervals` as (start, inclusive end, label), already ordered.
    pub fn new(intervals: Vec<(usize, usize, usize)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::input("a partition needs at least one interval"));
        }
        for w in intervals.windows(2) {
            if w[1].0 != w[0].1 + 1 {
                return Err(Error::input(format!(
                    "intervals must tile the horizon; {:?} then {:?}",
                    w[0], w[1]
                )));
            }
        }
        if intervals.iter().any(|&(s, e, _)| e < s) {
            return Err(Error::input("interval end before start"));
        }
        Ok(StatePartition { intervals })
    }

    /// Builds maximal constant-label runs from per-sample labels starting
    /// at `offset`.
    pub fn from_sample_labels(labels: &[usize], offset: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::input("no labeled samples"));
        }
        let mut intervals = Vec::new();
        let mut start = 0usize;
        for t in 1..=labels.len() {
            if t == labels.len() || labels[t] != labels[start] {
                intervals.push((offset + start, offset + t - 1, labels[start]));
                start = t;
            }
        }
        StatePartition::new(intervals)
    }

    pub fn intervals(&self) -> &[(usize, usize, usize)] {
        &self.intervals
    }

    pub fn start(&self) -> usize {
        self.intervals[0].0
    }

    pub fn end(&self) -> usize {
        self.intervals.last().unwrap().1
    }

    /// Distinct state labels, ascending.
    pub fn state_labels(&self) -> Vec<usize> {
        let mut labels: Vec<usize> = self.intervals.iter().map(|&(_, _, l)| l).collect();
        labels.sort_unstable();
        labels.dedup();
        labels
    }

    pub fn num_states(&self) -> usize {
        self.state_labels().len()
    }

    pub fn label_at(&self, t: usize) -> Option<usize> {
        self.intervals.iter().find(|&&(s, e, _)| s <= t && t <= e).map(|&(_, _, l)| l)
    }

    /// Per-sample labels over the covered horizon.
    pub fn sample_labels(&self) -> Vec<usize> {
        self.intervals.iter().flat_map(|&(s, e, l)| std::iter::repeat(l).take(e - s + 1)).collect()
    }

    /// The contiguous spans carrying one state label, in time order.
    pub fn spans_of(&self, label: usize) -> Vec<(usize, usize)> {
        self.intervals.iter().filter(|&&(_, _, l)| l == label).map(|&(s, e, _)| (s, e)).collect()
    }
}

/// State clustering output: the time parcellation plus everything needed
/// to audit it.
#[derive(Debug, Clone)]
pub struct StateClusteringOutput {
    pub partition: StatePartition,
    /// Anchors that produced features, in anchor order.
    pub anchors: Vec<usize>,
    /// Cluster label per anchor, aligned with `anchors`.
    pub anchor_labels: ClusterAssignment,
    /// Majority-vote label per covered sample (offset = partition start).
    pub sample_labels: Vec<usize>,
    pub egct: EgctResult,
    pub warnings: Vec<String>,
}

fn egct_params_with_seed(cfg: &StageConfig, seed: u64) -> EgctParams {
    EgctParams { seed, ..cfg.egct.clone() }
}

/// Index span a state-clustering anchor draws on, inclusive.
fn anchor_window(t: usize, p: &karma::KarmaParams) -> (usize, usize) {
    (t + 1 - p.tau_b, t + p.tau_f + p.m + p.n - 2)
}

/// Votes anchor labels down to per-sample labels over the covered span.
/// Majority wins; ties go to the label with the nearest voting anchor,
/// then to the lower label.
fn majority_vote(
    anchors: &[usize],
    labels: &[usize],
    p: &karma::KarmaParams,
) -> (usize, Vec<usize>) {
    let lo = anchors.iter().map(|&t| anchor_window(t, p).0).min().unwrap();
    let hi = anchors.iter().map(|&t| anchor_window(t, p).1).max().unwrap();
    let k = labels.iter().max().unwrap() + 1;
    let span = hi - lo + 1;
    // votes[s][l] = count; best_dist[s][l] = closest voting anchor.
    let mut votes = vec![vec![0usize; k]; span];
    let mut best_dist = vec![vec![usize::MAX; k]; span];
    for (&t, &l) in anchors.iter().zip(labels) {
        let (ws, we) = anchor_window(t, p);
        for s in ws..=we {
            votes[s - lo][l] += 1;
            let d = t.abs_diff(s);
            if d < best_dist[s - lo][l] {
                best_dist[s - lo][l] = d;
            }
        }
    }
    let sample_labels = (0..span)
        .map(|s| {
            (0..k)
                .filter(|&l| votes[s][l] > 0)
                .min_by(|&a, &b| {
                    votes[s][b]
                        .cmp(&votes[s][a])
                        .then(best_dist[s][a].cmp(&best_dist[s][b]))
                        .then(a.cmp(&b))
                })
                .map(|l| l)
                .unwrap_or(0)
        })
        .collect();
    (lo, sample_labels)
}

/// Fills samples no window covers (possible when anchors fail mid-horizon)
/// with the label of the nearest covered sample.
fn fill_uncovered(labels: &mut [usize], covered: &[bool]) -> usize {
    let mut filled = 0;
    let n = labels.len();
    for s in 0..n {
        if covered[s] {
            continue;
        }
        let left = (0..s).rev().find(|&i| covered[i]);
        let right = (s + 1..n).find(|&i| covered[i]);
        let pick = match (left, right) {
            (Some(l), Some(r)) => {
                if s - l <= r - s {
                    l
                } else {
                    r
                }
            }
            (Some(l), None) => l,
            (None, Some(r)) => r,
            (None, None) => continue,
        };
        labels[s] = labels[pick];
        filled += 1;
    }
    filled
}

/// Merges runs shorter than `min_dwell` into a neighbor, preferring the
/// side whose anchors are more affine (median affinity between the run's
/// anchors and the neighbor's).
fn merge_short_runs(
    mut intervals: Vec<(usize, usize, usize)>,
    min_dwell: usize,
    anchors: &[usize],
    affinity: &crate::louvain::WeightedGraph,
) -> (Vec<(usize, usize, usize)>, usize) {
    let anchor_positions = |s: usize, e: usize| -> Vec<usize> {
        anchors
            .iter()
            .enumerate()
            .filter(|&(_, &t)| s <= t && t <= e)
            .map(|(i, _)| i)
            .collect()
    };
    let median_affinity = |a: &[usize], b: &[usize]| -> f64 {
        let mut vals: Vec<f64> =
            a.iter().flat_map(|&i| b.iter().map(move |&j| affinity.weights()[(i, j)])).collect();
        if vals.is_empty() {
            return f64::NEG_INFINITY;
        }
        vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
        vals[vals.len() / 2]
    };

    let mut merges = 0;
    loop {
        // Coalesce equal-label neighbors first.
        let mut coalesced: Vec<(usize, usize, usize)> = Vec::with_capacity(intervals.len());
        for iv in intervals {
            match coalesced.last_mut() {
                Some(last) if last.2 == iv.2 => last.1 = iv.1,
                _ => coalesced.push(iv),
            }
        }
        intervals = coalesced;
        if intervals.len() <= 1 {
            break;
        }
        let short = intervals
            .iter()
            .enumerate()
            .filter(|(_, &(s, e, _))| e - s + 1 < min_dwell)
            .min_by_key(|(i, &(s, e, _))| (e - s + 1, *i));
        let Some((idx, _)) = short else { break };
        let (s, e, _) = intervals[idx];
        let own = anchor_positions(s, e);
        let left = idx.checked_sub(1).map(|i| intervals[i]);
        let right = intervals.get(idx + 1).copied();
        let take_left = match (left, right) {
            (Some(l), Some(r)) => {
                let ml = median_affinity(&own, &anchor_positions(l.0, l.1));
                let mr = median_affinity(&own, &anchor_positions(r.0, r.1));
                if ml == mr {
                    // Fall back to the longer neighbor, then to the left.
                    l.1 - l.0 >= r.1 - r.0
                } else {
                    ml > mr
                }
            }
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        if take_left {
            let l = idx - 1;
            intervals[l].1 = e;
            intervals.remove(idx);
        } else {
            intervals[idx + 1].0 = s;
            intervals.remove(idx);
        }
        merges += 1;
    }
    (intervals, merges)
}

/// Clusters the horizon into network states and parcellates time.
pub fn cluster_states(
    ts: &TimeSeriesMatrix,
    cfg: &StageConfig,
    seed: u64,
) -> Result<StateClusteringOutput> {
    cfg.validate()?;
    cfg.karma.validate_for_len(ts.len())?;
    let snapshots = karma::assemble_state_snapshots(ts);
    let anchors = cfg.karma.anchors(snapshots.len());
    if anchors.len() < cfg.egct.k_nn + 1 {
        return Err(Error::input(format!(
            "{} anchors cannot support k_nn = {}; series too short",
            anchors.len(),
            cfg.egct.k_nn
        )));
    }

    let horizon = karma::extract_features_over_horizon(&snapshots, &anchors, &cfg.karma, &cfg.kernel)?;
    let mut warnings = Vec::new();
    if !horizon.failures.is_empty() {
        warnings.push(format!(
            "{} of {} anchors failed feature extraction (first: anchor {}: {})",
            horizon.failures.len(),
            anchors.len(),
            horizon.failures[0].0,
            horizon.failures[0].1
        ));
    }
    if !horizon.unstable.is_empty() {
        warnings.push(format!(
            "{} features came from tied spectra; labels may be seed-sensitive",
            horizon.unstable.len()
        ));
    }
    let good_anchors: Vec<usize> = horizon.features.iter().map(|&(t, _)| t).collect();
    let features: Vec<GrassmannPoint> = horizon.features.into_iter().map(|(_, f)| f).collect();
    if features.len() < cfg.egct.k_nn + 1 {
        return Err(Error::degenerate(format!(
            "only {} usable features for k_nn = {}",
            features.len(),
            cfg.egct.k_nn
        )));
    }

    let out = egct::egct(&features, &egct_params_with_seed(cfg, seed))?;
    if !out.degenerate_codes.is_empty() {
        warnings.push(format!("{} features carry degenerate sparse codes", out.degenerate_codes.len()));
    }

    let (offset, mut sample_labels) = majority_vote(&good_anchors, out.assignment.labels(), &cfg.karma);
    let mut covered = vec![false; sample_labels.len()];
    for &t in &good_anchors {
        let (ws, we) = anchor_window(t, &cfg.karma);
        for s in ws..=we {
            covered[s - offset] = true;
        }
    }
    let filled = fill_uncovered(&mut sample_labels, &covered);
    if filled > 0 {
        warnings.push(format!("{filled} samples had no covering window; nearest label used"));
    }

    let raw = StatePartition::from_sample_labels(&sample_labels, offset)?;
    let (merged, merges) =
        merge_short_runs(raw.intervals().to_vec(), cfg.min_dwell, &good_anchors, &out.affinity);
    if merges > 0 {
        warnings.push(format!("{merges} short runs merged into neighbors"));
    }
    let partition = StatePartition::new(merged)?;
    let final_labels = partition.sample_labels();

    Ok(StateClusteringOutput {
        partition,
        anchors: good_anchors,
        anchor_labels: out.assignment.clone(),
        sample_labels: final_labels,
        egct: out,
        warnings,
    })
}

/// Node communities inside one state.
#[derive(Debug, Clone)]
pub struct StateCommunities {
    pub state: usize,
    /// The anchor whose window sat most centrally in the state.
    pub anchor: usize,
    pub assignment: ClusterAssignment,
    pub egct: EgctResult,
}

#[derive(Debug, Clone)]
pub struct CommunityDetectionOutput {
    pub per_state: Vec<StateCommunities>,
    /// States with no usable anchor, with the reason.
    pub skipped: Vec<(usize, String)>,
    pub warnings: Vec<String>,
}

/// Nodal feature block for one state: one feature per node at one anchor.
struct StateFeatures {
    state: usize,
    anchor: usize,
    features: Vec<GrassmannPoint>,
}

/// Raw-sample span a nodal anchor draws on: window indices shift by the
/// buffer length at the forward end.
fn nodal_anchor_span(t: usize, p: &karma::KarmaParams) -> (usize, usize) {
    (t + 1 - p.tau_b, t + p.tau_f + p.m + p.n + p.buff - 3)
}

/// Candidate anchors fully inside [s, e], most-central first.
fn central_anchors(s: usize, e: usize, p: &karma::KarmaParams) -> Vec<usize> {
    let lo = s + p.tau_b - 1;
    let need = p.tau_f + p.m + p.n + p.buff - 3;
    if e < need || lo > e - need {
        return Vec::new();
    }
    let hi = e - need;
    let mid2 = s + e; // doubled interval midpoint, avoids fractions
    let mut candidates: Vec<usize> = (lo..=hi).collect();
    candidates.sort_by_key(|&t| {
        let (ws, we) = nodal_anchor_span(t, p);
        ((ws + we) as i64 - mid2 as i64).abs() as usize
    });
    candidates
}

/// Sliding windows over each node's segment [s, e]: the segment is mean-
/// centered per node and every window is scaled to unit norm. Community
/// structure should reflect a node's temporal signature, not its mixing
/// gain, and the buffered snapshots live in a space whose scale the raw
/// signal amplitude would otherwise dictate; unit-norm windows make the
/// kernel compare waveform shapes, with pair distances bounded by 2.
fn normalized_span_windows(
    ts: &TimeSeriesMatrix,
    s: usize,
    e: usize,
    buff: usize,
) -> Result<Vec<Vec<Vec<f64>>>> {
    (0..ts.num_nodes())
        .map(|v| {
            let mut seg: Vec<f64> = ts.node_series(v)[s..=e].to_vec();
            let mean = seg.iter().sum::<f64>() / seg.len() as f64;
            for x in &mut seg {
                *x -= mean;
            }
            let mut windows = karma::assemble_node_windows(&seg, buff)?;
            for w in &mut windows {
                let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for x in w {
                        *x /= norm;
                    }
                }
            }
            Ok(windows)
        })
        .collect()
}

/// Extracts one feature per node for every state in the partition.
/// Anchors are tried in centrality order until one works for all nodes.
fn per_state_nodal_features(
    ts: &TimeSeriesMatrix,
    partition: &StatePartition,
    cfg: &StageConfig,
) -> Result<(Vec<StateFeatures>, Vec<(usize, String)>, Vec<String>)> {
    cfg.validate()?;

    let mut blocks = Vec::new();
    let mut skipped = Vec::new();
    let mut warnings = Vec::new();
    let mut window_cache: BTreeMap<(usize, usize), Vec<Vec<Vec<f64>>>> = BTreeMap::new();
    for state in partition.state_labels() {
        let mut candidates: Vec<(usize, usize, (usize, usize))> = Vec::new();
        for (s, e) in partition.spans_of(state) {
            for t in central_anchors(s, e, &cfg.karma) {
                let (ws, we) = nodal_anchor_span(t, &cfg.karma);
                debug_assert!(ws >= s && we <= e);
                candidates.push((t, (ws + we).abs_diff(s + e), (s, e)));
            }
        }
        if candidates.is_empty() {
            let need = cfg.karma.tau_b + cfg.karma.tau_f + cfg.karma.m + cfg.karma.n + cfg.karma.buff - 2;
            let msg = format!("no anchor fits (state spans shorter than {need} samples)");
            warnings.push(format!("state {state} skipped: {msg}"));
            skipped.push((state, msg));
            continue;
        }
        candidates.sort_by_key(|&(t, centrality, _)| (centrality, t));

        let mut found = None;
        let mut first_err = None;
        for &(t, _, (s, e)) in &candidates {
            let windows = match window_cache.entry((s, e)) {
                std::collections::btree_map::Entry::Occupied(o) => o.into_mut(),
                std::collections::btree_map::Entry::Vacant(v) => {
                    v.insert(normalized_span_windows(ts, s, e, cfg.karma.buff)?)
                }
            };
            let t_rel = t - s;
            let per_node: Vec<Result<GrassmannPoint>> = windows
                .iter()
                .map(|w| karma::extract_feature(w, t_rel, &cfg.karma, &cfg.kernel))
                .collect();
            if let Some(pos) = per_node.iter().position(|r| r.is_err()) {
                if first_err.is_none() {
                    let e = per_node.into_iter().nth(pos).unwrap().unwrap_err();
                    first_err = Some(format!("node {pos} at anchor {t}: {e}"));
                }
                continue;
            }
            found = Some((t, per_node.into_iter().map(|r| r.unwrap()).collect::<Vec<_>>()));
            break;
        }
        match found {
            Some((anchor, features)) => blocks.push(StateFeatures { state, anchor, features }),
            None => {
                let msg = format!(
                    "no anchor yielded features for every node (first failure: {})",
                    first_err.unwrap_or_else(|| "unknown".into())
                );
                warnings.push(format!("state {state} skipped: {msg}"));
                skipped.push((state, msg));
            }
        }
    }
    Ok((blocks, skipped, warnings))
}

/// Clusters nodes into communities within each state.
pub fn detect_communities(
    ts: &TimeSeriesMatrix,
    partition: &StatePartition,
    cfg: &StageConfig,
    seed: u64,
) -> Result<CommunityDetectionOutput> {
    let (blocks, skipped, mut warnings) = per_state_nodal_features(ts, partition, cfg)?;
    let mut per_state = Vec::new();
    for block in blocks {
        let out = egct::egct(&block.features, &egct_params_with_seed(cfg, seed))?;
        if !out.degenerate_codes.is_empty() {
            warnings.push(format!(
                "state {}: {} nodal features carry degenerate sparse codes",
                block.state,
                out.degenerate_codes.len()
            ));
        }
        per_state.push(StateCommunities {
            state: block.state,
            anchor: block.anchor,
            assignment: out.assignment.clone(),
            egct: out,
        });
    }
    Ok(CommunityDetectionOutput { per_state, skipped, warnings })
}

/// Subnetwork labels over (state, node) pairs from one pooled clustering.
#[derive(Debug, Clone)]
pub struct SubnetworkOutput {
    /// Pooled feature identities, state-major then node order.
    pub pairs: Vec<(usize, usize)>,
    pub assignment: ClusterAssignment,
    pub egct: EgctResult,
    pub skipped: Vec<(usize, String)>,
    pub warnings: Vec<String>,
}

/// Tracks subnetworks across states: per-state nodal features pooled into
/// a single clustering, so one label can span several states.
pub fn track_subnetworks(
    ts: &TimeSeriesMatrix,
    partition: &StatePartition,
    cfg: &StageConfig,
    seed: u64,
) -> Result<SubnetworkOutput> {
    let (blocks, skipped, mut warnings) = per_state_nodal_features(ts, partition, cfg)?;
    let mut pairs = Vec::new();
    let mut features = Vec::new();
    for block in blocks {
        for (node, f) in block.features.into_iter().enumerate() {
            pairs.push((block.state, node));
            features.push(f);
        }
    }
    if features.len() < cfg.egct.k_nn + 1 {
        return Err(Error::input(format!(
            "{} pooled features cannot support k_nn = {}",
            features.len(),
            cfg.egct.k_nn
        )));
    }
    let out = egct::egct(&features, &egct_params_with_seed(cfg, seed))?;
    if !out.degenerate_codes.is_empty() {
        warnings.push(format!("{} pooled features carry degenerate sparse codes", out.degenerate_codes.len()));
    }
    Ok(SubnetworkOutput {
        pairs,
        assignment: out.assignment.clone(),
        egct: out,
        skipped,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use crate::synth::{self, Preset, Scenario};

    fn small_states_cfg() -> StageConfig {
        let mut cfg = RunConfig::default().states;
        // Shrink the embedding so short test horizons still carry anchors.
        cfg.karma.n = 8;
        cfg.karma.tau_f = 20;
        cfg.karma.tau_b = 6;
        cfg.egct.k_nn = 6;
        cfg
    }

    #[test]
    fn partition_invariants_enforced() {
        assert!(StatePartition::new(vec![]).is_err());
        assert!(StatePartition::new(vec![(0, 4, 0), (6, 9, 1)]).is_err()); // gap
        assert!(StatePartition::new(vec![(0, 4, 0), (3, 9, 1)]).is_err()); // overlap
        let p = StatePartition::new(vec![(0, 4, 0), (5, 9, 1), (10, 12, 0)]).unwrap();
        assert_eq!(p.num_states(), 2);
        assert_eq!(p.spans_of(0), vec![(0, 4), (10, 12)]);
        assert_eq!(p.label_at(7), Some(1));
        assert_eq!(p.label_at(13), None);
    }

    #[test]
    fn sample_label_runs_become_intervals() {
        let labels = [1, 1, 1, 0, 0, 2, 2, 2, 2];
        let p = StatePartition::from_sample_labels(&labels, 10).unwrap();
        assert_eq!(p.intervals(), &[(10, 12, 1), (13, 14, 0), (15, 18, 2)]);
        assert_eq!(p.sample_labels(), labels);
    }

    #[test]
    fn majority_vote_prefers_count_then_distance() {
        let p = karma::KarmaParams { n: 2, m: 1, rho: 1, tau_f: 2, tau_b: 2, ..Default::default() };
        // Window of anchor t is [t-1, t+3].
        let anchors = [1, 2, 4, 5];
        let labels = [0, 0, 1, 1];
        let (lo, votes) = majority_vote(&anchors, &labels, &p);
        assert_eq!(lo, 0);
        // Sample 3: anchors 1,2 vote 0, anchor 4 votes 1 -> majority 0.
        assert_eq!(votes[3], 0);
        // Sample 4: all four anchors cover it, 2-2 tie; label 1 has the
        // nearer anchor (4, distance 0 vs distance 2).
        assert_eq!(votes[4], 1);
    }

    #[test]
    fn short_runs_merge_into_closer_neighbor() {
        use nalgebra::DMatrix;
        // Three intervals; the middle is 2 samples, below min_dwell 3.
        let intervals = vec![(0, 9, 0), (10, 11, 1), (12, 21, 2)];
        // Anchors 0..10 in first, 10..12 middle, 12..22 last.
        let anchors: Vec<usize> = (0..22).collect();
        let n = anchors.len();
        let mut w = DMatrix::zeros(n, n);
        // Middle anchors (10, 11) strongly affine to the RIGHT block.
        for i in 10..12 {
            for j in 12..22 {
                w[(i, j)] = 1.0;
                w[(j, i)] = 1.0;
            }
            for j in 0..10 {
                w[(i, j)] = 0.1;
                w[(j, i)] = 0.1;
            }
        }
        for i in 0..n {
            w[(i, i)] = 0.0;
        }
        let g = crate::louvain::WeightedGraph::new(w).unwrap();
        let (merged, merges) = merge_short_runs(intervals, 3, &anchors, &g);
        assert_eq!(merges, 1);
        assert_eq!(merged, vec![(0, 9, 0), (10, 21, 2)]);
    }

    /// A one-community spec on few nodes; the stock outlier count assumes
    /// ten nodes, so drop outliers entirely.
    fn plain_spec(nodes: std::ops::Range<usize>, sigma_db: f64, samples: usize) -> synth::StateSpec {
        let mut spec = synth::StateSpec::new(vec![nodes.collect()], 0.0, sigma_db, samples);
        spec.n_outlier_entries = 0;
        spec
    }

    #[test]
    fn single_state_data_yields_one_interval() {
        let scenario = Scenario { states: vec![plain_spec(0..6, -20.0, 220)] };
        let sim = synth::gen_timeseries(&scenario, 3).unwrap();
        let out = cluster_states(&sim.series, &small_states_cfg(), 3).unwrap();
        assert_eq!(out.partition.intervals().len(), 1);
        assert_eq!(out.partition.num_states(), 1);
    }

    #[test]
    fn constant_data_is_degenerate() {
        use nalgebra::DMatrix;
        let ts = TimeSeriesMatrix::new(DMatrix::from_element(300, 4, 1.0)).unwrap();
        let err = cluster_states(&ts, &small_states_cfg(), 0).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)), "{err}");
    }

    #[test]
    fn too_short_series_is_an_input_error() {
        let scenario = Scenario { states: vec![plain_spec(0..4, -10.0, 30)] };
        let sim = synth::gen_timeseries(&scenario, 1).unwrap();
        assert!(cluster_states(&sim.series, &small_states_cfg(), 0).is_err());
    }

    #[test]
    fn identical_nodes_always_co_clustered() {
        // Nodes 0 and 1 share a community; with noise fully disabled their
        // series are the same latent bit for bit.
        let mut spec = synth::StateSpec::new(
            vec![(0..2).collect(), (2..6).collect()],
            0.0,
            f64::NEG_INFINITY,
            400,
        );
        spec.n_outlier_entries = 0;
        let scenario = Scenario { states: vec![spec] };
        let sim = synth::gen_timeseries(&scenario, 5).unwrap();
        let truth = StatePartition::new(vec![(0, 399, 0)]).unwrap();
        let mut cfg = RunConfig::default().communities;
        cfg.karma.n = 8;
        cfg.karma.tau_f = 20;
        cfg.karma.tau_b = 5;
        cfg.karma.buff = 12;
        cfg.egct.k_nn = 2;
        let out = detect_communities(&sim.series, &truth, &cfg, 2).unwrap();
        assert_eq!(out.per_state.len(), 1);
        let labels = out.per_state[0].assignment.labels();
        assert_eq!(labels[0], labels[1]);
    }

    #[test]
    fn short_states_are_skipped_with_diagnostics() {
        let scenario = Scenario { states: vec![plain_spec(0..5, -10.0, 300)] };
        let sim = synth::gen_timeseries(&scenario, 9).unwrap();
        // One generous state and one far too short to host any anchor.
        let partition = StatePartition::new(vec![(0, 279, 0), (280, 299, 1)]).unwrap();
        let mut cfg = RunConfig::default().communities;
        cfg.karma.n = 8;
        cfg.karma.tau_f = 20;
        cfg.karma.tau_b = 5;
        cfg.karma.buff = 12;
        cfg.egct.k_nn = 2;
        let out = detect_communities(&sim.series, &partition, &cfg, 0).unwrap();
        assert_eq!(out.per_state.len(), 1);
        assert_eq!(out.skipped.len(), 1);
        assert_eq!(out.skipped[0].0, 1);
        assert!(out.warnings.iter().any(|w| w.contains("state 1 skipped")));
    }

    #[test]
    fn nodal_windows_never_cross_state_boundaries() {
        let cfg = {
            let mut c = RunConfig::default().communities;
            c.karma.n = 8;
            c.karma.tau_f = 15;
            c.karma.tau_b = 5;
            c.karma.buff = 10;
            c
        };
        let p = &cfg.karma;
        for (s, e) in [(0usize, 99usize), (37, 150), (200, 260)] {
            for t in central_anchors(s, e, p) {
                let (ws, we) = nodal_anchor_span(t, p);
                assert!(ws >= s && we <= e, "anchor {t} span [{ws},{we}] leaves [{s},{e}]");
            }
        }
    }

    #[test]
    fn single_state_subnets_match_communities() {
        let scenario = Scenario::preset(Preset::D1).truncated(1);
        let sim = synth::gen_timeseries(&scenario, 4).unwrap();
        let truth = StatePartition::new(vec![(0, 149, 0)]).unwrap();
        let mut cfg = RunConfig::default().communities;
        cfg.karma.n = 10;
        cfg.karma.m = 2;
        cfg.karma.tau_f = 20;
        cfg.karma.tau_b = 5;
        cfg.karma.buff = 15;
        cfg.egct.k_nn = 3;
        let comm = detect_communities(&sim.series, &truth, &cfg, 6).unwrap();
        let sub = track_subnetworks(&sim.series, &truth, &cfg, 6).unwrap();
        assert_eq!(comm.per_state.len(), 1);
        assert_eq!(sub.pairs.len(), sim.series.num_nodes());
        assert_eq!(sub.assignment.labels(), comm.per_state[0].assignment.labels());
    }

    #[test]
    fn pipeline_is_seed_deterministic() {
        let scenario = Scenario::preset(Preset::D1).truncated(2);
        let sim = synth::gen_timeseries(&scenario, 11).unwrap();
        let cfg = small_states_cfg();
        let a = cluster_states(&sim.series, &cfg, 42).unwrap();
        let b = cluster_states(&sim.series, &cfg, 42).unwrap();
        assert_eq!(a.partition, b.partition);
        assert_eq!(a.sample_labels, b.sample_labels);
    }
}
