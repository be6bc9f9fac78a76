//! Tracklet rectification: join broken tracklets into full tracks and mine
//! the joins as hard-example clips.
//!
//! A candidate join `(i, j)` requires tracklet `j` to start strictly after
//! `i` ends, the IoU between `i`'s last box and `j`'s first box to be at
//! least `mu`, and the time gap between them to be at most `gamma` seconds.
//! Valid candidates score `tiou + (1 - gap / gamma)`. Each round picks the
//! maximum-weight set of joins in which every tracklet has at most one
//! successor and one predecessor, merges the chains, and repeats until a
//! round accepts nothing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assignment::{has_perfect_matching, hungarian_min};
use crate::error::{Error, Result};
use crate::geometry::{iou, BoundingBox};
use crate::track::{TrackPoint, Tracklet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RectifyConfig {
    /// Minimum endpoint IoU.
    pub mu: f64,
    /// Maximum gap in seconds.
    pub gamma: f64,
    pub interpolate_gaps: bool,
    /// Seconds of context added on both sides of a mined clip.
    pub clip_padding: f64,
    /// Drop tracklets whose mean score is below this before matching.
    pub min_score: Option<f64>,
}

impl Default for RectifyConfig {
    fn default() -> Self {
        Self {
            mu: 0.1,
            gamma: 0.5,
            interpolate_gaps: true,
            clip_padding: 0.5,
            min_score: None,
        }
    }
}

impl RectifyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::InvalidConfig(format!("mu must be in [0, 1], got {}", self.mu)));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.clip_padding.is_finite() && self.clip_padding >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "clip_padding must be non-negative, got {}",
                self.clip_padding
            )));
        }
        Ok(())
    }
}

/// Endpoint statistics of a valid pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairScore {
    pub cost: f64,
    pub tiou: f64,
    /// Seconds between the last frame of the earlier and the first frame of
    /// the later tracklet.
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchCandidate {
    /// Index of the earlier tracklet.
    pub i: usize,
    /// Index of the later tracklet.
    pub j: usize,
    pub cost: f64,
    pub tiou: f64,
    pub gap: f64,
}

/// Score of joining `a` (earlier) to `b` (later); `Ok(None)` when the pair
/// violates a hard constraint.
pub fn pair_cost(a: &Tracklet, b: &Tracklet, cfg: &RectifyConfig) -> Result<Option<PairScore>> {
    if a.fps() != b.fps() {
        return Err(Error::FpsMismatch {
            a: a.id(),
            b: b.id(),
            fps_a: a.fps(),
            fps_b: b.fps(),
        });
    }
    if b.start_frame() <= a.end_frame() {
        return Ok(None);
    }
    let gap = f64::from(b.start_frame() - a.end_frame()) / a.fps();
    if gap > cfg.gamma {
        return Ok(None);
    }
    let tiou = iou(a.last_box(), b.first_box());
    if tiou < cfg.mu {
        return Ok(None);
    }
    Ok(Some(PairScore {
        cost: tiou + (1.0 - gap / cfg.gamma),
        tiou,
        gap,
    }))
}

fn check_same_fps(tracklets: &[Tracklet]) -> Result<()> {
    if let Some(first) = tracklets.first() {
        if let Some(other) = tracklets.iter().find(|t| t.fps() != first.fps()) {
            return Err(Error::FpsMismatch {
                a: first.id(),
                b: other.id(),
                fps_a: first.fps(),
                fps_b: other.fps(),
            });
        }
    }
    Ok(())
}

/// All valid candidates, sorted by `(i, j)`.
pub fn candidates(tracklets: &[Tracklet], cfg: &RectifyConfig) -> Result<Vec<MatchCandidate>> {
    cfg.validate()?;
    check_same_fps(tracklets)?;
    let Some(first) = tracklets.first() else {
        return Ok(Vec::new());
    };
    // Only tracklets starting within gamma of an end can pair with it.
    let max_gap_frames = (cfg.gamma * first.fps()).floor() as u64 + 1;
    let mut by_start: Vec<(u32, usize)> = tracklets
        .iter()
        .enumerate()
        .map(|(k, t)| (t.start_frame(), k))
        .collect();
    by_start.sort_unstable();

    let mut out = Vec::new();
    for (i, a) in tracklets.iter().enumerate() {
        let end = a.end_frame();
        let lo = by_start.partition_point(|&(s, _)| s <= end);
        for &(start, j) in &by_start[lo..] {
            if u64::from(start - end) > max_gap_frames {
                break;
            }
            if let Some(s) = pair_cost(a, &tracklets[j], cfg)? {
                out.push(MatchCandidate {
                    i,
                    j,
                    cost: s.cost,
                    tiou: s.tiou,
                    gap: s.gap,
                });
            }
        }
    }
    out.sort_by_key(|c| (c.i, c.j));
    Ok(out)
}

/// Sum of costs in `(i, j)` order.
pub fn total_cost(joins: &[MatchCandidate]) -> f64 {
    let mut sorted: Vec<&MatchCandidate> = joins.iter().collect();
    sorted.sort_by_key(|c| (c.i, c.j));
    sorted.iter().map(|c| c.cost).sum()
}

// Costs lie in [0, 2]. Scaling by 2^56 is exact for every cost >= 2^-4,
// which covers all costs whenever mu >= 0.0625.
const COST_SCALE: f64 = (1u64 << 56) as f64;

fn quantize(cost: f64) -> i128 {
    (cost * COST_SCALE).round() as i128
}

/// Sum of costs in fixed point, exact for costs on the 2^-56 grid, so the
/// result does not depend on summation order.
pub fn exact_cost_sum(costs: impl IntoIterator<Item = f64>) -> i128 {
    costs.into_iter().map(quantize).sum()
}

struct DisjointSet(Vec<usize>);

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Maximum-weight set of joins over precomputed candidates, with at most one
/// join per earlier index and per later index.
///
/// Solved exactly per connected component of the candidate graph. Among
/// optimal sets the lexicographically smallest sorted `(i, j)` list wins.
pub fn solve_candidates(n: usize, cands: &[MatchCandidate]) -> Vec<MatchCandidate> {
    if cands.is_empty() {
        return Vec::new();
    }
    // Left node i -> i, right node j -> n + j.
    let mut dsu = DisjointSet::new(2 * n);
    for c in cands {
        dsu.union(c.i, n + c.j);
    }
    let mut components: BTreeMap<usize, Vec<&MatchCandidate>> = BTreeMap::new();
    for c in cands {
        components.entry(dsu.find(c.i)).or_default().push(c);
    }

    let mut out: Vec<MatchCandidate> = components.values().flat_map(|comp| solve_component(comp)).collect();
    out.sort_by_key(|c| (c.i, c.j));
    out
}

fn solve_component(comp: &[&MatchCandidate]) -> Vec<MatchCandidate> {
    if comp.len() == 1 {
        return vec![*comp[0]];
    }
    let mut rows: Vec<usize> = comp.iter().map(|c| c.i).collect();
    let mut cols: Vec<usize> = comp.iter().map(|c| c.j).collect();
    rows.sort_unstable();
    rows.dedup();
    cols.sort_unstable();
    cols.dedup();
    let k = rows.len().max(cols.len());
    let local = |v: &[usize], x: usize| v.binary_search(&x).expect("node in component");

    // Square min-cost problem; a zero cell means "leave both unmatched".
    let mut cost = vec![vec![0i128; k]; k];
    let mut edge: Vec<Vec<Option<&MatchCandidate>>> = vec![vec![None; k]; k];
    for &c in comp {
        let (r, s) = (local(&rows, c.i), local(&cols, c.j));
        cost[r][s] = -quantize(c.cost);
        edge[r][s] = Some(c);
    }
    let sol = hungarian_min(&cost);

    let chosen: Vec<(usize, usize)> = sol
        .row_to_col
        .iter()
        .enumerate()
        .filter(|&(r, &s)| edge[r][s].is_some())
        .map(|(r, &s)| (r, s))
        .collect();

    // Every optimal assignment uses only zero-reduced-cost cells.
    let tight: Vec<Vec<bool>> = (0..k)
        .map(|r| (0..k).map(|s| sol.reduced_cost(&cost, r, s) == 0).collect())
        .collect();
    let mut tight_edges: Vec<(usize, usize)> = (0..k)
        .flat_map(|r| (0..k).map(move |s| (r, s)))
        .filter(|&(r, s)| tight[r][s] && edge[r][s].is_some())
        .collect();

    if tight_edges.len() == chosen.len() {
        // Unique optimum.
        return chosen.iter().map(|&(r, s)| *edge[r][s].unwrap()).collect();
    }

    // Ties: greedily fix the smallest (i, j) that still admits an optimal
    // completion. Local order matches global order since rows/cols are sorted.
    tight_edges.sort_unstable();
    let mut adj = tight;
    let mut row_used = vec![false; k];
    let mut col_used = vec![false; k];
    let mut fixed = Vec::new();
    for (r, s) in tight_edges {
        if row_used[r] || col_used[s] {
            continue;
        }
        row_used[r] = true;
        col_used[s] = true;
        let free_rows: Vec<usize> = (0..k).filter(|&x| !row_used[x]).collect();
        let free_cols: Vec<usize> = (0..k).filter(|&x| !col_used[x]).collect();
        let sub: Vec<Vec<bool>> = free_rows
            .iter()
            .map(|&x| free_cols.iter().map(|&y| adj[x][y]).collect())
            .collect();
        if has_perfect_matching(&sub) {
            fixed.push(*edge[r][s].unwrap());
        } else {
            row_used[r] = false;
            col_used[s] = false;
            adj[r][s] = false;
        }
    }
    fixed
}

/// Optimal joins among `tracklets` for one round.
pub fn solve_matching(tracklets: &[Tracklet], cfg: &RectifyConfig) -> Result<Vec<MatchCandidate>> {
    let cands = candidates(tracklets, cfg)?;
    Ok(solve_candidates(tracklets.len(), &cands))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinRecord {
    pub iteration: u32,
    pub earlier_id: u64,
    pub later_id: u64,
    /// Frame range `[start, end]` of the earlier track when it was joined.
    pub earlier_span: (u32, u32),
    pub later_span: (u32, u32),
    /// Last frame of the earlier track and first frame of the later one.
    pub gap_span: (u32, u32),
    pub cost: f64,
    pub tiou: f64,
    pub gap_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MergeLog {
    pub fps: f64,
    /// Number of solve rounds, including the final one that accepted nothing.
    pub iterations: u32,
    pub joins: Vec<JoinRecord>,
}

fn interpolate(a: &TrackPoint, b: &TrackPoint) -> Vec<TrackPoint> {
    let (acx, acy) = a.bbox.center();
    let (bcx, bcy) = b.bbox.center();
    let span = f64::from(b.frame - a.frame);
    (a.frame + 1..b.frame)
        .map(|f| {
            let t = f64::from(f - a.frame) / span;
            let lerp = |p: f64, q: f64| p + (q - p) * t;
            let bbox = BoundingBox::from_center(
                lerp(acx, bcx),
                lerp(acy, bcy),
                lerp(a.bbox.w(), b.bbox.w()),
                lerp(a.bbox.h(), b.bbox.h()),
            )
            .expect("interpolation of valid boxes is valid");
            TrackPoint {
                frame: f,
                bbox,
                interpolated: true,
            }
        })
        .collect()
}

fn merge_chains(tracks: Vec<Tracklet>, joins: &[MatchCandidate], fill: bool) -> Result<Vec<Tracklet>> {
    let n = tracks.len();
    let mut next = vec![None; n];
    let mut has_prev = vec![false; n];
    for c in joins {
        next[c.i] = Some(c.j);
        has_prev[c.j] = true;
    }
    let mut slots: Vec<Option<Tracklet>> = tracks.into_iter().map(Some).collect();
    let mut out = Vec::new();
    for head in 0..n {
        if has_prev[head] {
            continue;
        }
        let first = slots[head].take().expect("each track visited once");
        let (id, fps, score) = (first.id(), first.fps(), first.score());
        let mut points = first.into_points();
        let mut cur = head;
        while let Some(j) = next[cur] {
            let later = slots[j].take().expect("each track visited once").into_points();
            if fill {
                let gap = interpolate(points.last().unwrap(), &later[0]);
                points.extend(gap);
            }
            points.extend(later);
            cur = j;
        }
        out.push(Tracklet::new(id, points, fps)?.with_score(score));
    }
    Ok(out)
}

/// Repeatedly solve and merge until no joins are accepted.
///
/// Joined tracks keep the earliest tracklet's id and their position in the
/// input order.
pub fn rectify(tracklets: Vec<Tracklet>, cfg: &RectifyConfig) -> Result<(Vec<Tracklet>, MergeLog)> {
    cfg.validate()?;
    check_same_fps(&tracklets)?;
    let fps = tracklets.first().map(|t| t.fps()).unwrap_or(0.0);
    let mut tracks: Vec<Tracklet> = match cfg.min_score {
        Some(min) => tracklets
            .into_iter()
            .filter(|t| t.score().is_none_or(|s| s >= min))
            .collect(),
        None => tracklets,
    };
    let mut log = MergeLog {
        fps,
        iterations: 0,
        joins: Vec::new(),
    };
    loop {
        log.iterations += 1;
        let joins = solve_matching(&tracks, cfg)?;
        if joins.is_empty() {
            break;
        }
        for c in &joins {
            let (a, b) = (&tracks[c.i], &tracks[c.j]);
            log.joins.push(JoinRecord {
                iteration: log.iterations,
                earlier_id: a.id(),
                later_id: b.id(),
                earlier_span: (a.start_frame(), a.end_frame()),
                later_span: (b.start_frame(), b.end_frame()),
                gap_span: (a.end_frame(), b.start_frame()),
                cost: c.cost,
                tiou: c.tiou,
                gap_seconds: c.gap,
            });
        }
        let before = tracks.len();
        tracks = merge_chains(tracks, &joins, cfg.interpolate_gaps)?;
        debug_assert!(tracks.len() < before);
    }
    Ok((tracks, log))
}

/// Video identity and length used to clamp mined clips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoExtent {
    pub video: String,
    /// Number of frames; valid indices are `0..frame_count`.
    pub frame_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardClip {
    pub video: String,
    pub start_frame: u32,
    /// Inclusive.
    pub end_frame: u32,
    pub track_ids: Vec<u64>,
    pub gap_spans: Vec<(u32, u32)>,
}

/// One padded clip per join, overlapping clips merged.
pub fn mine_hard_examples(log: &MergeLog, extent: &VideoExtent, cfg: &RectifyConfig) -> Result<Vec<HardClip>> {
    cfg.validate()?;
    if log.joins.is_empty() {
        return Ok(Vec::new());
    }
    if !(log.fps.is_finite() && log.fps > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "merge log fps must be positive, got {}",
            log.fps
        )));
    }
    let last = extent.frame_count.saturating_sub(1);
    let pad = (cfg.clip_padding * log.fps).round() as u32;
    let mut clips: Vec<HardClip> = log
        .joins
        .iter()
        .map(|j| HardClip {
            video: extent.video.clone(),
            start_frame: j.earlier_span.0.saturating_sub(pad).min(last),
            end_frame: j.later_span.1.saturating_add(pad).min(last),
            track_ids: vec![j.earlier_id, j.later_id],
            gap_spans: vec![j.gap_span],
        })
        .collect();
    clips.sort_by_key(|c| (c.start_frame, c.end_frame));

    let mut merged: Vec<HardClip> = Vec::new();
    for clip in clips {
        match merged.last_mut() {
            Some(prev) if clip.start_frame <= prev.end_frame => {
                prev.end_frame = prev.end_frame.max(clip.end_frame);
                prev.track_ids.extend(clip.track_ids);
                prev.gap_spans.extend(clip.gap_spans);
            }
            _ => merged.push(clip),
        }
    }
    for c in &mut merged {
        c.track_ids.sort_unstable();
        c.track_ids.dedup();
        c.gap_spans.sort_unstable();
        c.gap_spans.dedup();
    }
    Ok(merged)
}
