//! Synthetic scenes and brute-force oracles for the rectifier and metrics.
//!
//! Scenes are boxes only. Ground truth is known by construction, so the
//! expected joins never depend on running the matcher.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::associate::DetectionRecord;
use crate::error::{Error, Result};
use crate::geometry::{iou, BoundingBox};
use crate::rectify::{exact_cost_sum, pair_cost, RectifyConfig};
use crate::rng::{seeded, TaskRng};
use crate::track::{TrackPoint, Tracklet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionModel {
    /// Constant velocity, bouncing off the arena walls.
    Linear,
    /// Independent sinusoids in x and y around a fixed center.
    Sinusoidal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Fragmentation {
    pub gaps_per_track: usize,
    /// Inclusive range of missing frames per gap.
    pub gap_frames: (u32, u32),
    /// Shortest fragment produced.
    pub min_fragment: u32,
}

impl Default for Fragmentation {
    fn default() -> Self {
        Self {
            gaps_per_track: 1,
            gap_frames: (2, 10),
            min_fragment: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub agents: usize,
    pub frames: u32,
    pub fps: f64,
    pub motion: MotionModel,
    /// Box width range; height is `aspect * width`.
    pub box_width: (f64, f64),
    pub aspect: f64,
    pub arena: (f64, f64),
    /// Pixels per frame.
    pub speed: (f64, f64),
    pub fragmentation: Fragmentation,
    /// Join rule used to label expected joins.
    pub mu: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            agents: 5,
            frames: 300,
            fps: 30.0,
            motion: MotionModel::Linear,
            box_width: (30.0, 60.0),
            aspect: 2.0,
            arena: (1920.0, 1080.0),
            speed: (0.5, 3.0),
            fragmentation: Fragmentation::default(),
            mu: 0.1,
            gamma: 0.5,
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.frames == 0 || !(self.fps.is_finite() && self.fps > 0.0) {
            return bad(format!(
                "frames and fps must be positive ({}, {})",
                self.frames, self.fps
            ));
        }
        let (wmin, wmax) = self.box_width;
        if !(wmin > 0.0 && wmin <= wmax) || self.aspect.is_nan() || self.aspect <= 0.0 {
            return bad(format!(
                "invalid box size range {:?} / aspect {}",
                self.box_width, self.aspect
            ));
        }
        if wmax >= self.arena.0 || wmax * self.aspect >= self.arena.1 {
            return bad("boxes do not fit in the arena".into());
        }
        if !(self.speed.0 >= 0.0 && self.speed.0 <= self.speed.1) {
            return bad(format!("invalid speed range {:?}", self.speed));
        }
        let fr = &self.fragmentation;
        if fr.gap_frames.0 > fr.gap_frames.1 || fr.min_fragment == 0 {
            return bad(format!("invalid fragmentation {fr:?}"));
        }
        let needed = u64::from(fr.gap_frames.1) * fr.gaps_per_track as u64
            + u64::from(fr.min_fragment) * (fr.gaps_per_track as u64 + 1);
        if needed > u64::from(self.frames) {
            return bad(format!(
                "{} gaps of up to {} frames do not fit in a {}-frame track",
                fr.gaps_per_track, fr.gap_frames.1, self.frames
            ));
        }
        Ok(())
    }

    /// Seconds between the last frame before and the first frame after a gap
    /// of `missing` frames.
    pub fn gap_seconds(&self, missing: u32) -> f64 {
        f64::from(missing + 1) / self.fps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScene {
    pub gt: Vec<Tracklet>,
    pub fragments: Vec<Tracklet>,
    /// `(earlier fragment id, later fragment id)` pairs that satisfy the
    /// join rule by construction.
    pub expected_joins: Vec<(u64, u64)>,
    /// Consecutive fragment pairs excluded from `expected_joins`.
    pub excluded_joins: Vec<(u64, u64)>,
    /// Fragment id to GT id.
    pub owner: BTreeMap<u64, u64>,
}

fn trajectory(cfg: &SceneConfig, rng: &mut TaskRng) -> Result<Vec<BoundingBox>> {
    let w = rng.random_range(cfg.box_width.0..=cfg.box_width.1);
    let h = w * cfg.aspect;
    let (aw, ah) = cfg.arena;
    let speed = rng.random_range(cfg.speed.0..=cfg.speed.1);
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let mut out = Vec::with_capacity(cfg.frames as usize);
    match cfg.motion {
        MotionModel::Linear => {
            let mut x = rng.random_range(0.0..=aw - w);
            let mut y = rng.random_range(0.0..=ah - h);
            let (mut vx, mut vy) = (speed * angle.cos(), speed * angle.sin());
            for _ in 0..cfg.frames {
                out.push(BoundingBox::new(x, y, w, h)?);
                x += vx;
                y += vy;
                if x < 0.0 {
                    x = -x;
                    vx = -vx;
                } else if x > aw - w {
                    x = 2.0 * (aw - w) - x;
                    vx = -vx;
                }
                if y < 0.0 {
                    y = -y;
                    vy = -vy;
                } else if y > ah - h {
                    y = 2.0 * (ah - h) - y;
                    vy = -vy;
                }
            }
        }
        MotionModel::Sinusoidal => {
            let max_ax = ((aw - w) / 2.0).max(1.0);
            let max_ay = ((ah - h) / 2.0).max(1.0);
            let ax = rng.random_range(max_ax.min(20.0)..=max_ax);
            let ay = rng.random_range(max_ay.min(20.0)..=max_ay);
            let cx = rng.random_range(w / 2.0 + ax..=aw - w / 2.0 - ax);
            let cy = rng.random_range(h / 2.0 + ay..=ah - h / 2.0 - ay);
            // Peak speed along each axis equals amplitude * angular rate.
            let (wx, wy) = (speed * angle.cos().abs() / ax, speed * angle.sin().abs() / ay);
            let (px, py) = (
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.0..std::f64::consts::TAU),
            );
            for t in 0..cfg.frames {
                let t = f64::from(t);
                out.push(BoundingBox::from_center(
                    cx + ax * (wx * t + px).sin(),
                    cy + ay * (wy * t + py).sin(),
                    w,
                    h,
                )?);
            }
        }
    }
    Ok(out)
}

/// Split `[0, frames)` into fragments separated by gaps. Returns the
/// fragment ranges `[start, end)`.
fn fragment_ranges(cfg: &SceneConfig, rng: &mut TaskRng) -> Vec<(u32, u32)> {
    let fr = &cfg.fragmentation;
    let g = fr.gaps_per_track;
    let gaps: Vec<u32> = (0..g)
        .map(|_| rng.random_range(fr.gap_frames.0..=fr.gap_frames.1))
        .collect();
    let fixed: u32 = gaps.iter().sum::<u32>() + fr.min_fragment * (g as u32 + 1);
    let slack = cfg.frames - fixed;
    // Random composition of the slack into g + 1 parts.
    let mut cuts: Vec<u32> = (0..g).map(|_| rng.random_range(0..=slack)).collect();
    cuts.sort_unstable();
    let mut lens = Vec::with_capacity(g + 1);
    let mut prev = 0;
    for c in cuts.iter().copied().chain(std::iter::once(slack)) {
        lens.push(fr.min_fragment + c - prev);
        prev = c;
    }
    let mut out = Vec::with_capacity(g + 1);
    let mut start = 0;
    for (k, len) in lens.into_iter().enumerate() {
        out.push((start, start + len));
        start += len + gaps.get(k).copied().unwrap_or(0);
    }
    out
}

pub fn generate_fragmented_scene(cfg: &SceneConfig) -> Result<SyntheticScene> {
    cfg.validate()?;
    let mut rng = seeded(cfg.seed);
    let mut scene = SyntheticScene {
        gt: Vec::with_capacity(cfg.agents),
        fragments: Vec::new(),
        expected_joins: Vec::new(),
        excluded_joins: Vec::new(),
        owner: BTreeMap::new(),
    };
    let mut next_fragment = 1u64;
    for agent in 0..cfg.agents {
        let gt_id = agent as u64 + 1;
        let boxes = trajectory(cfg, &mut rng)?;
        let points: Vec<TrackPoint> = boxes
            .iter()
            .enumerate()
            .map(|(f, b)| TrackPoint::new(f as u32, *b))
            .collect();
        scene.gt.push(Tracklet::new(gt_id, points.clone(), cfg.fps)?);

        let mut previous: Option<(u64, u32)> = None;
        for (start, end) in fragment_ranges(cfg, &mut rng) {
            let id = next_fragment;
            next_fragment += 1;
            scene.fragments.push(Tracklet::new(
                id,
                points[start as usize..end as usize].to_vec(),
                cfg.fps,
            )?);
            scene.owner.insert(id, gt_id);
            if let Some((prev_id, prev_end)) = previous {
                let missing = start - prev_end - 1;
                let ok = cfg.gap_seconds(missing) <= cfg.gamma
                    && iou(&boxes[prev_end as usize], &boxes[start as usize]) >= cfg.mu;
                if ok {
                    scene.expected_joins.push((prev_id, id));
                } else {
                    scene.excluded_joins.push((prev_id, id));
                }
            }
            previous = Some((id, end - 1));
        }
    }
    Ok(scene)
}

/// Per-frame detections from the fragments (what a detector would see),
/// ordered by fragment id within each frame.
pub fn scene_detections(scene: &SyntheticScene, confidence: f64) -> BTreeMap<u32, Vec<DetectionRecord>> {
    let mut out: BTreeMap<u32, Vec<DetectionRecord>> = BTreeMap::new();
    for t in &scene.fragments {
        for p in t.points() {
            out.entry(p.frame).or_default().push(DetectionRecord {
                frame: p.frame,
                bbox: p.bbox,
                confidence,
            });
        }
    }
    out
}

fn point_key(frame: u32, b: &BoundingBox) -> (u32, [u64; 4]) {
    (frame, b.as_array().map(f64::to_bits))
}

/// Consecutive fragment pairs that ended up adjacent inside one output track.
/// Fragments are identified by their exact (frame, box) points, so the
/// result does not depend on the rectifier's bookkeeping.
pub fn realized_joins(fragments: &[Tracklet], output: &[Tracklet]) -> Vec<(u64, u64)> {
    let mut source: HashMap<(u32, [u64; 4]), u64> = HashMap::new();
    for t in fragments {
        for p in t.points() {
            source.insert(point_key(p.frame, &p.bbox), t.id());
        }
    }
    let mut out = Vec::new();
    for t in output {
        let mut last: Option<u64> = None;
        for p in t.points().iter().filter(|p| !p.interpolated) {
            if let Some(&id) = source.get(&point_key(p.frame, &p.bbox)) {
                if let Some(prev) = last {
                    if prev != id {
                        out.push((prev, id));
                    }
                }
                last = Some(id);
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Dense random instance for oracle checks: short tracklets crowded into a
/// small area and a short time window, so most pairs compete.
pub fn random_matching_instance(seed: u64, n: usize, fps: f64) -> Result<Vec<Tracklet>> {
    let mut rng = seeded(seed);
    (0..n)
        .map(|k| {
            let start = rng.random_range(0..24u32);
            let len = rng.random_range(1..=4u32);
            let points = (start..start + len)
                .map(|f| {
                    let b = BoundingBox::new(
                        rng.random_range(0.0..16.0),
                        rng.random_range(0.0..16.0),
                        rng.random_range(16.0..28.0),
                        rng.random_range(16.0..28.0),
                    )?;
                    Ok(TrackPoint::new(f, b))
                })
                .collect::<Result<Vec<_>>>()?;
            Tracklet::new(k as u64 + 1, points, fps)
        })
        .collect()
}

pub const BRUTE_FORCE_MAX: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceSolution {
    /// Sorted `(earlier index, later index)` pairs.
    pub joins: Vec<(usize, usize)>,
    /// Sum of costs in join order.
    pub total: f64,
    /// Fixed-point total used to rank candidates, free of rounding ties.
    pub exact_total: i128,
}

/// Exhaustive optimum of the join objective: every assignment of each
/// tracklet to at most one later tracklet, each later tracklet used once.
pub fn brute_force_matching(tracklets: &[Tracklet], cfg: &RectifyConfig) -> Result<BruteForceSolution> {
    let n = tracklets.len();
    if n > BRUTE_FORCE_MAX {
        return Err(Error::TooManyTracklets {
            got: n,
            max: BRUTE_FORCE_MAX,
        });
    }
    cfg.validate()?;
    let mut cost = vec![vec![None; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                cost[i][j] = pair_cost(&tracklets[i], &tracklets[j], cfg)?.map(|s| s.cost);
            }
        }
    }

    struct Search<'a> {
        cost: &'a [Vec<Option<f64>>],
        used: Vec<bool>,
        current: Vec<(usize, usize)>,
        best: BruteForceSolution,
    }
    impl Search<'_> {
        fn go(&mut self, i: usize) {
            if i == self.cost.len() {
                let costs = self.current.iter().map(|&(a, b)| self.cost[a][b].unwrap());
                let exact_total = exact_cost_sum(costs.clone());
                if exact_total > self.best.exact_total {
                    self.best = BruteForceSolution {
                        joins: self.current.clone(),
                        total: costs.sum(),
                        exact_total,
                    };
                }
                return;
            }
            self.go(i + 1);
            for j in 0..self.cost.len() {
                if self.cost[i][j].is_some() && !self.used[j] {
                    self.used[j] = true;
                    self.current.push((i, j));
                    self.go(i + 1);
                    self.current.pop();
                    self.used[j] = false;
                }
            }
        }
    }

    let mut s = Search {
        cost: &cost,
        used: vec![false; n],
        current: Vec::new(),
        best: BruteForceSolution {
            joins: Vec::new(),
            total: 0.0,
            exact_total: 0,
        },
    };
    s.go(0);
    Ok(s.best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_gap(missing: u32) -> SceneConfig {
        SceneConfig {
            agents: 1,
            frames: 60,
            speed: (0.5, 1.0),
            fragmentation: Fragmentation {
                gaps_per_track: 1,
                gap_frames: (missing, missing),
                min_fragment: 3,
            },
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic() {
        let cfg = SceneConfig {
            seed: 11,
            ..Default::default()
        };
        assert_eq!(
            generate_fragmented_scene(&cfg).unwrap(),
            generate_fragmented_scene(&cfg).unwrap()
        );
        let other = SceneConfig { seed: 12, ..cfg };
        assert_ne!(
            generate_fragmented_scene(&cfg).unwrap(),
            generate_fragmented_scene(&other).unwrap()
        );
    }

    #[test]
    fn one_gap_two_fragments() {
        let scene = generate_fragmented_scene(&one_gap(5)).unwrap();
        assert_eq!(scene.gt.len(), 1);
        assert_eq!(scene.fragments.len(), 2);
        assert_eq!(scene.expected_joins, vec![(1, 2)]);
        let total: usize = scene.fragments.iter().map(Tracklet::len).sum();
        assert_eq!(total, 55);
        assert_eq!(scene.fragments[1].start_frame() - scene.fragments[0].end_frame(), 6);
    }

    #[test]
    fn long_gap_excluded() {
        // 17 missing frames -> 18 frame steps = 0.6 s at 30 fps.
        let cfg = one_gap(17);
        assert!((cfg.gap_seconds(17) - 0.6).abs() < 1e-12);
        let scene = generate_fragmented_scene(&cfg).unwrap();
        assert!(scene.expected_joins.is_empty());
        assert_eq!(scene.excluded_joins, vec![(1, 2)]);
    }

    #[test]
    fn infeasible_rejected() {
        let cfg = SceneConfig {
            frames: 10,
            fragmentation: Fragmentation {
                gaps_per_track: 2,
                gap_frames: (4, 4),
                min_fragment: 3,
            },
            ..Default::default()
        };
        assert!(generate_fragmented_scene(&cfg).is_err());
    }

    #[test]
    fn boxes_stay_in_arena() {
        for motion in [MotionModel::Linear, MotionModel::Sinusoidal] {
            let cfg = SceneConfig {
                agents: 10,
                arena: (400.0, 300.0),
                speed: (5.0, 10.0),
                motion,
                ..Default::default()
            };
            let arena = BoundingBox::new(0.0, 0.0, 400.0, 300.0).unwrap();
            let scene = generate_fragmented_scene(&cfg).unwrap();
            for t in &scene.gt {
                assert!(t.points().iter().all(|p| arena.contains(&p.bbox, 1e-9)));
            }
        }
    }

    #[test]
    fn brute_force_small_cases() {
        let cfg = RectifyConfig::default();
        let s = brute_force_matching(&[], &cfg).unwrap();
        assert!(s.joins.is_empty());
        assert_eq!(s.total, 0.0);

        let b = BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let t = |id, f| Tracklet::new(id, vec![TrackPoint::new(f, b)], 30.0).unwrap();
        let s = brute_force_matching(&[t(1, 0), t(2, 3)], &cfg).unwrap();
        assert_eq!(s.joins, vec![(0, 1)]);

        let many: Vec<Tracklet> = (0..9).map(|k| t(k, k as u32 * 100)).collect();
        assert!(matches!(
            brute_force_matching(&many, &cfg),
            Err(Error::TooManyTracklets { got: 9, max: 8 })
        ));
    }

    #[test]
    fn realized_joins_from_points() {
        let scene = generate_fragmented_scene(&one_gap(5)).unwrap();
        let merged: Vec<TrackPoint> = scene
            .fragments
            .iter()
            .flat_map(|t| t.points().iter().copied())
            .collect();
        let out = vec![Tracklet::new(1, merged, 30.0).unwrap()];
        assert_eq!(realized_joins(&scene.fragments, &out), vec![(1, 2)]);
        assert!(realized_joins(&scene.fragments, &scene.fragments).is_empty());
    }
}
