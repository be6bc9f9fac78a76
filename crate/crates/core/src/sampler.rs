//! Training-pair sampling and batch composition.
//!
//! A batch mixes hallucinated clips (HV) with real clips (RV). RV draws are
//! split between hard clips (mined around repaired track breaks) and easy
//! clips (everything else). Category counts are fixed per batch by half-up
//! rounding; only the clip and frame choices are random.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{encode_motion_target, BoundingBox, MotionTarget};
use crate::hallucinate::HallucinatedVideo;
use crate::rectify::HardClip;
use crate::rng::{task_rng, TaskRng};
use crate::track::Tracklet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleConfig {
    pub batch_size: usize,
    /// |RV| / (|RV| + |HV|).
    pub balancing_ratio: f64,
    /// Fraction of RV draws taken from hard clips. `None` draws RV clips
    /// uniformly from the combined pool.
    pub hard_rate: Option<f64>,
    /// Largest frame gap within a pair; `None` allows up to the clip length.
    pub max_delta: Option<u32>,
    pub seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            balancing_ratio: 0.5,
            hard_rate: Some(0.75),
            max_delta: None,
            seed: 0,
        }
    }
}

impl SampleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.balancing_ratio) {
            return Err(Error::InvalidConfig(format!(
                "balancing_ratio must be in [0, 1], got {}",
                self.balancing_ratio
            )));
        }
        if let Some(r) = self.hard_rate {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidConfig(format!("hard_rate must be in [0, 1], got {r}")));
            }
        }
        if self.max_delta == Some(0) {
            return Err(Error::InvalidConfig("max_delta must be at least 1".into()));
        }
        Ok(())
    }
}

/// `floor(x + 0.5)`, with a small slack so products like 10 * 0.35 that land
/// just under a half still round up.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor().max(0.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Allocation {
    pub hv: usize,
    pub hard_rv: usize,
    pub easy_rv: usize,
}

impl Allocation {
    pub fn rv(&self) -> usize {
        self.hard_rv + self.easy_rv
    }

    pub fn total(&self) -> usize {
        self.hv + self.rv()
    }
}

/// Category counts for one batch. With `hard_rate = None` the RV draws are
/// reported as easy; their actual split is decided per draw.
pub fn allocate(cfg: &SampleConfig) -> Allocation {
    let rv = round_half_up(cfg.batch_size as f64 * cfg.balancing_ratio).min(cfg.batch_size);
    let hard = cfg.hard_rate.map_or(0, |r| round_half_up(rv as f64 * r).min(rv));
    Allocation {
        hv: cfg.batch_size - rv,
        hard_rv: hard,
        easy_rv: rv - hard,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Hv,
    HardRv,
    EasyRv,
}

impl Category {
    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Hv => "hv",
            Category::HardRv => "hard_rv",
            Category::EasyRv => "easy_rv",
        }
    }
}

/// A frame range with visible boxes per identity. Frames are absolute
/// indices into the underlying video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedClip {
    pub clip_id: String,
    /// Frame directory or track file the clip refers to.
    pub path: String,
    pub first_frame: u32,
    /// Inclusive.
    pub last_frame: u32,
    /// identity -> frame -> box; absent frames mean not visible.
    pub tracks: BTreeMap<u64, BTreeMap<u32, BoundingBox>>,
}

impl AnnotatedClip {
    pub fn len(&self) -> u32 {
        self.last_frame - self.first_frame + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Restrict to `[first, last]`, keeping the clip id and path.
    pub fn window(&self, clip_id: String, first: u32, last: u32) -> AnnotatedClip {
        let tracks = self
            .tracks
            .iter()
            .map(|(id, boxes)| {
                (
                    *id,
                    boxes
                        .range(first..=last)
                        .map(|(f, b)| (*f, *b))
                        .collect::<BTreeMap<_, _>>(),
                )
            })
            .filter(|(_, boxes)| !boxes.is_empty())
            .collect();
        AnnotatedClip {
            clip_id,
            path: self.path.clone(),
            first_frame: first,
            last_frame: last,
            tracks,
        }
    }
}

/// Per-identity supervision for one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairTarget {
    pub identity: u64,
    pub bbox: BoundingBox,
    /// Box scaled 2x about its center.
    pub context: BoundingBox,
    /// Whether the identity is present at the later frame.
    pub visible: bool,
    /// Present exactly when `visible`.
    pub motion: Option<MotionTarget>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub clip_id: String,
    pub path: String,
    pub frame: u32,
    pub delta: u32,
    pub targets: Vec<PairTarget>,
}

impl TrainingPair {
    pub fn later_frame(&self) -> u32 {
        self.frame + self.delta
    }
}

/// Targets for frames `t` and `t + delta`. Identities absent at `t` are
/// skipped.
pub fn emit_training_pair(clip: &AnnotatedClip, t: u32, delta: u32) -> Result<TrainingPair> {
    if delta == 0 {
        return Err(Error::InvalidConfig("delta must be at least 1".into()));
    }
    let later = t.checked_add(delta).filter(|l| *l <= clip.last_frame);
    let Some(later) = later.filter(|_| t >= clip.first_frame) else {
        return Err(Error::InvalidConfig(format!(
            "frames {t} and {t}+{delta} are not both inside clip {} [{}, {}]",
            clip.clip_id, clip.first_frame, clip.last_frame
        )));
    };
    let mut targets = Vec::new();
    for (id, boxes) in &clip.tracks {
        let Some(b) = boxes.get(&t) else { continue };
        let next = boxes.get(&later);
        targets.push(PairTarget {
            identity: *id,
            bbox: *b,
            context: b.scaled(2.0)?,
            visible: next.is_some(),
            motion: next.map(|n| encode_motion_target(b, n)),
        });
    }
    Ok(TrainingPair {
        clip_id: clip.clip_id.clone(),
        path: clip.path.clone(),
        frame: t,
        delta,
        targets,
    })
}

/// Draw `delta` uniformly from `[1, min(max_delta, len - 1)]`, then `t`
/// uniformly among positions that keep both frames in the clip.
pub fn sample_pair(clip: &AnnotatedClip, max_delta: Option<u32>, rng: &mut TaskRng) -> Result<TrainingPair> {
    let span = clip.len() - 1;
    if span == 0 {
        return Err(Error::InvalidConfig(format!(
            "clip {} has a single frame",
            clip.clip_id
        )));
    }
    let hi = max_delta.map_or(span, |m| m.min(span));
    let delta = rng.random_range(1..=hi);
    let t = rng.random_range(clip.first_frame..=clip.last_frame - delta);
    emit_training_pair(clip, t, delta)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClipPools {
    pub hv: Vec<AnnotatedClip>,
    pub hard_rv: Vec<AnnotatedClip>,
    pub easy_rv: Vec<AnnotatedClip>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub category: Category,
    #[serde(flatten)]
    pub pair: TrainingPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchManifest {
    pub batch_index: usize,
    pub seed: u64,
    pub allocation: Allocation,
    pub entries: Vec<ManifestEntry>,
}

impl BatchManifest {
    pub fn count(&self, category: Category) -> usize {
        self.entries.iter().filter(|e| e.category == category).count()
    }
}

fn usable<'a>(pool: &'a [AnnotatedClip], name: &'static str) -> Result<Vec<&'a AnnotatedClip>> {
    let clips: Vec<_> = pool.iter().filter(|c| c.len() >= 2).collect();
    if clips.is_empty() {
        return Err(Error::EmptyPool(name));
    }
    Ok(clips)
}

fn draw(pool: &[&AnnotatedClip], max_delta: Option<u32>, rng: &mut TaskRng) -> Result<TrainingPair> {
    let clip = pool[rng.random_range(0..pool.len())];
    sample_pair(clip, max_delta, rng)
}

/// Compose batch number `batch_index`. Entries are ordered HV, hard RV,
/// easy RV.
pub fn compose_batch(pools: &ClipPools, cfg: &SampleConfig, batch_index: usize) -> Result<BatchManifest> {
    cfg.validate()?;
    let alloc = allocate(cfg);
    let mut rng = task_rng(cfg.seed, &format!("batch-{batch_index}"));
    let mut entries = Vec::with_capacity(cfg.batch_size);
    let mut push = |category, pair| entries.push(ManifestEntry { category, pair });

    if alloc.hv > 0 {
        let hv = usable(&pools.hv, "hv")?;
        for _ in 0..alloc.hv {
            push(Category::Hv, draw(&hv, cfg.max_delta, &mut rng)?);
        }
    }
    match cfg.hard_rate {
        Some(_) => {
            if alloc.hard_rv > 0 {
                let hard = usable(&pools.hard_rv, "hard_rv")?;
                for _ in 0..alloc.hard_rv {
                    push(Category::HardRv, draw(&hard, cfg.max_delta, &mut rng)?);
                }
            }
            if alloc.easy_rv > 0 {
                let easy = usable(&pools.easy_rv, "easy_rv")?;
                for _ in 0..alloc.easy_rv {
                    push(Category::EasyRv, draw(&easy, cfg.max_delta, &mut rng)?);
                }
            }
        }
        None if alloc.rv() > 0 => {
            let hard: Vec<_> = pools.hard_rv.iter().filter(|c| c.len() >= 2).collect();
            let easy: Vec<_> = pools.easy_rv.iter().filter(|c| c.len() >= 2).collect();
            let n = hard.len() + easy.len();
            if n == 0 {
                return Err(Error::EmptyPool("rv"));
            }
            for _ in 0..alloc.rv() {
                let k = rng.random_range(0..n);
                let (category, clip) = if k < hard.len() {
                    (Category::HardRv, hard[k])
                } else {
                    (Category::EasyRv, easy[k - hard.len()])
                };
                push(category, sample_pair(clip, cfg.max_delta, &mut rng)?);
            }
        }
        None => {}
    }
    entries.sort_by_key(|e| e.category);
    let allocation = Allocation {
        hv: alloc.hv,
        hard_rv: entries.iter().filter(|e| e.category == Category::HardRv).count(),
        easy_rv: entries.iter().filter(|e| e.category == Category::EasyRv).count(),
    };
    Ok(BatchManifest {
        batch_index,
        seed: cfg.seed,
        allocation,
        entries,
    })
}

pub fn compose_batches(pools: &ClipPools, cfg: &SampleConfig, count: usize) -> Result<Vec<BatchManifest>> {
    (0..count).map(|k| compose_batch(pools, cfg, k)).collect()
}

/// Visible boxes of a hallucinated video as a clip over frames `0..T`.
pub fn clip_from_video(video: &HallucinatedVideo, clip_id: &str, path: &str) -> AnnotatedClip {
    let tracks = video
        .tracks
        .iter()
        .map(|t| {
            let boxes = t
                .annotations
                .iter()
                .filter_map(|a| a.bbox.map(|b| (a.frame, b)))
                .collect();
            (t.identity, boxes)
        })
        .collect();
    AnnotatedClip {
        clip_id: clip_id.to_string(),
        path: path.to_string(),
        first_frame: 0,
        last_frame: video.frames.len().saturating_sub(1) as u32,
        tracks,
    }
}

/// Hard clips become clips as mined; the uncovered rest of the video is cut
/// into easy clips of at most `easy_len` frames. Rectified tracks, including
/// interpolated points, are the pseudo-labels. Pieces shorter than two frames
/// are dropped.
pub fn rv_clips(
    tracks: &[Tracklet],
    hard: &[HardClip],
    video: &str,
    path: &str,
    frame_count: u32,
    easy_len: u32,
) -> Result<(Vec<AnnotatedClip>, Vec<AnnotatedClip>)> {
    if easy_len < 2 {
        return Err(Error::InvalidConfig("easy clip length must be at least 2".into()));
    }
    if frame_count == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let whole = AnnotatedClip {
        clip_id: video.to_string(),
        path: path.to_string(),
        first_frame: 0,
        last_frame: frame_count - 1,
        tracks: tracks
            .iter()
            .map(|t| (t.id(), t.points().iter().map(|p| (p.frame, p.bbox)).collect()))
            .collect(),
    };
    let mut ranges: Vec<(u32, u32)> = hard
        .iter()
        .filter(|c| c.video == video)
        .map(|c| (c.start_frame, c.end_frame.min(frame_count - 1)))
        .filter(|(s, e)| s <= e)
        .collect();
    ranges.sort_unstable();

    let hard_clips: Vec<AnnotatedClip> = ranges
        .iter()
        .filter(|(s, e)| e > s)
        .map(|&(s, e)| whole.window(format!("{video}:hard:{}-{}", s + 1, e + 1), s, e))
        .collect();

    let mut easy = Vec::new();
    let mut cursor = 0u32;
    let mut gaps = Vec::new();
    for &(s, e) in &ranges {
        if s > cursor {
            gaps.push((cursor, s - 1));
        }
        cursor = cursor.max(e.saturating_add(1));
    }
    if cursor < frame_count {
        gaps.push((cursor, frame_count - 1));
    }
    for (s, e) in gaps {
        let mut a = s;
        while a <= e {
            let b = e.min(a + easy_len - 1);
            if b > a {
                easy.push(whole.window(format!("{video}:easy:{}-{}", a + 1, b + 1), a, b));
            }
            a = b + 1;
        }
    }
    Ok((hard_clips, easy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::decode_motion_target;
    use crate::rng::seeded;
    use crate::track::TrackPoint;
    use proptest::prelude::*;
    use rand::Rng;

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    fn clip(id: &str, len: u32) -> AnnotatedClip {
        let mut tracks = BTreeMap::new();
        let boxes = (0..len).map(|f| (f, bb(f64::from(f), 5.0, 10.0, 20.0))).collect();
        tracks.insert(1, boxes);
        AnnotatedClip {
            clip_id: id.into(),
            path: format!("{id}/"),
            first_frame: 0,
            last_frame: len - 1,
            tracks,
        }
    }

    fn pools() -> ClipPools {
        ClipPools {
            hv: vec![clip("hv0", 16), clip("hv1", 16)],
            hard_rv: vec![clip("hard0", 30)],
            easy_rv: vec![clip("easy0", 16), clip("easy1", 8)],
        }
    }

    #[test]
    fn pair_targets() {
        let mut c = clip("c", 4);
        c.tracks.insert(
            2,
            [(0, bb(10.0, 10.0, 20.0, 20.0)), (3, bb(10.0, 10.0, 20.0, 20.0))].into(),
        );
        c.tracks.insert(3, [(0, bb(0.0, 0.0, 4.0, 4.0))].into());
        c.tracks.insert(4, [(2, bb(0.0, 0.0, 4.0, 4.0))].into());
        let p = emit_training_pair(&c, 0, 3).unwrap();
        assert_eq!(p.targets.len(), 3);
        let t2 = p.targets.iter().find(|t| t.identity == 2).unwrap();
        assert!(t2.visible);
        assert_eq!(t2.motion, Some(MotionTarget::ZERO));
        assert_eq!(t2.context, bb(0.0, 0.0, 40.0, 40.0));
        let t3 = p.targets.iter().find(|t| t.identity == 3).unwrap();
        assert!(!t3.visible);
        assert_eq!(t3.motion, None);
        assert!(p.targets.iter().all(|t| t.identity != 4));
    }

    #[test]
    fn pair_bounds() {
        let c = clip("c", 4);
        assert!(emit_training_pair(&c, 0, 0).is_err());
        assert!(emit_training_pair(&c, 1, 3).is_err());
        assert!(emit_training_pair(&c, 0, 3).is_ok());
        let mut one = clip("one", 1);
        assert!(sample_pair(&one, None, &mut seeded(0)).is_err());
        one.last_frame = 1;
        assert!(sample_pair(&one, None, &mut seeded(0)).is_ok());
    }

    #[test]
    fn allocation_examples() {
        let a = allocate(&SampleConfig::default());
        assert_eq!((a.hv, a.hard_rv, a.easy_rv), (8, 6, 2));
        let all_hard = allocate(&SampleConfig {
            hard_rate: Some(1.0),
            ..Default::default()
        });
        assert_eq!((all_hard.hv, all_hard.hard_rv, all_hard.easy_rv), (8, 8, 0));
        let r75 = allocate(&SampleConfig {
            balancing_ratio: 0.75,
            ..Default::default()
        });
        assert_eq!((r75.hv, r75.hard_rv, r75.easy_rv), (4, 9, 3));
        let none = allocate(&SampleConfig {
            hard_rate: None,
            ..Default::default()
        });
        assert_eq!((none.hv, none.hard_rv, none.easy_rv), (8, 0, 8));
        assert_eq!(round_half_up(10.0 * 0.35), 4);
        assert_eq!(round_half_up(2.5), 3);
        assert_eq!(round_half_up(2.49), 2);
    }

    #[test]
    fn batch_counts_and_determinism() {
        let cfg = SampleConfig {
            seed: 11,
            ..Default::default()
        };
        let pools = pools();
        let a = compose_batch(&pools, &cfg, 0).unwrap();
        assert_eq!(a.count(Category::Hv), 8);
        assert_eq!(a.count(Category::HardRv), 6);
        assert_eq!(a.count(Category::EasyRv), 2);
        assert_eq!(a, compose_batch(&pools, &cfg, 0).unwrap());
        assert_ne!(a, compose_batch(&pools, &cfg, 1).unwrap());
        for e in &a.entries {
            assert!(e.pair.delta >= 1);
            let src = match e.category {
                Category::Hv => &pools.hv,
                Category::HardRv => &pools.hard_rv,
                Category::EasyRv => &pools.easy_rv,
            }
            .iter()
            .any(|c| c.clip_id == e.pair.clip_id);
            assert!(src);
        }
    }

    #[test]
    fn ratio_endpoints() {
        let mut p = pools();
        p.hard_rv.clear();
        p.easy_rv.clear();
        let hv_only = SampleConfig {
            balancing_ratio: 0.0,
            ..Default::default()
        };
        let m = compose_batch(&p, &hv_only, 0).unwrap();
        assert_eq!(m.count(Category::Hv), 16);

        let mut q = pools();
        q.hv.clear();
        let rv_only = SampleConfig {
            balancing_ratio: 1.0,
            ..Default::default()
        };
        let m = compose_batch(&q, &rv_only, 0).unwrap();
        assert_eq!(m.count(Category::Hv), 0);
        assert_eq!(m.entries.len(), 16);
    }

    #[test]
    fn empty_pool_named() {
        let mut p = pools();
        p.hard_rv.clear();
        match compose_batch(&p, &SampleConfig::default(), 0) {
            Err(Error::EmptyPool(name)) => assert_eq!(name, "hard_rv"),
            other => panic!("expected EmptyPool, got {other:?}"),
        }
        p.easy_rv.clear();
        let unbiased = SampleConfig {
            hard_rate: None,
            ..Default::default()
        };
        assert!(matches!(compose_batch(&p, &unbiased, 0), Err(Error::EmptyPool("rv"))));
    }

    #[test]
    fn unbiased_rv_draws_from_both() {
        let cfg = SampleConfig {
            hard_rate: None,
            balancing_ratio: 1.0,
            batch_size: 64,
            ..Default::default()
        };
        let m = compose_batch(&pools(), &cfg, 0).unwrap();
        assert!(m.count(Category::HardRv) > 0);
        assert!(m.count(Category::EasyRv) > 0);
        assert_eq!(m.allocation.rv(), 64);
    }

    #[test]
    fn max_delta_respected() {
        let cfg = SampleConfig {
            max_delta: Some(2),
            batch_size: 40,
            ..Default::default()
        };
        let m = compose_batch(&pools(), &cfg, 3).unwrap();
        assert!(m.entries.iter().all(|e| (1..=2).contains(&e.pair.delta)));
    }

    #[test]
    fn rv_clip_split() {
        let pts = (0..50).map(|f| TrackPoint::new(f, bb(1.0, 1.0, 5.0, 5.0))).collect();
        let tracks = vec![Tracklet::new(3, pts, 10.0).unwrap()];
        let hard = vec![HardClip {
            video: "v".into(),
            start_frame: 10,
            end_frame: 20,
            track_ids: vec![3],
            gap_spans: vec![(14, 16)],
        }];
        let (h, e) = rv_clips(&tracks, &hard, "v", "v.txt", 50, 16).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!((h[0].first_frame, h[0].last_frame), (10, 20));
        assert_eq!(h[0].tracks[&3].len(), 11);
        let spans: Vec<_> = e.iter().map(|c| (c.first_frame, c.last_frame)).collect();
        assert_eq!(spans, vec![(0, 9), (21, 36), (37, 49)]);
    }

    proptest! {
        #[test]
        fn motion_targets_decode(seed in any::<u64>()) {
            let mut c = clip("c", 12);
            let mut rng = seeded(seed);
            let boxes = (0..12u32)
                .map(|f| (f, bb(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0),
                               rng.random_range(1.0..50.0), rng.random_range(1.0..50.0))))
                .collect();
            c.tracks.insert(7, boxes);
            let p = sample_pair(&c, None, &mut rng).unwrap();
            for t in &p.targets {
                let Some(m) = t.motion else { continue };
                let want = c.tracks[&t.identity][&p.later_frame()];
                let got = decode_motion_target(&t.bbox, &m).unwrap();
                for (g, w) in got.as_array().iter().zip(want.as_array()) {
                    prop_assert!((g - w).abs() <= 1e-9 * w.abs().max(1.0));
                }
            }
        }

        #[test]
        fn allocation_exact(batch in 1usize..64, ratio in 0.0f64..=1.0, hard in proptest::option::of(0.0f64..=1.0)) {
            let cfg = SampleConfig { batch_size: batch, balancing_ratio: ratio, hard_rate: hard, ..Default::default() };
            let a = allocate(&cfg);
            let rv = ((batch as f64 * ratio) + 0.5 + 1e-9).floor() as usize;
            prop_assert_eq!(a.rv(), rv.min(batch));
            prop_assert_eq!(a.total(), batch);
            if let Some(h) = hard {
                prop_assert_eq!(a.hard_rv, ((a.rv() as f64 * h) + 0.5 + 1e-9).floor() as usize);
            }
        }
    }
}
