//! Online association of per-frame detections using externally supplied
//! motion predictions.
//!
//! Each frame:
//! 1. live tracks whose predicted visibility is below `vis_keep` terminate;
//! 2. the rest match detections greedily by descending IoU between the
//!    predicted box and the detection, accepting IoU >= `match_iou`, and
//!    continue at the detection box; unmatched ones terminate;
//! 3. unmatched detections with confidence >= `spawn_conf` spawn new tracks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, BoundingBox};
use crate::track::{TrackPoint, Tracklet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssocConfig {
    pub vis_keep: f64,
    pub match_iou: f64,
    pub spawn_conf: f64,
}

impl Default for AssocConfig {
    fn default() -> Self {
        Self {
            vis_keep: 0.3,
            match_iou: 0.5,
            spawn_conf: 0.5,
        }
    }
}

impl AssocConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("vis_keep", self.vis_keep),
            ("match_iou", self.match_iou),
            ("spawn_conf", self.spawn_conf),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub frame: u32,
    pub bbox: BoundingBox,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub track_id: u64,
    pub frame: u32,
    pub bbox: BoundingBox,
    pub visibility: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminateReason {
    LowVisibility,
    Unmatched,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AssocEvent {
    Continue { track_id: u64, detection: usize },
    Terminate { track_id: u64, reason: TerminateReason },
    Spawn { track_id: u64, detection: usize },
}

/// Tracker state between frames.
#[derive(Debug, Clone)]
pub struct AssocState {
    fps: f64,
    next_id: u64,
    last_frame: Option<u32>,
    live: BTreeMap<u64, Vec<TrackPoint>>,
    finished: Vec<(u64, Vec<TrackPoint>)>,
}

impl AssocState {
    pub fn new(fps: f64) -> Self {
        Self {
            fps,
            next_id: 1,
            last_frame: None,
            live: BTreeMap::new(),
            finished: Vec::new(),
        }
    }

    pub fn live_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.live.keys().copied()
    }

    /// Point history of a live track.
    pub fn history(&self, id: u64) -> Option<&[TrackPoint]> {
        self.live.get(&id).map(Vec::as_slice)
    }

    pub fn is_live(&self, id: u64) -> bool {
        self.live.contains_key(&id)
    }

    /// All tracks, finished and live, ordered by id.
    pub fn into_tracklets(mut self) -> Result<Vec<Tracklet>> {
        self.finished.extend(self.live);
        self.finished.sort_by_key(|(id, _)| *id);
        self.finished
            .into_iter()
            .map(|(id, points)| Tracklet::new(id, points, self.fps))
            .collect()
    }
}

/// Source of per-track motion predictions for the next frame.
pub trait MotionPredictor {
    fn predict(&mut self, frame: u32, state: &AssocState) -> Result<Vec<PredictionRecord>>;
}

/// Predicts each track stays at its last box, fully visible.
#[derive(Debug, Default, Clone, Copy)]
pub struct IdentityPredictor;

impl MotionPredictor for IdentityPredictor {
    fn predict(&mut self, frame: u32, state: &AssocState) -> Result<Vec<PredictionRecord>> {
        Ok(state
            .live
            .iter()
            .map(|(&track_id, pts)| PredictionRecord {
                track_id,
                frame,
                bbox: pts[pts.len() - 1].bbox,
                visibility: 1.0,
            })
            .collect())
    }
}

/// Extrapolates the last per-frame displacement, fully visible.
#[derive(Debug, Default, Clone, Copy)]
pub struct ConstantVelocityPredictor;

impl MotionPredictor for ConstantVelocityPredictor {
    fn predict(&mut self, frame: u32, state: &AssocState) -> Result<Vec<PredictionRecord>> {
        state
            .live
            .iter()
            .map(|(&track_id, pts)| {
                let last = pts[pts.len() - 1];
                let bbox = match pts.len() {
                    1 => last.bbox,
                    n => {
                        let prev = pts[n - 2];
                        let steps = f64::from(frame - last.frame) / f64::from(last.frame - prev.frame);
                        let (lx, ly) = last.bbox.center();
                        let (px, py) = prev.bbox.center();
                        BoundingBox::from_center(
                            lx + (lx - px) * steps,
                            ly + (ly - py) * steps,
                            last.bbox.w(),
                            last.bbox.h(),
                        )?
                    }
                };
                Ok(PredictionRecord {
                    track_id,
                    frame,
                    bbox,
                    visibility: 1.0,
                })
            })
            .collect()
    }
}

/// Predictions read from a file, keyed by `(track id, frame)`.
///
/// Live tracks without a record get visibility 0 and terminate.
#[derive(Debug, Default, Clone)]
pub struct RecordedPredictions {
    by_frame: BTreeMap<u32, Vec<PredictionRecord>>,
}

impl RecordedPredictions {
    pub fn new(records: impl IntoIterator<Item = PredictionRecord>) -> Self {
        let mut by_frame: BTreeMap<u32, Vec<PredictionRecord>> = BTreeMap::new();
        for r in records {
            by_frame.entry(r.frame).or_default().push(r);
        }
        Self { by_frame }
    }
}

impl MotionPredictor for RecordedPredictions {
    fn predict(&mut self, frame: u32, _state: &AssocState) -> Result<Vec<PredictionRecord>> {
        Ok(self.by_frame.remove(&frame).unwrap_or_default())
    }
}

/// Advance the tracker by one frame.
pub fn associate_step(
    state: &mut AssocState,
    frame: u32,
    detections: &[DetectionRecord],
    predictions: &[PredictionRecord],
    cfg: &AssocConfig,
) -> Result<Vec<AssocEvent>> {
    if let Some(previous) = state.last_frame {
        if frame <= previous {
            return Err(Error::FrameOrder { previous, got: frame });
        }
    }
    let mut pred_by_id: BTreeMap<u64, &PredictionRecord> = BTreeMap::new();
    for p in predictions {
        if !state.live.contains_key(&p.track_id) {
            return Err(Error::UnknownTrack { id: p.track_id, frame });
        }
        if !(0.0..=1.0).contains(&p.visibility) {
            return Err(Error::InvalidConfig(format!(
                "visibility {} of track {} outside [0, 1]",
                p.visibility, p.track_id
            )));
        }
        pred_by_id.insert(p.track_id, p);
    }
    state.last_frame = Some(frame);

    let mut events = Vec::new();
    let mut terminated = Vec::new();
    let mut survivors: Vec<(u64, BoundingBox)> = Vec::new();
    for &id in state.live.keys() {
        match pred_by_id.get(&id) {
            Some(p) if p.visibility >= cfg.vis_keep => survivors.push((id, p.bbox)),
            _ => terminated.push((id, TerminateReason::LowVisibility)),
        }
    }

    // Greedy by IoU descending, then detection order, then track id.
    let mut pairs: Vec<(f64, usize, u64)> = Vec::new();
    for &(id, pred) in &survivors {
        for (d, det) in detections.iter().enumerate() {
            let o = iou(&pred, &det.bbox);
            if o >= cfg.match_iou && o > 0.0 {
                pairs.push((o, d, id));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut det_used = vec![false; detections.len()];
    let mut matched: BTreeMap<u64, usize> = BTreeMap::new();
    for (_, d, id) in pairs {
        if det_used[d] || matched.contains_key(&id) {
            continue;
        }
        det_used[d] = true;
        matched.insert(id, d);
    }
    for &(id, _) in &survivors {
        match matched.get(&id) {
            Some(&d) => {
                state
                    .live
                    .get_mut(&id)
                    .expect("survivor is live")
                    .push(TrackPoint::new(frame, detections[d].bbox));
                events.push(AssocEvent::Continue {
                    track_id: id,
                    detection: d,
                });
            }
            None => terminated.push((id, TerminateReason::Unmatched)),
        }
    }
    terminated.sort_by_key(|(id, _)| *id);
    for (id, reason) in terminated {
        let pts = state.live.remove(&id).expect("terminated track is live");
        state.finished.push((id, pts));
        events.push(AssocEvent::Terminate { track_id: id, reason });
    }

    for (d, det) in detections.iter().enumerate() {
        if !det_used[d] && det.confidence >= cfg.spawn_conf {
            let id = state.next_id;
            state.next_id += 1;
            state.live.insert(id, vec![TrackPoint::new(frame, det.bbox)]);
            events.push(AssocEvent::Spawn {
                track_id: id,
                detection: d,
            });
        }
    }
    Ok(events)
}

/// Run the tracker over detections grouped by frame.
///
/// `frames` lists every frame to process in increasing order; a frame with
/// no detections still advances the tracker.
pub fn run_association<P: MotionPredictor>(
    frames: &[u32],
    detections: &BTreeMap<u32, Vec<DetectionRecord>>,
    predictor: &mut P,
    fps: f64,
    cfg: &AssocConfig,
) -> Result<Vec<Tracklet>> {
    cfg.validate()?;
    let mut state = AssocState::new(fps);
    let empty = Vec::new();
    for &frame in frames {
        let dets = detections.get(&frame).unwrap_or(&empty);
        let preds = predictor.predict(frame, &state)?;
        associate_step(&mut state, frame, dets, &preds, cfg)?;
    }
    state.into_tracklets()
}

/// Contiguous frame range covering all detections.
pub fn detection_frames(detections: &BTreeMap<u32, Vec<DetectionRecord>>) -> Vec<u32> {
    match (detections.keys().next(), detections.keys().next_back()) {
        (Some(&a), Some(&b)) => (a..=b).collect(),
        _ => Vec::new(),
    }
}
