//! Identity-labeled track containers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    /// 0-based frame index.
    pub frame: u32,
    pub bbox: BoundingBox,
    /// Synthesized while filling a gap between joined tracklets.
    #[serde(default)]
    pub interpolated: bool,
}

impl TrackPoint {
    pub fn new(frame: u32, bbox: BoundingBox) -> Self {
        Self {
            frame,
            bbox,
            interpolated: false,
        }
    }
}

/// Time-ordered boxes for one identity.
///
/// Always non-empty with strictly increasing frames and a positive fps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tracklet {
    id: u64,
    points: Vec<TrackPoint>,
    fps: f64,
    /// Mean detection confidence, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
}

impl Tracklet {
    pub fn new(id: u64, points: Vec<TrackPoint>, fps: f64) -> Result<Self> {
        let invalid = |reason: String| Error::InvalidTracklet { id, reason };
        if points.is_empty() {
            return Err(invalid("no points".into()));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(invalid(format!("fps must be positive, got {fps}")));
        }
        if let Some(w) = points.windows(2).find(|w| w[1].frame <= w[0].frame) {
            return Err(invalid(format!(
                "frames not strictly increasing ({} then {})",
                w[0].frame, w[1].frame
            )));
        }
        Ok(Self {
            id,
            points,
            fps,
            score: None,
        })
    }

    pub fn with_score(mut self, score: Option<f64>) -> Self {
        self.score = score;
        self
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn points(&self) -> &[TrackPoint] {
        &self.points
    }

    pub fn into_points(self) -> Vec<TrackPoint> {
        self.points
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn score(&self) -> Option<f64> {
        self.score
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start_frame(&self) -> u32 {
        self.points[0].frame
    }

    pub fn end_frame(&self) -> u32 {
        self.points[self.points.len() - 1].frame
    }

    pub fn first_box(&self) -> &BoundingBox {
        &self.points[0].bbox
    }

    pub fn last_box(&self) -> &BoundingBox {
        &self.points[self.points.len() - 1].bbox
    }

    pub fn box_at(&self, frame: u32) -> Option<&BoundingBox> {
        self.points
            .binary_search_by_key(&frame, |p| p.frame)
            .ok()
            .map(|i| &self.points[i].bbox)
    }
}
