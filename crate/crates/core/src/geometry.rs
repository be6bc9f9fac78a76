//! Box geometry and the motion-target encoding used for regression labels.
//!
//! Boxes are `(x, y, w, h)` with a top-left origin in pixel coordinates, the
//! same convention as MOTChallenge files.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle, `w > 0` and `h > 0`, all coordinates finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let reason = if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            Some("coordinates must be finite")
        } else if w <= 0.0 || h <= 0.0 {
            Some("width and height must be positive")
        } else {
            None
        };
        match reason {
            Some(reason) => Err(Error::InvalidBox { x, y, w, h, reason }),
            None => Ok(Self { x, y, w, h }),
        }
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    /// Box spanning `[x1, x2] x [y1, y2]`.
    pub fn from_corners(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        Self::new(x1, y1, x2 - x1, y2 - y1)
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.x
    }
    #[inline]
    pub fn y(&self) -> f64 {
        self.y
    }
    #[inline]
    pub fn w(&self) -> f64 {
        self.w
    }
    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }
    #[inline]
    pub fn x2(&self) -> f64 {
        self.x + self.w
    }
    #[inline]
    pub fn y2(&self) -> f64 {
        self.y + self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    // Corner-difference area. `iou` uses this on both sides so that
    // iou(a, a) is exactly 1 even when x + w - x != w in floating point.
    fn corner_area(&self) -> f64 {
        (self.x2() - self.x) * (self.y2() - self.y)
    }

    fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let iw = self.x2().min(other.x2()) - self.x.max(other.x);
        let ih = self.y2().min(other.y2()) - self.y.max(other.y);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    /// Part of `self` inside `window`, or `None` if they do not overlap.
    /// Axes that are not cut keep their exact extent.
    pub fn clip_to(&self, window: &BoundingBox) -> Option<BoundingBox> {
        let (x1, x2) = (self.x.max(window.x), self.x2().min(window.x2()));
        let (y1, y2) = (self.y.max(window.y), self.y2().min(window.y2()));
        let w = if x1 == self.x && x2 == self.x2() {
            self.w
        } else {
            x2 - x1
        };
        let h = if y1 == self.y && y2 == self.y2() {
            self.h
        } else {
            y2 - y1
        };
        BoundingBox::new(x1, y1, w, h).ok()
    }

    /// Same center, width and height multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<BoundingBox> {
        let (cx, cy) = self.center();
        BoundingBox::from_center(cx, cy, self.w * factor, self.h * factor)
    }

    /// True when `other` lies entirely inside `self` (within `tol` pixels).
    pub fn contains(&self, other: &BoundingBox, tol: f64) -> bool {
        other.x >= self.x - tol
            && other.y >= self.y - tol
            && other.x2() <= self.x2() + tol
            && other.y2() <= self.y2() + tol
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        BoundingBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        b.as_array()
    }
}

/// Intersection over union; 0 for disjoint boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.corner_area() + b.corner_area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Box deltas between two frames: center shift normalized by the source
/// size and log size ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionTarget {
    pub dx: f64,
    pub dy: f64,
    pub dw: f64,
    pub dh: f64,
}

impl MotionTarget {
    pub const ZERO: MotionTarget = MotionTarget {
        dx: 0.0,
        dy: 0.0,
        dw: 0.0,
        dh: 0.0,
    };

    pub fn is_finite(&self) -> bool {
        self.dx.is_finite() && self.dy.is_finite() && self.dw.is_finite() && self.dh.is_finite()
    }
}

/// Unscaled deltas (no per-component variance normalization).
pub fn encode_motion_target(src: &BoundingBox, dst: &BoundingBox) -> MotionTarget {
    let (cx, cy) = src.center();
    let (dcx, dcy) = dst.center();
    MotionTarget {
        dx: (dcx - cx) / src.w,
        dy: (dcy - cy) / src.h,
        dw: (dst.w / src.w).ln(),
        dh: (dst.h / src.h).ln(),
    }
}

pub fn decode_motion_target(src: &BoundingBox, t: &MotionTarget) -> Result<BoundingBox> {
    let (cx, cy) = src.center();
    let w = src.w * t.dw.exp();
    let h = src.h * t.dh.exp();
    BoundingBox::from_center(cx + t.dx * src.w, cy + t.dy * src.h, w, h)
}
