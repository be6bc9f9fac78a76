//! Annotated video hallucination from a single image.
//!
//! Frame `t` is a crop window of the source resampled to the output size.
//! Window side ratios go linearly from 1.0 (full image) to `final_scale`
//! over the clip, which renders as a smooth zoom-in; zoom-out plays the same
//! windows backwards. Boxes go through the same window-to-output affine map,
//! so annotations are exact. Photometric effects run afterwards and never
//! touch geometry.

use image::codecs::jpeg::JpegEncoder;
use image::{ImageFormat, Rgb, RgbImage};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::rng::{seeded, TaskRng};

/// Boxes keeping less than this fraction of their area inside the window are
/// marked invisible.
pub const VISIBILITY_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoomDirection {
    ZoomIn,
    ZoomOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZoomConfig {
    pub frames: usize,
    /// Side of the last crop window relative to the source image.
    pub final_scale: f64,
    pub direction: ZoomDirection,
    /// Per-frame drift of the window center, in source pixels.
    pub pan: (f64, f64),
    /// Rendered frame size; `None` keeps the source size.
    pub output_size: Option<(u32, u32)>,
    /// Assumed playback rate. 16 frames at 16 fps is a one-second clip.
    pub fps: f64,
}

impl Default for ZoomConfig {
    fn default() -> Self {
        Self {
            frames: 16,
            final_scale: 0.5,
            direction: ZoomDirection::ZoomIn,
            pan: (0.0, 0.0),
            output_size: None,
            fps: 16.0,
        }
    }
}

impl ZoomConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frames < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 frames, got {}",
                self.frames
            )));
        }
        if !(self.final_scale > 0.0 && self.final_scale <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "final_scale must be in (0, 1], got {}",
                self.final_scale
            )));
        }
        if !(self.pan.0.is_finite() && self.pan.1.is_finite()) {
            return Err(Error::InvalidConfig("pan must be finite".into()));
        }
        if matches!(self.output_size, Some((0, _)) | Some((_, 0))) {
            return Err(Error::InvalidConfig("output size must be positive".into()));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::InvalidConfig(format!("fps must be positive, got {}", self.fps)));
        }
        Ok(())
    }
}

/// Ranges for drawing a random zoom per source image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZoomRanges {
    pub final_scale: (f64, f64),
    pub zoom_out_probability: f64,
    /// Maximum absolute per-frame pan on each axis.
    pub max_pan: f64,
}

impl Default for ZoomRanges {
    fn default() -> Self {
        Self {
            final_scale: (0.3, 1.0),
            zoom_out_probability: 0.5,
            max_pan: 0.0,
        }
    }
}

impl ZoomRanges {
    /// Draws scale, direction and pan; other fields come from `base`. Pan is
    /// shrunk until the schedule fits the image.
    pub fn sample(&self, base: &ZoomConfig, image_size: (u32, u32), rng: &mut TaskRng) -> ZoomConfig {
        let final_scale = rng.random_range(self.final_scale.0..=self.final_scale.1);
        let direction = if rng.random_bool(self.zoom_out_probability.clamp(0.0, 1.0)) {
            ZoomDirection::ZoomOut
        } else {
            ZoomDirection::ZoomIn
        };
        let mut pan = if self.max_pan > 0.0 {
            (
                rng.random_range(-self.max_pan..=self.max_pan),
                rng.random_range(-self.max_pan..=self.max_pan),
            )
        } else {
            (0.0, 0.0)
        };
        let mut cfg = ZoomConfig {
            final_scale,
            direction,
            pan,
            ..*base
        };
        while zoom_schedule(&cfg, image_size).is_err() && (pan.0 != 0.0 || pan.1 != 0.0) {
            pan = (pan.0 / 2.0, pan.1 / 2.0);
            if pan.0.abs() < 1e-3 && pan.1.abs() < 1e-3 {
                pan = (0.0, 0.0);
            }
            cfg.pan = pan;
        }
        cfg
    }
}

/// Crop windows in source coordinates, one per frame.
pub fn zoom_schedule(cfg: &ZoomConfig, image_size: (u32, u32)) -> Result<Vec<BoundingBox>> {
    cfg.validate()?;
    let (iw, ih) = (f64::from(image_size.0), f64::from(image_size.1));
    let image = BoundingBox::new(0.0, 0.0, iw, ih)?;
    let last = (cfg.frames - 1) as f64;
    let mut windows = Vec::with_capacity(cfg.frames);
    for t in 0..cfg.frames {
        let t = t as f64;
        let s = 1.0 + (cfg.final_scale - 1.0) * t / last;
        let w = BoundingBox::from_center(iw / 2.0 + cfg.pan.0 * t, ih / 2.0 + cfg.pan.1 * t, s * iw, s * ih)?;
        if !image.contains(&w, 1e-9) {
            return Err(Error::InvalidConfig(format!(
                "window {} ({:?}) leaves the {}x{} image",
                t as usize,
                w.as_array(),
                image_size.0,
                image_size.1
            )));
        }
        windows.push(w);
    }
    if cfg.direction == ZoomDirection::ZoomOut {
        windows.reverse();
    }
    Ok(windows)
}

/// Maps source coordinates inside `window` to output pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowTransform {
    pub window: BoundingBox,
    pub sx: f64,
    pub sy: f64,
}

impl WindowTransform {
    pub fn new(window: BoundingBox, output: (u32, u32)) -> Self {
        Self {
            window,
            sx: f64::from(output.0) / window.w(),
            sy: f64::from(output.1) / window.h(),
        }
    }

    pub fn apply(&self, b: &BoundingBox) -> BoundingBox {
        BoundingBox::new(
            (b.x() - self.window.x()) * self.sx,
            (b.y() - self.window.y()) * self.sy,
            b.w() * self.sx,
            b.h() * self.sy,
        )
        .expect("positive scale keeps boxes valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HvAnnotation {
    /// 0-based frame index.
    pub frame: u32,
    /// Window transform of the source box, before clipping.
    pub raw: BoundingBox,
    /// Clipped to the frame; `None` when invisible.
    pub bbox: Option<BoundingBox>,
}

impl HvAnnotation {
    pub fn visible(&self) -> bool {
        self.bbox.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HvTrack {
    /// 1-based position in the source annotation list.
    pub identity: u64,
    pub annotations: Vec<HvAnnotation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HallucinatedVideo {
    pub frames: Vec<RgbImage>,
    pub tracks: Vec<HvTrack>,
    pub windows: Vec<BoundingBox>,
    pub source_id: String,
    pub fps: f64,
}

impl HallucinatedVideo {
    pub fn frame_size(&self) -> (u32, u32) {
        self.frames.first().map(|f| f.dimensions()).unwrap_or((0, 0))
    }
}

fn sample_bilinear(img: &RgbImage, x: f64, y: f64) -> [f64; 3] {
    let (w, h) = img.dimensions();
    let x = x.clamp(0.0, f64::from(w - 1));
    let y = y.clamp(0.0, f64::from(h - 1));
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (x0, y0) = (x0 as u32, y0 as u32);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let p = |xx, yy| img.get_pixel(xx, yy).0;
    let (a, b, c, d) = (p(x0, y0), p(x1, y0), p(x0, y1), p(x1, y1));
    let mut out = [0.0; 3];
    for k in 0..3 {
        let top = f64::from(a[k]) * (1.0 - fx) + f64::from(b[k]) * fx;
        let bottom = f64::from(c[k]) * (1.0 - fx) + f64::from(d[k]) * fx;
        out[k] = top * (1.0 - fy) + bottom * fy;
    }
    out
}

fn to_pixel(v: [f64; 3]) -> Rgb<u8> {
    Rgb(v.map(|c| c.round().clamp(0.0, 255.0) as u8))
}

/// Resample `window` of `src` to `output` with pixel-center alignment.
/// A full-image window at the source size reproduces the source exactly.
pub fn render_window(src: &RgbImage, window: &BoundingBox, output: (u32, u32)) -> RgbImage {
    let step_x = window.w() / f64::from(output.0);
    let step_y = window.h() / f64::from(output.1);
    RgbImage::from_fn(output.0, output.1, |u, v| {
        let x = window.x() + (f64::from(u) + 0.5) * step_x - 0.5;
        let y = window.y() + (f64::from(v) + 0.5) * step_y - 0.5;
        to_pixel(sample_bilinear(src, x, y))
    })
}

/// Geometry-only part of hallucination: windows and per-identity
/// annotations, no pixels.
pub fn hallucinate_annotations(
    image_size: (u32, u32),
    boxes: &[BoundingBox],
    cfg: &ZoomConfig,
) -> Result<(Vec<BoundingBox>, Vec<HvTrack>)> {
    let windows = zoom_schedule(cfg, image_size)?;
    let image = BoundingBox::new(0.0, 0.0, f64::from(image_size.0), f64::from(image_size.1))?;
    if let Some(b) = boxes.iter().find(|b| !image.contains(b, 1e-9)) {
        return Err(Error::InvalidConfig(format!(
            "box {:?} lies outside the image",
            b.as_array()
        )));
    }
    let output = cfg.output_size.unwrap_or(image_size);
    let transforms: Vec<WindowTransform> = windows.iter().map(|w| WindowTransform::new(*w, output)).collect();
    let tracks = boxes
        .iter()
        .enumerate()
        .map(|(k, b)| HvTrack {
            identity: k as u64 + 1,
            annotations: transforms
                .iter()
                .enumerate()
                .map(|(t, tr)| {
                    let bbox = b
                        .clip_to(&tr.window)
                        .filter(|c| c.area() >= VISIBILITY_THRESHOLD * b.area())
                        .map(|c| tr.apply(&c));
                    HvAnnotation {
                        frame: t as u32,
                        raw: tr.apply(b),
                        bbox,
                    }
                })
                .collect(),
        })
        .collect();
    Ok((windows, tracks))
}

pub fn hallucinate_video(
    image: &RgbImage,
    boxes: &[BoundingBox],
    source_id: &str,
    cfg: &ZoomConfig,
    fx: &EffectConfig,
) -> Result<HallucinatedVideo> {
    let size = image.dimensions();
    let (windows, tracks) = hallucinate_annotations(size, boxes, cfg)?;
    let output = cfg.output_size.unwrap_or(size);
    let frames: Vec<RgbImage> = windows.iter().map(|w| render_window(image, w, output)).collect();
    let frames = apply_effect_pipeline(&frames, fx)?;
    Ok(HallucinatedVideo {
        frames,
        tracks,
        windows,
        source_id: source_id.to_string(),
        fps: cfg.fps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionBlur {
    /// Kernel length in pixels.
    pub length: f64,
    pub angle_deg: f64,
    /// Grow the kernel from 1 px at the first frame to `length` at the last.
    pub ramp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lighting {
    /// Added to every channel after contrast, in intensity levels.
    pub brightness: f64,
    /// Scales intensity around 128.
    pub contrast: f64,
    /// Exponent on normalized intensity.
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Compression {
    /// JPEG quality drawn per frame from this inclusive range.
    pub min_quality: u8,
    pub max_quality: u8,
}

/// Photometric effects; every `None` is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EffectConfig {
    pub motion_blur: Option<MotionBlur>,
    pub lighting: Option<Lighting>,
    pub compression: Option<Compression>,
    pub seed: u64,
}

impl EffectConfig {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn is_identity(&self) -> bool {
        self.motion_blur.is_none() && self.lighting.is_none() && self.compression.is_none()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if let Some(b) = self.motion_blur {
            if !(b.length >= 1.0 && b.length.is_finite() && b.angle_deg.is_finite()) {
                return bad(format!("invalid motion blur {b:?}"));
            }
        }
        if let Some(l) = self.lighting {
            if !(l.brightness.is_finite()
                && l.contrast >= 0.0
                && l.gamma > 0.0
                && l.contrast.is_finite()
                && l.gamma.is_finite())
            {
                return bad(format!("invalid lighting {l:?}"));
            }
        }
        if let Some(c) = self.compression {
            if c.min_quality == 0 || c.min_quality > c.max_quality || c.max_quality > 100 {
                return bad(format!("invalid compression {c:?}"));
            }
        }
        Ok(())
    }
}

/// Ranges for drawing a random effect configuration per video.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EffectRanges {
    pub blur_length: (f64, f64),
    pub brightness: (f64, f64),
    pub contrast: (f64, f64),
    pub gamma: (f64, f64),
    pub quality: (u8, u8),
    /// Each effect is enabled independently with this probability.
    pub enable_probability: f64,
}

impl Default for EffectRanges {
    fn default() -> Self {
        Self {
            blur_length: (3.0, 15.0),
            brightness: (-30.0, 30.0),
            contrast: (0.7, 1.3),
            gamma: (0.7, 1.5),
            quality: (30, 95),
            enable_probability: 0.5,
        }
    }
}

impl EffectRanges {
    pub fn sample(&self, rng: &mut TaskRng) -> EffectConfig {
        let p = self.enable_probability.clamp(0.0, 1.0);
        let motion_blur = rng.random_bool(p).then(|| MotionBlur {
            length: rng.random_range(self.blur_length.0..=self.blur_length.1),
            angle_deg: rng.random_range(0.0..180.0),
            ramp: rng.random_bool(0.5),
        });
        let lighting = rng.random_bool(p).then(|| Lighting {
            brightness: rng.random_range(self.brightness.0..=self.brightness.1),
            contrast: rng.random_range(self.contrast.0..=self.contrast.1),
            gamma: rng.random_range(self.gamma.0..=self.gamma.1),
        });
        let compression = rng.random_bool(p).then(|| {
            let a = rng.random_range(self.quality.0..=self.quality.1);
            let b = rng.random_range(self.quality.0..=self.quality.1);
            Compression {
                min_quality: a.min(b),
                max_quality: a.max(b),
            }
        });
        EffectConfig {
            motion_blur,
            lighting,
            compression,
            seed: rng.random(),
        }
    }
}

fn motion_blur(img: &RgbImage, length: f64, angle_deg: f64) -> RgbImage {
    let taps = length.round().max(1.0) as usize;
    if taps == 1 {
        return img.clone();
    }
    let (dx, dy) = (angle_deg.to_radians().cos(), angle_deg.to_radians().sin());
    let half = (taps - 1) as f64 / 2.0;
    let offsets: Vec<(f64, f64)> = (0..taps).map(|k| k as f64 - half).map(|o| (o * dx, o * dy)).collect();
    RgbImage::from_fn(img.width(), img.height(), |x, y| {
        let mut acc = [0.0; 3];
        for &(ox, oy) in &offsets {
            let s = sample_bilinear(img, f64::from(x) + ox, f64::from(y) + oy);
            for k in 0..3 {
                acc[k] += s[k];
            }
        }
        to_pixel(acc.map(|c| c / taps as f64))
    })
}

fn lighting_lut(l: &Lighting) -> [u8; 256] {
    let mut lut = [0u8; 256];
    for (v, out) in lut.iter_mut().enumerate() {
        let mut y = v as f64;
        if l.gamma != 1.0 {
            y = 255.0 * (y / 255.0).powf(l.gamma);
        }
        y = (y - 128.0) * l.contrast + 128.0 + l.brightness;
        *out = y.round().clamp(0.0, 255.0) as u8;
    }
    lut
}

fn jpeg_round_trip(img: &RgbImage, quality: u8) -> Result<RgbImage> {
    let mut buf = Vec::new();
    JpegEncoder::new_with_quality(&mut buf, quality).encode_image(img)?;
    Ok(image::load_from_memory_with_format(&buf, ImageFormat::Jpeg)?.to_rgb8())
}

/// Blur, then lighting, then compression. Deterministic given the config.
pub fn apply_effect_pipeline(frames: &[RgbImage], fx: &EffectConfig) -> Result<Vec<RgbImage>> {
    fx.validate()?;
    if fx.is_identity() {
        return Ok(frames.to_vec());
    }
    let n = frames.len();
    let mut rng = seeded(fx.seed);
    let lut = fx.lighting.as_ref().map(lighting_lut);
    let mut out = Vec::with_capacity(n);
    for (t, frame) in frames.iter().enumerate() {
        let mut f = match fx.motion_blur {
            Some(b) => {
                let length = if b.ramp && n > 1 {
                    1.0 + (b.length - 1.0) * t as f64 / (n - 1) as f64
                } else {
                    b.length
                };
                motion_blur(frame, length, b.angle_deg)
            }
            None => frame.clone(),
        };
        if let Some(lut) = &lut {
            for p in f.pixels_mut() {
                p.0 = p.0.map(|c| lut[c as usize]);
            }
        }
        if let Some(c) = fx.compression {
            let q = rng.random_range(c.min_quality..=c.max_quality);
            f = jpeg_round_trip(&f, q)?;
        }
        out.push(f);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: u32, h: u32) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| {
            Rgb([(x * 7 % 256) as u8, (y * 5 % 256) as u8, ((x + y) % 256) as u8])
        })
    }

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn schedule_examples() {
        let cfg = ZoomConfig::default();
        assert_eq!(zoom_schedule(&cfg, (100, 100)).unwrap().len(), 16);

        let identity = ZoomConfig {
            final_scale: 1.0,
            ..Default::default()
        };
        let w = zoom_schedule(&identity, (100, 80)).unwrap();
        assert!(w.iter().all(|w| *w == bb(0.0, 0.0, 100.0, 80.0)));

        let half = zoom_schedule(&cfg, (100, 100)).unwrap();
        assert_eq!(half[0], bb(0.0, 0.0, 100.0, 100.0));
        assert_eq!(half[15], bb(25.0, 25.0, 50.0, 50.0));
        // monotone nesting without pan
        assert!(half.windows(2).all(|p| p[0].contains(&p[1], 1e-9)));

        let out = ZoomConfig {
            direction: ZoomDirection::ZoomOut,
            ..Default::default()
        };
        let rev = zoom_schedule(&out, (100, 100)).unwrap();
        assert_eq!(rev[0], half[15]);
        assert_eq!(rev[15], half[0]);
    }

    #[test]
    fn schedule_rejects_bad_config() {
        let too_short = ZoomConfig {
            frames: 1,
            ..Default::default()
        };
        assert!(zoom_schedule(&too_short, (10, 10)).is_err());
        let scale = ZoomConfig {
            final_scale: 0.0,
            ..Default::default()
        };
        assert!(zoom_schedule(&scale, (10, 10)).is_err());
        let pan = ZoomConfig {
            pan: (10.0, 0.0),
            ..Default::default()
        };
        assert!(zoom_schedule(&pan, (100, 100)).is_err());
        let small_pan = ZoomConfig {
            pan: (1.0, -1.0),
            ..Default::default()
        };
        assert!(zoom_schedule(&small_pan, (100, 100)).is_ok());
    }

    #[test]
    fn identity_video_reproduces_source() {
        let img = gradient(40, 30);
        let boxes = [bb(5.0, 5.0, 10.0, 8.0)];
        let cfg = ZoomConfig {
            final_scale: 1.0,
            ..Default::default()
        };
        let v = hallucinate_video(&img, &boxes, "img", &cfg, &EffectConfig::identity()).unwrap();
        assert_eq!(v.frames.len(), 16);
        assert_eq!(v.frames[0], img);
        assert!(v.tracks[0]
            .annotations
            .iter()
            .all(|a| a.bbox == Some(boxes[0]) && a.raw == boxes[0]));
    }

    #[test]
    fn centered_zoom_doubles_box() {
        let img = gradient(100, 100);
        let boxes = [bb(45.0, 40.0, 10.0, 20.0)];
        let v = hallucinate_video(&img, &boxes, "img", &ZoomConfig::default(), &EffectConfig::identity()).unwrap();
        let last = v.tracks[0].annotations[15].bbox.unwrap();
        assert_eq!(last, bb(40.0, 30.0, 20.0, 40.0));
        assert_eq!(v.frames[15].dimensions(), (100, 100));
    }

    #[test]
    fn box_leaving_window_becomes_invisible() {
        let boxes = [bb(0.0, 0.0, 10.0, 10.0), bb(20.0, 20.0, 10.0, 10.0)];
        let (_, tracks) = hallucinate_annotations((100, 100), &boxes, &ZoomConfig::default()).unwrap();
        assert!(tracks[0].annotations[0].visible());
        assert!(!tracks[0].annotations[15].visible());
        // 20..30 against window 25..75: 5x5 of 10x10 kept = 25%, still visible,
        // and clipped to the frame.
        let a = tracks[1].annotations[15];
        assert!(a.visible());
        assert_eq!(a.bbox.unwrap(), bb(0.0, 0.0, 10.0, 10.0));
        assert_eq!(a.raw, bb(-10.0, -10.0, 20.0, 20.0));
    }

    #[test]
    fn boxes_outside_image_rejected() {
        let boxes = [bb(95.0, 0.0, 10.0, 10.0)];
        assert!(hallucinate_annotations((100, 100), &boxes, &ZoomConfig::default()).is_err());
        let (_, tracks) = hallucinate_annotations((100, 100), &[], &ZoomConfig::default()).unwrap();
        assert!(tracks.is_empty());
    }

    #[test]
    fn brightness_on_gray() {
        let gray = RgbImage::from_pixel(8, 8, Rgb([128, 128, 128]));
        let fx = EffectConfig {
            lighting: Some(Lighting {
                brightness: 20.0,
                contrast: 1.0,
                gamma: 1.0,
            }),
            ..Default::default()
        };
        let out = apply_effect_pipeline(&[gray], &fx).unwrap();
        assert!(out[0].pixels().all(|p| p.0 == [148, 148, 148]));

        let bright = RgbImage::from_pixel(4, 4, Rgb([250, 250, 250]));
        let out = apply_effect_pipeline(&[bright], &fx).unwrap();
        assert!(out[0].pixels().all(|p| p.0 == [255, 255, 255]));
    }

    #[test]
    fn effects_deterministic_and_shape_preserving() {
        let frames: Vec<RgbImage> = (0..4).map(|_| gradient(32, 24)).collect();
        let fx = EffectConfig {
            motion_blur: Some(MotionBlur {
                length: 7.0,
                angle_deg: 30.0,
                ramp: true,
            }),
            lighting: Some(Lighting {
                brightness: -10.0,
                contrast: 1.2,
                gamma: 0.8,
            }),
            compression: Some(Compression {
                min_quality: 30,
                max_quality: 90,
            }),
            seed: 9,
        };
        let a = apply_effect_pipeline(&frames, &fx).unwrap();
        let b = apply_effect_pipeline(&frames, &fx).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        assert!(a.iter().all(|f| f.dimensions() == (32, 24)));
        assert_ne!(a[3], frames[3]);
        assert_eq!(
            apply_effect_pipeline(&frames, &EffectConfig::identity()).unwrap(),
            frames
        );
    }

    #[test]
    fn sampled_effects_validate() {
        let mut rng = seeded(5);
        for _ in 0..50 {
            EffectRanges::default().sample(&mut rng).validate().unwrap();
        }
    }

    #[test]
    fn sampled_zoom_fits_image() {
        let mut rng = seeded(1);
        let ranges = ZoomRanges {
            max_pan: 5.0,
            ..Default::default()
        };
        for _ in 0..50 {
            let cfg = ranges.sample(&ZoomConfig::default(), (64, 48), &mut rng);
            assert!(zoom_schedule(&cfg, (64, 48)).is_ok());
            assert!((0.3..=1.0).contains(&cfg.final_scale));
        }
    }
}
