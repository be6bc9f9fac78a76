//! File formats.
//!
//! Tracks, detections and predictions use MOTChallenge text rows:
//! `frame,id,x,y,w,h,conf,-1,-1,-1[,interpolated]` with 1-based frames.
//! Predictions carry visibility in the confidence column. fps lives in a
//! `<file>.meta.json` sidecar because the row format has no place for it.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::associate::{DetectionRecord, PredictionRecord};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::hallucinate::HallucinatedVideo;
use crate::sampler::AnnotatedClip;
use crate::track::{TrackPoint, Tracklet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotRow {
    /// 1-based.
    pub frame: u32,
    /// Track id, or -1 for detections.
    pub id: i64,
    pub bbox: BoundingBox,
    pub confidence: f64,
    pub interpolated: Option<bool>,
}

fn parse_err(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, k: usize, name: &str, path: &Path, line: usize) -> Result<T> {
    let raw = rec
        .get(k)
        .ok_or_else(|| parse_err(path, line, format!("missing {name}")))?;
    raw.parse()
        .map_err(|_| parse_err(path, line, format!("bad {name} {raw:?}")))
}

/// Parse MOT rows. `path` is only used in error messages.
pub fn parse_mot_rows(text: &str, path: &Path) -> Result<Vec<MotRow>> {
    let mut rows = Vec::new();
    for rec in csv_reader(text).records() {
        let rec = rec.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() < 7 {
            return Err(parse_err(
                path,
                line,
                format!("expected at least 7 fields, got {}", rec.len()),
            ));
        }
        let frame: u32 = field(&rec, 0, "frame", path, line)?;
        if frame == 0 {
            return Err(parse_err(path, line, "frame 0 (frames are 1-based)"));
        }
        let id: f64 = field(&rec, 1, "id", path, line)?;
        if id.fract() != 0.0 || !(id == -1.0 || id >= 1.0) {
            return Err(parse_err(
                path,
                line,
                format!("id must be -1 or a positive integer, got {id}"),
            ));
        }
        let mut v = [0.0f64; 5];
        for (k, name) in ["x", "y", "w", "h", "confidence"].iter().enumerate() {
            v[k] = field(&rec, k + 2, name, path, line)?;
            if !v[k].is_finite() {
                return Err(parse_err(path, line, format!("{name} is not finite")));
            }
        }
        let bbox = BoundingBox::new(v[0], v[1], v[2], v[3]).map_err(|e| parse_err(path, line, e.to_string()))?;
        let interpolated = match rec.get(10) {
            None | Some("") => None,
            Some("0") => Some(false),
            Some("1") => Some(true),
            Some(other) => return Err(parse_err(path, line, format!("bad interpolated flag {other:?}"))),
        };
        rows.push(MotRow {
            frame,
            id: id as i64,
            bbox,
            confidence: v[4],
            interpolated,
        });
    }
    Ok(rows)
}

pub fn format_mot_rows(rows: &[MotRow]) -> String {
    let mut out = String::new();
    for r in rows {
        let [x, y, w, h] = r.bbox.as_array();
        out.push_str(&format!(
            "{},{},{x},{y},{w},{h},{},-1,-1,-1",
            r.frame, r.id, r.confidence
        ));
        if let Some(flag) = r.interpolated {
            out.push_str(if flag { ",1" } else { ",0" });
        }
        out.push('\n');
    }
    out
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_rgb_image(path: &Path) -> Result<image::RgbImage> {
    let reader = image::ImageReader::open(path).map_err(|e| Error::io(path, e))?;
    Ok(reader
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()?
        .to_rgb8())
}

pub fn read_mot_rows(path: &Path) -> Result<Vec<MotRow>> {
    parse_mot_rows(&read_text(path)?, path)
}

pub fn write_mot_rows(path: &Path, rows: &[MotRow]) -> Result<()> {
    write_text(path, &format_mot_rows(rows))
}

/// Group rows by id into tracklets with 0-based frames. A tracklet's score
/// is the shared confidence of its rows, or their mean when they differ.
pub fn tracklets_from_rows(rows: &[MotRow], fps: f64, path: &Path) -> Result<Vec<Tracklet>> {
    let mut groups: BTreeMap<i64, Vec<&MotRow>> = BTreeMap::new();
    for r in rows {
        if r.id < 1 {
            return Err(parse_err(
                path,
                0,
                format!("track rows need positive ids, got {}", r.id),
            ));
        }
        groups.entry(r.id).or_default().push(r);
    }
    let mut out = Vec::with_capacity(groups.len());
    for (id, mut group) in groups {
        group.sort_by_key(|r| r.frame);
        if let Some(w) = group.windows(2).find(|w| w[0].frame == w[1].frame) {
            return Err(Error::DuplicateRow { id, frame: w[0].frame });
        }
        let points = group
            .iter()
            .map(|r| TrackPoint {
                frame: r.frame - 1,
                bbox: r.bbox,
                interpolated: r.interpolated.unwrap_or(false),
            })
            .collect();
        let first = group[0].confidence;
        let score = if group.iter().all(|r| r.confidence == first) {
            first
        } else {
            group.iter().map(|r| r.confidence).sum::<f64>() / group.len() as f64
        };
        out.push(Tracklet::new(id as u64, points, fps)?.with_score(Some(score)));
    }
    Ok(out)
}

/// Rows sorted by (frame, id). Tracklets without a score write confidence 1.
pub fn rows_from_tracklets(tracks: &[Tracklet]) -> Vec<MotRow> {
    let mut rows: Vec<MotRow> = tracks
        .iter()
        .flat_map(|t| {
            t.points().iter().map(move |p| MotRow {
                frame: p.frame + 1,
                id: t.id() as i64,
                bbox: p.bbox,
                confidence: t.score().unwrap_or(1.0),
                interpolated: Some(p.interpolated),
            })
        })
        .collect();
    rows.sort_by_key(|r| (r.frame, r.id));
    rows
}

pub fn detections_from_rows(rows: &[MotRow]) -> BTreeMap<u32, Vec<DetectionRecord>> {
    let mut out: BTreeMap<u32, Vec<DetectionRecord>> = BTreeMap::new();
    for r in rows {
        out.entry(r.frame - 1).or_default().push(DetectionRecord {
            frame: r.frame - 1,
            bbox: r.bbox,
            confidence: r.confidence,
        });
    }
    out
}

pub fn rows_from_detections(dets: &BTreeMap<u32, Vec<DetectionRecord>>) -> Vec<MotRow> {
    dets.values()
        .flatten()
        .map(|d| MotRow {
            frame: d.frame + 1,
            id: -1,
            bbox: d.bbox,
            confidence: d.confidence,
            interpolated: None,
        })
        .collect()
}

pub fn predictions_from_rows(rows: &[MotRow], path: &Path) -> Result<Vec<PredictionRecord>> {
    let mut seen = HashSet::new();
    rows.iter()
        .map(|r| {
            if r.id < 1 {
                return Err(parse_err(
                    path,
                    0,
                    format!("prediction rows need positive track ids, got {}", r.id),
                ));
            }
            if !seen.insert((r.id, r.frame)) {
                return Err(Error::DuplicateRow {
                    id: r.id,
                    frame: r.frame,
                });
            }
            Ok(PredictionRecord {
                track_id: r.id as u64,
                frame: r.frame - 1,
                bbox: r.bbox,
                visibility: r.confidence,
            })
        })
        .collect()
}

/// Sidecar stored next to a row file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackMeta {
    pub fps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_count: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video: Option<String>,
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    path.with_file_name(name)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| parse_err(path, e.line(), e.to_string()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// Sidecar for `path`, if present.
pub fn read_meta(path: &Path) -> Result<Option<TrackMeta>> {
    let m = meta_path(path);
    if m.exists() {
        read_json(&m).map(Some)
    } else {
        Ok(None)
    }
}

/// fps from the sidecar, else `fallback`. Both present and different is an
/// error.
pub fn resolve_fps(path: &Path, fallback: Option<f64>) -> Result<f64> {
    let meta = read_meta(path)?.map(|m| m.fps);
    match (meta, fallback) {
        (Some(a), Some(b)) if a != b => Err(Error::InvalidConfig(format!(
            "{} records fps {a} but {b} was requested",
            path.display()
        ))),
        (Some(f), _) | (None, Some(f)) => Ok(f),
        (None, None) => Err(Error::InvalidConfig(format!(
            "no fps for {}: add {} or pass an fps",
            path.display(),
            meta_path(path).display()
        ))),
    }
}

pub fn read_tracklets(path: &Path, fps: Option<f64>) -> Result<Vec<Tracklet>> {
    let fps = resolve_fps(path, fps)?;
    tracklets_from_rows(&read_mot_rows(path)?, fps, path)
}

/// Writes the rows and the fps sidecar.
pub fn write_tracklets(path: &Path, tracks: &[Tracklet], meta: &TrackMeta) -> Result<()> {
    write_mot_rows(path, &rows_from_tracklets(tracks))?;
    write_json(&meta_path(path), meta)
}

pub const ANNOTATION_FILE: &str = "annotations.csv";
pub const VIDEO_META_FILE: &str = "video.json";

pub fn frame_file_name(frame: u32) -> String {
    format!("{:06}.png", frame + 1)
}

/// Frames as `000001.png...`, an annotation sidecar with rows
/// `identity,frame,x,y,w,h,visible` (1-based frames; invisible rows carry the
/// unclipped box), and `video.json` holding `meta`.
pub fn write_hallucinated_video<M: Serialize>(video: &HallucinatedVideo, dir: &Path, meta: &M) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (t, frame) in video.frames.iter().enumerate() {
        let p = dir.join(frame_file_name(t as u32));
        frame.save(&p)?;
    }
    let mut text = String::from("identity,frame,x,y,w,h,visible\n");
    for track in &video.tracks {
        for a in &track.annotations {
            let [x, y, w, h] = a.bbox.unwrap_or(a.raw).as_array();
            text.push_str(&format!(
                "{},{},{x},{y},{w},{h},{}\n",
                track.identity,
                a.frame + 1,
                u8::from(a.visible())
            ));
        }
    }
    write_text(&dir.join(ANNOTATION_FILE), &text)?;
    write_json(&dir.join(VIDEO_META_FILE), meta)
}

/// Loads the annotation sidecar of a hallucinated video as a clip with
/// 0-based frames. The frame range comes from the rows present.
pub fn read_hv_clip(dir: &Path, clip_id: &str) -> Result<AnnotatedClip> {
    let path = dir.join(ANNOTATION_FILE);
    let text = read_text(&path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut tracks: BTreeMap<u64, BTreeMap<u32, BoundingBox>> = BTreeMap::new();
    let mut last = 0u32;
    let mut any = false;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(&path, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 7 {
            return Err(parse_err(&path, line, format!("expected 7 fields, got {}", rec.len())));
        }
        let identity: u64 = field(&rec, 0, "identity", &path, line)?;
        let frame: u32 = field(&rec, 1, "frame", &path, line)?;
        if frame == 0 {
            return Err(parse_err(&path, line, "frame 0 (frames are 1-based)"));
        }
        let mut v = [0.0f64; 4];
        for (k, name) in ["x", "y", "w", "h"].iter().enumerate() {
            v[k] = field(&rec, k + 2, name, &path, line)?;
        }
        let visible: u8 = field(&rec, 6, "visible", &path, line)?;
        any = true;
        last = last.max(frame - 1);
        let boxes = tracks.entry(identity).or_default();
        if visible == 1 {
            let b = BoundingBox::new(v[0], v[1], v[2], v[3]).map_err(|e| parse_err(&path, line, e.to_string()))?;
            if boxes.insert(frame - 1, b).is_some() {
                return Err(Error::DuplicateRow {
                    id: identity as i64,
                    frame,
                });
            }
        }
    }
    if !any {
        return Err(parse_err(&path, 0, "no annotation rows"));
    }
    Ok(AnnotatedClip {
        clip_id: clip_id.to_string(),
        path: dir.display().to_string(),
        first_frame: 0,
        last_frame: last,
        tracks,
    })
}
