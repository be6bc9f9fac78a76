//! CLEAR-MOT (MOTA, FP, FN, ID switches) and IDF1.
//!
//! Per-frame matching follows the usual toolkit behavior: a GT identity keeps
//! its last matched prediction if that prediction is present and still
//! overlaps with IoU >= threshold; the remaining boxes are assigned to
//! maximize the number of matches, then the total IoU. Matches at exactly the
//! threshold are accepted.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::assignment::max_weight_matching;
use crate::error::{Error, Result};
use crate::geometry::{iou, BoundingBox};
use crate::track::Tracklet;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// Counts for one sequence. Derived scores are methods so aggregation
/// stays exact.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SequenceMetrics {
    pub name: String,
    pub gt_boxes: usize,
    pub pred_boxes: usize,
    pub matches: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub id_switches: usize,
    pub idtp: usize,
}

impl SequenceMetrics {
    /// `1 - (FP + FN + IDsw) / GT`; with no GT boxes the denominator is 1.
    pub fn mota(&self) -> f64 {
        let errors = (self.false_positives + self.false_negatives + self.id_switches) as f64;
        1.0 - errors / self.gt_boxes.max(1) as f64
    }

    /// `2 IDTP / (GT + pred)`; 1 when both sides are empty.
    pub fn idf1(&self) -> f64 {
        let denom = self.gt_boxes + self.pred_boxes;
        if denom == 0 {
            1.0
        } else {
            2.0 * self.idtp as f64 / denom as f64
        }
    }

    fn accumulate(&mut self, other: &SequenceMetrics) {
        self.gt_boxes += other.gt_boxes;
        self.pred_boxes += other.pred_boxes;
        self.matches += other.matches;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
        self.id_switches += other.id_switches;
        self.idtp += other.idtp;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mota: f64,
    pub idf1: f64,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub idsw: usize,
    pub gt_boxes: usize,
    pub pred_boxes: usize,
    pub per_sequence: Vec<SequenceReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub name: String,
    pub mota: f64,
    pub idf1: f64,
    pub counts: SequenceMetrics,
}

impl EvalReport {
    /// Pools counts over sequences, then derives MOTA and IDF1.
    pub fn from_sequences(seqs: Vec<SequenceMetrics>) -> Self {
        let mut total = SequenceMetrics::default();
        for s in &seqs {
            total.accumulate(s);
        }
        Self {
            mota: total.mota(),
            idf1: total.idf1(),
            fp: total.false_positives,
            fn_: total.false_negatives,
            idsw: total.id_switches,
            gt_boxes: total.gt_boxes,
            pred_boxes: total.pred_boxes,
            per_sequence: seqs
                .into_iter()
                .map(|s| SequenceReport {
                    name: s.name.clone(),
                    mota: s.mota(),
                    idf1: s.idf1(),
                    counts: s,
                })
                .collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<24} {:>8} {:>8} {:>7} {:>7} {:>6}\n",
            "sequence", "MOTA", "IDF1", "FP", "FN", "IDsw"
        );
        for s in &self.per_sequence {
            out.push_str(&format!(
                "{:<24} {:>8.4} {:>8.4} {:>7} {:>7} {:>6}\n",
                s.name, s.mota, s.idf1, s.counts.false_positives, s.counts.false_negatives, s.counts.id_switches
            ));
        }
        out.push_str(&format!(
            "{:<24} {:>8.4} {:>8.4} {:>7} {:>7} {:>6}\n",
            "OVERALL", self.mota, self.idf1, self.fp, self.fn_, self.idsw
        ));
        out
    }
}

type FrameIndex = BTreeMap<u32, Vec<(u64, BoundingBox)>>;

fn index_frames(tracks: &[Tracklet]) -> Result<FrameIndex> {
    let mut seen = BTreeSet::new();
    let mut frames: FrameIndex = BTreeMap::new();
    for t in tracks {
        if !seen.insert(t.id()) {
            return Err(Error::DuplicateRow {
                id: t.id() as i64,
                frame: t.start_frame() + 1,
            });
        }
        for p in t.points() {
            frames.entry(p.frame).or_default().push((t.id(), p.bbox));
        }
    }
    for v in frames.values_mut() {
        v.sort_by_key(|(id, _)| *id);
    }
    Ok(frames)
}

/// CLEAR-MOT counts for one sequence.
pub fn evaluate_clearmot(gt: &[Tracklet], pred: &[Tracklet], iou_threshold: f64) -> Result<SequenceMetrics> {
    let gt_frames = index_frames(gt)?;
    let pred_frames = index_frames(pred)?;
    let all_frames: BTreeSet<u32> = gt_frames.keys().chain(pred_frames.keys()).copied().collect();
    let empty = Vec::new();

    let mut m = SequenceMetrics::default();
    let mut last_match: HashMap<u64, u64> = HashMap::new();

    for f in all_frames {
        let gts = gt_frames.get(&f).unwrap_or(&empty);
        let preds = pred_frames.get(&f).unwrap_or(&empty);
        m.gt_boxes += gts.len();
        m.pred_boxes += preds.len();

        let mut gt_done = vec![false; gts.len()];
        let mut pred_done = vec![false; preds.len()];
        let mut frame_matches: Vec<(u64, u64)> = Vec::new();

        // Carry over existing pairings.
        for (gi, (gid, gbox)) in gts.iter().enumerate() {
            let Some(&pid) = last_match.get(gid) else { continue };
            if let Some(pi) = preds.iter().position(|(id, _)| *id == pid) {
                if !pred_done[pi] && iou(gbox, &preds[pi].1) >= iou_threshold {
                    gt_done[gi] = true;
                    pred_done[pi] = true;
                    frame_matches.push((*gid, pid));
                }
            }
        }

        // Assign the rest: most matches first, then highest total IoU.
        let rows: Vec<usize> = (0..gts.len()).filter(|&i| !gt_done[i]).collect();
        let cols: Vec<usize> = (0..preds.len()).filter(|&j| !pred_done[j]).collect();
        let bonus = (rows.len().max(cols.len()) + 1) as f64;
        let mut edges = Vec::new();
        for (r, &gi) in rows.iter().enumerate() {
            for (c, &pj) in cols.iter().enumerate() {
                let o = iou(&gts[gi].1, &preds[pj].1);
                if o >= iou_threshold && o > 0.0 {
                    edges.push((r, c, bonus + o));
                }
            }
        }
        for (r, c) in max_weight_matching(rows.len(), cols.len(), &edges) {
            let (gid, pid) = (gts[rows[r]].0, preds[cols[c]].0);
            if let Some(&prev) = last_match.get(&gid) {
                if prev != pid {
                    m.id_switches += 1;
                }
            }
            frame_matches.push((gid, pid));
        }

        for &(gid, pid) in &frame_matches {
            last_match.insert(gid, pid);
        }
        m.matches += frame_matches.len();
        m.false_negatives += gts.len() - frame_matches.len();
        m.false_positives += preds.len() - frame_matches.len();
    }
    Ok(m)
}

/// Identity true positives under the optimal one-to-one identity matching.
pub fn identity_true_positives(gt: &[Tracklet], pred: &[Tracklet], iou_threshold: f64) -> Result<usize> {
    let gt_frames = index_frames(gt)?;
    let pred_frames = index_frames(pred)?;
    let gt_ids: Vec<u64> = gt.iter().map(Tracklet::id).collect();
    let pred_ids: Vec<u64> = pred.iter().map(Tracklet::id).collect();
    let gpos: HashMap<u64, usize> = gt_ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();
    let ppos: HashMap<u64, usize> = pred_ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();

    let mut overlap: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (f, gts) in &gt_frames {
        let Some(preds) = pred_frames.get(f) else { continue };
        for (gid, gbox) in gts {
            for (pid, pbox) in preds {
                if iou(gbox, pbox) >= iou_threshold {
                    *overlap.entry((gpos[gid], ppos[pid])).or_default() += 1;
                }
            }
        }
    }
    let edges: Vec<(usize, usize, f64)> = overlap.iter().map(|(&(g, p), &n)| (g, p, n as f64)).collect();
    let matching = max_weight_matching(gt_ids.len(), pred_ids.len(), &edges);
    Ok(matching.iter().map(|k| overlap[k]).sum())
}

pub fn evaluate_idf1(gt: &[Tracklet], pred: &[Tracklet], iou_threshold: f64) -> Result<f64> {
    let idtp = identity_true_positives(gt, pred, iou_threshold)?;
    let m = SequenceMetrics {
        gt_boxes: gt.iter().map(Tracklet::len).sum(),
        pred_boxes: pred.iter().map(Tracklet::len).sum(),
        idtp,
        ..Default::default()
    };
    Ok(m.idf1())
}

/// CLEAR-MOT plus IDF1 counts for one named sequence.
pub fn evaluate_sequence(
    name: &str,
    gt: &[Tracklet],
    pred: &[Tracklet],
    iou_threshold: f64,
) -> Result<SequenceMetrics> {
    let mut m = evaluate_clearmot(gt, pred, iou_threshold)?;
    m.idtp = identity_true_positives(gt, pred, iou_threshold)?;
    m.name = name.to_string();
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::track::TrackPoint;

    fn bb(x: f64, y: f64) -> BoundingBox {
        BoundingBox::new(x, y, 10.0, 20.0).unwrap()
    }

    fn track(id: u64, frames: impl IntoIterator<Item = u32>, at: impl Fn(u32) -> BoundingBox) -> Tracklet {
        Tracklet::new(
            id,
            frames.into_iter().map(|f| TrackPoint::new(f, at(f))).collect(),
            30.0,
        )
        .unwrap()
    }

    fn two_gt() -> Vec<Tracklet> {
        vec![
            track(1, 0..10, |f| bb(f64::from(f), 0.0)),
            track(2, 0..10, |f| bb(f64::from(f), 100.0)),
        ]
    }

    #[test]
    fn perfect_predictions() {
        let gt = two_gt();
        let m = evaluate_sequence("s", &gt, &gt, 0.5).unwrap();
        assert_eq!(m.mota(), 1.0);
        assert_eq!((m.false_positives, m.false_negatives, m.id_switches), (0, 0, 0));
        assert_eq!(m.idf1(), 1.0);
    }

    #[test]
    fn swapped_ids_from_frame_six() {
        // Frames are 0-based here; "frame 6 onward" of a 1..=10 numbering is 5..10.
        let gt = two_gt();
        let pred = vec![
            track(1, 0..10, |f| {
                if f < 5 {
                    bb(f64::from(f), 0.0)
                } else {
                    bb(f64::from(f), 100.0)
                }
            }),
            track(2, 0..10, |f| {
                if f < 5 {
                    bb(f64::from(f), 100.0)
                } else {
                    bb(f64::from(f), 0.0)
                }
            }),
        ];
        let m = evaluate_clearmot(&gt, &pred, 0.5).unwrap();
        assert_eq!(m.id_switches, 2);
        assert_eq!((m.false_positives, m.false_negatives), (0, 0));
        assert!((m.mota() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn single_missing_box() {
        let gt = two_gt();
        let mut pred = gt.clone();
        let pts: Vec<TrackPoint> = pred[0].points()[1..].to_vec();
        pred[0] = Tracklet::new(1, pts, 30.0).unwrap();
        let m = evaluate_clearmot(&gt, &pred, 0.5).unwrap();
        assert_eq!((m.false_negatives, m.false_positives, m.id_switches), (1, 0, 0));
        assert_eq!(m.mota(), 1.0 - 1.0 / 20.0);
    }

    #[test]
    fn split_identity_idf1() {
        let gt = vec![track(1, 0..10, |f| bb(f64::from(f), 0.0))];
        let pred = vec![
            track(5, 0..5, |f| bb(f64::from(f), 0.0)),
            track(6, 5..10, |f| bb(f64::from(f), 0.0)),
        ];
        assert_eq!(identity_true_positives(&gt, &pred, 0.5).unwrap(), 5);
        assert_eq!(evaluate_idf1(&gt, &pred, 0.5).unwrap(), 0.5);
        assert_eq!(evaluate_idf1(&gt, &[], 0.5).unwrap(), 0.0);
    }

    #[test]
    fn threshold_is_inclusive() {
        // Shifting a 10-wide box by 10/3 gives IoU exactly 0.5.
        let gt = vec![track(1, 0..1, |_| bb(0.0, 0.0))];
        let pred = vec![track(2, 0..1, |_| bb(10.0 / 3.0, 0.0))];
        let o = iou(&bb(0.0, 0.0), &bb(10.0 / 3.0, 0.0));
        let m = evaluate_clearmot(&gt, &pred, o).unwrap();
        assert_eq!(m.matches, 1);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let t = track(1, 0..3, |_| bb(0.0, 0.0));
        assert!(matches!(
            evaluate_clearmot(&[t.clone(), t.clone()], &[], 0.5),
            Err(Error::DuplicateRow { .. })
        ));
    }

    #[test]
    fn extra_false_positive_lowers_mota() {
        let gt = two_gt();
        let mut pred = gt.clone();
        pred.push(track(9, 3..4, |_| bb(500.0, 500.0)));
        let m = evaluate_clearmot(&gt, &pred, 0.5).unwrap();
        assert_eq!(m.false_positives, 1);
        assert!(m.mota() < 1.0);
    }

    #[test]
    fn carry_over_beats_better_overlap() {
        // GT 1 keeps prediction 7 even though prediction 8 overlaps it more
        // at frame 1.
        let gt = vec![track(1, 0..2, |_| bb(0.0, 0.0))];
        let pred = vec![
            track(7, 0..2, |f| if f == 0 { bb(0.0, 0.0) } else { bb(2.0, 0.0) }),
            track(8, 1..2, |_| bb(0.0, 0.0)),
        ];
        let m = evaluate_clearmot(&gt, &pred, 0.5).unwrap();
        assert_eq!(m.id_switches, 0);
        assert_eq!(m.false_positives, 1);
    }

    #[test]
    fn report_aggregates_counts() {
        let gt = two_gt();
        let a = evaluate_sequence("a", &gt, &gt, 0.5).unwrap();
        let b = evaluate_sequence("b", &gt, &[], 0.5).unwrap();
        let r = EvalReport::from_sequences(vec![a, b]);
        assert_eq!(r.fn_, 20);
        assert_eq!(r.gt_boxes, 40);
        assert!((r.mota - 0.5).abs() < 1e-15);
        assert!((r.idf1 - 2.0 * 20.0 / 60.0).abs() < 1e-15);
        assert!(r.to_text().contains("OVERALL"));
    }
}
