use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hvmine::associate::{
    detection_frames, run_association, ConstantVelocityPredictor, IdentityPredictor, RecordedPredictions,
};
use hvmine::hallucinate::{hallucinate_video, EffectConfig, EffectRanges, ZoomConfig, ZoomDirection, ZoomRanges};
use hvmine::io::{
    detections_from_rows, predictions_from_rows, read_hv_clip, read_json, read_meta, read_mot_rows, read_rgb_image,
    read_tracklets, resolve_fps, rows_from_detections, tracklets_from_rows, write_hallucinated_video, write_json,
    write_mot_rows, write_text, write_tracklets, TrackMeta, ANNOTATION_FILE,
};
use hvmine::metrics::{evaluate_sequence, EvalReport};
use hvmine::rectify::{mine_hard_examples, rectify, HardClip, MergeLog, RectifyConfig, VideoExtent};
use hvmine::rng::task_rng;
use hvmine::sampler::{compose_batches, rv_clips, AnnotatedClip, ClipPools, ManifestEntry};
use hvmine::synth::{generate_fragmented_scene, scene_detections, MotionModel, SceneConfig};
use hvmine::BoundingBox;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::FileConfig;
use crate::{
    AssociateArgs, Cli, Command, DirectionArg, EvalArgs, HallucinateArgs, MineArgs, MotionArg, PredictorArg,
    RectifyArgs, SampleArgs, SynthArgs,
};

struct Globals {
    seed: Option<u64>,
    fps: Option<f64>,
    file: FileConfig,
    has_file: bool,
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            bail!("--workers must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("starting worker pool")?;
    }
    let g = Globals {
        seed: cli.seed,
        fps: cli.fps,
        file: FileConfig::load(cli.config.as_deref())?,
        has_file: cli.config.is_some(),
    };
    match cli.command {
        Command::Hallucinate(a) => hallucinate(&g, a),
        Command::Associate(a) => associate(&g, a),
        Command::Rectify(a) => rectify_cmd(&g, a),
        Command::Mine(a) => mine(&g, a),
        Command::Sample(a) => sample(&g, a),
        Command::Eval(a) => eval(a),
        Command::Synth(a) => synth(&g, a),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "video".into())
}

#[derive(Debug, Deserialize)]
struct ImageRecord {
    image: PathBuf,
    #[serde(default)]
    boxes: Vec<BoundingBox>,
    #[serde(default)]
    id: Option<String>,
}

#[derive(Debug, Serialize)]
struct VideoMeta<'a> {
    source_id: &'a str,
    image: String,
    fps: f64,
    frames: usize,
    frame_size: (u32, u32),
    zoom: ZoomConfig,
    effects: EffectConfig,
    effect_ranges: Option<EffectRanges>,
    windows: &'a [BoundingBox],
}

fn hallucinate(g: &Globals, a: HallucinateArgs) -> Result<()> {
    let records: Vec<ImageRecord> = read_json(&a.manifest)?;
    let base_dir = a.manifest.parent().unwrap_or(Path::new("."));
    let seed = g.seed.unwrap_or(0);
    let mut base = g.file.zoom;
    if let Some(t) = a.frames {
        base.frames = t;
    }
    if a.output_size.is_some() {
        base.output_size = a.output_size;
    }
    if let Some(fps) = g.fps {
        base.fps = fps;
    }
    let mut ranges: ZoomRanges = g.file.zoom_ranges;
    if let Some(p) = a.max_pan {
        ranges.max_pan = p;
    }
    let effect_ranges = g.file.effects;

    let mut ids = BTreeSet::new();
    let jobs: Vec<(String, &ImageRecord)> = records
        .iter()
        .map(|r| {
            let id = r.id.clone().unwrap_or_else(|| stem(&r.image));
            if !ids.insert(id.clone()) {
                bail!("duplicate source id {id:?} in {}", a.manifest.display());
            }
            Ok((id, r))
        })
        .collect::<Result<_>>()?;

    jobs.par_iter().try_for_each(|(id, rec)| -> Result<()> {
        let path = base_dir.join(&rec.image);
        let img = read_rgb_image(&path)?;
        let mut rng = task_rng(seed, id);
        let mut zoom = ranges.sample(&base, img.dimensions(), &mut rng);
        if let Some(s) = a.final_scale {
            zoom.final_scale = s;
        }
        if let Some(d) = a.direction {
            zoom.direction = match d {
                DirectionArg::In => ZoomDirection::ZoomIn,
                DirectionArg::Out => ZoomDirection::ZoomOut,
            };
        }
        let effects = if a.no_effects {
            EffectConfig::identity()
        } else {
            effect_ranges.sample(&mut rng)
        };
        let video = hallucinate_video(&img, &rec.boxes, id, &zoom, &effects).with_context(|| format!("image {id}"))?;
        let meta = VideoMeta {
            source_id: id,
            image: path.display().to_string(),
            fps: video.fps,
            frames: video.frames.len(),
            frame_size: video.frame_size(),
            zoom,
            effects,
            effect_ranges: (!a.no_effects).then_some(effect_ranges),
            windows: &video.windows,
        };
        write_hallucinated_video(&video, &a.out.join(id), &meta)?;
        Ok(())
    })?;
    write_json(&a.out.join("index.json"), &ids)?;
    println!("wrote {} videos to {}", ids.len(), a.out.display());
    Ok(())
}

/// Checks that `extra` is empty or pairs one-to-one with `inputs`.
fn paired<'a>(inputs: &[PathBuf], extra: &'a [PathBuf], flag: &str) -> Result<Vec<Option<&'a PathBuf>>> {
    match extra.len() {
        0 => Ok(vec![None; inputs.len()]),
        n if n == inputs.len() => Ok(extra.iter().map(Some).collect()),
        n => bail!("{n} {flag} values for {} inputs", inputs.len()),
    }
}

fn associate(g: &Globals, a: AssociateArgs) -> Result<()> {
    let mut cfg = g.file.associate;
    if let Some(v) = a.vis_keep {
        cfg.vis_keep = v;
    }
    if let Some(v) = a.match_iou {
        cfg.match_iou = v;
    }
    if let Some(v) = a.spawn_conf {
        cfg.spawn_conf = v;
    }
    let outs = paired(&a.detections, &a.out, "--out")?;
    let preds = paired(&a.detections, &a.predictions, "--predictions")?;
    let jobs: Vec<_> = a.detections.iter().zip(outs).zip(preds).collect();
    let lines = jobs
        .par_iter()
        .map(|((det, out), pred)| -> Result<String> {
            let out = out.expect("paired outputs");
            let fps = resolve_fps(det, g.fps)?;
            let meta = read_meta(det)?;
            let detections = detections_from_rows(&read_mot_rows(det)?);
            let frame_count = a
                .frame_count
                .or(meta.as_ref().and_then(|m| m.frame_count))
                .or_else(|| detections.keys().next_back().map(|f| f + 1));
            let frames: Vec<u32> = match frame_count {
                Some(n) => (0..n).collect(),
                None => detection_frames(&detections),
            };
            let tracks = match (pred, a.predictor) {
                (Some(p), _) => {
                    let mut pred = RecordedPredictions::new(predictions_from_rows(&read_mot_rows(p)?, p)?);
                    run_association(&frames, &detections, &mut pred, fps, &cfg)?
                }
                (None, PredictorArg::Identity) => {
                    run_association(&frames, &detections, &mut IdentityPredictor, fps, &cfg)?
                }
                (None, PredictorArg::ConstantVelocity) => {
                    run_association(&frames, &detections, &mut ConstantVelocityPredictor, fps, &cfg)?
                }
            };
            let out_meta = TrackMeta {
                fps,
                frame_count,
                video: meta.and_then(|m| m.video),
            };
            write_tracklets(out, &tracks, &out_meta)?;
            Ok(format!("{} tracklets -> {}", tracks.len(), out.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    lines.iter().for_each(|l| println!("{l}"));
    Ok(())
}

/// What `rectify` writes next to its tracks and `mine` reads back.
#[derive(Debug, Serialize, Deserialize)]
struct RectifyLogFile {
    video: String,
    frame_count: Option<u32>,
    config: RectifyConfig,
    merge_log: MergeLog,
}

fn default_log_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".log.json");
    out.with_file_name(name)
}

fn rectify_cmd(g: &Globals, a: RectifyArgs) -> Result<()> {
    let mut cfg = g.file.rectify;
    if let Some(v) = a.mu {
        cfg.mu = v;
    }
    if let Some(v) = a.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = a.clip_padding {
        cfg.clip_padding = v;
    }
    if a.min_score.is_some() {
        cfg.min_score = a.min_score;
    }
    if a.no_interpolate {
        cfg.interpolate_gaps = false;
    }
    let outs = paired(&a.tracklets, &a.out, "--out")?;
    let logs = paired(&a.tracklets, &a.log, "--log")?;
    let jobs: Vec<_> = a.tracklets.iter().zip(outs).zip(logs).collect();
    let lines = jobs
        .par_iter()
        .map(|((input, out), log_path)| rectify_one(g, &cfg, input, out.expect("paired outputs"), *log_path))
        .collect::<Result<Vec<_>>>()?;
    lines.iter().for_each(|l| println!("{l}"));
    Ok(())
}

fn rectify_one(
    g: &Globals,
    cfg: &RectifyConfig,
    input: &Path,
    out: &Path,
    log_path: Option<&PathBuf>,
) -> Result<String> {
    let tracklets = read_tracklets(input, g.fps)?;
    let fps = resolve_fps(input, g.fps)?;
    let meta = read_meta(input)?;
    let before = tracklets.len();
    let (tracks, log) = rectify(tracklets, cfg)?;
    let out_meta = TrackMeta {
        fps,
        frame_count: meta.as_ref().and_then(|m| m.frame_count),
        video: meta.as_ref().and_then(|m| m.video.clone()),
    };
    write_tracklets(out, &tracks, &out_meta)?;
    let log_path = log_path.cloned().unwrap_or_else(|| default_log_path(out));
    let joins = log.joins.len();
    let iterations = log.iterations;
    write_json(
        &log_path,
        &RectifyLogFile {
            video: out_meta.video.clone().unwrap_or_else(|| stem(input)),
            frame_count: out_meta.frame_count,
            config: *cfg,
            merge_log: log,
        },
    )?;
    Ok(format!(
        "{before} tracklets -> {} tracks, {joins} joins in {iterations} rounds; log {}",
        tracks.len(),
        log_path.display()
    ))
}

fn mine(g: &Globals, a: MineArgs) -> Result<()> {
    let log: RectifyLogFile = read_json(&a.log)?;
    let mut cfg = if g.has_file { g.file.rectify } else { log.config };
    if let Some(p) = a.clip_padding {
        cfg.clip_padding = p;
    }
    let Some(frame_count) = a.frame_count.or(log.frame_count) else {
        bail!("frame count unknown for {}: pass --frame-count", a.log.display());
    };
    let extent = VideoExtent {
        video: a.video.unwrap_or(log.video),
        frame_count,
    };
    let clips = mine_hard_examples(&log.merge_log, &extent, &cfg)?;
    write_json(&a.out, &clips)?;
    println!("{} hard clips -> {}", clips.len(), a.out.display());
    Ok(())
}

fn hv_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    if root.join(ANNOTATION_FILE).is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs = Vec::new();
    for entry in std::fs::read_dir(root).with_context(|| format!("reading {}", root.display()))? {
        let p = entry?.path();
        if p.join(ANNOTATION_FILE).is_file() {
            dirs.push(p);
        }
    }
    dirs.sort();
    Ok(dirs)
}

#[derive(Serialize)]
struct ManifestLine<'a> {
    batch: usize,
    #[serde(flatten)]
    entry: &'a ManifestEntry,
}

fn sample(g: &Globals, a: SampleArgs) -> Result<()> {
    let mut cfg = g.file.sample;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.balancing_ratio {
        cfg.balancing_ratio = v;
    }
    if let Some(v) = a.hard_rate {
        cfg.hard_rate = v.0;
    }
    if a.max_delta.is_some() {
        cfg.max_delta = a.max_delta;
    }

    let mut pools = ClipPools::default();
    for root in &a.hv {
        for dir in hv_dirs(root)? {
            let id = dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            pools.hv.push(read_hv_clip(&dir, &id)?);
        }
    }
    let mut hard: Vec<HardClip> = Vec::new();
    for p in &a.hard {
        hard.extend(read_json::<Vec<HardClip>>(p)?);
    }
    for p in &a.rv {
        let tracks = read_tracklets(p, g.fps)?;
        let meta = read_meta(p)?;
        let video = meta.as_ref().and_then(|m| m.video.clone()).unwrap_or_else(|| stem(p));
        let frame_count = meta
            .as_ref()
            .and_then(|m| m.frame_count)
            .or_else(|| tracks.iter().map(|t| t.end_frame() + 1).max())
            .unwrap_or(0);
        let (h, e): (Vec<AnnotatedClip>, Vec<AnnotatedClip>) = rv_clips(
            &tracks,
            &hard,
            &video,
            &p.display().to_string(),
            frame_count,
            a.easy_clip_len,
        )?;
        pools.hard_rv.extend(h);
        pools.easy_rv.extend(e);
    }

    let batches = compose_batches(&pools, &cfg, a.batches)?;
    let mut text = String::new();
    for b in &batches {
        for entry in &b.entries {
            text.push_str(&serde_json::to_string(&ManifestLine {
                batch: b.batch_index,
                entry,
            })?);
            text.push('\n');
        }
        println!(
            "batch {}: hv={} hard_rv={} easy_rv={}",
            b.batch_index, b.allocation.hv, b.allocation.hard_rv, b.allocation.easy_rv
        );
    }
    write_text(&a.out, &text)?;
    Ok(())
}

/// Metrics ignore time, so files without a sidecar are read at 1 fps.
fn load_any_fps(path: &Path) -> Result<Vec<hvmine::Tracklet>> {
    let fps = read_meta(path)?.map_or(1.0, |m| m.fps);
    Ok(tracklets_from_rows(&read_mot_rows(path)?, fps, path)?)
}

fn eval(a: EvalArgs) -> Result<()> {
    if a.gt.len() != a.pred.len() {
        bail!("got {} --gt files but {} --pred files", a.gt.len(), a.pred.len());
    }
    let seqs =
        a.gt.par_iter()
            .zip(a.pred.par_iter())
            .map(|(gt_path, pred_path)| {
                let gt = load_any_fps(gt_path)?;
                let pred = load_any_fps(pred_path)?;
                Ok(evaluate_sequence(&gt_path.display().to_string(), &gt, &pred, a.iou)?)
            })
            .collect::<Result<Vec<_>>>()?;
    let report = EvalReport::from_sequences(seqs);
    print!("{}", report.to_text());
    if let Some(out) = &a.out {
        write_json(out, &report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SceneFile<'a> {
    config: &'a SceneConfig,
    expected_joins: &'a [(u64, u64)],
    excluded_joins: &'a [(u64, u64)],
    owner: &'a std::collections::BTreeMap<u64, u64>,
}

fn synth(g: &Globals, a: SynthArgs) -> Result<()> {
    let mut cfg = g.file.synth;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(f) = g.fps {
        cfg.fps = f;
    }
    if let Some(v) = a.agents {
        cfg.agents = v;
    }
    if let Some(v) = a.frames {
        cfg.frames = v;
    }
    if let Some(m) = a.motion {
        cfg.motion = match m {
            MotionArg::Linear => MotionModel::Linear,
            MotionArg::Sinusoidal => MotionModel::Sinusoidal,
        };
    }
    if let Some(v) = a.gaps_per_track {
        cfg.fragmentation.gaps_per_track = v;
    }
    if let Some(v) = a.min_gap {
        cfg.fragmentation.gap_frames.0 = v;
    }
    if let Some(v) = a.max_gap {
        cfg.fragmentation.gap_frames.1 = v;
    }
    let scene = generate_fragmented_scene(&cfg)?;
    let meta = TrackMeta {
        fps: cfg.fps,
        frame_count: Some(cfg.frames),
        video: Some(
            a.out
                .file_name()
                .map_or_else(|| "synth".into(), |n| n.to_string_lossy().into_owned()),
        ),
    };
    write_tracklets(&a.out.join("gt.txt"), &scene.gt, &meta)?;
    write_tracklets(&a.out.join("fragments.txt"), &scene.fragments, &meta)?;
    let det_path = a.out.join("det.txt");
    write_mot_rows(
        &det_path,
        &rows_from_detections(&scene_detections(&scene, a.confidence)),
    )?;
    write_json(&hvmine::io::meta_path(&det_path), &meta)?;
    write_json(
        &a.out.join("scene.json"),
        &SceneFile {
            config: &cfg,
            expected_joins: &scene.expected_joins,
            excluded_joins: &scene.excluded_joins,
            owner: &scene.owner,
        },
    )?;
    println!(
        "{} agents, {} fragments, {} expected joins -> {}",
        scene.gt.len(),
        scene.fragments.len(),
        scene.expected_joins.len(),
        a.out.display()
    );
    Ok(())
}
