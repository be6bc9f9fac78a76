use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use image::{Rgb, RgbImage};
use serde_json::Value;

fn hvmine(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hvmine"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = hvmine(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// synth, associate and rectify into `dir/s`.
fn real_video(dir: &Path, agents: &str, seed: &str) {
    real_video_in(dir, "s", &["--agents", agents, "--seed", seed]);
}

fn real_video_in(dir: &Path, name: &str, synth_args: &[&str]) {
    let mut args = vec!["synth", "--out", name, "--frames", "200"];
    args.extend_from_slice(synth_args);
    ok(dir, &args);
    let (det, trk, rect) = (
        format!("{name}/det.txt"),
        format!("{name}/trk.txt"),
        format!("{name}/rect.txt"),
    );
    ok(dir, &["associate", "--detections", &det, "--out", &trk]);
    ok(dir, &["rectify", "--tracklets", &trk, "--out", &rect]);
}

#[test]
fn single_agent_pipeline_is_lossless() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    real_video(d, "1", "5");
    ok(
        d,
        &[
            "eval",
            "--gt",
            "s/gt.txt",
            "--pred",
            "s/rect.txt",
            "--out",
            "report.json",
        ],
    );
    let report = json(&d.join("report.json"));
    assert_eq!(report["mota"].as_f64(), Some(1.0));
    assert_eq!(report["idf1"].as_f64(), Some(1.0));
}

#[test]
fn explicit_thresholds_match_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    real_video(d, "3", "8");
    ok(
        d,
        &[
            "rectify",
            "--tracklets",
            "s/trk.txt",
            "--out",
            "explicit.txt",
            "--mu",
            "0.1",
            "--gamma",
            "0.5",
        ],
    );
    assert_eq!(
        fs::read(d.join("s/rect.txt")).unwrap(),
        fs::read(d.join("explicit.txt")).unwrap()
    );
    let log = json(&d.join("explicit.txt.log.json"));
    assert_eq!(log["config"]["mu"].as_f64(), Some(0.1));
    assert_eq!(log["config"]["gamma"].as_f64(), Some(0.5));
}

#[test]
fn config_file_then_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    real_video(d, "3", "8");
    fs::write(d.join("cfg.toml"), "[rectify]\ngamma = 0.01\n").unwrap();
    ok(
        d,
        &[
            "--config",
            "cfg.toml",
            "rectify",
            "--tracklets",
            "s/trk.txt",
            "--out",
            "strict.txt",
        ],
    );
    let strict = json(&d.join("strict.txt.log.json"));
    assert_eq!(strict["merge_log"]["joins"].as_array().unwrap().len(), 0);
    ok(
        d,
        &[
            "--config",
            "cfg.toml",
            "rectify",
            "--tracklets",
            "s/trk.txt",
            "--out",
            "loose.txt",
            "--gamma",
            "0.5",
        ],
    );
    assert_eq!(
        fs::read(d.join("s/rect.txt")).unwrap(),
        fs::read(d.join("loose.txt")).unwrap()
    );
}

#[test]
fn several_videos_in_one_run_match_single_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    real_video_in(d, "a", &["--agents", "3", "--seed", "1"]);
    real_video_in(d, "b", &["--agents", "4", "--seed", "2"]);
    ok(
        d,
        &[
            "--workers",
            "2",
            "associate",
            "--detections",
            "a/det.txt",
            "--detections",
            "b/det.txt",
            "--out",
            "a/trk2.txt",
            "--out",
            "b/trk2.txt",
        ],
    );
    ok(
        d,
        &[
            "rectify",
            "--tracklets",
            "a/trk2.txt",
            "--tracklets",
            "b/trk2.txt",
            "--out",
            "a/rect2.txt",
            "--out",
            "b/rect2.txt",
        ],
    );
    for v in ["a", "b"] {
        for (one, many) in [("trk.txt", "trk2.txt"), ("rect.txt", "rect2.txt")] {
            let read = |name: &str| fs::read(d.join(v).join(name)).unwrap();
            assert_eq!(read(one), read(many), "{v}/{many}");
        }
    }
    let mismatched = hvmine(
        d,
        &[
            "rectify",
            "--tracklets",
            "a/trk.txt",
            "--tracklets",
            "b/trk.txt",
            "--out",
            "x.txt",
        ],
    );
    assert_eq!(mismatched.status.code(), Some(2));
}

fn write_image_manifest(d: &Path) {
    let img = RgbImage::from_fn(64, 48, |x, y| Rgb([(x * 4) as u8, (y * 5) as u8, ((x + y) * 2) as u8]));
    img.save(d.join("a.png")).unwrap();
    img.save(d.join("b.png")).unwrap();
    fs::write(
        d.join("images.json"),
        r#"[{"image": "a.png", "boxes": [[10, 10, 12, 20], [30, 5, 10, 10]]},
            {"image": "b.png", "boxes": [[20, 14, 20, 20]]}]"#,
    )
    .unwrap();
}

#[test]
fn hallucinate_is_seed_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_image_manifest(d);
    ok(
        d,
        &[
            "--seed",
            "4",
            "hallucinate",
            "--manifest",
            "images.json",
            "--out",
            "hv1",
            "--frames",
            "6",
        ],
    );
    ok(
        d,
        &[
            "--seed",
            "4",
            "--workers",
            "1",
            "hallucinate",
            "--manifest",
            "images.json",
            "--out",
            "hv2",
            "--frames",
            "6",
        ],
    );
    for id in ["a", "b"] {
        for name in ["000001.png", "000006.png", "annotations.csv", "video.json"] {
            let a = fs::read(d.join("hv1").join(id).join(name)).unwrap();
            let b = fs::read(d.join("hv2").join(id).join(name)).unwrap();
            assert_eq!(a, b, "{id}/{name}");
        }
    }
    assert!(!d.join("hv1/a/000007.png").exists());
    let ann = fs::read_to_string(d.join("hv1/a/annotations.csv")).unwrap();
    assert!(ann.starts_with("identity,frame,x,y,w,h,visible\n"));
    assert_eq!(ann.lines().count(), 1 + 2 * 6);
}

#[test]
fn identity_hallucination_keeps_source_pixels() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_image_manifest(d);
    ok(
        d,
        &[
            "hallucinate",
            "--manifest",
            "images.json",
            "--out",
            "hv",
            "--final-scale",
            "1",
            "--no-effects",
        ],
    );
    let src = image::open(d.join("a.png")).unwrap().to_rgb8();
    let f1 = image::open(d.join("hv/a/000001.png")).unwrap().to_rgb8();
    assert_eq!(src, f1);
}

fn manifest_counts(path: &Path) -> (usize, usize, usize) {
    let text = fs::read_to_string(path).unwrap();
    let mut c = (0, 0, 0);
    for line in text.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        match v["category"].as_str().unwrap() {
            "hv" => c.0 += 1,
            "hard_rv" => c.1 += 1,
            "easy_rv" => c.2 += 1,
            other => panic!("unknown category {other}"),
        }
    }
    c
}

#[test]
fn sample_counts_follow_rounding() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_image_manifest(d);
    ok(d, &["hallucinate", "--manifest", "images.json", "--out", "hv"]);
    real_video(d, "4", "2");
    // Mined clips cover every broken track in full; an unbroken video
    // supplies the easy clips.
    real_video_in(d, "clean", &["--agents", "2", "--gaps-per-track", "0"]);
    ok(d, &["mine", "--log", "s/rect.txt.log.json", "--out", "hard.json"]);
    assert!(!json(&d.join("hard.json")).as_array().unwrap().is_empty());

    let base = [
        "sample",
        "--hv",
        "hv",
        "--rv",
        "s/rect.txt",
        "--rv",
        "clean/rect.txt",
        "--hard",
        "hard.json",
    ];
    let run = |extra: &[&str], out: &str| {
        let mut args: Vec<&str> = base.to_vec();
        args.extend_from_slice(extra);
        args.extend_from_slice(&["--out", out, "--seed", "9"]);
        ok(d, &args);
        manifest_counts(&d.join(out))
    };
    assert_eq!(
        run(&["--balancing-ratio", "0.75", "--hard-rate", "0.75"], "m1.jsonl"),
        (4, 9, 3)
    );
    assert_eq!(run(&[], "m2.jsonl"), (8, 6, 2));
    assert_eq!(run(&["--batches", "3"], "m3.jsonl"), (24, 18, 6));
    run(&["--balancing-ratio", "0.75", "--hard-rate", "0.75"], "m4.jsonl");
    assert_eq!(
        fs::read(d.join("m1.jsonl")).unwrap(),
        fs::read(d.join("m4.jsonl")).unwrap()
    );
}

#[test]
fn usage_and_data_errors_have_distinct_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let unknown = hvmine(d, &["frobnicate"]);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("Usage"));
    assert_eq!(hvmine(d, &["rectify", "--bogus"]).status.code(), Some(1));
    assert_eq!(hvmine(d, &["--help"]).status.code(), Some(0));

    let missing = hvmine(d, &["eval", "--gt", "nope.txt", "--pred", "nope.txt"]);
    assert_eq!(missing.status.code(), Some(2));

    fs::write(d.join("bad.txt"), "0,1,0,0,1,1,1\n").unwrap();
    let bad = hvmine(
        d,
        &["--fps", "30", "rectify", "--tracklets", "bad.txt", "--out", "o.txt"],
    );
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("line 1"));

    fs::write(d.join("t.txt"), "1,1,0,0,1,1,1\n").unwrap();
    let no_fps = hvmine(d, &["rectify", "--tracklets", "t.txt", "--out", "o.txt"]);
    assert_eq!(no_fps.status.code(), Some(2));
}

#[test]
fn sample_reports_empty_category() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_image_manifest(d);
    ok(d, &["hallucinate", "--manifest", "images.json", "--out", "hv"]);
    let out = hvmine(d, &["sample", "--hv", "hv", "--out", "m.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hard_rv"));
    ok(
        d,
        &["sample", "--hv", "hv", "--out", "m.jsonl", "--balancing-ratio", "0"],
    );
    assert_eq!(manifest_counts(&d.join("m.jsonl")), (16, 0, 0));
}
