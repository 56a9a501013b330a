use std::path::Path;
use std::process::{Command, Output};

fn scalematch(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scalematch"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn synth(dir: &Path, name: &str, median: &str, seed: &str) {
    ok(&scalematch(
        &[
            "synth",
            "--n-images",
            "30",
            "--seed",
            seed,
            "--median",
            median,
            "--sigma",
            "0.6",
            "--out-dir",
            name,
        ],
        dir,
    ));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = scalematch(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn version_lists_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(&scalematch(&["--version"], dir.path()));
    for schema in [
        "scalematch.annotations/1",
        "scalematch.scale_plan/1",
        "scalematch.tiles/1",
        "scalematch.eval_report/1",
    ] {
        assert!(text.contains(schema), "{text}");
    }
}

#[test]
fn missing_input_file_names_the_operation() {
    let dir = tempfile::tempdir().unwrap();
    let out = scalematch(&["stats", "--in", "absent.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dataset::load_annotations"));
}

#[test]
fn missing_required_setting_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(scalematch(&["stats"], dir.path()).status.code(), Some(2));
    std::fs::write(dir.path().join("bad.toml"), "[stats]\nno_such_key = 1\n").unwrap();
    let out = scalematch(&["--config", "bad.toml", "stats", "--in", "x.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stats_prints_table_layout() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "ds", "18", "1");
    let text = ok(&scalematch(&["stats", "--in", "ds/annotations.json"], dir.path()));
    let header = text.lines().next().unwrap();
    for col in ["absolute size", "relative size", "aspect ratio"] {
        assert!(header.contains(col));
    }
    assert!(text.lines().nth(1).unwrap().contains("0.676 ± 0.000"));
}

#[test]
fn hist_emits_csv_that_sums_to_one() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "ds", "18", "1");
    let text = ok(&scalematch(
        &["hist", "--in", "ds/annotations.json", "-k", "10"],
        dir.path(),
    ));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("bin_low,bin_high,probability"));
    let total: f64 = lines
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn match_is_reproducible_and_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "src", "60", "1");
    synth(dir.path(), "tgt", "18", "2");
    for out in ["a", "b"] {
        ok(&scalematch(
            &[
                "match",
                "--source",
                "src/annotations.json",
                "--target",
                "tgt/annotations.json",
                "--seed",
                "7",
                "--annotations-only",
                "--out-dir",
                out,
            ],
            dir.path(),
        ));
    }
    for file in ["annotations.json", "scale_plan.json"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    let config = std::fs::read_to_string(dir.path().join("a/config.toml")).unwrap();
    assert!(config.contains("[match]") && config.contains("seed = 7") && config.contains("annotations_only = true"));

    // the echoed config reproduces the run
    let mut echoed = config.replace("out_dir = \"a\"", "out_dir = \"c\"");
    echoed.push('\n');
    std::fs::write(dir.path().join("echo.toml"), echoed).unwrap();
    ok(&scalematch(&["--config", "echo.toml", "match"], dir.path()));
    assert_eq!(
        std::fs::read(dir.path().join("a/scale_plan.json")).unwrap(),
        std::fs::read(dir.path().join("c/scale_plan.json")).unwrap()
    );
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "src", "60", "1");
    synth(dir.path(), "tgt", "18", "2");
    std::fs::write(
        dir.path().join("run.toml"),
        "[match]\nsource = \"src/annotations.json\"\ntarget = \"tgt/annotations.json\"\nseed = 1\nannotations_only = true\nout_dir = \"o\"\n",
    )
    .unwrap();
    ok(&scalematch(
        &["--config", "run.toml", "match", "--seed", "9"],
        dir.path(),
    ));
    let plan = std::fs::read_to_string(dir.path().join("o/scale_plan.json")).unwrap();
    assert!(plan.contains("\"seed\": 9"));
}

#[test]
fn pixel_mode_without_images_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "src", "60", "1");
    let out = scalematch(
        &[
            "msm",
            "--source",
            "src/annotations.json",
            "--target",
            "src/annotations.json",
            "--out-dir",
            "o",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tile_merge_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    // small boxes in large frames, so nearly every box sits wholly in a tile
    ok(&scalematch(
        &[
            "synth",
            "--n-images",
            "4",
            "--seed",
            "5",
            "--median",
            "12",
            "--sigma",
            "0.3",
            "--image-width",
            "2200",
            "--image-height",
            "1500",
            "--out-dir",
            "ds",
        ],
        dir.path(),
    ));
    ok(&scalematch(
        &["tile", "--in", "ds/annotations.json", "--out-dir", "t"],
        dir.path(),
    ));
    let index = std::fs::read_to_string(dir.path().join("t/tiles.json")).unwrap();
    assert!(index.contains("scalematch.tiles/1"));

    // tile ground truth as detections, merged back, must score perfectly
    let tiles: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("t/annotations.json")).unwrap()).unwrap();
    let dets: Vec<serde_json::Value> = tiles["annotations"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|a| a["category_id"] == 1 && a["ignore"] != true)
        .map(|a| serde_json::json!({"image_id": a["image_id"], "bbox": a["bbox"], "score": 0.9}))
        .collect();
    assert!(!dets.is_empty());
    std::fs::write(dir.path().join("tile_dets.json"), serde_json::to_string(&dets).unwrap()).unwrap();
    ok(&scalematch(
        &[
            "merge",
            "--dets",
            "tile_dets.json",
            "--index",
            "t/tiles.json",
            "--out-dir",
            "m",
        ],
        dir.path(),
    ));
    std::fs::copy(dir.path().join("m/detections.json"), dir.path().join("dets.json")).unwrap();
    let table = ok(&scalematch(
        &[
            "eval",
            "--gt",
            "ds/annotations.json",
            "--dets",
            "dets.json",
            "--curves",
            "--out-dir",
            "ev",
        ],
        dir.path(),
    ));
    let all = table.lines().find(|l| l.starts_with("all")).unwrap();
    assert!(all.contains("100.00"), "{table}");
    assert!(dir.path().join("ev/report.json").exists());
    assert!(dir.path().join("ev/curves/curve_all_iou0.5.csv").exists());

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ev/report.json")).unwrap()).unwrap();
    assert_eq!(report["schema"], "scalematch.eval_report/1");
}

#[test]
fn cluster_anchors_prints_sorted_centers() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "ds", "18", "3");
    let text = ok(&scalematch(
        &[
            "cluster-anchors",
            "--in",
            "ds/annotations.json",
            "--k",
            "3",
            "--k-ratios",
            "1",
        ],
        dir.path(),
    ));
    let sizes: Vec<f64> = text
        .lines()
        .next()
        .unwrap()
        .trim_start_matches("sizes:")
        .split(',')
        .map(|s| s.trim().parse().unwrap())
        .collect();
    assert_eq!(sizes.len(), 3);
    assert!(sizes.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn workers_flag_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "ds", "18", "1");
    assert_eq!(
        scalematch(&["--workers", "0", "stats", "--in", "ds/annotations.json"], dir.path())
            .status
            .code(),
        Some(2)
    );
    ok(&scalematch(
        &["--workers", "2", "stats", "--in", "ds/annotations.json"],
        dir.path(),
    ));
}

#[test]
fn echoed_eval_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "ds", "18", "4");
    std::fs::write(dir.path().join("dets.json"), "[]").unwrap();
    ok(&scalematch(
        &[
            "eval",
            "--gt",
            "ds/annotations.json",
            "--dets",
            "dets.json",
            "--out-dir",
            "a",
        ],
        dir.path(),
    ));
    let config = std::fs::read_to_string(dir.path().join("a/config.toml")).unwrap();
    std::fs::write(
        dir.path().join("echo.toml"),
        config.replace("out_dir = \"a\"", "out_dir = \"b\""),
    )
    .unwrap();
    ok(&scalematch(&["--config", "echo.toml", "eval"], dir.path()));
    assert_eq!(
        std::fs::read(dir.path().join("a/report.json")).unwrap(),
        std::fs::read(dir.path().join("b/report.json")).unwrap()
    );
}
