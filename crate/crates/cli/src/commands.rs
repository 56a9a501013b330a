use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use scalematch_core::dataset::{
    load_annotations, load_detections_with_cap, save_annotations, save_detections, AnnotationFormat,
    DEFAULT_DETECTIONS_PER_IMAGE,
};
use scalematch_core::eval::{
    default_fppi_points, default_partitions, evaluate, EvalConfig, EvalReport, MatchStrategy, SizeRange,
};
use scalematch_core::fsutil::{open_image, write_atomic, write_json_atomic};
use scalematch_core::scale::{
    apply_scale_plan, build_monotone_map, build_monotone_plan, build_scale_plan, image_mean_sizes, PixelIo, RatioClamp,
    ResizeFilter, ScalePlan, DEFAULT_CLAMP,
};
use scalematch_core::sizes::{
    cluster_anchors, rectified_histogram_of, sparse_rate, summarize, uniform_histogram, MeanStd, SizeSummary,
    DEFAULT_BINS, DEFAULT_SPARSE_ALPHA,
};
use scalematch_core::synth::{generate, write_blank_images, AspectLaw, SizeLaw, SynthSpec};
use scalematch_core::tiling::{
    cut_dataset, load_tile_index, mean_pixel_value, merge_detections, save_tile_index, TileGeometry, TileIo,
    DEFAULT_NMS_IOU,
};
use scalematch_core::{DatasetAnnotations, SizeHistogram};

use crate::config::{echo, require, usage};

fn load(path: &Path) -> Result<DatasetAnnotations> {
    load_annotations(path, AnnotationFormat::CocoJson).context("dataset::load_annotations")
}

/// Write the resolved config next to the outputs.
fn write_config<C: Serialize>(dir: &Path, section: &str, config: &C) -> Result<()> {
    write_atomic(&dir.join("config.toml"), echo(section, config)?.as_bytes()).context("writing resolved config")
}

// ---------------------------------------------------------------- stats

#[derive(Args, Serialize, Debug)]
pub struct StatsFlags {
    /// Annotation file
    #[arg(long = "in")]
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<PathBuf>,
    /// Count ignore regions and uncertain boxes too
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    include_ignore: Option<bool>,
    /// Also write stats.json and the resolved config here
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out_dir: Option<PathBuf>,
}

#[derive(Serialize, Deserialize, Default, Debug)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    input: Option<PathBuf>,
    include_ignore: bool,
    out_dir: Option<PathBuf>,
}

fn mean_std(v: Option<MeanStd>, precision: usize) -> String {
    v.map_or("-".into(), |m| format!("{:.p$} ± {:.p$}", m.mean, m.std, p = precision))
}

pub fn stats_table(s: &SizeSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16} {:>8} {:>9}  {:<16} {:<18} {:<16}",
        "dataset", "images", "objects", "absolute size", "relative size", "aspect ratio"
    );
    let _ = writeln!(
        out,
        "{:<16} {:>8} {:>9}  {:<16} {:<18} {:<16}",
        s.dataset,
        s.images,
        s.objects,
        mean_std(s.absolute_size, 1),
        mean_std(s.relative_size, 3),
        mean_std(s.aspect_ratio, 3)
    );
    out
}

pub fn stats(cfg: StatsConfig) -> Result<()> {
    let ds = load(&require(&cfg.input, "--in")?)?;
    let summary = summarize(&ds, cfg.include_ignore);
    print!("{}", stats_table(&summary));
    if let Some(dir) = &cfg.out_dir {
        write_json_atomic(&dir.join("stats.json"), &summary).context("writing stats")?;
        write_config(dir, "stats", &cfg)?;
    }
    Ok(())
}

// ---------------------------------------------------------------- hist

#[derive(Serialize, Deserialize, Clone, Copy, Debug, Default, PartialEq, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum HistKind {
    #[default]
    Rectified,
    Uniform,
}

#[derive(Args, Serialize, Debug)]
pub struct HistFlags {
    /// Annotation file
    #[arg(long = "in")]
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<PathBuf>,
    /// Number of bins
    #[arg(long, short = 'k')]
    #[serde(skip_serializing_if = "Option::is_none")]
    bins: Option<usize>,
    /// Sparse-rate threshold factor
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<HistKind>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    include_ignore: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out_dir: Option<PathBuf>,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(default, deny_unknown_fields)]
pub struct HistConfig {
    input: Option<PathBuf>,
    bins: usize,
    alpha: f64,
    kind: HistKind,
    include_ignore: bool,
    out_dir: Option<PathBuf>,
}

impl Default for HistConfig {
    fn default() -> Self {
        Self {
            input: None,
            bins: DEFAULT_BINS,
            alpha: DEFAULT_SPARSE_ALPHA,
            kind: HistKind::Rectified,
            include_ignore: false,
            out_dir: None,
        }
    }
}

pub fn histogram_csv(h: &SizeHistogram) -> String {
    let mut out = String::from("bin_low,bin_high,probability\n");
    for (b, p) in h.bins().iter().zip(h.probs()) {
        let _ = writeln!(out, "{},{},{}", b.low, b.high, p);
    }
    out
}

pub fn hist(cfg: HistConfig) -> Result<()> {
    let ds = load(&require(&cfg.input, "--in")?)?;
    let h = match cfg.kind {
        HistKind::Rectified => {
            rectified_histogram_of(&ds, cfg.bins, cfg.include_ignore).context("sizes::rectified_histogram")?
        }
        HistKind::Uniform => {
            uniform_histogram(&ds.sizes(cfg.include_ignore), cfg.bins).context("sizes::uniform_histogram")?
        }
    };
    if h.is_degenerate() {
        log::warn!(
            "size support too narrow for {} bins; fell back to {}",
            cfg.bins,
            h.len()
        );
    }
    log::info!("sparse rate {:.4} (alpha {})", sparse_rate(&h, cfg.alpha), cfg.alpha);
    let csv = histogram_csv(&h);
    print!("{csv}");
    if let Some(dir) = &cfg.out_dir {
        write_atomic(&dir.join("histogram.csv"), csv.as_bytes()).context("writing histogram")?;
        write_config(dir, "hist", &cfg)?;
    }
    Ok(())
}

// ---------------------------------------------------------------- match / msm

#[derive(Args, Serialize, Debug)]
pub struct MatchFlags {
    /// Annotations of the dataset to transform
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    source: Option<PathBuf>,
    /// Annotations whose size distribution is the target
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<PathBuf>,
    /// RNG seed (scale match only)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Bins of the target's rectified histogram
    #[arg(long, short = 'k')]
    #[serde(skip_serializing_if = "Option::is_none")]
    bins: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    clamp_min: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    clamp_max: Option<f64>,
    /// Rescale annotations only; leave pixels alone
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    annotations_only: Option<bool>,
    /// Directory holding the source images (pixel mode)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    image_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    filter: Option<FilterArg>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out_dir: Option<PathBuf>,
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FilterArg {
    #[default]
    Bilinear,
    Nearest,
}

impl From<FilterArg> for ResizeFilter {
    fn from(f: FilterArg) -> Self {
        match f {
            FilterArg::Bilinear => ResizeFilter::Bilinear,
            FilterArg::Nearest => ResizeFilter::Nearest,
        }
    }
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    source: Option<PathBuf>,
    target: Option<PathBuf>,
    seed: u64,
    bins: usize,
    clamp_min: f64,
    clamp_max: f64,
    annotations_only: bool,
    image_dir: Option<PathBuf>,
    filter: FilterArg,
    out_dir: Option<PathBuf>,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            source: None,
            target: None,
            seed: 0,
            bins: DEFAULT_BINS,
            clamp_min: DEFAULT_CLAMP.min,
            clamp_max: DEFAULT_CLAMP.max,
            annotations_only: false,
            image_dir: None,
            filter: FilterArg::Bilinear,
            out_dir: None,
        }
    }
}

pub fn scale_match(cfg: MatchConfig, monotone: bool) -> Result<()> {
    let section = if monotone { "msm" } else { "match" };
    let out_dir = require(&cfg.out_dir, "--out-dir")?;
    let pixels = if cfg.annotations_only {
        None
    } else {
        let image_dir = cfg
            .image_dir
            .clone()
            .ok_or_else(|| usage("pixel mode needs --image-dir; pass --annotations-only to skip pixels"))?;
        Some(PixelIo {
            image_dir_in: image_dir,
            image_dir_out: out_dir.join("images"),
            filter: cfg.filter.into(),
        })
    };
    let clamp = RatioClamp::new(cfg.clamp_min, cfg.clamp_max).map_err(|e| usage(e.to_string()))?;
    let source = load(&require(&cfg.source, "--source")?)?;
    let target = load(&require(&cfg.target, "--target")?)?;
    let hist = rectified_histogram_of(&target, cfg.bins, false).context("sizes::rectified_histogram")?;

    let plan: ScalePlan = if monotone {
        let means: Vec<f64> = image_mean_sizes(&source).into_iter().filter_map(|(_, m)| m).collect();
        let map = build_monotone_map(&means, &hist).context("scale::build_monotone_map")?;
        build_monotone_plan(&source, &map, clamp).context("scale::build_monotone_plan")?
    } else {
        build_scale_plan(&source, &hist, cfg.seed, clamp).context("scale::build_scale_plan")?
    };
    let out = apply_scale_plan(&source, &plan, pixels.as_ref()).context("scale::apply_scale_plan")?;

    save_annotations(&out, &out_dir.join("annotations.json")).context("dataset::save_annotations")?;
    write_json_atomic(&out_dir.join("scale_plan.json"), &plan).context("writing scale plan")?;
    write_config(&out_dir, section, &cfg)?;
    let s = plan.summary();
    log::info!(
        "{} images rescaled ({} without persons, {} clamped) into {}",
        s.images,
        s.without_objects,
        s.clamped,
        out_dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- tile

#[derive(Args, Serialize, Debug)]
pub struct TileFlags {
    /// Annotation file
    #[arg(long = "in")]
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tile_w: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tile_h: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    overlap: Option<u32>,
    /// Directory holding the images; omit to cut annotations only
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    image_dir: Option<PathBuf>,
    /// Paint ignore regions with the dataset's mean pixel before cutting
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    fill_ignore: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out_dir: Option<PathBuf>,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(default, deny_unknown_fields)]
pub struct TileConfig {
    input: Option<PathBuf>,
    tile_w: u32,
    tile_h: u32,
    overlap: u32,
    image_dir: Option<PathBuf>,
    fill_ignore: bool,
    /// Explicit fill colour; the dataset mean is used when absent.
    fill_value: Option<[f64; 3]>,
    out_dir: Option<PathBuf>,
}

impl Default for TileConfig {
    fn default() -> Self {
        let g = TileGeometry::default();
        Self {
            input: None,
            tile_w: g.tile_w,
            tile_h: g.tile_h,
            overlap: g.overlap,
            image_dir: None,
            fill_ignore: false,
            fill_value: None,
            out_dir: None,
        }
    }
}

/// Pixel-count weighted mean over every image of the dataset.
fn dataset_mean_pixel(ds: &DatasetAnnotations, dir: &Path) -> Result<[f64; 3]> {
    let mut sum = [0.0; 3];
    let mut pixels = 0.0;
    for img in ds.images() {
        let rgb = open_image(&dir.join(&img.file_name))
            .context("tiling::mean_pixel_value")?
            .to_rgb8();
        let n = (rgb.width() * rgb.height()) as f64;
        if let Some(m) = mean_pixel_value(std::iter::once(&rgb)) {
            for c in 0..3 {
                sum[c] += m[c] * n;
            }
            pixels += n;
        }
    }
    if pixels == 0.0 {
        return Ok([0.0; 3]);
    }
    Ok(sum.map(|s| s / pixels))
}

pub fn tile(cfg: TileConfig) -> Result<()> {
    let out_dir = require(&cfg.out_dir, "--out-dir")?;
    let geometry = TileGeometry {
        tile_w: cfg.tile_w,
        tile_h: cfg.tile_h,
        overlap: cfg.overlap,
    };
    geometry.validate().map_err(|e| usage(e.to_string()))?;
    let ds = load(&require(&cfg.input, "--in")?)?;
    let io = match &cfg.image_dir {
        Some(dir) => {
            let fill = match (cfg.fill_ignore, cfg.fill_value) {
                (false, _) => None,
                (true, Some(v)) => Some(v),
                (true, None) => Some(dataset_mean_pixel(&ds, dir)?),
            };
            Some(TileIo {
                image_dir_in: dir.clone(),
                image_dir_out: out_dir.join("images"),
                fill,
            })
        }
        None => {
            if cfg.fill_ignore {
                log::warn!("fill_ignore has no effect without --image-dir");
            }
            None
        }
    };
    let (tiles, index) = cut_dataset(&ds, geometry, io.as_ref()).context("tiling::cut_dataset")?;
    save_annotations(&tiles, &out_dir.join("annotations.json")).context("dataset::save_annotations")?;
    save_tile_index(&index, &out_dir.join("tiles.json")).context("tiling::save_tile_index")?;
    write_config(&out_dir, "tile", &cfg)?;
    log::info!("{} images cut into {} tiles", ds.images().len(), index.tiles.len());
    Ok(())
}

// ---------------------------------------------------------------- merge

#[derive(Args, Serialize, Debug)]
pub struct MergeFlags {
    /// Detections on tile images
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dets: Option<PathBuf>,
    /// Tile index written by `tile`
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    index: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    nms_iou: Option<f64>,
    /// Detections kept per image after merging
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    cap: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out_dir: Option<PathBuf>,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(default, deny_unknown_fields)]
pub struct MergeConfig {
    dets: Option<PathBuf>,
    index: Option<PathBuf>,
    nms_iou: f64,
    cap: usize,
    out_dir: Option<PathBuf>,
}

impl Default for MergeConfig {
    fn default() -> Self {
        Self {
            dets: None,
            index: None,
            nms_iou: DEFAULT_NMS_IOU,
            cap: DEFAULT_DETECTIONS_PER_IMAGE,
            out_dir: None,
        }
    }
}

pub fn merge(cfg: MergeConfig) -> Result<()> {
    let out_dir = require(&cfg.out_dir, "--out-dir")?;
    if !(0.0..=1.0).contains(&cfg.nms_iou) {
        return Err(usage(format!("nms_iou must lie in [0, 1], got {}", cfg.nms_iou)));
    }
    let index = load_tile_index(&require(&cfg.index, "--index")?).context("tiling::load_tile_index")?;
    // tiles can hold many detections each; cap only after merging
    let dets =
        load_detections_with_cap(&require(&cfg.dets, "--dets")?, usize::MAX).context("dataset::load_detections")?;
    let merged = merge_detections(&dets, &index, cfg.nms_iou, cfg.cap).context("tiling::merge_detections")?;
    save_detections(&merged, &out_dir.join("detections.json")).context("dataset::save_detections")?;
    write_config(&out_dir, "merge", &cfg)?;
    log::info!("{} tile detections merged into {}", dets.len(), merged.len());
    Ok(())
}

// ---------------------------------------------------------------- eval

#[derive(Args, Serialize, Debug)]
pub struct EvalFlags {
    /// Ground-truth annotations
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    gt: Option<PathBuf>,
    /// Detections
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dets: Option<PathBuf>,
    /// IoU thresholds, comma separated
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    iou_thresholds: Option<Vec<f64>>,
    /// Treat uncertain boxes as ignore regions
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    uncertain_as_ignore: Option<bool>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    matching: Option<MatchingArg>,
    /// Detections kept per image
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    cap: Option<usize>,
    /// Write one PR / miss-rate CSV per cell
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    curves: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out_dir: Option<PathBuf>,
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MatchingArg {
    Augmenting,
    Greedy,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(default, deny_unknown_fields)]
pub struct EvalCmdConfig {
    gt: Option<PathBuf>,
    dets: Option<PathBuf>,
    iou_thresholds: Vec<f64>,
    partitions: Vec<SizeRange>,
    fppi_points: Vec<f64>,
    uncertain_as_ignore: bool,
    matching: MatchingArg,
    cap: usize,
    curves: bool,
    out_dir: Option<PathBuf>,
}

impl Default for EvalCmdConfig {
    fn default() -> Self {
        let d = EvalConfig::default();
        Self {
            gt: None,
            dets: None,
            iou_thresholds: d.iou_thresholds,
            partitions: default_partitions(),
            fppi_points: default_fppi_points(),
            uncertain_as_ignore: d.uncertain_as_ignore,
            matching: MatchingArg::Augmenting,
            cap: DEFAULT_DETECTIONS_PER_IMAGE,
            curves: false,
            out_dir: None,
        }
    }
}

pub fn eval(cfg: EvalCmdConfig) -> Result<()> {
    let eval_cfg = EvalConfig {
        iou_thresholds: cfg.iou_thresholds.clone(),
        partitions: cfg.partitions.clone(),
        fppi_points: cfg.fppi_points.clone(),
        uncertain_as_ignore: cfg.uncertain_as_ignore,
        matching: match cfg.matching {
            MatchingArg::Augmenting => MatchStrategy::Augmenting,
            MatchingArg::Greedy => MatchStrategy::Greedy,
        },
    };
    eval_cfg.validate().map_err(|e| usage(e.to_string()))?;
    let gt = load(&require(&cfg.gt, "--gt")?)?;
    let dets = load_detections_with_cap(&require(&cfg.dets, "--dets")?, cfg.cap).context("dataset::load_detections")?;
    let report = evaluate(&dets, &gt, &eval_cfg).context("eval::evaluate")?;
    let table = report.table();
    print!("{table}");
    if let Some(dir) = &cfg.out_dir {
        write_json_atomic(&dir.join("report.json"), &report).context("writing report")?;
        write_atomic(&dir.join("table.txt"), table.as_bytes()).context("writing table")?;
        if cfg.curves {
            for cell in &report.cells {
                let name = format!("curve_{}_iou{}.csv", cell.partition, cell.iou_threshold);
                write_atomic(&dir.join("curves").join(name), EvalReport::curve_csv(cell).as_bytes())
                    .context("writing curves")?;
            }
        }
        write_config(dir, "eval", &cfg)?;
    } else if cfg.curves {
        log::warn!("--curves needs --out-dir; no curves written");
    }
    Ok(())
}

// ---------------------------------------------------------------- synth

#[derive(Args, Serialize, Debug)]
pub struct SynthFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_images: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    image_width: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    image_height: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    ignore_fraction: Option<f64>,
    /// Lognormal size law with this median (needs --sigma)
    #[arg(long, requires = "sigma")]
    #[serde(skip)]
    pub median: Option<f64>,
    #[arg(long, requires = "median")]
    #[serde(skip)]
    pub sigma: Option<f64>,
    /// Also write flat-colour PNG images
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    write_images: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out_dir: Option<PathBuf>,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    name: String,
    n_images: usize,
    boxes_per_image: (usize, usize),
    pub size_law: SizeLaw,
    aspect_law: AspectLaw,
    image_width: u32,
    image_height: u32,
    ignore_fraction: f64,
    seed: u64,
    write_images: bool,
    out_dir: Option<PathBuf>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let s = SynthSpec::default();
        Self {
            name: s.name,
            n_images: s.n_images,
            boxes_per_image: s.boxes_per_image,
            size_law: s.size_law,
            aspect_law: s.aspect_law,
            image_width: s.image_width,
            image_height: s.image_height,
            ignore_fraction: s.ignore_fraction,
            seed: s.seed,
            write_images: false,
            out_dir: None,
        }
    }
}

pub fn synth(cfg: SynthConfig) -> Result<()> {
    let out_dir = require(&cfg.out_dir, "--out-dir")?;
    let spec = SynthSpec {
        name: cfg.name.clone(),
        n_images: cfg.n_images,
        boxes_per_image: cfg.boxes_per_image,
        size_law: cfg.size_law.clone(),
        aspect_law: cfg.aspect_law.clone(),
        image_width: cfg.image_width,
        image_height: cfg.image_height,
        ignore_fraction: cfg.ignore_fraction,
        seed: cfg.seed,
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let ds = generate(&spec).context("synth::generate")?;
    save_annotations(&ds, &out_dir.join("annotations.json")).context("dataset::save_annotations")?;
    if cfg.write_images {
        write_blank_images(&ds, &out_dir.join("images")).context("synth::write_blank_images")?;
    }
    write_config(&out_dir, "synth", &cfg)?;
    log::info!(
        "{} images, {} boxes written to {}",
        ds.images().len(),
        ds.boxes().len(),
        out_dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- cluster-anchors

#[derive(Args, Serialize, Debug)]
pub struct AnchorFlags {
    /// Annotation file
    #[arg(long = "in")]
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<PathBuf>,
    /// Number of size clusters
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    /// Number of aspect-ratio clusters
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k_ratios: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out_dir: Option<PathBuf>,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(default, deny_unknown_fields)]
pub struct AnchorConfig {
    input: Option<PathBuf>,
    k: usize,
    k_ratios: usize,
    seed: u64,
    out_dir: Option<PathBuf>,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        Self {
            input: None,
            k: 5,
            k_ratios: 3,
            seed: 0,
            out_dir: None,
        }
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(", ")
}

pub fn cluster(cfg: AnchorConfig) -> Result<()> {
    let ds = load(&require(&cfg.input, "--in")?)?;
    let anchors = cluster_anchors(&ds, cfg.k, cfg.k_ratios, cfg.seed).context("sizes::cluster_anchors")?;
    println!("sizes:  {}", join(&anchors.sizes));
    println!("ratios: {}", join(&anchors.ratios));
    if let Some(dir) = &cfg.out_dir {
        write_json_atomic(&dir.join("anchors.json"), &anchors).context("writing anchors")?;
        write_config(dir, "cluster-anchors", &cfg)?;
    }
    Ok(())
}
