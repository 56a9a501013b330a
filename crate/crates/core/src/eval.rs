//! Tiny-object evaluation: IOU matching against persons, IOD matching against
//! ignore regions, size partitions, AP and log-average miss rate.
//!
//! Within a (partition, threshold) cell, a detection is
//! - a true positive if it takes an in-partition person (visited by
//!   descending score; the free person with the highest IoU wins, lower GT id
//!   on IoU ties; see [`MatchStrategy`] for what happens when none is free),
//! - ignored if, failing that, its IOD with an ignore region or its IoU with
//!   an out-of-partition person reaches the threshold,
//! - a false positive otherwise.
//!
//! Ignored detections are dropped before the PR and miss-rate curves are
//! built. Curves are evaluated at score thresholds, so detections with equal
//! scores enter together.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{BoxRecord, DatasetAnnotations, Detection, DetectionSet, ImageId};
use crate::error::{Error, Result};

pub const EVAL_REPORT_SCHEMA: &str = "scalematch.eval_report/1";

/// Absolute-size interval `[low, high)`; `high` may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRange {
    pub name: String,
    pub low: f64,
    #[serde(with = "unbounded", default = "unbounded::infinite")]
    pub high: f64,
}

/// Serialize an infinite upper bound as `null`; a missing or null bound
/// reads back as infinite.
mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn infinite() -> f64 {
        f64::INFINITY
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl SizeRange {
    pub fn new(name: impl Into<String>, low: f64, high: f64) -> Self {
        Self {
            name: name.into(),
            low,
            high,
        }
    }

    pub fn contains(&self, size: f64) -> bool {
        size >= self.low && size < self.high
    }
}

/// How a detection is matched when every person it overlaps enough is
/// already taken by a higher-scored detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchStrategy {
    /// Look for a re-assignment of earlier detections (an augmenting path)
    /// that frees a person for this one. Earlier true positives stay true
    /// positives, and the true-positive count at every score cutoff is the
    /// maximum possible.
    #[default]
    Augmenting,
    /// Plain greedy: the detection becomes a false positive.
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub iou_thresholds: Vec<f64>,
    pub partitions: Vec<SizeRange>,
    pub fppi_points: Vec<f64>,
    pub uncertain_as_ignore: bool,
    #[serde(default)]
    pub matching: MatchStrategy,
}

/// Nine FPPI points log-spaced over `[1e-2, 1]`.
pub fn default_fppi_points() -> Vec<f64> {
    (0..9).map(|i| 10f64.powf(-2.0 + 0.25 * i as f64)).collect()
}

pub fn default_partitions() -> Vec<SizeRange> {
    vec![
        SizeRange::new("tiny1", 2.0, 8.0),
        SizeRange::new("tiny2", 8.0, 12.0),
        SizeRange::new("tiny3", 12.0, 20.0),
        SizeRange::new("tiny", 2.0, 20.0),
        SizeRange::new("small", 20.0, 32.0),
        SizeRange::new("all", 2.0, f64::INFINITY),
    ]
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_thresholds: vec![0.25, 0.5, 0.75],
            partitions: default_partitions(),
            fppi_points: default_fppi_points(),
            uncertain_as_ignore: true,
            matching: MatchStrategy::Augmenting,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.iou_thresholds.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(Error::InvalidParameter(format!("IoU threshold {t} outside (0, 1]")));
        }
        if let Some(p) = self
            .partitions
            .iter()
            .find(|p| p.low.partial_cmp(&p.high) != Some(Ordering::Less))
        {
            return Err(Error::InvalidParameter(format!(
                "size partition {} has low {} >= high {}",
                p.name, p.low, p.high
            )));
        }
        if self.fppi_points.is_empty()
            || self
                .fppi_points
                .iter()
                .any(|p| p.partial_cmp(&0.0) != Some(Ordering::Greater))
        {
            return Err(Error::InvalidParameter("FPPI points must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DetLabel {
    TruePositive,
    FalsePositive,
    Ignored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GtLabel {
    Matched,
    Missed,
    /// A person whose size is outside the evaluated partition.
    OutOfRange,
    /// An ignore region (or an uncertain box treated as one).
    Ignore,
}

/// Labels for one image, in the input order of detections and boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageMatch {
    pub detections: Vec<DetLabel>,
    pub ground_truth: Vec<GtLabel>,
}

/// Options for [`match_image`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchParams<'a> {
    pub threshold: f64,
    pub range: &'a SizeRange,
    pub uncertain_as_ignore: bool,
    pub strategy: MatchStrategy,
}

impl<'a> MatchParams<'a> {
    pub fn new(threshold: f64, range: &'a SizeRange) -> Self {
        Self {
            threshold,
            range,
            uncertain_as_ignore: true,
            strategy: MatchStrategy::default(),
        }
    }
}

/// Match one image's detections against its annotations.
pub fn match_image(dets: &[Detection], gts: &[BoxRecord], params: &MatchParams<'_>) -> ImageMatch {
    let threshold = params.threshold;
    let gt_labels: Vec<GtLabel> = gts
        .iter()
        .map(|g| {
            if g.acts_as_ignore(params.uncertain_as_ignore) {
                GtLabel::Ignore
            } else if params.range.contains(g.bbox.absolute_size()) {
                GtLabel::Missed
            } else {
                GtLabel::OutOfRange
            }
        })
        .collect();

    let mut candidates: Vec<usize> = (0..gts.len()).filter(|&i| gt_labels[i] == GtLabel::Missed).collect();
    candidates.sort_by_key(|&i| gts[i].id);
    let ignore_regions: Vec<usize> = (0..gts.len()).filter(|&i| gt_labels[i] == GtLabel::Ignore).collect();
    let out_of_range: Vec<usize> = (0..gts.len())
        .filter(|&i| gt_labels[i] == GtLabel::OutOfRange)
        .collect();

    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score));

    // eligible persons per detection, best IoU first, lower id on ties
    let eligible: Vec<Vec<usize>> = dets
        .iter()
        .map(|d| {
            let mut e: Vec<(usize, f64)> = candidates
                .iter()
                .map(|&g| (g, d.bbox.iou(&gts[g].bbox)))
                .filter(|&(_, iou)| iou >= threshold)
                .collect();
            e.sort_by(|a, b| b.1.total_cmp(&a.1));
            e.into_iter().map(|(g, _)| g).collect()
        })
        .collect();

    let mut owner: Vec<Option<usize>> = vec![None; gts.len()];
    let mut labels = vec![DetLabel::FalsePositive; dets.len()];
    for &d in &order {
        if let Some(&g) = eligible[d].iter().find(|&&g| owner[g].is_none()) {
            owner[g] = Some(d);
            labels[d] = DetLabel::TruePositive;
        } else if params.strategy == MatchStrategy::Augmenting && !eligible[d].is_empty() {
            let mut visited = vec![false; gts.len()];
            if augment(d, &eligible, &mut owner, &mut visited) {
                labels[d] = DetLabel::TruePositive;
            }
        }
    }
    for &d in &order {
        if labels[d] == DetLabel::TruePositive {
            continue;
        }
        let det = &dets[d].bbox;
        let hits_ignore = ignore_regions.iter().any(|&g| det.iod(&gts[g].bbox) >= threshold);
        let hits_other = out_of_range.iter().any(|&g| det.iou(&gts[g].bbox) >= threshold);
        if hits_ignore || hits_other {
            labels[d] = DetLabel::Ignored;
        }
    }

    let ground_truth = gt_labels
        .iter()
        .zip(&owner)
        .map(|(&l, o)| if o.is_some() { GtLabel::Matched } else { l })
        .collect();
    ImageMatch {
        detections: labels,
        ground_truth,
    }
}

/// Kuhn's augmenting-path step: find a person for `d`, moving earlier
/// detections to other eligible persons if needed.
fn augment(d: usize, eligible: &[Vec<usize>], owner: &mut [Option<usize>], visited: &mut [bool]) -> bool {
    for &g in &eligible[d] {
        if visited[g] {
            continue;
        }
        visited[g] = true;
        let free = match owner[g] {
            None => true,
            Some(other) => augment(other, eligible, owner, visited),
        };
        if free {
            owner[g] = Some(d);
            return true;
        }
    }
    false
}

/// A detection's score and label, pooled over the dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub score: f64,
    pub label: DetLabel,
}

/// One operating point: all detections with score >= `score` accepted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub score: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub recall: f64,
    pub precision: f64,
    pub fppi: f64,
}

/// Operating points at each distinct score, ignored detections removed.
pub fn operating_points(labeled: &[Scored], num_gt: usize, num_images: usize) -> Vec<CurvePoint> {
    let mut kept: Vec<&Scored> = labeled.iter().filter(|s| s.label != DetLabel::Ignored).collect();
    kept.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    for (i, s) in kept.iter().enumerate() {
        match s.label {
            DetLabel::TruePositive => tp += 1,
            DetLabel::FalsePositive => fp += 1,
            DetLabel::Ignored => unreachable!(),
        }
        let group_ends = kept.get(i + 1).is_none_or(|next| next.score != s.score);
        if group_ends {
            points.push(CurvePoint {
                score: s.score,
                true_positives: tp,
                false_positives: fp,
                recall: if num_gt > 0 { tp as f64 / num_gt as f64 } else { 0.0 },
                precision: tp as f64 / (tp + fp) as f64,
                fppi: if num_images > 0 {
                    fp as f64 / num_images as f64
                } else {
                    0.0
                },
            });
        }
    }
    points
}

/// Area under the precision envelope (all-point interpolation). `None`
/// when there is no ground truth.
pub fn average_precision(labeled: &[Scored], num_gt: usize) -> Option<f64> {
    if num_gt == 0 {
        return None;
    }
    let points = operating_points(labeled, num_gt, 1);
    let mut envelope: Vec<f64> = points.iter().map(|p| p.precision).collect();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, env) in points.iter().zip(&envelope) {
        ap += (p.recall - prev_recall) * env;
        prev_recall = p.recall;
    }
    Some(ap.clamp(0.0, 1.0))
}

/// Zero miss rates are raised to this before taking logs.
const MISS_RATE_FLOOR: f64 = 1e-10;

/// Log-average miss rate: geometric mean, over the FPPI points, of the miss
/// rate at the lowest score threshold whose FPPI does not exceed the point.
/// Before any detection is accepted the miss rate is 1. The result is exactly
/// 0 only when every sampled miss rate is 0. `None` when there is no ground
/// truth.
pub fn miss_rate(labeled: &[Scored], num_gt: usize, num_images: usize, fppi_points: &[f64]) -> Option<f64> {
    if num_gt == 0 {
        return None;
    }
    let points = operating_points(labeled, num_gt, num_images.max(1));
    let misses: Vec<f64> = fppi_points
        .iter()
        .map(|&ref_fppi| {
            let reachable = points.partition_point(|p| p.fppi <= ref_fppi);
            if reachable == 0 {
                1.0
            } else {
                1.0 - points[reachable - 1].recall
            }
        })
        .collect();
    if misses.iter().all(|&m| m <= 0.0) {
        return Some(0.0);
    }
    let mean_log = misses.iter().map(|m| m.max(MISS_RATE_FLOOR).ln()).sum::<f64>() / misses.len() as f64;
    Some(mean_log.exp().clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub partition: String,
    pub iou_threshold: f64,
    pub ap: Option<f64>,
    pub mr: Option<f64>,
    pub num_gt: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub ignored_detections: usize,
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub schema: String,
    pub images: usize,
    pub detections: usize,
    pub config: EvalConfig,
    pub cells: Vec<CellReport>,
}

impl EvalReport {
    pub fn cell(&self, partition: &str, iou_threshold: f64) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.partition == partition && c.iou_threshold == iou_threshold)
    }

    /// Partition rows by metric/threshold columns, values in percent.
    pub fn table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:.2}", 100.0 * x));
        let mut out = String::new();
        let mut header = format!("{:<10}", "partition");
        for t in &self.config.iou_thresholds {
            let _ = write!(header, " {:>9} {:>9}", format!("AP@{t}"), format!("MR@{t}"));
        }
        let _ = write!(header, " {:>7}", "#GT");
        out.push_str(&header);
        out.push('\n');
        for p in &self.config.partitions {
            let mut row = format!("{:<10}", p.name);
            let mut gt = 0;
            for &t in &self.config.iou_thresholds {
                let cell = self.cell(&p.name, t).expect("every cell is evaluated");
                gt = cell.num_gt;
                let _ = write!(row, " {:>9} {:>9}", fmt(cell.ap), fmt(cell.mr));
            }
            let _ = write!(row, " {gt:>7}");
            out.push_str(&row);
            out.push('\n');
        }
        out
    }

    /// PR / miss-rate curve of one cell as CSV.
    pub fn curve_csv(cell: &CellReport) -> String {
        let mut out = String::from("score,true_positives,false_positives,recall,precision,fppi,miss_rate\n");
        for p in &cell.curve {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                p.score,
                p.true_positives,
                p.false_positives,
                p.recall,
                p.precision,
                p.fppi,
                1.0 - p.recall
            );
        }
        out
    }
}

/// Evaluate detections against ground truth over every partition and IoU
/// threshold in `cfg`.
pub fn evaluate(dets: &DetectionSet, gt: &DatasetAnnotations, cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let known: HashSet<ImageId> = gt.images().iter().map(|i| i.id).collect();
    if let Some(d) = dets.detections().iter().find(|d| !known.contains(&d.image_id)) {
        return Err(Error::ImageIdMismatch(d.image_id.0));
    }
    let gt_by_image = gt.boxes_by_image();
    let det_by_image = dets.by_image();
    let per_image: Vec<(Vec<Detection>, Vec<BoxRecord>)> = gt_by_image
        .iter()
        .map(|(id, boxes)| {
            let ds = det_by_image
                .get(id)
                .map(|v| v.iter().map(|d| **d).collect())
                .unwrap_or_default();
            (ds, boxes.iter().map(|b| (*b).clone()).collect())
        })
        .collect();
    let num_images = gt.images().len();

    let grid: Vec<(&SizeRange, f64)> = cfg
        .partitions
        .iter()
        .flat_map(|p| cfg.iou_thresholds.iter().map(move |&t| (p, t)))
        .collect();
    let cells = grid
        .par_iter()
        .map(|&(range, threshold)| {
            let mut labeled = Vec::new();
            let mut num_gt = 0;
            let mut missed = 0;
            let params = MatchParams {
                threshold,
                range,
                uncertain_as_ignore: cfg.uncertain_as_ignore,
                strategy: cfg.matching,
            };
            for (ds, gts) in &per_image {
                let m = match_image(ds, gts, &params);
                labeled.extend(
                    ds.iter()
                        .zip(&m.detections)
                        .map(|(d, &label)| Scored { score: d.score, label }),
                );
                for l in &m.ground_truth {
                    match l {
                        GtLabel::Matched => num_gt += 1,
                        GtLabel::Missed => {
                            num_gt += 1;
                            missed += 1;
                        }
                        _ => {}
                    }
                }
            }
            let count = |want: DetLabel| labeled.iter().filter(|s| s.label == want).count();
            CellReport {
                partition: range.name.clone(),
                iou_threshold: threshold,
                ap: average_precision(&labeled, num_gt),
                mr: miss_rate(&labeled, num_gt, num_images, &cfg.fppi_points),
                num_gt,
                true_positives: count(DetLabel::TruePositive),
                false_positives: count(DetLabel::FalsePositive),
                false_negatives: missed,
                ignored_detections: count(DetLabel::Ignored),
                curve: operating_points(&labeled, num_gt, num_images),
            }
        })
        .collect();

    Ok(EvalReport {
        schema: EVAL_REPORT_SCHEMA.into(),
        images: num_images,
        detections: dets.len(),
        config: cfg.clone(),
        cells,
    })
}
