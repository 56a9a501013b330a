//! Image-level scale matching.
//!
//! A [`ScalePlan`] assigns each source image a ratio `c` so that the mean
//! absolute size of its person boxes becomes a target size `ŝ`. The target
//! size is either sampled from the target histogram (`ScaleMatch`) or
//! obtained through the monotone CDF mapping (`Monotone`). Applying the plan
//! resizes the image and multiplies every box coordinate by `c`.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{BoxRecord, DatasetAnnotations, ImageId, ImageRecord};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::sizes::{empirical_cdf, histogram_cdf, EmpiricalCdf, SizeHistogram};

pub const SCALE_PLAN_SCHEMA: &str = "scalematch.scale_plan/1";

/// Default bounds on the per-image ratio.
pub const DEFAULT_CLAMP: RatioClamp = RatioClamp {
    min: 1.0 / 32.0,
    max: 32.0,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioClamp {
    pub min: f64,
    pub max: f64,
}

impl RatioClamp {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min > 0.0 && min <= max && max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ratio clamp [{min}, {max}] must satisfy 0 < min <= max < inf"
            )));
        }
        Ok(Self { min, max })
    }

    fn apply(&self, c: f64) -> (f64, bool) {
        if c < self.min {
            (self.min, true)
        } else if c > self.max {
            (self.max, true)
        } else {
            (c, false)
        }
    }
}

impl Default for RatioClamp {
    fn default() -> Self {
        DEFAULT_CLAMP
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    ScaleMatch,
    Monotone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleEntry {
    pub image_id: ImageId,
    /// Mean absolute size of the image's person boxes; 0 when it has none.
    pub mean_size: f64,
    /// Target mean size; 0 when the image has no person boxes.
    pub target_size: f64,
    pub ratio: f64,
    pub clamped: bool,
}

impl ScaleEntry {
    pub fn has_objects(&self) -> bool {
        self.mean_size > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalePlan {
    pub schema: String,
    pub mode: ScaleMode,
    pub seed: Option<u64>,
    pub clamp: RatioClamp,
    pub entries: Vec<ScaleEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanSummary {
    pub images: usize,
    pub without_objects: usize,
    pub clamped: usize,
}

impl ScalePlan {
    pub fn entry(&self, id: ImageId) -> Option<&ScaleEntry> {
        self.entries
            .binary_search_by_key(&id, |e| e.image_id)
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn summary(&self) -> PlanSummary {
        PlanSummary {
            images: self.entries.len(),
            without_objects: self.entries.iter().filter(|e| !e.has_objects()).count(),
            clamped: self.entries.iter().filter(|e| e.clamped).count(),
        }
    }
}

/// Per-image mean absolute size of confident person boxes, in image id order.
/// `None` for images without any.
pub fn image_mean_sizes(ds: &DatasetAnnotations) -> Vec<(ImageId, Option<f64>)> {
    ds.boxes_by_image()
        .into_iter()
        .map(|(id, boxes)| {
            let sizes: Vec<f64> = boxes
                .iter()
                .filter(|b| b.is_sizable())
                .map(|b| b.bbox.absolute_size())
                .collect();
            let mean = (!sizes.is_empty()).then(|| sizes.iter().sum::<f64>() / sizes.len() as f64);
            (id, mean)
        })
        .collect()
}

/// Draw one target size from the histogram.
pub fn sample_target_size<R: rand::Rng + ?Sized>(h: &SizeHistogram, rng: &mut R) -> f64 {
    h.sample(rng)
}

fn entry_for(image_id: ImageId, mean: Option<f64>, target: impl FnOnce(f64) -> f64, clamp: &RatioClamp) -> ScaleEntry {
    match mean {
        Some(s) => {
            let target_size = target(s);
            let (ratio, clamped) = clamp.apply(target_size / s);
            ScaleEntry {
                image_id,
                mean_size: s,
                target_size,
                ratio,
                clamped,
            }
        }
        None => ScaleEntry {
            image_id,
            mean_size: 0.0,
            target_size: 0.0,
            ratio: 1.0,
            clamped: false,
        },
    }
}

/// Scale Match: for each image with person boxes, sample `ŝ` from the target
/// histogram and set `c = ŝ / s` with `s` the image's mean box size. Images
/// without person boxes pass through with `c = 1`. One RNG stream, consumed
/// in image id order.
pub fn build_scale_plan(
    source: &DatasetAnnotations,
    target_hist: &SizeHistogram,
    seed: u64,
    clamp: RatioClamp,
) -> Result<ScalePlan> {
    if source.images().is_empty() {
        return Err(Error::EmptySource);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = target_hist.sampler();
    let entries = image_mean_sizes(source)
        .into_iter()
        .map(|(id, mean)| entry_for(id, mean, |_| sampler.sample(&mut rng), &clamp))
        .collect();
    let plan = ScalePlan {
        schema: SCALE_PLAN_SCHEMA.into(),
        mode: ScaleMode::ScaleMatch,
        seed: Some(seed),
        clamp,
        entries,
    };
    log_summary(&plan);
    Ok(plan)
}

/// Monotone size mapping `f(s) = F_target^-1(F_source(s))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneMap {
    source: EmpiricalCdf,
    target: EmpiricalCdf,
}

impl MonotoneMap {
    pub fn source_cdf(&self) -> &EmpiricalCdf {
        &self.source
    }

    pub fn target_cdf(&self) -> &EmpiricalCdf {
        &self.target
    }

    /// Map a source size. Sizes at or below the source minimum map to the
    /// target minimum, sizes at or above the source maximum to the target
    /// maximum.
    pub fn apply(&self, s: f64) -> f64 {
        if s <= self.source.min() {
            return self.target.min();
        }
        self.target.quantile(self.source.eval(s))
    }
}

pub fn build_monotone_map(source_sizes: &[f64], target_hist: &SizeHistogram) -> Result<MonotoneMap> {
    if source_sizes.is_empty() {
        return Err(Error::EmptyInput("build_monotone_map: no source sizes"));
    }
    Ok(MonotoneMap {
        source: empirical_cdf(source_sizes)?,
        target: histogram_cdf(target_hist),
    })
}

/// Monotone Scale Match at image level: `ŝ = f(s)` for each image's mean box
/// size. No randomness is involved.
pub fn build_monotone_plan(source: &DatasetAnnotations, map: &MonotoneMap, clamp: RatioClamp) -> Result<ScalePlan> {
    if source.images().is_empty() {
        return Err(Error::EmptySource);
    }
    let entries = image_mean_sizes(source)
        .into_iter()
        .map(|(id, mean)| entry_for(id, mean, |s| map.apply(s), &clamp))
        .collect();
    let plan = ScalePlan {
        schema: SCALE_PLAN_SCHEMA.into(),
        mode: ScaleMode::Monotone,
        seed: None,
        clamp,
        entries,
    };
    log_summary(&plan);
    Ok(plan)
}

fn log_summary(plan: &ScalePlan) {
    let s = plan.summary();
    if s.clamped > 0 {
        log::warn!(
            "{} of {} scale ratios clamped to [{}, {}]",
            s.clamped,
            s.images,
            plan.clamp.min,
            plan.clamp.max
        );
    }
    if s.without_objects > 0 {
        log::info!(
            "{} images without person boxes passed through at ratio 1",
            s.without_objects
        );
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResizeFilter {
    #[default]
    Bilinear,
    Nearest,
}

impl ResizeFilter {
    fn to_image(self) -> image::imageops::FilterType {
        match self {
            ResizeFilter::Bilinear => image::imageops::FilterType::Triangle,
            ResizeFilter::Nearest => image::imageops::FilterType::Nearest,
        }
    }
}

/// Where to read and write pixels when applying a plan.
#[derive(Debug, Clone)]
pub struct PixelIo {
    pub image_dir_in: PathBuf,
    pub image_dir_out: PathBuf,
    pub filter: ResizeFilter,
}

/// `round(dim * c)` with halves rounded up, at least 1.
pub fn scaled_dimension(dim: f64, c: f64) -> f64 {
    (dim * c + 0.5).floor().max(1.0)
}

/// Rescale every image and its boxes by the plan's ratio.
///
/// With `pixels = None` only annotations change and image dimensions become
/// `W * c` exactly (at least 1), which keeps every relative size unchanged.
/// With pixel I/O the images are resized to integer dimensions and boxes are
/// clipped to them.
pub fn apply_scale_plan(
    source: &DatasetAnnotations,
    plan: &ScalePlan,
    pixels: Option<&PixelIo>,
) -> Result<DatasetAnnotations> {
    let by_image = source.boxes_by_image();
    let results: Vec<Result<(ImageRecord, Vec<BoxRecord>)>> = source
        .images()
        .par_iter()
        .map(|img| {
            let entry = plan.entry(img.id).ok_or(Error::PlanCoverage(img.id.0))?;
            let c = entry.ratio;
            let boxes = by_image.get(&img.id).map(Vec::as_slice).unwrap_or(&[]);
            match pixels {
                None => {
                    let out_img = ImageRecord {
                        width: (img.width * c).max(1.0),
                        height: (img.height * c).max(1.0),
                        ..img.clone()
                    };
                    let out_boxes = boxes
                        .iter()
                        .map(|b| BoxRecord {
                            bbox: b.bbox.scale(c),
                            ..(*b).clone()
                        })
                        .collect();
                    Ok((out_img, out_boxes))
                }
                Some(io) => resize_image_file(img, boxes, c, io),
            }
        })
        .collect();

    let mut images = Vec::with_capacity(results.len());
    let mut boxes = Vec::new();
    for r in results {
        let (img, bs) = r?;
        images.push(img);
        boxes.extend(bs);
    }
    DatasetAnnotations::new(source.name.clone(), images, boxes)
}

fn resize_image_file(
    img: &ImageRecord,
    boxes: &[&BoxRecord],
    c: f64,
    io: &PixelIo,
) -> Result<(ImageRecord, Vec<BoxRecord>)> {
    let in_path = io.image_dir_in.join(&img.file_name);
    let pixels = fsutil::open_image(&in_path)?;
    let width = scaled_dimension(pixels.width() as f64, c);
    let height = scaled_dimension(pixels.height() as f64, c);
    let resized = pixels.resize_exact(width as u32, height as u32, io.filter.to_image());
    fsutil::save_image_atomic(&io.image_dir_out.join(&img.file_name), &resized)?;

    let mut out_boxes = Vec::with_capacity(boxes.len());
    for b in boxes {
        match b.bbox.scale(c).clip(width, height) {
            Some(bbox) => out_boxes.push(BoxRecord { bbox, ..(*b).clone() }),
            None => log::warn!("annotation {} vanished when resizing image {}", b.id, img.id),
        }
    }
    let out_img = ImageRecord {
        width,
        height,
        ..img.clone()
    };
    Ok((out_img, out_boxes))
}
