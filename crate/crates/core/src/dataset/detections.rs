//! Detection results: a JSON array of `{"image_id", "bbox": [x, y, w, h], "score"}`.
//! Extra fields such as `category_id` are accepted and ignored.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ImageId;
use crate::error::{Error, Result};
use crate::fsutil;
use crate::geometry::BBox;

/// Maximum detections kept per image unless overridden.
pub const DEFAULT_DETECTIONS_PER_IMAGE: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub image_id: ImageId,
    pub bbox: BBox,
    pub score: f64,
}

impl Detection {
    pub fn new(image_id: u64, bbox: BBox, score: f64) -> Self {
        Self {
            image_id: ImageId(image_id),
            bbox,
            score,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DetectionJson {
    image_id: u64,
    bbox: [f64; 4],
    score: f64,
}

/// Detections grouped by image, sorted by image id and then by descending
/// score, with at most `cap_per_image` per image.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSet {
    detections: Vec<Detection>,
    cap_per_image: usize,
}

impl Default for DetectionSet {
    fn default() -> Self {
        Self {
            detections: Vec::new(),
            cap_per_image: DEFAULT_DETECTIONS_PER_IMAGE,
        }
    }
}

impl DetectionSet {
    /// Validate and normalize. Within an image, equal scores keep input order.
    pub fn new(detections: Vec<Detection>, cap_per_image: usize) -> Result<Self> {
        if cap_per_image == 0 {
            return Err(Error::InvalidParameter("detection cap must be positive".into()));
        }
        let mut by_image: BTreeMap<ImageId, Vec<Detection>> = BTreeMap::new();
        for d in detections {
            if !(0.0..=1.0).contains(&d.score) {
                return Err(Error::ScoreRange {
                    image: d.image_id.0,
                    score: d.score,
                });
            }
            if !(d.bbox.w > 0.0 && d.bbox.h > 0.0) {
                return Err(Error::Schema(format!(
                    "detection on image {} has non-positive size {}x{}",
                    d.image_id, d.bbox.w, d.bbox.h
                )));
            }
            by_image.entry(d.image_id).or_default().push(d);
        }
        let mut out = Vec::new();
        for (_, mut dets) in by_image {
            dets.sort_by(|a, b| b.score.total_cmp(&a.score));
            dets.truncate(cap_per_image);
            out.extend(dets);
        }
        Ok(Self {
            detections: out,
            cap_per_image,
        })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn detections(&self) -> &[Detection] {
        &self.detections
    }

    pub fn cap_per_image(&self) -> usize {
        self.cap_per_image
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    pub fn by_image(&self) -> BTreeMap<ImageId, Vec<&Detection>> {
        let mut map: BTreeMap<ImageId, Vec<&Detection>> = BTreeMap::new();
        for d in &self.detections {
            map.entry(d.image_id).or_default().push(d);
        }
        map
    }
}

pub fn load_detections(path: &Path) -> Result<DetectionSet> {
    load_detections_with_cap(path, DEFAULT_DETECTIONS_PER_IMAGE)
}

pub fn load_detections_with_cap(path: &Path, cap_per_image: usize) -> Result<DetectionSet> {
    let text = fsutil::read_to_string(path)?;
    let raw: Vec<DetectionJson> = serde_json::from_str(&text).map_err(|e| fsutil::json_error(path, e))?;
    let dets = raw
        .into_iter()
        .map(|d| Detection {
            image_id: ImageId(d.image_id),
            bbox: BBox::from_array(d.bbox),
            score: d.score,
        })
        .collect();
    DetectionSet::new(dets, cap_per_image)
}

pub fn detections_to_json_bytes(set: &DetectionSet) -> Vec<u8> {
    let raw: Vec<DetectionJson> = set
        .detections()
        .iter()
        .map(|d| DetectionJson {
            image_id: d.image_id.0,
            bbox: d.bbox.to_array(),
            score: d.score,
        })
        .collect();
    let mut bytes = serde_json::to_vec_pretty(&raw).expect("detections serialize");
    bytes.push(b'\n');
    bytes
}

pub fn save_detections(set: &DetectionSet, path: &Path) -> Result<()> {
    fsutil::write_atomic(path, &detections_to_json_bytes(set))
}
