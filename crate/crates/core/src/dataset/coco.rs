//! COCO-style annotation JSON with per-annotation `ignore` / `uncertain`
//! attributes.
//!
//! ```json
//! {
//!   "info": {"description": "<name>", "schema": "scalematch.annotations/1"},
//!   "images": [{"id": 1, "file_name": "a.jpg", "width": 1920, "height": 1080}],
//!   "annotations": [{"id": 1, "image_id": 1, "category_id": 1,
//!                    "bbox": [x, y, w, h], "area": 40.0, "iscrowd": 0,
//!                    "ignore": false, "uncertain": false}],
//!   "categories": [{"id": 1, "name": "person"}, {"id": 2, "name": "ignore"}]
//! }
//! ```
//!
//! On input, a box is an ignore region when its `ignore` attribute is true or
//! its category name contains "ignore"; every other category is a person.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};

use super::{AnnotationId, BoxRecord, Category, DatasetAnnotations, ImageId, ImageRecord};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::geometry::BBox;

pub const ANNOTATIONS_SCHEMA: &str = "scalematch.annotations/1";

const PERSON_CATEGORY: u64 = 1;
const IGNORE_CATEGORY: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AnnotationFormat {
    #[default]
    CocoJson,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct CocoInfo {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    schema: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CocoImage {
    id: u64,
    #[serde(default)]
    file_name: String,
    #[serde(serialize_with = "dimension")]
    width: f64,
    #[serde(serialize_with = "dimension")]
    height: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_video: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CocoAnnotation {
    id: u64,
    image_id: u64,
    #[serde(default = "default_category")]
    category_id: u64,
    bbox: [f64; 4],
    #[serde(default, skip_deserializing)]
    area: f64,
    #[serde(default, skip_deserializing)]
    iscrowd: u8,
    #[serde(default)]
    ignore: bool,
    #[serde(default)]
    uncertain: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct CocoCategory {
    id: u64,
    name: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct CocoFile {
    #[serde(default)]
    info: Option<CocoInfo>,
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
    #[serde(default)]
    categories: Vec<CocoCategory>,
}

fn default_category() -> u64 {
    PERSON_CATEGORY
}

/// Integral dimensions are written as JSON integers, fractional ones as reals.
fn dimension<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.fract() == 0.0 && *v >= 0.0 && *v < 9.0e15 {
        s.serialize_u64(*v as u64)
    } else {
        s.serialize_f64(*v)
    }
}

pub fn load_annotations(path: &Path, format: AnnotationFormat) -> Result<DatasetAnnotations> {
    match format {
        AnnotationFormat::CocoJson => load_coco(path),
    }
}

fn load_coco(path: &Path) -> Result<DatasetAnnotations> {
    let text = fsutil::read_to_string(path)?;
    let file: CocoFile = serde_json::from_str(&text).map_err(|e| fsutil::json_error(path, e))?;

    let ignore_categories: Vec<u64> = file
        .categories
        .iter()
        .filter(|c| c.name.to_ascii_lowercase().contains("ignore"))
        .map(|c| c.id)
        .collect();

    let name = file
        .info
        .and_then(|i| i.description)
        .or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_default();

    let images: Vec<ImageRecord> = file
        .images
        .into_iter()
        .map(|img| ImageRecord {
            id: ImageId(img.id),
            width: img.width,
            height: img.height,
            file_name: img.file_name,
            source_video: img.source_video,
        })
        .collect();
    let dims: HashMap<u64, (f64, f64)> = images.iter().map(|i| (i.id.0, (i.width, i.height))).collect();

    let mut boxes = Vec::with_capacity(file.annotations.len());
    for ann in file.annotations {
        let [x, y, w, h] = ann.bbox;
        if !(w > 0.0 && h > 0.0) {
            return Err(Error::Schema(format!(
                "annotation {}: bbox [{x}, {y}, {w}, {h}] has non-positive width or height",
                ann.id
            )));
        }
        let &(width, height) = dims.get(&ann.image_id).ok_or(Error::DanglingReference {
            annotation: ann.id,
            image: ann.image_id,
        })?;
        let raw = BBox::new(x, y, w, h);
        let bbox = if raw.is_within(width, height) {
            raw
        } else {
            let clipped = raw.clip(width, height).ok_or_else(|| {
                Error::Schema(format!(
                    "annotation {}: bbox [{x}, {y}, {w}, {h}] lies outside its {width}x{height} image",
                    ann.id
                ))
            })?;
            log::warn!(
                "annotation {}: bbox [{x}, {y}, {w}, {h}] clipped to image {}x{}",
                ann.id,
                width,
                height
            );
            clipped
        };
        let category = if ann.ignore || ignore_categories.contains(&ann.category_id) {
            Category::IgnoreRegion
        } else {
            Category::Person
        };
        boxes.push(BoxRecord {
            id: AnnotationId(ann.id),
            image_id: ImageId(ann.image_id),
            bbox,
            category,
            uncertain: ann.uncertain,
        });
    }

    DatasetAnnotations::new(name, images, boxes)
}

/// Serialize to COCO-style JSON. Output is deterministic.
pub fn to_json_bytes(ds: &DatasetAnnotations) -> Vec<u8> {
    let file = CocoFile {
        info: Some(CocoInfo {
            description: Some(ds.name.clone()),
            schema: Some(ANNOTATIONS_SCHEMA.to_string()),
        }),
        images: ds
            .images()
            .iter()
            .map(|img| CocoImage {
                id: img.id.0,
                file_name: img.file_name.clone(),
                width: img.width,
                height: img.height,
                source_video: img.source_video.clone(),
            })
            .collect(),
        annotations: ds
            .boxes()
            .iter()
            .map(|b| {
                let ignore = b.category == Category::IgnoreRegion;
                CocoAnnotation {
                    id: b.id.0,
                    image_id: b.image_id.0,
                    category_id: if ignore { IGNORE_CATEGORY } else { PERSON_CATEGORY },
                    bbox: b.bbox.to_array(),
                    area: b.bbox.area(),
                    iscrowd: 0,
                    ignore,
                    uncertain: b.uncertain,
                }
            })
            .collect(),
        categories: vec![
            CocoCategory {
                id: PERSON_CATEGORY,
                name: "person".into(),
            },
            CocoCategory {
                id: IGNORE_CATEGORY,
                name: "ignore".into(),
            },
        ],
    };
    let mut bytes = serde_json::to_vec_pretty(&file).expect("annotation file serializes");
    bytes.push(b'\n');
    bytes
}

pub fn save_annotations(ds: &DatasetAnnotations, path: &Path) -> Result<()> {
    fsutil::write_atomic(path, &to_json_bytes(ds))
}
