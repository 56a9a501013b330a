//! In-memory model of annotated datasets and detection results.
//!
//! A [`DatasetAnnotations`] is always kept in canonical order (images and
//! boxes sorted by id) so that serialization is deterministic and a
//! save/load round trip is the identity.

mod coco;
mod detections;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;

pub use coco::{load_annotations, save_annotations, to_json_bytes, AnnotationFormat, ANNOTATIONS_SCHEMA};
pub use detections::{
    load_detections, load_detections_with_cap, save_detections, Detection, DetectionSet, DEFAULT_DETECTIONS_PER_IMAGE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImageId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnnotationId(pub u64);

impl fmt::Display for ImageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Display for AnnotationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Object class. Sea and earth persons are merged into one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Person,
    IgnoreRegion,
}

/// One annotated object.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxRecord {
    pub id: AnnotationId,
    pub image_id: ImageId,
    pub bbox: BBox,
    pub category: Category,
    pub uncertain: bool,
}

impl BoxRecord {
    pub fn person(id: u64, image_id: u64, bbox: BBox) -> Self {
        Self {
            id: AnnotationId(id),
            image_id: ImageId(image_id),
            bbox,
            category: Category::Person,
            uncertain: false,
        }
    }

    pub fn ignore_region(id: u64, image_id: u64, bbox: BBox) -> Self {
        Self {
            category: Category::IgnoreRegion,
            ..Self::person(id, image_id, bbox)
        }
    }

    pub fn is_person(&self) -> bool {
        self.category == Category::Person
    }

    /// A confident person annotation: the objects that size statistics and
    /// scale matching operate on.
    pub fn is_sizable(&self) -> bool {
        self.is_person() && !self.uncertain
    }

    /// Whether the box acts as an ignore region, given the uncertain policy.
    pub fn acts_as_ignore(&self, uncertain_as_ignore: bool) -> bool {
        self.category == Category::IgnoreRegion || (uncertain_as_ignore && self.uncertain)
    }
}

/// One image. Dimensions are real-valued so that annotation-only rescaling
/// can keep relative sizes exact; files loaded from disk carry integers.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: ImageId,
    pub width: f64,
    pub height: f64,
    pub file_name: String,
    pub source_video: Option<String>,
}

impl ImageRecord {
    pub fn new(id: u64, width: f64, height: f64, file_name: impl Into<String>) -> Self {
        Self {
            id: ImageId(id),
            width,
            height,
            file_name: file_name.into(),
            source_video: None,
        }
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetAnnotations {
    pub name: String,
    images: Vec<ImageRecord>,
    boxes: Vec<BoxRecord>,
}

impl DatasetAnnotations {
    /// Validate and canonicalize. Boxes must already lie inside their image.
    pub fn new(name: impl Into<String>, mut images: Vec<ImageRecord>, mut boxes: Vec<BoxRecord>) -> Result<Self> {
        images.sort_by_key(|img| img.id);
        boxes.sort_by_key(|b| b.id);

        for pair in images.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::Schema(format!("duplicate image id {}", pair[0].id)));
            }
        }
        for img in &images {
            if !(img.width >= 1.0 && img.height >= 1.0) || !img.width.is_finite() || !img.height.is_finite() {
                return Err(Error::Schema(format!(
                    "image {}: dimensions {}x{} must be at least 1",
                    img.id, img.width, img.height
                )));
            }
        }
        for pair in boxes.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::Schema(format!("duplicate annotation id {}", pair[0].id)));
            }
        }
        let known: HashSet<ImageId> = images.iter().map(|i| i.id).collect();
        for b in &boxes {
            if !known.contains(&b.image_id) {
                return Err(Error::DanglingReference {
                    annotation: b.id.0,
                    image: b.image_id.0,
                });
            }
            let bb = &b.bbox;
            if !(bb.w > 0.0 && bb.h > 0.0) || !bb.x.is_finite() || !bb.y.is_finite() {
                return Err(Error::Schema(format!(
                    "annotation {}: bbox [{}, {}, {}, {}] needs positive width and height",
                    b.id, bb.x, bb.y, bb.w, bb.h
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            images,
            boxes,
        })
    }

    pub fn empty(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn images(&self) -> &[ImageRecord] {
        &self.images
    }

    pub fn boxes(&self) -> &[BoxRecord] {
        &self.boxes
    }

    pub fn into_parts(self) -> (String, Vec<ImageRecord>, Vec<BoxRecord>) {
        (self.name, self.images, self.boxes)
    }

    pub fn image(&self, id: ImageId) -> Option<&ImageRecord> {
        self.images
            .binary_search_by_key(&id, |img| img.id)
            .ok()
            .map(|i| &self.images[i])
    }

    /// Boxes grouped by image; every image appears, possibly with no boxes.
    pub fn boxes_by_image(&self) -> BTreeMap<ImageId, Vec<&BoxRecord>> {
        let mut map: BTreeMap<ImageId, Vec<&BoxRecord>> = self.images.iter().map(|img| (img.id, Vec::new())).collect();
        for b in &self.boxes {
            map.entry(b.image_id).or_default().push(b);
        }
        map
    }

    /// Absolute sizes of the boxes that feed size statistics.
    pub fn sizes(&self, include_ignore: bool) -> Vec<f64> {
        self.boxes
            .iter()
            .filter(|b| include_ignore || b.is_sizable())
            .map(|b| b.bbox.absolute_size())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(id: u64) -> ImageRecord {
        ImageRecord::new(id, 100.0, 100.0, format!("{id}.jpg"))
    }

    #[test]
    fn canonical_order() {
        let ds = DatasetAnnotations::new(
            "t",
            vec![img(2), img(1)],
            vec![
                BoxRecord::person(5, 2, BBox::new(0.0, 0.0, 1.0, 1.0)),
                BoxRecord::person(3, 1, BBox::new(0.0, 0.0, 1.0, 1.0)),
            ],
        )
        .unwrap();
        assert_eq!(ds.images()[0].id, ImageId(1));
        assert_eq!(ds.boxes()[0].id, AnnotationId(3));
        assert_eq!(ds.image(ImageId(2)).unwrap().file_name, "2.jpg");
        assert!(ds.image(ImageId(9)).is_none());
    }

    #[test]
    fn rejects_dangling_and_duplicates() {
        let err = DatasetAnnotations::new(
            "t",
            vec![img(1)],
            vec![BoxRecord::person(1, 7, BBox::new(0.0, 0.0, 1.0, 1.0))],
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::DanglingReference {
                annotation: 1,
                image: 7
            }
        ));

        let err = DatasetAnnotations::new("t", vec![img(1), img(1)], vec![]).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));

        let b = BoxRecord::person(1, 1, BBox::new(0.0, 0.0, 1.0, 1.0));
        let err = DatasetAnnotations::new("t", vec![img(1)], vec![b.clone(), b]).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn sizes_skip_non_targets() {
        let mut unc = BoxRecord::person(2, 1, BBox::new(0.0, 0.0, 4.0, 4.0));
        unc.uncertain = true;
        let ds = DatasetAnnotations::new(
            "t",
            vec![img(1)],
            vec![
                BoxRecord::person(1, 1, BBox::new(0.0, 0.0, 9.0, 16.0)),
                unc,
                BoxRecord::ignore_region(3, 1, BBox::new(0.0, 0.0, 50.0, 50.0)),
            ],
        )
        .unwrap();
        assert_eq!(ds.sizes(false), vec![12.0]);
        assert_eq!(ds.sizes(true).len(), 3);
    }
}
