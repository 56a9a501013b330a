//! Size-distribution matching for object detection datasets.
//!
//! The crate rescales the images of a source dataset so that the absolute
//! size of its objects follows the size distribution of a target dataset,
//! either by sampling target sizes from a rectified histogram
//! ([`scale::build_scale_plan`]) or through a deterministic monotone mapping
//! between the two cumulative distributions ([`scale::build_monotone_map`]).
//! It also implements the tiny-object evaluation protocol (size partitions,
//! IOU matching for persons, IOD matching for ignore regions, AP and
//! log-average miss rate) and the image tiling / NMS merge pair used around
//! a detector.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod fsutil;
pub mod geometry;
pub mod scale;
pub mod sizes;
pub mod synth;
pub mod tiling;

pub use dataset::{
    AnnotationId, BoxRecord, Category, DatasetAnnotations, Detection, DetectionSet, ImageId, ImageRecord,
};
pub use error::{Error, Result};
pub use geometry::BBox;
pub use sizes::{EmpiricalCdf, SizeHistogram};
