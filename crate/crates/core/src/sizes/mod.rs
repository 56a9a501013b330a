//! Object-size definitions and size-distribution estimates.

mod anchors;
mod cdf;
mod histogram;

use serde::Serialize;

use crate::dataset::{BoxRecord, DatasetAnnotations, ImageRecord};

pub use anchors::{cluster_anchors, kmeans_1d, AnchorClusters};
pub use cdf::{empirical_cdf, histogram_cdf, EmpiricalCdf};
pub use histogram::{
    rectified_histogram, rectified_histogram_of, sparse_rate, uniform_histogram, HistBin, SizeHistogram, DEFAULT_BINS,
    DEFAULT_SPARSE_ALPHA,
};

/// Square root of the box area, in pixels.
pub fn absolute_size(b: &BoxRecord) -> f64 {
    b.bbox.absolute_size()
}

/// Square root of the box area over the image area.
pub fn relative_size(b: &BoxRecord, img: &ImageRecord) -> f64 {
    (b.bbox.area() / img.area()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population mean and standard deviation. `None` for empty input.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt() })
    }
}

/// Absolute size, relative size and aspect ratio (w/h) statistics over the
/// confident person boxes of a dataset.
#[derive(Debug, Clone, Serialize)]
pub struct SizeSummary {
    pub dataset: String,
    pub images: usize,
    pub objects: usize,
    pub absolute_size: Option<MeanStd>,
    pub relative_size: Option<MeanStd>,
    pub aspect_ratio: Option<MeanStd>,
}

pub fn summarize(ds: &DatasetAnnotations, include_ignore: bool) -> SizeSummary {
    let mut abs = Vec::new();
    let mut rel = Vec::new();
    let mut aspect = Vec::new();
    for b in ds.boxes() {
        if !(include_ignore || b.is_sizable()) {
            continue;
        }
        let img = ds
            .image(b.image_id)
            .expect("dataset invariant: boxes reference known images");
        abs.push(absolute_size(b));
        rel.push(relative_size(b, img));
        aspect.push(b.bbox.aspect_ratio());
    }
    SizeSummary {
        dataset: ds.name.clone(),
        images: ds.images().len(),
        objects: abs.len(),
        absolute_size: MeanStd::of(&abs),
        relative_size: MeanStd::of(&rel),
        aspect_ratio: MeanStd::of(&aspect),
    }
}

/// 1-Wasserstein distance between the empirical distributions of two samples,
/// computed as the integral of the absolute difference of their step CDFs.
pub fn wasserstein_1(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "wasserstein_1 needs non-empty samples");
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = a[0].min(b[0]);
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        let fa = i as f64 / na;
        let fb = j as f64 / nb;
        total += (fa - fb).abs() * (next - prev);
        while i < a.len() && a[i] <= next {
            i += 1;
        }
        while j < b.len() && b[j] <= next {
            j += 1;
        }
        prev = next;
    }
    total
}
