//! Seeded fixtures shared by the benchmarks.

use scalematch_core::synth::{generate, SizeLaw, SynthSpec};
use scalematch_core::{DatasetAnnotations, Detection, DetectionSet};

/// Lognormal-sized synthetic dataset. Frames are large enough for the tail.
pub fn dataset(n_images: usize, median: f64, sigma: f64, seed: u64) -> DatasetAnnotations {
    generate(&SynthSpec {
        n_images,
        boxes_per_image: (1, 10),
        size_law: SizeLaw::Lognormal { mu: median.ln(), sigma },
        image_width: 4000,
        image_height: 4000,
        seed,
        ..SynthSpec::default()
    })
    .expect("fixture spec is valid")
}

/// Ground truth shifted by a few pixels, with descending scores.
pub fn detections_for(ds: &DatasetAnnotations) -> DetectionSet {
    let dets = ds
        .boxes()
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let shift = (i % 5) as f64;
            let bbox = b.bbox.translate(shift, -shift);
            Detection::new(b.image_id.0, bbox, 1.0 - (i % 97) as f64 / 100.0)
        })
        .collect();
    DetectionSet::new(dets, 200).expect("scores lie in [0, 1]")
}
