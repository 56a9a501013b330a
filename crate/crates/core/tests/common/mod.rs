//! Test-only oracles and random instance builders. Nothing here calls into
//! the matching, histogram or CDF code paths it is used to check.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scalematch_core::{BBox, BoxRecord, DatasetAnnotations, Detection, ImageRecord};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Plain IoU written out independently of `BBox::iou`.
pub fn oracle_iou(a: &BBox, b: &BBox) -> f64 {
    let ix = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let iy = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    inter / (a.w * a.h + b.w * b.h - inter)
}

/// Largest number of disjoint (detection, GT) pairs with IoU >= threshold,
/// by exhaustive enumeration of assignments.
pub fn max_matching(dets: &[BBox], gts: &[BBox], threshold: f64) -> usize {
    fn go(d: usize, dets: &[BBox], gts: &[BBox], used: &mut Vec<bool>, thr: f64) -> usize {
        if d == dets.len() {
            return 0;
        }
        // leave detection d unmatched
        let mut best = go(d + 1, dets, gts, used, thr);
        for g in 0..gts.len() {
            if !used[g] && oracle_iou(&dets[d], &gts[g]) >= thr {
                used[g] = true;
                best = best.max(1 + go(d + 1, dets, gts, used, thr));
                used[g] = false;
            }
        }
        best
    }
    let mut used = vec![false; gts.len()];
    go(0, dets, gts, &mut used, threshold)
}

/// A random image with up to `max_gt` persons and `max_det` detections,
/// most of them jittered copies of persons.
pub fn random_image(
    r: &mut ChaCha8Rng,
    image_id: u64,
    first_box_id: u64,
    max_gt: usize,
    max_det: usize,
) -> (Vec<BoxRecord>, Vec<Detection>) {
    let (w, h) = (96.0, 96.0);
    let n_gt = r.random_range(0..=max_gt);
    let mut gts = Vec::new();
    for k in 0..n_gt {
        let bw = r.random_range(3.0..24.0);
        let bh = r.random_range(3.0..24.0);
        let x = r.random_range(0.0..(w - bw));
        let y = r.random_range(0.0..(h - bh));
        gts.push(BoxRecord::person(
            first_box_id + k as u64,
            image_id,
            BBox::new(x, y, bw, bh),
        ));
    }
    let n_det = r.random_range(0..=max_det);
    let mut dets = Vec::new();
    for _ in 0..n_det {
        let score = (r.random_range(1..=20) as f64) / 20.0;
        let bbox = if !gts.is_empty() && r.random_bool(0.7) {
            let g = gts[r.random_range(0..gts.len())].bbox;
            let j = |r: &mut ChaCha8Rng, s: f64| r.random_range(-0.3..0.3) * s;
            let nw = (g.w + j(r, g.w)).max(1.0);
            let nh = (g.h + j(r, g.h)).max(1.0);
            BBox::new(g.x + j(r, g.w), g.y + j(r, g.h), nw, nh)
        } else {
            let bw = r.random_range(3.0..24.0);
            let bh = r.random_range(3.0..24.0);
            BBox::new(r.random_range(0.0..(w - bw)), r.random_range(0.0..(h - bh)), bw, bh)
        };
        dets.push(Detection::new(image_id, bbox, score));
    }
    (gts, dets)
}

pub fn dataset_from(images: &[(Vec<BoxRecord>, Vec<Detection>)]) -> DatasetAnnotations {
    let imgs = (0..images.len())
        .map(|i| ImageRecord::new(i as u64 + 1, 96.0, 96.0, format!("{i}.png")))
        .collect();
    let boxes = images.iter().flat_map(|(g, _)| g.iter().cloned()).collect();
    DatasetAnnotations::new("random", imgs, boxes).unwrap()
}

/// Add up to `max` ignore regions to an image's annotations.
pub fn add_ignore_regions(r: &mut ChaCha8Rng, gts: &mut Vec<BoxRecord>, image_id: u64, next_id: u64, max: usize) {
    for k in 0..r.random_range(1..=max) {
        let bw = r.random_range(10.0..40.0);
        let bh = r.random_range(10.0..40.0);
        let bbox = BBox::new(
            r.random_range(0.0..(96.0 - bw)),
            r.random_range(0.0..(96.0 - bh)),
            bw,
            bh,
        );
        gts.push(BoxRecord::ignore_region(next_id + k as u64, image_id, bbox));
    }
}
