//! Anchor sizes and aspect ratios by 1-D k-means.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataset::DatasetAnnotations;
use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 100;
const TOLERANCE: f64 = 1e-6;
const RESTARTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnchorClusters {
    pub sizes: Vec<f64>,
    pub ratios: Vec<f64>,
}

/// Cluster absolute sizes and aspect ratios (w/h) of the confident person
/// boxes independently. Centers are returned ascending.
pub fn cluster_anchors(ds: &DatasetAnnotations, k_sizes: usize, k_ratios: usize, seed: u64) -> Result<AnchorClusters> {
    let (sizes, ratios): (Vec<f64>, Vec<f64>) = ds
        .boxes()
        .iter()
        .filter(|b| b.is_sizable())
        .map(|b| (b.bbox.absolute_size(), b.bbox.aspect_ratio()))
        .unzip();
    Ok(AnchorClusters {
        sizes: kmeans_1d(&sizes, k_sizes, seed)?,
        ratios: kmeans_1d(&ratios, k_ratios, seed)?,
    })
}

/// Lloyd's k-means in one dimension with k-means++ seeding. Runs a few
/// seeded restarts and keeps the lowest within-cluster sum of squares.
/// The input is sorted first, so the result does not depend on its order.
pub fn kmeans_1d(values: &[f64], k: usize, seed: u64) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if values.len() < k {
        return Err(Error::InsufficientData(format!(
            "{} values cannot form {k} clusters",
            values.len()
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..RESTARTS {
        let init = plus_plus_init(&sorted, k, &mut rng);
        let centers = lloyd(&sorted, init);
        let cost = inertia(&sorted, &centers);
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, centers));
        }
    }
    let mut centers = best.expect("at least one restart").1;
    centers.sort_by(f64::total_cmp);
    Ok(centers)
}

fn plus_plus_init<R: Rng>(values: &[f64], k: usize, rng: &mut R) -> Vec<f64> {
    let mut centers = vec![values[rng.random_range(0..values.len())]];
    let mut d2: Vec<f64> = values.iter().map(|v| (v - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = values.len() - 1;
            for (i, w) in d2.iter().enumerate() {
                if target < *w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            values[idx]
        } else {
            // every value already coincides with a center
            values[rng.random_range(0..values.len())]
        };
        centers.push(next);
        for (d, v) in d2.iter_mut().zip(values) {
            *d = d.min((v - next).powi(2));
        }
    }
    centers
}

fn nearest(centers: &[f64], v: f64) -> usize {
    let mut best = 0;
    for (i, c) in centers.iter().enumerate().skip(1) {
        if (v - c).abs() < (v - centers[best]).abs() {
            best = i;
        }
    }
    best
}

fn lloyd(values: &[f64], mut centers: Vec<f64>) -> Vec<f64> {
    let k = centers.len();
    for _ in 0..MAX_ITERATIONS {
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for &v in values {
            let c = nearest(&centers, v);
            sums[c] += v;
            counts[c] += 1;
        }
        let mut shift: f64 = 0.0;
        for i in 0..k {
            if counts[i] > 0 {
                let updated = sums[i] / counts[i] as f64;
                shift = shift.max((updated - centers[i]).abs());
                centers[i] = updated;
            }
        }
        if shift < TOLERANCE {
            break;
        }
    }
    centers
}

fn inertia(values: &[f64], centers: &[f64]) -> f64 {
    values.iter().map(|&v| (v - centers[nearest(centers, v)]).powi(2)).sum()
}
