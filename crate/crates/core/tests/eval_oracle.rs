mod common;

use common::{dataset_from, max_matching, random_image, rng};
use rand::Rng;
use scalematch_core::eval::{
    average_precision, evaluate, match_image, miss_rate, DetLabel, EvalConfig, MatchParams, Scored, SizeRange,
};
use scalematch_core::{BBox, BoxRecord, DatasetAnnotations, Detection, DetectionSet, ImageRecord};

fn all_sizes() -> SizeRange {
    SizeRange::new("all", 1.0, f64::INFINITY)
}

/// TP counts at every distinct score cutoff versus exhaustive max matching.
#[test]
fn greedy_tp_counts_match_exhaustive_oracle() {
    let mut r = rng(11);
    let range = all_sizes();
    let mut instances = 0;
    for i in 0..1200u64 {
        let (gts, dets) = random_image(&mut r, 1, 1, 8, 8);
        instances += 1;
        for thr in [0.25, 0.5, 0.75] {
            let m = match_image(&dets, &gts, &MatchParams::new(thr, &range));
            let mut cutoffs: Vec<f64> = dets.iter().map(|d| d.score).collect();
            cutoffs.sort_by(|a, b| b.total_cmp(a));
            cutoffs.dedup();
            for c in cutoffs {
                let got = dets
                    .iter()
                    .zip(&m.detections)
                    .filter(|(d, l)| d.score >= c && **l == DetLabel::TruePositive)
                    .count();
                let kept: Vec<BBox> = dets.iter().filter(|d| d.score >= c).map(|d| d.bbox).collect();
                let gt_boxes: Vec<BBox> = gts.iter().map(|g| g.bbox).collect();
                assert_eq!(
                    got,
                    max_matching(&kept, &gt_boxes, thr),
                    "instance {i} thr {thr} cutoff {c}"
                );
            }
        }
    }
    assert!(instances >= 1000);
}

/// AP written out from scratch: precision at each cutoff, right-to-left max,
/// recall-weighted sum.
fn oracle_ap(scored: &[(f64, bool)], num_gt: usize) -> f64 {
    let mut cutoffs: Vec<f64> = scored.iter().map(|s| s.0).collect();
    cutoffs.sort_by(|a, b| b.total_cmp(a));
    cutoffs.dedup();
    let pr: Vec<(f64, f64)> = cutoffs
        .iter()
        .map(|&c| {
            let tp = scored.iter().filter(|s| s.0 >= c && s.1).count() as f64;
            let n = scored.iter().filter(|s| s.0 >= c).count() as f64;
            (tp / num_gt as f64, tp / n)
        })
        .collect();
    let mut ap = 0.0;
    let mut prev = 0.0;
    for (i, &(rec, _)) in pr.iter().enumerate() {
        let best = pr[i..].iter().map(|p| p.1).fold(0.0, f64::max);
        ap += (rec - prev) * best;
        prev = rec;
    }
    ap
}

#[test]
fn average_precision_matches_written_out_oracle() {
    let mut r = rng(5);
    for _ in 0..500 {
        let n = r.random_range(1..30);
        let num_gt = r.random_range(1..20);
        let mut tp_left = num_gt;
        let scored: Vec<(f64, bool)> = (0..n)
            .map(|_| {
                let tp = tp_left > 0 && r.random_bool(0.5);
                if tp {
                    tp_left -= 1;
                }
                (r.random_range(1..=10) as f64 / 10.0, tp)
            })
            .collect();
        let labeled: Vec<Scored> = scored
            .iter()
            .map(|&(score, tp)| Scored {
                score,
                label: if tp {
                    DetLabel::TruePositive
                } else {
                    DetLabel::FalsePositive
                },
            })
            .collect();
        let got = average_precision(&labeled, num_gt).unwrap();
        assert!((got - oracle_ap(&scored, num_gt)).abs() < 1e-12);
    }
}

fn scored(v: &[(f64, DetLabel)]) -> Vec<Scored> {
    v.iter().map(|&(score, label)| Scored { score, label }).collect()
}

#[test]
fn endpoint_identities() {
    let fppi = scalematch_core::eval::default_fppi_points();
    let perfect = scored(&[(0.9, DetLabel::TruePositive), (0.8, DetLabel::TruePositive)]);
    assert_eq!(average_precision(&perfect, 2), Some(1.0));
    assert_eq!(miss_rate(&perfect, 2, 3, &fppi), Some(0.0));
    assert_eq!(average_precision(&[], 2), Some(0.0));
    assert_eq!(miss_rate(&[], 2, 3, &fppi), Some(1.0));
}

#[test]
fn demoting_a_true_positive_never_raises_ap() {
    let mut r = rng(9);
    let fppi = scalematch_core::eval::default_fppi_points();
    for _ in 0..300 {
        let n = r.random_range(2..25);
        let mut labeled: Vec<Scored> = (0..n)
            .map(|_| Scored {
                score: r.random_range(0.0..1.0),
                label: if r.random_bool(0.5) {
                    DetLabel::TruePositive
                } else {
                    DetLabel::FalsePositive
                },
            })
            .collect();
        let num_gt = labeled.iter().filter(|s| s.label == DetLabel::TruePositive).count() + 2;
        let ap0 = average_precision(&labeled, num_gt).unwrap();
        let mr0 = miss_rate(&labeled, num_gt, 4, &fppi).unwrap();
        if let Some(s) = labeled.iter_mut().find(|s| s.label == DetLabel::TruePositive) {
            s.label = DetLabel::FalsePositive;
            assert!(average_precision(&labeled, num_gt).unwrap() <= ap0 + 1e-12);
            assert!(miss_rate(&labeled, num_gt, 4, &fppi).unwrap() >= mr0 - 1e-12);
        }
    }
}

fn report_for(images: &[(Vec<BoxRecord>, Vec<Detection>)], cfg: &EvalConfig) -> scalematch_core::eval::EvalReport {
    let ds = dataset_from(images);
    let dets = DetectionSet::new(images.iter().flat_map(|(_, d)| d.iter().copied()).collect(), 200).unwrap();
    evaluate(&dets, &ds, cfg).unwrap()
}

fn random_dataset(seed: u64, n: usize) -> Vec<(Vec<BoxRecord>, Vec<Detection>)> {
    let mut r = rng(seed);
    let mut next_box = 1;
    (0..n as u64)
        .map(|i| {
            let out = random_image(&mut r, i + 1, next_box, 8, 8);
            next_box += out.0.len() as u64;
            out
        })
        .collect()
}

#[test]
fn uncertain_as_ignore_equals_relabeling() {
    let mut images = random_dataset(3, 40);
    let mut r = rng(4);
    for (gts, _) in images.iter_mut() {
        for g in gts.iter_mut() {
            g.uncertain = r.random_bool(0.3);
        }
    }
    let relabeled: Vec<_> = images
        .iter()
        .map(|(gts, d)| {
            let g = gts
                .iter()
                .map(|b| {
                    if b.uncertain {
                        BoxRecord::ignore_region(b.id.0, b.image_id.0, b.bbox)
                    } else {
                        b.clone()
                    }
                })
                .collect();
            (g, d.clone())
        })
        .collect();
    let cfg = EvalConfig::default();
    assert_eq!(report_for(&images, &cfg).cells, report_for(&relabeled, &cfg).cells);
}

#[test]
fn out_of_range_gt_is_not_consumed() {
    let img = ImageRecord::new(1, 100.0, 100.0, "a.png");
    let big = BoxRecord::person(1, 1, BBox::new(0.0, 0.0, 40.0, 40.0));
    let ds = DatasetAnnotations::new("t", vec![img], vec![big]).unwrap();
    let dets = DetectionSet::new(vec![Detection::new(1, BBox::new(0.0, 0.0, 40.0, 40.0), 0.9)], 200).unwrap();
    let report = evaluate(&dets, &ds, &EvalConfig::default()).unwrap();
    let tiny = report.cell("tiny", 0.5).unwrap();
    assert_eq!((tiny.num_gt, tiny.false_positives, tiny.ignored_detections), (0, 0, 1));
    let all = report.cell("all", 0.5).unwrap();
    assert_eq!((all.true_positives, all.ap), (1, Some(1.0)));
}
