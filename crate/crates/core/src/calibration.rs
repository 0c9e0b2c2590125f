//! Calibration evaluation: ground-truth matching, reliability diagrams, and
//! the scalar summaries Pearson R, ECE, and MCE.

use thiserror::Error;

use crate::geometry::{InstanceMask, LabelMask};

#[derive(Debug, Error)]
pub enum CalibError {
    #[error("prediction frame {0}x{1} does not match ground truth {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("no scored predictions: all bins empty")]
    NoData,
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(&'static str),
    #[error("bin count must be at least 2, got {0}")]
    TooFewBins(usize),
}

/// One interval bin of a reliability diagram.
///
/// Bin `b` (1-based) covers `((b-1)/B, b/B]`, with the first bin also
/// including 0. `accuracy` is the true-positive fraction of the bin.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_confidence: f64,
    pub accuracy: f64,
}

/// Calibration summary for one certainty score.
#[derive(Debug, Clone)]
pub struct CalibrationReport {
    pub bins: Vec<ReliabilityBin>,
    /// `None` when fewer than two usable bins exist or either axis is
    /// constant across them.
    pub pearson_r: Option<f64>,
    pub ece: f64,
    pub mce: f64,
    pub matched: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// Result of matching prediction shapes against ground-truth instances.
#[derive(Debug, Clone)]
pub struct InstanceMatch {
    /// Per prediction, in input order.
    pub is_tp: Vec<bool>,
    pub matched: usize,
    pub false_negatives: usize,
}

/// Outcome of the scored matching operation.
#[derive(Debug, Clone)]
pub struct MatchOutcome {
    pub scored: Vec<(f64, bool)>,
    pub matched: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// Greedy one-to-one matching of predictions to ground-truth instances.
///
/// Candidate pairs with IoU >= `theta_match` are matched in descending IoU
/// order, ties broken by (prediction index, ground-truth label). Unmatched
/// ground-truth instances are counted as false negatives.
pub fn match_instances(
    predictions: &[InstanceMask],
    gt: &LabelMask,
    theta_match: f64,
) -> Result<InstanceMatch, CalibError> {
    for p in predictions {
        let (fw, fh) = p.frame();
        if fw != gt.width() || fh != gt.height() {
            return Err(CalibError::DimensionMismatch(fw, fh, gt.width(), gt.height()));
        }
    }
    let gt_instances = gt.split_instances();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (pi, pred) in predictions.iter().enumerate() {
        for (gi, (_, gmask)) in gt_instances.iter().enumerate() {
            let iou = pred.iou(gmask);
            if iou >= theta_match {
                pairs.push((iou, pi, gi));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut pred_taken = vec![false; predictions.len()];
    let mut gt_taken = vec![false; gt_instances.len()];
    let mut matched = 0usize;
    for (_, pi, gi) in pairs {
        if !pred_taken[pi] && !gt_taken[gi] {
            pred_taken[pi] = true;
            gt_taken[gi] = true;
            matched += 1;
        }
    }
    let false_negatives = gt_taken.iter().filter(|&&t| !t).count();
    Ok(InstanceMatch {
        is_tp: pred_taken,
        matched,
        false_negatives,
    })
}

/// Spec-shaped matching: pairs every prediction's score with its TP flag.
pub fn match_ground_truth(
    predictions: &[(InstanceMask, f64)],
    gt: &LabelMask,
    theta_match: f64,
) -> Result<MatchOutcome, CalibError> {
    let shapes: Vec<InstanceMask> = predictions.iter().map(|(m, _)| m.clone()).collect();
    let m = match_instances(&shapes, gt, theta_match)?;
    let scored: Vec<(f64, bool)> = predictions
        .iter()
        .zip(&m.is_tp)
        .map(|((_, s), &tp)| (*s, tp))
        .collect();
    Ok(MatchOutcome {
        matched: m.matched,
        false_positives: scored.iter().filter(|(_, tp)| !tp).count(),
        false_negatives: m.false_negatives,
        scored,
    })
}

/// Build the `B` equal-width reliability bins for a scored prediction list.
pub fn reliability_diagram(
    scored: &[(f64, bool)],
    bins: usize,
) -> Result<Vec<ReliabilityBin>, CalibError> {
    if bins < 2 {
        return Err(CalibError::TooFewBins(bins));
    }
    let bounds: Vec<(f64, f64)> = (0..bins)
        .map(|b| (b as f64 / bins as f64, (b + 1) as f64 / bins as f64))
        .collect();
    let mut count = vec![0usize; bins];
    let mut score_sum = vec![0.0f64; bins];
    let mut tp_count = vec![0usize; bins];
    for &(score, tp) in scored {
        // First bin whose upper bound covers the score; bin 1 includes 0.
        let idx = bounds
            .iter()
            .position(|&(_, hi)| score <= hi)
            .unwrap_or(bins - 1);
        count[idx] += 1;
        score_sum[idx] += score;
        if tp {
            tp_count[idx] += 1;
        }
    }
    Ok(bounds
        .into_iter()
        .enumerate()
        .map(|(i, (lo, hi))| ReliabilityBin {
            lo,
            hi,
            count: count[i],
            mean_confidence: if count[i] > 0 {
                score_sum[i] / count[i] as f64
            } else {
                0.0
            },
            accuracy: if count[i] > 0 {
                tp_count[i] as f64 / count[i] as f64
            } else {
                0.0
            },
        })
        .collect())
}

/// Expected calibration error: count-weighted mean absolute gap.
pub fn ece(bins: &[ReliabilityBin]) -> Result<f64, CalibError> {
    let total: usize = bins.iter().map(|b| b.count).sum();
    if total == 0 {
        return Err(CalibError::NoData);
    }
    Ok(bins
        .iter()
        .filter(|b| b.count > 0)
        .map(|b| b.count as f64 / total as f64 * (b.accuracy - b.mean_confidence).abs())
        .sum())
}

/// Maximum calibration error: worst absolute gap over non-empty bins.
pub fn mce(bins: &[ReliabilityBin]) -> Result<f64, CalibError> {
    let mut best: Option<f64> = None;
    for b in bins.iter().filter(|b| b.count > 0) {
        let gap = (b.accuracy - b.mean_confidence).abs();
        best = Some(best.map_or(gap, |m: f64| m.max(gap)));
    }
    best.ok_or(CalibError::NoData)
}

/// Pearson correlation between per-bin mean confidence and accuracy.
pub fn pearson_r(bins: &[ReliabilityBin]) -> Result<f64, CalibError> {
    let points: Vec<(f64, f64)> = bins
        .iter()
        .filter(|b| b.count > 0)
        .map(|b| (b.mean_confidence, b.accuracy))
        .collect();
    if points.len() < 2 {
        return Err(CalibError::UndefinedCorrelation("fewer than two usable bins"));
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for &(x, y) in &points {
        cov += (x - mean_x) * (y - mean_y);
        var_x += (x - mean_x) * (x - mean_x);
        var_y += (y - mean_y) * (y - mean_y);
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(CalibError::UndefinedCorrelation("zero variance on an axis"));
    }
    Ok(cov / (var_x.sqrt() * var_y.sqrt()))
}

/// Full calibration summary for one scored list.
pub fn calibration_report(
    scored: &[(f64, bool)],
    bins: usize,
    false_negatives: usize,
) -> Result<CalibrationReport, CalibError> {
    let bins = reliability_diagram(scored, bins)?;
    let ece_v = ece(&bins)?;
    let mce_v = mce(&bins)?;
    let pearson = pearson_r(&bins).ok();
    let matched = scored.iter().filter(|(_, tp)| *tp).count();
    Ok(CalibrationReport {
        pearson_r: pearson,
        ece: ece_v,
        mce: mce_v,
        matched,
        false_positives: scored.len() - matched,
        false_negatives,
        bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RadialPolygon;
    use rand::{Rng, SeedableRng};

    fn bin(count: usize, conf: f64, acc: f64) -> ReliabilityBin {
        ReliabilityBin {
            lo: 0.0,
            hi: 1.0,
            count,
            mean_confidence: conf,
            accuracy: acc,
        }
    }

    fn disk_mask(cx: f64, cy: f64, r: f64, frame: u32) -> InstanceMask {
        let poly = RadialPolygon::new(cx, cy, vec![r; 16]).unwrap();
        InstanceMask::from_polygon(&poly, frame, frame)
    }

    fn paint(gt: &mut LabelMask, mask: &InstanceMask, label: u16) {
        let (x0, y0, x1, y1) = mask.window();
        for y in y0..y1 {
            for x in x0..x1 {
                if mask.get(x, y) {
                    gt.set(x, y, label);
                }
            }
        }
    }

    #[test]
    fn identical_prediction_is_tp() {
        let mut gt = LabelMask::new(32, 32);
        let inst = disk_mask(16.0, 16.0, 6.0, 32);
        paint(&mut gt, &inst, 1);
        let out = match_ground_truth(&[(inst, 0.9)], &gt, 0.5).unwrap();
        assert_eq!(out.scored, vec![(0.9, true)]);
        assert_eq!(out.false_negatives, 0);
    }

    #[test]
    fn disjoint_prediction_is_fp() {
        let mut gt = LabelMask::new(32, 32);
        paint(&mut gt, &disk_mask(8.0, 8.0, 4.0, 32), 1);
        let pred = disk_mask(25.0, 25.0, 4.0, 32);
        let out = match_ground_truth(&[(pred, 0.8)], &gt, 0.5).unwrap();
        assert_eq!(out.scored, vec![(0.8, false)]);
        assert_eq!(out.false_negatives, 1);
    }

    #[test]
    fn two_predictions_one_gt_yields_one_tp_one_fp() {
        // Exhaustive check of the 2x1 case: the higher-IoU prediction wins.
        let mut gt = LabelMask::new(32, 32);
        let inst = disk_mask(16.0, 16.0, 6.0, 32);
        paint(&mut gt, &inst, 1);
        let near = disk_mask(16.0, 16.0, 6.0, 32); // IoU 1.0
        let close = disk_mask(17.0, 16.0, 6.0, 32); // IoU < 1 but >= 0.5
        let m = match_instances(&[close.clone(), near.clone()], &gt, 0.5).unwrap();
        assert_eq!(m.is_tp, vec![false, true]);
        assert_eq!(m.matched, 1);
        // All assignments enumerated: only one pairing is one-to-one optimal.
        assert!(near.iou(&inst) > close.iou(&inst));
    }

    #[test]
    fn dims_mismatch_errors() {
        let gt = LabelMask::new(16, 16);
        let pred = disk_mask(8.0, 8.0, 3.0, 32);
        assert!(match_instances(&[pred], &gt, 0.5).is_err());
    }

    #[test]
    fn perfect_corner_bin() {
        let scored = vec![(1.0, true); 7];
        let bins = reliability_diagram(&scored, 10).unwrap();
        assert_eq!(bins[9].count, 7);
        assert_eq!(bins[9].accuracy, 1.0);
        assert_eq!(bins[9].mean_confidence, 1.0);
        assert!(bins[..9].iter().all(|b| b.count == 0));
    }

    #[test]
    fn boundary_scores_land_in_low_bins() {
        let scored = vec![(0.05, true), (0.15, false)];
        let bins = reliability_diagram(&scored, 10).unwrap();
        assert_eq!(bins[0].count, 1);
        assert_eq!(bins[1].count, 1);
        assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), 2);
    }

    #[test]
    fn zero_score_lands_in_first_bin() {
        let bins = reliability_diagram(&[(0.0, false)], 10).unwrap();
        assert_eq!(bins[0].count, 1);
    }

    #[test]
    fn binning_matches_naive_reference() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(19);
        let scored: Vec<(f64, bool)> = (0..500)
            .map(|_| (rng.gen::<f64>(), rng.gen::<bool>()))
            .collect();
        let b = 10usize;
        let bins = reliability_diagram(&scored, b).unwrap();
        // Naive per-item loop with explicit interval checks.
        for (i, bin) in bins.iter().enumerate() {
            let lo = i as f64 / b as f64;
            let hi = (i + 1) as f64 / b as f64;
            let members: Vec<&(f64, bool)> = scored
                .iter()
                .filter(|(s, _)| (*s > lo && *s <= hi) || (i == 0 && *s <= lo))
                .collect();
            assert_eq!(bin.count, members.len(), "bin {i}");
            if !members.is_empty() {
                let conf = members.iter().map(|(s, _)| *s).sum::<f64>() / members.len() as f64;
                let acc = members.iter().filter(|(_, t)| *t).count() as f64 / members.len() as f64;
                assert!((bin.mean_confidence - conf).abs() < 1e-12);
                assert!((bin.accuracy - acc).abs() < 1e-12);
            }
        }
        assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), 500);
    }

    #[test]
    fn ece_worked_examples() {
        assert_eq!(ece(&[bin(3, 0.7, 0.7)]).unwrap(), 0.0);
        let two = [bin(2, 0.8, 0.5), bin(2, 0.6, 0.5)];
        let e = ece(&two).unwrap();
        assert!((e - 0.2).abs() < 1e-12, "ece = {e}");
        let single = [bin(5, 0.9, 0.4)];
        assert!((ece(&single).unwrap() - 0.5).abs() < 1e-12);
        assert!(ece(&[bin(0, 0.0, 0.0)]).is_err());
    }

    #[test]
    fn mce_worked_examples() {
        assert_eq!(mce(&[bin(3, 0.7, 0.7)]).unwrap(), 0.0);
        let two = [bin(2, 0.8, 0.5), bin(2, 0.6, 0.5)];
        assert!((mce(&two).unwrap() - 0.3).abs() < 1e-12);
        assert!(mce(&[bin(0, 0.0, 0.0)]).is_err());
    }

    #[test]
    fn mce_dominates_ece_on_random_bin_sets() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let bins: Vec<ReliabilityBin> = (0..10)
                .map(|_| bin(rng.gen_range(0..20), rng.gen::<f64>(), rng.gen::<f64>()))
                .collect();
            if bins.iter().all(|b| b.count == 0) {
                continue;
            }
            let e = ece(&bins).unwrap();
            let m = mce(&bins).unwrap();
            assert!(e <= m + 1e-12, "ece {e} > mce {m}");
        }
    }

    #[test]
    fn pearson_identity_and_sign() {
        let identity: Vec<ReliabilityBin> =
            (1..=5).map(|i| bin(2, i as f64 / 10.0, i as f64 / 10.0)).collect();
        assert!((pearson_r(&identity).unwrap() - 1.0).abs() < 1e-12);

        let decreasing: Vec<ReliabilityBin> =
            (1..=5).map(|i| bin(2, i as f64 / 10.0, 1.0 - i as f64 / 10.0)).collect();
        assert!(pearson_r(&decreasing).unwrap() < 0.0);

        assert!(pearson_r(&[bin(2, 0.5, 0.5)]).is_err());
        let constant = [bin(2, 0.5, 0.3), bin(2, 0.5, 0.9)];
        assert!(pearson_r(&constant).is_err());
    }

    #[test]
    fn pearson_matches_textbook_formula() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let bins: Vec<ReliabilityBin> = (0..8)
                .map(|_| bin(1 + rng.gen_range(0..5), rng.gen::<f64>(), rng.gen::<f64>()))
                .collect();
            let r = pearson_r(&bins).unwrap();
            // Independent route: r = (n*sxy - sx*sy) / sqrt((n*sxx - sx^2)(n*syy - sy^2))
            let n = bins.len() as f64;
            let sx: f64 = bins.iter().map(|b| b.mean_confidence).sum();
            let sy: f64 = bins.iter().map(|b| b.accuracy).sum();
            let sxy: f64 = bins.iter().map(|b| b.mean_confidence * b.accuracy).sum();
            let sxx: f64 = bins.iter().map(|b| b.mean_confidence.powi(2)).sum();
            let syy: f64 = bins.iter().map(|b| b.accuracy.powi(2)).sum();
            let reference = (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt());
            assert!((r - reference).abs() < 1e-9, "{r} vs {reference}");
            assert!((-1.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn ece_mce_invariant_under_permutation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(37);
        let mut scored: Vec<(f64, bool)> = (0..200)
            .map(|_| (rng.gen::<f64>(), rng.gen::<bool>()))
            .collect();
        let bins_a = reliability_diagram(&scored, 10).unwrap();
        // Deterministic shuffle.
        for i in (1..scored.len()).rev() {
            scored.swap(i, rng.gen_range(0..=i));
        }
        let bins_b = reliability_diagram(&scored, 10).unwrap();
        // Within-bin accumulation order changes, so allow ulp-level drift.
        assert!((ece(&bins_a).unwrap() - ece(&bins_b).unwrap()).abs() < 1e-12);
        assert!((mce(&bins_a).unwrap() - mce(&bins_b).unwrap()).abs() < 1e-12);
    }
}
