//! Center-based clustering over dense outputs.
//!
//! The sample set is collapsed to a single mean dense output; non-maximum
//! suppression on the mean yields a shared set of polygon centers; each pass
//! then contributes its polygon at a center whenever its object probability
//! there exceeds the threshold. Cost is O(F * M) probability lookups, with no
//! rasterization during the assignment itself.

use rayon::prelude::*;

use crate::formats::DenseOutput;
use crate::nms::{extract_candidates, nms};

use super::{Cluster, ClusterError, ClusterMember, MemberShape};

/// Elementwise mean of a sample set's dense fields.
#[derive(Debug, Clone)]
pub struct MeanDense {
    pub dense: DenseOutput,
}

/// One shared polygon center with its mean polygon.
#[derive(Debug, Clone)]
pub struct Center {
    pub x: u32,
    pub y: u32,
    pub mean_prob: f32,
    pub mean_polygon: crate::geometry::RadialPolygon,
}

/// Centers ordered by NMS acceptance; pairwise mean-polygon IoU stays below
/// the suppression threshold by construction.
#[derive(Debug, Clone)]
pub struct CenterSet {
    pub centers: Vec<Center>,
}

/// Result of the center-based assignment.
#[derive(Debug, Clone)]
pub struct RadialClusterOutcome {
    pub clusters: Vec<Cluster>,
    /// Centers no pass exceeded the threshold for; reported for diagnostics,
    /// omitted from the cluster list.
    pub empty_centers: usize,
}

/// Elementwise arithmetic mean over all passes.
pub fn mean_dense(samples: &[DenseOutput]) -> Result<MeanDense, ClusterError> {
    let first = samples.first().ok_or(ClusterError::NoSamples)?;
    let (w, h, n) = (first.width(), first.height(), first.n_rays());
    for s in samples {
        if s.width() != w || s.height() != h || s.n_rays() != n {
            return Err(ClusterError::DimensionMismatch(w, h, s.width(), s.height()));
        }
    }
    let inv = 1.0 / samples.len() as f64;
    let prob: Vec<f32> = (0..first.prob().len())
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0f64;
            for s in samples {
                acc += s.prob()[i] as f64;
            }
            (acc * inv) as f32
        })
        .collect();
    let radial: Vec<f32> = (0..first.radial().len())
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0f64;
            for s in samples {
                acc += s.radial()[i] as f64;
            }
            (acc * inv) as f32
        })
        .collect();
    Ok(MeanDense {
        dense: DenseOutput::from_parts(w, h, n, prob, radial),
    })
}

/// Run candidate extraction plus NMS on the mean dense output.
pub fn extract_centers(
    mean: &MeanDense,
    theta_prob: f64,
    theta_nms: f64,
    exact_iou: bool,
) -> CenterSet {
    let candidates = extract_candidates(&mean.dense, theta_prob);
    let accepted = nms(
        &candidates,
        mean.dense.width(),
        mean.dense.height(),
        theta_nms,
        exact_iou,
    );
    CenterSet {
        centers: accepted
            .into_iter()
            .map(|c| Center {
                x: c.x,
                y: c.y,
                mean_prob: c.prob,
                mean_polygon: c.polygon,
            })
            .collect(),
    }
}

/// Assign per-pass polygons to centers by the object-probability threshold.
///
/// A pass joins cluster `m` when its probability at `(x_m, y_m)` strictly
/// exceeds `theta_d`; a probability exactly equal to the threshold is
/// excluded. Every member of a cluster shares the identical center.
pub fn cluster_radial(
    samples: &[DenseOutput],
    centers: &CenterSet,
    theta_d: f64,
) -> Result<RadialClusterOutcome, ClusterError> {
    let first = samples.first().ok_or(ClusterError::NoSamples)?;
    let (w, h) = (first.width(), first.height());
    for s in samples {
        if s.width() != w || s.height() != h {
            return Err(ClusterError::DimensionMismatch(w, h, s.width(), s.height()));
        }
    }
    for c in &centers.centers {
        if c.x >= w || c.y >= h {
            return Err(ClusterError::CenterOutOfBounds(c.x, c.y, w, h));
        }
    }
    let mut clusters = Vec::new();
    let mut empty_centers = 0usize;
    for center in &centers.centers {
        let mut members = Vec::new();
        for (pass_idx, sample) in samples.iter().enumerate() {
            if (sample.prob_at(center.x, center.y) as f64) > theta_d {
                members.push(ClusterMember {
                    pass_id: pass_idx as u32 + 1,
                    shape: MemberShape::Polygon(sample.polygon_at(center.x, center.y)),
                });
            }
        }
        if members.is_empty() {
            empty_centers += 1;
        } else {
            clusters.push(Cluster {
                id: clusters.len() + 1,
                center: Some((center.x, center.y)),
                members,
            });
        }
    }
    Ok(RadialClusterOutcome {
        clusters,
        empty_centers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn blob(d: &mut DenseOutput, cx: u32, cy: u32, prob: f32, radius: f32) {
        d.set_prob(cx, cy, prob);
        for ray in 0..d.n_rays() {
            d.set_radial(cx, cy, ray, radius);
        }
    }

    #[test]
    fn mean_of_identical_samples_is_identity() {
        let mut d = DenseOutput::zeros(8, 8, 4);
        blob(&mut d, 3, 3, 0.8, 2.5);
        let mean = mean_dense(&[d.clone(), d.clone(), d.clone()]).unwrap();
        assert_eq!(mean.dense.prob(), d.prob());
        assert_eq!(mean.dense.radial(), d.radial());
    }

    #[test]
    fn mean_of_two_probs_is_midpoint() {
        let mut a = DenseOutput::zeros(4, 4, 4);
        let mut b = DenseOutput::zeros(4, 4, 4);
        a.set_prob(1, 1, 0.2);
        b.set_prob(1, 1, 0.8);
        let mean = mean_dense(&[a, b]).unwrap();
        assert!((mean.dense.prob_at(1, 1) - 0.5).abs() < 1e-7);
    }

    #[test]
    fn mean_matches_reference_summation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let samples: Vec<DenseOutput> = (0..5)
            .map(|_| {
                let mut d = DenseOutput::zeros(6, 5, 3);
                for v in d.prob_mut() {
                    *v = rng.gen();
                }
                for v in d.radial_mut() {
                    *v = rng.gen::<f32>() * 10.0;
                }
                d
            })
            .collect();
        let mean = mean_dense(&samples).unwrap();
        for i in 0..mean.dense.prob().len() {
            let reference: f64 =
                samples.iter().map(|s| s.prob()[i] as f64).sum::<f64>() / samples.len() as f64;
            assert!((mean.dense.prob()[i] as f64 - reference).abs() < 1e-6);
        }
        for i in 0..mean.dense.radial().len() {
            let reference: f64 =
                samples.iter().map(|s| s.radial()[i] as f64).sum::<f64>() / samples.len() as f64;
            assert!((mean.dense.radial()[i] as f64 - reference).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_prob_field_gives_empty_center_set() {
        let mean = mean_dense(&[DenseOutput::zeros(16, 16, 4)]).unwrap();
        let centers = extract_centers(&mean, 0.5, 0.5, false);
        assert!(centers.centers.is_empty());
    }

    #[test]
    fn two_separated_instances_give_two_centers() {
        let mut d = DenseOutput::zeros(64, 64, 8);
        blob(&mut d, 12, 12, 0.9, 6.0);
        blob(&mut d, 48, 48, 0.85, 6.0);
        let mean = mean_dense(&[d]).unwrap();
        let centers = extract_centers(&mean, 0.5, 0.5, false);
        assert_eq!(centers.centers.len(), 2);
    }

    #[test]
    fn full_membership_and_threshold_exclusion() {
        let mut samples = Vec::new();
        for i in 0..4 {
            let mut d = DenseOutput::zeros(32, 32, 8);
            let p = if i == 3 { 0.4 } else { 0.9 };
            blob(&mut d, 16, 16, p, 5.0);
            samples.push(d);
        }
        let mean = mean_dense(&samples).unwrap();
        let centers = extract_centers(&mean, 0.5, 0.5, false);
        assert_eq!(centers.centers.len(), 1);
        let out = cluster_radial(&samples, &centers, 0.5).unwrap();
        assert_eq!(out.clusters.len(), 1);
        // Pass 4 sits below theta_d and is excluded.
        assert_eq!(out.clusters[0].size(), 3);
        let pass_ids: Vec<u32> = out.clusters[0].members.iter().map(|m| m.pass_id).collect();
        assert_eq!(pass_ids, vec![1, 2, 3]);
    }

    #[test]
    fn members_share_identical_center() {
        let mut samples = Vec::new();
        for _ in 0..3 {
            let mut d = DenseOutput::zeros(32, 32, 8);
            blob(&mut d, 10, 20, 0.9, 4.0);
            samples.push(d);
        }
        let mean = mean_dense(&samples).unwrap();
        let centers = extract_centers(&mean, 0.5, 0.5, false);
        let out = cluster_radial(&samples, &centers, 0.5).unwrap();
        let polys = out.clusters[0].polygons().unwrap();
        for p in &polys {
            assert_eq!(p.center(), (10.5, 20.5));
        }
    }

    #[test]
    fn probability_exactly_at_threshold_is_excluded() {
        let mut d = DenseOutput::zeros(16, 16, 4);
        blob(&mut d, 8, 8, 0.5, 3.0);
        let centers = CenterSet {
            centers: vec![Center {
                x: 8,
                y: 8,
                mean_prob: 0.5,
                mean_polygon: d.polygon_at(8, 8),
            }],
        };
        let out = cluster_radial(&[d], &centers, 0.5).unwrap();
        assert!(out.clusters.is_empty());
        assert_eq!(out.empty_centers, 1);
    }

    #[test]
    fn out_of_bounds_center_errors() {
        let d = DenseOutput::zeros(16, 16, 4);
        let centers = CenterSet {
            centers: vec![Center {
                x: 20,
                y: 8,
                mean_prob: 0.9,
                mean_polygon: d.polygon_at(0, 0),
            }],
        };
        assert!(cluster_radial(&[d], &centers, 0.5).is_err());
    }
}
