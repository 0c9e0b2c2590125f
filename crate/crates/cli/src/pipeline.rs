//! End-to-end runs: load a sample set, cluster it with either method, score
//! every cluster, and optionally evaluate calibration against ground truth.

use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};

use starcert::calibration::{calibration_report, match_instances, CalibrationReport};
use starcert::certainty::{
    fractional_certainty, hybrid_certainty, median_prediction_pixel, median_prediction_radial,
    percentile_band_radial, pixel_stats, spatial_certainty_pixel, spatial_certainty_radial,
};
use starcert::cluster::{cluster_bsas, cluster_radial, extract_centers, mean_dense};
use starcert::formats::{
    load_dense, load_instances, CalibrationReportJson, CalibrationSection, ClusterReport, Manifest,
    MaskRle, Report, ReportDiagnostics, ReportParams, REPORT_VERSION,
};
use starcert::geometry::{InstanceMask, LabelMask};
use starcert::nms::{extract_candidates, nms};
use starcert::{DenseOutput, Prediction, PredictionSet};

/// Clustering route.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Pixel,
    Radial,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Pixel => "pixel",
            Method::Radial => "radial",
        }
    }
}

/// Where the pixel method takes its per-pass instances from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelSource {
    /// Instance files when the manifest has them, else dense decoding.
    Auto,
    Instances,
    /// Decode each pass's dense output with candidate extraction plus NMS.
    Dense,
}

/// All thresholds and switches of one clustering run.
#[derive(Debug, Clone)]
pub struct ClusterParams {
    pub method: Method,
    pub theta_iou: f64,
    pub theta_d: f64,
    pub theta_prob: f64,
    pub theta_nms: f64,
    pub exact_iou: bool,
    pub pixel_source: PixelSource,
    pub band_lo: f64,
    pub band_hi: f64,
}

impl ClusterParams {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            theta_iou: 0.5,
            theta_d: 0.5,
            theta_prob: 0.5,
            theta_nms: 0.5,
            exact_iou: false,
            pixel_source: PixelSource::Auto,
            band_lo: 2.5,
            band_hi: 97.5,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("theta-iou", self.theta_iou),
            ("theta-d", self.theta_d),
            ("theta-prob", self.theta_prob),
            ("theta-nms", self.theta_nms),
        ] {
            if !(v > 0.0 && v < 1.0) {
                bail!("{name} must lie strictly between 0 and 1, got {v}");
            }
        }
        Ok(())
    }

    fn report_params(&self) -> ReportParams {
        ReportParams {
            theta_iou: self.theta_iou,
            theta_d: self.theta_d,
            theta_prob: self.theta_prob,
            theta_nms: self.theta_nms,
            exact_iou: self.exact_iou,
        }
    }
}

/// Cluster a sample-set directory according to the parameters.
pub fn run_cluster(manifest: &Manifest, params: &ClusterParams) -> Result<Report> {
    params.validate()?;
    match params.method {
        Method::Radial => {
            let dense = load_dense(manifest)
                .context("radial method requires dense fields (mode/method mismatch?)")?;
            cluster_radial_pipeline(&dense, params)
        }
        Method::Pixel => {
            let has_instances = manifest.files.iter().all(|f| f.instances.is_some());
            let has_dense = manifest
                .files
                .iter()
                .all(|f| f.probs.is_some() && f.radial.is_some());
            let use_instances = match params.pixel_source {
                PixelSource::Instances => {
                    if !has_instances {
                        bail!("pixel method asked for instance files but the manifest has none");
                    }
                    true
                }
                PixelSource::Dense => {
                    if !has_dense {
                        bail!("pixel method asked for dense decoding but the manifest has no dense files");
                    }
                    false
                }
                PixelSource::Auto => {
                    if has_instances {
                        true
                    } else if has_dense {
                        false
                    } else {
                        bail!("manifest has neither instance nor dense files for every pass");
                    }
                }
            };
            let (w, h) = (manifest.width, manifest.height);
            let passes = if use_instances {
                let sets = load_instances(manifest)?;
                instance_sets_to_masks(&sets, w, h)
            } else {
                let dense = load_dense(manifest)?;
                decode_passes(&dense, params)
            };
            cluster_pixel_pipeline(&passes, w, h, manifest.n_rays, params)
        }
    }
}

/// Turn loaded instance sets into per-pass mask lists.
pub fn instance_sets_to_masks(
    sets: &[PredictionSet],
    width: u32,
    height: u32,
) -> Vec<Vec<InstanceMask>> {
    sets.iter()
        .map(|set| {
            set.predictions
                .iter()
                .map(|p| match p {
                    Prediction::Polygon(poly) => InstanceMask::from_polygon(poly, width, height),
                    Prediction::Mask(m) => m.clone(),
                })
                .collect()
        })
        .collect()
}

/// Decode every pass of a dense stack into instance masks (extraction + NMS).
pub fn decode_passes(dense: &[DenseOutput], params: &ClusterParams) -> Vec<Vec<InstanceMask>> {
    dense
        .iter()
        .map(|g| {
            let candidates = extract_candidates(g, params.theta_prob);
            nms(
                &candidates,
                g.width(),
                g.height(),
                params.theta_nms,
                params.exact_iou,
            )
            .into_iter()
            .map(|c| InstanceMask::from_polygon(&c.polygon, g.width(), g.height()))
            .collect()
        })
        .collect()
}

/// Pixel route: sequential IoU clustering of per-pass masks, then per-cluster
/// median mask, membership statistics, and certainty scores.
pub fn cluster_pixel_pipeline(
    passes: &[Vec<InstanceMask>],
    width: u32,
    height: u32,
    n_rays: usize,
    params: &ClusterParams,
) -> Result<Report> {
    let clusters = cluster_bsas(passes, params.theta_iou)?;
    let f = passes.len() as u32;
    let mut cluster_reports = Vec::with_capacity(clusters.len());
    for cluster in &clusters {
        let masks = cluster.masks().expect("pixel clusters hold masks");
        let median = median_prediction_pixel(&masks)?;
        let stats = pixel_stats(&masks)?;
        let c_spl = spatial_certainty_pixel(&masks, &median)?;
        let c_frac = fractional_certainty(cluster.size(), f);
        cluster_reports.push(ClusterReport {
            id: cluster.id,
            members: cluster.size(),
            center: None,
            median_polygon: None,
            median_mask: Some(MaskRle::encode(&median)),
            band_inner: None,
            band_outer: None,
            inner_contours: Some(stats.inner_contours),
            outer_contours: Some(stats.outer_contours),
            c_spl,
            c_frac,
            c_hyb: hybrid_certainty(c_spl, c_frac),
        });
    }
    Ok(Report {
        version: REPORT_VERSION,
        method: Method::Pixel.as_str().into(),
        width,
        height,
        n_rays,
        passes: f,
        params: params.report_params(),
        clusters: cluster_reports,
        diagnostics: ReportDiagnostics::default(),
        calibration: None,
    })
}

/// Radial route: mean dense output, shared centers, threshold assignment,
/// then per-cluster median polygon, percentile band, and certainty scores.
/// Clustering and scoring stay polygon-based; rasterization happens only
/// inside center extraction, or for scoring when `exact_iou` is set.
pub fn cluster_radial_pipeline(dense: &[DenseOutput], params: &ClusterParams) -> Result<Report> {
    params.validate()?;
    let first = dense.first().context("no dense samples")?;
    let (w, h, n_rays) = (first.width(), first.height(), first.n_rays());
    let mean = mean_dense(dense)?;
    let centers = extract_centers(&mean, params.theta_prob, params.theta_nms, params.exact_iou);
    let outcome = cluster_radial(dense, &centers, params.theta_d)?;
    let f = dense.len() as u32;
    let mut cluster_reports = Vec::with_capacity(outcome.clusters.len());
    for cluster in &outcome.clusters {
        let polygons = cluster.polygons().expect("radial clusters hold polygons");
        let median = median_prediction_radial(&polygons)?;
        let band = percentile_band_radial(&polygons, params.band_lo, params.band_hi)?;
        let exact = params.exact_iou.then_some((w, h));
        let c_spl = spatial_certainty_radial(&polygons, &median, exact)?;
        let c_frac = fractional_certainty(cluster.size(), f);
        let (cx, cy) = cluster.center.expect("radial clusters carry centers");
        cluster_reports.push(ClusterReport {
            id: cluster.id,
            members: cluster.size(),
            center: Some([cx, cy]),
            median_polygon: Some((&median).into()),
            median_mask: None,
            band_inner: Some((&band.inner).into()),
            band_outer: Some((&band.outer).into()),
            inner_contours: None,
            outer_contours: None,
            c_spl,
            c_frac,
            c_hyb: hybrid_certainty(c_spl, c_frac),
        });
    }
    Ok(Report {
        version: REPORT_VERSION,
        method: Method::Radial.as_str().into(),
        width: w,
        height: h,
        n_rays,
        passes: f,
        params: params.report_params(),
        clusters: cluster_reports,
        diagnostics: ReportDiagnostics {
            empty_centers: outcome.empty_centers,
        },
        calibration: None,
    })
}

/// Decode every cluster's representative shape from a report, for matching.
pub fn report_shapes(report: &Report) -> Result<Vec<InstanceMask>> {
    report
        .clusters
        .iter()
        .map(|c| {
            if let Some(rle) = &c.median_mask {
                Ok(rle.decode())
            } else if let Some(poly) = &c.median_polygon {
                let p = poly.to_polygon().context("invalid median polygon in report")?;
                Ok(InstanceMask::from_polygon(&p, report.width, report.height))
            } else {
                bail!("cluster {} carries no representative shape", c.id)
            }
        })
        .collect()
}

/// The three per-cluster score vectors of a report, by score name.
pub fn report_scores(report: &Report) -> [(&'static str, Vec<f64>); 3] {
    [
        (
            "c_spl",
            report.clusters.iter().map(|c| c.c_spl).collect(),
        ),
        (
            "c_frac",
            report.clusters.iter().map(|c| c.c_frac).collect(),
        ),
        (
            "c_hyb",
            report.clusters.iter().map(|c| c.c_hyb).collect(),
        ),
    ]
}

/// Match a report's clusters against ground truth and attach a calibration
/// section covering all three certainty scores.
///
/// Returns the per-score summaries for rendering; the same matching is used
/// for every score.
pub fn calibrate_report(
    report: &mut Report,
    gt: &LabelMask,
    theta_match: f64,
    bins: usize,
) -> Result<BTreeMap<String, CalibrationReport>> {
    if !(theta_match > 0.0 && theta_match < 1.0) {
        bail!("theta-match must lie strictly between 0 and 1, got {theta_match}");
    }
    let shapes = report_shapes(report)?;
    let matching = match_instances(&shapes, gt, theta_match)?;
    let mut out = BTreeMap::new();
    let mut section = CalibrationSection {
        theta_match,
        bins,
        scores: BTreeMap::new(),
    };
    for (name, scores) in report_scores(report) {
        let scored: Vec<(f64, bool)> = scores
            .into_iter()
            .zip(&matching.is_tp)
            .map(|(s, &tp)| (s, tp))
            .collect();
        let summary = calibration_report(&scored, bins, matching.false_negatives)
            .with_context(|| format!("calibration failed for {name}"))?;
        section
            .scores
            .insert(name.to_string(), CalibrationReportJson::from(&summary));
        out.insert(name.to_string(), summary);
    }
    report.calibration = Some(section);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use starcert::geometry::RayConfig;
    use starcert::synth::{generate_scene, simulate_passes, NoiseModel, SceneParams};

    fn scene_params(seed: u64) -> SceneParams {
        SceneParams {
            width: 96,
            height: 96,
            instances: 3,
            rays: RayConfig::new(16).unwrap(),
            r_min: 6.0,
            r_max: 12.0,
            smoothness: 0.3,
            seed,
        }
    }

    #[test]
    fn noiseless_pipelines_agree_and_score_one() {
        let scene = generate_scene(&scene_params(2)).unwrap();
        let (dense, sets) = simulate_passes(&scene, 5, &NoiseModel::noiseless(), 9).unwrap();

        let radial = cluster_radial_pipeline(&dense, &ClusterParams::new(Method::Radial)).unwrap();
        assert_eq!(radial.clusters.len(), 3);
        for c in &radial.clusters {
            assert_eq!(c.members, 5);
            assert!((c.c_spl - 1.0).abs() < 1e-9);
            assert_eq!(c.c_frac, 1.0);
            assert!((c.c_hyb - 1.0).abs() < 1e-9);
        }

        let passes = instance_sets_to_masks(&sets, 96, 96);
        let pixel =
            cluster_pixel_pipeline(&passes, 96, 96, 16, &ClusterParams::new(Method::Pixel)).unwrap();
        assert_eq!(pixel.clusters.len(), 3);
        for c in &pixel.clusters {
            assert_eq!(c.members, 5);
            assert!((c.c_spl - 1.0).abs() < 1e-9);
            assert_eq!(c.c_frac, 1.0);
        }
    }

    #[test]
    fn decode_matches_instance_route_in_noiseless_case() {
        let scene = generate_scene(&scene_params(4)).unwrap();
        let (dense, sets) = simulate_passes(&scene, 3, &NoiseModel::noiseless(), 9).unwrap();
        let params = ClusterParams::new(Method::Pixel);
        let decoded = decode_passes(&dense, &params);
        let from_instances = instance_sets_to_masks(&sets, 96, 96);
        for (a, b) in decoded.iter().zip(&from_instances) {
            assert_eq!(a.len(), b.len());
        }
        let ra = cluster_pixel_pipeline(&decoded, 96, 96, 16, &params).unwrap();
        let rb = cluster_pixel_pipeline(&from_instances, 96, 96, 16, &params).unwrap();
        assert_eq!(ra.clusters.len(), rb.clusters.len());
    }

    #[test]
    fn exact_iou_flag_switches_to_rasterized_scoring() {
        let scene = generate_scene(&scene_params(8)).unwrap();
        let noise = NoiseModel {
            p_det: 1.0,
            sigma_radius: 0.08,
            sigma_prob: 0.0,
            heterogeneous: false,
        };
        let (dense, _) = simulate_passes(&scene, 6, &noise, 5).unwrap();
        let fast = cluster_radial_pipeline(&dense, &ClusterParams::new(Method::Radial)).unwrap();
        let mut exact_params = ClusterParams::new(Method::Radial);
        exact_params.exact_iou = true;
        let exact = cluster_radial_pipeline(&dense, &exact_params).unwrap();
        assert_eq!(fast.clusters.len(), exact.clusters.len());
        for (f, e) in fast.clusters.iter().zip(&exact.clusters) {
            assert_eq!(f.members, e.members);
            // Same-center polygon IoU approximates the rasterized score.
            assert!(
                (f.c_spl - e.c_spl).abs() <= 0.05,
                "fast {} vs exact {}",
                f.c_spl,
                e.c_spl
            );
            assert_ne!(f.c_spl, e.c_spl, "paths should not be identical under noise");
        }
    }

    #[test]
    fn calibration_on_noiseless_set_is_perfect() {
        let scene = generate_scene(&scene_params(6)).unwrap();
        let (dense, _) = simulate_passes(&scene, 4, &NoiseModel::noiseless(), 1).unwrap();
        let mut report =
            cluster_radial_pipeline(&dense, &ClusterParams::new(Method::Radial)).unwrap();
        let summaries = calibrate_report(&mut report, &scene.gt_mask, 0.5, 10).unwrap();
        for (_, s) in summaries {
            assert_eq!(s.ece, 0.0);
            assert_eq!(s.mce, 0.0);
            assert_eq!(s.matched, 3);
            assert_eq!(s.false_positives, 0);
            assert_eq!(s.false_negatives, 0);
        }
        assert!(report.calibration.is_some());
    }
}
