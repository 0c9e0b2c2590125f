//! Per-cluster representative predictions, certainty scores, and uncertainty
//! visualization data.
//!
//! Three scores are attached to every cluster: spatial certainty (mean IoU of
//! members against the cluster median), fractional certainty (fraction of
//! passes the instance was detected in), and their product, the hybrid score.

use thiserror::Error;

use crate::geometry::{
    iou_radial_same_center, GeometryError, InstanceMask, RadialPolygon,
};

mod contour;

pub use contour::marching_squares;

#[derive(Debug, Error)]
pub enum CertaintyError {
    #[error("empty cluster")]
    EmptyCluster,
    #[error("cluster members do not share a center")]
    CenterMismatch,
    #[error("cluster members have differing ray counts")]
    RayCountMismatch,
    #[error("percentiles must satisfy 0 <= lo < hi <= 100, got ({0}, {1})")]
    InvalidPercentiles(f64, f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// The three certainty scores of one cluster, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertaintyScores {
    pub c_spl: f64,
    pub c_frac: f64,
    pub c_hyb: f64,
}

impl CertaintyScores {
    pub fn new(c_spl: f64, c_frac: f64) -> Self {
        Self {
            c_spl,
            c_frac,
            c_hyb: hybrid_certainty(c_spl, c_frac),
        }
    }
}

/// Inner/outer percentile polygons around a cluster's radial members.
#[derive(Debug, Clone)]
pub struct UncertaintyBand {
    pub inner: RadialPolygon,
    pub outer: RadialPolygon,
}

/// Pixel-mode uncertainty data: per-pixel membership statistics plus the
/// iso-contours of the mean map.
#[derive(Debug, Clone)]
pub struct PixelStats {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
    /// Contours of the mean map at 0.975: the region members almost always cover.
    pub inner_contours: Vec<Vec<[f64; 2]>>,
    /// Contours of the mean map at 0.025: the region members almost never leave.
    pub outer_contours: Vec<Vec<[f64; 2]>>,
}

/// Per-pixel median of binary membership values.
///
/// A pixel set in exactly half the members (even counts) resolves to set.
pub fn median_prediction_pixel(members: &[&InstanceMask]) -> Result<InstanceMask, CertaintyError> {
    let first = members.first().ok_or(CertaintyError::EmptyCluster)?;
    let (fw, fh) = first.frame();
    let n = members.len();
    if n == 1 {
        return Ok((*first).clone());
    }
    let counts = membership_counts(members, fw, fh);
    Ok(InstanceMask::from_pixels(fw, fh, |x, y| {
        2 * counts[y as usize * fw as usize + x as usize] as usize >= n
    }))
}

fn membership_counts(members: &[&InstanceMask], fw: u32, fh: u32) -> Vec<u16> {
    let mut counts = vec![0u16; fw as usize * fh as usize];
    for m in members {
        let (x0, y0, x1, y1) = m.window();
        for y in y0..y1 {
            for x in x0..x1 {
                if m.get(x, y) {
                    counts[y as usize * fw as usize + x as usize] += 1;
                }
            }
        }
    }
    counts
}

/// Linear-interpolation percentile between closest ranks (sorted input).
fn percentile_linear(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

fn check_shared_center(members: &[&RadialPolygon]) -> Result<(f64, f64, usize), CertaintyError> {
    let first = members.first().ok_or(CertaintyError::EmptyCluster)?;
    let center = first.center();
    let rays = first.ray_count();
    for m in members {
        if m.center() != center {
            return Err(CertaintyError::CenterMismatch);
        }
        if m.ray_count() != rays {
            return Err(CertaintyError::RayCountMismatch);
        }
    }
    Ok((center.0, center.1, rays))
}

fn per_ray_percentile(
    members: &[&RadialPolygon],
    p: f64,
) -> Result<RadialPolygon, CertaintyError> {
    let (cx, cy, rays) = check_shared_center(members)?;
    let mut radii = Vec::with_capacity(rays);
    for i in 0..rays {
        let mut values: Vec<f64> = members.iter().map(|m| m.radii()[i]).collect();
        values.sort_by(f64::total_cmp);
        radii.push(percentile_linear(&values, p));
    }
    Ok(RadialPolygon::new(cx, cy, radii)?)
}

/// Per-ray median polygon (linear interpolation for even member counts).
pub fn median_prediction_radial(
    members: &[&RadialPolygon],
) -> Result<RadialPolygon, CertaintyError> {
    per_ray_percentile(members, 50.0)
}

/// Mean mask IoU of members against the median prediction.
pub fn spatial_certainty_pixel(
    members: &[&InstanceMask],
    median: &InstanceMask,
) -> Result<f64, CertaintyError> {
    if members.is_empty() {
        return Err(CertaintyError::EmptyCluster);
    }
    let sum: f64 = members.iter().map(|m| m.iou(median)).sum();
    Ok(sum / members.len() as f64)
}

/// Mean IoU of radial members against the median polygon.
///
/// Uses the fast same-center IoU unless `exact` carries frame dimensions, in
/// which case members and median are rasterized and compared by pixel count.
pub fn spatial_certainty_radial(
    members: &[&RadialPolygon],
    median: &RadialPolygon,
    exact: Option<(u32, u32)>,
) -> Result<f64, CertaintyError> {
    if members.is_empty() {
        return Err(CertaintyError::EmptyCluster);
    }
    let sum: f64 = match exact {
        None => {
            let mut acc = 0.0;
            for m in members {
                acc += iou_radial_same_center(m, median)?;
            }
            acc
        }
        Some((w, h)) => {
            let median_mask = InstanceMask::from_polygon(median, w, h);
            let mut acc = 0.0;
            for m in members {
                acc += InstanceMask::from_polygon(m, w, h).iou(&median_mask);
            }
            acc
        }
    };
    Ok(sum / members.len() as f64)
}

/// Fraction of forward passes the instance was detected in.
pub fn fractional_certainty(cluster_size: usize, passes: u32) -> f64 {
    debug_assert!(cluster_size as u32 <= passes, "cluster larger than pass count");
    cluster_size as f64 / passes as f64
}

/// Product of spatial and fractional certainty.
pub fn hybrid_certainty(c_spl: f64, c_frac: f64) -> f64 {
    c_spl * c_frac
}

/// Per-ray percentile band around the cluster's radial members.
pub fn percentile_band_radial(
    members: &[&RadialPolygon],
    lo: f64,
    hi: f64,
) -> Result<UncertaintyBand, CertaintyError> {
    if !(0.0..=100.0).contains(&lo) || !(0.0..=100.0).contains(&hi) || lo >= hi {
        return Err(CertaintyError::InvalidPercentiles(lo, hi));
    }
    Ok(UncertaintyBand {
        inner: per_ray_percentile(members, lo)?,
        outer: per_ray_percentile(members, hi)?,
    })
}

/// Per-pixel mean and population standard deviation of binary membership,
/// plus iso-contours of the mean map at 0.025 and 0.975.
pub fn pixel_stats(members: &[&InstanceMask]) -> Result<PixelStats, CertaintyError> {
    let first = members.first().ok_or(CertaintyError::EmptyCluster)?;
    let (fw, fh) = first.frame();
    let n = members.len() as f64;
    let counts = membership_counts(members, fw, fh);
    let mut mean = vec![0.0f32; counts.len()];
    let mut std = vec![0.0f32; counts.len()];
    for (i, &c) in counts.iter().enumerate() {
        let p = c as f64 / n;
        mean[i] = p as f32;
        // Population standard deviation of a 0/1 sample is sqrt(p(1-p)).
        std[i] = (p * (1.0 - p)).sqrt() as f32;
    }
    let inner_contours = marching_squares(&mean, fw, fh, 0.975);
    let outer_contours = marching_squares(&mean, fw, fh, 0.025);
    Ok(PixelStats {
        mean,
        std,
        inner_contours,
        outer_contours,
    })
}
