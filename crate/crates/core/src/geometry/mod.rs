//! Star-convex polygon geometry: ray parameterization, areas, IoU, ray casting.
//!
//! Conventions used across the whole crate:
//!
//! * Ray angles are equidistant, starting at 0 along +x: `phi_i = 2*pi*i / n`.
//! * Image coordinates have y growing downward; vertex order follows ray
//!   index order and is used consistently everywhere.
//! * Pixel `(x, y)` is identified with its center point `(x + 0.5, y + 0.5)`.

use thiserror::Error;

mod raster;

pub use raster::{rasterize, BitMask, InstanceMask, LabelMask};
pub(crate) use raster::{point_in_polygon, polygon_bbox};

/// Smallest radius a pixel-carried polygon may have, in pixels.
///
/// Dense radial fields are zero outside instances; candidates extracted from
/// such pixels get their radii clamped up to this value so the resulting
/// polygon is valid and covers at least its own pixel center.
pub const MIN_RADIUS: f64 = 0.5;

/// Errors from geometric constructions and queries.
#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("ray count must be at least 3, got {0}")]
    TooFewRays(usize),
    #[error("radius {index} is {value}, radii must be finite and positive")]
    BadRadius { index: usize, value: f64 },
    #[error("radii count {got} does not match ray count {expected}")]
    RadiiCount { got: usize, expected: usize },
    #[error("mask dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("empty operands: IoU of two empty masks is undefined")]
    EmptyOperands,
    #[error("polygon centers differ: ({0}, {1}) vs ({2}, {3})")]
    CenterMismatch(f64, f64, f64, f64),
    #[error("point ({0}, {1}) lies outside the polygon")]
    PointOutside(f64, f64),
}

/// Number of radial directions; angles are always derived as `2*pi*i / n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RayConfig {
    n: usize,
}

impl RayConfig {
    pub fn new(n: usize) -> Result<Self, GeometryError> {
        if n < 3 {
            return Err(GeometryError::TooFewRays(n));
        }
        Ok(Self { n })
    }

    pub fn count(&self) -> usize {
        self.n
    }

    /// Angle of ray `i` in radians.
    pub fn angle(&self, i: usize) -> f64 {
         2.0 * std::f64::consts::PI * (i as f64) / (self.n as f64)
    }
}

/// A star-convex polygon: center plus one positive radius per ray.
///
/// Positive radii along equidistant rays guarantee star-convexity about the
/// center by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialPolygon {
    pub cx: f64,
    pub cy: f64,
    radii: Vec<f64>,
}

impl RadialPolygon {
    pub fn new(cx: f64, cy: f64, radii: Vec<f64>) -> Result<Self, GeometryError> {
        if radii.len() < 3 {
            return Err(GeometryError::TooFewRays(radii.len()));
        }
        for (index, &value) in radii.iter().enumerate() {
            if !value.is_finite() || value <= 0.0 {
                return Err(GeometryError::BadRadius { index, value });
            }
        }
        Ok(Self { cx, cy, radii })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn ray_count(&self) -> usize {
        self.radii.len()
    }

    pub fn rays(&self) -> RayConfig {
        RayConfig { n: self.radii.len() }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.cx, self.cy)
    }

    /// Vertex `i` sits at `center + r_i * (cos phi_i, sin phi_i)`.
    pub fn vertices(&self) -> Vec<(f64, f64)> {
        let rays = self.rays();
        self.radii
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let phi = rays.angle(i);
                (self.cx + r * phi.cos(), self.cy + r * phi.sin())
            })
            .collect()
    }

    /// Shoelace area of the vertex polygon, in pixels^2.
    ///
    /// For this parameterization the shoelace sum collapses to
    /// `(1/2) * sum_i r_i * r_{i+1} * sin(2*pi/n)`.
    pub fn area(&self) -> f64 {
        let n = self.radii.len();
        let sin_step = (2.0 * std::f64::consts::PI / n as f64).sin();
        let mut sum = 0.0;
        for i in 0..n {
            sum += self.radii[i] * self.radii[(i + 1) % n];
        }
        0.5 * sin_step * sum
    }

    /// Axis-aligned bounding box of the vertex polygon.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        polygon_bbox(&self.vertices())
    }
}

/// Free-function form of [`RadialPolygon::vertices`], checking the ray config.
pub fn vertices(poly: &RadialPolygon, rays: RayConfig) -> Result<Vec<(f64, f64)>, GeometryError> {
    if poly.ray_count() != rays.count() {
        return Err(GeometryError::RadiiCount {
            got: poly.ray_count(),
            expected: rays.count(),
        });
    }
    Ok(poly.vertices())
}

/// Free-function form of [`RadialPolygon::area`].
pub fn polygon_area(poly: &RadialPolygon) -> f64 {
    poly.area()
}

/// Pixel-counting IoU of two full-frame masks.
///
/// Errors on dimension mismatch and when both masks are empty (undefined).
pub fn iou_mask(a: &BitMask, b: &BitMask) -> Result<f64, GeometryError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(GeometryError::DimensionMismatch(
            a.width(),
            a.height(),
            b.width(),
            b.height(),
        ));
    }
    let inter = a.intersection_count(b);
    let union = a.count_ones() + b.count_ones() - inter;
    if union == 0 {
        return Err(GeometryError::EmptyOperands);
    }
    Ok(inter as f64 / union as f64)
}

/// Fast IoU for two star polygons sharing the same center and ray config.
///
/// Computes `area(min radii per ray) / area(max radii per ray)`. This is an
/// approximation of mask IoU that is exact only at the sampled rays; between
/// rays the straight edges of the min/max polygons deviate slightly from the
/// true intersection/union boundary.
pub fn iou_radial_same_center(
    a: &RadialPolygon,
    b: &RadialPolygon,
) -> Result<f64, GeometryError> {
    if a.cx != b.cx || a.cy != b.cy {
        return Err(GeometryError::CenterMismatch(a.cx, a.cy, b.cx, b.cy));
    }
    if a.ray_count() != b.ray_count() {
        return Err(GeometryError::RadiiCount {
            got: b.ray_count(),
            expected: a.ray_count(),
        });
    }
    let n = a.ray_count();
    let mut sum_min = 0.0;
    let mut sum_max = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        let (a0, a1) = (a.radii[i], a.radii[j]);
        let (b0, b1) = (b.radii[i], b.radii[j]);
        sum_min += a0.min(b0) * a1.min(b1);
        sum_max += a0.max(b0) * a1.max(b1);
    }
    // The common 0.5*sin(2*pi/n) factor cancels.
    Ok(sum_min / sum_max)
}

/// Distance from an interior point to the polygon boundary along a direction.
///
/// The ray is intersected with each of the `n` boundary segments and the
/// nearest positive hit is returned. Errors when the point is not inside.
pub fn ray_distance_to_boundary(
    point: (f64, f64),
    direction_angle: f64,
    poly: &RadialPolygon,
) -> Result<f64, GeometryError> {
    let verts = poly.vertices();
    if !point_in_polygon(point.0, point.1, &verts) {
        return Err(GeometryError::PointOutside(point.0, point.1));
    }
    let dir = (direction_angle.cos(), direction_angle.sin());
    Ok(ray_polygon_distance(point, dir, &verts))
}

/// Nearest positive ray/segment intersection over the polygon edges.
///
/// The caller guarantees the origin is inside, so a hit always exists; the
/// fallback 0.0 is unreachable for valid inputs.
pub(crate) fn ray_polygon_distance(
    origin: (f64, f64),
    dir: (f64, f64),
    verts: &[(f64, f64)],
) -> f64 {
    let n = verts.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        let (x1, y1) = verts[i];
        let (x2, y2) = verts[(i + 1) % n];
        let ex = x2 - x1;
        let ey = y2 - y1;
        let denom = dir.0 * ey - dir.1 * ex;
        if denom.abs() < 1e-300 {
            continue; // ray parallel to edge
        }
        let ox = x1 - origin.0;
        let oy = y1 - origin.1;
        let t = (ox * ey - oy * ex) / denom; // distance along the ray
        let u = (ox * dir.1 - oy * dir.0) / denom; // position along the edge
        if t >= 0.0 && (-1e-12..=1.0 + 1e-12).contains(&u) && t < best {
            best = t;
        }
    }
    if best.is_finite() {
        best
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diamond(cx: f64, cy: f64, r: f64) -> RadialPolygon {
        RadialPolygon::new(cx, cy, vec![r; 4]).unwrap()
    }

    #[test]
    fn unit_diamond_vertices() {
        let poly = diamond(0.0, 0.0, 1.0);
        let v = poly.vertices();
        let expected = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
        for (got, want) in v.iter().zip(expected.iter()) {
            assert!((got.0 - want.0).abs() < 1e-12, "{got:?} vs {want:?}");
            assert!((got.1 - want.1).abs() < 1e-12, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn translated_scaled_diamond_vertices() {
        let poly = diamond(5.0, 5.0, 2.0);
        let v = poly.vertices();
        let expected = [(7.0, 5.0), (5.0, 7.0), (3.0, 5.0), (5.0, 3.0)];
        for (got, want) in v.iter().zip(expected.iter()) {
            assert!((got.0 - want.0).abs() < 1e-12);
            assert!((got.1 - want.1).abs() < 1e-12);
        }
    }

    #[test]
    fn regular_16gon_vertices_match_direct_trig() {
        let poly = RadialPolygon::new(0.0, 0.0, vec![1.0; 16]).unwrap();
        let v = poly.vertices();
        for (i, (x, y)) in v.iter().enumerate() {
            let phi = 2.0 * std::f64::consts::PI * i as f64 / 16.0;
            assert!((x - phi.cos()).abs() < 1e-12);
            assert!((y - phi.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn diamond_area_is_two() {
        // Shoelace by hand on (1,0),(0,1),(-1,0),(0,-1) gives 2.
        assert!((diamond(0.0, 0.0, 1.0).area() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn regular_polygon_area_formula() {
        let r = 3.5;
        let poly = RadialPolygon::new(1.0, 2.0, vec![r; 16]).unwrap();
        let expected = 16.0 / 2.0 * r * r * (std::f64::consts::PI / 8.0).sin();
        assert!((poly.area() - expected).abs() < 1e-9);
    }

    #[test]
    fn area_scales_quadratically() {
        let radii: Vec<f64> = (0..12).map(|i| 2.0 + (i as f64 * 0.7).sin().abs()).collect();
        let a = RadialPolygon::new(0.0, 0.0, radii.clone()).unwrap().area();
        let scaled: Vec<f64> = radii.iter().map(|r| r * 3.0).collect();
        let b = RadialPolygon::new(0.0, 0.0, scaled).unwrap().area();
        assert!((b / a - 9.0).abs() < 1e-9);
    }

    #[test]
    fn area_matches_shoelace_on_vertices() {
        let radii: Vec<f64> = (0..16)
            .map(|i| 5.0 + 2.0 * (i as f64 * 1.3).sin() + (i as f64 * 0.5).cos())
            .collect();
        let poly = RadialPolygon::new(3.0, -2.0, radii).unwrap();
        let v = poly.vertices();
        let mut shoelace = 0.0;
        for i in 0..v.len() {
            let (x1, y1) = v[i];
            let (x2, y2) = v[(i + 1) % v.len()];
            shoelace += x1 * y2 - x2 * y1;
        }
        shoelace = shoelace.abs() / 2.0;
        assert!((poly.area() - shoelace).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_polygons() {
        assert!(RadialPolygon::new(0.0, 0.0, vec![1.0, 2.0]).is_err());
        assert!(RadialPolygon::new(0.0, 0.0, vec![1.0, 0.0, 1.0]).is_err());
        assert!(RadialPolygon::new(0.0, 0.0, vec![1.0, -3.0, 1.0]).is_err());
        assert!(RadialPolygon::new(0.0, 0.0, vec![1.0, f64::NAN, 1.0]).is_err());
        assert!(RayConfig::new(2).is_err());
    }

    #[test]
    fn radial_iou_identity_and_scaling() {
        let radii: Vec<f64> = (0..16).map(|i| 4.0 + (i as f64).sin()).collect();
        let a = RadialPolygon::new(1.0, 1.0, radii.clone()).unwrap();
        assert_eq!(iou_radial_same_center(&a, &a).unwrap(), 1.0);

        let half: Vec<f64> = radii.iter().map(|r| r / 2.0).collect();
        let b = RadialPolygon::new(1.0, 1.0, half).unwrap();
        let iou = iou_radial_same_center(&a, &b).unwrap();
        assert!((iou - 0.25).abs() < 1e-12, "iou = {iou}");
    }

    #[test]
    fn radial_iou_center_mismatch_errors() {
        let a = diamond(0.0, 0.0, 1.0);
        let b = diamond(0.1, 0.0, 1.0);
        assert!(iou_radial_same_center(&a, &b).is_err());
    }

    #[test]
    fn radial_iou_monotone_as_radii_grow_toward_target() {
        // Growing every radius of b toward a's radii never decreases the IoU.
        let radii: Vec<f64> = (0..16).map(|i| 6.0 + (i as f64 * 0.9).cos()).collect();
        let a = RadialPolygon::new(0.0, 0.0, radii.clone()).unwrap();
        let mut prev = 0.0;
        for step in 0..=10 {
            let t = step as f64 / 10.0;
            let grown: Vec<f64> = radii.iter().map(|r| r * (0.4 + 0.6 * t)).collect();
            let b = RadialPolygon::new(0.0, 0.0, grown).unwrap();
            let iou = iou_radial_same_center(&a, &b).unwrap();
            assert!(iou >= prev - 1e-12, "iou {iou} dropped below {prev}");
            prev = iou;
        }
        assert!((prev - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ray_distance_along_sampled_ray_is_radius() {
        let radii: Vec<f64> = (0..8).map(|i| 3.0 + 0.5 * (i as f64)).collect();
        let poly = RadialPolygon::new(2.0, 7.0, radii.clone()).unwrap();
        let rays = poly.rays();
        for (i, &r) in radii.iter().enumerate() {
            let d = ray_distance_to_boundary((2.0, 7.0), rays.angle(i), &poly).unwrap();
            assert!((d - r).abs() < 1e-9, "ray {i}: {d} vs {r}");
        }
    }

    #[test]
    fn ray_distance_diamond_diagonal() {
        // Unit diamond, direction 45 degrees: the edge between (1,0) and (0,1)
        // is the line x + y = 1, hit at distance sqrt(2)/2.
        let poly = diamond(0.0, 0.0, 1.0);
        let d = ray_distance_to_boundary((0.0, 0.0), std::f64::consts::FRAC_PI_4, &poly).unwrap();
        assert!((d - std::f64::consts::SQRT_2 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn ray_distance_residual_lands_on_boundary() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let radii: Vec<f64> = (0..16).map(|i| 8.0 + 3.0 * (i as f64 * 0.6).sin()).collect();
        let poly = RadialPolygon::new(0.0, 0.0, radii).unwrap();
        let verts = poly.vertices();
        for _ in 0..200 {
            // Interior points sampled well inside.
            let ang = rng.gen::<f64>() * std::f64::consts::TAU;
            let rad = rng.gen::<f64>() * 3.0;
            let p = (rad * ang.cos(), rad * ang.sin());
            let dir = rng.gen::<f64>() * std::f64::consts::TAU;
            let d = ray_distance_to_boundary(p, dir, &poly).unwrap();
            let hit = (p.0 + d * dir.cos(), p.1 + d * dir.sin());
            // The hit point must lie on some edge segment.
            let mut min_seg_dist = f64::INFINITY;
            for i in 0..verts.len() {
                let (x1, y1) = verts[i];
                let (x2, y2) = verts[(i + 1) % verts.len()];
                let (ex, ey) = (x2 - x1, y2 - y1);
                let len2 = ex * ex + ey * ey;
                let t = (((hit.0 - x1) * ex + (hit.1 - y1) * ey) / len2).clamp(0.0, 1.0);
                let (px, py) = (x1 + t * ex - hit.0, y1 + t * ey - hit.1);
                min_seg_dist = min_seg_dist.min((px * px + py * py).sqrt());
            }
            assert!(min_seg_dist < 1e-9, "residual {min_seg_dist}");
        }
    }

    #[test]
    fn ray_distance_outside_point_errors() {
        let poly = diamond(0.0, 0.0, 1.0);
        assert!(ray_distance_to_boundary((5.0, 5.0), 0.0, &poly).is_err());
    }
}
