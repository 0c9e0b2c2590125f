//! Pixel masks and polygon rasterization.
//!
//! Rasterization samples each pixel at its center `(x + 0.5, y + 0.5)` and
//! applies the even-odd rule; a center lying exactly on a polygon edge counts
//! as inside. Pixels outside the frame are clipped.

use super::{GeometryError, RadialPolygon};

/// Full-frame binary mask, row-major, one bit per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMask {
    width: u32,
    height: u32,
    words: Vec<u64>,
}

impl BitMask {
    pub fn new(width: u32, height: u32) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        let bits = width as usize * height as usize;
        Self {
            width,
            height,
            words: vec![0; bits.div_ceil(64)],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        let idx = y as usize * self.width as usize + x as usize;
        self.words[idx / 64] >> (idx % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let idx = y as usize * self.width as usize + x as usize;
        if value {
            self.words[idx / 64] |= 1 << (idx % 64);
        } else {
            self.words[idx / 64] &= !(1 << (idx % 64));
        }
    }

    /// Number of set pixels.
    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Popcount of the bitwise AND with another mask of identical dims.
    pub fn intersection_count(&self, other: &Self) -> u64 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as u64)
            .sum()
    }
}

/// Full-frame instance labeling: 0 is background, k > 0 an instance id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    width: u32,
    height: u32,
    labels: Vec<u16>,
}

impl LabelMask {
    pub fn new(width: u32, height: u32) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        Self {
            width,
            height,
            labels: vec![0; width as usize * height as usize],
        }
    }

    pub fn from_raw(width: u32, height: u32, labels: Vec<u16>) -> Self {
        assert_eq!(labels.len(), width as usize * height as usize);
        Self { width, height, labels }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn raw(&self) -> &[u16] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u16 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, label: u16) {
        self.labels[y as usize * self.width as usize + x as usize] = label;
    }

    /// Distinct positive labels, ascending.
    pub fn distinct_labels(&self) -> Vec<u16> {
        let mut seen = vec![false; u16::MAX as usize + 1];
        for &l in &self.labels {
            seen[l as usize] = true;
        }
        (1..=u16::MAX).filter(|&l| seen[l as usize]).collect()
    }

    /// One instance mask per positive label, ordered by label id.
    pub fn split_instances(&self) -> Vec<(u16, InstanceMask)> {
        self.distinct_labels()
            .into_iter()
            .map(|label| {
                let mask = InstanceMask::from_pixels(self.width, self.height, |x, y| {
                    self.get(x, y) == label
                });
                (label, mask)
            })
            .collect()
    }
}

/// A binary instance mask stored only over its bounding window.
///
/// Behaves like a full-frame mask of the recorded frame dimensions whose set
/// pixels all fall within the window; IoU and membership queries answer in
/// frame coordinates. The window may be empty (zero area).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceMask {
    frame_width: u32,
    frame_height: u32,
    x0: u32,
    y0: u32,
    w: u32,
    h: u32,
    stride: usize,
    bits: Vec<u64>,
    area: u64,
}

impl InstanceMask {
    fn empty(frame_width: u32, frame_height: u32) -> Self {
        Self {
            frame_width,
            frame_height,
            x0: 0,
            y0: 0,
            w: 0,
            h: 0,
            stride: 0,
            bits: Vec::new(),
            area: 0,
        }
    }

    /// Rasterize a polygon into a window-local mask, clipped to the frame.
    pub fn from_polygon(poly: &RadialPolygon, frame_width: u32, frame_height: u32) -> Self {
        let verts = poly.vertices();
        let (min_x, min_y, max_x, max_y) = polygon_bbox(&verts);
        // Pixel x has center x + 0.5; widen by one pixel and clip.
        let x0 = ((min_x - 0.5).floor() as i64).max(0);
        let y0 = ((min_y - 0.5).floor() as i64).max(0);
        let x1 = ((max_x + 0.5).ceil() as i64).min(frame_width as i64);
        let y1 = ((max_y + 0.5).ceil() as i64).min(frame_height as i64);
        if x0 >= x1 || y0 >= y1 {
            return Self::empty(frame_width, frame_height);
        }
        let (x0, y0) = (x0 as u32, y0 as u32);
        let w = x1 as u32 - x0;
        let h = y1 as u32 - y0;
        let stride = (w as usize).div_ceil(64);
        let mut bits = vec![0u64; stride * h as usize];
        let mut area = 0u64;
        for ly in 0..h {
            let py = (y0 + ly) as f64 + 0.5;
            for lx in 0..w {
                let px = (x0 + lx) as f64 + 0.5;
                if point_in_polygon(px, py, &verts) {
                    bits[ly as usize * stride + lx as usize / 64] |= 1 << (lx % 64);
                    area += 1;
                }
            }
        }
        Self {
            frame_width,
            frame_height,
            x0,
            y0,
            w,
            h,
            stride,
            bits,
            area,
        }
    }

    /// Build from an arbitrary pixel predicate over the full frame.
    pub fn from_pixels<F: Fn(u32, u32) -> bool>(
        frame_width: u32,
        frame_height: u32,
        pred: F,
    ) -> Self {
        let (mut min_x, mut min_y, mut max_x, mut max_y) = (u32::MAX, u32::MAX, 0u32, 0u32);
        let mut any = false;
        for y in 0..frame_height {
            for x in 0..frame_width {
                if pred(x, y) {
                    any = true;
                    min_x = min_x.min(x);
                    min_y = min_y.min(y);
                    max_x = max_x.max(x);
                    max_y = max_y.max(y);
                }
            }
        }
        if !any {
            return Self::empty(frame_width, frame_height);
        }
        let (x0, y0) = (min_x, min_y);
        let w = max_x - min_x + 1;
        let h = max_y - min_y + 1;
        let stride = (w as usize).div_ceil(64);
        let mut bits = vec![0u64; stride * h as usize];
        let mut area = 0u64;
        for ly in 0..h {
            for lx in 0..w {
                if pred(x0 + lx, y0 + ly) {
                    bits[ly as usize * stride + lx as usize / 64] |= 1 << (lx % 64);
                    area += 1;
                }
            }
        }
        Self {
            frame_width,
            frame_height,
            x0,
            y0,
            w,
            h,
            stride,
            bits,
            area,
        }
    }

    pub fn from_bitmask(mask: &BitMask) -> Self {
        Self::from_pixels(mask.width(), mask.height(), |x, y| mask.get(x, y))
    }

    pub fn to_bitmask(&self) -> BitMask {
        let mut out = BitMask::new(self.frame_width, self.frame_height);
        for ly in 0..self.h {
            for lx in 0..self.w {
                if self.get_local(lx, ly) {
                    out.set(self.x0 + lx, self.y0 + ly, true);
                }
            }
        }
        out
    }

    pub fn frame(&self) -> (u32, u32) {
        (self.frame_width, self.frame_height)
    }

    /// Window as (x0, y0, x1, y1), half-open; meaningless when area is 0.
    pub fn window(&self) -> (u32, u32, u32, u32) {
        (self.x0, self.y0, self.x0 + self.w, self.y0 + self.h)
    }

    pub fn area(&self) -> u64 {
        self.area
    }

    #[inline]
    fn get_local(&self, lx: u32, ly: u32) -> bool {
        self.bits[ly as usize * self.stride + lx as usize / 64] >> (lx % 64) & 1 == 1
    }

    /// Membership in frame coordinates.
    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        if x < self.x0 || y < self.y0 || x >= self.x0 + self.w || y >= self.y0 + self.h {
            return false;
        }
        self.get_local(x - self.x0, y - self.y0)
    }

    /// Whether the bounding windows of two masks overlap.
    pub fn windows_overlap(&self, other: &Self) -> bool {
        if self.area == 0 || other.area == 0 {
            return false;
        }
        self.x0 < other.x0 + other.w
            && other.x0 < self.x0 + self.w
            && self.y0 < other.y0 + other.h
            && other.y0 < self.y0 + self.h
    }

    /// Local row as a packed 128-bit lane; valid only when `w <= 128`.
    #[inline]
    fn row_lane(&self, ly: u32) -> u128 {
        let base = ly as usize * self.stride;
        let mut lane = self.bits[base] as u128;
        if self.stride == 2 {
            lane |= (self.bits[base + 1] as u128) << 64;
        }
        lane
    }

    /// Set-pixel count of the intersection.
    pub fn intersection_area(&self, other: &Self) -> u64 {
        if !self.windows_overlap(other) {
            return 0;
        }
        let x_lo = self.x0.max(other.x0);
        let y_lo = self.y0.max(other.y0);
        let x_hi = (self.x0 + self.w).min(other.x0 + other.w);
        let y_hi = (self.y0 + self.h).min(other.y0 + other.h);
        let mut count = 0u64;
        if self.w <= 128 && other.w <= 128 {
            // Word-level path: shift both rows to the overlap origin and AND.
            let sa = x_lo - self.x0;
            let sb = x_lo - other.x0;
            let ow = x_hi - x_lo;
            let mask: u128 = if ow >= 128 { !0 } else { (1u128 << ow) - 1 };
            for y in y_lo..y_hi {
                let a = self.row_lane(y - self.y0) >> sa;
                let b = other.row_lane(y - other.y0) >> sb;
                count += (a & b & mask).count_ones() as u64;
            }
        } else {
            for y in y_lo..y_hi {
                for x in x_lo..x_hi {
                    if self.get_local(x - self.x0, y - self.y0)
                        && other.get_local(x - other.x0, y - other.y0)
                    {
                        count += 1;
                    }
                }
            }
        }
        count
    }

    /// Pixel-counting IoU; empty masks never overlap anything (IoU 0).
    pub fn iou(&self, other: &Self) -> f64 {
        debug_assert_eq!(
            (self.frame_width, self.frame_height),
            (other.frame_width, other.frame_height),
            "IoU between masks of different frames"
        );
        if self.area == 0 || other.area == 0 {
            return 0.0;
        }
        let inter = self.intersection_area(other);
        if inter == 0 {
            return 0.0;
        }
        inter as f64 / (self.area + other.area - inter) as f64
    }
}

/// Rasterize a polygon into a full-frame mask (spec'd pixel-center sampling).
pub fn rasterize(poly: &RadialPolygon, width: u32, height: u32) -> Result<BitMask, GeometryError> {
    if width == 0 || height == 0 {
        return Err(GeometryError::DimensionMismatch(width, height, 1, 1));
    }
    Ok(InstanceMask::from_polygon(poly, width, height).to_bitmask())
}

/// Even-odd point-in-polygon test; points exactly on an edge count as inside.
pub(crate) fn point_in_polygon(px: f64, py: f64, verts: &[(f64, f64)]) -> bool {
    let n = verts.len();
    let mut inside = false;
    for i in 0..n {
        let (x1, y1) = verts[i];
        let (x2, y2) = verts[(i + 1) % n];
        // Exact on-segment check resolves boundary ties deterministically.
        let cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1);
        if cross == 0.0
            && px >= x1.min(x2)
            && px <= x1.max(x2)
            && py >= y1.min(y2)
            && py <= y1.max(y2)
        {
            return true;
        }
        if (y1 > py) != (y2 > py) {
            let x_cross = x1 + (py - y1) * (x2 - x1) / (y2 - y1);
            if px < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

pub(crate) fn polygon_bbox(verts: &[(f64, f64)]) -> (f64, f64, f64, f64) {
    let mut min_x = f64::INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for &(x, y) in verts {
        min_x = min_x.min(x);
        min_y = min_y.min(y);
        max_x = max_x.max(x);
        max_y = max_y.max(y);
    }
    (min_x, min_y, max_x, max_y)
}

#[cfg(test)]
mod tests {
    use super::super::iou_mask;
    use super::*;
    use rand::{Rng, SeedableRng};

    fn rect_mask(w: u32, h: u32, x_range: std::ops::Range<u32>, y_range: std::ops::Range<u32>) -> BitMask {
        let mut m = BitMask::new(w, h);
        for y in y_range {
            for x in x_range.clone() {
                m.set(x, y, true);
            }
        }
        m
    }

    fn random_polygon(rng: &mut impl Rng, n: usize, frame: f64) -> RadialPolygon {
        let base = rng.gen_range(4.0..12.0);
        let radii: Vec<f64> = (0..n)
            .map(|_| (base * rng.gen_range(0.6..1.4_f64)).max(0.5))
            .collect();
        let cx = rng.gen_range(0.0..frame);
        let cy = rng.gen_range(0.0..frame);
        RadialPolygon::new(cx, cy, radii).unwrap()
    }

    #[test]
    fn fully_outside_polygon_rasterizes_empty() {
        let poly = RadialPolygon::new(-50.0, -50.0, vec![3.0; 8]).unwrap();
        let mask = rasterize(&poly, 10, 10).unwrap();
        assert!(mask.is_empty());
    }

    #[test]
    fn diamond_matches_per_pixel_point_test() {
        let poly = RadialPolygon::new(4.5, 4.5, vec![3.0; 4]).unwrap();
        let mask = rasterize(&poly, 10, 10).unwrap();
        let verts = poly.vertices();
        for y in 0..10 {
            for x in 0..10 {
                let expect = point_in_polygon(x as f64 + 0.5, y as f64 + 0.5, &verts);
                assert_eq!(mask.get(x, y), expect, "pixel ({x},{y})");
            }
        }
        assert!(!mask.is_empty());
    }

    #[test]
    fn pixel_count_tracks_polygon_area() {
        // Large smooth polygon: popcount within 2% of the analytic area.
        let radii: Vec<f64> = (0..16).map(|i| 20.0 + 3.0 * (i as f64 * 0.7).sin()).collect();
        let poly = RadialPolygon::new(32.0, 32.0, radii).unwrap();
        let mask = rasterize(&poly, 64, 64).unwrap();
        let count = mask.count_ones() as f64;
        let area = poly.area();
        assert!(
            (count - area).abs() / area < 0.02,
            "count {count} vs area {area}"
        );
    }

    #[test]
    fn boundary_pixel_counts_as_inside() {
        // Diamond centered (2.5, 2.5), radius 1: pixel (2, 1) has center
        // (2.5, 1.5) exactly on the vertex/edge; the tie rule keeps it.
        let poly = RadialPolygon::new(2.5, 2.5, vec![1.0; 4]).unwrap();
        let verts = poly.vertices();
        assert!(point_in_polygon(2.5, 1.5, &verts));
        assert!(point_in_polygon(3.0, 2.0, &verts)); // midpoint of an edge
        let mask = rasterize(&poly, 5, 5).unwrap();
        assert!(mask.get(2, 1));
        assert!(mask.get(2, 2));
    }

    #[test]
    fn translation_consistency() {
        let radii: Vec<f64> = (0..12).map(|i| 4.0 + (i as f64 * 0.9).sin()).collect();
        let a = RadialPolygon::new(10.0, 11.0, radii.clone()).unwrap();
        let b = RadialPolygon::new(14.0, 17.0, radii).unwrap();
        let ma = rasterize(&a, 40, 40).unwrap();
        let mb = rasterize(&b, 40, 40).unwrap();
        for y in 0..40u32 {
            for x in 0..40u32 {
                let (sx, sy) = (x as i64 + 4, y as i64 + 6);
                if sx < 40 && sy < 40 {
                    assert_eq!(ma.get(x, y), mb.get(sx as u32, sy as u32));
                }
            }
        }
    }

    #[test]
    fn iou_mask_identity_disjoint_and_worked_example() {
        let a = rect_mask(8, 8, 0..4, 0..2); // 8 px
        let b = rect_mask(8, 8, 0..2, 0..4); // 8 px, intersection 4
        assert_eq!(iou_mask(&a, &a).unwrap(), 1.0);
        let c = rect_mask(8, 8, 5..7, 5..7);
        assert_eq!(iou_mask(&a, &c).unwrap(), 0.0);
        let iou = iou_mask(&a, &b).unwrap();
        assert!((iou - 1.0 / 3.0).abs() < 1e-12, "iou = {iou}");
    }

    #[test]
    fn iou_mask_error_paths() {
        let a = rect_mask(8, 8, 0..2, 0..2);
        let b = rect_mask(9, 8, 0..2, 0..2);
        assert!(iou_mask(&a, &b).is_err());
        let empty_a = BitMask::new(4, 4);
        let empty_b = BitMask::new(4, 4);
        assert!(matches!(
            iou_mask(&empty_a, &empty_b),
            Err(GeometryError::EmptyOperands)
        ));
    }

    #[test]
    fn instance_mask_agrees_with_full_frame() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let poly = random_polygon(&mut rng, 16, 48.0);
            let inst = InstanceMask::from_polygon(&poly, 48, 48);
            let full = rasterize(&poly, 48, 48).unwrap();
            assert_eq!(inst.to_bitmask(), full);
            assert_eq!(inst.area(), full.count_ones());
        }
    }

    #[test]
    fn instance_mask_iou_matches_bitmask_iou() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let pa = random_polygon(&mut rng, 12, 40.0);
            let pb = random_polygon(&mut rng, 12, 40.0);
            let ia = InstanceMask::from_polygon(&pa, 40, 40);
            let ib = InstanceMask::from_polygon(&pb, 40, 40);
            if ia.area() == 0 || ib.area() == 0 {
                continue;
            }
            let fast = ia.iou(&ib);
            let slow = iou_mask(&ia.to_bitmask(), &ib.to_bitmask()).unwrap();
            assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
        }
    }

    #[test]
    fn intersection_word_path_matches_pixel_loop() {
        // Masks straddling word boundaries and the 128-px fast-path limit.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for round in 0..40 {
            let frame = if round % 2 == 0 { 200 } else { 90 };
            let big = round % 3 == 0;
            let radius = if big { 70.0 } else { rng.gen_range(10.0..30.0) };
            let pa = RadialPolygon::new(
                rng.gen_range(20.0..frame as f64 - 20.0),
                rng.gen_range(20.0..frame as f64 - 20.0),
                (0..12).map(|_| radius * rng.gen_range(0.7..1.3)).collect(),
            )
            .unwrap();
            let pb = RadialPolygon::new(
                rng.gen_range(20.0..frame as f64 - 20.0),
                rng.gen_range(20.0..frame as f64 - 20.0),
                (0..12).map(|_| radius * rng.gen_range(0.7..1.3)).collect(),
            )
            .unwrap();
            let a = InstanceMask::from_polygon(&pa, frame, frame);
            let b = InstanceMask::from_polygon(&pb, frame, frame);
            let mut reference = 0u64;
            for y in 0..frame {
                for x in 0..frame {
                    if a.get(x, y) && b.get(x, y) {
                        reference += 1;
                    }
                }
            }
            assert_eq!(a.intersection_area(&b), reference, "round {round}");
        }
    }

    #[test]
    fn label_mask_split() {
        let mut lm = LabelMask::new(6, 4);
        lm.set(0, 0, 1);
        lm.set(1, 0, 1);
        lm.set(4, 3, 2);
        let parts = lm.split_instances();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].0, 1);
        assert_eq!(parts[0].1.area(), 2);
        assert_eq!(parts[1].0, 2);
        assert_eq!(parts[1].1.area(), 1);
        assert!(parts[1].1.get(4, 3));
    }
}
