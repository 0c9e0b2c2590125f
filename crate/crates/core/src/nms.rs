//! Candidate extraction and greedy non-maximum suppression on dense outputs.
//!
//! Every pixel with sufficiently high object probability proposes the polygon
//! carried by its radial distances; a greedy sweep in descending-probability
//! order keeps a candidate only when its mask IoU with every already accepted
//! candidate stays below the suppression threshold.

use crate::formats::DenseOutput;
use crate::geometry::{InstanceMask, RadialPolygon};

/// One polygon proposal: the pixel it came from, its probability, and the
/// polygon centered on that pixel's center.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub x: u32,
    pub y: u32,
    pub prob: f32,
    pub polygon: RadialPolygon,
}

/// Extract one candidate per pixel with probability >= `theta_prob`.
///
/// Output is sorted by descending probability; ties keep row-major (y, x)
/// order, so center sets are reproducible.
pub fn extract_candidates(g: &DenseOutput, theta_prob: f64) -> Vec<Candidate> {
    let mut out = Vec::new();
    for y in 0..g.height() {
        for x in 0..g.width() {
            let prob = g.prob_at(x, y);
            if (prob as f64) >= theta_prob {
                out.push(Candidate {
                    x,
                    y,
                    prob,
                    polygon: g.polygon_at(x, y),
                });
            }
        }
    }
    // Stable sort preserves the (y, x) scan order within equal probabilities.
    out.sort_by(|a, b| b.prob.total_cmp(&a.prob));
    out
}

const GRID_CELL: u32 = 32;

struct AcceptedGrid {
    cells_x: u32,
    cells_y: u32,
    buckets: Vec<Vec<usize>>,
}

impl AcceptedGrid {
    fn new(width: u32, height: u32) -> Self {
        let cells_x = width.div_ceil(GRID_CELL).max(1);
        let cells_y = height.div_ceil(GRID_CELL).max(1);
        Self {
            cells_x,
            cells_y,
            buckets: vec![Vec::new(); cells_x as usize * cells_y as usize],
        }
    }

    fn cell_range(&self, mask: &InstanceMask) -> (u32, u32, u32, u32) {
        let (x0, y0, x1, y1) = mask.window();
        let cx0 = (x0 / GRID_CELL).min(self.cells_x - 1);
        let cy0 = (y0 / GRID_CELL).min(self.cells_y - 1);
        let cx1 = (x1.saturating_sub(1) / GRID_CELL).min(self.cells_x - 1);
        let cy1 = (y1.saturating_sub(1) / GRID_CELL).min(self.cells_y - 1);
        (cx0, cy0, cx1, cy1)
    }

    fn insert(&mut self, mask: &InstanceMask, idx: usize) {
        if mask.area() == 0 {
            return;
        }
        let (cx0, cy0, cx1, cy1) = self.cell_range(mask);
        for cy in cy0..=cy1 {
            for cx in cx0..=cx1 {
                self.buckets[(cy * self.cells_x + cx) as usize].push(idx);
            }
        }
    }

    /// Indices of accepted masks whose bounding window could overlap.
    fn neighbors(&self, mask: &InstanceMask, seen: &mut [bool], out: &mut Vec<usize>) {
        out.clear();
        if mask.area() == 0 {
            return;
        }
        let (cx0, cy0, cx1, cy1) = self.cell_range(mask);
        for cy in cy0..=cy1 {
            for cx in cx0..=cx1 {
                for &idx in &self.buckets[(cy * self.cells_x + cx) as usize] {
                    if !seen[idx] {
                        seen[idx] = true;
                        out.push(idx);
                    }
                }
            }
        }
        for &idx in out.iter() {
            seen[idx] = false;
        }
    }
}

/// Greedy NMS over pre-sorted candidates.
///
/// `exact_iou` compares against every accepted candidate; the default prunes
/// the comparisons with a uniform grid over bounding boxes. Pruning is exact
/// (windows that cannot overlap have IoU 0), so both paths accept the same
/// set; see `nms_naive` for the all-pairs reference used in tests.
pub fn nms(
    candidates: &[Candidate],
    width: u32,
    height: u32,
    theta_nms: f64,
    exact_iou: bool,
) -> Vec<Candidate> {
    if exact_iou {
        return nms_naive(candidates, width, height, theta_nms);
    }
    let mut accepted: Vec<Candidate> = Vec::new();
    let mut accepted_masks: Vec<InstanceMask> = Vec::new();
    let mut grid = AcceptedGrid::new(width, height);
    let mut seen: Vec<bool> = Vec::new();
    let mut near = Vec::new();
    for cand in candidates {
        let mask = InstanceMask::from_polygon(&cand.polygon, width, height);
        grid.neighbors(&mask, &mut seen, &mut near);
        let clear = near.iter().all(|&i| mask.iou(&accepted_masks[i]) < theta_nms);
        if clear {
            grid.insert(&mask, accepted_masks.len());
            accepted_masks.push(mask);
            accepted.push(cand.clone());
            seen.push(false);
        }
    }
    accepted
}

/// All-pairs reference NMS: identical contract, no pruning.
pub fn nms_naive(candidates: &[Candidate], width: u32, height: u32, theta_nms: f64) -> Vec<Candidate> {
    let mut accepted: Vec<Candidate> = Vec::new();
    let mut accepted_masks: Vec<InstanceMask> = Vec::new();
    for cand in candidates {
        let mask = InstanceMask::from_polygon(&cand.polygon, width, height);
        let clear = accepted_masks.iter().all(|m| mask.iou(m) < theta_nms);
        if clear {
            accepted_masks.push(mask);
            accepted.push(cand.clone());
        }
    }
    accepted
}
