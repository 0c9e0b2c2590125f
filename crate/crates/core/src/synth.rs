//! Synthetic ground-truth scenes and stochastic forward-pass simulation.
//!
//! Stands in for a sampled segmentation network at desk scale: a scene of
//! disjoint star-convex instances is generated once, then each simulated pass
//! independently drops instances, perturbs radii, and emits the dense fields
//! and instance sets the clustering pipelines consume.
//!
//! Determinism: every random draw comes from a substream keyed by
//! `(seed, role, pass, instance)`, so parallel and serial runs agree
//! bit-for-bit and pass prefixes are shared across different pass counts.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::formats::{
    pass_file_names, read_manifest, write_dense, write_labels, write_manifest, write_polygons_csv,
    DenseOutput, FormatError, Manifest, Mode, PassFiles, Prediction, PredictionSet,
};
use crate::geometry::{InstanceMask, LabelMask, RadialPolygon, RayConfig};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid parameter: {0}")]
    BadParams(String),
    #[error("scene too crowded: placed {placed} of {requested} instances")]
    SceneTooCrowded { placed: usize, requested: usize },
}

/// Scene generation parameters.
#[derive(Debug, Clone)]
pub struct SceneParams {
    pub width: u32,
    pub height: u32,
    pub instances: usize,
    pub rays: RayConfig,
    pub r_min: f64,
    pub r_max: f64,
    /// Relative amplitude of the low-order sinusoidal boundary perturbation.
    pub smoothness: f64,
    pub seed: u64,
}

/// A generated scene: disjoint ground-truth polygons plus their label mask.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub width: u32,
    pub height: u32,
    pub polygons: Vec<RadialPolygon>,
    pub gt_mask: LabelMask,
    pub seed: u64,
}

/// Stochastic behavior of one simulated forward pass.
#[derive(Debug, Clone, Copy)]
pub struct NoiseModel {
    /// Per-instance detection probability per pass.
    pub p_det: f64,
    /// Stddev of the per-ray multiplicative radial noise (lognormal factor).
    pub sigma_radius: f64,
    /// Stddev of the additive probability-field noise.
    pub sigma_prob: f64,
    /// Draw p_det per instance from U[0.3, 1.0] instead of using `p_det`.
    pub heterogeneous: bool,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            p_det: 1.0,
            sigma_radius: 0.0,
            sigma_prob: 0.0,
            heterogeneous: false,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(0.0..=1.0).contains(&self.p_det) {
            return Err(SynthError::BadParams(format!(
                "p_det must be in [0, 1], got {}",
                self.p_det
            )));
        }
        if self.sigma_radius < 0.0 || !self.sigma_radius.is_finite() {
            return Err(SynthError::BadParams(format!(
                "sigma_radius must be non-negative, got {}",
                self.sigma_radius
            )));
        }
        if self.sigma_prob < 0.0 || !self.sigma_prob.is_finite() {
            return Err(SynthError::BadParams(format!(
                "sigma_prob must be non-negative, got {}",
                self.sigma_prob
            )));
        }
        Ok(())
    }
}

const ROLE_SCENE: u64 = 1;
const ROLE_PDET: u64 = 2;
const ROLE_DETECT: u64 = 3;
const ROLE_PROB_NOISE: u64 = 4;

/// SplitMix64-style mixing of the seed with stream coordinates.
fn mix(seed: u64, role: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(role.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(a.wrapping_mul(0xbf58_476d_1ce4_e5b9))
        .wrapping_add(b.wrapping_mul(0x94d0_49bb_1331_11eb));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn stream(seed: u64, role: u64, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, role, a, b))
}

const PLACEMENT_ATTEMPTS: usize = 1000;
const PLACEMENT_MARGIN: i64 = 1;

/// Generate disjoint star-convex instances on an otherwise empty frame.
///
/// Radii are `base + low-order sinusoid`, clamped to `[r_min, r_max]`;
/// centers are rejection-sampled on pixel centers until masks are disjoint
/// (with a one-pixel margin) and fully inside the frame.
pub fn generate_scene(params: &SceneParams) -> Result<SyntheticScene, SynthError> {
    if params.r_min <= 0.0 || params.r_min > params.r_max {
        return Err(SynthError::BadParams(format!(
            "need 0 < r_min <= r_max, got ({}, {})",
            params.r_min, params.r_max
        )));
    }
    if params.instances > u16::MAX as usize {
        return Err(SynthError::BadParams(format!(
            "at most {} instances per scene, got {}",
            u16::MAX,
            params.instances
        )));
    }
    let (w, h) = (params.width, params.height);
    let mut rng = stream(params.seed, ROLE_SCENE, 0, 0);
    let mut gt_mask = LabelMask::new(w, h);
    let mut occupied = vec![false; w as usize * h as usize];
    let mut polygons = Vec::with_capacity(params.instances);
    let n = params.rays.count();

    for j in 0..params.instances {
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let base = rng.gen_range(params.r_min..=params.r_max);
            // Up to three harmonics, amplitudes shrinking with order.
            let harmonics: Vec<(f64, f64)> = (1..=3)
                .map(|k| {
                    (
                        params.smoothness * base * rng.gen::<f64>() / k as f64,
                        rng.gen::<f64>() * std::f64::consts::TAU,
                    )
                })
                .collect();
            let radii: Vec<f64> = (0..n)
                .map(|i| {
                    let phi = params.rays.angle(i);
                    let mut r = base;
                    for (k, (amp, phase)) in harmonics.iter().enumerate() {
                        r += amp * ((k + 1) as f64 * phi + phase).cos();
                    }
                    r.clamp(params.r_min, params.r_max)
                })
                .collect();
            let r_eff = radii.iter().cloned().fold(0.0, f64::max).ceil() as i64;
            let lo_x = r_eff + 1;
            let hi_x = w as i64 - r_eff - 2;
            let lo_y = r_eff + 1;
            let hi_y = h as i64 - r_eff - 2;
            if lo_x > hi_x || lo_y > hi_y {
                continue;
            }
            let gx = rng.gen_range(lo_x..=hi_x);
            let gy = rng.gen_range(lo_y..=hi_y);
            // Centers sit on pixel centers so the probability peak is exact.
            let poly = RadialPolygon::new(gx as f64 + 0.5, gy as f64 + 0.5, radii)
                .expect("clamped radii are valid");
            let mask = InstanceMask::from_polygon(&poly, w, h);
            if mask.area() == 0 {
                continue;
            }
            let (x0, y0, x1, y1) = mask.window();
            let mut collides = false;
            'scan: for y in y0..y1 {
                for x in x0..x1 {
                    if !mask.get(x, y) {
                        continue;
                    }
                    for dy in -PLACEMENT_MARGIN..=PLACEMENT_MARGIN {
                        for dx in -PLACEMENT_MARGIN..=PLACEMENT_MARGIN {
                            let nx = x as i64 + dx;
                            let ny = y as i64 + dy;
                            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                                continue;
                            }
                            if occupied[ny as usize * w as usize + nx as usize] {
                                collides = true;
                                break 'scan;
                            }
                        }
                    }
                }
            }
            if collides {
                continue;
            }
            let label = (j + 1) as u16;
            for y in y0..y1 {
                for x in x0..x1 {
                    if mask.get(x, y) {
                        occupied[y as usize * w as usize + x as usize] = true;
                        gt_mask.set(x, y, label);
                    }
                }
            }
            polygons.push(poly);
            placed = true;
            break;
        }
        if !placed {
            return Err(SynthError::SceneTooCrowded {
                placed: j,
                requested: params.instances,
            });
        }
    }
    Ok(SyntheticScene {
        width: w,
        height: h,
        polygons,
        gt_mask,
        seed: params.seed,
    })
}

/// The per-instance detection probabilities `simulate_passes` uses.
pub fn instance_detection_probs(count: usize, noise: &NoiseModel, seed: u64) -> Vec<f64> {
    if noise.heterogeneous {
        let mut rng = stream(seed, ROLE_PDET, 0, 0);
        (0..count).map(|_| rng.gen_range(0.3..=1.0)).collect()
    } else {
        vec![noise.p_det; count]
    }
}

struct PassInstance {
    polygon: RadialPolygon,
    verts: Vec<(f64, f64)>,
    mask: InstanceMask,
}

fn simulate_one_pass(
    scene: &SyntheticScene,
    noise: &NoiseModel,
    p_dets: &[f64],
    seed: u64,
    pass_idx: u32,
) -> (DenseOutput, PredictionSet) {
    let (w, h) = (scene.width, scene.height);
    let n = scene
        .polygons
        .first()
        .map(|p| p.ray_count())
        .unwrap_or(16);
    let mut dense = DenseOutput::zeros(w, h, n);

    // Detection and shape perturbation per instance.
    let mut detected: Vec<PassInstance> = Vec::new();
    for (j, gt_poly) in scene.polygons.iter().enumerate() {
        let mut rng = stream(seed, ROLE_DETECT, pass_idx as u64 + 1, j as u64 + 1);
        if rng.gen::<f64>() >= p_dets[j] {
            continue;
        }
        let polygon = if noise.sigma_radius > 0.0 {
            let normal = Normal::new(0.0, noise.sigma_radius).expect("validated sigma");
            let radii: Vec<f64> = gt_poly
                .radii()
                .iter()
                .map(|&r| r * normal.sample(&mut rng).exp())
                .collect();
            RadialPolygon::new(gt_poly.cx, gt_poly.cy, radii).expect("positive radii")
        } else {
            gt_poly.clone()
        };
        let verts = polygon.vertices();
        let mask = InstanceMask::from_polygon(&polygon, w, h);
        detected.push(PassInstance {
            polygon,
            verts,
            mask,
        });
    }

    // Interior probability profile: normalized distance to the boundary
    // along the ray through each pixel, 1 at the center and 0 at the edge.
    // Overlapping perturbed instances resolve to the higher profile.
    let mut owner = vec![usize::MAX; w as usize * h as usize];
    let mut best = vec![0.0f32; w as usize * h as usize];
    for (di, inst) in detected.iter().enumerate() {
        let (cx, cy) = inst.polygon.center();
        let (x0, y0, x1, y1) = inst.mask.window();
        for y in y0..y1 {
            for x in x0..x1 {
                if !inst.mask.get(x, y) {
                    continue;
                }
                let px = x as f64 + 0.5;
                let py = y as f64 + 0.5;
                let dx = px - cx;
                let dy = py - cy;
                let dist = (dx * dx + dy * dy).sqrt();
                let profile = if dist == 0.0 {
                    1.0
                } else {
                    let dir = (dx / dist, dy / dist);
                    let rho = crate::geometry::ray_polygon_distance((cx, cy), dir, &inst.verts);
                    if rho <= 0.0 {
                        0.0
                    } else {
                        (1.0 - dist / rho).clamp(0.0, 1.0)
                    }
                };
                let idx = y as usize * w as usize + x as usize;
                if profile as f32 > best[idx] || owner[idx] == usize::MAX {
                    best[idx] = profile as f32;
                    owner[idx] = di;
                }
            }
        }
    }

    // Dense fields from the owner map: exact ray distances from each pixel
    // center to the owning polygon's boundary.
    let dirs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let phi = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            (phi.cos(), phi.sin())
        })
        .collect();
    for y in 0..h {
        for x in 0..w {
            let idx = y as usize * w as usize + x as usize;
            if owner[idx] == usize::MAX {
                continue;
            }
            dense.set_prob(x, y, best[idx]);
            let inst = &detected[owner[idx]];
            let origin = (x as f64 + 0.5, y as f64 + 0.5);
            for (i, dir) in dirs.iter().enumerate() {
                let d = crate::geometry::ray_polygon_distance(origin, *dir, &inst.verts);
                dense.set_radial(x, y, i, d as f32);
            }
        }
    }

    if noise.sigma_prob > 0.0 {
        let mut rng = stream(seed, ROLE_PROB_NOISE, pass_idx as u64 + 1, 0);
        let normal = Normal::new(0.0, noise.sigma_prob).expect("validated sigma");
        for v in dense.prob_mut() {
            *v = (*v + normal.sample(&mut rng) as f32).clamp(0.0, 1.0);
        }
    }

    let predictions = detected
        .iter()
        .map(|inst| Prediction::Polygon(inst.polygon.clone()))
        .collect();
    (
        dense,
        PredictionSet {
            pass_id: pass_idx + 1,
            predictions,
        },
    )
}

/// Simulate `passes` stochastic forward passes over a scene.
///
/// Returns the dense outputs and the matching instance sets, both in pass
/// order. Passes are generated in parallel from independent substreams, so
/// results are identical regardless of thread count, and the first `k`
/// passes agree across different total pass counts.
pub fn simulate_passes(
    scene: &SyntheticScene,
    passes: u32,
    noise: &NoiseModel,
    seed: u64,
) -> Result<(Vec<DenseOutput>, Vec<PredictionSet>), SynthError> {
    if passes == 0 {
        return Err(SynthError::BadParams("passes must be at least 1".into()));
    }
    noise.validate()?;
    let p_dets = instance_detection_probs(scene.polygons.len(), noise, seed);
    let results: Vec<(DenseOutput, PredictionSet)> = (0..passes)
        .into_par_iter()
        .map(|f| simulate_one_pass(scene, noise, &p_dets, seed, f))
        .collect();
    Ok(results.into_iter().unzip())
}

/// Write a full sample set (dense + instance files + ground truth) in the
/// standard layout and return the re-validated manifest.
pub fn write_sample_set(
    dir: &Path,
    scene: &SyntheticScene,
    dense: &[DenseOutput],
    sets: &[PredictionSet],
    n_rays: usize,
) -> Result<Manifest, FormatError> {
    assert_eq!(dense.len(), sets.len());
    std::fs::create_dir_all(dir).map_err(|e| FormatError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut files = Vec::with_capacity(dense.len());
    for (i, set) in sets.iter().enumerate() {
        let pass_no = i as u32 + 1;
        let (probs_name, radial_name, csv_name) = pass_file_names(pass_no);
        let entry = PassFiles {
            probs: Some(probs_name),
            radial: Some(radial_name),
            instances: Some(csv_name.clone()),
        };
        let rows: Vec<(u32, RadialPolygon)> = set
            .predictions
            .iter()
            .filter_map(|p| match p {
                Prediction::Polygon(poly) => Some((pass_no, poly.clone())),
                Prediction::Mask(_) => None,
            })
            .collect();
        write_polygons_csv(&dir.join(&csv_name), n_rays, &rows)?;
        files.push(entry);
    }
    let gt_name = "gt.labels.bin".to_string();
    write_labels(&dir.join(&gt_name), &scene.gt_mask)?;
    let manifest = Manifest::new(
        Mode::Dense,
        scene.width,
        scene.height,
        n_rays,
        files,
        Some(gt_name),
    )
    .with_base_dir(dir);
    for (entry, d) in manifest.files.iter().zip(dense) {
        write_dense(&manifest, entry, d)?;
    }
    let mpath = dir.join("manifest.json");
    write_manifest(&mpath, &manifest)?;
    read_manifest(&mpath)
}
