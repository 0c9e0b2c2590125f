//! Scaling benchmark for the two clustering routes.
//!
//! Workloads are synthetic scenes whose instance count grows while density
//! stays roughly constant (the frame grows with sqrt(instances)). Timed
//! regions cover exactly the clustering operations: the sequential IoU sweep
//! for the pixel route and the center-assignment step for the radial route;
//! sample generation, rasterization, and center extraction are setup.
//! Numbers are comparable across machines in shape, not absolute time.

use std::time::Instant;

use anyhow::{bail, Result};

use starcert::cluster::{cluster_bsas, cluster_radial, extract_centers, mean_dense};
use starcert::geometry::RayConfig;
use starcert::synth::{generate_scene, simulate_passes, NoiseModel, SceneParams};

use crate::pipeline::instance_sets_to_masks;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub passes: u32,
    pub seed: u64,
    pub reps: u32,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![50, 100, 200, 400, 800],
            passes: 10,
            seed: 11,
            reps: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub method: &'static str,
    pub size: usize,
    pub passes: u32,
    pub total_predictions: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub rows: Vec<BenchRow>,
    pub bsas_slope: f64,
    pub radial_slope: f64,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..points.len() {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    num / den
}

/// Repeat a measurement, scaling inner iterations up until a single
/// measurement is long enough to trust, and keep the best per-iteration time.
fn time_min<T>(reps: u32, mut f: impl FnMut() -> T) -> f64 {
    let mut iters = 1u32;
    loop {
        let t0 = Instant::now();
        for _ in 0..iters {
            std::hint::black_box(f());
        }
        if t0.elapsed().as_secs_f64() >= 4e-3 || iters >= 4096 {
            break;
        }
        iters *= 2;
    }
    let mut best = f64::INFINITY;
    for _ in 0..reps.max(1) {
        let t0 = Instant::now();
        for _ in 0..iters {
            std::hint::black_box(f());
        }
        best = best.min(t0.elapsed().as_secs_f64() / iters as f64);
    }
    best
}

/// Run the benchmark over all sizes and fit the two scaling exponents.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchOutcome> {
    if cfg.sizes.len() < 2 {
        bail!("need at least two sizes to fit a slope");
    }
    let mut rows = Vec::new();
    let mut bsas_points = Vec::new();
    let mut radial_points = Vec::new();

    // Warm up caches and CPU frequency before anything is timed.
    {
        let scene = generate_scene(&SceneParams {
            width: 120,
            height: 120,
            instances: 20,
            rays: RayConfig::new(16).expect("16 rays"),
            r_min: 3.0,
            r_max: 6.0,
            smoothness: 0.25,
            seed: cfg.seed,
        })?;
        let (dense, sets) = simulate_passes(&scene, cfg.passes, &NoiseModel::noiseless(), cfg.seed)?;
        let passes = instance_sets_to_masks(&sets, 120, 120);
        for _ in 0..5 {
            std::hint::black_box(cluster_bsas(&passes, 0.5)?);
            let mean = mean_dense(&dense)?;
            let centers = extract_centers(&mean, 0.5, 0.5, false);
            std::hint::black_box(cluster_radial(&dense, &centers, 0.5)?);
        }
    }

    for (i, &size) in cfg.sizes.iter().enumerate() {
        // Constant instance density: frame side grows with sqrt(size).
        let side = ((size as f64).sqrt().ceil() as u32) * 16 + 32;
        let scene = generate_scene(&SceneParams {
            width: side,
            height: side,
            instances: size,
            rays: RayConfig::new(16).expect("16 rays"),
            r_min: 3.0,
            r_max: 6.0,
            smoothness: 0.25,
            seed: cfg.seed.wrapping_add(i as u64),
        })?;
        let noise = NoiseModel {
            p_det: 1.0,
            sigma_radius: 0.05,
            sigma_prob: 0.0,
            heterogeneous: false,
        };
        let (dense, sets) = simulate_passes(&scene, cfg.passes, &noise, cfg.seed)?;
        let total_predictions: usize = sets.iter().map(|s| s.predictions.len()).sum();

        let passes = instance_sets_to_masks(&sets, side, side);
        let bsas_seconds = time_min(cfg.reps, || cluster_bsas(&passes, 0.5).expect("bsas"));
        rows.push(BenchRow {
            method: "bsas",
            size,
            passes: cfg.passes,
            total_predictions,
            seconds: bsas_seconds,
        });
        bsas_points.push((total_predictions as f64, bsas_seconds));

        let mean = mean_dense(&dense)?;
        let centers = extract_centers(&mean, 0.5, 0.5, false);
        let radial_seconds = time_min(cfg.reps, || {
            cluster_radial(&dense, &centers, 0.5).expect("radial")
        });
        rows.push(BenchRow {
            method: "radial",
            size,
            passes: cfg.passes,
            total_predictions,
            seconds: radial_seconds,
        });
        radial_points.push((total_predictions as f64, radial_seconds));
    }

    Ok(BenchOutcome {
        rows,
        bsas_slope: fit_loglog_slope(&bsas_points),
        radial_slope: fit_loglog_slope(&radial_points),
    })
}

/// CSV rows mirroring the timing table: `method,size,passes,total_predictions,seconds`.
pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("method,size,passes,total_predictions,seconds\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.method, r.size, r.passes, r.total_predictions, r.seconds
        ));
    }
    out
}
