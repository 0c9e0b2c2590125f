//! Calibration quality as a function of the number of forward passes.
//!
//! For every (seed, F) cell a fresh scene is simulated, clustered, and
//! calibrated; the hybrid score's Pearson R, ECE, and MCE are recorded.
//! Pass substreams are keyed by pass index, so smaller F values reuse the
//! prefix of larger ones and the per-seed error trajectories are nested.

use anyhow::{Context, Result};
use rayon::prelude::*;

use starcert::geometry::RayConfig;
use starcert::synth::{generate_scene, simulate_passes, NoiseModel, SceneParams};

use crate::pipeline::{
    calibrate_report, cluster_pixel_pipeline, cluster_radial_pipeline, decode_passes,
    ClusterParams, Method,
};

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub f_values: Vec<u32>,
    pub seeds: u32,
    pub base_seed: u64,
    pub method: Method,
    pub width: u32,
    pub height: u32,
    pub instances: usize,
    pub n_rays: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub smoothness: f64,
    pub noise: NoiseModel,
    pub theta_match: f64,
    pub bins: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            f_values: vec![2, 5, 10, 20, 30, 40],
            seeds: 10,
            base_seed: 3,
            method: Method::Pixel,
            width: 160,
            height: 160,
            instances: 12,
            n_rays: 16,
            r_min: 4.0,
            r_max: 9.0,
            smoothness: 0.3,
            noise: NoiseModel {
                p_det: 0.7,
                sigma_radius: 0.1,
                sigma_prob: 0.15,
                heterogeneous: true,
            },
            theta_match: 0.5,
            bins: 10,
        }
    }
}

/// One (F, seed) measurement of the hybrid score's calibration.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub f: u32,
    pub seed_index: u32,
    pub pearson_r: Option<f64>,
    pub ece: f64,
    pub mce: f64,
}

#[derive(Debug, Clone)]
pub struct SweepSummaryRow {
    pub f: u32,
    pub metric: &'static str,
    pub mean: f64,
    pub stddev: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub cells: Vec<SweepCell>,
    pub summary: Vec<SweepSummaryRow>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Run the full sweep; cells are ordered by (seed, F) and the summary by
/// (F, metric).
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    let rays = RayConfig::new(cfg.n_rays).context("invalid ray count")?;
    let seed_cells: Vec<Vec<SweepCell>> = (0..cfg.seeds)
        .into_par_iter()
        .map(|seed_index| -> Result<Vec<SweepCell>> {
            let seed = cfg.base_seed.wrapping_add(seed_index as u64);
            let scene = generate_scene(&SceneParams {
                width: cfg.width,
                height: cfg.height,
                instances: cfg.instances,
                rays,
                r_min: cfg.r_min,
                r_max: cfg.r_max,
                smoothness: cfg.smoothness,
                seed,
            })?;
            let mut cells = Vec::with_capacity(cfg.f_values.len());
            for &f in &cfg.f_values {
                let (dense, _) = simulate_passes(&scene, f, &cfg.noise, seed)?;
                let params = ClusterParams::new(cfg.method);
                let mut report = match cfg.method {
                    Method::Radial => cluster_radial_pipeline(&dense, &params)?,
                    Method::Pixel => {
                        let passes = decode_passes(&dense, &params);
                        cluster_pixel_pipeline(&passes, cfg.width, cfg.height, cfg.n_rays, &params)?
                    }
                };
                let summaries =
                    calibrate_report(&mut report, &scene.gt_mask, cfg.theta_match, cfg.bins)?;
                let hyb = &summaries["c_hyb"];
                cells.push(SweepCell {
                    f,
                    seed_index,
                    pearson_r: hyb.pearson_r,
                    ece: hyb.ece,
                    mce: hyb.mce,
                });
            }
            Ok(cells)
        })
        .collect::<Result<_>>()?;

    let cells: Vec<SweepCell> = seed_cells.into_iter().flatten().collect();
    let mut summary = Vec::new();
    for &f in &cfg.f_values {
        let at_f: Vec<&SweepCell> = cells.iter().filter(|c| c.f == f).collect();
        let pearson: Vec<f64> = at_f.iter().filter_map(|c| c.pearson_r).collect();
        let (p_mean, p_std) = if pearson.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            mean_std(&pearson)
        };
        summary.push(SweepSummaryRow {
            f,
            metric: "pearson_r",
            mean: p_mean,
            stddev: p_std,
        });
        let ece: Vec<f64> = at_f.iter().map(|c| c.ece).collect();
        let (e_mean, e_std) = mean_std(&ece);
        summary.push(SweepSummaryRow {
            f,
            metric: "ece",
            mean: e_mean,
            stddev: e_std,
        });
        let mce: Vec<f64> = at_f.iter().map(|c| c.mce).collect();
        let (m_mean, m_std) = mean_std(&mce);
        summary.push(SweepSummaryRow {
            f,
            metric: "mce",
            mean: m_mean,
            stddev: m_std,
        });
    }
    Ok(SweepOutcome { cells, summary })
}

/// Summary CSV: `f,metric,mean,stddev`, one row per (F, metric).
pub fn sweep_csv(summary: &[SweepSummaryRow]) -> String {
    let mut out = String::from("f,metric,mean,stddev\n");
    for row in summary {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.f, row.metric, row.mean, row.stddev
        ));
    }
    out
}
