use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Parser, Subcommand, ValueEnum};

use starcert::formats::{
    pass_file_names, read_labels, read_manifest, read_report, write_reliability_csv, write_report,
};
use starcert::geometry::RayConfig;
use starcert::synth::{
    generate_scene, simulate_passes, write_sample_set, NoiseModel, SceneParams,
};

use starcert_cli::bench::{bench_csv, run_bench, BenchConfig};
use starcert_cli::guard::OutputGuard;
use starcert_cli::pipeline::{calibrate_report, run_cluster, ClusterParams, Method, PixelSource};
use starcert_cli::svg::{overlay_svg, reliability_svg};
use starcert_cli::sweep::{run_sweep, sweep_csv, SweepConfig};

/// Certainty estimation for star-convex instance segmentation samples.
#[derive(Parser)]
#[command(
    name = "starcert",
    version,
    about,
    after_help = "Thread count can be capped with the RAYON_NUM_THREADS environment variable."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic sample set (dense fields, instance sets, ground truth).
    Synth(SynthArgs),
    /// Cluster a sample set and score every cluster; writes report.json.
    Cluster(ClusterArgs),
    /// Evaluate calibration of a report against ground truth; writes CSVs and SVGs.
    Calibrate(CalibrateArgs),
    /// Benchmark clustering runtime scaling and fit log-log slopes.
    Bench(BenchArgs),
    /// Calibration error versus number of forward passes, aggregated over seeds.
    SweepPasses(SweepArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Pixel,
    Radial,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Pixel => Method::Pixel,
            MethodArg::Radial => Method::Radial,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PixelSourceArg {
    Auto,
    Instances,
    Dense,
}

impl From<PixelSourceArg> for PixelSource {
    fn from(s: PixelSourceArg) -> Self {
        match s {
            PixelSourceArg::Auto => PixelSource::Auto,
            PixelSourceArg::Instances => PixelSource::Instances,
            PixelSourceArg::Dense => PixelSource::Dense,
        }
    }
}

#[derive(Parser, Debug)]
struct SynthArgs {
    /// Output directory for the sample set.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 128)]
    width: u32,
    #[arg(long, default_value_t = 128)]
    height: u32,
    /// Number of ground-truth instances in the scene.
    #[arg(long, default_value_t = 8)]
    instances: usize,
    /// Number of simulated forward passes F.
    #[arg(long, default_value_t = 20)]
    passes: u32,
    /// Radial directions per polygon (default 16).
    #[arg(long, default_value_t = 16)]
    n_rays: usize,
    #[arg(long, default_value_t = 8.0)]
    r_min: f64,
    #[arg(long, default_value_t = 16.0)]
    r_max: f64,
    /// Amplitude of the sinusoidal boundary perturbation, relative to the base radius.
    #[arg(long, default_value_t = 0.3)]
    smoothness: f64,
    /// Per-instance detection probability per pass.
    #[arg(long, default_value_t = 1.0)]
    p_det: f64,
    /// Stddev of the multiplicative per-ray radial noise.
    #[arg(long, default_value_t = 0.0)]
    sigma_radius: f64,
    /// Stddev of the additive probability-field noise.
    #[arg(long, default_value_t = 0.0)]
    sigma_prob: f64,
    /// Draw p_det per instance from U[0.3, 1.0].
    #[arg(long, action = ArgAction::SetTrue)]
    heterogeneous: bool,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Parser, Debug)]
struct ClusterArgs {
    /// Sample-set directory (containing manifest.json) or manifest path.
    #[arg(long)]
    input: PathBuf,
    /// Clustering route: pixel (mask IoU) or radial (shared centers).
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Mask-IoU admission threshold of the pixel route (default 0.5).
    #[arg(long, default_value_t = 0.5)]
    theta_iou: f64,
    /// Object-probability membership threshold of the radial route (default 0.5).
    #[arg(long, default_value_t = 0.5)]
    theta_d: f64,
    /// Candidate extraction probability threshold (default 0.5).
    #[arg(long, default_value_t = 0.5)]
    theta_prob: f64,
    /// Non-maximum suppression IoU threshold (default 0.5).
    #[arg(long, default_value_t = 0.5)]
    theta_nms: f64,
    /// Force rasterized mask IoU everywhere (the radial route otherwise
    /// scores with the fast same-center polygon IoU).
    #[arg(long, action = ArgAction::SetTrue)]
    exact_iou: bool,
    /// Instance source for the pixel route.
    #[arg(long, value_enum, default_value_t = PixelSourceArg::Auto)]
    pixel_source: PixelSourceArg,
    /// Report path (default: <input dir>/report.json).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Parser, Debug)]
struct CalibrateArgs {
    /// Sample-set directory; its manifest must reference ground truth.
    #[arg(long)]
    input: PathBuf,
    /// Report to calibrate (default: <input dir>/report.json).
    #[arg(long)]
    report: Option<PathBuf>,
    /// IoU threshold for matching predictions to ground truth (default 0.5).
    #[arg(long, default_value_t = 0.5)]
    theta_match: f64,
    /// Number of reliability bins B (default 10).
    #[arg(long, default_value_t = 10)]
    bins: usize,
    /// Output directory (default: the input directory).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Parser, Debug)]
struct BenchArgs {
    /// Instance counts to benchmark.
    #[arg(long, value_delimiter = ',', default_value = "50,100,200,400,800")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    passes: u32,
    /// Timing repetitions per measurement (minimum is kept).
    #[arg(long, default_value_t = 3)]
    reps: u32,
    #[arg(long, default_value_t = 11)]
    seed: u64,
    /// Directory for bench.csv and bench_summary.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Parser, Debug)]
struct SweepArgs {
    /// Forward-pass counts to evaluate.
    #[arg(long, value_delimiter = ',', default_value = "2,5,10,20,30,40")]
    f_values: Vec<u32>,
    /// Number of independent seeds per F.
    #[arg(long, default_value_t = 10)]
    seeds: u32,
    #[arg(long, default_value_t = 3)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = MethodArg::Pixel)]
    method: MethodArg,
    #[arg(long, default_value_t = 160)]
    width: u32,
    #[arg(long, default_value_t = 160)]
    height: u32,
    #[arg(long, default_value_t = 12)]
    instances: usize,
    #[arg(long, default_value_t = 16)]
    n_rays: usize,
    #[arg(long, default_value_t = 4.0)]
    r_min: f64,
    #[arg(long, default_value_t = 9.0)]
    r_max: f64,
    #[arg(long, default_value_t = 0.3)]
    smoothness: f64,
    #[arg(long, default_value_t = 0.7)]
    p_det: f64,
    #[arg(long, default_value_t = 0.1)]
    sigma_radius: f64,
    #[arg(long, default_value_t = 0.15)]
    sigma_prob: f64,
    /// Draw p_det per instance from U[0.3, 1.0] (pass `--heterogeneous false` to disable).
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    heterogeneous: bool,
    #[arg(long, default_value_t = 0.5)]
    theta_match: f64,
    #[arg(long, default_value_t = 10)]
    bins: usize,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

fn manifest_path(input: &Path) -> PathBuf {
    if input.is_dir() {
        input.join("manifest.json")
    } else {
        input.to_path_buf()
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let noise = NoiseModel {
        p_det: args.p_det,
        sigma_radius: args.sigma_radius,
        sigma_prob: args.sigma_prob,
        heterogeneous: args.heterogeneous,
    };
    noise.validate()?;
    let rays = RayConfig::new(args.n_rays).context("invalid ray count")?;
    let scene = generate_scene(&SceneParams {
        width: args.width,
        height: args.height,
        instances: args.instances,
        rays,
        r_min: args.r_min,
        r_max: args.r_max,
        smoothness: args.smoothness,
        seed: args.seed,
    })?;
    let (dense, sets) = simulate_passes(&scene, args.passes, &noise, args.seed)?;

    let mut guard = OutputGuard::new();
    for pass_no in 1..=args.passes {
        let (probs, radial, csv) = pass_file_names(pass_no);
        for name in [probs, radial, csv] {
            guard.register(&args.out.join(name));
        }
    }
    guard.register(&args.out.join("gt.labels.bin"));
    guard.register(&args.out.join("manifest.json"));
    let manifest = write_sample_set(&args.out, &scene, &dense, &sets, args.n_rays)?;
    guard.commit();
    println!(
        "wrote {} passes over {} instances ({}x{}, {} rays) to {}",
        manifest.passes,
        scene.polygons.len(),
        manifest.width,
        manifest.height,
        manifest.n_rays,
        args.out.display()
    );
    Ok(())
}

fn cmd_cluster(args: ClusterArgs) -> Result<()> {
    let mpath = manifest_path(&args.input);
    let manifest = read_manifest(&mpath)?;
    let mut params = ClusterParams::new(args.method.into());
    params.theta_iou = args.theta_iou;
    params.theta_d = args.theta_d;
    params.theta_prob = args.theta_prob;
    params.theta_nms = args.theta_nms;
    params.exact_iou = args.exact_iou;
    params.pixel_source = args.pixel_source.into();
    let report = run_cluster(&manifest, &params)?;

    let out = args.out.unwrap_or_else(|| {
        mpath
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join("report.json")
    });
    let mut guard = OutputGuard::new();
    guard.register(&out);
    write_report(&out, &report)?;
    guard.commit();
    let mean_hyb = if report.clusters.is_empty() {
        0.0
    } else {
        report.clusters.iter().map(|c| c.c_hyb).sum::<f64>() / report.clusters.len() as f64
    };
    println!(
        "method={} clusters={} empty_centers={} mean_c_hyb={:.4} -> {}",
        report.method,
        report.clusters.len(),
        report.diagnostics.empty_centers,
        mean_hyb,
        out.display()
    );
    Ok(())
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<()> {
    let mpath = manifest_path(&args.input);
    let manifest = read_manifest(&mpath)?;
    let gt_name = manifest
        .ground_truth
        .as_ref()
        .context("manifest has no ground truth reference")?;
    let gt = read_labels(&manifest.resolve(gt_name), manifest.width, manifest.height)?;

    let report_path = args.report.unwrap_or_else(|| {
        mpath
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join("report.json")
    });
    let mut report = read_report(&report_path)?;
    let summaries = calibrate_report(&mut report, &gt, args.theta_match, args.bins)?;

    let out_dir = args
        .out_dir
        .unwrap_or_else(|| mpath.parent().unwrap_or_else(|| Path::new(".")).to_path_buf());
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;

    let mut guard = OutputGuard::new();
    for (name, summary) in &summaries {
        let csv_path = out_dir.join(format!("reliability_{name}.csv"));
        guard.register(&csv_path);
        write_reliability_csv(&csv_path, &summary.bins)?;
        let svg_path = out_dir.join(format!("reliability_{name}.svg"));
        guard.register(&svg_path);
        std::fs::write(&svg_path, reliability_svg(name, summary))
            .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", svg_path.display()))?;
    }
    let overlay_path = out_dir.join("overlay.svg");
    guard.register(&overlay_path);
    std::fs::write(&overlay_path, overlay_svg(&report))
        .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", overlay_path.display()))?;
    let report_out = out_dir.join("report.json");
    guard.register(&report_out);
    write_report(&report_out, &report)?;
    guard.commit();

    for (name, summary) in &summaries {
        let r = summary
            .pearson_r
            .map(|r| format!("{r:.4}"))
            .unwrap_or_else(|| "n/a".into());
        println!(
            "{name}: R={r} ECE={:.4} MCE={:.4} (tp={} fp={} fn={})",
            summary.ece,
            summary.mce,
            summary.matched,
            summary.false_positives,
            summary.false_negatives
        );
    }
    println!("wrote calibration outputs to {}", out_dir.display());
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    if args.sizes.len() < 2 {
        bail!("--sizes needs at least two entries");
    }
    let outcome = run_bench(&BenchConfig {
        sizes: args.sizes,
        passes: args.passes,
        seed: args.seed,
        reps: args.reps,
    })?;
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    let mut guard = OutputGuard::new();
    let csv_path = args.out_dir.join("bench.csv");
    guard.register(&csv_path);
    std::fs::write(&csv_path, bench_csv(&outcome.rows))?;
    let summary_path = args.out_dir.join("bench_summary.json");
    guard.register(&summary_path);
    let summary = serde_json::json!({
        "bsas_slope": outcome.bsas_slope,
        "radial_slope": outcome.radial_slope,
    });
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    guard.commit();
    println!(
        "fitted log-log slopes: bsas={:.3} radial={:.3} -> {}",
        outcome.bsas_slope,
        outcome.radial_slope,
        csv_path.display()
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let cfg = SweepConfig {
        f_values: args.f_values,
        seeds: args.seeds,
        base_seed: args.seed,
        method: args.method.into(),
        width: args.width,
        height: args.height,
        instances: args.instances,
        n_rays: args.n_rays,
        r_min: args.r_min,
        r_max: args.r_max,
        smoothness: args.smoothness,
        noise: NoiseModel {
            p_det: args.p_det,
            sigma_radius: args.sigma_radius,
            sigma_prob: args.sigma_prob,
            heterogeneous: args.heterogeneous,
        },
        theta_match: args.theta_match,
        bins: args.bins,
    };
    cfg.noise.validate()?;
    let outcome = run_sweep(&cfg)?;
    let mut guard = OutputGuard::new();
    guard.register(&args.out);
    std::fs::write(&args.out, sweep_csv(&outcome.summary))?;
    guard.commit();
    for row in outcome.summary.iter().filter(|r| r.metric == "ece") {
        println!("F={:>3}: ECE {:.4} +- {:.4}", row.f, row.mean, row.stddev);
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Synth(args) => cmd_synth(args),
        Command::Cluster(args) => cmd_cluster(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Bench(args) => cmd_bench(args),
        Command::SweepPasses(args) => cmd_sweep(args),
    }
}
