//! Result report serialization (`report.json`) and reliability CSVs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibration::{CalibrationReport, ReliabilityBin};
use crate::geometry::{InstanceMask, RadialPolygon};

use super::{read_file, write_file, FormatError};

pub const REPORT_VERSION: u32 = 1;

/// Thresholds and switches the report was produced with.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportParams {
    pub theta_iou: f64,
    pub theta_d: f64,
    pub theta_prob: f64,
    pub theta_nms: f64,
    pub exact_iou: bool,
}

/// JSON form of a star polygon.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolygonJson {
    pub cx: f64,
    pub cy: f64,
    pub radii: Vec<f64>,
}

impl From<&RadialPolygon> for PolygonJson {
    fn from(p: &RadialPolygon) -> Self {
        Self {
            cx: p.cx,
            cy: p.cy,
            radii: p.radii().to_vec(),
        }
    }
}

impl PolygonJson {
    pub fn to_polygon(&self) -> Result<RadialPolygon, crate::geometry::GeometryError> {
        RadialPolygon::new(self.cx, self.cy, self.radii.clone())
    }
}

/// Run-length encoded binary mask over its bounding window.
///
/// `counts` alternate between background and foreground runs, starting with
/// background, scanning the window row-major. Lossless.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaskRle {
    pub frame_width: u32,
    pub frame_height: u32,
    pub x0: u32,
    pub y0: u32,
    pub width: u32,
    pub height: u32,
    pub counts: Vec<u32>,
}

impl MaskRle {
    pub fn encode(mask: &InstanceMask) -> Self {
        let (fw, fh) = mask.frame();
        let (x0, y0, x1, y1) = mask.window();
        let (w, h) = (x1 - x0, y1 - y0);
        let mut counts = Vec::new();
        let mut current = false; // runs start with background
        let mut run = 0u32;
        for y in y0..y1 {
            for x in x0..x1 {
                let v = mask.get(x, y);
                if v == current {
                    run += 1;
                } else {
                    counts.push(run);
                    current = v;
                    run = 1;
                }
            }
        }
        counts.push(run);
        if mask.area() == 0 {
            counts.clear();
        }
        Self {
            frame_width: fw,
            frame_height: fh,
            x0,
            y0,
            width: w,
            height: h,
            counts,
        }
    }

    pub fn decode(&self) -> InstanceMask {
        let mut local = vec![false; self.width as usize * self.height as usize];
        let mut idx = 0usize;
        let mut value = false;
        for &run in &self.counts {
            for _ in 0..run {
                if idx < local.len() {
                    local[idx] = value;
                }
                idx += 1;
            }
            value = !value;
        }
        let (x0, y0, w) = (self.x0, self.y0, self.width);
        let (x1, y1) = (self.x0 + self.width, self.y0 + self.height);
        InstanceMask::from_pixels(self.frame_width, self.frame_height, |x, y| {
            if x < x0 || y < y0 || x >= x1 || y >= y1 {
                return false;
            }
            local[(y - y0) as usize * w as usize + (x - x0) as usize]
        })
    }
}

/// One cluster's entry in the report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterReport {
    pub id: usize,
    pub members: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<[u32; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_polygon: Option<PolygonJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_mask: Option<MaskRle>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band_inner: Option<PolygonJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band_outer: Option<PolygonJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_contours: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outer_contours: Option<Vec<Vec<[f64; 2]>>>,
    pub c_spl: f64,
    pub c_frac: f64,
    pub c_hyb: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ReportDiagnostics {
    /// Centers that no pass exceeded the probability threshold for
    /// (radial method only); they carry no cluster entry.
    #[serde(default)]
    pub empty_centers: usize,
}

/// JSON form of one reliability bin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReliabilityBinJson {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_confidence: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
}

impl From<&ReliabilityBin> for ReliabilityBinJson {
    fn from(b: &ReliabilityBin) -> Self {
        Self {
            lo: b.lo,
            hi: b.hi,
            count: b.count,
            mean_confidence: (b.count > 0).then_some(b.mean_confidence),
            accuracy: (b.count > 0).then_some(b.accuracy),
        }
    }
}

/// JSON form of one score's calibration summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationReportJson {
    pub bins: Vec<ReliabilityBinJson>,
    pub pearson_r: Option<f64>,
    pub ece: f64,
    pub mce: f64,
    pub matched: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl From<&CalibrationReport> for CalibrationReportJson {
    fn from(r: &CalibrationReport) -> Self {
        Self {
            bins: r.bins.iter().map(ReliabilityBinJson::from).collect(),
            pearson_r: r.pearson_r,
            ece: r.ece,
            mce: r.mce,
            matched: r.matched,
            false_positives: r.false_positives,
            false_negatives: r.false_negatives,
        }
    }
}

/// Calibration section of the report, one summary per certainty score.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationSection {
    pub theta_match: f64,
    pub bins: usize,
    pub scores: BTreeMap<String, CalibrationReportJson>,
}

/// Full pipeline output for one sample set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub version: u32,
    pub method: String,
    pub width: u32,
    pub height: u32,
    pub n_rays: usize,
    pub passes: u32,
    pub params: ReportParams,
    pub clusters: Vec<ClusterReport>,
    #[serde(default)]
    pub diagnostics: ReportDiagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationSection>,
}

pub fn write_report(path: &Path, report: &Report) -> Result<(), FormatError> {
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    write_file(path, text.as_bytes())
}

pub fn read_report(path: &Path) -> Result<Report, FormatError> {
    let bytes = read_file(path)?;
    serde_json::from_slice(&bytes).map_err(|e| FormatError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Reliability diagram CSV: `bin_lo,bin_hi,count,mean_confidence,accuracy`.
///
/// Empty bins keep their bounds and a zero count with blank statistics.
pub fn write_reliability_csv(path: &Path, bins: &[ReliabilityBin]) -> Result<(), FormatError> {
    let mut out = String::from("bin_lo,bin_hi,count,mean_confidence,accuracy\n");
    for b in bins {
        if b.count > 0 {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                b.lo, b.hi, b.count, b.mean_confidence, b.accuracy
            ));
        } else {
            out.push_str(&format!("{},{},0,,\n", b.lo, b.hi));
        }
    }
    write_file(path, out.as_bytes())
}
