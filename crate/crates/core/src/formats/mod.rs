//! On-disk formats: manifest, dense sample arrays, instance sets, reports.
//!
//! All binary payloads are raw little-endian, row-major, chosen for
//! bit-exactness and trivial cross-language parsing:
//!
//! * `*.probs.bin`  — `width * height` f32 object probabilities
//! * `*.radial.bin` — `width * height * n_rays` f32 radial distances, ray
//!   index innermost (offset `(y * width + x) * n + i`)
//! * `*.labels.bin` — `width * height` u16 instance labels, 0 = background
//! * `*.polygons.csv` — header `pass,cx,cy,r0,...,r{n-1}`, decimal floats
//! * `manifest.json` — UTF-8 JSON, schema below
//!
//! A manifest lists one file entry per forward pass. In `dense` mode every
//! entry must reference a probability and a radial file (an instance file is
//! optional extra); in `instances` mode every entry must reference an
//! instance file (CSV polygons or a label mask).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::GeometryError;

mod dense;
mod instances;
mod report;

pub use dense::{load_dense, pass_file_names, write_dense, DenseOutput};
pub use instances::{
    load_instances, read_labels, read_polygons_csv, write_labels, write_polygons_csv, Prediction,
    PredictionSet,
};
pub use report::{
    read_report, write_reliability_csv, write_report, CalibrationReportJson, CalibrationSection,
    ClusterReport, MaskRle, PolygonJson, ReliabilityBinJson, Report, ReportDiagnostics,
    ReportParams, REPORT_VERSION,
};

pub const MANIFEST_VERSION: u32 = 1;

/// Errors from parsing, validating, and writing the on-disk formats.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("referenced file does not exist: {path}")]
    MissingFile { path: PathBuf },
    #[error("malformed JSON in {path}: {message}")]
    Json { path: PathBuf, message: String },
    #[error("unsupported manifest version {found} (expected {MANIFEST_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("size mismatch for {path}: expected {expected} bytes, found {actual}")]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },
    #[error("invalid manifest: {message}")]
    InvalidManifest { message: String },
    #[error("invalid sample in {path}: {detail}")]
    InvalidValue { path: PathBuf, detail: String },
    #[error("{path}:{line}: {message}")]
    Csv {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Payload kind of a sample set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Dense,
    Instances,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Dense => write!(f, "dense"),
            Mode::Instances => write!(f, "instances"),
        }
    }
}

/// File references for one forward pass.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PassFiles {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probs: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radial: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instances: Option<String>,
}

/// Validated description of a sample-set directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub mode: Mode,
    pub width: u32,
    pub height: u32,
    pub n_rays: usize,
    pub passes: u32,
    pub files: Vec<PassFiles>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<String>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl Manifest {
    pub fn new(
        mode: Mode,
        width: u32,
        height: u32,
        n_rays: usize,
        files: Vec<PassFiles>,
        ground_truth: Option<String>,
    ) -> Self {
        Self {
            version: MANIFEST_VERSION,
            mode,
            width,
            height,
            n_rays,
            passes: files.len() as u32,
            files,
            ground_truth,
            base_dir: PathBuf::new(),
        }
    }

    /// Resolve a file reference against the manifest's directory.
    pub fn resolve(&self, name: &str) -> PathBuf {
        self.base_dir.join(name)
    }

    /// Attach the directory file references resolve against (set
    /// automatically by `read_manifest`).
    pub fn with_base_dir(mut self, dir: &Path) -> Self {
        self.base_dir = dir.to_path_buf();
        self
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    fn validate(&self) -> Result<(), FormatError> {
        if self.version != MANIFEST_VERSION {
            return Err(FormatError::UnsupportedVersion {
                found: self.version,
            });
        }
        if self.width == 0 || self.height == 0 {
            return Err(FormatError::InvalidManifest {
                message: format!("dimensions must be positive, got {}x{}", self.width, self.height),
            });
        }
        if self.n_rays < 3 {
            return Err(FormatError::InvalidManifest {
                message: format!("n_rays must be at least 3, got {}", self.n_rays),
            });
        }
        if self.passes == 0 {
            return Err(FormatError::InvalidManifest {
                message: "passes must be at least 1".into(),
            });
        }
        if self.files.len() != self.passes as usize {
            return Err(FormatError::InvalidManifest {
                message: format!(
                    "files count {} does not equal passes {}",
                    self.files.len(),
                    self.passes
                ),
            });
        }
        for (i, entry) in self.files.iter().enumerate() {
            match self.mode {
                Mode::Dense => {
                    if entry.probs.is_none() || entry.radial.is_none() {
                        return Err(FormatError::InvalidManifest {
                            message: format!(
                                "dense mode requires probs and radial references (pass {})",
                                i + 1
                            ),
                        });
                    }
                }
                Mode::Instances => {
                    if entry.instances.is_none() {
                        return Err(FormatError::InvalidManifest {
                            message: format!(
                                "instances mode requires an instance reference (pass {})",
                                i + 1
                            ),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Check that every referenced file exists with the exact byte length
    /// implied by the dimensions.
    fn check_files(&self) -> Result<(), FormatError> {
        let px = self.width as u64 * self.height as u64;
        let probs_len = px * 4;
        let radial_len = px * self.n_rays as u64 * 4;
        let labels_len = px * 2;
        for entry in &self.files {
            if let Some(name) = &entry.probs {
                check_file_len(&self.resolve(name), probs_len)?;
            }
            if let Some(name) = &entry.radial {
                check_file_len(&self.resolve(name), radial_len)?;
            }
            if let Some(name) = &entry.instances {
                let path = self.resolve(name);
                if name.ends_with(".labels.bin") {
                    check_file_len(&path, labels_len)?;
                } else if !path.exists() {
                    return Err(FormatError::MissingFile { path });
                }
            }
        }
        if let Some(name) = &self.ground_truth {
            check_file_len(&self.resolve(name), labels_len)?;
        }
        Ok(())
    }
}

fn check_file_len(path: &Path, expected: u64) -> Result<(), FormatError> {
    let meta = fs::metadata(path).map_err(|_| FormatError::MissingFile {
        path: path.to_path_buf(),
    })?;
    if meta.len() != expected {
        return Err(FormatError::SizeMismatch {
            path: path.to_path_buf(),
            expected,
            actual: meta.len(),
        });
    }
    Ok(())
}

/// Read and fully validate a manifest, including referenced file sizes.
pub fn read_manifest(path: &Path) -> Result<Manifest, FormatError> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            FormatError::MissingFile {
                path: path.to_path_buf(),
            }
        } else {
            FormatError::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })?;
    let mut manifest: Manifest = serde_json::from_str(&text).map_err(|e| FormatError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    manifest.base_dir = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    manifest.validate()?;
    manifest.check_files()?;
    Ok(manifest)
}

/// Write a manifest as pretty JSON next to its payload files.
pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<(), FormatError> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(path, text).map_err(|e| FormatError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, FormatError> {
    fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            FormatError::MissingFile {
                path: path.to_path_buf(),
            }
        } else {
            FormatError::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    fs::write(path, bytes).map_err(|e| FormatError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}
