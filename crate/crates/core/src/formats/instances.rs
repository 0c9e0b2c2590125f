//! Instance-set ingestion: polygon CSVs and label masks.

use std::path::Path;

use crate::geometry::{InstanceMask, LabelMask, RadialPolygon};

use super::{read_file, write_file, FormatError, Manifest};

/// A single predicted instance, either parameterized or pixel-wise.
#[derive(Debug, Clone)]
pub enum Prediction {
    Polygon(RadialPolygon),
    Mask(InstanceMask),
}

/// All predictions from one forward pass, in file order.
#[derive(Debug, Clone)]
pub struct PredictionSet {
    pub pass_id: u32,
    pub predictions: Vec<Prediction>,
}

/// Parse a polygon CSV (`pass,cx,cy,r0,...,r{n-1}`).
///
/// Returns `(pass, polygon)` rows in file order. Rows must carry exactly
/// `n_rays` radii, all positive.
pub fn read_polygons_csv(path: &Path, n_rays: usize) -> Result<Vec<(u32, RadialPolygon)>, FormatError> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|e| FormatError::Csv {
        path: path.to_path_buf(),
        line: 0,
        message: format!("not UTF-8: {e}"),
    })?;
    let mut rows = Vec::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end().starts_with("pass,cx,cy,r0") => {}
        Some((_, header)) => {
            return Err(FormatError::Csv {
                path: path.to_path_buf(),
                line: 1,
                message: format!("unexpected header: {header}"),
            })
        }
        None => {
            return Err(FormatError::Csv {
                path: path.to_path_buf(),
                line: 1,
                message: "empty file".into(),
            })
        }
    }
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 + n_rays {
            return Err(FormatError::Csv {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("expected {} fields, found {}", 3 + n_rays, fields.len()),
            });
        }
        let parse_f64 = |s: &str, what: &str| -> Result<f64, FormatError> {
            s.trim().parse::<f64>().map_err(|_| FormatError::Csv {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("cannot parse {what}: {s:?}"),
            })
        };
        let pass: u32 = fields[0].trim().parse().map_err(|_| FormatError::Csv {
            path: path.to_path_buf(),
            line: line_no,
            message: format!("cannot parse pass id: {:?}", fields[0]),
        })?;
        let cx = parse_f64(fields[1], "cx")?;
        let cy = parse_f64(fields[2], "cy")?;
        let mut radii = Vec::with_capacity(n_rays);
        for (i, f) in fields[3..].iter().enumerate() {
            radii.push(parse_f64(f, &format!("r{i}"))?);
        }
        let poly = RadialPolygon::new(cx, cy, radii).map_err(|e| FormatError::Csv {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        rows.push((pass, poly));
    }
    Ok(rows)
}

/// Write a polygon CSV with the standard header.
pub fn write_polygons_csv(
    path: &Path,
    n_rays: usize,
    rows: &[(u32, RadialPolygon)],
) -> Result<(), FormatError> {
    let mut out = String::from("pass,cx,cy");
    for i in 0..n_rays {
        out.push_str(&format!(",r{i}"));
    }
    out.push('\n');
    for (pass, poly) in rows {
        out.push_str(&format!("{},{},{}", pass, poly.cx, poly.cy));
        for r in poly.radii() {
            out.push_str(&format!(",{r}"));
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

/// Read a raw little-endian u16 label mask.
pub fn read_labels(path: &Path, width: u32, height: u32) -> Result<LabelMask, FormatError> {
    let bytes = read_file(path)?;
    let expected = width as usize * height as usize * 2;
    if bytes.len() != expected {
        return Err(FormatError::SizeMismatch {
            path: path.to_path_buf(),
            expected: expected as u64,
            actual: bytes.len() as u64,
        });
    }
    let labels: Vec<u16> = bytes
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    Ok(LabelMask::from_raw(width, height, labels))
}

/// Write a raw little-endian u16 label mask.
pub fn write_labels(path: &Path, mask: &LabelMask) -> Result<(), FormatError> {
    let mut bytes = Vec::with_capacity(mask.raw().len() * 2);
    for &l in mask.raw() {
        bytes.extend_from_slice(&l.to_le_bytes());
    }
    write_file(path, &bytes)
}

/// Load all per-pass instance sets in manifest order.
///
/// Each file entry is owned by one pass: CSV rows must declare that pass id,
/// and label-mask files are split per positive label into masks.
pub fn load_instances(manifest: &Manifest) -> Result<Vec<PredictionSet>, FormatError> {
    let mut sets = Vec::with_capacity(manifest.files.len());
    for (i, entry) in manifest.files.iter().enumerate() {
        let pass_id = i as u32 + 1;
        let name = entry.instances.as_ref().ok_or_else(|| FormatError::InvalidManifest {
            message: format!("pass {pass_id} has no instance file"),
        })?;
        let path = manifest.resolve(name);
        let predictions = if name.ends_with(".labels.bin") {
            let labels = read_labels(&path, manifest.width, manifest.height)?;
            labels
                .split_instances()
                .into_iter()
                .map(|(_, mask)| Prediction::Mask(mask))
                .collect()
        } else {
            let rows = read_polygons_csv(&path, manifest.n_rays)?;
            let mut preds = Vec::with_capacity(rows.len());
            for (pass, poly) in rows {
                if pass != pass_id {
                    return Err(FormatError::Csv {
                        path: path.clone(),
                        line: 0,
                        message: format!(
                            "row declares pass {pass} but the file is listed for pass {pass_id}"
                        ),
                    });
                }
                preds.push(Prediction::Polygon(poly));
            }
            preds
        };
        sets.push(PredictionSet {
            pass_id,
            predictions,
        });
    }
    Ok(sets)
}
