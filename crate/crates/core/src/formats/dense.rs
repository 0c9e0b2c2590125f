//! Dense per-pass output: object-probability and radial-distance fields.

use crate::geometry::{RadialPolygon, MIN_RADIUS};

use super::{read_file, write_file, FormatError, Manifest, PassFiles};

/// One forward pass worth of dense fields.
///
/// `prob` holds `width * height` object probabilities in `[0, 1]`; `radial`
/// holds `width * height * n_rays` non-negative distances with the ray index
/// innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOutput {
    width: u32,
    height: u32,
    n_rays: usize,
    prob: Vec<f32>,
    radial: Vec<f32>,
}

impl DenseOutput {
    pub fn zeros(width: u32, height: u32, n_rays: usize) -> Self {
        let px = width as usize * height as usize;
        Self {
            width,
            height,
            n_rays,
            prob: vec![0.0; px],
            radial: vec![0.0; px * n_rays],
        }
    }

    pub fn from_parts(
        width: u32,
        height: u32,
        n_rays: usize,
        prob: Vec<f32>,
        radial: Vec<f32>,
    ) -> Self {
        let px = width as usize * height as usize;
        assert_eq!(prob.len(), px);
        assert_eq!(radial.len(), px * n_rays);
        Self {
            width,
            height,
            n_rays,
            prob,
            radial,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn n_rays(&self) -> usize {
        self.n_rays
    }

    pub fn prob(&self) -> &[f32] {
        &self.prob
    }

    pub fn prob_mut(&mut self) -> &mut [f32] {
        &mut self.prob
    }

    pub fn radial(&self) -> &[f32] {
        &self.radial
    }

    pub fn radial_mut(&mut self) -> &mut [f32] {
        &mut self.radial
    }

    #[inline]
    pub fn prob_at(&self, x: u32, y: u32) -> f32 {
        self.prob[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn radial_at(&self, x: u32, y: u32) -> &[f32] {
        let base = (y as usize * self.width as usize + x as usize) * self.n_rays;
        &self.radial[base..base + self.n_rays]
    }

    #[inline]
    pub fn set_prob(&mut self, x: u32, y: u32, v: f32) {
        self.prob[y as usize * self.width as usize + x as usize] = v;
    }

    #[inline]
    pub fn set_radial(&mut self, x: u32, y: u32, ray: usize, v: f32) {
        let base = (y as usize * self.width as usize + x as usize) * self.n_rays;
        self.radial[base + ray] = v;
    }

    /// Polygon carried by pixel `(x, y)`, centered on the pixel center.
    ///
    /// Radial values below [`MIN_RADIUS`] are clamped up so the polygon stays
    /// valid and always covers its own pixel center; background pixels with
    /// all-zero distances therefore yield a half-pixel speck rather than a
    /// degenerate shape.
    pub fn polygon_at(&self, x: u32, y: u32) -> RadialPolygon {
        let radii: Vec<f64> = self
            .radial_at(x, y)
            .iter()
            .map(|&r| (r as f64).max(MIN_RADIUS))
            .collect();
        RadialPolygon::new(x as f64 + 0.5, y as f64 + 0.5, radii)
            .expect("clamped radii are always valid")
    }
}

fn f32s_to_bytes(values: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn bytes_to_f32s(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

/// Write one pass's dense fields to the referenced files.
pub fn write_dense(
    manifest: &Manifest,
    entry: &PassFiles,
    dense: &DenseOutput,
) -> Result<(), FormatError> {
    let probs_name = entry.probs.as_ref().expect("dense entry has probs");
    let radial_name = entry.radial.as_ref().expect("dense entry has radial");
    write_file(&manifest.resolve(probs_name), &f32s_to_bytes(&dense.prob))?;
    write_file(&manifest.resolve(radial_name), &f32s_to_bytes(&dense.radial))?;
    Ok(())
}

fn load_dense_pass(
    manifest: &Manifest,
    entry: &PassFiles,
    pass_no: u32,
) -> Result<DenseOutput, FormatError> {
    let probs_name = entry.probs.as_ref().ok_or_else(|| FormatError::InvalidManifest {
        message: format!("pass {pass_no} has no dense probability file"),
    })?;
    let radial_name = entry.radial.as_ref().ok_or_else(|| FormatError::InvalidManifest {
        message: format!("pass {pass_no} has no dense radial file"),
    })?;
    let probs_path = manifest.resolve(probs_name);
    let radial_path = manifest.resolve(radial_name);
    let prob = bytes_to_f32s(&read_file(&probs_path)?);
    let radial = bytes_to_f32s(&read_file(&radial_path)?);

    let width = manifest.width;
    for (i, &v) in prob.iter().enumerate() {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(FormatError::InvalidValue {
                path: probs_path,
                detail: format!(
                    "probability {} at pixel ({}, {}) outside [0, 1]",
                    v,
                    i as u32 % width,
                    i as u32 / width
                ),
            });
        }
    }
    for (i, &v) in radial.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            let px = i / manifest.n_rays;
            return Err(FormatError::InvalidValue {
                path: radial_path,
                detail: format!(
                    "radial value {} at pixel ({}, {}) ray {} is not a finite non-negative number",
                    v,
                    px as u32 % width,
                    px as u32 / width,
                    i % manifest.n_rays
                ),
            });
        }
    }
    Ok(DenseOutput::from_parts(
        manifest.width,
        manifest.height,
        manifest.n_rays,
        prob,
        radial,
    ))
}

/// Load all `F` dense passes in manifest order.
pub fn load_dense(manifest: &Manifest) -> Result<Vec<DenseOutput>, FormatError> {
    manifest
        .files
        .iter()
        .enumerate()
        .map(|(i, entry)| load_dense_pass(manifest, entry, i as u32 + 1))
        .collect()
}

/// Standard file names for one pass's payload.
pub fn pass_file_names(pass_no: u32) -> (String, String, String) {
    (
        format!("pass_{pass_no:03}.probs.bin"),
        format!("pass_{pass_no:03}.radial.bin"),
        format!("pass_{pass_no:03}.polygons.csv"),
    )
}
