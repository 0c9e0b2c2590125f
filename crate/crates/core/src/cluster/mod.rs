//! Grouping per-pass predictions into clusters, one cluster per physical
//! instance: a sequential IoU scheme over instance masks and a center-based
//! scheme over dense outputs.

use thiserror::Error;

use crate::geometry::{InstanceMask, RadialPolygon};

mod pixel;
mod radial;

pub use pixel::{cluster_bsas, cluster_bsas_naive};
pub use radial::{cluster_radial, extract_centers, mean_dense, Center, CenterSet, MeanDense, RadialClusterOutcome};

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("mask frames differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("no samples supplied")]
    NoSamples,
    #[error("center ({0}, {1}) is outside the {2}x{3} frame")]
    CenterOutOfBounds(u32, u32, u32, u32),
}

/// One member of a cluster: which pass it came from and its shape.
#[derive(Debug, Clone)]
pub struct ClusterMember {
    pub pass_id: u32,
    pub shape: MemberShape,
}

#[derive(Debug, Clone)]
pub enum MemberShape {
    Mask(InstanceMask),
    Polygon(RadialPolygon),
}

/// Predictions grouped as one physical instance.
///
/// Holds at most one member per pass, so `size() <= F`. `center` is set by
/// the center-based scheme only.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub id: usize,
    pub center: Option<(u32, u32)>,
    pub members: Vec<ClusterMember>,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn has_pass(&self, pass_id: u32) -> bool {
        self.members.iter().any(|m| m.pass_id == pass_id)
    }

    /// Member masks, when every member is a mask.
    pub fn masks(&self) -> Option<Vec<&InstanceMask>> {
        self.members
            .iter()
            .map(|m| match &m.shape {
                MemberShape::Mask(mask) => Some(mask),
                MemberShape::Polygon(_) => None,
            })
            .collect()
    }

    /// Member polygons, when every member is a polygon.
    pub fn polygons(&self) -> Option<Vec<&RadialPolygon>> {
        self.members
            .iter()
            .map(|m| match &m.shape {
                MemberShape::Polygon(p) => Some(p),
                MemberShape::Mask(_) => None,
            })
            .collect()
    }
}
