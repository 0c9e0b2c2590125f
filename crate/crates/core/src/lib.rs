//! Certainty estimation for star-convex instance segmentation.
//!
//! Multiple stochastic forward passes of a star-convex segmentation model
//! (dropout samples or ensemble members) predict slightly different instance
//! sets. This crate ingests those samples, groups predictions that describe
//! the same physical instance, scores each group with spatial, fractional,
//! and hybrid certainty, and evaluates how well those scores are calibrated
//! against ground truth.
//!
//! Two clustering routes are provided:
//!
//! * [`cluster::cluster_bsas`] — sequential mask-IoU clustering of per-pass
//!   instance masks (cost grows with predictions x clusters);
//! * [`cluster::cluster_radial`] — shared centers extracted once from the
//!   mean dense output, then O(F x M) probability-threshold assignment.
//!
//! A seeded synthetic sampler ([`synth`]) makes the full pipeline testable
//! without any trained network.

pub mod calibration;
pub mod certainty;
pub mod cluster;
pub mod formats;
pub mod geometry;
pub mod nms;
pub mod synth;

pub use calibration::{CalibrationReport, ReliabilityBin};
pub use certainty::CertaintyScores;
pub use cluster::Cluster;
pub use formats::{DenseOutput, Manifest, Prediction, PredictionSet, Report};
pub use geometry::{BitMask, InstanceMask, LabelMask, RadialPolygon, RayConfig};
