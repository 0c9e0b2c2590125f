//! Pipeline plumbing behind the `starcert` binary: clustering and
//! calibration runs, the scaling benchmark, the pass-count sweep, and SVG
//! rendering. Kept as a library so integration tests drive the same code
//! paths as the CLI.

pub mod bench;
pub mod guard;
pub mod pipeline;
pub mod svg;
pub mod sweep;
