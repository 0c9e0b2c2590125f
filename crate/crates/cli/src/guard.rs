//! Cleanup of partially written outputs.

use std::path::{Path, PathBuf};

/// Tracks output files for a command; anything registered but not committed
/// is deleted when the guard drops, so failed runs leave no partial outputs.
pub struct OutputGuard {
    paths: Vec<PathBuf>,
    armed: bool,
}

impl OutputGuard {
    pub fn new() -> Self {
        Self {
            paths: Vec::new(),
            armed: true,
        }
    }

    pub fn register(&mut self, path: &Path) {
        self.paths.push(path.to_path_buf());
    }

    /// All outputs written successfully; keep them.
    pub fn commit(mut self) {
        self.armed = false;
    }
}

impl Default for OutputGuard {
    fn default() -> Self {
        Self::new()
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if self.armed {
            for path in &self.paths {
                let _ = std::fs::remove_file(path);
            }
        }
    }
}
