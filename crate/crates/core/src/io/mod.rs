//! Run documents, checkpoints, manifests and tabular export.

pub mod checkpoint;
pub mod config;
pub mod manifest;

use std::io::Write;
use std::path::Path;

use crate::error::Result;

pub use checkpoint::Checkpoint;
pub use config::{echo_config, parse_config, RunConfig};
pub use manifest::{config_digest, RunManifest};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}
