//! File plumbing shared by the subcommands.

use std::path::Path;

use anyhow::{bail, Context, Result};

use exposome_core::{
    parse_gpx, parse_openaq_csv, parse_openaq_json, parse_strava_streams, ActivityTrack,
    IngestBatch, PhysioProfile,
};

/// Write atomically: temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let file_name = path
        .file_name()
        .with_context(|| format!("not a file path: {}", path.display()))?
        .to_string_lossy()
        .into_owned();
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    std::fs::write(&tmp, bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
    std::fs::rename(&tmp, path)
        .with_context(|| format!("cannot move report into place at {}", path.display()))?;
    Ok(())
}

/// Activity files are sniffed by content: XML means GPX, otherwise
/// Strava-style stream JSON.
pub fn load_activity(path: &Path) -> Result<ActivityTrack> {
    let bytes =
        std::fs::read(path).with_context(|| format!("cannot read activity {}", path.display()))?;
    let first = bytes.iter().find(|b| !b.is_ascii_whitespace());
    let track = match first {
        Some(b'<') => parse_gpx(&bytes)?,
        _ => parse_strava_streams(&bytes)?,
    };
    Ok(track)
}

/// Measurement files are routed on extension: `.csv` or the JSON wire shape.
pub fn load_measurements(path: &Path) -> Result<IngestBatch> {
    let bytes = std::fs::read(path)
        .with_context(|| format!("cannot read measurements {}", path.display()))?;
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let batch = if is_csv {
        parse_openaq_csv(&bytes)?
    } else {
        parse_openaq_json(&bytes)?
    };
    if batch.measurements.is_empty() {
        bail!(
            "{} contains no usable measurements ({} record(s) seen, {} dropped)",
            path.display(),
            batch.records_seen,
            batch.dropped.total()
        );
    }
    Ok(batch)
}

pub fn load_profile(path: &Path) -> Result<PhysioProfile> {
    let bytes =
        std::fs::read(path).with_context(|| format!("cannot read profile {}", path.display()))?;
    Ok(PhysioProfile::from_json(&bytes)?)
}
