//! Helpers shared by the subcommands: time parsing, thread-pool scoping and
//! the bundle manifest.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

/// Parse a point in time given either as integer epoch seconds or as
/// ISO-8601 (`2016-07-01`, `2016-07-01T12:00:00`, RFC 3339 with offset).
pub fn parse_time(s: &str) -> Result<i64> {
    let trimmed = s.trim();
    if trimmed
        .strip_prefix('-')
        .unwrap_or(trimmed)
        .bytes()
        .all(|b| b.is_ascii_digit())
        && !trimmed.is_empty()
    {
        return trimmed
            .parse::<i64>()
            .with_context(|| format!("invalid epoch seconds {trimmed:?}"));
    }
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(trimmed) {
        return Ok(dt.timestamp());
    }
    if let Ok(dt) = NaiveDateTime::parse_from_str(trimmed, "%Y-%m-%dT%H:%M:%S") {
        return Ok(dt.and_utc().timestamp());
    }
    if let Ok(dt) = NaiveDateTime::parse_from_str(trimmed, "%Y-%m-%d %H:%M:%S") {
        return Ok(dt.and_utc().timestamp());
    }
    if let Ok(d) = NaiveDate::parse_from_str(trimmed, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp());
    }
    bail!("cannot parse time {trimmed:?}: expected epoch seconds or ISO-8601")
}

/// Run `f` inside a dedicated rayon pool when a worker cap is requested.
pub fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .context("failed to build thread pool")?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// One artifact in an output bundle. Non-deterministic artifacts (timing
/// reports) are flagged so reproducibility checks can skip them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub name: String,
    pub deterministic: bool,
}

/// `manifest.json` at the root of every output bundle: the config echo, run
/// statistics and the artifact list. Contains no timestamps, so identical
/// configurations produce identical manifests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest<C, S> {
    pub tool: String,
    pub version: String,
    pub config: C,
    pub stats: S,
    pub artifacts: Vec<ArtifactEntry>,
}

pub fn write_manifest<C: Serialize, S: Serialize>(
    dir: &Path,
    manifest: &Manifest<C, S>,
) -> Result<()> {
    let path = dir.join("manifest.json");
    let body = serde_json::to_string_pretty(manifest)?;
    std::fs::write(&path, body + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Wall-clock report, written as its own (non-deterministic) artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuntimeReport {
    pub wall_ms: u64,
}

pub fn write_runtime(dir: &Path, wall_ms: u64) -> Result<()> {
    let path = dir.join("runtime.json");
    let body = serde_json::to_string_pretty(&RuntimeReport { wall_ms })?;
    std::fs::write(&path, body + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_runtime(dir: &Path) -> Option<u64> {
    let text = std::fs::read_to_string(dir.join("runtime.json")).ok()?;
    serde_json::from_str::<RuntimeReport>(&text)
        .ok()
        .map(|r| r.wall_ms)
}

pub fn ensure_dir(dir: &PathBuf) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_epoch_and_iso_forms() {
        assert_eq!(parse_time("0").unwrap(), 0);
        assert_eq!(parse_time("1467331200").unwrap(), 1_467_331_200);
        assert_eq!(parse_time("2016-07-01").unwrap(), 1_467_331_200);
        assert_eq!(parse_time("2016-07-01T00:00:00").unwrap(), 1_467_331_200);
        assert_eq!(parse_time("2016-07-01T00:00:00Z").unwrap(), 1_467_331_200);
        assert!(parse_time("not-a-time").is_err());
    }
}
