//! Check records, CSV emission and JSON summaries.
//!
//! CSV output is fully deterministic for a fixed config and seed set; the
//! JSON summary carries the lone timestamp.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

pub const REPORT_VERSION: u32 = 1;

/// One identity or criterion check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    /// Stable identifier of the identity being checked.
    pub anchor: String,
    /// Measured discrepancy (native units of the check).
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Exact identities gate the exit code; statistical ones warn unless
    /// strict mode is on.
    pub hard: bool,
    pub detail: String,
    pub runtime_ms: u128,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!(
            "{} {:<26} [{}] measured {:.3e} vs tol {:.3e} ({} ms){}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.anchor,
            self.measured,
            self.tolerance,
            self.runtime_ms,
            if self.detail.is_empty() { String::new() } else { format!(" — {}", self.detail) },
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckReport {
    pub version: u32,
    pub timestamp_unix: u64,
    pub checks: Vec<CheckOutcome>,
    pub hard_failures: usize,
    pub stat_failures: usize,
}

impl CheckReport {
    pub fn new(checks: Vec<CheckOutcome>) -> Self {
        let hard_failures = checks.iter().filter(|c| c.hard && !c.pass).count();
        let stat_failures = checks.iter().filter(|c| !c.hard && !c.pass).count();
        CheckReport {
            version: REPORT_VERSION,
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            checks,
            hard_failures,
            stat_failures,
        }
    }

    /// 0 all green, 2 on tolerance violations (statistical ones only gate
    /// under strict mode).
    pub fn exit_code(&self, strict: bool) -> i32 {
        if self.hard_failures > 0 || (strict && self.stat_failures > 0) {
            2
        } else {
            0
        }
    }
}

/// Write a versioned CSV: a schema comment line, a header, then rows.
pub fn write_csv(
    path: &Path,
    schema: &str,
    header: &str,
    rows: impl IntoIterator<Item = String>,
) -> Result<()> {
    let mut text = String::new();
    writeln!(text, "# schema: {schema}").unwrap();
    writeln!(text, "{header}").unwrap();
    for row in rows {
        writeln!(text, "{row}").unwrap();
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Write the JSON summary (pretty-printed, stable key order via serde).
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let text = serde_json::to_string_pretty(value).context("serialize summary")?;
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Artifacts of one experiment run.
#[derive(Clone, Debug, Default, Serialize)]
pub struct RunArtifacts {
    pub files: Vec<PathBuf>,
    pub hard_failures: usize,
    pub stat_failures: usize,
}

impl RunArtifacts {
    pub fn exit_code(&self, strict: bool) -> i32 {
        if self.hard_failures > 0 || (strict && self.stat_failures > 0) {
            2
        } else {
            0
        }
    }
}
