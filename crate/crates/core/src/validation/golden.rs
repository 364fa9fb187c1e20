//! Golden files: expected outputs recorded once from a documented oracle
//! and compared byte for byte afterwards.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Set to `1` to rewrite golden files instead of comparing against them.
pub const BLESS_ENV: &str = "EDITBENCH_BLESS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenFixture {
    pub fixture_id: String,
    /// How the inputs were produced (seed, generator, settings).
    pub inputs: serde_json::Value,
    pub expected: serde_json::Value,
    /// Which code path or oracle produced `expected`.
    pub provenance: String,
}

impl GoldenFixture {
    pub fn to_text(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::invalid(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GoldenCheck {
    Matches,
    Blessed,
    /// First differing line (1-based) with both versions.
    Differs { line: usize, expected: String, actual: String },
    Missing,
}

pub fn bless_requested() -> bool {
    std::env::var(BLESS_ENV).is_ok_and(|v| v == "1")
}

/// Compares `fixture` with the file at `path`, or rewrites the file when
/// blessing is requested.
pub fn check_golden(path: &Path, fixture: &GoldenFixture) -> Result<GoldenCheck> {
    let actual = fixture.to_text()?;
    if bless_requested() {
        if let Some(p) = path.parent() {
            std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))?;
        }
        std::fs::write(path, &actual).map_err(|e| Error::io(path, e))?;
        return Ok(GoldenCheck::Blessed);
    }
    let Ok(expected) = std::fs::read_to_string(path) else {
        return Ok(GoldenCheck::Missing);
    };
    if expected == actual {
        return Ok(GoldenCheck::Matches);
    }
    let mut e = expected.lines();
    let mut a = actual.lines();
    let mut line = 1;
    loop {
        match (e.next(), a.next()) {
            (Some(x), Some(y)) if x == y => line += 1,
            (x, y) => {
                return Ok(GoldenCheck::Differs {
                    line,
                    expected: x.unwrap_or("<eof>").to_string(),
                    actual: y.unwrap_or("<eof>").to_string(),
                })
            }
        }
    }
}
