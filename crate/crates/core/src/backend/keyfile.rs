// SPDX-License-Identifier: Apache-2.0

//! Key file and manifest persistence.
//!
//! Key file:
//!
//! ```text
//! ASSURE-KEY v1
//! width 5
//! 0A
//! ```
//!
//! The third line holds `ceil(width/4)` hex digits, most significant first,
//! and is empty for a zero-width key. The manifest is JSON lines, one
//! [`ManifestEntry`] per locked element in key order.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::BackendError;
use crate::lock::{LockingKey, ManifestEntry};

pub const KEY_MAGIC: &str = "ASSURE-KEY v1";

pub fn key_text(key: &LockingKey) -> String {
    format!("{KEY_MAGIC}\nwidth {}\n{}\n", key.width(), key.to_hex())
}

pub fn manifest_text(key: &LockingKey) -> String {
    key.manifest.iter().map(|e| serde_json::to_string(e).expect("manifest entry serializes") + "\n").collect()
}

fn format_error(msg: impl Into<String>) -> BackendError {
    BackendError::Format(msg.into())
}

pub fn parse_key(text: &str) -> Result<Vec<bool>, BackendError> {
    let mut lines = text.lines();
    if lines.next().map(str::trim_end) != Some(KEY_MAGIC) {
        return Err(format_error(format!("missing `{KEY_MAGIC}` header")));
    }
    let width: usize = lines
        .next()
        .and_then(|l| l.trim().strip_prefix("width "))
        .and_then(|w| w.trim().parse().ok())
        .ok_or_else(|| format_error("missing or malformed `width` line"))?;
    let hex = lines.next().unwrap_or("").trim();
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(format_error("trailing content after key digits"));
    }
    LockingKey::bits_from_hex(hex, width).ok_or_else(|| {
        format_error(format!(
            "key digits `{hex}` inconsistent with width {width} (expected {} hex digits)",
            width.div_ceil(4)
        ))
    })
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>, BackendError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format_error(format!("manifest line {}: {e}", i + 1))))
        .collect()
}

/// Key plus optional manifest; the manifest must partition the key.
pub fn parse_locking_key(key: &str, manifest: Option<&str>) -> Result<LockingKey, BackendError> {
    let k =
        LockingKey { bits: parse_key(key)?, manifest: manifest.map(parse_manifest).transpose()?.unwrap_or_default() };
    if manifest.is_some() && !k.manifest_is_partition() {
        return Err(format_error("manifest ranges do not partition the key"));
    }
    Ok(k)
}

/// Write `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), BackendError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| BackendError::Io(e.error))?;
    Ok(())
}

pub fn write_key(key: &LockingKey, key_path: &Path, manifest_path: &Path) -> Result<(), BackendError> {
    write_atomic(key_path, key_text(key).as_bytes())?;
    write_atomic(manifest_path, manifest_text(key).as_bytes())
}

pub fn read_key(key_path: &Path, manifest_path: Option<&Path>) -> Result<LockingKey, BackendError> {
    let key = fs::read_to_string(key_path)?;
    let manifest = manifest_path.map(fs::read_to_string).transpose()?;
    parse_locking_key(&key, manifest.as_deref())
}
