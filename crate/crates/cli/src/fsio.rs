//! File helpers: existence checks that name the offending flag, and writes
//! that land whole or not at all.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{invalid, io_error, Result};

/// Writes through a temp file in the same directory, then renames it over
/// `path`, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_error(dir))?;
    tmp.write_all(bytes).map_err(io_error(path))?;
    tmp.as_file().sync_all().map_err(io_error(path))?;
    tmp.persist(path).map_err(|e| io_error(path)(e.error))?;
    Ok(())
}

pub fn require_file(path: &Path, key: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(invalid(key, format!("{} is not a readable file", path.display())))
    }
}

pub fn require_dir(path: &Path, key: &str) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(invalid(key, format!("{} is not a directory", path.display())))
    }
}

pub fn read_text(path: &Path, key: &str) -> Result<String> {
    require_file(path, key)?;
    fs::read_to_string(path).map_err(io_error(path))
}
