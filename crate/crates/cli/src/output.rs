//! Where outputs go and how they get there.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

/// Default output directory when no explicit path is given.
pub const OUTPUT_DIR_ENV: &str = "CONFIGLAB_OUTPUT_DIR";

/// The directory named by the environment, if any.
pub fn default_dir() -> Option<PathBuf> {
    std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()).map(PathBuf::from)
}

/// Explicit path if given, else `default_name` inside [`default_dir`], else
/// `None` (standard output).
pub fn resolve(explicit: Option<&Path>, default_name: &str) -> Option<PathBuf> {
    match explicit {
        Some(p) => Some(p.to_path_buf()),
        None => default_dir().map(|d| d.join(default_name)),
    }
}

/// Fails early, before any expensive work, when the file could never be written.
pub fn ensure_parent(path: &Path) -> Result<()> {
    let parent = parent_dir(path);
    if parent.is_dir() {
        Ok(())
    } else {
        Err(CliError::BadFile {
            path: path.to_path_buf(),
            message: format!("parent directory {} does not exist", parent.display()),
        })
    }
}

fn parent_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// Writes to a sibling temporary file and renames it into place, so readers
/// never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    ensure_parent(path)?;
    let name = path
        .file_name()
        .ok_or_else(|| CliError::BadFile {
            path: path.to_path_buf(),
            message: "not a file path".into(),
        })?
        .to_string_lossy();
    let tmp = parent_dir(path).join(format!(".{name}.{}.tmp", std::process::id()));
    let written = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    written.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::io(path, e)
    })
}

/// Writes to `path` atomically, or to standard output when there is none.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, contents),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        write_atomic(&p, "one").unwrap();
        write_atomic(&p, "two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn missing_parent_is_reported_with_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nope").join("r.json");
        let err = write_atomic(&p, "x").unwrap_err().to_string();
        assert!(err.contains("nope"), "{err}");
        assert!(err.contains("does not exist"), "{err}");
    }
}
