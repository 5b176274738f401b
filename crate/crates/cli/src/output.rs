use std::io::Write;
use std::path::Path;

use tempfile::NamedTempFile;

use crate::error::CliError;

/// Writes `bytes` to `path` through a temp file in the same directory, so
/// readers never see a partial file; stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    let Some(path) = path else {
        let mut out = std::io::stdout().lock();
        out.write_all(bytes)?;
        return Ok(out.flush()?);
    };
    let dir = parent_dir(path);
    let mut tmp = NamedTempFile::new_in(dir)
        .map_err(|e| CliError::input(format!("cannot write in {}: {e}", dir.display())))?;
    tmp.write_all(bytes)?;
    // temp files are created owner-only; outputs should look like any other file
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| CliError::input(format!("cannot write {}: {}", path.display(), e.error)))?;
    Ok(())
}

fn parent_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// Fails early when `path` could not be written later.
pub fn check_writable(path: Option<&Path>) -> Result<(), CliError> {
    if let Some(path) = path {
        if !parent_dir(path).is_dir() {
            return Err(CliError::input(format!("output directory for {} does not exist", path.display())));
        }
        if path.is_dir() {
            return Err(CliError::input(format!("{} is a directory", path.display())));
        }
    }
    Ok(())
}

pub fn check_readable(path: &Path) -> Result<(), CliError> {
    if !path.is_file() {
        return Err(CliError::input(format!("{} does not exist or is not a file", path.display())));
    }
    Ok(())
}

pub fn to_json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut text = serde_json::to_vec_pretty(value).expect("reports always serialize");
    text.push(b'\n');
    text
}
