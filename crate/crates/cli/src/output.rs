use std::io::{self, Write};
use std::path::Path;

use tempfile::NamedTempFile;

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed run leaves no partial file behind.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)?;
    {
        let mut w = io::BufWriter::new(tmp.as_file_mut());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Seventeen significant digits.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}
