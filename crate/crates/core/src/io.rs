//! Small CSV helpers. Numeric fields only, so no quoting is needed; floats
//! are written with `Display`, which is the shortest round-trip form.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn create_csv(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(BufWriter::new(f))
}

pub(crate) fn write_row(w: &mut impl Write, path: &Path, row: std::fmt::Arguments<'_>) -> Result<()> {
    w.write_fmt(row)
        .and_then(|_| w.write_all(b"\n"))
        .map_err(|e| Error::io(path, e))
}
