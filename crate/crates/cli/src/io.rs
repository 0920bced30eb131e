use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use dialcheck::dialog::{read_records, to_jsonl};
use dialcheck::Record;
use tempfile::NamedTempFile;

use crate::CliError;

pub fn read<T: Record>(path: &Path) -> Result<Vec<T>, CliError> {
    let file = File::open(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    read_records(BufReader::new(file))
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let fail = |e: std::io::Error| CliError::data(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

pub fn write<T: Record>(path: &Path, records: &[T]) -> Result<(), CliError> {
    write_atomic(path, &to_jsonl(records))
}
