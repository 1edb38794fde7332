use std::fmt::Debug;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// `# kroninfer <version> <command> seed=<seed> <flags>`
pub fn provenance(command: &str, seed: u64, flags: &impl Debug) -> String {
    format!("# kroninfer {} {command} seed={seed} {flags:?}", env!("CARGO_PKG_VERSION"))
}

pub fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

/// Writes a text file whose first line is `header`.
pub fn write_text(path: &Path, header: &str, body: impl FnOnce(&mut dyn Write) -> Result<(), CliError>) -> Result<PathBuf, CliError> {
    let file = fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{header}")?;
    body(&mut w)?;
    w.flush()?;
    Ok(path.to_path_buf())
}

pub fn csv_row(w: &mut dyn Write, fields: &[String]) -> Result<(), CliError> {
    writeln!(w, "{}", fields.join(","))?;
    Ok(())
}
