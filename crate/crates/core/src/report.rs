//! Output helpers shared by the table, trace and histogram writers.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

/// CSV writer with `\n` record terminators regardless of platform.
pub fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// Creates `dir` (and parents) and returns the path of `name` inside it.
pub fn output_path(dir: impl AsRef<Path>, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir.as_ref())?;
    Ok(dir.as_ref().join(name))
}

/// Buffered file writer; pair with [`csv_writer`] or the `write_*` methods.
pub fn create(path: impl AsRef<Path>) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Pretty JSON followed by a single newline.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Writes `emit`'s output into `dir/name` and returns the full path.
pub fn emit<F>(dir: impl AsRef<Path>, name: &str, emit: F) -> Result<PathBuf>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let path = output_path(dir, name)?;
    let mut w = create(&path)?;
    emit(&mut w)?;
    w.flush()?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_lf() {
        let mut buf = Vec::new();
        {
            let mut w = csv_writer(&mut buf);
            w.write_record(["a", "b"]).unwrap();
            w.write_record(["1", "2,3"]).unwrap();
            w.flush().unwrap();
        }
        assert_eq!(buf, b"a,b\n1,\"2,3\"\n");
    }

    #[test]
    fn emit_creates_directories() {
        let dir = tempfile::tempdir().unwrap();
        let nested = dir.path().join("x/y");
        let path = emit(&nested, "t.txt", |w| Ok(w.write_all(b"hi\n")?)).unwrap();
        assert_eq!(fs::read_to_string(path).unwrap(), "hi\n");
    }
}
