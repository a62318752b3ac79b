//! Output directory of one run: config echo, JSON reports, CSV tables and
//! binary field files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sfpe_core::io::{save_field, save_time_field};
use sfpe_core::{SpectralField, TimeField};

use crate::RunError;

#[derive(Debug, Clone)]
pub struct ArtifactDir {
    root: PathBuf,
}

impl ArtifactDir {
    pub fn create(root: &Path) -> Result<Self, RunError> {
        std::fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn text(&self, name: &str, body: &str) -> Result<(), RunError> {
        std::fs::write(self.file(name), body)?;
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<(), RunError> {
        let mut w = BufWriter::new(File::create(self.file(name))?);
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    /// One row per record; the header comes from the field names.
    pub fn csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<(), RunError> {
        let mut w = csv::Writer::from_path(self.file(name))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn field(&self, name: &str, f: &SpectralField, time: f64) -> Result<(), RunError> {
        save_field(&self.file(name), f, time)?;
        Ok(())
    }

    pub fn time_field(&self, name: &str, f: &TimeField) -> Result<(), RunError> {
        save_time_field(&self.file(name), f)?;
        Ok(())
    }

    /// Raw little-endian `f64` values.
    pub fn raw(&self, name: &str, values: &[f64]) -> Result<(), RunError> {
        let mut w = BufWriter::new(File::create(self.file(name))?);
        for v in values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }
}
