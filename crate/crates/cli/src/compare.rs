//! Field-by-field comparison of two run directories.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sfpe_core::besov::besov;
use sfpe_core::io::load_records;
use sfpe_core::SfpeError;

use crate::config::ExperimentConfig;
use crate::RunError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDiff {
    pub name: String,
    pub bitwise_identical: bool,
    /// `sup_t ||a(t) - b(t)||_{C^beta}` (field files only).
    pub holder_beta: Option<f64>,
    /// `sup_t ||a(t) - b(t)||_{L^1}` (field files only).
    pub l1: Option<f64>,
    /// Largest absolute difference of raw values (raw files only).
    pub max_abs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub beta: f64,
    pub files: Vec<FileDiff>,
    pub identical: bool,
}

fn binary_names(dir: &Path) -> Result<Vec<String>, RunError> {
    let mut names: Vec<String> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".bin") || n.ends_with(".f64"))
        .collect();
    names.sort();
    Ok(names)
}

fn raw_values(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect()
}

/// Compares every binary artifact of `a` with its namesake in `b`; `beta` is
/// read from the configuration echo of `a`.
pub fn compare(a: &Path, b: &Path) -> Result<CompareReport, RunError> {
    let beta = ExperimentConfig::load(&a.join("config.toml"))?.exponents.beta;
    let names = binary_names(a)?;
    if names != binary_names(b)? {
        return Err(SfpeError::ShapeMismatch("runs hold different sets of binary artifacts".into()).into());
    }
    let mut files = Vec::with_capacity(names.len());
    for name in names {
        let (pa, pb) = (a.join(&name), b.join(&name));
        let (ba, bb) = (std::fs::read(&pa)?, std::fs::read(&pb)?);
        let identical = ba == bb;
        let diff = if name.ends_with(".bin") {
            let (ra, rb) = (load_records(&pa)?, load_records(&pb)?);
            if ra.len() != rb.len() || ra.iter().zip(&rb).any(|(x, y)| x.1 != y.1) {
                return Err(SfpeError::ShapeMismatch(format!("{name}: records at different times")).into());
            }
            let (mut holder, mut l1) = (0.0f64, 0.0f64);
            for ((fa, _), (fb, _)) in ra.iter().zip(&rb) {
                let d = fa.sub(fb)?;
                holder = holder.max(besov(&d, beta));
                l1 = l1.max(d.to_physical().l1_norm());
            }
            FileDiff {
                name,
                bitwise_identical: identical,
                holder_beta: Some(holder),
                l1: Some(l1),
                max_abs: None,
            }
        } else {
            if ba.len() != bb.len() {
                return Err(SfpeError::ShapeMismatch(format!("{name}: {} vs {} bytes", ba.len(), bb.len())).into());
            }
            let m = raw_values(&ba)
                .iter()
                .zip(raw_values(&bb))
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            FileDiff {
                name,
                bitwise_identical: identical,
                holder_beta: None,
                l1: None,
                max_abs: Some(m),
            }
        };
        files.push(diff);
    }
    let identical = files.iter().all(|f| f.bitwise_identical);
    Ok(CompareReport { beta, files, identical })
}
