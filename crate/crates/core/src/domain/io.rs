//! Field files.
//!
//! A field named `stem` is stored as two files: `stem.field` holds the raw
//! values as little-endian `f64` in row-major axis order, and `stem.json`
//! holds the header `{d, sizes, lengths, label}`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ScalarField, TorusDomain};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub d: usize,
    pub sizes: Vec<usize>,
    pub lengths: Vec<f64>,
    pub label: String,
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("field"), stem.with_extension("json"))
}

/// Writes `stem.field` and `stem.json`; returns the path of the binary file.
pub fn write_field(stem: &Path, field: &ScalarField, label: &str) -> Result<PathBuf> {
    let (bin, json) = paths(stem);
    let domain = field.domain();
    let header = FieldHeader {
        d: domain.dim(),
        sizes: domain.sizes().to_vec(),
        lengths: domain.lengths().to_vec(),
        label: label.to_string(),
    };
    let mut bytes = Vec::with_capacity(8 * field.len());
    for v in field.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
    let text = serde_json::to_string_pretty(&header)?;
    fs::write(&json, text).map_err(|e| Error::io(&json, e))?;
    Ok(bin)
}

/// Reads a field from its stem (either extension, or none, is accepted).
pub fn read_field(stem: &Path) -> Result<(ScalarField, FieldHeader)> {
    let (bin, json) = paths(stem);
    let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
    let header: FieldHeader = serde_json::from_str(&text)?;
    let domain = TorusDomain::new(header.d, &header.sizes, &header.lengths)?;
    let field = read_values(&bin, &domain)?;
    Ok((field, header))
}

/// Reads raw values for a known domain.
pub fn read_values(bin: &Path, domain: &Arc<TorusDomain>) -> Result<ScalarField> {
    let bytes = fs::read(bin).map_err(|e| Error::io(bin, e))?;
    if bytes.len() != 8 * domain.len() {
        return Err(Error::InvalidArgument(format!(
            "{}: expected {} bytes, found {}",
            bin.display(),
            8 * domain.len(),
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ScalarField::new(domain, values)
}

/// CSV of a 2-D slice: axes 0 and 1 vary, the remaining axes sit at `fixed`.
///
/// Columns: `i,j,x,y,value`.
pub fn write_slice_csv(path: &Path, field: &ScalarField, fixed: &[usize]) -> Result<()> {
    let domain = field.domain();
    if fixed.len() + 2 != domain.dim() {
        return Err(Error::InvalidArgument(format!(
            "slice of a {}-d field needs {} fixed indices",
            domain.dim(),
            domain.dim() - 2
        )));
    }
    let mut out = String::from("i,j,x,y,value\n");
    let mut multi = vec![0usize; domain.dim()];
    multi[2..].copy_from_slice(fixed);
    for i in 0..domain.sizes()[0] {
        for j in 0..domain.sizes()[1] {
            multi[0] = i;
            multi[1] = j;
            let v = field.values()[domain.flat_index(&multi)];
            out.push_str(&format!(
                "{i},{j},{:.17e},{:.17e},{:.17e}\n",
                i as f64 * domain.spacing(0),
                j as f64 * domain.spacing(1),
                v
            ));
        }
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
