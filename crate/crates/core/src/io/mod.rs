//! File formats: PLY/OBJ meshes, depth and mask rasters, grid dumps.
//! Every multi-byte binary value is little-endian.

pub mod grid;
pub mod obj;
pub mod ply;
pub mod raster;

use std::fs;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl IoError {
    pub(crate) fn at(path: &Path, source: std::io::Error) -> Self {
        IoError::Io { path: path.display().to_string(), source }
    }
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(|e| IoError::at(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| IoError::at(dir, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| IoError::at(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_bytes(path, s.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    Ok(serde_json::from_slice(&read_bytes(path)?)?)
}

/// Reads a mesh, choosing the format by extension (`.ply` or `.obj`).
pub fn read_mesh(path: &Path) -> Result<crate::mesh::TriMesh, IoError> {
    match extension(path).as_str() {
        "ply" => ply::read_ply(path),
        "obj" => obj::read_obj(path),
        other => Err(IoError::Parse(format!("unsupported mesh extension {other:?}"))),
    }
}

pub fn write_mesh(path: &Path, mesh: &crate::mesh::TriMesh) -> Result<(), IoError> {
    match extension(path).as_str() {
        "ply" => ply::write_ply(path, mesh),
        "obj" => obj::write_obj(path, mesh),
        other => Err(IoError::Parse(format!("unsupported mesh extension {other:?}"))),
    }
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}
