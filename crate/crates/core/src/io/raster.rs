//! Depth rasters (row-major f32 LE + JSON sidecar) and masks (row-major u8
//! 0/1). The sidecar sits next to the raster with a `.json` extension.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_bytes, read_json, write_bytes, write_json, IoError};
use crate::geometry::{CameraIntrinsics, Frame};
use crate::scene::{DepthImage, SegmentationMask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthSidecar {
    pub width: usize,
    pub height: usize,
    pub intrinsics: CameraIntrinsics,
    pub camera_pose: Frame,
}

pub fn sidecar_path(raster: &Path) -> PathBuf {
    raster.with_extension("json")
}

pub fn write_depth(path: &Path, depth: &DepthImage, intr: &CameraIntrinsics) -> Result<(), IoError> {
    let bytes: Vec<u8> = depth.depth.iter().flat_map(|d| d.to_le_bytes()).collect();
    write_bytes(path, &bytes)?;
    write_json(
        &sidecar_path(path),
        &DepthSidecar { width: depth.width, height: depth.height, intrinsics: *intr, camera_pose: depth.sensor_pose },
    )
}

pub fn read_depth(path: &Path) -> Result<(DepthImage, CameraIntrinsics), IoError> {
    let side: DepthSidecar = read_json(&sidecar_path(path))?;
    let bytes = read_bytes(path)?;
    if bytes.len() != side.width * side.height * 4 {
        return Err(IoError::Parse(format!(
            "depth raster has {} bytes, expected {}x{}x4",
            bytes.len(),
            side.width,
            side.height
        )));
    }
    let depth: Vec<f32> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    if depth.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(IoError::Parse("depth values must be finite and non-negative".into()));
    }
    side.intrinsics.validate().map_err(|e| IoError::Parse(e.to_string()))?;
    Ok((DepthImage { width: side.width, height: side.height, depth, sensor_pose: side.camera_pose }, side.intrinsics))
}

pub fn write_mask(path: &Path, mask: &SegmentationMask) -> Result<(), IoError> {
    let bytes: Vec<u8> = mask.values.iter().map(|&b| b as u8).collect();
    write_bytes(path, &bytes)
}

/// Masks carry no header; the resolution comes from the paired depth sidecar.
pub fn read_mask(path: &Path, width: usize, height: usize) -> Result<SegmentationMask, IoError> {
    let bytes = read_bytes(path)?;
    if bytes.len() != width * height {
        return Err(IoError::Parse(format!("mask has {} bytes, expected {}", bytes.len(), width * height)));
    }
    let values = bytes
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(IoError::Parse(format!("mask byte {b} is not 0/1"))),
        })
        .collect::<Result<_, _>>()?;
    Ok(SegmentationMask { width, height, values })
}
