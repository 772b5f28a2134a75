//! Grid dumps: one line of compact JSON header, a `\n`, then N³ raw f32 LE
//! values (x fastest). TSDF dumps append N³ weight bytes (1 = Observed).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_bytes, write_bytes, IoError};
use crate::geometry::Vec3;
use crate::volumetric::{GridSpec, OccupancyGrid, TsdfVolume, Weight};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Tsdf,
    Occupancy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub resolution: usize,
    pub origin: Vec3,
    pub voxel_size: f64,
    pub truncation: f64,
    pub kind: GridKind,
}

impl GridHeader {
    fn spec(&self) -> GridSpec {
        GridSpec { resolution: self.resolution, origin: self.origin, voxel_size: self.voxel_size, truncation: self.truncation }
    }
}

fn encode(spec: &GridSpec, kind: GridKind, values: &[f32], weights: Option<&[Weight]>) -> Result<Vec<u8>, IoError> {
    let header = GridHeader {
        resolution: spec.resolution,
        origin: spec.origin,
        voxel_size: spec.voxel_size,
        truncation: spec.truncation,
        kind,
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    out.reserve(values.len() * 5);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(w) = weights {
        out.extend(w.iter().map(|w| (*w == Weight::Observed) as u8));
    }
    Ok(out)
}

fn decode(bytes: &[u8]) -> Result<(GridHeader, Vec<f32>, &[u8]), IoError> {
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| IoError::Parse("grid header not terminated".into()))?;
    let header: GridHeader = serde_json::from_slice(&bytes[..nl])?;
    header.spec().validate().map_err(|e| IoError::Parse(e.to_string()))?;
    let n = header.resolution.pow(3);
    let body = &bytes[nl + 1..];
    if body.len() < n * 4 {
        return Err(IoError::Parse(format!("grid payload has {} bytes, expected at least {}", body.len(), n * 4)));
    }
    let values = body[..n * 4].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((header, values, &body[n * 4..]))
}

pub fn write_occupancy(path: &Path, grid: &OccupancyGrid) -> Result<(), IoError> {
    write_bytes(path, &encode(&grid.spec, GridKind::Occupancy, &grid.values, None)?)
}

pub fn write_tsdf(path: &Path, tsdf: &TsdfVolume) -> Result<(), IoError> {
    write_bytes(path, &encode(&tsdf.spec, GridKind::Tsdf, &tsdf.values, Some(&tsdf.weights))?)
}

pub fn read_occupancy(path: &Path) -> Result<OccupancyGrid, IoError> {
    let bytes = read_bytes(path)?;
    let (header, values, rest) = decode(&bytes)?;
    if header.kind != GridKind::Occupancy || !rest.is_empty() {
        return Err(IoError::Parse("not an occupancy grid dump".into()));
    }
    OccupancyGrid::new(header.spec(), values).map_err(|e| IoError::Parse(e.to_string()))
}

pub fn read_tsdf(path: &Path) -> Result<TsdfVolume, IoError> {
    let bytes = read_bytes(path)?;
    let (header, values, rest) = decode(&bytes)?;
    if header.kind != GridKind::Tsdf || rest.len() != values.len() {
        return Err(IoError::Parse("not a TSDF grid dump".into()));
    }
    let weights = rest
        .iter()
        .map(|&b| match b {
            0 => Ok(Weight::Unobserved),
            1 => Ok(Weight::Observed),
            _ => Err(IoError::Parse(format!("bad weight byte {b}"))),
        })
        .collect::<Result<_, _>>()?;
    TsdfVolume::new(header.spec(), values, weights).map_err(|e| IoError::Parse(e.to_string()))
}
