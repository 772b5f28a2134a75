//! Iso-surface extraction from occupancy grids.
//!
//! The field is the trilinear interpolant of the grid, zero beyond it, and
//! is sampled on a lattice spanning from one voxel center below the grid to
//! one above it, so extracted surfaces are always closed. Multi-resolution
//! extraction (MISE) only refines cells whose interpolant can reach the
//! iso-level, which makes its output identical to dense marching cubes on
//! the finest lattice.

mod tables;

use std::collections::HashMap;

use rayon::prelude::*;

use crate::geometry::Vec3;
use crate::mesh::{vertex_normals, MeshError, TriMesh};
use crate::volumetric::{vertex_confidence, OccupancyGrid, VolumeError};
use tables::TRI_TABLE;

pub const DEFAULT_ISO: f64 = 0.5;
pub const DEFAULT_INITIAL_RES: usize = 32;
pub const DEFAULT_REFINEMENT_STEPS: usize = 2;
pub const WELD_TOLERANCE: f64 = 1e-7;

/// Bourke corner offsets.
const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];
const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// The finest sampling lattice: `cells + 1` points per axis.
struct Lattice<'a> {
    occ: &'a OccupancyGrid,
    cells: usize,
    iso: f64,
}

impl Lattice<'_> {
    /// Voxel-center index coordinate of lattice index `m` along one axis.
    #[inline]
    fn coord(&self, m: usize) -> f64 {
        -1.0 + m as f64 * (self.occ.spec.resolution + 1) as f64 / self.cells as f64
    }

    #[inline]
    fn index_point(&self, m: [usize; 3]) -> Vec3 {
        Vec3::new(self.coord(m[0]), self.coord(m[1]), self.coord(m[2]))
    }

    #[inline]
    fn value(&self, m: [usize; 3]) -> f64 {
        self.occ.sample_index(self.index_point(m))
    }

    #[inline]
    fn position(&self, m: [usize; 3]) -> Vec3 {
        self.occ.spec.from_index_space(self.index_point(m))
    }

    #[inline]
    fn point_id(&self, m: [usize; 3]) -> u64 {
        let n = (self.cells + 1) as u64;
        (m[2] as u64 * n + m[1] as u64) * n + m[0] as u64
    }

    /// Whether the interpolant on the cube `[m, m + size]` can take values on
    /// both sides of the iso-level: its corners straddle it, or the voxel
    /// values it interpolates do (a conservative bound, since the interpolant
    /// is a convex combination of them).
    fn may_cross(&self, m: [usize; 3], size: usize) -> bool {
        let mut below = false;
        let mut above = false;
        for c in CORNERS {
            let v = self.value([m[0] + c[0] * size, m[1] + c[1] * size, m[2] + c[2] * size]);
            below |= v < self.iso;
            above |= v >= self.iso;
        }
        if below && above {
            return true;
        }
        let lo = self.index_point(m);
        let hi = self.index_point([m[0] + size, m[1] + size, m[2] + size]);
        let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in lo.z.floor() as i64..=hi.z.floor() as i64 + 1 {
            for j in lo.y.floor() as i64..=hi.y.floor() as i64 + 1 {
                for i in lo.x.floor() as i64..=hi.x.floor() as i64 + 1 {
                    let v = self.occ.voxel(i, j, k);
                    vmin = vmin.min(v);
                    vmax = vmax.max(v);
                }
            }
        }
        // slack absorbs rounding in the interpolation weights
        vmin < self.iso + 1e-9 && vmax >= self.iso - 1e-9
    }
}

type EdgeKey = u64;

/// Marching cubes on one finest-level cell: triangles as edge-key triples.
fn march_cell(lat: &Lattice, m: [usize; 3]) -> Vec<[EdgeKey; 3]> {
    let mut values = [0.0; 8];
    let mut case = 0usize;
    for (c, off) in CORNERS.iter().enumerate() {
        values[c] = lat.value([m[0] + off[0], m[1] + off[1], m[2] + off[2]]);
        if values[c] < lat.iso {
            case |= 1 << c;
        }
    }
    if case == 0 || case == 255 {
        return Vec::new();
    }
    let key = |e: usize| -> EdgeKey {
        let [a, b] = EDGES[e];
        let (pa, pb) = (CORNERS[a], CORNERS[b]);
        let axis = (0..3).find(|&d| pa[d] != pb[d]).expect("edge spans one axis");
        let low = if pa[axis] < pb[axis] { pa } else { pb };
        lat.point_id([m[0] + low[0], m[1] + low[1], m[2] + low[2]]) * 3 + axis as u64
    };
    TRI_TABLE[case]
        .chunks_exact(3)
        .take_while(|t| t[0] >= 0)
        .map(|t| [key(t[0] as usize), key(t[1] as usize), key(t[2] as usize)])
        .collect()
}

/// Edge-crossing position by linear interpolation from the lower endpoint.
fn edge_vertex(lat: &Lattice, key: EdgeKey) -> Vec3 {
    let axis = (key % 3) as usize;
    let id = key / 3;
    let n = (lat.cells + 1) as u64;
    let p0 = [(id % n) as usize, ((id / n) % n) as usize, (id / (n * n)) as usize];
    let mut p1 = p0;
    p1[axis] += 1;
    let (f0, f1) = (lat.value(p0), lat.value(p1));
    let t = (lat.iso - f0) / (f1 - f0);
    let (x0, x1) = (lat.position(p0), lat.position(p1));
    x0 + (x1 - x0) * t
}

/// Builds the mesh from per-cell triangles in cell order: shared edge
/// vertices are deduplicated, then positions within [`WELD_TOLERANCE`] are
/// welded, collapsed triangles dropped and normals computed.
fn assemble(lat: &Lattice, cell_tris: Vec<Vec<[EdgeKey; 3]>>) -> Result<TriMesh, MeshError> {
    let mut ids: HashMap<EdgeKey, u32> = HashMap::new();
    let mut keys: Vec<EdgeKey> = Vec::new();
    let mut triangles = Vec::new();
    for tri in cell_tris.into_iter().flatten() {
        let t = tri.map(|k| {
            *ids.entry(k).or_insert_with(|| {
                keys.push(k);
                (keys.len() - 1) as u32
            })
        });
        triangles.push(t);
    }
    if triangles.is_empty() {
        return Err(MeshError::EmptySurface);
    }
    let positions: Vec<Vec3> = keys.par_iter().map(|&k| edge_vertex(lat, k)).collect();
    let (vertices, remap) = weld(&positions, WELD_TOLERANCE);
    for t in &mut triangles {
        *t = t.map(|i| remap[i as usize]);
    }
    let mut mesh = TriMesh { vertices, triangles, ..Default::default() };
    mesh.remove_degenerate();
    if mesh.is_empty() {
        return Err(MeshError::EmptySurface);
    }
    vertex_normals(&mesh)
}

/// Merges points closer than `tol`, keeping the first occurrence.
fn weld(points: &[Vec3], tol: f64) -> (Vec<Vec3>, Vec<u32>) {
    let cell = |p: Vec3| [(p.x / tol).floor() as i64, (p.y / tol).floor() as i64, (p.z / tol).floor() as i64];
    let mut buckets: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
    let mut out: Vec<Vec3> = Vec::new();
    let mut remap = Vec::with_capacity(points.len());
    for &p in points {
        let c = cell(p);
        let mut found = None;
        'search: for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if let Some(list) = buckets.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        if let Some(&j) = list.iter().find(|&&j| out[j as usize].distance(p) <= tol) {
                            found = Some(j);
                            break 'search;
                        }
                    }
                }
            }
        }
        let id = found.unwrap_or_else(|| {
            out.push(p);
            let id = (out.len() - 1) as u32;
            buckets.entry(c).or_default().push(id);
            id
        });
        remap.push(id);
    }
    (out, remap)
}

fn check_iso(iso: f64) -> Result<(), MeshError> {
    if iso > 0.0 && iso < 1.0 {
        Ok(())
    } else {
        Err(MeshError::InvalidIso(iso))
    }
}

/// Multi-resolution iso-surface extraction: evaluate the coarse lattice,
/// subdivide cells that may cross the iso-level `refinement_steps` times,
/// then run marching cubes on the surviving finest cells.
pub fn extract_mesh_mise(occ: &OccupancyGrid, iso: f64, initial_res: usize, refinement_steps: usize) -> Result<TriMesh, MeshError> {
    check_iso(iso)?;
    let size0 = 1usize << refinement_steps;
    let lat = Lattice { occ, cells: initial_res.max(1) * size0, iso };
    let mut active: Vec<[usize; 3]> = (0..initial_res.pow(3))
        .into_par_iter()
        .map(|c| [c % initial_res * size0, (c / initial_res) % initial_res * size0, c / (initial_res * initial_res) * size0])
        .filter(|&m| lat.may_cross(m, size0))
        .collect();
    let mut size = size0;
    while size > 1 {
        let half = size / 2;
        active = active
            .par_iter()
            .flat_map_iter(|&m| CORNERS.iter().map(move |c| [m[0] + c[0] * half, m[1] + c[1] * half, m[2] + c[2] * half]))
            .filter(|&m| lat.may_cross(m, half))
            .collect();
        size = half;
    }
    active.par_sort_unstable_by_key(|m| (m[2], m[1], m[0]));
    let tris = active.par_iter().map(|&m| march_cell(&lat, m)).collect();
    assemble(&lat, tris)
}

/// Marching cubes over every cell of a `cells³` lattice on the same field;
/// the reference MISE must reproduce.
pub fn extract_mesh_dense(occ: &OccupancyGrid, iso: f64, cells: usize) -> Result<TriMesh, MeshError> {
    check_iso(iso)?;
    let lat = Lattice { occ, cells, iso };
    let tris = (0..cells.pow(3))
        .into_par_iter()
        .map(|c| march_cell(&lat, [c % cells, (c / cells) % cells, c / (cells * cells)]))
        .collect();
    assemble(&lat, tris)
}

/// Extraction with the default 32-cell start, 2 refinement steps and iso 0.5.
pub fn extract_mesh(occ: &OccupancyGrid) -> Result<TriMesh, MeshError> {
    extract_mesh_mise(occ, DEFAULT_ISO, DEFAULT_INITIAL_RES, DEFAULT_REFINEMENT_STEPS)
}

/// Stores the gradient-norm confidence of every vertex in `mesh.confidence`.
pub fn attach_confidence(mesh: &mut TriMesh, occ: &OccupancyGrid) -> Result<(), VolumeError> {
    let conf = mesh.vertices.par_iter().map(|v| vertex_confidence(occ, *v)).collect::<Result<Vec<_>, _>>()?;
    mesh.confidence = Some(conf);
    Ok(())
}
