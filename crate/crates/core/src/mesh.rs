//! Indexed triangle mesh with optional per-vertex confidence and posture labels.

use std::collections::HashMap;

use thiserror::Error;

use crate::geometry::{SimilarityPose, UnitVec3, Vec3};
use crate::posture::PostureLabel;

/// Triangles with area at or below this (m²) count as degenerate.
pub const DEGENERATE_AREA: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("triangle {tri} references vertex {index} but only {count} vertices exist")]
    IndexOutOfRange { tri: usize, index: u32, count: usize },
    #[error("vertex {0} has no non-degenerate incident triangle")]
    DegenerateVertex(usize),
    #[error("attribute `{name}` has {got} entries, expected {expected}")]
    AttributeLength { name: &'static str, got: usize, expected: usize },
    #[error("no cell crosses the iso-level")]
    EmptySurface,
    #[error("iso-level {0} must lie strictly inside (0, 1)")]
    InvalidIso(f64),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    /// Per-vertex unit normals; empty until [`vertex_normals`] has run.
    pub normals: Vec<UnitVec3>,
    pub confidence: Option<Vec<f64>>,
    pub postures: Option<Vec<PostureLabel>>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        let mesh = TriMesh { vertices, triangles, ..Default::default() };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        let n = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            for &i in tri {
                if i as usize >= n {
                    return Err(MeshError::IndexOutOfRange { tri: t, index: i, count: n });
                }
            }
        }
        let check = |name, got: usize| {
            if got != n {
                Err(MeshError::AttributeLength { name, got, expected: n })
            } else {
                Ok(())
            }
        };
        if !self.normals.is_empty() {
            check("normals", self.normals.len())?;
        }
        if let Some(c) = &self.confidence {
            check("confidence", c.len())?;
        }
        if let Some(p) = &self.postures {
            check("posture", p.len())?;
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    /// Unnormalized face normal (length = twice the area).
    pub fn face_cross(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.corners(t);
        (b - a).cross(c - a)
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        0.5 * self.face_cross(t).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn bounding_box(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v))))
    }

    /// Enclosed volume from signed tetrahedra against the origin. Positive for
    /// closed, outward-wound meshes.
    pub fn signed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                a.dot(b.cross(c)) / 6.0
            })
            .sum()
    }

    /// True when every undirected edge is used by exactly two triangles with
    /// opposite orientation.
    pub fn is_closed_manifold(&self) -> bool {
        let mut directed: HashMap<(u32, u32), u32> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                *directed.entry((tri[k], tri[(k + 1) % 3])).or_default() += 1;
            }
        }
        directed.iter().all(|(&(a, b), &count)| count == 1 && directed.get(&(b, a)) == Some(&1))
    }

    /// V − E + F over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let mut edges = std::collections::HashSet::new();
        let mut used = vec![false; self.vertices.len()];
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
                used[tri[k] as usize] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        v - edges.len() as i64 + self.triangles.len() as i64
    }

    /// Number of edge-connected triangle components.
    pub fn connected_components(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.vertices.len()).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for tri in &self.triangles {
            let a = find(&mut parent, tri[0] as usize);
            for &o in &tri[1..] {
                let b = find(&mut parent, o as usize);
                parent[b] = a;
            }
        }
        let mut roots = std::collections::HashSet::new();
        for tri in &self.triangles {
            roots.insert(find(&mut parent, tri[0] as usize));
        }
        roots.len()
    }

    /// Genus of a closed, connected, orientable mesh.
    pub fn genus(&self) -> i64 {
        (2 * self.connected_components() as i64 - self.euler_characteristic()) / 2
    }

    /// Applies a similarity transform to positions and rotates normals.
    pub fn transformed(&self, pose: &SimilarityPose) -> TriMesh {
        let mut out = self.clone();
        for v in &mut out.vertices {
            *v = pose.apply(*v);
        }
        for n in &mut out.normals {
            *n = UnitVec3::new(pose.apply_direction(n.get())).unwrap_or(*n);
        }
        out
    }

    pub fn flip_windings(&mut self) {
        for tri in &mut self.triangles {
            tri.swap(1, 2);
        }
    }

    /// Drops triangles with repeated indices or area ≤ [`DEGENERATE_AREA`] and
    /// vertices no triangle references. Attributes are kept aligned.
    pub fn remove_degenerate(&mut self) {
        let keep: Vec<[u32; 3]> = (0..self.triangles.len())
            .filter(|&t| {
                let [a, b, c] = self.triangles[t];
                a != b && b != c && a != c && self.triangle_area(t) > DEGENERATE_AREA
            })
            .map(|t| self.triangles[t])
            .collect();
        self.triangles = keep;
        self.compact();
    }

    /// Drops unreferenced vertices; returns the original index of each kept one.
    pub fn compact(&mut self) -> Vec<usize> {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut order = Vec::new();
        for tri in &self.triangles {
            for &i in tri {
                if remap[i as usize] == u32::MAX {
                    remap[i as usize] = order.len() as u32;
                    order.push(i as usize);
                }
            }
        }
        if order.len() == self.vertices.len() && order.iter().enumerate().all(|(k, &i)| k == i) {
            return order;
        }
        // keep original relative order for determinism across callers
        order.sort_unstable();
        for (k, &i) in order.iter().enumerate() {
            remap[i] = k as u32;
        }
        for tri in &mut self.triangles {
            for i in tri.iter_mut() {
                *i = remap[*i as usize];
            }
        }
        self.vertices = order.iter().map(|&i| self.vertices[i]).collect();
        if !self.normals.is_empty() {
            self.normals = order.iter().map(|&i| self.normals[i]).collect();
        }
        if let Some(c) = &self.confidence {
            self.confidence = Some(order.iter().map(|&i| c[i]).collect());
        }
        if let Some(p) = &self.postures {
            self.postures = Some(order.iter().map(|&i| p[i]).collect());
        }
        order
    }
}

/// Angle-weighted vertex normals from incident face normals.
pub fn vertex_normals(mesh: &TriMesh) -> Result<TriMesh, MeshError> {
    if mesh.is_empty() {
        return Err(MeshError::EmptyMesh);
    }
    mesh.validate()?;
    let mut acc = vec![Vec3::ZERO; mesh.vertices.len()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let cross = mesh.face_cross(t);
        let len = cross.norm();
        if len <= 2.0 * DEGENERATE_AREA {
            continue;
        }
        let face_n = cross / len;
        let p = mesh.corners(t);
        for k in 0..3 {
            let e1 = p[(k + 1) % 3] - p[k];
            let e2 = p[(k + 2) % 3] - p[k];
            let angle = e1.cross(e2).norm().atan2(e1.dot(e2));
            acc[tri[k] as usize] += face_n * angle;
        }
    }
    let mut out = mesh.clone();
    out.normals = acc
        .into_iter()
        .enumerate()
        .map(|(i, n)| UnitVec3::new(n).map_err(|_| MeshError::DegenerateVertex(i)))
        .collect::<Result<_, _>>()?;
    Ok(out)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::geometry::Rotation3;

    /// Unit cube split into 2×2 quads per face so each face has an interior vertex.
    pub(crate) fn subdivided_cube() -> TriMesh {
        let mut verts: Vec<Vec3> = Vec::new();
        let mut index: HashMap<[i32; 3], u32> = HashMap::new();
        let mut tris = Vec::new();
        let mut vid = |p: [i32; 3], verts: &mut Vec<Vec3>| -> u32 {
            *index.entry(p).or_insert_with(|| {
                verts.push(Vec3::new(p[0] as f64 / 2.0, p[1] as f64 / 2.0, p[2] as f64 / 2.0));
                verts.len() as u32 - 1
            })
        };
        // (normal axis, sign)
        for axis in 0..3 {
            for &side in &[0, 2] {
                let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                for i in 0..2 {
                    for j in 0..2 {
                        let mut q = [[0i32; 3]; 4];
                        for (k, (di, dj)) in [(0, 0), (1, 0), (1, 1), (0, 1)].iter().enumerate() {
                            q[k][axis] = side;
                            q[k][u] = i + di;
                            q[k][v] = j + dj;
                        }
                        let ids: Vec<u32> = q.iter().map(|p| vid(*p, &mut verts)).collect();
                        if side == 2 {
                            tris.push([ids[0], ids[1], ids[2]]);
                            tris.push([ids[0], ids[2], ids[3]]);
                        } else {
                            tris.push([ids[0], ids[2], ids[1]]);
                            tris.push([ids[0], ids[3], ids[2]]);
                        }
                    }
                }
            }
        }
        TriMesh::new(verts, tris).unwrap()
    }

    /// UV sphere with poles, outward winding.
    pub(crate) fn uv_sphere(radius: f64, center: Vec3, rings: usize, segments: usize) -> TriMesh {
        let mut verts = vec![center + Vec3::Z * radius];
        for r in 1..rings {
            let theta = std::f64::consts::PI * r as f64 / rings as f64;
            for s in 0..segments {
                let phi = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
                verts.push(center + Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()) * radius);
            }
        }
        verts.push(center - Vec3::Z * radius);
        let south = verts.len() as u32 - 1;
        let ring = |r: usize, s: usize| (1 + (r - 1) * segments + s % segments) as u32;
        let mut tris = Vec::new();
        for s in 0..segments {
            tris.push([0, ring(1, s), ring(1, s + 1)]);
            tris.push([south, ring(rings - 1, s + 1), ring(rings - 1, s)]);
        }
        for r in 1..rings - 1 {
            for s in 0..segments {
                tris.push([ring(r, s), ring(r + 1, s), ring(r + 1, s + 1)]);
                tris.push([ring(r, s), ring(r + 1, s + 1), ring(r, s + 1)]);
            }
        }
        TriMesh::new(verts, tris).unwrap()
    }

    #[test]
    fn cube_face_interior_normals_are_axes() {
        let cube = vertex_normals(&subdivided_cube()).unwrap();
        assert!(cube.is_closed_manifold());
        assert!((cube.signed_volume() - 1.0).abs() < 1e-12);
        for (v, n) in cube.vertices.iter().zip(&cube.normals) {
            let on_bound: Vec<usize> = (0..3).filter(|&a| v[a] == 0.0 || v[a] == 1.0).collect();
            if on_bound.len() == 1 {
                let a = on_bound[0];
                let mut expect = Vec3::ZERO;
                let sign = if v[a] == 1.0 { 1.0 } else { -1.0 };
                match a {
                    0 => expect.x = sign,
                    1 => expect.y = sign,
                    _ => expect.z = sign,
                }
                assert!((n.get() - expect).norm() <= 1e-9, "{v:?} {n:?}");
            }
        }
    }

    #[test]
    fn sphere_normals_are_radial() {
        let c = Vec3::new(0.1, -0.2, 0.3);
        let s = vertex_normals(&uv_sphere(0.5, c, 24, 48)).unwrap();
        for (v, n) in s.vertices.iter().zip(&s.normals) {
            let radial = (*v - c).normalize().unwrap();
            let angle = n.dot(radial.get()).clamp(-1.0, 1.0).acos();
            assert!(angle.to_degrees() < 2.0);
        }
    }

    #[test]
    fn flipping_windings_negates_normals() {
        let s = uv_sphere(1.0, Vec3::ZERO, 10, 20);
        let a = vertex_normals(&s).unwrap();
        let mut flipped = s.clone();
        flipped.flip_windings();
        let b = vertex_normals(&flipped).unwrap();
        for (x, y) in a.normals.iter().zip(&b.normals) {
            assert_eq!(x.get(), -y.get());
        }
    }

    #[test]
    fn isolated_vertex_is_degenerate() {
        let mut m = subdivided_cube();
        m.vertices.push(Vec3::splat(5.0));
        assert!(matches!(vertex_normals(&m), Err(MeshError::DegenerateVertex(_))));
        assert!(matches!(vertex_normals(&TriMesh::default()), Err(MeshError::EmptyMesh)));
    }

    #[test]
    fn topology_helpers() {
        let s = uv_sphere(1.0, Vec3::ZERO, 8, 12);
        assert_eq!(s.genus(), 0);
        assert_eq!(s.connected_components(), 1);
        let rotated = s.transformed(&SimilarityPose::rigid(Rotation3::rot_x(0.3), Vec3::X));
        assert!((rotated.signed_volume() - s.signed_volume()).abs() < 1e-12);
        assert!(TriMesh::new(vec![Vec3::ZERO], vec![[0, 0, 1]]).is_err());
    }
}
