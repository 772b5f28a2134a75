//! Wavefront OBJ (positions, optional `vn` normals, faces). Confidence and
//! posture are not representable in OBJ; use PLY for labeled meshes.

use std::fmt::Write as _;
use std::path::Path;

use super::{read_bytes, write_bytes, IoError};
use crate::geometry::{UnitVec3, Vec3};
use crate::mesh::TriMesh;

pub fn write_obj(path: &Path, mesh: &TriMesh) -> Result<(), IoError> {
    write_bytes(path, encode_obj(mesh).as_bytes())
}

/// Floats use the shortest representation that round-trips exactly.
pub fn encode_obj(mesh: &TriMesh) -> String {
    let mut s = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {:?} {:?} {:?}", v.x, v.y, v.z);
    }
    let has_normals = !mesh.normals.is_empty();
    for n in &mesh.normals {
        let n = n.get();
        let _ = writeln!(s, "vn {:?} {:?} {:?}", n.x, n.y, n.z);
    }
    for t in &mesh.triangles {
        let [a, b, c] = t.map(|i| i + 1);
        if has_normals {
            let _ = writeln!(s, "f {a}//{a} {b}//{b} {c}//{c}");
        } else {
            let _ = writeln!(s, "f {a} {b} {c}");
        }
    }
    s
}

pub fn read_obj(path: &Path) -> Result<TriMesh, IoError> {
    let bytes = read_bytes(path)?;
    decode_obj(std::str::from_utf8(&bytes).map_err(|_| IoError::Parse("OBJ is not UTF-8".into()))?)
}

pub fn decode_obj(text: &str) -> Result<TriMesh, IoError> {
    let bad = |line: usize, msg: &str| IoError::Parse(format!("OBJ line {}: {msg}", line + 1));
    let mut mesh = TriMesh::default();
    let mut vn: Vec<Vec3> = Vec::new();
    // normal index referenced by each vertex, if any
    let mut vertex_normal: Vec<Option<usize>> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let c: Vec<f64> = tok
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|_| bad(ln, "bad coordinate")))
                    .collect::<Result<_, _>>()?;
                if c.len() != 3 {
                    return Err(bad(ln, "vertex needs 3 coordinates"));
                }
                mesh.vertices.push(Vec3::new(c[0], c[1], c[2]));
                vertex_normal.push(None);
            }
            Some("vn") => {
                let c: Vec<f64> = tok
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|_| bad(ln, "bad normal")))
                    .collect::<Result<_, _>>()?;
                if c.len() != 3 {
                    return Err(bad(ln, "normal needs 3 components"));
                }
                vn.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut corners = Vec::new();
                for t in tok {
                    let mut parts = t.split('/');
                    let resolve = |s: &str, count: usize| -> Result<usize, IoError> {
                        let i: i64 = s.parse().map_err(|_| bad(ln, "bad index"))?;
                        let idx = if i < 0 { count as i64 + i } else { i - 1 };
                        if idx < 0 || idx as usize >= count {
                            return Err(bad(ln, "index out of range"));
                        }
                        Ok(idx as usize)
                    };
                    let v = resolve(parts.next().unwrap_or(""), mesh.vertices.len())?;
                    let _texcoord = parts.next();
                    if let Some(n) = parts.next().filter(|s| !s.is_empty()) {
                        vertex_normal[v] = Some(resolve(n, vn.len())?);
                    }
                    corners.push(v as u32);
                }
                if corners.len() < 3 {
                    return Err(bad(ln, "face needs at least 3 corners"));
                }
                for k in 1..corners.len() - 1 {
                    mesh.triangles.push([corners[0], corners[k], corners[k + 1]]);
                }
            }
            _ => {}
        }
    }
    if !vn.is_empty() && vertex_normal.iter().all(Option::is_some) {
        mesh.normals = vertex_normal
            .iter()
            .map(|i| UnitVec3::from_stored(vn[i.unwrap()]))
            .collect::<Result<_, _>>()
            .map_err(|e| IoError::Parse(format!("bad normal: {e}")))?;
    }
    Ok(mesh)
}
