//! PLY meshes. Writes `binary_little_endian` with double positions and
//! normals, a float `confidence` and a uchar `posture` when present. Reads
//! ASCII and binary little-endian files with arbitrary scalar types; faces
//! with more than three corners are fan-triangulated.

use std::path::Path;

use super::{read_bytes, write_bytes, IoError};
use crate::geometry::{UnitVec3, Vec3};
use crate::mesh::TriMesh;
use crate::posture::PostureLabel;

pub fn write_ply(path: &Path, mesh: &TriMesh) -> Result<(), IoError> {
    write_bytes(path, &encode_ply(mesh)?)
}

pub fn encode_ply(mesh: &TriMesh) -> Result<Vec<u8>, IoError> {
    mesh.validate().map_err(|e| IoError::Parse(e.to_string()))?;
    let has_normals = !mesh.normals.is_empty();
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    header += &format!("element vertex {}\n", mesh.vertices.len());
    header += "property double x\nproperty double y\nproperty double z\n";
    if has_normals {
        header += "property double nx\nproperty double ny\nproperty double nz\n";
    }
    if mesh.confidence.is_some() {
        header += "property float confidence\n";
    }
    if mesh.postures.is_some() {
        header += "property uchar posture\n";
    }
    header += &format!("element face {}\n", mesh.triangles.len());
    header += "property list uchar int vertex_indices\nend_header\n";

    let mut out = header.into_bytes();
    for (i, v) in mesh.vertices.iter().enumerate() {
        for c in v.to_array() {
            out.extend_from_slice(&c.to_le_bytes());
        }
        if has_normals {
            for c in mesh.normals[i].get().to_array() {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        if let Some(conf) = &mesh.confidence {
            out.extend_from_slice(&(conf[i] as f32).to_le_bytes());
        }
        if let Some(p) = &mesh.postures {
            out.push(p[i].code());
        }
    }
    for tri in &mesh.triangles {
        out.push(3);
        for &i in tri {
            out.extend_from_slice(&(i as i32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn read_ply(path: &Path) -> Result<TriMesh, IoError> {
    decode_ply(&read_bytes(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Result<Self, IoError> {
        Ok(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return Err(IoError::Parse(format!("unknown PLY scalar type {s:?}"))),
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// One decoded element instance: scalars in declaration order plus lists.
type Row = Vec<RowValue>;

#[derive(Debug, Clone)]
enum RowValue {
    Scalar(f64),
    List(Vec<f64>),
}

fn bad(msg: impl Into<String>) -> IoError {
    IoError::Parse(msg.into())
}

pub fn decode_ply(bytes: &[u8]) -> Result<TriMesh, IoError> {
    let end = find_header_end(bytes).ok_or_else(|| bad("missing end_header"))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not UTF-8"))?;
    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(bad("missing `ply` magic"));
    }
    let mut binary = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            [] | ["comment", ..] | ["obj_info", ..] | ["end_header"] => {}
            ["format", "ascii", _] => binary = Some(false),
            ["format", "binary_little_endian", _] => binary = Some(true),
            ["format", f, ..] => return Err(bad(format!("unsupported PLY format {f}"))),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| bad("bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", c, i, name] => elements
                .last_mut()
                .ok_or_else(|| bad("property before element"))?
                .props
                .push(Property::List { name: name.to_string(), count: Scalar::parse(c)?, item: Scalar::parse(i)? }),
            ["property", ty, name] => elements
                .last_mut()
                .ok_or_else(|| bad("property before element"))?
                .props
                .push(Property::Scalar { name: name.to_string(), ty: Scalar::parse(ty)? }),
            _ => return Err(bad(format!("unrecognized header line {line:?}"))),
        }
    }
    let binary = binary.ok_or_else(|| bad("missing format line"))?;
    let body = &bytes[end..];

    let mut data: Vec<Vec<Row>> = Vec::new();
    if binary {
        let mut pos = 0usize;
        for el in &elements {
            let mut rows = Vec::with_capacity(el.count);
            for _ in 0..el.count {
                let mut row = Vec::with_capacity(el.props.len());
                for p in &el.props {
                    match p {
                        Property::Scalar { ty, .. } => {
                            let b = body.get(pos..pos + ty.size()).ok_or_else(|| bad("truncated PLY body"))?;
                            row.push(RowValue::Scalar(ty.read_le(b)));
                            pos += ty.size();
                        }
                        Property::List { count, item, .. } => {
                            let b = body.get(pos..pos + count.size()).ok_or_else(|| bad("truncated PLY body"))?;
                            let n = count.read_le(b) as usize;
                            pos += count.size();
                            let mut items = Vec::with_capacity(n);
                            for _ in 0..n {
                                let b = body.get(pos..pos + item.size()).ok_or_else(|| bad("truncated PLY body"))?;
                                items.push(item.read_le(b));
                                pos += item.size();
                            }
                            row.push(RowValue::List(items));
                        }
                    }
                }
                rows.push(row);
            }
            data.push(rows);
        }
    } else {
        let text = std::str::from_utf8(body).map_err(|_| bad("ASCII body is not UTF-8"))?;
        let mut toks = text.split_whitespace();
        let mut next = || -> Result<f64, IoError> {
            toks.next().ok_or_else(|| bad("truncated PLY body"))?.parse::<f64>().map_err(|_| bad("bad number"))
        };
        for el in &elements {
            let mut rows = Vec::with_capacity(el.count);
            for _ in 0..el.count {
                let mut row = Vec::with_capacity(el.props.len());
                for p in &el.props {
                    match p {
                        Property::Scalar { .. } => row.push(RowValue::Scalar(next()?)),
                        Property::List { .. } => {
                            let n = next()? as usize;
                            row.push(RowValue::List((0..n).map(|_| next()).collect::<Result<_, _>>()?));
                        }
                    }
                }
                rows.push(row);
            }
            data.push(rows);
        }
    }

    let vi = elements.iter().position(|e| e.name == "vertex").ok_or_else(|| bad("no vertex element"))?;
    let vel = &elements[vi];
    let col = |name: &str| {
        vel.props.iter().position(|p| matches!(p, Property::Scalar { name: n, .. } if n == name))
    };
    let (ix, iy, iz) = match (col("x"), col("y"), col("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(bad("vertex element lacks x/y/z")),
    };
    let scalar = |row: &Row, i: usize| match &row[i] {
        RowValue::Scalar(v) => *v,
        RowValue::List(_) => f64::NAN,
    };
    let mut mesh = TriMesh::default();
    for row in &data[vi] {
        let v = Vec3::new(scalar(row, ix), scalar(row, iy), scalar(row, iz));
        if !v.is_finite() {
            return Err(bad("non-finite vertex"));
        }
        mesh.vertices.push(v);
    }
    if let (Some(nx), Some(ny), Some(nz)) = (col("nx"), col("ny"), col("nz")) {
        mesh.normals = data[vi]
            .iter()
            .map(|row| UnitVec3::from_stored(Vec3::new(scalar(row, nx), scalar(row, ny), scalar(row, nz))))
            .collect::<Result<_, _>>()
            .map_err(|e| bad(format!("bad normal: {e}")))?;
    }
    if let Some(ci) = col("confidence") {
        mesh.confidence = Some(data[vi].iter().map(|row| scalar(row, ci)).collect());
    }
    if let Some(pi) = col("posture") {
        mesh.postures = Some(
            data[vi]
                .iter()
                .map(|row| {
                    let c = scalar(row, pi);
                    PostureLabel::from_code(c as u8)
                        .filter(|_| c.fract() == 0.0 && (0.0..=255.0).contains(&c))
                        .ok_or_else(|| bad(format!("invalid posture code {c}")))
                })
                .collect::<Result<_, _>>()?,
        );
    }
    if let Some(fi) = elements.iter().position(|e| e.name == "face") {
        let li = elements[fi]
            .props
            .iter()
            .position(|p| matches!(p, Property::List { name, .. } if name == "vertex_indices" || name == "vertex_index"))
            .ok_or_else(|| bad("face element lacks vertex_indices"))?;
        for row in &data[fi] {
            let RowValue::List(idx) = &row[li] else { unreachable!() };
            if idx.len() < 3 {
                return Err(bad("face with fewer than 3 corners"));
            }
            for k in 1..idx.len() - 1 {
                mesh.triangles.push([idx[0] as u32, idx[k] as u32, idx[k + 1] as u32]);
            }
        }
    }
    mesh.validate().map_err(|e| bad(e.to_string()))?;
    Ok(mesh)
}

fn find_header_end(bytes: &[u8]) -> Option<usize> {
    const MARK: &[u8] = b"end_header";
    let i = bytes.windows(MARK.len()).position(|w| w == MARK)?;
    let mut j = i + MARK.len();
    if bytes.get(j) == Some(&b'\r') {
        j += 1;
    }
    if bytes.get(j) == Some(&b'\n') {
        j += 1;
    }
    Some(j)
}
