//! Procedural cups, bottles and bowls.
//!
//! Bodies are closed 2-D profiles revolved about +Z. The object frame puts
//! the revolution axis on Z with the origin at mid-height; a cup's handle
//! lies in the +X half of the X-Z plane.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::mesh::{vertex_normals, TriMesh};
use crate::scene::SceneError;

/// Angular resolution of every body of revolution (even, so bodies are
/// symmetric under a half turn).
pub const SEGMENTS: usize = 96;
/// Target profile step along the generating curve (m).
const PROFILE_STEP: f64 = 0.0025;
/// Largest absolute coordinate of an object after canonical normalization.
pub const CANONICAL_HALF_EXTENT: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Cup,
    Bottle,
    Bowl,
}

impl Category {
    pub fn name(self) -> &'static str {
        match self {
            Category::Cup => "cup",
            Category::Bottle => "bottle",
            Category::Bowl => "bowl",
        }
    }

    /// Whether the body is an open container (hollow) rather than a solid.
    pub fn is_container(self) -> bool {
        matches!(self, Category::Cup | Category::Bowl)
    }
}

impl std::str::FromStr for Category {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "cup" | "mug" => Ok(Category::Cup),
            "bottle" => Ok(Category::Bottle),
            "bowl" => Ok(Category::Bowl),
            other => Err(format!("unknown category `{other}`")),
        }
    }
}

/// Shape parameters in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "category", rename_all = "lowercase")]
pub enum ShapeParams {
    Cup { radius: f64, height: f64, wall: f64, bottom: f64, handle: bool },
    Bottle { radius: f64, height: f64, neck_radius: f64 },
    Bowl { radius: f64, height: f64, wall: f64 },
}

impl ShapeParams {
    pub fn category(&self) -> Category {
        match self {
            ShapeParams::Cup { .. } => Category::Cup,
            ShapeParams::Bottle { .. } => Category::Bottle,
            ShapeParams::Bowl { .. } => Category::Bowl,
        }
    }

    pub fn default_for(category: Category) -> Self {
        match category {
            Category::Cup => ShapeParams::Cup { radius: 0.040, height: 0.100, wall: 0.004, bottom: 0.006, handle: true },
            Category::Bottle => ShapeParams::Bottle { radius: 0.033, height: 0.200, neck_radius: 0.013 },
            Category::Bowl => ShapeParams::Bowl { radius: 0.075, height: 0.055, wall: 0.005 },
        }
    }

    /// Uniform draw within the documented ranges, deterministic in `seed`.
    pub fn sample(category: Category, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0b1e_c7u64);
        match category {
            Category::Cup => ShapeParams::Cup {
                radius: rng.random_range(0.030..=0.060),
                height: rng.random_range(0.080..=0.130),
                wall: rng.random_range(0.003..=0.006),
                bottom: rng.random_range(0.005..=0.008),
                handle: true,
            },
            Category::Bottle => {
                let radius = rng.random_range(0.025..=0.045);
                ShapeParams::Bottle {
                    radius,
                    height: rng.random_range(0.150..=0.250),
                    neck_radius: radius * rng.random_range(0.35..=0.5),
                }
            }
            Category::Bowl => ShapeParams::Bowl {
                radius: rng.random_range(0.060..=0.090),
                height: rng.random_range(0.040..=0.070),
                wall: rng.random_range(0.004..=0.006),
            },
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: &str| Err(SceneError::InvalidParams(m.to_string()));
        let in_range = |v: f64, lo: f64, hi: f64| v.is_finite() && v >= lo - 1e-12 && v <= hi + 1e-12;
        match *self {
            ShapeParams::Cup { radius, height, wall, bottom, .. } => {
                if !in_range(radius, 0.030, 0.060) {
                    return bad("cup radius must lie in 30–60 mm");
                }
                if !in_range(height, 0.080, 0.130) {
                    return bad("cup height must lie in 80–130 mm");
                }
                if !in_range(wall, 0.002, 0.010) || wall >= radius / 2.0 {
                    return bad("cup wall must lie in 2–10 mm and below half the radius");
                }
                if !in_range(bottom, 0.002, 0.015) {
                    return bad("cup bottom must lie in 2–15 mm");
                }
            }
            ShapeParams::Bottle { radius, height, neck_radius } => {
                if !in_range(radius, 0.020, 0.050) {
                    return bad("bottle radius must lie in 20–50 mm");
                }
                if !in_range(height, 0.120, 0.300) {
                    return bad("bottle height must lie in 120–300 mm");
                }
                if !(neck_radius > 0.005 && neck_radius < radius * 0.8) {
                    return bad("bottle neck radius must lie in (5 mm, 0.8·radius)");
                }
            }
            ShapeParams::Bowl { radius, height, wall } => {
                if !in_range(radius, 0.050, 0.100) {
                    return bad("bowl radius must lie in 50–100 mm");
                }
                if !in_range(height, 0.030, 0.080) {
                    return bad("bowl height must lie in 30–80 mm");
                }
                if !in_range(wall, 0.002, 0.010) {
                    return bad("bowl wall must lie in 2–10 mm");
                }
            }
        }
        Ok(())
    }

    /// Axis-aligned box that contains every vertex of the generated mesh.
    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        match *self {
            ShapeParams::Cup { radius, height, handle, .. } => {
                let reach = if handle { handle_layout(radius, height).outer_reach() } else { radius };
                (Vec3::new(-radius, -radius, -height / 2.0), Vec3::new(reach, radius, height / 2.0))
            }
            ShapeParams::Bottle { radius, height, .. } => (
                Vec3::new(-radius, -radius, -height / 2.0),
                Vec3::new(radius, radius, height / 2.0),
            ),
            ShapeParams::Bowl { radius, height, .. } => (
                Vec3::new(-radius, -radius, -height / 2.0),
                Vec3::new(radius, radius, height / 2.0),
            ),
        }
    }
}

/// Which region of the object a vertex belongs to; used to author posture
/// labels on reference meshes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SurfacePart {
    OuterBottom,
    OuterWall,
    Rim,
    InnerWall,
    InnerBottom,
    Shoulder,
    Neck,
    Cap,
    Handle,
}

#[derive(Debug, Clone)]
pub struct GeneratedObject {
    pub mesh: TriMesh,
    pub parts: Vec<SurfacePart>,
    pub params: ShapeParams,
}

/// Builds a watertight object mesh. With `params == None` the shape is
/// drawn by [`ShapeParams::sample`] from `seed`; explicit params are used as
/// given and the seed is ignored.
pub fn generate_object(category: Category, params: Option<&ShapeParams>, seed: u64) -> Result<TriMesh, SceneError> {
    Ok(generate_object_with_parts(category, params, seed)?.mesh)
}

pub fn generate_object_with_parts(
    category: Category,
    params: Option<&ShapeParams>,
    seed: u64,
) -> Result<GeneratedObject, SceneError> {
    let params = match params {
        Some(p) => p.clone(),
        None => ShapeParams::sample(category, seed),
    };
    if params.category() != category {
        return Err(SceneError::InvalidParams(format!(
            "{} parameters given for category {}",
            params.category().name(),
            category.name()
        )));
    }
    params.validate()?;
    let (mut mesh, parts) = match params {
        ShapeParams::Cup { radius, height, wall, bottom, handle } => cup(radius, height, wall, bottom, handle),
        ShapeParams::Bottle { radius, height, neck_radius } => bottle(radius, height, neck_radius),
        ShapeParams::Bowl { radius, height, wall } => bowl(radius, height, wall),
    };
    for v in &mut mesh.vertices {
        v.z -= params.bounding_box().1.z;
    }
    let mesh = vertex_normals(&mesh).map_err(SceneError::Mesh)?;
    Ok(GeneratedObject { mesh, parts, params })
}

/// Scale that maps the object's largest absolute coordinate to
/// [`CANONICAL_HALF_EXTENT`].
pub fn canonical_scale(mesh: &TriMesh) -> f64 {
    let m = mesh.vertices.iter().fold(0.0f64, |m, v| m.max(v.abs().max_element()));
    CANONICAL_HALF_EXTENT / m
}

/// A profile vertex `(r, z)` with its part tag. `r == 0` marks a pole.
type ProfilePoint = (f64, f64, SurfacePart);

fn segment(out: &mut Vec<ProfilePoint>, from: (f64, f64), to: (f64, f64), part: SurfacePart, include_end: bool) {
    let len = ((to.0 - from.0).powi(2) + (to.1 - from.1).powi(2)).sqrt();
    let n = ((len / PROFILE_STEP).ceil() as usize).max(1);
    let last = if include_end { n } else { n - 1 };
    for i in 0..=last {
        let t = i as f64 / n as f64;
        out.push((from.0 + (to.0 - from.0) * t, from.1 + (to.1 - from.1) * t, part));
    }
}

/// Revolves a closed profile that starts and ends on the axis.
struct Revolved {
    mesh: TriMesh,
    parts: Vec<SurfacePart>,
    /// For each profile index, the vertex id of the ring (or pole).
    ring_start: Vec<u32>,
}

fn revolve(profile: &[ProfilePoint]) -> Revolved {
    let mut vertices = Vec::new();
    let mut parts = Vec::new();
    let mut ring_start = Vec::with_capacity(profile.len());
    for &(r, z, part) in profile {
        ring_start.push(vertices.len() as u32);
        if r == 0.0 {
            vertices.push(Vec3::new(0.0, 0.0, z));
            parts.push(part);
        } else {
            for s in 0..SEGMENTS {
                let theta = TAU * s as f64 / SEGMENTS as f64;
                vertices.push(Vec3::new(r * theta.cos(), r * theta.sin(), z));
                parts.push(part);
            }
        }
    }
    let mut triangles = Vec::new();
    for i in 0..profile.len() - 1 {
        let (a_pole, b_pole) = (profile[i].0 == 0.0, profile[i + 1].0 == 0.0);
        for s in 0..SEGMENTS {
            let a0 = if a_pole { ring_start[i] } else { ring_start[i] + s as u32 };
            let a1 = if a_pole { ring_start[i] } else { ring_start[i] + ((s + 1) % SEGMENTS) as u32 };
            let b0 = if b_pole { ring_start[i + 1] } else { ring_start[i + 1] + s as u32 };
            let b1 = if b_pole { ring_start[i + 1] } else { ring_start[i + 1] + ((s + 1) % SEGMENTS) as u32 };
            if !a_pole {
                triangles.push([a0, a1, b1]);
            }
            if !b_pole {
                triangles.push([a0, b1, b0]);
            }
        }
    }
    let mut mesh = TriMesh { vertices, triangles, ..Default::default() };
    if mesh.signed_volume() < 0.0 {
        mesh.flip_windings();
    }
    Revolved { mesh, parts, ring_start }
}

#[derive(Debug, Clone, Copy)]
struct HandleLayout {
    radius: f64,
    /// Outer-wall ring spacing.
    dz: f64,
    rings: usize,
    top_ring: usize,
    bottom_ring: usize,
    /// Half extents of the attachment patch in segments / rings.
    half_segs: usize,
    half_rows: usize,
}

impl HandleLayout {
    fn arc_radius(&self) -> f64 {
        (self.top_ring - self.bottom_ring) as f64 * self.dz / 2.0
    }

    fn outer_reach(&self) -> f64 {
        self.radius + self.arc_radius() + self.half_rows as f64 * self.dz + 1e-9
    }
}

fn handle_layout(radius: f64, height: f64) -> HandleLayout {
    let rings = ((height / PROFILE_STEP).ceil() as usize).max(8);
    let dz = height / rings as f64;
    HandleLayout {
        radius,
        dz,
        rings,
        top_ring: ((0.80 * rings as f64).round() as usize).min(rings - 3),
        bottom_ring: ((0.30 * rings as f64).round() as usize).max(3),
        half_segs: 2,
        half_rows: 2,
    }
}

fn cup(radius: f64, height: f64, wall: f64, bottom: f64, handle: bool) -> (TriMesh, Vec<SurfacePart>) {
    use SurfacePart::*;
    let layout = handle_layout(radius, height);
    let inner = radius - wall;
    let mut p: Vec<ProfilePoint> = Vec::new();
    segment(&mut p, (0.0, 0.0), (radius, 0.0), OuterBottom, false);
    // outer wall on a uniform ring grid so the handle patches line up
    let wall_start = p.len();
    for k in 0..=layout.rings {
        p.push((radius, k as f64 * layout.dz, OuterWall));
    }
    p.pop();
    p.push((radius, height, Rim));
    p.push((radius - wall / 2.0, height, Rim));
    segment(&mut p, (inner, height), (inner, bottom), InnerWall, false);
    segment(&mut p, (inner, bottom), (0.0, bottom), InnerBottom, true);
    let body = revolve(&p);
    if !handle {
        return (body.mesh, body.parts);
    }
    attach_handle(body, wall_start, layout)
}

/// Stitches a swept tube between two rectangular windows cut into the outer
/// wall, giving a genus-1 closed surface.
fn attach_handle(body: Revolved, wall_start: usize, lay: HandleLayout) -> (TriMesh, Vec<SurfacePart>) {
    let Revolved { mut mesh, mut parts, .. } = body;
    let ring_vertex = |ring: usize, seg: isize| -> u32 {
        let s = seg.rem_euclid(SEGMENTS as isize) as u32;
        body.ring_start[wall_start + ring] + s
    };
    let (hs, hr) = (lay.half_segs as isize, lay.half_rows as isize);

    // boundary loop of a window centered on `ring`, as (seg, row offset)
    let mut loop_offsets: Vec<(isize, isize)> = Vec::new();
    for s in -hs..hs {
        loop_offsets.push((s, -hr));
    }
    for r in -hr..hr {
        loop_offsets.push((hs, r));
    }
    for s in (-hs + 1..=hs).rev() {
        loop_offsets.push((s, hr));
    }
    for r in (-hr + 1..=hr).rev() {
        loop_offsets.push((-hs, r));
    }

    // cut both windows
    let mut window = std::collections::HashSet::new();
    for &center in &[lay.top_ring, lay.bottom_ring] {
        for r in -hr..hr {
            for s in -hs..hs {
                let ring = (center as isize + r) as usize;
                let quad = [
                    ring_vertex(ring, s),
                    ring_vertex(ring, s + 1),
                    ring_vertex(ring + 1, s),
                    ring_vertex(ring + 1, s + 1),
                ];
                window.insert(quad);
            }
        }
    }
    mesh.triangles.retain(|t| {
        !window.iter().any(|q| t.iter().all(|i| q.contains(i)))
    });

    let top_loop: Vec<u32> = loop_offsets
        .iter()
        .map(|&(s, r)| ring_vertex((lay.top_ring as isize + r) as usize, s))
        .collect();
    // the arc maps the window's +Z offset onto −Z at the lower end
    let bottom_loop: Vec<u32> = loop_offsets
        .iter()
        .map(|&(s, r)| ring_vertex((lay.bottom_ring as isize - r) as usize, s))
        .collect();

    let arc_r = lay.arc_radius();
    let mid_z = (lay.top_ring + lay.bottom_ring) as f64 * lay.dz / 2.0;
    let steps = 24;
    let local: Vec<(f64, f64)> = loop_offsets
        .iter()
        .map(|&(s, r)| {
            let theta = TAU * s as f64 / SEGMENTS as f64;
            (lay.radius * theta.sin(), r as f64 * lay.dz)
        })
        .collect();
    let mut rings: Vec<Vec<u32>> = vec![top_loop];
    for i in 1..steps {
        let phi = FRAC_PI_2 - PI * i as f64 / steps as f64;
        let center = Vec3::new(lay.radius + arc_r * phi.cos(), 0.0, mid_z + arc_r * phi.sin());
        let radial = Vec3::new(phi.cos(), 0.0, phi.sin());
        let mut ring = Vec::with_capacity(local.len());
        for &(a, b) in &local {
            ring.push(mesh.vertices.len() as u32);
            mesh.vertices.push(center + Vec3::Y * a + radial * b);
            parts.push(SurfacePart::Handle);
        }
        rings.push(ring);
    }
    rings.push(bottom_loop);

    let n = local.len();
    let mut tube = Vec::new();
    for w in rings.windows(2) {
        for k in 0..n {
            let (a0, a1, b0, b1) = (w[0][k], w[0][(k + 1) % n], w[1][k], w[1][(k + 1) % n]);
            tube.push([a0, a1, b1]);
            tube.push([a0, b1, b0]);
        }
    }
    // match the body's orientation along a shared boundary edge
    let (e0, e1) = (rings[0][0], rings[0][1]);
    let body_has_forward = mesh.triangles.iter().any(|t| (0..3).any(|k| t[k] == e0 && t[(k + 1) % 3] == e1));
    let tube_has_forward = tube.iter().any(|t| (0..3).any(|k| t[k] == e0 && t[(k + 1) % 3] == e1));
    if body_has_forward == tube_has_forward {
        for t in &mut tube {
            t.swap(1, 2);
        }
    }
    mesh.triangles.extend(tube);
    // window interiors are now unreferenced
    let kept = mesh.compact();
    let parts = kept.iter().map(|&i| parts[i]).collect();
    (mesh, parts)
}

fn bottle(radius: f64, height: f64, neck_radius: f64) -> (TriMesh, Vec<SurfacePart>) {
    use SurfacePart::*;
    let shoulder_z = 0.62 * height;
    let neck_z = 0.80 * height;
    let cap_z = 0.90 * height;
    let cap_r = neck_radius + 0.0015;
    let mut p: Vec<ProfilePoint> = Vec::new();
    segment(&mut p, (0.0, 0.0), (radius, 0.0), OuterBottom, false);
    segment(&mut p, (radius, 0.0), (radius, shoulder_z), OuterWall, false);
    let n = 16;
    for i in 0..n {
        let t = i as f64 / n as f64 * FRAC_PI_2;
        let r = neck_radius + (radius - neck_radius) * t.cos();
        let z = shoulder_z + (neck_z - shoulder_z) * t.sin();
        p.push((r, z, Shoulder));
    }
    segment(&mut p, (neck_radius, neck_z), (neck_radius, cap_z), Neck, false);
    segment(&mut p, (cap_r, cap_z), (cap_r, height), Cap, false);
    segment(&mut p, (cap_r, height), (0.0, height), Cap, true);
    let body = revolve(&p);
    (body.mesh, body.parts)
}

fn bowl(radius: f64, height: f64, wall: f64) -> (TriMesh, Vec<SurfacePart>) {
    use SurfacePart::*;
    let base = 0.5 * radius;
    let bottom = wall * 1.2;
    let mut p: Vec<ProfilePoint> = Vec::new();
    segment(&mut p, (0.0, 0.0), (base, 0.0), OuterBottom, false);
    let n = ((height + radius - base) / PROFILE_STEP).ceil() as usize;
    for i in 0..n {
        let t = i as f64 / n as f64 * FRAC_PI_2;
        p.push((base + (radius - base) * t.sin(), height * (1.0 - t.cos()), OuterWall));
    }
    p.push((radius, height, Rim));
    p.push((radius - wall / 2.0, height, Rim));
    let inner_base = base - wall;
    for i in 0..n {
        let t = FRAC_PI_2 * (1.0 - i as f64 / n as f64);
        p.push((inner_base + (radius - base) * t.sin(), bottom + (height - bottom) * (1.0 - t.cos()), InnerWall));
    }
    segment(&mut p, (inner_base, bottom), (0.0, bottom), InnerBottom, true);
    let body = revolve(&p);
    (body.mesh, body.parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Rotation3, SimilarityPose};
    use crate::kdtree::KdTree;

    #[test]
    fn default_cup_is_closed_genus_one_inside_its_box() {
        let params = ShapeParams::default_for(Category::Cup);
        let mesh = generate_object(Category::Cup, Some(&params), 0).unwrap();
        assert!(mesh.is_closed_manifold());
        assert_eq!(mesh.connected_components(), 1);
        assert_eq!(mesh.genus(), 1);
        assert!(mesh.signed_volume() > 0.0);
        let (lo, hi) = params.bounding_box();
        for v in &mesh.vertices {
            assert!(v.x >= lo.x - 1e-9 && v.y >= lo.y - 1e-9 && v.z >= lo.z - 1e-9, "{v:?}");
            assert!(v.x <= hi.x + 1e-9 && v.y <= hi.y + 1e-9 && v.z <= hi.z + 1e-9, "{v:?}");
        }
        // the handle actually reaches out in +X
        assert!(mesh.bounding_box().unwrap().1.x > 0.06);
    }

    #[test]
    fn all_categories_are_watertight_for_many_seeds() {
        for cat in [Category::Cup, Category::Bottle, Category::Bowl] {
            for seed in 0..6 {
                let m = generate_object(cat, None, seed).unwrap();
                assert!(m.is_closed_manifold(), "{cat:?} {seed}");
                assert!(m.signed_volume() > 0.0, "{cat:?} {seed}");
                let expect_genus = if cat == Category::Cup { 1 } else { 0 };
                assert_eq!(m.genus(), expect_genus, "{cat:?} {seed}");
            }
        }
    }

    #[test]
    fn bowl_is_half_turn_symmetric() {
        let m = generate_object(Category::Bowl, None, 11).unwrap();
        let turned = m.transformed(&SimilarityPose::rigid(Rotation3::rot_z(PI), Vec3::ZERO));
        let tree = KdTree::new(&m.vertices);
        let back = KdTree::new(&turned.vertices);
        let a: f64 = turned.vertices.iter().map(|v| tree.nearest(*v).unwrap().1.sqrt()).sum::<f64>();
        let b: f64 = m.vertices.iter().map(|v| back.nearest(*v).unwrap().1.sqrt()).sum::<f64>();
        let chamfer = (a + b) / (2.0 * m.vertices.len() as f64);
        assert!(chamfer <= 1e-3, "{chamfer}");
    }

    #[test]
    fn generation_is_deterministic() {
        for cat in [Category::Cup, Category::Bottle, Category::Bowl] {
            let a = generate_object(cat, None, 42).unwrap();
            let b = generate_object(cat, None, 42).unwrap();
            assert_eq!(a.vertices, b.vertices);
            assert_eq!(a.triangles, b.triangles);
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let p = ShapeParams::Cup { radius: 0.1, height: 0.1, wall: 0.004, bottom: 0.006, handle: true };
        assert!(matches!(generate_object(Category::Cup, Some(&p), 0), Err(SceneError::InvalidParams(_))));
        let p = ShapeParams::default_for(Category::Bowl);
        assert!(generate_object(Category::Cup, Some(&p), 0).is_err());
    }

    #[test]
    fn canonical_scale_fits_the_unit_cube() {
        let m = generate_object(Category::Bottle, None, 3).unwrap();
        let s = canonical_scale(&m);
        let max = m.vertices.iter().map(|v| (*v * s).abs().max_element()).fold(0.0, f64::max);
        assert!((max - CANONICAL_HALF_EXTENT).abs() < 1e-12);
    }
}
