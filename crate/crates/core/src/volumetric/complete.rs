//! Completion of a partial TSDF into occupancy probabilities.
//!
//! Every strategy produces a binary indicator which is then smoothed by one
//! 3³ box filter (zero padded) and clamped to `[0, 1]`.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{GridSpec, OccupancyGrid, TsdfVolume, VolumeError, Weight};
use crate::scene::Category;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[serde(alias = "RevolutionPrior")]
    Revolution,
    #[serde(alias = "MirrorPrior")]
    Mirror,
    #[serde(alias = "PartialOnly")]
    Partial,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Revolution => "revolution",
            Strategy::Mirror => "mirror",
            Strategy::Partial => "partial",
        }
    }
}

impl FromStr for Strategy {
    type Err = VolumeError;
    fn from_str(s: &str) -> Result<Self, VolumeError> {
        match s.to_ascii_lowercase().as_str() {
            "revolution" | "revolutionprior" | "revolution_prior" => Ok(Strategy::Revolution),
            "mirror" | "mirrorprior" | "mirror_prior" => Ok(Strategy::Mirror),
            "partial" | "partialonly" | "partial_only" => Ok(Strategy::Partial),
            _ => Err(VolumeError::UnknownStrategy(s.to_string())),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RevolutionParams {
    /// Observed voxels with `−band ≤ value ≤ 0` count as surface evidence.
    pub evidence_band: f32,
    /// Radial gaps up to this many bins are closed.
    pub closing_gap: usize,
    /// Evidence beyond this multiple of the body radius is handle residue.
    pub handle_ratio: f64,
    /// Half-width (rows) of the median filter on the body radius.
    pub median_half_window: usize,
    /// Rows filled as a solid disc at the bottom of containers.
    pub base_rows: usize,
}

impl Default for RevolutionParams {
    fn default() -> Self {
        RevolutionParams { evidence_band: 0.5, closing_gap: 2, handle_ratio: 1.15, median_half_window: 3, base_rows: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completer {
    pub strategy: Strategy,
    /// Containers keep a hollow profile; solids (or no hint) are filled to the axis.
    #[serde(default)]
    pub category: Option<Category>,
    #[serde(default)]
    pub revolution: RevolutionParams,
}

impl Completer {
    pub fn new(strategy: Strategy, category: Option<Category>) -> Self {
        Completer { strategy, category, revolution: RevolutionParams::default() }
    }
}

pub fn complete(tsdf: &TsdfVolume, completer: &Completer) -> Result<OccupancyGrid, VolumeError> {
    let ind = indicator(tsdf, completer)?;
    Ok(box_filter(&tsdf.spec, &ind))
}

/// The binary occupancy a strategy assigns before smoothing (values in {0, 1}).
pub fn indicator(tsdf: &TsdfVolume, completer: &Completer) -> Result<Vec<f32>, VolumeError> {
    tsdf.spec.validate()?;
    let partial = partial_indicator(tsdf);
    let out = match completer.strategy {
        Strategy::Partial => partial,
        Strategy::Mirror => union(&partial, &mirror_xz(&tsdf.spec, &partial)),
        Strategy::Revolution => revolve(tsdf, completer),
    };
    Ok(out.into_iter().map(|b| b as u8 as f32).collect())
}

fn partial_indicator(tsdf: &TsdfVolume) -> Vec<bool> {
    tsdf.values.iter().zip(&tsdf.weights).map(|(v, w)| *w == Weight::Observed && *v <= 0.0).collect()
}

fn union(a: &[bool], b: &[bool]) -> Vec<bool> {
    a.iter().zip(b).map(|(x, y)| *x || *y).collect()
}

/// Reflection about the canonical X-Z plane (y → −y), which maps voxel row
/// `j` to `N − 1 − j` on a grid centered at y = 0.
fn mirror_xz(spec: &GridSpec, ind: &[bool]) -> Vec<bool> {
    let n = spec.resolution;
    (0..spec.len())
        .map(|idx| {
            let (i, j, k) = spec.coords(idx);
            ind[spec.index(i, n - 1 - j, k)]
        })
        .collect()
}

/// Per-row radial extent `[inner, outer]` (in radial bins) of the body.
type Run = Option<(usize, usize)>;

/// Angular sectors used to estimate the outer radius of each profile row.
const SECTORS: usize = 32;

fn revolve(tsdf: &TsdfVolume, completer: &Completer) -> Vec<bool> {
    let spec = &tsdf.spec;
    let p = &completer.revolution;
    let n = spec.resolution;
    let h = spec.voxel_size;
    let radius = |i: usize, j: usize| {
        let c = spec.center(i, j, 0);
        (c.x * c.x + c.y * c.y).sqrt()
    };
    let n_bins = (n as f64 * 0.75).ceil() as usize + 2;
    let bin_of = |r: f64| ((r / h) as usize).min(n_bins - 1);

    let evidence: Vec<bool> = tsdf
        .values
        .iter()
        .zip(&tsdf.weights)
        .map(|(v, w)| *w == Weight::Observed && *v <= 0.0 && *v >= -p.evidence_band)
        .collect();

    let mut profile = vec![vec![false; n_bins]; n];
    for (idx, _) in evidence.iter().enumerate().filter(|(_, e)| **e) {
        let (i, j, k) = spec.coords(idx);
        profile[k][bin_of(radius(i, j))] = true;
    }
    for row in &mut profile {
        *row = close_1d(row, p.closing_gap);
    }

    let runs: Vec<Run> = profile
        .iter()
        .map(|row| {
            let a = row.iter().position(|&b| b)?;
            let len = row[a..].iter().take_while(|&&b| b).count();
            Some((a, a + len - 1))
        })
        .collect();

    // Continuous outer radius per row: the median over angular sectors of the
    // outermost run evidence. Silhouette shadows and handles touch only a few
    // sectors, so they do not inflate the body.
    let mut sector_max = vec![vec![f64::NEG_INFINITY; SECTORS]; n];
    for (idx, _) in evidence.iter().enumerate().filter(|(_, e)| **e) {
        let (i, j, k) = spec.coords(idx);
        let Some((a, b)) = runs[k] else { continue };
        let c = spec.center(i, j, k);
        let r = radius(i, j);
        if !(a..=b).contains(&bin_of(r)) {
            continue;
        }
        let t = (c.y.atan2(c.x) + std::f64::consts::PI) / std::f64::consts::TAU;
        let s = ((t * SECTORS as f64) as usize).min(SECTORS - 1);
        sector_max[k][s] = sector_max[k][s].max(r);
    }
    let outer: Vec<Option<f64>> = (0..n)
        .map(|k| {
            runs[k]?;
            let mut m: Vec<f64> = sector_max[k].iter().copied().filter(|r| r.is_finite()).collect();
            m.sort_by(f64::total_cmp);
            Some(m[m.len() / 2])
        })
        .collect();

    // median-smooth the outer radius over rows against single-row spikes
    let mut rows: Vec<Option<(usize, f64)>> = vec![None; n];
    for k in 0..n {
        if let Some((a, _)) = runs[k] {
            let lo = k.saturating_sub(p.median_half_window);
            let hi = (k + p.median_half_window).min(n - 1);
            let mut window: Vec<f64> = outer[lo..=hi].iter().flatten().copied().collect();
            window.sort_by(f64::total_cmp);
            rows[k] = Some((a, window[window.len() / 2]));
        }
    }

    // bridge rows without evidence between observed rows
    let observed_rows: Vec<usize> = (0..n).filter(|&k| rows[k].is_some()).collect();
    if let (Some(&first), Some(&last)) = (observed_rows.first(), observed_rows.last()) {
        for k in first..=last {
            if rows[k].is_none() {
                let below = (first..k).rev().find_map(|m| rows[m]).expect("first row observed");
                let above = (k + 1..=last).find_map(|m| rows[m]).expect("last row observed");
                rows[k] = Some((below.0.min(above.0), below.1.max(above.1)));
            }
        }
        let solid = !completer.category.is_some_and(Category::is_container);
        if solid {
            for row in rows.iter_mut().flatten() {
                row.0 = 0;
            }
        } else {
            for row in rows.iter_mut().skip(first).take(p.base_rows).flatten() {
                row.0 = 0;
            }
        }
    }
    // voxel centers sample the surface with up to half a voxel of slack
    let fill_radius = |r_out: f64| r_out + 0.5 * h;

    let mut out: Vec<bool> = (0..spec.len())
        .map(|idx| {
            let (i, j, k) = spec.coords(idx);
            match rows[k] {
                Some((a, r_out)) => {
                    let r = radius(i, j);
                    bin_of(r) >= a && r <= fill_radius(r_out)
                }
                None => false,
            }
        })
        .collect();

    // off-body residue (handles) is mirrored instead of revolved
    let residue: Vec<bool> = (0..spec.len())
        .map(|idx| {
            if !evidence[idx] {
                return false;
            }
            let (i, j, k) = spec.coords(idx);
            match rows[k] {
                Some((_, r_out)) => radius(i, j) > p.handle_ratio * fill_radius(r_out),
                None => true,
            }
        })
        .collect();
    let mirrored = mirror_xz(spec, &residue);
    for idx in 0..out.len() {
        out[idx] |= residue[idx] || mirrored[idx] || evidence[idx];
    }
    out
}

/// Morphological closing of a 1-D mask: dilate then erode by `gap` bins.
fn close_1d(row: &[bool], gap: usize) -> Vec<bool> {
    let n = row.len();
    let dilated: Vec<bool> = (0..n).map(|i| row[i.saturating_sub(gap)..=(i + gap).min(n - 1)].iter().any(|&b| b)).collect();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(gap);
            let hi = (i + gap).min(n - 1);
            // the padded boundary counts as set so runs touching the edge survive
            dilated[lo..=hi].iter().all(|&b| b)
        })
        .collect()
}

/// One pass of a zero-padded 3³ mean filter, clamped to `[0, 1]`.
pub(crate) fn box_filter(spec: &GridSpec, raw: &[f32]) -> OccupancyGrid {
    let n = spec.resolution;
    let pass = |src: &[f32], axis: usize| -> Vec<f32> {
        let stride = [1, n, n * n][axis];
        (0..spec.len())
            .map(|idx| {
                let c = [idx % n, (idx / n) % n, idx / (n * n)][axis];
                let mut s = src[idx];
                if c > 0 {
                    s += src[idx - stride];
                }
                if c + 1 < n {
                    s += src[idx + stride];
                }
                s
            })
            .collect()
    };
    let summed = pass(&pass(&pass(raw, 0), 1), 2);
    let values = summed.into_iter().map(|s| (s / 27.0).clamp(0.0, 1.0)).collect();
    OccupancyGrid { spec: *spec, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Rotation3, SimilarityPose, Vec3};
    use crate::volumetric::voxelize_tsdf;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    fn iou(a: &[f32], b: &[f32]) -> f64 {
        let inter = a.iter().zip(b).filter(|(x, y)| **x >= 0.5 && **y >= 0.5).count();
        let uni = a.iter().zip(b).filter(|(x, y)| **x >= 0.5 || **y >= 0.5).count();
        inter as f64 / uni as f64
    }

    /// Analytic TSDF of a vertical cylinder (radius r, half-height hh),
    /// observed wherever `observed(center)` holds.
    fn cylinder_tsdf(r: f64, hh: f64, observed: impl Fn(Vec3) -> bool) -> TsdfVolume {
        let spec = GridSpec::unit_cube(64);
        let mut values = Vec::new();
        let mut weights = Vec::new();
        for idx in 0..spec.len() {
            let (i, j, k) = spec.coords(idx);
            let c = spec.center(i, j, k);
            let radial = (c.x * c.x + c.y * c.y).sqrt() - r;
            let axial = c.z.abs() - hh;
            let sdf = if radial > 0.0 && axial > 0.0 { (radial * radial + axial * axial).sqrt() } else { radial.max(axial) };
            values.push((sdf / spec.truncation).clamp(-1.0, 1.0) as f32);
            weights.push(if observed(c) { Weight::Observed } else { Weight::Unobserved });
        }
        TsdfVolume::new(spec, values, weights).unwrap()
    }

    #[test]
    fn full_view_revolution_is_near_identity() {
        let tsdf = cylinder_tsdf(0.2, 0.3, |_| true);
        let partial = indicator(&tsdf, &Completer::new(Strategy::Partial, None)).unwrap();
        let rev = indicator(&tsdf, &Completer::new(Strategy::Revolution, None)).unwrap();
        assert!(iou(&partial, &rev) >= 0.95, "{}", iou(&partial, &rev));
    }

    #[test]
    fn half_view_revolution_doubles_occupancy() {
        let tsdf = cylinder_tsdf(0.2, 0.3, |c| c.x >= 0.0);
        let count = |v: &[f32]| v.iter().filter(|&&x| x == 1.0).count();
        let partial = count(&indicator(&tsdf, &Completer::new(Strategy::Partial, None)).unwrap());
        let rev = count(&indicator(&tsdf, &Completer::new(Strategy::Revolution, Some(Category::Bottle))).unwrap());
        assert!(rev as f64 >= 1.8 * partial as f64, "{rev} vs {partial}");
    }

    #[test]
    fn projective_half_view_is_completed() {
        // a real single-view cylinder cloud: the visible side only
        let cam = Vec3::new(2.5, 0.0, 0.8);
        let mut pts = Vec::new();
        for a in 0..720 {
            let t = a as f64 / 720.0 * std::f64::consts::TAU;
            for z in 0..200 {
                let p = Vec3::new(0.2 * t.cos(), 0.2 * t.sin(), -0.3 + 0.6 * z as f64 / 199.0);
                let normal = Vec3::new(t.cos(), t.sin(), 0.0);
                if normal.dot(cam - p) > 0.0 {
                    pts.push(p);
                }
            }
        }
        for a in 0..300 {
            for b in 0..300 {
                let p = Vec3::new(-0.2 + 0.4 * a as f64 / 299.0, -0.2 + 0.4 * b as f64 / 299.0, 0.3);
                if p.x * p.x + p.y * p.y <= 0.04 {
                    pts.push(p);
                }
            }
        }
        let spec = GridSpec::unit_cube(64);
        let tsdf = voxelize_tsdf(&crate::scene::PointCloud::new(pts), cam, &spec).unwrap();
        let truth = cylinder_tsdf(0.2, 0.3, |_| true);
        let truth = indicator(&truth, &Completer::new(Strategy::Partial, None)).unwrap();
        let rev = indicator(&tsdf, &Completer::new(Strategy::Revolution, Some(Category::Bottle))).unwrap();
        let partial = indicator(&tsdf, &Completer::new(Strategy::Partial, None)).unwrap();
        assert!(iou(&rev, &truth) > 0.85, "{}", iou(&rev, &truth));
        assert!(iou(&rev, &truth) > iou(&partial, &truth) + 0.3);
    }

    #[test]
    fn partial_is_binary_and_never_hallucinates() {
        let tsdf = cylinder_tsdf(0.15, 0.2, |c| c.y > 0.05);
        let raw = indicator(&tsdf, &Completer::new(Strategy::Partial, None)).unwrap();
        for (idx, v) in raw.iter().enumerate() {
            assert!(*v == 0.0 || *v == 1.0);
            if tsdf.weights[idx] == Weight::Unobserved {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn mirror_is_symmetric_about_xz() {
        let tsdf = cylinder_tsdf(0.15, 0.2, |c| c.y > 0.0);
        let m = indicator(&tsdf, &Completer::new(Strategy::Mirror, None)).unwrap();
        let spec = tsdf.spec;
        let n = spec.resolution;
        for idx in 0..spec.len() {
            let (i, j, k) = spec.coords(idx);
            assert_eq!(m[idx], m[spec.index(i, n - 1 - j, k)]);
        }
    }

    #[test]
    fn unknown_strategy() {
        assert_eq!("revolution".parse::<Strategy>(), Ok(Strategy::Revolution));
        assert_eq!("PartialOnly".parse::<Strategy>(), Ok(Strategy::Partial));
        assert!(matches!("voxnet".parse::<Strategy>(), Err(VolumeError::UnknownStrategy(_))));
    }

    #[test]
    fn revolution_is_invariant_to_rotation_about_z() {
        use crate::scene::{backproject, generate_object, render_depth, canonical_scale};
        use crate::geometry::{CameraIntrinsics, Frame};
        let mesh = generate_object(Category::Bottle, None, 3).unwrap();
        let s = canonical_scale(&mesh);
        let intr = CameraIntrinsics::from_fov(320, 240, 0.9).unwrap();
        let cam = Frame::look_at(Vec3::new(0.45, -0.1, 0.25), Vec3::ZERO, Vec3::Z).unwrap();
        let (d, m) = render_depth(&mesh, &SimilarityPose::IDENTITY, &cam, &intr).unwrap();
        let cloud = backproject(&d, &m, &intr).unwrap();
        // camera frame -> object frame -> canonical
        let to_cano = SimilarityPose { scale: s, ..Default::default() }.compose(&cam.as_pose());
        let cloud = cloud.transformed(&to_cano);
        let eye = to_cano.apply(Vec3::ZERO);
        let spec = GridSpec::unit_cube(64);
        let completer = Completer::new(Strategy::Revolution, Some(Category::Bottle));
        let a = complete(&voxelize_tsdf(&cloud, eye, &spec).unwrap(), &completer).unwrap();
        let rot = SimilarityPose::rigid(Rotation3::rot_z(std::f64::consts::FRAC_PI_2), Vec3::ZERO);
        let b = complete(&voxelize_tsdf(&cloud.transformed(&rot), rot.apply(eye), &spec).unwrap(), &completer).unwrap();
        assert!(iou(&a.values, &b.values) >= 0.9, "{}", iou(&a.values, &b.values));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn completed_values_stay_in_unit_interval(seed in 0u64..1000, strat in 0usize..3) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let spec = GridSpec::unit_cube(12);
            let values: Vec<f32> = (0..spec.len()).map(|_| rng.random_range(-1.0f32..=1.0)).collect();
            let weights = (0..spec.len()).map(|_| if rng.random::<bool>() { Weight::Observed } else { Weight::Unobserved }).collect();
            let tsdf = TsdfVolume::new(spec, values, weights).unwrap();
            let s = [Strategy::Partial, Strategy::Mirror, Strategy::Revolution][strat];
            let occ = complete(&tsdf, &Completer::new(s, Some(Category::Cup))).unwrap();
            prop_assert!(occ.values.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
