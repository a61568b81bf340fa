//! Structured hexahedral meshes of a square plate with an edge v-notch.
//!
//! The plate occupies `[0, L] × [0, L] × [0, t]`. The notch lies on the
//! bisector plane `y = L/2`, opens on one of the two x-edges and ends in a
//! sharp tip edge parallel to z. Nodes on the bisector behind the tip are
//! duplicated, one copy per flank, and each half of the plate is stretched
//! linearly in y so that the flanks open to the requested angle.
//!
//! Grid lines are graded geometrically toward the tip in x and toward the
//! bisector in y, so the smallest cells sit at the tip.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::fem::reference::{self, ReferenceHex, FACE_NODES, NODE_COORDS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid resolution: {0}")]
    InvalidResolution(String),
    #[error("mesh generation failed: element {element} collapsed (det J = {det:e} at Gauss point {point})")]
    CollapsedElement { element: usize, point: usize, det: f64 },
    #[error("sampling radius {r_max} exceeds the ligament length {ligament}")]
    OutOfDomain { r_max: f64, ligament: f64 },
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
}

/// Plate edge on which the notch opens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NotchEdge {
    /// The `x = 0` edge; the ligament runs toward `+x`.
    #[default]
    MinX,
    /// The `x = L` edge; the ligament runs toward `−x`.
    MaxX,
}

impl NotchEdge {
    pub fn as_str(&self) -> &'static str {
        match self {
            NotchEdge::MinX => "min_x",
            NotchEdge::MaxX => "max_x",
        }
    }
}

impl std::str::FromStr for NotchEdge {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "min_x" => Ok(NotchEdge::MinX),
            "max_x" => Ok(NotchEdge::MaxX),
            other => Err(format!("unknown notch edge '{other}' (expected min_x or max_x)")),
        }
    }
}

/// Dimensions in mm, angle in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotchedPlateGeometry {
    pub side_length: f64,
    pub thickness: f64,
    pub notch_angle: f64,
    pub notch_depth: f64,
    pub notch_edge: NotchEdge,
}

impl Default for NotchedPlateGeometry {
    fn default() -> Self {
        NotchedPlateGeometry {
            side_length: 100.0,
            thickness: 10.0,
            notch_angle: 2.0,
            notch_depth: 50.0,
            notch_edge: NotchEdge::MinX,
        }
    }
}

impl NotchedPlateGeometry {
    pub fn validate(&self) -> Result<(), MeshError> {
        let bad = |m: String| Err(MeshError::InvalidGeometry(m));
        if !(self.side_length.is_finite() && self.side_length > 0.0) {
            return bad(format!("side_length must be positive, got {}", self.side_length));
        }
        if !(self.thickness.is_finite() && self.thickness > 0.0) {
            return bad(format!("thickness must be positive, got {}", self.thickness));
        }
        if !(self.notch_angle > 0.0 && self.notch_angle < 180.0) {
            return bad(format!("notch_angle must lie in (0, 180) degrees, got {}", self.notch_angle));
        }
        if !(self.notch_depth > 0.0 && self.notch_depth <= 0.5 * self.side_length) {
            return bad(format!(
                "notch_depth must lie in (0, side_length/2], got {} for side {}",
                self.notch_depth, self.side_length
            ));
        }
        Ok(())
    }

    /// x coordinate of the tip edge.
    pub fn tip_x(&self) -> f64 {
        match self.notch_edge {
            NotchEdge::MinX => self.notch_depth,
            NotchEdge::MaxX => self.side_length - self.notch_depth,
        }
    }

    pub fn bisector_y(&self) -> f64 {
        0.5 * self.side_length
    }

    /// Unit direction from the tip into the uncracked ligament.
    pub fn ligament_direction(&self) -> f64 {
        match self.notch_edge {
            NotchEdge::MinX => 1.0,
            NotchEdge::MaxX => -1.0,
        }
    }

    pub fn ligament(&self) -> f64 {
        self.side_length - self.notch_depth
    }

    /// Mid-thickness point of the tip edge.
    pub fn tip_midpoint(&self) -> [f64; 3] {
        [self.tip_x(), self.bisector_y(), 0.5 * self.thickness]
    }

    /// Half opening of the notch at abscissa `x` (zero ahead of the tip).
    pub fn half_opening(&self, x: f64) -> f64 {
        let behind = match self.notch_edge {
            NotchEdge::MinX => self.tip_x() - x,
            NotchEdge::MaxX => x - self.tip_x(),
        };
        (0.5 * self.notch_angle).to_radians().tan() * behind.max(0.0)
    }
}

/// Mesh resolution controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshResolution {
    /// Coarse cells along x, y and z.
    pub n_coarse: [usize; 3],
    /// Size ratio between consecutive refinement bands.
    pub grading_ratio: f64,
    /// Number of geometric bands added on each side of the tip.
    pub tip_refine_levels: usize,
}

impl MeshResolution {
    pub fn validate(&self) -> Result<(), MeshError> {
        let [nx, ny, nz] = self.n_coarse;
        if nx < 2 || ny < 2 || nz < 1 {
            return Err(MeshError::InvalidResolution(format!(
                "n_coarse must be at least 2 in-plane and 1 through the thickness, got {:?}",
                self.n_coarse
            )));
        }
        if !(self.grading_ratio >= 1.0 && self.grading_ratio.is_finite()) {
            return Err(MeshError::InvalidResolution(format!("grading_ratio must be >= 1, got {}", self.grading_ratio)));
        }
        Ok(())
    }
}

impl Default for MeshResolution {
    fn default() -> Self {
        MeshResolution { n_coarse: [8, 8, 2], grading_ratio: 2.0, tip_refine_levels: 6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FacetTag {
    LoadedLowY,
    LoadedHighY,
    CrackFlank,
    Free,
}

impl FacetTag {
    pub const ALL: [FacetTag; 4] = [FacetTag::LoadedLowY, FacetTag::LoadedHighY, FacetTag::CrackFlank, FacetTag::Free];

    pub fn code(&self) -> u8 {
        match self {
            FacetTag::LoadedLowY => 1,
            FacetTag::LoadedHighY => 2,
            FacetTag::CrackFlank => 3,
            FacetTag::Free => 4,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            FacetTag::LoadedLowY => "LOADED_LOW_Y",
            FacetTag::LoadedHighY => "LOADED_HIGH_Y",
            FacetTag::CrackFlank => "CRACK_FLANK",
            FacetTag::Free => "FREE",
        }
    }
}

impl fmt::Display for FacetTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFacet {
    pub element: usize,
    /// Local face index into [`FACE_NODES`].
    pub face: u8,
    pub tag: FacetTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<[f64; 3]>,
    pub elements: Vec<[usize; 8]>,
    pub boundary_facets: Vec<BoundaryFacet>,
}

impl Mesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn dof_count(&self) -> usize {
        3 * self.nodes.len()
    }

    pub fn element_nodes(&self, e: usize) -> [[f64; 3]; 8] {
        self.elements[e].map(|n| self.nodes[n])
    }

    pub fn facet_nodes(&self, facet: &BoundaryFacet) -> [usize; 4] {
        let conn = &self.elements[facet.element];
        FACE_NODES[facet.face as usize].map(|a| conn[a])
    }

    /// Sorted, de-duplicated nodes touched by facets carrying `tag`.
    pub fn nodes_with_tag(&self, tag: FacetTag) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .boundary_facets
            .iter()
            .filter(|f| f.tag == tag)
            .flat_map(|f| self.facet_nodes(f))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Index of the node closest to `p` (lowest index wins ties).
    pub fn nearest_node(&self, p: [f64; 3]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, x) in self.nodes.iter().enumerate() {
            let d = (x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2) + (x[2] - p[2]).powi(2);
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Area of a boundary facet by 2×2 Gauss quadrature.
    pub fn facet_area(&self, facet: &BoundaryFacet) -> f64 {
        let p = self.facet_nodes(facet).map(|n| self.nodes[n]);
        let mut area = 0.0;
        for (s, t) in gauss_2d() {
            let (_, da) = quad_surface_element(&p, s, t);
            area += norm3(&da);
        }
        area
    }

    /// Checks connectivity ranges and the Jacobian sign at every Gauss point.
    pub fn check_jacobians(&self) -> Result<(), MeshError> {
        let r = ReferenceHex::new();
        for (e, conn) in self.elements.iter().enumerate() {
            if conn.iter().any(|&n| n >= self.nodes.len()) {
                return Err(MeshError::InvalidResolution(format!("element {e} references a missing node")));
            }
            let x = self.element_nodes(e);
            for q in 0..8 {
                let det = reference::det3(&reference::jacobian(&x, &r.grad[q]));
                if !(det > 0.0) {
                    return Err(MeshError::CollapsedElement { element: e, point: q, det });
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn gauss_2d() -> [(f64, f64); 4] {
    let g = reference::GAUSS_1D;
    [(-g, -g), (g, -g), (g, g), (-g, g)]
}

/// Bilinear quad shape values and the area vector `∂x/∂s × ∂x/∂t` at `(s, t)`.
pub(crate) fn quad_surface_element(p: &[[f64; 3]; 4], s: f64, t: f64) -> ([f64; 4], [f64; 3]) {
    let sc = [-1.0, 1.0, 1.0, -1.0];
    let tc = [-1.0, -1.0, 1.0, 1.0];
    let mut n = [0.0; 4];
    let mut ds = [0.0; 3];
    let mut dt = [0.0; 3];
    for a in 0..4 {
        n[a] = 0.25 * (1.0 + sc[a] * s) * (1.0 + tc[a] * t);
        let dns = 0.25 * sc[a] * (1.0 + tc[a] * t);
        let dnt = 0.25 * (1.0 + sc[a] * s) * tc[a];
        for d in 0..3 {
            ds[d] += dns * p[a][d];
            dt[d] += dnt * p[a][d];
        }
    }
    (n, cross(&ds, &dt))
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm3(a: &[f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Node offsets from a focus point, graded so the cell touching the focus has
/// size `h / g^levels`, followed by `n` − 1 further coarse cells.
fn graded_offsets(length: f64, n: usize, grading: f64, levels: usize) -> Vec<f64> {
    let h = length / n as f64;
    let mut d = vec![0.0];
    if grading > 1.0 && levels > 0 {
        for l in (1..=levels).rev() {
            d.push(h / grading.powi(l as i32));
        }
    }
    for k in 1..=n {
        d.push(h * k as f64);
    }
    // pin the far end exactly
    *d.last_mut().unwrap() = length;
    d
}

/// Axis coordinates `[lo, hi]` with a graded split at `focus`.
fn graded_axis(lo: f64, focus: f64, hi: f64, n_lo: usize, n_hi: usize, grading: f64, levels: usize) -> (Vec<f64>, usize) {
    let below = graded_offsets(focus - lo, n_lo, grading, levels);
    let above = graded_offsets(hi - focus, n_hi, grading, levels);
    let mut coords: Vec<f64> = below.iter().rev().map(|d| focus - d).collect();
    coords[0] = lo;
    let split = coords.len() - 1;
    coords.extend(above.iter().skip(1).map(|d| focus + d));
    *coords.last_mut().unwrap() = hi;
    (coords, split)
}

/// Generates the graded notched-plate mesh.
pub fn generate_notched_plate(geom: &NotchedPlateGeometry, res: &MeshResolution) -> Result<Mesh, MeshError> {
    geom.validate()?;
    res.validate()?;
    let [nx, ny, nz] = res.n_coarse;

    let side = geom.side_length;
    let tip = geom.tip_x();
    let n_left = ((nx as f64 * tip / side).round() as usize).clamp(1, nx - 1);
    let (xs, ic) = graded_axis(0.0, tip, side, n_left, nx - n_left, res.grading_ratio, res.tip_refine_levels);
    let n_low = (ny / 2).max(1);
    let (ys, jc) =
        graded_axis(0.0, geom.bisector_y(), side, n_low, ny - n_low, res.grading_ratio, res.tip_refine_levels);
    let zs: Vec<f64> = (0..=nz).map(|k| geom.thickness * k as f64 / nz as f64).collect();

    let ex = xs.len() - 1;
    let ey = ys.len() - 1;
    let ez = nz;
    // Grid column i lies behind the tip (inside the notch mouth region).
    let behind = |i: usize| match geom.notch_edge {
        NotchEdge::MinX => i < ic,
        NotchEdge::MaxX => i > ic,
    };
    // element column i lies behind the tip when both of its x lines do
    let elem_behind = |i: usize| match geom.notch_edge {
        NotchEdge::MinX => i < ic,
        NotchEdge::MaxX => i >= ic,
    };

    // Row index space: rows 0..=jc are the lower half (row jc = lower flank copy),
    // rows jc+1..=ey+1 the upper half (row jc+1 = upper flank copy).
    let rows = ey + 2;
    let half = 0.5 * side;
    let mut ids = vec![usize::MAX; (ex + 1) * rows * (ez + 1)];
    let at = |i: usize, r: usize, k: usize| (i * rows + r) * (ez + 1) + k;
    let mut nodes = Vec::new();
    for i in 0..=ex {
        let x = xs[i];
        let h = geom.half_opening(x);
        for r in 0..rows {
            let (j, upper) = if r <= jc { (r, false) } else { (r - 1, true) };
            let shared = r == jc + 1 && !behind(i);
            for k in 0..=ez {
                if shared {
                    ids[at(i, r, k)] = ids[at(i, jc, k)];
                    continue;
                }
                let y0 = ys[j];
                let y = if upper { y0 + h * (side - y0) / half } else { y0 - h * y0 / half };
                ids[at(i, r, k)] = nodes.len();
                nodes.push([x, y, zs[k]]);
            }
        }
    }

    let mut elements = Vec::with_capacity(ex * ey * ez);
    let mut boundary_facets = Vec::new();
    for i in 0..ex {
        for j in 0..ey {
            // element row j spans grid rows (j, j+1) below the bisector, (j+1, j+2) above
            let (r0, r1) = if j < jc { (j, j + 1) } else { (j + 1, j + 2) };
            for k in 0..ez {
                let e = elements.len();
                elements.push([
                    ids[at(i, r0, k)],
                    ids[at(i + 1, r0, k)],
                    ids[at(i + 1, r1, k)],
                    ids[at(i, r1, k)],
                    ids[at(i, r0, k + 1)],
                    ids[at(i + 1, r0, k + 1)],
                    ids[at(i + 1, r1, k + 1)],
                    ids[at(i, r1, k + 1)],
                ]);
                let mut push = |face: u8, tag| boundary_facets.push(BoundaryFacet { element: e, face, tag });
                if i == 0 {
                    push(0, FacetTag::Free);
                }
                if i == ex - 1 {
                    push(1, FacetTag::Free);
                }
                if j == 0 {
                    push(2, FacetTag::LoadedLowY);
                }
                if j == ey - 1 {
                    push(3, FacetTag::LoadedHighY);
                }
                if elem_behind(i) {
                    if j + 1 == jc {
                        push(3, FacetTag::CrackFlank);
                    }
                    if j == jc {
                        push(2, FacetTag::CrackFlank);
                    }
                }
                if k == 0 {
                    push(4, FacetTag::Free);
                }
                if k == ez - 1 {
                    push(5, FacetTag::Free);
                }
            }
        }
    }

    let mesh = Mesh { nodes, elements, boundary_facets };
    mesh.check_jacobians()?;
    Ok(mesh)
}

/// Summary of element shape quality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshQualityReport {
    pub min_scaled_jacobian: f64,
    pub mean_scaled_jacobian: f64,
    pub element_count: usize,
    pub node_count: usize,
    pub dof_count: usize,
}

impl fmt::Display for MeshQualityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "elements            {}", self.element_count)?;
        writeln!(f, "nodes               {}", self.node_count)?;
        writeln!(f, "dofs                {}", self.dof_count)?;
        writeln!(f, "min scaled Jacobian {:.6}", self.min_scaled_jacobian)?;
        write!(f, "mean scaled Jacobian {:.6}", self.mean_scaled_jacobian)
    }
}

/// Minimum over the eight corners of the determinant of the normalized
/// corner edge vectors. 1 for a rectangular box, ≤ 0 for an inverted corner.
pub fn scaled_jacobian(x: &[[f64; 3]; 8]) -> f64 {
    let mut min = f64::INFINITY;
    for a in 0..8 {
        let c = NODE_COORDS[a];
        let mut edges = [[0.0; 3]; 3];
        for (d, edge) in edges.iter_mut().enumerate() {
            let mut nc = c;
            nc[d] = -nc[d];
            let b = NODE_COORDS.iter().position(|p| *p == nc).unwrap();
            // orient along +ξ_d
            let s = -c[d];
            for k in 0..3 {
                edge[k] = s * (x[b][k] - x[a][k]);
            }
            let len = norm3(edge);
            if len == 0.0 {
                return 0.0;
            }
            edge.iter_mut().for_each(|v| *v /= len);
        }
        min = min.min(reference::det3(&edges));
    }
    min
}

pub fn mesh_quality(mesh: &Mesh) -> MeshQualityReport {
    let q: Vec<f64> = (0..mesh.element_count()).map(|e| scaled_jacobian(&mesh.element_nodes(e))).collect();
    let min = q.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = if q.is_empty() { f64::NAN } else { q.iter().sum::<f64>() / q.len() as f64 };
    MeshQualityReport {
        min_scaled_jacobian: min,
        mean_scaled_jacobian: mean,
        element_count: mesh.element_count(),
        node_count: mesh.node_count(),
        dof_count: mesh.dof_count(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MidlinePoint {
    pub r: f64,
    pub point: [f64; 3],
}

/// Equally spaced points on the mid-thickness ray from the tip edge into the
/// ligament, `r` from 0 to `r_max`.
pub fn midline_points(geom: &NotchedPlateGeometry, n_samples: usize, r_max: f64) -> Result<Vec<MidlinePoint>, MeshError> {
    geom.validate()?;
    if n_samples < 2 {
        return Err(MeshError::TooFewSamples { min: 2, got: n_samples });
    }
    let ligament = geom.ligament();
    if !(r_max > 0.0 && r_max <= ligament) {
        return Err(MeshError::OutOfDomain { r_max, ligament });
    }
    let [x0, y0, z0] = geom.tip_midpoint();
    let dir = geom.ligament_direction();
    Ok((0..n_samples)
        .map(|i| {
            let r = r_max * i as f64 / (n_samples - 1) as f64;
            MidlinePoint { r, point: [x0 + dir * r, y0, z0] }
        })
        .collect())
}

/// Set of node coordinates quantized to `tol`, for symmetry checks.
pub fn quantized_node_set(nodes: &[[f64; 3]], tol: f64) -> HashSet<[i64; 3]> {
    nodes.iter().map(|p| p.map(|v| (v / tol).round() as i64)).collect()
}
