//! Assembly of the Picard-frozen linear system.
//!
//! Each Picard step solves a linear elasticity problem whose moduli are
//! divided pointwise by `1 + β ∇·uⁿ`, with `uⁿ` the previous iterate. The
//! factor is evaluated independently at every Gauss point.

pub mod element;
pub mod reference;
pub mod sparse;

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::material::MaterialParams;
use crate::tensor::Mat3;
use crate::mesh::{gauss_2d, quad_surface_element, FacetTag, Mesh, NotchedPlateGeometry};
pub use element::{element_stiffness, ElementMatrix};
pub use reference::ReferenceHex;
pub use sparse::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("strain limit violated in element {element}, Gauss point {point}: 1 + beta*div(u) = {factor:e}")]
    StrainLimit { element: usize, point: usize, factor: f64 },
    #[error("non-positive stiffness coefficient {value:e} at Gauss point {point}{}", fmt_element(.element))]
    NonPositiveCoefficient { element: Option<usize>, point: usize, value: f64 },
    #[error("inverted element geometry at Gauss point {point}{}", fmt_element(.element))]
    InvertedElement { element: Option<usize>, point: usize },
    #[error("no Dirichlet constraints: the structure is floating")]
    NoDirichlet,
    #[error("boundary tag {0} has both a traction and a Dirichlet condition")]
    ConflictingTag(FacetTag),
    #[error("DOF {dof} is prescribed twice with different values ({first} vs {second})")]
    ConflictingConstraint { dof: usize, first: f64, second: f64 },
    #[error("node {0} is out of range")]
    NodeOutOfRange(usize),
    #[error("displacement vector has length {got}, expected {expected}")]
    DisplacementLength { got: usize, expected: usize },
}

fn fmt_element(e: &Option<usize>) -> String {
    e.map(|e| format!(" of element {e}")).unwrap_or_default()
}

/// Prescribed displacement on a tagged boundary part.
#[derive(Debug, Clone, PartialEq)]
pub enum Prescribed {
    /// Fixed values for the listed components; `None` leaves a component free.
    Components([Option<f64>; 3]),
    /// `û(x) = M x + c` on all three components.
    Affine { gradient: [[f64; 3]; 3], offset: [f64; 3] },
}

impl Prescribed {
    fn value(&self, x: &[f64; 3], comp: usize) -> Option<f64> {
        match self {
            Prescribed::Components(c) => c[comp],
            Prescribed::Affine { gradient, offset } => {
                let m = &gradient[comp];
                Some(m[0] * x[0] + m[1] * x[1] + m[2] * x[2] + offset[comp])
            }
        }
    }
}

/// A single constrained DOF, used to remove rigid-body modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodePin {
    pub node: usize,
    pub component: usize,
    pub value: f64,
}

/// Loads and boundary conditions. Tags without an entry are traction free.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadSpec {
    pub body_force: [f64; 3],
    pub tractions: BTreeMap<FacetTag, [f64; 3]>,
    pub dirichlet: BTreeMap<FacetTag, Prescribed>,
    pub pins: Vec<NodePin>,
}

impl LoadSpec {
    /// Full-length mask of prescribed DOF values.
    pub fn resolve_dirichlet(&self, mesh: &Mesh) -> Result<Vec<Option<f64>>, FemError> {
        for tag in self.tractions.keys() {
            if self.dirichlet.contains_key(tag) {
                return Err(FemError::ConflictingTag(*tag));
            }
        }
        let mut mask = vec![None; mesh.dof_count()];
        let set = |dof: usize, v: f64, mask: &mut Vec<Option<f64>>| -> Result<(), FemError> {
            match mask[dof] {
                Some(old) if (old - v).abs() > 1e-12 * old.abs().max(v.abs()).max(1.0) => {
                    Err(FemError::ConflictingConstraint { dof, first: old, second: v })
                }
                _ => {
                    mask[dof] = Some(v);
                    Ok(())
                }
            }
        };
        for (tag, value) in &self.dirichlet {
            for n in mesh.nodes_with_tag(*tag) {
                for c in 0..3 {
                    if let Some(v) = value.value(&mesh.nodes[n], c) {
                        set(3 * n + c, v, &mut mask)?;
                    }
                }
            }
        }
        for pin in &self.pins {
            if pin.node >= mesh.node_count() || pin.component > 2 {
                return Err(FemError::NodeOutOfRange(pin.node));
            }
            set(3 * pin.node + pin.component, pin.value, &mut mask)?;
        }
        if mask.iter().all(Option::is_none) {
            return Err(FemError::NoDirichlet);
        }
        Ok(mask)
    }
}

/// Opening-mode tension of the notched plate: `u_y` prescribed on the two
/// sides parallel to x, in-plane and through-thickness components left free.
///
/// Rigid-body motion is removed with mid-thickness pins: `u_x` at two
/// mirror-image nodes on the plate back, `u_z` at those two nodes and at the
/// middle of the ligament.
pub fn mode_one_tension(mesh: &Mesh, geom: &NotchedPlateGeometry, uy_low: f64, uy_high: f64) -> LoadSpec {
    let mut dirichlet = BTreeMap::new();
    dirichlet.insert(FacetTag::LoadedLowY, Prescribed::Components([None, Some(uy_low), None]));
    dirichlet.insert(FacetTag::LoadedHighY, Prescribed::Components([None, Some(uy_high), None]));

    let side = geom.side_length;
    let zmid = 0.5 * geom.thickness;
    let back_x = if geom.ligament_direction() > 0.0 { side } else { 0.0 };
    let a = mesh.nearest_node([back_x, 0.25 * side, zmid]).expect("empty mesh");
    let pa = mesh.nodes[a];
    let b = mesh.nearest_node([pa[0], side - pa[1], pa[2]]).expect("empty mesh");
    let tip = geom.tip_midpoint();
    let c = mesh
        .nearest_node([tip[0] + geom.ligament_direction() * 0.5 * geom.ligament(), tip[1], pa[2]])
        .expect("empty mesh");
    let pins = vec![
        NodePin { node: a, component: 0, value: 0.0 },
        NodePin { node: b, component: 0, value: 0.0 },
        NodePin { node: a, component: 2, value: 0.0 },
        NodePin { node: b, component: 2, value: 0.0 },
        NodePin { node: c, component: 2, value: 0.0 },
    ];
    LoadSpec { body_force: [0.0; 3], tractions: BTreeMap::new(), dirichlet, pins }
}

/// Assembled (unconstrained) system `K u = f` over all `3·nodes` DOFs.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

/// System restricted to the free DOFs after symmetric elimination of the
/// prescribed ones.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub free_dofs: Vec<usize>,
    pub prescribed: Vec<Option<f64>>,
}

impl ReducedSystem {
    /// Scatters free-DOF values back into a full vector with prescribed values filled in.
    pub fn expand(&self, x_free: &[f64]) -> Vec<f64> {
        let mut full: Vec<f64> = self.prescribed.iter().map(|p| p.unwrap_or(0.0)).collect();
        for (k, &d) in self.free_dofs.iter().enumerate() {
            full[d] = x_free[k];
        }
        full
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free_dofs.iter().map(|&d| full[d]).collect()
    }
}

/// Reusable assembly workspace for one mesh: the sparsity pattern and the
/// element-to-CSR scatter map.
#[derive(Debug, Clone)]
pub struct Assembler {
    reference: ReferenceHex,
    pattern: CsrMatrix,
    scatter: Vec<u32>,
}

impl Assembler {
    pub fn new(mesh: &Mesh) -> Self {
        let pattern = sparse::dof_pattern(mesh);
        let mut scatter = Vec::with_capacity(mesh.element_count() * 576);
        for conn in &mesh.elements {
            for a in 0..24 {
                let row = 3 * conn[a / 3] + a % 3;
                for b in 0..24 {
                    let col = 3 * conn[b / 3] + b % 3;
                    scatter.push(pattern.position(row, col).expect("pattern covers element") as u32);
                }
            }
        }
        Assembler { reference: ReferenceHex::new(), pattern, scatter }
    }

    pub fn reference(&self) -> &ReferenceHex {
        &self.reference
    }

    /// `1 + β ∇·u` at every Gauss point of every element.
    pub fn stiffness_factors(&self, mesh: &Mesh, params: &MaterialParams, u: &[f64]) -> Result<Vec<[f64; 8]>, FemError> {
        check_len(mesh, u)?;
        (0..mesh.element_count())
            .into_par_iter()
            .map(|e| {
                let conn = &mesh.elements[e];
                let ue = conn.map(|n| [u[3 * n], u[3 * n + 1], u[3 * n + 2]]);
                let div = element::divergence_at_points(&self.reference, &mesh.element_nodes(e), &ue)
                    .map_err(|err| with_element(err, e))?;
                Ok(div.map(|d| 1.0 + params.beta * d))
            })
            .collect()
    }

    /// Displacement gradient at every Gauss point of every element.
    pub fn gradients(&self, mesh: &Mesh, u: &[f64]) -> Result<Vec<[Mat3; 8]>, FemError> {
        check_len(mesh, u)?;
        (0..mesh.element_count())
            .into_par_iter()
            .map(|e| {
                let ue = mesh.elements[e].map(|n| [u[3 * n], u[3 * n + 1], u[3 * n + 2]]);
                element::gradients_at_points(&self.reference, &mesh.element_nodes(e), &ue)
                    .map_err(|err| with_element(err, e))
            })
            .collect()
    }

    /// Assembles with frozen factors `1 + β ∇·u_prev` (all ones when `u_prev` is `None`).
    pub fn assemble(
        &self,
        mesh: &Mesh,
        params: &MaterialParams,
        u_prev: Option<&[f64]>,
        loads: &LoadSpec,
    ) -> Result<SparseSystem, FemError> {
        let factors = match u_prev {
            Some(u) if params.beta != 0.0 => Some(self.stiffness_factors(mesh, params, u)?),
            _ => None,
        };
        if let Some(f) = &factors {
            for (e, pts) in f.iter().enumerate() {
                for (q, &v) in pts.iter().enumerate() {
                    if !(v > 0.0) {
                        return Err(FemError::StrainLimit { element: e, point: q, factor: v });
                    }
                }
            }
        }
        self.assemble_with_factors(mesh, params, factors.as_deref(), loads)
    }

    /// Assembles with caller-supplied stiffness factors (`None` means 1 everywhere).
    pub fn assemble_with_factors(
        &self,
        mesh: &Mesh,
        params: &MaterialParams,
        factors: Option<&[[f64; 8]]>,
        loads: &LoadSpec,
    ) -> Result<SparseSystem, FemError> {
        let locals: Vec<ElementMatrix> = (0..mesh.element_count())
            .into_par_iter()
            .map(|e| {
                let coeff = factors.map_or([1.0; 8], |f| f[e].map(|v| 1.0 / v));
                element_stiffness(&self.reference, &mesh.element_nodes(e), params, &coeff)
                    .map_err(|err| with_element(err, e))
            })
            .collect::<Result<_, _>>()?;
        let mut matrix = self.pattern.clone();
        // merged in ascending element order for bitwise reproducibility
        for (e, k) in locals.iter().enumerate() {
            let map = &self.scatter[576 * e..576 * (e + 1)];
            for a in 0..24 {
                for b in 0..24 {
                    matrix.values[map[24 * a + b] as usize] += k[a][b];
                }
            }
        }
        let rhs = self.load_vector(mesh, loads)?;
        Ok(SparseSystem { matrix, rhs })
    }

    fn load_vector(&self, mesh: &Mesh, loads: &LoadSpec) -> Result<Vec<f64>, FemError> {
        let mut rhs = vec![0.0; mesh.dof_count()];
        if loads.body_force.iter().any(|&v| v != 0.0) {
            for (e, conn) in mesh.elements.iter().enumerate() {
                let fe = element::element_body_force(&self.reference, &mesh.element_nodes(e), &loads.body_force)
                    .map_err(|err| with_element(err, e))?;
                for a in 0..8 {
                    for i in 0..3 {
                        rhs[3 * conn[a] + i] += fe[3 * a + i];
                    }
                }
            }
        }
        for facet in &mesh.boundary_facets {
            let Some(g) = loads.tractions.get(&facet.tag) else { continue };
            let nodes = mesh.facet_nodes(facet);
            let p = nodes.map(|n| mesh.nodes[n]);
            for (s, t) in gauss_2d() {
                let (n, da) = quad_surface_element(&p, s, t);
                let area = (da[0] * da[0] + da[1] * da[1] + da[2] * da[2]).sqrt();
                for a in 0..4 {
                    for i in 0..3 {
                        rhs[3 * nodes[a] + i] += area * n[a] * g[i];
                    }
                }
            }
        }
        Ok(rhs)
    }
}

fn with_element(err: FemError, e: usize) -> FemError {
    match err {
        FemError::NonPositiveCoefficient { point, value, .. } => {
            FemError::NonPositiveCoefficient { element: Some(e), point, value }
        }
        FemError::InvertedElement { point, .. } => FemError::InvertedElement { element: Some(e), point },
        other => other,
    }
}

fn check_len(mesh: &Mesh, u: &[f64]) -> Result<(), FemError> {
    if u.len() != mesh.dof_count() {
        return Err(FemError::DisplacementLength { got: u.len(), expected: mesh.dof_count() });
    }
    Ok(())
}

/// One-shot assembly; see [`Assembler`] for repeated assembly on the same mesh.
pub fn assemble(
    mesh: &Mesh,
    params: &MaterialParams,
    u_prev: &[f64],
    loads: &LoadSpec,
) -> Result<SparseSystem, FemError> {
    check_len(mesh, u_prev)?;
    Assembler::new(mesh).assemble(mesh, params, Some(u_prev), loads)
}

/// Eliminates the prescribed DOFs symmetrically: known columns move to the
/// right-hand side and the remaining free block keeps its symmetry.
pub fn apply_dirichlet(system: &SparseSystem, loads: &LoadSpec, mesh: &Mesh) -> Result<ReducedSystem, FemError> {
    let prescribed = loads.resolve_dirichlet(mesh)?;
    Ok(reduce(system, prescribed))
}

/// Symmetric elimination against an already resolved prescribed-value mask.
pub fn reduce(system: &SparseSystem, prescribed: Vec<Option<f64>>) -> ReducedSystem {
    let n = system.matrix.n;
    let mut new_index = vec![usize::MAX; n];
    let mut free_dofs = Vec::new();
    for d in 0..n {
        if prescribed[d].is_none() {
            new_index[d] = free_dofs.len();
            free_dofs.push(d);
        }
    }
    let mut row_ptr = Vec::with_capacity(free_dofs.len() + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    let mut rhs = Vec::with_capacity(free_dofs.len());
    for &d in &free_dofs {
        let (cols, vals) = system.matrix.row(d);
        let mut b = system.rhs[d];
        for (&c, &v) in cols.iter().zip(vals) {
            match prescribed[c] {
                Some(g) => b -= v * g,
                None => {
                    col_idx.push(new_index[c]);
                    values.push(v);
                }
            }
        }
        rhs.push(b);
        row_ptr.push(col_idx.len());
    }
    let matrix = CsrMatrix { n: free_dofs.len(), row_ptr, col_idx, values };
    ReducedSystem { matrix, rhs, free_dofs, prescribed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::reference::NODE_COORDS;
    use crate::mesh::BoundaryFacet;

    fn cube_mesh(shift: f64) -> Mesh {
        Mesh {
            nodes: NODE_COORDS.iter().map(|c| [0.5 * (c[0] + 1.0) + shift, 0.5 * (c[1] + 1.0), 0.5 * (c[2] + 1.0)]).collect(),
            elements: vec![[0, 1, 2, 3, 4, 5, 6, 7]],
            boundary_facets: (0..6).map(|f| BoundaryFacet { element: 0, face: f, tag: FacetTag::Free }).collect(),
        }
    }

    /// Two unit cubes sharing the face x = 1.
    fn two_cubes() -> Mesh {
        let mut nodes = Vec::new();
        for k in 0..2 {
            for j in 0..2 {
                for i in 0..3 {
                    nodes.push([i as f64, j as f64, k as f64]);
                }
            }
        }
        let id = |i: usize, j: usize, k: usize| (k * 2 + j) * 3 + i;
        let hex = |i: usize| {
            [id(i, 0, 0), id(i + 1, 0, 0), id(i + 1, 1, 0), id(i, 1, 0), id(i, 0, 1), id(i + 1, 0, 1), id(i + 1, 1, 1), id(i, 1, 1)]
        };
        Mesh { nodes, elements: vec![hex(0), hex(1)], boundary_facets: vec![] }
    }

    #[test]
    fn single_element_global_equals_local() {
        let mesh = cube_mesh(0.0);
        let p = MaterialParams::default();
        let sys = assemble(&mesh, &p, &vec![0.0; 24], &LoadSpec::default()).unwrap();
        let k = element_stiffness(&ReferenceHex::new(), &mesh.element_nodes(0), &p, &[1.0; 8]).unwrap();
        let d = sys.matrix.to_dense();
        for a in 0..24 {
            for b in 0..24 {
                assert_eq!(d[a][b], k[a][b]);
            }
        }
    }

    #[test]
    fn shared_face_entries_sum() {
        let mesh = two_cubes();
        let p = MaterialParams::default();
        let r = ReferenceHex::new();
        let sys = assemble(&mesh, &p, &vec![0.0; mesh.dof_count()], &LoadSpec::default()).unwrap();
        let k0 = element_stiffness(&r, &mesh.element_nodes(0), &p, &[1.0; 8]).unwrap();
        let k1 = element_stiffness(&r, &mesh.element_nodes(1), &p, &[1.0; 8]).unwrap();
        // global node 1 is local 1 of element 0 and local 0 of element 1;
        // global node 4 is local 2 of element 0 and local 3 of element 1
        for i in 0..3 {
            for j in 0..3 {
                let g = sys.matrix.get(3 * 1 + i, 3 * 4 + j);
                let hand = k0[3 * 1 + i][3 * 2 + j] + k1[3 * 0 + i][3 * 3 + j];
                assert!((g - hand).abs() <= 1e-12 * hand.abs().max(1.0));
            }
        }
        assert_eq!(sys.matrix.max_asymmetry(), 0.0);
    }

    #[test]
    fn zero_previous_iterate_matches_linear_assembly() {
        let mesh = two_cubes();
        let zero = vec![0.0; mesh.dof_count()];
        let a = assemble(&mesh, &MaterialParams::default().with_beta(-25.0), &zero, &LoadSpec::default()).unwrap();
        let b = assemble(&mesh, &MaterialParams::default(), &zero, &LoadSpec::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn strain_limit_reports_location() {
        let mesh = cube_mesh(0.0);
        let p = MaterialParams::default().with_beta(-10.0);
        // u_x = 0.2 x gives div u = 0.2 and 1 + β div u = −1
        let u: Vec<f64> = mesh.nodes.iter().flat_map(|x| [0.2 * x[0], 0.0, 0.0]).collect();
        let err = assemble(&mesh, &p, &u, &LoadSpec::default()).unwrap_err();
        assert!(matches!(err, FemError::StrainLimit { element: 0, point: 0, .. }));
    }

    #[test]
    fn global_matrix_annihilates_rigid_modes() {
        let mesh = two_cubes();
        let sys = assemble(&mesh, &MaterialParams::default(), &vec![0.0; mesh.dof_count()], &LoadSpec::default()).unwrap();
        let scale = sys.matrix.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            let v: Vec<f64> = mesh
                .nodes
                .iter()
                .flat_map(|x| {
                    let mut w = [0.0; 3];
                    w[i] = -x[j];
                    w[j] = x[i];
                    w
                })
                .collect();
            let y = sys.matrix.mul_vec(&v);
            let vn = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(y.iter().all(|a| a.abs() <= 1e-9 * scale * vn));
        }
    }

    #[test]
    fn traction_integrates_to_force() {
        let mut mesh = cube_mesh(0.0);
        mesh.boundary_facets = vec![BoundaryFacet { element: 0, face: 3, tag: FacetTag::LoadedHighY }];
        let mut loads = LoadSpec::default();
        loads.tractions.insert(FacetTag::LoadedHighY, [0.0, 4.0, 1.0]);
        let sys = Assembler::new(&mesh).assemble(&mesh, &MaterialParams::default(), None, &loads).unwrap();
        let fy: f64 = (0..8).map(|a| sys.rhs[3 * a + 1]).sum();
        let fz: f64 = (0..8).map(|a| sys.rhs[3 * a + 2]).sum();
        assert!((fy - 4.0).abs() < 1e-14 && (fz - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dirichlet_errors() {
        let mesh = cube_mesh(0.0);
        assert_eq!(LoadSpec::default().resolve_dirichlet(&mesh), Err(FemError::NoDirichlet));
        let mut loads = LoadSpec::default();
        loads.tractions.insert(FacetTag::Free, [0.0; 3]);
        loads.dirichlet.insert(FacetTag::Free, Prescribed::Components([Some(0.0), None, None]));
        assert_eq!(loads.resolve_dirichlet(&mesh), Err(FemError::ConflictingTag(FacetTag::Free)));
    }

    #[test]
    fn elimination_moves_known_columns() {
        let mesh = two_cubes();
        let sys = assemble(&mesh, &MaterialParams::default(), &vec![0.0; mesh.dof_count()], &LoadSpec::default()).unwrap();
        let mut prescribed = vec![None; mesh.dof_count()];
        prescribed[0] = Some(0.5);
        prescribed[7] = Some(-0.25);
        let red = reduce(&sys, prescribed);
        assert_eq!(red.matrix.n, mesh.dof_count() - 2);
        assert_eq!(red.matrix.max_asymmetry(), 0.0);
        // full K·expand(x) agrees with the reduced operator on free rows
        let x_free: Vec<f64> = (0..red.matrix.n).map(|i| (i as f64 * 0.37).sin()).collect();
        let full = red.expand(&x_free);
        let kx = sys.matrix.mul_vec(&full);
        let ax = red.matrix.mul_vec(&x_free);
        for (k, &d) in red.free_dofs.iter().enumerate() {
            // (K x)_d − f_d = A x_free − b_red
            assert!(((kx[d] - sys.rhs[d]) - (ax[k] - red.rhs[k])).abs() < 1e-9);
        }
    }
}
