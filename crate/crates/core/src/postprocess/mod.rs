//! Field recovery, midline sampling, SIF extraction and file export.

pub mod vtk;

use std::f64::consts::PI;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::fem::reference::{inverse_map, physical_gradients, shape_functions, ReferenceHex};
use crate::material::{stress_from_strain, strain_energy_density, strain_from_displacement_gradient, MaterialParams};
use crate::mesh::{Mesh, MidlinePoint};
use crate::solver::DisplacementField;
use crate::tensor::SymTensor3;

pub use vtk::{export_mesh_vtk, export_vtk};

#[derive(Debug, Error)]
pub enum PostprocessError {
    #[error("strain limit violated in element {element}, Gauss point {point}: 1 + beta*tr(eps) = {factor:e}")]
    StrainLimit { element: usize, point: usize, factor: f64 },
    #[error("inverted element {element} at Gauss point {point}")]
    InvertedElement { element: usize, point: usize },
    #[error("displacement has {got} entries, mesh needs {expected}")]
    DisplacementLength { got: usize, expected: usize },
    #[error("sample point at r = {r} mm lies outside the mesh")]
    OutsideMesh { r: f64 },
    #[error("SIF window [{r_lo}, {r_hi}] mm holds {got} samples, need at least 3")]
    TooFewSamples { r_lo: f64, r_hi: f64, got: usize },
    #[error("invalid SIF window [{r_lo}, {r_hi}]")]
    InvalidWindow { r_lo: f64, r_hi: f64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Strain, stress and energy at Gauss points (`8·element + point`) and at nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredFields {
    pub strain: Vec<SymTensor3>,
    pub stress: Vec<SymTensor3>,
    pub energy: Vec<f64>,
    /// `1 + β tr ε` per Gauss point.
    pub factor: Vec<f64>,
    pub nodal_strain: Vec<SymTensor3>,
    pub nodal_stress: Vec<SymTensor3>,
    pub nodal_energy: Vec<f64>,
}

impl RecoveredFields {
    pub fn min_factor(&self) -> f64 {
        self.factor.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Gauss-point fields from the displacement gradient, then nodal values by
/// averaging, over the elements around each node, the Gauss point nearest
/// to that node weighted by its quadrature volume.
pub fn recover_fields(
    mesh: &Mesh,
    u: &DisplacementField,
    params: &MaterialParams,
) -> Result<RecoveredFields, PostprocessError> {
    if u.0.len() != mesh.dof_count() {
        return Err(PostprocessError::DisplacementLength { got: u.0.len(), expected: mesh.dof_count() });
    }
    let reference = ReferenceHex::new();
    type PointData = (SymTensor3, SymTensor3, f64, f64, f64);
    let per_element: Vec<[PointData; 8]> = (0..mesh.element_count())
        .into_par_iter()
        .map(|e| {
            let x = mesh.element_nodes(e);
            let ue = mesh.elements[e].map(|n| u.at(n));
            let mut out = [(SymTensor3::ZERO, SymTensor3::ZERO, 0.0, 0.0, 0.0); 8];
            for q in 0..8 {
                let (g, det) = physical_gradients(&x, &reference.grad[q])
                    .ok_or(PostprocessError::InvertedElement { element: e, point: q })?;
                let mut grad = [[0.0; 3]; 3];
                for a in 0..8 {
                    for i in 0..3 {
                        for j in 0..3 {
                            grad[i][j] += ue[a][i] * g[a][j];
                        }
                    }
                }
                let eps = strain_from_displacement_gradient(&grad);
                let factor = 1.0 + params.beta * eps.trace();
                let stress = stress_from_strain(params, &eps)
                    .map_err(|_| PostprocessError::StrainLimit { element: e, point: q, factor })?;
                let w = strain_energy_density(&eps, &stress);
                out[q] = (eps, stress, w, factor, reference.weights[q] * det);
            }
            Ok(out)
        })
        .collect::<Result<_, PostprocessError>>()?;

    let nn = mesh.node_count();
    let mut sum_eps = vec![SymTensor3::ZERO; nn];
    let mut sum_t = vec![SymTensor3::ZERO; nn];
    let mut sum_w = vec![0.0; nn];
    let mut vol = vec![0.0; nn];
    // ascending element order keeps the sums reproducible
    for (e, pts) in per_element.iter().enumerate() {
        for (a, &n) in mesh.elements[e].iter().enumerate() {
            let (eps, t, w, _, dv) = pts[a];
            sum_eps[n] += eps * dv;
            sum_t[n] += t * dv;
            sum_w[n] += w * dv;
            vol[n] += dv;
        }
    }
    let inv = |v: f64| if v > 0.0 { 1.0 / v } else { 0.0 };
    let flat = per_element.iter().flatten();
    Ok(RecoveredFields {
        strain: flat.clone().map(|p| p.0).collect(),
        stress: flat.clone().map(|p| p.1).collect(),
        energy: flat.clone().map(|p| p.2).collect(),
        factor: flat.map(|p| p.3).collect(),
        nodal_strain: sum_eps.iter().zip(&vol).map(|(s, &v)| *s * inv(v)).collect(),
        nodal_stress: sum_t.iter().zip(&vol).map(|(s, &v)| *s * inv(v)).collect(),
        nodal_energy: sum_w.iter().zip(&vol).map(|(s, &v)| s * inv(v)).collect(),
    })
}

/// One row per midline point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineRow {
    pub r: f64,
    pub eps22: f64,
    pub t22: f64,
    /// `√(2πr) T₂₂`, Pa·mm^½.
    pub sif_integrand: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LineSample {
    pub rows: Vec<LineRow>,
}

impl LineSample {
    pub fn tip(&self) -> Option<&LineRow> {
        self.rows.first()
    }
}

const LOCATE_TOL: f64 = 1e-9;

/// Element containing `p` and its reference coordinates; lowest index wins.
pub fn locate(mesh: &Mesh, p: &[f64; 3]) -> Option<(usize, [f64; 3])> {
    for e in 0..mesh.element_count() {
        let x = mesh.element_nodes(e);
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &x {
            for d in 0..3 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        let slack = 1e-9 * (hi[0] - lo[0]).max(hi[1] - lo[1]).max(hi[2] - lo[2]);
        if (0..3).any(|d| p[d] < lo[d] - slack || p[d] > hi[d] + slack) {
            continue;
        }
        if let Some(xi) = inverse_map(&x, p) {
            if xi.iter().all(|v| v.abs() <= 1.0 + LOCATE_TOL) {
                return Some((e, xi.map(|v| v.clamp(-1.0, 1.0))));
            }
        }
    }
    None
}

/// Interpolates the nodal fields at each midline point.
pub fn sample_midline(
    fields: &RecoveredFields,
    mesh: &Mesh,
    points: &[MidlinePoint],
) -> Result<LineSample, PostprocessError> {
    let rows = points
        .par_iter()
        .map(|mp| {
            let (e, xi) = locate(mesh, &mp.point).ok_or(PostprocessError::OutsideMesh { r: mp.r })?;
            let n = shape_functions(&xi);
            let conn = &mesh.elements[e];
            let mut eps22 = 0.0;
            let mut t22 = 0.0;
            let mut w = 0.0;
            for a in 0..8 {
                eps22 += n[a] * fields.nodal_strain[conn[a]].get(1, 1);
                t22 += n[a] * fields.nodal_stress[conn[a]].get(1, 1);
                w += n[a] * fields.nodal_energy[conn[a]];
            }
            Ok(LineRow { r: mp.r, eps22, t22, sif_integrand: (2.0 * PI * mp.r).sqrt() * t22, energy: w })
        })
        .collect::<Result<_, PostprocessError>>()?;
    Ok(LineSample { rows })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SifEstimate {
    /// Intercept at `r = 0`, Pa·mm^½.
    pub k_i: f64,
    pub slope: f64,
    pub rms: f64,
    pub samples: usize,
}

/// Least-squares line through `√(2πr) T₂₂` over `r ∈ [r_lo, r_hi]`; `K_I` is its intercept.
pub fn estimate_sif(line: &LineSample, window: (f64, f64)) -> Result<SifEstimate, PostprocessError> {
    let (r_lo, r_hi) = window;
    if !(r_lo > 0.0 && r_hi > r_lo) {
        return Err(PostprocessError::InvalidWindow { r_lo, r_hi });
    }
    let pts: Vec<(f64, f64)> =
        line.rows.iter().filter(|row| row.r >= r_lo && row.r <= r_hi).map(|row| (row.r, row.sif_integrand)).collect();
    if pts.len() < 3 {
        return Err(PostprocessError::TooFewSamples { r_lo, r_hi, got: pts.len() });
    }
    let m = pts.len() as f64;
    let mean_r = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_k = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_r).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_r) * (p.1 - mean_k)).sum();
    let slope = sxy / sxx;
    let k_i = mean_k - slope * mean_r;
    let rms = (pts.iter().map(|p| (p.1 - k_i - slope * p.0).powi(2)).sum::<f64>() / m).sqrt();
    Ok(SifEstimate { k_i, slope, rms, samples: pts.len() })
}

pub const CSV_HEADER: &str = "r_mm,eps22,T22_Pa,sif_integrand,W_Pa";

pub fn write_csv<W: Write>(line: &LineSample, out: &mut W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in &line.rows {
        writeln!(out, "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}", row.r, row.eps22, row.t22, row.sif_integrand, row.energy)?;
    }
    Ok(())
}

pub fn export_csv(line: &LineSample, path: &Path) -> Result<(), PostprocessError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv(line, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Parses a file written by [`export_csv`].
pub fn read_csv(text: &str) -> Result<LineSample, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => return Err(format!("unexpected header {other:?}")),
    }
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        let v: Vec<f64> = l
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| format!("line {}: {e}", i + 2)))
            .collect::<Result<_, _>>()?;
        if v.len() != 5 {
            return Err(format!("line {}: expected 5 columns, got {}", i + 2, v.len()));
        }
        rows.push(LineRow { r: v[0], eps22: v[1], t22: v[2], sif_integrand: v[3], energy: v[4] });
    }
    Ok(LineSample { rows })
}
