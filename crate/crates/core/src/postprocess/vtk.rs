//! Legacy ASCII VTK (version 3.0) unstructured-grid writers.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use super::{PostprocessError, RecoveredFields};
use crate::mesh::{scaled_jacobian, FacetTag, Mesh};
use crate::solver::DisplacementField;
use crate::tensor::SymTensor3;

const VTK_HEXAHEDRON: u8 = 12;

fn write_grid<W: Write>(out: &mut W, mesh: &Mesh, title: &str) -> io::Result<()> {
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{title}")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.node_count())?;
    for p in &mesh.nodes {
        writeln!(out, "{} {} {}", p[0], p[1], p[2])?;
    }
    let ne = mesh.element_count();
    writeln!(out, "CELLS {} {}", ne, 9 * ne)?;
    for conn in &mesh.elements {
        write!(out, "8")?;
        for n in conn {
            write!(out, " {n}")?;
        }
        writeln!(out)?;
    }
    writeln!(out, "CELL_TYPES {ne}")?;
    for _ in 0..ne {
        writeln!(out, "{VTK_HEXAHEDRON}")?;
    }
    Ok(())
}

fn write_tensors<W: Write>(out: &mut W, name: &str, data: &[SymTensor3]) -> io::Result<()> {
    writeln!(out, "TENSORS {name} double")?;
    for t in data {
        let m = t.to_matrix();
        for row in &m {
            writeln!(out, "{} {} {}", row[0], row[1], row[2])?;
        }
    }
    Ok(())
}

fn write_scalars<W: Write>(out: &mut W, name: &str, data: impl Iterator<Item = f64>) -> io::Result<()> {
    writeln!(out, "SCALARS {name} double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for v in data {
        writeln!(out, "{v}")?;
    }
    Ok(())
}

/// Writes displacement, nodal strain and stress tensors, `ε₂₂`, `T₂₂` and
/// `W` as point data, and the smallest `1 + β tr ε` per element as cell data.
pub fn write_vtk<W: Write>(
    out: &mut W,
    mesh: &Mesh,
    fields: &RecoveredFields,
    u: &DisplacementField,
) -> io::Result<()> {
    write_grid(out, mesh, "porocrack solution")?;
    writeln!(out, "POINT_DATA {}", mesh.node_count())?;
    writeln!(out, "VECTORS displacement double")?;
    for n in 0..mesh.node_count() {
        let d = u.at(n);
        writeln!(out, "{} {} {}", d[0], d[1], d[2])?;
    }
    write_tensors(out, "strain", &fields.nodal_strain)?;
    write_tensors(out, "stress", &fields.nodal_stress)?;
    write_scalars(out, "eps22", fields.nodal_strain.iter().map(|t| t.get(1, 1)))?;
    write_scalars(out, "T22", fields.nodal_stress.iter().map(|t| t.get(1, 1)))?;
    write_scalars(out, "strain_energy", fields.nodal_energy.iter().copied())?;
    if fields.factor.len() == 8 * mesh.element_count() {
        writeln!(out, "CELL_DATA {}", mesh.element_count())?;
        write_scalars(out, "min_stiffness_factor", fields.factor.chunks(8).map(|c| c.iter().copied().fold(f64::INFINITY, f64::min)))?;
    }
    Ok(())
}

pub fn export_vtk(
    mesh: &Mesh,
    fields: &RecoveredFields,
    u: &DisplacementField,
    path: &Path,
) -> Result<(), PostprocessError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_vtk(&mut w, mesh, fields, u)?;
    w.flush()?;
    Ok(())
}

/// Mesh only: scaled Jacobian per cell and, per node, the smallest boundary
/// tag code touching it (loaded sides win over free faces).
pub fn write_mesh_vtk<W: Write>(out: &mut W, mesh: &Mesh) -> io::Result<()> {
    write_grid(out, mesh, &format!("porocrack mesh; boundary_tag 0=interior {}", tag_legend()))?;
    let mut tag = vec![0u8; mesh.node_count()];
    for facet in &mesh.boundary_facets {
        for n in mesh.facet_nodes(facet) {
            let c = facet.tag.code();
            if tag[n] == 0 || c < tag[n] {
                tag[n] = c;
            }
        }
    }
    writeln!(out, "POINT_DATA {}", mesh.node_count())?;
    writeln!(out, "SCALARS boundary_tag int 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for t in &tag {
        writeln!(out, "{t}")?;
    }
    writeln!(out, "CELL_DATA {}", mesh.element_count())?;
    write_scalars(out, "scaled_jacobian", (0..mesh.element_count()).map(|e| scaled_jacobian(&mesh.element_nodes(e))))?;
    Ok(())
}

pub fn export_mesh_vtk(mesh: &Mesh, path: &Path) -> Result<(), PostprocessError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_mesh_vtk(&mut w, mesh)?;
    w.flush()?;
    Ok(())
}

fn tag_legend() -> String {
    FacetTag::ALL.iter().map(|t| format!("{}={}", t.code(), t.as_str())).collect::<Vec<_>>().join(" ")
}
