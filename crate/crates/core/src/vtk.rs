//! Legacy ASCII VTK export of quadrilateral meshes and nodal fields.

use std::io::Write;

use crate::error::{check_len, Result};
use crate::mesh::Mesh;

/// Nodal data attached to a VTK file.
pub enum PointData<'a> {
    Scalar(&'a str, &'a [f64]),
    /// Interleaved 2D vectors `(x0, y0, x1, y1, …)`, written with z = 0.
    Vector2(&'a str, &'a [f64]),
}

pub fn write_vtk<W: Write>(out: &mut W, mesh: &Mesh, title: &str, data: &[PointData<'_>]) -> Result<()> {
    let n = mesh.num_nodes();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{}", title.lines().next().unwrap_or(""))?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {n} double")?;
    for p in mesh.nodes() {
        writeln!(out, "{} {} 0", p[0], p[1])?;
    }
    let ne = mesh.num_elements();
    writeln!(out, "CELLS {ne} {}", 5 * ne)?;
    for c in mesh.elements() {
        writeln!(out, "4 {} {} {} {}", c[0], c[1], c[2], c[3])?;
    }
    writeln!(out, "CELL_TYPES {ne}")?;
    for _ in 0..ne {
        writeln!(out, "9")?;
    }
    if !data.is_empty() {
        writeln!(out, "POINT_DATA {n}")?;
    }
    for d in data {
        match d {
            PointData::Scalar(name, v) => {
                check_len("scalar point data", v.len(), n)?;
                writeln!(out, "SCALARS {name} double 1")?;
                writeln!(out, "LOOKUP_TABLE default")?;
                for x in v.iter() {
                    writeln!(out, "{x}")?;
                }
            }
            PointData::Vector2(name, v) => {
                check_len("vector point data", v.len(), 2 * n)?;
                writeln!(out, "VECTORS {name} double")?;
                for p in v.chunks(2) {
                    writeln!(out, "{} {} 0", p[0], p[1])?;
                }
            }
        }
    }
    Ok(())
}
