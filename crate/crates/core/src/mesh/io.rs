//! Mesh import from a plain node/element text format and export to legacy
//! ASCII VTK.
//!
//! Text format: a header line `nv nt nb`, then `nv` lines `x y`, `nt` lines
//! `v0 v1 v2` and `nb` lines `v0 v1 tag`. A tag is `D:<label>` (Dirichlet) or
//! `N:<label>` (Neumann); a bare label is read as Dirichlet.

use std::io::{BufRead, Write};

use super::{BoundaryFacet, BoundaryKind, BoundaryTag, Triangulation};
use crate::error::{Error, Result};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn read_mesh<R: BufRead>(reader: R) -> Result<Triangulation> {
    let mut lines = reader
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| {
            l.as_ref().map_or(true, |s| {
                !s.trim().is_empty() && !s.trim_start().starts_with('#')
            })
        });

    let mut next = |what: &str| -> Result<(usize, Vec<String>)> {
        let (n, line) = lines
            .next()
            .ok_or_else(|| parse_err(0, format!("unexpected end of input, expected {what}")))?;
        let line = line?;
        Ok((n, line.split_whitespace().map(str::to_string).collect()))
    };
    let num = |n: usize, s: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| parse_err(n, format!("bad integer `{s}`")))
    };
    let real = |n: usize, s: &str| -> Result<f64> {
        s.parse()
            .map_err(|_| parse_err(n, format!("bad number `{s}`")))
    };

    let (n, header) = next("header")?;
    if header.len() != 3 {
        return Err(parse_err(n, "header must be `nv nt nb`"));
    }
    let (nv, nt, nb) = (
        num(n, &header[0])?,
        num(n, &header[1])?,
        num(n, &header[2])?,
    );
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, f) = next("vertex")?;
        if f.len() < 2 {
            return Err(parse_err(n, "vertex line needs `x y`"));
        }
        vertices.push([real(n, &f[0])?, real(n, &f[1])?]);
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (n, f) = next("triangle")?;
        if f.len() < 3 {
            return Err(parse_err(n, "triangle line needs `v0 v1 v2`"));
        }
        triangles.push([num(n, &f[0])?, num(n, &f[1])?, num(n, &f[2])?]);
    }
    let mut boundary = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (n, f) = next("boundary facet")?;
        if f.len() < 3 {
            return Err(parse_err(n, "boundary line needs `v0 v1 tag`"));
        }
        let tag = match f[2].split_once(':') {
            Some(("D", label)) => BoundaryTag::dirichlet(label),
            Some(("N", label)) => BoundaryTag::neumann(label),
            _ => BoundaryTag::dirichlet(&f[2]),
        };
        boundary.push(BoundaryFacet {
            vertices: [num(n, &f[0])?, num(n, &f[1])?],
            tag,
        });
    }
    Triangulation::new(vertices, triangles, boundary)
}

pub fn write_mesh<W: Write>(mesh: &Triangulation, mut out: W) -> Result<()> {
    writeln!(
        out,
        "{} {} {}",
        mesh.n_vertices(),
        mesh.n_triangles(),
        mesh.boundary_facets().len()
    )?;
    for v in mesh.vertices() {
        writeln!(out, "{:.17e} {:.17e}", v[0], v[1])?;
    }
    for t in mesh.triangles() {
        writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
    }
    for f in mesh.boundary_facets() {
        let kind = match f.tag.kind {
            BoundaryKind::DirichletPrimal => "D",
            BoundaryKind::NeumannFlux => "N",
        };
        writeln!(
            out,
            "{} {} {}:{}",
            f.vertices[0], f.vertices[1], kind, f.tag.label
        )?;
    }
    Ok(())
}

/// Point or cell data attached to a VTK export.
pub enum VtkData<'a> {
    PointScalars {
        name: &'a str,
        values: &'a [f64],
    },
    PointVectors {
        name: &'a str,
        values: &'a [[f64; 2]],
    },
    CellScalars {
        name: &'a str,
        values: &'a [f64],
    },
}

/// Writes an `UNSTRUCTURED_GRID` with triangle cells (VTK type 5).
pub fn write_vtk<W: Write>(mesh: &Triangulation, data: &[VtkData<'_>], mut out: W) -> Result<()> {
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "nlsqfem mesh")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.n_vertices())?;
    for v in mesh.vertices() {
        writeln!(out, "{:.10e} {:.10e} 0", v[0], v[1])?;
    }
    let nt = mesh.n_triangles();
    writeln!(out, "CELLS {} {}", nt, 4 * nt)?;
    for t in mesh.triangles() {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(out, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(out, "5")?;
    }
    let (points, cells): (Vec<_>, Vec<_>) = data
        .iter()
        .partition(|d| !matches!(d, VtkData::CellScalars { .. }));
    if !points.is_empty() {
        writeln!(out, "POINT_DATA {}", mesh.n_vertices())?;
        for d in points {
            match d {
                VtkData::PointScalars { name, values } => {
                    writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default")?;
                    for v in values.iter() {
                        writeln!(out, "{v:.10e}")?;
                    }
                }
                VtkData::PointVectors { name, values } => {
                    writeln!(out, "VECTORS {name} double")?;
                    for v in values.iter() {
                        writeln!(out, "{:.10e} {:.10e} 0", v[0], v[1])?;
                    }
                }
                VtkData::CellScalars { .. } => unreachable!(),
            }
        }
    }
    if !cells.is_empty() {
        writeln!(out, "CELL_DATA {nt}")?;
        for d in cells {
            if let VtkData::CellScalars { name, values } = d {
                writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default")?;
                for v in values.iter() {
                    writeln!(out, "{v:.10e}")?;
                }
            }
        }
    }
    Ok(())
}
