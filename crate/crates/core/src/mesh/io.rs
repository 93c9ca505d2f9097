//! Plain-text mesh dump and legacy VTK export.

use std::io::{BufRead, Write};

use super::{BoundaryTag, Mesh, TriangleTag};
use crate::error::{Error, Result};

/// Header `nv nt nb`, then `x y`, `i j k tag` and `i j tag` lines.
pub fn write_dump<W: Write>(mesh: &Mesh, mut out: W) -> Result<()> {
    writeln!(
        out,
        "{} {} {}",
        mesh.num_vertices(),
        mesh.num_triangles(),
        mesh.boundary_edges.len()
    )?;
    for p in &mesh.vertices {
        writeln!(out, "{:e} {:e}", p[0], p[1])?;
    }
    for (t, tag) in mesh.triangles.iter().zip(&mesh.triangle_tags) {
        writeln!(out, "{} {} {} {}", t[0], t[1], t[2], tag.code())?;
    }
    for (e, tag) in &mesh.boundary_edges {
        writeln!(out, "{} {} {}", e[0], e[1], tag.code())?;
    }
    Ok(())
}

fn parse_err(line: usize, msg: &str) -> Error {
    Error::Input(format!("mesh dump line {line}: {msg}"))
}

fn fields<T: std::str::FromStr>(line: &str, n: usize, no: usize) -> Result<Vec<T>> {
    let v: Vec<T> = line
        .split_whitespace()
        .map(|s| s.parse::<T>().map_err(|_| parse_err(no, "malformed number")))
        .collect::<Result<_>>()?;
    if v.len() != n {
        return Err(parse_err(no, &format!("expected {n} fields")));
    }
    Ok(v)
}

/// Reads a dump written by [`write_dump`]. Periodic pairs are not stored.
pub fn read_dump<R: BufRead>(input: R) -> Result<Mesh> {
    let lines: Vec<String> = input.lines().collect::<std::io::Result<_>>()?;
    let header = lines.first().ok_or_else(|| parse_err(1, "empty file"))?;
    let h: Vec<usize> = fields(header, 3, 1)?;
    let (nv, nt, nb) = (h[0], h[1], h[2]);
    if lines.len() < 1 + nv + nt + nb {
        return Err(parse_err(lines.len(), "file truncated"));
    }
    let mut mesh = Mesh::default();
    for i in 0..nv {
        let f: Vec<f64> = fields(&lines[1 + i], 2, 2 + i)?;
        mesh.vertices.push([f[0], f[1]]);
    }
    for i in 0..nt {
        let no = 2 + nv + i;
        let f: Vec<usize> = fields(&lines[1 + nv + i], 4, no)?;
        if f[..3].iter().any(|&k| k >= nv) {
            return Err(parse_err(no, "vertex index out of range"));
        }
        let tag = TriangleTag::from_code(f[3] as u8).ok_or_else(|| parse_err(no, "bad tag"))?;
        mesh.triangles.push([f[0], f[1], f[2]]);
        mesh.triangle_tags.push(tag);
    }
    for i in 0..nb {
        let no = 2 + nv + nt + i;
        let f: Vec<usize> = fields(&lines[1 + nv + nt + i], 3, no)?;
        let tag = BoundaryTag::from_code(f[2] as u8).ok_or_else(|| parse_err(no, "bad tag"))?;
        mesh.boundary_edges.push(([f[0], f[1]], tag));
    }
    Ok(mesh)
}

/// Legacy ASCII unstructured grid with the region tag as cell data and
/// optional nodal fields as point data.
pub fn write_vtk<W: Write>(mesh: &Mesh, fields: &[(&str, &[f64])], mut out: W) -> Result<()> {
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "helmres mesh")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.num_vertices())?;
    for p in &mesh.vertices {
        writeln!(out, "{:e} {:e} 0", p[0], p[1])?;
    }
    let nt = mesh.num_triangles();
    writeln!(out, "CELLS {} {}", nt, 4 * nt)?;
    for t in &mesh.triangles {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(out, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(out, "5")?;
    }
    writeln!(out, "CELL_DATA {nt}")?;
    writeln!(out, "SCALARS region int 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for tag in &mesh.triangle_tags {
        writeln!(out, "{}", tag.code())?;
    }
    if !fields.is_empty() {
        writeln!(out, "POINT_DATA {}", mesh.num_vertices())?;
        for (name, values) in fields {
            if values.len() != mesh.num_vertices() {
                return Err(Error::Input(format!("field {name} has wrong length")));
            }
            writeln!(out, "SCALARS {name} double 1")?;
            writeln!(out, "LOOKUP_TABLE default")?;
            for x in values.iter() {
                writeln!(out, "{x:e}")?;
            }
        }
    }
    Ok(())
}

/// One nodal value per line.
pub fn write_values<W: Write>(values: &[f64], mut out: W) -> Result<()> {
    for x in values {
        writeln!(out, "{x:e}")?;
    }
    Ok(())
}
