use std::fmt::Write as _;
use std::path::Path;

use super::csv::format_float;
use crate::error::{Error, Result};
use crate::geometry::Mesh;

/// Named nodal scalar array.
pub struct VtkField<'a> {
    pub name: &'a str,
    pub values: &'a [f64],
}

/// Legacy ASCII v3.0 unstructured grid of triangles with point scalars.
pub fn render_vtk(mesh: &Mesh, title: &str, fields: &[VtkField]) -> Result<String> {
    let n = mesh.node_count();
    let t = mesh.triangle_count();
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    writeln!(s, "{}", title.lines().next().unwrap_or("")).unwrap();
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(s, "POINTS {n} double").unwrap();
    for p in mesh.nodes() {
        writeln!(s, "{} {} 0", format_float(p[0]), format_float(p[1])).unwrap();
    }
    writeln!(s, "CELLS {t} {}", 4 * t).unwrap();
    for [a, b, c] in mesh.triangles() {
        writeln!(s, "3 {a} {b} {c}").unwrap();
    }
    writeln!(s, "CELL_TYPES {t}").unwrap();
    for _ in 0..t {
        s.push_str("5\n");
    }
    if !fields.is_empty() {
        writeln!(s, "POINT_DATA {n}").unwrap();
    }
    for f in fields {
        if f.values.len() != n {
            return Err(Error::MeshMismatch(format!("field `{}` has {} values for {n} nodes", f.name, f.values.len())));
        }
        if f.name.is_empty() || f.name.contains(char::is_whitespace) {
            return Err(Error::Validation { key: "vtk field name".into(), message: format!("`{}`", f.name) });
        }
        writeln!(s, "SCALARS {} double 1\nLOOKUP_TABLE default", f.name).unwrap();
        for v in f.values {
            s.push_str(&format_float(*v));
            s.push('\n');
        }
    }
    Ok(s)
}

pub fn write_vtk(path: &Path, mesh: &Mesh, title: &str, fields: &[VtkField]) -> Result<()> {
    std::fs::write(path, render_vtk(mesh, title, fields)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_macro_mesh, MacroDomain};

    #[test]
    fn layout_and_counts() {
        let m = build_macro_mesh(&MacroDomain::unit_square(2)).unwrap();
        let u: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let s = render_vtk(&m, "demo", &[VtkField { name: "u", values: &u }]).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert_eq!(lines[2], "ASCII");
        assert_eq!(lines[3], "DATASET UNSTRUCTURED_GRID");
        assert_eq!(lines[4], "POINTS 9 double");
        assert!(s.contains("CELLS 8 32\n"));
        assert!(s.contains(&format!("CELL_TYPES 8\n{}", "5\n".repeat(8))));
        assert!(s.contains("POINT_DATA 9\nSCALARS u double 1\nLOOKUP_TABLE default\n"));
        let tail: Vec<f64> = lines[lines.len() - 9..].iter().map(|l| l.parse().unwrap()).collect();
        assert_eq!(tail, u);
    }

    #[test]
    fn rejects_wrong_length() {
        let m = build_macro_mesh(&MacroDomain::unit_square(2)).unwrap();
        assert!(render_vtk(&m, "x", &[VtkField { name: "u", values: &[1.0] }]).is_err());
    }
}
