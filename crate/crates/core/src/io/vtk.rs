//! Legacy ASCII VTK output of the cut surface.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::cut::{CutSurface, NarrowBand};
use crate::space::{eval_basis, FieldVector, TraceSpace};

use super::IoError;

/// Values of a P1 field at the three vertices of every cut triangle.
pub fn sample_at_triangle_vertices(
    cut: &CutSurface,
    band: &NarrowBand,
    space: &TraceSpace,
    field: &FieldVector,
) -> Result<Vec<f64>, IoError> {
    let mut out = Vec::with_capacity(3 * cut.triangles.len());
    for tri in &cut.triangles {
        let e = &band.elements[tri.element];
        let dofs = space.element_dofs(tri.element);
        for v in &tri.vertices {
            let b = eval_basis(&e.vertices, v).map_err(|err| IoError::Format(err.to_string()))?;
            out.push((0..4).map(|k| b.values[k] * field.values[dofs[k]]).sum());
        }
    }
    Ok(out)
}

/// Renders the triangle soup with one scalar array per named field.
pub fn render_vtk(
    cut: &CutSurface,
    band: &NarrowBand,
    space: &TraceSpace,
    fields: &[(&str, &FieldVector)],
) -> Result<String, IoError> {
    let nt = cut.triangles.len();
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\ncut surface\nASCII\nDATASET POLYDATA\n");
    let _ = writeln!(s, "POINTS {} double", 3 * nt);
    for tri in &cut.triangles {
        for v in &tri.vertices {
            let _ = writeln!(s, "{} {} {}", v.x, v.y, v.z);
        }
    }
    let _ = writeln!(s, "POLYGONS {} {}", nt, 4 * nt);
    for t in 0..nt {
        let _ = writeln!(s, "3 {} {} {}", 3 * t, 3 * t + 1, 3 * t + 2);
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {}", 3 * nt);
        for (name, field) in fields {
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                return Err(IoError::Format(format!("bad field name `{name}`")));
            }
            let vals = sample_at_triangle_vertices(cut, band, space, field)?;
            let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for v in vals {
                let _ = writeln!(s, "{v}");
            }
        }
    }
    Ok(s)
}

pub fn write_vtk(
    path: &Path,
    cut: &CutSurface,
    band: &NarrowBand,
    space: &TraceSpace,
    fields: &[(&str, &FieldVector)],
) -> Result<(), IoError> {
    let text = render_vtk(cut, band, space, fields)?;
    fs::write(path, text).map_err(|source| IoError::Write {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::Discretization;
    use crate::cut::CutOptions;
    use crate::levelset::Sphere;
    use crate::mesh::{BackgroundMesh, Box3};
    use crate::solver::random_initial_condition;

    fn disc() -> Discretization {
        let mesh = BackgroundMesh::new(Box3::cube(-1.25, 1.25).unwrap(), 6).unwrap();
        Discretization::build(&Sphere::new(1.0).unwrap(), mesh, CutOptions::default()).unwrap()
    }

    fn header_count(text: &str, key: &str) -> usize {
        let line = text.lines().find(|l| l.starts_with(key)).unwrap();
        line.split_whitespace().nth(1).unwrap().parse().unwrap()
    }

    #[test]
    fn geometry_only_file() {
        let d = disc();
        let text = render_vtk(&d.cut, &d.band, &d.space, &[]).unwrap();
        let nt = d.cut.triangles.len();
        assert_eq!(header_count(&text, "POINTS"), 3 * nt);
        assert_eq!(header_count(&text, "POLYGONS"), nt);
        assert!(!text.contains("POINT_DATA"));
        assert!(text.starts_with("# vtk DataFile Version"));
    }

    #[test]
    fn scalar_range_within_field_range() {
        let d = disc();
        let c = random_initial_condition(d.n_dof(), 3);
        let vals = sample_at_triangle_vertices(&d.cut, &d.band, &d.space, &c).unwrap();
        let lo = c.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = c.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(vals.iter().all(|v| *v >= lo - 1e-12 && *v <= hi + 1e-12));
        let text = render_vtk(&d.cut, &d.band, &d.space, &[("c", &c)]).unwrap();
        assert_eq!(header_count(&text, "POINT_DATA"), vals.len());
        assert!(text.contains("SCALARS c double 1"));
        assert!(render_vtk(&d.cut, &d.band, &d.space, &[("a b", &c)]).is_err());
    }

    #[test]
    fn write_errors_name_the_path() {
        let d = disc();
        let p = Path::new("/nonexistent-dir/x.vtk");
        let e = write_vtk(p, &d.cut, &d.band, &d.space, &[]).unwrap_err();
        assert!(e.to_string().contains("/nonexistent-dir/x.vtk"));
    }
}
