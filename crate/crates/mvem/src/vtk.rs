//! Legacy ASCII VTK writers for meshes and solved fields. Curved edges
//! are sampled as short polylines, so the files are a lossy view meant
//! for plotting, never an input to further computation.

use std::io::Write;

use crate::mesh::Mesh;
use crate::solver::{local_pressure, Assembly, Solution};
use crate::vem::vector_value;
use crate::Point;

/// Segments used to draw one curved edge.
const ARC_SEGMENTS: usize = 8;

/// Polygon outline of a cell, with curved items expanded into
/// [`ARC_SEGMENTS`] straight pieces.
fn cell_outline(mesh: &Mesh, cell: usize) -> Vec<Point> {
    let mut pts = Vec::new();
    for item in mesh.boundary_items(cell) {
        pts.push(item.start);
        if let Some(part) = &item.curved {
            for i in 1..ARC_SEGMENTS {
                let t = part.ta + (part.tb - part.ta) * i as f64 / ARC_SEGMENTS as f64;
                let p = part
                    .curve
                    .eval(t)
                    .expect("interior parameter of a clipped curve");
                pts.push(p);
            }
        }
    }
    pts
}

fn write_grid(mesh: &Mesh, title: &str, out: &mut dyn Write) -> std::io::Result<()> {
    let outlines: Vec<Vec<Point>> = (0..mesh.n_cells()).map(|c| cell_outline(mesh, c)).collect();
    let n_points: usize = outlines.iter().map(Vec::len).sum();

    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{title}")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {n_points} double")?;
    for outline in &outlines {
        for p in outline {
            writeln!(out, "{:.9e} {:.9e} 0.0", p.x, p.y)?;
        }
    }
    let size: usize = outlines.iter().map(|o| o.len() + 1).sum();
    writeln!(out, "CELLS {} {size}", outlines.len())?;
    let mut next = 0;
    for outline in &outlines {
        write!(out, "{}", outline.len())?;
        for _ in outline {
            write!(out, " {next}")?;
            next += 1;
        }
        writeln!(out)?;
    }
    writeln!(out, "CELL_TYPES {}", outlines.len())?;
    for _ in &outlines {
        writeln!(out, "7")?;
    }
    writeln!(out, "CELL_DATA {}", outlines.len())?;
    Ok(())
}

/// Mesh-only file carrying the region id of each cell.
pub fn write_mesh(mesh: &Mesh, out: &mut dyn Write) -> std::io::Result<()> {
    write_grid(mesh, "polygonal mesh", out)?;
    writeln!(out, "SCALARS region int 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for cell in &mesh.cells {
        writeln!(out, "{}", cell.region)?;
    }
    Ok(())
}

/// Solved fields: element mean pressure and the projected velocity
/// evaluated at the cell centroid.
pub fn write_solution(
    mesh: &Mesh,
    assembly: &Assembly,
    solution: &Solution,
    out: &mut dyn Write,
) -> std::io::Result<()> {
    write_grid(mesh, "pressure and velocity", out)?;
    writeln!(out, "SCALARS pressure double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for cell in 0..mesh.n_cells() {
        let el = &assembly.locals[cell];
        let coeffs = local_pressure(assembly, cell, &solution.pressure);
        let mean = el.h_pressure.row(0).transpose().dot(&coeffs) / el.area;
        writeln!(out, "{mean:.9e}")?;
    }
    writeln!(out, "VECTORS velocity double")?;
    for cell in 0..mesh.n_cells() {
        let el = &assembly.locals[cell];
        let q = vector_value(&el.basis, &solution.projected[cell], mesh.cells[cell].geometry().centroid);
        writeln!(out, "{:.9e} {:.9e} 0.0", q.x, q.y)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::cut::cut_by_curves;
    use crate::mesh::generate::quad_grid;
    use crate::mesh::EdgeMarker;
    use crate::problems::{by_name, Geometry};
    use crate::solver::{assemble, solve};
    use approx::assert_relative_eq;

    fn quarter_disk_pair() -> Mesh {
        let grid = quad_grid([0.0, 0.0, 1.0, 1.0], 1, 1, |_| EdgeMarker::Natural);
        let arc = crate::curve::CurveDef::circle_arc(
            Point::new(0.0, 0.0),
            0.45,
            0.0,
            std::f64::consts::FRAC_PI_2,
        );
        let rule = |p: Point| if p.coords.norm() < 0.45 { 2 } else { 1 };
        let regions = [(1, "out".to_string()), (2, "in".to_string())].into();
        cut_by_curves(&grid, &[arc], rule, regions).unwrap().mesh
    }

    #[test]
    fn solved_square_exports_one_polygon_and_two_cell_arrays() {
        let mesh = quad_grid([0.0, 0.0, 1.0, 1.0], 1, 1, |_| EdgeMarker::Natural);
        let spec = by_name("patch", 1).unwrap();
        let problem = spec.darcy();
        let assembly = assemble(&mesh, 1, &problem, 0).unwrap();
        let solution = solve(&assembly).unwrap();
        let mut buf = Vec::new();
        write_solution(&mesh, &assembly, &solution, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert!(lines.contains(&"DATASET UNSTRUCTURED_GRID"));
        assert!(lines.contains(&"POINTS 4 double"));
        assert!(lines.contains(&"CELLS 1 5"));
        assert!(lines.contains(&"4 0 1 2 3"));
        assert!(lines.contains(&"CELL_TYPES 1"));
        assert!(lines.contains(&"SCALARS pressure double 1"));
        assert!(lines.contains(&"VECTORS velocity double"));

        // Exact solution p = 1 + x + y: cell mean 2, velocity (-1, -1).
        let idx = lines.iter().position(|&l| l == "LOOKUP_TABLE default").unwrap();
        let mean: f64 = lines[idx + 1].parse().unwrap();
        assert_relative_eq!(mean, 2.0, epsilon = 1e-9);
        let vidx = lines.iter().position(|&l| l == "VECTORS velocity double").unwrap();
        let comps: Vec<f64> = lines[vidx + 1]
            .split_whitespace()
            .map(|s| s.parse().unwrap())
            .collect();
        assert_relative_eq!(comps[0], -1.0, epsilon = 1e-9);
        assert_relative_eq!(comps[1], -1.0, epsilon = 1e-9);
        assert_eq!(comps[2], 0.0);
    }

    #[test]
    fn curved_edges_become_eight_segment_polylines() {
        let mesh = quarter_disk_pair();
        let mut buf = Vec::new();
        write_mesh(&mesh, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();

        let disk = (0..mesh.n_cells())
            .find(|&c| mesh.cells[c].region == 2)
            .unwrap();
        let outline = cell_outline(&mesh, disk);
        assert_eq!(outline.len(), 3 + ARC_SEGMENTS - 1);
        let on_circle = outline
            .iter()
            .filter(|p| (p.coords.norm() - 0.45).abs() < 1e-12)
            .count();
        assert_eq!(on_circle, ARC_SEGMENTS + 1);
        assert!(text.contains("SCALARS region int 1"));
        let regions: Vec<&str> = text.lines().rev().take(2).collect();
        let mut ids: Vec<&str> = regions.into_iter().collect();
        ids.sort();
        assert_eq!(ids, vec!["1", "2"]);
    }

    #[test]
    fn point_count_matches_the_outline_sum() {
        let spec = by_name("interface", 1).unwrap();
        let mesh = spec.mesh(2, Geometry::Curved).unwrap();
        let mut buf = Vec::new();
        write_mesh(&mesh, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let expected: usize = (0..mesh.n_cells()).map(|c| cell_outline(&mesh, c).len()).sum();
        assert!(text.contains(&format!("POINTS {expected} double")));
        assert!(text.contains(&format!("CELL_DATA {}", mesh.n_cells())));
    }
}
