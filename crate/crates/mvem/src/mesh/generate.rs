//! Structured quadrilateral mesh generation.
//!
//! Grids are built on an axis-aligned box with `nx * ny` cells. Vertices,
//! edges and cells are numbered row-major from the bottom-left corner, with
//! all horizontal edges before all vertical ones, so ids are reproducible
//! and easy to address from tests. A perturbed variant jitters the interior
//! vertices with a seeded generator to break the tensor-product structure
//! while keeping the boundary (and hence the covered area) fixed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Cell, Edge, EdgeGeometry, EdgeMarker, Mesh, OrientedEdge, Side};
use crate::Point;

/// Axis-aligned bounding box `[xmin, ymin, xmax, ymax]`.
pub type BBox = [f64; 4];

/// Builds an `nx * ny` grid of rectangular cells covering `bbox`.
///
/// Boundary edges get the marker `bc(side)` for the box side they lie on;
/// interior edges are marked internal. The returned mesh is finalized.
///
/// # Panics
///
/// Panics when `nx` or `ny` is zero or the box is degenerate.
pub fn quad_grid(bbox: BBox, nx: usize, ny: usize, bc: impl Fn(Side) -> EdgeMarker) -> Mesh {
    let [xmin, ymin, xmax, ymax] = bbox;
    assert!(nx > 0 && ny > 0, "grid must have at least one cell per axis");
    assert!(xmax > xmin && ymax > ymin, "bounding box must have positive extent");

    let hx = (xmax - xmin) / nx as f64;
    let hy = (ymax - ymin) / ny as f64;

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Point::new(xmin + i as f64 * hx, ymin + j as f64 * hy));
        }
    }
    let vid = |i: usize, j: usize| j * (nx + 1) + i;

    // Horizontal edges first (pointing +x), then vertical ones (pointing +y).
    let mut edges = Vec::with_capacity(ny * (nx + 1) + nx * (ny + 1));
    for j in 0..=ny {
        for i in 0..nx {
            let marker = if j == 0 {
                bc(Side::Bottom)
            } else if j == ny {
                bc(Side::Top)
            } else {
                EdgeMarker::Internal
            };
            edges.push(Edge {
                v: [vid(i, j), vid(i + 1, j)],
                geometry: EdgeGeometry::Straight,
                marker,
                length: 0.0,
            });
        }
    }
    let n_h = edges.len();
    for j in 0..ny {
        for i in 0..=nx {
            let marker = if i == 0 {
                bc(Side::Left)
            } else if i == nx {
                bc(Side::Right)
            } else {
                EdgeMarker::Internal
            };
            edges.push(Edge {
                v: [vid(i, j), vid(i, j + 1)],
                geometry: EdgeGeometry::Straight,
                marker,
                length: 0.0,
            });
        }
    }
    let h_id = |i: usize, j: usize| j * nx + i;
    let v_id = |i: usize, j: usize| n_h + j * (nx + 1) + i;

    let mut cells = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            cells.push(Cell {
                edges: vec![
                    OrientedEdge { edge: h_id(i, j), forward: true },
                    OrientedEdge { edge: v_id(i + 1, j), forward: true },
                    OrientedEdge { edge: h_id(i, j + 1), forward: false },
                    OrientedEdge { edge: v_id(i, j), forward: false },
                ],
                region: 0,
                geometry: None,
            });
        }
    }

    let mut mesh = Mesh {
        vertices,
        curves: Vec::new(),
        edges,
        cells,
        regions: [(0, "domain".to_string())].into(),
    };
    mesh.finalize();
    mesh
}

/// Like [`quad_grid`], but each interior vertex is shifted by a uniform
/// random offset of up to `amplitude` cell widths per axis. Boundary
/// vertices stay put, so the covered region is exactly the box. The same
/// seed always produces the same mesh.
///
/// Amplitudes up to about `0.3` keep every cell simple and star-shaped.
pub fn perturbed_quad_grid(
    bbox: BBox,
    nx: usize,
    ny: usize,
    bc: impl Fn(Side) -> EdgeMarker,
    amplitude: f64,
    seed: u64,
) -> Mesh {
    let mut mesh = quad_grid(bbox, nx, ny, bc);
    let [xmin, ymin, xmax, ymax] = bbox;
    let hx = (xmax - xmin) / nx as f64;
    let hy = (ymax - ymin) / ny as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for j in 1..ny {
        for i in 1..nx {
            let dx: f64 = rng.random_range(-amplitude..amplitude) * hx;
            let dy: f64 = rng.random_range(-amplitude..amplitude) * hy;
            let v = &mut mesh.vertices[j * (nx + 1) + i];
            v.x += dx;
            v.y += dy;
        }
    }
    mesh.finalize();
    mesh
}
