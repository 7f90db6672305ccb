//! Polygonal meshes whose edges are straight segments or exact sub-arcs of
//! shared parametric curves.
//!
//! A mesh stores a curve table; a curved edge references a curve id plus a
//! parameter sub-interval, so every edge of a cut mesh keeps the exact
//! interface geometry. Cells are counterclockwise edge loops. Derived cell
//! geometry (area, centroid, diameter, quadrature fan anchor) is computed
//! by [`Mesh::finalize`] and cached on the cell.

pub mod cut;
pub mod generate;
pub mod io;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::CurveDef;
use crate::quad::gauss01;
use crate::{Point, Vec2};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("vertex {vertex}: non-finite coordinates")]
    BadVertex { vertex: usize },
    #[error("edge {edge}: vertex reference {vertex} out of range ({nv} vertices)")]
    BadVertexRef { edge: usize, vertex: usize, nv: usize },
    #[error("cell {cell}: edge reference {edge} out of range ({ne} edges)")]
    BadEdgeRef { cell: usize, edge: usize, ne: usize },
    #[error("edge {edge}: curve reference {curve} out of range ({nc} curves)")]
    BadCurveRef { edge: usize, curve: usize, nc: usize },
    #[error("edge {edge}: sub-interval [{t0}, {t1}] leaves curve interval [{lo}, {hi}]")]
    BadSubInterval { edge: usize, t0: f64, t1: f64, lo: f64, hi: f64 },
    #[error("edge {edge}: endpoint {which} is {dist:.3e} away from the curve evaluation")]
    EndpointMismatch { edge: usize, which: usize, dist: f64 },
    #[error("cell {cell}: edge loop does not close at item {item} (gap {gap:.3e})")]
    OpenLoop { cell: usize, item: usize, gap: f64 },
    #[error("cell {cell}: loop has non-positive signed area {area:.3e}")]
    NotCcw { cell: usize, area: f64 },
    #[error("cell {cell}: region {region} missing from region table")]
    UnknownRegion { cell: usize, region: u32 },
    #[error("edge {edge}: marked {marker:?} but used by {uses} cell(s)")]
    ManifoldViolation { edge: usize, marker: &'static str, uses: usize },
    #[error("edge {edge}: used twice with the same orientation")]
    OrientationClash { edge: usize },
    #[error("curve {curve}: {source}")]
    Curve {
        curve: usize,
        source: crate::curve::CurveError,
    },
    #[error("mesh file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which straight side of the domain box a boundary edge lies on. Only
/// used while generating structured grids, to decide the marker class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeMarker {
    Internal,
    /// Boundary edge whose pressure data enters the right-hand side weakly.
    Natural,
    /// Boundary edge whose normal-flux dofs are constrained.
    Essential,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EdgeGeometry {
    Straight,
    /// Sub-interval `[t0, t1]` (increasing) of the referenced curve.
    Curved { curve: usize, t0: f64, t1: f64 },
}

/// Mesh edge with an intrinsic direction: from `v[0]` to `v[1]`, which for
/// curved edges is the direction of increasing curve parameter. The edge's
/// intrinsic normal is the right normal of that direction, so a cell whose
/// counterclockwise loop traverses the edge forward has outward normal
/// equal to the intrinsic normal.
#[derive(Clone, Debug)]
pub struct Edge {
    pub v: [usize; 2],
    pub geometry: EdgeGeometry,
    pub marker: EdgeMarker,
    /// Arc length, filled by [`Mesh::finalize`].
    pub length: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OrientedEdge {
    pub edge: usize,
    /// True when the loop traverses the edge in intrinsic direction.
    pub forward: bool,
}

/// Cell geometry derived by [`Mesh::finalize`].
#[derive(Clone, Debug)]
pub struct CellGeometry {
    pub area: f64,
    pub centroid: Point,
    pub diameter: f64,
    /// Anchor from which the boundary fan has all positively oriented
    /// pieces; `None` flags a cell no anchor candidate worked for.
    pub fan_anchor: Option<Point>,
}

#[derive(Clone, Debug)]
pub struct Cell {
    /// Counterclockwise edge loop.
    pub edges: Vec<OrientedEdge>,
    pub region: u32,
    pub geometry: Option<CellGeometry>,
}

#[derive(Clone, Debug, Default)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub curves: Vec<CurveDef>,
    pub edges: Vec<Edge>,
    pub cells: Vec<Cell>,
    /// Region id to label.
    pub regions: BTreeMap<u32, String>,
}

/// One traversed piece of a cell boundary, with resolved geometry.
/// Parametrized by `s in [0, 1]` along the traversal direction; for a
/// counterclockwise loop the outward normal times the length element is
/// `(dy/ds, -dx/ds)`.
#[derive(Clone, Debug)]
pub struct BoundaryItem<'a> {
    pub edge: usize,
    pub forward: bool,
    pub start: Point,
    pub end: Point,
    pub curved: Option<CurvedPart<'a>>,
}

#[derive(Clone, Debug)]
pub struct CurvedPart<'a> {
    pub curve: &'a CurveDef,
    pub curve_id: usize,
    /// Curve parameters in traversal order (`ta > tb` when reversed).
    pub ta: f64,
    pub tb: f64,
}

impl BoundaryItem<'_> {
    pub fn is_curved(&self) -> bool {
        self.curved.is_some()
    }

    pub fn point(&self, s: f64) -> Point {
        match &self.curved {
            None => self.start + s * (self.end - self.start),
            Some(c) => c.curve.pt(c.ta + s * (c.tb - c.ta)),
        }
    }

    /// Derivative of [`BoundaryItem::point`] with respect to `s`.
    pub fn dpoint(&self, s: f64) -> Vec2 {
        match &self.curved {
            None => self.end - self.start,
            Some(c) => c.curve.vel(c.ta + s * (c.tb - c.ta)) * (c.tb - c.ta),
        }
    }
}

impl Cell {
    pub fn geometry(&self) -> &CellGeometry {
        self.geometry
            .as_ref()
            .expect("cell geometry accessed before Mesh::finalize")
    }
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Mesh size: the mean cell diameter.
    pub fn mean_diameter(&self) -> f64 {
        let sum: f64 = self.cells.iter().map(|c| c.geometry().diameter).sum();
        sum / self.cells.len() as f64
    }

    /// Copy of the mesh with every curved edge replaced by the straight
    /// segment between its endpoints. Vertices, connectivity, markers and
    /// regions are untouched; derived geometry is recomputed.
    pub fn straightened(&self) -> Mesh {
        let mut out = self.clone();
        for e in &mut out.edges {
            e.geometry = EdgeGeometry::Straight;
        }
        out.finalize();
        out
    }

    /// Point-in-cell test by ray casting against the boundary polyline
    /// (curved items sampled at 64 segments). Points within a hair of the
    /// boundary may land on either side.
    pub fn contains(&self, cell: usize, p: Point) -> bool {
        let mut inside = false;
        for item in self.boundary_items(cell) {
            let samples = if item.is_curved() { 64 } else { 1 };
            let mut prev = item.point(0.0);
            for k in 1..=samples {
                let next = item.point(k as f64 / samples as f64);
                if (prev.y > p.y) != (next.y > p.y) {
                    let x = prev.x + (p.y - prev.y) * (next.x - prev.x) / (next.y - prev.y);
                    if x > p.x {
                        inside = !inside;
                    }
                }
                prev = next;
            }
        }
        inside
    }

    /// Finds the cell containing `p`, screening candidates by their
    /// circumscribed radius first. Requires a finalized mesh.
    pub fn locate(&self, p: Point) -> Option<usize> {
        (0..self.cells.len()).find(|&c| {
            let g = self.cells[c].geometry();
            (p - g.centroid).norm() <= g.diameter * (1.0 + 1e-9) && self.contains(c, p)
        })
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.geometry().area).sum()
    }

    /// Resolved boundary items of one cell, in loop order.
    pub fn boundary_items(&self, cell: usize) -> Vec<BoundaryItem<'_>> {
        self.cells[cell]
            .edges
            .iter()
            .map(|oe| self.item_for(oe))
            .collect()
    }

    /// Boundary item of one edge in its intrinsic direction (`v[0]` to
    /// `v[1]`, increasing curve parameter), independent of any cell loop.
    pub fn intrinsic_item(&self, edge: usize) -> BoundaryItem<'_> {
        self.item_for(&OrientedEdge {
            edge,
            forward: true,
        })
    }

    fn item_for(&self, oe: &OrientedEdge) -> BoundaryItem<'_> {
        let e = &self.edges[oe.edge];
        let (va, vb) = if oe.forward {
            (e.v[0], e.v[1])
        } else {
            (e.v[1], e.v[0])
        };
        let curved = match e.geometry {
            EdgeGeometry::Straight => None,
            EdgeGeometry::Curved { curve, t0, t1 } => Some(CurvedPart {
                curve: &self.curves[curve],
                curve_id: curve,
                ta: if oe.forward { t0 } else { t1 },
                tb: if oe.forward { t1 } else { t0 },
            }),
        };
        BoundaryItem {
            edge: oe.edge,
            forward: oe.forward,
            start: self.vertices[va],
            end: self.vertices[vb],
            curved,
        }
    }

    /// Compute edge lengths and derived cell geometry. Call after building
    /// or mutating a mesh and before any quadrature or assembly.
    pub fn finalize(&mut self) {
        for e in 0..self.edges.len() {
            self.edges[e].length = match self.edges[e].geometry {
                EdgeGeometry::Straight => {
                    (self.vertices[self.edges[e].v[1]] - self.vertices[self.edges[e].v[0]]).norm()
                }
                EdgeGeometry::Curved { curve, t0, t1 } => self.curves[curve]
                    .arc_length(t0, t1)
                    .expect("edge sub-interval must lie inside its curve interval"),
            };
        }
        for c in 0..self.cells.len() {
            let geo = self.cell_geometry(c);
            self.cells[c].geometry = Some(geo);
        }
    }

    fn cell_geometry(&self, cell: usize) -> CellGeometry {
        let items = self.boundary_items(cell);

        // Area and first moments by the divergence theorem:
        // |E| = integral of x dy, moments from x^2/2 dy and -y^2/2 dx.
        let mut area = 0.0;
        let mut mx = 0.0;
        let mut my = 0.0;
        for item in &items {
            let rule = gauss01(if item.is_curved() { 16 } else { 3 });
            for (s, w) in rule.iter() {
                let p = item.point(s);
                let d = item.dpoint(s);
                area += w * p.x * d.y;
                mx += w * 0.5 * p.x * p.x * d.y;
                my += w * (-0.5) * p.y * p.y * d.x;
            }
        }
        let centroid = Point::new(mx / area, my / area);

        // Diameter over loop vertices and curved-edge samples.
        let mut pts: Vec<Point> = items.iter().map(|i| i.start).collect();
        for item in &items {
            if item.is_curved() {
                for i in 0..17 {
                    pts.push(item.point(i as f64 / 16.0));
                }
            }
        }
        let mut diameter = 0.0f64;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                diameter = diameter.max((pts[i] - pts[j]).norm());
            }
        }

        let fan_anchor = self.pick_fan_anchor(&items, centroid, diameter);
        CellGeometry {
            area,
            centroid,
            diameter,
            fan_anchor,
        }
    }

    /// Anchor from which every fan piece over the boundary items is
    /// positively oriented: the centroid when the cell is star-shaped with
    /// respect to it, otherwise the first loop vertex or item midpoint that
    /// works.
    fn pick_fan_anchor(
        &self,
        items: &[BoundaryItem<'_>],
        centroid: Point,
        diameter: f64,
    ) -> Option<Point> {
        let candidates: Vec<Point> = std::iter::once(centroid)
            .chain(items.iter().map(|i| i.start))
            .chain(items.iter().map(|i| i.point(0.5)))
            .collect();
        candidates
            .into_iter()
            .find(|&anchor| fan_is_positive(items, anchor, diameter))
    }

    /// Check mesh invariants; errors name the offending entity.
    pub fn validate(&self) -> Result<(), MeshError> {
        let tol = 1e-9;
        for (vi, p) in self.vertices.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(MeshError::BadVertex { vertex: vi });
            }
        }
        for (ci, c) in self.curves.iter().enumerate() {
            c.validate()
                .map_err(|source| MeshError::Curve { curve: ci, source })?;
        }
        for (ei, e) in self.edges.iter().enumerate() {
            for &v in &e.v {
                if v >= self.vertices.len() {
                    return Err(MeshError::BadVertexRef {
                        edge: ei,
                        vertex: v,
                        nv: self.vertices.len(),
                    });
                }
            }
            if let EdgeGeometry::Curved { curve, t0, t1 } = e.geometry {
                if curve >= self.curves.len() {
                    return Err(MeshError::BadCurveRef {
                        edge: ei,
                        curve,
                        nc: self.curves.len(),
                    });
                }
                let [lo, hi] = self.curves[curve].interval;
                let slack = 1e-12 * (hi - lo).max(1.0);
                if t0 >= t1 || t0 < lo - slack || t1 > hi + slack {
                    return Err(MeshError::BadSubInterval {
                        edge: ei,
                        t0,
                        t1,
                        lo,
                        hi,
                    });
                }
                for (which, t) in [(0usize, t0), (1, t1)] {
                    let dist = (self.curves[curve].pt(t) - self.vertices[e.v[which]]).norm();
                    if dist > tol {
                        return Err(MeshError::EndpointMismatch {
                            edge: ei,
                            which,
                            dist,
                        });
                    }
                }
            }
        }

        let mut uses: Vec<Vec<bool>> = vec![Vec::new(); self.edges.len()];
        for (ci, cell) in self.cells.iter().enumerate() {
            if !self.regions.contains_key(&cell.region) {
                return Err(MeshError::UnknownRegion {
                    cell: ci,
                    region: cell.region,
                });
            }
            for oe in &cell.edges {
                if oe.edge >= self.edges.len() {
                    return Err(MeshError::BadEdgeRef {
                        cell: ci,
                        edge: oe.edge,
                        ne: self.edges.len(),
                    });
                }
            }
            let items = self.boundary_items(ci);
            for (ii, item) in items.iter().enumerate() {
                let next = &items[(ii + 1) % items.len()];
                let gap = (item.end - next.start).norm();
                if gap > tol {
                    return Err(MeshError::OpenLoop {
                        cell: ci,
                        item: ii,
                        gap,
                    });
                }
            }
            let area = signed_area(&items);
            if area <= 0.0 {
                return Err(MeshError::NotCcw { cell: ci, area });
            }
            for oe in &cell.edges {
                uses[oe.edge].push(oe.forward);
            }
        }
        for (ei, u) in uses.iter().enumerate() {
            let expected = match self.edges[ei].marker {
                EdgeMarker::Internal => 2,
                _ => 1,
            };
            if u.len() != expected {
                let marker = match self.edges[ei].marker {
                    EdgeMarker::Internal => "internal",
                    _ => "boundary",
                };
                return Err(MeshError::ManifoldViolation {
                    edge: ei,
                    marker,
                    uses: u.len(),
                });
            }
            if u.len() == 2 && u[0] == u[1] {
                return Err(MeshError::OrientationClash { edge: ei });
            }
        }
        Ok(())
    }
}

/// Signed area of a closed item loop, `(1/2) contour integral x dy - y dx`.
pub fn signed_area(items: &[BoundaryItem<'_>]) -> f64 {
    let mut area = 0.0;
    for item in items {
        let rule = gauss01(if item.is_curved() { 16 } else { 3 });
        for (s, w) in rule.iter() {
            let p = item.point(s);
            let d = item.dpoint(s);
            area += w * 0.5 * (p.x * d.y - p.y * d.x);
        }
    }
    area
}

fn fan_is_positive(items: &[BoundaryItem<'_>], anchor: Point, diameter: f64) -> bool {
    let tol = -1e-12 * diameter * diameter;
    let mut any_positive = false;
    for item in items {
        if item.is_curved() {
            for i in 0..33 {
                let s = i as f64 / 32.0;
                let r = item.point(s) - anchor;
                let d = item.dpoint(s);
                let det = r.x * d.y - r.y * d.x;
                if det < tol {
                    return false;
                }
                if det > -tol {
                    any_positive = true;
                }
            }
        } else {
            let a = item.start - anchor;
            let b = item.end - anchor;
            let det = a.x * b.y - a.y * b.x;
            if det < tol {
                return false;
            }
            if det > -tol {
                any_positive = true;
            }
        }
    }
    any_positive
}

#[cfg(test)]
pub(crate) mod test_meshes {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    /// Single unit square cell, counterclockwise.
    pub fn unit_square() -> Mesh {
        let vertices = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ];
        let mk = |v| Edge {
            v,
            geometry: EdgeGeometry::Straight,
            marker: EdgeMarker::Natural,
            length: 0.0,
        };
        let edges = vec![mk([0, 1]), mk([1, 2]), mk([2, 3]), mk([3, 0])];
        let cells = vec![Cell {
            edges: (0..4).map(|e| OrientedEdge { edge: e, forward: true }).collect(),
            region: 1,
            geometry: None,
        }];
        let mut mesh = Mesh {
            vertices,
            curves: vec![],
            edges,
            cells,
            regions: [(1, "domain".to_string())].into(),
        };
        mesh.finalize();
        mesh
    }

    /// Quarter disk of radius `r` at the origin: two straight legs and the
    /// quarter arc, counterclockwise.
    pub fn quarter_disk(r: f64) -> Mesh {
        let vertices = vec![
            Point::new(0.0, 0.0),
            Point::new(r, 0.0),
            Point::new(0.0, r),
        ];
        let curves = vec![CurveDef::circle_arc(Point::new(0.0, 0.0), r, 0.0, FRAC_PI_2)];
        let edges = vec![
            Edge {
                v: [0, 1],
                geometry: EdgeGeometry::Straight,
                marker: EdgeMarker::Natural,
                length: 0.0,
            },
            Edge {
                v: [1, 2],
                geometry: EdgeGeometry::Curved {
                    curve: 0,
                    t0: 0.0,
                    t1: FRAC_PI_2,
                },
                marker: EdgeMarker::Natural,
                length: 0.0,
            },
            Edge {
                v: [2, 0],
                geometry: EdgeGeometry::Straight,
                marker: EdgeMarker::Natural,
                length: 0.0,
            },
        ];
        let cells = vec![Cell {
            edges: (0..3).map(|e| OrientedEdge { edge: e, forward: true }).collect(),
            region: 1,
            geometry: None,
        }];
        let mut mesh = Mesh {
            vertices,
            curves,
            edges,
            cells,
            regions: [(1, "domain".to_string())].into(),
        };
        mesh.finalize();
        mesh
    }
}
