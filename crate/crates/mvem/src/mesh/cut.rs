//! Cutting a mesh along exact curves.
//!
//! Curves are processed in order, so a later curve may terminate on an
//! edge created by an earlier one (a T-junction) but must not cross such
//! an edge transversally. For each cell the current curve's boundary
//! events are collected: closed-form crossings of the straight
//! (grid-aligned) edges plus curve endpoints lying on the boundary. A run
//! of the curve between two consecutive events whose midpoint lies inside
//! the cell splits the cell in two along the exact curve piece, and the
//! pieces are re-examined until no runs remain. A cell meeting the curve
//! at more than two points is first refined by one structured split and
//! retried a bounded number of times.
//!
//! Splitting a host edge rewrites the loops of every incident cell, so
//! the mesh stays conforming throughout; the crossing parameters come
//! from closed forms depending only on the grid line, so the two cells
//! sharing an edge always agree on the crossing bit for bit.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use super::{Cell, Edge, EdgeGeometry, EdgeMarker, Mesh, MeshError, OrientedEdge};
use crate::curve::{AxisSegment, CurveDef};
use crate::Point;

/// Snap distance as a fraction of the mesh bounding-box diagonal.
const SNAP_REL: f64 = 1e-10;
/// Structured refinements allowed per cell before giving up.
const MAX_RETRIES: u32 = 3;
/// Cells with `diameter^2 / area` above this are reported as slender.
const SLENDER_RATIO: f64 = 50.0;

#[derive(Debug, Error)]
pub enum CutError {
    #[error("curve {curve} is tangent to the boundary of cell {cell} at parameter {t}")]
    Tangent { curve: usize, cell: usize, t: f64 },
    #[error("curve {curve} ends inside cell {cell} at ({x}, {y}); clip curves to the mesh first")]
    EndpointInside { curve: usize, cell: usize, x: f64, y: f64 },
    #[error(
        "cell {cell}: curve meets its boundary at {count} points and the cell \
         is not a rectangle that could be refined"
    )]
    Unsplittable { cell: usize, count: usize },
    #[error("cell {cell}: still more than two boundary crossings after {retries} refinements")]
    RetryLimit { cell: usize, retries: u32 },
    #[error("edge {edge} is straight but not axis-aligned; only grid meshes can be cut")]
    SkewEdge { edge: usize },
    #[error("cell split produced a degenerate loop at vertex {vertex}")]
    DegenerateSplit { vertex: usize },
    #[error("cutting changed the total area by a relative {rel:.3e}")]
    AreaDrift { rel: f64 },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Result of [`cut_by_curves`].
#[derive(Debug)]
pub struct CutOutcome {
    pub mesh: Mesh,
    /// How many cells of the input mesh were split along a curve.
    pub cut_cells: usize,
    /// `(cell, diameter^2/area)` for cells above the slenderness
    /// threshold. Reported only; slender cells are kept as they are.
    pub slender: Vec<(usize, f64)>,
}

/// Splits `mesh` along each curve in turn, assigns every resulting cell
/// the region `region_rule(centroid)` and installs `regions` as the label
/// table. The input mesh must be finalized; the output is finalized and
/// validated, and its total area is checked against the input.
pub fn cut_by_curves(
    mesh: &Mesh,
    curves: &[CurveDef],
    region_rule: impl Fn(Point) -> u32,
    regions: BTreeMap<u32, String>,
) -> Result<CutOutcome, CutError> {
    let area_before = mesh.total_area();
    let mut work = Work::new(mesh);
    for def in curves {
        work.cut_one(def)?;
    }
    let cut_cells = work.cut_origins.len();
    let mut out = work.finish();
    out.regions = regions;
    out.finalize();
    for c in 0..out.cells.len() {
        out.cells[c].region = region_rule(out.cells[c].geometry().centroid);
    }
    out.validate()?;

    let rel = ((out.total_area() - area_before) / area_before).abs();
    if rel > 1e-10 {
        return Err(CutError::AreaDrift { rel });
    }
    let slender = (0..out.cells.len())
        .filter_map(|c| {
            let g = out.cells[c].geometry();
            let ratio = g.diameter * g.diameter / g.area;
            (ratio > SLENDER_RATIO).then_some((c, ratio))
        })
        .collect();
    Ok(CutOutcome {
        mesh: out,
        cut_cells,
        slender,
    })
}

#[derive(Clone, Debug)]
struct Event {
    /// Parameter on the curve being cut in.
    t: f64,
    point: Point,
    site: Site,
}

#[derive(Clone, Debug)]
enum Site {
    /// The event coincides with an existing mesh vertex.
    AtVertex(usize),
    /// On the interior of a straight edge; split it at the event point.
    OnStraight { edge: usize },
    /// On the interior of a curved edge; split it at host parameter `th`.
    OnCurved { edge: usize, th: f64 },
}

struct Work {
    vertices: Vec<Point>,
    curves: Vec<CurveDef>,
    edges: Vec<Edge>,
    alive: Vec<bool>,
    /// Replacement pair for a split (dead) edge, for resolving stale
    /// event sites.
    children: Vec<Option<[usize; 2]>>,
    /// Cells incident to each edge, kept current through every split.
    edge_cells: Vec<Vec<usize>>,
    cells: Vec<Cell>,
    /// Input cell each current cell descends from.
    origin: Vec<usize>,
    cut_origins: BTreeSet<usize>,
    snap: f64,
}

impl Work {
    fn new(mesh: &Mesh) -> Self {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &mesh.vertices {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let mut edge_cells = vec![Vec::new(); mesh.edges.len()];
        for (c, cell) in mesh.cells.iter().enumerate() {
            for oe in &cell.edges {
                edge_cells[oe.edge].push(c);
            }
        }
        Work {
            vertices: mesh.vertices.clone(),
            curves: mesh.curves.clone(),
            edges: mesh.edges.clone(),
            alive: vec![true; mesh.edges.len()],
            children: vec![None; mesh.edges.len()],
            edge_cells,
            cells: mesh
                .cells
                .iter()
                .map(|c| Cell {
                    edges: c.edges.clone(),
                    region: c.region,
                    geometry: None,
                })
                .collect(),
            origin: (0..mesh.cells.len()).collect(),
            cut_origins: BTreeSet::new(),
            snap: SNAP_REL * (hi - lo).norm(),
        }
    }

    fn cut_one(&mut self, def: &CurveDef) -> Result<(), CutError> {
        let kc = self.curves.len();
        self.curves.push(def.clone());
        let mut depth: HashMap<usize, u32> = HashMap::new();
        let mut queue: VecDeque<usize> = (0..self.cells.len()).collect();
        while let Some(c) = queue.pop_front() {
            let events = self.gather(c, kc)?;
            self.check_endpoints_inside(c, kc, &events)?;
            if events.len() > 2 {
                let d = *depth.get(&c).unwrap_or(&0);
                if d >= MAX_RETRIES {
                    return Err(CutError::RetryLimit {
                        cell: self.origin[c],
                        retries: d,
                    });
                }
                let kids = self.structured_split(c, events.len())?;
                for k in kids {
                    depth.insert(k, d + 1);
                    queue.push_back(k);
                }
                continue;
            }
            if let Some((a, b)) = self.first_inside_run(c, kc, &events) {
                let new_cell = self.chain_split(c, kc, &events[a], &events[b])?;
                self.cut_origins.insert(self.origin[c]);
                queue.push_back(c);
                queue.push_back(new_cell);
            }
        }
        Ok(())
    }

    /// Collects the cell's boundary events for curve `kc`, sorted by curve
    /// parameter and deduplicated (a crossing at a shared vertex is seen
    /// from both adjacent edges with identical parameter bits).
    fn gather(&self, c: usize, kc: usize) -> Result<Vec<Event>, CutError> {
        let cur = &self.curves[kc];
        let [lo, hi] = cur.interval;
        let span = (hi - lo).abs().max(1.0);
        let mut events: Vec<Event> = Vec::new();

        for oe in &self.cells[c].edges {
            let e = &self.edges[oe.edge];
            let EdgeGeometry::Straight = e.geometry else {
                continue;
            };
            let a = self.vertices[e.v[0]];
            let b = self.vertices[e.v[1]];
            let seg = if (a.x - b.x).abs() <= self.snap {
                AxisSegment::vertical(a.x, a.y, b.y)
            } else if (a.y - b.y).abs() <= self.snap {
                AxisSegment::horizontal(a.y, a.x, b.x)
            } else {
                return Err(CutError::SkewEdge { edge: oe.edge });
            };
            for hit in cur.segment_intersections(&seg, self.snap) {
                if hit.tangential {
                    return Err(CutError::Tangent {
                        curve: kc,
                        cell: self.origin[c],
                        t: hit.t,
                    });
                }
                events.push(self.vertex_snapped(c, oe.edge, hit.t, hit.point));
            }
        }
        for te in [lo, hi] {
            let p = cur.pt(te);
            if let Some(site) = self.endpoint_site(c, p) {
                events.push(Event { t: te, point: p, site });
            }
        }

        events.sort_by(|x, y| x.t.total_cmp(&y.t));
        let mut deduped: Vec<Event> = Vec::new();
        for ev in events {
            if let Some(last) = deduped.last_mut() {
                if (ev.t - last.t).abs() <= 1e-12 * span && (ev.point - last.point).norm() <= 2.0 * self.snap {
                    if matches!(ev.site, Site::AtVertex(_)) && !matches!(last.site, Site::AtVertex(_)) {
                        *last = ev;
                    }
                    continue;
                }
            }
            deduped.push(ev);
        }
        Ok(deduped)
    }

    /// Wraps a transversal hit, preferring an existing loop vertex within
    /// snap distance over splitting the edge.
    fn vertex_snapped(&self, c: usize, edge: usize, t: f64, p: Point) -> Event {
        if let Some(v) = self.nearby_loop_vertex(c, p) {
            return Event {
                t,
                point: p,
                site: Site::AtVertex(v),
            };
        }
        Event {
            t,
            point: p,
            site: Site::OnStraight { edge },
        }
    }

    fn nearby_loop_vertex(&self, c: usize, p: Point) -> Option<usize> {
        for oe in &self.cells[c].edges {
            for &v in &self.edges[oe.edge].v {
                if (self.vertices[v] - p).norm() <= self.snap {
                    return Some(v);
                }
            }
        }
        None
    }

    /// Locates a curve endpoint on the cell boundary: an existing vertex,
    /// the interior of a straight edge, or the interior of a curved edge
    /// (the T-junction case).
    fn endpoint_site(&self, c: usize, p: Point) -> Option<Site> {
        if let Some(v) = self.nearby_loop_vertex(c, p) {
            return Some(Site::AtVertex(v));
        }
        for oe in &self.cells[c].edges {
            let e = &self.edges[oe.edge];
            match e.geometry {
                EdgeGeometry::Straight => {
                    let a = self.vertices[e.v[0]];
                    let b = self.vertices[e.v[1]];
                    if dist_point_segment(p, a, b) <= self.snap {
                        return Some(Site::OnStraight { edge: oe.edge });
                    }
                }
                EdgeGeometry::Curved { curve, t0, t1 } => {
                    if let Some(th) = self.curves[curve].param_near(p, self.snap) {
                        let margin = 1e-9 * (t1 - t0);
                        if th <= t0 - margin || th >= t1 + margin {
                            continue;
                        }
                        if th <= t0 + margin {
                            return Some(Site::AtVertex(e.v[0]));
                        }
                        if th >= t1 - margin {
                            return Some(Site::AtVertex(e.v[1]));
                        }
                        return Some(Site::OnCurved { edge: oe.edge, th });
                    }
                }
            }
        }
        None
    }

    fn check_endpoints_inside(&self, c: usize, kc: usize, events: &[Event]) -> Result<(), CutError> {
        let cur = &self.curves[kc];
        let [lo, hi] = cur.interval;
        let span = (hi - lo).abs().max(1.0);
        for te in [lo, hi] {
            if events.iter().any(|ev| (ev.t - te).abs() <= 1e-12 * span) {
                continue;
            }
            let p = cur.pt(te);
            if self.point_in_cell(c, p) && self.dist_to_boundary(c, p) > self.snap {
                return Err(CutError::EndpointInside {
                    curve: kc,
                    cell: self.origin[c],
                    x: p.x,
                    y: p.y,
                });
            }
        }
        Ok(())
    }

    /// First consecutive event pair whose curve run crosses the cell
    /// interior and has not been cut already.
    fn first_inside_run(&self, c: usize, kc: usize, events: &[Event]) -> Option<(usize, usize)> {
        let cur = &self.curves[kc];
        let span = (cur.interval[1] - cur.interval[0]).abs().max(1.0);
        for w in 0..events.len().saturating_sub(1) {
            let (ea, eb) = (&events[w], &events[w + 1]);
            if eb.t - ea.t <= 1e-9 * span {
                continue;
            }
            if let (Site::AtVertex(x), Site::AtVertex(y)) = (&ea.site, &eb.site) {
                if x == y {
                    continue;
                }
            }
            let tm = 0.5 * (ea.t + eb.t);
            if self.run_already_cut(c, kc, tm) {
                continue;
            }
            if self.point_in_cell(c, cur.pt(tm)) {
                return Some((w, w + 1));
            }
        }
        None
    }

    /// True when the run midpoint already lies on one of the cell's own
    /// edges along this curve, i.e. the run is this cell's boundary.
    fn run_already_cut(&self, c: usize, kc: usize, tm: f64) -> bool {
        self.cells[c].edges.iter().any(|oe| {
            matches!(
                self.edges[oe.edge].geometry,
                EdgeGeometry::Curved { curve, t0, t1 }
                    if curve == kc && tm >= t0 - 1e-12 && tm <= t1 + 1e-12
            )
        })
    }

    fn chain_split(&mut self, c: usize, kc: usize, ea: &Event, eb: &Event) -> Result<usize, CutError> {
        let wa = self.materialize(ea)?;
        let wb = self.materialize(eb)?;
        if wa == wb {
            return Err(CutError::DegenerateSplit { vertex: wa });
        }
        let chord = self.push_edge(Edge {
            v: [wa, wb],
            geometry: EdgeGeometry::Curved {
                curve: kc,
                t0: ea.t,
                t1: eb.t,
            },
            marker: EdgeMarker::Internal,
            length: 0.0,
        });

        let entries = self.cells[c].edges.clone();
        let n = entries.len();
        let starts: Vec<usize> = entries.iter().map(|oe| self.start_vertex(oe)).collect();
        let ia = starts
            .iter()
            .position(|&v| v == wa)
            .ok_or(CutError::DegenerateSplit { vertex: wa })?;
        let ib = starts
            .iter()
            .position(|&v| v == wb)
            .ok_or(CutError::DegenerateSplit { vertex: wb })?;

        let mut path1 = Vec::new();
        let mut i = ia;
        while i != ib {
            path1.push(entries[i]);
            i = (i + 1) % n;
        }
        let mut path2 = Vec::new();
        let mut i = ib;
        while i != ia {
            path2.push(entries[i]);
            i = (i + 1) % n;
        }
        path1.push(OrientedEdge {
            edge: chord,
            forward: false,
        });
        path2.push(OrientedEdge {
            edge: chord,
            forward: true,
        });

        let region = self.cells[c].region;
        let cell1 = Cell {
            edges: path1,
            region,
            geometry: None,
        };
        let cell2 = Cell {
            edges: path2,
            region,
            geometry: None,
        };
        Ok(self.replace_cell(c, cell1, vec![cell2])[0])
    }

    /// Turns an event site into a mesh vertex, splitting the hosting edge
    /// if needed. Sites referring to an edge that a previous
    /// materialization split are chased down to the surviving child.
    fn materialize(&mut self, ev: &Event) -> Result<usize, CutError> {
        match ev.site {
            Site::AtVertex(v) => Ok(v),
            Site::OnStraight { mut edge } => {
                while let Some([a, b]) = self.children[edge] {
                    edge = if self.straight_covers(a, ev.point) { a } else { b };
                }
                let e = &self.edges[edge];
                for &v in &e.v {
                    if (self.vertices[v] - ev.point).norm() <= self.snap {
                        return Ok(v);
                    }
                }
                Ok(self.split_straight(edge, ev.point))
            }
            Site::OnCurved { mut edge, th } => {
                while let Some([a, b]) = self.children[edge] {
                    edge = if self.curved_covers(a, th) { a } else { b };
                }
                let EdgeGeometry::Curved { t0, t1, .. } = self.edges[edge].geometry else {
                    return Err(CutError::DegenerateSplit {
                        vertex: self.edges[edge].v[0],
                    });
                };
                let margin = 1e-9 * (t1 - t0);
                if th <= t0 + margin {
                    return Ok(self.edges[edge].v[0]);
                }
                if th >= t1 - margin {
                    return Ok(self.edges[edge].v[1]);
                }
                Ok(self.split_curved(edge, th))
            }
        }
    }

    fn straight_covers(&self, edge: usize, p: Point) -> bool {
        let e = &self.edges[edge];
        let a = self.vertices[e.v[0]];
        let b = self.vertices[e.v[1]];
        p.x >= a.x.min(b.x) - self.snap
            && p.x <= a.x.max(b.x) + self.snap
            && p.y >= a.y.min(b.y) - self.snap
            && p.y <= a.y.max(b.y) + self.snap
    }

    fn curved_covers(&self, edge: usize, th: f64) -> bool {
        matches!(
            self.edges[edge].geometry,
            EdgeGeometry::Curved { t0, t1, .. } if th >= t0 - 1e-12 && th <= t1 + 1e-12
        )
    }

    fn split_straight(&mut self, edge: usize, p: Point) -> usize {
        let w = self.vertices.len();
        self.vertices.push(p);
        let e = self.edges[edge].clone();
        let e1 = self.push_edge(Edge {
            v: [e.v[0], w],
            geometry: EdgeGeometry::Straight,
            marker: e.marker,
            length: 0.0,
        });
        let e2 = self.push_edge(Edge {
            v: [w, e.v[1]],
            geometry: EdgeGeometry::Straight,
            marker: e.marker,
            length: 0.0,
        });
        self.retire(edge, [e1, e2]);
        w
    }

    fn split_curved(&mut self, edge: usize, th: f64) -> usize {
        let EdgeGeometry::Curved { curve, t0, t1 } = self.edges[edge].geometry else {
            unreachable!("split_curved on a straight edge");
        };
        let w = self.vertices.len();
        self.vertices.push(self.curves[curve].pt(th));
        let e = self.edges[edge].clone();
        let e1 = self.push_edge(Edge {
            v: [e.v[0], w],
            geometry: EdgeGeometry::Curved { curve, t0, t1: th },
            marker: e.marker,
            length: 0.0,
        });
        let e2 = self.push_edge(Edge {
            v: [w, e.v[1]],
            geometry: EdgeGeometry::Curved { curve, t0: th, t1 },
            marker: e.marker,
            length: 0.0,
        });
        self.retire(edge, [e1, e2]);
        w
    }

    fn push_edge(&mut self, e: Edge) -> usize {
        let id = self.edges.len();
        self.edges.push(e);
        self.alive.push(true);
        self.children.push(None);
        self.edge_cells.push(Vec::new());
        id
    }

    /// Replaces a split edge by its two children in every incident cell's
    /// loop, keeping traversal order.
    fn retire(&mut self, edge: usize, kids: [usize; 2]) {
        self.alive[edge] = false;
        self.children[edge] = Some(kids);
        let incident = self.edge_cells[edge].clone();
        for &k in &kids {
            self.edge_cells[k] = incident.clone();
        }
        for &c in &incident {
            let pos = self.cells[c]
                .edges
                .iter()
                .position(|oe| oe.edge == edge)
                .expect("incidence list out of sync");
            let fwd = self.cells[c].edges[pos].forward;
            let pair = if fwd {
                [
                    OrientedEdge { edge: kids[0], forward: true },
                    OrientedEdge { edge: kids[1], forward: true },
                ]
            } else {
                [
                    OrientedEdge { edge: kids[1], forward: false },
                    OrientedEdge { edge: kids[0], forward: false },
                ]
            };
            self.cells[c].edges.splice(pos..=pos, pair);
        }
    }

    /// Installs `cell1` in place of `c` and appends the rest, rebuilding
    /// the edge incidence lists of every edge involved.
    fn replace_cell(&mut self, c: usize, cell1: Cell, rest: Vec<Cell>) -> Vec<usize> {
        let mut ids = Vec::with_capacity(rest.len());
        for oe in cell1.edges.iter().chain(rest.iter().flat_map(|x| x.edges.iter())) {
            self.edge_cells[oe.edge].retain(|&x| x != c);
        }
        for oe in &cell1.edges {
            self.edge_cells[oe.edge].push(c);
        }
        self.cells[c] = cell1;
        for cell in rest {
            let id = self.cells.len();
            for oe in &cell.edges {
                self.edge_cells[oe.edge].push(id);
            }
            self.origin.push(self.origin[c]);
            self.cells.push(cell);
            ids.push(id);
        }
        ids
    }

    /// Refines a rectangular cell into four by a midpoint cross. The four
    /// boundary edge splits propagate into the neighbours, so the mesh
    /// stays conforming.
    fn structured_split(&mut self, c: usize, count: usize) -> Result<[usize; 4], CutError> {
        let entries = self.cells[c].edges.clone();
        let origin = self.origin[c];
        let fail = move || CutError::Unsplittable {
            cell: origin,
            count,
        };
        if entries.len() != 4
            || entries
                .iter()
                .any(|oe| !matches!(self.edges[oe.edge].geometry, EdgeGeometry::Straight))
        {
            return Err(fail());
        }
        let starts: Vec<usize> = entries.iter().map(|oe| self.start_vertex(oe)).collect();
        let pts: Vec<Point> = starts.iter().map(|&v| self.vertices[v]).collect();
        let xmin = pts.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
        let xmax = pts.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
        let ymin = pts.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
        let ymax = pts.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
        let near = |a: f64, b: f64| (a - b).abs() <= self.snap;
        let sw = pts
            .iter()
            .position(|p| near(p.x, xmin) && near(p.y, ymin))
            .ok_or_else(fail)?;
        // All four corners must be present for a rectangle.
        for (cx, cy) in [(xmin, ymax), (xmax, ymin), (xmax, ymax)] {
            if !pts.iter().any(|p| near(p.x, cx) && near(p.y, cy)) {
                return Err(fail());
            }
        }

        // Midpoint-split the four sides; loop rewriting happens inside.
        let mids: Vec<usize> = (0..4)
            .map(|k| {
                let oe = &entries[(sw + k) % 4];
                let e = &self.edges[oe.edge];
                let m = Point::from((self.vertices[e.v[0]].coords + self.vertices[e.v[1]].coords) * 0.5);
                self.split_straight(oe.edge, m)
            })
            .collect();
        let (vm_b, vm_r, vm_t, vm_l) = (mids[0], mids[1], mids[2], mids[3]);
        let vc = self.vertices.len();
        self.vertices.push(Point::new(0.5 * (xmin + xmax), 0.5 * (ymin + ymax)));

        let spoke = |w: &mut Work, from: usize| {
            w.push_edge(Edge {
                v: [from, vc],
                geometry: EdgeGeometry::Straight,
                marker: EdgeMarker::Internal,
                length: 0.0,
            })
        };
        let s_b = spoke(self, vm_b);
        let s_r = spoke(self, vm_r);
        let s_t = spoke(self, vm_t);
        let s_l = spoke(self, vm_l);

        // The loop now has eight entries; rotate it to start at the
        // south-west corner so they read bottom, right, top, left halves.
        let entries = self.cells[c].edges.clone();
        let sw_vertex = starts[sw];
        let rot = entries
            .iter()
            .position(|oe| self.start_vertex(oe) == sw_vertex)
            .ok_or_else(fail)?;
        let at = |k: usize| entries[(rot + k) % 8];
        let fwd = |edge: usize| OrientedEdge { edge, forward: true };
        let rev = |edge: usize| OrientedEdge { edge, forward: false };

        let swc = Cell {
            edges: vec![at(0), fwd(s_b), rev(s_l), at(7)],
            region: self.cells[c].region,
            geometry: None,
        };
        let sec = Cell {
            edges: vec![at(1), at(2), fwd(s_r), rev(s_b)],
            region: self.cells[c].region,
            geometry: None,
        };
        let nec = Cell {
            edges: vec![at(3), at(4), fwd(s_t), rev(s_r)],
            region: self.cells[c].region,
            geometry: None,
        };
        let nwc = Cell {
            edges: vec![at(5), at(6), fwd(s_l), rev(s_t)],
            region: self.cells[c].region,
            geometry: None,
        };
        let ids = self.replace_cell(c, swc, vec![sec, nec, nwc]);
        Ok([c, ids[0], ids[1], ids[2]])
    }

    fn start_vertex(&self, oe: &OrientedEdge) -> usize {
        let e = &self.edges[oe.edge];
        if oe.forward {
            e.v[0]
        } else {
            e.v[1]
        }
    }

    fn item_polyline(&self, oe: &OrientedEdge) -> Vec<Point> {
        let e = &self.edges[oe.edge];
        match e.geometry {
            EdgeGeometry::Straight => {
                let (a, b) = (self.vertices[e.v[0]], self.vertices[e.v[1]]);
                if oe.forward {
                    vec![a, b]
                } else {
                    vec![b, a]
                }
            }
            EdgeGeometry::Curved { curve, t0, t1 } => {
                let (ta, tb) = if oe.forward { (t0, t1) } else { (t1, t0) };
                (0..=64)
                    .map(|k| self.curves[curve].pt(ta + (tb - ta) * k as f64 / 64.0))
                    .collect()
            }
        }
    }

    fn point_in_cell(&self, c: usize, p: Point) -> bool {
        let mut inside = false;
        for oe in &self.cells[c].edges {
            let poly = self.item_polyline(oe);
            for w in poly.windows(2) {
                let (a, b) = (w[0], w[1]);
                if (a.y > p.y) != (b.y > p.y) {
                    let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                    if x > p.x {
                        inside = !inside;
                    }
                }
            }
        }
        inside
    }

    fn dist_to_boundary(&self, c: usize, p: Point) -> f64 {
        let mut best = f64::INFINITY;
        for oe in &self.cells[c].edges {
            let poly = self.item_polyline(oe);
            for w in poly.windows(2) {
                best = best.min(dist_point_segment(p, w[0], w[1]));
            }
        }
        best
    }

    fn finish(self) -> Mesh {
        let mut remap = vec![usize::MAX; self.edges.len()];
        let mut edges = Vec::new();
        for (i, e) in self.edges.into_iter().enumerate() {
            if self.alive[i] {
                remap[i] = edges.len();
                edges.push(e);
            }
        }
        let mut cells = self.cells;
        for cell in &mut cells {
            for oe in &mut cell.edges {
                oe.edge = remap[oe.edge];
                debug_assert_ne!(oe.edge, usize::MAX, "cell loop references a dead edge");
            }
        }
        Mesh {
            vertices: self.vertices,
            curves: self.curves,
            edges,
            cells,
            regions: BTreeMap::new(),
        }
    }
}

fn dist_point_segment(p: Point, a: Point, b: Point) -> f64 {
    let d = b - a;
    let len2 = d.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&d) / len2).clamp(0.0, 1.0);
    (p - (a + d * t)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate::quad_grid;
    use crate::mesh::Side;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn natural(_: Side) -> EdgeMarker {
        EdgeMarker::Natural
    }

    fn quarter_circle() -> CurveDef {
        CurveDef::circle_arc(Point::new(0.0, 0.0), 0.45, 0.0, FRAC_PI_2)
    }

    fn disk_regions() -> BTreeMap<u32, String> {
        [(1, "matrix".to_string()), (2, "inclusion".to_string())].into()
    }

    fn disk_rule(p: Point) -> u32 {
        if p.coords.norm() < 0.45 {
            2
        } else {
            1
        }
    }

    fn cut_disk(n: usize) -> CutOutcome {
        let grid = quad_grid([0.0, 0.0, 1.0, 1.0], n, n, natural);
        cut_by_curves(&grid, &[quarter_circle()], disk_rule, disk_regions()).unwrap()
    }

    #[test]
    fn quarter_circle_cuts_one_cell_of_the_two_by_two_grid() {
        let out = cut_disk(2);
        assert_eq!(out.cut_cells, 1);
        assert_eq!(out.mesh.n_cells(), 5);
        out.mesh.validate().unwrap();

        let inclusion_area: f64 = (0..5)
            .filter(|&c| out.mesh.cells[c].region == 2)
            .map(|c| out.mesh.cells[c].geometry().area)
            .sum();
        assert_relative_eq!(
            inclusion_area,
            std::f64::consts::PI * 0.45 * 0.45 / 4.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn quarter_circle_cuts_three_cells_of_the_four_by_four_grid() {
        let out = cut_disk(4);
        assert_eq!(out.cut_cells, 3);
        assert_eq!(out.mesh.n_cells(), 19);
        out.mesh.validate().unwrap();
        assert_relative_eq!(out.mesh.total_area(), 1.0, epsilon = 1e-12);

        let inclusion_area: f64 = (0..19)
            .filter(|&c| out.mesh.cells[c].region == 2)
            .map(|c| out.mesh.cells[c].geometry().area)
            .sum();
        assert_relative_eq!(
            inclusion_area,
            std::f64::consts::PI * 0.45 * 0.45 / 4.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn region_is_constant_along_both_sides_of_the_curve() {
        let out = cut_disk(4);
        for k in 0..100 {
            let th = FRAC_PI_2 * (k as f64 + 0.5) / 100.0;
            let dir = Point::new(th.cos(), th.sin()).coords;
            let inner = Point::from(dir * (0.45 - 1e-3));
            let outer = Point::from(dir * (0.45 + 1e-3));
            let ci = out.mesh.locate(inner).expect("inner sample not located");
            let co = out.mesh.locate(outer).expect("outer sample not located");
            assert_eq!(out.mesh.cells[ci].region, 2, "sample {k} inner");
            assert_eq!(out.mesh.cells[co].region, 1, "sample {k} outer");
        }
    }

    #[test]
    fn curve_outside_the_grid_changes_nothing() {
        let grid = quad_grid([0.0, 0.0, 1.0, 1.0], 1, 1, natural);
        let far = CurveDef::circle_arc(Point::new(5.0, 5.0), 0.45, 0.0, FRAC_PI_2);
        let out = cut_by_curves(&grid, &[far], |_| 0, [(0, "domain".into())].into()).unwrap();
        assert_eq!(out.cut_cells, 0);
        assert_eq!(out.mesh.n_cells(), 1);
        assert_eq!(out.mesh.n_edges(), 4);
    }

    #[test]
    fn second_curve_may_end_on_the_first_one() {
        let grid = quad_grid([0.0, 0.0, 1.0, 1.0], 1, 1, natural);
        let a = CurveDef::graph_sqrt(0.2, 0.1, 0.4, 0.0, 1.0);
        let y_mid = 0.2 * f64::sqrt(0.5 + 0.1) + 0.4;
        let b = CurveDef::segment(Point::new(0.5, 0.0), Point::new(0.5, y_mid));
        let rule = move |p: Point| {
            if p.y > 0.2 * f64::sqrt(p.x + 0.1) + 0.4 {
                0
            } else if p.x < 0.5 {
                1
            } else {
                2
            }
        };
        let regions: BTreeMap<u32, String> = [
            (0, "top".to_string()),
            (1, "bottom left".to_string()),
            (2, "bottom right".to_string()),
        ]
        .into();
        let out = cut_by_curves(&grid, &[a, b], rule, regions).unwrap();
        out.mesh.validate().unwrap();
        assert_eq!(out.mesh.n_cells(), 3);

        // The first curve's edge must be split in two at the junction.
        let pieces: Vec<[f64; 2]> = out
            .mesh
            .edges
            .iter()
            .filter_map(|e| match e.geometry {
                EdgeGeometry::Curved { curve: 0, t0, t1 } => Some([t0, t1]),
                _ => None,
            })
            .collect();
        assert_eq!(pieces.len(), 2);
        let split_at = pieces.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
        assert_relative_eq!(split_at, 0.5, epsilon = 1e-9);

        let regions: Vec<u32> = out.mesh.cells.iter().map(|c| c.region).collect();
        let mut sorted = regions.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2]);
    }

    #[test]
    fn wiggly_curve_triggers_a_structured_refinement() {
        let grid = quad_grid([0.0, 0.0, 1.0, 1.0], 1, 1, natural);
        // Dips below the bottom edge mid-span: four boundary crossings.
        let dip = CurveDef::graph_parabola(3.0, -0.5, -0.1, 0.0, 1.0);
        let rule = move |p: Point| {
            if p.y > 3.0 * (p.x - 0.5) * (p.x - 0.5) - 0.1 {
                1
            } else {
                0
            }
        };
        let regions: BTreeMap<u32, String> =
            [(0, "below".to_string()), (1, "above".to_string())].into();
        let out = cut_by_curves(&grid, &[dip], rule, regions).unwrap();
        out.mesh.validate().unwrap();
        // One structured split into four, then a chain split in each quadrant.
        assert_eq!(out.mesh.n_cells(), 8);
        assert_relative_eq!(out.mesh.total_area(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn tangent_contact_is_refused() {
        let grid = quad_grid([0.0, 0.0, 1.0, 1.0], 1, 1, natural);
        // Circle inside the square grazing its bottom edge from above.
        let graze = CurveDef::circle_arc(Point::new(0.5, 0.25), 0.25, -2.5, -0.6);
        let err = cut_by_curves(&grid, &[graze], |_| 0, [(0, "d".into())].into()).unwrap_err();
        assert!(matches!(err, CutError::Tangent { .. }), "{err}");
    }

    #[test]
    fn dangling_curve_end_is_refused() {
        let grid = quad_grid([0.0, 0.0, 1.0, 1.0], 1, 1, natural);
        let dangling = CurveDef::segment(Point::new(0.5, -0.5), Point::new(0.5, 0.5));
        let err = cut_by_curves(&grid, &[dangling], |_| 0, [(0, "d".into())].into()).unwrap_err();
        assert!(matches!(err, CutError::EndpointInside { .. }), "{err}");
    }

    #[test]
    fn straightening_replaces_arcs_by_chords() {
        let out = cut_disk(2);
        let flat = out.mesh.straightened();
        flat.validate().unwrap();
        assert_eq!(flat.n_cells(), out.mesh.n_cells());
        assert_relative_eq!(flat.total_area(), 1.0, epsilon = 1e-12);

        // The quarter disk collapses to the triangle (0,0),(0.45,0),(0,0.45).
        let disk_area: f64 = (0..flat.n_cells())
            .filter(|&c| flat.cells[c].region == 2)
            .map(|c| flat.cells[c].geometry().area)
            .sum();
        assert_relative_eq!(disk_area, 0.45 * 0.45 / 2.0, epsilon = 1e-12);
    }
}
