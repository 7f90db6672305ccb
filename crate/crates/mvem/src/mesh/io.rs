//! Mesh file reading and writing.
//!
//! The on-disk format is JSON with top-level keys `vertices`, `curves`,
//! `edges`, `cells` and `regions`. Edge records carry an optional curve
//! reference `{ref, interval}`; cell records list `[edge_id, sign]` pairs
//! with sign `+1` for traversal in the edge's intrinsic direction. Floats
//! are written with 17 significant digits so a save/load cycle reproduces
//! every coordinate bit for bit.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Cell, Edge, EdgeGeometry, EdgeMarker, Mesh, MeshError, OrientedEdge};
use crate::curve::CurveDef;
use crate::Point;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshFile {
    vertices: Vec<[f64; 2]>,
    curves: Vec<CurveDef>,
    edges: Vec<EdgeRecord>,
    cells: Vec<CellRecord>,
    regions: BTreeMap<u32, String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    v: [usize; 2],
    curve: Option<CurveRef>,
    marker: EdgeMarker,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveRef {
    #[serde(rename = "ref")]
    curve: usize,
    interval: [f64; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellRecord {
    edges: Vec<(usize, i8)>,
    region: u32,
}

/// JSON formatter that writes every float with 17 significant digits,
/// enough to reconstruct the exact binary value on load.
struct FullPrecision;

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

impl MeshFile {
    fn from_mesh(mesh: &Mesh) -> Self {
        MeshFile {
            vertices: mesh.vertices.iter().map(|p| [p.x, p.y]).collect(),
            curves: mesh.curves.clone(),
            edges: mesh
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    v: e.v,
                    curve: match e.geometry {
                        EdgeGeometry::Straight => None,
                        EdgeGeometry::Curved { curve, t0, t1 } => Some(CurveRef {
                            curve,
                            interval: [t0, t1],
                        }),
                    },
                    marker: e.marker,
                })
                .collect(),
            cells: mesh
                .cells
                .iter()
                .map(|c| CellRecord {
                    edges: c
                        .edges
                        .iter()
                        .map(|oe| (oe.edge, if oe.forward { 1 } else { -1 }))
                        .collect(),
                    region: c.region,
                })
                .collect(),
            regions: mesh.regions.clone(),
        }
    }

    fn into_mesh(self) -> Result<Mesh, MeshError> {
        let edges = self
            .edges
            .into_iter()
            .map(|e| Edge {
                v: e.v,
                geometry: match e.curve {
                    None => EdgeGeometry::Straight,
                    Some(CurveRef { curve, interval }) => EdgeGeometry::Curved {
                        curve,
                        t0: interval[0],
                        t1: interval[1],
                    },
                },
                marker: e.marker,
                length: 0.0,
            })
            .collect();
        let mut cells = Vec::with_capacity(self.cells.len());
        for (ci, c) in self.cells.into_iter().enumerate() {
            let mut loop_edges = Vec::with_capacity(c.edges.len());
            for (edge, sign) in c.edges {
                let forward = match sign {
                    1 => true,
                    -1 => false,
                    other => {
                        return Err(MeshError::Format(format!(
                            "cell {ci}: edge sign must be 1 or -1, got {other}"
                        )))
                    }
                };
                loop_edges.push(OrientedEdge { edge, forward });
            }
            cells.push(Cell {
                edges: loop_edges,
                region: c.region,
                geometry: None,
            });
        }
        Ok(Mesh {
            vertices: self.vertices.iter().map(|&[x, y]| Point::new(x, y)).collect(),
            curves: self.curves,
            edges,
            cells,
            regions: self.regions,
        })
    }
}

/// Writes `mesh` as JSON. The mesh is validated first so the file is
/// guaranteed to load back.
pub fn save_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    mesh.validate()?;
    let file = MeshFile::from_mesh(mesh);
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FullPrecision);
    file.serialize(&mut ser)
        .map_err(|e| MeshError::Format(e.to_string()))?;
    buf.push(b'\n');
    fs::write(path, buf)?;
    Ok(())
}

/// Loads a mesh written by [`save_mesh`], validates it and finalizes the
/// derived geometry. Malformed JSON reports the offending location; index
/// or orientation problems report the offending entity.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh, MeshError> {
    let text = fs::read_to_string(path)?;
    let file: MeshFile =
        serde_json::from_str(&text).map_err(|e| MeshError::Format(e.to_string()))?;
    let mut mesh = file.into_mesh()?;
    mesh.validate()?;
    mesh.finalize();
    Ok(mesh)
}
