//! Global saddle-point problem: dof numbering, parallel assembly,
//! boundary conditions, and the sparse direct solve.
//!
//! Velocity dofs are numbered edge blocks first (by edge id, `k + 1`
//! moments each), then per-cell divergence and interior blocks by cell
//! id; pressure coefficients follow as per-cell blocks. Edge dofs use the
//! intrinsic edge direction, so the two incident elements address the
//! same unknowns and normal fluxes are single valued by construction.

use std::collections::BTreeMap;
use std::io::Write;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::DVector;
use rayon::prelude::*;
use thiserror::Error;

use crate::mesh::{EdgeMarker, Mesh};
use crate::quad::item_rule;
use crate::vem::{edge_monomials, DofLayout, LocalElement, Material, VemError};
use crate::Point;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("element {cell}: {source}")]
    Element { cell: usize, source: VemError },
    #[error("no region {region} in the material table")]
    UnknownMaterial { region: u32 },
    #[error(
        "no natural boundary remains after constraints; the pressure is \
         determined only up to a constant and needs a natural segment"
    )]
    NoNaturalBoundary,
    #[error("sparse factorization failed: {detail}")]
    Singular { detail: String },
    #[error("solver residual {rel:e} stayed above 1e-10 after iterative refinement")]
    Residual { rel: f64 },
}

/// Per-problem data: material per region and the boundary/source fields.
/// Fields take the region id of the owning cell, so exact solutions that
/// jump across interfaces can be prescribed region by region.
pub struct DarcyProblem<'a> {
    pub materials: BTreeMap<u32, Material>,
    /// Source density `f`.
    pub source: &'a (dyn Fn(u32, Point) -> f64 + Sync),
    /// Prescribed boundary pressure on natural edges.
    pub natural: &'a (dyn Fn(u32, Point) -> f64 + Sync),
    /// Prescribed outward normal flux on essential edges.
    pub essential: &'a (dyn Fn(u32, Point) -> f64 + Sync),
}

/// Global numbering of the unknowns.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub degree: usize,
    pub n_velocity: usize,
    pub n_pressure: usize,
    per_edge: usize,
    cell_extra: usize,
    n_edge_dofs: usize,
    dim_pressure: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh, degree: usize) -> Self {
        let layout = DofLayout::new(degree, 3);
        let per_edge = layout.per_edge;
        let cell_extra = layout.n_div + layout.n_interior;
        let dim_pressure = layout.n_pressure();
        let n_edge_dofs = per_edge * mesh.n_edges();
        DofMap {
            degree,
            n_velocity: n_edge_dofs + cell_extra * mesh.n_cells(),
            n_pressure: dim_pressure * mesh.n_cells(),
            per_edge,
            cell_extra,
            n_edge_dofs,
            dim_pressure,
        }
    }

    /// First of the `k + 1` velocity dofs of an edge.
    pub fn edge_offset(&self, edge: usize) -> usize {
        edge * self.per_edge
    }

    /// Global velocity indices of a cell's local dofs, in local order.
    pub fn velocity_indices(&self, mesh: &Mesh, cell: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(
            mesh.cells[cell].edges.len() * self.per_edge + self.cell_extra,
        );
        for oe in &mesh.cells[cell].edges {
            let base = self.edge_offset(oe.edge);
            out.extend(base..base + self.per_edge);
        }
        let base = self.n_edge_dofs + cell * self.cell_extra;
        out.extend(base..base + self.cell_extra);
        out
    }

    /// First pressure coefficient of a cell, relative to the pressure
    /// block.
    pub fn pressure_offset(&self, cell: usize) -> usize {
        cell * self.dim_pressure
    }

    pub fn n_total(&self) -> usize {
        self.n_velocity + self.n_pressure
    }
}

/// Assembled system `[[A, B^T], [B, 0]]` with its right-hand side,
/// essential constraints, and the per-element data needed afterwards.
pub struct Assembly {
    pub dof_map: DofMap,
    /// Deduplicated, sorted triplets of the full saddle matrix.
    pub triplets: Vec<(usize, usize, f64)>,
    pub rhs: DVector<f64>,
    /// Velocity dofs fixed by essential conditions, with values.
    pub constraints: Vec<(usize, f64)>,
    pub locals: Vec<LocalElement>,
    /// Source moments per cell, the pressure-block right-hand side.
    pub cell_rhs_f: Vec<DVector<f64>>,
}

/// Solved fields and solve diagnostics.
pub struct Solution {
    pub velocity: DVector<f64>,
    pub pressure: DVector<f64>,
    /// Per-cell coefficients of the projected velocity over the doubled
    /// monomial basis.
    pub projected: Vec<DVector<f64>>,
    /// Final relative residual of the linear solve.
    pub residual: f64,
    pub refinements: usize,
}

/// Incident `(cell, loop position)` pairs per edge.
pub fn edge_incidence(mesh: &Mesh) -> Vec<Vec<(usize, usize)>> {
    let mut out = vec![Vec::new(); mesh.n_edges()];
    for (c, cell) in mesh.cells.iter().enumerate() {
        for (pos, oe) in cell.edges.iter().enumerate() {
            out[oe.edge].push((c, pos));
        }
    }
    out
}

pub fn assemble(
    mesh: &Mesh,
    degree: usize,
    problem: &DarcyProblem<'_>,
    oversample: usize,
) -> Result<Assembly, SolverError> {
    let dof_map = DofMap::new(mesh, degree);
    let n_v = dof_map.n_velocity;

    struct CellBuild {
        el: LocalElement,
        rhs_f: DVector<f64>,
        natural: Vec<DVector<f64>>,
    }

    let builds: Vec<CellBuild> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|cell| {
            let region = mesh.cells[cell].region;
            let material = problem
                .materials
                .get(&region)
                .ok_or(SolverError::UnknownMaterial { region })?;
            let wrap = |source| SolverError::Element { cell, source };
            let el = LocalElement::build(mesh, cell, degree, material, oversample).map_err(wrap)?;
            let rhs_f = el
                .source_moments(mesh, |p| (problem.source)(region, p))
                .map_err(wrap)?;
            let mut natural = Vec::new();
            for (pos, oe) in mesh.cells[cell].edges.iter().enumerate() {
                if mesh.edges[oe.edge].marker == EdgeMarker::Natural {
                    natural.push(el.natural_load(mesh, pos, |p| (problem.natural)(region, p)));
                }
            }
            Ok(CellBuild { el, rhs_f, natural })
        })
        .collect::<Result<_, _>>()?;

    let mut entries: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut rhs = DVector::zeros(dof_map.n_total());
    let mut locals = Vec::with_capacity(builds.len());
    let mut cell_rhs_f = Vec::with_capacity(builds.len());
    for (cell, build) in builds.into_iter().enumerate() {
        let vids = dof_map.velocity_indices(mesh, cell);
        let poff = n_v + dof_map.pressure_offset(cell);
        let el = build.el;
        for (i, &gi) in vids.iter().enumerate() {
            for (j, &gj) in vids.iter().enumerate() {
                let v = el.a[(i, j)];
                if v != 0.0 {
                    *entries.entry((gi, gj)).or_insert(0.0) += v;
                }
            }
        }
        for m in 0..el.layout.n_pressure() {
            for (j, &gj) in vids.iter().enumerate() {
                let v = el.b[(m, j)];
                if v != 0.0 {
                    *entries.entry((poff + m, gj)).or_insert(0.0) += v;
                    *entries.entry((gj, poff + m)).or_insert(0.0) += v;
                }
            }
            rhs[poff + m] += build.rhs_f[m];
        }
        for load in &build.natural {
            for (j, &gj) in vids.iter().enumerate() {
                rhs[gj] += load[j];
            }
        }
        cell_rhs_f.push(build.rhs_f);
        locals.push(el);
    }

    // Essential constraints: fix each marked edge's dofs to the moments
    // of the prescribed outward flux, converted to the intrinsic
    // direction through the incident traversal sign.
    let incidence = edge_incidence(mesh);
    let mut constraints = Vec::new();
    let mut any_natural = false;
    for (e, edge) in mesh.edges.iter().enumerate() {
        match edge.marker {
            EdgeMarker::Natural => any_natural = true,
            EdgeMarker::Internal => {}
            EdgeMarker::Essential => {
                let &(cell, pos) = incidence[e]
                    .first()
                    .expect("validated meshes have no orphan edges");
                let region = mesh.cells[cell].region;
                let sign = locals[cell].signs[pos];
                let item = mesh.intrinsic_item(e);
                let rule = item_rule(&item, 2 * degree + 2, oversample);
                let mut moments: DVector<f64> = DVector::zeros(degree + 1);
                for ep in &rule {
                    let em = edge_monomials(degree, ep.s);
                    let ds = ep.w * ep.d.norm();
                    let val = (problem.essential)(region, ep.p);
                    for al in 0..=degree {
                        moments[al] += ds * em[al] * val;
                    }
                }
                let base = dof_map.edge_offset(e);
                for al in 0..=degree {
                    constraints.push((base + al, sign * moments[al] / edge.length));
                }
            }
        }
    }
    if !any_natural {
        return Err(SolverError::NoNaturalBoundary);
    }

    let triplets = entries.into_iter().map(|((i, j), v)| (i, j, v)).collect();
    Ok(Assembly {
        dof_map,
        triplets,
        rhs,
        constraints,
        locals,
        cell_rhs_f,
    })
}

/// Triplets and right-hand side after symmetric elimination of the
/// essential constraints: fixed dofs get a unit diagonal and their value
/// on the right-hand side, their couplings move to the other side.
fn eliminated(assembly: &Assembly) -> (Vec<(usize, usize, f64)>, DVector<f64>) {
    let n = assembly.dof_map.n_total();
    let mut fixed = vec![None; n];
    for &(i, v) in &assembly.constraints {
        fixed[i] = Some(v);
    }
    let mut rhs = assembly.rhs.clone();
    let mut out = Vec::with_capacity(assembly.triplets.len());
    for &(i, j, v) in &assembly.triplets {
        match (fixed[i], fixed[j]) {
            (None, None) => out.push((i, j, v)),
            (None, Some(val)) => rhs[i] -= v * val,
            _ => {}
        }
    }
    for (i, f) in fixed.iter().enumerate() {
        if let Some(val) = *f {
            out.push((i, i, 1.0));
            rhs[i] = val;
        }
    }
    out.sort_unstable_by_key(|&(i, j, _)| (i, j));
    (out, rhs)
}

fn residual_norm(
    triplets: &[(usize, usize, f64)],
    x: &DVector<f64>,
    b: &DVector<f64>,
) -> (DVector<f64>, f64) {
    let mut r = b.clone();
    for &(i, j, v) in triplets {
        r[i] -= v * x[j];
    }
    (r.clone(), r.norm())
}

pub fn solve(assembly: &Assembly) -> Result<Solution, SolverError> {
    faer::set_global_parallelism(faer::Par::Seq);
    let n = assembly.dof_map.n_total();
    let (triplets, rhs) = eliminated(assembly);
    let faer_triplets: Vec<Triplet<usize, usize, f64>> = triplets
        .iter()
        .map(|&(i, j, v)| Triplet::new(i, j, v))
        .collect();
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &faer_triplets)
        .map_err(|e| SolverError::Singular {
            detail: format!("{e:?}"),
        })?;
    let symbolic = faer::sparse::linalg::solvers::SymbolicLu::try_new(mat.symbolic()).map_err(
        |e| SolverError::Singular {
            detail: format!("{e:?}"),
        },
    )?;
    let lu = faer::sparse::linalg::solvers::Lu::try_new_with_symbolic(symbolic, mat.rb())
        .map_err(|e| SolverError::Singular {
        detail: format!("{e:?}"),
    })?;

    let solve_vec = |b: &DVector<f64>| -> DVector<f64> {
        let fb = Col::<f64>::from_fn(n, |i| b[i]);
        let fx = lu.solve(&fb);
        DVector::from_fn(n, |i, _| fx[i])
    };

    let bnorm = rhs.norm();
    let mut x = solve_vec(&rhs);
    let (mut r, mut rnorm) = residual_norm(&triplets, &x, &rhs);
    let rel = |rn: f64| if bnorm > 0.0 { rn / bnorm } else { rn };
    let mut refinements = 0;
    while rel(rnorm) > 1e-10 && refinements < 3 {
        let dx = solve_vec(&r);
        x += dx;
        (r, rnorm) = residual_norm(&triplets, &x, &rhs);
        refinements += 1;
    }
    if !rel(rnorm).is_finite() || rel(rnorm) > 1e-10 {
        return Err(SolverError::Residual { rel: rel(rnorm) });
    }

    let n_v = assembly.dof_map.n_velocity;
    let velocity = x.rows(0, n_v).into_owned();
    let pressure = x.rows(n_v, assembly.dof_map.n_pressure).into_owned();
    let projected = assembly
        .locals
        .iter()
        .map(|el| el.project(&local_velocity(assembly, el, &velocity)))
        .collect();
    Ok(Solution {
        velocity,
        pressure,
        projected,
        residual: rel(rnorm),
        refinements,
    })
}

/// Local velocity dof vector of one element, gathered from the global
/// vector. The element carries its own edge ids, so only the mesh-free
/// part of the numbering is needed.
pub fn local_velocity(
    assembly: &Assembly,
    el: &LocalElement,
    velocity: &DVector<f64>,
) -> DVector<f64> {
    let map = &assembly.dof_map;
    let mut out = DVector::zeros(el.layout.n_velocity());
    for (pos, &edge) in el.edge_ids.iter().enumerate() {
        let block = el.layout.edge_block(pos);
        let base = map.edge_offset(edge);
        for al in 0..map.per_edge {
            out[block.start + al] = velocity[base + al];
        }
    }
    let base = map.n_edge_dofs + el.cell * map.cell_extra;
    let start = el.layout.div_block().start;
    for i in 0..map.cell_extra {
        out[start + i] = velocity[base + i];
    }
    out
}

/// Pressure coefficients of one cell.
pub fn local_pressure(assembly: &Assembly, cell: usize, pressure: &DVector<f64>) -> DVector<f64> {
    let map = &assembly.dof_map;
    pressure
        .rows(map.pressure_offset(cell), map.dim_pressure)
        .into_owned()
}

/// Largest violation of the per-element balance between the divergence
/// of the solved flux and the source moments, `max |B q + rhs_f|` over
/// cells and moments with the sign convention of the second block row.
pub fn local_mass_residual(assembly: &Assembly, solution: &Solution) -> f64 {
    let mut worst = 0.0f64;
    for (cell, el) in assembly.locals.iter().enumerate() {
        let q = local_velocity(assembly, el, &solution.velocity);
        let balance = &el.b * q - &assembly.cell_rhs_f[cell];
        worst = worst.max(balance.amax());
    }
    worst
}

/// Write the eliminated system as `i j value` lines, 17 significant
/// digits, sorted by row then column.
pub fn dump_triplets(assembly: &Assembly, out: &mut dyn Write) -> std::io::Result<()> {
    let (triplets, _) = eliminated(assembly);
    for (i, j, v) in triplets {
        writeln!(out, "{i} {j} {v:.16e}")?;
    }
    Ok(())
}
