//! Element-local operators of the mixed method: moment degrees of freedom,
//! polynomial projections, and the local matrix blocks.
//!
//! Velocity unknowns on one element are, in this order, per-edge normal
//! moments in loop order, divergence moments against the non-constant
//! pressure monomials, and interior moments against the rotated gradient
//! complement. Pressure unknowns are coefficients over the scaled
//! monomials of the element.
//!
//! Edge functionals use the intrinsic edge direction (`v[0]` to `v[1]`,
//! increasing curve parameter) and the right-hand normal of that
//! direction, so the two elements sharing an edge see the same unknowns;
//! the traversal sign of each loop entry enters the element matrices
//! instead of the degrees of freedom.

use std::ops::Range;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Matrix2};
use thiserror::Error;

use crate::mesh::Mesh;
use crate::poly::{
    decompose_vector_monomials, dim_p2, divergence_matrix, g_perp_columns, monomial_index,
    MonomialBasis,
};
use crate::quad::{element_rule, item_rule, monomial_gram, monomial_integrals, EdgePoint, QuadError};
use crate::{Point, Vec2};

#[derive(Debug, Error)]
pub enum VemError {
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error("edge {edge} has a singular moment matrix")]
    SingularEdge { edge: usize },
    #[error("cell {cell} has a singular monomial Gram matrix")]
    SingularCell { cell: usize },
    #[error("viscosity must be a positive finite number, got {mu}")]
    BadViscosity { mu: f64 },
    #[error("permeability must be a symmetric positive definite tensor")]
    BadPermeability,
}

/// Constant material data on one element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Material {
    pub mu: f64,
    pub perm: Matrix2<f64>,
}

impl Material {
    /// Checked constructor: positive viscosity, symmetric positive
    /// definite permeability.
    pub fn new(mu: f64, perm: Matrix2<f64>) -> Result<Self, VemError> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(VemError::BadViscosity { mu });
        }
        let scale = perm.amax();
        let symmetric = (perm[(0, 1)] - perm[(1, 0)]).abs() <= 1e-12 * scale;
        if !(scale.is_finite() && symmetric && perm.trace() > 0.0 && perm.determinant() > 0.0) {
            return Err(VemError::BadPermeability);
        }
        Ok(Material { mu, perm })
    }

    pub fn isotropic(mu: f64, kappa: f64) -> Result<Self, VemError> {
        Material::new(mu, Matrix2::identity() * kappa)
    }

    /// Mean permeability eigenvalue, half the trace in two dimensions.
    pub fn mean_perm(&self) -> f64 {
        0.5 * self.perm.trace()
    }

    fn inverse_perm(&self) -> Matrix2<f64> {
        self.perm
            .try_inverse()
            .expect("checked constructor guarantees an invertible tensor")
    }
}

/// Arrangement of one element's unknowns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DofLayout {
    pub degree: usize,
    pub n_edges: usize,
    /// Moments per edge, `degree + 1`.
    pub per_edge: usize,
    /// Divergence moments, one per non-constant pressure monomial.
    pub n_div: usize,
    /// Interior moments against the rotated gradient complement.
    pub n_interior: usize,
}

impl DofLayout {
    pub fn new(degree: usize, n_edges: usize) -> Self {
        DofLayout {
            degree,
            n_edges,
            per_edge: degree + 1,
            n_div: dim_p2(degree as i64) - 1,
            n_interior: dim_p2(degree as i64 - 1),
        }
    }

    pub fn n_velocity(&self) -> usize {
        self.n_edges * self.per_edge + self.n_div + self.n_interior
    }

    pub fn n_pressure(&self) -> usize {
        dim_p2(self.degree as i64)
    }

    /// Dof range of the edge at loop position `pos`.
    pub fn edge_block(&self, pos: usize) -> Range<usize> {
        let start = pos * self.per_edge;
        start..start + self.per_edge
    }

    pub fn div_block(&self) -> Range<usize> {
        let start = self.n_edges * self.per_edge;
        start..start + self.n_div
    }

    pub fn interior_block(&self) -> Range<usize> {
        let start = self.n_edges * self.per_edge + self.n_div;
        start..start + self.n_interior
    }
}

/// Shifted powers `(s - 1/2)^j` for `j <= degree`, the moment weights on
/// the reference interval of every edge.
pub fn edge_monomials(degree: usize, s: f64) -> DVector<f64> {
    let mut out = DVector::zeros(degree + 1);
    let t = s - 0.5;
    let mut pw = 1.0;
    for j in 0..=degree {
        out[j] = pw;
        pw *= t;
    }
    out
}

/// Gram matrix of the shifted powers on one edge, in arc length and the
/// intrinsic parametrization.
pub fn edge_gram(mesh: &Mesh, edge: usize, degree: usize, oversample: usize) -> DMatrix<f64> {
    let item = mesh.intrinsic_item(edge);
    let rule = item_rule(&item, 2 * degree + 2, oversample);
    let mut g = DMatrix::zeros(degree + 1, degree + 1);
    for ep in &rule {
        let m = edge_monomials(degree, ep.s);
        let ds = ep.w * ep.d.norm();
        for a in 0..=degree {
            for b in 0..=degree {
                g[(a, b)] += ds * m[a] * m[b];
            }
        }
    }
    g
}

/// Trace coefficients over the shifted powers of the normal component of
/// a field on one edge, recovered from that edge's moment unknowns.
pub fn edge_trace_from_dofs(
    mesh: &Mesh,
    edge: usize,
    degree: usize,
    dofs: &DVector<f64>,
    oversample: usize,
) -> Result<DVector<f64>, VemError> {
    let gram = edge_gram(mesh, edge, degree, oversample);
    let chol = Cholesky::new(gram).ok_or(VemError::SingularEdge { edge })?;
    Ok(chol.solve(&(dofs * mesh.edges[edge].length)))
}

/// Value of a vector polynomial with stacked coefficients over the
/// doubled monomial basis (x components first, then y).
pub fn vector_value(basis: &MonomialBasis, coeffs: &DVector<f64>, p: Point) -> Vec2 {
    let vals = basis.eval_all(p);
    let dim = vals.len();
    let mut out = Vec2::zeros();
    for i in 0..dim {
        out.x += coeffs[i] * vals[i];
        out.y += coeffs[dim + i] * vals[i];
    }
    out
}

/// Local blocks of one element: projection, stiffness, divergence
/// coupling, and the edge data needed to evaluate traces and loads.
pub struct LocalElement {
    pub cell: usize,
    pub layout: DofLayout,
    /// Pressure monomials, anchored at the centroid and scaled by the
    /// diameter.
    pub basis: MonomialBasis,
    pub area: f64,
    /// Traversal sign per loop entry: `+1` where the loop follows the
    /// intrinsic edge direction.
    pub signs: Vec<f64>,
    /// Arc length per loop entry.
    pub edge_lengths: Vec<f64>,
    /// Edge ids per loop entry.
    pub edge_ids: Vec<usize>,
    /// Gram matrix of the pressure monomials over the element.
    pub h_pressure: DMatrix<f64>,
    /// Dof values of the vector monomials, `n_velocity x 2 n_pressure`.
    pub d: DMatrix<f64>,
    /// Projection onto vector polynomials, `2 n_pressure x n_velocity`.
    pub pi: DMatrix<f64>,
    /// Velocity stiffness, consistency plus stabilization.
    pub a: DMatrix<f64>,
    /// Stabilization part of `a`.
    pub stab: DMatrix<f64>,
    /// Divergence coupling, `n_pressure x n_velocity`.
    pub b: DMatrix<f64>,
    oversample: usize,
    edge_chols: Vec<Cholesky<f64, Dyn>>,
    pressure_chol: Cholesky<f64, Dyn>,
}

impl LocalElement {
    pub fn build(
        mesh: &Mesh,
        cell: usize,
        degree: usize,
        material: &Material,
        oversample: usize,
    ) -> Result<Self, VemError> {
        let items = mesh.boundary_items(cell);
        let geo = mesh.cells[cell].geometry().clone();
        let layout = DofLayout::new(degree, items.len());
        let n = layout.n_velocity();
        let dim = layout.n_pressure();
        let dim1 = dim_p2(degree as i64 + 1);
        let h = geo.diameter;
        let area = geo.area;
        let basis = MonomialBasis::new(geo.centroid, h, degree);
        let basis1 = MonomialBasis::new(geo.centroid, h, degree + 1);

        let mut signs = Vec::with_capacity(items.len());
        let mut edge_lengths = Vec::with_capacity(items.len());
        let mut edge_ids = Vec::with_capacity(items.len());
        let mut rules: Vec<Vec<EdgePoint>> = Vec::with_capacity(items.len());
        let mut edge_chols = Vec::with_capacity(items.len());
        for item in &items {
            signs.push(if item.forward { 1.0 } else { -1.0 });
            edge_lengths.push(mesh.edges[item.edge].length);
            edge_ids.push(item.edge);
            let rule = item_rule(&mesh.intrinsic_item(item.edge), 2 * degree + 2, oversample);
            let mut g = DMatrix::zeros(degree + 1, degree + 1);
            for ep in &rule {
                let m = edge_monomials(degree, ep.s);
                let ds = ep.w * ep.d.norm();
                for a in 0..=degree {
                    for b in 0..=degree {
                        g[(a, b)] += ds * m[a] * m[b];
                    }
                }
            }
            edge_chols.push(Cholesky::new(g).ok_or(VemError::SingularEdge { edge: item.edge })?);
            rules.push(rule);
        }

        let h_pressure = monomial_gram(mesh, cell, &basis, oversample);
        let pressure_chol =
            Cholesky::new(h_pressure.clone()).ok_or(VemError::SingularCell { cell })?;

        // Dof values of the vector monomials. Edge rows integrate the
        // normal component against the shifted powers; divergence rows
        // are exact through the divergence operator and the Gram matrix;
        // interior rows pair with the rotated complement.
        let mut d = DMatrix::zeros(n, 2 * dim);
        for pos in 0..items.len() {
            let off = layout.edge_block(pos).start;
            let len = edge_lengths[pos];
            for ep in &rules[pos] {
                let vals = basis.eval_all(ep.p);
                let em = edge_monomials(degree, ep.s);
                let nx = ep.w * ep.d.y;
                let ny = -ep.w * ep.d.x;
                for j in 0..dim {
                    for al in 0..=degree {
                        d[(off + al, j)] += nx * vals[j] * em[al] / len;
                        d[(off + al, dim + j)] += ny * vals[j] * em[al] / len;
                    }
                }
            }
        }
        let divmat = divergence_matrix(degree, h);
        if layout.n_div > 0 {
            let hd = &h_pressure * &divmat;
            let start = layout.div_block().start;
            for r in 0..layout.n_div {
                for j in 0..2 * dim {
                    d[(start + r, j)] = hd[(r + 1, j)] * h / area;
                }
            }
        }
        if layout.n_interior > 0 {
            let gperp = g_perp_columns(degree);
            let ni = layout.n_interior;
            let top = &h_pressure * gperp.view((0, 0), (dim, ni));
            let bot = &h_pressure * gperp.view((dim, 0), (dim, ni));
            let start = layout.interior_block().start;
            for c in 0..ni {
                for j in 0..dim {
                    d[(start + c, j)] = top[(j, c)] / area;
                    d[(start + c, dim + j)] = bot[(j, c)] / area;
                }
            }
        }

        // Moments of each vector monomial against every dof vector: the
        // gradient part integrates by parts into a boundary term read off
        // the recovered traces and a bulk term read off the recovered
        // divergence, the complement part is an interior unknown times
        // the area.
        let deco = decompose_vector_monomials(degree, h);
        let mut r = DMatrix::zeros(2 * dim, n);
        for pos in 0..items.len() {
            let mut w = DMatrix::zeros(degree + 1, dim1);
            for ep in &rules[pos] {
                let v1 = basis1.eval_all(ep.p);
                let em = edge_monomials(degree, ep.s);
                let ds = ep.w * ep.d.norm();
                for al in 0..=degree {
                    for kp in 0..dim1 {
                        w[(al, kp)] += ds * em[al] * v1[kp];
                    }
                }
            }
            let sp = edge_chols[pos].solve(&w) * &deco.p_coeffs;
            let off = layout.edge_block(pos).start;
            let coef = signs[pos] * edge_lengths[pos];
            for be in 0..=degree {
                for j in 0..2 * dim {
                    r[(j, off + be)] += coef * sp[(be, j)];
                }
            }
        }
        {
            let basis_cross = MonomialBasis::new(geo.centroid, h, 2 * degree + 1);
            let ints = monomial_integrals(mesh, cell, &basis_cross, oversample);
            let mut c = DMatrix::zeros(dim, dim1);
            for (al, &(aa, ab)) in basis.exps().iter().enumerate() {
                for (kp, &(ka, kb)) in basis1.exps().iter().enumerate() {
                    c[(al, kp)] = ints[monomial_index(aa + ka, ab + kb)];
                }
            }
            let z = pressure_chol.solve(&(&c * &deco.p_coeffs));
            for pos in 0..items.len() {
                let col = layout.edge_block(pos).start;
                let coef = signs[pos] * edge_lengths[pos];
                for j in 0..2 * dim {
                    r[(j, col)] -= coef * z[(0, j)];
                }
            }
            let start = layout.div_block().start;
            for dd in 1..dim {
                let col = start + dd - 1;
                for j in 0..2 * dim {
                    r[(j, col)] -= z[(dd, j)] * area / h;
                }
            }
        }
        {
            let start = layout.interior_block().start;
            for cc in 0..layout.n_interior {
                for j in 0..2 * dim {
                    r[(j, start + cc)] += area * deco.c_coeffs[(cc, j)];
                }
            }
        }
        let mut pi = DMatrix::zeros(2 * dim, n);
        pi.view_mut((0, 0), (dim, n))
            .copy_from(&pressure_chol.solve(&r.view((0, 0), (dim, n))));
        pi.view_mut((dim, 0), (dim, n))
            .copy_from(&pressure_chol.solve(&r.view((dim, 0), (dim, n))));

        // Stiffness: weighted consistency on the projection plus a scaled
        // stabilization on its complement in dof space.
        let kinv = material.inverse_perm();
        let mut ma = DMatrix::zeros(2 * dim, 2 * dim);
        for bi in 0..2 {
            for bj in 0..2 {
                let w = material.mu * kinv[(bi, bj)];
                for al in 0..dim {
                    for be in 0..dim {
                        ma[(bi * dim + al, bj * dim + be)] = w * h_pressure[(al, be)];
                    }
                }
            }
        }
        let consistency = pi.transpose() * &ma * &pi;
        let t = DMatrix::identity(n, n) - &d * &pi;
        let zeta = material.mu * area / material.mean_perm();
        let stab = t.transpose() * t * zeta;
        let a = &consistency + &stab;

        let mut b = DMatrix::zeros(dim, n);
        for pos in 0..items.len() {
            b[(0, layout.edge_block(pos).start)] = -signs[pos] * edge_lengths[pos];
        }
        {
            let start = layout.div_block().start;
            for dd in 1..dim {
                b[(dd, start + dd - 1)] = -area / h;
            }
        }

        Ok(LocalElement {
            cell,
            layout,
            basis,
            area,
            signs,
            edge_lengths,
            edge_ids,
            h_pressure,
            d,
            pi,
            a,
            stab,
            b,
            oversample,
            edge_chols,
            pressure_chol,
        })
    }

    /// Trace coefficients on the edge at loop position `pos` of the
    /// normal component of the field with the given dofs, over the
    /// shifted powers in the intrinsic direction.
    pub fn edge_trace(&self, pos: usize, dofs: &DVector<f64>) -> DVector<f64> {
        let block = self.layout.edge_block(pos);
        let moments = dofs.rows(block.start, self.layout.per_edge) * self.edge_lengths[pos];
        self.edge_chols[pos].solve(&moments)
    }

    /// Divergence coefficients over the pressure monomials of the field
    /// with the given dofs. The constant moment is the net outward flux,
    /// the higher moments are stored unknowns.
    pub fn divergence_coeffs(&self, dofs: &DVector<f64>) -> DVector<f64> {
        let dim = self.layout.n_pressure();
        let mut mom = DVector::zeros(dim);
        for pos in 0..self.layout.n_edges {
            let block = self.layout.edge_block(pos);
            mom[0] += self.signs[pos] * self.edge_lengths[pos] * dofs[block.start];
        }
        let h = self.basis.h;
        let start = self.layout.div_block().start;
        for dd in 1..dim {
            mom[dd] = dofs[start + dd - 1] * self.area / h;
        }
        self.pressure_chol.solve(&mom)
    }

    /// Coefficients over the doubled monomial basis of the projected
    /// field with the given dofs.
    pub fn project(&self, dofs: &DVector<f64>) -> DVector<f64> {
        &self.pi * dofs
    }

    /// Moments of a source density against the pressure monomials.
    pub fn source_moments(
        &self,
        mesh: &Mesh,
        f: impl Fn(Point) -> f64,
    ) -> Result<DVector<f64>, VemError> {
        let rule = element_rule(mesh, self.cell, 2 * self.layout.degree + 2, self.oversample)?;
        let mut out = DVector::zeros(self.layout.n_pressure());
        for (p, w) in rule {
            let vals = self.basis.eval_all(p);
            let wf = w * f(p);
            for i in 0..out.len() {
                out[i] += wf * vals[i];
            }
        }
        Ok(out)
    }

    /// Boundary load of a prescribed pressure on the edge at loop
    /// position `pos`: minus its pairing with the outward normal
    /// component of each velocity dof function. Entries outside that
    /// edge's block are zero.
    pub fn natural_load(
        &self,
        mesh: &Mesh,
        pos: usize,
        pbar: impl Fn(Point) -> f64,
    ) -> DVector<f64> {
        let degree = self.layout.degree;
        let item = mesh.intrinsic_item(self.edge_ids[pos]);
        let rule = item_rule(&item, 2 * degree + 2, self.oversample);
        let mut moments = DVector::zeros(degree + 1);
        for ep in &rule {
            let em = edge_monomials(degree, ep.s);
            let ds = ep.w * ep.d.norm();
            let val = pbar(ep.p);
            for al in 0..=degree {
                moments[al] += ds * em[al] * val;
            }
        }
        let coefs = self.edge_chols[pos].solve(&moments);
        let mut out = DVector::zeros(self.layout.n_velocity());
        let block = self.layout.edge_block(pos);
        let coef = -self.signs[pos] * self.edge_lengths[pos];
        for al in 0..=degree {
            out[block.start + al] = coef * coefs[al];
        }
        out
    }
}
