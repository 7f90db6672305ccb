//! Gauss quadrature on edges and polygonal cells with curved boundary.
//!
//! Cell integrals come in two flavors. [`monomial_integrals`] integrates
//! scaled monomials through the divergence theorem, turning the cell
//! integral into boundary integrals; it is exact up to roundoff on
//! straight-edge polygons and oversampled on curved edges. The companion
//! [`element_rule`] builds a point rule over the cell by fanning triangles
//! (with curved outer edges where needed) from an anchor point certified
//! during mesh finalization; the two routes check each other.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use nalgebra::DVector;
use thiserror::Error;

use crate::mesh::{BoundaryItem, Mesh};
use crate::poly::{monomial_index, MonomialBasis};
use crate::{Point, Vec2};

/// Extra Gauss points added on curved pieces, on top of the count that the
/// polynomial degree alone would need.
pub const DEFAULT_OVERSAMPLE: usize = 3;

pub const MAX_GAUSS_POINTS: usize = 64;

#[derive(Debug, Error)]
pub enum QuadError {
    #[error("cell {cell}: no fan anchor certified, cannot build an element rule")]
    NoFanAnchor { cell: usize },
}

/// Gauss-Legendre rule on [0, 1].
#[derive(Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Number of Gauss points that integrate polynomials of `degree` exactly.
pub fn npts_for_degree(degree: usize) -> usize {
    degree / 2 + 1
}

/// The `n`-point Gauss-Legendre rule on [0, 1], computed once and cached.
pub fn gauss01(n: usize) -> &'static GaussRule {
    assert!(
        (1..=MAX_GAUSS_POINTS).contains(&n),
        "gauss01: point count {n} outside 1..={MAX_GAUSS_POINTS}"
    );
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static GaussRule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry(n).or_insert_with(|| Box::leak(Box::new(build_gauss(n))))
}

/// Legendre value and derivative at `x` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn build_gauss(n: usize) -> GaussRule {
    if n == 1 {
        return GaussRule {
            nodes: vec![0.5],
            weights: vec![1.0],
        };
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        // Map from [-1, 1]; roots come out in descending order.
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    GaussRule { nodes, weights }
}

/// One quadrature point of a boundary-item rule. `w` is the weight in the
/// traversal parameter `s`, and `d` the point derivative with respect to
/// `s`; the arc-length element is `w * |d|` and the outward length-scaled
/// normal of a counterclockwise loop is `(d.y, -d.x)`.
#[derive(Clone, Copy, Debug)]
pub struct EdgePoint {
    pub s: f64,
    pub w: f64,
    pub p: Point,
    pub d: Vec2,
}

/// Total direction turning of an item, estimated from sampled derivatives.
fn turning(item: &BoundaryItem<'_>) -> f64 {
    if !item.is_curved() {
        return 0.0;
    }
    let mut total = 0.0;
    let mut prev = f64::NAN;
    for i in 0..33 {
        let d = item.dpoint(i as f64 / 32.0);
        let angle = d.y.atan2(d.x);
        if i > 0 {
            let mut delta = angle - prev;
            while delta > PI {
                delta -= 2.0 * PI;
            }
            while delta < -PI {
                delta += 2.0 * PI;
            }
            total += delta.abs();
        }
        prev = angle;
    }
    total
}

/// Quadrature rule along one boundary item, exact for polynomials of
/// `degree` in the traversal parameter on straight items. Curved items get
/// `oversample` extra points and are split into panels so that each panel
/// turns by at most a fraction of a radian.
pub fn item_rule(item: &BoundaryItem<'_>, degree: usize, oversample: usize) -> Vec<EdgePoint> {
    let (npts, panels) = if item.is_curved() {
        let n = (npts_for_degree(degree) + oversample).min(MAX_GAUSS_POINTS);
        let p = (1 + (turning(item) / 0.35) as usize).min(32);
        (n, p)
    } else {
        (npts_for_degree(degree).min(MAX_GAUSS_POINTS), 1)
    };
    let rule = gauss01(npts);
    let mut out = Vec::with_capacity(npts * panels);
    let width = 1.0 / panels as f64;
    for panel in 0..panels {
        let s0 = panel as f64 * width;
        for (u, w) in rule.iter() {
            let s = s0 + u * width;
            out.push(EdgePoint {
                s,
                w: w * width,
                p: item.point(s),
                d: item.dpoint(s),
            });
        }
    }
    out
}

/// Integrals over a cell of every monomial in `basis`, via the divergence
/// theorem: a monomial `m` is written as the divergence of `(A, 0)` with
/// `A` its antiderivative in `x`, so its integral becomes the contour
/// integral of `A` against the `x` component of the outward normal.
pub fn monomial_integrals(
    mesh: &Mesh,
    cell: usize,
    basis: &MonomialBasis,
    oversample: usize,
) -> DVector<f64> {
    let lifted = MonomialBasis::new(basis.anchor, basis.h, basis.degree + 1);
    let h = basis.h;
    let mut out = DVector::zeros(basis.len());
    for item in &mesh.boundary_items(cell) {
        for ep in item_rule(item, basis.degree + 1, oversample) {
            let vals = lifted.eval_all(ep.p);
            let flux = ep.w * ep.d.y;
            for (i, &(a, b)) in basis.exps().iter().enumerate() {
                let lift = monomial_index(a + 1, b);
                out[i] += flux * h / (a + 1) as f64 * vals[lift];
            }
        }
    }
    out
}

/// Gram matrix of `basis` over a cell, `H[i][j]` the integral of
/// `m_i * m_j`. Products of scaled monomials are scaled monomials again,
/// so this reduces to one integral vector of doubled degree.
pub fn monomial_gram(
    mesh: &Mesh,
    cell: usize,
    basis: &MonomialBasis,
    oversample: usize,
) -> nalgebra::DMatrix<f64> {
    let doubled = MonomialBasis::new(basis.anchor, basis.h, 2 * basis.degree);
    let ints = monomial_integrals(mesh, cell, &doubled, oversample);
    let n = basis.len();
    let mut h = nalgebra::DMatrix::zeros(n, n);
    for i in 0..n {
        let (ai, bi) = basis.exps()[i];
        for j in 0..n {
            let (aj, bj) = basis.exps()[j];
            h[(i, j)] = ints[monomial_index(ai + aj, bi + bj)];
        }
    }
    h
}

/// Point rule over a cell, built by fanning the boundary items from the
/// certified anchor. Exact for polynomials of `degree` when all edges are
/// straight; curved pieces are oversampled and paneled as in [`item_rule`].
pub fn element_rule(
    mesh: &Mesh,
    cell: usize,
    degree: usize,
    oversample: usize,
) -> Result<Vec<(Point, f64)>, QuadError> {
    let anchor = mesh.cells[cell]
        .geometry()
        .fan_anchor
        .ok_or(QuadError::NoFanAnchor { cell })?;
    let radial = gauss01(npts_for_degree(degree + 1).min(MAX_GAUSS_POINTS));
    let mut out = Vec::new();
    for item in &mesh.boundary_items(cell) {
        for ep in item_rule(item, degree + 1, oversample) {
            let r = ep.p - anchor;
            let det = r.x * ep.d.y - r.y * ep.d.x;
            for (u, wu) in radial.iter() {
                out.push((anchor + u * r, ep.w * wu * u * det));
            }
        }
    }
    Ok(out)
}

/// Integral of `f` over a cell with an [`element_rule`] of the given degree.
pub fn cell_integral(
    mesh: &Mesh,
    cell: usize,
    degree: usize,
    oversample: usize,
    mut f: impl FnMut(Point) -> f64,
) -> Result<f64, QuadError> {
    let rule = element_rule(mesh, cell, degree, oversample)?;
    Ok(rule.into_iter().map(|(p, w)| w * f(p)).sum())
}
