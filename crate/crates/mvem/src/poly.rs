//! Scaled monomial bases on elements, and the polynomial decompositions the
//! mixed projection is built from.
//!
//! Monomials are anchored at the element centroid and scaled by the element
//! diameter, `m_(a,b)(x) = xi^a eta^b` with `xi = (x - xc)/h`, ordered
//! graded-lexicographically: `1, xi, eta, xi^2, xi*eta, eta^2, ...`. Vector
//! polynomials over `[M_k]^2` store the x-component coefficients first,
//! then the y-component.

use nalgebra::{DMatrix, DVector};

use crate::Point;

/// Dimension of polynomials of degree `<= d` in `n` variables,
/// `(1/n!) * prod_{i=1..n} (d+i)`. Negative `d` gives 0.
pub fn pi_d_n(d: i64, n: u32) -> usize {
    let mut num: i64 = 1;
    let mut den: i64 = 1;
    for i in 1..=i64::from(n) {
        num *= d + i;
        den *= i;
    }
    if num <= 0 {
        0
    } else {
        (num / den) as usize
    }
}

/// Dimension of `P_d` in two variables, `(d+1)(d+2)/2`.
pub fn dim_p2(d: i64) -> usize {
    pi_d_n(d, 2)
}

/// Exponent pairs `(a, b)` of the scaled monomials up to degree `d` in
/// graded-lex order.
pub fn exponents(d: usize) -> Vec<(u32, u32)> {
    let mut out = Vec::with_capacity(dim_p2(d as i64));
    for g in 0..=d as u32 {
        for b in 0..=g {
            out.push((g - b, b));
        }
    }
    out
}

/// Position of the monomial `xi^a eta^b` in graded-lex order.
pub fn monomial_index(a: u32, b: u32) -> usize {
    let g = (a + b) as usize;
    g * (g + 1) / 2 + b as usize
}

/// Scaled monomial basis `M_d` on one element.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    pub anchor: Point,
    pub h: f64,
    pub degree: usize,
    exps: Vec<(u32, u32)>,
}

impl MonomialBasis {
    pub fn new(anchor: Point, h: f64, degree: usize) -> Self {
        assert!(h > 0.0, "monomial scale must be positive, got {h}");
        MonomialBasis {
            anchor,
            h,
            degree,
            exps: exponents(degree),
        }
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exps(&self) -> &[(u32, u32)] {
        &self.exps
    }

    /// Scaled coordinates of a physical point.
    pub fn scaled(&self, p: Point) -> (f64, f64) {
        ((p.x - self.anchor.x) / self.h, (p.y - self.anchor.y) / self.h)
    }

    /// Values of every basis monomial at `p`.
    pub fn eval_all(&self, p: Point) -> DVector<f64> {
        let (xi, eta) = self.scaled(p);
        let d = self.degree;
        let mut xi_pow = vec![1.0; d + 1];
        let mut eta_pow = vec![1.0; d + 1];
        for i in 1..=d {
            xi_pow[i] = xi_pow[i - 1] * xi;
            eta_pow[i] = eta_pow[i - 1] * eta;
        }
        DVector::from_iterator(
            self.exps.len(),
            self.exps
                .iter()
                .map(|&(a, b)| xi_pow[a as usize] * eta_pow[b as usize]),
        )
    }

    /// Value of the polynomial with coefficient vector `coeffs` at `p`.
    pub fn eval_poly(&self, coeffs: &DVector<f64>, p: Point) -> f64 {
        coeffs.dot(&self.eval_all(p))
    }

    /// Physical gradient of the polynomial with coefficients `coeffs`,
    /// returned as a coefficient pair over the same basis (the entries of
    /// degree `self.degree` are zero).
    pub fn grad_poly(&self, coeffs: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let n = self.len();
        let mut gx = DVector::zeros(n);
        let mut gy = DVector::zeros(n);
        for (i, &(a, b)) in self.exps.iter().enumerate() {
            let c = coeffs[i];
            if c == 0.0 {
                continue;
            }
            if a > 0 {
                gx[monomial_index(a - 1, b)] += c * f64::from(a) / self.h;
            }
            if b > 0 {
                gy[monomial_index(a, b - 1)] += c * f64::from(b) / self.h;
            }
        }
        (gx, gy)
    }
}

/// Divergence operator for vector polynomials over `[M_k]^2`, as a matrix
/// mapping the stacked `2*dim` coefficient vector to divergence
/// coefficients over `M_k` (only entries up to degree `k-1` are hit).
pub fn divergence_matrix(k: usize, h: f64) -> DMatrix<f64> {
    let dim = dim_p2(k as i64);
    let mut m = DMatrix::zeros(dim, 2 * dim);
    for (i, &(a, b)) in exponents(k).iter().enumerate() {
        if a > 0 {
            m[(monomial_index(a - 1, b), i)] += f64::from(a) / h;
        }
        if b > 0 {
            m[(monomial_index(a, b - 1), i + dim)] += f64::from(b) / h;
        }
    }
    m
}

/// Columns are the gradients of the non-constant monomials of `M_{k+1}`,
/// expressed over `[M_k]^2`. Shape `2*dim_p2(k) x (dim_p2(k+1) - 1)`.
pub fn gradient_columns(k: usize, h: f64) -> DMatrix<f64> {
    let dim_k = dim_p2(k as i64);
    let cols = dim_p2(k as i64 + 1) - 1;
    let mut m = DMatrix::zeros(2 * dim_k, cols);
    for (j, &(a, b)) in exponents(k + 1).iter().skip(1).enumerate() {
        if a > 0 {
            m[(monomial_index(a - 1, b), j)] += f64::from(a) / h;
        }
        if b > 0 {
            m[(dim_k + monomial_index(a, b - 1), j)] += f64::from(b) / h;
        }
    }
    m
}

/// Columns are the basis of the gradient complement: `m1_perp * m` for
/// `m in M_{k-1}`, with `m1_perp = (eta, -xi)`. Expressed over `[M_k]^2`,
/// shape `2*dim_p2(k) x dim_p2(k-1)`.
pub fn g_perp_columns(k: usize) -> DMatrix<f64> {
    let dim_k = dim_p2(k as i64);
    let cols = dim_p2(k as i64 - 1);
    let mut m = DMatrix::zeros(2 * dim_k, cols);
    if k == 0 {
        return m;
    }
    for (j, &(a, b)) in exponents(k - 1).iter().enumerate() {
        m[(monomial_index(a, b + 1), j)] = 1.0;
        m[(dim_k + monomial_index(a + 1, b), j)] = -1.0;
    }
    m
}

/// Decomposition of every vector monomial of `[M_k]^2` as
/// `grad p + sum_i c_i g_i` with `p in M_{k+1}` (zero constant term) and
/// `g_i` the [`g_perp_columns`] basis.
#[derive(Clone, Debug)]
pub struct VectorDecomposition {
    /// `dim_p2(k+1) x 2*dim_p2(k)`: column `beta` holds the coefficients of
    /// `p_beta` over `M_{k+1}` (row 0, the constant, is always zero).
    pub p_coeffs: DMatrix<f64>,
    /// `dim_p2(k-1) x 2*dim_p2(k)`: column `beta` holds `c` for `m_beta`.
    pub c_coeffs: DMatrix<f64>,
}

/// Solve the change of basis `[grad M_{k+1} | G_perp] z = I` once per
/// element scale. The combined matrix is square because
/// `(dim_p2(k+1) - 1) + dim_p2(k-1) = 2 dim_p2(k)`.
pub fn decompose_vector_monomials(k: usize, h: f64) -> VectorDecomposition {
    let dim_k = dim_p2(k as i64);
    let n_grad = dim_p2(k as i64 + 1) - 1;
    let n_perp = dim_p2(k as i64 - 1);
    assert_eq!(n_grad + n_perp, 2 * dim_k);

    let grad = gradient_columns(k, h);
    let perp = g_perp_columns(k);
    let mut cb = DMatrix::zeros(2 * dim_k, 2 * dim_k);
    cb.view_mut((0, 0), (2 * dim_k, n_grad)).copy_from(&grad);
    cb.view_mut((0, n_grad), (2 * dim_k, n_perp)).copy_from(&perp);

    let inv = cb
        .lu()
        .try_inverse()
        .expect("gradient + perp basis must span the vector monomials");

    let mut p_coeffs = DMatrix::zeros(dim_p2(k as i64 + 1), 2 * dim_k);
    p_coeffs
        .view_mut((1, 0), (n_grad, 2 * dim_k))
        .copy_from(&inv.view((0, 0), (n_grad, 2 * dim_k)));
    let c_coeffs = inv.view((n_grad, 0), (n_perp, 2 * dim_k)).into();
    VectorDecomposition { p_coeffs, c_coeffs }
}
