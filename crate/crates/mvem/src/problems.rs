//! Built-in benchmark problems: domain, interface curves, materials,
//! boundary data, and exact fields where available.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::curve::CurveDef;
use crate::mesh::cut::{cut_by_curves, CutError};
use crate::mesh::generate::{perturbed_quad_grid, quad_grid};
use crate::mesh::{EdgeMarker, Mesh, Side};
use crate::solver::DarcyProblem;
use crate::vem::Material;
use crate::{Point, Vec2};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("unknown problem {0:?}; expected interface, fault, or patch")]
    Unknown(String),
    #[error(transparent)]
    Cut(#[from] CutError),
}

/// Whether cut edges keep their exact curved geometry or collapse to
/// chords between the intersection points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Geometry {
    Curved,
    Straight,
}

type Scalar = Box<dyn Fn(u32, Point) -> f64 + Sync + Send>;
type Vector = Box<dyn Fn(u32, Point) -> Vec2 + Sync + Send>;

/// Exact solution fields, taking the region id so that discontinuous
/// pressures across interfaces can be represented.
pub struct ExactSolution {
    pub pressure: Scalar,
    pub velocity: Vector,
}

/// A complete problem definition. Meshes are built on demand from the
/// domain box, the background resolution, and the interface curves.
pub struct ProblemSpec {
    pub name: String,
    pub domain: [f64; 4],
    /// Background cells per unit of `n` in x and y.
    pub aspect: (usize, usize),
    pub curves: Vec<CurveDef>,
    pub regions: BTreeMap<u32, String>,
    pub materials: BTreeMap<u32, Material>,
    pub default_degree: usize,
    pub default_family: Vec<usize>,
    pub exact: Option<ExactSolution>,
    region_of: Box<dyn Fn(Point) -> u32 + Sync + Send>,
    boundary: Box<dyn Fn(Side) -> EdgeMarker + Sync + Send>,
    source: Scalar,
    natural: Scalar,
    essential: Scalar,
}

impl ProblemSpec {
    /// Borrowed view used by assembly.
    pub fn darcy(&self) -> DarcyProblem<'_> {
        DarcyProblem {
            materials: self.materials.clone(),
            source: &*self.source,
            natural: &*self.natural,
            essential: &*self.essential,
        }
    }

    pub fn grid_size(&self, n: usize) -> (usize, usize) {
        (self.aspect.0 * n, self.aspect.1 * n)
    }

    /// Display name, with the geometry mode when the problem has curves.
    pub fn problem_label(&self, geometry: Geometry) -> String {
        if self.curves.is_empty() {
            self.name.clone()
        } else {
            let mode = match geometry {
                Geometry::Curved => "curved",
                Geometry::Straight => "straight",
            };
            format!("{} {mode}", self.name)
        }
    }

    /// Background grid at resolution `n`, cut by the problem's curves.
    pub fn mesh(&self, n: usize, geometry: Geometry) -> Result<Mesh, ProblemError> {
        let (nx, ny) = self.grid_size(n);
        let grid = quad_grid(self.domain, nx, ny, &self.boundary);
        if self.curves.is_empty() {
            return Ok(grid);
        }
        let cut = cut_by_curves(&grid, &self.curves, &self.region_of, self.regions.clone())?;
        Ok(match geometry {
            Geometry::Curved => cut.mesh,
            Geometry::Straight => cut.mesh.straightened(),
        })
    }

    /// Straight-edge grid with interior vertices jittered by a quarter
    /// of the cell size, for distorted-mesh verification runs.
    pub fn perturbed_mesh(&self, n: usize, seed: u64) -> Mesh {
        let (nx, ny) = self.grid_size(n);
        perturbed_quad_grid(self.domain, nx, ny, &self.boundary, 0.25, seed)
    }
}

/// Look up a built-in problem. The degree only matters for the patch
/// test, whose exact solution spans the full polynomial space of that
/// degree.
pub fn by_name(name: &str, degree: usize) -> Result<ProblemSpec, ProblemError> {
    match name {
        "interface" => Ok(interface_problem()),
        "fault" => Ok(fault_problem()),
        "patch" => Ok(patch_problem(degree)),
        other => Err(ProblemError::Unknown(other.to_string())),
    }
}

/// Unit-square flow past a quarter-circle inclusion of radius 0.45 at
/// the origin with a hundredfold permeability drop inside, smooth exact
/// pressure outside-in, and the exact pressure prescribed on the whole
/// boundary.
pub fn interface_problem() -> ProblemSpec {
    let r = 0.45;
    let offset = r * r * (1.0 - 0.01);
    let pressure = move |region: u32, p: Point| {
        let rr = p.x * p.x + p.y * p.y;
        if region == 2 {
            rr
        } else {
            0.01 * rr + offset
        }
    };
    ProblemSpec {
        name: "interface".to_string(),
        domain: [0.0, 0.0, 1.0, 1.0],
        aspect: (1, 1),
        curves: vec![CurveDef::circle_arc(
            Point::new(0.0, 0.0),
            r,
            0.0,
            std::f64::consts::FRAC_PI_2,
        )],
        regions: [(1, "matrix".to_string()), (2, "inclusion".to_string())].into(),
        materials: [
            (1, Material::isotropic(1.0, 1.0).unwrap()),
            (2, Material::isotropic(1.0, 0.01).unwrap()),
        ]
        .into(),
        default_degree: 1,
        default_family: vec![8, 16, 32, 64],
        exact: Some(ExactSolution {
            pressure: Box::new(pressure),
            velocity: Box::new(|_, p| Vec2::new(-0.02 * p.x, -0.02 * p.y)),
        }),
        region_of: Box::new(move |p| if p.coords.norm() < r { 2 } else { 1 }),
        boundary: Box::new(|_| EdgeMarker::Natural),
        source: Box::new(|_, _| 0.04),
        natural: Box::new(pressure),
        essential: Box::new(|_, _| 0.0),
    }
}

/// Abscissa where a horizon `y = s*sqrt(x + 1.1) + c` meets the fault
/// `y = -1.25*sqrt(x + 1.1) + 1.01`, via the substitution u = sqrt(x+1.1).
fn sqrt_junction(slope: f64, c: f64) -> f64 {
    let u = (1.01 - c) / (slope + 1.25);
    u * u - 1.1
}

/// Abscissa where a horizon `y = 0.25*(x+1.1)^2 + c` meets the fault,
/// solved by bisection of the monotone quartic in u = sqrt(x + 1.1).
fn parabola_junction(c: f64) -> f64 {
    let f = |u: f64| 0.25 * u.powi(4) + 1.25 * u + c - 1.01;
    let (mut lo, mut hi) = (0.0, 1.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let u = 0.5 * (lo + hi);
    u * u - 1.1
}

/// Listric fault with two broken horizons: six material regions, a
/// hundredfold seal in the middle layer on both sides of the fault, unit
/// pressure drop bottom to top, insulated lateral sides.
pub fn fault_problem() -> ProblemSpec {
    let fault_y = |x: f64| -1.25 * (x + 1.1).sqrt() + 1.01;
    // Fault endpoints on the top and bottom domain edges.
    let x_top = (0.51f64 / 1.25).powi(2) - 1.1;
    let x_bot = (1.51f64 / 1.25).powi(2) - 1.1;
    let fault = CurveDef::graph_sqrt(-1.25, 1.1, 1.01, x_top, x_bot);
    // Horizons left of the fault run from the left boundary to their
    // junction on the fault; right of it from the junction to the right
    // boundary or the top edge.
    let upper_left = CurveDef::graph_parabola(0.25, 1.1, 0.01, -1.0, parabola_junction(0.01));
    let lower_left = CurveDef::graph_parabola(0.25, 1.1, -0.21, -1.0, parabola_junction(-0.21));
    let lower_right = CurveDef::graph_sqrt(0.5, 1.1, -0.41, sqrt_junction(0.5, -0.41), 1.0);
    let upper_right = CurveDef::graph_sqrt(
        0.75,
        1.1,
        -0.01,
        sqrt_junction(0.75, -0.01),
        (0.51f64 / 0.75).powi(2) - 1.1,
    );

    let xi = [1.0, 0.01, 1.0, 1.0, 0.01, 1.0];
    let labels = [
        "footwall top",
        "footwall seal",
        "footwall bottom",
        "hanging wall top",
        "hanging wall seal",
        "hanging wall bottom",
    ];
    ProblemSpec {
        name: "fault".to_string(),
        domain: [-1.0, -0.5, 1.0, 0.5],
        aspect: (2, 1),
        curves: vec![fault, upper_left, lower_left, lower_right, upper_right],
        regions: labels
            .iter()
            .enumerate()
            .map(|(i, &l)| (i as u32 + 1, l.to_string()))
            .collect(),
        materials: xi
            .iter()
            .enumerate()
            .map(|(i, &k)| (i as u32 + 1, Material::isotropic(1.0, k).unwrap()))
            .collect(),
        default_degree: 2,
        default_family: vec![16, 32],
        exact: None,
        region_of: Box::new(move |p: Point| {
            let u = (p.x + 1.1).sqrt();
            if p.y < fault_y(p.x) {
                let band = 0.25 * (p.x + 1.1).powi(2);
                if p.y > band + 0.01 {
                    1
                } else if p.y < band - 0.21 {
                    3
                } else {
                    2
                }
            } else if p.y > 0.75 * u - 0.01 {
                4
            } else if p.y < 0.5 * u - 0.41 {
                6
            } else {
                5
            }
        }),
        boundary: Box::new(|side| match side {
            Side::Top | Side::Bottom => EdgeMarker::Natural,
            Side::Left | Side::Right => EdgeMarker::Essential,
        }),
        source: Box::new(|_, _| 0.0),
        natural: Box::new(|_, p| if p.y > 0.0 { 0.0 } else { 1.0 }),
        essential: Box::new(|_, _| 0.0),
    }
}

/// Polynomial reproduction check: the exact pressure is the sum of all
/// monomials up to the given degree on the unit square, with matching
/// flux and source and the exact pressure on the whole boundary.
pub fn patch_problem(degree: usize) -> ProblemSpec {
    let k = degree as i32;
    let pressure = move |_: u32, p: Point| {
        let mut s = 0.0;
        for a in 0..=k {
            for b in 0..=(k - a) {
                s += p.x.powi(a) * p.y.powi(b);
            }
        }
        s
    };
    let velocity = move |_: u32, p: Point| {
        let mut g = Vec2::zeros();
        for a in 0..=k {
            for b in 0..=(k - a) {
                if a > 0 {
                    g.x += a as f64 * p.x.powi(a - 1) * p.y.powi(b);
                }
                if b > 0 {
                    g.y += b as f64 * p.x.powi(a) * p.y.powi(b - 1);
                }
            }
        }
        -g
    };
    let laplacian = move |_: u32, p: Point| {
        let mut s = 0.0;
        for a in 0..=k {
            for b in 0..=(k - a) {
                if a > 1 {
                    s += (a * (a - 1)) as f64 * p.x.powi(a - 2) * p.y.powi(b);
                }
                if b > 1 {
                    s += (b * (b - 1)) as f64 * p.x.powi(a) * p.y.powi(b - 2);
                }
            }
        }
        s
    };
    ProblemSpec {
        name: "patch".to_string(),
        domain: [0.0, 0.0, 1.0, 1.0],
        aspect: (1, 1),
        curves: vec![],
        regions: [(0, "domain".to_string())].into(),
        materials: [(0, Material::isotropic(1.0, 1.0).unwrap())].into(),
        default_degree: degree,
        default_family: vec![4, 8, 16],
        exact: Some(ExactSolution {
            pressure: Box::new(pressure),
            velocity: Box::new(velocity),
        }),
        region_of: Box::new(|_| 0),
        boundary: Box::new(|_| EdgeMarker::Natural),
        source: Box::new(laplacian),
        natural: Box::new(pressure),
        essential: Box::new(|_, _| 0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn interface_fields_are_continuous_at_the_arc() {
        let spec = interface_problem();
        let exact = spec.exact.as_ref().unwrap();
        for i in 0..7 {
            let th = std::f64::consts::FRAC_PI_2 * i as f64 / 6.0;
            let p = Point::new(0.45 * th.cos(), 0.45 * th.sin());
            let inside = (exact.pressure)(2, p);
            let outside = (exact.pressure)(1, p);
            assert_relative_eq!(inside, 0.2025, epsilon = 1e-15);
            assert_relative_eq!(outside, 0.2025, epsilon = 1e-15);
            let q = (exact.velocity)(1, p);
            let n = p.coords / p.coords.norm();
            assert_relative_eq!(q.dot(&n), -0.02 * 0.45, epsilon = 1e-15);
        }
        assert_relative_eq!((spec.source)(1, Point::new(0.7, 0.3)), 0.04);
    }

    #[test]
    fn interface_meshes_have_the_expected_cell_counts() {
        let spec = interface_problem();
        let curved = spec.mesh(2, Geometry::Curved).unwrap();
        assert_eq!(curved.n_cells(), 5);
        assert_relative_eq!(curved.total_area(), 1.0, epsilon = 1e-10);

        let straight = spec.mesh(2, Geometry::Straight).unwrap();
        assert_eq!(straight.n_cells(), 5);
        assert!(straight.total_area() < 1.0);
        assert!(straight.total_area() > 0.99);

        let finer = spec.mesh(4, Geometry::Curved).unwrap();
        assert_eq!(finer.n_cells(), 19);
    }

    #[test]
    fn fault_horizon_formula_matches_the_printed_value() {
        let parabola = CurveDef::graph_parabola(0.25, 1.1, 0.01, -1.0, 0.5);
        let p = parabola.eval(0.0).unwrap();
        assert_relative_eq!(p.y, 0.3125, epsilon = 1e-15);
    }

    #[test]
    fn fault_curves_meet_the_fault_and_the_box() {
        let spec = fault_problem();
        let fault = &spec.curves[0];
        let top = fault.eval(fault.interval[0]).unwrap();
        let bottom = fault.eval(fault.interval[1]).unwrap();
        assert_relative_eq!(top.y, 0.5, epsilon = 1e-12);
        assert_relative_eq!(bottom.y, -0.5, epsilon = 1e-12);

        let fault_y = |x: f64| -1.25 * (x + 1.1).sqrt() + 1.01;
        for (i, end) in [(1, 1), (2, 1), (3, 0), (4, 0)] {
            let c = &spec.curves[i];
            let x = c.interval[end];
            let p = c.eval(x).unwrap();
            assert_relative_eq!(p.y, fault_y(x), epsilon = 1e-12, max_relative = 1e-12);
        }
        let upper_right = &spec.curves[4];
        let exit = upper_right.eval(upper_right.interval[1]).unwrap();
        assert_relative_eq!(exit.y, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn fault_mesh_carries_six_populated_regions() {
        let spec = fault_problem();
        let mesh = spec.mesh(16, Geometry::Curved).unwrap();
        assert_eq!(mesh.regions.len(), 6);
        let mut seen = std::collections::BTreeSet::new();
        for cell in &mesh.cells {
            seen.insert(cell.region);
        }
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), vec![1, 2, 3, 4, 5, 6]);
        assert_relative_eq!(mesh.total_area(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn patch_fields_are_mutually_consistent() {
        for degree in 0..=3 {
            let spec = patch_problem(degree);
            let exact = spec.exact.as_ref().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(degree as u64);
            let eps = 1e-6;
            for _ in 0..10 {
                let p = Point::new(rng.random_range(0.1..0.9), rng.random_range(0.1..0.9));
                let px = ((exact.pressure)(0, Point::new(p.x + eps, p.y))
                    - (exact.pressure)(0, Point::new(p.x - eps, p.y)))
                    / (2.0 * eps);
                let py = ((exact.pressure)(0, Point::new(p.x, p.y + eps))
                    - (exact.pressure)(0, Point::new(p.x, p.y - eps)))
                    / (2.0 * eps);
                let q = (exact.velocity)(0, p);
                assert_relative_eq!(q.x, -px, epsilon = 1e-7);
                assert_relative_eq!(q.y, -py, epsilon = 1e-7);

                let qx = ((exact.velocity)(0, Point::new(p.x + eps, p.y)).x
                    - (exact.velocity)(0, Point::new(p.x - eps, p.y)).x)
                    / (2.0 * eps);
                let qy = ((exact.velocity)(0, Point::new(p.x, p.y + eps)).y
                    - (exact.velocity)(0, Point::new(p.x, p.y - eps)).y)
                    / (2.0 * eps);
                assert_relative_eq!((spec.source)(0, p), -(qx + qy), epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn lookup_covers_the_built_in_names() {
        assert_eq!(by_name("interface", 1).unwrap().name, "interface");
        assert_eq!(by_name("fault", 2).unwrap().name, "fault");
        assert_eq!(by_name("patch", 3).unwrap().default_degree, 3);
        assert!(matches!(
            by_name("vortex", 1),
            Err(ProblemError::Unknown(_))
        ));
    }
}
