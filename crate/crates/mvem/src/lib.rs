//! Mixed virtual element solver for Darcy flow on two-dimensional polygonal
//! meshes whose edges may follow curved interfaces exactly.
//!
//! The crate is organized bottom-up: [`curve`] defines the parametric curve
//! kinds, [`mesh`] builds structured grids and cuts them along curves,
//! [`poly`] and [`quad`] provide scaled monomial bases and quadrature rules
//! on curved polygons, [`vem`] assembles the local mixed element operators,
//! [`solver`] numbers the unknowns and solves the global saddle-point
//! system, and [`problems`] / [`convergence`] / [`vtk`] drive the benchmark
//! configurations and their reporting.

pub mod cli;
pub mod convergence;
pub mod curve;
pub mod mesh;
pub mod poly;
pub mod problems;
pub mod quad;
pub mod solver;
pub mod vem;
pub mod vtk;

/// Planar point; the crate computes in `f64` throughout.
pub type Point = nalgebra::Point2<f64>;
/// Planar vector.
pub type Vec2 = nalgebra::Vector2<f64>;
