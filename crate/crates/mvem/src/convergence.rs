//! Error measurement against exact fields, refinement studies, and
//! convergence tables with pairwise and least-squares rates.

use std::io::Write;
use std::time::Instant;

use thiserror::Error;

use crate::mesh::Mesh;
use crate::problems::{ExactSolution, Geometry, ProblemError, ProblemSpec};
use crate::quad::{element_rule, QuadError};
use crate::solver::{assemble, local_pressure, solve, Assembly, Solution, SolverError};
use crate::vem::vector_value;

/// Errors this small count as exact reproduction; rates computed from
/// them would only measure rounding noise.
pub const EXACT_FLOOR: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error("problem has no exact solution to measure errors against")]
    NoExact,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One refinement level of a study.
#[derive(Clone, Debug)]
pub struct ErrorReport {
    /// Background resolution `n` the mesh was built from.
    pub level: usize,
    /// Mean cell diameter.
    pub h: f64,
    pub n_cells: usize,
    pub n_velocity: usize,
    pub n_pressure: usize,
    pub e_p: f64,
    pub e_q: f64,
    pub seconds: f64,
}

pub fn mean_diameter(mesh: &Mesh) -> f64 {
    let total: f64 = mesh.cells.iter().map(|c| c.geometry().diameter).sum();
    total / mesh.n_cells() as f64
}

/// L2 errors of the pressure and of the projected velocity against the
/// exact fields, integrated with a rule of degree `2k + 4`.
pub fn compute_errors(
    mesh: &Mesh,
    assembly: &Assembly,
    solution: &Solution,
    exact: &ExactSolution,
    oversample: usize,
) -> Result<(f64, f64), QuadError> {
    let degree = assembly.dof_map.degree;
    let mut ep2 = 0.0;
    let mut eq2 = 0.0;
    for cell in 0..mesh.n_cells() {
        let el = &assembly.locals[cell];
        let region = mesh.cells[cell].region;
        let pc = local_pressure(assembly, cell, &solution.pressure);
        let qc = &solution.projected[cell];
        for (p, w) in element_rule(mesh, cell, 2 * degree + 4, oversample)? {
            let dp = (exact.pressure)(region, p) - el.basis.eval_poly(&pc, p);
            let dq = (exact.velocity)(region, p) - vector_value(&el.basis, qc, p);
            ep2 += w * dp * dp;
            eq2 += w * dq.norm_squared();
        }
    }
    Ok((ep2.max(0.0).sqrt(), eq2.max(0.0).sqrt()))
}

/// L2 norms of the exact pressure and velocity over the mesh, for
/// turning absolute errors into relative ones.
pub fn reference_norms(
    mesh: &Mesh,
    exact: &ExactSolution,
    degree: usize,
    oversample: usize,
) -> Result<(f64, f64), QuadError> {
    let mut p2 = 0.0;
    let mut q2 = 0.0;
    for cell in 0..mesh.n_cells() {
        let region = mesh.cells[cell].region;
        for (p, w) in element_rule(mesh, cell, 2 * degree + 4, oversample)? {
            p2 += w * (exact.pressure)(region, p).powi(2);
            q2 += w * (exact.velocity)(region, p).norm_squared();
        }
    }
    Ok((p2.max(0.0).sqrt(), q2.max(0.0).sqrt()))
}

/// Solve on a prebuilt mesh and measure it. The report's timing covers
/// assembly, solve, and error integration.
pub fn measure_mesh(
    spec: &ProblemSpec,
    degree: usize,
    mesh: &Mesh,
    level: usize,
    oversample: usize,
) -> Result<ErrorReport, StudyError> {
    let exact = spec.exact.as_ref().ok_or(StudyError::NoExact)?;
    let start = Instant::now();
    let problem = spec.darcy();
    let assembly = assemble(mesh, degree, &problem, oversample)?;
    let solution = solve(&assembly)?;
    let (e_p, e_q) = compute_errors(mesh, &assembly, &solution, exact, oversample)?;
    Ok(ErrorReport {
        level,
        h: mean_diameter(mesh),
        n_cells: mesh.n_cells(),
        n_velocity: assembly.dof_map.n_velocity,
        n_pressure: assembly.dof_map.n_pressure,
        e_p,
        e_q,
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn run_level(
    spec: &ProblemSpec,
    degree: usize,
    n: usize,
    geometry: Geometry,
    oversample: usize,
) -> Result<ErrorReport, StudyError> {
    let mesh = spec.mesh(n, geometry)?;
    measure_mesh(spec, degree, &mesh, n, oversample)
}

/// Reports over a refinement family, with rate helpers and writers.
pub struct ConvergenceTable {
    pub problem: String,
    pub degree: usize,
    pub reports: Vec<ErrorReport>,
}

impl ConvergenceTable {
    /// Rates between consecutive levels, `(rate_p, rate_q)` per row.
    /// The first row has none, and entries whose errors sit at rounding
    /// level are skipped.
    pub fn pairwise_rates(&self) -> Vec<(Option<f64>, Option<f64>)> {
        let mut out = vec![(None, None)];
        for pair in self.reports.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let ratio = (a.h / b.h).ln();
            let rate = |ea: f64, eb: f64| {
                if ea < EXACT_FLOOR || eb < EXACT_FLOOR {
                    None
                } else {
                    Some((ea / eb).ln() / ratio)
                }
            };
            out.push((rate(a.e_p, b.e_p), rate(a.e_q, b.e_q)));
        }
        out
    }

    /// Least-squares slope of `ln e` against `ln h` over the rows with
    /// errors above rounding level; needs at least two such rows.
    pub fn slopes(&self) -> (Option<f64>, Option<f64>) {
        let fit = |err: &dyn Fn(&ErrorReport) -> f64| {
            let pts: Vec<(f64, f64)> = self
                .reports
                .iter()
                .filter(|r| err(r) >= EXACT_FLOOR)
                .map(|r| (r.h.ln(), err(r).ln()))
                .collect();
            if pts.len() < 2 {
                return None;
            }
            let n = pts.len() as f64;
            let xm = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let num: f64 = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
            let den: f64 = pts.iter().map(|p| (p.0 - xm).powi(2)).sum();
            Some(num / den)
        };
        (fit(&|r| r.e_p), fit(&|r| r.e_q))
    }

    /// Whether every level reproduced the exact solution to rounding.
    pub fn is_exact(&self) -> bool {
        self.reports
            .iter()
            .all(|r| r.e_p < EXACT_FLOOR && r.e_q < EXACT_FLOOR)
    }

    pub fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "level,h,NE,ndof_v,ndof_p,e_p,e_q,rate_p,rate_q,seconds")?;
        let fmt = |r: Option<f64>| r.map(|v| format!("{v:.3}")).unwrap_or_default();
        for (report, rates) in self.reports.iter().zip(self.pairwise_rates()) {
            writeln!(
                out,
                "{},{:.6e},{},{},{},{:.6e},{:.6e},{},{},{:.3}",
                report.level,
                report.h,
                report.n_cells,
                report.n_velocity,
                report.n_pressure,
                report.e_p,
                report.e_q,
                fmt(rates.0),
                fmt(rates.1),
                report.seconds,
            )?;
        }
        Ok(())
    }

    /// Human-readable table for terminal output.
    pub fn render(&self) -> String {
        let mut s = format!("{} (degree {})\n", self.problem, self.degree);
        s += &format!(
            "{:>6} {:>12} {:>8} {:>8} {:>8} {:>12} {:>12} {:>7} {:>7} {:>8}\n",
            "level", "h", "NE", "ndof_v", "ndof_p", "e_p", "e_q", "rate_p", "rate_q", "seconds"
        );
        let fmt = |r: Option<f64>| r.map(|v| format!("{v:.2}")).unwrap_or_default();
        for (report, rates) in self.reports.iter().zip(self.pairwise_rates()) {
            s += &format!(
                "{:>6} {:>12.4e} {:>8} {:>8} {:>8} {:>12.4e} {:>12.4e} {:>7} {:>7} {:>8.2}\n",
                report.level,
                report.h,
                report.n_cells,
                report.n_velocity,
                report.n_pressure,
                report.e_p,
                report.e_q,
                fmt(rates.0),
                fmt(rates.1),
                report.seconds,
            );
        }
        if self.is_exact() {
            s += "errors at rounding level on every mesh: exact\n";
        } else {
            let (sp, sq) = self.slopes();
            let fmt = |r: Option<f64>| r.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
            s += &format!(
                "least-squares slopes: pressure {} velocity {}\n",
                fmt(sp),
                fmt(sq)
            );
        }
        s
    }
}

/// Solve every level of the family. A failing level stops the run but
/// still hands back the completed rows, so callers can emit a partial
/// table next to the error.
pub fn run_study_partial(
    spec: &ProblemSpec,
    degree: usize,
    geometry: Geometry,
    family: &[usize],
    oversample: usize,
) -> (ConvergenceTable, Option<StudyError>) {
    let mut reports = Vec::new();
    let mut failure = None;
    for &n in family {
        match run_level(spec, degree, n, geometry, oversample) {
            Ok(report) => reports.push(report),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    let table = ConvergenceTable {
        problem: spec.problem_label(geometry),
        degree,
        reports,
    };
    (table, failure)
}

/// Solve every level of the family and collect the table.
pub fn run_study(
    spec: &ProblemSpec,
    degree: usize,
    geometry: Geometry,
    family: &[usize],
    oversample: usize,
) -> Result<ConvergenceTable, StudyError> {
    let (table, failure) = run_study_partial(spec, degree, geometry, family, oversample);
    match failure {
        Some(e) => Err(e),
        None => Ok(table),
    }
}
