//! Command-line driver: mesh generation and cutting, single solves,
//! convergence studies, and VTK export.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::convergence::{run_study_partial, StudyError};
use crate::mesh::generate::quad_grid;
use crate::mesh::io::{load_mesh, save_mesh};
use crate::mesh::{EdgeMarker, Mesh, MeshError};
use crate::problems::{by_name, Geometry, ProblemError, ProblemSpec};
use crate::solver::{assemble, dump_triplets, local_mass_residual, solve, SolverError};
use crate::vem::{Material, VemError};
use crate::vtk;

/// Extra Gauss points per edge rule in benchmark runs, enough to push
/// curved-geometry quadrature noise to rounding level.
pub const BENCH_OVERSAMPLE: usize = 10;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Study(#[from] StudyError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Material(#[from] VemError),
    #[error("reading config {path}: {source}")]
    Config {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("config region {0:?} is not an integer region id")]
    ConfigRegion(String),
    #[error("--bbox expects xmin,ymin,xmax,ymax with xmin < xmax and ymin < ymax")]
    BadBox,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Parser)]
#[command(
    name = "mvem",
    about = "Mixed virtual element Darcy solver on polygonal meshes with exactly curved edges"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate background grids and interface-cut meshes.
    Mesh {
        #[command(subcommand)]
        command: MeshCommand,
    },
    /// Solve one benchmark problem and export the fields.
    Solve(SolveArgs),
    /// Run a refinement study and write the error table as CSV.
    Convergence(ConvergenceArgs),
    /// Render a saved mesh file to VTK.
    Export(ExportArgs),
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Uniform quadrilateral grid on a bounding box.
    Gen(GenArgs),
    /// Background grid of a named problem, cut by its interface curves.
    Cut(CutArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    nx: usize,
    #[arg(long)]
    ny: usize,
    /// Bounding box as xmin,ymin,xmax,ymax.
    #[arg(long, default_value = "0,0,1,1")]
    bbox: String,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CutArgs {
    #[arg(long)]
    problem: String,
    /// Background resolution; defaults to the problem's coarsest level.
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long, value_enum, default_value_t = GeometryArg::Curved)]
    geometry: GeometryArg,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    problem: String,
    /// Polynomial degree; defaults to the problem's default order.
    #[arg(long)]
    order: Option<usize>,
    #[arg(long, value_enum, default_value_t = GeometryArg::Curved)]
    geometry: GeometryArg,
    /// Background resolution; defaults to the problem's coarsest level.
    #[arg(long)]
    nx: Option<usize>,
    /// Solve on a previously saved mesh instead of building one.
    #[arg(long, conflicts_with_all = ["nx", "geometry"])]
    mesh: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// JSON file with partial overrides (mu, permeability, oversample).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write the assembled saddle system triplets.
    #[arg(long)]
    dump_triplets: bool,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[arg(long)]
    problem: String,
    /// Polynomial degree; defaults to the problem's default order.
    #[arg(long)]
    order: Option<usize>,
    #[arg(long, value_enum, default_value_t = GeometryArg::Curved)]
    geometry: GeometryArg,
    /// Comma-separated resolutions; defaults to the problem's family.
    #[arg(long, value_delimiter = ',')]
    family: Vec<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// JSON file with partial overrides (mu, permeability, oversample).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    /// Saved mesh file to render.
    #[arg(long)]
    mesh: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum GeometryArg {
    Curved,
    Straight,
}

impl From<GeometryArg> for Geometry {
    fn from(g: GeometryArg) -> Self {
        match g {
            GeometryArg::Curved => Geometry::Curved,
            GeometryArg::Straight => Geometry::Straight,
        }
    }
}

/// Partial overrides applied on top of a built-in problem.
#[derive(Debug, Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    mu: Option<f64>,
    /// Isotropic permeability per region id.
    permeability: Option<BTreeMap<String, f64>>,
    /// Extra Gauss points per edge rule.
    oversample: Option<usize>,
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile, CliError> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|source| CliError::Config {
        path: path.to_path_buf(),
        source,
    })
}

fn apply_config(spec: &mut ProblemSpec, config: &ConfigFile) -> Result<usize, CliError> {
    if let Some(mu) = config.mu {
        for material in spec.materials.values_mut() {
            *material = Material::new(mu, material.perm)?;
        }
    }
    if let Some(perm) = &config.permeability {
        for (key, &k) in perm {
            let region: u32 = key
                .parse()
                .map_err(|_| CliError::ConfigRegion(key.clone()))?;
            let mu = spec
                .materials
                .get(&region)
                .map(|m| m.mu)
                .or(config.mu)
                .unwrap_or(1.0);
            spec.materials.insert(region, Material::isotropic(mu, k)?);
        }
    }
    Ok(config.oversample.unwrap_or(BENCH_OVERSAMPLE))
}

fn parse_bbox(text: &str) -> Result<[f64; 4], CliError> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::BadBox)?;
    let [xmin, ymin, xmax, ymax] = parts.try_into().map_err(|_| CliError::BadBox)?;
    if xmin < xmax && ymin < ymax {
        Ok([xmin, ymin, xmax, ymax])
    } else {
        Err(CliError::BadBox)
    }
}

fn write_mesh_outputs(mesh: &Mesh, dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    save_mesh(mesh, dir.join("mesh.json"))?;
    let mut vtk_out = BufWriter::new(File::create(dir.join("mesh.vtk"))?);
    vtk::write_mesh(mesh, &mut vtk_out)?;
    vtk_out.flush()?;
    println!(
        "mesh: {} cells, {} edges, {} vertices -> {}",
        mesh.n_cells(),
        mesh.n_edges(),
        mesh.vertices.len(),
        dir.join("mesh.json").display()
    );
    Ok(())
}

fn run_solve(args: &SolveArgs) -> Result<(), CliError> {
    let mut spec = by_name(&args.problem, args.order.unwrap_or(2))?;
    let config = load_config(args.config.as_deref())?;
    let oversample = apply_config(&mut spec, &config)?;
    let degree = args.order.unwrap_or(spec.default_degree);
    let mesh = match &args.mesh {
        Some(path) => load_mesh(path)?,
        None => {
            let n = args.nx.unwrap_or(spec.default_family[0]);
            spec.mesh(n, args.geometry.into())?
        }
    };
    let problem = spec.darcy();
    let assembly = assemble(&mesh, degree, &problem, oversample)?;
    let solution = solve(&assembly)?;

    std::fs::create_dir_all(&args.out)?;
    let vtk_path = args.out.join("solution.vtk");
    let mut out = BufWriter::new(File::create(&vtk_path)?);
    vtk::write_solution(&mesh, &assembly, &solution, &mut out)?;
    out.flush()?;
    if args.dump_triplets {
        let mut trip = BufWriter::new(File::create(args.out.join("triplets.txt"))?);
        dump_triplets(&assembly, &mut trip)?;
        trip.flush()?;
    }
    println!(
        "{} degree {}: {} cells, {} velocity + {} pressure dofs",
        spec.name,
        degree,
        mesh.n_cells(),
        assembly.dof_map.n_velocity,
        assembly.dof_map.n_pressure
    );
    println!(
        "residual {:.3e} after {} refinement(s), mass residual {:.3e} -> {}",
        solution.residual,
        solution.refinements,
        local_mass_residual(&assembly, &solution),
        vtk_path.display()
    );
    Ok(())
}

fn run_convergence(args: &ConvergenceArgs) -> Result<(), CliError> {
    let mut spec = by_name(&args.problem, args.order.unwrap_or(2))?;
    let config = load_config(args.config.as_deref())?;
    let oversample = apply_config(&mut spec, &config)?;
    let degree = args.order.unwrap_or(spec.default_degree);
    let family = if args.family.is_empty() {
        spec.default_family.clone()
    } else {
        args.family.clone()
    };
    let geometry: Geometry = args.geometry.into();
    let (table, failure) = run_study_partial(&spec, degree, geometry, &family, oversample);

    std::fs::create_dir_all(&args.out)?;
    let mode = spec.problem_label(geometry).replace(' ', "_");
    let csv_path = args.out.join(format!("{mode}_k{degree}.csv"));
    let mut out = BufWriter::new(File::create(&csv_path)?);
    table.write_csv(&mut out)?;
    out.flush()?;
    print!("{}", table.render());
    println!("csv -> {}", csv_path.display());
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

pub fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Mesh { command } => match command {
            MeshCommand::Gen(args) => {
                let bbox = parse_bbox(&args.bbox)?;
                let mesh = quad_grid(bbox, args.nx, args.ny, |_| EdgeMarker::Natural);
                write_mesh_outputs(&mesh, &args.out)
            }
            MeshCommand::Cut(args) => {
                let spec = by_name(&args.problem, 2)?;
                let n = args.nx.unwrap_or(spec.default_family[0]);
                let mesh = spec.mesh(n, args.geometry.into())?;
                write_mesh_outputs(&mesh, &args.out)
            }
        },
        Command::Solve(args) => run_solve(args),
        Command::Convergence(args) => run_convergence(args),
        Command::Export(args) => {
            let mesh = load_mesh(&args.mesh)?;
            std::fs::create_dir_all(&args.out)?;
            let path = args.out.join("mesh.vtk");
            let mut out = BufWriter::new(File::create(&path)?);
            vtk::write_mesh(&mesh, &mut out)?;
            out.flush()?;
            println!("vtk -> {}", path.display());
            Ok(())
        }
    }
}
