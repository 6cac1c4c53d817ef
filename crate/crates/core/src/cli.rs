//! Command-line front end.
//!
//! Exit codes: 0 success, 2 invalid arguments or configuration, 3 I/O
//! failure, 4 solver failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{format_table, run_study, write_report, StudyConfig};
use crate::assembly::{assemble_forms, FeSpace, MassPlacement};
use crate::eigsolve::{solve_generalized, EigenOptions, InnerSolver};
use crate::geometry::SmoothDomain;
use crate::mesh::{curve_mesh, generate_star_mesh, read_msh, write_msh};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

/// Environment variable overriding `--threads`.
pub const THREADS_ENV: &str = "VENTCEL_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ventcel", version, about = "Curved finite elements for the Ventcel eigenvalue problem")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a mesh and write it as MSH 4.1.
    Mesh(MeshArgs),
    /// Solve the eigenproblem on one mesh.
    Solve(SolveArgs),
    /// Run a multi-level convergence study from a config file.
    Study(StudyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    Disk,
    Flower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlacementArg {
    Volume,
    Boundary,
}

impl From<PlacementArg> for MassPlacement {
    fn from(p: PlacementArg) -> Self {
        match p {
            PlacementArg::Volume => MassPlacement::Volume,
            PlacementArg::Boundary => MassPlacement::Boundary,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DomainArgs {
    #[arg(long, value_enum, default_value = "disk")]
    pub domain: DomainArg,
    #[arg(long, default_value_t = 0.3, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.4, allow_hyphen_values = true)]
    pub beta: f64,
}

impl DomainArgs {
    fn build(&self) -> Result<SmoothDomain> {
        match self.domain {
            DomainArg::Disk => Ok(SmoothDomain::unit_disk()),
            DomainArg::Flower => SmoothDomain::flower(self.alpha, self.beta),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct MeshArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    /// Number of boundary edges (even, at least 8).
    #[arg(long, default_value_t = 20)]
    pub nb: usize,
    /// Geometric order used for the reported area and perimeter.
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    #[arg(long, default_value = "mesh.msh")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// MSH 4.1 mesh file.
    pub mesh: PathBuf,
    #[command(flatten)]
    pub domain: DomainArgs,
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    #[arg(long, default_value_t = 1)]
    pub degree: usize,
    #[arg(long, value_enum, default_value = "boundary")]
    pub placement: PlacementArg,
    #[arg(long, default_value_t = 12)]
    pub neig: usize,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub shift: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// Inner solver: cholesky, cg or dense.
    #[arg(long, default_value = "cholesky")]
    pub inner: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write A.mtx, M.mtx and the individual forms into this directory.
    #[arg(long)]
    pub dump_matrices: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StudyArgs {
    /// Study configuration (`key = value` lines).
    pub config: PathBuf,
    /// Output directory; overrides the `output` key.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => EXIT_IO,
        Error::NotConverged { .. } | Error::InnerSolveFailure(_) | Error::PartialReport { .. } => EXIT_SOLVER,
        _ => EXIT_USAGE,
    }
}

pub fn cmd_mesh(args: &MeshArgs, out: &mut dyn Write) -> Result<()> {
    let dom = args.domain.build()?;
    let mesh = generate_star_mesh(&dom, args.nb)?;
    let curved = curve_mesh(&mesh, &dom, args.order)?;
    write_msh(&mesh, &args.out)?;
    writeln!(
        out,
        "wrote {}: h = {:.6e}, {} vertices, {} triangles, {} boundary edges, order {} area {:.12} perimeter {:.12}",
        args.out.display(),
        mesh.h,
        mesh.n_vertices(),
        mesh.n_triangles(),
        mesh.boundary_edges.len(),
        args.order,
        curved.area()?,
        curved.boundary_length()?
    )?;
    Ok(())
}

pub fn cmd_solve(args: &SolveArgs, out: &mut dyn Write) -> Result<()> {
    let dom = args.domain.build()?;
    let mesh = read_msh(&args.mesh, &dom)?;
    let curved = curve_mesh(&mesh, &dom, args.order)?;
    let space = FeSpace::new(Arc::new(curved), args.degree)?;
    let forms = assemble_forms(&space)?;
    let a = forms.a();
    let m = forms.m(args.placement.into());
    if let Some(dir) = &args.dump_matrices {
        std::fs::create_dir_all(dir)?;
        a.write_matrix_market(dir.join("A.mtx"))?;
        m.write_matrix_market(dir.join("M.mtx"))?;
        forms.volume_stiffness.write_matrix_market(dir.join("volume_stiffness.mtx"))?;
        forms.boundary_stiffness.write_matrix_market(dir.join("boundary_stiffness.mtx"))?;
        forms.volume_mass.write_matrix_market(dir.join("volume_mass.mtx"))?;
        forms.boundary_mass.write_matrix_market(dir.join("boundary_mass.mtx"))?;
    }
    let opts = EigenOptions {
        n_eig: args.neig,
        shift: args.shift,
        tol: args.tol,
        max_iter: args.max_iter,
        seed: args.seed,
        inner: InnerSolver::parse(&args.inner)?,
        krylov_dim: None,
    };
    let res = solve_generalized(&a, &m, &opts)?;
    writeln!(
        out,
        "# {} dofs, h = {:.6e}, {} operator applications",
        space.n_dofs(),
        space.mesh().h(),
        res.iterations
    )?;
    writeln!(out, "{:>4} {:>22} {:>12}", "j", "lambda", "residual")?;
    for (j, (l, r)) in res.values.iter().zip(&res.residuals).enumerate() {
        writeln!(out, "{:>4} {:>22.15} {:>12.3e}", j + 1, l, r)?;
    }
    Ok(())
}

pub fn cmd_study(args: &StudyArgs, out: &mut dyn Write) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg = StudyConfig::parse(&text)?;
    if let Some(o) = &args.output {
        cfg.output = Some(o.clone());
    }
    let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("study_output"));
    match run_study(&cfg) {
        Ok(report) => {
            write_report(&report, &dir)?;
            write!(out, "{}", format_table(&report))?;
            writeln!(out, "results written to {}", dir.display())?;
            Ok(())
        }
        Err(Error::PartialReport { level, source, report }) => {
            write_report(&report, &dir)?;
            write!(out, "{}", format_table(&report))?;
            Err(Error::PartialReport { level, source, report })
        }
        Err(e) => Err(e),
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::BadParameter(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        Err(_) => Ok(flag),
    }
}

/// Parse `args`, run the command, and return the process exit code.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    let result = thread_count(cli.threads).and_then(|threads| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads.filter(|n| *n > 0) {
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| Error::BadParameter(format!("cannot start the worker pool: {e}")))?;
        pool.install(|| match &cli.command {
            Command::Mesh(a) => cmd_mesh(a, out),
            Command::Solve(a) => cmd_solve(a, out),
            Command::Study(a) => cmd_study(a, out),
        })
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
