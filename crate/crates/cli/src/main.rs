//! `porocrack` command-line driver.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use porocrack::config::{load_config, RunConfig};
use porocrack::mesh::{generate_notched_plate, mesh_quality};
use porocrack::postprocess::vtk::export_mesh_vtk;
use porocrack::solver::LinearSolverKind;
use porocrack::sweep::{run_sweep, SweepError, SweepSummary};

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "porocrack", version, about = "V-notched plate solver for the density-dependent elastic model")]
struct Cli {
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the mesh, print a quality report and write mesh.vtk.
    Mesh(Common),
    /// Solve a single β.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        beta: f64,
    },
    /// Run the β sweep from the configuration.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file (`section.key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Linear solver; overrides `solver.linear_solver`.
    #[arg(long, value_parser = ["cg", "direct"])]
    solver: Option<String>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    dump_config: bool,
}

impl Common {
    fn load(&self) -> Result<RunConfig, String> {
        let mut config = match &self.config {
            Some(path) => load_config(path).map_err(|e| format!("{}: {e}", path.display()))?,
            None => RunConfig::default(),
        };
        if let Some(dir) = &self.out {
            config.output.dir = dir.clone();
        }
        if let Some(s) = &self.solver {
            config.solver.linear_solver = s.parse::<LinearSolverKind>()?;
        }
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }
}

fn init_logging(quiet: bool) {
    let level = if quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();
}

/// Caps the worker pool from `POROCRACK_THREADS` (unset or 0 means automatic).
fn init_threads() -> Result<(), String> {
    let n = match std::env::var("POROCRACK_THREADS") {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| format!("POROCRACK_THREADS must be a non-negative integer, got '{v}'"))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn print_summary(summary: &SweepSummary) {
    println!("{:>8} {:>14} {:>6} {:>14} {:>14} {:>14} {:>14}", "beta", "status", "iters", "tip_eps22", "tip_T22", "K_I", "tip_W");
    for r in &summary.rows {
        println!(
            "{:>8} {:>14} {:>6} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}",
            r.beta,
            r.status.as_str(),
            r.picard_iterations,
            r.tip_eps22,
            r.tip_t22,
            r.k_i,
            r.tip_energy
        );
        if let Some(m) = &r.message {
            println!("         {m}");
        }
    }
}

fn run_mesh(config: &RunConfig, quiet: bool) -> ExitCode {
    let mesh = match generate_notched_plate(&config.geometry, &config.mesh) {
        Ok(m) => m,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let dir: &Path = &config.output.dir;
    let path = dir.join("mesh.vtk");
    if let Err(e) = std::fs::create_dir_all(dir).map_err(|e| e.to_string()).and_then(|_| export_mesh_vtk(&mesh, &path).map_err(|e| e.to_string())) {
        error!("cannot write {}: {e}", path.display());
        return ExitCode::from(EXIT_IO);
    }
    if !quiet {
        println!("{}", mesh_quality(&mesh));
        println!("wrote {}", path.display());
    }
    ExitCode::SUCCESS
}

fn run(config: &RunConfig, quiet: bool) -> ExitCode {
    match run_sweep(config) {
        Ok(summary) => {
            if !quiet {
                print_summary(&summary);
            }
            ExitCode::from(summary.exit_code() as u8)
        }
        Err(e @ (SweepError::Config(_) | SweepError::Mesh(_))) => {
            error!("{e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e @ SweepError::Io { .. }) => {
            error!("{e}");
            ExitCode::from(EXIT_IO)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.quiet);
    if let Err(e) = init_threads() {
        error!("{e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let (common, beta) = match &cli.command {
        Command::Mesh(c) | Command::Sweep(c) => (c, None),
        Command::Solve { common, beta } => (common, Some(*beta)),
    };
    let mut config = match common.load() {
        Ok(c) => c,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(b) = beta {
        if !b.is_finite() {
            error!("--beta must be finite");
            return ExitCode::from(EXIT_CONFIG);
        }
        config.betas = vec![b];
    }
    if common.dump_config {
        print!("{}", config.dump());
        return ExitCode::SUCCESS;
    }
    match cli.command {
        Command::Mesh(_) => run_mesh(&config, cli.quiet),
        Command::Solve { .. } | Command::Sweep(_) => run(&config, cli.quiet),
    }
}
