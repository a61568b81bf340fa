//! β-sweep driver: mesh once, then solve, recover, sample and fit K_I per β.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::fem::{mode_one_tension, Assembler, LoadSpec};
use crate::mesh::{generate_notched_plate, midline_points, Mesh, MeshError, MidlinePoint};
use crate::postprocess::vtk::export_vtk;
use crate::postprocess::{estimate_sif, export_csv, recover_fields, sample_midline, LineSample, PostprocessError};
use crate::solver::{picard_solve_with, DisplacementField, SolveReport, SolverError};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("mesh generation failed: {0}")]
    Mesh(#[from] MeshError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// Outcome of one β.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Converged,
    NonConverged,
    StrainLimit,
    /// Linear solver breakdown or a postprocessing error.
    Failed,
}

impl RowStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RowStatus::Converged => "converged",
            RowStatus::NonConverged => "non_converged",
            RowStatus::StrainLimit => "strain_limit",
            RowStatus::Failed => "failed",
        }
    }

    /// Process exit status for a run ending in this state.
    pub fn exit_code(&self) -> i32 {
        match self {
            RowStatus::Converged => 0,
            RowStatus::NonConverged | RowStatus::Failed => 3,
            RowStatus::StrainLimit => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub beta: f64,
    pub status: RowStatus,
    pub picard_iterations: usize,
    pub final_residual: f64,
    pub tip_eps22: f64,
    pub tip_t22: f64,
    pub k_i: f64,
    pub tip_energy: f64,
    /// Index into the midline samples where `W` peaks.
    pub argmax_energy: Option<usize>,
    pub max_grad_norm: f64,
    pub min_coeff: f64,
    pub message: Option<String>,
}

impl SweepRow {
    fn failed(beta: f64, status: RowStatus, report: Option<&SolveReport>, message: String) -> Self {
        SweepRow {
            beta,
            status,
            picard_iterations: report.map_or(0, |r| r.picard_iterations),
            final_residual: report.and_then(SolveReport::last_residual).unwrap_or(f64::NAN),
            tip_eps22: f64::NAN,
            tip_t22: f64::NAN,
            k_i: f64::NAN,
            tip_energy: f64::NAN,
            argmax_energy: None,
            max_grad_norm: report.map_or(f64::NAN, |r| r.max_grad_norm),
            min_coeff: report.map_or(f64::NAN, |r| r.min_coeff),
            message: Some(message),
        }
    }

    pub fn converged(&self) -> bool {
        self.status == RowStatus::Converged
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
}

pub const SUMMARY_HEADER: &str = "beta,status,converged,picard_iterations,final_residual,tip_eps22,tip_T22,K_I,tip_W,max_grad_norm,min_stiffness_factor";

impl SweepSummary {
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(SUMMARY_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                r.beta,
                r.status.as_str(),
                u8::from(r.converged()),
                r.picard_iterations,
                r.final_residual,
                r.tip_eps22,
                r.tip_t22,
                r.k_i,
                r.tip_energy,
                r.max_grad_norm,
                r.min_coeff
            );
        }
        s
    }

    /// Exit status of the first failing row, 0 if all converged.
    pub fn exit_code(&self) -> i32 {
        self.rows.iter().map(|r| r.status.exit_code()).find(|&c| c != 0).unwrap_or(0)
    }
}

/// Everything shared by the β entries of one sweep.
pub struct Prepared {
    pub mesh: Mesh,
    pub assembler: Assembler,
    pub loads: LoadSpec,
    pub midline: Vec<MidlinePoint>,
}

impl Prepared {
    pub fn new(config: &RunConfig) -> Result<Self, SweepError> {
        config.validate()?;
        let mesh = generate_notched_plate(&config.geometry, &config.mesh)?;
        let assembler = Assembler::new(&mesh);
        let loads = mode_one_tension(&mesh, &config.geometry, config.load.uy_low, config.load.uy_high);
        let midline = midline_points(&config.geometry, config.midline.n_samples, config.midline.r_max)?;
        Ok(Prepared { mesh, assembler, loads, midline })
    }
}

/// Full result for one β.
#[derive(Debug, Clone)]
pub struct BetaResult {
    pub row: SweepRow,
    pub displacement: Option<DisplacementField>,
    pub line: Option<LineSample>,
}

/// File name stem used for per-β outputs.
pub fn beta_label(beta: f64) -> String {
    format!("{beta}")
}

/// Solves and postprocesses one β without writing anything.
pub fn solve_beta(prep: &Prepared, config: &RunConfig, beta: f64) -> BetaResult {
    let params = match config.material(beta) {
        Ok(p) => p,
        Err(e) => return BetaResult { row: SweepRow::failed(beta, RowStatus::Failed, None, e.to_string()), displacement: None, line: None },
    };
    let (u, report) = match picard_solve_with(&prep.assembler, &prep.mesh, &params, &prep.loads, &config.solver, None) {
        Ok(ok) => ok,
        Err(e) => {
            let status = match e {
                SolverError::NonConverged { .. } => RowStatus::NonConverged,
                SolverError::StrainLimit { .. } => RowStatus::StrainLimit,
                _ => RowStatus::Failed,
            };
            log::warn!("beta {beta}: {e}");
            return BetaResult { row: SweepRow::failed(beta, status, e.report(), e.to_string()), displacement: None, line: None };
        }
    };
    let post = || -> Result<(LineSample, f64), PostprocessError> {
        let fields = recover_fields(&prep.mesh, &u, &params)?;
        let line = sample_midline(&fields, &prep.mesh, &prep.midline)?;
        let k = estimate_sif(&line, (config.sif.r_lo, config.sif.r_hi))?.k_i;
        Ok((line, k))
    };
    match post() {
        Ok((line, k_i)) => {
            let tip = line.tip().copied().expect("midline has at least two samples");
            let argmax = line
                .rows
                .iter()
                .enumerate()
                .fold(None, |best: Option<(usize, f64)>, (i, r)| match best {
                    Some((_, w)) if w >= r.energy => best,
                    _ => Some((i, r.energy)),
                })
                .map(|(i, _)| i);
            let row = SweepRow {
                beta,
                status: RowStatus::Converged,
                picard_iterations: report.picard_iterations,
                final_residual: report.last_residual().unwrap_or(0.0),
                tip_eps22: tip.eps22,
                tip_t22: tip.t22,
                k_i,
                tip_energy: tip.energy,
                argmax_energy: argmax,
                max_grad_norm: report.max_grad_norm,
                min_coeff: report.min_coeff,
                message: None,
            };
            BetaResult { row, displacement: Some(u), line: Some(line) }
        }
        Err(e) => {
            log::warn!("beta {beta}: postprocessing failed: {e}");
            let mut row = SweepRow::failed(beta, RowStatus::Failed, Some(&report), e.to_string());
            row.picard_iterations = report.picard_iterations;
            BetaResult { row, displacement: Some(u), line: None }
        }
    }
}

fn write_outputs(prep: &Prepared, config: &RunConfig, dir: &Path, result: &BetaResult) -> Result<(), SweepError> {
    let label = beta_label(result.row.beta);
    if let Some(line) = &result.line {
        let path = dir.join(format!("line_beta_{label}.csv"));
        export_csv(line, &path).map_err(|e| io_error(&path, e))?;
    }
    if config.output.vtk {
        if let Some(u) = &result.displacement {
            let path = dir.join(format!("solution_beta_{label}.vtk"));
            let params = config.material(result.row.beta)?;
            let fields = recover_fields(&prep.mesh, u, &params);
            match fields {
                Ok(f) => export_vtk(&prep.mesh, &f, u, &path).map_err(|e| io_error(&path, e))?,
                Err(e) => log::warn!("beta {label}: no VTK written: {e}"),
            }
        }
    }
    Ok(())
}

fn io_error(path: &Path, e: PostprocessError) -> SweepError {
    let source = match e {
        PostprocessError::Io(src) => src,
        other => io::Error::other(other.to_string()),
    };
    SweepError::Io { path: path.to_path_buf(), source }
}

/// Run metadata: the effective configuration and the modelling assumptions
/// the outputs depend on.
pub fn run_info(config: &RunConfig) -> String {
    let mut s = String::new();
    s.push_str("# effective configuration\n");
    s.push_str(&config.dump());
    s.push_str("# assumptions\n");
    s.push_str("# loaded sides: u_y prescribed; u_x and u_z left free\n");
    s.push_str("# rigid-body modes: mid-thickness pins, u_x = u_z = 0 at two mirror nodes on the back edge, u_z = 0 at mid-ligament\n");
    s.push_str(&format!("# picard strategy: {}\n", config.solver.strategy));
    s
}

/// Runs every β in the config and writes `summary.csv`, `line_beta_<β>.csv`,
/// optional VTK files and `run_info.txt` to the output directory.
pub fn run_sweep(config: &RunConfig) -> Result<SweepSummary, SweepError> {
    let prep = Prepared::new(config)?;
    let dir = &config.output.dir;
    fs::create_dir_all(dir).map_err(|source| SweepError::Io { path: dir.clone(), source })?;
    log::info!(
        "mesh: {} nodes, {} elements; sweeping {} beta values",
        prep.mesh.node_count(),
        prep.mesh.element_count(),
        config.betas.len()
    );
    let rows = config
        .betas
        .par_iter()
        .map(|&beta| {
            let result = solve_beta(&prep, config, beta);
            write_outputs(&prep, config, dir, &result)?;
            log::info!("beta {beta}: {}", result.row.status.as_str());
            Ok(result.row)
        })
        .collect::<Result<Vec<_>, SweepError>>()?;
    let summary = SweepSummary { rows };
    write_file(&dir.join("summary.csv"), &summary.to_csv())?;
    write_file(&dir.join("run_info.txt"), &run_info(config))?;
    Ok(summary)
}

fn write_file(path: &Path, text: &str) -> Result<(), SweepError> {
    fs::write(path, text).map_err(|source| SweepError::Io { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(status: RowStatus) -> SweepRow {
        let mut r = SweepRow::failed(1.5, status, None, String::new());
        r.message = None;
        r
    }

    #[test]
    fn exit_code_takes_first_failure() {
        let s = SweepSummary { rows: vec![row(RowStatus::Converged), row(RowStatus::StrainLimit), row(RowStatus::NonConverged)] };
        assert_eq!(s.exit_code(), 4);
        let s = SweepSummary { rows: vec![row(RowStatus::Converged)] };
        assert_eq!(s.exit_code(), 0);
    }

    #[test]
    fn csv_layout() {
        let s = SweepSummary { rows: vec![row(RowStatus::NonConverged)] };
        let text = s.to_csv();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SUMMARY_HEADER);
        assert!(lines[1].starts_with("1.5,non_converged,0,0,NaN,"));
        assert_eq!(lines[1].split(',').count(), SUMMARY_HEADER.split(',').count());
    }

    #[test]
    fn labels() {
        assert_eq!(beta_label(-30.0), "-30");
        assert_eq!(beta_label(0.5), "0.5");
    }
}
