//! Picard fixed-point iteration around a sparse SPD linear solve.

pub mod cg;
pub mod cholesky;

use std::fmt;
use std::str::FromStr;

use log::{debug, info, warn};
use thiserror::Error;

use crate::fem::{reduce, Assembler, FemError, LoadSpec, ReducedSystem};
use crate::material::MaterialParams;
use crate::mesh::Mesh;
use crate::tensor::Mat3;

pub use cholesky::EnvelopeCholesky;

/// Nodal displacement vector, `3·node + component`, in mm.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DisplacementField(pub Vec<f64>);

impl DisplacementField {
    pub fn zeros(nodes: usize) -> Self {
        DisplacementField(vec![0.0; 3 * nodes])
    }

    pub fn node_count(&self) -> usize {
        self.0.len() / 3
    }

    pub fn at(&self, node: usize) -> [f64; 3] {
        [self.0[3 * node], self.0[3 * node + 1], self.0[3 * node + 2]]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearSolverKind {
    #[default]
    Cg,
    Direct,
}

impl LinearSolverKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LinearSolverKind::Cg => "cg",
            LinearSolverKind::Direct => "direct",
        }
    }
}

impl fmt::Display for LinearSolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LinearSolverKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cg" | "pcg" => Ok(LinearSolverKind::Cg),
            "direct" | "cholesky" => Ok(LinearSolverKind::Direct),
            other => Err(format!("unknown linear solver '{other}' (expected cg or direct)")),
        }
    }
}

/// Fraction of the current smallest stiffness factor that a β increase must keep.
const RAMP_KEEP: f64 = 0.7;
/// Relaxation cap per unit of the smallest factor; the frozen-moduli update
/// is locally stable only for `ω < 2 min(1 + β∇·u)`.
const OMEGA_PER_COEFF: f64 = 1.5;

/// Globalization of the Picard loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PicardStrategy {
    /// Fixed relaxation `damping`, β frozen at its target from the first step.
    Plain,
    #[default]
    /// β is ramped from 0 while keeping every factor `1 + β∇·uⁿ` above a
    /// fixed fraction of its current minimum, and the relaxation is capped in
    /// proportion to that minimum.
    Continuation,
}

impl PicardStrategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            PicardStrategy::Plain => "plain",
            PicardStrategy::Continuation => "continuation",
        }
    }
}

impl fmt::Display for PicardStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PicardStrategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plain" => Ok(PicardStrategy::Plain),
            "continuation" => Ok(PicardStrategy::Continuation),
            other => Err(format!("unknown Picard strategy '{other}' (expected plain or continuation)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub tol_rel: f64,
    pub max_picard: usize,
    pub linear_solver: LinearSolverKind,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub small_grad_warn: f64,
    /// Picard relaxation `uⁿ⁺¹ ← uⁿ + ω (ũ − uⁿ)`; 1 means plain iteration.
    pub damping: f64,
    pub strategy: PicardStrategy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_rel: 1e-3,
            max_picard: 1000,
            linear_solver: LinearSolverKind::Cg,
            cg_tol: 1e-10,
            cg_max_iter: 50_000,
            small_grad_warn: 0.1,
            damping: 1.0,
            strategy: PicardStrategy::Continuation,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |what: &str| Err(SolverError::InvalidConfig(what.to_string()));
        if !(self.tol_rel > 0.0 && self.tol_rel.is_finite()) {
            return bad("tol_rel must be positive");
        }
        if self.max_picard < 1 {
            return bad("max_picard must be at least 1");
        }
        if !(self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            return bad("cg_tol must lie in (0, 1)");
        }
        if self.cg_max_iter < 1 {
            return bad("cg_max_iter must be at least 1");
        }
        if !(self.small_grad_warn > 0.0) {
            return bad("small_grad_warn must be positive");
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad("damping must lie in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveReport {
    pub picard_iterations: usize,
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub max_grad_norm: f64,
    /// Minimum of `1 + β ∇·u` over all Gauss points of the last iterate.
    pub min_coeff: f64,
    /// Inner CG iterations per linear solve (empty for the direct solver).
    pub linear_iterations: Vec<usize>,
    /// β used to freeze the moduli at each iteration.
    pub beta_history: Vec<f64>,
    /// Relaxation factor applied at each iteration.
    pub damping_history: Vec<f64>,
}

impl SolveReport {
    pub fn last_residual(&self) -> Option<f64> {
        self.residual_history.last().copied()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearSolveError {
    #[error("factorization breakdown at DOF {index}: pivot {pivot:e} (matrix not positive definite)")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("CG found non-positive curvature {curvature:e} at iteration {iteration} (matrix indefinite)")]
    Indefinite { iteration: usize, curvature: f64 },
    #[error("CG stalled: relative residual {relative_residual:e} after {iterations} iterations")]
    CgNotConverged { iterations: usize, relative_residual: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Linear(#[from] LinearSolveError),
    #[error("Picard iteration did not converge in {} iterations (last residual {:e})", .report.picard_iterations, .report.last_residual().unwrap_or(f64::NAN))]
    NonConverged { report: Box<SolveReport> },
    #[error("strain limit violated after {} Picard iterations in element {element}, Gauss point {point}: 1 + beta*div(u) = {factor:e}", .report.picard_iterations)]
    StrainLimit { element: usize, point: usize, factor: f64, report: Box<SolveReport> },
}

impl SolverError {
    /// Partial report carried by iteration failures.
    pub fn report(&self) -> Option<&SolveReport> {
        match self {
            SolverError::NonConverged { report } | SolverError::StrainLimit { report, .. } => Some(report),
            _ => None,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖u_new − u_old‖ / max(‖u_new‖, 1e−300)`.
pub fn residual(u_new: &[f64], u_old: &[f64]) -> f64 {
    assert_eq!(u_new.len(), u_old.len());
    let diff = u_new.iter().zip(u_old).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    diff / norm(u_new).max(1e-300)
}

/// Solves on the free DOFs, optionally warm-starting CG from `guess`.
/// Returns the free-DOF solution and the CG iteration count.
pub fn solve_reduced(
    system: &ReducedSystem,
    config: &SolverConfig,
    guess: Option<&[f64]>,
) -> Result<(Vec<f64>, Option<usize>), LinearSolveError> {
    match config.linear_solver {
        LinearSolverKind::Cg => {
            let mut x = guess.map_or_else(|| vec![0.0; system.rhs.len()], <[f64]>::to_vec);
            let out = cg::solve(&system.matrix, &system.rhs, &mut x, config.cg_tol, config.cg_max_iter)?;
            debug!("cg: {} iterations, relative residual {:.3e}", out.iterations, out.relative_residual);
            Ok((x, Some(out.iterations)))
        }
        LinearSolverKind::Direct => {
            let chol = EnvelopeCholesky::factor(&system.matrix)?;
            debug!("cholesky: envelope of {} entries", chol.envelope_size());
            Ok((chol.solve(&system.rhs), None))
        }
    }
}

/// Solves a reduced system and returns the full displacement including prescribed values.
pub fn solve_linear(system: &ReducedSystem, config: &SolverConfig) -> Result<DisplacementField, SolverError> {
    let (x, _) = solve_reduced(system, config, None)?;
    Ok(DisplacementField(system.expand(&x)))
}

fn frobenius(m: &Mat3) -> f64 {
    m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Largest Frobenius norm of `∇u` over all Gauss points.
pub fn max_gradient_norm(assembler: &Assembler, mesh: &Mesh, u: &[f64]) -> Result<f64, FemError> {
    Ok(assembler.gradients(mesh, u)?.iter().flatten().map(frobenius).fold(0.0, f64::max))
}

/// Smallest factor and its location; `None` for an empty mesh.
fn min_factor(factors: &[[f64; 8]]) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for (e, pts) in factors.iter().enumerate() {
        for (q, &v) in pts.iter().enumerate() {
            // NaN counts as a violation
            if best.map_or(true, |b| !(v >= b.2)) {
                best = Some((e, q, v));
            }
        }
    }
    best
}

fn finish_report(
    report: &mut SolveReport,
    assembler: &Assembler,
    mesh: &Mesh,
    params: &MaterialParams,
    u: &[f64],
    config: &SolverConfig,
) -> Result<Option<(usize, usize, f64)>, FemError> {
    let factors = assembler.stiffness_factors(mesh, params, u)?;
    let worst = min_factor(&factors);
    report.min_coeff = worst.map_or(1.0, |w| w.2);
    report.max_grad_norm = max_gradient_norm(assembler, mesh, u)?;
    if report.max_grad_norm > config.small_grad_warn {
        warn!(
            "max |grad u| = {:.4e} exceeds the small-gradient threshold {}",
            report.max_grad_norm, config.small_grad_warn
        );
    }
    Ok(worst.filter(|w| !(w.2 > 0.0)))
}

/// Picard iteration: `u⁰` solves the β = 0 problem, then each step solves the
/// linear problem with moduli frozen at `1 + β ∇·uⁿ`.
pub fn picard_solve(
    mesh: &Mesh,
    params: &MaterialParams,
    loads: &LoadSpec,
    config: &SolverConfig,
) -> Result<(DisplacementField, SolveReport), SolverError> {
    let assembler = Assembler::new(mesh);
    picard_solve_with(&assembler, mesh, params, loads, config, None)
}

/// Largest `|b| ≤ |target|` (same sign as `target`) keeping
/// `1 + b ∇·u ≥ floor` at every point, never below `current`.
fn admissible_beta(divergence: &[[f64; 8]], target: f64, current: f64, floor: f64) -> f64 {
    let s = target.signum();
    let mut limit = target.abs();
    for &d in divergence.iter().flatten() {
        // only points where s·d < 0 lose stiffness margin as |b| grows
        let sd = s * d;
        if sd < 0.0 {
            limit = limit.min((1.0 - floor) / -sd);
        }
    }
    s * limit.max(current.abs())
}

/// As [`picard_solve`], reusing an assembler and optionally starting from a
/// given field instead of the β = 0 solution.
pub fn picard_solve_with(
    assembler: &Assembler,
    mesh: &Mesh,
    params: &MaterialParams,
    loads: &LoadSpec,
    config: &SolverConfig,
    start: Option<&DisplacementField>,
) -> Result<(DisplacementField, SolveReport), SolverError> {
    config.validate()?;
    params.validate().map_err(|e| SolverError::InvalidConfig(e.to_string()))?;
    let prescribed = loads.resolve_dirichlet(mesh)?;
    let mut report = SolveReport::default();

    let mut x = match start {
        Some(u0) => {
            if u0.0.len() != mesh.dof_count() {
                return Err(FemError::DisplacementLength { got: u0.0.len(), expected: mesh.dof_count() }.into());
            }
            prescribed.iter().zip(&u0.0).filter(|(p, _)| p.is_none()).map(|(_, &v)| v).collect()
        }
        None => {
            let sys = assembler.assemble_with_factors(mesh, params, None, loads)?;
            let red = reduce(&sys, prescribed.clone());
            let (x, its) = solve_reduced(&red, config, None)?;
            report.linear_iterations.extend(its);
            x
        }
    };
    let expand = |x: &[f64]| {
        let mut full: Vec<f64> = prescribed.iter().map(|p| p.unwrap_or(0.0)).collect();
        let mut k = 0;
        for (d, p) in prescribed.iter().enumerate() {
            if p.is_none() {
                full[d] = x[k];
                k += 1;
            }
        }
        full
    };
    let mut u = expand(&x);

    if params.beta == 0.0 && start.is_none() {
        report.picard_iterations = 1;
        report.residual_history.push(0.0);
        report.beta_history.push(0.0);
        report.damping_history.push(1.0);
        report.converged = true;
        info!("picard iter 1 residual 0.000e0 min_coeff 1 (beta = 0, linear)");
        finish_report(&mut report, assembler, mesh, params, &u, config)?;
        return Ok((DisplacementField(u), report));
    }

    let ramped = config.strategy == PicardStrategy::Continuation;
    let mut beta_eff = if ramped { 0.0 } else { params.beta };
    let unit = MaterialParams { beta: 1.0, ..*params };
    for n in 1..=config.max_picard {
        if ramped {
            let div: Vec<[f64; 8]> =
                assembler.stiffness_factors(mesh, &unit, &u)?.iter().map(|f| f.map(|v| v - 1.0)).collect();
            let c_now = div.iter().flatten().map(|d| 1.0 + beta_eff * d).fold(1.0, f64::min);
            beta_eff = admissible_beta(&div, params.beta, beta_eff, RAMP_KEEP * c_now.min(1.0));
        }
        let step_params = MaterialParams { beta: beta_eff, ..*params };
        let factors = assembler.stiffness_factors(mesh, &step_params, &u)?;
        if let Some((e, q, f)) = min_factor(&factors) {
            report.min_coeff = f;
            if !(f > 0.0) {
                report.max_grad_norm = max_gradient_norm(assembler, mesh, &u)?;
                return Err(SolverError::StrainLimit { element: e, point: q, factor: f, report: Box::new(report) });
            }
        }
        let omega = if ramped { config.damping.min(OMEGA_PER_COEFF * report.min_coeff) } else { config.damping };
        let sys = assembler.assemble_with_factors(mesh, &step_params, Some(&factors), loads)?;
        let red = reduce(&sys, prescribed.clone());
        let (mut x_new, its) = solve_reduced(&red, config, Some(&x))?;
        report.linear_iterations.extend(its);
        // measured on the undamped update so relaxation cannot shrink it
        let r = residual(&x_new, &x);
        if omega < 1.0 {
            for (xn, xo) in x_new.iter_mut().zip(&x) {
                *xn = xo + omega * (*xn - xo);
            }
        }
        report.picard_iterations = n;
        report.residual_history.push(r);
        report.beta_history.push(beta_eff);
        report.damping_history.push(omega);
        info!("picard iter {n} residual {r:.6e} min_coeff {:.6} beta {beta_eff:.6} omega {omega:.4}", report.min_coeff);
        x = x_new;
        u = expand(&x);
        if r <= config.tol_rel && beta_eff == params.beta {
            report.converged = true;
            break;
        }
    }

    if let Some((e, q, f)) = finish_report(&mut report, assembler, mesh, params, &u, config)? {
        report.converged = false;
        return Err(SolverError::StrainLimit { element: e, point: q, factor: f, report: Box::new(report) });
    }
    if !report.converged {
        return Err(SolverError::NonConverged { report: Box::new(report) });
    }
    Ok((DisplacementField(u), report))
}
