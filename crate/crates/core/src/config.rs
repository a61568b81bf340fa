//! Plain-text run configuration: one `section.key = value` per line.
//!
//! `#` starts a comment. Missing keys keep their defaults, unknown keys are
//! rejected. The defaults describe the reference experiment: a 100 mm square
//! plate, 10 mm thick, with a 2° notch to its centre, pulled apart by ±1 mm.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::material::{MaterialError, MaterialParams};
use crate::mesh::{MeshResolution, NotchEdge, NotchedPlateGeometry};
use crate::solver::{LinearSolverKind, PicardStrategy, SolverConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key '{key}' given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("invalid value for '{key}': {message}")]
    Invalid { key: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadConfig {
    /// Prescribed `u_y` on the `y = 0` side, mm.
    pub uy_low: f64,
    /// Prescribed `u_y` on the `y = L` side, mm.
    pub uy_high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub vtk: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SifConfig {
    pub r_lo: f64,
    pub r_hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MidlineConfig {
    pub n_samples: usize,
    pub r_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub geometry: NotchedPlateGeometry,
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub reference_density: f64,
    pub betas: Vec<f64>,
    pub load: LoadConfig,
    pub solver: SolverConfig,
    pub mesh: MeshResolution,
    pub output: OutputConfig,
    pub sif: SifConfig,
    pub midline: MidlineConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            geometry: NotchedPlateGeometry::default(),
            youngs_modulus: 1.0e4,
            poisson_ratio: 0.3,
            reference_density: 1.0,
            betas: vec![-30.0, -20.0, -10.0, 0.0, 10.0, 20.0, 30.0],
            load: LoadConfig { uy_low: -1.0, uy_high: 1.0 },
            solver: SolverConfig::default(),
            mesh: MeshResolution::default(),
            output: OutputConfig { dir: PathBuf::from("out"), vtk: false },
            sif: SifConfig { r_lo: 0.5, r_hi: 5.0 },
            midline: MidlineConfig { n_samples: 201, r_max: 10.0 },
        }
    }
}

impl RunConfig {
    /// Material at a given β.
    pub fn material(&self, beta: f64) -> Result<MaterialParams, ConfigError> {
        MaterialParams::new(self.youngs_modulus, self.poisson_ratio, beta)
            .and_then(|p| p.with_reference_density(self.reference_density))
            .map_err(|e| {
                let key = match &e {
                    MaterialError::InvalidParameter { name: "nu", .. } => "material.nu",
                    MaterialError::InvalidParameter { name: "rho0", .. } => "material.rho0",
                    _ => "material.E",
                };
                ConfigError::Invalid { key: key.into(), message: e.to_string() }
            })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key: &str, message: String| Err(ConfigError::Invalid { key: key.into(), message });
        self.geometry.validate().map_err(|e| ConfigError::Invalid { key: "geometry".into(), message: e.to_string() })?;
        self.material(0.0)?;
        for &b in &self.betas {
            if !b.is_finite() {
                return invalid("sweep.betas", format!("{b} is not finite"));
            }
        }
        if self.betas.is_empty() {
            return invalid("sweep.betas", "list is empty".into());
        }
        if !(self.load.uy_low.is_finite() && self.load.uy_high.is_finite()) {
            return invalid("load", "displacements must be finite".into());
        }
        self.solver.validate().map_err(|e| ConfigError::Invalid { key: "solver".into(), message: e.to_string() })?;
        self.mesh.validate().map_err(|e| ConfigError::Invalid { key: "mesh".into(), message: e.to_string() })?;
        if !(self.sif.r_lo > 0.0 && self.sif.r_hi > self.sif.r_lo) {
            return invalid("sif.r_lo", format!("window [{}, {}] must satisfy 0 < r_lo < r_hi", self.sif.r_lo, self.sif.r_hi));
        }
        if self.midline.n_samples < 2 {
            return invalid("midline.n_samples", "need at least 2".into());
        }
        if !(self.midline.r_max > 0.0 && self.midline.r_max <= self.geometry.ligament()) {
            return invalid("midline.r_max", format!("must lie in (0, {}]", self.geometry.ligament()));
        }
        if self.sif.r_hi > self.midline.r_max {
            return invalid("sif.r_hi", format!("exceeds midline.r_max = {}", self.midline.r_max));
        }
        Ok(())
    }

    /// Canonical text form; parsing it gives back an equal config.
    pub fn dump(&self) -> String {
        let g = &self.geometry;
        let s = &self.solver;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("geometry.side", g.side_length.to_string());
        put("geometry.thickness", g.thickness.to_string());
        put("geometry.angle_deg", g.notch_angle.to_string());
        put("geometry.depth", g.notch_depth.to_string());
        put("geometry.notch_edge", g.notch_edge.as_str().into());
        put("material.E", self.youngs_modulus.to_string());
        put("material.nu", self.poisson_ratio.to_string());
        put("material.rho0", self.reference_density.to_string());
        put("sweep.betas", self.betas.iter().map(f64::to_string).collect::<Vec<_>>().join(", "));
        put("load.uy_low", self.load.uy_low.to_string());
        put("load.uy_high", self.load.uy_high.to_string());
        put("solver.tol_rel", s.tol_rel.to_string());
        put("solver.max_picard", s.max_picard.to_string());
        put("solver.linear_solver", s.linear_solver.to_string());
        put("solver.cg_tol", s.cg_tol.to_string());
        put("solver.cg_max_iter", s.cg_max_iter.to_string());
        put("solver.small_grad_warn", s.small_grad_warn.to_string());
        put("solver.damping", s.damping.to_string());
        put("solver.strategy", s.strategy.to_string());
        put("mesh.nx", self.mesh.n_coarse[0].to_string());
        put("mesh.ny", self.mesh.n_coarse[1].to_string());
        put("mesh.nz", self.mesh.n_coarse[2].to_string());
        put("mesh.grading", self.mesh.grading_ratio.to_string());
        put("mesh.levels", self.mesh.tip_refine_levels.to_string());
        put("output.dir", self.output.dir.display().to_string());
        put("output.vtk", self.output.vtk.to_string());
        put("sif.r_lo", self.sif.r_lo.to_string());
        put("sif.r_hi", self.sif.r_hi.to_string());
        put("midline.n_samples", self.midline.n_samples.to_string());
        put("midline.r_max", self.midline.r_max.to_string());
        out
    }
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| ConfigError::Parse { line, message: format!("{key}: cannot parse '{v}': {e}") })
}

/// Parses configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut c = RunConfig::default();
    let mut seen: Vec<String> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ConfigError::Parse { line, message: format!("expected 'section.key = value', got '{content}'") })?;
        let key = key.trim();
        let v = value.trim();
        if seen.iter().any(|k| k == key) {
            return Err(ConfigError::DuplicateKey { line, key: key.into() });
        }
        seen.push(key.into());
        match key {
            "geometry.side" => c.geometry.side_length = parse_value(line, key, v)?,
            "geometry.thickness" => c.geometry.thickness = parse_value(line, key, v)?,
            "geometry.angle_deg" => c.geometry.notch_angle = parse_value(line, key, v)?,
            "geometry.depth" => c.geometry.notch_depth = parse_value(line, key, v)?,
            "geometry.notch_edge" => c.geometry.notch_edge = parse_value::<NotchEdge>(line, key, v)?,
            "material.E" => c.youngs_modulus = parse_value(line, key, v)?,
            "material.nu" => c.poisson_ratio = parse_value(line, key, v)?,
            "material.rho0" => c.reference_density = parse_value(line, key, v)?,
            "sweep.betas" => {
                c.betas = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_value::<f64>(line, key, s))
                    .collect::<Result<_, _>>()?
            }
            "load.uy_low" => c.load.uy_low = parse_value(line, key, v)?,
            "load.uy_high" => c.load.uy_high = parse_value(line, key, v)?,
            "solver.tol_rel" => c.solver.tol_rel = parse_value(line, key, v)?,
            "solver.max_picard" => c.solver.max_picard = parse_value(line, key, v)?,
            "solver.linear_solver" => c.solver.linear_solver = parse_value::<LinearSolverKind>(line, key, v)?,
            "solver.cg_tol" => c.solver.cg_tol = parse_value(line, key, v)?,
            "solver.cg_max_iter" => c.solver.cg_max_iter = parse_value(line, key, v)?,
            "solver.small_grad_warn" => c.solver.small_grad_warn = parse_value(line, key, v)?,
            "solver.damping" => c.solver.damping = parse_value(line, key, v)?,
            "solver.strategy" => c.solver.strategy = parse_value::<PicardStrategy>(line, key, v)?,
            "mesh.nx" => c.mesh.n_coarse[0] = parse_value(line, key, v)?,
            "mesh.ny" => c.mesh.n_coarse[1] = parse_value(line, key, v)?,
            "mesh.nz" => c.mesh.n_coarse[2] = parse_value(line, key, v)?,
            "mesh.grading" => c.mesh.grading_ratio = parse_value(line, key, v)?,
            "mesh.levels" => c.mesh.tip_refine_levels = parse_value(line, key, v)?,
            "output.dir" => c.output.dir = PathBuf::from(v),
            "output.vtk" => c.output.vtk = parse_value(line, key, v)?,
            "sif.r_lo" => c.sif.r_lo = parse_value(line, key, v)?,
            "sif.r_hi" => c.sif.r_hi = parse_value(line, key, v)?,
            "midline.n_samples" => c.midline.n_samples = parse_value(line, key, v)?,
            "midline.r_max" => c.midline.r_max = parse_value(line, key, v)?,
            _ => return Err(ConfigError::UnknownKey { line, key: key.into() }),
        }
    }
    c.validate()?;
    Ok(c)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.geometry.side_length, 100.0);
        assert_eq!(c.geometry.thickness, 10.0);
        assert_eq!(c.geometry.notch_angle, 2.0);
        assert_eq!(c.youngs_modulus, 1.0e4);
        assert_eq!(c.poisson_ratio, 0.3);
        assert_eq!((c.load.uy_low, c.load.uy_high), (-1.0, 1.0));
        assert_eq!(c.solver.tol_rel, 0.001);
        assert_eq!(c.solver.max_picard, 1000);
        assert_eq!(c.betas, vec![-30.0, -20.0, -10.0, 0.0, 10.0, 20.0, 30.0]);
    }

    #[test]
    fn rejects_bad_poisson_ratio_by_key() {
        match parse_config("material.nu = 0.6") {
            Err(ConfigError::Invalid { key, .. }) => assert_eq!(key, "material.nu"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reports_line_numbers() {
        match parse_config("# c\nmesh.nx = 4\nbogus.key = 1\n") {
            Err(ConfigError::UnknownKey { line: 3, key }) => assert_eq!(key, "bogus.key"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_config("mesh.nx 4"), Err(ConfigError::Parse { line: 1, .. })));
        assert!(matches!(parse_config("mesh.nx = four"), Err(ConfigError::Parse { line: 1, .. })));
        assert!(matches!(parse_config("mesh.nx = 4\nmesh.nx = 6"), Err(ConfigError::DuplicateKey { line: 2, .. })));
    }

    #[test]
    fn dump_round_trips() {
        let text = "geometry.notch_edge = max_x\nmaterial.E = 2.5e4\nsweep.betas = -7.5, 0, 12\n\
                    solver.linear_solver = direct\nsolver.strategy = plain\nsolver.damping = 0.5\n\
                    mesh.nx = 6\nmesh.levels = 3\noutput.dir = /tmp/x y\noutput.vtk = true\n\
                    sif.r_lo = 0.25\nmidline.n_samples = 51\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.betas, vec![-7.5, 0.0, 12.0]);
        assert_eq!(c.output.dir, PathBuf::from("/tmp/x y"));
        let again = parse_config(&c.dump()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.dump(), c.dump());
    }

    #[test]
    fn inline_comments_and_blank_lines() {
        let c = parse_config("\n  material.nu = 0.25   # softer\n\n").unwrap();
        assert_eq!(c.poisson_ratio, 0.25);
    }
}
