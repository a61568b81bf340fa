//! Finite-element solver for a v-notched plate made of a porous elastic
//! material whose moduli depend on the local volume change.

pub mod config;
pub mod fem;
pub mod material;
pub mod mesh;
pub mod postprocess;
pub mod solver;
pub mod sweep;
pub mod tensor;

pub use fem::{apply_dirichlet, assemble, mode_one_tension, Assembler, FemError, LoadSpec, SparseSystem};
pub use material::{MaterialError, MaterialParams};
pub use mesh::{generate_notched_plate, FacetTag, Mesh, MeshError, MeshResolution, NotchedPlateGeometry};
pub use postprocess::{estimate_sif, recover_fields, sample_midline, LineSample, RecoveredFields, SifEstimate};
pub use solver::{picard_solve, residual, solve_linear, DisplacementField, SolveReport, SolverConfig, SolverError};
pub use config::{parse_config, ConfigError, RunConfig};
pub use sweep::{run_sweep, SweepError, SweepRow, SweepSummary};
pub use tensor::SymTensor3;
