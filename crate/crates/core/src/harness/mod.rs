//! Manufactured-problem catalog, convergence studies, diagnostic sampling
//! campaigns and report emission.

pub mod catalog;
pub mod diagnostics;
mod eoc;
mod report;
pub mod study;

use thiserror::Error;

use crate::cr_fem::CrError;
use crate::discrete_space::SpaceError;
use crate::mesh::MeshError;
use crate::nonlinear::NonlinearError;
use crate::tpfa::TpfaError;

pub use catalog::{linear_problem, nonlinear_problem, self_check, SelfCheck, LINEAR_NAMES, NONLINEAR_NAMES};
pub use eoc::eoc;
pub use report::{write_csv, CSV_HEADER};
pub use study::{run_convergence_study, ConvergenceReport, LevelRecord, StudyConfig};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown problem `{name}` (available: {available})")]
    UnknownProblem { name: String, available: String },
    #[error("catalog self-check failed for `{problem}`: residual {residual:e} at ({x}, {y}) exceeds {tolerance:e}")]
    SelfCheck { problem: String, residual: f64, x: f64, y: f64, tolerance: f64 },
    #[error("EOC needs at least two levels, got {0}")]
    TooFewLevels(usize),
    #[error("EOC inputs differ in length: {errors} errors, {hs} mesh sizes")]
    LengthMismatch { errors: usize, hs: usize },
    #[error("error at level index {index} is {value}; a nonpositive error means the scheme is exact to machine precision and has no rate")]
    NonPositiveError { index: usize, value: f64 },
    #[error("mesh sizes must strictly decrease (index {index})")]
    NotRefining { index: usize },
    #[error("invalid level range {min}..{max}")]
    InvalidLevels { min: u32, max: u32 },
    #[error("{scheme} cannot be run on a {family} family")]
    IncompatibleFamily { scheme: &'static str, family: &'static str },
    #[error("problem `{0}` has no exact solution and a reference solution is only available for TPFA on quad families")]
    NoReference(String),
    #[error("reference level {reference} must exceed the finest study level {finest} by at least 2")]
    ReferenceTooCoarse { reference: u32, finest: u32 },
    #[error("failed to set up worker threads: {0}")]
    Threads(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Tpfa(#[from] TpfaError),
    #[error(transparent)]
    Cr(#[from] CrError),
    #[error(transparent)]
    Nonlinear(#[from] NonlinearError),
}

/// Runs `f` on a rayon pool capped by `DFALAB_THREADS` when set.
pub fn with_thread_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T, HarnessError> {
    match std::env::var("DFALAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        Some(n) if n > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| HarnessError::Threads(e.to_string()))?;
            Ok(pool.install(f))
        }
        _ => Ok(f()),
    }
}
