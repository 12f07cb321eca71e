//! Fixtures shared by the criterion benches.

use dfalab::harness::catalog;
use dfalab::{DiffusionProblem, Mesh, MeshFamily};

/// Levels benchmarked for every scheme; level `l` has `2^(l+1)` cells per side.
pub const LEVELS: [u32; 3] = [3, 4, 5];

pub fn problem(name: &str) -> DiffusionProblem {
    catalog::linear_problem(name).expect("catalog problem")
}

pub fn quad_mesh(level: u32) -> Mesh {
    MeshFamily::quad(2, 2, dfalab::Rect::UNIT).refine(level).expect("quad family")
}

pub fn tri_mesh(level: u32) -> Mesh {
    MeshFamily::triangle(2, 2, dfalab::Rect::UNIT).refine(level).expect("triangle family")
}
