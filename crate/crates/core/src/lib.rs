//! Finite volume and nonconforming finite element discretizations of
//! `-div(A ∇u) = f` on 2D polytopal meshes, with the discrete functional
//! analysis toolkit used to check them: discrete Sobolev norms,
//! Poincaré and Sobolev ratio diagnostics, energy chains, consistency and
//! nonconformity defects, and convergence studies.

// Negated comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cr_fem;
pub mod discrete_space;
pub mod fields;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod nonlinear;
pub mod problem;
pub mod tpfa;

pub use cr_fem::{CrFunction, CrSolution, CrSpace};
pub use discrete_space::CellFunction;
pub use geometry::{Point2, Rect, Tensor2};
pub use linalg::{CgOptions, SparseMatrix};
pub use mesh::{CellPointRule, FamilyKind, Mesh, MeshFamily, RegularityMetrics};
pub use nonlinear::{NonlinearProblem, Scheme};
pub use problem::DiffusionProblem;
pub use tpfa::{TpfaSolution, Transmissivities};
