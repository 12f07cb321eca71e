//! Nonconforming Crouzeix–Raviart P¹ elements on triangulations.
//!
//! Unknowns live at edge midpoints and vanish on boundary edges. Inside a
//! triangle the function is affine; the basis function attached to the edge
//! opposite vertex `i` is `φ_i = 1 - 2λ_i` with `λ_i` the barycentric
//! coordinate of that vertex. Local edges are always listed in this
//! opposite-vertex order.
//!
//! Stiffness and load use one-point centroid quadrature
//! (`φ_σ(x̄_K) = 1/3`); `L²` norms of piecewise-affine functions use the
//! edge-midpoint rule, which is exact for quadratics.

use serde::Serialize;
use thiserror::Error;

use crate::discrete_space::{bounding_box, CellFunction, RandomKind};
use crate::fields::{white_noise, RandomSineField};
use crate::geometry::{Point2, Tensor2};
use crate::linalg::{cg_solve, CgOptions, LinalgError, SparseMatrix, TripletBuilder};
use crate::mesh::quadrature::{gauss2_edge, integrate_triangle};
use crate::mesh::Mesh;
use crate::problem::{DiffusionProblem, EnergyChain};

#[derive(Debug, Error, PartialEq)]
pub enum CrError {
    #[error("cell {cell} has {count} vertices; Crouzeix-Raviart elements need a triangulation")]
    NotTriangular { cell: usize, count: usize },
    #[error("triangle {cell} is degenerate (area {area:e})")]
    Degenerate { cell: usize, area: f64 },
    #[error("boundary edge {edge} carries nonzero value {value}")]
    BoundaryValue { edge: usize, value: f64 },
    #[error("expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// The discrete space `Y_T` on a triangulation.
#[derive(Debug, Clone)]
pub struct CrSpace<'m> {
    mesh: &'m Mesh,
    dof_of_edge: Vec<Option<usize>>,
    edge_of_dof: Vec<usize>,
    local_edges: Vec<[usize; 3]>,
    basis_grads: Vec<[Point2; 3]>,
    centroids: Vec<Point2>,
}

impl<'m> CrSpace<'m> {
    pub fn new(mesh: &'m Mesh) -> Result<Self, CrError> {
        let mut local_edges = Vec::with_capacity(mesh.num_cells());
        let mut basis_grads = Vec::with_capacity(mesh.num_cells());
        let mut centroids = Vec::with_capacity(mesh.num_cells());
        for k in 0..mesh.num_cells() {
            let faces = mesh.cell_faces(k);
            if faces.len() != 3 {
                return Err(CrError::NotTriangular { cell: k, count: faces.len() });
            }
            let area = mesh.cell_measure(k);
            let diam = mesh.cell_diameter(k);
            if area <= 1e-14 * diam * diam {
                return Err(CrError::Degenerate { cell: k, area });
            }
            let v: Vec<Point2> = mesh.cell_vertices(k).collect();
            // Mesh face i joins vertices i and i+1, so it is opposite vertex i+2.
            local_edges.push([faces[1], faces[2], faces[0]]);
            let grads = [0, 1, 2].map(|i| {
                let e = v[(i + 2) % 3] - v[(i + 1) % 3];
                let grad_lambda = (1.0 / (2.0 * area)) * Point2::new(-e.y, e.x);
                -2.0 * grad_lambda
            });
            basis_grads.push(grads);
            centroids.push(mesh.cell_centroid(k));
        }
        let mut dof_of_edge = vec![None; mesh.num_faces()];
        let mut edge_of_dof = Vec::new();
        for (f, face) in mesh.faces().iter().enumerate() {
            if !face.is_boundary() {
                dof_of_edge[f] = Some(edge_of_dof.len());
                edge_of_dof.push(f);
            }
        }
        Ok(Self { mesh, dof_of_edge, edge_of_dof, local_edges, basis_grads, centroids })
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn num_dofs(&self) -> usize {
        self.edge_of_dof.len()
    }

    pub fn dof_of_edge(&self, edge: usize) -> Option<usize> {
        self.dof_of_edge[edge]
    }

    pub fn edge_of_dof(&self, dof: usize) -> usize {
        self.edge_of_dof[dof]
    }

    /// Edges of triangle `k`, edge `i` opposite local vertex `i`.
    pub fn local_edges(&self, k: usize) -> [usize; 3] {
        self.local_edges[k]
    }

    /// Gradients of the three local basis functions of triangle `k`.
    pub fn basis_gradients(&self, k: usize) -> [Point2; 3] {
        self.basis_grads[k]
    }

    pub fn centroid(&self, k: usize) -> Point2 {
        self.centroids[k]
    }

    pub fn midpoint(&self, edge: usize) -> Point2 {
        self.mesh.face(edge).midpoint
    }
}

/// A piecewise-affine function given by its edge-midpoint values.
#[derive(Debug, Clone)]
pub struct CrFunction<'a> {
    space: &'a CrSpace<'a>,
    values: Vec<f64>,
}

impl<'a> CrFunction<'a> {
    /// Element of `Y_T` from one value per mesh edge; boundary values must be zero.
    pub fn from_edge_values(space: &'a CrSpace<'a>, values: Vec<f64>) -> Result<Self, CrError> {
        let n = space.mesh.num_faces();
        if values.len() != n {
            return Err(CrError::LengthMismatch { expected: n, found: values.len() });
        }
        for (f, face) in space.mesh.faces().iter().enumerate() {
            if face.is_boundary() && values[f] != 0.0 {
                return Err(CrError::BoundaryValue { edge: f, value: values[f] });
            }
        }
        Ok(Self { space, values })
    }

    pub fn from_dofs(space: &'a CrSpace<'a>, dofs: &[f64]) -> Result<Self, CrError> {
        if dofs.len() != space.num_dofs() {
            return Err(CrError::LengthMismatch { expected: space.num_dofs(), found: dofs.len() });
        }
        let mut values = vec![0.0; space.mesh.num_faces()];
        for (d, &v) in dofs.iter().enumerate() {
            values[space.edge_of_dof[d]] = v;
        }
        Ok(Self { space, values })
    }

    pub fn zeros(space: &'a CrSpace<'a>) -> Self {
        Self { space, values: vec![0.0; space.mesh.num_faces()] }
    }

    /// Midpoint interpolant in `Y_T`: `u_σ = f(x̄_σ)` inside, zero on the boundary.
    pub fn interpolate(space: &'a CrSpace<'a>, f: impl Fn(Point2) -> f64) -> Self {
        let values = space
            .mesh
            .faces()
            .iter()
            .map(|face| if face.is_boundary() { 0.0 } else { f(face.midpoint) })
            .collect();
        Self { space, values }
    }

    /// Midpoint interpolant keeping boundary values. The result is a broken
    /// P¹ function outside `Y_T`, used to check affine reproduction.
    pub fn interpolate_with_boundary(space: &'a CrSpace<'a>, f: impl Fn(Point2) -> f64) -> Self {
        Self { space, values: space.mesh.faces().iter().map(|face| f(face.midpoint)).collect() }
    }

    pub fn random(space: &'a CrSpace<'a>, seed: u64) -> Self {
        Self::random_with(space, seed, RandomKind::Smooth)
    }

    /// Random element of `Y_T` with interior edge values in `[-1, 1]`.
    pub fn random_with(space: &'a CrSpace<'a>, seed: u64, kind: RandomKind) -> Self {
        match kind {
            RandomKind::Smooth => {
                let field = RandomSineField::new(bounding_box(space.mesh), seed);
                Self::interpolate(space, |p| field.eval(p))
            }
            RandomKind::WhiteNoise => {
                let dofs = white_noise(space.num_dofs(), seed);
                Self::from_dofs(space, &dofs).expect("one value per dof")
            }
        }
    }

    pub fn space(&self) -> &'a CrSpace<'a> {
        self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dofs(&self) -> Vec<f64> {
        self.space.edge_of_dof.iter().map(|&e| self.values[e]).collect()
    }

    fn local_values(&self, k: usize) -> [f64; 3] {
        self.space.local_edges[k].map(|e| self.values[e])
    }

    /// `(∇_b u)|_K`.
    pub fn gradient(&self, k: usize) -> Point2 {
        let g = self.space.basis_grads[k];
        let u = self.local_values(k);
        u[0] * g[0] + u[1] * g[1] + u[2] * g[2]
    }

    pub fn broken_gradient(&self) -> Vec<Point2> {
        (0..self.space.mesh.num_cells()).map(|k| self.gradient(k)).collect()
    }

    /// Value of the affine restriction to triangle `k` at `p`.
    pub fn value_in(&self, k: usize, p: Point2) -> f64 {
        let u = self.local_values(k);
        (u[0] + u[1] + u[2]) / 3.0 + self.gradient(k).dot(p - self.space.centroids[k])
    }

    /// `ũ_K = u(x̄_K)`, the mean of the three edge values.
    pub fn centroid_project(&self) -> CellFunction<'a> {
        let values = (0..self.space.mesh.num_cells())
            .map(|k| {
                let u = self.local_values(k);
                (u[0] + u[1] + u[2]) / 3.0
            })
            .collect();
        CellFunction::new(self.space.mesh, values).expect("one value per triangle")
    }

    /// Exact `‖u‖_{L²}`.
    pub fn norm_l2(&self) -> f64 {
        (0..self.space.mesh.num_cells())
            .map(|k| {
                let u = self.local_values(k);
                self.space.mesh.cell_measure(k) / 3.0 * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2])
            })
            .sum::<f64>()
            .sqrt()
    }

    /// `‖ |∇_b u| ‖_{L²}`.
    pub fn broken_h1_seminorm(&self) -> f64 {
        (0..self.space.mesh.num_cells())
            .map(|k| {
                let g = self.gradient(k);
                self.space.mesh.cell_measure(k) * g.dot(g)
            })
            .sum::<f64>()
            .sqrt()
    }

    /// `‖ |∇_b u| ‖_{L¹}`.
    pub fn broken_grad_l1(&self) -> f64 {
        (0..self.space.mesh.num_cells()).map(|k| self.space.mesh.cell_measure(k) * self.gradient(k).norm()).sum()
    }

    /// Exact `‖ũ - u‖_{L²}`; on each triangle the difference is affine with
    /// value `ũ_K - u_σ` at each edge midpoint.
    pub fn centroid_projection_gap(&self) -> f64 {
        (0..self.space.mesh.num_cells())
            .map(|k| {
                let u = self.local_values(k);
                let mean = (u[0] + u[1] + u[2]) / 3.0;
                let s: f64 = u.iter().map(|v| (mean - v) * (mean - v)).sum();
                self.space.mesh.cell_measure(k) / 3.0 * s
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn lemma_estimates(&self) -> LemmaEstimates {
        LemmaEstimates {
            tilde_h10: self.centroid_project().norm_h10(),
            grad_l2: self.broken_h1_seminorm(),
            tilde_gap_l2: self.centroid_projection_gap(),
            h: self.space.mesh.h(),
        }
    }

    /// `∫_σ (u|_K - u_σ) dS` for every (triangle, edge) pair, integrated with
    /// the trapezoid rule (exact for the affine integrand).
    pub fn edge_mean_defects(&self) -> Vec<f64> {
        let mesh = self.space.mesh;
        let mut out = Vec::with_capacity(3 * mesh.num_cells());
        for k in 0..mesh.num_cells() {
            for e in self.space.local_edges[k] {
                let face = mesh.face(e);
                let [a, b] = face.vertices.map(|v| mesh.vertices()[v]);
                let trap = 0.5 * face.measure * (self.value_in(k, a) + self.value_in(k, b));
                out.push(trap - face.measure * self.values[e]);
            }
        }
        out
    }

    /// Nonconformity functional
    /// `Z = Σ_K Σ_{σ∈E_K} ∫_σ (u|_K - u_σ) n_K·ψ dS`, each edge integral by
    /// two-point Gauss quadrature.
    pub fn nonconformity_defect(&self, psi: &dyn Fn(Point2) -> Point2) -> f64 {
        let mesh = self.space.mesh;
        let mut z = 0.0;
        for k in 0..mesh.num_cells() {
            let g = self.gradient(k);
            for e in self.space.local_edges[k] {
                let face = mesh.face(e);
                let n = mesh.normal(k, e);
                let [a, b] = face.vertices.map(|v| mesh.vertices()[v]);
                let w = 0.5 * face.measure;
                for x in gauss2_edge(a, b) {
                    z += w * g.dot(x - face.midpoint) * n.dot(psi(x));
                }
            }
        }
        z
    }

    /// Exact `‖u - I u_ref‖_{L²}` against the midpoint interpolant of `u_ref`
    /// (zero on boundary edges).
    pub fn interpolation_error_l2(&self, u_ref: &dyn Fn(Point2) -> f64) -> f64 {
        let reference = CrFunction::interpolate(self.space, u_ref);
        let diff: Vec<f64> = self.values.iter().zip(&reference.values).map(|(a, b)| a - b).collect();
        CrFunction { space: self.space, values: diff }.norm_l2()
    }

    /// `‖u - u_ref‖_{L²}` by degree-5 quadrature on each triangle.
    pub fn l2_error_quadrature(&self, u_ref: &dyn Fn(Point2) -> f64) -> f64 {
        let mesh = self.space.mesh;
        (0..mesh.num_cells())
            .map(|k| {
                let v: Vec<Point2> = mesh.cell_vertices(k).collect();
                integrate_triangle(v[0], v[1], v[2], &|p| (self.value_in(k, p) - u_ref(p)).powi(2))
            })
            .sum::<f64>()
            .sqrt()
    }

    /// `‖∇_b u - ∇u_ref‖_{L²}` by degree-5 quadrature on each triangle.
    pub fn broken_h1_error(&self, grad_ref: &dyn Fn(Point2) -> Point2) -> f64 {
        let mesh = self.space.mesh;
        (0..mesh.num_cells())
            .map(|k| {
                let g = self.gradient(k);
                let v: Vec<Point2> = mesh.cell_vertices(k).collect();
                integrate_triangle(v[0], v[1], v[2], &|p| {
                    let d = g - grad_ref(p);
                    d.dot(d)
                })
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// The quantities of the two centroid-projection estimates:
/// `‖ũ‖_{H¹₀,T} ≤ C ‖∇_b u‖` (constant not explicit, reported as a ratio) and
/// `‖ũ - u‖_{L²} ≤ h_T ‖∇_b u‖` (checked literally).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaEstimates {
    pub tilde_h10: f64,
    pub grad_l2: f64,
    pub tilde_gap_l2: f64,
    pub h: f64,
}

impl LemmaEstimates {
    pub fn gap_bound_holds(&self) -> bool {
        self.tilde_gap_l2 <= self.h * self.grad_l2
    }

    pub fn projection_ratio(&self) -> Option<f64> {
        (self.grad_l2 > 0.0).then(|| self.tilde_h10 / self.grad_l2)
    }
}

/// Assembles stiffness and load from one tensor and one source value per
/// triangle (both sampled at the centroid).
pub fn assemble_cells(
    space: &CrSpace<'_>,
    tensors: &[Tensor2],
    centroid_sources: &[f64],
) -> Result<(SparseMatrix, Vec<f64>), CrError> {
    let nk = space.mesh.num_cells();
    for len in [tensors.len(), centroid_sources.len()] {
        if len != nk {
            return Err(CrError::LengthMismatch { expected: nk, found: len });
        }
    }
    let mut b = TripletBuilder::with_capacity(space.num_dofs(), 9 * nk);
    let mut rhs = vec![0.0; space.num_dofs()];
    for k in 0..nk {
        let area = space.mesh.cell_measure(k);
        let grads = space.basis_grads[k];
        let dofs = space.local_edges[k].map(|e| space.dof_of_edge[e]);
        for i in 0..3 {
            let Some(di) = dofs[i] else { continue };
            rhs[di] += area * centroid_sources[k] / 3.0;
            for j in 0..3 {
                if let Some(dj) = dofs[j] {
                    b.add(di, dj, area * tensors[k].bilinear(grads[i], grads[j]));
                }
            }
        }
    }
    Ok((b.build(true)?, rhs))
}

pub fn assemble_cr(space: &CrSpace<'_>, problem: &DiffusionProblem) -> Result<(SparseMatrix, Vec<f64>), CrError> {
    let tensors: Vec<Tensor2> = space.centroids.iter().map(|&p| problem.tensor(p)).collect();
    let sources: Vec<f64> = space.centroids.iter().map(|&p| problem.source(p)).collect();
    assemble_cells(space, &tensors, &sources)
}

#[derive(Debug, Clone)]
pub struct CrSolution<'a> {
    pub u: CrFunction<'a>,
    pub u_tilde: CellFunction<'a>,
    pub tensors: Vec<Tensor2>,
    /// `f(x̄_K)` per triangle.
    pub centroid_sources: Vec<f64>,
    pub a_min: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl CrSolution<'_> {
    /// `a̲ ‖∇_b u‖² ≤ Σ_K |K| ∇uᵀA∇u = Σ_K |K| f(x̄_K) ũ_K ≤ ‖f‖_h ‖u‖_{L²}`,
    /// where `‖f‖_h` is the centroid-quadrature norm of the source.
    pub fn energy_chain(&self) -> EnergyChain {
        let space = self.u.space();
        let mesh = space.mesh();
        let grad = self.u.broken_h1_seminorm();
        let dissipation: f64 = (0..mesh.num_cells())
            .map(|k| {
                let g = self.u.gradient(k);
                mesh.cell_measure(k) * self.tensors[k].quad_form(g)
            })
            .sum();
        let source_work: f64 = (0..mesh.num_cells())
            .map(|k| mesh.cell_measure(k) * self.centroid_sources[k] * self.u_tilde.values()[k])
            .sum();
        EnergyChain {
            coercive_lower: self.a_min * grad * grad,
            dissipation,
            source_work,
            cauchy_schwarz_upper: self.source_l2() * self.u.norm_l2(),
        }
    }

    pub fn source_l2(&self) -> f64 {
        let mesh = self.u.space().mesh();
        (0..mesh.num_cells())
            .map(|k| mesh.cell_measure(k) * self.centroid_sources[k].powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

pub fn solve_cells<'a>(
    space: &'a CrSpace<'a>,
    tensors: Vec<Tensor2>,
    centroid_sources: Vec<f64>,
    a_min: f64,
    cg: &CgOptions,
) -> Result<CrSolution<'a>, CrError> {
    let (matrix, rhs) = assemble_cells(space, &tensors, &centroid_sources)?;
    let sol = cg_solve(&matrix, &rhs, cg)?;
    let u = CrFunction::from_dofs(space, &sol.x)?;
    let u_tilde = u.centroid_project();
    Ok(CrSolution { u, u_tilde, tensors, centroid_sources, a_min, iterations: sol.iterations, residual: sol.residual })
}

pub fn solve_cr<'a>(space: &'a CrSpace<'a>, problem: &DiffusionProblem, cg: &CgOptions) -> Result<CrSolution<'a>, CrError> {
    let tensors = space.centroids.iter().map(|&p| problem.tensor(p)).collect();
    let sources = space.centroids.iter().map(|&p| problem.source(p)).collect();
    solve_cells(space, tensors, sources, problem.a_min, cg)
}
