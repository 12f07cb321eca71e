//! Two-point flux approximation finite volume scheme.
//!
//! Per cell, `Σ_{σ∈E_K} F_{K,σ} = ∫_K f` with `F_{K,σ} = τ_σ (u_K - u_L)` and
//! `u_L = 0` across boundary faces. Transmissivities use harmonic averaging of
//! the face-normal diffusivities `λ_K = n_σᵀ A(x_K) n_σ`:
//!
//! ```text
//! interior: τ_σ = |σ| λ_K λ_L / (λ_K d_{L,σ} + λ_L d_{K,σ})
//! boundary: τ_σ = |σ| λ_K / d_{K,σ}
//! ```
//!
//! `A` is sampled at cell points and `∫_K f ≈ |K| f(x_K)`.

use thiserror::Error;

use crate::discrete_space::CellFunction;
use crate::geometry::{Point2, Tensor2};
use crate::linalg::{cg_solve, CgOptions, LinalgError, SparseMatrix, TripletBuilder};
use crate::mesh::quadrature::integrate_cell;
use crate::mesh::{regularity, Mesh};
pub use crate::problem::EnergyChain;
use crate::problem::DiffusionProblem;

#[derive(Debug, Error, PartialEq)]
pub enum TpfaError {
    #[error("mesh is not TPFA-admissible: segment x_K x_L deviates {defect:e} rad from the face normal (tolerance {tolerance:e})")]
    Inadmissible { defect: f64, tolerance: f64 },
    #[error("ellipticity violated in cell {cell} on face {face}: nᵀAn = {lambda}")]
    Ellipticity { cell: usize, face: usize, lambda: f64 },
    #[error("cell {cell}: face normal {face} is not an eigenvector of A; two-point fluxes cannot represent a full tensor on this mesh")]
    FullTensor { cell: usize, face: usize },
    #[error("expected {expected} per-cell values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TpfaOptions {
    /// Largest admissibility defect (radians) accepted.
    pub admissibility_tol: f64,
    pub cg: CgOptions,
}

impl Default for TpfaOptions {
    fn default() -> Self {
        Self { admissibility_tol: 1e-9, cg: CgOptions::default() }
    }
}

/// One `τ_σ > 0` per face.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmissivities {
    pub values: Vec<f64>,
    pub a_min: f64,
    pub a_max: f64,
}

impl Transmissivities {
    pub fn get(&self, face: usize) -> f64 {
        self.values[face]
    }

    /// Faces violating `τ_σ ≥ a̲ |σ| / d_σ`, compared without tolerance.
    pub fn lower_bound_violations(&self, mesh: &Mesh) -> Vec<usize> {
        mesh.faces()
            .iter()
            .enumerate()
            .filter(|(f, face)| self.values[*f] < (self.a_min * face.measure) / face.d_sigma())
            .map(|(f, _)| f)
            .collect()
    }
}

/// Samples `A` at the cell points and builds transmissivities.
pub fn transmissivities(
    mesh: &Mesh,
    a: &dyn Fn(Point2) -> Tensor2,
    a_min: f64,
    a_max: f64,
    admissibility_tol: f64,
) -> Result<Transmissivities, TpfaError> {
    let tensors: Vec<Tensor2> = mesh.cell_points().iter().map(|&p| a(p)).collect();
    transmissivities_from_cells(mesh, &tensors, a_min, a_max, admissibility_tol)
}

/// Transmissivities from one diffusion tensor per cell.
pub fn transmissivities_from_cells(
    mesh: &Mesh,
    tensors: &[Tensor2],
    a_min: f64,
    a_max: f64,
    admissibility_tol: f64,
) -> Result<Transmissivities, TpfaError> {
    if tensors.len() != mesh.num_cells() {
        return Err(TpfaError::LengthMismatch { expected: mesh.num_cells(), found: tensors.len() });
    }
    let defect = regularity(mesh).tpfa_admissibility_defect;
    if defect > admissibility_tol {
        return Err(TpfaError::Inadmissible { defect, tolerance: admissibility_tol });
    }

    let normal_diffusivity = |k: usize, f: usize| -> Result<f64, TpfaError> {
        let n = mesh.face(f).normal;
        let t = &tensors[k];
        let lambda = t.quad_form(n);
        if !(lambda > 0.0) {
            return Err(TpfaError::Ellipticity { cell: k, face: f, lambda });
        }
        let an = t.apply(n);
        if (an - lambda * n).norm() > 1e-12 * t.frobenius() {
            return Err(TpfaError::FullTensor { cell: k, face: f });
        }
        Ok(lambda)
    };

    let mut values = Vec::with_capacity(mesh.num_faces());
    for (f, face) in mesh.faces().iter().enumerate() {
        let lk = normal_diffusivity(face.owner, f)?;
        let tau = match (face.neighbor, face.d_neighbor) {
            (Some(l), Some(dl)) => {
                let ll = normal_diffusivity(l, f)?;
                if lk == ll {
                    // Same form as the lower bound so equality survives rounding.
                    (lk * face.measure) / face.d_sigma()
                } else {
                    face.measure * lk * ll / (lk * dl + ll * face.d_owner)
                }
            }
            _ => (lk * face.measure) / face.d_owner,
        };
        values.push(tau);
    }
    Ok(Transmissivities { values, a_min, a_max })
}

/// Assembles the flux-balance system; `cell_sources[K]` is `∫_K f`.
pub fn assemble(
    mesh: &Mesh,
    trans: &Transmissivities,
    cell_sources: &[f64],
) -> Result<(SparseMatrix, Vec<f64>), TpfaError> {
    if cell_sources.len() != mesh.num_cells() {
        return Err(TpfaError::LengthMismatch { expected: mesh.num_cells(), found: cell_sources.len() });
    }
    let mut b = TripletBuilder::with_capacity(mesh.num_cells(), 4 * mesh.num_faces());
    for (f, face) in mesh.faces().iter().enumerate() {
        let tau = trans.values[f];
        let k = face.owner;
        b.add(k, k, tau);
        if let Some(l) = face.neighbor {
            b.add(l, l, tau);
            b.add(k, l, -tau);
            b.add(l, k, -tau);
        }
    }
    Ok((b.build(true)?, cell_sources.to_vec()))
}

/// Midpoint quadrature `|K| f(x_K)` for every cell.
pub fn midpoint_sources(mesh: &Mesh, f: &dyn Fn(Point2) -> f64) -> Vec<f64> {
    mesh.cell_points().iter().zip(mesh.cell_measures()).map(|(&p, m)| m * f(p)).collect()
}

#[derive(Debug, Clone)]
pub struct TpfaSolution<'m> {
    pub u: CellFunction<'m>,
    /// `F_{K,σ}` oriented out of each face's owner.
    pub fluxes: Vec<f64>,
    pub trans: Transmissivities,
    /// `∫_K f` per cell as used in the right-hand side.
    pub cell_sources: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl<'m> TpfaSolution<'m> {
    pub fn mesh(&self) -> &'m Mesh {
        self.u.mesh()
    }

    /// `F_{K,σ}` for cell `k` and one of its faces.
    pub fn flux(&self, k: usize, f: usize) -> f64 {
        if self.mesh().face(f).owner == k {
            self.fluxes[f]
        } else {
            -self.fluxes[f]
        }
    }

    /// `Σ_{σ∈E_K} F_{K,σ} - ∫_K f` per cell.
    pub fn balance_residuals(&self) -> Vec<f64> {
        let mesh = self.mesh();
        (0..mesh.num_cells())
            .map(|k| mesh.cell_faces(k).iter().map(|&f| self.flux(k, f)).sum::<f64>() - self.cell_sources[k])
            .collect()
    }

    /// Largest `|residual_K| / (|∫_K f| + Σ_σ τ_σ (|u_K| + |u_L|))`.
    pub fn max_scaled_balance_residual(&self) -> f64 {
        let mesh = self.mesh();
        let u = self.u.values();
        self.balance_residuals()
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let scale = self.cell_sources[k].abs()
                    + mesh
                        .cell_faces(k)
                        .iter()
                        .map(|&f| {
                            let ul = mesh.other_cell(f, k).map_or(0.0, |l| u[l].abs());
                            self.trans.values[f] * (u[k].abs() + ul)
                        })
                        .sum::<f64>();
                if scale == 0.0 {
                    r.abs()
                } else {
                    r.abs() / scale
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn energy_chain(&self) -> EnergyChain {
        let mesh = self.mesh();
        let h10 = self.u.norm_h10();
        let dissipation: f64 = (0..mesh.num_faces()).map(|f| self.trans.values[f] * self.u.jump(f).powi(2)).sum();
        let source_work: f64 = self.cell_sources.iter().zip(self.u.values()).map(|(s, u)| s * u).sum();
        let f_l2 = self
            .cell_sources
            .iter()
            .zip(mesh.cell_measures())
            .map(|(s, m)| s * s / m)
            .sum::<f64>()
            .sqrt();
        EnergyChain {
            coercive_lower: self.trans.a_min * h10 * h10,
            dissipation,
            source_work,
            cauchy_schwarz_upper: f_l2 * self.u.norm_l2(),
        }
    }

    /// Discrete `L²` norm of the midpoint-sampled source.
    pub fn source_l2(&self) -> f64 {
        self.cell_sources.iter().zip(self.mesh().cell_measures()).map(|(s, m)| s * s / m).sum::<f64>().sqrt()
    }
}

/// Solves the scheme given per-cell tensors and per-cell source integrals.
pub fn solve_cells<'m>(
    mesh: &'m Mesh,
    tensors: &[Tensor2],
    cell_sources: Vec<f64>,
    a_min: f64,
    a_max: f64,
    opts: &TpfaOptions,
) -> Result<TpfaSolution<'m>, TpfaError> {
    let trans = transmissivities_from_cells(mesh, tensors, a_min, a_max, opts.admissibility_tol)?;
    let (matrix, rhs) = assemble(mesh, &trans, &cell_sources)?;
    let sol = cg_solve(&matrix, &rhs, &opts.cg)?;
    let u = CellFunction::new(mesh, sol.x).expect("solution length equals cell count");
    let fluxes = (0..mesh.num_faces()).map(|f| trans.values[f] * u.jump(f)).collect();
    Ok(TpfaSolution { u, fluxes, trans, cell_sources, iterations: sol.iterations, residual: sol.residual })
}

pub fn solve<'m>(mesh: &'m Mesh, problem: &DiffusionProblem, opts: &TpfaOptions) -> Result<TpfaSolution<'m>, TpfaError> {
    let tensors: Vec<Tensor2> = mesh.cell_points().iter().map(|&p| problem.tensor(p)).collect();
    let sources = midpoint_sources(mesh, &|p| problem.source(p));
    solve_cells(mesh, &tensors, sources, problem.a_min, problem.a_max, opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyDefect {
    /// `(cell, R_K)` for every cell whose faces are all interior.
    pub residuals: Vec<(usize, f64)>,
    /// `max_K |R_K|`.
    pub max_abs: f64,
    /// `max_K |R_K| / |K|`.
    pub max_scaled: f64,
}

/// `R_K(φ) = Σ_{σ∈E_K} τ_σ (φ(x_K) - φ(x_L)) + ∫_K div(A∇φ)`, on cells away
/// from the boundary.
pub fn consistency_defect(
    mesh: &Mesh,
    trans: &Transmissivities,
    phi: &dyn Fn(Point2) -> f64,
    div_a_grad_phi: &dyn Fn(Point2) -> f64,
) -> ConsistencyDefect {
    let phi_k: Vec<f64> = mesh.cell_points().iter().map(|&p| phi(p)).collect();
    let mut residuals = Vec::new();
    let mut max_abs: f64 = 0.0;
    let mut max_scaled: f64 = 0.0;
    for k in 0..mesh.num_cells() {
        let faces = mesh.cell_faces(k);
        if faces.iter().any(|&f| mesh.face(f).is_boundary()) {
            continue;
        }
        let stencil: f64 = faces
            .iter()
            .map(|&f| {
                let l = mesh.other_cell(f, k).expect("interior face");
                trans.values[f] * (phi_k[k] - phi_k[l])
            })
            .sum();
        let r = stencil + integrate_cell(mesh, k, div_a_grad_phi);
        max_abs = max_abs.max(r.abs());
        max_scaled = max_scaled.max(r.abs() / mesh.cell_measure(k));
        residuals.push((k, r));
    }
    ConsistencyDefect { residuals, max_abs, max_scaled }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;
    use crate::mesh::{build_triangular_mesh, build_uniform_quad_mesh};
    use rand::{Rng, SeedableRng};

    const PI: f64 = std::f64::consts::PI;

    fn identity(_: Point2) -> Tensor2 {
        Tensor2::IDENTITY
    }

    fn sine_problem() -> DiffusionProblem {
        DiffusionProblem::new(
            "sine",
            Rect::UNIT,
            identity,
            |p| 2.0 * PI * PI * (PI * p.x).sin() * (PI * p.y).sin(),
            1.0,
            1.0,
        )
        .with_exact(
            |p| (PI * p.x).sin() * (PI * p.y).sin(),
            |p| Point2::new(PI * (PI * p.x).cos() * (PI * p.y).sin(), PI * (PI * p.x).sin() * (PI * p.y).cos()),
        )
    }

    #[test]
    fn identity_transmissivities_on_two_by_two() {
        let m = build_uniform_quad_mesh(2, 2, Rect::UNIT).unwrap();
        let t = transmissivities(&m, &identity, 1.0, 1.0, 1e-9).unwrap();
        for (f, face) in m.faces().iter().enumerate() {
            let want = if face.is_boundary() { 2.0 } else { 1.0 };
            assert!((t.get(f) - want).abs() < 1e-14);
        }
        let t4 = transmissivities(&m, &|_| Tensor2::scalar(4.0), 4.0, 4.0, 1e-9).unwrap();
        for f in 0..m.num_faces() {
            assert!((t4.get(f) - 4.0 * t.get(f)).abs() < 1e-14);
        }
    }

    #[test]
    fn harmonic_average_across_contrast() {
        // Two cells of width 0.5 side by side: d_K = d_L = 0.25, |σ| = 0.5 on a 2x1 grid of height 0.5.
        let m = build_uniform_quad_mesh(2, 1, Rect::new(0.0, 0.0, 1.0, 0.5)).unwrap();
        let a = |p: Point2| if p.x < 0.5 { Tensor2::IDENTITY } else { Tensor2::scalar(100.0) };
        let t = transmissivities(&m, &a, 1.0, 100.0, 1e-9).unwrap();
        let (f, _) = m.interior_faces().next().unwrap();
        assert!((t.get(f) - 0.5 * 100.0 / 25.25).abs() < 1e-14);
        assert!((t.get(f) - 1.980_198).abs() < 1e-6);
        assert!(t.lower_bound_violations(&m).is_empty());
    }

    #[test]
    fn rejections() {
        let tri = build_triangular_mesh(2, 2, Rect::UNIT, false).unwrap();
        assert!(matches!(transmissivities(&tri, &identity, 1.0, 1.0, 1e-9), Err(TpfaError::Inadmissible { .. })));
        let quad = build_uniform_quad_mesh(2, 2, Rect::UNIT).unwrap();
        let full = |_| Tensor2([[2.0, 0.5], [0.5, 1.0]]);
        assert!(matches!(transmissivities(&quad, &full, 0.5, 2.5, 1e-9), Err(TpfaError::FullTensor { .. })));
        let negative = |_| Tensor2::scalar(-1.0);
        assert!(matches!(transmissivities(&quad, &negative, 1.0, 1.0, 1e-9), Err(TpfaError::Ellipticity { .. })));
    }

    #[test]
    fn single_cell_solve() {
        let m = build_uniform_quad_mesh(1, 1, Rect::UNIT).unwrap();
        let p = DiffusionProblem::new("one", Rect::UNIT, identity, |_| 1.0, 1.0, 1.0);
        let s = solve(&m, &p, &TpfaOptions::default()).unwrap();
        assert!((s.u.values()[0] - 0.125).abs() < 1e-15);
    }

    #[test]
    fn zero_source_gives_zero() {
        let m = build_uniform_quad_mesh(4, 3, Rect::UNIT).unwrap();
        let p = DiffusionProblem::new("zero", Rect::UNIT, identity, |_| 0.0, 1.0, 1.0);
        let s = solve(&m, &p, &TpfaOptions::default()).unwrap();
        assert!(s.u.is_zero());
        assert!(s.fluxes.iter().all(|&f| f == 0.0));
    }

    #[test]
    fn two_by_two_stencil() {
        let m = build_uniform_quad_mesh(2, 2, Rect::UNIT).unwrap();
        let t = transmissivities(&m, &identity, 1.0, 1.0, 1e-9).unwrap();
        let (a, rhs) = assemble(&m, &t, &midpoint_sources(&m, &|_| 1.0)).unwrap();
        assert!(a.is_flagged_symmetric());
        assert_eq!(a.diagonal(), vec![6.0; 4]);
        assert_eq!(a.get(0, 1), -1.0);
        assert_eq!(a.get(0, 3), 0.0);
        assert_eq!(rhs, vec![0.25; 4]);
    }

    #[test]
    fn sine_problem_invariants() {
        let m = build_uniform_quad_mesh(16, 16, Rect::UNIT).unwrap();
        let s = solve(&m, &sine_problem(), &TpfaOptions::default()).unwrap();
        for (f, face) in m.interior_faces() {
            let l = face.neighbor.unwrap();
            assert_eq!(s.flux(face.owner, f), -s.flux(l, f));
        }
        assert!(s.max_scaled_balance_residual() <= 1e-8);
        assert!(s.energy_chain().holds(1e-8), "{:?}", s.energy_chain());
        // Discrete maximum principle for a nonnegative source.
        assert!(s.u.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn sine_error_quarters_under_refinement() {
        let p = sine_problem();
        let exact = p.exact.clone().unwrap();
        let err = |n: usize| {
            let m = build_uniform_quad_mesh(n, n, Rect::UNIT).unwrap();
            let s = solve(&m, &p, &TpfaOptions::default()).unwrap();
            s.u.sub(&CellFunction::project(&m, |x| (exact.u)(x))).norm_l2()
        };
        let ratio = err(16) / err(32);
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn anisotropic_energy_chain() {
        let m = build_uniform_quad_mesh(16, 16, Rect::UNIT).unwrap();
        let p = DiffusionProblem::new(
            "aniso",
            Rect::UNIT,
            |_| Tensor2::diag(1.0, 100.0),
            |p| 2.0 * PI * PI * (PI * p.x).sin() * (PI * p.y).sin(),
            1.0,
            100.0,
        );
        let s = solve(&m, &p, &TpfaOptions::default()).unwrap();
        assert!(s.energy_chain().holds(1e-8));
        assert!(s.trans.lower_bound_violations(&m).is_empty());
    }

    #[test]
    fn matrix_positive_on_random_vectors() {
        let m = build_uniform_quad_mesh(8, 8, Rect::UNIT).unwrap();
        let t = transmissivities(&m, &|p| if p.x < 0.5 { Tensor2::IDENTITY } else { Tensor2::scalar(100.0) }, 1.0, 100.0, 1e-9)
            .unwrap();
        let (a, _) = assemble(&m, &t, &vec![0.0; m.num_cells()]).unwrap();
        assert!(a.is_symmetric(0.0));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..16 {
            let x: Vec<f64> = (0..m.num_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            assert!(a.quad_form(&x).unwrap() > 0.0);
        }
    }

    #[test]
    fn bilinear_harmonic_has_zero_defect() {
        for n in [4, 8, 32] {
            let m = build_uniform_quad_mesh(n, n, Rect::UNIT).unwrap();
            let t = transmissivities(&m, &identity, 1.0, 1.0, 1e-9).unwrap();
            let d = consistency_defect(&m, &t, &|p| p.x * p.y, &|_| 0.0);
            assert_eq!(d.residuals.len(), (n - 2) * (n - 2));
            assert!(d.max_scaled < 1e-12, "n={n}: {}", d.max_scaled);
            let z = consistency_defect(&m, &t, &|_| 0.0, &|_| 0.0);
            assert_eq!(z.max_scaled, 0.0);
        }
    }
}
