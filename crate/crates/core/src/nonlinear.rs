//! Picard iteration for `-div(A(x, u) ∇u) = F(u)` with homogeneous Dirichlet data.
//!
//! Each outer step freezes the coefficients at the previous iterate and solves
//! the linear scheme: `u⁰ = 0`, then `u^{k+1}` solves the scheme with
//! `A(·, u^k)` and `F(u^k)`. TPFA samples at cell points with `u_K`; CR samples
//! at triangle centroids with `ũ_K`, matching the linear quadrature.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cr_fem::{self, CrError, CrFunction, CrSpace};
use crate::discrete_space::CellFunction;
use crate::geometry::{Point2, Rect, Tensor2};
use crate::linalg::norm2;
use crate::mesh::Mesh;
use crate::tpfa::{self, TpfaError, TpfaOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Tpfa,
    Cr,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Tpfa => "tpfa",
            Scheme::Cr => "cr",
        })
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tpfa" => Ok(Scheme::Tpfa),
            "cr" => Ok(Scheme::Cr),
            other => Err(format!("unknown scheme `{other}` (expected tpfa or cr)")),
        }
    }
}

pub type CoefficientMap = Arc<dyn Fn(Point2, f64) -> Tensor2 + Send + Sync>;
pub type SourceMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct NonlinearProblem {
    pub name: String,
    pub domain: Rect,
    pub a: CoefficientMap,
    pub f: SourceMap,
    /// Declared bounds `a̲ ≤ ξᵀA(x,s)ξ` and `|A(x,s)ξ| ≤ a̅` for unit `ξ`, uniform in `s`.
    pub a_min: f64,
    pub a_max: f64,
    /// Declared `‖F‖_∞`.
    pub f_sup: f64,
}

impl NonlinearProblem {
    pub fn new(
        name: impl Into<String>,
        domain: Rect,
        a: impl Fn(Point2, f64) -> Tensor2 + Send + Sync + 'static,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        a_min: f64,
        a_max: f64,
        f_sup: f64,
    ) -> Self {
        Self { name: name.into(), domain, a: Arc::new(a), f: Arc::new(f), a_min, a_max, f_sup }
    }

    /// `|Ω|^{1/2} ‖F‖_∞`, the data norm replacing `‖f‖_{L²}` in the energy estimate.
    pub fn data_bound(&self) -> f64 {
        self.domain.area().sqrt() * self.f_sup
    }
}

impl fmt::Debug for NonlinearProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearProblem")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("a_min", &self.a_min)
            .field("a_max", &self.a_max)
            .field("f_sup", &self.f_sup)
            .finish()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum NonlinearError {
    #[error("Picard iteration did not converge in {iterations} outer iterations (last increment {last:e})")]
    NotConverged { iterations: usize, last: f64, history: Vec<f64> },
    #[error("relaxation factor {0} is outside (0, 1]")]
    InvalidRelaxation(f64),
    #[error("ellipticity bound violated at x = ({x}, {y}), s = {s}, xi = ({xi_x}, {xi_y}): {quantity} = {value} outside [{a_min}, {a_max}]")]
    Ellipticity {
        x: f64,
        y: f64,
        s: f64,
        xi_x: f64,
        xi_y: f64,
        quantity: &'static str,
        value: f64,
        a_min: f64,
        a_max: f64,
    },
    #[error("source bound violated at s = {s}: |F(s)| = {value} > {bound}")]
    SourceBound { s: f64, value: f64, bound: f64 },
    #[error(transparent)]
    Tpfa(#[from] TpfaError),
    #[error(transparent)]
    Cr(#[from] CrError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    /// Stop once `‖u^{k+1} - u^k‖_{L²} ≤ tol · max(1, ‖u^{k+1}‖_{L²})`.
    pub tol: f64,
    pub max_outer: usize,
    /// `u^{k+1} = ω ũ + (1 - ω) u^k`, `ω ∈ (0, 1]`.
    pub relaxation: f64,
    pub linear: TpfaOptions,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_outer: 100, relaxation: 1.0, linear: TpfaOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardOutcome {
    pub scheme: Scheme,
    /// Cell values (TPFA) or edge values, zero on boundary edges (CR).
    pub values: Vec<f64>,
    pub outer_iterations: usize,
    /// Relative increment of each outer iteration.
    pub history: Vec<f64>,
    /// Relative algebraic residual of the scheme reassembled at the returned `u`.
    pub certificate: f64,
    /// Relative residual of the last inner linear solve.
    pub linear_residual: f64,
    pub l2_norm: f64,
    /// `‖u‖_{H¹₀,M}` (TPFA) or `‖∇_b u‖_{L²}` (CR).
    pub energy_norm: f64,
    /// `|Ω|^{1/2} ‖F‖_∞`.
    pub data_bound: f64,
}

impl PicardOutcome {
    /// `energy_norm ≤ c · |Ω|^{1/2} ‖F‖_∞`.
    pub fn energy_bound_holds(&self, c: f64) -> bool {
        self.energy_norm <= c * self.data_bound
    }
}

/// One scheme behind the Picard loop: a frozen-coefficient solve and the
/// residual of the scheme assembled at the same state.
trait FrozenScheme {
    fn solve(&self, state: &[f64]) -> Result<(Vec<f64>, f64), NonlinearError>;
    fn certificate(&self, state: &[f64]) -> Result<f64, NonlinearError>;
    fn l2_norm(&self, values: &[f64]) -> f64;
    fn energy_norm(&self, values: &[f64]) -> f64;
    fn zeros(&self) -> Vec<f64>;
}

fn relative_residual(residual: f64, rhs: &[f64]) -> f64 {
    let b = norm2(rhs);
    if b == 0.0 {
        residual
    } else {
        residual / b
    }
}

struct TpfaFrozen<'a> {
    mesh: &'a Mesh,
    problem: &'a NonlinearProblem,
    opts: TpfaOptions,
}

impl TpfaFrozen<'_> {
    fn data(&self, u: &[f64]) -> (Vec<Tensor2>, Vec<f64>) {
        let pts = self.mesh.cell_points();
        let tensors = pts.iter().zip(u).map(|(&p, &s)| (self.problem.a)(p, s)).collect();
        let sources = self.mesh.cell_measures().iter().zip(u).map(|(m, &s)| m * (self.problem.f)(s)).collect();
        (tensors, sources)
    }
}

impl FrozenScheme for TpfaFrozen<'_> {
    fn solve(&self, u: &[f64]) -> Result<(Vec<f64>, f64), NonlinearError> {
        let (tensors, sources) = self.data(u);
        let sol = tpfa::solve_cells(self.mesh, &tensors, sources, self.problem.a_min, self.problem.a_max, &self.opts)?;
        Ok((sol.u.into_values(), sol.residual))
    }

    fn certificate(&self, u: &[f64]) -> Result<f64, NonlinearError> {
        let (tensors, sources) = self.data(u);
        let p = self.problem;
        let trans = tpfa::transmissivities_from_cells(self.mesh, &tensors, p.a_min, p.a_max, self.opts.admissibility_tol)?;
        let (matrix, rhs) = tpfa::assemble(self.mesh, &trans, &sources)?;
        let r = matrix.residual_norm(u, &rhs).map_err(TpfaError::from)?;
        Ok(relative_residual(r, &rhs))
    }

    fn l2_norm(&self, u: &[f64]) -> f64 {
        CellFunction::new(self.mesh, u.to_vec()).expect("one value per cell").norm_l2()
    }

    fn energy_norm(&self, u: &[f64]) -> f64 {
        CellFunction::new(self.mesh, u.to_vec()).expect("one value per cell").norm_h10()
    }

    fn zeros(&self) -> Vec<f64> {
        vec![0.0; self.mesh.num_cells()]
    }
}

/// CR state is the dof vector (interior edges only).
struct CrFrozen<'a> {
    space: &'a CrSpace<'a>,
    problem: &'a NonlinearProblem,
    opts: TpfaOptions,
}

impl<'a> CrFrozen<'a> {
    fn function(&self, dofs: &[f64]) -> CrFunction<'a> {
        CrFunction::from_dofs(self.space, dofs).expect("one value per dof")
    }

    fn data(&self, dofs: &[f64]) -> (Vec<Tensor2>, Vec<f64>) {
        let tilde = self.function(dofs).centroid_project();
        let mesh = self.space.mesh();
        let tensors =
            (0..mesh.num_cells()).map(|k| (self.problem.a)(self.space.centroid(k), tilde.values()[k])).collect();
        let sources = tilde.values().iter().map(|&s| (self.problem.f)(s)).collect();
        (tensors, sources)
    }
}

impl FrozenScheme for CrFrozen<'_> {
    fn solve(&self, dofs: &[f64]) -> Result<(Vec<f64>, f64), NonlinearError> {
        let (tensors, sources) = self.data(dofs);
        let sol = cr_fem::solve_cells(self.space, tensors, sources, self.problem.a_min, &self.opts.cg)?;
        Ok((sol.u.dofs(), sol.residual))
    }

    fn certificate(&self, dofs: &[f64]) -> Result<f64, NonlinearError> {
        let (tensors, sources) = self.data(dofs);
        let (matrix, rhs) = cr_fem::assemble_cells(self.space, &tensors, &sources)?;
        let r = matrix.residual_norm(dofs, &rhs).map_err(CrError::from)?;
        Ok(relative_residual(r, &rhs))
    }

    fn l2_norm(&self, dofs: &[f64]) -> f64 {
        self.function(dofs).norm_l2()
    }

    fn energy_norm(&self, dofs: &[f64]) -> f64 {
        self.function(dofs).broken_h1_seminorm()
    }

    fn zeros(&self) -> Vec<f64> {
        vec![0.0; self.space.num_dofs()]
    }
}

fn picard_loop(
    scheme: &dyn FrozenScheme,
    opts: &PicardOptions,
) -> Result<(Vec<f64>, usize, Vec<f64>, f64), NonlinearError> {
    let omega = opts.relaxation;
    if !(omega > 0.0 && omega <= 1.0) {
        return Err(NonlinearError::InvalidRelaxation(omega));
    }
    let mut u = scheme.zeros();
    let mut history = Vec::new();
    for k in 1..=opts.max_outer {
        let (solved, linear_residual) = scheme.solve(&u)?;
        let next: Vec<f64> = if omega == 1.0 {
            solved
        } else {
            solved.iter().zip(&u).map(|(s, old)| omega * s + (1.0 - omega) * old).collect()
        };
        let diff: Vec<f64> = next.iter().zip(&u).map(|(a, b)| a - b).collect();
        let norm = scheme.l2_norm(&next);
        let increment = scheme.l2_norm(&diff) / norm.max(1.0);
        history.push(increment);
        u = next;
        if increment <= opts.tol {
            return Ok((u, k, history, linear_residual));
        }
    }
    let last = history.last().copied().unwrap_or(f64::NAN);
    Err(NonlinearError::NotConverged { iterations: opts.max_outer, last, history })
}

fn finish(
    scheme_kind: Scheme,
    scheme: &dyn FrozenScheme,
    problem: &NonlinearProblem,
    opts: &PicardOptions,
    to_values: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<PicardOutcome, NonlinearError> {
    let (u, outer_iterations, history, linear_residual) = picard_loop(scheme, opts)?;
    Ok(PicardOutcome {
        scheme: scheme_kind,
        certificate: scheme.certificate(&u)?,
        l2_norm: scheme.l2_norm(&u),
        energy_norm: scheme.energy_norm(&u),
        values: to_values(&u),
        outer_iterations,
        history,
        linear_residual,
        data_bound: problem.data_bound(),
    })
}

/// Runs Picard iteration with the chosen scheme. CR requires a triangulation.
pub fn picard_solve(
    mesh: &Mesh,
    problem: &NonlinearProblem,
    scheme: Scheme,
    opts: &PicardOptions,
) -> Result<PicardOutcome, NonlinearError> {
    match scheme {
        Scheme::Tpfa => {
            let s = TpfaFrozen { mesh, problem, opts: opts.linear };
            finish(scheme, &s, problem, opts, |u| u.to_vec())
        }
        Scheme::Cr => {
            let space = CrSpace::new(mesh)?;
            let s = CrFrozen { space: &space, problem, opts: opts.linear };
            finish(scheme, &s, problem, opts, |dofs| {
                CrFunction::from_dofs(&space, dofs).expect("one value per dof").values().to_vec()
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EllipticityReport {
    pub samples: usize,
    /// `min ξᵀA(x,s)ξ` over sampled unit `ξ`.
    pub min_coercivity: f64,
    /// `max |A(x,s)ξ|` over sampled unit `ξ`.
    pub max_operator_norm: f64,
    pub max_source: f64,
}

/// Samples `x` uniformly in the domain, `s` uniformly in `[-10, 10]` and unit
/// `ξ` uniformly in angle; fails on the first triple outside the declared bounds.
pub fn verify_uniform_ellipticity(
    problem: &NonlinearProblem,
    samples: usize,
    seed: u64,
) -> Result<EllipticityReport, NonlinearError> {
    const S_RANGE: f64 = 10.0;
    let slack = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = problem.domain;
    let mut report = EllipticityReport {
        samples,
        min_coercivity: f64::INFINITY,
        max_operator_norm: 0.0,
        max_source: 0.0,
    };
    for _ in 0..samples {
        let x = Point2::new(rng.gen_range(d.x0..=d.x1), rng.gen_range(d.y0..=d.y1));
        let s = rng.gen_range(-S_RANGE..=S_RANGE);
        let angle = rng.gen_range(0.0..std::f64::consts::TAU);
        let xi = Point2::new(angle.cos(), angle.sin());
        let a = (problem.a)(x, s);
        let coercivity = a.quad_form(xi);
        let operator = a.apply(xi).norm();
        let witness = |quantity, value| NonlinearError::Ellipticity {
            x: x.x,
            y: x.y,
            s,
            xi_x: xi.x,
            xi_y: xi.y,
            quantity,
            value,
            a_min: problem.a_min,
            a_max: problem.a_max,
        };
        if coercivity < problem.a_min * (1.0 - slack) {
            return Err(witness("xi^T A xi", coercivity));
        }
        if operator > problem.a_max * (1.0 + slack) {
            return Err(witness("|A xi|", operator));
        }
        let fs = (problem.f)(s).abs();
        if fs > problem.f_sup * (1.0 + slack) {
            return Err(NonlinearError::SourceBound { s, value: fs, bound: problem.f_sup });
        }
        report.min_coercivity = report.min_coercivity.min(coercivity);
        report.max_operator_norm = report.max_operator_norm.max(operator);
        report.max_source = report.max_source.max(fs);
    }
    Ok(report)
}
