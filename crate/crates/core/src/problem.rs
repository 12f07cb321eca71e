//! Linear model problems `-div(A ∇u) = f` with homogeneous Dirichlet data.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::geometry::{Point2, Rect, Tensor2};

pub type ScalarField = Arc<dyn Fn(Point2) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(Point2) -> Point2 + Send + Sync>;
pub type TensorField = Arc<dyn Fn(Point2) -> Tensor2 + Send + Sync>;

/// Links of the discrete energy chain `coercive_lower ≤ dissipation =
/// source_work ≤ cauchy_schwarz_upper`, obtained by testing a scheme with
/// its own solution. For TPFA this reads
/// `a̲ ‖u‖²_{H¹₀,M} ≤ Σ τ_σ (u_K - u_L)² = Σ_K u_K ∫_K f ≤ ‖f‖ ‖u‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyChain {
    pub coercive_lower: f64,
    pub dissipation: f64,
    pub source_work: f64,
    pub cauchy_schwarz_upper: f64,
}

impl EnergyChain {
    /// Each link checked to relative tolerance `rel`.
    pub fn holds(&self, rel: f64) -> bool {
        let scale = self.dissipation.abs().max(self.source_work.abs());
        self.coercive_lower <= self.dissipation * (1.0 + rel)
            && (self.dissipation - self.source_work).abs() <= rel * scale
            && self.source_work <= self.cauchy_schwarz_upper * (1.0 + rel)
    }
}

#[derive(Clone)]
pub struct ExactSolution {
    pub u: ScalarField,
    pub grad: VectorField,
}

#[derive(Clone)]
pub struct DiffusionProblem {
    pub name: String,
    pub domain: Rect,
    pub a: TensorField,
    pub f: ScalarField,
    /// Ellipticity bounds `a̲ ≤ a̅`.
    pub a_min: f64,
    pub a_max: f64,
    pub exact: Option<ExactSolution>,
    /// Vertical lines `x = c` where `A` jumps; analytic checks stay away from them.
    pub interfaces_x: Vec<f64>,
}

impl DiffusionProblem {
    pub fn new(
        name: impl Into<String>,
        domain: Rect,
        a: impl Fn(Point2) -> Tensor2 + Send + Sync + 'static,
        f: impl Fn(Point2) -> f64 + Send + Sync + 'static,
        a_min: f64,
        a_max: f64,
    ) -> Self {
        Self {
            name: name.into(),
            domain,
            a: Arc::new(a),
            f: Arc::new(f),
            a_min,
            a_max,
            exact: None,
            interfaces_x: Vec::new(),
        }
    }

    pub fn with_exact(
        mut self,
        u: impl Fn(Point2) -> f64 + Send + Sync + 'static,
        grad: impl Fn(Point2) -> Point2 + Send + Sync + 'static,
    ) -> Self {
        self.exact = Some(ExactSolution { u: Arc::new(u), grad: Arc::new(grad) });
        self
    }

    pub fn with_interface_x(mut self, x: f64) -> Self {
        self.interfaces_x.push(x);
        self
    }

    pub fn tensor(&self, p: Point2) -> Tensor2 {
        (self.a)(p)
    }

    pub fn source(&self, p: Point2) -> f64 {
        (self.f)(p)
    }
}

impl fmt::Debug for DiffusionProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionProblem")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("a_min", &self.a_min)
            .field("a_max", &self.a_max)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}
