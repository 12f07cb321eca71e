//! Piecewise-constant cell functions `X_M` and their discrete norms.
//!
//! All face sums use the homogeneous Dirichlet convention: across a boundary
//! face the missing neighbor value is taken as zero.

use thiserror::Error;

use crate::fields::{white_noise, RandomSineField};
use crate::geometry::{Point2, Rect};
use crate::mesh::{FamilyKind, Mesh};

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("expected {expected} cell values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("exponent {name} = {value} is out of range: {requirement}")]
    InvalidExponent { name: &'static str, value: f64, requirement: &'static str },
    #[error("Sobolev exponents out of range: need 1 < p < 2 and 1 <= q <= 2p/(2-p) = {q_max} (got p = {p}, q = {q})")]
    SobolevRange { p: f64, q: f64, q_max: f64 },
    #[error("ratio undefined for the zero function")]
    ZeroFunction,
    #[error("meshes are not nested structured quad grids of the same domain")]
    NotNested,
}

/// Which random sampler [`CellFunction::random_with`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RandomKind {
    /// Random low-frequency sine series of the mesh bounding box, sampled at cell points.
    #[default]
    Smooth,
    /// Independent uniform values per cell.
    WhiteNoise,
}

/// Bounding box of the mesh vertices.
pub fn bounding_box(mesh: &Mesh) -> Rect {
    let mut r = Rect::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for v in mesh.vertices() {
        r.x0 = r.x0.min(v.x);
        r.y0 = r.y0.min(v.y);
        r.x1 = r.x1.max(v.x);
        r.y1 = r.y1.max(v.y);
    }
    r
}

/// An element of `X_M`: one value per cell.
#[derive(Debug, Clone)]
pub struct CellFunction<'m> {
    mesh: &'m Mesh,
    values: Vec<f64>,
}

impl<'m> CellFunction<'m> {
    pub fn new(mesh: &'m Mesh, values: Vec<f64>) -> Result<Self, SpaceError> {
        if values.len() != mesh.num_cells() {
            return Err(SpaceError::LengthMismatch { expected: mesh.num_cells(), found: values.len() });
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: &'m Mesh) -> Self {
        Self { mesh, values: vec![0.0; mesh.num_cells()] }
    }

    /// Point-value projection `v_K = f(x_K)`.
    pub fn project(mesh: &'m Mesh, f: impl Fn(Point2) -> f64) -> Self {
        Self { mesh, values: mesh.cell_points().iter().map(|&p| f(p)).collect() }
    }

    /// Deterministic pseudo-random function with values in `[-1, 1]`.
    pub fn random(mesh: &'m Mesh, seed: u64) -> Self {
        Self::random_with(mesh, seed, RandomKind::Smooth)
    }

    pub fn random_with(mesh: &'m Mesh, seed: u64, kind: RandomKind) -> Self {
        match kind {
            RandomKind::Smooth => {
                let field = RandomSineField::new(bounding_box(mesh), seed);
                Self::project(mesh, |p| field.eval(p))
            }
            RandomKind::WhiteNoise => Self { mesh, values: white_noise(mesh.num_cells(), seed) },
        }
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self { mesh: self.mesh, values: self.values.iter().map(|v| alpha * v).collect() }
    }

    /// `self - other`, both on the same mesh.
    pub fn sub(&self, other: &CellFunction<'_>) -> Self {
        assert_eq!(self.values.len(), other.values.len(), "cell functions on different meshes");
        Self { mesh: self.mesh, values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect() }
    }

    pub fn add(&self, other: &CellFunction<'_>) -> Self {
        assert_eq!(self.values.len(), other.values.len(), "cell functions on different meshes");
        Self { mesh: self.mesh, values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// `v_K - v_L` across face `f`, oriented from the owner, with `v_L = 0` on the boundary.
    pub fn jump(&self, f: usize) -> f64 {
        let face = self.mesh.face(f);
        self.values[face.owner] - face.neighbor.map_or(0.0, |l| self.values[l])
    }

    /// Discrete `H¹₀` norm `(Σ_σ |σ| d_σ ((v_K - v_L)/d_σ)²)^{1/2}`.
    pub fn norm_h10(&self) -> f64 {
        self.mesh
            .faces()
            .iter()
            .enumerate()
            .map(|(f, face)| {
                let ds = face.d_sigma();
                let q = self.jump(f) / ds;
                face.measure * ds * q * q
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Discrete `W^{1,p}₀` norm; `p = 1` is accepted as a diagnostic.
    pub fn norm_w1p(&self, p: f64) -> Result<f64, SpaceError> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(SpaceError::InvalidExponent { name: "p", value: p, requirement: "1 <= p < inf" });
        }
        let sum: f64 = self
            .mesh
            .faces()
            .iter()
            .enumerate()
            .map(|(f, face)| {
                let ds = face.d_sigma();
                face.measure * ds * (self.jump(f).abs() / ds).powf(p)
            })
            .sum();
        Ok(sum.powf(1.0 / p))
    }

    /// `(Σ_K |K| |v_K|^q)^{1/q}`.
    pub fn norm_lq(&self, q: f64) -> Result<f64, SpaceError> {
        if !(q >= 1.0) || !q.is_finite() {
            return Err(SpaceError::InvalidExponent { name: "q", value: q, requirement: "1 <= q < inf" });
        }
        let sum: f64 = self.mesh.cell_measures().iter().zip(&self.values).map(|(m, v)| m * v.abs().powf(q)).sum();
        Ok(sum.powf(1.0 / q))
    }

    pub fn norm_l2(&self) -> f64 {
        self.mesh.cell_measures().iter().zip(&self.values).map(|(m, v)| m * v * v).sum::<f64>().sqrt()
    }

    /// `Σ_K |K| v_K w_K`.
    pub fn inner_l2(&self, other: &CellFunction<'_>) -> f64 {
        self.mesh.cell_measures().iter().zip(self.values.iter().zip(&other.values)).map(|(m, (a, b))| m * a * b).sum()
    }

    /// `‖v‖_{L²} / ‖v‖_{H¹₀,M}`.
    pub fn poincare_ratio(&self) -> Result<f64, SpaceError> {
        if self.is_zero() {
            return Err(SpaceError::ZeroFunction);
        }
        Ok(self.norm_l2() / self.norm_h10())
    }

    /// `‖v‖_{L^q} / ‖v‖_{W^{1,p}₀,M}` for `1 < p < 2` and `1 ≤ q ≤ 2p/(2-p)`.
    pub fn sobolev_ratio(&self, p: f64, q: f64) -> Result<f64, SpaceError> {
        let q_max = 2.0 * p / (2.0 - p);
        if !(p > 1.0 && p < 2.0) || !(q >= 1.0 && q <= q_max) {
            return Err(SpaceError::SobolevRange { p, q, q_max });
        }
        if self.is_zero() {
            return Err(SpaceError::ZeroFunction);
        }
        Ok(self.norm_lq(q)? / self.norm_w1p(p)?)
    }

    /// Area-weighted average of a fine-grid function onto a coarser grid of
    /// the same structured quad family.
    pub fn restrict_to<'c>(&self, coarse: &'c Mesh) -> Result<CellFunction<'c>, SpaceError> {
        let (fine_grid, coarse_grid) = match (self.mesh.grid(), coarse.grid()) {
            (Some(f), Some(c)) => (f, c),
            _ => return Err(SpaceError::NotNested),
        };
        let nested = fine_grid.kind == FamilyKind::Quad
            && coarse_grid.kind == FamilyKind::Quad
            && fine_grid.domain == coarse_grid.domain
            && fine_grid.nx % coarse_grid.nx == 0
            && fine_grid.ny % coarse_grid.ny == 0;
        if !nested {
            return Err(SpaceError::NotNested);
        }
        let (rx, ry) = (fine_grid.nx / coarse_grid.nx, fine_grid.ny / coarse_grid.ny);
        let mut sums = vec![0.0; coarse.num_cells()];
        let mut areas = vec![0.0; coarse.num_cells()];
        for (k, &v) in self.values.iter().enumerate() {
            let (i, j) = (k % fine_grid.nx, k / fine_grid.nx);
            let c = (j / ry) * coarse_grid.nx + i / rx;
            let m = self.mesh.cell_measure(k);
            sums[c] += m * v;
            areas[c] += m;
        }
        Ok(CellFunction { mesh: coarse, values: sums.iter().zip(&areas).map(|(s, a)| s / a).collect() })
    }
}
