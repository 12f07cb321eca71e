//! Named model problems on the unit square.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::HarnessError;
use crate::geometry::{Point2, Rect, Tensor2};
use crate::nonlinear::NonlinearProblem;
use crate::problem::DiffusionProblem;

pub const LINEAR_NAMES: [&str; 4] = ["sine", "sine-aniso", "poly", "interface"];
pub const NONLINEAR_NAMES: [&str; 2] = ["sin-cos", "const-source"];

fn sine_u(p: Point2) -> f64 {
    (PI * p.x).sin() * (PI * p.y).sin()
}

fn sine_grad(p: Point2) -> Point2 {
    Point2::new(PI * (PI * p.x).cos() * (PI * p.y).sin(), PI * (PI * p.x).sin() * (PI * p.y).cos())
}

/// Looks up a linear catalog problem.
///
/// - `sine`: `A = I`, `u = sin(πx) sin(πy)`.
/// - `sine-aniso`: `A = diag(1, 100)`, same `u`.
/// - `poly`: `A = I`, `u = x(1-x) y(1-y)`.
/// - `interface`: `A = 1` for `x < 1/2` and `100` beyond, `f = 1`, no closed form.
pub fn linear_problem(name: &str) -> Result<DiffusionProblem, HarnessError> {
    let d = Rect::UNIT;
    let p = match name {
        "sine" => DiffusionProblem::new(name, d, |_| Tensor2::IDENTITY, |p| 2.0 * PI * PI * sine_u(p), 1.0, 1.0)
            .with_exact(sine_u, sine_grad),
        "sine-aniso" => DiffusionProblem::new(
            name,
            d,
            |_| Tensor2::diag(1.0, 100.0),
            |p| 101.0 * PI * PI * sine_u(p),
            1.0,
            100.0,
        )
        .with_exact(sine_u, sine_grad),
        "poly" => DiffusionProblem::new(
            name,
            d,
            |_| Tensor2::IDENTITY,
            |p| 2.0 * (p.x * (1.0 - p.x) + p.y * (1.0 - p.y)),
            1.0,
            1.0,
        )
        .with_exact(
            |p| p.x * (1.0 - p.x) * p.y * (1.0 - p.y),
            |p| Point2::new((1.0 - 2.0 * p.x) * p.y * (1.0 - p.y), p.x * (1.0 - p.x) * (1.0 - 2.0 * p.y)),
        ),
        "interface" => DiffusionProblem::new(
            name,
            d,
            |p| if p.x < 0.5 { Tensor2::IDENTITY } else { Tensor2::scalar(100.0) },
            |_| 1.0,
            1.0,
            100.0,
        )
        .with_interface_x(0.5),
        _ => {
            return Err(HarnessError::UnknownProblem { name: name.into(), available: LINEAR_NAMES.join(", ") });
        }
    };
    Ok(p)
}

/// Looks up a nonlinear catalog problem.
///
/// - `sin-cos`: `A(x, s) = (2 + sin s) I`, `F(s) = cos s`.
/// - `const-source`: `A = I`, `F ≡ 1`.
pub fn nonlinear_problem(name: &str) -> Result<NonlinearProblem, HarnessError> {
    let d = Rect::UNIT;
    match name {
        "sin-cos" => Ok(NonlinearProblem::new(name, d, |_, s| Tensor2::scalar(2.0 + s.sin()), f64::cos, 1.0, 3.0, 1.0)),
        "const-source" => Ok(NonlinearProblem::new(name, d, |_, _| Tensor2::IDENTITY, |_| 1.0, 1.0, 1.0, 1.0)),
        _ => Err(HarnessError::UnknownProblem { name: name.into(), available: NONLINEAR_NAMES.join(", ") }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelfCheck {
    pub points: usize,
    /// Largest `|-div(A∇u) - f| / max(1, |f|)` seen.
    pub max_residual: f64,
}

pub const SELF_CHECK_TOL: f64 = 1e-8;

/// Verifies `-div(A ∇u) = f` for the exact solution at `points` random
/// interior points, differentiating the flux `A∇u` with fourth-order central
/// differences. Points closer than the stencil to a coefficient interface are
/// redrawn. Problems without an exact solution pass trivially.
pub fn self_check(problem: &DiffusionProblem, points: usize, seed: u64) -> Result<SelfCheck, HarnessError> {
    let Some(exact) = &problem.exact else {
        return Ok(SelfCheck { points: 0, max_residual: 0.0 });
    };
    let d = problem.domain;
    let step = 1e-3 * d.width().min(d.height());
    let flux = |p: Point2| problem.tensor(p).apply((exact.grad)(p));
    let central = |p: Point2, e: Point2, pick: fn(Point2) -> f64| {
        let at = |t: f64| pick(flux(p + t * e));
        (-at(2.0 * step) + 8.0 * at(step) - 8.0 * at(-step) + at(-2.0 * step)) / (12.0 * step)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_residual: f64 = 0.0;
    let mut accepted = 0;
    while accepted < points {
        let p = Point2::new(rng.gen_range(d.x0..d.x1), rng.gen_range(d.y0..d.y1));
        if problem.interfaces_x.iter().any(|&c| (p.x - c).abs() <= 3.0 * step) {
            continue;
        }
        accepted += 1;
        let div = central(p, Point2::new(1.0, 0.0), |q| q.x) + central(p, Point2::new(0.0, 1.0), |q| q.y);
        let f = problem.source(p);
        let residual = (-div - f).abs() / f.abs().max(1.0);
        if residual > SELF_CHECK_TOL {
            return Err(HarnessError::SelfCheck {
                problem: problem.name.clone(),
                residual,
                x: p.x,
                y: p.y,
                tolerance: SELF_CHECK_TOL,
            });
        }
        max_residual = max_residual.max(residual);
    }
    Ok(SelfCheck { points, max_residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_passes_self_check() {
        for name in LINEAR_NAMES {
            let p = linear_problem(name).unwrap();
            let c = self_check(&p, 1000, 7).unwrap();
            assert!(c.max_residual <= SELF_CHECK_TOL, "{name}: {c:?}");
        }
    }

    #[test]
    fn wrong_source_is_caught() {
        let p = linear_problem("sine").unwrap();
        let wrong = DiffusionProblem { f: std::sync::Arc::new(|p| PI * PI * sine_u(p)), ..p };
        assert!(matches!(self_check(&wrong, 1000, 7), Err(HarnessError::SelfCheck { .. })));
    }

    #[test]
    fn unknown_names_list_alternatives() {
        let e = linear_problem("nope").unwrap_err().to_string();
        assert!(e.contains("sine-aniso"));
        assert!(nonlinear_problem("sine").is_err());
        assert_eq!(nonlinear_problem("sin-cos").unwrap().f_sup, 1.0);
    }
}
