//! Analytic scalar and vector fields used as test functions and random samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Point2, Rect};

/// A smooth 1D profile together with its first two derivatives.
pub trait Profile1d {
    fn value(&self, t: f64) -> f64;
    fn d1(&self, t: f64) -> f64;
    fn d2(&self, t: f64) -> f64;
}

/// `C^∞` bump `exp(-1 / (1 - s²))` with `s = (t - center) / radius`, zero for `|s| ≥ 1`.
#[derive(Debug, Clone, Copy)]
pub struct Bump {
    pub center: f64,
    pub radius: f64,
}

impl Profile1d for Bump {
    fn value(&self, t: f64) -> f64 {
        let s = (t - self.center) / self.radius;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        (-1.0 / (1.0 - s * s)).exp()
    }

    fn d1(&self, t: f64) -> f64 {
        let s = (t - self.center) / self.radius;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        let q = 1.0 - s * s;
        // d/ds exp(-1/q) = exp(-1/q) · (-2s / q²)
        self.value(t) * (-2.0 * s / (q * q)) / self.radius
    }

    fn d2(&self, t: f64) -> f64 {
        let s = (t - self.center) / self.radius;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        let q = 1.0 - s * s;
        let g = -2.0 * s / (q * q);
        // g' = (-2 q² + 2s · 2q · (-2s)) / q⁴ = (-2q - 8s²) / q³
        let dg = (-2.0 * q - 8.0 * s * s) / (q * q * q);
        self.value(t) * (g * g + dg) / (self.radius * self.radius)
    }
}

/// `sin(π (t - a) / (b - a)) · bump(t)`.
#[derive(Debug, Clone, Copy)]
pub struct SineBump {
    pub a: f64,
    pub b: f64,
    pub bump: Bump,
}

impl SineBump {
    fn k(&self) -> f64 {
        std::f64::consts::PI / (self.b - self.a)
    }
}

impl Profile1d for SineBump {
    fn value(&self, t: f64) -> f64 {
        (self.k() * (t - self.a)).sin() * self.bump.value(t)
    }

    fn d1(&self, t: f64) -> f64 {
        let k = self.k();
        let (s, c) = (k * (t - self.a)).sin_cos();
        k * c * self.bump.value(t) + s * self.bump.d1(t)
    }

    fn d2(&self, t: f64) -> f64 {
        let k = self.k();
        let (s, c) = (k * (t - self.a)).sin_cos();
        -k * k * s * self.bump.value(t) + 2.0 * k * c * self.bump.d1(t) + s * self.bump.d2(t)
    }
}

/// Separable product `φ(x, y) = g(x) h(y)`.
#[derive(Debug, Clone, Copy)]
pub struct Separable<G, H> {
    pub gx: G,
    pub hy: H,
}

impl<G: Profile1d, H: Profile1d> Separable<G, H> {
    pub fn value(&self, p: Point2) -> f64 {
        self.gx.value(p.x) * self.hy.value(p.y)
    }

    pub fn gradient(&self, p: Point2) -> Point2 {
        Point2::new(self.gx.d1(p.x) * self.hy.value(p.y), self.gx.value(p.x) * self.hy.d1(p.y))
    }

    /// `div(diag(ax, ay) ∇φ)` for a constant diagonal tensor.
    pub fn div_diag_grad(&self, p: Point2, ax: f64, ay: f64) -> f64 {
        ax * self.gx.d2(p.x) * self.hy.value(p.y) + ay * self.gx.value(p.x) * self.hy.d2(p.y)
    }
}

/// The standard compactly supported test function on a rectangle: sine
/// profile times a bump supported in the middle 80% of each side.
pub fn sine_bump_test_function(domain: Rect) -> Separable<SineBump, SineBump> {
    let profile = |a: f64, b: f64| SineBump {
        a,
        b,
        bump: Bump { center: 0.5 * (a + b), radius: 0.4 * (b - a) },
    };
    Separable { gx: profile(domain.x0, domain.x1), hy: profile(domain.y0, domain.y1) }
}

/// Random trigonometric polynomial `Σ a_kl sin(kπx̂) sin(lπŷ)` over the
/// rectangle with `1 ≤ k, l ≤ MODES`, normalized so `|v| ≤ 1`. It vanishes on
/// the rectangle's boundary.
#[derive(Debug, Clone)]
pub struct RandomSineField {
    domain: Rect,
    coeffs: [[f64; Self::MODES]; Self::MODES],
}

impl RandomSineField {
    pub const MODES: usize = 4;

    pub fn new(domain: Rect, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coeffs = [[0.0; Self::MODES]; Self::MODES];
        for (k, row) in coeffs.iter_mut().enumerate() {
            for (l, c) in row.iter_mut().enumerate() {
                *c = rng.gen_range(-1.0..=1.0) / ((k + 1) * (l + 1)) as f64;
            }
        }
        let total: f64 = coeffs.iter().flatten().map(|c| c.abs()).sum();
        if total > 0.0 {
            coeffs.iter_mut().flatten().for_each(|c| *c /= total);
        }
        Self { domain, coeffs }
    }

    pub fn eval(&self, p: Point2) -> f64 {
        let pi = std::f64::consts::PI;
        let xs = (p.x - self.domain.x0) / self.domain.width();
        let ys = (p.y - self.domain.y0) / self.domain.height();
        let mut v = 0.0;
        for (k, row) in self.coeffs.iter().enumerate() {
            let sx = ((k + 1) as f64 * pi * xs).sin();
            for (l, c) in row.iter().enumerate() {
                v += c * sx * ((l + 1) as f64 * pi * ys).sin();
            }
        }
        v.clamp(-1.0, 1.0)
    }
}

/// Independent uniform values in `[-1, 1]`.
pub fn white_noise(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}
