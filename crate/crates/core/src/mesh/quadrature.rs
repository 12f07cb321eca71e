//! Quadrature on triangles, polygonal cells and edges.

use crate::geometry::Point2;

use super::Mesh;

/// Seven-point rule exact for polynomials of degree 5, as barycentric
/// coordinates and weights summing to one.
const TRI7: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    ([0.059_715_871_789_770, 0.470_142_064_105_115, 0.470_142_064_105_115], 0.132_394_152_788_506),
    ([0.470_142_064_105_115, 0.059_715_871_789_770, 0.470_142_064_105_115], 0.132_394_152_788_506),
    ([0.470_142_064_105_115, 0.470_142_064_105_115, 0.059_715_871_789_770], 0.132_394_152_788_506),
    ([0.797_426_985_353_087, 0.101_286_507_323_456, 0.101_286_507_323_456], 0.125_939_180_544_827),
    ([0.101_286_507_323_456, 0.797_426_985_353_087, 0.101_286_507_323_456], 0.125_939_180_544_827),
    ([0.101_286_507_323_456, 0.101_286_507_323_456, 0.797_426_985_353_087], 0.125_939_180_544_827),
];

/// `∫_T f` over the triangle `(a, b, c)` with the degree-5 rule; the result is
/// signed by the orientation of the triangle.
pub fn integrate_triangle(a: Point2, b: Point2, c: Point2, f: &dyn Fn(Point2) -> f64) -> f64 {
    let signed_area = 0.5 * (b - a).cross(c - a);
    let sum: f64 = TRI7
        .iter()
        .map(|(l, w)| {
            let p = Point2::new(l[0] * a.x + l[1] * b.x + l[2] * c.x, l[0] * a.y + l[1] * b.y + l[2] * c.y);
            w * f(p)
        })
        .sum();
    signed_area * sum
}

/// `∫_K f` over cell `k`, fanning the polygon from its first vertex with
/// signed sub-triangles (valid for any simple polygon).
pub fn integrate_cell(mesh: &Mesh, k: usize, f: &dyn Fn(Point2) -> f64) -> f64 {
    let pts: Vec<Point2> = mesh.cell_vertices(k).collect();
    (1..pts.len() - 1).map(|i| integrate_triangle(pts[0], pts[i], pts[i + 1], f)).sum()
}

/// Two-point Gauss nodes on the segment `[a, b]`; each node carries weight `|b - a| / 2`.
pub fn gauss2_edge(a: Point2, b: Point2) -> [Point2; 2] {
    let m = a.midpoint(b);
    let half = 0.5 * (b - a);
    let s = 1.0 / 3f64.sqrt();
    [m + (-s) * half, m + s * half]
}
