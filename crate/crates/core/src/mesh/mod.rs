//! Polytopal 2D meshes: connectivity, geometric quantities, regularity metrics,
//! structured mesh families and the DFAMESH text format.
//!
//! A [`Mesh`] is immutable once built. Faces are derived from the cell
//! polygons (never stored on disk). Each face has an *owner* cell, the first
//! cell that lists it, and an optional *neighbor*; the stored unit normal
//! points out of the owner, so the neighbor's outward normal is its exact
//! negation.

mod builders;
mod io;
pub mod quadrature;
mod regularity;

use std::collections::HashMap;

use thiserror::Error;

use crate::geometry::{circumcenter, polygon_centroid, polygon_signed_area, segments_intersect, Point2, Rect};

pub use builders::{build_triangular_mesh, build_uniform_quad_mesh, FamilyKind, MeshFamily};
pub use io::{load_mesh, parse_mesh, save_mesh, write_mesh};
pub use regularity::{regularity, RegularityMetrics};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid cell counts nx={nx}, ny={ny}: both must be at least 1")]
    InvalidCounts { nx: usize, ny: usize },
    #[error("degenerate domain rectangle {0:?}")]
    DegenerateDomain(Rect),
    #[error("cell counts overflow at refinement level {level}")]
    Overflow { level: u32 },
    #[error("cell {cell} has {count} vertices, at least 3 are required")]
    TooFewVertices { cell: usize, count: usize },
    #[error("cell {cell} references vertex {index} but only {vertex_count} vertices exist")]
    VertexOutOfRange { cell: usize, index: usize, vertex_count: usize },
    #[error("cell {cell} repeats vertex {index}")]
    RepeatedVertex { cell: usize, index: usize },
    #[error("cell {cell} is not counter-clockwise or has zero area (signed area {area})")]
    NotCounterClockwise { cell: usize, area: f64 },
    #[error("cell {cell} is a self-intersecting polygon")]
    SelfIntersecting { cell: usize },
    #[error("edge ({0}, {1}) is shared by more than two cells or with inconsistent orientation")]
    NonManifoldEdge(usize, usize),
    #[error("cell point of cell {cell} is not strictly inside face {face} (distance {distance:e})")]
    CellPointNotInterior { cell: usize, face: usize, distance: f64 },
    #[error("circumcenter rule requires triangles, cell {cell} has {count} vertices")]
    CircumcenterNeedsTriangle { cell: usize, count: usize },
    #[error("expected {expected} cell points, found {found}")]
    CellPointCount { expected: usize, found: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How the cell point `x_K` of every cell is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum CellPointRule {
    Centroid,
    /// Triangles only. Rejected when a circumcenter is on or outside its cell.
    Circumcenter,
    Explicit(Vec<Point2>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    /// Endpoints, ordered counter-clockwise with respect to the owner.
    pub vertices: [usize; 2],
    pub owner: usize,
    pub neighbor: Option<usize>,
    /// Length `|σ|`.
    pub measure: f64,
    /// Unit normal pointing out of the owner.
    pub normal: Point2,
    pub midpoint: Point2,
    /// `d_{K,σ}` for the owner.
    pub d_owner: f64,
    /// `d_{L,σ}` for the neighbor, if any.
    pub d_neighbor: Option<f64>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.neighbor.is_none()
    }

    /// `d_σ`: `d_{K,σ} + d_{L,σ}` on interior faces, `d_{K,σ}` on the boundary.
    pub fn d_sigma(&self) -> f64 {
        match self.d_neighbor {
            Some(dl) => self.d_owner + dl,
            None => self.d_owner,
        }
    }
}

/// Structured origin of a generated mesh, used to relate nested levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridInfo {
    pub nx: usize,
    pub ny: usize,
    pub domain: Rect,
    pub kind: FamilyKind,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point2>,
    cells: Vec<Vec<usize>>,
    faces: Vec<Face>,
    cell_faces: Vec<Vec<usize>>,
    cell_points: Vec<Point2>,
    cell_measures: Vec<f64>,
    cell_diameters: Vec<f64>,
    h: f64,
    grid: Option<GridInfo>,
}

impl Mesh {
    /// Builds a mesh from counter-clockwise cell polygons, deriving faces and
    /// all geometric quantities, and validates it.
    pub fn new(vertices: Vec<Point2>, cells: Vec<Vec<usize>>, rule: CellPointRule) -> Result<Self, MeshError> {
        let nv = vertices.len();
        for (k, cell) in cells.iter().enumerate() {
            if cell.len() < 3 {
                return Err(MeshError::TooFewVertices { cell: k, count: cell.len() });
            }
            for (i, &v) in cell.iter().enumerate() {
                if v >= nv {
                    return Err(MeshError::VertexOutOfRange { cell: k, index: v, vertex_count: nv });
                }
                if cell[..i].contains(&v) {
                    return Err(MeshError::RepeatedVertex { cell: k, index: v });
                }
            }
        }

        let mut cell_measures = Vec::with_capacity(cells.len());
        let mut cell_diameters = Vec::with_capacity(cells.len());
        let mut centroids = Vec::with_capacity(cells.len());
        for (k, cell) in cells.iter().enumerate() {
            let pts: Vec<Point2> = cell.iter().map(|&v| vertices[v]).collect();
            let area = polygon_signed_area(&pts);
            if !(area > 0.0) {
                return Err(MeshError::NotCounterClockwise { cell: k, area });
            }
            if pts.len() > 3 && is_self_intersecting(&pts) {
                return Err(MeshError::SelfIntersecting { cell: k });
            }
            let mut diam: f64 = 0.0;
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    diam = diam.max(pts[i].dist(pts[j]));
                }
            }
            cell_measures.push(area);
            cell_diameters.push(diam);
            centroids.push(polygon_centroid(&pts));
        }

        let cell_points = match rule {
            CellPointRule::Centroid => centroids,
            CellPointRule::Circumcenter => cells
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    if c.len() != 3 {
                        return Err(MeshError::CircumcenterNeedsTriangle { cell: k, count: c.len() });
                    }
                    Ok(circumcenter(vertices[c[0]], vertices[c[1]], vertices[c[2]]))
                })
                .collect::<Result<Vec<_>, _>>()?,
            CellPointRule::Explicit(points) => {
                if points.len() != cells.len() {
                    return Err(MeshError::CellPointCount { expected: cells.len(), found: points.len() });
                }
                points
            }
        };

        // Faces in first-seen order: cells in order, local edges (v_i, v_{i+1}) in order.
        let mut faces: Vec<Face> = Vec::new();
        let mut cell_faces: Vec<Vec<usize>> = Vec::with_capacity(cells.len());
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        for (k, cell) in cells.iter().enumerate() {
            let mut local = Vec::with_capacity(cell.len());
            for i in 0..cell.len() {
                let (a, b) = (cell[i], cell[(i + 1) % cell.len()]);
                let key = (a.min(b), a.max(b));
                match lookup.get(&key) {
                    None => {
                        let (pa, pb) = (vertices[a], vertices[b]);
                        let edge = pb - pa;
                        let measure = edge.norm();
                        let normal = (1.0 / measure) * edge.perp_cw();
                        let midpoint = pa.midpoint(pb);
                        let d_owner = (midpoint - cell_points[k]).dot(normal);
                        lookup.insert(key, faces.len());
                        local.push(faces.len());
                        faces.push(Face {
                            vertices: [a, b],
                            owner: k,
                            neighbor: None,
                            measure,
                            normal,
                            midpoint,
                            d_owner,
                            d_neighbor: None,
                        });
                    }
                    Some(&f) => {
                        let face = &mut faces[f];
                        // The neighbor must traverse the edge in the opposite direction.
                        if face.neighbor.is_some() || face.vertices != [b, a] {
                            return Err(MeshError::NonManifoldEdge(key.0, key.1));
                        }
                        face.neighbor = Some(k);
                        face.d_neighbor = Some((cell_points[k] - face.midpoint).dot(face.normal));
                        local.push(f);
                    }
                }
            }
            cell_faces.push(local);
        }

        for (f, face) in faces.iter().enumerate() {
            if !(face.d_owner > 0.0) {
                return Err(MeshError::CellPointNotInterior { cell: face.owner, face: f, distance: face.d_owner });
            }
            if let (Some(l), Some(dl)) = (face.neighbor, face.d_neighbor) {
                if !(dl > 0.0) {
                    return Err(MeshError::CellPointNotInterior { cell: l, face: f, distance: dl });
                }
            }
        }

        let h = cell_diameters.iter().copied().fold(0.0, f64::max);
        Ok(Self { vertices, cells, faces, cell_faces, cell_points, cell_measures, cell_diameters, h, grid: None })
    }

    pub(crate) fn with_grid(mut self, grid: GridInfo) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn grid(&self) -> Option<&GridInfo> {
        self.grid.as_ref()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> &Face {
        &self.faces[f]
    }

    /// Faces of cell `k`; local face `i` joins local vertices `i` and `i + 1`.
    pub fn cell_faces(&self, k: usize) -> &[usize] {
        &self.cell_faces[k]
    }

    pub fn cell_vertices(&self, k: usize) -> impl Iterator<Item = Point2> + '_ {
        self.cells[k].iter().map(move |&v| self.vertices[v])
    }

    pub fn cell_points(&self) -> &[Point2] {
        &self.cell_points
    }

    pub fn cell_point(&self, k: usize) -> Point2 {
        self.cell_points[k]
    }

    pub fn cell_measures(&self) -> &[f64] {
        &self.cell_measures
    }

    pub fn cell_measure(&self, k: usize) -> f64 {
        self.cell_measures[k]
    }

    pub fn cell_diameter(&self, k: usize) -> f64 {
        self.cell_diameters[k]
    }

    /// Area centroid of cell `k` (independent of the cell point rule).
    pub fn cell_centroid(&self, k: usize) -> Point2 {
        let pts: Vec<Point2> = self.cell_vertices(k).collect();
        polygon_centroid(&pts)
    }

    /// Mesh size `h_M`, the largest cell diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Total area `Σ_K |K|`.
    pub fn area(&self) -> f64 {
        self.cell_measures.iter().sum()
    }

    pub fn is_triangular(&self) -> bool {
        self.cells.iter().all(|c| c.len() == 3)
    }

    pub fn interior_faces(&self) -> impl Iterator<Item = (usize, &Face)> {
        self.faces.iter().enumerate().filter(|(_, f)| !f.is_boundary())
    }

    pub fn boundary_faces(&self) -> impl Iterator<Item = (usize, &Face)> {
        self.faces.iter().enumerate().filter(|(_, f)| f.is_boundary())
    }

    /// `d_{K,σ}` for cell `k` and one of its faces.
    pub fn d_cell_face(&self, k: usize, f: usize) -> f64 {
        let face = &self.faces[f];
        if face.owner == k {
            face.d_owner
        } else {
            debug_assert_eq!(face.neighbor, Some(k));
            face.d_neighbor.expect("cell is not adjacent to face")
        }
    }

    /// Unit normal of face `f` pointing out of cell `k`.
    pub fn normal(&self, k: usize, f: usize) -> Point2 {
        let face = &self.faces[f];
        if face.owner == k {
            face.normal
        } else {
            -face.normal
        }
    }

    /// The cell across face `f` from `k`, `None` on the boundary.
    pub fn other_cell(&self, f: usize, k: usize) -> Option<usize> {
        let face = &self.faces[f];
        if face.owner == k {
            face.neighbor
        } else {
            Some(face.owner)
        }
    }
}

fn is_self_intersecting(pts: &[Point2]) -> bool {
    let n = pts.len();
    for i in 0..n {
        for j in i + 1..n {
            // Adjacent edges share a vertex by construction.
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_intersect(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]) {
                return true;
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square_cells() -> (Vec<Point2>, Vec<Vec<usize>>) {
        let v = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        (v, vec![vec![0, 1, 2, 3]])
    }

    #[test]
    fn clockwise_cell_rejected() {
        let (v, _) = unit_square_cells();
        let err = Mesh::new(v, vec![vec![0, 3, 2, 1]], CellPointRule::Centroid).unwrap_err();
        assert!(matches!(err, MeshError::NotCounterClockwise { cell: 0, .. }));
    }

    #[test]
    fn pentagram_rejected() {
        // Visiting every second vertex of a convex pentagon gives a positively
        // oriented but self-intersecting polygon.
        let v: Vec<Point2> = (0..5)
            .map(|k| {
                let t = std::f64::consts::FRAC_PI_2 + 2.0 * std::f64::consts::PI * k as f64 / 5.0;
                Point2::new(t.cos(), t.sin())
            })
            .collect();
        let err = Mesh::new(v, vec![vec![0, 2, 4, 1, 3]], CellPointRule::Centroid).unwrap_err();
        assert!(matches!(err, MeshError::SelfIntersecting { cell: 0 }), "{err}");
    }

    #[test]
    fn missing_vertex_rejected() {
        let (v, _) = unit_square_cells();
        let err = Mesh::new(v, vec![vec![0, 1, 7]], CellPointRule::Centroid).unwrap_err();
        assert!(matches!(err, MeshError::VertexOutOfRange { index: 7, .. }));
    }

    #[test]
    fn cell_point_outside_rejected() {
        let (v, c) = unit_square_cells();
        let err = Mesh::new(v, c, CellPointRule::Explicit(vec![Point2::new(1.5, 0.5)])).unwrap_err();
        assert!(matches!(err, MeshError::CellPointNotInterior { .. }));
    }

    #[test]
    fn same_orientation_edge_rejected() {
        let v = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        // Two copies of the same triangle overlap and share edges with equal orientation.
        let err = Mesh::new(v, vec![vec![0, 1, 2], vec![0, 1, 3]], CellPointRule::Centroid).unwrap_err();
        assert!(matches!(err, MeshError::NonManifoldEdge(0, 1)));
    }

    #[test]
    fn single_cell_geometry() {
        let (v, c) = unit_square_cells();
        let mesh = Mesh::new(v, c, CellPointRule::Centroid).unwrap();
        assert_eq!(mesh.num_faces(), 4);
        assert!(mesh.faces().iter().all(|f| f.is_boundary() && (f.d_owner - 0.5).abs() < 1e-15));
        assert_eq!(mesh.cell_point(0), Point2::new(0.5, 0.5));
        assert_eq!(mesh.h(), 2f64.sqrt());
    }
}
