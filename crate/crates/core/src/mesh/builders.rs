use serde::{Deserialize, Serialize};

use crate::geometry::{Point2, Rect};

use super::{CellPointRule, GridInfo, Mesh, MeshError};

/// Structured mesh family generated from an `nx × ny` grid of a rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Quad,
    /// Each grid rectangle split along its lower-left to upper-right diagonal.
    Triangle { circumcenter: bool },
}

fn grid_vertices(nx: usize, ny: usize, domain: Rect) -> Vec<Point2> {
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = domain.y0 + domain.height() * (j as f64 / ny as f64);
        for i in 0..=nx {
            let x = domain.x0 + domain.width() * (i as f64 / nx as f64);
            vertices.push(Point2::new(x, y));
        }
    }
    vertices
}

fn check_grid(nx: usize, ny: usize, domain: Rect) -> Result<(), MeshError> {
    if nx == 0 || ny == 0 {
        return Err(MeshError::InvalidCounts { nx, ny });
    }
    if domain.is_degenerate() {
        return Err(MeshError::DegenerateDomain(domain));
    }
    Ok(())
}

/// Uniform `nx × ny` rectangular cells, numbered row-major from the lower-left
/// corner, with cell centroids as cell points.
pub fn build_uniform_quad_mesh(nx: usize, ny: usize, domain: Rect) -> Result<Mesh, MeshError> {
    check_grid(nx, ny, domain)?;
    let vertices = grid_vertices(nx, ny, domain);
    let row = nx + 1;
    let mut cells = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let v = j * row + i;
            cells.push(vec![v, v + 1, v + row + 1, v + row]);
        }
    }
    Ok(Mesh::new(vertices, cells, CellPointRule::Centroid)?.with_grid(GridInfo {
        nx,
        ny,
        domain,
        kind: FamilyKind::Quad,
    }))
}

/// `2·nx·ny` triangles; grid rectangle `(i, j)` yields the lower triangle
/// `2(j·nx + i)` and the upper triangle `2(j·nx + i) + 1`.
pub fn build_triangular_mesh(nx: usize, ny: usize, domain: Rect, circumcenter: bool) -> Result<Mesh, MeshError> {
    check_grid(nx, ny, domain)?;
    let vertices = grid_vertices(nx, ny, domain);
    let row = nx + 1;
    let mut cells = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let v = j * row + i;
            cells.push(vec![v, v + 1, v + row + 1]);
            cells.push(vec![v, v + row + 1, v + row]);
        }
    }
    let rule = if circumcenter { CellPointRule::Circumcenter } else { CellPointRule::Centroid };
    Ok(Mesh::new(vertices, cells, rule)?.with_grid(GridInfo {
        nx,
        ny,
        domain,
        kind: FamilyKind::Triangle { circumcenter },
    }))
}

/// A refinement family: level `l` has `nx·2^l × ny·2^l` grid cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshFamily {
    pub kind: FamilyKind,
    pub nx: usize,
    pub ny: usize,
    pub domain: Rect,
}

impl MeshFamily {
    pub fn quad(nx: usize, ny: usize, domain: Rect) -> Self {
        Self { kind: FamilyKind::Quad, nx, ny, domain }
    }

    pub fn triangle(nx: usize, ny: usize, domain: Rect) -> Self {
        Self { kind: FamilyKind::Triangle { circumcenter: false }, nx, ny, domain }
    }

    /// Grid counts at `level`, checked against overflow of the cell count.
    pub fn counts(&self, level: u32) -> Result<(usize, usize), MeshError> {
        let scale = 1usize.checked_shl(level).ok_or(MeshError::Overflow { level })?;
        let nx = self.nx.checked_mul(scale).ok_or(MeshError::Overflow { level })?;
        let ny = self.ny.checked_mul(scale).ok_or(MeshError::Overflow { level })?;
        let per_rect = match self.kind {
            FamilyKind::Quad => 1,
            FamilyKind::Triangle { .. } => 2,
        };
        nx.checked_mul(ny)
            .and_then(|n| n.checked_mul(per_rect))
            .and_then(|n| n.checked_mul(4)) // vertex and face storage stays addressable
            .ok_or(MeshError::Overflow { level })?;
        Ok((nx, ny))
    }

    pub fn refine(&self, level: u32) -> Result<Mesh, MeshError> {
        let (nx, ny) = self.counts(level)?;
        match self.kind {
            FamilyKind::Quad => build_uniform_quad_mesh(nx, ny, self.domain),
            FamilyKind::Triangle { circumcenter } => build_triangular_mesh(nx, ny, self.domain, circumcenter),
        }
    }
}
