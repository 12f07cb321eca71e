//! The DFAMESH line-oriented text format.
//!
//! ```text
//! DFAMESH 1
//! vertices <n>
//! <x> <y>
//! cells <m>
//! <k> <i1> ... <ik>
//! cellpoints <m>
//! <x> <y>
//! ```
//!
//! The `cellpoints` section is optional; without it cell centroids are used.
//! Blank lines are ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::geometry::Point2;

use super::{CellPointRule, Mesh, MeshError};

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh, MeshError> {
    parse_mesh(&fs::read_to_string(path)?)
}

pub fn save_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    fs::write(path, write_mesh(mesh))?;
    Ok(())
}

/// Serializes a mesh. `f64` values use the shortest representation that
/// parses back to the same bits.
pub fn write_mesh(mesh: &Mesh) -> String {
    let mut out = String::from("DFAMESH 1\n");
    let _ = writeln!(out, "vertices {}", mesh.num_vertices());
    for v in mesh.vertices() {
        let _ = writeln!(out, "{} {}", v.x, v.y);
    }
    let _ = writeln!(out, "cells {}", mesh.num_cells());
    for cell in mesh.cells() {
        let _ = write!(out, "{}", cell.len());
        for v in cell {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "cellpoints {}", mesh.num_cells());
    for p in mesh.cell_points() {
        let _ = writeln!(out, "{} {}", p.x, p.y);
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            self.last = i + 1;
            let t = line.trim();
            if !t.is_empty() {
                return Some((i + 1, t));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str), MeshError> {
        self.next().ok_or_else(|| parse_err(self.last + 1, format!("unexpected end of file, expected {what}")))
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse { line, message: message.into() }
}

fn header_count(line: usize, text: &str, keyword: &str) -> Result<usize, MeshError> {
    let mut parts = text.split_whitespace();
    if parts.next() != Some(keyword) {
        return Err(parse_err(line, format!("expected `{keyword} <count>`, found `{text}`")));
    }
    let count = parts
        .next()
        .and_then(|c| c.parse::<usize>().ok())
        .ok_or_else(|| parse_err(line, format!("`{keyword}` needs a non-negative integer count")))?;
    if parts.next().is_some() {
        return Err(parse_err(line, format!("trailing tokens after `{keyword} {count}`")));
    }
    Ok(count)
}

fn parse_point(line: usize, text: &str) -> Result<Point2, MeshError> {
    let coords: Vec<&str> = text.split_whitespace().collect();
    if coords.len() != 2 {
        return Err(parse_err(line, format!("expected two coordinates, found {}", coords.len())));
    }
    let parse = |s: &str| {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| parse_err(line, format!("invalid coordinate `{s}`")))
    };
    Ok(Point2::new(parse(coords[0])?, parse(coords[1])?))
}

pub fn parse_mesh(text: &str) -> Result<Mesh, MeshError> {
    let mut lines = Lines { inner: text.lines().enumerate(), last: 0 };

    let (ln, magic) = lines.expect("`DFAMESH 1` header")?;
    if magic.split_whitespace().collect::<Vec<_>>() != ["DFAMESH", "1"] {
        return Err(parse_err(ln, format!("expected `DFAMESH 1`, found `{magic}`")));
    }

    let (ln, t) = lines.expect("vertices header")?;
    let nv = header_count(ln, t, "vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, t) = lines.expect("a vertex line")?;
        vertices.push(parse_point(ln, t)?);
    }

    let (ln, t) = lines.expect("cells header")?;
    let nc = header_count(ln, t, "cells")?;
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (ln, t) = lines.expect("a cell line")?;
        let ints = t
            .split_whitespace()
            .map(|s| s.parse::<usize>().map_err(|_| parse_err(ln, format!("invalid index `{s}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        let (&k, idx) = ints.split_first().ok_or_else(|| parse_err(ln, "empty cell line"))?;
        if idx.len() != k {
            return Err(parse_err(ln, format!("cell declares {k} vertices but lists {}", idx.len())));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= nv) {
            return Err(parse_err(ln, format!("vertex index {bad} out of range (mesh has {nv} vertices)")));
        }
        cells.push(idx.to_vec());
    }

    let rule = match lines.next() {
        None => CellPointRule::Centroid,
        Some((ln, t)) => {
            let n = header_count(ln, t, "cellpoints")?;
            if n != nc {
                return Err(parse_err(ln, format!("cellpoints count {n} does not match cell count {nc}")));
            }
            let mut points = Vec::with_capacity(n);
            for _ in 0..n {
                let (ln, t) = lines.expect("a cell point line")?;
                points.push(parse_point(ln, t)?);
            }
            if let Some((ln, t)) = lines.next() {
                return Err(parse_err(ln, format!("unexpected trailing content `{t}`")));
            }
            CellPointRule::Explicit(points)
        }
    };

    Mesh::new(vertices, cells, rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;
    use crate::mesh::{build_triangular_mesh, build_uniform_quad_mesh};

    #[test]
    fn round_trip_quads() {
        let m = build_uniform_quad_mesh(2, 2, Rect::UNIT).unwrap();
        let back = parse_mesh(&write_mesh(&m)).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.cells(), m.cells());
        assert_eq!(back.cell_points(), m.cell_points());
        assert_eq!(back.faces(), m.faces());
    }

    #[test]
    fn round_trip_through_file() {
        let m = build_triangular_mesh(3, 2, Rect::new(-1.0, 0.0, 2.0, 0.7), false).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.dfamesh");
        save_mesh(&m, &path).unwrap();
        let back = load_mesh(&path).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.cells(), m.cells());
    }

    #[test]
    fn missing_vertex_names_line() {
        let text = "DFAMESH 1\nvertices 3\n0 0\n1 0\n0 1\ncells 1\n3 0 1 5\n";
        match parse_mesh(text) {
            Err(MeshError::Parse { line, message }) => {
                assert_eq!(line, 7);
                assert!(message.contains('5'), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_inputs() {
        let cases = [
            ("", 1),
            ("DFAMESH 2\n", 1),
            ("DFAMESH 1\nvertices x\n", 2),
            ("DFAMESH 1\nvertices 1\n0 zero\n", 3),
            ("DFAMESH 1\nvertices 1\n0 0\ncells 1\n3 0 0\n", 5),
            ("DFAMESH 1\nvertices 1\n0 0\ncells 0\ncellpoints 2\n", 5),
        ];
        for (text, want_line) in cases {
            match parse_mesh(text) {
                Err(MeshError::Parse { line, .. }) => assert_eq!(line, want_line, "{text:?}"),
                other => panic!("{text:?}: unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn self_intersecting_cell_is_a_validation_error() {
        let text = "DFAMESH 1\nvertices 5\n0 1\n-0.9510565162951535 0.30901699437494745\n\
                    -0.5877852522924732 -0.8090169943749473\n0.5877852522924729 -0.8090169943749476\n\
                    0.9510565162951536 0.30901699437494723\ncells 1\n5 0 2 4 1 3\n";
        assert!(matches!(parse_mesh(text), Err(MeshError::SelfIntersecting { cell: 0 })));
    }
}
