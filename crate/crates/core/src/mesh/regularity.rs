use serde::Serialize;

use super::Mesh;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityMetrics {
    /// `θ_M`: largest ratio `d_{K,σ}/d_{L,σ}` across interior faces (1 when there are none).
    pub theta: f64,
    /// `η_T`: largest ratio of triangle diameter to inscribed-circle diameter.
    /// `None` unless every cell is a triangle.
    pub eta: Option<f64>,
    pub h: f64,
    /// Largest angle (radians) between `x_L - x_K` and the face normal over interior faces.
    pub tpfa_admissibility_defect: f64,
}

pub fn regularity(mesh: &Mesh) -> RegularityMetrics {
    let mut theta: f64 = 1.0;
    let mut defect: f64 = 0.0;
    for (_, face) in mesh.interior_faces() {
        let (dk, dl) = (face.d_owner, face.d_neighbor.unwrap_or(face.d_owner));
        theta = theta.max(dk / dl).max(dl / dk);

        let l = face.neighbor.expect("interior face");
        let join = mesh.cell_point(l) - mesh.cell_point(face.owner);
        let angle = join.cross(face.normal).abs().atan2(join.dot(face.normal).abs());
        defect = defect.max(angle);
    }

    let eta = mesh.is_triangular().then(|| {
        (0..mesh.num_cells())
            .map(|k| {
                let perimeter: f64 = mesh.cell_faces(k).iter().map(|&f| mesh.face(f).measure).sum();
                let inradius = 2.0 * mesh.cell_measure(k) / perimeter;
                mesh.cell_diameter(k) / (2.0 * inradius)
            })
            .fold(1.0, f64::max)
    });

    RegularityMetrics { theta, eta, h: mesh.h(), tpfa_admissibility_defect: defect }
}
