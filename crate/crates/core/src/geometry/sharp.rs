use super::mesh::{Edge, Mesh};
use super::vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SharpEdge {
    pub edge: Edge,
    /// Angle between the adjacent face normals, degrees; 0 means coplanar.
    pub dihedral_deg: f64,
    pub faces: (usize, usize),
}

/// Dihedral angle between two faces in degrees, measured between their normals.
pub fn dihedral_deg(mesh: &Mesh, f0: usize, f1: usize) -> f64 {
    vec3::angle_between(mesh.face_normal(f0), mesh.face_normal(f1)).to_degrees()
}

/// Interior edges whose dihedral angle exceeds `angle_threshold_deg`, sorted by edge.
///
/// Boundary edges (one adjacent face) are skipped. On non-manifold edges the largest
/// pairwise dihedral is reported.
pub fn sharp_edges(mesh: &Mesh, angle_threshold_deg: f64) -> Vec<SharpEdge> {
    let mut out: Vec<SharpEdge> = mesh
        .edge_faces()
        .into_iter()
        .filter(|(_, faces)| faces.len() >= 2)
        .filter_map(|(edge, faces)| {
            let mut best: Option<(f64, (usize, usize))> = None;
            for i in 0..faces.len() {
                for j in i + 1..faces.len() {
                    let d = dihedral_deg(mesh, faces[i], faces[j]);
                    if best.is_none_or(|(b, _)| d > b) {
                        best = Some((d, (faces[i], faces[j])));
                    }
                }
            }
            let (d, pair) = best?;
            (d > angle_threshold_deg).then_some(SharpEdge {
                edge,
                dihedral_deg: d,
                faces: pair,
            })
        })
        .collect();
    out.sort_by_key(|e| e.edge);
    out
}
