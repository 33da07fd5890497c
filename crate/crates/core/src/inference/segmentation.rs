use crate::error::{Error, Result};
use crate::geometry::Mesh;
use crate::tensor::Tensor;

/// Index of the largest value; ties go to the smallest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Per-point argmax labels.
pub fn point_labels(seg_logits: &Tensor) -> Vec<usize> {
    (0..seg_logits.rows()).map(|j| argmax(seg_logits.row(j))).collect()
}

/// Majority label over each face's samples (ties to the smallest label) and the
/// sorted set of labels present on faces.
pub fn decode_segmentation(
    labels: &[usize],
    point_faces: &[u32],
    face_count: usize,
    label_count: usize,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if labels.len() != point_faces.len() {
        return Err(Error::invalid("one face index per point required"));
    }
    let mut votes = vec![0u32; face_count * label_count];
    for (&l, &f) in labels.iter().zip(point_faces) {
        let f = f as usize;
        if f >= face_count || l >= label_count {
            return Err(Error::invalid(format!("point on face {f} with label {l} out of range")));
        }
        votes[f * label_count + l] += 1;
    }
    let mut face_labels = Vec::with_capacity(face_count);
    for f in 0..face_count {
        let row = &votes[f * label_count..(f + 1) * label_count];
        if row.iter().all(|&c| c == 0) {
            return Err(Error::invalid(format!("face {f} has no samples")));
        }
        let mut best = 0;
        for (i, &c) in row.iter().enumerate() {
            if c > row[best] {
                best = i;
            }
        }
        face_labels.push(best);
    }
    Ok((face_labels.clone(), present(&face_labels)))
}

pub fn present(face_labels: &[usize]) -> Vec<usize> {
    let mut q: Vec<usize> = face_labels.to_vec();
    q.sort_unstable();
    q.dedup();
    q
}

/// Within every edge-connected component, assign the label covering the largest
/// total face area (ties to the smallest label).
pub fn refine_connected_components(mesh: &Mesh, face_labels: &[usize]) -> Vec<usize> {
    let comp = mesh.face_components();
    let n_comp = comp.iter().max().map_or(0, |&c| c + 1);
    let n_labels = face_labels.iter().max().map_or(0, |&l| l + 1);
    let mut area = vec![0.0; n_comp * n_labels];
    for (f, (&c, &l)) in comp.iter().zip(face_labels).enumerate() {
        area[c * n_labels + l] += mesh.face_area(f);
    }
    let winner: Vec<usize> = (0..n_comp)
        .map(|c| {
            let row = &area[c * n_labels..(c + 1) * n_labels];
            let mut best = face_labels.len(); // sentinel: no label seen yet
            for (l, &a) in row.iter().enumerate() {
                if a > 0.0 && (best == face_labels.len() || a > row[best]) {
                    best = l;
                }
            }
            best
        })
        .collect();
    comp.iter()
        .zip(face_labels)
        .map(|(&c, &l)| if winner[c] < face_labels.len() { winner[c] } else { l })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn majority_and_ties() {
        let (f, q) = decode_segmentation(&[3, 3, 2, 2, 5, 1, 4], &[0, 0, 1, 1, 1, 2, 2], 3, 6).unwrap();
        assert_eq!(f, vec![3, 2, 1]);
        assert_eq!(q, vec![1, 2, 3]);
    }

    #[test]
    fn uncovered_face() {
        assert!(decode_segmentation(&[0], &[0], 2, 1).is_err());
    }

    #[test]
    fn argmax_ties_to_smallest() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }

    #[test]
    fn area_vote_per_component() {
        // component A: a big and a small triangle sharing an edge; component B separate
        let mesh = Mesh {
            vertices: vec![
                [0.0, 0.0, 0.0],
                [3.0, 0.0, 0.0],
                [0.0, 3.0, 0.0],
                [0.0, 0.0, 0.5],
                [10.0, 0.0, 0.0],
                [11.0, 0.0, 0.0],
                [10.0, 1.0, 0.0],
            ],
            faces: vec![[0, 1, 2], [0, 1, 3], [4, 5, 6]],
        };
        let out = refine_connected_components(&mesh, &[1, 2, 2]);
        assert_eq!(out, vec![1, 1, 2]);
        assert_eq!(refine_connected_components(&mesh, &out), out);
    }
}
