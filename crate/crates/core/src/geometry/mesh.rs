use std::collections::HashMap;

use crate::error::{Error, Result};

use super::vec3::{self, Vec3};

/// Undirected edge key, smaller vertex index first.
pub type Edge = (u32, u32);

#[inline]
pub fn edge_key(a: u32, b: u32) -> Edge {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Triangle mesh.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
}

impl Mesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Self {
        Mesh { vertices, faces }
    }

    /// Checks indices, rejects empty meshes and drops zero-area faces. Returns the
    /// number of faces dropped.
    pub fn validate(&mut self) -> Result<usize> {
        if self.vertices.is_empty() || self.faces.is_empty() {
            return Err(Error::invalid("empty mesh"));
        }
        let nv = self.vertices.len() as u32;
        if let Some((i, f)) = self.faces.iter().enumerate().find(|(_, f)| f.iter().any(|&v| v >= nv)) {
            return Err(Error::invalid(format!(
                "face {i} references vertex {:?} but mesh has {nv} vertices",
                f
            )));
        }
        if self.vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite vertex coordinate"));
        }
        let before = self.faces.len();
        let verts = &self.vertices;
        self.faces.retain(|f| {
            let [a, b, c] = f.map(|i| verts[i as usize]);
            vec3::norm(vec3::cross(vec3::sub(b, a), vec3::sub(c, a))) > 0.0
        });
        let dropped = before - self.faces.len();
        if dropped > 0 {
            log::warn!("dropped {dropped} degenerate faces");
        }
        if self.faces.is_empty() {
            return Err(Error::invalid("mesh has no non-degenerate faces"));
        }
        Ok(dropped)
    }

    pub fn corners(&self, f: usize) -> [Vec3; 3] {
        self.faces[f].map(|i| self.vertices[i as usize])
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.corners(f);
        0.5 * vec3::norm(vec3::cross(vec3::sub(b, a), vec3::sub(c, a)))
    }

    /// Unit normal by the right-hand rule over the face winding.
    pub fn face_normal(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.corners(f);
        vec3::normalized(vec3::cross(vec3::sub(b, a), vec3::sub(c, a))).unwrap_or([0.0, 0.0, 1.0])
    }

    pub fn face_centroid(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.corners(f);
        vec3::scale(vec3::add(vec3::add(a, b), c), 1.0 / 3.0)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        vec3::bounds(&self.vertices)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        self.bounds().map_or(0.0, |(lo, hi)| vec3::dist(lo, hi))
    }

    /// Edge to adjacent faces, in face order.
    pub fn edge_faces(&self) -> HashMap<Edge, Vec<usize>> {
        let mut map: HashMap<Edge, Vec<usize>> = HashMap::with_capacity(self.faces.len() * 3 / 2);
        for (fi, f) in self.faces.iter().enumerate() {
            for k in 0..3 {
                map.entry(edge_key(f[k], f[(k + 1) % 3])).or_default().push(fi);
            }
        }
        map
    }

    /// Connected components over faces sharing an edge. Returns a component id per
    /// face, ids numbered by first appearance in face order.
    pub fn face_components(&self) -> Vec<usize> {
        let n = self.faces.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for faces in self.edge_faces().values() {
            for w in faces.windows(2) {
                let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut ids = HashMap::new();
        (0..n)
            .map(|f| {
                let r = find(&mut parent, f);
                let next = ids.len();
                *ids.entry(r).or_insert(next)
            })
            .collect()
    }

    /// Appends another mesh, offsetting its indices.
    pub fn append(&mut self, other: &Mesh) {
        let off = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.faces
            .extend(other.faces.iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
    }

    /// The faces selected by `keep`, with vertices compacted.
    pub fn submesh(&self, keep: impl Fn(usize) -> bool) -> Mesh {
        let mut remap: HashMap<u32, u32> = HashMap::new();
        let mut out = Mesh::default();
        for (fi, f) in self.faces.iter().enumerate() {
            if !keep(fi) {
                continue;
            }
            let g = f.map(|v| {
                *remap.entry(v).or_insert_with(|| {
                    out.vertices.push(self.vertices[v as usize]);
                    (out.vertices.len() - 1) as u32
                })
            });
            out.faces.push(g);
        }
        out
    }

    /// Axis-aligned box as 8 vertices and 12 outward-wound triangles.
    pub fn cuboid(lo: Vec3, hi: Vec3) -> Mesh {
        let v = |x: usize, y: usize, z: usize| -> Vec3 {
            [[lo[0], hi[0]][x], [lo[1], hi[1]][y], [lo[2], hi[2]][z]]
        };
        let vertices = vec![
            v(0, 0, 0),
            v(1, 0, 0),
            v(1, 1, 0),
            v(0, 1, 0),
            v(0, 0, 1),
            v(1, 0, 1),
            v(1, 1, 1),
            v(0, 1, 1),
        ];
        let faces = vec![
            [0, 2, 1],
            [0, 3, 2], // -z
            [4, 5, 6],
            [4, 6, 7], // +z
            [0, 1, 5],
            [0, 5, 4], // -y
            [3, 7, 6],
            [3, 6, 2], // +y
            [0, 4, 7],
            [0, 7, 3], // -x
            [1, 2, 6],
            [1, 6, 5], // +x
        ];
        Mesh { vertices, faces }
    }
}
