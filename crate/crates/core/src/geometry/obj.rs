//! Wavefront OBJ reading and writing (geometry only).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::mesh::Mesh;

fn parse_index(tok: &str, nv: usize, line: usize) -> Result<u32> {
    let head = tok.split('/').next().unwrap_or("");
    let i: i64 = head
        .parse()
        .map_err(|_| Error::parse(format!("line {line}: bad face index {tok:?}")))?;
    let resolved = if i > 0 {
        i - 1
    } else if i < 0 {
        nv as i64 + i
    } else {
        -1
    };
    if resolved < 0 || resolved >= nv as i64 {
        return Err(Error::parse(format!(
            "line {line}: face index {i} out of range ({nv} vertices so far)"
        )));
    }
    Ok(resolved as u32)
}

/// Parse OBJ text. Polygons are fan-triangulated from their first vertex; materials,
/// texture coordinates and normals are ignored.
pub fn parse_obj(text: &str) -> Result<Mesh> {
    let mut mesh = Mesh::default();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut toks = content.split_whitespace();
        match toks.next() {
            Some("v") => {
                let mut c = [0.0; 3];
                for slot in &mut c {
                    let t = toks
                        .next()
                        .ok_or_else(|| Error::parse(format!("line {line}: vertex needs 3 coordinates")))?;
                    *slot = t
                        .parse()
                        .map_err(|_| Error::parse(format!("line {line}: bad coordinate {t:?}")))?;
                }
                mesh.vertices.push(c);
            }
            Some("f") => {
                let idx = toks
                    .map(|t| parse_index(t, mesh.vertices.len(), line))
                    .collect::<Result<Vec<_>>>()?;
                if idx.len() < 3 {
                    return Err(Error::parse(format!("line {line}: face needs at least 3 vertices")));
                }
                for k in 1..idx.len() - 1 {
                    mesh.faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(mesh)
}

/// Load and validate an OBJ triangle mesh.
pub fn load_mesh(path: &Path) -> Result<Mesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut mesh = parse_obj(&text)?;
    mesh.validate()?;
    let non_manifold = mesh.edge_faces().values().filter(|f| f.len() > 2).count();
    if non_manifold > 0 {
        log::warn!("{}: {non_manifold} non-manifold edges", path.display());
    }
    Ok(mesh)
}

pub fn to_obj_string(mesh: &Mesh) -> String {
    let mut s = String::with_capacity(mesh.vertices.len() * 40 + mesh.faces.len() * 20);
    for v in &mesh.vertices {
        // `{}` on f64 prints the shortest representation that round-trips.
        let _ = writeln!(s, "v {} {} {}", v[0], v[1], v[2]);
    }
    for f in &mesh.faces {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

pub fn save_obj(path: &Path, mesh: &Mesh) -> Result<()> {
    std::fs::write(path, to_obj_string(mesh)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBE: &str = "\
# unit cube
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 4 8 7
f 4 7 3
f 1 5 8
f 1 8 4
f 2 3 7
f 2 7 6
";

    #[test]
    fn cube_loads() {
        let m = parse_obj(CUBE).unwrap();
        assert_eq!(m.vertices.len(), 8);
        assert_eq!(m.faces.len(), 12);
    }

    #[test]
    fn quad_fans_into_two_triangles() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1/1 2/2/2 3//3 4\n").unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn negative_indices_resolve() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n").unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn truncated_file_is_a_parse_error() {
        let cut = &CUBE[..CUBE.find("v 0 1 1").unwrap() + 5];
        assert!(matches!(parse_obj(cut), Err(Error::Parse(_))));
        // Faces referencing vertices that never arrive.
        assert!(parse_obj("v 0 0 0\nf 1 2 3\n").is_err());
    }

    #[test]
    fn write_read_round_trip() {
        let m = parse_obj(CUBE).unwrap();
        let back = parse_obj(&to_obj_string(&m)).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn empty_mesh_rejected_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.obj");
        std::fs::write(&p, "# nothing\n").unwrap();
        assert!(load_mesh(&p).is_err());
    }
}
