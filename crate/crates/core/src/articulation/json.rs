//! JSON interchange:
//! `{"parts":[{"id","parent","motion_type","prismatic":{"dir","range"}?,"revolute":{"dir","point","range"}?}],"face_labels":[..]}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

use super::structure::{ArticulatedStructure, MotionSpec, MotionType, Prismatic, Revolute};

#[derive(Serialize, Deserialize)]
struct PrismaticJson {
    dir: Vec3,
    range: [f64; 2],
}

#[derive(Serialize, Deserialize)]
struct RevoluteJson {
    dir: Vec3,
    point: Vec3,
    range: [f64; 2],
}

#[derive(Serialize, Deserialize)]
struct PartJson {
    id: usize,
    parent: Option<usize>,
    motion_type: MotionType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prismatic: Option<PrismaticJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    revolute: Option<RevoluteJson>,
}

#[derive(Serialize, Deserialize)]
struct StructureJson {
    parts: Vec<PartJson>,
    face_labels: Vec<u32>,
}

pub fn to_json(s: &ArticulatedStructure) -> String {
    let parts = (0..s.part_count)
        .map(|i| {
            let m = &s.motion[i];
            PartJson {
                id: i,
                parent: s.parent[i],
                motion_type: m.motion_type,
                prismatic: m.prismatic.map(|p| PrismaticJson { dir: p.direction, range: p.range }),
                revolute: m.revolute.map(|r| RevoluteJson {
                    dir: r.direction,
                    point: r.point,
                    range: r.range,
                }),
            }
        })
        .collect();
    let doc = StructureJson {
        parts,
        face_labels: s.face_labels.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("structure serializes")
}

/// Parses and validates (without a face-count check).
pub fn from_json(text: &str) -> Result<ArticulatedStructure> {
    let doc: StructureJson = serde_json::from_str(text).map_err(|e| Error::parse(e.to_string()))?;
    let n = doc.parts.len();
    let mut parent = vec![None; n];
    let mut motion = vec![MotionSpec::FIXED; n];
    let mut seen = vec![false; n];
    for p in doc.parts {
        if p.id >= n || seen[p.id] {
            return Err(Error::parse(format!("part ids must be 0..{n} without repeats, got {}", p.id)));
        }
        seen[p.id] = true;
        parent[p.id] = p.parent;
        motion[p.id] = MotionSpec {
            motion_type: p.motion_type,
            prismatic: p.prismatic.map(|x| Prismatic { direction: x.dir, range: x.range }),
            revolute: p.revolute.map(|x| Revolute {
                direction: x.dir,
                point: x.point,
                range: x.range,
            }),
        };
    }
    let s = ArticulatedStructure {
        part_count: n,
        face_labels: doc.face_labels,
        parent,
        motion,
    };
    s.validate()?;
    Ok(s)
}

pub fn save_json(path: &Path, s: &ArticulatedStructure) -> Result<()> {
    std::fs::write(path, to_json(s)).map_err(|e| Error::io(path, e))
}

pub fn load_json(path: &Path) -> Result<ArticulatedStructure> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let s = ArticulatedStructure {
            part_count: 3,
            face_labels: vec![0, 1, 2, 2],
            parent: vec![None, Some(0), Some(1)],
            motion: vec![
                MotionSpec::FIXED,
                MotionSpec::revolute([0.0, 0.6, 0.8], [0.1, 1.0 / 3.0, -2.5], [0.0, 1.234567890123]),
                MotionSpec::both(
                    Prismatic { direction: [1.0, 0.0, 0.0], range: [0.1, 0.7] },
                    Revolute { direction: [0.0, 0.0, 1.0], point: [0.0; 3], range: [0.2, 0.3] },
                ),
            ],
        };
        let back = from_json(&to_json(&s)).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(from_json("{").is_err());
        let two_roots = r#"{"parts":[{"id":0,"parent":null,"motion_type":"fixed"},
            {"id":1,"parent":null,"motion_type":"fixed"}],"face_labels":[]}"#;
        assert!(from_json(two_roots).is_err());
        let missing = r#"{"parts":[{"id":0,"parent":null,"motion_type":"fixed"},
            {"id":1,"parent":0,"motion_type":"revolute"}],"face_labels":[]}"#;
        assert!(from_json(missing).is_err());
    }
}
