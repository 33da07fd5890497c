use std::collections::BTreeMap;
use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{vec3, Mesh, Rigid};

use super::structure::{ArticulatedStructure, MotionSpec, MotionType};

const RANGE_TOL: f64 = 1e-9;

/// Joint values of one part: prismatic offset and/or revolute angle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JointValue {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prismatic: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revolute: Option<f64>,
}

/// Part id to joint values. Parts that are absent stay at their rest state.
pub type JointPose = BTreeMap<usize, JointValue>;

fn check_value(v: Option<f64>, range: Option<[f64; 2]>, part: usize, what: &str) -> Result<f64> {
    match (v, range) {
        (None, _) => Ok(0.0),
        (Some(x), Some(r)) => {
            if !x.is_finite() || x < -r[0] - RANGE_TOL || x > r[1] + RANGE_TOL {
                return Err(Error::invalid(format!(
                    "part {part}: {what} value {x} outside [{}, {}]",
                    -r[0],
                    r[1]
                )));
            }
            Ok(x)
        }
        (Some(0.0), None) => Ok(0.0),
        (Some(_), None) => Err(Error::invalid(format!("part {part} has no {what} joint"))),
    }
}

/// Local transform of one joint: rotation about the revolute axis, then translation
/// along the prismatic direction, both in the rest-state mesh frame.
pub fn joint_transform(m: &MotionSpec, value: &JointValue, part: usize) -> Result<Rigid> {
    let theta = check_value(value.revolute, m.revolute.map(|r| r.range), part, "revolute")?;
    let l = check_value(value.prismatic, m.prismatic.map(|p| p.range), part, "prismatic")?;
    let mut t = Rigid::IDENTITY;
    if let Some(r) = &m.revolute {
        t = Rigid::about_axis(r.direction, r.point, theta);
    }
    if let Some(p) = &m.prismatic {
        t = Rigid::translation(vec3::scale(p.direction, l)).compose(&t);
    }
    Ok(t)
}

/// World transform of every part under `pose`.
pub fn part_transforms(structure: &ArticulatedStructure, pose: &JointPose) -> Result<Vec<Rigid>> {
    if let Some(&bad) = pose.keys().find(|&&k| k >= structure.part_count) {
        return Err(Error::invalid(format!("pose names unknown part {bad}")));
    }
    let order = structure.topological_order()?;
    let mut world = vec![Rigid::IDENTITY; structure.part_count];
    for c in order {
        let value = pose.get(&c).copied().unwrap_or_default();
        let local = joint_transform(&structure.motion[c], &value, c)?;
        world[c] = match structure.parent[c] {
            Some(p) => world[p].compose(&local),
            None => local,
        };
    }
    Ok(world)
}

/// Poses the mesh. Vertices shared by faces of different parts are duplicated so each
/// face moves rigidly with its own part; face order is preserved.
pub fn apply_articulation(mesh: &Mesh, structure: &ArticulatedStructure, pose: &JointPose) -> Result<Mesh> {
    structure.validate_for(mesh.faces.len())?;
    let world = part_transforms(structure, pose)?;
    let mut owner: Vec<Option<u32>> = vec![None; mesh.vertices.len()];
    let mut extra: HashMap<(u32, u32), u32> = HashMap::new();
    let mut out = Mesh {
        vertices: mesh.vertices.clone(),
        faces: Vec::with_capacity(mesh.faces.len()),
    };
    for (f, &label) in mesh.faces.iter().zip(&structure.face_labels) {
        let face = f.map(|v| match owner[v as usize] {
            None => {
                owner[v as usize] = Some(label);
                out.vertices[v as usize] = world[label as usize].apply(mesh.vertices[v as usize]);
                v
            }
            Some(o) if o == label => v,
            Some(_) => *extra.entry((v, label)).or_insert_with(|| {
                out.vertices
                    .push(world[label as usize].apply(mesh.vertices[v as usize]));
                (out.vertices.len() - 1) as u32
            }),
        });
        out.faces.push(face);
    }
    Ok(out)
}

/// Every joint at its positive bound.
pub fn fully_articulated_pose(structure: &ArticulatedStructure) -> JointPose {
    structure
        .motion
        .iter()
        .enumerate()
        .filter(|(_, m)| m.motion_type != MotionType::Fixed)
        .map(|(i, m)| {
            (
                i,
                JointValue {
                    prismatic: m.prismatic.map(|p| p.range[1]),
                    revolute: m.revolute.map(|r| r.range[1]),
                },
            )
        })
        .collect()
}

/// Each joint value uniform in its declared range.
pub fn random_pose(structure: &ArticulatedStructure, seed: u64) -> JointPose {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_pose_with(structure, &mut rng)
}

pub fn random_pose_with<R: Rng + ?Sized>(structure: &ArticulatedStructure, rng: &mut R) -> JointPose {
    let mut draw = |r: [f64; 2]| -> f64 {
        let u: f64 = rng.gen();
        -r[0] + u * (r[0] + r[1])
    };
    let mut pose = JointPose::new();
    for (i, m) in structure.motion.iter().enumerate() {
        if m.motion_type == MotionType::Fixed {
            continue;
        }
        let revolute = m.revolute.map(|r| draw(r.range));
        let prismatic = m.prismatic.map(|p| draw(p.range));
        pose.insert(i, JointValue { prismatic, revolute });
    }
    pose
}

/// The structure as seen from the posed mesh: ranges shift by the current joint values
/// and axes move with the parent's world transform, so that posing the posed mesh by
/// `q` equals posing the rest mesh by `pose + q`.
pub fn reposed(structure: &ArticulatedStructure, pose: &JointPose) -> Result<ArticulatedStructure> {
    let world = part_transforms(structure, pose)?;
    let mut out = structure.clone();
    for (c, m) in out.motion.iter_mut().enumerate() {
        let v = pose.get(&c).copied().unwrap_or_default();
        let parent = structure.parent[c].map_or(Rigid::IDENTITY, |p| world[p]);
        let l = v.prismatic.unwrap_or(0.0);
        let theta = v.revolute.unwrap_or(0.0);
        let slide = m.prismatic.map_or([0.0; 3], |p| vec3::scale(p.direction, l));
        if let Some(p) = &mut m.prismatic {
            p.direction = parent.apply_vector(p.direction);
            p.range = [(p.range[0] + l).max(0.0), (p.range[1] - l).max(0.0)];
        }
        if let Some(r) = &mut m.revolute {
            r.direction = parent.apply_vector(r.direction);
            r.point = parent.apply(vec3::add(r.point, slide));
            r.range = [(r.range[0] + theta).max(0.0), (r.range[1] - theta).max(0.0)];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use super::*;

    fn door_mesh() -> (Mesh, ArticulatedStructure) {
        let mesh = Mesh {
            vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            faces: vec![[0, 1, 2], [0, 1, 3]],
        };
        let s = ArticulatedStructure {
            part_count: 2,
            face_labels: vec![0, 1],
            parent: vec![None, Some(0)],
            motion: vec![
                MotionSpec::FIXED,
                MotionSpec::revolute([0.0, 0.0, 1.0], [0.0; 3], [0.0, FRAC_PI_2]),
            ],
        };
        (mesh, s)
    }

    fn pose_of(part: usize, v: JointValue) -> JointPose {
        [(part, v)].into_iter().collect()
    }

    #[test]
    fn zero_pose_is_identity() {
        let (mesh, s) = door_mesh();
        let out = apply_articulation(&mesh, &s, &JointPose::new()).unwrap();
        for f in 0..mesh.faces.len() {
            for (a, b) in out.corners(f).iter().zip(mesh.corners(f)) {
                assert!(vec3::dist(*a, b) < 1e-12);
            }
        }
    }

    #[test]
    fn quarter_turn() {
        let (mesh, s) = door_mesh();
        let pose = pose_of(1, JointValue { revolute: Some(FRAC_PI_2), prismatic: None });
        let out = apply_articulation(&mesh, &s, &pose).unwrap();
        // face 1 = (0,1,3): its copy of vertex 1 moves, face 0 keeps the original
        let moved = out.corners(1)[1];
        assert!(vec3::dist(moved, [0.0, 1.0, 0.0]) < 1e-12);
        assert!(vec3::dist(out.corners(0)[1], [1.0, 0.0, 0.0]) < 1e-12);
        assert_eq!(out.vertices.len(), 6);
    }

    #[test]
    fn out_of_range_rejected() {
        let (mesh, s) = door_mesh();
        let pose = pose_of(1, JointValue { revolute: Some(2.0), prismatic: None });
        assert!(apply_articulation(&mesh, &s, &pose).is_err());
        let pose = pose_of(1, JointValue { revolute: None, prismatic: Some(0.1) });
        assert!(apply_articulation(&mesh, &s, &pose).is_err());
    }

    #[test]
    fn orphan_rejected() {
        let (mesh, mut s) = door_mesh();
        s.parent = vec![None, Some(1)];
        assert!(apply_articulation(&mesh, &s, &JointPose::new()).is_err());
    }

    #[test]
    fn fully_articulated_read_off() {
        let s = ArticulatedStructure::single_part(3);
        assert!(fully_articulated_pose(&s).is_empty());

        let s = ArticulatedStructure {
            part_count: 3,
            face_labels: vec![],
            parent: vec![None, Some(0), Some(0)],
            motion: vec![
                MotionSpec::FIXED,
                MotionSpec::revolute([0.0, 1.0, 0.0], [0.0; 3], [0.0, FRAC_PI_2]),
                MotionSpec::prismatic([0.0, 0.0, 1.0], [0.0, 0.3]),
            ],
        };
        let pose = fully_articulated_pose(&s);
        assert_eq!(pose[&1].revolute, Some(FRAC_PI_2));
        assert_eq!(pose[&2].prismatic, Some(0.3));
        assert_eq!(pose.len(), 2);
    }

    #[test]
    fn zero_range_draws_zero() {
        let mut s = ArticulatedStructure::single_part(0);
        s.part_count = 2;
        s.parent.push(Some(0));
        s.motion.push(MotionSpec::prismatic([1.0, 0.0, 0.0], [0.0, 0.0]));
        for seed in 0..10 {
            assert_eq!(random_pose(&s, seed)[&1].prismatic, Some(0.0));
        }
        assert_eq!(random_pose(&s, 3), random_pose(&s, 3));
    }

    #[test]
    fn incremental_revolute_composes() {
        let (mesh, mut s) = door_mesh();
        s.motion[1] = MotionSpec::revolute([0.0, 0.6, 0.8], [0.2, -0.1, 0.3], [0.5, 1.5]);
        let a = 0.4;
        let d = 0.7;
        let posed = apply_articulation(&mesh, &s, &pose_of(1, JointValue { revolute: Some(a), prismatic: None })).unwrap();
        let s2 = reposed(&s, &pose_of(1, JointValue { revolute: Some(a), prismatic: None })).unwrap();
        let twice = apply_articulation(&posed, &s2, &pose_of(1, JointValue { revolute: Some(d), prismatic: None })).unwrap();
        let direct = apply_articulation(&mesh, &s, &pose_of(1, JointValue { revolute: Some(a + d), prismatic: None })).unwrap();
        for f in 0..mesh.faces.len() {
            for (x, y) in twice.corners(f).iter().zip(direct.corners(f)) {
                assert!(vec3::dist(*x, y) < 1e-9);
            }
        }
    }
}
