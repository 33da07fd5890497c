use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{vec3, NormTransform, Vec3};

const UNIT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionType {
    Fixed,
    Prismatic,
    Revolute,
    Both,
}

impl MotionType {
    pub const ALL: [MotionType; 4] = [
        MotionType::Fixed,
        MotionType::Prismatic,
        MotionType::Revolute,
        MotionType::Both,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<MotionType> {
        Self::ALL.get(i).copied()
    }

    pub fn has_prismatic(self) -> bool {
        matches!(self, MotionType::Prismatic | MotionType::Both)
    }

    pub fn has_revolute(self) -> bool {
        matches!(self, MotionType::Revolute | MotionType::Both)
    }

    pub fn name(self) -> &'static str {
        match self {
            MotionType::Fixed => "fixed",
            MotionType::Prismatic => "prismatic",
            MotionType::Revolute => "revolute",
            MotionType::Both => "both",
        }
    }
}

/// Linear sliding along `direction`; allowed offsets are `[-range[0], range[1]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prismatic {
    pub direction: Vec3,
    pub range: [f64; 2],
}

/// Rotation about the line through `point` along `direction`; allowed angles are
/// `[-range[0], range[1]]` radians.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Revolute {
    pub direction: Vec3,
    pub point: Vec3,
    pub range: [f64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotionSpec {
    pub motion_type: MotionType,
    pub prismatic: Option<Prismatic>,
    pub revolute: Option<Revolute>,
}

impl MotionSpec {
    pub const FIXED: MotionSpec = MotionSpec {
        motion_type: MotionType::Fixed,
        prismatic: None,
        revolute: None,
    };

    pub fn prismatic(direction: Vec3, range: [f64; 2]) -> Self {
        MotionSpec {
            motion_type: MotionType::Prismatic,
            prismatic: Some(Prismatic { direction, range }),
            revolute: None,
        }
    }

    pub fn revolute(direction: Vec3, point: Vec3, range: [f64; 2]) -> Self {
        MotionSpec {
            motion_type: MotionType::Revolute,
            prismatic: None,
            revolute: Some(Revolute {
                direction,
                point,
                range,
            }),
        }
    }

    pub fn both(prismatic: Prismatic, revolute: Revolute) -> Self {
        MotionSpec {
            motion_type: MotionType::Both,
            prismatic: Some(prismatic),
            revolute: Some(revolute),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.motion_type;
        if t.has_prismatic() != self.prismatic.is_some() || t.has_revolute() != self.revolute.is_some() {
            return Err(Error::InvalidStructure(format!(
                "motion type {} does not match the parameters present",
                t.name()
            )));
        }
        let unit = |d: Vec3, what: &str| -> Result<()> {
            if (vec3::norm(d) - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidStructure(format!("{what} direction {d:?} is not unit length")));
            }
            Ok(())
        };
        let ranges = |r: [f64; 2], what: &str| -> Result<()> {
            if !(r[0] >= 0.0 && r[1] >= 0.0 && r[0].is_finite() && r[1].is_finite()) {
                return Err(Error::InvalidStructure(format!("{what} range {r:?} must be finite and nonnegative")));
            }
            Ok(())
        };
        if let Some(p) = &self.prismatic {
            unit(p.direction, "prismatic")?;
            ranges(p.range, "prismatic")?;
        }
        if let Some(r) = &self.revolute {
            unit(r.direction, "revolute")?;
            ranges(r.range, "revolute")?;
            if r.point.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidStructure("revolute axis point is not finite".into()));
            }
        }
        Ok(())
    }
}

/// Part count, face segmentation, kinematic tree and per-part motion.
#[derive(Clone, Debug, PartialEq)]
pub struct ArticulatedStructure {
    pub part_count: usize,
    /// Part id for every mesh face.
    pub face_labels: Vec<u32>,
    /// Parent part of each part; `None` only for the base.
    pub parent: Vec<Option<usize>>,
    pub motion: Vec<MotionSpec>,
}

impl ArticulatedStructure {
    /// A single fixed part owning every face.
    pub fn single_part(face_count: usize) -> Self {
        ArticulatedStructure {
            part_count: 1,
            face_labels: vec![0; face_count],
            parent: vec![None],
            motion: vec![MotionSpec::FIXED],
        }
    }

    pub fn base(&self) -> Option<usize> {
        self.parent.iter().position(Option::is_none)
    }

    pub fn children(&self, part: usize) -> Vec<usize> {
        (0..self.part_count).filter(|&c| self.parent[c] == Some(part)).collect()
    }

    /// Parts ordered so that every parent precedes its children.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let base = self
            .base()
            .ok_or_else(|| Error::InvalidStructure("no base part".into()))?;
        let mut order = vec![base];
        let mut i = 0;
        while i < order.len() {
            let p = order[i];
            order.extend(self.children(p));
            i += 1;
        }
        if order.len() != self.part_count {
            return Err(Error::InvalidStructure(format!(
                "kinematic tree reaches {} of {} parts (cycle or orphan)",
                order.len(),
                self.part_count
            )));
        }
        Ok(order)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.part_count;
        if p == 0 {
            return Err(Error::InvalidStructure("zero parts".into()));
        }
        if self.parent.len() != p || self.motion.len() != p {
            return Err(Error::InvalidStructure(format!(
                "{p} parts but {} parent entries and {} motion entries",
                self.parent.len(),
                self.motion.len()
            )));
        }
        let roots = self.parent.iter().filter(|x| x.is_none()).count();
        if roots != 1 {
            return Err(Error::InvalidStructure(format!("expected exactly one base part, found {roots}")));
        }
        if let Some((c, par)) = self
            .parent
            .iter()
            .enumerate()
            .find_map(|(c, par)| par.filter(|&q| q >= p || q == c).map(|q| (c, q)))
        {
            return Err(Error::InvalidStructure(format!("part {c} has invalid parent {par}")));
        }
        self.topological_order()?;
        let base = self.base().expect("one root checked above");
        if self.motion[base].motion_type != MotionType::Fixed {
            return Err(Error::InvalidStructure("base part must be fixed".into()));
        }
        for m in &self.motion {
            m.validate()?;
        }
        if let Some(bad) = self.face_labels.iter().find(|&&l| l as usize >= p) {
            return Err(Error::InvalidStructure(format!("face label {bad} out of range for {p} parts")));
        }
        Ok(())
    }

    /// Validates and checks the labels cover exactly `face_count` faces.
    pub fn validate_for(&self, face_count: usize) -> Result<()> {
        self.validate()?;
        if self.face_labels.len() != face_count {
            return Err(Error::InvalidStructure(format!(
                "{} face labels for a mesh with {face_count} faces",
                self.face_labels.len()
            )));
        }
        Ok(())
    }

    /// Geometry mapped through an isotropic transform: points move, directions stay,
    /// prismatic ranges scale, angles stay.
    pub fn transformed(&self, t: &NormTransform) -> ArticulatedStructure {
        let mut out = self.clone();
        for m in &mut out.motion {
            if let Some(p) = &mut m.prismatic {
                p.range = [p.range[0] * t.scale, p.range[1] * t.scale];
            }
            if let Some(r) = &mut m.revolute {
                r.point = t.apply(r.point);
            }
        }
        out
    }

    /// Inverse of [`Self::transformed`].
    pub fn untransformed(&self, t: &NormTransform) -> ArticulatedStructure {
        let mut out = self.clone();
        for m in &mut out.motion {
            if let Some(p) = &mut m.prismatic {
                p.range = [p.range[0] / t.scale, p.range[1] / t.scale];
            }
            if let Some(r) = &mut m.revolute {
                r.point = t.invert(r.point);
            }
        }
        out
    }

    /// Number of faces per part.
    pub fn part_face_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.part_count];
        for &l in &self.face_labels {
            c[l as usize] += 1;
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn door() -> ArticulatedStructure {
        ArticulatedStructure {
            part_count: 2,
            face_labels: vec![0, 0, 1],
            parent: vec![None, Some(0)],
            motion: vec![
                MotionSpec::FIXED,
                MotionSpec::revolute([0.0, 0.0, 1.0], [0.0; 3], [0.0, 1.0]),
            ],
        }
    }

    #[test]
    fn valid_door() {
        door().validate_for(3).unwrap();
        assert!(door().validate_for(4).is_err());
    }

    #[test]
    fn invalid_cases() {
        let mut s = door();
        s.parent = vec![None, None];
        assert!(s.validate().is_err());

        let mut s = door();
        s.parent = vec![Some(1), Some(0)];
        assert!(s.validate().is_err());

        let mut s = door();
        s.motion[0] = MotionSpec::prismatic([1.0, 0.0, 0.0], [0.0, 1.0]);
        assert!(s.validate().is_err());

        let mut s = door();
        s.motion[1].revolute.as_mut().unwrap().direction = [0.0, 0.0, 2.0];
        assert!(s.validate().is_err());

        let mut s = door();
        s.motion[1].revolute.as_mut().unwrap().range = [-0.1, 1.0];
        assert!(s.validate().is_err());

        let mut s = door();
        s.motion[1].prismatic = Some(Prismatic { direction: [1.0, 0.0, 0.0], range: [0.0, 1.0] });
        assert!(s.validate().is_err());

        let mut s = door();
        s.face_labels[0] = 2;
        assert!(s.validate().is_err());
    }

    #[test]
    fn transform_round_trip() {
        let mut s = door();
        s.motion[1] = MotionSpec::both(
            Prismatic { direction: [0.0, 1.0, 0.0], range: [0.1, 0.4] },
            Revolute { direction: [0.0, 0.0, 1.0], point: [1.0, 2.0, 3.0], range: [0.0, 1.0] },
        );
        let t = NormTransform { scale: 0.25, translation: [1.0, -1.0, 0.5] };
        let back = s.transformed(&t).untransformed(&t);
        let (a, b) = (back.motion[1], s.motion[1]);
        assert!(vec3::dist(a.revolute.unwrap().point, b.revolute.unwrap().point) < 1e-12);
        assert!((a.prismatic.unwrap().range[1] - 0.4).abs() < 1e-12);
    }
}
