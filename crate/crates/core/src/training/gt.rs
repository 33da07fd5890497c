use crate::articulation::{ArticulatedStructure, MotionType};
use crate::error::{Error, Result};
use crate::geometry::{vec3, PointCloud, Vec3};
use crate::tensor::Tensor;

/// Supervision for one sampled object, in the frame of its point cloud.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub part_count: usize,
    /// Part id of every point.
    pub point_labels: Vec<usize>,
    pub parent: Vec<Option<usize>>,
    pub motion_type: Vec<MotionType>,
    pub prismatic_range: Vec<[f64; 2]>,
    pub revolute_range: Vec<[f64; 2]>,
    pub prismatic_dir: Vec<Vec3>,
    pub revolute_dir: Vec<Vec3>,
    /// Closest point on the own part's revolute axis; `None` off revolute parts.
    pub axis_closest_points: Vec<Option<Vec3>>,
}

/// Closest point to `x` on the line through `point` along unit `dir`.
pub fn closest_on_axis(x: Vec3, dir: Vec3, point: Vec3) -> Vec3 {
    let t = vec3::dot(vec3::sub(x, point), dir);
    vec3::add(point, vec3::scale(dir, t))
}

impl GroundTruth {
    /// `structure` must already be expressed in the cloud's frame.
    pub fn new(structure: &ArticulatedStructure, cloud: &PointCloud) -> Result<Self> {
        structure.validate()?;
        let p = structure.part_count;
        let mut point_labels = Vec::with_capacity(cloud.len());
        let mut axis_closest_points = Vec::with_capacity(cloud.len());
        for s in &cloud.samples {
            let label = *structure
                .face_labels
                .get(s.source_face as usize)
                .ok_or_else(|| Error::invalid(format!("sample from face {} has no label", s.source_face)))?
                as usize;
            point_labels.push(label);
            axis_closest_points.push(
                structure.motion[label]
                    .revolute
                    .map(|r| closest_on_axis(s.position, r.direction, r.point)),
            );
        }
        let m = &structure.motion;
        Ok(GroundTruth {
            part_count: p,
            point_labels,
            parent: structure.parent.clone(),
            motion_type: m.iter().map(|x| x.motion_type).collect(),
            prismatic_range: m.iter().map(|x| x.prismatic.map_or([0.0; 2], |v| v.range)).collect(),
            revolute_range: m.iter().map(|x| x.revolute.map_or([0.0; 2], |v| v.range)).collect(),
            prismatic_dir: m.iter().map(|x| x.prismatic.map_or([0.0; 3], |v| v.direction)).collect(),
            revolute_dir: m.iter().map(|x| x.revolute.map_or([0.0; 3], |v| v.direction)).collect(),
            axis_closest_points,
        })
    }

    /// `K[a][b] = 1` when part `a` is the parent of part `b`.
    pub fn kin_adjacency(&self) -> Tensor {
        let p = self.part_count;
        let mut k = Tensor::zeros(&[p, p]);
        for (c, par) in self.parent.iter().enumerate() {
            if let Some(a) = par {
                k.data_mut()[a * p + c] = 1.0;
            }
        }
        k
    }

    /// Relabels parts: old part `i` becomes `perm[i]`.
    pub fn relabeled(&self, perm: &[usize]) -> GroundTruth {
        let p = self.part_count;
        let mut inv = vec![0; p];
        for (i, &j) in perm.iter().enumerate() {
            inv[j] = i;
        }
        let src = &inv;
        GroundTruth {
            part_count: p,
            point_labels: self.point_labels.iter().map(|&l| perm[l]).collect(),
            parent: src.iter().map(|&i| self.parent[i].map(|q| perm[q])).collect(),
            motion_type: src.iter().map(|&i| self.motion_type[i]).collect(),
            prismatic_range: src.iter().map(|&i| self.prismatic_range[i]).collect(),
            revolute_range: src.iter().map(|&i| self.revolute_range[i]).collect(),
            prismatic_dir: src.iter().map(|&i| self.prismatic_dir[i]).collect(),
            revolute_dir: src.iter().map(|&i| self.revolute_dir[i]).collect(),
            axis_closest_points: self.axis_closest_points.clone(),
        }
    }
}
