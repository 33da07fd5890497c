use crate::articulation::{MotionSpec, MotionType, Prismatic, Revolute};
use crate::geometry::vec3::{self, Vec3};
use crate::tensor::Tensor;

use super::segmentation::argmax;

/// Per-query head outputs, detached from the tape.
#[derive(Clone, Debug)]
pub struct HeadValues {
    pub type_logits: Tensor,
    pub prismatic_range: Tensor,
    pub revolute_range: Tensor,
    pub prismatic_dir: Tensor,
    pub revolute_dir: Tensor,
}

/// Median of a nonempty slice; the mean of the two middle values for even lengths.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty slice");
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Coordinate-wise median of 3D votes; `None` when there are none.
pub fn componentwise_median(votes: &[Vec3]) -> Option<Vec3> {
    if votes.is_empty() {
        return None;
    }
    let mut col = Vec::with_capacity(votes.len());
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        col.clear();
        col.extend(votes.iter().map(|v| v[k]));
        *o = median(&mut col);
    }
    Some(out)
}

fn row3(t: &Tensor, i: usize) -> Vec3 {
    let r = t.row(i);
    [r[0], r[1], r[2]]
}

fn unit(v: Vec3) -> Vec3 {
    match vec3::normalized(v) {
        Some(u) if u.iter().all(|c| c.is_finite()) => u,
        _ => {
            log::warn!("degenerate predicted direction {v:?}; using +z");
            [0.0, 0.0, 1.0]
        }
    }
}

fn range(t: &Tensor, i: usize) -> [f64; 2] {
    let r = t.row(i);
    let clamp = |x: f64| if x.is_finite() { x.max(0.0) } else { 0.0 };
    [clamp(r[0]), clamp(r[1])]
}

/// Motion of query `i` in normalized coordinates. `axis_point` is required for
/// types with a revolute component; a missing one falls back to the origin.
pub fn decode_motion(heads: &HeadValues, i: usize, axis_point: Option<Vec3>) -> MotionSpec {
    let motion_type = MotionType::from_index(argmax(heads.type_logits.row(i))).expect("four type logits");
    let prismatic = || Prismatic {
        direction: unit(row3(&heads.prismatic_dir, i)),
        range: range(&heads.prismatic_range, i),
    };
    let revolute = || Revolute {
        direction: unit(row3(&heads.revolute_dir, i)),
        point: axis_point.unwrap_or_else(|| {
            log::warn!("query {i} has no axis votes");
            [0.0; 3]
        }),
        range: range(&heads.revolute_range, i),
    };
    match motion_type {
        MotionType::Fixed => MotionSpec::FIXED,
        MotionType::Prismatic => {
            let p = prismatic();
            MotionSpec::prismatic(p.direction, p.range)
        }
        MotionType::Revolute => {
            let r = revolute();
            MotionSpec::revolute(r.direction, r.point, r.range)
        }
        MotionType::Both => MotionSpec::both(prismatic(), revolute()),
    }
}
