//! Decoding network predictions into an articulated structure on the input mesh.

mod motion;
mod segmentation;
mod tree;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::articulation::{ArticulatedStructure, MotionSpec};
use crate::error::{Error, Result};
use crate::geometry::{normalize, sample_point_cloud, Mesh, SampleParams, Vec3};
use crate::model::{axis_votes, forward, ModelWeights};
use crate::tensor::Tape;

pub use motion::{componentwise_median, decode_motion, median, HeadValues};
pub use segmentation::{argmax, decode_segmentation, point_labels, present, refine_connected_components};
pub use tree::{
    arborescence_weight, best_arborescence, contract, extract_kinematic_tree, max_arborescence, KinematicTree,
};

/// How the arborescence root is chosen over the full query set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootPolicy {
    /// Every query is tried as root; the heaviest tree wins.
    #[default]
    Sweep,
    /// A fixed root query.
    Query(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeConfig {
    pub refine: bool,
    /// Points sampled; raised to the face count when smaller.
    pub points: usize,
    pub root_policy: RootPolicy,
    pub sharp_fraction: f64,
    pub angle_threshold_deg: f64,
    pub seed: u64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            refine: true,
            points: 102_400,
            root_policy: RootPolicy::Sweep,
            sharp_fraction: 0.5,
            angle_threshold_deg: 30.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Timings {
    pub sample: Duration,
    pub forward: Duration,
    pub decode: Duration,
}

impl Timings {
    pub fn total(&self) -> Duration {
        self.sample + self.forward + self.decode
    }
}

#[derive(Clone, Debug)]
pub struct Inference {
    pub structure: ArticulatedStructure,
    /// Query behind each output part.
    pub part_queries: Vec<usize>,
    pub points: usize,
    pub timings: Timings,
}

/// Kinematic tree under a root policy, restricted to `present`.
pub fn kinematic_tree(kin: &[Vec<f64>], present: &[usize], policy: RootPolicy) -> Result<KinematicTree> {
    let full = match policy {
        RootPolicy::Sweep => best_arborescence(kin)?.0,
        RootPolicy::Query(r) => max_arborescence(kin, r)?,
    };
    contract(&full, present)
}

/// Full pipeline from a mesh to a validated structure in mesh coordinates.
pub fn infer(mesh: &Mesh, weights: &ModelWeights, cfg: &DecodeConfig) -> Result<Inference> {
    let p_max = weights.config.max_parts;
    if let RootPolicy::Query(r) = cfg.root_policy {
        if r >= p_max {
            return Err(Error::invalid(format!("root query {r} outside 0..{p_max}")));
        }
    }
    if weights.config.feature_dim > 0 {
        return Err(Error::invalid("model expects per-point features; infer samples geometry only"));
    }
    let t0 = Instant::now();
    let n = cfg.points.max(mesh.faces.len());
    let cloud = normalize(&sample_point_cloud(
        mesh,
        &SampleParams {
            n,
            sharp_fraction: cfg.sharp_fraction,
            angle_threshold_deg: cfg.angle_threshold_deg,
            seed: cfg.seed,
            cover_all_faces: true,
        },
    )?)?;
    let t1 = Instant::now();

    let tape = Tape::no_grad();
    let params = weights.on_tape(&tape);
    let out = forward(&params, &tape, &cloud)?;
    let t2 = Instant::now();

    let labels = point_labels(out.seg_logits.value());
    let point_faces: Vec<u32> = cloud.samples.iter().map(|s| s.source_face).collect();
    let (mut face_labels, _) = decode_segmentation(&labels, &point_faces, mesh.faces.len(), p_max)?;
    if cfg.refine {
        face_labels = refine_connected_components(mesh, &face_labels);
    }
    let queries = present(&face_labels);
    let kin = out.kin_logits.value();
    let kin_rows: Vec<Vec<f64>> = (0..kin.rows()).map(|i| kin.row(i).to_vec()).collect();
    let tree = kinematic_tree(&kin_rows, &queries, cfg.root_policy)?;

    let heads = HeadValues {
        type_logits: out.type_logits.value().clone(),
        prismatic_range: out.prismatic_range.value().clone(),
        revolute_range: out.revolute_range.value().clone(),
        prismatic_dir: out.prismatic_dir.value().clone(),
        revolute_dir: out.revolute_dir.value().clone(),
    };
    // points vote for the part their face ended up in
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); p_max];
    for (j, &f) in point_faces.iter().enumerate() {
        members[face_labels[f as usize]].push(j);
    }
    let mut motion = Vec::with_capacity(queries.len());
    for &q in &queries {
        let mut spec = if q == tree.base {
            MotionSpec::FIXED
        } else {
            decode_motion(&heads, q, None)
        };
        if let Some(r) = &mut spec.revolute {
            let idx = &members[q];
            let votes = axis_votes(&params, &out.point_latent, &out.query_latent, idx, &vec![q; idx.len()])?;
            let v = votes.value();
            let rows: Vec<Vec3> = (0..v.rows()).map(|k| [v.at(k, 0), v.at(k, 1), v.at(k, 2)]).collect();
            r.point = componentwise_median(&rows)
                .ok_or_else(|| Error::Numerical(format!("query {q} has no axis votes")))?;
        }
        motion.push(spec);
    }

    let part_of = |q: usize| queries.binary_search(&q).expect("present query");
    let structure = ArticulatedStructure {
        part_count: queries.len(),
        face_labels: face_labels.iter().map(|&q| part_of(q) as u32).collect(),
        parent: tree.parent.iter().map(|p| p.map(part_of)).collect(),
        motion,
    }
    .untransformed(&cloud.transform);
    structure.validate_for(mesh.faces.len())?;
    let t3 = Instant::now();
    Ok(Inference {
        structure,
        part_queries: queries,
        points: n,
        timings: Timings {
            sample: t1 - t0,
            forward: t2 - t1,
            decode: t3 - t2,
        },
    })
}
