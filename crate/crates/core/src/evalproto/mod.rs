//! Penalized part-wise metrics at rest and fully articulated states, and
//! whole-object Chamfer.

mod metrics;

use serde::{Deserialize, Serialize};

use crate::articulation::{fully_articulated_pose, part_transforms, ArticulatedStructure, JointPose};
use crate::error::{Error, Result};
use crate::geometry::vec3::{self, Vec3};
use crate::geometry::{chamfer, sample_point_cloud, Mesh, NormTransform, Rigid, SampleParams};

pub use metrics::{
    centroid, giou, label_iou, match_parts_by_centroid, penalized_aggregate, unpenalized_aggregate, Aabb,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArticulationState {
    Rest,
    FullyArticulated,
}

impl ArticulationState {
    pub fn name(self) -> &'static str {
        match self {
            ArticulationState::Rest => "rest",
            ArticulationState::FullyArticulated => "fully_articulated",
        }
    }

    pub fn pose(self, s: &ArticulatedStructure) -> JointPose {
        match self {
            ArticulationState::Rest => JointPose::new(),
            ArticulationState::FullyArticulated => fully_articulated_pose(s),
        }
    }
}

/// Scores given to unmatched parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Penalties {
    pub giou: f64,
    pub miou: f64,
    /// Part Chamfer penalty; half the normalized mesh's box diagonal when unset.
    pub pc: Option<f64>,
}

impl Default for Penalties {
    fn default() -> Self {
        Penalties {
            giou: -1.0,
            miou: 0.0,
            pc: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Area-weighted evaluation points shared by both structures.
    pub points: usize,
    pub seed: u64,
    pub penalties: Penalties,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            points: 1_000_000,
            seed: 0,
            penalties: Penalties::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub pred: usize,
    pub gt: usize,
    pub giou: f64,
    pub miou: f64,
    pub pc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateReport {
    pub state: ArticulationState,
    pub pairs: Vec<PairMetrics>,
    pub giou: f64,
    pub miou: f64,
    pub pc: f64,
    pub oc: f64,
    pub giou_unpenalized: f64,
    pub miou_unpenalized: f64,
    pub pc_unpenalized: f64,
}

/// Agreement of motion parameters over matched pairs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MotionAgreement {
    pub matched: usize,
    pub type_correct: usize,
    /// Angle in degrees between revolute directions, for pairs where both sides
    /// have a revolute component.
    pub axis_errors_deg: Vec<f64>,
}

impl MotionAgreement {
    pub fn type_accuracy(&self) -> Option<f64> {
        (self.matched > 0).then(|| self.type_correct as f64 / self.matched as f64)
    }

    pub fn mean_axis_error_deg(&self) -> Option<f64> {
        let e = &self.axis_errors_deg;
        (!e.is_empty()).then(|| e.iter().sum::<f64>() / e.len() as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub instance_id: String,
    pub n_pred: usize,
    pub n_gt: usize,
    pub n_matched: usize,
    pub unmatched_pred: usize,
    pub unmatched_gt: usize,
    pub pc_penalty: f64,
    pub rest: StateReport,
    pub articulated: StateReport,
    pub motion: MotionAgreement,
}

pub const CSV_HEADER: &str = "instance_id,state,gIoU,mIoU,PC,OC,n_pred,n_gt,n_matched";

impl EvalReport {
    /// One CSV row per articulation state.
    pub fn csv_rows(&self) -> Vec<String> {
        [&self.rest, &self.articulated]
            .iter()
            .map(|s| {
                format!(
                    "{},{},{},{},{},{},{},{},{}",
                    self.instance_id,
                    s.state.name(),
                    s.giou,
                    s.miou,
                    s.pc,
                    s.oc,
                    self.n_pred,
                    self.n_gt,
                    self.n_matched
                )
            })
            .collect()
    }
}

/// Instance means of the per-state metrics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub giou: f64,
    pub miou: f64,
    pub pc: f64,
    pub oc: f64,
    pub giou_unpenalized: f64,
    pub miou_unpenalized: f64,
    pub pc_unpenalized: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub instances: usize,
    pub rest: StateSummary,
    pub articulated: StateSummary,
    /// Pooled over all matched pairs.
    pub type_accuracy: Option<f64>,
    /// Pooled over all pairs with revolute components on both sides.
    pub mean_axis_error_deg: Option<f64>,
}

impl EvalSummary {
    pub fn from_reports(reports: &[EvalReport]) -> EvalSummary {
        let n = reports.len();
        if n == 0 {
            return EvalSummary::default();
        }
        let mean = |f: &dyn Fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / n as f64;
        let state = |pick: fn(&EvalReport) -> &StateReport| StateSummary {
            giou: mean(&|r| pick(r).giou),
            miou: mean(&|r| pick(r).miou),
            pc: mean(&|r| pick(r).pc),
            oc: mean(&|r| pick(r).oc),
            giou_unpenalized: mean(&|r| pick(r).giou_unpenalized),
            miou_unpenalized: mean(&|r| pick(r).miou_unpenalized),
            pc_unpenalized: mean(&|r| pick(r).pc_unpenalized),
        };
        let mut pooled = MotionAgreement::default();
        for r in reports {
            pooled.matched += r.motion.matched;
            pooled.type_correct += r.motion.type_correct;
            pooled.axis_errors_deg.extend_from_slice(&r.motion.axis_errors_deg);
        }
        EvalSummary {
            instances: n,
            rest: state(|r| &r.rest),
            articulated: state(|r| &r.articulated),
            type_accuracy: pooled.type_accuracy(),
            mean_axis_error_deg: pooled.mean_axis_error_deg(),
        }
    }
}

/// Evaluation samples on the normalized mesh: positions and their source faces.
struct EvalPoints {
    positions: Vec<Vec3>,
    faces: Vec<u32>,
}

fn normalized_mesh(mesh: &Mesh) -> Result<(Mesh, NormTransform)> {
    let t = NormTransform::fit(&mesh.vertices).ok_or_else(|| Error::invalid("empty mesh"))?;
    let m = Mesh::new(mesh.vertices.iter().map(|&v| t.apply(v)).collect(), mesh.faces.clone());
    Ok((m, t))
}

fn eval_points(mesh: &Mesh, n: usize, seed: u64) -> Result<EvalPoints> {
    let cloud = sample_point_cloud(
        mesh,
        &SampleParams {
            n,
            sharp_fraction: 0.0,
            angle_threshold_deg: 30.0,
            seed,
            cover_all_faces: false,
        },
    )?;
    Ok(EvalPoints {
        positions: cloud.samples.iter().map(|s| s.position).collect(),
        faces: cloud.samples.iter().map(|s| s.source_face).collect(),
    })
}

/// Evaluation points of one structure carried by its part transforms.
fn transport(points: &EvalPoints, labels: &[usize], transforms: &[Rigid]) -> Vec<Vec3> {
    points
        .positions
        .iter()
        .zip(labels)
        .map(|(&x, &l)| transforms[l].apply(x))
        .collect()
}

fn split_by_part(points: &[Vec3], labels: &[usize], parts: usize) -> Vec<Vec<Vec3>> {
    let mut out = vec![Vec::new(); parts];
    for (&p, &l) in points.iter().zip(labels) {
        out[l].push(p);
    }
    out
}

struct Side {
    structure: ArticulatedStructure,
    labels: Vec<usize>,
}

impl Side {
    fn new(s: &ArticulatedStructure, t: &NormTransform, pts: &EvalPoints) -> Side {
        Side {
            structure: s.transformed(t),
            labels: pts.faces.iter().map(|&f| s.face_labels[f as usize] as usize).collect(),
        }
    }

    fn posed(&self, pts: &EvalPoints, state: ArticulationState) -> Result<Vec<Vec3>> {
        let tf = part_transforms(&self.structure, &state.pose(&self.structure))?;
        Ok(transport(pts, &self.labels, &tf))
    }
}

fn check_inputs(pred: &ArticulatedStructure, gt: &ArticulatedStructure, mesh: &Mesh) -> Result<()> {
    pred.validate_for(mesh.faces.len())?;
    gt.validate_for(mesh.faces.len())
}

/// Bidirectional Chamfer between the whole evaluation cloud as posed by each
/// structure, in normalized mesh units.
pub fn whole_object_chamfer(
    pred: &ArticulatedStructure,
    gt: &ArticulatedStructure,
    mesh: &Mesh,
    state: ArticulationState,
    points: usize,
    seed: u64,
) -> Result<f64> {
    check_inputs(pred, gt, mesh)?;
    let (nm, t) = normalized_mesh(mesh)?;
    let pts = eval_points(&nm, points, seed)?;
    let (p, g) = (Side::new(pred, &t, &pts), Side::new(gt, &t, &pts));
    chamfer(&p.posed(&pts, state)?, &g.posed(&pts, state)?)
}

/// Rest and fully articulated metrics with the pairing fixed at rest.
pub fn evaluate(
    pred: &ArticulatedStructure,
    gt: &ArticulatedStructure,
    mesh: &Mesh,
    cfg: &EvalConfig,
    instance_id: &str,
) -> Result<EvalReport> {
    if cfg.points == 0 {
        return Err(Error::invalid("evaluation needs at least one point"));
    }
    check_inputs(pred, gt, mesh)?;
    let (nm, t) = normalized_mesh(mesh)?;
    let pts = eval_points(&nm, cfg.points, cfg.seed)?;
    let pc_penalty = cfg.penalties.pc.unwrap_or(0.5 * nm.bbox_diagonal());
    let (p, g) = (Side::new(pred, &t, &pts), Side::new(gt, &t, &pts));
    let (np, ng) = (pred.part_count, gt.part_count);

    let rest_p = split_by_part(&pts.positions, &p.labels, np);
    let rest_g = split_by_part(&pts.positions, &g.labels, ng);
    let cp: Vec<Option<Vec3>> = rest_p.iter().map(|v| centroid(v)).collect();
    let cg: Vec<Option<Vec3>> = rest_g.iter().map(|v| centroid(v)).collect();
    let pairs = match_parts_by_centroid(&cp, &cg)?;
    let n_matched = pairs.len();

    let state_report = |state: ArticulationState| -> Result<StateReport> {
        let (pp, gp) = (p.posed(&pts, state)?, g.posed(&pts, state)?);
        let (parts_p, parts_g) = (split_by_part(&pp, &p.labels, np), split_by_part(&gp, &g.labels, ng));
        let mut rows = Vec::with_capacity(n_matched);
        for &(a, b) in &pairs {
            let (ba, bb) = (
                Aabb::of(&parts_p[a]).expect("matched parts are nonempty"),
                Aabb::of(&parts_g[b]).expect("matched parts are nonempty"),
            );
            rows.push(PairMetrics {
                pred: a,
                gt: b,
                giou: giou(&ba, &bb),
                miou: label_iou(&p.labels, a, &g.labels, b),
                pc: chamfer(&parts_p[a], &parts_g[b])?,
            });
        }
        let col = |f: fn(&PairMetrics) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
        let (gi, mi, pc) = (col(|r| r.giou), col(|r| r.miou), col(|r| r.pc));
        let pen = &cfg.penalties;
        let (up, ug) = (np - n_matched, ng - n_matched);
        Ok(StateReport {
            state,
            giou: penalized_aggregate(&gi, up, ug, pen.giou)?,
            miou: penalized_aggregate(&mi, up, ug, pen.miou)?,
            pc: penalized_aggregate(&pc, up, ug, pc_penalty)?,
            oc: chamfer(&pp, &gp)?,
            giou_unpenalized: unpenalized_aggregate(&gi, pen.giou),
            miou_unpenalized: unpenalized_aggregate(&mi, pen.miou),
            pc_unpenalized: unpenalized_aggregate(&pc, pc_penalty),
            pairs: rows,
        })
    };
    let rest = state_report(ArticulationState::Rest)?;
    let articulated = state_report(ArticulationState::FullyArticulated)?;

    let mut motion = MotionAgreement {
        matched: n_matched,
        ..Default::default()
    };
    for &(a, b) in &pairs {
        let (ma, mb) = (&pred.motion[a], &gt.motion[b]);
        if ma.motion_type == mb.motion_type {
            motion.type_correct += 1;
        }
        if let (Some(ra), Some(rb)) = (&ma.revolute, &mb.revolute) {
            motion
                .axis_errors_deg
                .push(vec3::angle_between(ra.direction, rb.direction).to_degrees());
        }
    }
    Ok(EvalReport {
        instance_id: instance_id.to_string(),
        n_pred: np,
        n_gt: ng,
        n_matched,
        unmatched_pred: np - n_matched,
        unmatched_gt: ng - n_matched,
        pc_penalty,
        rest,
        articulated,
        motion,
    })
}
