use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{axis_votes, NetworkOutput, Params};
use crate::tensor::{Tape, Tensor, Var};

use super::gt::GroundTruth;
use super::matching::Assignment;

/// Weight of the revolute-range term in the total.
pub const REVOLUTE_RANGE_WEIGHT: f64 = 0.1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub seg: f64,
    pub kin: f64,
    pub motion_type: f64,
    pub prismatic_range: f64,
    pub revolute_range: f64,
    pub prismatic_dir: f64,
    pub revolute_dir: f64,
    pub axis_point: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub const CSV_HEADER: &'static str = "step,total,L_S,L_K,L_tp,L_pr,L_rr,L_pd,L_dra,L_xra";

    pub fn weighted_total(&self) -> f64 {
        self.seg
            + self.kin
            + self.motion_type
            + self.prismatic_range
            + REVOLUTE_RANGE_WEIGHT * self.revolute_range
            + self.prismatic_dir
            + self.revolute_dir
            + self.axis_point
    }

    pub fn csv_row(&self, step: usize) -> String {
        format!(
            "{step},{},{},{},{},{},{},{},{},{}",
            self.total,
            self.seg,
            self.kin,
            self.motion_type,
            self.prismatic_range,
            self.revolute_range,
            self.prismatic_dir,
            self.revolute_dir,
            self.axis_point
        )
    }

    fn terms(&self) -> [(&'static str, f64); 9] {
        [
            ("L_S", self.seg),
            ("L_K", self.kin),
            ("L_tp", self.motion_type),
            ("L_pr", self.prismatic_range),
            ("L_rr", self.revolute_range),
            ("L_pd", self.prismatic_dir),
            ("L_dra", self.revolute_dir),
            ("L_xra", self.axis_point),
            ("total", self.total),
        ]
    }
}

/// Loss with its graph; `total` is the differentiable scalar.
pub struct Loss<'t> {
    pub total: Var<'t>,
    pub breakdown: LossBreakdown,
}

fn rows<const C: usize>(values: &[[f64; C]], parts: &[usize]) -> Tensor {
    let data = parts.iter().flat_map(|&p| values[p]).collect();
    Tensor::new(vec![parts.len(), C], data).expect("sized by construction")
}

/// Masked mean L1 between the rows `queries` of `pred` and `target`; zero when no
/// part qualifies.
fn masked_l1<'t>(tape: &'t Tape, pred: &Var<'t>, queries: &[usize], target: Tensor) -> Result<Var<'t>> {
    if queries.is_empty() {
        return Ok(tape.scalar(0.0));
    }
    pred.gather_rows(queries)?.l1_loss(&target)
}

/// Multi-task loss under `assignment`. Matched parts are visited in increasing query
/// order, which makes every reduction independent of how ground-truth parts are
/// numbered.
pub fn compute_loss<'t>(
    p: &Params<'t>,
    tape: &'t Tape,
    out: &NetworkOutput<'t>,
    gt: &GroundTruth,
    assignment: &Assignment,
) -> Result<Loss<'t>> {
    let n_parts = gt.part_count;
    if assignment.query_of_part.len() != n_parts {
        return Err(Error::invalid("assignment does not cover every part"));
    }
    let pairs = assignment.by_query();
    let queries: Vec<usize> = pairs.iter().map(|&(q, _)| q).collect();
    let parts: Vec<usize> = pairs.iter().map(|&(_, i)| i).collect();

    let seg_targets: Vec<usize> = gt.point_labels.iter().map(|&l| assignment.query_of_part[l]).collect();
    let seg = out.seg_logits.cross_entropy(&seg_targets)?;

    let kin_sub = out
        .kin_logits
        .gather_rows(&queries)?
        .transpose()
        .gather_rows(&queries)?
        .transpose();
    let k = gt.kin_adjacency();
    let mut k_perm = Tensor::zeros(&[n_parts, n_parts]);
    for a in 0..n_parts {
        for b in 0..n_parts {
            k_perm.data_mut()[a * n_parts + b] = k.at(parts[a], parts[b]);
        }
    }
    let kin = kin_sub.binary_cross_entropy(&k_perm)?;

    let type_targets: Vec<usize> = parts.iter().map(|&i| gt.motion_type[i].index()).collect();
    let motion_type = out.type_logits.gather_rows(&queries)?.cross_entropy(&type_targets)?;

    let with = |f: fn(crate::articulation::MotionType) -> bool| -> (Vec<usize>, Vec<usize>) {
        pairs.iter().filter(|&&(_, i)| f(gt.motion_type[i])).map(|&(q, i)| (q, i)).unzip()
    };
    let (pq, pp) = with(|t| t.has_prismatic());
    let (rq, rp) = with(|t| t.has_revolute());
    let prismatic_range = masked_l1(tape, &out.prismatic_range, &pq, rows(&gt.prismatic_range, &pp))?;
    let revolute_range = masked_l1(tape, &out.revolute_range, &rq, rows(&gt.revolute_range, &rp))?;
    let prismatic_dir = masked_l1(tape, &out.prismatic_dir, &pq, rows(&gt.prismatic_dir, &pp))?;
    let revolute_dir = masked_l1(tape, &out.revolute_dir, &rq, rows(&gt.revolute_dir, &rp))?;

    let mut vote_points = Vec::new();
    let mut vote_queries = Vec::new();
    let mut vote_targets = Vec::new();
    for (j, c) in gt.axis_closest_points.iter().enumerate() {
        if let Some(c) = c {
            vote_points.push(j);
            vote_queries.push(assignment.query_of_part[gt.point_labels[j]]);
            vote_targets.extend_from_slice(c);
        }
    }
    let axis_point = if vote_points.is_empty() {
        tape.scalar(0.0)
    } else {
        let votes = axis_votes(p, &out.point_latent, &out.query_latent, &vote_points, &vote_queries)?;
        votes.l1_loss(&Tensor::new(vec![vote_points.len(), 3], vote_targets)?)?
    };

    let total = seg
        .add(&kin)?
        .add(&motion_type)?
        .add(&prismatic_range)?
        .add(&revolute_range.scale(REVOLUTE_RANGE_WEIGHT))?
        .add(&prismatic_dir)?
        .add(&revolute_dir)?
        .add(&axis_point)?;
    let breakdown = LossBreakdown {
        seg: seg.value().item(),
        kin: kin.value().item(),
        motion_type: motion_type.value().item(),
        prismatic_range: prismatic_range.value().item(),
        revolute_range: revolute_range.value().item(),
        prismatic_dir: prismatic_dir.value().item(),
        revolute_dir: revolute_dir.value().item(),
        axis_point: axis_point.value().item(),
        total: total.value().item(),
    };
    if let Some((name, _)) = breakdown.terms().iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Numerical(format!("loss term {name} is not finite")));
    }
    Ok(Loss { total, breakdown })
}
