use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Vec3};
use crate::tensor::{Tape, Tensor, Var, L2_EPS};

use super::weights::{ModelWeights, Params, QUERY_HEADS, STAGES};

const LN_EPS: f64 = 1e-5;

/// Network predictions. Per-point rows follow the input point order.
pub struct NetworkOutput<'t> {
    /// `N x P_max` segmentation logits.
    pub seg_logits: Var<'t>,
    /// `P_max x P_max`; entry `[i][j]` scores "query i is the parent of query j".
    pub kin_logits: Var<'t>,
    pub type_logits: Var<'t>,
    pub prismatic_range: Var<'t>,
    pub revolute_range: Var<'t>,
    /// Unit rows.
    pub prismatic_dir: Var<'t>,
    /// Unit rows.
    pub revolute_dir: Var<'t>,
    /// `N x D` final point latents.
    pub point_latent: Var<'t>,
    /// `P_max x D` final query latents.
    pub query_latent: Var<'t>,
}

fn linear<'t>(p: &Params<'t>, name: &str, x: &Var<'t>) -> Result<Var<'t>> {
    x.matmul(p.get(&format!("{name}.w"))?)?
        .add_row(p.get(&format!("{name}.b"))?)
}

fn mlp2<'t>(p: &Params<'t>, name: &str, x: &Var<'t>) -> Result<Var<'t>> {
    let h = linear(p, &format!("{name}.0"), x)?.gelu();
    linear(p, &format!("{name}.1"), &h)
}

fn layer_norm<'t>(p: &Params<'t>, name: &str, x: &Var<'t>) -> Result<Var<'t>> {
    x.layer_norm(LN_EPS)
        .mul_row(p.get(&format!("{name}.g"))?)?
        .add_row(p.get(&format!("{name}.b"))?)
}

/// Multi-head attention of rows of `xq` over rows of `xkv`.
fn attention<'t>(p: &Params<'t>, name: &str, xq: &Var<'t>, xkv: &Var<'t>) -> Result<Var<'t>> {
    let cfg = p.config();
    let dh = cfg.head_dim();
    let q = linear(p, &format!("{name}.q"), xq)?;
    let k = linear(p, &format!("{name}.k"), xkv)?;
    let v = linear(p, &format!("{name}.v"), xkv)?;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut heads = Vec::with_capacity(cfg.heads);
    for h in 0..cfg.heads {
        let qh = q.slice_cols(h * dh, dh)?;
        let kh = k.slice_cols(h * dh, dh)?;
        let vh = v.slice_cols(h * dh, dh)?;
        let att = qh.matmul(&kh.transpose())?.scale(scale).softmax();
        heads.push(att.matmul(&vh)?);
    }
    let cat = if heads.len() == 1 { heads.pop().expect("one head") } else { Var::concat(&heads, 1)? };
    linear(p, &format!("{name}.o"), &cat)
}

/// Pre-norm attention with residual, then a pre-norm residual MLP.
fn stage<'t>(p: &Params<'t>, name: &str, x: &Var<'t>, context: Option<&Var<'t>>) -> Result<Var<'t>> {
    let xn = layer_norm(p, &format!("{name}.ln_q"), x)?;
    let att = match context {
        Some(c) => {
            let cn = layer_norm(p, &format!("{name}.ln_kv"), c)?;
            attention(p, &format!("{name}.attn"), &xn, &cn)?
        }
        None => attention(p, &format!("{name}.attn"), &xn, &xn)?,
    };
    let x = x.add(&att)?;
    let m = mlp2(p, &format!("{name}.mlp"), &layer_norm(p, &format!("{name}.ln_mlp"), &x)?)?;
    x.add(&m)
}

fn cmp_sample(a: &crate::geometry::PointSample, b: &crate::geometry::PointSample) -> Ordering {
    let key = |s: &crate::geometry::PointSample| -> Vec<f64> {
        s.position.iter().chain(&s.normal).chain(&s.feature).copied().collect()
    };
    let (ka, kb) = (key(a), key(b));
    ka.iter()
        .zip(&kb)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Canonical processing order of the points: lexicographic on (position, normal,
/// feature). Every reduction over points then runs in an order that does not depend on
/// how the input was permuted.
fn canonical_order(cloud: &PointCloud) -> Vec<usize> {
    let mut order: Vec<usize> = (0..cloud.len()).collect();
    order.sort_by(|&i, &j| cmp_sample(&cloud.samples[i], &cloud.samples[j]));
    order
}

fn input_matrix(order: &[usize], width: usize, f: impl Fn(usize) -> Vec<f64>) -> Result<Tensor> {
    let mut data = Vec::with_capacity(order.len() * width);
    for &i in order {
        let row = f(i);
        if row.len() != width {
            return Err(Error::Shape {
                op: "embed_points",
                lhs: vec![width],
                rhs: vec![row.len()],
            });
        }
        data.extend(row);
    }
    Tensor::new(vec![order.len(), width], data)
}

/// Sum of the position, normal and (when configured) feature MLPs, rows in `order`.
fn embed_ordered<'t>(p: &Params<'t>, tape: &'t Tape, cloud: &PointCloud, order: &[usize]) -> Result<Var<'t>> {
    let cfg = p.config();
    let pos = input_matrix(order, 3, |i| cloud.samples[i].position.to_vec())?;
    let nrm = input_matrix(order, 3, |i| cloud.samples[i].normal.to_vec())?;
    let mut x = mlp2(p, "embed.position", &tape.leaf(pos))?.add(&mlp2(p, "embed.normal", &tape.leaf(nrm))?)?;
    if cfg.feature_dim > 0 {
        let feat = input_matrix(order, cfg.feature_dim, |i| cloud.samples[i].feature.clone())?;
        x = x.add(&mlp2(p, "embed.feature", &tape.leaf(feat))?)?;
    } else if cloud.feature_dim() != 0 {
        return Err(Error::invalid(format!(
            "point features of width {} given to a model without a feature branch",
            cloud.feature_dim()
        )));
    }
    Ok(x)
}

/// Point latents before any attention, in input order.
pub fn embed_points<'t>(p: &Params<'t>, tape: &'t Tape, cloud: &PointCloud) -> Result<Var<'t>> {
    let order: Vec<usize> = (0..cloud.len()).collect();
    embed_ordered(p, tape, cloud, &order)
}

fn check_finite(x: &Var<'_>, what: &str) -> Result<()> {
    if x.value().is_finite() {
        Ok(())
    } else {
        Err(Error::Numerical(format!("non-finite activation in {what}")))
    }
}

fn query_head<'t>(p: &Params<'t>, name: &str, q: &Var<'t>) -> Result<Var<'t>> {
    mlp2(p, &format!("head.{name}"), q)
}

/// Pairwise concat-MLP score `w1 . gelu(Wa x_j + Wb y_i + b0) + b1` for all `(j, i)`.
fn pair_head<'t>(p: &Params<'t>, name: &str, x: &Var<'t>, y: &Var<'t>) -> Result<Var<'t>> {
    let a = x.matmul(p.get(&format!("head.{name}.wa"))?)?;
    let b = y
        .matmul(p.get(&format!("head.{name}.wb"))?)?
        .add_row(p.get(&format!("head.{name}.b0"))?)?;
    a.pair_mlp(&b, p.get(&format!("head.{name}.w1"))?, p.get(&format!("head.{name}.b1"))?)
}

pub fn forward<'t>(p: &Params<'t>, tape: &'t Tape, cloud: &PointCloud) -> Result<NetworkOutput<'t>> {
    let cfg = p.config().clone();
    if cloud.is_empty() {
        return Err(Error::invalid("forward needs at least one point"));
    }
    let order = canonical_order(cloud);
    let mut inverse = vec![0; order.len()];
    for (k, &i) in order.iter().enumerate() {
        inverse[i] = k;
    }
    let mut points = embed_ordered(p, tape, cloud, &order)?;
    check_finite(&points, "point embedding")?;
    let mut queries = p.get("queries")?.clone();
    for b in 0..cfg.blocks {
        let [s_self, s_qp, s_pq] = STAGES;
        queries = stage(p, &format!("block{b}.{s_self}"), &queries, None)?;
        queries = stage(p, &format!("block{b}.{s_qp}"), &queries, Some(&points))?;
        points = stage(p, &format!("block{b}.{s_pq}"), &points, Some(&queries))?;
        check_finite(&queries, &format!("block {b}"))?;
        check_finite(&points, &format!("block {b}"))?;
    }
    let points = layer_norm(p, "final.ln_point", &points)?.gather_rows(&inverse)?;
    let queries = layer_norm(p, "final.ln_query", &queries)?;

    let seg_logits = pair_head(p, "seg", &points, &queries)?;
    let kin_logits = pair_head(p, "kin", &queries, &queries)?;
    let mut heads: Vec<Var<'t>> = QUERY_HEADS
        .iter()
        .map(|(name, _)| query_head(p, name, &queries))
        .collect::<Result<_>>()?;
    let revolute_dir = heads.pop().expect("five heads").l2_normalize(L2_EPS)?;
    let prismatic_dir = heads.pop().expect("five heads").l2_normalize(L2_EPS)?;
    let revolute_range = heads.pop().expect("five heads");
    let prismatic_range = heads.pop().expect("five heads");
    let type_logits = heads.pop().expect("five heads");
    let out = NetworkOutput {
        seg_logits,
        kin_logits,
        type_logits,
        prismatic_range,
        revolute_range,
        prismatic_dir,
        revolute_dir,
        point_latent: points,
        query_latent: queries,
    };
    check_finite(&out.seg_logits, "heads")?;
    Ok(out)
}

/// Axis-point votes for pairs `(point_idx[r], query_idx[r])`, one row of `[len, 3]`
/// each: a concat-MLP on the point latent and the query latent.
pub fn axis_votes<'t>(
    p: &Params<'t>,
    point_latent: &Var<'t>,
    query_latent: &Var<'t>,
    point_idx: &[usize],
    query_idx: &[usize],
) -> Result<Var<'t>> {
    if point_idx.len() != query_idx.len() {
        return Err(Error::invalid("axis_votes index lists differ in length"));
    }
    let (n, m) = (point_latent.value().rows(), query_latent.value().rows());
    if point_idx.iter().any(|&j| j >= n) || query_idx.iter().any(|&i| i >= m) {
        return Err(Error::invalid("axis_votes index out of range"));
    }
    let a = point_latent.gather_rows(point_idx)?.matmul(p.get("head.axis_point.wa")?)?;
    let b = query_latent
        .matmul(p.get("head.axis_point.wb")?)?
        .add_row(p.get("head.axis_point.b0")?)?
        .gather_rows(query_idx)?;
    linear(p, "head.axis_point.1", &a.add(&b)?.gelu())
}

/// Vote of point `j` for the axis of query `i`, evaluated without gradients.
pub fn axis_vote(weights: &ModelWeights, point_latent: &Tensor, query_latent: &Tensor, j: usize, i: usize) -> Result<Vec3> {
    let tape = Tape::no_grad();
    let p = weights.on_tape(&tape);
    let v = axis_votes(&p, &tape.leaf(point_latent.clone()), &tape.leaf(query_latent.clone()), &[j], &[i])?;
    let r = v.value().row(0);
    Ok([r[0], r[1], r[2]])
}
