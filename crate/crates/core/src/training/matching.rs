use crate::assignment::hungarian;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Injective map from ground-truth part to query index.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub query_of_part: Vec<usize>,
    pub utility: f64,
}

impl Assignment {
    /// `(query, part)` pairs in increasing query order.
    pub fn by_query(&self) -> Vec<(usize, usize)> {
        let mut v: Vec<(usize, usize)> = self.query_of_part.iter().enumerate().map(|(p, &q)| (q, p)).collect();
        v.sort_unstable();
        v
    }
}

/// `U[i][q] = sum over points j of part i of log softmax(seg_logits[j])[q]`.
pub fn utility_matrix(seg_logits: &Tensor, point_labels: &[usize], part_count: usize) -> Result<Vec<Vec<f64>>> {
    let (n, q) = (seg_logits.rows(), seg_logits.cols());
    if seg_logits.rank() != 2 || point_labels.len() != n {
        return Err(Error::Shape {
            op: "match",
            lhs: seg_logits.shape().to_vec(),
            rhs: vec![point_labels.len()],
        });
    }
    let mut u = vec![vec![0.0; q]; part_count];
    for (j, &label) in point_labels.iter().enumerate() {
        if label >= part_count {
            return Err(Error::invalid(format!("point label {label} >= part count {part_count}")));
        }
        let row = seg_logits.row(j);
        let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = mx + row.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
        for (acc, &v) in u[label].iter_mut().zip(row) {
            *acc += v - lse;
        }
    }
    Ok(u)
}

/// Assignment maximizing the summed utility of matched (part, query) pairs.
pub fn match_parts(seg_logits: &Tensor, point_labels: &[usize], part_count: usize) -> Result<Assignment> {
    let q = seg_logits.cols();
    if part_count > q {
        return Err(Error::invalid(format!("{part_count} parts exceed {q} queries")));
    }
    let u = utility_matrix(seg_logits, point_labels, part_count)?;
    let cost: Vec<Vec<f64>> = u.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
    let query_of_part = hungarian(&cost)?;
    let utility = query_of_part.iter().enumerate().map(|(i, &j)| u[i][j]).sum();
    Ok(Assignment { query_of_part, utility })
}
