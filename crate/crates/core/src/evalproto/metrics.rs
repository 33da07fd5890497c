use crate::assignment::min_cost_pairs;
use crate::error::{Error, Result};
use crate::geometry::vec3::{self, Vec3};

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub lo: Vec3,
    pub hi: Vec3,
}

impl Aabb {
    pub fn of(points: &[Vec3]) -> Option<Aabb> {
        vec3::bounds(points).map(|(lo, hi)| Aabb { lo, hi })
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|k| (self.hi[k] - self.lo[k]).max(0.0)).product()
    }

    fn intersection(&self, o: &Aabb) -> Aabb {
        Aabb {
            lo: std::array::from_fn(|k| self.lo[k].max(o.lo[k])),
            hi: std::array::from_fn(|k| self.hi[k].min(o.hi[k])),
        }
    }

    fn enclosing(&self, o: &Aabb) -> Aabb {
        Aabb {
            lo: std::array::from_fn(|k| self.lo[k].min(o.lo[k])),
            hi: std::array::from_fn(|k| self.hi[k].max(o.hi[k])),
        }
    }
}

/// Generalized IoU of two boxes: `IoU - |C \ (A ∪ B)| / |C|` with `C` the enclosing
/// box. Flat boxes score 1 when equal and 0 otherwise.
pub fn giou(a: &Aabb, b: &Aabb) -> f64 {
    let c = a.enclosing(b).volume();
    if c <= 0.0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    let inter = a.intersection(b).volume();
    let union = a.volume() + b.volume() - inter;
    let iou = if union > 0.0 { inter / union } else { 0.0 };
    iou - (c - union) / c
}

/// `|{a == p and b == g}| / |{a == p or b == g}|` over shared points.
pub fn label_iou(a: &[usize], p: usize, b: &[usize], g: usize) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        let (u, v) = (x == p, y == g);
        inter += (u && v) as usize;
        union += (u || v) as usize;
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn centroid(points: &[Vec3]) -> Option<Vec3> {
    if points.is_empty() {
        return None;
    }
    let s = points.iter().fold([0.0; 3], |acc, &p| vec3::add(acc, p));
    Some(vec3::scale(s, 1.0 / points.len() as f64))
}

/// Minimum-total-distance pairing of predicted and ground-truth parts by centroid;
/// `None` entries (empty parts) are never matched. Pairs come back sorted by the
/// predicted index.
pub fn match_parts_by_centroid(pred: &[Option<Vec3>], gt: &[Option<Vec3>]) -> Result<Vec<(usize, usize)>> {
    let pi: Vec<usize> = (0..pred.len()).filter(|&i| pred[i].is_some()).collect();
    let gi: Vec<usize> = (0..gt.len()).filter(|&i| gt[i].is_some()).collect();
    let cost: Vec<Vec<f64>> = pi
        .iter()
        .map(|&a| {
            gi.iter()
                .map(|&b| vec3::dist(pred[a].expect("present"), gt[b].expect("present")))
                .collect()
        })
        .collect();
    let mut pairs: Vec<(usize, usize)> = min_cost_pairs(&cost)?.into_iter().map(|(r, c)| (pi[r], gi[c])).collect();
    pairs.sort_unstable();
    Ok(pairs)
}

/// `½ (Σ_pred d / N + Σ_gt d / M)` where matched pairs count on both sides and every
/// unmatched part scores `penalty`.
pub fn penalized_aggregate(pair_values: &[f64], unmatched_pred: usize, unmatched_gt: usize, penalty: f64) -> Result<f64> {
    let n = pair_values.len() + unmatched_pred;
    let m = pair_values.len() + unmatched_gt;
    if n == 0 || m == 0 {
        return Err(Error::invalid("penalized aggregate needs parts on both sides"));
    }
    let s: f64 = pair_values.iter().sum();
    Ok(0.5 * ((s + unmatched_pred as f64 * penalty) / n as f64 + (s + unmatched_gt as f64 * penalty) / m as f64))
}

/// Mean over matched pairs only; `fallback` when nothing matched.
pub fn unpenalized_aggregate(pair_values: &[f64], fallback: f64) -> f64 {
    if pair_values.is_empty() {
        fallback
    } else {
        pair_values.iter().sum::<f64>() / pair_values.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(x: f64) -> Aabb {
        Aabb {
            lo: [x, 0.0, 0.0],
            hi: [x + 1.0, 1.0, 1.0],
        }
    }

    #[test]
    fn giou_cases() {
        assert_eq!(giou(&unit_box(0.0), &unit_box(0.0)), 1.0);
        assert_eq!(giou(&unit_box(0.0), &unit_box(1.0)), 0.0);
        // gap of one box width: IoU 0, slack 1/3
        assert!((giou(&unit_box(0.0), &unit_box(2.0)) + 1.0 / 3.0).abs() < 1e-15);
        let g = giou(&unit_box(0.0), &unit_box(1e6));
        assert!(g > -1.0 && g < -0.999);
    }

    #[test]
    fn label_iou_counting() {
        // pred part 1 covers points 0..4, gt part 7 covers 2..6: overlap 2 of 6
        let a = [1, 1, 1, 1, 0, 0];
        let b = [0, 0, 7, 7, 7, 7];
        assert!((label_iou(&a, 1, &b, 7) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn worked_example() {
        assert_eq!(penalized_aggregate(&[0.5], 0, 1, 0.0).unwrap(), 0.375);
        assert_eq!(penalized_aggregate(&[1.0, 1.0, 1.0], 0, 0, 0.0).unwrap(), 1.0);
        assert_eq!(penalized_aggregate(&[], 1, 1, -1.0).unwrap(), -1.0);
        assert!(penalized_aggregate(&[], 0, 3, 0.0).is_err());
    }

    #[test]
    fn centroid_matching_without_threshold() {
        let pairs = match_parts_by_centroid(&[Some([0.0; 3])], &[Some([100.0; 3])]).unwrap();
        assert_eq!(pairs, vec![(0, 0)]);
        let pairs = match_parts_by_centroid(&[Some([0.0; 3]), None], &[None, Some([1.0; 3])]).unwrap();
        assert_eq!(pairs, vec![(0, 1)]);
        assert!(match_parts_by_centroid(&[], &[Some([0.0; 3])]).unwrap().is_empty());
    }
}
