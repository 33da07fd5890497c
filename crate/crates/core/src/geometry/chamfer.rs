use crate::error::{Error, Result};

use super::kdtree::KdTree;
use super::vec3::Vec3;

/// Mean nearest-neighbour distance from every point of `from` to the indexed set.
pub fn mean_nn_distance(from: &[Vec3], to: &KdTree) -> f64 {
    let s: f64 = from
        .iter()
        .map(|p| to.nearest(p).map_or(f64::INFINITY, |(_, d)| d.sqrt()))
        .sum();
    s / from.len() as f64
}

/// Symmetric Chamfer distance: the average of the two directed mean nearest-neighbour
/// distances.
pub fn chamfer(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid(format!(
            "chamfer of empty point set ({} vs {} points)",
            a.len(),
            b.len()
        )));
    }
    let (ta, tb) = (KdTree::build(a), KdTree::build(b));
    Ok(0.5 * (mean_nn_distance(a, &tb) + mean_nn_distance(b, &ta)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_cases() {
        let a = vec![[0.0; 3], [1.0, 2.0, 3.0]];
        assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
        assert_eq!(chamfer(&[[0.0; 3]], &[[1.0, 0.0, 0.0]]).unwrap(), 1.0);
        assert!(chamfer(&[], &a).is_err());
    }
}
