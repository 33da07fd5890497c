//! Static 3-d tree for exact nearest-neighbour queries.

use super::vec3::Vec3;

const LEAF_SIZE: usize = 8;

enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Immutable after construction; safe to query from many threads.
pub struct KdTree {
    points: Vec<Vec3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[inline]
fn d2(a: &Vec3, b: &Vec3) -> f64 {
    let (x, y, z) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    x * x + y * y + z * z
}

impl KdTree {
    pub fn build(points: &[Vec3]) -> KdTree {
        let mut tree = KdTree {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build_node(0, points.len());
        }
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            for k in 0..3 {
                lo[k] = lo[k].min(self.points[i][k]);
                hi[k] = hi[k].max(self.points[i][k]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        let mid = (start + end) / 2;
        let pts = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| pts[a][axis].total_cmp(&pts[b][axis]));
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and squared distance of the nearest stored point; `None` when empty.
    pub fn nearest(&self, q: &Vec3) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, q, &mut best);
        Some(best)
    }

    fn search(&self, node: usize, q: &Vec3, best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = d2(&self.points[i], q);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                if diff * diff <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vec3> = (0..500).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let tree = KdTree::build(&pts);
        for _ in 0..200 {
            let q: Vec3 = [rng.gen_range(-0.2..1.2), rng.gen(), rng.gen()];
            let (i, d) = tree.nearest(&q).unwrap();
            let brute = pts.iter().map(|p| d2(p, &q)).fold(f64::INFINITY, f64::min);
            assert_eq!(d, brute);
            assert_eq!(d2(&pts[i], &q), d);
        }
        assert!(KdTree::build(&[]).nearest(&[0.0; 3]).is_none());
    }

    #[test]
    fn duplicate_points() {
        let pts = vec![[1.0, 1.0, 1.0]; 50];
        let tree = KdTree::build(&pts);
        assert_eq!(tree.nearest(&[1.0, 1.0, 1.0]).unwrap(), (0, 0.0));
    }
}
