//! Static 3-d tree for exact nearest-neighbor queries.
//!
//! Ties in distance resolve to the lowest point index, so results match a
//! linear scan bit for bit.

use crate::geometry::Vec3;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut tree = KdTree {
            points: points.to_vec(),
            order: (0..points.len() as u32).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let (lo, hi) = self.order[start..end].iter().fold(
            (Vec3::splat(f64::INFINITY), Vec3::splat(f64::NEG_INFINITY)),
            |(lo, hi), &i| (lo.min(self.points[i as usize]), hi.max(self.points[i as usize])),
        );
        let ext = hi - lo;
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = (start + end) / 2;
        let pts = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a as usize][axis].total_cmp(&pts[b as usize][axis])
        });
        let value = self.points[self.order[mid] as usize][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// Index and squared distance of the closest point; `None` when empty.
    pub fn nearest(&self, q: Vec3) -> Option<(usize, f64)> {
        if self.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_rec(0, q, &mut best);
        Some(best)
    }

    fn nearest_rec(&self, node: usize, q: Vec3, best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = q.distance_squared(self.points[i as usize]);
                    let i = i as usize;
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.nearest_rec(near, q, best);
                // `<=` keeps equal-distance candidates reachable for the index tie-break
                if diff * diff <= best.1 {
                    self.nearest_rec(far, q, best);
                }
            }
        }
    }

    /// The `k` closest points ordered by (squared distance, index).
    pub fn k_nearest(&self, q: Vec3, k: usize) -> Vec<(usize, f64)> {
        let mut heap: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        if k == 0 || self.is_empty() {
            return Vec::new();
        }
        self.knn_rec(0, q, k, &mut heap);
        heap.into_iter().map(|(d, i)| (i, d)).collect()
    }

    fn knn_rec(&self, node: usize, q: Vec3, k: usize, best: &mut Vec<(f64, usize)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = (q.distance_squared(self.points[i as usize]), i as usize);
                    if best.len() == k {
                        let worst = best[k - 1];
                        if cand.0 > worst.0 || (cand.0 == worst.0 && cand.1 > worst.1) {
                            continue;
                        }
                    }
                    let pos = best.partition_point(|e| e.0 < cand.0 || (e.0 == cand.0 && e.1 < cand.1));
                    best.insert(pos, cand);
                    best.truncate(k);
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.knn_rec(near, q, k, best);
                if best.len() < k || diff * diff <= best[best.len() - 1].0 {
                    self.knn_rec(far, q, k, best);
                }
            }
        }
    }
}

/// Linear-scan nearest neighbor with the same tie rule as [`KdTree::nearest`].
pub fn brute_force_nearest(points: &[Vec3], q: Vec3) -> Option<(usize, f64)> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, q.distance_squared(*p)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
        (0..n).map(|_| Vec3::new(rng.random(), rng.random(), rng.random())).collect()
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = cloud(&mut rng, 2000);
        let tree = KdTree::new(&pts);
        for _ in 0..500 {
            let q = Vec3::new(rng.random::<f64>() * 1.4 - 0.2, rng.random(), rng.random());
            assert_eq!(tree.nearest(q), brute_force_nearest(&pts, q));
            let mut brute: Vec<(usize, f64)> = pts.iter().enumerate().map(|(i, p)| (i, q.distance_squared(*p))).collect();
            brute.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            brute.truncate(7);
            assert_eq!(tree.k_nearest(q, 7), brute);
        }
    }

    #[test]
    fn duplicate_points_tie_to_lowest_index() {
        let pts = vec![Vec3::new(1.0, 0.0, 0.0); 50];
        let tree = KdTree::new(&pts);
        assert_eq!(tree.nearest(Vec3::ZERO), Some((0, 1.0)));
        let knn = tree.k_nearest(Vec3::ZERO, 3);
        assert_eq!(knn.iter().map(|e| e.0).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn empty_tree() {
        let t = KdTree::new(&[]);
        assert!(t.nearest(Vec3::ZERO).is_none());
        assert!(t.k_nearest(Vec3::ZERO, 3).is_empty());
    }
}
