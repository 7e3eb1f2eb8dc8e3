//! Exact k-nearest-neighbor search over 3D points.
//!
//! A static kd-tree with median splits on the widest axis. Queries backtrack
//! exactly, and results are ordered by `(squared distance, index)`, so
//! equidistant neighbors always resolve to the smaller index.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::cloud::Vec3;

const LEAF_SIZE: usize = 8;

#[derive(Debug)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug)]
pub struct KdTree {
    points: Vec<Vec3>,
    order: Vec<usize>,
    root: Node,
}

/// A neighbor candidate ordered by `(dist2, index)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist2: f64,
}

impl Eq for Neighbor {}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let points = points.to_vec();
        let mut order: Vec<usize> = (0..points.len()).collect();
        let n = order.len();
        let root = build(&points, &mut order, 0, n);
        Self {
            points,
            order,
            root,
        }
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

    /// The `k` nearest points to `query`, sorted ascending by
    /// `(squared distance, index)`. `exclude` removes one index (typically the
    /// query point itself) from consideration.
    pub fn knn(&self, query: &Vec3, k: usize, exclude: Option<usize>) -> Vec<Neighbor> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Neighbor> = BinaryHeap::with_capacity(k + 1);
        self.search(&self.root, query, k, exclude, &mut heap);
        heap.into_sorted_vec()
    }

    pub fn nearest(&self, query: &Vec3) -> Option<Neighbor> {
        self.knn(query, 1, None).into_iter().next()
    }

    fn search(
        &self,
        node: &Node,
        query: &Vec3,
        k: usize,
        exclude: Option<usize>,
        heap: &mut BinaryHeap<Neighbor>,
    ) {
        match node {
            Node::Leaf { start, end } => {
                for &idx in &self.order[*start..*end] {
                    if Some(idx) == exclude {
                        continue;
                    }
                    let cand = Neighbor {
                        index: idx,
                        dist2: (self.points[idx] - query).norm_squared(),
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[*axis] - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, query, k, exclude, heap);
                // `<=` keeps equidistant candidates reachable for the index tie-break.
                if heap.len() < k || diff * diff <= heap.peek().expect("non-empty").dist2 {
                    self.search(far, query, k, exclude, heap);
                }
            }
        }
    }
}

fn build(points: &[Vec3], order: &mut [usize], start: usize, end: usize) -> Node {
    let slice = &mut order[start..end];
    if slice.len() <= LEAF_SIZE {
        return Node::Leaf { start, end };
    }
    let mut lo = points[slice[0]];
    let mut hi = lo;
    for &i in slice.iter() {
        lo = lo.inf(&points[i]);
        hi = hi.sup(&points[i]);
    }
    let extent = hi - lo;
    let axis = extent.imax();
    if extent[axis] == 0.0 {
        return Node::Leaf { start, end };
    }
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis]
            .total_cmp(&points[b][axis])
            .then(a.cmp(&b))
    });
    let value = points[slice[mid]][axis];
    // Points equal to the split value may sit on either side; the search
    // visits both sides whenever the query is within reach of the plane.
    Node::Split {
        axis,
        value,
        left: Box::new(build(points, order, start, start + mid)),
        right: Box::new(build(points, order, start + mid, end)),
    }
}
