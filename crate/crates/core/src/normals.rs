//! Surface normals of one class computed from two opposite-class neighbors,
//! consistent orientation by minimum-spanning-tree propagation, and the
//! affine linearization `n_i = A_i p_i + b_i`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use nalgebra::Matrix3;

use crate::cloud::Vec3;
use crate::error::{Error, Result};
use crate::graph::{knn_pairs, WeightedGraph};
use crate::kdtree::KdTree;

/// Relative collinearity tolerance for support triples.
pub const COLLINEARITY_TOL: f64 = 1e-8;

/// The two opposite-class nodes spanning the tangent plane at `node`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SupportPair {
    pub node: usize,
    pub k: usize,
    pub l: usize,
}

/// Normal of the plane through `p_i`, `p_k`, `p_l`, with the affine pieces
/// of the unnormalized cross product `C p_i + d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawNormal {
    pub normal: Vec3,
    pub c: Matrix3<f64>,
    pub d: Vec3,
    pub norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalLinearization {
    pub c: Matrix3<f64>,
    pub d: Vec3,
    pub alpha: f64,
    pub a: Matrix3<f64>,
    pub b: Vec3,
    pub norm_in: f64,
}

impl NormalLinearization {
    /// `A p + b`.
    pub fn evaluate(&self, p: &Vec3) -> Vec3 {
        self.a * p + self.b
    }
}

fn non_collinear(p_i: &Vec3, p_k: &Vec3, p_l: &Vec3, tol: f64) -> bool {
    let u = p_i - p_k;
    let v = p_k - p_l;
    let cross = u.cross(&v).norm();
    cross > tol * u.norm() * v.norm()
}

/// First non-collinear pair among `candidates` (already ordered by distance
/// to `i`): the nearest candidate `k` with the nearest later `l`, advancing
/// `k` when no `l` qualifies.
pub fn select_support_pair(
    positions: &[Vec3],
    i: usize,
    candidates: &[usize],
    tol: f64,
) -> Result<SupportPair> {
    let p_i = &positions[i];
    for (a, &k) in candidates.iter().enumerate() {
        for &l in &candidates[a + 1..] {
            if k != l && non_collinear(p_i, &positions[k], &positions[l], tol) {
                return Ok(SupportPair { node: i, k, l });
            }
        }
    }
    Err(Error::NoSupportPair { node: i })
}

/// Skew-symmetric `C` with `C x = -(e × x)` for `e = p_k - p_l`, so that
/// `(p_i - p_k) × (p_k - p_l) = C p_i - C p_k`.
fn cross_operator(p_k: &Vec3, p_l: &Vec3) -> Matrix3<f64> {
    let (dx, dy, dz) = (p_k.x - p_l.x, p_k.y - p_l.y, p_k.z - p_l.z);
    Matrix3::new(
        0.0, dz, -dy, //
        -dz, 0.0, dx, //
        dy, -dx, 0.0,
    )
}

pub fn raw_normal(p_i: &Vec3, p_k: &Vec3, p_l: &Vec3) -> Result<RawNormal> {
    let c = cross_operator(p_k, p_l);
    // d = -C p_k, expanded per component.
    let d = Vec3::new(
        -p_k.y * (p_k.z - p_l.z) - p_k.z * (p_l.y - p_k.y),
        p_k.x * (p_k.z - p_l.z) - p_k.z * (p_k.x - p_l.x),
        -p_k.x * (p_k.y - p_l.y) - p_k.y * (p_l.x - p_k.x),
    );
    let cross = c * p_i + d;
    let norm = cross.norm();
    let scale = (p_i - p_k).norm() * (p_k - p_l).norm();
    if !(norm > COLLINEARITY_TOL * scale) || norm == 0.0 {
        return Err(Error::Collinear { norm });
    }
    Ok(RawNormal {
        normal: cross / norm,
        c,
        d,
        norm,
    })
}

pub fn linearize(p_in: &Vec3, raw: &RawNormal, alpha: f64) -> Result<NormalLinearization> {
    let norm_in = (raw.c * p_in + raw.d).norm();
    if !(norm_in > 0.0) || !norm_in.is_finite() {
        return Err(Error::Collinear { norm: norm_in });
    }
    let s = alpha / norm_in;
    Ok(NormalLinearization {
        c: raw.c,
        d: raw.d,
        alpha,
        a: raw.c * s,
        b: raw.d * s,
        norm_in,
    })
}

/// Signs and the spanning forest used to orient a normal field.
#[derive(Debug, Clone, PartialEq)]
pub struct Orientation {
    pub alphas: Vec<f64>,
    /// `(parent, child)` pairs of the spanning forest, in visiting order.
    pub tree_edges: Vec<(usize, usize)>,
    pub roots: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Frontier {
    cost: f64,
    node: usize,
    parent: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    // Reversed: BinaryHeap pops the cheapest edge, ties to smaller indices.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then(other.node.cmp(&self.node))
            .then(other.parent.cmp(&self.parent))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Consistently orients `normals` by Prim's algorithm over a k-NN graph of
/// `positions` with costs `1 - |n_i . n_j|`. Each component is rooted at its
/// highest point (ties to the smaller index), whose normal is turned toward
/// `+z`; signs then propagate so every tree edge has a non-negative dot
/// product.
pub fn orient_normals(positions: &[Vec3], normals: &[Vec3], k: usize) -> Result<Orientation> {
    let n = positions.len();
    if n == 0 {
        return Err(Error::TooFewPoints {
            required: 1,
            actual: 0,
        });
    }
    if normals.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: normals.len(),
        });
    }
    let kk = k.min(n - 1);
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    if kk > 0 {
        for (i, j) in knn_pairs(positions, kk) {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
    }

    let mut alphas = vec![0.0; n];
    let mut in_tree = vec![false; n];
    let mut tree_edges = Vec::with_capacity(n.saturating_sub(1));
    let mut roots = Vec::new();

    for start in 0..n {
        if in_tree[start] {
            continue;
        }
        // collect the component to find its root
        let mut comp = vec![start];
        let mut seen = vec![start];
        in_tree[start] = true;
        while let Some(u) = seen.pop() {
            for &v in &adjacency[u] {
                if !in_tree[v] {
                    in_tree[v] = true;
                    comp.push(v);
                    seen.push(v);
                }
            }
        }
        for &v in &comp {
            in_tree[v] = false;
        }
        let root = *comp
            .iter()
            .max_by(|&&a, &&b| positions[a].z.total_cmp(&positions[b].z).then(b.cmp(&a)))
            .expect("component is non-empty");
        roots.push(root);
        alphas[root] = if normals[root].z >= 0.0 { 1.0 } else { -1.0 };
        in_tree[root] = true;

        let mut heap = BinaryHeap::new();
        let push_from = |u: usize, heap: &mut BinaryHeap<Frontier>, in_tree: &[bool]| {
            for &v in &adjacency[u] {
                if !in_tree[v] {
                    heap.push(Frontier {
                        cost: 1.0 - normals[u].dot(&normals[v]).abs(),
                        node: v,
                        parent: u,
                    });
                }
            }
        };
        push_from(root, &mut heap, &in_tree);
        while let Some(Frontier { node, parent, .. }) = heap.pop() {
            if in_tree[node] {
                continue;
            }
            in_tree[node] = true;
            let flip = if normals[parent].dot(&normals[node]) < 0.0 { -1.0 } else { 1.0 };
            alphas[node] = alphas[parent] * flip;
            tree_edges.push((parent, node));
            push_from(node, &mut heap, &in_tree);
        }
    }

    Ok(Orientation {
        alphas,
        tree_edges,
        roots,
    })
}

/// Ordered opposite-class candidates for `i`: graph neighbors in `opposite`
/// sorted by `(distance, index)`.
pub fn graph_candidates(
    graph: &WeightedGraph,
    positions: &[Vec3],
    i: usize,
    is_opposite: &[bool],
) -> Vec<usize> {
    let mut cands: Vec<(f64, usize)> = graph
        .neighbors(i)
        .iter()
        .filter(|(v, _)| is_opposite[*v])
        .map(|&(v, _)| ((positions[v] - positions[i]).norm_squared(), v))
        .collect();
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cands.into_iter().map(|(_, v)| v).collect()
}

/// Support pair for `i`, first from its graph neighbors of the opposite
/// class, then from global queries over the opposite class with `k`, `2k`,
/// `4k`, ... candidates (capped at the class size).
pub fn find_support_pair(
    graph: &WeightedGraph,
    positions: &[Vec3],
    i: usize,
    is_opposite: &[bool],
    opposite: &OppositeIndex,
    k: usize,
) -> Result<SupportPair> {
    let cands = graph_candidates(graph, positions, i, is_opposite);
    if cands.len() >= 2 {
        if let Ok(pair) = select_support_pair(positions, i, &cands, COLLINEARITY_TOL) {
            return Ok(pair);
        }
    }
    let total = opposite.nodes.len();
    let mut kk = k.max(2).min(total);
    loop {
        if kk < 2 {
            break;
        }
        let found: Vec<usize> = opposite
            .tree
            .knn(&positions[i], kk, None)
            .into_iter()
            .map(|nb| opposite.nodes[nb.index])
            .filter(|&v| v != i)
            .collect();
        if let Ok(pair) = select_support_pair(positions, i, &found, COLLINEARITY_TOL) {
            return Ok(pair);
        }
        if kk == total {
            break;
        }
        kk = (kk * 2).min(total);
    }
    Err(Error::NoSupportPair { node: i })
}

/// Spatial index over one class, mapping tree slots back to node ids.
pub struct OppositeIndex {
    pub nodes: Vec<usize>,
    pub tree: KdTree,
}

impl OppositeIndex {
    pub fn new(positions: &[Vec3], nodes: Vec<usize>) -> Self {
        let pts: Vec<Vec3> = nodes.iter().map(|&v| positions[v]).collect();
        Self {
            tree: KdTree::new(&pts),
            nodes,
        }
    }
}

/// Text export: one `node nx ny nz alpha k l` line per oriented node.
pub fn normals_to_text(pairs: &[SupportPair], normals: &[Vec3], alphas: &[f64]) -> String {
    let mut out = String::with_capacity(pairs.len() * 64);
    for ((pair, n), a) in pairs.iter().zip(normals).zip(alphas) {
        let o = n * *a;
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {}",
            pair.node, o.x, o.y, o.z, *a as i32, pair.k, pair.l
        );
    }
    out
}
