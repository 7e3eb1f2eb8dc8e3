//! k-NN graphs with Gaussian-kernel weights and their Laplacians.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::cloud::{PointCloud, Vec3};
use crate::error::{Error, Result};
use crate::kdtree::KdTree;

/// Default kernel bandwidth for edge weights.
pub const DEFAULT_SIGMA_P: f64 = 1.5;
/// Default neighbor count for k-NN graphs.
pub const DEFAULT_K: usize = 8;

/// Gaussian kernel weight `exp(-|p_i - p_j|^2 / sigma_p^2)`.
pub fn edge_weight(p_i: &Vec3, p_j: &Vec3, sigma_p: f64) -> Result<f64> {
    if !(sigma_p > 0.0) || !sigma_p.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "kernel bandwidth sigma_p must be > 0, got {sigma_p}"
        )));
    }
    Ok(kernel(p_i, p_j, sigma_p))
}

pub(crate) fn kernel(p_i: &Vec3, p_j: &Vec3, sigma_p: f64) -> f64 {
    let d2 = (p_i - p_j).norm_squared();
    // Far pairs would underflow to 0; weights stay strictly positive.
    (-d2 / (sigma_p * sigma_p)).exp().max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

/// Undirected weighted graph with canonical `i < j` edges sorted
/// lexicographically, plus per-node adjacency lists.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    node_count: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl WeightedGraph {
    /// Builds a graph from an edge list. Edges may be given in either
    /// orientation; duplicates, self-loops and weights outside `(0, 1]`
    /// are rejected.
    pub fn from_edges(node_count: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut list: Vec<Edge> = Vec::new();
        for (a, b, w) in edges {
            if a >= node_count || b >= node_count {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a}, {b}) out of range for {node_count} nodes"
                )));
            }
            if a == b {
                return Err(Error::InvalidParameter(format!("self-loop at node {a}")));
            }
            if !(w > 0.0 && w <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a}, {b}) weight {w} outside (0, 1]"
                )));
            }
            list.push(Edge {
                i: a.min(b),
                j: a.max(b),
                w,
            });
        }
        list.sort_by_key(|e| (e.i, e.j));
        if let Some(d) = list.windows(2).find(|p| (p[0].i, p[0].j) == (p[1].i, p[1].j)) {
            return Err(Error::InvalidParameter(format!(
                "duplicate edge ({}, {})",
                d[0].i, d[0].j
            )));
        }
        Ok(Self::from_sorted(node_count, list))
    }

    fn from_sorted(node_count: usize, edges: Vec<Edge>) -> Self {
        let mut adjacency = vec![Vec::new(); node_count];
        for e in &edges {
            adjacency[e.i].push((e.j, e.w));
            adjacency[e.j].push((e.i, e.w));
        }
        for adj in &mut adjacency {
            adj.sort_by_key(|&(n, _)| n);
        }
        Self {
            node_count,
            edges,
            adjacency,
        }
    }

    pub fn empty(node_count: usize) -> Self {
        Self::from_sorted(node_count, Vec::new())
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbors of `i` with edge weights, ascending by neighbor index.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.adjacency[i]
            .binary_search_by_key(&j, |&(n, _)| n)
            .ok()
            .map(|pos| self.adjacency[i][pos].1)
    }

    /// Keeps the edges for which `keep` returns true.
    pub fn filter_edges(&self, mut keep: impl FnMut(&Edge) -> bool) -> WeightedGraph {
        let edges = self.edges.iter().copied().filter(|e| keep(e)).collect();
        Self::from_sorted(self.node_count, edges)
    }

    /// Subgraph induced by `nodes`, relabelled to `0..nodes.len()` in the
    /// given order.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> WeightedGraph {
        let mut local = vec![usize::MAX; self.node_count];
        for (li, &g) in nodes.iter().enumerate() {
            local[g] = li;
        }
        let mut edges = Vec::new();
        for (li, &g) in nodes.iter().enumerate() {
            for &(nb, w) in &self.adjacency[g] {
                let lj = local[nb];
                if lj != usize::MAX && li < lj {
                    edges.push(Edge { i: li, j: lj, w });
                }
            }
        }
        edges.sort_by_key(|e| (e.i, e.j));
        Self::from_sorted(nodes.len(), edges)
    }

    /// Connected components, each sorted ascending; components are ordered
    /// by their smallest node.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.node_count];
        let mut comps = Vec::new();
        for s in 0..self.node_count {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        stack.push(v);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    /// Text export: one `i j w` line per edge in canonical order.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(self.edges.len() * 32);
        for e in &self.edges {
            let _ = writeln!(out, "{} {} {}", e.i, e.j, e.w);
        }
        out
    }
}

/// Exact k-NN graph over `points` with union symmetrization: `(i, j)` is an
/// edge when either point is among the other's `k` nearest.
pub fn build_knn_graph(cloud: &PointCloud, k: usize, sigma_p: f64) -> Result<WeightedGraph> {
    knn_graph_from_points(cloud.positions(), k, sigma_p)
}

pub(crate) fn knn_graph_from_points(points: &[Vec3], k: usize, sigma_p: f64) -> Result<WeightedGraph> {
    let n = points.len();
    if n < 2 {
        return Err(Error::TooFewPoints {
            required: 2,
            actual: n,
        });
    }
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "neighbor count k must satisfy 1 <= k < N (k = {k}, N = {n})"
        )));
    }
    if !(sigma_p > 0.0) || !sigma_p.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "kernel bandwidth sigma_p must be > 0, got {sigma_p}"
        )));
    }
    if points.iter().all(|p| *p == points[0]) {
        return Err(Error::Degenerate("all points coincide".into()));
    }
    let edges = knn_pairs(points, k)
        .into_iter()
        .map(|(i, j)| Edge {
            i,
            j,
            w: kernel(&points[i], &points[j], sigma_p),
        })
        .collect();
    Ok(WeightedGraph::from_sorted(n, edges))
}

/// Canonical `(i, j)` pairs, `i < j`, of the union-symmetrized k-NN relation.
pub(crate) fn knn_pairs(points: &[Vec3], k: usize) -> Vec<(usize, usize)> {
    let tree = KdTree::new(points);
    let mut pairs: Vec<(usize, usize)> = (0..points.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            tree.knn(&points[i], k, Some(i))
                .into_iter()
                .map(move |nb| (i.min(nb.index), i.max(nb.index)))
        })
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

/// Combinatorial Laplacian `L = D - W` held in sparse form.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    diagonal: Vec<f64>,
    edges: Vec<Edge>,
}

pub fn laplacian(graph: &WeightedGraph) -> Laplacian {
    let mut diagonal = vec![0.0; graph.node_count()];
    for e in graph.edges() {
        diagonal[e.i] += e.w;
        diagonal[e.j] += e.w;
    }
    Laplacian {
        diagonal,
        edges: graph.edges().to_vec(),
    }
}

impl Laplacian {
    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (i, &d) in self.diagonal.iter().enumerate() {
            m[(i, i)] = d;
        }
        for e in &self.edges {
            m[(e.i, e.j)] -= e.w;
            m[(e.j, e.i)] -= e.w;
        }
        m
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::from_iterator(
            self.dim(),
            self.diagonal.iter().zip(x.iter()).map(|(d, v)| d * v),
        );
        for e in &self.edges {
            y[e.i] -= e.w * x[e.j];
            y[e.j] -= e.w * x[e.i];
        }
        y
    }

    /// `x' L x`, evaluated as the edge sum `sum w (x_i - x_j)^2`.
    pub fn quadratic_form(&self, x: &DVector<f64>) -> f64 {
        self.edges
            .iter()
            .map(|e| e.w * (x[e.i] - x[e.j]).powi(2))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(pts: &[[f64; 3]]) -> PointCloud {
        PointCloud::from_xyz(pts).unwrap()
    }

    #[test]
    fn weight_zero_distance_is_one() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(edge_weight(&p, &p, 1.5).unwrap(), 1.0);
    }

    #[test]
    fn weight_at_bandwidth_distance() {
        let w = edge_weight(&Vec3::zeros(), &Vec3::new(1.5, 0.0, 0.0), 1.5).unwrap();
        assert!((w - (-1.0f64).exp()).abs() < 1e-15);
        assert!((w - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn weight_symmetric_and_validated() {
        let a = Vec3::new(0.3, -1.2, 7.0);
        let b = Vec3::new(-2.0, 0.1, 6.5);
        assert_eq!(edge_weight(&a, &b, 0.7).unwrap(), edge_weight(&b, &a, 0.7).unwrap());
        assert!(edge_weight(&a, &b, 0.0).is_err());
        assert!(edge_weight(&a, &b, -1.0).is_err());
    }

    #[test]
    fn collinear_k1() {
        let g = build_knn_graph(&cloud(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]), 1, 1.5).unwrap();
        let pairs: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.i, e.j)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2)]);
        let expected = (-1.0f64 / 2.25).exp();
        for e in g.edges() {
            assert!((e.w - expected).abs() < 1e-15);
            assert!((e.w - 0.6412).abs() < 1e-4);
        }
    }

    #[test]
    fn k_n_minus_one_is_complete() {
        let c = cloud(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 5.0], [2.0, 2.0, 2.0]]);
        let g = build_knn_graph(&c, 4, 1.5).unwrap();
        assert_eq!(g.edge_count(), 10);
    }

    #[test]
    fn invalid_inputs() {
        let c = cloud(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        assert!(build_knn_graph(&c, 2, 1.5).is_err());
        assert!(build_knn_graph(&c, 0, 1.5).is_err());
        assert!(build_knn_graph(&c, 1, 0.0).is_err());
        let same = cloud(&[[1.0, 1.0, 1.0]; 4]);
        assert!(matches!(build_knn_graph(&same, 2, 1.5), Err(Error::Degenerate(_))));
    }

    #[test]
    fn hexagon_with_ties_is_permutation_invariant() {
        let mut pts = vec![[0.0, 0.0, 0.0]];
        for s in 0..6 {
            let a = std::f64::consts::PI / 3.0 * s as f64;
            // exact ties on the center spokes
            pts.push([a.cos(), a.sin(), 0.0]);
        }
        let base = build_knn_graph(&cloud(&pts), 3, 1.5).unwrap();
        let perm = [4usize, 0, 6, 2, 5, 1, 3];
        let permuted: Vec<[f64; 3]> = perm.iter().map(|&p| pts[p]).collect();
        let g = build_knn_graph(&cloud(&permuted), 3, 1.5).unwrap();
        let mut mapped: Vec<(usize, usize)> = g
            .edges()
            .iter()
            .map(|e| (perm[e.i].min(perm[e.j]), perm[e.i].max(perm[e.j])))
            .collect();
        mapped.sort_unstable();
        let orig: Vec<(usize, usize)> = base.edges().iter().map(|e| (e.i, e.j)).collect();
        assert_eq!(mapped, orig);
    }

    #[test]
    fn every_node_has_degree_at_least_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<[f64; 3]> = (0..200)
            .map(|_| [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>() * 0.1])
            .collect();
        let g = build_knn_graph(&cloud(&pts), 8, 1.5).unwrap();
        assert!((0..200).all(|i| g.degree(i) >= 8));
        for e in g.edges() {
            assert!(e.i < e.j && e.w > 0.0 && e.w <= 1.0);
        }
    }

    #[test]
    fn laplacian_single_edge() {
        let g = WeightedGraph::from_edges(2, [(0, 1, 1.0)]).unwrap();
        let l = laplacian(&g).to_dense();
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn laplacian_edgeless_is_zero() {
        let l = laplacian(&WeightedGraph::empty(3)).to_dense();
        assert_eq!(l, DMatrix::zeros(3, 3));
    }

    #[test]
    fn laplacian_triangle_spectrum() {
        let g = WeightedGraph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        let l = laplacian(&g).to_dense();
        let mut ev: Vec<f64> = l.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for (got, want) in ev.iter().zip([0.0, 3.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_null_vector_and_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<[f64; 3]> = (0..60)
            .map(|_| [rng.random::<f64>() * 3.0, rng.random::<f64>() * 3.0, rng.random::<f64>()])
            .collect();
        let g = build_knn_graph(&cloud(&pts), 5, 1.5).unwrap();
        let l = laplacian(&g);
        let ones = DVector::from_element(60, 1.0);
        let scale = l.diagonal().iter().cloned().fold(0.0, f64::max);
        assert!(l.mul_vec(&ones).amax() <= 1e-12 * scale);
        for _ in 0..100 {
            let x = DVector::from_fn(60, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            assert!(x.dot(&l.mul_vec(&x)) >= -1e-12);
            assert!(l.quadratic_form(&x) >= 0.0);
        }
    }

    #[test]
    fn edge_list_export() {
        let g = WeightedGraph::from_edges(3, [(2, 1, 0.5), (0, 1, 1.0)]).unwrap();
        assert_eq!(g.to_edge_list(), "0 1 1\n1 2 0.5\n");
    }

    #[test]
    fn from_edges_rejects_bad_input() {
        assert!(WeightedGraph::from_edges(2, [(0, 0, 1.0)]).is_err());
        assert!(WeightedGraph::from_edges(2, [(0, 1, 1.5)]).is_err());
        assert!(WeightedGraph::from_edges(2, [(0, 1, 0.5), (1, 0, 0.5)]).is_err());
        assert!(WeightedGraph::from_edges(2, [(0, 2, 0.5)]).is_err());
    }

    #[test]
    fn components_and_induced_subgraph() {
        let g = WeightedGraph::from_edges(5, [(0, 1, 1.0), (3, 4, 0.5)]).unwrap();
        assert_eq!(g.connected_components(), vec![vec![0, 1], vec![2], vec![3, 4]]);
        let sub = g.induced_subgraph(&[4, 3, 0]);
        assert_eq!(sub.edges(), &[Edge { i: 0, j: 1, w: 0.5 }]);
    }
}
