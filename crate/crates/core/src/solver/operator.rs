use nalgebra::{DMatrix, DVector, Matrix3};

use crate::cloud::Vec3;
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::normals::NormalLinearization;

/// Sparse block operator mapping stacked positions `p` (length `3|V|`) to
/// stacked normal differences `B p + v` (length `3|E|`). Block row `e` for
/// edge `(i, j)` holds `A_i` in block column `i` and `-A_j` in block
/// column `j`; the matching block of `v` is `b_i - b_j`.
#[derive(Debug, Clone)]
pub struct EdgeOperator {
    nodes: usize,
    edges: Vec<(usize, usize)>,
    weights: Vec<f64>,
    a: Vec<Matrix3<f64>>,
    v: DVector<f64>,
}

pub fn assemble_edge_operator(
    graph: &WeightedGraph,
    lins: &[Option<NormalLinearization>],
) -> Result<EdgeOperator> {
    let n = graph.node_count();
    if lins.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: lins.len(),
        });
    }
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for (node, lin) in lins.iter().enumerate() {
        let lin = lin.as_ref().ok_or(Error::MissingNode {
            what: "normal linearization",
            node,
        })?;
        a.push(lin.a);
        b.push(lin.b);
    }
    let edges: Vec<(usize, usize)> = graph.edges().iter().map(|e| (e.i, e.j)).collect();
    let weights = graph.edges().iter().map(|e| e.w).collect();
    let mut v = DVector::zeros(3 * edges.len());
    for (row, &(i, j)) in edges.iter().enumerate() {
        v.fixed_rows_mut::<3>(3 * row).copy_from(&(b[i] - b[j]));
    }
    Ok(EdgeOperator {
        nodes: n,
        edges,
        weights,
        a,
        v,
    })
}

impl EdgeOperator {
    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn v(&self) -> &DVector<f64> {
        &self.v
    }

    pub fn block(&self, node: usize) -> &Matrix3<f64> {
        &self.a[node]
    }

    /// `B p`.
    pub fn apply(&self, p: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(3 * self.edges.len());
        for (row, &(i, j)) in self.edges.iter().enumerate() {
            let pi: Vec3 = p.fixed_rows::<3>(3 * i).into();
            let pj: Vec3 = p.fixed_rows::<3>(3 * j).into();
            out.fixed_rows_mut::<3>(3 * row)
                .copy_from(&(self.a[i] * pi - self.a[j] * pj));
        }
        out
    }

    /// `B p + v`.
    pub fn apply_affine(&self, p: &DVector<f64>) -> DVector<f64> {
        self.apply(p) + &self.v
    }

    /// `B' y`.
    pub fn apply_transpose(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(3 * self.nodes);
        for (row, &(i, j)) in self.edges.iter().enumerate() {
            let ye: Vec3 = y.fixed_rows::<3>(3 * row).into();
            let ti = self.a[i].transpose() * ye;
            let tj = self.a[j].transpose() * ye;
            let mut bi = out.fixed_rows_mut::<3>(3 * i);
            bi += ti;
            let mut bj = out.fixed_rows_mut::<3>(3 * j);
            bj -= tj;
        }
        out
    }

    /// `(2I + rho B'B) p`, the p-update system matrix applied to `p`.
    pub fn system_apply(&self, p: &DVector<f64>, rho: f64) -> DVector<f64> {
        let btb = self.apply_transpose(&self.apply(p));
        p * 2.0 + btb * rho
    }

    /// Inverses of the 3x3 diagonal blocks of `2I + rho B'B`, one per node.
    pub fn system_block_inverses(&self, rho: f64) -> Vec<Matrix3<f64>> {
        let mut blocks = vec![Matrix3::identity() * 2.0; self.nodes];
        for &(i, j) in &self.edges {
            blocks[i] += self.a[i].transpose() * self.a[i] * rho;
            blocks[j] += self.a[j].transpose() * self.a[j] * rho;
        }
        blocks
            .into_iter()
            .map(|b| match b.cholesky() {
                Some(ch) if ch.l().iter().all(|x| x.is_finite()) => ch.inverse(),
                _ => Matrix3::from_diagonal(&b.diagonal().map(|d| 1.0 / d.max(2.0))),
            })
            .collect()
    }

    /// Applies the block-Jacobi preconditioner built from `inverses`.
    pub fn apply_block_diagonal(inverses: &[Matrix3<f64>], r: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(r.len());
        for (i, inv) in inverses.iter().enumerate() {
            let ri: Vec3 = r.fixed_rows::<3>(3 * i).into();
            out.fixed_rows_mut::<3>(3 * i).copy_from(&(inv * ri));
        }
        out
    }

    /// Weighted edge sum `sum_e w_e |(B p + v)_e|_1`.
    pub fn weighted_l1(&self, bp_v: &DVector<f64>) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(row, w)| w * bp_v.fixed_rows::<3>(3 * row).abs().sum())
            .sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(3 * self.edges.len(), 3 * self.nodes);
        for (row, &(i, j)) in self.edges.iter().enumerate() {
            m.fixed_view_mut::<3, 3>(3 * row, 3 * i).copy_from(&self.a[i]);
            let mut blk = m.fixed_view_mut::<3, 3>(3 * row, 3 * j);
            blk -= self.a[j];
        }
        m
    }
}

pub fn stack(points: &[Vec3]) -> DVector<f64> {
    DVector::from_iterator(points.len() * 3, points.iter().flat_map(|p| [p.x, p.y, p.z]))
}

pub fn unstack(p: &DVector<f64>) -> Vec<Vec3> {
    (0..p.len() / 3)
        .map(|i| p.fixed_rows::<3>(3 * i).into())
        .collect()
}
