//! Cloud-to-cloud (C2C) and cloud-to-plane (C2P) errors, and graph total
//! variation of a normal field.

use std::fmt::Write as _;

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;

use crate::cloud::{PointCloud, Vec3};
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::kdtree::KdTree;

/// Default neighbor count for tangent-plane fits.
pub const DEFAULT_PLANE_K: usize = 8;

/// One-sided values and their arithmetic mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Directional {
    pub ground_to_test: f64,
    pub test_to_ground: f64,
    pub symmetric: f64,
}

impl Directional {
    fn new(ground_to_test: f64, test_to_ground: f64) -> Self {
        Self {
            ground_to_test,
            test_to_ground,
            symmetric: 0.5 * (ground_to_test + test_to_ground),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct C2c {
    /// Mean nearest-neighbor distance.
    pub unsquared: Directional,
    /// Mean squared nearest-neighbor distance.
    pub squared: Directional,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct C2p {
    /// Mean squared point-to-tangent-plane distance.
    pub squared: Directional,
    /// Points whose plane neighborhood was degenerate and fell back to the
    /// squared point distance.
    pub degenerate: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub c2c: C2c,
    pub c2p: C2p,
}

impl MetricReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<12} {:>14} {:>14} {:>14}", "metric", "ground->test", "test->ground", "symmetric");
        let rows = [
            ("c2c_unsq", self.c2c.unsquared),
            ("c2c_sq", self.c2c.squared),
            ("c2p", self.c2p.squared),
        ];
        for (name, d) in rows {
            let _ = writeln!(
                out,
                "{:<12} {:>14.6e} {:>14.6e} {:>14.6e}",
                name, d.ground_to_test, d.test_to_ground, d.symmetric
            );
        }
        if self.c2p.degenerate > 0 {
            let _ = writeln!(out, "degenerate plane fits: {}", self.c2p.degenerate);
        }
        out
    }

    /// `model,sigma,c2c_unsq,c2c_sq,c2p,runtime_s` row; an unknown sigma is
    /// left empty.
    pub fn csv_row(&self, model: &str, sigma: Option<f64>, runtime_s: f64) -> String {
        let sigma = sigma.map(|s| s.to_string()).unwrap_or_default();
        format!(
            "{model},{sigma},{:e},{:e},{:e},{runtime_s:.3}",
            self.c2c.unsquared.symmetric, self.c2c.squared.symmetric, self.c2p.squared.symmetric
        )
    }
}

pub const CSV_HEADER: &str = "model,sigma,c2c_unsq,c2c_sq,c2p,runtime_s";

fn one_sided_c2c(from: &[Vec3], to: &KdTree) -> (f64, f64) {
    let d2: Vec<f64> = from
        .par_iter()
        .map(|a| to.nearest(a).expect("target is non-empty").dist2)
        .collect();
    let n = d2.len() as f64;
    let unsq = d2.iter().map(|d| d.sqrt()).sum::<f64>() / n;
    let sq = d2.iter().sum::<f64>() / n;
    (unsq, sq)
}

pub fn c2c(ground: &PointCloud, test: &PointCloud) -> C2c {
    let gt = KdTree::new(ground.positions());
    let tt = KdTree::new(test.positions());
    let (gu, gs) = one_sided_c2c(ground.positions(), &tt);
    let (tu, ts) = one_sided_c2c(test.positions(), &gt);
    C2c {
        unsquared: Directional::new(gu, tu),
        squared: Directional::new(gs, ts),
    }
}

/// Unit normal of the least-squares plane through `points`, or `None` when
/// all points coincide.
pub fn fit_plane_normal(points: &[Vec3]) -> Option<Vec3> {
    let first = points.first()?;
    if points.iter().all(|p| p == first) {
        return None;
    }
    let centroid = points.iter().sum::<Vec3>() / points.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let idx = eig.eigenvalues.imin();
    Some(eig.eigenvectors.column(idx).normalize())
}

/// Squared distances from each of `from` to the tangent plane at its nearest
/// point `b` of `to`. The plane passes through `b`, with normal fitted to `b`
/// and its `k` nearest neighbors within `to`.
fn one_sided_c2p(from: &[Vec3], to: &KdTree, k: usize) -> (f64, usize) {
    let vals: Vec<(f64, bool)> = from
        .par_iter()
        .map(|a| {
            let nb = to.nearest(a).expect("target is non-empty");
            let b = to.points()[nb.index];
            let mut hood: Vec<Vec3> = to
                .knn(&b, k, Some(nb.index))
                .iter()
                .map(|n| to.points()[n.index])
                .collect();
            hood.push(b);
            match fit_plane_normal(&hood) {
                Some(n) => (n.dot(&(a - b)).powi(2), false),
                None => (nb.dist2, true),
            }
        })
        .collect();
    let sum: f64 = vals.iter().map(|v| v.0).sum();
    let degenerate = vals.iter().filter(|v| v.1).count();
    (sum / vals.len() as f64, degenerate)
}

pub fn c2p(ground: &PointCloud, test: &PointCloud, k: usize) -> Result<C2p> {
    for c in [ground, test] {
        if c.len() < k + 1 {
            return Err(Error::TooFewPoints {
                required: k + 1,
                actual: c.len(),
            });
        }
    }
    let gt = KdTree::new(ground.positions());
    let tt = KdTree::new(test.positions());
    let (g, gd) = one_sided_c2p(ground.positions(), &tt, k);
    let (t, td) = one_sided_c2p(test.positions(), &gt, k);
    Ok(C2p {
        squared: Directional::new(g, t),
        degenerate: gd + td,
    })
}

pub fn evaluate(ground: &PointCloud, test: &PointCloud, k: usize) -> Result<MetricReport> {
    Ok(MetricReport {
        c2c: c2c(ground, test),
        c2p: c2p(ground, test, k)?,
    })
}

/// `sum over edges of w_ij |n_i - n_j|_1`, each undirected edge once.
pub fn gtv_value(normals: &[Vec3], graph: &WeightedGraph) -> Result<f64> {
    if normals.len() < graph.node_count() {
        return Err(Error::MissingNode {
            what: "normal",
            node: normals.len(),
        });
    }
    Ok(graph
        .edges()
        .iter()
        .map(|e| e.w * (normals[e.i] - normals[e.j]).abs().sum())
        .sum())
}
