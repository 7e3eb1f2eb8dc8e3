//! The denoising pipeline: k-NN graph, bipartite approximation, then
//! alternating red/blue ADMM solves with normals re-linearized at the
//! current positions of the opposite class before every solve.

mod admm;
mod cg;
mod diagnostics;
mod operator;
mod windows;

use std::time::Instant;

use log::{debug, info, warn};
use rayon::prelude::*;

pub use admm::{
    admm_denoise_partite, admm_with_operator, m_update, p_update, soft_threshold, u_update, AdmmIteration,
    AdmmOutcome, ProxOutcome,
};
pub use cg::{conjugate_gradient, preconditioned_conjugate_gradient, CgOutcome};
pub use diagnostics::{DiagnosticsReport, PassReport};
pub use operator::{assemble_edge_operator, stack, unstack, EdgeOperator};

use crate::bipartite::{approximate_bipartite_traced, BipartiteOptions, Bipartition, Class, KldWindow};
use crate::cloud::{PointCloud, Vec3};
use crate::error::{Error, Result};
use crate::graph::{build_knn_graph, knn_graph_from_points, WeightedGraph};
use crate::normals::{
    find_support_pair, linearize, orient_normals, raw_normal, NormalLinearization, OppositeIndex, RawNormal,
    SupportPair,
};

/// Solver parameters. Defaults: `k = 8`, `sigma_p = 1.5`, `rho = 5`,
/// `t = 0.1`, `gamma = 0.05`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseParams {
    pub gamma: f64,
    pub rho: f64,
    pub t: f64,
    pub sigma_p: f64,
    pub k: usize,
    pub delta: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub prox_tol: f64,
    pub prox_max_iter: usize,
    /// Bound on the relative primal ADMM residual.
    pub admm_tol: f64,
    /// Bound on the relative dual ADMM residual, `rho |B'(m - m_prev)| /
    /// max(rho |B'u|, 1)`. Infinite by default, leaving the primal residual
    /// as the only stopping test.
    pub admm_dual_tol: f64,
    pub admm_max_iter: usize,
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    /// Start node of the bipartite BFS.
    pub start_node: usize,
    /// Hop radius of the divergence window; `None` uses every assigned node.
    pub kld_hops: Option<usize>,
    /// Recompute the bipartition before every outer pass instead of once.
    pub recompute_bipartition: bool,
    /// Clouds larger than this are split into overlapping spatial windows.
    pub window_budget: usize,
}

impl Default for DenoiseParams {
    fn default() -> Self {
        Self {
            gamma: 0.05,
            rho: 5.0,
            t: 0.1,
            sigma_p: crate::graph::DEFAULT_SIGMA_P,
            k: crate::graph::DEFAULT_K,
            delta: crate::bipartite::DEFAULT_DELTA,
            cg_tol: 1e-6,
            cg_max_iter: 200,
            prox_tol: 1e-6,
            prox_max_iter: 100,
            admm_tol: 1e-5,
            admm_dual_tol: f64::INFINITY,
            admm_max_iter: 100,
            outer_tol: 1e-4,
            outer_max_iter: 10,
            start_node: 0,
            kld_hops: Some(crate::bipartite::DEFAULT_KLD_HOPS),
            recompute_bipartition: false,
            window_budget: 20_000,
        }
    }
}

impl DenoiseParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho", self.rho),
            ("t", self.t),
            ("sigma_p", self.sigma_p),
            ("delta", self.delta),
            ("cg_tol", self.cg_tol),
            ("prox_tol", self.prox_tol),
            ("admm_tol", self.admm_tol),
            ("outer_tol", self.outer_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.admm_dual_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "admm_dual_tol must be > 0, got {}",
                self.admm_dual_tol
            )));
        }
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        if self.window_budget < 4 {
            return Err(Error::InvalidParameter("window_budget must be >= 4".into()));
        }
        if self.t * self.rho >= 2.0 {
            warn!(
                "t * rho = {} >= 2: the proximal-gradient m-update may not converge",
                self.t * self.rho
            );
        } else if self.t > 1.0 / self.rho {
            warn!("t = {} exceeds 1/rho = {}", self.t, 1.0 / self.rho);
        }
        Ok(())
    }

    pub fn bipartite_options(&self) -> BipartiteOptions {
        BipartiteOptions {
            delta: self.delta,
            start_node: self.start_node,
            window: self.kld_hops.map_or(KldWindow::Full, KldWindow::Hops),
        }
    }
}

/// Normals of one class at the current positions.
#[derive(Debug, Clone)]
pub struct PartiteNormals {
    /// Nodes of the class with a valid support pair, ascending.
    pub nodes: Vec<usize>,
    pub pairs: Vec<SupportPair>,
    pub raw: Vec<RawNormal>,
    pub alphas: Vec<f64>,
    /// Nodes of the class for which no support pair exists.
    pub unsupported: Vec<usize>,
}

impl PartiteNormals {
    pub fn oriented(&self) -> Vec<Vec3> {
        self.raw
            .iter()
            .zip(&self.alphas)
            .map(|(r, a)| r.normal * *a)
            .collect()
    }
}

/// Support pairs, raw normals and orientation for every node of `class`,
/// with normals defined by the opposite class at `positions`.
pub fn partite_normals(
    graph: &WeightedGraph,
    bp: &Bipartition,
    positions: &[Vec3],
    class: Class,
    k: usize,
) -> Result<PartiteNormals> {
    let members = bp.nodes_of(class);
    let opposite_nodes = bp.nodes_of(class.opposite());
    let is_opposite: Vec<bool> = bp.classes().iter().map(|&c| c != class).collect();
    if opposite_nodes.len() < 2 {
        return Ok(PartiteNormals {
            nodes: Vec::new(),
            pairs: Vec::new(),
            raw: Vec::new(),
            alphas: Vec::new(),
            unsupported: members,
        });
    }
    let index = OppositeIndex::new(positions, opposite_nodes);
    let results: Vec<Result<(SupportPair, RawNormal)>> = members
        .par_iter()
        .map(|&i| {
            let pair = find_support_pair(graph, positions, i, &is_opposite, &index, k)?;
            let raw = raw_normal(&positions[i], &positions[pair.k], &positions[pair.l])
                .map_err(|_| Error::NoSupportPair { node: i })?;
            Ok((pair, raw))
        })
        .collect();

    let mut nodes = Vec::new();
    let mut pairs = Vec::new();
    let mut raw = Vec::new();
    let mut unsupported = Vec::new();
    for (&i, r) in members.iter().zip(results) {
        match r {
            Ok((p, n)) => {
                nodes.push(i);
                pairs.push(p);
                raw.push(n);
            }
            Err(Error::NoSupportPair { .. }) => unsupported.push(i),
            Err(e) => return Err(e),
        }
    }
    let alphas = if nodes.is_empty() {
        Vec::new()
    } else {
        let pos: Vec<Vec3> = nodes.iter().map(|&i| positions[i]).collect();
        let nrm: Vec<Vec3> = raw.iter().map(|r| r.normal).collect();
        orient_normals(&pos, &nrm, k)?.alphas
    };
    Ok(PartiteNormals {
        nodes,
        pairs,
        raw,
        alphas,
        unsupported,
    })
}

/// Denoises `cloud`, returning the new cloud and a diagnostics report.
pub fn denoise(cloud: &PointCloud, params: &DenoiseParams) -> Result<(PointCloud, DiagnosticsReport)> {
    params.validate()?;
    if cloud.len() < 4 {
        return Err(Error::TooFewPoints {
            required: 4,
            actual: cloud.len(),
        });
    }
    if cloud.len() > params.window_budget {
        return windows::denoise_windowed(cloud, params);
    }
    denoise_single(cloud, params)
}

pub(crate) fn denoise_single(cloud: &PointCloud, params: &DenoiseParams) -> Result<(PointCloud, DiagnosticsReport)> {
    let started = Instant::now();
    let mut report = DiagnosticsReport::new(cloud.len(), params);
    if params.gamma == 0.0 {
        report.converged = true;
        report.total_seconds = started.elapsed().as_secs_f64();
        return Ok((cloud.clone(), report));
    }

    let q = cloud.positions();
    let k = params.k.min(cloud.len() - 1);
    if k < params.k {
        warn!("k = {} reduced to {k} for a cloud of {} points", params.k, cloud.len());
    }
    let graph = build_knn_graph(cloud, k, params.sigma_p)?;
    let bip_opts = params.bipartite_options();
    let (mut bp, _) = approximate_bipartite_traced(&graph, &bip_opts)?;
    report.set_bipartition(&bp);

    let mut current = q.to_vec();
    for outer in 1..=params.outer_max_iter {
        if outer > 1 && params.recompute_bipartition {
            let g = knn_graph_from_points(&current, k, params.sigma_p)?;
            bp = approximate_bipartite_traced(&g, &bip_opts)?.0;
        }
        let before = current.clone();
        let mut outer_objective = 0.0;
        for class in [Class::Red, Class::Blue] {
            let pass = partite_pass(&graph, &bp, q, &mut current, class, k, params)?;
            outer_objective += pass.final_objective().unwrap_or(0.0);
            let mut pass = pass;
            pass.outer = outer;
            report.passes.push(pass);
        }
        let diff: f64 = current
            .iter()
            .zip(&before)
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>()
            .sqrt();
        let base: f64 = before.iter().map(|p| p.norm_squared()).sum::<f64>().sqrt();
        let change = if base > 0.0 { diff / base } else { diff };
        report.outer_changes.push(change);
        report.outer_objectives.push(outer_objective);
        info!("outer pass {outer}: relative change {change:.3e}");
        if change <= params.outer_tol {
            report.converged = true;
            break;
        }
    }
    report.total_seconds = started.elapsed().as_secs_f64();
    Ok((PointCloud::new(current)?, report))
}

fn partite_pass(
    graph: &WeightedGraph,
    bp: &Bipartition,
    observed: &[Vec3],
    current: &mut [Vec3],
    class: Class,
    k: usize,
    params: &DenoiseParams,
) -> Result<PassReport> {
    let started = Instant::now();
    let normals = partite_normals(graph, bp, current, class, k)?;
    let mut pass = PassReport::new(class, normals.nodes.len(), normals.unsupported.clone());
    if !normals.unsupported.is_empty() {
        warn!(
            "{} {class} nodes have no support pair and keep their positions",
            normals.unsupported.len()
        );
    }
    if normals.nodes.len() < 2 {
        pass.seconds = started.elapsed().as_secs_f64();
        return Ok(pass);
    }

    let lins: Vec<Option<NormalLinearization>> = normals
        .nodes
        .iter()
        .zip(normals.raw.iter().zip(&normals.alphas))
        .map(|(&i, (raw, &alpha))| linearize(&current[i], raw, alpha).ok())
        .collect();
    let red_pos: Vec<Vec3> = normals.nodes.iter().map(|&i| current[i]).collect();
    let kk = k.min(red_pos.len() - 1);
    let red_graph = match knn_graph_from_points(&red_pos, kk, params.sigma_p) {
        Ok(g) => g,
        Err(Error::Degenerate(msg)) => {
            warn!("skipping {class} pass: {msg}");
            pass.seconds = started.elapsed().as_secs_f64();
            return Ok(pass);
        }
        Err(e) => return Err(e),
    };
    pass.edges = red_graph.edge_count();
    let q_red: Vec<Vec3> = normals.nodes.iter().map(|&i| observed[i]).collect();
    let out = admm_denoise_partite(&q_red, &red_graph, &lins, params)?;
    debug!(
        "{class} pass: {} nodes, {} edges, {} ADMM iterations",
        normals.nodes.len(),
        red_graph.edge_count(),
        out.log.len()
    );
    for (&i, p) in normals.nodes.iter().zip(&out.p) {
        current[i] = *p;
    }
    pass.converged = out.converged;
    pass.cg_shortfalls = out.cg_shortfalls;
    pass.log = out.log;
    pass.seconds = started.elapsed().as_secs_f64();
    Ok(pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        DenoiseParams::default().validate().unwrap();
    }

    #[test]
    fn invalid_params_rejected() {
        for p in [
            DenoiseParams { rho: 0.0, ..Default::default() },
            DenoiseParams { t: -1.0, ..Default::default() },
            DenoiseParams { gamma: -0.1, ..Default::default() },
            DenoiseParams { k: 0, ..Default::default() },
        ] {
            assert!(p.validate().is_err());
        }
    }

    #[test]
    fn too_few_points() {
        let c = PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        assert!(matches!(
            denoise(&c, &DenoiseParams::default()),
            Err(Error::TooFewPoints { required: 4, .. })
        ));
    }

    #[test]
    fn gamma_zero_identity() {
        let c = PointCloud::from_xyz(&[
            [0.0, 0.0, 0.1],
            [1.0, 0.0, -0.2],
            [0.0, 1.0, 0.05],
            [1.0, 1.0, 0.0],
            [0.5, 0.5, 0.3],
        ])
        .unwrap();
        let params = DenoiseParams { gamma: 0.0, ..Default::default() };
        let (out, _) = denoise(&c, &params).unwrap();
        assert_eq!(out, c);
    }
}
