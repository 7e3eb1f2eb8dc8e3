//! ADMM for `min |q - p|^2 + gamma * sum_e w_e |m_e|_1` subject to
//! `m = B p + v`, in scaled form with dual `u`.

use std::time::Instant;

use log::warn;
use nalgebra::DVector;

use nalgebra::Matrix3;

use super::cg::{preconditioned_conjugate_gradient, CgOutcome};
use super::operator::{assemble_edge_operator, stack, unstack, EdgeOperator};
use super::DenoiseParams;
use crate::cloud::Vec3;
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::normals::NormalLinearization;

/// Residual growth factor and streak length treated as divergence.
const DIVERGENCE_FACTOR: f64 = 10.0;
const DIVERGENCE_STREAK: usize = 5;

/// Solves `(2I + rho B'B) p = 2q + rho B'(m - u - v)` by block-Jacobi
/// preconditioned conjugate gradient, starting from `warm`. `precond` holds
/// the inverted diagonal blocks from [`EdgeOperator::system_block_inverses`];
/// pass `None` to compute them here.
///
/// CG runs on the correction `p - q`, whose right-hand side
/// `rho B'(m - u - v - B q)` does not grow with the cloud's coordinates, so
/// `cg_tol` bounds the error relative to the correction rather than to `q`.
/// The reported residual is the one of the correction system.
#[allow(clippy::too_many_arguments)]
pub fn p_update(
    q: &DVector<f64>,
    op: &EdgeOperator,
    m: &DVector<f64>,
    u: &DVector<f64>,
    rho: f64,
    cg_tol: f64,
    cg_max_iter: usize,
    warm: DVector<f64>,
    precond: Option<&[Matrix3<f64>]>,
) -> CgOutcome {
    let owned;
    let inverses = match precond {
        Some(p) => p,
        None => {
            owned = op.system_block_inverses(rho);
            &owned
        }
    };
    let rhs = op.apply_transpose(&(m - u - op.apply_affine(q))) * rho;
    let mut out = preconditioned_conjugate_gradient(
        |x| op.system_apply(x, rho),
        |r| EdgeOperator::apply_block_diagonal(inverses, r),
        &rhs,
        warm - q,
        cg_tol,
        cg_max_iter,
    );
    out.x += q;
    if !out.converged {
        warn!(
            "CG stopped at relative residual {:.3e} after {} iterations (tol {:.1e})",
            out.relative_residual, out.iterations, cg_tol
        );
    }
    out
}

/// Shrinks `m` toward zero by `tau`.
pub fn soft_threshold(m: f64, tau: f64) -> f64 {
    if m > tau {
        m - tau
    } else if m < -tau {
        m + tau
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct ProxOutcome {
    pub m: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Proximal-gradient solve of
/// `min_m rho/2 |B p + v - m + u|^2 + gamma * sum_e w_e |m_e|_1`,
/// iterating `m <- prox(m - t * grad)` with gradient `-rho (B p + v - m + u)`
/// and per-edge soft threshold `t * gamma * w_e`.
#[allow(clippy::too_many_arguments)]
pub fn m_update(
    op: &EdgeOperator,
    p: &DVector<f64>,
    u: &DVector<f64>,
    m_init: DVector<f64>,
    rho: f64,
    gamma: f64,
    t: f64,
    prox_tol: f64,
    prox_max_iter: usize,
) -> Result<ProxOutcome> {
    let target = op.apply_affine(p) + u;
    let mut m = m_init;
    let mut next = DVector::zeros(m.len());
    for iter in 1..=prox_max_iter {
        let mut step = 0.0f64;
        for (row, &w) in op.weights().iter().enumerate() {
            let tau = t * gamma * w;
            for r in 0..3 {
                let idx = 3 * row + r;
                let grad = -rho * (target[idx] - m[idx]);
                let val = soft_threshold(m[idx] - t * grad, tau);
                if !val.is_finite() {
                    let (i, j) = op.edges()[row];
                    return Err(Error::NonFiniteIterate { edge: row, i, j });
                }
                step = step.max((val - m[idx]).abs());
                next[idx] = val;
            }
        }
        std::mem::swap(&mut m, &mut next);
        if step <= prox_tol {
            return Ok(ProxOutcome {
                m,
                iterations: iter,
                converged: true,
            });
        }
    }
    Ok(ProxOutcome {
        m,
        iterations: prox_max_iter,
        converged: prox_max_iter == 0,
    })
}

/// `u + (B p + v - m)`.
pub fn u_update(u: &DVector<f64>, op: &EdgeOperator, p: &DVector<f64>, m: &DVector<f64>) -> DVector<f64> {
    u + op.apply_affine(p) - m
}

/// One logged ADMM iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmIteration {
    pub iteration: usize,
    /// `|B p + v - m| / max(|m|, 1)`.
    pub primal_residual: f64,
    /// `rho |B'(m - m_prev)| / max(rho |B'u|, 1)`.
    pub dual_residual: f64,
    /// `|q - p|^2 + gamma * gtv` at the current `p`.
    pub objective: f64,
    /// `sum_e w_e |(B p + v)_e|_1`.
    pub gtv: f64,
    pub seconds: f64,
    pub cg_iterations: usize,
    pub prox_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct AdmmOutcome {
    pub p: Vec<Vec3>,
    pub log: Vec<AdmmIteration>,
    pub converged: bool,
    /// Iterations where CG stopped short of its tolerance.
    pub cg_shortfalls: usize,
}

impl AdmmOutcome {
    pub fn final_residual(&self) -> Option<f64> {
        self.log.last().map(|it| it.primal_residual)
    }
}

/// ADMM over one partite: positions `q_red` observed, normals linearized by
/// `lins`, GTV taken over `red_graph`. Starts at `p = q`, `m = B q + v`,
/// `u = 0`.
pub fn admm_denoise_partite(
    q_red: &[Vec3],
    red_graph: &WeightedGraph,
    lins: &[Option<NormalLinearization>],
    params: &DenoiseParams,
) -> Result<AdmmOutcome> {
    let op = assemble_edge_operator(red_graph, lins)?;
    if op.node_count() != q_red.len() {
        return Err(Error::DimensionMismatch {
            expected: op.node_count(),
            actual: q_red.len(),
        });
    }
    admm_with_operator(q_red, &op, params)
}

pub fn admm_with_operator(q_red: &[Vec3], op: &EdgeOperator, params: &DenoiseParams) -> Result<AdmmOutcome> {
    if params.gamma == 0.0 || op.edge_count() == 0 {
        return Ok(AdmmOutcome {
            p: q_red.to_vec(),
            log: Vec::new(),
            converged: true,
            cg_shortfalls: 0,
        });
    }
    let q = stack(q_red);
    let mut p = q.clone();
    let mut m = op.apply_affine(&q);
    let mut u = DVector::zeros(m.len());
    let mut log = Vec::new();
    let mut converged = false;
    let mut cg_shortfalls = 0;
    let mut first_residual = None;
    let mut growth_streak = 0;
    let started = Instant::now();
    let inverses = op.system_block_inverses(params.rho);

    for iteration in 1..=params.admm_max_iter {
        let cg = p_update(
            &q,
            op,
            &m,
            &u,
            params.rho,
            params.cg_tol,
            params.cg_max_iter,
            p,
            Some(&inverses),
        );
        if !cg.converged {
            cg_shortfalls += 1;
        }
        p = cg.x;
        let m_prev = m.clone();
        let prox = m_update(
            op,
            &p,
            &u,
            m,
            params.rho,
            params.gamma,
            params.t,
            params.prox_tol,
            params.prox_max_iter,
        )?;
        m = prox.m;
        let bp_v = op.apply_affine(&p);
        let r = &bp_v - &m;
        u += &r;
        let dual_residual = params.rho * op.apply_transpose(&(&m - &m_prev)).norm()
            / (params.rho * op.apply_transpose(&u).norm()).max(1.0);

        let primal_residual = r.norm() / m.norm().max(1.0);
        if !primal_residual.is_finite() || !p.iter().all(|x| x.is_finite()) {
            return Err(Error::Diverged {
                iteration,
                residual: primal_residual,
            });
        }
        let gtv = op.weighted_l1(&bp_v);
        let objective = (&q - &p).norm_squared() + params.gamma * gtv;
        log.push(AdmmIteration {
            iteration,
            primal_residual,
            dual_residual,
            objective,
            gtv,
            seconds: started.elapsed().as_secs_f64(),
            cg_iterations: cg.iterations,
            prox_iterations: prox.iterations,
        });

        let first = *first_residual.get_or_insert(primal_residual);
        if primal_residual > DIVERGENCE_FACTOR * first && first > 0.0 {
            growth_streak += 1;
            if growth_streak >= DIVERGENCE_STREAK {
                return Err(Error::Diverged {
                    iteration,
                    residual: primal_residual,
                });
            }
        } else {
            growth_streak = 0;
        }

        if primal_residual <= params.admm_tol && dual_residual <= params.admm_dual_tol {
            converged = true;
            break;
        }
    }

    Ok(AdmmOutcome {
        p: unstack(&p),
        log,
        converged,
        cg_shortfalls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normals::{linearize, raw_normal};
    use nalgebra::Matrix3;

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(0.15, 0.2), 0.0);
        assert!((soft_threshold(0.5, 0.2) - 0.3).abs() < 1e-15);
        assert!((soft_threshold(-0.5, 0.2) + 0.3).abs() < 1e-15);
        assert_eq!(soft_threshold(0.2, 0.2), 0.0);
        assert_eq!(soft_threshold(-3.0, 0.0), -3.0);
    }

    #[test]
    fn soft_threshold_matches_grid_argmin() {
        // argmin_theta gamma w |theta| + rho/2 (theta - c)^2 = soft(c, gamma w / rho)
        let (gw, rho) = (0.35, 2.0);
        for &c in &[-1.3, -0.2, -0.1749, 0.0, 0.05, 0.3, 0.9] {
            let mut best = (f64::INFINITY, 0.0);
            for s in -30000..=30000 {
                let th = s as f64 * 1e-4;
                let f = gw * th.abs() + 0.5 * rho * (th - c) * (th - c);
                if f < best.0 {
                    best = (f, th);
                }
            }
            assert!((best.1 - soft_threshold(c, gw / rho)).abs() <= 1e-4);
        }
    }

    fn two_node_operator() -> (Vec<Vec3>, WeightedGraph, Vec<Option<NormalLinearization>>) {
        let q = vec![Vec3::new(0.1, 0.2, 0.3), Vec3::new(1.0, 0.1, 0.0)];
        let a = raw_normal(&q[0], &Vec3::new(1.0, 1.0, 0.0), &Vec3::new(0.0, 1.0, 0.2)).unwrap();
        let b = raw_normal(&q[1], &Vec3::new(2.0, 1.0, 0.5), &Vec3::new(1.0, 1.5, 0.0)).unwrap();
        let lins = vec![
            Some(linearize(&q[0], &a, 1.0).unwrap()),
            Some(linearize(&q[1], &b, 1.0).unwrap()),
        ];
        let g = WeightedGraph::from_edges(2, [(0, 1, 0.8)]).unwrap();
        (q, g, lins)
    }

    #[test]
    fn gamma_zero_returns_input() {
        let (q, g, lins) = two_node_operator();
        let params = DenoiseParams {
            gamma: 0.0,
            ..DenoiseParams::default()
        };
        let out = admm_denoise_partite(&q, &g, &lins, &params).unwrap();
        assert_eq!(out.p, q);
    }

    #[test]
    fn empty_operator_p_update_is_identity() {
        let lin = NormalLinearization {
            c: Matrix3::identity(),
            d: Vec3::zeros(),
            alpha: 1.0,
            a: Matrix3::identity(),
            b: Vec3::zeros(),
            norm_in: 1.0,
        };
        let op = assemble_edge_operator(&WeightedGraph::empty(2), &[Some(lin), Some(lin)]).unwrap();
        let q = DVector::from_vec(vec![1.0, -2.0, 3.0, 0.25, 0.5, 0.75]);
        let out = p_update(&q, &op, &DVector::zeros(0), &DVector::zeros(0), 5.0, 1e-12, 10, DVector::zeros(6), None);
        assert!((out.x - q).amax() <= 1e-15);
    }

    #[test]
    fn m_update_gamma_zero_is_target() {
        let (q, g, lins) = two_node_operator();
        let op = assemble_edge_operator(&g, &lins).unwrap();
        let p = stack(&q);
        let u = DVector::from_vec(vec![0.01, -0.02, 0.03]);
        let out = m_update(&op, &p, &u, DVector::zeros(3), 5.0, 0.0, 0.1, 1e-12, 500).unwrap();
        assert!((out.m - (op.apply_affine(&p) + u)).amax() <= 1e-10);
    }

    #[test]
    fn u_update_rules() {
        let (q, g, lins) = two_node_operator();
        let op = assemble_edge_operator(&g, &lins).unwrap();
        let p = stack(&q);
        let m = op.apply_affine(&p);
        let u = DVector::from_vec(vec![0.5, 0.25, -1.0]);
        assert_eq!(u_update(&u, &op, &p, &m), u);
        let m0 = DVector::zeros(3);
        let r = op.apply_affine(&p);
        assert_eq!(u_update(&DVector::zeros(3), &op, &p, &m0), r);
        let twice = u_update(&u_update(&u, &op, &p, &m0), &op, &p, &m0);
        assert!((twice - (&u + &r * 2.0)).amax() < 1e-15);
    }
}
