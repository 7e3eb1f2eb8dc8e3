use std::fmt::Write as _;

use super::admm::AdmmIteration;
use super::DenoiseParams;
use crate::bipartite::{Bipartition, Class};
use crate::config;

/// Per-partite-solve diagnostics.
#[derive(Debug, Clone)]
pub struct PassReport {
    pub outer: usize,
    pub class: Class,
    pub nodes: usize,
    pub edges: usize,
    pub unsupported: Vec<usize>,
    pub log: Vec<AdmmIteration>,
    pub converged: bool,
    pub cg_shortfalls: usize,
    pub seconds: f64,
    /// Spatial window the pass ran in, if the cloud was windowed.
    pub window: Option<usize>,
}

impl PassReport {
    pub(crate) fn new(class: Class, nodes: usize, unsupported: Vec<usize>) -> Self {
        Self {
            outer: 0,
            class,
            nodes,
            edges: 0,
            unsupported,
            log: Vec::new(),
            converged: true,
            cg_shortfalls: 0,
            seconds: 0.0,
            window: None,
        }
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.log.last().map(|it| it.primal_residual)
    }

    pub fn first_residual(&self) -> Option<f64> {
        self.log.first().map(|it| it.primal_residual)
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.log.last().map(|it| it.objective)
    }

    pub fn final_gtv(&self) -> Option<f64> {
        self.log.last().map(|it| it.gtv)
    }
}

/// Everything recorded during one `denoise` call.
#[derive(Debug, Clone)]
pub struct DiagnosticsReport {
    pub points: usize,
    pub params: DenoiseParams,
    pub red_nodes: usize,
    pub blue_nodes: usize,
    pub passes: Vec<PassReport>,
    /// Relative position change `|p_next - p| / |p|` per outer pass.
    pub outer_changes: Vec<f64>,
    /// Sum of the final partite objectives per outer pass.
    pub outer_objectives: Vec<f64>,
    pub windows: usize,
    pub converged: bool,
    pub total_seconds: f64,
}

impl DiagnosticsReport {
    pub(crate) fn new(points: usize, params: &DenoiseParams) -> Self {
        Self {
            points,
            params: params.clone(),
            red_nodes: 0,
            blue_nodes: 0,
            passes: Vec::new(),
            outer_changes: Vec::new(),
            outer_objectives: Vec::new(),
            windows: 0,
            converged: false,
            total_seconds: 0.0,
        }
    }

    pub(crate) fn set_bipartition(&mut self, bp: &Bipartition) {
        self.red_nodes = bp.nodes_of(Class::Red).len();
        self.blue_nodes = bp.nodes_of(Class::Blue).len();
    }

    /// Distinct nodes left at their positions for lack of a support pair
    /// in at least one pass.
    pub fn unsupported_nodes(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.passes.iter().flat_map(|p| p.unsupported.iter().copied()).collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    /// Whether every ADMM solve that ran reached `admm_tol`.
    pub fn all_admm_converged(&self) -> bool {
        self.passes.iter().all(|p| p.converged)
    }

    /// `key: value` header followed by one CSV block per partite pass with
    /// columns `pass,iteration,primal_residual,dual_residual,objective,gtv,seconds`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "points: {}", self.points);
        for line in config::params_to_lines(&self.params) {
            let (k, v) = line.split_once(" = ").expect("config lines are key = value");
            let _ = writeln!(out, "{k}: {v}");
        }
        let _ = writeln!(out, "red_nodes: {}", self.red_nodes);
        let _ = writeln!(out, "blue_nodes: {}", self.blue_nodes);
        let _ = writeln!(out, "windows: {}", self.windows);
        let _ = writeln!(out, "outer_passes: {}", self.outer_changes.len());
        let _ = writeln!(out, "converged: {}", self.converged);
        let _ = writeln!(out, "unsupported_nodes: {}", self.unsupported_nodes().len());
        let _ = writeln!(out, "total_seconds: {:.6}", self.total_seconds);
        for (i, (c, o)) in self.outer_changes.iter().zip(&self.outer_objectives).enumerate() {
            let _ = writeln!(out, "outer_{}: relative_change={c:e} objective={o:e}", i + 1);
        }
        for (idx, pass) in self.passes.iter().enumerate() {
            let n = idx + 1;
            let _ = writeln!(out);
            let _ = writeln!(out, "pass: {n}");
            let _ = writeln!(out, "outer: {}", pass.outer);
            let _ = writeln!(out, "class: {}", pass.class);
            if let Some(w) = pass.window {
                let _ = writeln!(out, "window: {w}");
            }
            let _ = writeln!(out, "nodes: {}", pass.nodes);
            let _ = writeln!(out, "edges: {}", pass.edges);
            let _ = writeln!(out, "unsupported: {}", pass.unsupported.len());
            let _ = writeln!(out, "admm_iterations: {}", pass.log.len());
            let _ = writeln!(out, "admm_converged: {}", pass.converged);
            let _ = writeln!(out, "cg_shortfalls: {}", pass.cg_shortfalls);
            if let Some(r) = pass.final_residual() {
                let _ = writeln!(out, "final_primal_residual: {r:e}");
            }
            if let Some(g) = pass.final_gtv() {
                let _ = writeln!(out, "final_gtv: {g:e}");
            }
            let _ = writeln!(out, "seconds: {:.6}", pass.seconds);
            let _ = writeln!(out, "pass,iteration,primal_residual,dual_residual,objective,gtv,seconds");
            for it in &pass.log {
                let _ = writeln!(
                    out,
                    "{n},{},{:e},{:e},{:e},{:e},{:.6}",
                    it.iteration, it.primal_residual, it.dual_residual, it.objective, it.gtv, it.seconds
                );
            }
        }
        out
    }
}
