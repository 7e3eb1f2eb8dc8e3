//! Bipartite approximation of a weighted graph.
//!
//! Nodes are assigned one at a time, in breadth-first order, to one of two
//! classes. Each assignment picks the class whose induced bipartite graph
//! (intra-class edges removed) stays closest to the original graph, where
//! closeness is the Kullback-Leibler divergence between the zero-mean
//! Gaussian Markov random fields with precisions `L + delta I` and
//! `L_B + delta I`.

use std::collections::VecDeque;
use std::fmt::{self, Write as _};

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};
use crate::graph::{laplacian, WeightedGraph};

pub const DEFAULT_DELTA: f64 = 0.01;
pub const DEFAULT_KLD_HOPS: usize = 2;

/// Relative gap below which two candidate divergences count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Class {
    /// First class (`V1`), optimized first in every outer pass.
    Red,
    /// Second class (`V2`).
    Blue,
}

impl Class {
    pub fn opposite(self) -> Class {
        match self {
            Class::Red => Class::Blue,
            Class::Blue => Class::Red,
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Class::Red => "red",
            Class::Blue => "blue",
        })
    }
}

/// Assignment of every node to [`Class::Red`] or [`Class::Blue`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bipartition {
    classes: Vec<Class>,
}

impl Bipartition {
    pub fn new(classes: Vec<Class>) -> Self {
        Self { classes }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class(&self, node: usize) -> Class {
        self.classes[node]
    }

    pub fn classes(&self) -> &[Class] {
        &self.classes
    }

    pub fn nodes_of(&self, class: Class) -> Vec<usize> {
        (0..self.classes.len())
            .filter(|&i| self.classes[i] == class)
            .collect()
    }

    /// Text export: one `node_index class` line per node.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.classes.len() * 8);
        for (i, c) in self.classes.iter().enumerate() {
            let _ = writeln!(out, "{i} {c}");
        }
        out
    }
}

/// Which assigned nodes enter the divergence evaluated for a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KldWindow {
    /// Every already-assigned node of the candidate's component.
    Full,
    /// Already-assigned nodes within this many hops of the candidate.
    Hops(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BipartiteOptions {
    pub delta: f64,
    pub start_node: usize,
    pub window: KldWindow,
}

impl Default for BipartiteOptions {
    fn default() -> Self {
        Self {
            delta: DEFAULT_DELTA,
            start_node: 0,
            window: KldWindow::Hops(DEFAULT_KLD_HOPS),
        }
    }
}

/// One greedy decision. Component seeds carry no divergences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssignmentStep {
    pub node: usize,
    pub class: Class,
    pub kld_red: Option<f64>,
    pub kld_blue: Option<f64>,
    pub tie: bool,
}

fn precision_cholesky(l: &DMatrix<f64>, delta: f64) -> Result<Cholesky<f64, Dyn>> {
    let mut p = l.clone();
    for i in 0..p.nrows() {
        p[(i, i)] += delta;
    }
    Cholesky::new(p).ok_or(Error::NotPositiveDefinite)
}

fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// KL divergence `D(N(0, S) || N(0, S_B))` with `S^-1 = L_orig + delta I`
/// and `S_B^-1 = L_bip + delta I`.
pub fn kld(l_orig: &DMatrix<f64>, l_bip: &DMatrix<f64>, delta: f64) -> Result<f64> {
    let n = l_orig.nrows();
    for m in [l_orig, l_bip] {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: if m.nrows() != n { m.nrows() } else { m.ncols() },
            });
        }
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("delta must be > 0, got {delta}")));
    }
    let orig = precision_cholesky(l_orig, delta)?;
    let bip = precision_cholesky(l_bip, delta)?;
    let mut prec_b = l_bip.clone();
    for i in 0..n {
        prec_b[(i, i)] += delta;
    }
    // tr(S_B^-1 S) = tr((L_orig + delta I)^-1 (L_bip + delta I))
    let trace = orig.solve(&prec_b).trace();
    Ok(0.5 * (trace + log_det(&orig) - log_det(&bip) - n as f64))
}

/// Greedy bipartite approximation with default window and the given
/// `delta` and start node.
pub fn approximate_bipartite(graph: &WeightedGraph, delta: f64, start_node: usize) -> Result<Bipartition> {
    let opts = BipartiteOptions {
        delta,
        start_node,
        ..BipartiteOptions::default()
    };
    approximate_bipartite_traced(graph, &opts).map(|(bp, _)| bp)
}

/// Greedy bipartite approximation returning every assignment decision.
///
/// Components are processed in order of their smallest node, except that the
/// component holding `start_node` goes first and is seeded from it. The first
/// seed is red; later seeds join the currently smaller class (red on ties).
pub fn approximate_bipartite_traced(
    graph: &WeightedGraph,
    opts: &BipartiteOptions,
) -> Result<(Bipartition, Vec<AssignmentStep>)> {
    let n = graph.node_count();
    if n == 0 {
        return Err(Error::InvalidParameter("graph has no nodes".into()));
    }
    if opts.start_node >= n {
        return Err(Error::InvalidParameter(format!(
            "start node {} out of range for {n} nodes",
            opts.start_node
        )));
    }
    if !(opts.delta > 0.0) || !opts.delta.is_finite() {
        return Err(Error::InvalidParameter(format!("delta must be > 0, got {}", opts.delta)));
    }

    let mut assigned: Vec<Option<Class>> = vec![None; n];
    let mut steps = Vec::with_capacity(n);
    let mut next_tie = Class::Red;
    let mut counts = [0usize; 2];
    let mut scratch = WindowScratch::new(n);
    let mut queued = vec![false; n];

    let mut components = graph.connected_components();
    if let Some(pos) = components.iter().position(|c| c.contains(&opts.start_node)) {
        let first = components.remove(pos);
        components.insert(0, first);
    }

    for (ci, comp) in components.iter().enumerate() {
        let seed = if ci == 0 { opts.start_node } else { comp[0] };
        let seed_class = if counts[1] < counts[0] { Class::Blue } else { Class::Red };
        assigned[seed] = Some(seed_class);
        counts[seed_class as usize] += 1;
        steps.push(AssignmentStep {
            node: seed,
            class: seed_class,
            kld_red: None,
            kld_blue: None,
            tie: false,
        });

        queued[seed] = true;
        let mut queue: VecDeque<usize> = graph.neighbors(seed).iter().map(|&(v, _)| v).collect();
        for &v in &queue {
            queued[v] = true;
        }

        while let Some(c) = queue.pop_front() {
            let window = scratch.window(graph, &assigned, c, opts.window);
            let (d_red, d_blue) = candidate_divergences(graph, &assigned, c, &window, opts.delta)?;
            let tie = (d_blue - d_red).abs() <= TIE_TOLERANCE * d_red.abs().max(1.0);
            let class = if tie {
                let t = next_tie;
                next_tie = next_tie.opposite();
                t
            } else if d_blue > d_red {
                Class::Red
            } else {
                Class::Blue
            };
            assigned[c] = Some(class);
            counts[class as usize] += 1;
            steps.push(AssignmentStep {
                node: c,
                class,
                kld_red: Some(d_red),
                kld_blue: Some(d_blue),
                tie,
            });
            for &(v, _) in graph.neighbors(c) {
                if !queued[v] {
                    queued[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }

    let classes = assigned
        .into_iter()
        .map(|c| c.expect("every component is traversed"))
        .collect();
    Ok((Bipartition::new(classes), steps))
}

/// Divergences for placing `c` in red or blue, evaluated on the subgraph
/// induced by `window` (assigned nodes plus `c` as its last entry).
fn candidate_divergences(
    graph: &WeightedGraph,
    assigned: &[Option<Class>],
    c: usize,
    window: &[usize],
    delta: f64,
) -> Result<(f64, f64)> {
    let sub = graph.induced_subgraph(window);
    let l_orig = laplacian(&sub).to_dense();
    let local_c = window.len() - 1;
    debug_assert_eq!(window[local_c], c);
    let class_of = |li: usize, c_class: Class| {
        if li == local_c {
            c_class
        } else {
            assigned[window[li]].expect("window holds assigned nodes")
        }
    };
    let mut out = [0.0; 2];
    for (slot, cand) in [Class::Red, Class::Blue].into_iter().enumerate() {
        let bip = sub.filter_edges(|e| class_of(e.i, cand) != class_of(e.j, cand));
        out[slot] = kld(&l_orig, &laplacian(&bip).to_dense(), delta)?;
    }
    Ok((out[0], out[1]))
}

struct WindowScratch {
    stamp: Vec<u32>,
    epoch: u32,
}

impl WindowScratch {
    fn new(n: usize) -> Self {
        Self {
            stamp: vec![0; n],
            epoch: 0,
        }
    }

    /// Assigned nodes in the candidate's window, sorted, followed by `c`.
    fn window(
        &mut self,
        graph: &WeightedGraph,
        assigned: &[Option<Class>],
        c: usize,
        window: KldWindow,
    ) -> Vec<usize> {
        let max_hops = match window {
            KldWindow::Full => usize::MAX,
            KldWindow::Hops(h) => h,
        };
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.epoch = 1;
        }
        let epoch = self.epoch;
        self.stamp[c] = epoch;
        let mut frontier = vec![c];
        let mut found = Vec::new();
        let mut hops = 0;
        while !frontier.is_empty() && hops < max_hops {
            hops += 1;
            let mut next = Vec::new();
            for &u in &frontier {
                for &(v, _) in graph.neighbors(u) {
                    if self.stamp[v] != epoch {
                        self.stamp[v] = epoch;
                        next.push(v);
                        if assigned[v].is_some() {
                            found.push(v);
                        }
                    }
                }
            }
            frontier = next;
        }
        found.sort_unstable();
        found.push(c);
        found
    }
}

/// Subgraph keeping exactly the edges whose endpoints lie in different
/// classes, with original weights.
pub fn induced_bipartite_graph(graph: &WeightedGraph, bp: &Bipartition) -> Result<WeightedGraph> {
    if bp.len() != graph.node_count() {
        return Err(Error::DimensionMismatch {
            expected: graph.node_count(),
            actual: bp.len(),
        });
    }
    Ok(graph.filter_edges(|e| bp.class(e.i) != bp.class(e.j)))
}
