//! Greedy bipartite approximation driven by the KLD between Gaussian
//! Markov random fields.

use pcdenoise::bipartite::{approximate_bipartite_traced, induced_bipartite_graph, kld, BipartiteOptions, KldWindow};
use pcdenoise::graph::{build_knn_graph, laplacian, WeightedGraph};
use pcdenoise::fixtures;

fn main() -> pcdenoise::Result<()> {
    let triangle = WeightedGraph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])?;
    let (bp, steps) = approximate_bipartite_traced(&triangle, &BipartiteOptions::default())?;
    println!("triangle:");
    for s in &steps {
        println!("  node {} -> {} (kld red {:?}, blue {:?}, tie {})", s.node, s.class, s.kld_red, s.kld_blue, s.tie);
    }
    let kept = induced_bipartite_graph(&triangle, &bp)?;
    println!("  edges kept {} of {}", kept.edge_count(), triangle.edge_count());

    let cloud = fixtures::plane(300, 1.0, 3);
    let graph = build_knn_graph(&cloud, 8, 1.5)?;
    for window in [KldWindow::Hops(2), KldWindow::Full] {
        let opts = BipartiteOptions { window, ..BipartiteOptions::default() };
        let started = std::time::Instant::now();
        let (bp, _) = approximate_bipartite_traced(&graph, &opts)?;
        let bip = induced_bipartite_graph(&graph, &bp)?;
        let d = kld(&laplacian(&graph).to_dense(), &laplacian(&bip).to_dense(), opts.delta)?;
        println!(
            "plane, window {window:?}: red {} blue {}, removed {} of {} edges, KLD {d:.3}, {:.2}s",
            bp.nodes_of(pcdenoise::bipartite::Class::Red).len(),
            bp.nodes_of(pcdenoise::bipartite::Class::Blue).len(),
            graph.edge_count() - bip.edge_count(),
            graph.edge_count(),
            started.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
