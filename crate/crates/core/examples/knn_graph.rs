//! k-nearest-neighbor graph with Gaussian edge weights, and its Laplacian.

use nalgebra::DVector;
use pcdenoise::graph::{build_knn_graph, laplacian, DEFAULT_K, DEFAULT_SIGMA_P};
use pcdenoise::fixtures;

fn main() -> pcdenoise::Result<()> {
    let cloud = fixtures::lobed_surface(400, 6.0);
    let graph = build_knn_graph(&cloud, DEFAULT_K, DEFAULT_SIGMA_P)?;
    let degrees: Vec<usize> = (0..graph.node_count()).map(|i| graph.degree(i)).collect();
    let (wmin, wmax) = graph
        .edges()
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), e| (lo.min(e.w), hi.max(e.w)));

    println!("nodes {} edges {}", graph.node_count(), graph.edge_count());
    println!(
        "degree min {} max {} (k = {DEFAULT_K}, union symmetrization)",
        degrees.iter().min().unwrap(),
        degrees.iter().max().unwrap()
    );
    println!("weights in [{wmin:.4}, {wmax:.4}]");
    println!("components {}", graph.connected_components().len());

    let l = laplacian(&graph);
    let ones = DVector::from_element(l.dim(), 1.0);
    println!("|L 1| = {:.2e}", l.mul_vec(&ones).norm());
    let x = DVector::from_fn(l.dim(), |i, _| cloud.positions()[i].z);
    println!("z' L z = {:.4} (smoothness of the height signal)", l.quadratic_form(&x));
    print!("first edges:\n{}", graph.to_edge_list().lines().take(5).collect::<Vec<_>>().join("\n"));
    println!();
    Ok(())
}
