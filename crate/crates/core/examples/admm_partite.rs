//! One ADMM solve over the red class with blue points held fixed, printing
//! the residual log.

use pcdenoise::bipartite::{approximate_bipartite, Class};
use pcdenoise::graph::build_knn_graph;
use pcdenoise::normals::linearize;
use pcdenoise::solver::{admm_denoise_partite, partite_normals, DenoiseParams};
use pcdenoise::{add_gaussian_noise, fixtures, NoiseSpec, Vec3};

fn main() -> pcdenoise::Result<()> {
    let noisy = add_gaussian_noise(&fixtures::plane(400, 1.0, 2), NoiseSpec { sigma: 0.05, seed: 9 })?;
    let graph = build_knn_graph(&noisy, 8, 1.5)?;
    let bp = approximate_bipartite(&graph, 0.01, 0)?;
    let pn = partite_normals(&graph, &bp, noisy.positions(), Class::Red, 8)?;

    let lins: Vec<_> = pn
        .nodes
        .iter()
        .zip(pn.raw.iter().zip(&pn.alphas))
        .map(|(&i, (raw, &a))| linearize(&noisy.positions()[i], raw, a).ok())
        .collect();
    let red: Vec<Vec3> = pn.nodes.iter().map(|&i| noisy.positions()[i]).collect();
    let red_graph = build_knn_graph(&pcdenoise::PointCloud::new(red.clone())?, 8, 1.5)?;

    let params = DenoiseParams { admm_max_iter: 2000, ..DenoiseParams::default() };
    let out = admm_denoise_partite(&red, &red_graph, &lins, &params)?;
    println!("iteration  primal_residual  objective    gtv");
    for it in out.log.iter().filter(|it| it.iteration == 1 || it.iteration % 100 == 0) {
        println!("{:>9}  {:>15.3e}  {:>9.4}  {:>9.4}", it.iteration, it.primal_residual, it.objective, it.gtv);
    }
    let last = out.log.last().unwrap();
    println!("{:>9}  {:>15.3e}  {:>9.4}  {:>9.4}", last.iteration, last.primal_residual, last.objective, last.gtv);
    let rms = |p: &[Vec3]| (p.iter().map(|v| v.z * v.z).sum::<f64>() / p.len() as f64).sqrt();
    println!("converged {}; red RMS height {:.4} -> {:.4}", out.converged, rms(&red), rms(&out.p));
    Ok(())
}
