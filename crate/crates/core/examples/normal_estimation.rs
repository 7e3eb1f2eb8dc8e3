//! Normals from two opposite-class neighbors, MST orientation, and the
//! linearization `n = A p + b`.

use pcdenoise::bipartite::{approximate_bipartite, Class};
use pcdenoise::graph::build_knn_graph;
use pcdenoise::normals::{linearize, raw_normal};
use pcdenoise::solver::partite_normals;
use pcdenoise::{add_gaussian_noise, fixtures, NoiseSpec, Vec3};

fn main() -> pcdenoise::Result<()> {
    let raw = raw_normal(&Vec3::zeros(), &Vec3::new(1.0, 0.0, 0.0), &Vec3::new(0.0, 1.0, 0.0))?;
    println!("axis-aligned triple: n = {:?}, |C p + d| = {}", raw.normal.as_slice(), raw.norm);

    let clean = fixtures::plane(400, 1.0, 11);
    for sigma in [0.0, 0.05] {
        let cloud = add_gaussian_noise(&clean, NoiseSpec { sigma, seed: 5 })?;
        let graph = build_knn_graph(&cloud, 8, 1.5)?;
        let bp = approximate_bipartite(&graph, 0.01, 0)?;
        let pn = partite_normals(&graph, &bp, cloud.positions(), Class::Red, 8)?;
        let oriented = pn.oriented();
        let up = oriented.iter().filter(|n| n.z > 0.0).count();
        let within10 = oriented
            .iter()
            .filter(|n| n.z.abs().acos().to_degrees() <= 10.0)
            .count();
        println!(
            "sigma {sigma}: {} red normals, {up} point up, {within10} within 10 deg of z, {} unsupported",
            oriented.len(),
            pn.unsupported.len()
        );

        let i = pn.nodes[0];
        let lin = linearize(&cloud.positions()[i], &pn.raw[0], pn.alphas[0])?;
        let nudge = Vec3::new(0.01, -0.02, 0.03);
        println!(
            "  node {i}: |A p + b| = {:.12} at p, {:.6} after a small move",
            lin.evaluate(&cloud.positions()[i]).norm(),
            lin.evaluate(&(cloud.positions()[i] + nudge)).norm()
        );
    }
    Ok(())
}
