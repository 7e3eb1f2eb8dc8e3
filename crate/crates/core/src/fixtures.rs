//! Seeded synthetic test surfaces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::cloud::{PointCloud, Vec3};

/// `n` points drawn uniformly from a square of side `sqrt(n) * spacing` on
/// the plane z = 0, so the mean point spacing is about `spacing`.
pub fn plane(n: usize, spacing: f64, seed: u64) -> PointCloud {
    let side = (n as f64).sqrt() * spacing;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let pts = (0..n)
        .map(|_| Vec3::new(rng.random::<f64>() * side, rng.random::<f64>() * side, 0.0))
        .collect();
    PointCloud::new(pts).expect("plane sample is finite and non-empty")
}

/// Radius of the lobed surface in direction `(theta, phi)`, relative to its
/// base radius.
fn lobe_profile(theta: f64, phi: f64) -> f64 {
    1.0 + 0.18 * (2.0 * theta).sin().powi(2) * (3.0 * phi).cos() + 0.10 * (3.0 * theta).cos()
}

/// A closed, smooth, lobed surface of `n` points with irregular curvature,
/// used as a stand-in for scanned models. Points follow a Fibonacci
/// lattice on the sphere, displaced radially; `base_radius` scales the
/// whole shape.
pub fn lobed_surface(n: usize, base_radius: f64) -> PointCloud {
    lobed_surface_jittered(n, base_radius, 0.0, 0)
}

/// [`lobed_surface`] with each lattice direction moved tangentially by a
/// seeded random offset of up to `jitter` lattice spacings, giving the
/// uneven sampling density of a real scan.
pub fn lobed_surface_jittered(n: usize, base_radius: f64, jitter: f64, seed: u64) -> PointCloud {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let spacing = (4.0 * std::f64::consts::PI / n as f64).sqrt();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let pts = (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let phi = golden * i as f64;
            let rxy = (1.0 - z * z).sqrt();
            let mut dir = Vec3::new(rxy * phi.cos(), rxy * phi.sin(), z);
            if jitter > 0.0 {
                let east = Vec3::new(-phi.sin(), phi.cos(), 0.0);
                let north = dir.cross(&east);
                let radius = jitter * spacing * rng.random::<f64>().sqrt();
                let angle = std::f64::consts::TAU * rng.random::<f64>();
                dir = (dir + (east * angle.cos() + north * angle.sin()) * radius).normalize();
            }
            let theta = dir.z.clamp(-1.0, 1.0).acos();
            let phi = dir.y.atan2(dir.x);
            dir * (base_radius * lobe_profile(theta, phi))
        })
        .collect();
    PointCloud::new(pts).expect("lattice sample is finite and non-empty")
}

/// Base radius giving a mean point spacing of about `spacing` for `n`
/// points on [`lobed_surface`].
pub fn lobed_radius_for_spacing(n: usize, spacing: f64) -> f64 {
    (n as f64 * spacing * spacing / (4.0 * std::f64::consts::PI)).sqrt()
}
