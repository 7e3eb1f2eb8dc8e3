//! Cloud-to-cloud and cloud-to-plane errors.

use pcdenoise::metrics::{c2c, c2p, evaluate, CSV_HEADER};
use pcdenoise::{add_gaussian_noise, fixtures, NoiseSpec, PointCloud};

fn main() -> pcdenoise::Result<()> {
    let ground = PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]])?;
    let test = PointCloud::from_xyz(&[[0.5, 0.0, 0.0]])?;
    let d = c2c(&ground, &test);
    println!(
        "toy C2C: ground->test {} test->ground {} symmetric {}",
        d.unsquared.ground_to_test, d.unsquared.test_to_ground, d.unsquared.symmetric
    );

    let plane = fixtures::plane(900, 0.05, 4);
    let slid = PointCloud::new(plane.positions().iter().map(|p| p + pcdenoise::Vec3::new(0.01, 0.0, 0.0)).collect())?;
    println!(
        "tangential shift: C2C {:.4e}, C2P {:.4e}",
        c2c(&plane, &slid).unsquared.symmetric,
        c2p(&plane, &slid, 8)?.squared.symmetric
    );

    let n = 2000;
    let clean = fixtures::lobed_surface(n, fixtures::lobed_radius_for_spacing(n, 1.5));
    let noisy = add_gaussian_noise(&clean, NoiseSpec { sigma: 0.1, seed: 1 })?;
    let report = evaluate(&clean, &noisy, 8)?;
    print!("{}", report.to_table());
    println!("{CSV_HEADER}\n{}", report.csv_row("lobed", Some(0.1), 0.0));
    Ok(())
}
