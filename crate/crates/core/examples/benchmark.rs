//! Results table over synthetic models at two noise levels.
//!
//! ```text
//! cargo run --release --example benchmark
//! ```

use pcdenoise::bench::{run_bench, BenchConfig};
use pcdenoise::{fixtures, DenoiseParams};

fn main() -> pcdenoise::Result<()> {
    let models = vec![
        ("plane".to_string(), fixtures::plane(600, 1.0, 1)),
        ("lobed".to_string(), fixtures::lobed_surface(1000, fixtures::lobed_radius_for_spacing(1000, 1.5))),
    ];
    let cfg = BenchConfig {
        sigmas: vec![0.1, 0.3],
        params: DenoiseParams { outer_max_iter: 3, admm_max_iter: 500, ..DenoiseParams::default() },
        workers: 2,
        ..BenchConfig::default()
    };
    let outcome = run_bench(&models, &cfg)?;
    print!("{}", outcome.to_table());
    print!("{}", outcome.to_csv());
    print!("{}", outcome.timings_csv());
    Ok(())
}
