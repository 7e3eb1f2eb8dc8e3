//! Parameter files: flags over file over defaults, and an exact echo.

use pcdenoise::config::{apply_entries, parse_config, params_to_lines};
use pcdenoise::DenoiseParams;

fn main() -> pcdenoise::Result<()> {
    let text = "# strong smoothing\ngamma = 0.1\nk = 10   # denser graph\nkld_hops = full\n";
    let mut params = DenoiseParams::default();
    let rest = apply_entries(&mut params, &parse_config(text)?)?;
    assert!(rest.is_empty());
    params.rho = 1.0 / 3.0;

    let echo = params_to_lines(&params).join("\n");
    println!("{echo}");
    let mut back = DenoiseParams::default();
    apply_entries(&mut back, &parse_config(&echo)?)?;
    println!("echo reproduces parameters exactly: {}", back == params);
    Ok(())
}
