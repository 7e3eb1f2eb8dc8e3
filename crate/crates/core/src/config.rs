//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored; trailing `# ...`
//! comments are stripped. Floats are echoed in shortest round-trip form, so
//! a written configuration reproduces the parameters bit for bit.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::solver::DenoiseParams;

/// Parsed entries, keyed by name, with the source line number.
pub type ConfigEntries = BTreeMap<String, (String, usize)>;

pub fn parse_config(text: &str) -> Result<ConfigEntries> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(line_no, format!("expected 'key = value', got '{line}'")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::parse(line_no, "empty key"));
        }
        out.insert(key.to_string(), (value.trim().to_string(), line_no));
    }
    Ok(out)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ConfigEntries> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

fn num<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid value '{value}' for '{key}'")))
}

/// Applies one entry to `params`. Returns `Ok(false)` for keys that are not
/// solver parameters.
pub fn apply_param(params: &mut DenoiseParams, key: &str, value: &str, line: usize) -> Result<bool> {
    match key {
        "gamma" => params.gamma = num(key, value, line)?,
        "rho" => params.rho = num(key, value, line)?,
        "t" => params.t = num(key, value, line)?,
        "sigma_p" => params.sigma_p = num(key, value, line)?,
        "k" => params.k = num(key, value, line)?,
        "delta" => params.delta = num(key, value, line)?,
        "cg_tol" => params.cg_tol = num(key, value, line)?,
        "cg_max_iter" => params.cg_max_iter = num(key, value, line)?,
        "prox_tol" => params.prox_tol = num(key, value, line)?,
        "prox_max_iter" => params.prox_max_iter = num(key, value, line)?,
        "admm_tol" => params.admm_tol = num(key, value, line)?,
        "admm_dual_tol" => params.admm_dual_tol = num(key, value, line)?,
        "admm_max_iter" => params.admm_max_iter = num(key, value, line)?,
        "outer_tol" => params.outer_tol = num(key, value, line)?,
        "outer_max_iter" => params.outer_max_iter = num(key, value, line)?,
        "start_node" => params.start_node = num(key, value, line)?,
        "kld_hops" => {
            params.kld_hops = if value.eq_ignore_ascii_case("full") {
                None
            } else {
                Some(num(key, value, line)?)
            }
        }
        "recompute_bipartition" => params.recompute_bipartition = num(key, value, line)?,
        "window_budget" => params.window_budget = num(key, value, line)?,
        _ => return Ok(false),
    }
    Ok(true)
}

/// Applies every solver entry; other keys are returned untouched.
pub fn apply_entries(params: &mut DenoiseParams, entries: &ConfigEntries) -> Result<ConfigEntries> {
    let mut rest = BTreeMap::new();
    for (key, (value, line)) in entries {
        if !apply_param(params, key, value, *line)? {
            rest.insert(key.clone(), (value.clone(), *line));
        }
    }
    Ok(rest)
}

pub fn params_to_lines(p: &DenoiseParams) -> Vec<String> {
    vec![
        format!("gamma = {}", p.gamma),
        format!("rho = {}", p.rho),
        format!("t = {}", p.t),
        format!("sigma_p = {}", p.sigma_p),
        format!("k = {}", p.k),
        format!("delta = {}", p.delta),
        format!("cg_tol = {}", p.cg_tol),
        format!("cg_max_iter = {}", p.cg_max_iter),
        format!("prox_tol = {}", p.prox_tol),
        format!("prox_max_iter = {}", p.prox_max_iter),
        format!("admm_tol = {}", p.admm_tol),
        format!("admm_dual_tol = {}", p.admm_dual_tol),
        format!("admm_max_iter = {}", p.admm_max_iter),
        format!("outer_tol = {}", p.outer_tol),
        format!("outer_max_iter = {}", p.outer_max_iter),
        format!("start_node = {}", p.start_node),
        format!(
            "kld_hops = {}",
            p.kld_hops.map_or_else(|| "full".to_string(), |h| h.to_string())
        ),
        format!("recompute_bipartition = {}", p.recompute_bipartition),
        format!("window_budget = {}", p.window_budget),
    ]
}
