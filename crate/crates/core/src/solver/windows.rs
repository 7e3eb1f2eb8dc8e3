//! Large clouds are split on a uniform grid. Each occupied cell is solved
//! together with its 26-cell halo, and the cell's own points take that
//! window's solution.

use std::collections::BTreeMap;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;

use super::{denoise_single, DenoiseParams, DiagnosticsReport};
use crate::cloud::{PointCloud, Vec3};
use crate::error::{Error, Result};

type Cell = [i64; 3];

const MAX_REFINEMENTS: usize = 40;

fn bin(points: &[Vec3], origin: &Vec3, h: f64) -> BTreeMap<Cell, Vec<usize>> {
    let mut cells: BTreeMap<Cell, Vec<usize>> = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        let c = (p - origin) / h;
        cells
            .entry([c.x.floor() as i64, c.y.floor() as i64, c.z.floor() as i64])
            .or_default()
            .push(i);
    }
    cells
}

fn halo(cells: &BTreeMap<Cell, Vec<usize>>, c: &Cell) -> Vec<usize> {
    let mut out = Vec::new();
    for dx in -1..=1 {
        for dy in -1..=1 {
            for dz in -1..=1 {
                if let Some(pts) = cells.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                    out.extend_from_slice(pts);
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// Grid of cells whose halo windows hold at most `budget` points, when
/// reachable by halving the cell size.
pub(crate) fn plan_windows(points: &[Vec3], budget: usize) -> (f64, BTreeMap<Cell, Vec<usize>>) {
    let cloud_lo = points.iter().fold(points[0], |a, p| a.inf(p));
    let cloud_hi = points.iter().fold(points[0], |a, p| a.sup(p));
    let mut h = (cloud_hi - cloud_lo).max().max(f64::MIN_POSITIVE);
    let mut cells = bin(points, &cloud_lo, h);
    for _ in 0..MAX_REFINEMENTS {
        let largest = cells.keys().map(|c| halo(&cells, c).len()).max().unwrap_or(0);
        if largest <= budget {
            break;
        }
        h *= 0.5;
        cells = bin(points, &cloud_lo, h);
    }
    (h, cells)
}

/// Interior node indices, their denoised positions, and the window report.
type WindowResult = (Vec<usize>, Vec<Vec3>, DiagnosticsReport);

pub(crate) fn denoise_windowed(cloud: &PointCloud, params: &DenoiseParams) -> Result<(PointCloud, DiagnosticsReport)> {
    let started = Instant::now();
    let points = cloud.positions();
    let (h, cells) = plan_windows(points, params.window_budget);
    info!("windowed solve: {} cells of size {h:.4}", cells.len());
    let inner = DenoiseParams {
        window_budget: usize::MAX,
        ..params.clone()
    };
    let keys: Vec<Cell> = cells.keys().copied().collect();
    let results: Vec<Result<Option<WindowResult>>> = keys
        .par_iter()
        .map(|c| {
            let window = halo(&cells, c);
            if window.len() < 4 {
                return Ok(None);
            }
            if window.len() > params.window_budget {
                warn!("window of {} points exceeds the budget", window.len());
            }
            let sub = PointCloud::new(window.iter().map(|&i| points[i]).collect())?;
            let (out, rep) = match denoise_single(&sub, &inner) {
                Ok(r) => r,
                Err(Error::Degenerate(msg)) => {
                    warn!("window left unchanged: {msg}");
                    return Ok(None);
                }
                Err(e) => return Err(e),
            };
            let own = &cells[c];
            let solved = own
                .iter()
                .map(|i| out.positions()[window.binary_search(i).expect("cell lies in its window")])
                .collect();
            Ok(Some((own.clone(), solved, rep)))
        })
        .collect();

    let mut merged = points.to_vec();
    let mut report = DiagnosticsReport::new(cloud.len(), params);
    report.converged = true;
    for (w, res) in results.into_iter().enumerate() {
        report.windows += 1;
        let Some((own, solved, rep)) = res? else {
            continue;
        };
        for (i, p) in own.into_iter().zip(solved) {
            merged[i] = p;
        }
        report.red_nodes += rep.red_nodes;
        report.blue_nodes += rep.blue_nodes;
        report.converged &= rep.converged;
        for mut pass in rep.passes {
            pass.window = Some(w);
            report.passes.push(pass);
        }
    }
    report.total_seconds = started.elapsed().as_secs_f64();
    Ok((PointCloud::new(merged)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_respects_budget() {
        let pts: Vec<Vec3> = (0..40)
            .flat_map(|i| (0..40).map(move |j| Vec3::new(i as f64, j as f64, 0.0)))
            .collect();
        let (_, cells) = plan_windows(&pts, 400);
        assert!(cells.len() > 1);
        assert!(cells.keys().all(|c| halo(&cells, c).len() <= 400));
        let total: usize = cells.values().map(Vec::len).sum();
        assert_eq!(total, pts.len());
    }

    #[test]
    fn small_budget_windowed_run_matches_shape() {
        let pts: Vec<[f64; 3]> = (0..12)
            .flat_map(|i| (0..12).map(move |j| [i as f64, j as f64, ((i * 7 + j * 3) % 5) as f64 * 0.05]))
            .collect();
        let cloud = PointCloud::from_xyz(&pts).unwrap();
        let params = DenoiseParams {
            window_budget: 80,
            outer_max_iter: 1,
            ..Default::default()
        };
        let (out, rep) = super::super::denoise(&cloud, &params).unwrap();
        assert_eq!(out.len(), cloud.len());
        assert!(rep.windows > 1);
        assert!(rep.passes.iter().all(|p| p.window.is_some()));
    }
}
