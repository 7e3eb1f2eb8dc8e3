//! Point cloud denoising by graph total variation of surface normals.
//!
//! The k-NN graph of a noisy cloud is approximated by a bipartite graph
//! (red and blue classes). With the blue points held fixed, each red
//! normal is an affine function of its own position, so minimizing
//! `|q - p|^2 + gamma * sum w_ij |n_i - n_j|_1` over the red positions is
//! convex and is solved by ADMM with a conjugate-gradient position update
//! and a proximal-gradient update of the edge differences. The two classes
//! are optimized alternately.
//!
//! ```no_run
//! use pcdenoise::{add_gaussian_noise, denoise, DenoiseParams, NoiseSpec, PointCloud};
//!
//! # fn main() -> pcdenoise::Result<()> {
//! let clean = PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.1]])?;
//! let noisy = add_gaussian_noise(&clean, NoiseSpec { sigma: 0.05, seed: 7 })?;
//! let (denoised, report) = denoise(&noisy, &DenoiseParams::default())?;
//! println!("{} outer passes", report.passes.len());
//! # let _ = denoised;
//! # Ok(())
//! # }
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod bipartite;
pub mod cli;
pub mod cloud;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod kdtree;
pub mod metrics;
pub mod normals;
pub mod solver;

pub use cloud::{add_gaussian_noise, load_cloud, save_cloud, CloudFormat, NoiseSpec, PointCloud, Vec3};
pub use error::{Error, Result};
pub use metrics::{c2c, c2p, evaluate, MetricReport};
pub use solver::{denoise, DenoiseParams, DiagnosticsReport};
