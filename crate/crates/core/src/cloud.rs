//! Point cloud container, ASCII file I/O and Gaussian noise injection.
//!
//! Two on-disk formats are supported:
//!
//! * **XYZ**: one point per line, three whitespace-separated decimal numbers.
//!   Lines starting with `#` are comments. Extra columns are ignored.
//! * **PLY (ASCII)**: `element vertex N` with `x`, `y`, `z` float properties.
//!   Other elements and properties are skipped on read and never written.
//!
//! Coordinates are written with the shortest representation that round-trips
//! an `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Identifier of the generator used by [`add_gaussian_noise`]; written into
/// output metadata so noisy clouds can be regenerated.
pub const RNG_ALGORITHM: &str = "ChaCha20Rng(seed_from_u64)/rand_distr::Normal";

/// An ordered, non-empty set of finite 3D positions.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    positions: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(positions: Vec<Vec3>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::TooFewPoints {
                required: 1,
                actual: 0,
            });
        }
        if let Some(index) = positions
            .iter()
            .position(|p| !p.iter().all(|c| c.is_finite()))
        {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { positions })
    }

    pub fn from_xyz(points: &[[f64; 3]]) -> Result<Self> {
        Self::new(points.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    /// Always false; an empty cloud cannot be constructed.
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn point(&self, i: usize) -> &Vec3 {
        &self.positions[i]
    }

    pub fn into_positions(self) -> Vec<Vec3> {
        self.positions
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = self.positions[0];
        let mut hi = self.positions[0];
        for p in &self.positions[1..] {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }

    /// Rescales about the bounding-box center so the box diagonal is 1.
    /// Returns the applied scale factor; a zero-extent cloud is returned
    /// unchanged with factor 1.
    pub fn normalized_to_unit_diagonal(&self) -> (PointCloud, f64) {
        let (lo, hi) = self.bounding_box();
        let diag = (hi - lo).norm();
        if diag == 0.0 {
            return (self.clone(), 1.0);
        }
        let center = (lo + hi) * 0.5;
        let scale = 1.0 / diag;
        let positions = self
            .positions
            .iter()
            .map(|p| (p - center) * scale + center)
            .collect();
        (PointCloud { positions }, scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    PlyAscii,
    Xyz,
}

impl CloudFormat {
    /// Guesses the format from a file extension (`.ply` or anything else as XYZ).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("ply") => CloudFormat::PlyAscii,
            _ => CloudFormat::Xyz,
        }
    }
}

impl FromStr for CloudFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ply" | "ply-ascii" => Ok(CloudFormat::PlyAscii),
            "xyz" => Ok(CloudFormat::Xyz),
            other => Err(Error::InvalidParameter(format!("unknown cloud format '{other}'"))),
        }
    }
}

pub fn load_cloud(path: impl AsRef<Path>, format: CloudFormat) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        CloudFormat::Xyz => parse_xyz(&text),
        CloudFormat::PlyAscii => parse_ply(&text),
    }
}

pub fn save_cloud(cloud: &PointCloud, path: impl AsRef<Path>, format: CloudFormat) -> Result<()> {
    save_cloud_with_comments(cloud, path, format, &[])
}

/// Writes a cloud, embedding each comment line in the file header
/// (`comment ...` for PLY, `# ...` for XYZ).
pub fn save_cloud_with_comments(
    cloud: &PointCloud,
    path: impl AsRef<Path>,
    format: CloudFormat,
    comments: &[String],
) -> Result<()> {
    let path = path.as_ref();
    if cloud.is_empty() {
        return Err(Error::TooFewPoints {
            required: 1,
            actual: 0,
        });
    }
    let text = match format {
        CloudFormat::Xyz => format_xyz(cloud, comments),
        CloudFormat::PlyAscii => format_ply(cloud, comments),
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn format_xyz(cloud: &PointCloud, comments: &[String]) -> String {
    let mut out = String::with_capacity(cloud.len() * 48);
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    for p in cloud.positions() {
        let _ = writeln!(out, "{} {} {}", p.x, p.y, p.z);
    }
    out
}

pub fn format_ply(cloud: &PointCloud, comments: &[String]) -> String {
    let mut out = String::with_capacity(cloud.len() * 48 + 128);
    out.push_str("ply\nformat ascii 1.0\n");
    for c in comments {
        let _ = writeln!(out, "comment {c}");
    }
    let _ = writeln!(out, "element vertex {}", cloud.len());
    out.push_str("property double x\nproperty double y\nproperty double z\nend_header\n");
    for p in cloud.positions() {
        let _ = writeln!(out, "{} {} {}", p.x, p.y, p.z);
    }
    out
}

fn parse_coord(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::parse(line, format!("non-numeric coordinate '{tok}'")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("non-finite coordinate '{tok}'")));
    }
    Ok(v)
}

pub fn parse_xyz(text: &str) -> Result<PointCloud> {
    let mut positions = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(Error::parse(
                line_no,
                format!("expected 3 coordinates, found {}", toks.len()),
            ));
        }
        positions.push(Vec3::new(
            parse_coord(toks[0], line_no)?,
            parse_coord(toks[1], line_no)?,
            parse_coord(toks[2], line_no)?,
        ));
    }
    if positions.is_empty() {
        return Err(Error::parse(text.lines().count().max(1), "file contains no points"));
    }
    PointCloud::new(positions)
}

struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<String>,
}

pub fn parse_ply(text: &str) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    match lines.next() {
        Some((_, "ply")) => {}
        Some((n, _)) => return Err(Error::parse(n, "missing 'ply' magic")),
        None => return Err(Error::parse(1, "empty file")),
    }

    let mut elements: Vec<PlyElement> = Vec::new();
    let mut header_done = false;
    let mut last_line = 1;
    for (n, line) in lines.by_ref() {
        last_line = n;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.first().copied() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                if toks.get(1) != Some(&"ascii") {
                    return Err(Error::parse(n, "only ASCII PLY is supported"));
                }
            }
            Some("element") => {
                if toks.len() != 3 {
                    return Err(Error::parse(n, "malformed element line"));
                }
                let count = toks[2]
                    .parse()
                    .map_err(|_| Error::parse(n, format!("invalid element count '{}'", toks[2])))?;
                elements.push(PlyElement {
                    name: toks[1].to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let elem = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(n, "property before any element"))?;
                let name = toks
                    .last()
                    .filter(|_| toks.len() >= 3)
                    .ok_or_else(|| Error::parse(n, "malformed property line"))?;
                elem.properties.push(name.to_string());
            }
            Some("end_header") => {
                header_done = true;
                break;
            }
            Some(other) => return Err(Error::parse(n, format!("unexpected header keyword '{other}'"))),
        }
    }
    if !header_done {
        return Err(Error::parse(last_line, "missing end_header"));
    }

    let mut positions = Vec::new();
    let mut found_vertex = false;
    for elem in &elements {
        if elem.name != "vertex" {
            for _ in 0..elem.count {
                if lines.next().is_none() {
                    break;
                }
            }
            continue;
        }
        found_vertex = true;
        let col = |axis: &str| {
            elem.properties
                .iter()
                .position(|p| p == axis)
                .ok_or_else(|| Error::parse(1, format!("vertex element lacks property '{axis}'")))
        };
        let (cx, cy, cz) = (col("x")?, col("y")?, col("z")?);
        let need = cx.max(cy).max(cz) + 1;
        positions.reserve(elem.count);
        for _ in 0..elem.count {
            let Some((n, line)) = lines.by_ref().find(|(_, l)| !l.is_empty()) else {
                return Err(Error::VertexCount {
                    expected: elem.count,
                    actual: positions.len(),
                });
            };
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() < need {
                return Err(Error::parse(
                    n,
                    format!("expected at least {need} values, found {}", toks.len()),
                ));
            }
            positions.push(Vec3::new(
                parse_coord(toks[cx], n)?,
                parse_coord(toks[cy], n)?,
                parse_coord(toks[cz], n)?,
            ));
        }
    }
    if !found_vertex {
        return Err(Error::parse(last_line, "no vertex element in header"));
    }
    if positions.is_empty() {
        return Err(Error::parse(last_line, "vertex element is empty"));
    }
    PointCloud::new(positions)
}

/// Standard deviation and seed of an additive, zero-mean Gaussian perturbation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

/// Perturbs every coordinate of every point by an independent
/// `N(0, sigma^2)` draw. Draws are taken in point order, x then y then z.
pub fn add_gaussian_noise(cloud: &PointCloud, spec: NoiseSpec) -> Result<PointCloud> {
    if !(spec.sigma >= 0.0) || !spec.sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise sigma must be finite and >= 0, got {}",
            spec.sigma
        )));
    }
    if spec.sigma == 0.0 {
        return Ok(cloud.clone());
    }
    let normal = Normal::new(0.0, spec.sigma)
        .map_err(|e| Error::InvalidParameter(format!("noise distribution: {e}")))?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let positions = cloud
        .positions()
        .iter()
        .map(|p| {
            let e = Vec3::new(
                normal.sample(&mut rng),
                normal.sample(&mut rng),
                normal.sample(&mut rng),
            );
            p + e
        })
        .collect();
    PointCloud::new(positions)
}
