//! Synthetic data, file formats and result emission.

pub mod experiment;
pub mod svg;

use std::f64::consts::TAU;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};

use crate::embedders::GraphData;
use crate::error::{Result, TopoError};
use crate::filtration::PointCloud;
use crate::pseudotime::Projection;

/// Unit-circle points in the first two coordinates plus uniform noise in
/// `[-h, h]` on every coordinate. Returns the cloud and the true angles.
pub fn generate_synthetic_cycle(
    n: usize,
    ambient_dim: usize,
    noise_half_width: f64,
    seed: u64,
) -> Result<(PointCloud, Vec<f64>)> {
    if ambient_dim < 2 {
        return Err(TopoError::Usage(format!(
            "the cycle needs at least 2 ambient dimensions, got {ambient_dim}"
        )));
    }
    if n == 0 {
        return Err(TopoError::InvalidPointCloud("cloud is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angles: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * TAU).collect();
    let mut coords = Vec::with_capacity(n * ambient_dim);
    for &t in &angles {
        for c in 0..ambient_dim {
            let base = match c {
                0 => t.cos(),
                1 => t.sin(),
                _ => 0.0,
            };
            let noise = if noise_half_width > 0.0 {
                rng.random_range(-noise_half_width..=noise_half_width)
            } else {
                0.0
            };
            coords.push(base + noise);
        }
    }
    Ok((PointCloud::new(coords, ambient_dim)?, angles))
}

/// Isotropic standard Gaussian sample.
pub fn generate_gaussian_cloud(n: usize, d: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(TopoError::InvalidPointCloud("cloud is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = (0..n * d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    PointCloud::new(coords, d)
}

/// Uniform angles on the unit circle with Gaussian noise of deviation `sigma`
/// on both coordinates.
pub fn generate_noisy_circle(n: usize, sigma: f64, seed: u64) -> Result<(PointCloud, Vec<f64>)> {
    if n == 0 {
        return Err(TopoError::InvalidPointCloud("cloud is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).map_err(|e| TopoError::Usage(e.to_string()))?;
    let angles: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * TAU).collect();
    let coords = angles
        .iter()
        .flat_map(|t| [t.cos(), t.sin()])
        .map(|v| v + rng.sample(noise))
        .collect();
    Ok((PointCloud::new(coords, 2)?, angles))
}

/// Parses a CSV point cloud. A first row with a non-numeric cell is a header.
pub fn parse_point_csv(text: &str) -> Result<PointCloud> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut coords = Vec::new();
    let mut dim = None;
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| TopoError::Parse {
            line,
            message: e.to_string(),
        })?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(r) => r,
            Err(_) if idx == 0 => continue,
            Err(e) => {
                return Err(TopoError::Parse {
                    line,
                    message: format!("non-numeric cell: {e}"),
                })
            }
        };
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(TopoError::Parse {
                    line,
                    message: format!("expected {d} columns, found {}", row.len()),
                })
            }
            _ => {}
        }
        coords.extend(row);
    }
    let dim = dim.ok_or_else(|| TopoError::InvalidPointCloud("no data rows".into()))?;
    PointCloud::new(coords, dim)
}

pub fn load_point_csv(path: &Path) -> Result<PointCloud> {
    parse_point_csv(&std::fs::read_to_string(path)?)
}

/// Column-centered copy of a cloud.
pub fn center(cloud: &PointCloud) -> PointCloud {
    let m = crate::embedders::center_columns(&cloud.to_matrix());
    PointCloud::from_matrix(&m).expect("centering keeps values finite")
}

/// Parses a whitespace-separated edge list with `#` comments. Without
/// `nodes`, the node count is one more than the largest id.
pub fn parse_edge_list(text: &str, nodes: Option<usize>) -> Result<GraphData> {
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(TopoError::Parse {
                line,
                message: format!("expected two node ids, found {}", fields.len()),
            });
        }
        let id = |s: &str| {
            s.parse::<usize>().map_err(|_| TopoError::Parse {
                line,
                message: format!("invalid node id {s:?}"),
            })
        };
        let (a, b) = (id(fields[0])?, id(fields[1])?);
        if a == b {
            return Err(TopoError::Parse {
                line,
                message: format!("self-loop at node {a}"),
            });
        }
        if let Some(n) = nodes {
            if a >= n || b >= n {
                return Err(TopoError::Parse {
                    line,
                    message: format!("node id out of range 0..{n}"),
                });
            }
        }
        edges.push((a, b));
    }
    let n = nodes.unwrap_or_else(|| edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0));
    GraphData::new(n, edges)
}

pub fn load_edge_list(path: &Path, nodes: Option<usize>) -> Result<GraphData> {
    parse_edge_list(&std::fs::read_to_string(path)?, nodes)
}

/// One non-negative integer label per line.
pub fn parse_labels(text: &str) -> Result<Vec<usize>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<usize>().map_err(|_| TopoError::Parse {
                line: i + 1,
                message: format!("invalid label {:?}", l.trim()),
            })
        })
        .collect()
}

/// Matrix rows as CSV with 17 significant digits.
pub fn matrix_csv(m: &DMatrix<f64>, header: Option<&[&str]>) -> String {
    let mut s = String::new();
    if let Some(h) = header {
        s.push_str(&h.join(","));
        s.push('\n');
    }
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:.16e}", m[(r, c)])).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn cloud_csv(cloud: &PointCloud) -> String {
    matrix_csv(&cloud.to_matrix(), None)
}

/// Columns `point,pseudotime,edge,t`.
pub fn pseudotime_csv(projections: &[Projection], times: &[f64]) -> String {
    let mut s = String::from("point,pseudotime,edge,t\n");
    for (i, (p, t)) in projections.iter().zip(times).enumerate() {
        s.push_str(&format!("{i},{t:.16e},{},{:.16e}\n", p.edge, p.t));
    }
    s
}

/// Writes `contents`, creating parent directories.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, contents)?;
    Ok(())
}
