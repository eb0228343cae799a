//! Shared inputs for the criterion benchmarks.

use topoflux::filtration::PointCloud;
use topoflux::io::generate_gaussian_cloud;

/// Standard Gaussian cloud in the plane.
pub fn planar_cloud(n: usize, seed: u64) -> PointCloud {
    generate_gaussian_cloud(n, 2, seed).expect("positive size")
}
