//! Overlap and boundary-distance metrics, summary statistics and reports.

mod report;
mod stats;
mod surface;

pub use report::{evaluate, evaluate_methods, scan_metrics, Aggregate, MethodReport, Metric, MetricsReport, ScanMetrics};
pub use stats::{binomial_half_cdf, median, median_ci, rolling_dice, MedianCi};
pub use surface::{boundary_voxels, dice, percentile, surface_distances, surface_distances_with, SurfaceDistanceResult};
