//! Trajectory and geometry metrics.

pub mod roundtrip;
pub mod stability;
pub mod turning;

pub use roundtrip::{roundtrip_error, ErrorStats, RayCastOracle, RayHit};
pub use stability::{stability_report, StabilityReport, Trend, WindowStats};
pub use turning::{turning_frames, TurningEvent, TurningParams, TurningReport};

use crate::error::Result;
use crate::pca::PcaBasis;
use crate::posmap::PositionMapAtlas;

/// Reconstruction residual of `sample` under each truncation of `basis`.
pub fn pca_error_curve(basis: &PcaBasis, sample: &PositionMapAtlas, ms: &[usize]) -> Result<Vec<(usize, f64)>> {
    ms.iter().map(|&m| Ok((m, basis.truncated(m)?.residual(sample)?))).collect()
}
