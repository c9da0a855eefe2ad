use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec3;

/// Detector settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TurningParams {
    pub angle_tolerance_deg: f64,
    /// Frames feeding the trailing median that defines the steady direction.
    pub median_window: usize,
    /// Consecutive aligned displacements needed to declare the new steady state.
    pub settle_run: usize,
    /// Moving threshold as a fraction of the peak per-frame speed.
    pub moving_fraction: f64,
}

impl Default for TurningParams {
    fn default() -> Self {
        Self { angle_tolerance_deg: 5.0, median_window: 5, settle_run: 5, moving_fraction: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurningEvent {
    pub start_frame: usize,
    pub end_frame: usize,
    pub angle_degrees: f64,
    pub frame_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurningReport {
    pub events: Vec<TurningEvent>,
    pub mean_180: Option<f64>,
    pub mean_90: Option<f64>,
}

fn angle_deg(a: &Vec3, b: &Vec3) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos().to_degrees()
}

fn median_direction(dirs: &[Vec3]) -> Vec3 {
    let mut m = Vec3::zeros();
    for c in 0..3 {
        let mut xs: Vec<f64> = dirs.iter().map(|d| d[c]).collect();
        xs.sort_by(f64::total_cmp);
        let n = xs.len();
        m[c] = if n % 2 == 1 { xs[n / 2] } else { 0.5 * (xs[n / 2 - 1] + xs[n / 2]) };
    }
    let norm = m.norm();
    if norm > 0.0 { m / norm } else { dirs[dirs.len() - 1] }
}

/// Counts frames spent between steady travel directions.
///
/// Displacement `k` joins frames `k` and `k + 1`. Within each moving stretch, a turn starts
/// at the first displacement that leaves the trailing-median direction by more than the
/// tolerance and ends where `settle_run` mutually aligned displacements begin. The frame
/// count is the number of displacements off both steady directions plus one, i.e. the
/// number of heading increments the turn took.
pub fn turning_frames(roots: &[Vec3], params: &TurningParams) -> Result<TurningReport> {
    if roots.len() < 3 {
        return Err(Error::InvalidArgument(format!("{} frames, at least 3 are required", roots.len())));
    }
    let disp: Vec<Vec3> = roots.windows(2).map(|w| w[1] - w[0]).collect();
    let peak = disp.iter().map(|d| d.norm()).fold(0.0, f64::max);
    let threshold = params.moving_fraction * peak;
    let moving: Vec<bool> = disp.iter().map(|d| peak > 0.0 && d.norm() > threshold).collect();
    if moving.iter().filter(|m| **m).count() < 3 {
        return Err(Error::InvalidArgument("fewer than 3 moving frames".into()));
    }
    let tol = params.angle_tolerance_deg;
    let settle = params.settle_run.max(1);
    let mut events = Vec::new();

    let mut k = 0;
    while k < disp.len() {
        if !moving[k] {
            k += 1;
            continue;
        }
        let end = (k..disp.len()).find(|&j| !moving[j]).unwrap_or(disp.len());
        let dirs: Vec<Vec3> = disp[k..end].iter().map(|d| d.normalize()).collect();
        let mut history: Vec<Vec3> = vec![dirs[0]];
        let mut i = 1;
        while i < dirs.len() {
            let tail = &history[history.len().saturating_sub(params.median_window.max(1))..];
            let pre = median_direction(tail);
            if angle_deg(&dirs[i], &pre) <= tol {
                history.push(dirs[i]);
                i += 1;
                continue;
            }
            let settled = (i + 1..=dirs.len().saturating_sub(settle)).find(|&j| {
                let run = &dirs[j..j + settle];
                let m = median_direction(run);
                run.iter().all(|d| angle_deg(d, &m) <= tol)
            });
            let Some(j) = settled else { break };
            let post = median_direction(&dirs[j..j + settle]);
            let angle = angle_deg(&pre, &post);
            if angle > tol {
                let off = dirs[i..j].iter().filter(|d| angle_deg(d, &pre) > tol && angle_deg(d, &post) > tol).count();
                events.push(TurningEvent { start_frame: k + i, end_frame: k + j, angle_degrees: angle, frame_count: off + 1 });
            }
            history = dirs[j..j + settle].to_vec();
            i = j + settle;
        }
        k = end;
    }

    let mean_of = |lo: f64, hi: f64| {
        let xs: Vec<f64> =
            events.iter().filter(|e| e.angle_degrees > lo && e.angle_degrees <= hi).map(|e| e.frame_count as f64).collect();
        (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
    };
    let mean_180 = mean_of(135.0, 180.0);
    let mean_90 = mean_of(45.0, 135.0);
    Ok(TurningReport { events, mean_180, mean_90 })
}
