use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rollout::TrajectoryRecord;

pub const DEFAULT_WINDOW: usize = 200;
pub const DEFAULT_STRIDE: usize = 10;
/// Allowed trend per 1,000 frames relative to the statistic's mean.
pub const TREND_TOLERANCE: f64 = 0.05;
/// Absolute allowance for statistics whose mean is zero.
pub const TREND_FLOOR: f64 = 1e-9;

pub const STATISTICS: [&str; 3] = ["root_pixel_deviation", "increment", "fg_count"];

const RATIONALE: &str = "video-feature and perceptual metrics need trained appearance networks; \
these geometric statistics track drift of the generated motion instead";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub start: usize,
    pub end: usize,
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub statistic: String,
    pub mean: f64,
    pub slope_per_1000: f64,
    /// Largest trend or half-to-half change that still passes.
    pub allowed: f64,
    /// Standard deviation of the window means.
    pub spread: f64,
    pub first_half_mean: f64,
    pub second_half_mean: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub frames: usize,
    pub window: usize,
    pub stride: usize,
    pub windows: Vec<WindowStats>,
    pub trends: Vec<Trend>,
    pub rationale: String,
}

impl StabilityReport {
    pub fn pass(&self) -> bool {
        self.trends.iter().all(|t| t.pass)
    }

    /// One row per window: start, end, then mean and std of every statistic.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("start,end");
        for s in STATISTICS {
            out.push_str(&format!(",{s}_mean,{s}_std"));
        }
        out.push('\n');
        for w in &self.windows {
            out.push_str(&format!("{},{}", w.start, w.end));
            for k in 0..3 {
                out.push_str(&format!(",{},{}", w.mean[k], w.std[k]));
            }
            out.push('\n');
        }
        out
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, v.sqrt())
}

fn within(value: f64, mean: f64) -> bool {
    value.abs() <= TREND_TOLERANCE * mean.abs() + TREND_FLOOR
}

/// Windowed means of the per-frame stability statistics and their linear trend.
pub fn stability_report(log: &[TrajectoryRecord], window: usize, stride: usize) -> Result<StabilityReport> {
    if log.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory log".into()));
    }
    if window == 0 || stride == 0 || log.len() < window {
        return Err(Error::InvalidArgument(format!("{} frames for window {window}, stride {stride}", log.len())));
    }
    let series: [Vec<f64>; 3] = [
        log.iter().map(|r| r.root_pixel_deviation).collect(),
        log.iter().map(|r| r.increment).collect(),
        log.iter().map(|r| r.fg_count as f64).collect(),
    ];
    let windows: Vec<WindowStats> = (0..=(log.len() - window) / stride)
        .map(|k| {
            let start = k * stride;
            let mut w = WindowStats { start, end: start + window, mean: [0.0; 3], std: [0.0; 3] };
            for s in 0..3 {
                let (m, d) = mean_std(&series[s][start..start + window]);
                w.mean[s] = m;
                w.std[s] = d;
            }
            w
        })
        .collect();

    let xs: Vec<f64> = windows.iter().map(|w| w.start as f64).collect();
    let (x_mean, _) = mean_std(&xs);
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let half = log.len() / 2;
    let trends = (0..3)
        .map(|s| {
            let ys: Vec<f64> = windows.iter().map(|w| w.mean[s]).collect();
            let (mean, spread) = mean_std(&ys);
            let slope = if sxx > 0.0 { xs.iter().zip(&ys).map(|(x, y)| (x - x_mean) * (y - mean)).sum::<f64>() / sxx } else { 0.0 };
            let first = mean_std(&series[s][..half.max(1)]).0;
            let second = mean_std(&series[s][half..]).0;
            let slope_per_1000 = slope * 1000.0;
            Trend {
                statistic: STATISTICS[s].to_string(),
                mean,
                slope_per_1000,
                allowed: TREND_TOLERANCE * mean.abs() + TREND_FLOOR,
                spread,
                first_half_mean: first,
                second_half_mean: second,
                pass: within(slope_per_1000, mean) && within(second - first, mean),
            }
        })
        .collect();
    Ok(StabilityReport { frames: log.len(), window, stride, windows, trends, rationale: RATIONALE.to_string() })
}
