//! Activity metrics over the lamp-to-dragon vertical separation: coverage,
//! mean separation, frame-to-frame jitter and least-squares drift.

use serde::{Deserialize, Serialize};

use crate::behaviour::BehaviourKind;

/// Activity summary for one behaviour in one clip. Metrics that need more
/// frames than were available are `None` and serialize as `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivityReport {
    pub behaviour: BehaviourKind,
    /// Percent of clip frames in this state.
    pub coverage: f64,
    /// Pixels.
    pub mean_vertical_diff: Option<f64>,
    /// Pixels.
    pub jitter: Option<f64>,
    /// Pixels per second.
    pub drift_slope: Option<f64>,
    /// Frames in this state with a measured separation.
    pub frames_used: u64,
}

pub fn coverage(states: &[BehaviourKind], kind: BehaviourKind, frame_count: u64) -> f64 {
    if frame_count == 0 {
        return 0.0;
    }
    let hits = states.iter().filter(|&&s| s == kind).count();
    100.0 * hits as f64 / frame_count as f64
}

pub fn mean_vertical_diff(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

/// Mean absolute change between separations of adjacent frames. Pairs
/// that straddle a missing frame are skipped. `series` must be sorted by
/// frame.
pub fn jitter(series: &[(u64, f64)]) -> Option<f64> {
    let (sum, n) = series
        .windows(2)
        .filter(|w| w[1].0 == w[0].0 + 1)
        .fold((0.0, 0usize), |(s, n), w| {
            (s + (w[1].1 - w[0].1).abs(), n + 1)
        });
    (n > 0).then(|| sum / n as f64)
}

/// Ordinary least-squares slope of value against time. `None` with fewer
/// than two distinct timestamps.
pub fn drift_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(sxy, sxx), &(t, y)| {
        let dt = t - mean_t;
        (sxy + dt * (y - mean_y), sxx + dt * dt)
    });
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Builds the report for `kind` from final per-frame states and the
/// per-frame separation (`None` where dragon or lamp was missing).
pub fn activity_report(
    kind: BehaviourKind,
    states: &[BehaviourKind],
    delta_y: &[Option<f64>],
    fps: f64,
) -> ActivityReport {
    let series: Vec<(u64, f64)> = states
        .iter()
        .zip(delta_y)
        .enumerate()
        .filter_map(|(f, (&s, &dy))| (s == kind).then_some(dy).flatten().map(|dy| (f as u64, dy)))
        .collect();
    let values: Vec<f64> = series.iter().map(|p| p.1).collect();
    let timed: Vec<(f64, f64)> = series.iter().map(|&(f, dy)| (f as f64 / fps, dy)).collect();
    ActivityReport {
        behaviour: kind,
        coverage: coverage(states, kind, states.len() as u64),
        mean_vertical_diff: mean_vertical_diff(&values),
        jitter: jitter(&series),
        drift_slope: drift_slope(&timed),
        frames_used: series.len() as u64,
    }
}
