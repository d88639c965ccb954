//! Text and JSON renderings of analysis results.

use std::fmt::Write as _;

use crate::activity::ActivityReport;
use crate::analysis::AnalysisOutput;
use crate::behaviour::{BehaviourKind, Episode};

/// `<behaviour> <start_frame> <end_frame> <duration_s>` per episode.
pub fn events_txt(episodes: &[Episode]) -> String {
    let mut s = String::new();
    for e in episodes {
        let _ = writeln!(
            s,
            "{} {} {} {:.3}",
            e.behaviour, e.start_frame, e.end_frame, e.duration
        );
    }
    s
}

pub fn report_json(output: &AnalysisOutput) -> String {
    let mut s =
        serde_json::to_string_pretty(output).expect("analysis output is always serializable");
    s.push('\n');
    s
}

pub fn parse_report_json(text: &str) -> serde_json::Result<AnalysisOutput> {
    serde_json::from_str(text)
}

pub fn frames_jsonl(output: &AnalysisOutput) -> String {
    let mut s = String::new();
    for record in &output.frames {
        s.push_str(&serde_json::to_string(record).expect("frame records are always serializable"));
        s.push('\n');
    }
    s
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "–".to_owned(), |x| format!("{x:.2}"))
}

/// Activity rows with "–" for metrics that could not be computed.
pub fn activity_table(rows: &[ActivityReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<10} {:>12} {:>15} {:>12} {:>13}",
        "Scenario", "Coverage (%)", "Mean Diff. (px)", "Jitter (px)", "Drift (px/s)"
    );
    for r in rows {
        let name = r.behaviour.as_str();
        let mut title = name[..1].to_uppercase();
        title.push_str(&name[1..]);
        let _ = writeln!(
            s,
            "{:<10} {:>12.2} {:>15} {:>12} {:>13}",
            title,
            r.coverage,
            cell(r.mean_vertical_diff),
            cell(r.jitter),
            cell(r.drift_slope)
        );
    }
    s
}

fn span(values: impl Iterator<Item = Option<f64>>) -> String {
    let present: Vec<f64> = values.flatten().collect();
    let lo = present.iter().copied().reduce(f64::min);
    let hi = present.iter().copied().reduce(f64::max);
    match (lo, hi) {
        (Some(lo), Some(hi)) if lo == hi => format!("{lo:.2}"),
        (Some(lo), Some(hi)) => format!("{lo:.2}–{hi:.2}"),
        _ => "–".to_owned(),
    }
}

/// Per-behaviour ranges (min–max) of each metric across several clips.
/// A cell is "–" only when no clip produced the metric.
pub fn range_table(clips: &[AnalysisOutput]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<10} {:>14} {:>17} {:>14} {:>15}",
        "Scenario", "Coverage (%)", "Mean Diff. (px)", "Jitter (px)", "Drift (px/s)"
    );
    for kind in BehaviourKind::TABLE_ORDER {
        let rows: Vec<&ActivityReport> =
            clips.iter().filter_map(|c| c.activity_for(kind)).collect();
        let name = kind.as_str();
        let mut title = name[..1].to_uppercase();
        title.push_str(&name[1..]);
        let _ = writeln!(
            s,
            "{:<10} {:>14} {:>17} {:>14} {:>15}",
            title,
            span(rows.iter().map(|r| Some(r.coverage))),
            span(rows.iter().map(|r| r.mean_vertical_diff)),
            span(rows.iter().map(|r| r.jitter)),
            span(rows.iter().map(|r| r.drift_slope))
        );
    }
    s
}

/// Human-readable summary of a saved analysis.
pub fn summary(output: &AnalysisOutput) -> String {
    let c = &output.config;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "clip: {} frames, {}x{} @ {} fps",
        output.frame_count, c.geometry.width, c.geometry.height, c.geometry.fps
    );
    let _ = writeln!(
        s,
        "thresholds: beta={} theta_max={} gamma={} max_gap={} disappearance_window={} min_episode={} cricket_gate={}",
        c.beta, c.theta_max, c.gamma, c.max_gap, c.disappearance_window, c.min_episode, c.cricket_gate
    );
    let _ = writeln!(
        s,
        "episodes: {}, hunting events: {}, cricket tracks: {}",
        output.episodes.len(),
        output.hunting_events.len(),
        output.cricket_tracks
    );
    let pct = |v: Option<f64>| v.map_or_else(|| "–".to_owned(), |x| format!("{:.1}%", 100.0 * x));
    let _ = write!(
        s,
        "track continuity (operational: filled share of each track's span), before -> after:"
    );
    for c in &output.continuity {
        let _ = write!(
            s,
            " {} {} -> {};",
            c.class.name(),
            pct(c.before),
            pct(c.after)
        );
    }
    s.push_str("\n\n");
    s.push_str(&activity_table(&output.activity));
    s
}
