//! Basking and hunting rules, and run-length aggregation of per-frame
//! states into episodes.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ingest::RunConfig;
use crate::interpolate::Track;
use crate::model::{Detection, FrameGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviourKind {
    Idle,
    Basking,
    Hunting,
}

impl BehaviourKind {
    /// Row order used in activity tables.
    pub const TABLE_ORDER: [BehaviourKind; 3] = [
        BehaviourKind::Idle,
        BehaviourKind::Hunting,
        BehaviourKind::Basking,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BehaviourKind::Idle => "idle",
            BehaviourKind::Basking => "basking",
            BehaviourKind::Hunting => "hunting",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "idle" => Some(BehaviourKind::Idle),
            "basking" => Some(BehaviourKind::Basking),
            "hunting" => Some(BehaviourKind::Hunting),
            _ => None,
        }
    }
}

impl fmt::Display for BehaviourKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Lamp-to-dragon separation in pixels: vertical distance and the angle
/// off the lamp's vertical, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaskingGeometry {
    pub delta_y: f64,
    pub theta: f64,
}

/// Geometry between a dragon and a lamp detection. With zero vertical
/// separation the angle is defined as 90 degrees.
pub fn basking_geometry(
    dragon: &Detection,
    lamp: &Detection,
    geom: &FrameGeometry,
) -> BaskingGeometry {
    let d = dragon.bbox.to_pixels(geom);
    let l = lamp.bbox.to_pixels(geom);
    let delta_y = (d.cy - l.cy).abs();
    let dx = (d.cx - l.cx).abs();
    let theta = if delta_y == 0.0 {
        90.0
    } else {
        (dx / delta_y).atan().to_degrees()
    };
    BaskingGeometry { delta_y, theta }
}

/// Basking holds when the lamp sits above the dragon (smaller row), the
/// vertical gap is at most `beta * H` and the angle is below `theta_max`.
/// The geometry is returned whenever both objects are present.
pub fn classify_basking(
    dragon: Option<&Detection>,
    lamp: Option<&Detection>,
    cfg: &RunConfig,
) -> (bool, Option<BaskingGeometry>) {
    let (Some(dragon), Some(lamp)) = (dragon, lamp) else {
        return (false, None);
    };
    let geom = &cfg.geometry;
    let g = basking_geometry(dragon, lamp, geom);
    let lamp_above =
        lamp.bbox.cy * f64::from(geom.height) < dragon.bbox.cy * f64::from(geom.height);
    let basking =
        lamp_above && g.delta_y <= cfg.beta * f64::from(geom.height) && g.theta < cfg.theta_max;
    (basking, Some(g))
}

/// Frames at which a cricket vanished close to the dragon.
///
/// For each cricket track the candidate frame is its last observation
/// `t`. It fires when the clip still runs for `disappearance_window`
/// frames after `t` and the dragon, at `t` or the nearest frame within
/// `max_gap`, is closer than `gamma * W`. One event per track at most.
pub fn detect_hunting(
    crickets: &[Track],
    dragon: &Track,
    cfg: &RunConfig,
    frame_count: u64,
) -> BTreeSet<u64> {
    let geom = &cfg.geometry;
    let reach = cfg.gamma * f64::from(geom.width);
    let mut events = BTreeSet::new();
    for track in crickets {
        let Some(last) = track.last_observed() else {
            continue;
        };
        let t = last.frame;
        if t.saturating_add(cfg.disappearance_window) >= frame_count {
            continue;
        }
        // Association ends the track, so nothing of it follows `t`.
        if track.last_frame() != Some(t) {
            continue;
        }
        let Some(d) = dragon.nearest(t, cfg.max_gap) else {
            continue;
        };
        let dist = d
            .bbox
            .to_pixels(geom)
            .center_distance(&last.bbox.to_pixels(geom));
        if dist < reach {
            events.insert(t);
        }
    }
    events
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub behaviour: BehaviourKind,
    pub start_frame: u64,
    pub end_frame: u64,
    pub duration: f64,
}

impl Episode {
    pub fn frames(&self) -> u64 {
        self.end_frame - self.start_frame + 1
    }
}

fn run_lengths(states: &[BehaviourKind]) -> Vec<(BehaviourKind, u64, u64)> {
    let mut runs: Vec<(BehaviourKind, u64, u64)> = Vec::new();
    for (i, &s) in states.iter().enumerate() {
        let i = i as u64;
        match runs.last_mut() {
            Some((kind, _, end)) if *kind == s => *end = i,
            _ => runs.push((s, i, i)),
        }
    }
    runs
}

/// Run-length encodes per-frame states. Basking runs shorter than
/// `min_episode` become idle; hunting frames are always kept. The result
/// partitions the whole clip.
pub fn aggregate_episodes(states: &[BehaviourKind], cfg: &RunConfig) -> Vec<Episode> {
    let mut demoted: Vec<BehaviourKind> = states.to_vec();
    for (kind, start, end) in run_lengths(states) {
        if kind == BehaviourKind::Basking && end - start + 1 < cfg.min_episode {
            demoted[start as usize..=end as usize].fill(BehaviourKind::Idle);
        }
    }
    run_lengths(&demoted)
        .into_iter()
        .map(|(behaviour, start_frame, end_frame)| Episode {
            behaviour,
            start_frame,
            end_frame,
            duration: (end_frame - start_frame + 1) as f64 / cfg.geometry.fps,
        })
        .collect()
}

/// Expands episodes back into one state per frame.
pub fn episode_states(episodes: &[Episode]) -> Vec<BehaviourKind> {
    episodes
        .iter()
        .flat_map(|e| std::iter::repeat_n(e.behaviour, e.frames() as usize))
        .collect()
}
