//! End-to-end clip analysis: tracks, gap filling, per-frame rules,
//! episodes and activity metrics.

use serde::{Deserialize, Serialize};

use crate::activity::{activity_report, ActivityReport};
use crate::behaviour::{
    aggregate_episodes, classify_basking, detect_hunting, episode_states, BehaviourKind, Episode,
};
use crate::ingest::RunConfig;
use crate::interpolate::{associate_crickets, fill_gaps, reduce_per_frame, Track};
use crate::model::{ClassLabel, Provenance, Timeline};

/// Per-frame annotation record, one line of `frames.jsonl`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: u64,
    pub state: BehaviourKind,
    pub delta_y: Option<f64>,
    pub theta: Option<f64>,
    pub dragon: Option<Provenance>,
    pub lamp: Option<Provenance>,
    pub crickets: u32,
}

/// Share of frames covered between a track's first and last detection,
/// before and after gap filling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Continuity {
    pub class: ClassLabel,
    pub before: Option<f64>,
    pub after: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOutput {
    pub config: RunConfig,
    pub frame_count: u64,
    pub episodes: Vec<Episode>,
    pub hunting_events: Vec<u64>,
    /// Rows in idle, hunting, basking order.
    pub activity: Vec<ActivityReport>,
    pub cricket_tracks: usize,
    /// Frames with a detection between first and last observation; an
    /// operational continuity measure, not a detector metric.
    pub continuity: Vec<Continuity>,
    #[serde(skip)]
    pub frames: Vec<FrameRecord>,
}

impl AnalysisOutput {
    pub fn activity_for(&self, kind: BehaviourKind) -> Option<&ActivityReport> {
        self.activity.iter().find(|a| a.behaviour == kind)
    }
}

/// Runs the full pipeline on one clip. The timeline's geometry overrides
/// the one in `cfg`.
pub fn analyze(timeline: &Timeline, cfg: &RunConfig) -> AnalysisOutput {
    let cfg = RunConfig {
        geometry: timeline.geometry,
        ..*cfg
    };
    let n = timeline.frame_count;

    let (dragon_raw, lamp_raw) = reduce_per_frame(timeline);
    let dragon = fill_gaps(&dragon_raw, cfg.max_gap);
    let lamp = fill_gaps(&lamp_raw, cfg.max_gap);
    let crickets: Vec<Track> =
        associate_crickets(timeline, &timeline.geometry, cfg.cricket_gate, cfg.max_gap)
            .iter()
            .map(|t| fill_gaps(t, cfg.max_gap))
            .collect();
    let hunting = detect_hunting(&crickets, &dragon, &cfg, n);

    let mut cricket_counts = vec![0u32; n as usize];
    for t in &crickets {
        for d in t.iter() {
            cricket_counts[d.frame as usize] += 1;
        }
    }

    let mut raw_states = Vec::with_capacity(n as usize);
    let mut geometry = Vec::with_capacity(n as usize);
    for frame in 0..n {
        let (basking, g) = classify_basking(dragon.get(frame), lamp.get(frame), &cfg);
        let state = if hunting.contains(&frame) {
            BehaviourKind::Hunting
        } else if basking {
            BehaviourKind::Basking
        } else {
            BehaviourKind::Idle
        };
        raw_states.push(state);
        geometry.push(g);
    }

    let episodes = aggregate_episodes(&raw_states, &cfg);
    let states = episode_states(&episodes);
    let delta_y: Vec<Option<f64>> = geometry.iter().map(|g| g.map(|g| g.delta_y)).collect();
    let activity = BehaviourKind::TABLE_ORDER
        .iter()
        .map(|&k| activity_report(k, &states, &delta_y, cfg.geometry.fps))
        .collect();

    let frames = (0..n)
        .map(|frame| {
            let i = frame as usize;
            FrameRecord {
                frame,
                state: states[i],
                delta_y: geometry[i].map(|g| g.delta_y),
                theta: geometry[i].map(|g| g.theta),
                dragon: dragon.get(frame).map(|d| d.provenance),
                lamp: lamp.get(frame).map(|d| d.provenance),
                crickets: cricket_counts[i],
            }
        })
        .collect();

    let continuity = [
        (ClassLabel::BeardedDragon, &dragon_raw, &dragon),
        (ClassLabel::HeatingLamp, &lamp_raw, &lamp),
    ]
    .into_iter()
    .map(|(class, before, after)| Continuity {
        class,
        before: before.continuity(),
        after: after.continuity(),
    })
    .collect();

    AnalysisOutput {
        config: cfg,
        frame_count: n,
        episodes,
        hunting_events: hunting.into_iter().collect(),
        activity,
        cricket_tracks: crickets.len(),
        continuity,
        frames,
    }
}
