//! Deterministic synthetic clips for end-to-end testing.
//!
//! Each scenario scripts a lamp, a dragon and (for hunting) one cricket,
//! then perturbs the script with seeded noise and dropout. Reproducing a
//! log elsewhere needs only the following recipe:
//!
//! * generator: ChaCha8 (`rand_chacha::ChaCha8Rng`), seeded with
//!   `seed_from_u64(seed)` (PCG32 expansion of the 64-bit seed);
//! * uniform: `(next_u64() >> 11) * 2^-53`, in `[0, 1)`;
//! * per frame, for the slots lamp, dragon, cricket in that order, three
//!   uniforms are drawn whether or not the slot is visible: `u_drop`,
//!   `u1`, `u2`;
//! * normals by Box-Muller: `r = sqrt(-2 ln(1 - u1))`,
//!   `z_x = r cos(2 pi u2)`, `z_y = r sin(2 pi u2)`;
//! * the emitted center is `clamp(c + noise * z, 0, 1)`; extents are exact;
//! * a slot is dropped when `u_drop < dropout`, except on the first and
//!   last frame it is scripted to be visible.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activity::ActivityReport;
use crate::behaviour::{BehaviourKind, Episode};
use crate::ingest::{write_detection_log, RunConfig, MAX_FRAME_COUNT};
use crate::model::{BBox, ClassLabel, Detection, FrameGeometry, Timeline};

/// Scripted object: normalized center, extent and reported confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Prop {
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    confidence: f64,
}

const LAMP: Prop = Prop {
    cx: 0.5,
    cy: 0.15,
    w: 0.12,
    h: 0.10,
    confidence: 0.95,
};
const DRAGON_BASKING: Prop = Prop {
    cx: 0.52,
    cy: 0.40,
    w: 0.25,
    h: 0.15,
    confidence: 0.9,
};
const DRAGON_IDLE: Prop = Prop {
    cx: 0.25,
    cy: 0.80,
    ..DRAGON_BASKING
};
const DRAGON_HUNTING: Prop = Prop {
    cx: 0.30,
    cy: 0.75,
    ..DRAGON_BASKING
};
const CRICKET_START: Prop = Prop {
    cx: 0.95,
    cy: 0.90,
    w: 0.03,
    h: 0.03,
    confidence: 0.6,
};

/// Largest horizontal offset of the cricket's vanish point from the dragon,
/// as a fraction of frame width, that keeps it inside the frame.
pub const MAX_VANISH_DISTANCE: f64 = 0.65;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid scenario: {0}")]
pub struct InvalidScenario(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: BehaviourKind,
    pub frames: u64,
    pub geometry: FrameGeometry,
    /// Per-object, per-frame drop probability in `[0, 1)`.
    pub dropout_rate: f64,
    /// Standard deviation of center noise, in normalized units.
    pub position_noise: f64,
    pub seed: u64,
    /// Last frame the cricket is visible (hunting only); defaults to 60% of the clip.
    pub vanish_frame: Option<u64>,
    /// Horizontal dragon-to-cricket offset at the vanish frame, as a fraction of width.
    pub vanish_distance: f64,
}

impl Scenario {
    pub fn new(kind: BehaviourKind, frames: u64, seed: u64) -> Self {
        Self {
            kind,
            frames,
            geometry: FrameGeometry {
                width: 640,
                height: 480,
                fps: 30.0,
            },
            dropout_rate: 0.0,
            position_noise: 0.0,
            seed,
            vanish_frame: None,
            vanish_distance: 0.05,
        }
    }

    pub fn vanish(&self) -> u64 {
        self.vanish_frame.unwrap_or(self.frames * 3 / 5)
    }

    pub fn validate(&self) -> Result<(), InvalidScenario> {
        let bad = |m: String| Err(InvalidScenario(m));
        if self.frames < 1 || self.frames > MAX_FRAME_COUNT {
            return bad(format!(
                "frames {} not in [1, {MAX_FRAME_COUNT}]",
                self.frames
            ));
        }
        if FrameGeometry::new(self.geometry.width, self.geometry.height, self.geometry.fps).is_err()
        {
            return bad("invalid geometry".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout {} not in [0, 1)", self.dropout_rate));
        }
        if !(self.position_noise.is_finite() && self.position_noise >= 0.0) {
            return bad(format!(
                "noise {} must be finite and >= 0",
                self.position_noise
            ));
        }
        if self.kind == BehaviourKind::Hunting {
            if self.vanish() >= self.frames {
                return bad(format!(
                    "vanish frame {} beyond clip of {} frames",
                    self.vanish(),
                    self.frames
                ));
            }
            if !(0.0..=MAX_VANISH_DISTANCE).contains(&self.vanish_distance) {
                return bad(format!(
                    "vanish distance {} not in [0, {MAX_VANISH_DISTANCE}]",
                    self.vanish_distance
                ));
            }
        }
        Ok(())
    }

    fn dragon(&self) -> Prop {
        match self.kind {
            BehaviourKind::Basking => DRAGON_BASKING,
            BehaviourKind::Idle => DRAGON_IDLE,
            BehaviourKind::Hunting => DRAGON_HUNTING,
        }
    }

    /// Cricket position at `frame`, or `None` once it has vanished.
    fn cricket(&self, frame: u64) -> Option<Prop> {
        if self.kind != BehaviourKind::Hunting || frame > self.vanish() {
            return None;
        }
        let end_x = DRAGON_HUNTING.cx + self.vanish_distance;
        let end_y = DRAGON_HUNTING.cy;
        let v = self.vanish();
        let s = if v == 0 { 1.0 } else { frame as f64 / v as f64 };
        Some(Prop {
            cx: CRICKET_START.cx + (end_x - CRICKET_START.cx) * s,
            cy: CRICKET_START.cy + (end_y - CRICKET_START.cy) * s,
            ..CRICKET_START
        })
    }

    /// Vertical separation and angle of the noiseless script, in pixels and degrees.
    pub fn script_separation(&self) -> (f64, f64) {
        let dragon = self.dragon();
        let (w, h) = (
            f64::from(self.geometry.width),
            f64::from(self.geometry.height),
        );
        let delta_y = (dragon.cy - LAMP.cy) * h;
        let theta = ((dragon.cx - LAMP.cx).abs() * w / delta_y)
            .atan()
            .to_degrees();
        (delta_y, theta)
    }
}

/// Ground truth derived from the noiseless, dropout-free script.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedOutcome {
    pub scenario: Scenario,
    pub config: RunConfig,
    pub episodes: Vec<Episode>,
    pub hunting_events: Vec<u64>,
    pub activity: Vec<ActivityReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub log: String,
    pub expected: ExpectedOutcome,
}

struct UnitStream(ChaCha8Rng);

impl UnitStream {
    fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

fn emit(prop: &Prop, zx: f64, zy: f64, noise: f64, frame: u64, class: ClassLabel) -> Detection {
    let bbox = BBox {
        cx: (prop.cx + noise * zx).clamp(0.0, 1.0),
        cy: (prop.cy + noise * zy).clamp(0.0, 1.0),
        w: prop.w,
        h: prop.h,
    };
    Detection::observed(frame, class, bbox, prop.confidence)
}

/// Generates the detection log and expected outcome for `scenario`.
/// `cfg` supplies the thresholds used to derive the expected outcome; its
/// geometry is replaced by the scenario's.
pub fn generate(scenario: &Scenario, cfg: &RunConfig) -> Result<Generated, InvalidScenario> {
    scenario.validate()?;
    let cfg = RunConfig {
        geometry: scenario.geometry,
        ..*cfg
    };
    let mut rng = UnitStream(ChaCha8Rng::seed_from_u64(scenario.seed));
    let last = scenario.frames - 1;
    let dragon = scenario.dragon();
    let mut detections = Vec::new();

    for frame in 0..scenario.frames {
        let slots = [
            (ClassLabel::HeatingLamp, Some(LAMP), last),
            (ClassLabel::BeardedDragon, Some(dragon), last),
            (
                ClassLabel::Cricket,
                scenario.cricket(frame),
                scenario.vanish(),
            ),
        ];
        for (class, prop, span_end) in slots {
            let u_drop = rng.uniform();
            let u1 = rng.uniform();
            let u2 = rng.uniform();
            let Some(prop) = prop else { continue };
            let endpoint = frame == 0 || frame == span_end;
            if !endpoint && u_drop < scenario.dropout_rate {
                continue;
            }
            let r = (-2.0 * (1.0 - u1).ln()).sqrt();
            let angle = std::f64::consts::TAU * u2;
            detections.push(emit(
                &prop,
                r * angle.cos(),
                r * angle.sin(),
                scenario.position_noise,
                frame,
                class,
            ));
        }
    }

    let timeline = Timeline::new(scenario.geometry, scenario.frames, detections);
    let mut log = format!(
        "# synthetic {} clip, seed {}, dropout {}, noise {}\n",
        scenario.kind, scenario.seed, scenario.dropout_rate, scenario.position_noise
    )
    .into_bytes();
    write_detection_log(&timeline, &mut log).expect("writing to a Vec cannot fail");
    let log = String::from_utf8(log).expect("log is ASCII");

    Ok(Generated {
        log,
        expected: expected_outcome(scenario, &cfg),
    })
}

fn expected_outcome(scenario: &Scenario, cfg: &RunConfig) -> ExpectedOutcome {
    let n = scenario.frames;
    let fps = scenario.geometry.fps;
    let (delta_y, theta) = scenario.script_separation();
    let height = f64::from(scenario.geometry.height);

    let mut hunting_events = Vec::new();
    let mut spans: Vec<(BehaviourKind, u64, u64)> = Vec::new();
    match scenario.kind {
        BehaviourKind::Basking | BehaviourKind::Idle => {
            let rule_holds = delta_y > 0.0 && delta_y <= cfg.beta * height && theta < cfg.theta_max;
            let kind = if rule_holds && n >= cfg.min_episode {
                BehaviourKind::Basking
            } else {
                BehaviourKind::Idle
            };
            spans.push((kind, 0, n - 1));
        }
        BehaviourKind::Hunting => {
            let v = scenario.vanish();
            let fires = scenario.vanish_distance < cfg.gamma && v + cfg.disappearance_window < n;
            if fires {
                hunting_events.push(v);
                if v > 0 {
                    spans.push((BehaviourKind::Idle, 0, v - 1));
                }
                spans.push((BehaviourKind::Hunting, v, v));
                if v + 1 < n {
                    spans.push((BehaviourKind::Idle, v + 1, n - 1));
                }
            } else {
                spans.push((BehaviourKind::Idle, 0, n - 1));
            }
        }
    }

    let episodes: Vec<Episode> = spans
        .iter()
        .map(|&(behaviour, start_frame, end_frame)| Episode {
            behaviour,
            start_frame,
            end_frame,
            duration: (end_frame - start_frame + 1) as f64 / fps,
        })
        .collect();

    let activity = BehaviourKind::TABLE_ORDER
        .iter()
        .map(|&kind| {
            let frames: u64 = spans
                .iter()
                .filter(|s| s.0 == kind)
                .map(|s| s.2 - s.1 + 1)
                .sum();
            let longest_run = spans
                .iter()
                .filter(|s| s.0 == kind)
                .map(|s| s.2 - s.1 + 1)
                .max()
                .unwrap_or(0);
            ActivityReport {
                behaviour: kind,
                coverage: 100.0 * frames as f64 / n as f64,
                mean_vertical_diff: (frames > 0).then_some(delta_y),
                jitter: (longest_run >= 2).then_some(0.0),
                drift_slope: (frames >= 2).then_some(0.0),
                frames_used: frames,
            }
        })
        .collect();

    ExpectedOutcome {
        scenario: *scenario,
        config: *cfg,
        episodes,
        hunting_events,
        activity,
    }
}
