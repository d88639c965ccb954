//! Per-class track construction and temporal gap filling.
//!
//! The dragon and the lamp are assumed unique per clip and get one
//! canonical track each. Crickets can be several at once, so their
//! detections are chained into tracks by greedy nearest-neighbour
//! association.

use std::collections::BTreeMap;

use crate::model::{BBox, ClassLabel, Detection, FrameGeometry, Provenance, Timeline};

/// Time-ordered detections of one object, at most one per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub class: ClassLabel,
    entries: BTreeMap<u64, Detection>,
}

impl Track {
    pub fn new(class: ClassLabel) -> Self {
        Self {
            class,
            entries: BTreeMap::new(),
        }
    }

    /// Inserts a detection, replacing any entry already at that frame.
    pub fn insert(&mut self, det: Detection) {
        self.entries.insert(det.frame, det);
    }

    pub fn get(&self, frame: u64) -> Option<&Detection> {
        self.entries.get(&frame)
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &Detection> + '_ {
        self.entries.values()
    }

    pub fn observed(&self) -> impl DoubleEndedIterator<Item = &Detection> + '_ {
        self.iter().filter(|d| d.provenance == Provenance::Observed)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn first_frame(&self) -> Option<u64> {
        self.entries.keys().next().copied()
    }

    pub fn last_frame(&self) -> Option<u64> {
        self.entries.keys().next_back().copied()
    }

    pub fn last_observed(&self) -> Option<&Detection> {
        self.observed().next_back()
    }

    /// Entry closest in time to `frame` within `radius` frames; the earlier
    /// frame wins a tie.
    pub fn nearest(&self, frame: u64, radius: u64) -> Option<&Detection> {
        let lo = frame.saturating_sub(radius);
        let hi = frame.saturating_add(radius);
        self.entries
            .range(lo..=hi)
            .map(|(_, d)| d)
            .min_by_key(|d| (d.frame.abs_diff(frame), d.frame))
    }

    /// Fraction of frames between the first and last entry that hold a
    /// detection. `None` for an empty track.
    pub fn continuity(&self) -> Option<f64> {
        let (first, last) = (self.first_frame()?, self.last_frame()?);
        Some(self.len() as f64 / (last - first + 1) as f64)
    }
}

fn better(candidate: &Detection, current: &Detection) -> bool {
    // Equal confidence and equal area keep the earlier (current) one.
    candidate.confidence > current.confidence
        || (candidate.confidence == current.confidence
            && candidate.bbox.area() > current.bbox.area())
}

fn canonical_track(timeline: &Timeline, class: ClassLabel) -> Track {
    let mut track = Track::new(class);
    for det in timeline.of_class(class) {
        match track.entries.get(&det.frame) {
            Some(current) if !better(det, current) => {}
            _ => track.insert(*det),
        }
    }
    track
}

/// Keeps one detection per frame for the dragon and the lamp: highest
/// confidence, then larger box, then earlier in the input.
/// Returns `(dragon, lamp)`.
pub fn reduce_per_frame(timeline: &Timeline) -> (Track, Track) {
    (
        canonical_track(timeline, ClassLabel::BeardedDragon),
        canonical_track(timeline, ClassLabel::HeatingLamp),
    )
}

/// Chains cricket detections into tracks.
///
/// A detection may extend a track whose last entry is `elapsed` frames
/// earlier when `elapsed - 1 <= max_gap` and the pixel distance between
/// centers is at most `gate * W * elapsed`. Within a frame, candidate pairs
/// are assigned in ascending distance order; leftovers start new tracks.
pub fn associate_crickets(
    timeline: &Timeline,
    geom: &FrameGeometry,
    gate: f64,
    max_gap: u64,
) -> Vec<Track> {
    let width = f64::from(geom.width);
    let mut tracks: Vec<Track> = Vec::new();
    // Indices of tracks that may still be extended.
    let mut active: Vec<usize> = Vec::new();

    let crickets: Vec<&Detection> = timeline.of_class(ClassLabel::Cricket).collect();
    for frame_dets in crickets.chunk_by(|a, b| a.frame == b.frame) {
        let frame = frame_dets[0].frame;
        active.retain(|&i| {
            let last = tracks[i].last_frame().expect("tracks are never empty");
            frame - last - 1 <= max_gap
        });

        let mut pairs = Vec::new();
        for &ti in &active {
            let last = tracks[ti]
                .iter()
                .next_back()
                .expect("tracks are never empty");
            let elapsed = (frame - last.frame) as f64;
            let from = last.bbox.to_pixels(geom);
            for (di, det) in frame_dets.iter().enumerate() {
                let dist = from.center_distance(&det.bbox.to_pixels(geom));
                if dist <= gate * width * elapsed {
                    pairs.push((dist, ti, di));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut det_taken = vec![false; frame_dets.len()];
        let mut track_taken: Vec<usize> = Vec::new();
        for (_, ti, di) in pairs {
            if det_taken[di] || track_taken.contains(&ti) {
                continue;
            }
            det_taken[di] = true;
            track_taken.push(ti);
            tracks[ti].insert(*frame_dets[di]);
        }
        for (di, det) in frame_dets.iter().enumerate() {
            if !det_taken[di] {
                let mut t = Track::new(ClassLabel::Cricket);
                t.insert(**det);
                active.push(tracks.len());
                tracks.push(t);
            }
        }
    }
    tracks
}

fn lerp(a: f64, b: f64, s: f64) -> f64 {
    a + (b - a) * s
}

/// Fills holes of at most `max_gap` frames between consecutive observed
/// detections by linear blending of the two neighbours. Interpolated
/// confidence is the smaller endpoint confidence. Nothing is added before
/// the first or after the last observation.
pub fn fill_gaps(track: &Track, max_gap: u64) -> Track {
    let mut out = track.clone();
    let observed: Vec<&Detection> = track.observed().collect();
    for pair in observed.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let span = b.frame - a.frame;
        if span < 2 || span - 1 > max_gap {
            continue;
        }
        for t in a.frame + 1..b.frame {
            if out.entries.contains_key(&t) {
                continue;
            }
            let s = (t - a.frame) as f64 / span as f64;
            let bbox = BBox {
                cx: lerp(a.bbox.cx, b.bbox.cx, s),
                cy: lerp(a.bbox.cy, b.bbox.cy, s),
                w: lerp(a.bbox.w, b.bbox.w, s),
                h: lerp(a.bbox.h, b.bbox.h, s),
            };
            out.insert(Detection {
                frame: t,
                class: track.class,
                bbox,
                confidence: a.confidence.min(b.confidence),
                provenance: Provenance::Interpolated,
            });
        }
    }
    out
}
