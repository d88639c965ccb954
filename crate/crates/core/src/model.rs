//! Domain types shared by every stage of the pipeline.
//!
//! Boxes are stored normalized (YOLO convention: center and extent as
//! fractions of the frame) and converted to pixels only where behaviour
//! rules need absolute distances. Image rows grow downward.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Object classes emitted by the detector. The integer codes are part of
/// every file format and must not change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    BeardedDragon = 0,
    HeatingLamp = 1,
    Cricket = 2,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 3] = [
        ClassLabel::BeardedDragon,
        ClassLabel::HeatingLamp,
        ClassLabel::Cricket,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            0 => Some(ClassLabel::BeardedDragon),
            1 => Some(ClassLabel::HeatingLamp),
            2 => Some(ClassLabel::Cricket),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::BeardedDragon => "BeardedDragon",
            ClassLabel::HeatingLamp => "HeatingLamp",
            ClassLabel::Cricket => "Cricket",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoxError {
    #[error("center ({cx}, {cy}) outside [0, 1]")]
    CenterOutOfRange { cx: f64, cy: f64 },
    #[error("extent ({w}, {h}) outside (0, 1]")]
    ExtentOutOfRange { w: f64, h: f64 },
}

/// Axis-aligned box in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, BoxError> {
        let unit = 0.0..=1.0;
        if !unit.contains(&cx) || !unit.contains(&cy) {
            return Err(BoxError::CenterOutOfRange { cx, cy });
        }
        if !(w > 0.0 && w <= 1.0 && h > 0.0 && h <= 1.0) {
            return Err(BoxError::ExtentOutOfRange { w, h });
        }
        // With the center inside the unit square and a positive extent the
        // box always overlaps it; the check stays explicit for clarity.
        debug_assert!(cx - w / 2.0 < 1.0 && cx + w / 2.0 > 0.0);
        Ok(Self { cx, cy, w, h })
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn to_pixels(&self, geom: &FrameGeometry) -> PixelBox {
        to_pixels(self, geom)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid frame geometry {width}x{height} @ {fps} fps")]
pub struct GeometryError {
    pub width: u32,
    pub height: u32,
    pub fps: f64,
}

/// Frame size in pixels plus frame rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameGeometry {
    pub width: u32,
    pub height: u32,
    pub fps: f64,
}

impl FrameGeometry {
    /// 1x1 geometry at 1 fps, used when only normalized coordinates matter.
    pub const UNIT: FrameGeometry = FrameGeometry {
        width: 1,
        height: 1,
        fps: 1.0,
    };

    pub fn new(width: u32, height: u32, fps: f64) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 || !(fps.is_finite() && fps > 0.0) {
            return Err(GeometryError { width, height, fps });
        }
        Ok(Self { width, height, fps })
    }

    pub fn seconds(&self, frame: u64) -> f64 {
        frame as f64 / self.fps
    }
}

/// Box in pixel space: center and extent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl PixelBox {
    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            cx: (x0 + x1) / 2.0,
            cy: (y0 + y1) / 2.0,
            w: x1 - x0,
            h: y1 - y0,
        }
    }

    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Inverse of [`to_pixels`]. Performs no range validation.
    pub fn to_normalized(&self, geom: &FrameGeometry) -> BBox {
        let (w, h) = (f64::from(geom.width), f64::from(geom.height));
        BBox {
            cx: self.cx / w,
            cy: self.cy / h,
            w: self.w / w,
            h: self.h / h,
        }
    }

    pub fn center_distance(&self, other: &PixelBox) -> f64 {
        (self.cx - other.cx).hypot(self.cy - other.cy)
    }
}

pub fn to_pixels(b: &BBox, geom: &FrameGeometry) -> PixelBox {
    let (w, h) = (f64::from(geom.width), f64::from(geom.height));
    PixelBox {
        cx: b.cx * w,
        cy: b.cy * h,
        w: b.w * w,
        h: b.h * h,
    }
}

/// Intersection over union of two axis-aligned boxes.
pub fn iou(a: &PixelBox, b: &PixelBox) -> f64 {
    let (ax0, ay0, ax1, ay1) = a.corners();
    let (bx0, by0, bx1, by1) = b.corners();
    let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = iw * ih;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Observed,
    Interpolated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame: u64,
    pub class: ClassLabel,
    pub bbox: BBox,
    pub confidence: f64,
    pub provenance: Provenance,
}

impl Detection {
    pub fn observed(frame: u64, class: ClassLabel, bbox: BBox, confidence: f64) -> Self {
        Self {
            frame,
            class,
            bbox,
            confidence,
            provenance: Provenance::Observed,
        }
    }
}

/// All detections of one clip, sorted by (frame, class, descending
/// confidence). Equal keys keep their input order.
#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub geometry: FrameGeometry,
    pub frame_count: u64,
    detections: Vec<Detection>,
}

impl Timeline {
    pub fn new(geometry: FrameGeometry, frame_count: u64, mut detections: Vec<Detection>) -> Self {
        detections.sort_by(|a, b| {
            a.frame
                .cmp(&b.frame)
                .then(a.class.cmp(&b.class))
                .then(b.confidence.total_cmp(&a.confidence))
        });
        Self {
            geometry,
            frame_count,
            detections,
        }
    }

    pub fn detections(&self) -> &[Detection] {
        &self.detections
    }

    pub fn of_class(&self, class: ClassLabel) -> impl Iterator<Item = &Detection> + '_ {
        self.detections.iter().filter(move |d| d.class == class)
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }
}
