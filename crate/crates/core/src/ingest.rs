//! Readers for detection logs, ground-truth label files and run
//! configuration, plus the detection-log writer.
//!
//! Detection log layout:
//!
//! ```text
//! # comment
//! !geometry <W> <H> <FPS> <FRAME_COUNT>
//! <frame> <class> <cx> <cy> <w> <h> <conf>
//! ```
//!
//! Ground-truth labels are `<class> <cx> <cy> <w> <h>` lines, either one
//! file per frame (`<stem>_<frame>.txt`) or a single stream split by
//! `!frame <n>` directives.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::model::{BBox, BoxError, ClassLabel, Detection, FrameGeometry, Timeline};

/// Upper bound on the declared clip length; per-frame buffers are sized from it.
pub const MAX_FRAME_COUNT: u64 = 50_000_000;

#[derive(Debug, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("malformed line: {0}")]
    MalformedLine(String),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("unknown class id {0}")]
    UnknownClass(String),
    #[error("data line before `!geometry` header")]
    MissingGeometry,
    #[error("line is not valid UTF-8")]
    InvalidUtf8,
    #[error("read failed: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, thiserror::Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    fn new(line: usize, kind: ParseErrorKind) -> Self {
        Self { line, kind }
    }
}

type Result<T> = std::result::Result<T, ParseError>;

/// Iterates over the significant lines of a stream: comments stripped,
/// surrounding whitespace trimmed, blank lines skipped.
struct Lines<R> {
    reader: R,
    buf: Vec<u8>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn new(reader: R) -> Self {
        Self {
            reader,
            buf: Vec::new(),
            line: 0,
        }
    }

    fn next_line(&mut self) -> Option<Result<(usize, String)>> {
        loop {
            self.buf.clear();
            match self.reader.read_until(b'\n', &mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(ParseError::new(self.line + 1, e.into()))),
            }
            self.line += 1;
            let text = match std::str::from_utf8(&self.buf) {
                Ok(t) => t,
                Err(_) => {
                    return Some(Err(ParseError::new(self.line, ParseErrorKind::InvalidUtf8)))
                }
            };
            let text = match text.find('#') {
                Some(i) => &text[..i],
                None => text,
            };
            let text = text.trim();
            if !text.is_empty() {
                return Some(Ok((self.line, text.to_owned())));
            }
        }
    }
}

fn malformed(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::new(line, ParseErrorKind::MalformedLine(msg.into()))
}

fn out_of_range(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::new(line, ParseErrorKind::OutOfRange(msg.into()))
}

fn parse_uint(line: usize, field: &str, name: &str) -> Result<u64> {
    field.parse::<u64>().map_err(|_| {
        malformed(
            line,
            format!("{name} `{field}` is not a non-negative integer"),
        )
    })
}

fn parse_float(line: usize, field: &str, name: &str) -> Result<f64> {
    let v = field
        .parse::<f64>()
        .map_err(|_| malformed(line, format!("{name} `{field}` is not a number")))?;
    if !v.is_finite() {
        return Err(out_of_range(
            line,
            format!("{name} `{field}` is not finite"),
        ));
    }
    Ok(v)
}

fn parse_class(line: usize, field: &str) -> Result<ClassLabel> {
    let code = field
        .parse::<i64>()
        .map_err(|_| malformed(line, format!("class `{field}` is not an integer")))?;
    ClassLabel::from_code(code)
        .ok_or_else(|| ParseError::new(line, ParseErrorKind::UnknownClass(field.to_owned())))
}

fn parse_box(line: usize, fields: &[&str]) -> Result<BBox> {
    let cx = parse_float(line, fields[0], "cx")?;
    let cy = parse_float(line, fields[1], "cy")?;
    let w = parse_float(line, fields[2], "w")?;
    let h = parse_float(line, fields[3], "h")?;
    BBox::new(cx, cy, w, h).map_err(|e: BoxError| out_of_range(line, e.to_string()))
}

fn parse_confidence(line: usize, field: &str) -> Result<f64> {
    let c = parse_float(line, field, "confidence")?;
    if !(0.0..=1.0).contains(&c) {
        return Err(out_of_range(line, format!("confidence {c} outside [0, 1]")));
    }
    Ok(c)
}

fn parse_geometry_directive(line: usize, args: &[&str]) -> Result<(FrameGeometry, u64)> {
    if args.len() != 4 {
        return Err(malformed(
            line,
            "`!geometry` expects <W> <H> <FPS> <FRAME_COUNT>",
        ));
    }
    let w = parse_uint(line, args[0], "width")?;
    let h = parse_uint(line, args[1], "height")?;
    let fps = parse_float(line, args[2], "fps")?;
    let frames = parse_uint(line, args[3], "frame count")?;
    let w = u32::try_from(w).map_err(|_| out_of_range(line, "width too large"))?;
    let h = u32::try_from(h).map_err(|_| out_of_range(line, "height too large"))?;
    let geom = FrameGeometry::new(w, h, fps).map_err(|e| out_of_range(line, e.to_string()))?;
    if frames > MAX_FRAME_COUNT {
        return Err(out_of_range(
            line,
            format!("frame count {frames} exceeds {MAX_FRAME_COUNT}"),
        ));
    }
    Ok((geom, frames))
}

/// Parses a detection log into a [`Timeline`] of observed detections.
pub fn parse_detection_log<R: BufRead>(reader: R) -> Result<Timeline> {
    let mut lines = Lines::new(reader);
    let mut header: Option<(FrameGeometry, u64)> = None;
    let mut detections = Vec::new();

    while let Some(next) = lines.next_line() {
        let (no, text) = next?;
        let fields: Vec<&str> = text.split_whitespace().collect();
        if let Some(directive) = fields[0].strip_prefix('!') {
            match directive {
                "geometry" if header.is_none() => {
                    header = Some(parse_geometry_directive(no, &fields[1..])?);
                }
                "geometry" => return Err(malformed(no, "duplicate `!geometry` header")),
                other => return Err(malformed(no, format!("unknown directive `!{other}`"))),
            }
            continue;
        }
        let Some((_, frame_count)) = header else {
            return Err(ParseError::new(no, ParseErrorKind::MissingGeometry));
        };
        if fields.len() != 7 {
            return Err(malformed(
                no,
                format!("expected 7 fields, found {}", fields.len()),
            ));
        }
        let frame = parse_uint(no, fields[0], "frame")?;
        let class = parse_class(no, fields[1])?;
        let bbox = parse_box(no, &fields[2..6])?;
        let confidence = parse_confidence(no, fields[6])?;
        if frame >= frame_count {
            return Err(out_of_range(
                no,
                format!("frame {frame} >= frame count {frame_count}"),
            ));
        }
        detections.push(Detection::observed(frame, class, bbox, confidence));
    }

    let (geometry, frame_count) = header
        .ok_or_else(|| ParseError::new(lines.line.max(1), ParseErrorKind::MissingGeometry))?;
    Ok(Timeline::new(geometry, frame_count, detections))
}

pub fn parse_detection_log_str(text: &str) -> Result<Timeline> {
    parse_detection_log(text.as_bytes())
}

/// Writes a timeline in detection-log format. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_detection_log<W: Write>(timeline: &Timeline, mut out: W) -> io::Result<()> {
    let g = &timeline.geometry;
    writeln!(
        out,
        "!geometry {} {} {} {}",
        g.width, g.height, g.fps, timeline.frame_count
    )?;
    for d in timeline.detections() {
        writeln!(
            out,
            "{} {} {} {} {} {} {}",
            d.frame,
            d.class.code(),
            d.bbox.cx,
            d.bbox.cy,
            d.bbox.w,
            d.bbox.h,
            d.confidence
        )?;
    }
    Ok(())
}

/// One label line from a per-frame file: a ground-truth box, or a
/// prediction when the file carries a confidence column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Label {
    pub class: ClassLabel,
    pub bbox: BBox,
    pub confidence: f64,
}

/// Parses one per-frame label file. Ground truth has five columns; with
/// `with_confidence` a sixth confidence column is required.
pub fn parse_label_file<R: BufRead>(reader: R, with_confidence: bool) -> Result<Vec<Label>> {
    let expected = if with_confidence { 6 } else { 5 };
    let mut lines = Lines::new(reader);
    let mut labels = Vec::new();
    while let Some(next) = lines.next_line() {
        let (no, text) = next?;
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields[0].starts_with('!') {
            return Err(malformed(
                no,
                "directives are not allowed in per-frame label files",
            ));
        }
        labels.push(parse_label_fields(no, &fields, expected)?);
    }
    Ok(labels)
}

fn parse_label_fields(no: usize, fields: &[&str], expected: usize) -> Result<Label> {
    if fields.len() != expected {
        return Err(malformed(
            no,
            format!("expected {expected} fields, found {}", fields.len()),
        ));
    }
    let class = parse_class(no, fields[0])?;
    let bbox = parse_box(no, &fields[1..5])?;
    let confidence = if expected == 6 {
        parse_confidence(no, fields[5])?
    } else {
        1.0
    };
    Ok(Label {
        class,
        bbox,
        confidence,
    })
}

/// Parses a combined ground-truth stream. Boxes before the first
/// `!frame <n>` belong to frame 0. An optional `!geometry` header sets the
/// geometry and clip length; otherwise the geometry is [`FrameGeometry::UNIT`]
/// and the clip ends after the last frame mentioned.
pub fn parse_ground_truth<R: BufRead>(reader: R) -> Result<Timeline> {
    let mut lines = Lines::new(reader);
    let mut header: Option<(FrameGeometry, u64)> = None;
    let mut frame = 0u64;
    let mut last_frame = None::<u64>;
    let mut detections = Vec::new();

    while let Some(next) = lines.next_line() {
        let (no, text) = next?;
        let fields: Vec<&str> = text.split_whitespace().collect();
        if let Some(directive) = fields[0].strip_prefix('!') {
            match directive {
                "geometry" if header.is_none() && last_frame.is_none() => {
                    header = Some(parse_geometry_directive(no, &fields[1..])?);
                }
                "geometry" => {
                    return Err(malformed(no, "`!geometry` must come first and only once"))
                }
                "frame" => {
                    if fields.len() != 2 {
                        return Err(malformed(no, "`!frame` expects one frame index"));
                    }
                    frame = parse_uint(no, fields[1], "frame")?;
                    check_frame(no, frame, header)?;
                    last_frame = Some(last_frame.map_or(frame, |f| f.max(frame)));
                }
                other => return Err(malformed(no, format!("unknown directive `!{other}`"))),
            }
            continue;
        }
        let label = parse_label_fields(no, &fields, 5)?;
        check_frame(no, frame, header)?;
        last_frame = Some(last_frame.map_or(frame, |f| f.max(frame)));
        detections.push(Detection::observed(frame, label.class, label.bbox, 1.0));
    }

    let (geometry, frame_count) = match header {
        Some(h) => h,
        None => (FrameGeometry::UNIT, last_frame.map_or(0, |f| f + 1)),
    };
    Ok(Timeline::new(geometry, frame_count, detections))
}

fn check_frame(no: usize, frame: u64, header: Option<(FrameGeometry, u64)>) -> Result<()> {
    let limit = header.map_or(MAX_FRAME_COUNT, |(_, n)| n);
    if frame >= limit {
        return Err(out_of_range(
            no,
            format!("frame {frame} >= frame count {limit}"),
        ));
    }
    Ok(())
}

/// Extracts the frame index from a `<stem>_<frame>.txt` file name.
pub fn frame_from_file_name(name: &str) -> Option<u64> {
    let stem = name.strip_suffix(".txt")?;
    let (_, digits) = stem.rsplit_once('_')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Builds a ground-truth timeline from per-frame label files.
pub fn ground_truth_from_frames<I>(frames: I) -> Timeline
where
    I: IntoIterator<Item = (u64, Vec<Label>)>,
{
    let mut detections = Vec::new();
    let mut frame_count = 0;
    for (frame, labels) in frames {
        frame_count = frame_count.max(frame + 1);
        detections.extend(
            labels
                .into_iter()
                .map(|l| Detection::observed(frame, l.class, l.bbox, 1.0)),
        );
    }
    Timeline::new(FrameGeometry::UNIT, frame_count, detections)
}

/// Thresholds and clip geometry for one analysis run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Maximum lamp-to-dragon vertical separation, as a fraction of frame height.
    pub beta: f64,
    /// Maximum off-vertical angle in degrees (exclusive).
    pub theta_max: f64,
    /// Maximum dragon-to-cricket distance at disappearance, as a fraction of frame width.
    pub gamma: f64,
    /// Longest run of missing frames that interpolation will bridge.
    pub max_gap: u64,
    /// Frames a cricket must stay unseen before its disappearance counts.
    pub disappearance_window: u64,
    /// Shortest basking run kept as an episode.
    pub min_episode: u64,
    /// Cricket association gate, as a fraction of frame width per elapsed frame.
    pub cricket_gate: f64,
    pub geometry: FrameGeometry,
}

impl RunConfig {
    pub const DEFAULT_BETA: f64 = 0.33;
    pub const DEFAULT_THETA_MAX: f64 = 45.0;
    pub const DEFAULT_GAMMA: f64 = 0.25;
    pub const DEFAULT_MAX_GAP: u64 = 15;
    pub const DEFAULT_DISAPPEARANCE_WINDOW: u64 = 15;
    pub const DEFAULT_MIN_EPISODE: u64 = 3;
    pub const DEFAULT_CRICKET_GATE: f64 = 0.05;

    pub fn with_geometry(geometry: FrameGeometry) -> Self {
        Self {
            beta: Self::DEFAULT_BETA,
            theta_max: Self::DEFAULT_THETA_MAX,
            gamma: Self::DEFAULT_GAMMA,
            max_gap: Self::DEFAULT_MAX_GAP,
            disappearance_window: Self::DEFAULT_DISAPPEARANCE_WINDOW,
            min_episode: Self::DEFAULT_MIN_EPISODE,
            cricket_gate: Self::DEFAULT_CRICKET_GATE,
            geometry,
        }
    }

    /// Checks every field invariant, naming the first offending key.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(self.beta) {
            return Err(("beta", format!("{} not in (0, 1]", self.beta)));
        }
        if !(self.theta_max > 0.0 && self.theta_max <= 90.0) {
            return Err(("theta_max", format!("{} not in (0, 90]", self.theta_max)));
        }
        if !unit(self.gamma) {
            return Err(("gamma", format!("{} not in (0, 1]", self.gamma)));
        }
        if self.disappearance_window < 1 {
            return Err(("disappearance_window", "must be >= 1".into()));
        }
        if self.min_episode < 1 {
            return Err(("min_episode", "must be >= 1".into()));
        }
        if !unit(self.cricket_gate) {
            return Err((
                "cricket_gate",
                format!("{} not in (0, 1]", self.cricket_gate),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Malformed { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: invalid value for `{key}`: {reason}")]
    InvalidValue {
        line: usize,
        key: String,
        reason: String,
    },
}

const CONFIG_KEYS: [&str; 7] = [
    "beta",
    "theta_max",
    "gamma",
    "max_gap",
    "disappearance_window",
    "min_episode",
    "cricket_gate",
];

/// Parses a `key = value` configuration. Absent keys take their defaults.
/// Line 0 in an [`ConfigError::InvalidValue`] means the combination of values
/// failed validation rather than a single line.
pub fn parse_config(
    text: &str,
    geometry: FrameGeometry,
) -> std::result::Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::with_geometry(geometry);
    let mut seen: Vec<(&str, usize)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or(ConfigError::Malformed { line })?;
        let (key, value) = (key.trim(), value.trim());
        let Some(&canonical) = CONFIG_KEYS.iter().find(|k| **k == key) else {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_owned(),
            });
        };
        if seen.iter().any(|(k, _)| *k == canonical) {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.to_owned(),
            });
        }
        seen.push((canonical, line));

        let invalid = |reason: String| ConfigError::InvalidValue {
            line,
            key: key.to_owned(),
            reason,
        };
        let float = || -> std::result::Result<f64, ConfigError> {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| invalid(format!("`{value}` is not a finite number")))
        };
        let uint = || -> std::result::Result<u64, ConfigError> {
            value
                .parse::<u64>()
                .map_err(|_| invalid(format!("`{value}` is not a non-negative integer")))
        };
        match canonical {
            "beta" => cfg.beta = float()?,
            "theta_max" => cfg.theta_max = float()?,
            "gamma" => cfg.gamma = float()?,
            "max_gap" => cfg.max_gap = uint()?,
            "disappearance_window" => cfg.disappearance_window = uint()?,
            "min_episode" => cfg.min_episode = uint()?,
            "cricket_gate" => cfg.cricket_gate = float()?,
            _ => unreachable!(),
        }
    }

    cfg.validate()
        .map_err(|(key, reason)| ConfigError::InvalidValue {
            line: seen.iter().find(|(k, _)| *k == key).map_or(0, |(_, l)| *l),
            key: key.to_owned(),
            reason,
        })?;
    Ok(cfg)
}
