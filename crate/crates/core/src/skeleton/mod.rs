//! Multi-modal skeleton data model, its text format, and preprocessing.
//!
//! A [`SkeletonSequence`] holds one actor performing one action: per frame,
//! 25 body joints in sensor space, 68 face landmarks and 2×21 hand joints in
//! image space, and optionally 25 per-body-joint flow vectors.

mod format;
mod preprocess;

pub use format::{parse_sequence, serialize_sequence};
pub use preprocess::{
    body_spread, compute_bones, denoise_bodies, flow_or_proxy, proxy_flow, resample_temporal,
    BoneSet, FlowField, MIN_FRAMES, SPREAD_RATIO,
};

pub const BODY_JOINTS: usize = 25;
pub const FACE_LANDMARKS: usize = 68;
pub const HAND_JOINTS: usize = 21;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SkeletonError {
    #[error("empty input")]
    EmptyInput,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {modality}: expected {expected}, got {got}")]
    Format {
        line: usize,
        modality: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("multi-actor records are not supported (actors={0})")]
    MultiActor(usize),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("topology: {0}")]
    Topology(String),
}

/// Sensor-space joint with detection confidence.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Joint3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub confidence: f64,
}

impl Joint3 {
    pub fn new(x: f64, y: f64, z: f64, confidence: f64) -> Self {
        Joint3 { x, y, z, confidence }
    }
}

/// Image-plane keypoint with detection confidence.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Joint2 {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

impl Joint2 {
    pub fn new(x: f64, y: f64, confidence: f64) -> Self {
        Joint2 { x, y, confidence }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointFrame {
    pub timestamp_index: usize,
    pub body: Vec<Joint3>,
    pub face: Vec<Joint2>,
    pub hand_left: Vec<Joint2>,
    pub hand_right: Vec<Joint2>,
    /// Per-body-joint (fx, fy), when precomputed upstream.
    pub flow: Option<Vec<[f64; 2]>>,
}

impl JointFrame {
    /// A frame with every joint missing (zero coordinates, zero confidence).
    pub fn empty(timestamp_index: usize) -> Self {
        JointFrame {
            timestamp_index,
            body: vec![Joint3::default(); BODY_JOINTS],
            face: vec![Joint2::default(); FACE_LANDMARKS],
            hand_left: vec![Joint2::default(); HAND_JOINTS],
            hand_right: vec![Joint2::default(); HAND_JOINTS],
            flow: None,
        }
    }

    /// Checks list lengths and confidence rules; `line` is used for error reporting.
    pub fn validate(&self, line: usize) -> Result<(), SkeletonError> {
        let lens = [
            ("body", self.body.len(), BODY_JOINTS),
            ("face", self.face.len(), FACE_LANDMARKS),
            ("hand_left", self.hand_left.len(), HAND_JOINTS),
            ("hand_right", self.hand_right.len(), HAND_JOINTS),
        ];
        for (modality, got, expected) in lens {
            if got != expected {
                return Err(SkeletonError::Format {
                    line,
                    modality,
                    expected,
                    got,
                });
            }
        }
        if let Some(flow) = &self.flow {
            if flow.len() != BODY_JOINTS {
                return Err(SkeletonError::Format {
                    line,
                    modality: "flow",
                    expected: BODY_JOINTS,
                    got: flow.len(),
                });
            }
            if flow.iter().flatten().any(|v| !v.is_finite()) {
                return Err(parse_err(line, "flow: non-finite value"));
            }
        }
        for j in &self.body {
            check_joint(line, "body", &[j.x, j.y, j.z], j.confidence)?;
        }
        for (name, list) in [
            ("face", &self.face),
            ("hand_left", &self.hand_left),
            ("hand_right", &self.hand_right),
        ] {
            for j in list {
                check_joint(line, name, &[j.x, j.y], j.confidence)?;
            }
        }
        Ok(())
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> SkeletonError {
    SkeletonError::Parse {
        line,
        message: message.into(),
    }
}

fn check_joint(line: usize, name: &str, coords: &[f64], conf: f64) -> Result<(), SkeletonError> {
    if !(0.0..=1.0).contains(&conf) {
        return Err(parse_err(line, format!("{name}: confidence {conf} outside [0,1]")));
    }
    if coords.iter().any(|c| !c.is_finite()) {
        return Err(parse_err(line, format!("{name}: non-finite coordinate")));
    }
    if conf == 0.0 && coords.iter().any(|&c| c != 0.0) {
        return Err(parse_err(
            line,
            format!("{name}: missing joint (confidence 0) must have zero coordinates"),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    pub frames: Vec<JointFrame>,
    pub label: String,
    pub subject_id: u32,
    pub camera_id: u32,
    /// Frame count before any resampling.
    pub source_length: usize,
}

impl SkeletonSequence {
    pub fn new(label: impl Into<String>, subject_id: u32, camera_id: u32, frames: Vec<JointFrame>) -> Self {
        let source_length = frames.len();
        SkeletonSequence {
            frames,
            label: label.into(),
            subject_id,
            camera_id,
            source_length,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn has_flow(&self) -> bool {
        !self.frames.is_empty() && self.frames.iter().all(|f| f.flow.is_some())
    }

    /// Validates every frame and the strict timestamp ordering.
    pub fn validate(&self) -> Result<(), SkeletonError> {
        for (i, f) in self.frames.iter().enumerate() {
            f.validate(i + 2)?;
        }
        for (i, w) in self.frames.windows(2).enumerate() {
            if w[1].timestamp_index <= w[0].timestamp_index {
                return Err(parse_err(i + 3, "timestamps must be strictly increasing"));
            }
        }
        Ok(())
    }
}
