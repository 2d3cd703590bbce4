//! Deep action stamps: each modality of a sequence laid out as a 3-channel
//! grid with time along the width and joints along the height, min–max
//! normalized to [0, 255] and resized to a square.

mod codec;
mod resize;

pub use codec::{export_png, import_png, read_raw, read_raw_file, write_raw, write_raw_file, RAW_MAGIC};
pub use resize::resize_bilinear;

use crate::graph::Topology;
use crate::modality::Modality;
use crate::skeleton::{compute_bones, flow_or_proxy, SkeletonError, SkeletonSequence};

pub const CHANNELS: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum StampError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("format: {0}")]
    Format(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
}

/// What happened while mapping values into [0, 255].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NormDiagnostics {
    pub c_min: f64,
    pub c_max: f64,
    /// `c_max == c_min`: all outputs were set to 0.
    pub degenerate: bool,
    /// Inputs outside [c_min, c_max] that were clamped.
    pub clamped: usize,
}

/// Where the (c_min, c_max) pair comes from.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum NormScope {
    /// Min and max over every channel of the modality in this sequence.
    #[default]
    PerSequence,
    Fixed { min: f64, max: f64 },
}

/// d = 255 (p − c_min) / (c_max − c_min), clamped to the bounds.
pub fn normalize_values(values: &[f64], c_min: f64, c_max: f64) -> Result<(Vec<f64>, NormDiagnostics), StampError> {
    if !(c_max >= c_min) {
        return Err(StampError::Argument(format!(
            "normalization bounds reversed: c_min {c_min} > c_max {c_max}"
        )));
    }
    let mut diag = NormDiagnostics {
        c_min,
        c_max,
        ..Default::default()
    };
    if c_max == c_min {
        diag.degenerate = true;
        return Ok((vec![0.0; values.len()], diag));
    }
    let span = c_max - c_min;
    let out = values
        .iter()
        .map(|&p| {
            let q = if p < c_min || p > c_max {
                diag.clamped += 1;
                p.clamp(c_min, c_max)
            } else {
                p
            };
            255.0 * ((q - c_min) / span)
        })
        .collect();
    Ok((out, diag))
}

/// Round half away from zero into 0..=255.
pub fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionStamp {
    pub modality: Modality,
    /// Temporal axis.
    pub width: usize,
    /// Joint (or bone) axis.
    pub height: usize,
    /// Unquantized values in [0, 255], laid out `[channel][row][col]`.
    pub values: Vec<f64>,
    /// Quantized copy of `values`, same layout.
    pub pixels: Vec<u8>,
    pub diagnostics: NormDiagnostics,
}

impl ActionStamp {
    pub fn from_values(modality: Modality, width: usize, height: usize, values: Vec<f64>) -> Result<Self, StampError> {
        if width == 0 || height == 0 {
            return Err(StampError::Argument("stamp dimensions must be positive".into()));
        }
        if values.len() != CHANNELS * width * height {
            return Err(StampError::Argument(format!(
                "expected {} values for a 3×{height}×{width} stamp, got {}",
                CHANNELS * width * height,
                values.len()
            )));
        }
        let pixels = values.iter().map(|&v| quantize(v)).collect();
        Ok(ActionStamp {
            modality,
            width,
            height,
            values,
            pixels,
            diagnostics: NormDiagnostics::default(),
        })
    }

    fn index(&self, c: usize, t: usize, k: usize) -> usize {
        (c * self.height + k) * self.width + t
    }

    /// Unquantized value of channel `c`, frame `t`, joint `k`.
    pub fn value(&self, c: usize, t: usize, k: usize) -> f64 {
        self.values[self.index(c, t, k)]
    }

    pub fn pixel(&self, c: usize, t: usize, k: usize) -> u8 {
        self.pixels[self.index(c, t, k)]
    }

    /// Values scaled to [0, 1], `[channel][row][col]` (network image input).
    pub fn scaled(&self) -> Vec<f64> {
        self.values.iter().map(|v| v / 255.0).collect()
    }

    /// Values scaled to [0, 1] and transposed to `[channel][time][joint]`.
    pub fn scaled_ctn(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len());
        for c in 0..CHANNELS {
            for t in 0..self.width {
                for k in 0..self.height {
                    out.push(self.value(c, t, k) / 255.0);
                }
            }
        }
        out
    }
}

/// Raw per-modality channel values, `[channel][joint][frame]`, before normalization.
pub fn raw_channels(seq: &SkeletonSequence, modality: Modality) -> Result<Vec<f64>, StampError> {
    let t_len = seq.len();
    let rows = modality.joint_count();
    let mut raw = vec![0.0; CHANNELS * rows * t_len];
    let mut put = |k: usize, t: usize, v: [f64; 3]| {
        for (c, x) in v.into_iter().enumerate() {
            raw[(c * rows + k) * t_len + t] = x;
        }
    };
    match modality {
        Modality::Body => {
            for (t, f) in seq.frames.iter().enumerate() {
                for (k, j) in f.body.iter().enumerate() {
                    put(k, t, [j.x, j.y, j.z]);
                }
            }
        }
        Modality::Hands => {
            for (t, f) in seq.frames.iter().enumerate() {
                for (k, j) in f.hand_left.iter().chain(&f.hand_right).enumerate() {
                    put(k, t, [j.x, j.y, j.x + j.y]);
                }
            }
        }
        Modality::Face => {
            for (t, f) in seq.frames.iter().enumerate() {
                for (k, j) in f.face.iter().enumerate() {
                    put(k, t, [j.x, j.y, j.x + j.y]);
                }
            }
        }
        Modality::Bones => {
            let bones = compute_bones(seq, &Topology::body().directed_edges())?;
            for (t, frame) in bones.bones.iter().enumerate() {
                for (k, b) in frame.iter().enumerate() {
                    put(k, t, *b);
                }
            }
        }
        Modality::Flow => {
            let flow = flow_or_proxy(seq);
            for (t, frame) in flow.frames.iter().enumerate() {
                for (k, v) in frame.iter().enumerate() {
                    put(k, t, [v[0], v[1], v[0] + v[1]]);
                }
            }
        }
    }
    Ok(raw)
}

/// Unresized stamp: width = frame count, height = the modality's joint count.
pub fn joints_to_map(seq: &SkeletonSequence, modality: Modality, scope: NormScope) -> Result<ActionStamp, StampError> {
    if seq.is_empty() {
        return Err(StampError::Argument("cannot map an empty sequence".into()));
    }
    let raw = raw_channels(seq, modality)?;
    let (c_min, c_max) = match scope {
        NormScope::PerSequence => raw
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))),
        NormScope::Fixed { min, max } => (min, max),
    };
    let (values, diagnostics) = normalize_values(&raw, c_min, c_max)?;
    let mut stamp = ActionStamp::from_values(modality, seq.len(), modality.joint_count(), values)?;
    stamp.diagnostics = diagnostics;
    Ok(stamp)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodeConfig {
    /// Required frame count of the (already resampled) input.
    pub frames: usize,
    /// Side of the square resized stamps.
    pub stamp_size: usize,
    pub scope: NormScope,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        EncodeConfig {
            frames: 60,
            stamp_size: 224,
            scope: NormScope::PerSequence,
        }
    }
}

/// The five stamps of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepActStamps {
    pub body: ActionStamp,
    pub hands: ActionStamp,
    pub bones: ActionStamp,
    pub face: ActionStamp,
    pub flow: ActionStamp,
}

impl DeepActStamps {
    pub fn get(&self, m: Modality) -> &ActionStamp {
        match m {
            Modality::Body => &self.body,
            Modality::Hands => &self.hands,
            Modality::Bones => &self.bones,
            Modality::Face => &self.face,
            Modality::Flow => &self.flow,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &ActionStamp> {
        [&self.body, &self.hands, &self.bones, &self.face, &self.flow].into_iter()
    }

    fn from_fn(mut f: impl FnMut(Modality) -> Result<ActionStamp, StampError>) -> Result<Self, StampError> {
        Ok(DeepActStamps {
            body: f(Modality::Body)?,
            hands: f(Modality::Hands)?,
            bones: f(Modality::Bones)?,
            face: f(Modality::Face)?,
            flow: f(Modality::Flow)?,
        })
    }

    /// Resizes every stamp to `size`×`size`.
    pub fn resized(&self, size: usize) -> Result<Self, StampError> {
        DeepActStamps::from_fn(|m| resize_bilinear(self.get(m), size, size))
    }
}

/// All five stamps before resizing.
pub fn encode_maps(seq: &SkeletonSequence, config: &EncodeConfig) -> Result<DeepActStamps, StampError> {
    if seq.len() != config.frames {
        return Err(StampError::Argument(format!(
            "sequence has {} frames, encoder expects {} (resample first)",
            seq.len(),
            config.frames
        )));
    }
    DeepActStamps::from_fn(|m| joints_to_map(seq, m, config.scope))
}

pub fn encode_deepacts(seq: &SkeletonSequence, config: &EncodeConfig) -> Result<DeepActStamps, StampError> {
    encode_maps(seq, config)?.resized(config.stamp_size)
}
