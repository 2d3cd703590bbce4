//! Model and training configuration with its `key = value` text form.
//!
//! Grammar: one `key = value` per line; `#` starts a comment; blank lines are
//! ignored; unknown keys are errors. Stacks are comma-separated stages, each
//! `channels:kernel:stride`.

use std::fmt::Write as _;

use crate::graph::PartitionStrategy;
use crate::modality::{parse_modality_list, Modality};

use super::ModelError;

/// Convolutional stage: `out_channels` filters of `kernel`×`kernel`, padding `kernel/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvStage {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

/// Graph layer: graph conv to `out_channels`, then a temporal conv of width
/// `temporal_kernel` with `temporal_stride`, padding `temporal_kernel/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphLayer {
    pub out_channels: usize,
    pub temporal_kernel: usize,
    pub temporal_stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub num_classes: usize,
    /// Temporal length T of graph inputs.
    pub frames: usize,
    /// Side of the square CNN input stamps.
    pub stamp_size: usize,
    pub cnn_stack: Vec<ConvStage>,
    /// Second CNN architecture, used when `ensemble_cnn_variants == 2`.
    pub cnn_stack2: Vec<ConvStage>,
    pub graph_stack: Vec<GraphLayer>,
    pub partition: PartitionStrategy,
    pub cnn_on: bool,
    pub graph_on: bool,
    /// Canonical order, no duplicates.
    pub modalities: Vec<Modality>,
    pub ensemble_cnn_variants: usize,
    /// Graph branch over the bone line graph.
    pub bones_graph: bool,
    pub init_seed: u64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            num_classes: 6,
            frames: 60,
            stamp_size: 32,
            cnn_stack: vec![
                ConvStage { out_channels: 16, kernel: 3, stride: 2 },
                ConvStage { out_channels: 32, kernel: 3, stride: 2 },
                ConvStage { out_channels: 64, kernel: 3, stride: 2 },
            ],
            cnn_stack2: vec![
                ConvStage { out_channels: 24, kernel: 5, stride: 2 },
                ConvStage { out_channels: 48, kernel: 3, stride: 4 },
            ],
            graph_stack: vec![
                GraphLayer { out_channels: 32, temporal_kernel: 9, temporal_stride: 4 },
                GraphLayer { out_channels: 64, temporal_kernel: 9, temporal_stride: 4 },
            ],
            partition: PartitionStrategy::SelfNeighbor,
            cnn_on: true,
            graph_on: true,
            modalities: Modality::ALL.to_vec(),
            ensemble_cnn_variants: 1,
            bones_graph: false,
            init_seed: 42,
        }
    }
}

/// Optimizer and loop settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub decay_factor: f64,
    /// `None` selects 50% and 75% of `epochs`.
    pub milestones: Option<Vec<usize>>,
    /// Seed of the per-epoch batch shuffle.
    pub shuffle_seed: u64,
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 8,
            lr: 0.02,
            momentum: 0.9,
            weight_decay: 0.0005,
            decay_factor: 0.1,
            milestones: None,
            shuffle_seed: 42,
            threads: 1,
        }
    }
}

fn parse_triples(key: &str, value: &str) -> Result<Vec<[usize; 3]>, ModelError> {
    let err = |m: String| ModelError::Config(format!("{key}: {m}"));
    let mut out = Vec::new();
    for stage in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = stage.split(':').collect();
        if parts.len() != 3 {
            return Err(err(format!("stage `{stage}` must be channels:kernel:stride")));
        }
        let mut t = [0usize; 3];
        for (slot, p) in t.iter_mut().zip(&parts) {
            *slot = p.trim().parse().map_err(|_| err(format!("`{p}` is not a positive integer")))?;
            if *slot == 0 {
                return Err(err(format!("stage `{stage}` has a zero field")));
            }
        }
        out.push(t);
    }
    Ok(out)
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ModelError> {
    match v {
        "true" | "on" | "1" => Ok(true),
        "false" | "off" | "0" => Ok(false),
        _ => Err(ModelError::Config(format!("{key}: expected true or false, got `{v}`"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ModelError> {
    v.parse().map_err(|_| ModelError::Config(format!("{key}: invalid value `{v}`")))
}

/// `cnn,graph` style branch selection.
pub fn parse_branches(v: &str) -> Result<(bool, bool), ModelError> {
    let (mut cnn, mut graph) = (false, false);
    for b in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match b {
            "cnn" => cnn = true,
            "graph" => graph = true,
            other => return Err(ModelError::Config(format!("branches: unknown branch `{other}`"))),
        }
    }
    Ok((cnn, graph))
}

fn stack_text(stack: &[[usize; 3]]) -> String {
    stack.iter().map(|s| format!("{}:{}:{}", s[0], s[1], s[2])).collect::<Vec<_>>().join(",")
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(m.to_string()));
        if self.num_classes < 2 {
            return bad("num_classes must be at least 2");
        }
        if !self.cnn_on && !self.graph_on {
            return bad("at least one of the cnn and graph branches must be on");
        }
        if self.modalities.is_empty() {
            return bad("at least one modality must be on");
        }
        if !matches!(self.ensemble_cnn_variants, 1 | 2) {
            return bad("ensemble_cnn_variants must be 1 or 2");
        }
        if self.frames == 0 || self.stamp_size == 0 {
            return bad("frames and stamp_size must be positive");
        }
        if self.cnn_on && self.cnn_stack.is_empty() {
            return bad("cnn_stack is empty");
        }
        if self.cnn_on && self.ensemble_cnn_variants == 2 && self.cnn_stack2.is_empty() {
            return bad("cnn_stack2 is empty");
        }
        if self.graph_on && self.graph_stack.is_empty() {
            return bad("graph_stack is empty");
        }
        let graph_modalities = self.graph_modalities();
        if self.graph_on && !self.cnn_on && graph_modalities.is_empty() {
            return bad("graph-only model has no modality with a graph");
        }
        Ok(())
    }

    /// Allowed but suspicious settings.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.cnn_on && self.ensemble_cnn_variants == 2 && self.cnn_stack == self.cnn_stack2 {
            w.push("ensemble CNN stacks are identical; the second variant adds no diversity".into());
        }
        w
    }

    /// Enabled modalities that carry a graph branch.
    pub fn graph_modalities(&self) -> Vec<Modality> {
        self.modalities
            .iter()
            .copied()
            .filter(|&m| m != Modality::Bones || self.bones_graph)
            .collect()
    }

    /// Applies `key = value` lines on top of `self` and `train`.
    pub fn apply_config(&mut self, train: &mut TrainConfig, text: &str) -> Result<(), ModelError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ModelError::Config(format!("line {}: expected key = value", i + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            self.apply_key(train, key, value)
                .map_err(|e| match e {
                    ModelError::Config(m) => ModelError::Config(format!("line {}: {m}", i + 1)),
                    other => other,
                })?;
        }
        Ok(())
    }

    fn apply_key(&mut self, train: &mut TrainConfig, key: &str, v: &str) -> Result<(), ModelError> {
        match key {
            "num_classes" => self.num_classes = parse_num(key, v)?,
            "frames" => self.frames = parse_num(key, v)?,
            "stamp_size" => self.stamp_size = parse_num(key, v)?,
            "cnn_stack" | "cnn_stack2" => {
                let stages = parse_triples(key, v)?
                    .into_iter()
                    .map(|[c, k, s]| ConvStage { out_channels: c, kernel: k, stride: s })
                    .collect();
                if key == "cnn_stack" {
                    self.cnn_stack = stages;
                } else {
                    self.cnn_stack2 = stages;
                }
            }
            "graph_stack" => {
                self.graph_stack = parse_triples(key, v)?
                    .into_iter()
                    .map(|[c, k, s]| GraphLayer { out_channels: c, temporal_kernel: k, temporal_stride: s })
                    .collect()
            }
            "partition" => self.partition = v.parse().map_err(ModelError::Config)?,
            "branches" => (self.cnn_on, self.graph_on) = parse_branches(v)?,
            "modalities" => self.modalities = parse_modality_list(v).map_err(ModelError::Config)?,
            "ensemble_cnn_variants" => self.ensemble_cnn_variants = parse_num(key, v)?,
            "bones_graph" => self.bones_graph = parse_bool(key, v)?,
            "init_seed" => self.init_seed = parse_num(key, v)?,
            "epochs" => train.epochs = parse_num(key, v)?,
            "batch_size" => train.batch_size = parse_num(key, v)?,
            "lr" => train.lr = parse_num(key, v)?,
            "momentum" => train.momentum = parse_num(key, v)?,
            "weight_decay" => train.weight_decay = parse_num(key, v)?,
            "decay_factor" => train.decay_factor = parse_num(key, v)?,
            "milestones" => {
                let mut m = Vec::new();
                for p in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    m.push(parse_num(key, p)?);
                }
                train.milestones = Some(m);
            }
            "shuffle_seed" => train.shuffle_seed = parse_num(key, v)?,
            "threads" => train.threads = parse_num(key, v)?,
            other => return Err(ModelError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parses a full config over the defaults.
    pub fn parse_config(text: &str) -> Result<(ModelSpec, TrainConfig), ModelError> {
        let mut spec = ModelSpec::default();
        let mut train = TrainConfig::default();
        spec.apply_config(&mut train, text)?;
        spec.validate()?;
        Ok((spec, train))
    }

    /// Canonical text of the architecture keys; [`ModelSpec::config_hash`] is taken over it.
    pub fn canonical_text(&self) -> String {
        let cnn: Vec<[usize; 3]> = self.cnn_stack.iter().map(|s| [s.out_channels, s.kernel, s.stride]).collect();
        let cnn2: Vec<[usize; 3]> = self.cnn_stack2.iter().map(|s| [s.out_channels, s.kernel, s.stride]).collect();
        let graph: Vec<[usize; 3]> = self
            .graph_stack
            .iter()
            .map(|l| [l.out_channels, l.temporal_kernel, l.temporal_stride])
            .collect();
        let mut branches = Vec::new();
        if self.cnn_on {
            branches.push("cnn");
        }
        if self.graph_on {
            branches.push("graph");
        }
        let mods: Vec<&str> = self.modalities.iter().map(|m| m.name()).collect();
        let mut s = String::new();
        let _ = writeln!(s, "num_classes = {}", self.num_classes);
        let _ = writeln!(s, "frames = {}", self.frames);
        let _ = writeln!(s, "stamp_size = {}", self.stamp_size);
        let _ = writeln!(s, "cnn_stack = {}", stack_text(&cnn));
        let _ = writeln!(s, "cnn_stack2 = {}", stack_text(&cnn2));
        let _ = writeln!(s, "graph_stack = {}", stack_text(&graph));
        let _ = writeln!(s, "partition = {}", self.partition);
        let _ = writeln!(s, "branches = {}", branches.join(","));
        let _ = writeln!(s, "modalities = {}", mods.join(","));
        let _ = writeln!(s, "ensemble_cnn_variants = {}", self.ensemble_cnn_variants);
        let _ = writeln!(s, "bones_graph = {}", self.bones_graph);
        let _ = writeln!(s, "init_seed = {}", self.init_seed);
        s
    }

    /// First 8 bytes (little-endian) of the SHA-256 of [`ModelSpec::canonical_text`].
    pub fn config_hash(&self) -> u64 {
        use sha2::{Digest, Sha256};
        let d = Sha256::digest(self.canonical_text().as_bytes());
        u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
    }
}

impl TrainConfig {
    pub fn canonical_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "lr = {}", self.lr);
        let _ = writeln!(s, "momentum = {}", self.momentum);
        let _ = writeln!(s, "weight_decay = {}", self.weight_decay);
        let _ = writeln!(s, "decay_factor = {}", self.decay_factor);
        if let Some(m) = &self.milestones {
            let m: Vec<String> = m.iter().map(|e| e.to_string()).collect();
            let _ = writeln!(s, "milestones = {}", m.join(","));
        }
        let _ = writeln!(s, "shuffle_seed = {}", self.shuffle_seed);
        let _ = writeln!(s, "threads = {}", self.threads);
        s
    }

    pub fn milestones(&self) -> Vec<usize> {
        self.milestones
            .clone()
            .unwrap_or_else(|| crate::engine::OptimState::default_milestones(self.epochs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let s = ModelSpec::default();
        s.validate().unwrap();
        assert!(s.warnings().is_empty());
        assert_eq!(s.graph_modalities(), vec![Modality::Body, Modality::Hands, Modality::Face, Modality::Flow]);
    }

    #[test]
    fn canonical_text_round_trips() {
        let mut s = ModelSpec::default();
        s.modalities = vec![Modality::Body, Modality::Face];
        s.graph_on = false;
        s.partition = PartitionStrategy::SpatialConfig;
        let mut t = TrainConfig::default();
        t.milestones = Some(vec![3, 9]);
        let text = format!("{}{}", s.canonical_text(), t.canonical_text());
        let (s2, t2) = ModelSpec::parse_config(&text).unwrap();
        assert_eq!(s, s2);
        assert_eq!(t, t2);
        assert_eq!(s.config_hash(), s2.config_hash());
        assert_ne!(s.config_hash(), ModelSpec::default().config_hash());
    }

    #[test]
    fn config_errors_carry_line_numbers() {
        let err = ModelSpec::parse_config("epochs = 3\n\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(ModelSpec::parse_config("cnn_stack = 16:3\n").is_err());
        assert!(ModelSpec::parse_config("branches = \n").is_err());
        assert!(ModelSpec::parse_config("modalities = \n").is_err());
        assert!(ModelSpec::parse_config("num_classes = 1\n").is_err());
        assert!(ModelSpec::parse_config("ensemble_cnn_variants = 3\n").is_err());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let (s, t) = ModelSpec::parse_config("# header\n  epochs = 5 # short run\nbranches = graph\n").unwrap();
        assert_eq!(t.epochs, 5);
        assert!(!s.cnn_on && s.graph_on);
    }

    #[test]
    fn identical_ensemble_stacks_warn() {
        let mut s = ModelSpec::default();
        s.ensemble_cnn_variants = 2;
        s.cnn_stack2 = s.cnn_stack.clone();
        s.validate().unwrap();
        assert_eq!(s.warnings().len(), 1);
    }
}
