//! Detector configuration graphs and family synthesis.
//!
//! A configuration is an ordered list of layers split into a backbone and a
//! head section. Each layer names its inputs (`from` links), a repeat count,
//! a module kind and integer arguments whose first entry is the output
//! channel count for channel-bearing kinds. Family variants are derived by
//! pruning to the layers a chosen set of detection heads needs, scaling depth
//! and width, and renumbering the surviving links.

mod document;
mod transform;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use document::{emit_config, parse_config};
pub use transform::{
    dependency_closure, graph_report, reindex_and_split, scale_channels, scale_graph,
    scale_repeats, simplify_attention, synthesize_family, GraphReport,
};

/// Pyramid level of a feature map consumed by the detect node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PLevel {
    P3,
    P4,
    P5,
}

impl PLevel {
    pub const ALL: [PLevel; 3] = [PLevel::P3, PLevel::P4, PLevel::P5];

    pub fn as_str(self) -> &'static str {
        match self {
            PLevel::P3 => "P3",
            PLevel::P4 => "P4",
            PLevel::P5 => "P5",
        }
    }
}

impl fmt::Display for PLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "P3" => Ok(PLevel::P3),
            "P4" => Ok(PLevel::P4),
            "P5" => Ok(PLevel::P5),
            other => Err(Error::InvalidArgument(format!("unknown head '{other}'"))),
        }
    }
}

/// Parses a comma separated head list such as `P3,P5`.
pub fn parse_heads(s: &str) -> Result<BTreeSet<PLevel>> {
    let heads = s
        .split(',')
        .filter(|part| !part.trim().is_empty())
        .map(PLevel::from_str)
        .collect::<Result<BTreeSet<_>>>()?;
    if heads.is_empty() {
        return Err(Error::InvalidArgument("head set is empty".into()));
    }
    Ok(heads)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ModuleKind {
    Conv,
    ResidualBlock,
    AttentionBlock,
    Upsample,
    Concat,
    Detect,
    Other(String),
}

impl ModuleKind {
    pub fn from_name(name: &str) -> Self {
        match name {
            "conv" => ModuleKind::Conv,
            "residual_block" => ModuleKind::ResidualBlock,
            "attention_block" => ModuleKind::AttentionBlock,
            "upsample" => ModuleKind::Upsample,
            "concat" => ModuleKind::Concat,
            "detect" => ModuleKind::Detect,
            other => ModuleKind::Other(other.to_string()),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            ModuleKind::Conv => "conv",
            ModuleKind::ResidualBlock => "residual_block",
            ModuleKind::AttentionBlock => "attention_block",
            ModuleKind::Upsample => "upsample",
            ModuleKind::Concat => "concat",
            ModuleKind::Detect => "detect",
            ModuleKind::Other(name) => name,
        }
    }

    /// Kinds whose first argument is an output channel count subject to width scaling.
    pub fn carries_channels(&self) -> bool {
        matches!(
            self,
            ModuleKind::Conv
                | ModuleKind::ResidualBlock
                | ModuleKind::AttentionBlock
                | ModuleKind::Other(_)
        )
    }
}

/// Input reference of a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Link {
    /// The immediately preceding layer (`-1`); for layer 0 this is the network input.
    Previous,
    Absolute(usize),
}

impl Link {
    pub fn from_raw(raw: i64) -> Option<Self> {
        match raw {
            -1 => Some(Link::Previous),
            n if n >= 0 => Some(Link::Absolute(n as usize)),
            _ => None,
        }
    }

    pub fn to_raw(self) -> i64 {
        match self {
            Link::Previous => -1,
            Link::Absolute(i) => i as i64,
        }
    }

    /// Index of the referenced layer, or `None` for the network input.
    pub fn resolve(self, index: usize) -> Option<usize> {
        match self {
            Link::Previous => index.checked_sub(1),
            Link::Absolute(i) => Some(i),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerNode {
    pub index: usize,
    pub from: Vec<Link>,
    pub repeats: u32,
    pub kind: ModuleKind,
    pub args: Vec<i64>,
    pub p_level: Option<PLevel>,
}

impl LayerNode {
    pub fn inputs(&self) -> impl Iterator<Item = usize> + '_ {
        self.from.iter().filter_map(move |l| l.resolve(self.index))
    }

    pub fn channels(&self) -> Option<i64> {
        if self.kind.carries_channels() {
            self.args.first().copied()
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectorGraph {
    layers: Vec<LayerNode>,
    backbone_len: usize,
    detect_index: usize,
}

impl DetectorGraph {
    /// Builds a graph and checks every structural invariant.
    pub fn new(layers: Vec<LayerNode>, backbone_len: usize) -> Result<Self> {
        if backbone_len > layers.len() {
            return Err(Error::InvalidArgument(format!(
                "backbone length {backbone_len} exceeds layer count {}",
                layers.len()
            )));
        }
        for (pos, layer) in layers.iter().enumerate() {
            if layer.index != pos {
                return Err(Error::MalformedEntry {
                    index: pos,
                    reason: format!("layer carries index {}", layer.index),
                });
            }
            if layer.repeats == 0 {
                return Err(Error::InvalidRepeats { index: pos, repeats: 0 });
            }
            if layer.from.is_empty() {
                return Err(Error::MalformedEntry {
                    index: pos,
                    reason: "layer has no inputs".into(),
                });
            }
            for link in &layer.from {
                if let Link::Absolute(target) = link {
                    if *target >= pos {
                        return Err(Error::DanglingLink {
                            index: pos,
                            link: link.to_raw(),
                        });
                    }
                }
            }
            if let Some(c) = layer.channels() {
                if c < 1 {
                    return Err(Error::MalformedEntry {
                        index: pos,
                        reason: format!("channel count {c} must be positive"),
                    });
                }
            }
        }

        let detects: Vec<usize> = layers
            .iter()
            .filter(|l| l.kind == ModuleKind::Detect)
            .map(|l| l.index)
            .collect();
        let detect_index = match detects.as_slice() {
            [] => return Err(Error::MissingDetect),
            [one] => *one,
            many => return Err(Error::MultipleDetect(many.len())),
        };

        let detect = &layers[detect_index];
        let mut seen = BTreeSet::new();
        for link in &detect.from {
            let target = link.resolve(detect_index).ok_or(Error::MalformedEntry {
                index: detect_index,
                reason: "detect reads the network input".into(),
            })?;
            let level = layers[target].p_level.ok_or_else(|| Error::MalformedEntry {
                index: detect_index,
                reason: format!("detect input {target} has no pyramid level"),
            })?;
            if !seen.insert(level) {
                return Err(Error::MalformedEntry {
                    index: detect_index,
                    reason: format!("pyramid level {level} feeds detect twice"),
                });
            }
        }

        Ok(Self {
            layers,
            backbone_len,
            detect_index,
        })
    }

    pub fn layers(&self) -> &[LayerNode] {
        &self.layers
    }

    pub fn backbone_len(&self) -> usize {
        self.backbone_len
    }

    pub fn detect_index(&self) -> usize {
        self.detect_index
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn detect(&self) -> &LayerNode {
        &self.layers[self.detect_index]
    }

    /// Pyramid levels the detect node reads, with the layer index feeding each.
    pub fn heads(&self) -> Vec<(PLevel, usize)> {
        let detect = self.detect();
        detect
            .inputs()
            .filter_map(|i| self.layers[i].p_level.map(|p| (p, i)))
            .collect()
    }

    /// Every index reachable backwards from the detect node.
    pub fn live_layers(&self) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![self.detect_index];
        while let Some(i) = stack.pop() {
            if seen.insert(i) {
                stack.extend(self.layers[i].inputs());
            }
        }
        seen
    }
}

/// Depth/width family parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub alpha: f64,
    pub beta: f64,
    /// Channel cap; `None` leaves channels uncapped.
    pub c_max: Option<u32>,
    pub heads: BTreeSet<PLevel>,
    #[serde(default)]
    pub simplify_attention: bool,
    #[serde(default = "default_granularity")]
    pub granularity: u32,
}

fn default_granularity() -> u32 {
    8
}

impl FamilySpec {
    pub fn new(alpha: f64, beta: f64, c_max: Option<u32>, heads: &[PLevel]) -> Self {
        Self {
            alpha,
            beta,
            c_max,
            heads: heads.iter().copied().collect(),
            simplify_attention: false,
            granularity: default_granularity(),
        }
    }

    /// `alpha = beta = 1`, no cap, every head.
    pub fn identity() -> Self {
        Self::new(1.0, 1.0, None, &PLevel::ALL)
    }

    pub fn with_simplify_attention(mut self, on: bool) -> Self {
        self.simplify_attention = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidArgument(format!("alpha {} must be positive", self.alpha)));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::InvalidArgument(format!("beta {} must be positive", self.beta)));
        }
        if self.granularity == 0 {
            return Err(Error::InvalidArgument("granularity must be positive".into()));
        }
        if let Some(cap) = self.c_max {
            if cap < self.granularity {
                return Err(Error::InvalidArgument(format!(
                    "c_max {cap} is below granularity {}",
                    self.granularity
                )));
            }
        }
        if self.heads.is_empty() {
            return Err(Error::InvalidArgument("head set is empty".into()));
        }
        Ok(())
    }
}
