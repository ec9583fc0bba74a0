use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{DetectorGraph, FamilySpec, LayerNode, Link, ModuleKind, PLevel};
use crate::error::{Error, Result};

const INPUT_CHANNELS: i64 = 3;

/// Minimal set of layers needed to feed the detect node with the given heads.
pub fn dependency_closure(
    graph: &DetectorGraph,
    heads: &BTreeSet<PLevel>,
) -> Result<BTreeSet<usize>> {
    let available: BTreeMap<PLevel, usize> = graph.heads().into_iter().collect();
    let mut stack = vec![graph.detect_index()];
    for head in heads {
        let target = available
            .get(head)
            .ok_or_else(|| Error::MissingHead(head.to_string()))?;
        stack.push(*target);
    }

    let mut retained = BTreeSet::new();
    retained.insert(graph.detect_index());
    while let Some(i) = stack.pop() {
        if i == graph.detect_index() {
            continue;
        }
        if retained.insert(i) {
            stack.extend(graph.layers()[i].inputs());
        }
    }
    Ok(retained)
}

pub fn scale_repeats(repeats: u32, alpha: f64) -> u32 {
    ((repeats as f64 * alpha).round() as u32).max(1)
}

/// Scales a channel count to the nearest multiple of `granularity` (ties up),
/// floored at `granularity` and capped at the largest multiple not above `c_max`.
pub fn scale_channels(channels: i64, beta: f64, granularity: u32, c_max: Option<u32>) -> i64 {
    let g = granularity as f64;
    let scaled = ((channels as f64 * beta / g + 0.5).floor() * g) as i64;
    let mut out = scaled.max(granularity as i64);
    if let Some(cap) = c_max {
        let cap = (cap / granularity * granularity) as i64;
        out = out.min(cap);
    }
    out
}

/// Output channel count of every layer; `None` for the detect node.
fn output_channels(layers: &[LayerNode]) -> Vec<Option<i64>> {
    let mut out: Vec<Option<i64>> = Vec::with_capacity(layers.len());
    for layer in layers {
        let input = |slot: usize| -> Option<i64> {
            match layer.from.get(slot)?.resolve(layer.index) {
                Some(i) => out[i],
                None => Some(INPUT_CHANNELS),
            }
        };
        let c = match &layer.kind {
            ModuleKind::Detect => None,
            ModuleKind::Concat => (0..layer.from.len()).map(input).sum::<Option<i64>>(),
            ModuleKind::Upsample => input(0),
            kind if kind.carries_channels() => layer.args.first().copied().or_else(|| input(0)),
            _ => input(0),
        };
        out.push(c);
    }
    out
}

/// Applies depth and width multipliers to every layer.
///
/// Detect arguments (class counts) are left alone. Concat layers that store a
/// channel count get it recomputed from their scaled inputs.
pub fn scale_graph(graph: &DetectorGraph, spec: &FamilySpec) -> DetectorGraph {
    let mut layers = graph.layers().to_vec();
    for layer in &mut layers {
        if layer.kind == ModuleKind::Detect {
            continue;
        }
        layer.repeats = scale_repeats(layer.repeats, spec.alpha);
        if layer.kind.carries_channels() {
            if let Some(c) = layer.args.first_mut() {
                *c = scale_channels(*c, spec.beta, spec.granularity, spec.c_max);
            }
        }
    }

    let channels = output_channels(&layers);
    for i in 0..layers.len() {
        if layers[i].kind == ModuleKind::Concat && !layers[i].args.is_empty() {
            if let Some(c) = channels[i] {
                layers[i].args[0] = c;
            }
        }
    }

    DetectorGraph::new(layers, graph.backbone_len())
        .expect("scaling preserves graph structure")
}

/// Swaps every attention block for a residual block with the same wiring.
pub fn simplify_attention(graph: &DetectorGraph) -> DetectorGraph {
    let mut layers = graph.layers().to_vec();
    for layer in &mut layers {
        if layer.kind == ModuleKind::AttentionBlock {
            layer.kind = ModuleKind::ResidualBlock;
        }
    }
    DetectorGraph::new(layers, graph.backbone_len()).expect("kind swap preserves structure")
}

/// Renumbers the retained layers densely and rewrites their links.
///
/// Detect inputs that point at pruned layers are dropped; any other reference
/// to a pruned layer means `retained` is not a closure.
pub fn reindex_and_split(
    graph: &DetectorGraph,
    retained: &BTreeSet<usize>,
) -> Result<DetectorGraph> {
    if !retained.contains(&graph.detect_index()) {
        return Err(Error::InvalidArgument(
            "retained set does not contain the detect node".into(),
        ));
    }
    if let Some(&bad) = retained.iter().find(|&&i| i >= graph.len()) {
        return Err(Error::InvalidArgument(format!("retained index {bad} out of range")));
    }

    let remap: BTreeMap<usize, usize> = retained
        .iter()
        .enumerate()
        .map(|(new, &old)| (old, new))
        .collect();

    let mut layers = Vec::with_capacity(retained.len());
    for (&old, &new) in &remap {
        let node = &graph.layers()[old];
        let is_detect = old == graph.detect_index();
        let mut from = Vec::with_capacity(node.from.len());
        for link in &node.from {
            let Some(target) = link.resolve(old) else {
                // Network input stays the network input only for the first layer.
                if new == 0 {
                    from.push(Link::Previous);
                    continue;
                }
                return Err(Error::NotClosed { index: old, target: 0 });
            };
            match remap.get(&target) {
                Some(&new_target) => {
                    let rewritten = if *link == Link::Previous && new_target + 1 == new {
                        Link::Previous
                    } else {
                        Link::Absolute(new_target)
                    };
                    from.push(rewritten);
                }
                None if is_detect => {}
                None => return Err(Error::NotClosed { index: old, target }),
            }
        }
        if from.is_empty() {
            return Err(Error::NotClosed {
                index: old,
                target: node.inputs().next().unwrap_or(0),
            });
        }
        layers.push(LayerNode {
            index: new,
            from,
            ..node.clone()
        });
    }

    let backbone_len = retained.range(..graph.backbone_len()).count();
    DetectorGraph::new(layers, backbone_len)
}

/// Closure, scaling, optional attention simplification and reindexing.
pub fn synthesize_family(base: &DetectorGraph, spec: &FamilySpec) -> Result<DetectorGraph> {
    spec.validate()?;
    let retained = dependency_closure(base, &spec.heads)?;
    let mut scaled = scale_graph(base, spec);
    if spec.simplify_attention {
        scaled = simplify_attention(&scaled);
    }
    let scaled = restrict_detect(&scaled, &spec.heads)?;
    reindex_and_split(&scaled, &retained)
}

/// Drops detect inputs that feed unrequested heads. Their layers may still
/// be retained when a requested head is computed from them.
fn restrict_detect(graph: &DetectorGraph, heads: &BTreeSet<PLevel>) -> Result<DetectorGraph> {
    let detect = graph.detect_index();
    let mut layers = graph.layers().to_vec();
    let node = &graph.layers()[detect];
    layers[detect].from = node
        .from
        .iter()
        .copied()
        .filter(|link| {
            link.resolve(detect)
                .and_then(|i| graph.layers()[i].p_level)
                .is_some_and(|p| heads.contains(&p))
        })
        .collect();
    DetectorGraph::new(layers, graph.backbone_len())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphReport {
    pub layers: usize,
    pub backbone_layers: usize,
    pub head_layers: usize,
    pub heads: Vec<PLevel>,
    /// Sum of output channels over all non-detect layers.
    pub total_channels: i64,
    /// Σ repeats · c_in · c_out · kernel² over channel-bearing layers.
    pub param_proxy: u64,
}

pub fn graph_report(graph: &DetectorGraph) -> GraphReport {
    let channels = output_channels(graph.layers());
    let mut param_proxy = 0u64;
    for layer in graph.layers() {
        if !layer.kind.carries_channels() {
            continue;
        }
        let Some(c_out) = channels[layer.index] else { continue };
        let c_in = match layer.from.first().and_then(|l| l.resolve(layer.index)) {
            Some(i) => channels[i].unwrap_or(c_out),
            None => INPUT_CHANNELS,
        };
        let kernel = layer.args.get(1).copied().filter(|k| *k > 0).unwrap_or(1);
        param_proxy += layer.repeats as u64 * (c_in * c_out * kernel * kernel) as u64;
    }
    GraphReport {
        layers: graph.len(),
        backbone_layers: graph.backbone_len(),
        head_layers: graph.len() - graph.backbone_len(),
        heads: graph.heads().into_iter().map(|(p, _)| p).collect(),
        total_channels: channels.iter().flatten().sum(),
        param_proxy,
    }
}
