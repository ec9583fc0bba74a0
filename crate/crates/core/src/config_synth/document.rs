use serde_json::{json, Value};

use super::{DetectorGraph, LayerNode, Link, ModuleKind, PLevel};
use crate::error::{Error, Result};

/// Parses a JSON configuration document with `backbone` and `head` arrays of
/// `[from, repeats, module, args]` rows. An optional fifth element tags the
/// row's pyramid level (`"P3"`, `"P4"`, `"P5"`).
///
/// When no row carries a level tag, the detect node's inputs are assigned
/// P3, P4, P5 in link order.
pub fn parse_config(text: &str) -> Result<DetectorGraph> {
    let doc: Value = serde_json::from_str(text)?;
    let obj = doc
        .as_object()
        .ok_or_else(|| Error::Schema("configuration must be a JSON object".into()))?;
    let section = |name: &'static str| -> Result<&Vec<Value>> {
        obj.get(name)
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Schema(format!("missing '{name}' array")))
    };
    let backbone = section("backbone")?;
    let head = section("head")?;

    let mut layers = Vec::with_capacity(backbone.len() + head.len());
    for (index, row) in backbone.iter().chain(head.iter()).enumerate() {
        layers.push(parse_row(index, row)?);
    }

    if layers.iter().all(|l| l.p_level.is_none()) {
        assign_default_levels(&mut layers)?;
    }

    DetectorGraph::new(layers, backbone.len())
}

fn parse_row(index: usize, row: &Value) -> Result<LayerNode> {
    let malformed = |reason: &str| Error::MalformedEntry {
        index,
        reason: reason.to_string(),
    };
    let cells = row
        .as_array()
        .ok_or_else(|| malformed("row is not an array"))?;
    if !(4..=5).contains(&cells.len()) {
        return Err(malformed("row must have 4 or 5 elements"));
    }

    let raw_links: Vec<i64> = match &cells[0] {
        Value::Number(n) => vec![n.as_i64().ok_or_else(|| malformed("link is not an integer"))?],
        Value::Array(items) => items
            .iter()
            .map(|v| v.as_i64().ok_or_else(|| malformed("link is not an integer")))
            .collect::<Result<_>>()?,
        _ => return Err(malformed("from must be an integer or an array")),
    };
    let mut from = Vec::with_capacity(raw_links.len());
    for raw in raw_links {
        let link = Link::from_raw(raw).ok_or(Error::DanglingLink { index, link: raw })?;
        if let Link::Absolute(target) = link {
            if target >= index {
                return Err(Error::DanglingLink { index, link: raw });
            }
        }
        from.push(link);
    }

    let repeats = cells[1]
        .as_i64()
        .ok_or_else(|| malformed("repeats is not an integer"))?;
    if repeats < 1 {
        return Err(Error::InvalidRepeats { index, repeats });
    }
    let repeats = u32::try_from(repeats).map_err(|_| malformed("repeats out of range"))?;

    let kind = ModuleKind::from_name(
        cells[2]
            .as_str()
            .ok_or_else(|| malformed("module is not a string"))?,
    );

    let args = cells[3]
        .as_array()
        .ok_or_else(|| malformed("args is not an array"))?
        .iter()
        .map(|v| v.as_i64().ok_or_else(|| malformed("argument is not an integer")))
        .collect::<Result<Vec<_>>>()?;

    let p_level = match cells.get(4) {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.parse::<PLevel>()?),
        Some(_) => return Err(malformed("pyramid level must be a string")),
    };

    Ok(LayerNode {
        index,
        from,
        repeats,
        kind,
        args,
        p_level,
    })
}

fn assign_default_levels(layers: &mut [LayerNode]) -> Result<()> {
    let Some(detect) = layers.iter().find(|l| l.kind == ModuleKind::Detect) else {
        return Err(Error::MissingDetect);
    };
    let targets: Vec<usize> = detect.inputs().collect();
    if targets.len() > PLevel::ALL.len() {
        return Err(Error::MalformedEntry {
            index: detect.index,
            reason: "more than three unannotated detect inputs".into(),
        });
    }
    for (target, level) in targets.into_iter().zip(PLevel::ALL) {
        layers[target].p_level = Some(level);
    }
    Ok(())
}

fn row_value(layer: &LayerNode) -> Value {
    let from = match layer.from.as_slice() {
        [single] => json!(single.to_raw()),
        many => json!(many.iter().map(|l| l.to_raw()).collect::<Vec<_>>()),
    };
    let mut row = vec![
        from,
        json!(layer.repeats),
        json!(layer.kind.name()),
        json!(layer.args),
    ];
    if let Some(level) = layer.p_level {
        row.push(json!(level.as_str()));
    }
    Value::Array(row)
}

/// Serializes a graph back into the document layout, one row per line.
pub fn emit_config(graph: &DetectorGraph) -> String {
    let (backbone, head) = graph.layers().split_at(graph.backbone_len());
    let section = |rows: &[LayerNode]| -> String {
        rows.iter()
            .map(|l| format!("    {}", row_value(l)))
            .collect::<Vec<_>>()
            .join(",\n")
    };
    let mut out = String::from("{\n  \"backbone\": [\n");
    out.push_str(&section(backbone));
    out.push_str("\n  ],\n  \"head\": [\n");
    out.push_str(&section(head));
    out.push_str("\n  ]\n}\n");
    out
}
