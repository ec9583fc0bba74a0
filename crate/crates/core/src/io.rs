//! File formats: JSON-lines predictions and ground truth, event lists,
//! telemetry and power CSVs, profile tables.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::ace_profiler::{AceProfile, PowerTrace};
use crate::error::{Error, Result};
use crate::runtime_selector::TelemetrySample;
use crate::temporal_metrics::{BBox, Detection, GestureEvent, GroundTruthFrame, GtBox};

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Schema(format!("line {}: {e}", n + 1)))?,
        );
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize, W: Write>(items: &[T], mut out: W) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct FrameBoxes {
    frame: usize,
    boxes: Vec<Vec<f64>>,
}

fn class_of(v: f64, line: usize) -> Result<u32> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as u32)
    } else {
        Err(Error::Schema(format!("line {line}: class {v} is not a non-negative integer")))
    }
}

/// Predictions as `{frame, boxes: [[cx, cy, w, h, class, conf], ...]}` lines.
pub fn read_predictions<R: BufRead>(reader: R) -> Result<Vec<Detection>> {
    let rows: Vec<FrameBoxes> = read_jsonl(reader)?;
    let mut out = Vec::new();
    for (n, row) in rows.into_iter().enumerate() {
        for b in row.boxes {
            if b.len() != 6 {
                return Err(Error::Schema(format!("line {}: prediction boxes need 6 values", n + 1)));
            }
            out.push(Detection {
                frame: row.frame,
                bbox: BBox::new(b[0], b[1], b[2], b[3]),
                class_id: class_of(b[4], n + 1)?,
                confidence: b[5],
            });
        }
    }
    Ok(out)
}

pub fn write_predictions<W: Write>(preds: &[Detection], out: W) -> Result<()> {
    let mut by_frame: BTreeMap<usize, Vec<Vec<f64>>> = BTreeMap::new();
    for d in preds {
        by_frame.entry(d.frame).or_default().push(vec![
            d.bbox.cx,
            d.bbox.cy,
            d.bbox.w,
            d.bbox.h,
            f64::from(d.class_id),
            d.confidence,
        ]);
    }
    let rows: Vec<FrameBoxes> = by_frame
        .into_iter()
        .map(|(frame, boxes)| FrameBoxes { frame, boxes })
        .collect();
    write_jsonl(&rows, out)
}

/// Ground truth in the prediction layout; the confidence column is optional.
pub fn read_ground_truth<R: BufRead>(reader: R) -> Result<Vec<GroundTruthFrame>> {
    let rows: Vec<FrameBoxes> = read_jsonl(reader)?;
    let mut merged: BTreeMap<usize, Vec<GtBox>> = BTreeMap::new();
    for (n, row) in rows.into_iter().enumerate() {
        let entries = merged.entry(row.frame).or_default();
        for b in row.boxes {
            if !(5..=6).contains(&b.len()) {
                return Err(Error::Schema(format!("line {}: ground-truth boxes need 5 or 6 values", n + 1)));
            }
            entries.push(GtBox {
                bbox: BBox::new(b[0], b[1], b[2], b[3]),
                class_id: class_of(b[4], n + 1)?,
            });
        }
    }
    Ok(merged
        .into_iter()
        .map(|(frame, entries)| GroundTruthFrame { frame, entries })
        .collect())
}

pub fn write_ground_truth<W: Write>(gt: &[GroundTruthFrame], out: W) -> Result<()> {
    let rows: Vec<FrameBoxes> = gt
        .iter()
        .map(|g| FrameBoxes {
            frame: g.frame,
            boxes: g
                .entries
                .iter()
                .map(|e| vec![e.bbox.cx, e.bbox.cy, e.bbox.w, e.bbox.h, f64::from(e.class_id)])
                .collect(),
        })
        .collect();
    write_jsonl(&rows, out)
}

/// Events as a JSON array of `{class, start, end}` with inclusive spans.
pub fn read_events(text: &str) -> Result<Vec<GestureEvent>> {
    let events: Vec<GestureEvent> = serde_json::from_str(text)?;
    if let Some(e) = events.iter().find(|e| e.end < e.start) {
        return Err(Error::Schema(format!("event ends ({}) before it starts ({})", e.end, e.start)));
    }
    Ok(events)
}

/// Telemetry CSV with header `timestamp,battery_pct,cpu_temp,gpu_temp,gpu_util,power_w`.
pub fn read_telemetry<R: std::io::Read>(reader: R) -> Result<Vec<TelemetrySample>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let s: TelemetrySample = row?;
        if !(0.0..=100.0).contains(&s.battery_pct) || !s.cpu_temp_c.is_finite() || !s.gpu_temp_c.is_finite() {
            return Err(Error::Schema(format!("telemetry sample at t = {} out of range", s.timestamp)));
        }
        out.push(s);
    }
    Ok(out)
}

pub fn write_telemetry<W: Write>(samples: &[TelemetrySample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

/// Power CSV, either `timestamp_s,watts` or the telemetry layout (its
/// `timestamp` and `power_w` columns are used).
pub fn read_power_trace<R: std::io::Read>(reader: R, idle_watts: f64) -> Result<PowerTrace> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |names: &[&str]| headers.iter().position(|h| names.contains(&h));
    let t_col = col(&["timestamp_s", "timestamp"]).ok_or_else(|| Error::Schema("power CSV has no timestamp column".into()))?;
    let w_col = col(&["watts", "power_w"]).ok_or_else(|| Error::Schema("power CSV has no watts column".into()))?;
    let mut samples = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Schema(format!("power CSV row {}: unreadable number", n + 2)))
        };
        samples.push((parse(t_col)?, parse(w_col)?));
    }
    PowerTrace::new(samples, idle_watts)
}

pub fn write_power_trace<W: Write>(trace: &PowerTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp_s", "watts"])?;
    for (t, watts) in trace.samples() {
        w.write_record([t.to_string(), watts.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_profiles(text: &str) -> Result<Vec<AceProfile>> {
    let profiles: Vec<AceProfile> = serde_json::from_str(text)?;
    if profiles.is_empty() {
        return Err(Error::Empty("profile table"));
    }
    Ok(profiles)
}

pub fn write_profiles<W: Write>(profiles: &[AceProfile], mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, profiles)?;
    out.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predictions_round_trip() {
        let text = "{\"frame\": 3, \"boxes\": [[10, 20, 4, 4, 1, 0.9], [50, 50, 8, 8, 0, 0.4]]}\n\n{\"frame\": 7, \"boxes\": []}\n";
        let preds = read_predictions(text.as_bytes()).unwrap();
        assert_eq!(preds.len(), 2);
        let mut buf = Vec::new();
        write_predictions(&preds, &mut buf).unwrap();
        assert_eq!(read_predictions(buf.as_slice()).unwrap(), preds);
        assert!(read_predictions("{\"frame\": 1, \"boxes\": [[1, 2, 3]]}".as_bytes()).is_err());
        assert!(read_predictions("{\"frame\": 1, \"boxes\": [[1, 2, 3, 4, 0.5, 1]]}".as_bytes()).is_err());
    }

    #[test]
    fn ground_truth_accepts_optional_confidence() {
        let text = "{\"frame\": 1, \"boxes\": [[1, 2, 3, 4, 0]]}\n{\"frame\": 1, \"boxes\": [[5, 6, 7, 8, 1, 1.0]]}\n";
        let gt = read_ground_truth(text.as_bytes()).unwrap();
        assert_eq!(gt.len(), 1);
        assert_eq!(gt[0].entries.len(), 2);
    }

    #[test]
    fn events_and_telemetry() {
        let ev = read_events(r#"[{"class": 1, "start": 3, "end": 9}]"#).unwrap();
        assert_eq!(ev[0], GestureEvent::new(1, 3, 9));
        assert!(read_events(r#"[{"class": 1, "start": 9, "end": 3}]"#).is_err());

        let csv_text = "timestamp,battery_pct,cpu_temp,gpu_temp,gpu_util,power_w\n0,90,50,55,30,12.5\n5,89.5,51,56,35,13\n";
        let t = read_telemetry(csv_text.as_bytes()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[1].gpu_temp_c, 56.0);
        let mut buf = Vec::new();
        write_telemetry(&t, &mut buf).unwrap();
        assert_eq!(read_telemetry(buf.as_slice()).unwrap(), t);

        let power = read_power_trace(csv_text.as_bytes(), 10.0).unwrap();
        assert_eq!(power.samples(), &[(0.0, 12.5), (5.0, 13.0)]);
    }

    #[test]
    fn power_trace_round_trip() {
        let tr = read_power_trace("timestamp_s,watts\n0,3\n0.05,4\n0.1,3.5\n".as_bytes(), 1.0).unwrap();
        let mut buf = Vec::new();
        write_power_trace(&tr, &mut buf).unwrap();
        assert_eq!(read_power_trace(buf.as_slice(), 1.0).unwrap(), tr);
    }
}
