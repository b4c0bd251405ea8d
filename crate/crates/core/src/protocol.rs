//! Newline-delimited JSON batch-stream protocol.
//!
//! Batch records:
//! `{"batch_id", "phase", "shard", "sample_ids", "src", "tgt", "word_count"}`.
//! Control records carry an `"event"` key: `checkpoint`, `phase_advance` or
//! `end`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::pipeline::{Batch, EndReason, StreamEvent};

#[derive(Serialize)]
struct BatchRecordRef<'a> {
    batch_id: u64,
    phase: usize,
    shard: usize,
    sample_ids: &'a [usize],
    src: Vec<&'a [String]>,
    tgt: Vec<&'a [String]>,
    word_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub batch_id: u64,
    pub phase: usize,
    pub shard: usize,
    pub sample_ids: Vec<usize>,
    pub src: Vec<Vec<String>>,
    pub tgt: Vec<Vec<String>>,
    pub word_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ControlRecord {
    Checkpoint {
        checkpoint: u64,
        batches: u64,
    },
    PhaseAdvance {
        phase: usize,
        visible: Vec<usize>,
        batches: u64,
    },
    End {
        batches: u64,
        reason: EndReason,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Record {
    Batch(BatchRecord),
    Control(ControlRecord),
}

fn control_of(event: &StreamEvent) -> Option<ControlRecord> {
    Some(match event {
        StreamEvent::Batch(_) => return None,
        StreamEvent::Checkpoint {
            checkpoint,
            batches,
        } => ControlRecord::Checkpoint {
            checkpoint: *checkpoint,
            batches: *batches,
        },
        StreamEvent::PhaseAdvance {
            phase,
            visible,
            batches,
        } => ControlRecord::PhaseAdvance {
            phase: *phase,
            visible: visible.clone(),
            batches: *batches,
        },
        StreamEvent::End { batches, reason } => ControlRecord::End {
            batches: *batches,
            reason: *reason,
        },
    })
}

fn batch_json(batch: &Batch, corpus: &Corpus) -> serde_json::Result<String> {
    let pairs = batch.sample_ids.iter().map(|&id| &corpus[id]);
    serde_json::to_string(&BatchRecordRef {
        batch_id: batch.batch_id,
        phase: batch.phase,
        shard: batch.shard,
        sample_ids: &batch.sample_ids,
        src: pairs.clone().map(|p| p.src.as_slice()).collect(),
        tgt: pairs.map(|p| p.tgt.as_slice()).collect(),
        word_count: batch.word_count,
    })
}

/// Serialises one event as a single JSON line (without the newline).
pub fn event_line(event: &StreamEvent, corpus: &Corpus) -> String {
    let json = match event {
        StreamEvent::Batch(b) => batch_json(b, corpus),
        other => serde_json::to_string(&control_of(other).expect("control event")),
    };
    json.expect("stream records always serialise")
}

pub fn write_event(mut w: impl Write, event: &StreamEvent, corpus: &Corpus) -> std::io::Result<()> {
    let line = event_line(event, corpus);
    w.write_all(line.as_bytes())?;
    w.write_all(b"\n")
}

/// Parses one protocol line.
pub fn parse_record(line: &str) -> Result<Record> {
    let value: serde_json::Value = serde_json::from_str(line)
        .map_err(|e| Error::InvalidArgument(format!("malformed stream record: {e}")))?;
    let parsed = if value.get("event").is_some() {
        serde_json::from_value(value).map(Record::Control)
    } else {
        serde_json::from_value(value).map(Record::Batch)
    };
    parsed.map_err(|e| Error::InvalidArgument(format!("malformed stream record: {e}")))
}
